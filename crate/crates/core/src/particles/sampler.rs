//! Time loop shared by the particle samplers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    bd_jump_step, bd_rates_chi2, bd_rates_kl, bd_rates_kl_nongradient, svgd_step, ula_step, JumpDiagnostics,
    ParticleEnsemble,
};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::targets::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Langevin move, then a jump step with the regularized-entropy rates.
    BdlsKl,
    /// Langevin move, then a jump step with the regularized χ² rates.
    BdlsChi2,
    /// Langevin move, then a jump step with the non-gradient rates.
    BdlsKlNongradient,
    Ula,
    Svgd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::BdlsKl => "bdls_kl",
            Algorithm::BdlsChi2 => "bdls_chi2",
            Algorithm::BdlsKlNongradient => "bdls_kl_nongradient",
            Algorithm::Ula => "ula",
            Algorithm::Svgd => "svgd",
        }
    }

    pub fn has_jumps(self) -> bool {
        matches!(self, Algorithm::BdlsKl | Algorithm::BdlsChi2 | Algorithm::BdlsKlNongradient)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub algorithm: Algorithm,
    pub dt: f64,
    pub t_final: f64,
    /// Kernel bandwidth for the jump rates.
    pub epsilon: f64,
    pub record_interval: f64,
    /// Surrogate `log Z` for the χ² rates when the target has none.
    pub log_normalizer: Option<f64>,
}

/// Independent streams for the Langevin noise and the jump decisions, so
/// that a jump variant with no events follows the ULA path exactly.
#[derive(Debug, Clone)]
pub struct SamplerRng {
    pub langevin: ChaCha8Rng,
    pub jump: ChaCha8Rng,
}

impl SamplerRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut langevin = ChaCha8Rng::seed_from_u64(seed);
        langevin.set_stream(2 * stream);
        let mut jump = ChaCha8Rng::seed_from_u64(seed);
        jump.set_stream(2 * stream + 1);
        Self { langevin, jump }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub steps: usize,
    pub jumps: JumpDiagnostics,
    pub clipped_rates: usize,
}

/// One step of `spec.algorithm`.
pub fn sampler_step<T: Target + ?Sized>(
    spec: &SamplerSpec,
    kernel: &KernelSpec,
    target: &T,
    ensemble: &mut ParticleEnsemble,
    rng: &mut SamplerRng,
    diag: &mut SamplerDiagnostics,
) -> Result<()> {
    match spec.algorithm {
        Algorithm::Svgd => svgd_step(ensemble, target, spec.dt)?,
        alg => {
            ula_step(ensemble, target, spec.dt, &mut rng.langevin)?;
            if alg.has_jumps() {
                let rates = match alg {
                    Algorithm::BdlsKl => bd_rates_kl(ensemble, target, kernel)?,
                    Algorithm::BdlsChi2 => bd_rates_chi2(ensemble, target, kernel, spec.log_normalizer)?,
                    _ => bd_rates_kl_nongradient(ensemble, target, kernel)?,
                };
                diag.clipped_rates += rates.clipped;
                diag.jumps += bd_jump_step(ensemble, &rates, spec.dt, &mut rng.jump)?;
            }
        }
    }
    diag.steps += 1;
    Ok(())
}

fn whole_steps(span: f64, dt: f64, what: &str) -> Result<usize> {
    let k = (span / dt).round();
    if !(k >= 1.0) || (k * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::Config(format!("{what} {span} is not a whole number of steps of {dt}")));
    }
    Ok(k as usize)
}

/// Runs to `t_final`, calling `observe(t, ensemble)` at `t = 0`, every
/// `record_interval` and at the end.
pub fn run_sampler<T: Target + ?Sized>(
    spec: &SamplerSpec,
    target: &T,
    ensemble: &mut ParticleEnsemble,
    rng: &mut SamplerRng,
    mut observe: impl FnMut(f64, &ParticleEnsemble) -> Result<()>,
) -> Result<SamplerDiagnostics> {
    if ensemble.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: ensemble.dim(),
        });
    }
    if spec.algorithm == Algorithm::BdlsChi2 && spec.log_normalizer.is_none() && target.log_normalizer().is_none() {
        return Err(Error::Config("the chi2 rate needs a normalized target or a surrogate log normalizer".into()));
    }
    let kernel = KernelSpec::new(spec.epsilon, ensemble.dim())?;
    let n_steps = whole_steps(spec.t_final, spec.dt, "final time")?;
    let every = whole_steps(spec.record_interval, spec.dt, "record interval")?;
    let mut diag = SamplerDiagnostics::default();
    observe(0.0, ensemble)?;
    for k in 1..=n_steps {
        sampler_step(spec, &kernel, target, ensemble, rng, &mut diag)?;
        if k % every == 0 || k == n_steps {
            observe(k as f64 * spec.dt, ensemble)?;
        }
    }
    Ok(diag)
}

/// Birth-death Langevin run from `initial` with the seed's first stream.
pub fn bdls_run<T: Target + ?Sized>(
    spec: &SamplerSpec,
    target: &T,
    initial: ParticleEnsemble,
    seed: u64,
    observe: impl FnMut(f64, &ParticleEnsemble) -> Result<()>,
) -> Result<(ParticleEnsemble, SamplerDiagnostics)> {
    if !spec.algorithm.has_jumps() {
        return Err(Error::Config(format!("{} is not a birth-death variant", spec.algorithm.name())));
    }
    let mut ensemble = initial;
    let mut rng = SamplerRng::new(seed, 0);
    let diag = run_sampler(spec, target, &mut ensemble, &mut rng, observe)?;
    Ok((ensemble, diag))
}
