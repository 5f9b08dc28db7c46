//! Birth-death jump rates for equal-weight ensembles.

use serde::{Deserialize, Serialize};

use super::pairwise::PackedSym;
use super::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::targets::Target;

/// Rates beyond this magnitude are clipped.
pub const RATE_CLIP: f64 = 1e6;
/// Upper cap on the χ² first variation before the mean is taken.
const CHI2_CAP_LOG: f64 = 575.6; // ln(1e250)

/// Signed per-particle rates: positive kills, negative duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRates {
    pub lambda: Vec<f64>,
    /// Number of entries clipped to `±RATE_CLIP`.
    pub clipped: usize,
}

impl JumpRates {
    pub fn zeros(n: usize) -> Self {
        Self {
            lambda: vec![0.0; n],
            clipped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.lambda.iter().sum::<f64>() / self.lambda.len() as f64
    }

    fn clipped_from(lambda: Vec<f64>) -> Self {
        let mut clipped = 0;
        let lambda = lambda
            .into_iter()
            .map(|v| {
                if v.abs() > RATE_CLIP {
                    clipped += 1;
                    v.clamp(-RATE_CLIP, RATE_CLIP)
                } else {
                    v
                }
            })
            .collect();
        Self { lambda, clipped }
    }
}

fn check_inputs<T: Target + ?Sized>(ensemble: &ParticleEnsemble, target: &T, kernel: &KernelSpec) -> Result<()> {
    if ensemble.dim() != target.dim() || kernel.dim() != ensemble.dim() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.dim(),
            got: if kernel.dim() != ensemble.dim() { kernel.dim() } else { target.dim() },
        });
    }
    if !ensemble.has_uniform_weights() {
        return Err(Error::input("jump rates need an equal-weight ensemble"));
    }
    Ok(())
}

fn log_targets<T: Target + ?Sized>(ensemble: &ParticleEnsemble, target: &T) -> Result<Vec<f64>> {
    ensemble
        .particles()
        .enumerate()
        .map(|(i, x)| {
            let v = target.log_density(x);
            if v.is_nan() || v == f64::INFINITY {
                Err(Error::SolverAbort(format!("log density is {v} at particle {i}")))
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Rates of the regularized-entropy flow for `ρ = (1/N) Σ δ_{x_i}`:
///
/// `Λ_i = log(ρ̂_i) + Σ_j K_ij / Σ_l K_jl - log π̂_i - mean(log ρ̂) - 1 + mean(log π̂)`
/// with `ρ̂_i = (1/N) Σ_j K_ij`.
pub fn bd_rates_kl<T: Target + ?Sized>(ensemble: &ParticleEnsemble, target: &T, kernel: &KernelSpec) -> Result<JumpRates> {
    check_inputs(ensemble, target, kernel)?;
    let n = ensemble.len();
    if n == 1 {
        // K/K can round to 1 - ulp; a lone particle has nothing to trade mass with.
        log_targets(ensemble, target)?;
        return Ok(JumpRates::zeros(1));
    }
    let k = PackedSym::density_kernel(ensemble, kernel);
    let s = k.matvec(&vec![1.0; n]);
    let log_pi = log_targets(ensemble, target)?;
    let log_kde: Vec<f64> = s.iter().map(|v| (v / n as f64).ln()).collect();
    let inv_s: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
    let ratio = k.matvec(&inv_s);
    let mean_kde = log_kde.iter().sum::<f64>() / n as f64;
    let mean_pi = log_pi.iter().sum::<f64>() / n as f64;
    let lambda = (0..n)
        .map(|i| (log_kde[i] - mean_kde) + (ratio[i] - 1.0) + (mean_pi - log_pi[i]))
        .collect();
    Ok(JumpRates::clipped_from(lambda))
}

/// The non-gradient rate `log(ρ̂_i / π̂_i) - mean`, kept for comparisons.
pub fn bd_rates_kl_nongradient<T: Target + ?Sized>(
    ensemble: &ParticleEnsemble,
    target: &T,
    kernel: &KernelSpec,
) -> Result<JumpRates> {
    check_inputs(ensemble, target, kernel)?;
    let n = ensemble.len();
    let s = PackedSym::density_kernel(ensemble, kernel).matvec(&vec![1.0; n]);
    let log_pi = log_targets(ensemble, target)?;
    let raw: Vec<f64> = s.iter().zip(&log_pi).map(|(v, lp)| (v / n as f64).ln() - lp).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    Ok(JumpRates::clipped_from(raw.into_iter().map(|v| v - mean).collect()))
}

/// Rates of the regularized χ² flow, `δE = ½ (K*ρ)/π + ½ K*(ρ/π)` minus its mean.
///
/// `π` must be normalized: the target's own normalizer is used unless
/// `log_normalizer` supplies a surrogate.
pub fn bd_rates_chi2<T: Target + ?Sized>(
    ensemble: &ParticleEnsemble,
    target: &T,
    kernel: &KernelSpec,
    log_normalizer: Option<f64>,
) -> Result<JumpRates> {
    check_inputs(ensemble, target, kernel)?;
    let log_z = log_normalizer.or_else(|| target.log_normalizer()).ok_or_else(|| {
        Error::Config("the chi2 rate needs a normalized target or a surrogate log normalizer".into())
    })?;
    let n = ensemble.len();
    let nf = n as f64;
    let k = PackedSym::density_kernel(ensemble, kernel);
    let s = k.matvec(&vec![1.0; n]);
    let neg_log_pi: Vec<f64> = log_targets(ensemble, target)?.iter().map(|lp| log_z - lp).collect();
    let shift = neg_log_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = neg_log_pi.iter().map(|v| (v - shift).exp()).collect();
    let capped = |log_v: f64| log_v.min(CHI2_CAP_LOG).exp();
    let b_sum = k.matvec(&scaled);
    let delta: Vec<f64> = (0..n)
        .map(|i| {
            let a = capped((s[i] / nf).ln() + neg_log_pi[i]);
            let b = capped((b_sum[i] / nf).ln() + shift);
            0.5 * a + 0.5 * b
        })
        .collect();
    let mean = delta.iter().sum::<f64>() / nf;
    Ok(JumpRates::clipped_from(delta.into_iter().map(|v| v - mean).collect()))
}
