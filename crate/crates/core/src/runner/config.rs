//! Experiment configuration: strict JSON, preset defaults, exhaustive validation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::Scheme;
use crate::particles::Algorithm;
use crate::targets::mixture::MixtureParams;
use crate::targets::{DatasetOptions, GaussianMixture, TorusPotential, DEFAULT_PRIOR_RATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    TorusDecay,
    EpsScaling,
    GmmParticles,
    BayesLogreg,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::TorusDecay,
        Preset::EpsScaling,
        Preset::GmmParticles,
        Preset::BayesLogreg,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::TorusDecay => "torus_decay",
            Preset::EpsScaling => "eps_scaling",
            Preset::GmmParticles => "gmm_particles",
            Preset::BayesLogreg => "bayes_logreg",
            Preset::Custom => "custom",
        }
    }

    /// Figure or table of the reference experiments this preset reproduces.
    pub fn anchor(self) -> &'static str {
        match self {
            Preset::TorusDecay => "Figure 1 (torus, V(x) = sin x + 2 sin 2x): KL and chi2 decay with their envelopes",
            Preset::EpsScaling => "Figure 1 right panel: final KL versus kernel bandwidth",
            Preset::GmmParticles => "Figure 2, Example 1: N=800, dt=1e-3, eps=0.2 on the four-mode mixture",
            Preset::BayesLogreg => "Table 1, Example 2: N=500, dt=1e-3, T=15 Bayesian logistic regression",
            Preset::Custom => "none (user-defined experiment)",
        }
    }

    pub fn kind(self) -> Option<ExperimentKind> {
        match self {
            Preset::TorusDecay => Some(ExperimentKind::Decay),
            Preset::EpsScaling => Some(ExperimentKind::EpsScaling),
            Preset::GmmParticles => Some(ExperimentKind::Particles),
            Preset::BayesLogreg => Some(ExperimentKind::Bayes),
            Preset::Custom => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Mean-field trajectories with decay envelopes, one per scheme.
    Decay,
    /// Mean-field bandwidth ladder at a fixed horizon.
    EpsScaling,
    /// Particle samplers on a Gaussian mixture.
    Particles,
    /// Particle samplers on a logistic-regression posterior.
    Bayes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum MixtureSpec {
    /// The four-mode planar mixture.
    FourMode,
    /// The broad initial law paired with the four-mode mixture.
    FourModeInitial,
    Params(MixtureParams),
}

impl MixtureSpec {
    pub fn build(&self) -> Result<GaussianMixture> {
        match self {
            MixtureSpec::FourMode => Ok(GaussianMixture::four_mode_example()),
            MixtureSpec::FourModeInitial => Ok(GaussianMixture::four_mode_initial()),
            MixtureSpec::Params(p) => GaussianMixture::try_from(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum DatasetSource {
    /// Two planar blobs separated by a line; see `synthetic_separable`.
    Synthetic { n: usize, seed: u64 },
    File {
        path: PathBuf,
        #[serde(default)]
        options: DatasetOptions,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    Torus {
        potential: TorusPotential,
    },
    GaussianMixture {
        target: MixtureSpec,
        initial: MixtureSpec,
        /// `f(x) = Σ c_k x_k²` for the observable error.
        observable: Vec<f64>,
        /// Bandwidth of the MMD kernel.
        mmd_epsilon: f64,
    },
    Logistic {
        dataset: DatasetSource,
        train_fraction: f64,
        prior_rate: f64,
    },
}

impl TargetSpec {
    fn kind_name(&self) -> &'static str {
        match self {
            TargetSpec::Torus { .. } => "torus",
            TargetSpec::GaussianMixture { .. } => "gaussian_mixture",
            TargetSpec::Logistic { .. } => "logistic",
        }
    }
}

/// A fully specified, validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub kind: ExperimentKind,
    pub target: TargetSpec,
    /// Particle samplers (particle and Bayes kinds).
    pub algorithms: Vec<Algorithm>,
    /// Mean-field schemes (decay kind).
    pub schemes: Vec<Scheme>,
    pub n_particles: usize,
    pub n_grid: usize,
    pub dt: f64,
    pub t_final: f64,
    pub record_interval: f64,
    /// Jump-rate or mean-field kernel bandwidth.
    pub epsilon: f64,
    /// Bandwidth ladder (eps-scaling kind).
    pub epsilons: Vec<f64>,
    /// Surrogate `log Z` for the chi2 rates on unnormalized targets.
    pub log_normalizer: Option<f64>,
    pub seed: u64,
    pub replicates: usize,
    pub output_dir: PathBuf,
}

/// The document as written: every field optional, unknown keys rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<Preset>,
    kind: Option<ExperimentKind>,
    target: Option<TargetSpec>,
    algorithms: Option<Vec<Algorithm>>,
    schemes: Option<Vec<Scheme>>,
    n_particles: Option<usize>,
    n_grid: Option<usize>,
    dt: Option<f64>,
    t_final: Option<f64>,
    record_interval: Option<f64>,
    epsilon: Option<f64>,
    epsilons: Option<Vec<f64>>,
    log_normalizer: Option<f64>,
    seed: Option<u64>,
    replicates: Option<usize>,
    output_dir: Option<PathBuf>,
}

pub fn four_mode_target() -> TargetSpec {
    TargetSpec::GaussianMixture {
        target: MixtureSpec::FourMode,
        initial: MixtureSpec::FourModeInitial,
        observable: vec![1.0 / 3.0, 0.2],
        mmd_epsilon: 1.0,
    }
}

pub fn synthetic_logistic_target() -> TargetSpec {
    TargetSpec::Logistic {
        dataset: DatasetSource::Synthetic { n: 400, seed: 0 },
        train_fraction: 0.8,
        prior_rate: DEFAULT_PRIOR_RATE,
    }
}

impl ExperimentConfig {
    /// Defaults of a preset. `Custom` starts from the particle defaults.
    pub fn preset(preset: Preset) -> Self {
        let torus = TargetSpec::Torus {
            potential: TorusPotential::bimodal(),
        };
        let base = Self {
            preset,
            kind: ExperimentKind::Decay,
            target: torus,
            algorithms: vec![],
            schemes: vec![],
            n_particles: 800,
            n_grid: 1024,
            dt: 1e-3,
            t_final: 15.0,
            record_interval: 0.1,
            epsilon: 0.2,
            epsilons: vec![],
            log_normalizer: None,
            seed: 0,
            replicates: 1,
            output_dir: PathBuf::from("out").join(preset.name()),
        };
        match preset {
            Preset::TorusDecay => Self {
                schemes: vec![Scheme::Bd, Scheme::Bd2],
                ..base
            },
            Preset::EpsScaling => Self {
                kind: ExperimentKind::EpsScaling,
                schemes: vec![Scheme::Bde],
                epsilons: vec![0.05, 0.1, 0.2, 0.3, 0.4],
                ..base
            },
            Preset::GmmParticles | Preset::Custom => Self {
                kind: ExperimentKind::Particles,
                target: four_mode_target(),
                algorithms: vec![Algorithm::BdlsKl, Algorithm::BdlsChi2, Algorithm::Ula, Algorithm::Svgd],
                t_final: 10.0,
                record_interval: 0.5,
                replicates: 10,
                ..base
            },
            Preset::BayesLogreg => Self {
                kind: ExperimentKind::Bayes,
                target: synthetic_logistic_target(),
                algorithms: vec![Algorithm::BdlsKl, Algorithm::Svgd],
                n_particles: 500,
                t_final: 15.0,
                record_interval: 0.5,
                epsilon: 0.5,
                replicates: 5,
                ..base
            },
        }
    }

    /// Parses a JSON document, fills preset defaults and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "experiment config".into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let cfg = Self::merge(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn merge(raw: RawConfig) -> Result<Self> {
        let Some(preset) = raw.preset else {
            return Err(Error::Validation(vec!["preset: missing (one of torus_decay, eps_scaling, gmm_particles, bayes_logreg, custom)".into()]));
        };
        let d = Self::preset(preset);
        let kind = match (preset, raw.kind) {
            (Preset::Custom, Some(k)) => k,
            (Preset::Custom, None) => {
                return Err(Error::Validation(vec!["kind: required for the custom preset".into()]));
            }
            (p, Some(k)) if Some(k) != p.kind() => {
                return Err(Error::Validation(vec![format!(
                    "kind: preset {} runs {:?} experiments, got {:?}",
                    p.name(),
                    p.kind().expect("named presets have a kind"),
                    k
                )]));
            }
            (_, _) => d.kind,
        };
        // A custom experiment inherits the defaults of the named preset of its kind.
        let d = if preset == Preset::Custom {
            let named = Preset::ALL.into_iter().find(|p| p.kind() == Some(kind)).expect("every kind has a preset");
            Self {
                preset,
                output_dir: d.output_dir,
                ..Self::preset(named)
            }
        } else {
            d
        };
        Ok(Self {
            preset,
            kind,
            target: raw.target.unwrap_or(d.target),
            algorithms: raw.algorithms.unwrap_or(d.algorithms),
            schemes: raw.schemes.unwrap_or(d.schemes),
            n_particles: raw.n_particles.unwrap_or(d.n_particles),
            n_grid: raw.n_grid.unwrap_or(d.n_grid),
            dt: raw.dt.unwrap_or(d.dt),
            t_final: raw.t_final.unwrap_or(d.t_final),
            record_interval: raw.record_interval.unwrap_or(d.record_interval),
            epsilon: raw.epsilon.unwrap_or(d.epsilon),
            epsilons: raw.epsilons.unwrap_or(d.epsilons),
            log_normalizer: raw.log_normalizer.or(d.log_normalizer),
            seed: raw.seed.unwrap_or(d.seed),
            replicates: raw.replicates.unwrap_or(d.replicates),
            output_dir: raw.output_dir.unwrap_or(d.output_dir),
        })
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name}: must be positive and finite, got {v}"));
            }
        };
        positive("dt", self.dt);
        positive("t_final", self.t_final);
        positive("record_interval", self.record_interval);
        positive("epsilon", self.epsilon);
        for (i, e) in self.epsilons.iter().enumerate() {
            positive(&format!("epsilons[{i}]"), *e);
        }
        match &self.target {
            TargetSpec::GaussianMixture { observable, mmd_epsilon, target, initial } => {
                positive("target.mmd_epsilon", *mmd_epsilon);
                for (name, m) in [("target.target", target), ("target.initial", initial)] {
                    match m.build() {
                        Ok(g) if g.dim() != observable.len() => errs.push(format!(
                            "target.observable: has {} coefficients for a {}-dimensional mixture ({name})",
                            observable.len(),
                            g.dim()
                        )),
                        Ok(_) => {}
                        Err(e) => errs.push(format!("{name}: {e}")),
                    }
                }
            }
            TargetSpec::Logistic { dataset, train_fraction, prior_rate } => {
                positive("target.prior_rate", *prior_rate);
                if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                    errs.push(format!("target.train_fraction: must lie in (0, 1), got {train_fraction}"));
                }
                if let DatasetSource::Synthetic { n, .. } = dataset {
                    if *n < 4 {
                        errs.push(format!("target.dataset.synthetic.n: need at least 4 points, got {n}"));
                    }
                }
            }
            TargetSpec::Torus { .. } => {}
        }
        if let Some(z) = self.log_normalizer {
            if !z.is_finite() {
                errs.push("log_normalizer: must be finite".into());
            }
        }
        if self.replicates < 1 {
            errs.push("replicates: must be at least 1".into());
        }
        if self.dt > 0.0 && self.t_final > 0.0 {
            let steps = self.t_final / self.dt;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                errs.push(format!("t_final: {} is not a whole number of steps of dt={}", self.t_final, self.dt));
            }
            let every = self.record_interval / self.dt;
            if self.record_interval > 0.0 && (every < 0.5 || (every - every.round()).abs() > 1e-9 * every.max(1.0)) {
                errs.push(format!(
                    "record_interval: {} is not a whole number of steps of dt={}",
                    self.record_interval, self.dt
                ));
            }
        }
        let want_target = match self.kind {
            ExperimentKind::Decay | ExperimentKind::EpsScaling => "torus",
            ExperimentKind::Particles => "gaussian_mixture",
            ExperimentKind::Bayes => "logistic",
        };
        if self.target.kind_name() != want_target {
            errs.push(format!(
                "target.kind: {:?} experiments need a {want_target} target, got {}",
                self.kind,
                self.target.kind_name()
            ));
        }
        match self.kind {
            ExperimentKind::Decay | ExperimentKind::EpsScaling => {
                if self.n_grid < 8 {
                    errs.push(format!("n_grid: must be at least 8, got {}", self.n_grid));
                }
                if self.schemes.is_empty() {
                    errs.push("schemes: at least one scheme is required".into());
                }
                if self.kind == ExperimentKind::EpsScaling {
                    if self.epsilons.len() < 2 {
                        errs.push("epsilons: the ladder needs at least two bandwidths".into());
                    }
                    if self.schemes.iter().any(|s| !s.needs_kernel()) {
                        errs.push("schemes: the bandwidth ladder needs kernelized schemes (bde, bdls)".into());
                    }
                }
            }
            ExperimentKind::Particles | ExperimentKind::Bayes => {
                if self.n_particles < 1 {
                    errs.push("n_particles: must be at least 1".into());
                }
                if self.algorithms.is_empty() {
                    errs.push("algorithms: at least one algorithm is required".into());
                }
                if self.kind == ExperimentKind::Bayes
                    && self.log_normalizer.is_none()
                    && self.algorithms.contains(&Algorithm::BdlsChi2)
                {
                    errs.push("algorithms: bdls_chi2 on a logistic posterior needs log_normalizer".into());
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json(&text)
}
