//! Target measures `π ∝ e^{-V}`.
//!
//! Every target exposes an unnormalized log-density and its gradient. When
//! the normalizing constant is known it is reported by
//! [`Target::log_normalizer`], with `log π(x) = log_density(x) - log_normalizer()`.

mod dataset;
pub(crate) mod logistic;
pub(crate) mod mixture;
mod torus;

pub use dataset::{load_dataset, synthetic_separable, Dataset, DatasetFormat, DatasetOptions, LabelColumn};
pub use logistic::{LogisticPosterior, DEFAULT_PRIOR_RATE};
pub use mixture::{GaussianMixture, MixtureParams};
pub use torus::{TorusPotential, TorusTarget, TORUS_PERIOD};

use crate::error::{Error, Result};

pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    /// `log π(x) + log Z`; inputs are assumed to have length `dim()`.
    fn log_density(&self, x: &[f64]) -> f64;

    fn grad_log_density_into(&self, x: &[f64], out: &mut [f64]);

    /// `log Z` for the convention used by [`Target::log_density`], if known.
    fn log_normalizer(&self) -> Option<f64> {
        None
    }
}

fn check_point(target: &dyn Target, x: &[f64]) -> Result<()> {
    if x.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite coordinate"));
    }
    Ok(())
}

/// Checked `log π(x) + log Z`.
pub fn log_density_unnorm(target: &dyn Target, x: &[f64]) -> Result<f64> {
    check_point(target, x)?;
    Ok(target.log_density(x))
}

/// Checked `∇ log π(x)`.
pub fn grad_log_density(target: &dyn Target, x: &[f64]) -> Result<Vec<f64>> {
    check_point(target, x)?;
    let mut g = vec![0.0; x.len()];
    target.grad_log_density_into(x, &mut g);
    Ok(g)
}

/// `log π(x)` when the normalizer is known.
pub fn log_density_normalized(target: &dyn Target, x: &[f64]) -> Result<f64> {
    let log_z = target
        .log_normalizer()
        .ok_or_else(|| Error::Config("target has no known normalizing constant".into()))?;
    Ok(log_density_unnorm(target, x)? - log_z)
}

impl<T: Target + ?Sized> Target for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn grad_log_density_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).grad_log_density_into(x, out)
    }
    fn log_normalizer(&self) -> Option<f64> {
        (**self).log_normalizer()
    }
}
