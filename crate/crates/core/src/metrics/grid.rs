use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `h Σ values = 1`.
const MASS_TOL: f64 = 1e-8;

/// Probability density sampled at `x_i = i·h`, `h = period / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    values: Vec<f64>,
    period: f64,
}

fn check_raw(values: &[f64], period: f64) -> Result<()> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::input(format!("period must be positive, got {period}")));
    }
    if values.is_empty() {
        return Err(Error::input("grid density needs at least one node"));
    }
    if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::input(format!("density value {} at node {i} is not a nonnegative real", values[i])));
    }
    Ok(())
}

impl GridDensity {
    /// Validates that `values` already integrates to one.
    pub fn new(values: Vec<f64>, period: f64) -> Result<Self> {
        check_raw(&values, period)?;
        let g = Self { values, period };
        let m = g.mass();
        if (m - 1.0).abs() > MASS_TOL {
            return Err(Error::input(format!("density integrates to {m}, not 1")));
        }
        Ok(g)
    }

    /// Rescales nonnegative `values` to unit mass.
    pub fn normalized(mut values: Vec<f64>, period: f64) -> Result<Self> {
        check_raw(&values, period)?;
        let h = period / values.len() as f64;
        let m = h * values.iter().sum::<f64>();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::input("cannot normalize a density with zero or infinite mass"));
        }
        values.iter_mut().for_each(|v| *v /= m);
        Ok(Self { values, period })
    }

    pub fn uniform(n: usize, period: f64) -> Result<Self> {
        Self::normalized(vec![1.0; n.max(1)], period).and_then(|g| {
            if n == 0 {
                Err(Error::input("grid density needs at least one node"))
            } else {
                Ok(g)
            }
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.period / self.values.len() as f64
    }

    /// Node coordinates `i·h`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.len()).map(|i| i as f64 * h).collect()
    }

    /// `h Σ values`.
    pub fn mass(&self) -> f64 {
        self.h() * self.values.iter().sum::<f64>()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|v| *v > 0.0)
    }

    pub(crate) fn check_same_grid(&self, other: &GridDensity) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch(format!("{} vs {} nodes", self.len(), other.len())));
        }
        if (self.period - other.period).abs() > 1e-12 * self.period.max(other.period) {
            return Err(Error::GridMismatch(format!("period {} vs {}", self.period, other.period)));
        }
        Ok(())
    }
}
