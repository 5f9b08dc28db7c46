use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mixture::log_sum_exp;
use super::Target;
use crate::error::{Error, Result};
use crate::metrics::GridDensity;

/// Trigonometric potential `V(x) = Σ_k a_k sin(kx) + b_k cos(kx)` on `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TorusPotential {
    #[serde(default)]
    pub sin: Vec<f64>,
    #[serde(default)]
    pub cos: Vec<f64>,
}

impl TorusPotential {
    /// `V(x) = sin x + 2 sin 2x`, the bimodal potential of the torus experiments.
    pub fn bimodal() -> Self {
        Self {
            sin: vec![1.0, 2.0],
            cos: vec![],
        }
    }

    pub fn flat() -> Self {
        Self::default()
    }

    pub fn value(&self, x: f64) -> f64 {
        let s: f64 = self.sin.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * x).sin()).sum();
        let c: f64 = self.cos.iter().enumerate().map(|(k, b)| b * ((k + 1) as f64 * x).cos()).sum();
        s + c
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let s: f64 = self
            .sin
            .iter()
            .enumerate()
            .map(|(k, a)| a * (k + 1) as f64 * ((k + 1) as f64 * x).cos())
            .sum();
        let c: f64 = self
            .cos
            .iter()
            .enumerate()
            .map(|(k, b)| -b * (k + 1) as f64 * ((k + 1) as f64 * x).sin())
            .sum();
        s + c
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Potential {
    Fourier(TorusPotential),
    Custom { value: ScalarFn, derivative: ScalarFn },
}

impl Potential {
    fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Fourier(p) => p.value(x),
            Potential::Custom { value, .. } => value(x),
        }
    }
    fn derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Fourier(p) => p.derivative(x),
            Potential::Custom { derivative, .. } => derivative(x),
        }
    }
}

/// Gibbs measure `e^{-V}/Z` on the torus `[0, 2π)` sampled on a uniform grid.
#[derive(Clone)]
pub struct TorusTarget {
    potential: Potential,
    grid_values: Vec<f64>,
    grad_values: Vec<f64>,
    log_z: f64,
    density: GridDensity,
}

impl fmt::Debug for TorusTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusTarget")
            .field("n", &self.grid_values.len())
            .field("log_z", &self.log_z)
            .finish()
    }
}

pub const TORUS_PERIOD: f64 = 2.0 * PI;

impl TorusTarget {
    pub fn new(potential: TorusPotential, n: usize) -> Result<Self> {
        Self::build(Potential::Fourier(potential), n)
    }

    /// Arbitrary smooth periodic potential with its derivative.
    pub fn from_fn(
        n: usize,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::build(
            Potential::Custom {
                value: Arc::new(value),
                derivative: Arc::new(derivative),
            },
            n,
        )
    }

    fn build(potential: Potential, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::input(format!("torus grid needs at least 4 points, got {n}")));
        }
        let h = TORUS_PERIOD / n as f64;
        let grid_values: Vec<f64> = (0..n).map(|i| potential.value(i as f64 * h)).collect();
        if grid_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("potential is not finite on the grid"));
        }
        let grad_values = (0..n).map(|i| potential.derivative(i as f64 * h)).collect();
        let neg: Vec<f64> = grid_values.iter().map(|v| -v).collect();
        let log_z = log_sum_exp(&neg) + h.ln();
        let density = GridDensity::normalized(neg.iter().map(|v| (v - log_z).exp()).collect(), TORUS_PERIOD)?;
        Ok(Self {
            potential,
            grid_values,
            grad_values,
            log_z,
            density,
        })
    }

    pub fn bimodal(n: usize) -> Result<Self> {
        Self::new(TorusPotential::bimodal(), n)
    }

    pub fn len(&self) -> usize {
        self.grid_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_values.is_empty()
    }

    pub fn h(&self) -> f64 {
        TORUS_PERIOD / self.len() as f64
    }

    pub fn period(&self) -> f64 {
        TORUS_PERIOD
    }

    /// `V` at the grid nodes.
    pub fn potential_values(&self) -> &[f64] {
        &self.grid_values
    }

    /// `V'` at the grid nodes.
    pub fn potential_derivative(&self) -> &[f64] {
        &self.grad_values
    }

    /// Quadrature normalizer `Z = h Σ e^{-V_i}`.
    pub fn normalizer(&self) -> f64 {
        self.log_z.exp()
    }

    /// Normalized `π` on the grid.
    pub fn density(&self) -> &GridDensity {
        &self.density
    }

    /// `log π_i = -V_i - log Z`.
    pub fn log_density_grid(&self) -> Vec<f64> {
        self.grid_values.iter().map(|v| -v - self.log_z).collect()
    }
}

impl Target for TorusTarget {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        -self.potential.value(x[0])
    }

    fn grad_log_density_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.potential.derivative(x[0]);
    }

    fn log_normalizer(&self) -> Option<f64> {
        Some(self.log_z)
    }
}
