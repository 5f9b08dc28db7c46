use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N` particles in `d` dimensions with a probability weight vector.
///
/// Positions are stored row-major, particle `i` occupying
/// `positions[i * dim..(i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<f64>,
    weights: Vec<f64>,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl ParticleEnsemble {
    /// Equal-weight ensemble from a flat row-major position buffer.
    pub fn uniform(dim: usize, positions: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("ensemble dimension must be at least 1"));
        }
        if positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(Error::input(format!(
                "position buffer of length {} is not a non-empty multiple of dim {dim}",
                positions.len()
            )));
        }
        if let Some(i) = positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::input(format!("non-finite coordinate for particle {}", i / dim)));
        }
        let n = positions.len() / dim;
        Ok(Self {
            dim,
            positions,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Self::uniform(dim, rows.concat())
    }

    /// Ensemble with explicit weights; they must be positive and sum to one.
    pub fn weighted(dim: usize, positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut ens = Self::uniform(dim, positions)?;
        if weights.len() != ens.len() {
            return Err(Error::DimensionMismatch {
                expected: ens.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::input("weights must be finite and strictly positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::input(format!("weights sum to {total}, not 1")));
        }
        ens.weights = weights;
        Ok(ens)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particle_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.positions.chunks_exact(self.dim)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn has_uniform_weights(&self) -> bool {
        let w0 = 1.0 / self.len() as f64;
        self.weights.iter().all(|&w| (w - w0).abs() <= WEIGHT_SUM_TOL)
    }

    /// Replace the weights with a new probability vector of the same length.
    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        let next = Self::weighted(self.dim, self.positions.clone(), weights)?;
        self.weights = next.weights;
        Ok(())
    }

    /// Copy particle `from` onto slot `to`.
    pub(crate) fn copy_particle(&mut self, from: usize, to: usize) {
        if from == to {
            return;
        }
        let d = self.dim;
        self.positions.copy_within(from * d..(from + 1) * d, to * d);
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.particles().map(<[f64]>::to_vec).collect()
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
