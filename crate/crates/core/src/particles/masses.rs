//! Deterministic mass evolution of the kernelized flow at fixed locations.

use serde::{Deserialize, Serialize};

use super::{sq_dist, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::targets::Target;

/// How distances between the fixed locations are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Geometry {
    Euclidean,
    /// Flat torus `[0, period)^d`; the kernel is wrapped in every coordinate.
    Torus { period: f64 },
}

const MAX_HALVINGS: u32 = 60;
const WRAP_TAIL: f64 = 1e-14;

fn wrapped_1d(kernel: &KernelSpec, z: f64, period: f64) -> f64 {
    let k1 = KernelSpec::new(kernel.epsilon(), 1).expect("bandwidth already validated");
    let z = z.rem_euclid(period);
    let mut total = k1.eval_sq(z * z);
    for s in 1.. {
        let s = s as f64 * period;
        let add = k1.eval_sq((z + s) * (z + s)) + k1.eval_sq((z - s) * (z - s));
        total += add;
        if add < WRAP_TAIL {
            break;
        }
    }
    total
}

/// Right-hand side of the masses ODE with a precomputed kernel matrix.
#[derive(Debug, Clone)]
pub struct MassesOde {
    n: usize,
    kernel_matrix: Vec<f64>,
    log_pi: Vec<f64>,
}

/// Outcome of one masses step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassesStep {
    /// Number of accepted Euler substeps covering `dt`.
    pub substeps: usize,
    /// Largest `|Σ m - 1|` seen before a renormalization.
    pub max_mass_drift: f64,
}

impl MassesOde {
    pub fn new<T: Target + ?Sized>(
        ensemble: &ParticleEnsemble,
        target: &T,
        kernel: &KernelSpec,
        geometry: Geometry,
    ) -> Result<Self> {
        if ensemble.dim() != target.dim() || kernel.dim() != ensemble.dim() {
            return Err(Error::DimensionMismatch {
                expected: ensemble.dim(),
                got: target.dim(),
            });
        }
        let n = ensemble.len();
        let mut kernel_matrix = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let (a, b) = (ensemble.particle(i), ensemble.particle(j));
                let v = match geometry {
                    Geometry::Euclidean => kernel.eval_sq(sq_dist(a, b)),
                    Geometry::Torus { period } => {
                        if !(period > 0.0) {
                            return Err(Error::input("torus period must be positive"));
                        }
                        a.iter().zip(b).map(|(x, y)| wrapped_1d(kernel, x - y, period)).product()
                    }
                };
                kernel_matrix[i * n + j] = v;
                kernel_matrix[j * n + i] = v;
            }
        }
        let log_pi = ensemble.particles().map(|x| target.log_density(x)).collect::<Vec<_>>();
        if log_pi.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("log density must be finite at every location"));
        }
        Ok(Self {
            n,
            kernel_matrix,
            log_pi,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `dm_i/dt = -m_i [log A_i - log π_i + B_i - Σ_l m_l (log A_l - log π_l) - 1]`
    /// with `A_i = Σ_j m_j K_ij` and `B_i = Σ_j m_j K_ij / A_j`.
    pub fn rhs(&self, m: &[f64]) -> Vec<f64> {
        let n = self.n;
        let k = &self.kernel_matrix;
        let a: Vec<f64> = k.chunks_exact(n).map(|row| row.iter().zip(m).map(|(x, y)| x * y).sum()).collect();
        let w: Vec<f64> = m.iter().zip(&a).map(|(mi, ai)| mi / ai).collect();
        let b: Vec<f64> = k.chunks_exact(n).map(|row| row.iter().zip(&w).map(|(x, y)| x * y).sum()).collect();
        let ent: Vec<f64> = a.iter().zip(&self.log_pi).map(|(ai, lp)| ai.ln() - lp).collect();
        let mean = m.iter().zip(&ent).map(|(mi, e)| mi * e).sum::<f64>() + 1.0;
        (0..n).map(|i| -m[i] * (ent[i] + b[i] - mean)).collect()
    }

    /// Explicit Euler over `dt`, halving the substep when a mass would
    /// leave the open simplex, then renormalizing.
    pub fn step(&self, ensemble: &mut ParticleEnsemble, dt: f64) -> Result<MassesStep> {
        if ensemble.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: ensemble.len(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::input(format!("time step must be positive, got {dt}")));
        }
        let mut m = ensemble.weights().to_vec();
        let mut remaining = dt;
        let mut out = MassesStep {
            substeps: 0,
            max_mass_drift: 0.0,
        };
        while remaining > 0.0 {
            let rate = self.rhs(&m);
            let mut tau = remaining;
            let mut halvings = 0;
            let next = loop {
                let cand: Vec<f64> = m.iter().zip(&rate).map(|(x, r)| x + tau * r).collect();
                if cand.iter().all(|v| *v > 0.0) {
                    break cand;
                }
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(Error::SolverAbort("masses ODE step underflowed while keeping masses positive".into()));
                }
                tau *= 0.5;
            };
            let total: f64 = next.iter().sum();
            out.max_mass_drift = out.max_mass_drift.max((total - 1.0).abs());
            m = next.into_iter().map(|v| v / total).collect();
            remaining = if tau >= remaining { 0.0 } else { remaining - tau };
            out.substeps += 1;
        }
        ensemble.set_weights(m)?;
        Ok(out)
    }
}

/// Single masses step in Euclidean geometry.
pub fn masses_ode_step<T: Target + ?Sized>(
    ensemble: &mut ParticleEnsemble,
    target: &T,
    kernel: &KernelSpec,
    dt: f64,
) -> Result<MassesStep> {
    MassesOde::new(ensemble, target, kernel, Geometry::Euclidean)?.step(ensemble, dt)
}
