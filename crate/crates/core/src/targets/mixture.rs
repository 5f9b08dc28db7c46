use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Target;
use crate::error::{Error, Result};
use crate::particles::ParticleEnsemble;

/// Finite Gaussian mixture `Σ_i w_i N(m_i, Σ_i)`.
///
/// `log_density` is the exact normalized mixture log-density, so
/// `log_normalizer()` is `Some(0.0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MixtureParams", into = "MixtureParams")]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<f64>>,
    // derived
    log_coef: Vec<f64>,
    precisions: Vec<Vec<f64>>,
    chol_factors: Vec<Vec<f64>>,
}

/// Serialized form: weights, means and row-major covariances.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<MixtureParams> for GaussianMixture {
    type Error = Error;
    fn try_from(p: MixtureParams) -> Result<Self> {
        let covs = p.covariances.into_iter().map(|rows| rows.concat()).collect();
        GaussianMixture::new(p.weights, p.means, covs)
    }
}

impl From<GaussianMixture> for MixtureParams {
    fn from(m: GaussianMixture) -> Self {
        let d = m.dim;
        MixtureParams {
            weights: m.weights,
            means: m.means,
            covariances: m
                .covariances
                .iter()
                .map(|c| c.chunks(d).map(<[f64]>::to_vec).collect())
                .collect(),
        }
    }
}

const WEIGHT_TOL: f64 = 1e-12;

impl GaussianMixture {
    /// Build from weights, means and row-major `d×d` covariance matrices.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Vec<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::input("mixture needs at least one component"));
        }
        if means.len() != k || covariances.len() != k {
            return Err(Error::input("weights, means and covariances differ in length"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::input("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::input(format!("mixture weights sum to {total}")));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::input("mixture dimension must be at least 1"));
        }
        let mut log_coef = Vec::with_capacity(k);
        let mut precisions = Vec::with_capacity(k);
        let mut chol_factors = Vec::with_capacity(k);
        for (i, (m, c)) in means.iter().zip(&covariances).enumerate() {
            if m.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: m.len() });
            }
            if c.len() != dim * dim {
                return Err(Error::DimensionMismatch {
                    expected: dim * dim,
                    got: c.len(),
                });
            }
            let cov = DMatrix::from_row_slice(dim, dim, c);
            if (&cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
                return Err(Error::input(format!("covariance {i} is not symmetric")));
            }
            let chol = cov
                .clone()
                .cholesky()
                .ok_or_else(|| Error::input(format!("covariance {i} is not positive definite")))?;
            let l = chol.l();
            let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let prec = chol.inverse();
            log_coef.push(weights[i].ln() - 0.5 * (dim as f64) * (2.0 * PI).ln() - 0.5 * log_det);
            precisions.push(row_major(&prec));
            chol_factors.push(row_major(&l));
        }
        Ok(Self {
            dim,
            weights,
            means,
            covariances,
            log_coef,
            precisions,
            chol_factors,
        })
    }

    /// Single Gaussian `N(mean, cov)`.
    pub fn gaussian(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![cov])
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::gaussian(vec![0.0; dim], identity(dim))
    }

    /// The four-component planar mixture used by the Gaussian-mixture experiment.
    pub fn four_mode_example() -> Self {
        let horiz = vec![0.8, 0.0, 0.0, 0.01];
        let vert = vec![0.01, 0.0, 0.0, 1.0];
        Self::new(
            vec![0.5, 0.1, 0.1, 0.3],
            vec![vec![0.0, 2.0], vec![-3.0, 5.0], vec![0.0, 8.0], vec![3.0, 5.0]],
            vec![horiz.clone(), vert.clone(), horiz, vert],
        )
        .expect("example mixture is valid")
    }

    /// Initial law `N((0, 8), 0.3 I)` of the Gaussian-mixture experiment.
    pub fn four_mode_initial() -> Self {
        Self::gaussian(vec![0.0, 8.0], vec![0.3, 0.0, 0.0, 0.3]).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// Row-major covariance of component `i`.
    pub fn covariance(&self, i: usize) -> &[f64] {
        &self.covariances[i]
    }

    fn component_log_density(&self, i: usize, x: &[f64]) -> f64 {
        let d = self.dim;
        let (m, p) = (&self.means[i], &self.precisions[i]);
        let mut q = 0.0;
        for a in 0..d {
            let da = x[a] - m[a];
            let mut row = 0.0;
            for b in 0..d {
                row += p[a * d + b] * (x[b] - m[b]);
            }
            q += da * row;
        }
        self.log_coef[i] - 0.5 * q
    }

    /// `E_π[Σ_k c_k x_k²] = Σ_i w_i Σ_k c_k (m_{i,k}² + Σ_{i,kk})`.
    ///
    /// Missing trailing coefficients count as zero.
    pub fn quadratic_moment(&self, coefficients: &[f64]) -> Result<f64> {
        if coefficients.len() > self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: coefficients.len(),
            });
        }
        let d = self.dim;
        Ok(self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                w * coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * (self.means[i][k].powi(2) + self.covariances[i][k * d + k]))
                    .sum::<f64>()
            })
            .sum())
    }

    /// I.i.d. draws: categorical component, then `m + L z` with `L Lᵀ = Σ`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<ParticleEnsemble> {
        if n == 0 {
            return Err(Error::input("sample size must be at least 1"));
        }
        let d = self.dim;
        let mut out = Vec::with_capacity(n * d);
        let mut z = vec![0.0; d];
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut comp = self.weights.len() - 1;
            for (i, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    comp = i;
                    break;
                }
            }
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let l = &self.chol_factors[comp];
            for a in 0..d {
                let mut v = self.means[comp][a];
                for b in 0..=a {
                    v += l[a * d + b] * z[b];
                }
                out.push(v);
            }
        }
        ParticleEnsemble::uniform(d, out)
    }

    pub fn sample_seeded(&self, n: usize, seed: u64) -> Result<ParticleEnsemble> {
        self.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

impl Target for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let k = self.weights.len();
        if k == 1 {
            return self.component_log_density(0, x);
        }
        let mut buf = [0.0f64; 16];
        let mut heap;
        let terms: &mut [f64] = if k <= 16 {
            &mut buf[..k]
        } else {
            heap = vec![0.0; k];
            &mut heap
        };
        for (i, t) in terms.iter_mut().enumerate() {
            *t = self.component_log_density(i, x);
        }
        log_sum_exp(terms)
    }

    fn grad_log_density_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let k = self.weights.len();
        let logs: Vec<f64> = (0..k).map(|i| self.component_log_density(i, x)).collect();
        let lse = log_sum_exp(&logs);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &log_i) in logs.iter().enumerate() {
            let r = (log_i - lse).exp();
            if r == 0.0 {
                continue;
            }
            let (m, p) = (&self.means[i], &self.precisions[i]);
            for a in 0..d {
                let mut row = 0.0;
                for b in 0..d {
                    row += p[a * d + b] * (x[b] - m[b]);
                }
                out[a] -= r * row;
            }
        }
    }

    fn log_normalizer(&self) -> Option<f64> {
        Some(0.0)
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

pub(crate) fn identity(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    v
}

/// `Σ_a + Σ_b + s·I`, used by the MMD closed forms.
pub(crate) fn sum_cov_plus_scaled_identity(a: &[f64], b: &[f64], d: usize, s: f64) -> DMatrix<f64> {
    let mut m = DMatrix::from_row_slice(d, d, a) + DMatrix::from_row_slice(d, d, b);
    for i in 0..d {
        m[(i, i)] += s;
    }
    m
}

pub(crate) fn gaussian_density_at(diff: &[f64], cov: DMatrix<f64>) -> f64 {
    let d = diff.len();
    let chol = cov.cholesky().expect("sum of SPD matrices is SPD");
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let dv = DVector::from_column_slice(diff);
    let sol = chol.solve(&dv);
    let q = dv.dot(&sol);
    (-0.5 * (d as f64) * (2.0 * PI).ln() - 0.5 * log_det - 0.5 * q).exp()
}
