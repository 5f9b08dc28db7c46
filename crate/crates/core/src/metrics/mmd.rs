use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::particles::{sq_dist, ParticleEnsemble};
use crate::targets::mixture::{gaussian_density_at, sum_cov_plus_scaled_identity};
use crate::targets::GaussianMixture;

/// One side of an MMD comparison.
#[derive(Debug, Clone, Copy)]
pub enum MeasureRef<'a> {
    Ensemble(&'a ParticleEnsemble),
    Mixture(&'a GaussianMixture),
}

impl MeasureRef<'_> {
    fn dim(&self) -> usize {
        match self {
            MeasureRef::Ensemble(e) => e.dim(),
            MeasureRef::Mixture(m) => m.dim(),
        }
    }
}

impl<'a> From<&'a ParticleEnsemble> for MeasureRef<'a> {
    fn from(e: &'a ParticleEnsemble) -> Self {
        MeasureRef::Ensemble(e)
    }
}

impl<'a> From<&'a GaussianMixture> for MeasureRef<'a> {
    fn from(m: &'a GaussianMixture) -> Self {
        MeasureRef::Mixture(m)
    }
}

/// Gaussian density `N(mean, Σ + ε² I)` evaluated through its Cholesky factor.
struct SmoothedComponent {
    weight: f64,
    mean: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl SmoothedComponent {
    fn eval(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, b)| a - b));
        let z = self.chol.l().solve_lower_triangular(&diff).expect("triangular factor is invertible");
        (self.log_norm - 0.5 * z.norm_squared()).exp()
    }
}

fn smoothed_components(m: &GaussianMixture, var: f64) -> Vec<SmoothedComponent> {
    let d = m.dim();
    let zero = vec![0.0; d * d];
    (0..m.n_components())
        .map(|k| {
            let cov: DMatrix<f64> = sum_cov_plus_scaled_identity(m.covariance(k), &zero, d, var);
            let chol = cov.cholesky().expect("covariance plus a positive multiple of I is SPD");
            let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            SmoothedComponent {
                weight: m.weights()[k],
                mean: m.means()[k].clone(),
                chol,
                log_norm: -0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * log_det,
            }
        })
        .collect()
}

/// `E k(X, Y)` for independent `X ~ a`, `Y ~ b`.
fn cross_term(a: MeasureRef<'_>, b: MeasureRef<'_>, kernel: &KernelSpec) -> f64 {
    let var = kernel.epsilon() * kernel.epsilon();
    match (a, b) {
        (MeasureRef::Ensemble(x), MeasureRef::Ensemble(y)) => {
            let rows: Vec<f64> = (0..x.len())
                .into_par_iter()
                .map(|i| {
                    let xi = x.particle(i);
                    let s: f64 = y.particles().zip(y.weights()).map(|(yj, w)| w * kernel.eval_sq(sq_dist(xi, yj))).sum();
                    x.weights()[i] * s
                })
                .collect();
            rows.iter().sum()
        }
        (MeasureRef::Ensemble(x), MeasureRef::Mixture(m)) | (MeasureRef::Mixture(m), MeasureRef::Ensemble(x)) => {
            let comps = smoothed_components(m, var);
            let rows: Vec<f64> = (0..x.len())
                .into_par_iter()
                .map(|i| x.weights()[i] * comps.iter().map(|c| c.weight * c.eval(x.particle(i))).sum::<f64>())
                .collect();
            rows.iter().sum()
        }
        (MeasureRef::Mixture(p), MeasureRef::Mixture(q)) => {
            let d = p.dim();
            let mut s = 0.0;
            for k in 0..p.n_components() {
                for l in 0..q.n_components() {
                    let diff: Vec<f64> = p.means()[k].iter().zip(&q.means()[l]).map(|(u, v)| u - v).collect();
                    let cov = sum_cov_plus_scaled_identity(p.covariance(k), q.covariance(l), d, var);
                    s += p.weights()[k] * q.weights()[l] * gaussian_density_at(&diff, cov);
                }
            }
            s
        }
    }
}

/// Squared maximum mean discrepancy with the Gaussian kernel `K_ε`.
///
/// Ensemble terms are full V-statistic double sums; mixture terms use the
/// Gaussian convolution identity. The result is clipped at zero.
pub fn mmd2(a: MeasureRef<'_>, b: MeasureRef<'_>, kernel: &KernelSpec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if kernel.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: kernel.dim(),
        });
    }
    let v = cross_term(a, a, kernel) + cross_term(b, b, kernel) - 2.0 * cross_term(a, b, kernel);
    Ok(v.max(0.0))
}

pub fn mmd(a: MeasureRef<'_>, b: MeasureRef<'_>, kernel: &KernelSpec) -> Result<f64> {
    mmd2(a, b, kernel).map(f64::sqrt)
}

/// `|Σ_j w_j f(x_j) - E_π f|` for `f(x) = Σ_k c_k x_k²`.
pub fn observable_error(ensemble: &ParticleEnsemble, target: &GaussianMixture, coefficients: &[f64]) -> Result<f64> {
    if ensemble.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: ensemble.dim(),
        });
    }
    let exact = target.quadratic_moment(coefficients)?;
    let estimate: f64 = ensemble
        .particles()
        .zip(ensemble.weights())
        .map(|(x, w)| w * coefficients.iter().zip(x).map(|(c, v)| c * v * v).sum::<f64>())
        .sum();
    Ok((estimate - exact).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_kernel(d: usize) -> KernelSpec {
        KernelSpec::new(1.0, d).unwrap()
    }

    #[test]
    fn identical_measures_vanish() {
        let pi = GaussianMixture::four_mode_example();
        let k = unit_kernel(2);
        assert_eq!(mmd2((&pi).into(), (&pi).into(), &k).unwrap(), 0.0);
        let e = pi.sample_seeded(50, 1).unwrap();
        assert_eq!(mmd2((&e).into(), (&e.clone()).into(), &k).unwrap(), 0.0);
    }

    #[test]
    fn single_points_closed_form() {
        // Two Diracs at distance r: 2 k(0) - 2 k(r).
        let k = unit_kernel(1);
        let a = ParticleEnsemble::uniform(1, vec![0.0]).unwrap();
        let b = ParticleEnsemble::uniform(1, vec![1.5]).unwrap();
        let want = 2.0 * (k.eval_sq(0.0) - k.eval_sq(2.25));
        assert!((mmd2((&a).into(), (&b).into(), &k).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn ensemble_vs_mixture_uses_smoothed_density() {
        // A Dirac at x against N(m, s²): E k(x, Y) = N(x; m, s² + 1).
        let k = unit_kernel(1);
        let g = GaussianMixture::gaussian(vec![0.5], vec![0.25]).unwrap();
        let x = ParticleEnsemble::uniform(1, vec![-0.3]).unwrap();
        let direct = cross_term((&x).into(), (&g).into(), &k);
        let var: f64 = 1.25;
        let want = (-(0.8f64.powi(2)) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
        assert!((direct - want).abs() < 1e-14);
        let swapped = cross_term((&g).into(), (&x).into(), &k);
        assert_eq!(direct, swapped);
    }

    #[test]
    fn dimension_checks() {
        let pi = GaussianMixture::four_mode_example();
        let e = ParticleEnsemble::uniform(1, vec![0.0]).unwrap();
        assert!(mmd2((&pi).into(), (&e).into(), &unit_kernel(2)).is_err());
        assert!(mmd2((&pi).into(), (&pi).into(), &unit_kernel(1)).is_err());
        assert!(observable_error(&e, &pi, &[1.0]).is_err());
    }

    #[test]
    fn observable_error_trivial_cases() {
        let pi = GaussianMixture::four_mode_example();
        let e = pi.sample_seeded(10, 3).unwrap();
        assert_eq!(observable_error(&e, &pi, &[]).unwrap(), 0.0);
        let g = GaussianMixture::gaussian(vec![0.0], vec![4.0]).unwrap();
        let x = ParticleEnsemble::uniform(1, vec![2.0]).unwrap();
        assert_eq!(observable_error(&x, &g, &[1.0]).unwrap(), 0.0);
    }
}
