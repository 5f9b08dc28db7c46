//! Gaussian mollifiers `K_ε`, their convolution square roots, kernel density
//! estimates for particle ensembles and periodic convolution on uniform grids.
//!
//! `K_ε(z) = ε^{-d} (2π)^{-d/2} exp(-|z|² / (2ε²))`, and the square-root
//! factor `ξ_ε` with `ξ_ε * ξ_ε = K_ε` is the Gaussian of bandwidth `ε/√2`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particles::ParticleEnsemble;

/// Gaussian kernel of bandwidth `epsilon` on `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    epsilon: f64,
    dim: usize,
}

/// Shifted copies with a contribution below this are dropped when the
/// kernel is wrapped onto a period.
const PERIODIZATION_TAIL: f64 = 1e-14;

impl KernelSpec {
    pub fn new(epsilon: f64, dim: usize) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::input(format!("kernel bandwidth must be positive, got {epsilon}")));
        }
        if dim == 0 {
            return Err(Error::input("kernel dimension must be at least 1"));
        }
        Ok(Self { epsilon, dim })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The factor `ξ_ε`, itself a Gaussian with bandwidth `ε/√2`.
    pub fn sqrt_factor(&self) -> KernelSpec {
        KernelSpec {
            epsilon: self.epsilon / SQRT_2,
            dim: self.dim,
        }
    }

    /// Normalizing prefactor `ε^{-d}(2π)^{-d/2}`.
    #[inline]
    pub fn peak(&self) -> f64 {
        (2.0 * PI * self.epsilon * self.epsilon).powf(-0.5 * self.dim as f64)
    }

    #[inline]
    pub(crate) fn inv_two_var(&self) -> f64 {
        0.5 / (self.epsilon * self.epsilon)
    }

    /// Kernel value from a squared distance, no dimension check.
    #[inline]
    pub fn eval_sq(&self, r2: f64) -> f64 {
        self.peak() * (-r2 * self.inv_two_var()).exp()
    }

    /// `log K_ε` from a squared distance.
    #[inline]
    pub fn log_eval_sq(&self, r2: f64) -> f64 {
        self.peak().ln() - r2 * self.inv_two_var()
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        Ok(())
    }
}

/// `K_ε(z)`.
pub fn eval_kernel(spec: &KernelSpec, z: &[f64]) -> Result<f64> {
    spec.check_dim(z)?;
    Ok(spec.eval_sq(z.iter().map(|x| x * x).sum()))
}

/// `ξ_ε(z) = K_{ε/√2}(z)`.
pub fn eval_sqrt_kernel(spec: &KernelSpec, z: &[f64]) -> Result<f64> {
    eval_kernel(&spec.sqrt_factor(), z)
}

/// Weighted kernel density estimate `Σ_j w_j K_ε(q - x_j)` at each query.
///
/// Each query is an independent exact sum over the ensemble in particle order.
pub fn kde(spec: &KernelSpec, ensemble: &ParticleEnsemble, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
    if ensemble.is_empty() {
        return Err(Error::input("kde of an empty ensemble"));
    }
    if ensemble.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: ensemble.dim(),
        });
    }
    queries
        .iter()
        .map(|q| {
            spec.check_dim(q)?;
            Ok(ensemble
                .particles()
                .zip(ensemble.weights())
                .map(|(x, w)| w * spec.eval_sq(crate::particles::sq_dist(q, x)))
                .sum())
        })
        .collect()
}

/// The 1D kernel wrapped onto `[0, period)`, sampled at offsets `k·h`,
/// `h = period / n`. Symmetric: entry `k` equals entry `n - k`.
pub fn periodic_kernel_profile(spec: &KernelSpec, n: usize, period: f64) -> Result<Vec<f64>> {
    if spec.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: spec.dim(),
        });
    }
    if n < 4 {
        return Err(Error::input(format!("grid needs at least 4 points, got {n}")));
    }
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::input(format!("period must be positive, got {period}")));
    }
    let h = period / n as f64;
    let mut profile = vec![0.0; n];
    for k in 0..=n / 2 {
        let x = k as f64 * h;
        let mut total = spec.eval_sq(x * x);
        for s in 1.. {
            let s = s as f64 * period;
            let right = spec.eval_sq((x + s) * (x + s));
            let left = spec.eval_sq((x - s) * (x - s));
            total += right + left;
            if right + left < PERIODIZATION_TAIL {
                break;
            }
        }
        profile[k] = total;
        profile[(n - k) % n] = total;
    }
    Ok(profile)
}

/// Periodic convolution `h·Σ_k K̃_ε(x_i - x_k) f(x_k)` by direct summation.
pub fn circular_convolve(grid_fn: &[f64], spec: &KernelSpec, period: f64) -> Result<Vec<f64>> {
    let n = grid_fn.len();
    let profile = periodic_kernel_profile(spec, n, period)?;
    let h = period / n as f64;
    Ok(direct_circulant(&profile, grid_fn, h))
}

fn direct_circulant(profile: &[f64], f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            // offsets i-k for k = 0..=i, then i-k+n for k > i
            let head: f64 = (0..=i).map(|k| profile[i - k] * f[k]).sum();
            let tail: f64 = (i + 1..n).map(|k| profile[i + n - k] * f[k]).sum();
            h * (head + tail)
        })
        .collect()
}

/// Reusable periodic convolution on a fixed grid, computed by FFT.
///
/// Agrees with [`circular_convolve`] to rounding; used inside the time
/// integrators where the same kernel is applied thousands of times.
#[derive(Clone)]
pub struct CircularConvolver {
    n: usize,
    h: f64,
    profile: Vec<f64>,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CircularConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CircularConvolver")
            .field("n", &self.n)
            .field("h", &self.h)
            .finish()
    }
}

impl CircularConvolver {
    pub fn new(spec: &KernelSpec, n: usize, period: f64) -> Result<Self> {
        let profile = periodic_kernel_profile(spec, n, period)?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut spectrum: Vec<Complex64> = profile.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        forward.process(&mut spectrum);
        Ok(Self {
            n,
            h: period / n as f64,
            profile,
            spectrum,
            forward,
            inverse,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n, "grid length does not match the convolver");
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = self.h / self.n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    pub fn apply_direct(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n, "grid length does not match the convolver");
        direct_circulant(&self.profile, f, self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TWO_PI: f64 = 2.0 * PI;

    #[test]
    fn kernel_point_values() {
        let k1 = KernelSpec::new(1.0, 1).unwrap();
        assert!((eval_kernel(&k1, &[0.0]).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        let k2 = KernelSpec::new(0.2, 2).unwrap();
        assert!((eval_kernel(&k2, &[0.0, 0.0]).unwrap() - 25.0 / TWO_PI).abs() < 1e-12);
        assert_eq!(eval_kernel(&k1, &[1.0]).unwrap(), eval_kernel(&k1, &[-1.0]).unwrap());
        assert!((eval_sqrt_kernel(&k1, &[0.0]).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!(matches!(
            eval_kernel(&k1, &[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
        assert!(KernelSpec::new(0.0, 1).is_err());
        assert!(KernelSpec::new(1.0, 0).is_err());
    }

    /// Composite Simpson over [-12ε, 12ε] with 20001 nodes.
    fn simpson_mass(spec: &KernelSpec) -> f64 {
        let a = -12.0 * spec.epsilon();
        let m = 20_000;
        let h = -2.0 * a / m as f64;
        let mut s = 0.0;
        for i in 0..=m {
            let x = a + i as f64 * h;
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * spec.eval_sq(x * x);
        }
        s * h / 3.0
    }

    #[test]
    fn kernel_and_factor_integrate_to_one() {
        for eps in [0.05, 0.3, 1.0, 2.5] {
            let k = KernelSpec::new(eps, 1).unwrap();
            assert!((simpson_mass(&k) - 1.0).abs() < 1e-8);
            assert!((simpson_mass(&k.sqrt_factor()) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn factor_convolves_to_kernel_on_grid() {
        let n = 512;
        let k = KernelSpec::new(0.3, 1).unwrap();
        let xi = periodic_kernel_profile(&k.sqrt_factor(), n, TWO_PI).unwrap();
        let kk = periodic_kernel_profile(&k, n, TWO_PI).unwrap();
        let conv = circular_convolve(&xi, &k.sqrt_factor(), TWO_PI).unwrap();
        let err = conv.iter().zip(&kk).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "sup error {err}");
    }

    #[test]
    fn kde_simple_cases() {
        let k = KernelSpec::new(1.0, 1).unwrap();
        let one = ParticleEnsemble::uniform(1, vec![0.0]).unwrap();
        let v = kde(&k, &one, &[vec![0.0]]).unwrap();
        assert!((v[0] - 0.398_942_280_401_432_7).abs() < 1e-15);

        let a = 0.7;
        let two = ParticleEnsemble::uniform(1, vec![-a, a]).unwrap();
        let sym = kde(&k, &two, &[vec![0.0]]).unwrap()[0];
        let single = kde(&k, &one, &[vec![a]]).unwrap()[0];
        assert!((sym - single).abs() < 1e-15);
    }

    #[test]
    fn kde_matches_brute_force_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let ens = ParticleEnsemble::uniform(1, xs.clone()).unwrap();
        let k = KernelSpec::new(0.1, 1).unwrap();
        let queries: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let got = kde(&k, &ens, &queries).unwrap();
        for (q, g) in queries.iter().zip(&got) {
            let mut s = 0.0;
            for x in &xs {
                let z = q[0] - x;
                s += (1.0 / 100.0) * (-z * z / (2.0 * 0.01)).exp() / (2.0 * PI * 0.01).sqrt();
            }
            assert!((s - g).abs() <= 1e-13 * s.abs().max(1.0), "{s} vs {g}");
        }
        assert!(got.iter().all(|&v| v > 0.0));
        let empty = kde(&k, &ens, &[vec![0.0, 1.0]]);
        assert!(empty.is_err());
    }

    #[test]
    fn convolution_of_constant_is_constant() {
        let k = KernelSpec::new(0.2, 1).unwrap();
        let out = circular_convolve(&vec![1.0; 256], &k, TWO_PI).unwrap();
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn convolution_of_spike_is_kernel() {
        let n = 256;
        let h = TWO_PI / n as f64;
        let k = KernelSpec::new(0.25, 1).unwrap();
        let mut spike = vec![0.0; n];
        spike[0] = 1.0 / h;
        let out = circular_convolve(&spike, &k, TWO_PI).unwrap();
        let profile = periodic_kernel_profile(&k, n, TWO_PI).unwrap();
        for (a, b) in out.iter().zip(&profile) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_commutes_with_rotation() {
        let n = 128;
        let k = KernelSpec::new(0.3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let shift = 17;
        let rotated: Vec<f64> = (0..n).map(|i| f[(i + n - shift) % n]).collect();
        let a = circular_convolve(&rotated, &k, TWO_PI).unwrap();
        let b = circular_convolve(&f, &k, TWO_PI).unwrap();
        for i in 0..n {
            assert!((a[i] - b[(i + n - shift) % n]).abs() < 1e-14);
        }
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let n = 300;
        let k = KernelSpec::new(0.15, 1).unwrap();
        let conv = CircularConvolver::new(&k, n, TWO_PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let fast = conv.apply(&f);
        let slow = conv.apply_direct(&f);
        let direct = circular_convolve(&f, &k, TWO_PI).unwrap();
        for i in 0..n {
            assert!((fast[i] - slow[i]).abs() < 1e-12);
            assert_eq!(slow[i], direct[i]);
        }
    }

    #[test]
    fn profile_requires_small_dim_and_grid() {
        let k2 = KernelSpec::new(0.3, 2).unwrap();
        assert!(periodic_kernel_profile(&k2, 16, 1.0).is_err());
        let k = KernelSpec::new(0.3, 1).unwrap();
        assert!(periodic_kernel_profile(&k, 3, 1.0).is_err());
    }
}
