#![allow(dead_code)]

use bdsampler::particles::ParticleEnsemble;
use bdsampler::targets::Target;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `π̂ ≡ 1` on `R^d`.
pub struct Flat(pub usize);

impl Target for Flat {
    fn dim(&self) -> usize {
        self.0
    }
    fn log_density(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn grad_log_density_into(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

/// `log π̂ + c`.
pub struct Shifted<T>(pub T, pub f64);

impl<T: Target> Target for Shifted<T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        self.0.log_density(x) + self.1
    }
    fn grad_log_density_into(&self, x: &[f64], out: &mut [f64]) {
        self.0.grad_log_density_into(x, out)
    }
    fn log_normalizer(&self) -> Option<f64> {
        self.0.log_normalizer().map(|z| z + self.1)
    }
}

/// `π = N(mu, s² I)` with known normalizer.
pub struct Isotropic {
    pub mu: Vec<f64>,
    pub s: f64,
}

impl Target for Isotropic {
    fn dim(&self) -> usize {
        self.mu.len()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.mu).map(|(a, b)| (a - b) * (a - b)).sum();
        -0.5 * r2 / (self.s * self.s)
    }
    fn grad_log_density_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(x).zip(&self.mu) {
            *o = -(a - b) / (self.s * self.s);
        }
    }
    fn log_normalizer(&self) -> Option<f64> {
        let d = self.mu.len() as f64;
        Some(0.5 * d * (2.0 * std::f64::consts::PI * self.s * self.s).ln())
    }
}

pub fn random_ensemble(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64) -> ParticleEnsemble {
    let pos = (0..n * d).map(|_| spread * (2.0 * rng.random::<f64>() - 1.0)).collect();
    ParticleEnsemble::uniform(d, pos).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(2π ε²)^{-d/2} exp(-r²/(2ε²))`, written out independently of the crate.
pub fn gauss(eps: f64, a: &[f64], b: &[f64]) -> f64 {
    let d = a.len() as f64;
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (2.0 * std::f64::consts::PI * eps * eps).powf(-d / 2.0) * (-r2 / (2.0 * eps * eps)).exp()
}
