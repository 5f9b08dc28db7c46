use super::Target;
use crate::error::{Error, Result};

/// Posterior of Bayesian logistic regression over `θ = [w, log α]`.
///
/// Model: `P(y = 1 | x, w) = σ(wᵀx)`, `w | α ~ N(0, α⁻¹ I)`, `α ~ Exp(rate)`.
/// The density is taken with respect to `log α`, so it carries the Jacobian
/// factor `α`. Additive constants are dropped; no normalizer is known.
#[derive(Debug, Clone)]
pub struct LogisticPosterior {
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    prior_rate: f64,
}

pub const DEFAULT_PRIOR_RATE: f64 = 0.01;

impl LogisticPosterior {
    /// `features` is row-major `labels.len() × n_features`; labels are ±1.
    pub fn new(features: Vec<f64>, labels: Vec<f64>, n_features: usize, prior_rate: f64) -> Result<Self> {
        if n_features == 0 || labels.is_empty() {
            return Err(Error::input("logistic posterior needs data and at least one feature"));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                got: features.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::input(format!("label {} at row {i} is not ±1", labels[i])));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("feature matrix has non-finite entries"));
        }
        if !(prior_rate > 0.0) {
            return Err(Error::input("prior rate must be positive"));
        }
        Ok(Self {
            n_features,
            features,
            labels,
            prior_rate,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>, prior_rate: f64) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::input("ragged feature rows"));
        }
        Self::new(rows.concat(), labels, d, prior_rate)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_data(&self) -> usize {
        self.labels.len()
    }

    pub fn prior_rate(&self) -> f64 {
        self.prior_rate
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }
}

/// `log(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Target for LogisticPosterior {
    fn dim(&self) -> usize {
        self.n_features + 1
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let d = self.n_features;
        let (w, log_alpha) = (&theta[..d], theta[d]);
        let alpha = log_alpha.exp();
        let loglik: f64 = (0..self.n_data())
            .map(|i| -softplus(-self.labels[i] * dot(w, self.row(i))))
            .sum();
        let w2 = dot(w, w);
        loglik + 0.5 * d as f64 * log_alpha - 0.5 * alpha * w2 - self.prior_rate * alpha + log_alpha
    }

    fn grad_log_density_into(&self, theta: &[f64], out: &mut [f64]) {
        let d = self.n_features;
        let (w, log_alpha) = (&theta[..d], theta[d]);
        let alpha = log_alpha.exp();
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.n_data() {
            let x = self.row(i);
            let y = self.labels[i];
            let coef = y * sigmoid(-y * dot(w, x));
            for (o, xk) in out[..d].iter_mut().zip(x) {
                *o += coef * xk;
            }
        }
        for (o, wk) in out[..d].iter_mut().zip(w) {
            *o -= alpha * wk;
        }
        out[d] = 0.5 * d as f64 - 0.5 * alpha * dot(w, w) - self.prior_rate * alpha + 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::grad_log_density;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(rows: usize, d: usize, seed: u64) -> LogisticPosterior {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feats: Vec<f64> = (0..rows * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let labels = (0..rows).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        LogisticPosterior::new(feats, labels, d, DEFAULT_PRIOR_RATE).unwrap()
    }

    fn fd_check(t: &LogisticPosterior, theta: &[f64]) {
        let g = grad_log_density(t, theta).unwrap();
        let step = 1e-5;
        for k in 0..theta.len() {
            let mut p = theta.to_vec();
            let mut m = theta.to_vec();
            p[k] += step;
            m[k] -= step;
            let fd = (t.log_density(&p) - t.log_density(&m)) / (2.0 * step);
            assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0), "coord {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn gradient_at_zero_weights_matches_finite_differences() {
        let t = synthetic(10, 3, 1);
        fd_check(&t, &[0.0, 0.0, 0.0, 0.0]);
        fd_check(&t, &[0.0, 0.0, 0.0, 1.3]);
    }

    #[test]
    fn gradient_at_random_points_matches_finite_differences() {
        let t = synthetic(40, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let theta: Vec<f64> = (0..5).map(|_| rng.random_range(-1.5..1.5)).collect();
            fd_check(&t, &theta);
        }
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(LogisticPosterior::new(vec![1.0, 2.0], vec![1.0, 0.0], 1, 0.01).is_err());
        assert!(LogisticPosterior::new(vec![1.0], vec![1.0, -1.0], 1, 0.01).is_err());
    }

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }
}
