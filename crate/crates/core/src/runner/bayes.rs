//! Logistic-regression posterior setup and predictive scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};

use super::config::DatasetSource;
use crate::error::{Error, Result};
use crate::particles::ParticleEnsemble;
use crate::targets::logistic::sigmoid;
use crate::targets::{load_dataset, synthetic_separable, Dataset, LogisticPosterior};

/// How test predictions are formed from the particles.
pub const PREDICTION_RULE: &str =
    "average of sigmoid(w.x) over particles, label +1 when the average is at least 1/2";

pub fn load_source(source: &DatasetSource) -> Result<Dataset> {
    match source {
        DatasetSource::Synthetic { n, seed } => {
            let mut d = synthetic_separable(*n, *seed);
            d.add_bias();
            Ok(d)
        }
        DatasetSource::File { path, options } => load_dataset(path, options),
    }
}

pub fn posterior(train: &Dataset, prior_rate: f64) -> Result<LogisticPosterior> {
    LogisticPosterior::from_rows(&train.features, train.labels.clone(), prior_rate)
}

/// Prior draws `α ~ Exp(rate)`, `w ~ N(0, α⁻¹ I)`, stored as `[w, log α]`.
pub fn prior_ensemble(n: usize, n_features: usize, prior_rate: f64, rng: &mut ChaCha8Rng) -> Result<ParticleEnsemble> {
    let exp = Exp::new(prior_rate).map_err(|e| Error::input(format!("prior rate: {e}")))?;
    let d = n_features + 1;
    let mut pos = Vec::with_capacity(n * d);
    for _ in 0..n {
        let alpha: f64 = rng.sample(exp);
        let sd = alpha.sqrt().recip();
        for _ in 0..n_features {
            let z: f64 = rng.sample(StandardNormal);
            pos.push(sd * z);
        }
        pos.push(alpha.ln());
    }
    ParticleEnsemble::uniform(d, pos)
}

pub fn prior_ensemble_seeded(n: usize, n_features: usize, prior_rate: f64, seed: u64, stream: u64) -> Result<ParticleEnsemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    prior_ensemble(n, n_features, prior_rate, &mut rng)
}

/// Mean over particles of `P(y = 1 | x, w)` for each test row.
pub fn predictive_probabilities(ensemble: &ParticleEnsemble, test: &Dataset) -> Vec<f64> {
    let d = test.n_features();
    let n = ensemble.len() as f64;
    test.features
        .iter()
        .map(|x| {
            ensemble
                .particles()
                .map(|theta| sigmoid(theta[..d].iter().zip(x).map(|(a, b)| a * b).sum()))
                .sum::<f64>()
                / n
        })
        .collect()
}

/// `(accuracy, mean test log-likelihood)` under [`PREDICTION_RULE`].
pub fn scores(ensemble: &ParticleEnsemble, test: &Dataset) -> (f64, f64) {
    let p = predictive_probabilities(ensemble, test);
    let mut correct = 0usize;
    let mut ll = 0.0;
    for (pi, &y) in p.iter().zip(&test.labels) {
        let guess = if *pi >= 0.5 { 1.0 } else { -1.0 };
        if guess == y {
            correct += 1;
        }
        let q = if y > 0.0 { *pi } else { 1.0 - pi };
        ll += q.max(f64::MIN_POSITIVE).ln();
    }
    let m = test.len() as f64;
    (correct as f64 / m, ll / m)
}
