use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{JumpRates, ParticleEnsemble};
use crate::error::{Error, Result};

/// Counters from jump steps; additive across steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpDiagnostics {
    /// Particles replaced by a copy of another (positive rate).
    pub kills: usize,
    /// Particles duplicated over another (negative rate).
    pub births: usize,
    /// Flagged events with no partner available.
    pub skipped: usize,
}

impl std::ops::AddAssign for JumpDiagnostics {
    fn add_assign(&mut self, o: Self) {
        self.kills += o.kills;
        self.births += o.births;
        self.skipped += o.skipped;
    }
}

/// One birth-death step at fixed particle count.
///
/// Particle `i` fires with probability `1 - exp(-|Λ_i| dt)`. Fired indices
/// are resolved in a random order; a positive rate overwrites `i` with a
/// uniformly chosen other particle, a negative rate copies `i` onto one.
pub fn bd_jump_step<R: Rng + ?Sized>(
    ensemble: &mut ParticleEnsemble,
    rates: &JumpRates,
    dt: f64,
    rng: &mut R,
) -> Result<JumpDiagnostics> {
    let n = ensemble.len();
    if rates.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rates.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::input(format!("time step must be positive, got {dt}")));
    }
    if !ensemble.has_uniform_weights() {
        return Err(Error::input("jump step needs an equal-weight ensemble"));
    }
    let mut fired: Vec<usize> = rates
        .lambda
        .iter()
        .enumerate()
        .filter_map(|(i, l)| {
            let p = -(-l.abs() * dt).exp_m1();
            (rng.random::<f64>() < p).then_some(i)
        })
        .collect();
    fired.shuffle(rng);
    let mut diag = JumpDiagnostics::default();
    for i in fired {
        if n == 1 {
            diag.skipped += 1;
            continue;
        }
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if rates.lambda[i] > 0.0 {
            ensemble.copy_particle(j, i);
            diag.kills += 1;
        } else {
            ensemble.copy_particle(i, j);
            diag.births += 1;
        }
    }
    Ok(diag)
}
