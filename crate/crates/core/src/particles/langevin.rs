use rand::Rng;
use rand_distr::StandardNormal;

use super::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::targets::Target;

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::input(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

pub(crate) fn check_target_dim<T: Target + ?Sized>(ensemble: &ParticleEnsemble, target: &T) -> Result<()> {
    if ensemble.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: ensemble.dim(),
        });
    }
    Ok(())
}

/// Gradients of `log π̂` at every particle, row-major.
pub(crate) fn gradients<T: Target + ?Sized>(ensemble: &ParticleEnsemble, target: &T) -> Result<Vec<f64>> {
    let d = ensemble.dim();
    let mut out = vec![0.0; ensemble.len() * d];
    for (i, (x, g)) in ensemble.particles().zip(out.chunks_exact_mut(d)).enumerate() {
        target.grad_log_density_into(x, g);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverAbort(format!("non-finite gradient of log density at particle {i}")));
        }
    }
    Ok(out)
}

/// `x ← x + dt ∇log π̂(x) + √(2 dt) ξ`.
pub fn ula_step<T: Target + ?Sized, R: Rng + ?Sized>(
    ensemble: &mut ParticleEnsemble,
    target: &T,
    dt: f64,
    rng: &mut R,
) -> Result<()> {
    check_dt(dt)?;
    check_target_dim(ensemble, target)?;
    let grads = gradients(ensemble, target)?;
    let noise = (2.0 * dt).sqrt();
    for (x, g) in ensemble.positions_mut().iter_mut().zip(&grads) {
        let xi: f64 = rng.sample(StandardNormal);
        *x += dt * g + noise * xi;
    }
    Ok(())
}
