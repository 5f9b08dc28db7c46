use super::{GridDensity, POSITIVITY_FLOOR};
use crate::error::{Error, Result};

/// `h Σ ρ_i log(ρ_i / π_i)` with `0 log 0 = 0`.
pub fn kl_grid(rho: &GridDensity, pi: &GridDensity) -> Result<f64> {
    rho.check_same_grid(pi)?;
    let mut s = 0.0;
    for (i, (&r, &p)) in rho.values().iter().zip(pi.values()).enumerate() {
        if r == 0.0 {
            continue;
        }
        if p == 0.0 {
            return Err(Error::InfiniteDivergence { index: i });
        }
        s += r * (r.max(POSITIVITY_FLOOR).ln() - p.max(POSITIVITY_FLOOR).ln());
    }
    Ok(rho.h() * s)
}

/// `h Σ π_i (ρ_i/π_i - 1)²`.
pub fn chi2_grid(rho: &GridDensity, pi: &GridDensity) -> Result<f64> {
    rho.check_same_grid(pi)?;
    let mut s = 0.0;
    for (i, (&r, &p)) in rho.values().iter().zip(pi.values()).enumerate() {
        if p == 0.0 {
            if r > 0.0 {
                return Err(Error::InfiniteDivergence { index: i });
            }
            continue;
        }
        s += (r - p) * (r - p) / p;
    }
    Ok(rho.h() * s)
}

fn hellinger_sq(rho0: &GridDensity, rho1: &GridDensity) -> f64 {
    let s: f64 = rho0
        .values()
        .iter()
        .zip(rho1.values())
        .map(|(a, b)| (b.sqrt() - a.sqrt()).powi(2))
        .sum();
    4.0 * rho0.h() * s
}

/// `d_H = 2 (∫(√ρ₁ - √ρ₀)²)^{1/2}`.
pub fn hellinger(rho0: &GridDensity, rho1: &GridDensity) -> Result<f64> {
    rho0.check_same_grid(rho1)?;
    Ok(hellinger_sq(rho0, rho1).sqrt())
}

/// `2 arccos(1 - x/8) = 4 arcsin(√x / 4)`; the second form keeps precision for small `x`.
fn sh_from_hellinger_sq(dh2: f64) -> f64 {
    4.0 * (dh2.sqrt() / 4.0).min(1.0).asin()
}

/// `d_SH = 2 arccos(1 - d_H²/8)`.
pub fn spherical_hellinger(rho0: &GridDensity, rho1: &GridDensity) -> Result<f64> {
    rho0.check_same_grid(rho1)?;
    Ok(sh_from_hellinger_sq(hellinger_sq(rho0, rho1)))
}

/// Point at time `t` on the `d_SH` geodesic from `rho0` to `rho1`.
pub fn sh_geodesic(rho0: &GridDensity, rho1: &GridDensity, t: f64) -> Result<GridDensity> {
    rho0.check_same_grid(rho1)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::input(format!("geodesic time {t} outside [0, 1]")));
    }
    if t == 0.0 || rho0 == rho1 {
        return Ok(rho0.clone());
    }
    if t == 1.0 {
        return Ok(rho1.clone());
    }
    let d = sh_from_hellinger_sq(hellinger_sq(rho0, rho1));
    let (a, b) = ((t * d / 2.0).sin(), ((1.0 - t) * d / 2.0).sin());
    let beta = a / (a + b);
    let tilde: Vec<f64> = rho0
        .values()
        .iter()
        .zip(rho1.values())
        .map(|(p, q)| ((1.0 - beta) * p.sqrt() + beta * q.sqrt()).powi(2))
        .collect();
    let r = rho0.h() * tilde.iter().sum::<f64>();
    GridDensity::new(tilde.into_iter().map(|v| v / r).collect(), rho0.period())
}
