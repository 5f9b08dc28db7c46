//! Decay envelopes for the pure birth-death flows.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{chi2_grid, kl_grid, GridDensity};

/// Below this value of `u = M e^{-s}` the KL rate is evaluated by its series.
const SERIES_CUTOFF: f64 = 1e-2;
const SIMPSON_TOL: f64 = 1e-10;
const SIMPSON_MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// `inf ρ0/π ≥ e^{-M}`.
    pub m: f64,
    pub kl0: f64,
    pub chi0: f64,
}

impl BoundParams {
    pub fn from_initial(rho0: &GridDensity, pi: &GridDensity) -> Result<Self> {
        let kl0 = kl_grid(rho0, pi)?;
        let chi0 = chi2_grid(rho0, pi)?;
        let min_ratio = rho0
            .values()
            .iter()
            .zip(pi.values())
            .map(|(r, p)| r / p)
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            m: (-min_ratio.ln()).max(0.0),
            kl0: kl0.max(0.0),
            chi0: chi0.max(0.0),
        })
    }
}

/// Instantaneous KL decay rate with `u = M e^{-s}`:
/// `u² / (9 e^u (e^u - u - 1))`, tending to `2/9` as `u → 0`.
pub fn kl_rate(m: f64, s: f64) -> f64 {
    let u = m * (-s).exp();
    if u < SERIES_CUTOFF {
        // (e^u - u - 1)/u² = 1/2 + u/6 + u²/24 + u³/120 + u⁴/720
        let q = 0.5 + u * (1.0 / 6.0 + u * (1.0 / 24.0 + u * (1.0 / 120.0 + u / 720.0)));
        1.0 / (9.0 * u.exp() * q)
    } else {
        u * u / (9.0 * u.exp() * (u.exp_m1() - u))
    }
}

/// Rate `2 / ((9 + 8(e^M - 1)e^{-t}) (1 + (e^M - 1)e^{-t}))` for the χ² flow.
pub fn chi2_rate(m: f64, t: f64) -> f64 {
    let a = m.exp_m1() * (-t).exp();
    2.0 / ((9.0 + 8.0 * a) * (1.0 + a))
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_recurse(&f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
}

/// KL envelopes `(b1, b2)` for the pure birth-death flow.
pub fn bound_kl(params: &BoundParams, t: f64) -> (f64, f64) {
    let m = params.m;
    let decay = m * (-t).exp();
    let b1 = decay + (-t + decay).exp() * params.kl0;
    let integral = adaptive_simpson(|s| kl_rate(m, s), 0.0, t, SIMPSON_TOL);
    let b2 = (-integral).exp() * params.kl0;
    (b1, b2)
}

/// `exp(-∫₀ᵗ λ) χ²₀` for the χ² birth-death flow.
pub fn bound_chi2(params: &BoundParams, t: f64) -> f64 {
    let integral = adaptive_simpson(|s| chi2_rate(params.m, s), 0.0, t, SIMPSON_TOL);
    (-integral).exp() * params.chi0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn b1_at_origin() {
        let p = BoundParams { m: 1.0, kl0: 0.5, chi0: 0.0 };
        let (b1, b2) = bound_kl(&p, 0.0);
        assert!((b1 - (1.0 + std::f64::consts::E * 0.5)).abs() < 1e-14);
        assert!((b1 - 2.3591).abs() < 1e-4);
        assert_eq!(b2, 0.5);
    }

    #[test]
    fn rates_tend_to_two_ninths() {
        assert!((kl_rate(1.0, 50.0) - 2.0 / 9.0).abs() < 1e-6);
        assert!((chi2_rate(1.0, 50.0) - 2.0 / 9.0).abs() < 1e-6);
        assert_eq!(kl_rate(0.0, 0.0), 2.0 / 9.0);
    }

    #[test]
    fn chi2_rate_at_start() {
        let e = std::f64::consts::E;
        let want = 2.0 / ((9.0 + 8.0 * (e - 1.0)) * e);
        assert!((chi2_rate(1.0, 0.0) - want).abs() < 1e-15);
        assert!((chi2_rate(1.0, 0.0) - 0.03234).abs() < 1e-5);
    }

    #[test]
    fn series_branch_is_continuous() {
        let u = SERIES_CUTOFF;
        let below = kl_rate(u * (1.0 - 1e-12), 0.0);
        let above = u * u / (9.0 * u.exp() * (u.exp_m1() - u));
        assert!((below - above).abs() < 1e-11);
    }

    #[test]
    fn simpson_integrates_exponential() {
        let v = adaptive_simpson(|x: f64| x.exp(), 0.0, 3.0, 1e-12);
        assert!((v - 3f64.exp_m1()).abs() < 1e-10);
    }

    #[test]
    fn zero_m_limit() {
        let p = BoundParams { m: 0.0, kl0: 1.0, chi0: 1.0 };
        let (_, b2) = bound_kl(&p, 9.0);
        assert!((b2 - (-2.0f64).exp()).abs() < 1e-10);
        assert!((bound_chi2(&p, 9.0) - (-2.0f64).exp()).abs() < 1e-10);
    }
}
