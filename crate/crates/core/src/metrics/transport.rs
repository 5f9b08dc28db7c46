use serde::{Deserialize, Serialize};

use super::GridDensity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Line,
    Circle,
}

/// Squared W2 between two discrete measures with ascending supports,
/// integrating the squared quantile gap over the merged CDF breakpoints.
fn w2_sq_sorted(x0: &[f64], p0: &[f64], x1: &[f64], p1: &[f64]) -> f64 {
    let (t0, t1) = (p0.iter().sum::<f64>(), p1.iter().sum::<f64>());
    let (mut i, mut j) = (0, 0);
    let (mut c0, mut c1) = (p0[0] / t0, p1[0] / t1);
    let mut prev = 0.0;
    let mut total = 0.0;
    loop {
        let next = c0.min(c1);
        let gap = x0[i] - x1[j];
        total += (next - prev) * gap * gap;
        prev = next;
        if c0 <= c1 {
            i += 1;
            if i == x0.len() {
                break;
            }
            c0 += p0[i] / t0;
        } else {
            j += 1;
            if j == x1.len() {
                break;
            }
            c1 += p1[j] / t1;
        }
    }
    total
}

fn check_weighted(x: &[f64], p: &[f64]) -> Result<()> {
    if x.is_empty() || x.len() != p.len() {
        return Err(Error::input("support and weights must be nonempty and of equal length"));
    }
    if x.iter().any(|v| !v.is_finite()) || p.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::input("support must be finite and weights nonnegative"));
    }
    if !(p.iter().sum::<f64>() > 0.0) {
        return Err(Error::input("weights have zero total mass"));
    }
    Ok(())
}

fn sorted(x: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    (idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| p[i]).collect())
}

/// W2 on the real line between two weighted point sets; weights are
/// normalized to unit mass.
pub fn w2_line_weighted(x0: &[f64], p0: &[f64], x1: &[f64], p1: &[f64]) -> Result<f64> {
    check_weighted(x0, p0)?;
    check_weighted(x1, p1)?;
    let (x0, p0) = sorted(x0, p0);
    let (x1, p1) = sorted(x1, p1);
    Ok(w2_sq_sorted(&x0, &p0, &x1, &p1).sqrt())
}

/// W2 between grid densities treated as point masses `h ρ_i` at the nodes.
///
/// On the circle the distance is the minimum of the line distance over
/// all `n` cyclic cut points.
pub fn w2_1d(rho0: &GridDensity, rho1: &GridDensity, topology: Topology) -> Result<f64> {
    rho0.check_same_grid(rho1)?;
    let x = rho0.nodes();
    let (p0, p1) = (rho0.values(), rho1.values());
    match topology {
        Topology::Line => Ok(w2_sq_sorted(&x, p0, &x, p1).sqrt()),
        Topology::Circle => {
            let n = x.len();
            let period = rho0.period();
            let mut xs = vec![0.0; n];
            let mut q0 = vec![0.0; n];
            let mut q1 = vec![0.0; n];
            let mut best = f64::INFINITY;
            for cut in 0..n {
                for k in 0..n {
                    let i = (cut + k) % n;
                    xs[k] = if i < cut { x[i] + period } else { x[i] };
                    q0[k] = p0[i];
                    q1[k] = p1[i];
                }
                best = best.min(w2_sq_sorted(&xs, &q0, &xs, &q1));
            }
            Ok(best.sqrt())
        }
    }
}
