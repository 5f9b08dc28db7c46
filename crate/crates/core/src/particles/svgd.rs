use super::langevin::{check_dt, check_target_dim, gradients};
use super::pairwise::{packed_sq_dists, PackedSym};
use super::ParticleEnsemble;
use crate::error::Result;
use crate::targets::Target;

/// Median-trick value from packed squared distances (see [`packed_sq_dists`]).
fn median_of_pairs(packed: &[f64], n: usize) -> f64 {
    // Nonnegative floats order like their bit patterns.
    let mut keys: Vec<u64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut off = 0;
    for i in 0..n {
        keys.extend(packed[off + 1..off + n - i].iter().map(|v| v.to_bits()));
        off += n - i;
    }
    if keys.is_empty() {
        return 1.0;
    }
    let mid = keys.len() / 2;
    let hi = f64::from_bits(*keys.select_nth_unstable(mid).1);
    let median = if keys.len() % 2 == 1 {
        hi
    } else {
        let lo = keys[..mid].iter().copied().max().map(f64::from_bits).unwrap_or(hi);
        0.5 * (lo + hi)
    };
    if median > 0.0 {
        median / (2.0 * ((n + 1) as f64).ln())
    } else {
        1.0
    }
}

/// Median-trick bandwidth: `h² = median(|x_i - x_j|², i < j) / (2 log(N + 1))`.
///
/// Falls back to 1 for a single particle or a zero median.
pub fn median_bandwidth_sq(ensemble: &ParticleEnsemble) -> f64 {
    let n = ensemble.len();
    median_of_pairs(&packed_sq_dists(ensemble), n)
}

/// `x_i ← x_i + (dt/N) Σ_j [k(x_j, x_i) ∇log π̂(x_j) + ∇_{x_j} k(x_j, x_i)]`.
pub fn svgd_step<T: Target + ?Sized>(ensemble: &mut ParticleEnsemble, target: &T, dt: f64) -> Result<()> {
    check_dt(dt)?;
    check_target_dim(ensemble, target)?;
    let (n, d) = (ensemble.len(), ensemble.dim());
    let grads = gradients(ensemble, target)?;
    let d2 = packed_sq_dists(ensemble);
    let bw2 = median_of_pairs(&d2, n);
    let inv_bw2 = 1.0 / bw2;
    let w = PackedSym::from_sq_dists(n, d2, move |r2| (-0.5 * r2 * inv_bw2).exp());
    // phi_i = (W G)_i + (x_i (W 1)_i - (W X)_i) / h², from one pass over W·[G | X | 1].
    let x = ensemble.positions();
    let m = 2 * d + 1;
    let mut cols = Vec::with_capacity(n * m);
    for i in 0..n {
        cols.extend_from_slice(&grads[i * d..(i + 1) * d]);
        cols.extend_from_slice(&x[i * d..(i + 1) * d]);
        cols.push(1.0);
    }
    let y = w.apply(&cols, m);
    let mut phi = vec![0.0; n * d];
    for i in 0..n {
        let yi = &y[i * m..(i + 1) * m];
        for a in 0..d {
            phi[i * d + a] = yi[a] + (x[i * d + a] * yi[2 * d] - yi[d + a]) * inv_bw2;
        }
    }
    let scale = dt / n as f64;
    for (x, p) in ensemble.positions_mut().iter_mut().zip(&phi) {
        *x += scale * p;
    }
    Ok(())
}
