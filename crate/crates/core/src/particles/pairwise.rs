//! Packed symmetric pair buffers shared by the interacting samplers.

use rayon::prelude::*;

use super::ParticleEnsemble;
use crate::kernels::KernelSpec;

/// Kernel terms with `exp` of an exponent below this are treated as zero.
/// The cutoff depends only on the pair distance, so symmetry is kept.
pub(crate) const EXP_CUTOFF: f64 = -40.0;

fn sq_dists_row(xi: &[f64], rest: &[f64], d: usize, out: &mut Vec<f64>) {
    match d {
        1 => out.extend(rest.iter().map(|y| (xi[0] - y) * (xi[0] - y))),
        2 => out.extend(rest.chunks_exact(2).map(|y| {
            let (a, b) = (xi[0] - y[0], xi[1] - y[1]);
            a * a + b * b
        })),
        _ => out.extend(rest.chunks_exact(d).map(|y| super::sq_dist(xi, y))),
    }
}

/// `|x_i - x_j|²` for `i ≤ j`, packed by rows (diagonal first in each row).
pub(crate) fn packed_sq_dists(ensemble: &ParticleEnsemble) -> Vec<f64> {
    let n = ensemble.len();
    let d = ensemble.dim();
    let x = ensemble.positions();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        sq_dists_row(&x[i * d..(i + 1) * d], &x[i * d..], d, &mut out);
    }
    out
}

/// Upper triangle (diagonal included) of a symmetric `n × n` matrix.
pub(crate) struct PackedSym {
    n: usize,
    values: Vec<f64>,
}

impl PackedSym {
    /// Entries `f(|x_i - x_j|²)`.
    pub(crate) fn from_sq_dists(n: usize, mut values: Vec<f64>, f: impl Fn(f64) -> f64 + Sync) -> Self {
        debug_assert_eq!(values.len(), n * (n + 1) / 2);
        values.par_iter_mut().with_min_len(4096).for_each(|v| *v = f(*v));
        Self { n, values }
    }

    /// `K_ε(x_i - x_j)` with the far-tail cutoff.
    pub(crate) fn density_kernel(ensemble: &ParticleEnsemble, kernel: &KernelSpec) -> Self {
        let (peak, inv) = (kernel.peak(), kernel.inv_two_var());
        Self::from_sq_dists(ensemble.len(), packed_sq_dists(ensemble), move |r2| {
            let e = -r2 * inv;
            if e < EXP_CUTOFF {
                0.0
            } else {
                peak * e.exp()
            }
        })
    }

    /// `y = A x`.
    pub(crate) fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x, 1)
    }

    /// `Y = A M` for a row-major `n × m` matrix `M`.
    pub(crate) fn apply(&self, m_rows: &[f64], m: usize) -> Vec<f64> {
        debug_assert_eq!(m_rows.len(), self.n * m);
        match m {
            1 => self.apply_fixed::<1>(m_rows),
            3 => self.apply_fixed::<3>(m_rows),
            5 => self.apply_fixed::<5>(m_rows),
            7 => self.apply_fixed::<7>(m_rows),
            _ => self.apply_dyn(m_rows, m),
        }
    }

    fn apply_fixed<const M: usize>(&self, m_rows: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n * M];
        let mut off = 0;
        for i in 0..n {
            let row = &self.values[off..off + n - i];
            off += n - i;
            let (head, tail) = y.split_at_mut((i + 1) * M);
            let mi: [f64; M] = m_rows[i * M..(i + 1) * M].try_into().expect("row width");
            let mut acc = [0.0; M];
            for c in 0..M {
                acc[c] = row[0] * mi[c];
            }
            for ((v, mj), yj) in row[1..]
                .iter()
                .zip(m_rows[(i + 1) * M..].chunks_exact(M))
                .zip(tail.chunks_exact_mut(M))
            {
                for c in 0..M {
                    acc[c] += v * mj[c];
                    yj[c] += v * mi[c];
                }
            }
            for c in 0..M {
                head[i * M + c] += acc[c];
            }
        }
        y
    }

    fn apply_dyn(&self, m_rows: &[f64], m: usize) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n * m];
        let mut off = 0;
        for i in 0..n {
            let row = &self.values[off..off + n - i];
            off += n - i;
            let (head, tail) = y.split_at_mut((i + 1) * m);
            let yi = &mut head[i * m..];
            let mi = &m_rows[i * m..(i + 1) * m];
            for c in 0..m {
                yi[c] += row[0] * mi[c];
            }
            for ((v, mj), yj) in row[1..]
                .iter()
                .zip(m_rows[(i + 1) * m..].chunks_exact(m))
                .zip(tail.chunks_exact_mut(m))
            {
                for c in 0..m {
                    yi[c] += v * mj[c];
                    yj[c] += v * mi[c];
                }
            }
        }
        y
    }
}
