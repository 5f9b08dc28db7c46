//! Divergences, distances and discrepancies between densities on a uniform
//! periodic grid and between particle ensembles and Gaussian mixtures.

mod divergence;
mod grid;
mod mmd;
mod transport;

pub use divergence::{chi2_grid, hellinger, kl_grid, sh_geodesic, spherical_hellinger};
pub use grid::GridDensity;
pub use mmd::{mmd, mmd2, observable_error, MeasureRef};
pub use transport::{w2_1d, w2_line_weighted, Topology};

/// Values below this are clamped before taking logarithms.
pub const POSITIVITY_FLOOR: f64 = 1e-300;
