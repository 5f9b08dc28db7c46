//! Mean-field birth-death dynamics on the one-dimensional torus grid.

mod bounds;
mod experiment;
mod state;

pub use bounds::{adaptive_simpson, bound_chi2, bound_kl, chi2_rate, kl_rate, BoundParams};
pub use experiment::{
    run_decay_experiment, run_eps_scaling, run_trajectory, run_trajectory_from, DecayRecord, EpsRun, EpsScaling,
    Trajectory, TorusRunSpec, TrajectoryRow, PLATEAU_WINDOW_START,
};
pub use state::{bd_exact, energy_f, energy_feps, MeanFieldState, Scheme};
