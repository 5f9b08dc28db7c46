//! Trajectory recording, the decay-envelope run and the bandwidth ladder.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{bound_chi2, bound_kl, BoundParams};
use super::state::{MeanFieldState, Scheme};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::metrics::{chi2_grid, kl_grid, w2_1d, GridDensity, Topology};
use crate::stats::{linear_fit, proportional_fit};
use crate::targets::{TorusPotential, TorusTarget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusRunSpec {
    pub potential: TorusPotential,
    pub n_grid: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Spacing of recorded rows in time units.
    pub record_interval: f64,
    pub scheme: Scheme,
    pub epsilon: Option<f64>,
}

impl TorusRunSpec {
    pub fn bimodal(scheme: Scheme, epsilon: Option<f64>) -> Self {
        Self {
            potential: TorusPotential::bimodal(),
            n_grid: 1024,
            dt: 1e-3,
            t_final: 15.0,
            record_interval: 0.1,
            scheme,
            epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub kl: f64,
    pub chi2: f64,
    pub bound_b1: f64,
    pub bound_b2: f64,
    pub bound_chi2: f64,
    pub feps: Option<f64>,
    /// `|h Σ ρ − 1|` of the recorded state.
    pub mass_err: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub epsilon: Option<f64>,
    pub bounds: BoundParams,
    pub rows: Vec<TrajectoryRow>,
    pub final_state: MeanFieldState,
}

impl Trajectory {
    pub fn final_rho(&self) -> GridDensity {
        self.final_state.rho()
    }

    /// First recorded row with `t ≥ time`.
    pub fn row_at(&self, time: f64) -> Option<&TrajectoryRow> {
        self.rows.iter().find(|r| r.t >= time - 1e-9)
    }
}

fn record(state: &MeanFieldState, bounds: &BoundParams) -> Result<TrajectoryRow> {
    let rho = state.rho();
    let pi = state.target().density();
    let (b1, b2) = bound_kl(bounds, state.t());
    Ok(TrajectoryRow {
        t: state.t(),
        kl: kl_grid(&rho, pi)?,
        chi2: chi2_grid(&rho, pi)?,
        bound_b1: b1,
        bound_b2: b2,
        bound_chi2: bound_chi2(bounds, state.t()),
        feps: state.kernel().map(|_| state.energy_feps()).transpose()?,
        mass_err: (rho.mass() - 1.0).abs(),
    })
}

fn steps_for(span: f64, dt: f64, what: &str) -> Result<usize> {
    let k = (span / dt).round();
    if !(k >= 1.0) || ((k * dt - span).abs() > 1e-9 * span.max(1.0)) {
        return Err(Error::Config(format!("{what} {span} is not a whole number of steps of {dt}")));
    }
    Ok(k as usize)
}

/// Advance `state` to `t_final`, recording every `record_interval`.
pub fn run_trajectory_from(
    mut state: MeanFieldState,
    scheme: Scheme,
    dt: f64,
    t_final: f64,
    record_interval: f64,
) -> Result<Trajectory> {
    let n_steps = steps_for(t_final, dt, "final time")?;
    let every = steps_for(record_interval, dt, "record interval")?;
    let bounds = BoundParams::from_initial(&state.rho(), state.target().density())?;
    let mut rows = vec![record(&state, &bounds)?];
    let t0 = state.t();
    for k in 1..=n_steps {
        state.step(scheme, dt)?;
        if k % every == 0 || k == n_steps {
            // Recompute from the step index to avoid accumulated drift in t.
            let mut row = record(&state, &bounds)?;
            row.t = t0 + k as f64 * dt;
            rows.push(row);
        }
    }
    Ok(Trajectory {
        scheme,
        epsilon: state.kernel().map(KernelSpec::epsilon),
        bounds,
        rows,
        final_state: state,
    })
}

/// Trajectory from the uniform density.
pub fn run_trajectory(spec: &TorusRunSpec) -> Result<Trajectory> {
    let target = Arc::new(TorusTarget::new(spec.potential.clone(), spec.n_grid)?);
    let rho0 = GridDensity::uniform(spec.n_grid, target.period())?;
    let kernel = match (spec.scheme.needs_kernel(), spec.epsilon) {
        (true, None) => return Err(Error::Config(format!("scheme {:?} needs a bandwidth", spec.scheme))),
        (_, Some(e)) => Some(KernelSpec::new(e, 1)?),
        (false, None) => None,
    };
    let state = MeanFieldState::new(rho0, target, kernel)?;
    run_trajectory_from(state, spec.scheme, spec.dt, spec.t_final, spec.record_interval)
}

#[derive(Debug, Clone)]
pub struct DecayRecord {
    /// Pure birth-death flow with KL envelopes.
    pub kl: Trajectory,
    /// χ² flow with its envelope.
    pub chi2: Trajectory,
}

pub fn run_decay_experiment(spec: &TorusRunSpec) -> Result<DecayRecord> {
    let mut kl_spec = spec.clone();
    kl_spec.scheme = Scheme::Bd;
    kl_spec.epsilon = None;
    let mut chi_spec = kl_spec.clone();
    chi_spec.scheme = Scheme::Bd2;
    let (kl, chi2) = rayon::join(|| run_trajectory(&kl_spec), || run_trajectory(&chi_spec));
    Ok(DecayRecord { kl: kl?, chi2: chi2? })
}

#[derive(Debug, Clone)]
pub struct EpsRun {
    pub epsilon: f64,
    pub trajectory: Trajectory,
    pub kl_final: f64,
    pub w2_final: f64,
    pub feps_final: f64,
    /// `|KL(T) - KL(0.8 T)| / KL(T)`.
    pub plateau_rel_change: f64,
}

#[derive(Debug, Clone)]
pub struct EpsScaling {
    pub runs: Vec<EpsRun>,
    /// Least-squares slope of `log KL_T` against `log ε`.
    pub kl_slope: f64,
    pub kl_fit_r2: f64,
    pub w2_slope: f64,
    /// `C` in `F_ε ≈ -C ε²`, with the fit's coefficient of determination.
    pub feps_c: f64,
    pub feps_r2: f64,
}

/// Fraction of the horizon after which the plateau check starts.
pub const PLATEAU_WINDOW_START: f64 = 0.8;

pub fn run_eps_scaling(spec: &TorusRunSpec, epsilons: &[f64]) -> Result<EpsScaling> {
    if epsilons.len() < 2 {
        return Err(Error::Config("bandwidth ladder needs at least two values".into()));
    }
    let runs: Vec<Result<EpsRun>> = epsilons
        .par_iter()
        .map(|&eps| {
            let mut s = spec.clone();
            s.epsilon = Some(eps);
            if !s.scheme.needs_kernel() {
                s.scheme = Scheme::Bde;
            }
            let trajectory = run_trajectory(&s)?;
            let last = *trajectory.rows.last().expect("at least the initial row");
            let early = trajectory
                .row_at(PLATEAU_WINDOW_START * s.t_final)
                .copied()
                .unwrap_or(last);
            let rho = trajectory.final_rho();
            let w2_final = w2_1d(&rho, trajectory.final_state.target().density(), Topology::Circle)?;
            Ok(EpsRun {
                epsilon: eps,
                kl_final: last.kl,
                w2_final,
                feps_final: last.feps.expect("kernelized run records F_eps"),
                plateau_rel_change: (last.kl - early.kl).abs() / last.kl,
                trajectory,
            })
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let log_eps: Vec<f64> = runs.iter().map(|r| r.epsilon.ln()).collect();
    let log_kl: Vec<f64> = runs.iter().map(|r| r.kl_final.ln()).collect();
    let log_w2: Vec<f64> = runs.iter().map(|r| r.w2_final.ln()).collect();
    let kl_fit = linear_fit(&log_eps, &log_kl);
    let w2_fit = linear_fit(&log_eps, &log_w2);
    let eps2: Vec<f64> = runs.iter().map(|r| r.epsilon * r.epsilon).collect();
    let neg_feps: Vec<f64> = runs.iter().map(|r| -r.feps_final).collect();
    let (feps_c, feps_r2) = proportional_fit(&eps2, &neg_feps);
    Ok(EpsScaling {
        runs,
        kl_slope: kl_fit.slope,
        kl_fit_r2: kl_fit.r2,
        w2_slope: w2_fit.slope,
        feps_c,
        feps_r2,
    })
}
