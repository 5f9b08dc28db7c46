//! Grid integrators for the birth-death family on the torus.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{CircularConvolver, KernelSpec};
use crate::metrics::{kl_grid, GridDensity, POSITIVITY_FLOOR};
use crate::targets::TorusTarget;

/// Time integrator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Pure birth-death flow of the relative entropy.
    Bd,
    /// Birth-death flow of the χ² divergence.
    Bd2,
    /// Kernelized birth-death flow of the regularized entropy.
    Bde,
    /// Kernelized birth-death with a Fokker-Planck drift, Strang split.
    Bdls,
    /// Fokker-Planck (Langevin) dynamics alone.
    FokkerPlanck,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bd => "bd",
            Scheme::Bd2 => "bd2",
            Scheme::Bde => "bde",
            Scheme::Bdls => "bdls",
            Scheme::FokkerPlanck => "fokker_planck",
        }
    }

    pub fn needs_kernel(self) -> bool {
        matches!(self, Scheme::Bde | Scheme::Bdls)
    }

    pub fn needs_cfl(self) -> bool {
        matches!(self, Scheme::Bdls | Scheme::FokkerPlanck)
    }
}

#[derive(Debug, Clone)]
pub struct MeanFieldState {
    rho: Vec<f64>,
    t: f64,
    target: Arc<TorusTarget>,
    log_pi: Arc<Vec<f64>>,
    kernel: Option<KernelSpec>,
    conv: Option<Arc<CircularConvolver>>,
    last_mass_error: f64,
}

fn normalize_log(log_rho: &[f64], h: f64) -> Vec<f64> {
    let m = log_rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_rho.iter().map(|v| (v - m).exp()).sum::<f64>() * h;
    let shift = m + z.ln();
    log_rho.iter().map(|v| (v - shift).exp()).collect()
}

/// Resolvable bandwidths are at least this many grid spacings.
const MIN_EPS_IN_CELLS: f64 = 2.0;

impl MeanFieldState {
    pub fn new(rho: GridDensity, target: Arc<TorusTarget>, kernel: Option<KernelSpec>) -> Result<Self> {
        rho.check_same_grid(target.density())?;
        if !rho.is_strictly_positive() {
            return Err(Error::input("initial density must be strictly positive"));
        }
        let conv = match &kernel {
            Some(k) => {
                if k.dim() != 1 {
                    return Err(Error::Config(format!("torus kernel must be 1D, got dim {}", k.dim())));
                }
                if k.epsilon() < MIN_EPS_IN_CELLS * rho.h() {
                    return Err(Error::Config(format!(
                        "bandwidth {} is below {MIN_EPS_IN_CELLS} grid spacings ({})",
                        k.epsilon(),
                        MIN_EPS_IN_CELLS * rho.h()
                    )));
                }
                Some(Arc::new(CircularConvolver::new(k, rho.len(), rho.period())?))
            }
            None => None,
        };
        let log_pi = Arc::new(target.log_density_grid());
        Ok(Self {
            rho: rho.into_values(),
            t: 0.0,
            target,
            log_pi,
            kernel,
            conv,
            last_mass_error: 0.0,
        })
    }

    pub fn rho(&self) -> GridDensity {
        GridDensity::new(self.rho.clone(), self.target.period()).expect("state is kept normalized")
    }

    pub fn rho_values(&self) -> &[f64] {
        &self.rho
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn target(&self) -> &TorusTarget {
        &self.target
    }

    pub fn kernel(&self) -> Option<&KernelSpec> {
        self.kernel.as_ref()
    }

    /// `|h Σ ρ - 1|` just before the most recent renormalization.
    pub fn last_mass_error(&self) -> f64 {
        self.last_mass_error
    }

    fn h(&self) -> f64 {
        self.target.h()
    }

    fn check_dt(dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::input(format!("time step must be positive, got {dt}")));
        }
        Ok(())
    }

    fn check_cfl(&self, dt: f64) -> Result<()> {
        let limit = 0.5 * self.h() * self.h();
        if dt > limit {
            return Err(Error::Config(format!("time step {dt} violates the diffusion limit h²/2 = {limit}")));
        }
        Ok(())
    }

    fn convolver(&self) -> Result<&CircularConvolver> {
        self.conv
            .as_deref()
            .ok_or_else(|| Error::Config("kernelized scheme requires a kernel".into()))
    }

    fn log_rho(&self) -> Vec<f64> {
        self.rho.iter().map(|v| v.max(POSITIVITY_FLOOR).ln()).collect()
    }

    fn accept(&mut self, raw: Vec<f64>, dt: f64) -> Result<()> {
        if let Some(i) = raw.iter().position(|v| !(v.is_finite() && *v >= POSITIVITY_FLOOR)) {
            return Err(Error::SolverAbort(format!(
                "density value {} at node {i} violates the positivity floor at t = {}",
                raw[i],
                self.t + dt
            )));
        }
        let mass = self.h() * raw.iter().sum::<f64>();
        self.last_mass_error = (mass - 1.0).abs();
        self.rho = raw.into_iter().map(|v| v / mass).collect();
        self.t += dt;
        Ok(())
    }

    fn accept_log(&mut self, log_rho: Vec<f64>, dt: f64) -> Result<()> {
        let h = self.h();
        let raw: Vec<f64> = log_rho.iter().map(|v| v.exp()).collect();
        self.last_mass_error = (h * raw.iter().sum::<f64>() - 1.0).abs();
        let rho = normalize_log(&log_rho, h);
        let saved = self.last_mass_error;
        self.accept(rho, dt)?;
        self.last_mass_error = saved;
        Ok(())
    }

    pub fn step(&mut self, scheme: Scheme, dt: f64) -> Result<()> {
        match scheme {
            Scheme::Bd => self.step_bd(dt),
            Scheme::Bd2 => self.step_bd2(dt),
            Scheme::Bde => self.step_bde(dt),
            Scheme::Bdls => self.step_bdls(dt),
            Scheme::FokkerPlanck => self.step_fokker_planck(dt),
        }
    }

    /// `η ← (1 - dt) η` for `η = log(ρ/π)`.
    pub fn step_bd(&mut self, dt: f64) -> Result<()> {
        Self::check_dt(dt)?;
        let next: Vec<f64> = self
            .log_rho()
            .iter()
            .zip(self.log_pi.iter())
            .map(|(lr, lp)| lp + (1.0 - dt) * (lr - lp))
            .collect();
        self.accept_log(next, dt)
    }

    /// `log ρ ← log ρ - dt (ρ/π - ∫ρ²/π)`.
    pub fn step_bd2(&mut self, dt: f64) -> Result<()> {
        Self::check_dt(dt)?;
        let pi = self.target.density().values();
        let ratio: Vec<f64> = self.rho.iter().zip(pi).map(|(r, p)| r / p).collect();
        let mean = self.h() * self.rho.iter().zip(&ratio).map(|(r, q)| r * q).sum::<f64>();
        let next: Vec<f64> = self
            .log_rho()
            .iter()
            .zip(&ratio)
            .map(|(lr, q)| lr - dt * (q - mean))
            .collect();
        self.accept_log(next, dt)
    }

    /// First variation `log(K*ρ/π) + K*(ρ/K*ρ)` of the regularized entropy.
    fn feps_derivative(&self) -> Result<Vec<f64>> {
        let conv = self.convolver()?;
        let k_rho = conv.apply(&self.rho);
        if let Some(i) = k_rho.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::SolverAbort(format!("smoothed density vanished at node {i}, t = {}", self.t)));
        }
        let ratio: Vec<f64> = self.rho.iter().zip(&k_rho).map(|(r, k)| r / k).collect();
        let k_ratio = conv.apply(&ratio);
        Ok(k_rho
            .iter()
            .zip(self.log_pi.iter())
            .zip(&k_ratio)
            .map(|((k, lp), kr)| k.ln() - lp + kr)
            .collect())
    }

    /// Explicit Euler on `ρ` with the mean-subtracted first variation.
    pub fn step_bde(&mut self, dt: f64) -> Result<()> {
        Self::check_dt(dt)?;
        let r = self.feps_derivative()?;
        let mean = self.h() * self.rho.iter().zip(&r).map(|(p, v)| p * v).sum::<f64>();
        let next: Vec<f64> = self.rho.iter().zip(&r).map(|(p, v)| p * (1.0 - dt * (v - mean))).collect();
        self.accept(next, dt)
    }

    fn fp_substep(&self, rho: &[f64], tau: f64) -> Vec<f64> {
        let n = rho.len();
        let h = self.h();
        let dv = self.target.potential_derivative();
        let (inv_h2, inv_2h) = (1.0 / (h * h), 0.5 / h);
        (0..n)
            .map(|i| {
                let (l, r) = ((i + n - 1) % n, (i + 1) % n);
                let lap = (rho[r] - 2.0 * rho[i] + rho[l]) * inv_h2;
                let drift = (rho[r] * dv[r] - rho[l] * dv[l]) * inv_2h;
                rho[i] + tau * (lap + drift)
            })
            .collect()
    }

    /// Explicit central-difference step of `∂ρ = Δρ + ∂(ρ V')`.
    pub fn step_fokker_planck(&mut self, dt: f64) -> Result<()> {
        Self::check_dt(dt)?;
        self.check_cfl(dt)?;
        let next = self.fp_substep(&self.rho, dt);
        self.accept(next, dt)
    }

    /// Fokker-Planck half step, kernelized birth-death step, Fokker-Planck half step.
    pub fn step_bdls(&mut self, dt: f64) -> Result<()> {
        Self::check_dt(dt)?;
        self.check_cfl(dt)?;
        self.convolver()?;
        let t0 = self.t;
        let half = self.fp_substep(&self.rho, 0.5 * dt);
        self.accept(half, 0.0)?;
        self.step_bde(dt)?;
        let last = self.fp_substep(&self.rho, 0.5 * dt);
        self.accept(last, 0.0)?;
        self.t = t0 + dt;
        Ok(())
    }

    pub fn energy_f(&self) -> f64 {
        kl_grid(&self.rho(), self.target.density()).expect("state shares the target grid")
    }

    pub fn energy_feps(&self) -> Result<f64> {
        let conv = self.convolver()?;
        Ok(feps_with(&self.rho, self.target.density().values(), conv, self.h()))
    }
}

fn feps_with(rho: &[f64], pi: &[f64], conv: &CircularConvolver, h: f64) -> f64 {
    let k_rho = conv.apply(rho);
    h * rho
        .iter()
        .zip(&k_rho)
        .zip(pi)
        .filter(|((r, _), _)| **r > 0.0)
        .map(|((r, k), p)| r * (k.max(POSITIVITY_FLOOR).ln() - p.ln()))
        .sum::<f64>()
}

/// `π (ρ0/π)^{e^{-t}}`, renormalized.
pub fn bd_exact(rho0: &GridDensity, target: &TorusTarget, t: f64) -> Result<GridDensity> {
    rho0.check_same_grid(target.density())?;
    if !rho0.is_strictly_positive() {
        return Err(Error::input("initial density must be strictly positive"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::input(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let decay = (-t).exp();
    let log_rho: Vec<f64> = rho0
        .values()
        .iter()
        .zip(target.log_density_grid())
        .map(|(r, lp)| lp + decay * (r.ln() - lp))
        .collect();
    GridDensity::new(normalize_log(&log_rho, rho0.h()), rho0.period())
}

/// Relative entropy `KL(ρ|π)` on the grid.
pub fn energy_f(rho: &GridDensity, target: &TorusTarget) -> Result<f64> {
    kl_grid(rho, target.density())
}

/// `h Σ ρ log(K_ε*ρ / π)`, so that `F_ε - KL = -KL(ρ | K_ε*ρ)`.
pub fn energy_feps(rho: &GridDensity, target: &TorusTarget, kernel: &KernelSpec) -> Result<f64> {
    rho.check_same_grid(target.density())?;
    let conv = CircularConvolver::new(kernel, rho.len(), rho.period())?;
    Ok(feps_with(rho.values(), target.density().values(), &conv, rho.h()))
}
