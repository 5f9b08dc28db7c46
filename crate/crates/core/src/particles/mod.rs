//! Finite-`N` samplers: Langevin, SVGD, birth-death jumps and the masses ODE.

mod ensemble;
mod jump;
mod langevin;
mod masses;
mod pairwise;
mod rates;
mod sampler;
mod svgd;

pub use ensemble::ParticleEnsemble;
pub(crate) use ensemble::sq_dist;
pub use jump::{bd_jump_step, JumpDiagnostics};
pub use langevin::ula_step;
pub use masses::{masses_ode_step, Geometry, MassesOde, MassesStep};
pub use rates::{bd_rates_chi2, bd_rates_kl, bd_rates_kl_nongradient, JumpRates, RATE_CLIP};
pub use sampler::{bdls_run, run_sampler, sampler_step, Algorithm, SamplerDiagnostics, SamplerRng, SamplerSpec};
pub use svgd::{median_bandwidth_sq, svgd_step};
