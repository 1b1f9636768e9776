//! Half-space extension of periodic traces: the Fourier representation, the
//! boundary operator, the s-Poisson convolution and consistency checks.

mod energy;
mod fourier;
mod poisson;
mod rotate;
mod weak;

pub use energy::{boundary_flux, energy_identity_check, energy_identity_check_with, EnergyCheck};
pub use fourier::{apply_trace_operator, extend, extend_with_weight, lattice_lambdas, TraceOperatorOutput};
pub use poisson::{
    lattice_xi_grid, periodized_kernel, poisson_convolve, poisson_convolve_with, verify_poisson_symbol,
    verify_poisson_symbol_with, PeriodizedKernel, PoissonOptions, PoissonSymbolCheck, PoissonSymbolOptions,
};
pub use rotate::rotate_profile;
pub use weak::{default_test_bank, weak_residual, TestFunction, WeakResidual};
