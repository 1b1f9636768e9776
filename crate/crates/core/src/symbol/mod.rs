//! Profiles g(λ,·), the symbol m(λ) and tables of both.

mod kernel;
mod profile;
mod table;

pub use kernel::{profile_kernel, profile_kernel_with, KernelMatrix};
pub use profile::{solve_profile, ProfileInterpolant, ProfileOptions, ProfileSolution, ProfileSolver, DECAY_LENGTHS};
pub use table::{
    compute_symbol, compute_symbol_with, eval_symbol, Extrapolation, InvariantViolation, SymbolGap, SymbolOptions,
    SymbolTable, SymbolValue, ViolationKind,
};
