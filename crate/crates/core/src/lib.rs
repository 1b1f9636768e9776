//! Weighted half-space extensions.
//!
//! For a weight a(t) on (0, ∞) this crate computes the profiles g(λ, t) and
//! the symbol m(λ) of the induced boundary operator, extends periodic traces
//! into the half-space through their Fourier modes, and evaluates angle and
//! energy-growth diagnostics on the resulting fields.

pub mod config;
pub mod error;
pub mod extension;
pub mod field;
pub mod interp;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod rigidity;
pub mod spectral;
pub mod symbol;
pub mod weight;

pub use error::{Error, Result};
pub use field::{GridMeta, HalfSpaceField, Provenance, TraceField};
pub use symbol::{
    compute_symbol, eval_symbol, profile_kernel, solve_profile, KernelMatrix, ProfileOptions, ProfileSolution,
    SymbolTable,
};
pub use weight::{a2_diagnose, parse_weight, A2Report, Weight};
