use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{GridMeta, HalfSpaceField, Provenance, TraceField};
use crate::symbol::{profile_kernel_with, KernelMatrix, ProfileOptions, SymbolTable};
use crate::weight::Weight;

/// Distinct nonzero |ξ|² of the grid's frequency lattice, ascending.
pub fn lattice_lambdas(grid: &GridMeta) -> Vec<f64> {
    let mut l: Vec<f64> = grid.squared_frequencies().into_iter().filter(|v| *v > 0.0).collect();
    l.sort_by(|a, b| a.partial_cmp(b).unwrap());
    l.dedup();
    l
}

/// U(x, t_j) = Σ_ξ g(|ξ|², t_j) û(ξ) e^{iξ·x} on the kernel's t levels.
/// Every nonzero lattice |ξ|² must be a row of the kernel; the zero mode is
/// carried unchanged.
pub fn extend(u: &TraceField, kernel: &KernelMatrix) -> Result<HalfSpaceField> {
    let lam = u.grid.squared_frequencies();
    let rows: HashMap<u64, usize> = kernel.lambdas.iter().enumerate().map(|(i, l)| (l.to_bits(), i)).collect();
    let mut row_of = Vec::with_capacity(lam.len());
    for l in &lam {
        if *l == 0.0 {
            row_of.push(None);
        } else {
            match rows.get(&l.to_bits()) {
                Some(i) => row_of.push(Some(*i)),
                None => return Err(Error::MissingProfile(*l)),
            }
        }
    }
    let spec = u.spectrum();
    let levels: Vec<Result<Vec<f64>>> = (0..kernel.t_levels.len())
        .into_par_iter()
        .map(|j| {
            let scaled: Vec<Complex64> = spec
                .iter()
                .zip(&row_of)
                .map(|(c, r)| match r {
                    Some(i) => c * kernel.get(*i, j),
                    None => *c,
                })
                .collect();
            Ok(TraceField::from_spectrum(u.grid.clone(), scaled)?.values)
        })
        .collect();
    let mut values = Vec::with_capacity(u.grid.len() * kernel.t_levels.len());
    for (j, lv) in levels.into_iter().enumerate() {
        let lv = lv?;
        if kernel.t_levels[j] == 0.0 {
            // the kernel is exactly one at t = 0; keep the samples bit-exact
            values.extend_from_slice(&u.values);
        } else {
            values.extend(lv);
        }
    }
    HalfSpaceField::new(u.grid.clone(), kernel.t_levels.clone(), values, &kernel.weight_id, Provenance::FourierFormula)
}

/// Solves the profiles for every lattice frequency of `u` and extends.
pub fn extend_with_weight(u: &TraceField, w: &Weight, t_levels: &[f64], opts: &ProfileOptions) -> Result<HalfSpaceField> {
    let kernel = profile_kernel_with(w, &lattice_lambdas(&u.grid), t_levels, opts)?;
    extend(u, &kernel)
}

#[derive(Debug, Clone)]
pub struct TraceOperatorOutput {
    pub f: TraceField,
    /// m(1), the constant relating L_a to (−Δ)ˢ for power weights; `None`
    /// when λ = 1 lies outside the table and extrapolation is disabled.
    pub m_one: Option<f64>,
    /// true when some lattice frequency needed the extrapolated symbol
    pub extrapolated: bool,
}

/// f = F⁻¹(m(|ξ|²) û) with m from the table.
pub fn apply_trace_operator(u: &TraceField, tab: &SymbolTable) -> Result<TraceOperatorOutput> {
    let lam = u.grid.squared_frequencies();
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut extrapolated = false;
    let mut mult = Vec::with_capacity(lam.len());
    for l in &lam {
        let m = match cache.get(&l.to_bits()) {
            Some(m) => *m,
            None => {
                let v = tab.eval(*l)?;
                extrapolated |= v.extrapolated;
                cache.insert(l.to_bits(), v.value);
                v.value
            }
        };
        mult.push(m);
    }
    let spec: Vec<Complex64> = u.spectrum().iter().zip(&mult).map(|(c, m)| c * m).collect();
    let f = TraceField::from_spectrum(u.grid.clone(), spec)?;
    let m_one = tab.eval(1.0).ok().map(|v| v.value);
    Ok(TraceOperatorOutput { f, m_one, extrapolated })
}
