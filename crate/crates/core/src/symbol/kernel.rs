use rayon::prelude::*;

use super::profile::{ProfileOptions, ProfileSolver};
use crate::error::{Error, Result};
use crate::weight::Weight;

/// Dense table of g(λ_i, t_j), row-major in λ.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub weight_id: String,
    pub lambdas: Vec<f64>,
    pub t_levels: Vec<f64>,
    pub values: Vec<f64>,
    pub m_values: Vec<f64>,
    pub est_errors: Vec<f64>,
}

impl KernelMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.t_levels.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.t_levels.len() + j]
    }

    /// Row of an exactly matching λ (the lattice is built from the same
    /// floating-point expressions, so bitwise lookup is intended).
    pub fn index_of(&self, lambda: f64) -> Option<usize> {
        self.lambdas.iter().position(|l| *l == lambda)
    }

    pub fn max_est_error(&self) -> f64 {
        self.est_errors.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn profile_kernel(w: &Weight, lambdas: &[f64], t_levels: &[f64], tol: f64) -> Result<KernelMatrix> {
    profile_kernel_with(w, lambdas, t_levels, &ProfileOptions::with_tol(tol))
}

/// Solves one profile per λ and samples it on `t_levels`. The truncation is
/// raised to cover the largest level; profiles are dropped after sampling.
pub fn profile_kernel_with(w: &Weight, lambdas: &[f64], t_levels: &[f64], opts: &ProfileOptions) -> Result<KernelMatrix> {
    if t_levels.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || t_levels.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::InvalidArgument("t levels must be finite, non-negative and sorted".into()));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("lambdas must be finite and non-negative".into()));
    }
    let t_top = t_levels.last().cloned().unwrap_or(0.0);
    let mut o = *opts;
    o.min_truncation = o.min_truncation.max(t_top);
    let solver = ProfileSolver::new(w, o)?;
    let rows: Vec<Result<(Vec<f64>, f64, f64)>> = lambdas
        .par_iter()
        .map(|&l| {
            if l == 0.0 {
                return Ok((vec![1.0; t_levels.len()], 0.0, 0.0));
            }
            let p = solver.solve(l)?;
            let f = p.interpolant();
            let row = t_levels.iter().map(|&t| f.eval(t)).collect::<Result<Vec<f64>>>()?;
            Ok((row, p.m_value, p.est_error))
        })
        .collect();
    let mut values = Vec::with_capacity(lambdas.len() * t_levels.len());
    let mut m_values = Vec::with_capacity(lambdas.len());
    let mut est_errors = Vec::with_capacity(lambdas.len());
    for r in rows {
        let (row, m, e) = r?;
        values.extend(row);
        m_values.push(m);
        est_errors.push(e);
    }
    Ok(KernelMatrix {
        weight_id: w.id().to_string(),
        lambdas: lambdas.to_vec(),
        t_levels: t_levels.to_vec(),
        values,
        m_values,
        est_errors,
    })
}
