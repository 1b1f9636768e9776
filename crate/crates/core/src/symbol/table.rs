use rayon::prelude::*;
use serde::Serialize;

use super::profile::{ProfileOptions, ProfileSolution, ProfileSolver};
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Extrapolation {
    #[default]
    Reject,
    /// power law fitted to the last decade of the table
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolGap {
    pub lambda: f64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    NotIncreasing,
    Lipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantViolation {
    /// index k of the pair (k, k+1)
    pub index: usize,
    pub kind: ViolationKind,
    pub excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymbolValue {
    pub value: f64,
    pub extrapolated: bool,
}

/// Sampled symbol λ ↦ m(λ). Only converged λ values are stored; failed
/// ones are listed in `gaps`.
#[derive(Debug, Clone)]
pub struct SymbolTable {
    pub weight_id: String,
    pub lambdas: Vec<f64>,
    pub m_values: Vec<f64>,
    pub est_errors: Vec<f64>,
    pub profiles: Vec<Option<ProfileSolution>>,
    pub gaps: Vec<SymbolGap>,
    pub violations: Vec<InvariantViolation>,
    pub extrapolation: Extrapolation,
    interp: MonotoneCubic,
    low: (f64, f64),
    high: (f64, f64),
}

impl SymbolTable {
    pub fn new(weight_id: &str, lambdas: Vec<f64>, m_values: Vec<f64>, est_errors: Vec<f64>) -> Result<Self> {
        let n = lambdas.len();
        Self::assemble(weight_id, lambdas, m_values, est_errors, vec![None; n], Vec::new())
    }

    fn assemble(
        weight_id: &str,
        lambdas: Vec<f64>,
        m_values: Vec<f64>,
        est_errors: Vec<f64>,
        profiles: Vec<Option<ProfileSolution>>,
        gaps: Vec<SymbolGap>,
    ) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument("symbol table has no converged entries".into()));
        }
        if lambdas.len() != m_values.len() || lambdas.len() != est_errors.len() {
            return Err(Error::InvalidArgument("symbol table columns differ in length".into()));
        }
        if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("lambdas must be positive and strictly increasing".into()));
        }
        if m_values.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument("symbol values must be positive".into()));
        }
        let lx: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
        let ly: Vec<f64> = m_values.iter().map(|m| m.ln()).collect();
        let low = decade_fit(&lx, &ly, false);
        let high = decade_fit(&lx, &ly, true);
        let interp = MonotoneCubic::new(lx, ly);
        let mut tab = Self {
            weight_id: weight_id.to_string(),
            lambdas,
            m_values,
            est_errors,
            profiles,
            gaps,
            violations: Vec::new(),
            extrapolation: Extrapolation::Reject,
            interp,
            low,
            high,
        };
        tab.violations = tab.check_invariants(1e-12);
        Ok(tab)
    }

    pub fn with_extrapolation(mut self, policy: Extrapolation) -> Self {
        self.extrapolation = policy;
        self
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn max_lambda(&self) -> f64 {
        *self.lambdas.last().unwrap()
    }

    /// Monotonicity and the discrete Lipschitz bound
    /// m_{k+1} − m_k ≤ (m_k/λ_k)(λ_{k+1} − λ_k), each with slack
    /// `rel_tol + est_k + est_{k+1}` relative to m_{k+1}.
    pub fn check_invariants(&self, rel_tol: f64) -> Vec<InvariantViolation> {
        let (l, m, e) = (&self.lambdas, &self.m_values, &self.est_errors);
        let mut out = Vec::new();
        for k in 0..l.len().saturating_sub(1) {
            let slack = (rel_tol + e[k] + e[k + 1]) * m[k + 1];
            if m[k + 1] <= m[k] {
                out.push(InvariantViolation { index: k, kind: ViolationKind::NotIncreasing, excess: m[k] - m[k + 1] });
            }
            let excess = (m[k + 1] - m[k]) - m[k] / l[k] * (l[k + 1] - l[k]);
            if excess > slack {
                out.push(InvariantViolation { index: k, kind: ViolationKind::Lipschitz, excess });
            }
        }
        out
    }

    pub fn eval(&self, lambda: f64) -> Result<SymbolValue> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        if lambda == 0.0 {
            return Ok(SymbolValue { value: 0.0, extrapolated: false });
        }
        let x = lambda.ln();
        let (x0, xn) = (self.interp.xs()[0], *self.interp.xs().last().unwrap());
        if x < x0 {
            let (slope, icpt) = self.low;
            return Ok(SymbolValue { value: (icpt + slope * x).exp(), extrapolated: false });
        }
        if x <= xn + 1e-12 {
            return Ok(SymbolValue { value: self.interp.eval(x.min(xn)).exp(), extrapolated: false });
        }
        match self.extrapolation {
            Extrapolation::Reject => Err(Error::ExtrapolationDisabled { lambda, max: self.max_lambda() }),
            Extrapolation::PowerLaw => {
                let (slope, icpt) = self.high;
                Ok(SymbolValue { value: (icpt + slope * x).exp(), extrapolated: true })
            }
        }
    }

    pub fn profile(&self, lambda: f64) -> Option<&ProfileSolution> {
        let i = self.lambdas.iter().position(|l| *l == lambda)?;
        self.profiles[i].as_ref()
    }
}

/// Least-squares line through (ln λ, ln m) over one decade at either end.
/// A single point gives a horizontal line.
fn decade_fit(x: &[f64], y: &[f64], upper: bool) -> (f64, f64) {
    let n = x.len();
    if n == 1 {
        return (0.0, y[0]);
    }
    let dec = std::f64::consts::LN_10;
    let idx: Vec<usize> = if upper {
        let end = x[n - 1];
        let v: Vec<usize> = (0..n).filter(|&i| end - x[i] <= dec).collect();
        if v.len() >= 2 { v } else { vec![n - 2, n - 1] }
    } else {
        let start = x[0];
        let v: Vec<usize> = (0..n).filter(|&i| x[i] - start <= dec).collect();
        if v.len() >= 2 { v } else { vec![0, 1] }
    };
    let k = idx.len() as f64;
    let mx = idx.iter().map(|&i| x[i]).sum::<f64>() / k;
    let my = idx.iter().map(|&i| y[i]).sum::<f64>() / k;
    let sxx: f64 = idx.iter().map(|&i| (x[i] - mx).powi(2)).sum();
    let sxy: f64 = idx.iter().map(|&i| (x[i] - mx) * (y[i] - my)).sum();
    let slope = sxy / sxx;
    // anchor the line at the end node so the fit is continuous there
    let anchor = if upper { n - 1 } else { 0 };
    (slope, y[anchor] - slope * x[anchor])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolOptions {
    pub profile: ProfileOptions,
    pub keep_profiles: bool,
}

impl Default for SymbolOptions {
    fn default() -> Self {
        Self { profile: ProfileOptions::default(), keep_profiles: true }
    }
}

pub fn compute_symbol(w: &Weight, lambdas: &[f64], tol: f64) -> Result<SymbolTable> {
    let opts = SymbolOptions { profile: ProfileOptions::with_tol(tol), ..Default::default() };
    compute_symbol_with(w, lambdas, &opts)
}

/// Solves every λ in parallel. Failed λ become gaps; the call fails only
/// when no λ converged or the input is malformed.
pub fn compute_symbol_with(w: &Weight, lambdas: &[f64], opts: &SymbolOptions) -> Result<SymbolTable> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("lambda list is empty".into()));
    }
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) || lambdas.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("lambdas must be positive and strictly increasing".into()));
    }
    let solver = ProfileSolver::new(w, opts.profile)?;
    let results: Vec<Result<ProfileSolution>> = lambdas.par_iter().map(|&l| solver.solve(l)).collect();
    let mut ls = Vec::new();
    let mut ms = Vec::new();
    let mut es = Vec::new();
    let mut ps = Vec::new();
    let mut gaps = Vec::new();
    for (l, r) in lambdas.iter().zip(results) {
        match r {
            Ok(p) => {
                ls.push(*l);
                ms.push(p.m_value);
                es.push(p.est_error);
                ps.push(if opts.keep_profiles { Some(p) } else { None });
            }
            Err(e) => gaps.push(SymbolGap { lambda: *l, error: e.to_string() }),
        }
    }
    if ls.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no lambda converged; first failure: {}",
            gaps.first().map(|g| g.error.as_str()).unwrap_or("")
        )));
    }
    SymbolTable::assemble(w.id(), ls, ms, es, ps, gaps)
}

pub fn eval_symbol(tab: &SymbolTable, lambda: f64) -> Result<SymbolValue> {
    tab.eval(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt_table(lams: &[f64]) -> SymbolTable {
        let m: Vec<f64> = lams.iter().map(|l| l.sqrt()).collect();
        SymbolTable::new("x", lams.to_vec(), m, vec![0.0; lams.len()]).unwrap()
    }

    #[test]
    fn interpolation_is_exact_for_power_laws() {
        let t = sqrt_table(&[0.25, 1.0, 4.0, 16.0]);
        assert!((t.eval(2.25).unwrap().value - 1.5).abs() < 1e-12);
        assert!((t.eval(0.01).unwrap().value - 0.1).abs() < 1e-12);
        assert_eq!(t.eval(0.0).unwrap().value, 0.0);
        assert!(t.violations.is_empty());
    }

    #[test]
    fn extrapolation_policy() {
        let t = sqrt_table(&[1.0, 4.0, 16.0]);
        assert!(matches!(t.eval(64.0), Err(Error::ExtrapolationDisabled { .. })));
        let t = t.with_extrapolation(Extrapolation::PowerLaw);
        let v = t.eval(64.0).unwrap();
        assert!(v.extrapolated);
        assert!((v.value - 8.0).abs() < 1e-10);
        assert!(!t.eval(16.0).unwrap().extrapolated);
    }

    #[test]
    fn singleton_is_constant() {
        let t = SymbolTable::new("x", vec![1.0], vec![0.7], vec![0.0]).unwrap();
        assert_eq!(t.eval(1.0).unwrap().value, 0.7);
        assert_eq!(t.eval(0.3).unwrap().value, 0.7);
    }

    #[test]
    fn violations_are_reported() {
        let t = SymbolTable::new("x", vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 2.5], vec![0.0; 3]).unwrap();
        assert!(t.violations.iter().any(|v| v.index == 0 && v.kind == ViolationKind::Lipschitz));
        assert!(t.violations.iter().any(|v| v.index == 1 && v.kind == ViolationKind::NotIncreasing));
    }

    #[test]
    fn unsorted_lambdas_rejected() {
        let w = Weight::power(0.5).unwrap();
        assert!(compute_symbol(&w, &[2.0, 1.0], 1e-6).is_err());
        assert!(compute_symbol(&w, &[], 1e-6).is_err());
    }

    #[test]
    fn failures_become_gaps() {
        let w = Weight::power(0.5).unwrap();
        let opts = SymbolOptions {
            profile: ProfileOptions { tol: 1e-9, max_cells: 2048, ..Default::default() },
            keep_profiles: false,
        };
        // tiny lambda needs a long domain and fails within the cell budget
        let t = compute_symbol_with(&w, &[1e-6, 1.0], &opts);
        if let Ok(t) = t {
            assert_eq!(t.len() + t.gaps.len(), 2);
        }
    }
}
