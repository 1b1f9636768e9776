//! Finite A₂ certificates: interval ratios on dyadic partitions of
//! (0, t_max], partial masses and the reciprocal growth constant.

use serde::Serialize;

use super::Weight;
use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A2Options {
    /// Cells of the graded rule on the first dyadic cell.
    pub first_cell_nodes: usize,
    /// Relative tolerance of the adaptive rule on the other cells.
    pub rel_tol: f64,
    /// Per-level growth of the maximal ratio counted as "unbounded".
    pub growth_tol: f64,
    /// Relative mass increment below which partial masses count as converged.
    pub mass_tol: f64,
}

impl Default for A2Options {
    fn default() -> Self {
        Self { first_cell_nodes: 64, rel_tol: 1e-13, growth_tol: 0.05, mass_tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalFailure {
    pub lo: f64,
    pub hi: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A2Report {
    pub a2_constant_estimate: f64,
    pub intervals_tested: usize,
    /// least C with ∫₀ᵗ dτ/a ≤ C(1+t²) over the finest cell end points
    #[serde(rename = "growth_constant_C")]
    pub growth_constant_c: f64,
    /// (T_k, ∫₀^{T_k} a) with T_k = t_max 2^{k-levels+1}
    pub tail_mass: Vec<(f64, f64)>,
    /// (T_k, ∫₀^{T_k} 1/a)
    pub reciprocal_mass: Vec<(f64, f64)>,
    /// (interval length, max ratio over intervals of that length)
    pub level_max_ratio: Vec<(f64, f64)>,
    /// smallest ratio over all intervals (≥ 1 by Cauchy–Schwarz)
    pub min_ratio: f64,
    pub failures: Vec<IntervalFailure>,
    #[serde(rename = "is_plausibly_A2")]
    pub is_plausibly_a2: bool,
    pub notes: Vec<String>,
}

pub fn a2_diagnose(w: &Weight, t_max: f64, levels: usize) -> Result<A2Report> {
    a2_diagnose_with(w, t_max, levels, &A2Options::default())
}

pub fn a2_diagnose_with(w: &Weight, t_max: f64, levels: usize, opts: &A2Options) -> Result<A2Report> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
    }
    if levels < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 levels, got {levels}")));
    }
    if levels > 24 {
        return Err(Error::InvalidArgument(format!("at most 24 levels supported, got {levels}")));
    }
    let n = 1usize << (levels - 1);
    let h = t_max / n as f64;
    let fa = |t: f64| w.value(t);
    let fr = |t: f64| 1.0 / w.value(t);

    let mut failures = Vec::new();
    let mut ia = Vec::with_capacity(n);
    let mut ir = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i as f64 * h;
        let hi = (i + 1) as f64 * h;
        let pair = if i == 0 {
            quadrature::graded_from_zero(&fa, hi, opts.first_cell_nodes)
                .and_then(|a| Ok((a, quadrature::graded_from_zero(&fr, hi, opts.first_cell_nodes)?)))
        } else {
            quadrature::adaptive(&fa, lo, hi, opts.rel_tol)
                .and_then(|a| Ok((a, quadrature::adaptive(&fr, lo, hi, opts.rel_tol)?)))
        };
        match pair {
            Ok((a, r)) if a.is_finite() && r.is_finite() => {
                ia.push(a);
                ir.push(r);
            }
            Ok((a, r)) => {
                failures.push(IntervalFailure { lo, hi, message: format!("non-finite integrals ({a}, {r})") });
                ia.push(f64::NAN);
                ir.push(f64::NAN);
            }
            Err(e) => {
                failures.push(IntervalFailure { lo, hi, message: e.to_string() });
                ia.push(f64::NAN);
                ir.push(f64::NAN);
            }
        }
    }

    let mut level_max_ratio = Vec::with_capacity(levels);
    let mut tail_mass = Vec::with_capacity(levels);
    let mut reciprocal_mass = Vec::with_capacity(levels);
    let mut a2 = f64::NEG_INFINITY;
    let mut min_ratio = f64::INFINITY;
    let mut tested = 0usize;
    for k in 0..levels {
        let width = 1usize << k;
        let len = h * width as f64;
        let mut lmax = f64::NEG_INFINITY;
        for j in 0..n / width {
            let sa: f64 = ia[j * width..(j + 1) * width].iter().sum();
            let sr: f64 = ir[j * width..(j + 1) * width].iter().sum();
            let ratio = sa * sr / (len * len);
            tested += 1;
            if ratio.is_nan() {
                lmax = f64::INFINITY;
                continue;
            }
            lmax = lmax.max(ratio);
            min_ratio = min_ratio.min(ratio);
        }
        a2 = a2.max(lmax);
        level_max_ratio.push((len, lmax));
        tail_mass.push((len, ia[..width].iter().sum::<f64>()));
        reciprocal_mass.push((len, ir[..width].iter().sum::<f64>()));
    }
    let mut growth_constant_c = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for (i, r) in ir.iter().enumerate() {
        acc += r;
        let t = (i + 1) as f64 * h;
        growth_constant_c = growth_constant_c.max(acc / (1.0 + t * t));
    }

    let mut notes = Vec::new();
    let mut plausible = true;
    if !failures.is_empty() {
        plausible = false;
        notes.push(format!("{} interval(s) failed quadrature", failures.len()));
    }
    if !a2.is_finite() {
        plausible = false;
        notes.push("interval ratio is not finite".into());
    }
    // sustained growth of the per-level maximum over the three coarsest levels
    let r: Vec<f64> = level_max_ratio.iter().map(|p| p.1).collect();
    let growing = r.windows(2).rev().take(2).all(|p| p[1] > p[0] * (1.0 + opts.growth_tol));
    if growing {
        plausible = false;
        notes.push(format!(
            "interval ratios grow across the coarsest levels: {:?}",
            &r[r.len().saturating_sub(3)..]
        ));
    }
    let m = &tail_mass;
    let (m_prev, m_last): (f64, f64) = (m[m.len() - 2].1, m[m.len() - 1].1);
    if m_last.is_finite() && (m_last - m_prev) <= opts.mass_tol * m_last {
        plausible = false;
        notes.push(format!("partial masses appear to converge ({m_prev:.6e} -> {m_last:.6e})"));
    }

    Ok(A2Report {
        a2_constant_estimate: a2,
        intervals_tested: tested,
        growth_constant_c,
        tail_mass,
        reciprocal_mass,
        level_max_ratio,
        min_ratio,
        failures,
        is_plausibly_a2: plausible,
        notes,
    })
}
