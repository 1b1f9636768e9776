use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{HalfSpaceField, TraceField};
use crate::symbol::SymbolTable;
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyCheck {
    /// ∫ a |∇U|² over the t levels plus the tail estimate
    pub lhs: f64,
    /// Σ m(|ξ|²) |û(ξ)|²
    pub rhs: f64,
    pub rel_gap: f64,
    /// estimated energy beyond the last level
    pub tail_estimate: f64,
}

/// Checks the energy identity with a relative tail tolerance of 1e-3.
pub fn energy_identity_check(u: &TraceField, big_u: &HalfSpaceField, w: &Weight, tab: &SymbolTable) -> Result<EnergyCheck> {
    energy_identity_check_with(u, big_u, w, tab, 1e-3)
}

/// Left side: Parseval in x, product integration in t with the exact cell
/// weights ∫_cell a, trapezoid for |∇ₓU|² and one-sided differences for
/// ∂ₜU. The energy beyond the last level is estimated per mode from the
/// decay rate of the last cell.
pub fn energy_identity_check_with(
    u: &TraceField,
    big_u: &HalfSpaceField,
    w: &Weight,
    tab: &SymbolTable,
    tail_tol: f64,
) -> Result<EnergyCheck> {
    if !u.grid.same_shape(&big_u.grid) {
        return Err(Error::GridMismatch("trace and field grids differ".into()));
    }
    if big_u.levels() < 2 || big_u.t_levels[0] != 0.0 {
        return Err(Error::GridMismatch("need at least two t levels starting at t = 0".into()));
    }
    let lam = u.grid.squared_frequencies();
    let spectra: Vec<Vec<_>> = (0..big_u.levels())
        .map(|j| big_u.level_trace(j).map(|f| f.spectrum().to_vec()))
        .collect::<Result<_>>()?;
    let grad_x = |j: usize| -> f64 { spectra[j].iter().zip(&lam).map(|(c, l)| l * c.norm_sqr()).sum() };
    let t = &big_u.t_levels;
    let mut lhs = 0.0;
    let mut sx_prev = grad_x(0);
    for j in 0..t.len() - 1 {
        let h = t[j + 1] - t[j];
        let wc = w.integral(t[j], t[j + 1])?;
        let sx = grad_x(j + 1);
        let dt: f64 = spectra[j + 1].iter().zip(&spectra[j]).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / (h * h);
        lhs += wc * (0.5 * (sx_prev + sx) + dt);
        sx_prev = sx;
    }
    let n = t.len() - 1;
    let h_last = t[n] - t[n - 1];
    let a_end = w.eval(t[n])?.0;
    let mut tail = 0.0;
    for (last, prev) in spectra[n].iter().zip(&spectra[n - 1]) {
        let (ql, qp) = (last.norm(), prev.norm());
        if ql > 0.0 && qp > ql {
            tail += a_end * ql * ql * (qp / ql).ln() / h_last;
        }
    }
    lhs += tail;
    let mut rhs = 0.0;
    for (c, l) in u.spectrum().iter().zip(&lam) {
        rhs += tab.eval(*l)?.value * c.norm_sqr();
    }
    let rel_gap = if rhs > 0.0 { (lhs - rhs).abs() / rhs } else { lhs.abs() };
    if rhs > 0.0 && tail > tail_tol * rhs {
        return Err(Error::EnergyTail { tail: tail / rhs, tol: tail_tol });
    }
    Ok(EnergyCheck { lhs, rhs, rel_gap, tail_estimate: tail })
}

/// −lim a(t) ∂ₜU(·, t) at t → 0 from the first `cells` level differences,
/// extrapolated linearly in the cumulative weight mass.
pub fn boundary_flux(big_u: &HalfSpaceField, w: &Weight, cells: usize) -> Result<TraceField> {
    let t = &big_u.t_levels;
    if t[0] != 0.0 || t.len() < 3 {
        return Err(Error::GridMismatch("need at least three t levels starting at t = 0".into()));
    }
    let k = cells.clamp(1, t.len() - 1);
    let mut mass = Vec::with_capacity(k);
    let mut wc = Vec::with_capacity(k);
    let mut acc = 0.0;
    for j in 0..k {
        let c = w.integral(t[j], t[j + 1])?;
        mass.push(acc + 0.5 * c);
        acc += c;
        wc.push(c);
    }
    let npts = big_u.grid.len();
    let mut out = vec![0.0; npts];
    let km = k as f64;
    let mx = mass.iter().sum::<f64>() / km;
    let sxx: f64 = mass.iter().map(|x| (x - mx).powi(2)).sum();
    for (i, o) in out.iter_mut().enumerate() {
        let q: Vec<f64> = (0..k)
            .map(|j| {
                let h = t[j + 1] - t[j];
                -(wc[j] / h) * (big_u.level(j + 1)[i] - big_u.level(j)[i]) / h
            })
            .collect();
        if k == 1 || sxx == 0.0 {
            *o = q[0];
            continue;
        }
        let my = q.iter().sum::<f64>() / km;
        let sxy: f64 = mass.iter().zip(&q).map(|(x, y)| (x - mx) * (y - my)).sum();
        *o = my - sxy / sxx * mx;
    }
    TraceField::new(big_u.grid.clone(), out)
}
