use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{GridMeta, HalfSpaceField, TraceField};
use crate::quadrature;
use crate::weight::Weight;

/// φ(x, t) = ψ(x) χ(t) with ψ = cos(k·x) or sin(k·x), k_i = 2π mode_i / L_i,
/// and χ = 1 on [0, t_cut/4] falling smoothly to 0 at t_cut.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunction {
    pub mode: Vec<i64>,
    pub sine: bool,
    pub t_cut: f64,
}

fn bump(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

fn bump_prime(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        bump(x) / (x * x)
    }
}

impl TestFunction {
    fn plateau(&self) -> f64 {
        0.25 * self.t_cut
    }

    pub fn chi(&self, t: f64) -> f64 {
        let (t0, t1) = (self.plateau(), self.t_cut);
        if t <= t0 {
            1.0
        } else if t >= t1 {
            0.0
        } else {
            let y = (t1 - t) / (t1 - t0);
            bump(y) / (bump(y) + bump(1.0 - y))
        }
    }

    pub fn chi_prime(&self, t: f64) -> f64 {
        let (t0, t1) = (self.plateau(), self.t_cut);
        if t <= t0 || t >= t1 {
            return 0.0;
        }
        let y = (t1 - t) / (t1 - t0);
        let (f, g) = (bump(y), bump(1.0 - y));
        let ds = (bump_prime(y) * g + f * bump_prime(1.0 - y)) / ((f + g) * (f + g));
        -ds / (t1 - t0)
    }

    fn psi(&self, grid: &GridMeta) -> (Vec<f64>, f64) {
        let k: Vec<f64> = self
            .mode
            .iter()
            .zip(&grid.periods)
            .map(|(m, l)| 2.0 * std::f64::consts::PI * *m as f64 / l)
            .collect();
        let vals = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                let arg: f64 = p.iter().zip(&k).map(|(x, k)| x * k).sum();
                if self.sine {
                    arg.sin()
                } else {
                    arg.cos()
                }
            })
            .collect();
        (vals, k.iter().map(|v| v * v).sum())
    }
}

/// Trigonometric modes up to |mode| 3 (and 5 in 1D) with two cut-off heights.
pub fn default_test_bank(grid: &GridMeta, t_max: f64) -> Vec<TestFunction> {
    let modes: Vec<Vec<i64>> = if grid.ndim() == 1 {
        [0, 1, 2, 3, 5].iter().map(|k| vec![*k]).collect()
    } else {
        [(0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (3, 2)].iter().map(|(a, b)| vec![*a, *b]).collect()
    };
    let mut bank = Vec::new();
    for t_cut in [0.5 * t_max, 0.25 * t_max] {
        for m in &modes {
            bank.push(TestFunction { mode: m.clone(), sine: false, t_cut });
            if m.iter().any(|v| *v != 0) {
                bank.push(TestFunction { mode: m.clone(), sine: true, t_cut });
            }
        }
    }
    bank
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakResidual {
    pub max_residual: f64,
    pub residuals: Vec<f64>,
}

/// max over the bank of |∫ a ∇U·∇φ − ∫ f φ(·,0)| / ‖φ‖ with
/// ‖φ‖² = ∫ a |∇φ|² + ∫ φ(·,0)².
pub fn weak_residual(big_u: &HalfSpaceField, w: &Weight, f: &TraceField, bank: &[TestFunction]) -> Result<WeakResidual> {
    if !big_u.grid.same_shape(&f.grid) {
        return Err(Error::GridMismatch("field and right-hand side grids differ".into()));
    }
    if big_u.t_levels[0] != 0.0 || big_u.levels() < 2 {
        return Err(Error::GridMismatch("need at least two t levels starting at t = 0".into()));
    }
    let t = &big_u.t_levels;
    let t_top = *t.last().unwrap();
    let dv = big_u.grid.cell_volume();
    let mut residuals = Vec::with_capacity(bank.len());
    for phi in bank {
        if !(phi.t_cut > 0.0 && phi.t_cut <= t_top) {
            return Err(Error::InvalidArgument(format!("test cut-off {} outside (0, {t_top}]", phi.t_cut)));
        }
        let (psi, k2) = phi.psi(&big_u.grid);
        let psi_norm2: f64 = psi.iter().map(|v| v * v).sum::<f64>() * dv;
        let c: Vec<f64> = (0..big_u.levels())
            .map(|j| big_u.level(j).iter().zip(&psi).map(|(u, p)| u * p).sum::<f64>() * dv)
            .collect();
        let mut bulk = 0.0;
        for j in 0..t.len() - 1 {
            let (lo, hi) = (t[j], t[j + 1]);
            if lo >= phi.t_cut {
                break;
            }
            let h = hi - lo;
            let slope = (c[j + 1] - c[j]) / h;
            if hi <= phi.plateau() {
                bulk += k2 * w.integral(lo, hi)? * 0.5 * (c[j] + c[j + 1]);
                continue;
            }
            let fx = |s: f64| {
                let a = w.value(s);
                let lin = c[j] + slope * (s - lo);
                a * (k2 * phi.chi(s) * lin + slope * phi.chi_prime(s))
            };
            bulk += quadrature::adaptive(&fx, lo, hi, 1e-12)?;
        }
        let boundary: f64 = f.values.iter().zip(&psi).map(|(a, b)| a * b).sum::<f64>() * dv;
        let p0 = phi.plateau();
        let head = w.integral(0.0, p0)? * k2;
        let body = quadrature::adaptive(
            &|s: f64| w.value(s) * (k2 * phi.chi(s).powi(2) + phi.chi_prime(s).powi(2)),
            p0,
            phi.t_cut,
            1e-12,
        )?;
        let norm = (psi_norm2 * (head + body + 1.0)).sqrt();
        residuals.push(if norm > 0.0 { (bulk - boundary).abs() / norm } else { 0.0 });
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(WeakResidual { max_residual, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Provenance;

    #[test]
    fn cutoff_is_smooth_and_consistent() {
        let p = TestFunction { mode: vec![1], sine: false, t_cut: 2.0 };
        assert_eq!(p.chi(0.4), 1.0);
        assert_eq!(p.chi(2.5), 0.0);
        let h = 1e-6;
        for t in [0.7, 1.0, 1.5, 1.9] {
            let fd = (p.chi(t + h) - p.chi(t - h)) / (2.0 * h);
            assert!((fd - p.chi_prime(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_field_with_zero_data() {
        let w = Weight::power(0.3).unwrap();
        let grid = GridMeta::periodic(&[16], &[6.0]).unwrap();
        let t = vec![0.0, 0.5, 1.0, 2.0, 4.0];
        let big_u = HalfSpaceField::new(grid.clone(), t, vec![1.7; 80], "", Provenance::External).unwrap();
        let f = TraceField::new(grid.clone(), vec![0.0; 16]).unwrap();
        let r = weak_residual(&big_u, &w, &f, &default_test_bank(&grid, 4.0)).unwrap();
        assert!(r.max_residual < 1e-13, "{r:?}");
    }
}
