//! Gauss–Legendre rules, adaptive bisection and a graded rule for
//! integrands with an integrable power-type singularity at the origin.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gl10() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(10))
}

/// Fixed 10-point Gauss–Legendre on [lo, hi].
pub fn gl_fixed<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let (x, w) = gl10();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    x.iter().zip(w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Adaptive Gauss–Legendre by bisection: a panel is accepted when the
/// one-panel and two-half-panel results agree to `tol` (relative to the
/// running magnitude) or the depth limit is hit.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let whole = gl_fixed(f, lo, hi);
    let v = adaptive_rec(f, lo, hi, whole, tol, 0);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Quadrature { lo, hi, message: "non-finite integral".into() })
    }
}

fn adaptive_rec<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (lo + hi);
    let left = gl_fixed(f, lo, mid);
    let right = gl_fixed(f, mid, hi);
    let both = left + right;
    if !both.is_finite() {
        return f64::NAN;
    }
    if depth >= 40 || (both - whole).abs() <= tol * both.abs().max(f64::MIN_POSITIVE) {
        return both;
    }
    adaptive_rec(f, lo, mid, left, tol, depth + 1) + adaptive_rec(f, mid, hi, right, tol, depth + 1)
}

/// Integral over the first cell [0, h] from a local power-law fit
/// f ~ c t^p through the samples at h/4 and h.
pub fn first_cell_power_law<F: Fn(f64) -> f64>(f: &F, h: f64) -> Result<f64> {
    let f1 = f(h);
    let fq = f(0.25 * h);
    if !(f1 > 0.0 && fq > 0.0 && f1.is_finite() && fq.is_finite()) {
        return Err(Error::Quadrature { lo: 0.0, hi: h, message: "non-positive sample in first cell".into() });
    }
    let p = (f1 / fq).ln() / 4f64.ln();
    if p <= -1.0 {
        return Err(Error::Quadrature {
            lo: 0.0,
            hi: h,
            message: format!("local exponent {p:.3} is not integrable at the origin"),
        });
    }
    Ok(f1 * h / (p + 1.0))
}

/// Integral of a positive integrand over [0, t] on the graded nodes
/// t_j = t (j/cells)^3, Gauss–Legendre per cell and a power-law fit on
/// the first cell.
pub fn graded_from_zero<F: Fn(f64) -> f64>(f: &F, t: f64, cells: usize) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let node = |j: usize| t * (j as f64 / cells as f64).powi(3);
    let mut total = first_cell_power_law(f, node(1))?;
    for j in 1..cells {
        let (lo, hi) = (node(j), node(j + 1));
        total += if hi > 1.5 * lo { adaptive(f, lo, hi, 1e-15)? } else { gl_fixed(f, lo, hi) };
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::Quadrature { lo: 0.0, hi: t, message: "non-finite integral".into() })
    }
}
