//! Convolution with the periodized s-Poisson kernel
//! P_s(x, t) ∝ t^{2s} (t² + |x|²)^{−(n+2s)/2}, normalized numerically to
//! unit discrete mass.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{GridMeta, HalfSpaceField, Provenance, TraceField};
use crate::quadrature::{self, gauss_legendre};
use crate::spectral;
use crate::symbol::profile_kernel;
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonOptions {
    /// images per side (|j| ≤ images); 0 selects 256 in 1D and 16 in 2D
    pub images: usize,
    /// admissible estimated error of the analytic tail, relative to the mass
    pub tail_tol: f64,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        Self { images: 0, tail_tol: 1e-6 }
    }
}

/// Samples of the periodized kernel at the grid offsets (FFT order).
#[derive(Debug, Clone)]
pub struct PeriodizedKernel {
    pub values: Vec<f64>,
    /// discrete mass before normalization
    pub mass: f64,
    /// part of the mass carried by the analytic tail
    pub tail_mass: f64,
    /// estimated error of the tail approximation, relative to `mass`
    pub tail_error: f64,
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("s must lie in (0, 1), got {s}")))
    }
}

struct Tail {
    s: f64,
    t: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Tail {
    fn new(s: f64, t: f64) -> Self {
        let (x, w) = gauss_legendre(24);
        // map [-1, 1] to [0, 1]
        let nodes = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
        let weights = w.iter().map(|v| 0.5 * v).collect();
        Self { s, t, nodes, weights }
    }

    /// ∫_b^∞ t^{2s} (t² + z²)^{−(1+2s)/2} dz via z = b v^{−1/(2s)}.
    fn line(&self, b: f64) -> f64 {
        let (s, t) = (self.s, self.t);
        let e = -(1.0 + 2.0 * s) / 2.0;
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * (t * t * v.powf(1.0 / s) + b * b).powf(e))
            .sum();
        t.powf(2.0 * s) * b / (2.0 * s) * sum
    }

    /// ∫ over the plane outside the rectangle [lo1, hi1] × [lo2, hi2]
    /// (which contains the origin) of t^{2s} (t² + |z|²)^{−1−s}.
    fn plane(&self, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        let (s, t) = (self.s, self.t);
        let rho = |phi: f64| {
            let (sn, cs) = phi.sin_cos();
            let rx = if cs > 0.0 { hi[0] / cs } else if cs < 0.0 { lo[0] / cs } else { f64::INFINITY };
            let ry = if sn > 0.0 { hi[1] / sn } else if sn < 0.0 { lo[1] / sn } else { f64::INFINITY };
            rx.min(ry)
        };
        let mut cuts = vec![
            hi[1].atan2(hi[0]),
            hi[1].atan2(lo[0]),
            lo[1].atan2(lo[0]),
            lo[1].atan2(hi[0]),
        ];
        for c in cuts.iter_mut() {
            if *c < 0.0 {
                *c += 2.0 * std::f64::consts::PI;
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.push(cuts[0] + 2.0 * std::f64::consts::PI);
        let mut total = 0.0;
        for p in cuts.windows(2) {
            let (a, b) = (p[0], p[1]);
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                let phi = a + (b - a) * x;
                let r = rho(phi);
                total += (b - a) * w * (t * t + r * r).powf(-s) / (2.0 * s);
            }
        }
        t.powf(2.0 * s) * total
    }
}

pub fn periodized_kernel(grid: &GridMeta, s: f64, t: f64, opts: &PoissonOptions) -> Result<PeriodizedKernel> {
    check_s(s)?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel needs t > 0, got {t}")));
    }
    let n = grid.ndim() as f64;
    let images = if opts.images > 0 { opts.images } else if grid.ndim() == 1 { 256 } else { 16 } as i64;
    let e = -(n + 2.0 * s) / 2.0;
    let t2s = t.powf(2.0 * s);
    let p = |r2: f64| t2s * (t * t + r2).powf(e);
    let tail = Tail::new(s, t);
    let dims = &grid.dims;
    let l = &grid.periods;
    let offset = |axis: usize, k: usize| {
        let nk = dims[axis];
        let kk = if k < nk / 2 { k as f64 } else { k as f64 - nk as f64 };
        kk * grid.spacing(axis)
    };
    let half: Vec<f64> = l.iter().map(|li| (images as f64 + 0.5) * li).collect();
    let total = grid.len();
    // when the kernel is narrower than the mesh, central samples are
    // replaced by cell averages of the primary image
    let h: Vec<f64> = (0..grid.ndim()).map(|a| grid.spacing(a)).collect();
    let hmax = h.iter().cloned().fold(0.0, f64::max);
    let averaged = t < hmax;
    let reach = 16.0 * (hmax + t);
    let avg_line = |y: f64, hh: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        let (lo, hi) = (y - 0.5 * hh, y + 0.5 * hh);
        let q = if lo < 0.0 && hi > 0.0 {
            quadrature::adaptive(&f, lo, 0.0, 1e-12).unwrap_or(f64::NAN) + quadrature::adaptive(&f, 0.0, hi, 1e-12).unwrap_or(f64::NAN)
        } else {
            quadrature::adaptive(&f, lo, hi, 1e-12).unwrap_or(f64::NAN)
        };
        q / hh
    };
    let cols: Vec<(f64, f64)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            if grid.ndim() == 1 {
                let y = offset(0, idx);
                let mut sum = 0.0;
                for j in -images..=images {
                    let z = y + j as f64 * l[0];
                    if j == 0 && averaged && y.abs() <= reach {
                        sum += avg_line(y, h[0], &|z: f64| p(z * z));
                    } else {
                        sum += p(z * z);
                    }
                }
                let tl = (tail.line(half[0] - y) + tail.line(half[0] + y)) / l[0];
                (sum + tl, tl)
            } else {
                let y1 = offset(0, idx % dims[0]);
                let y2 = offset(1, idx / dims[0]);
                let mut sum = 0.0;
                for j2 in -images..=images {
                    let z2 = y2 + j2 as f64 * l[1];
                    for j1 in -images..=images {
                        let z1 = y1 + j1 as f64 * l[0];
                        if j1 == 0 && j2 == 0 && averaged && y1.abs().max(y2.abs()) <= reach {
                            let inner = |b: f64| avg_line(y1, h[0], &|a: f64| p(a * a + b * b));
                            sum += avg_line(y2, h[1], &inner);
                        } else {
                            sum += p(z1 * z1 + z2 * z2);
                        }
                    }
                }
                let tl = tail.plane([-half[0] - y1, -half[1] - y2], [half[0] - y1, half[1] - y2]) / (l[0] * l[1]);
                (sum + tl, tl)
            }
        })
        .collect();
    let dv = grid.cell_volume();
    let values: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let mass = values.iter().sum::<f64>() * dv;
    if !mass.is_finite() {
        return Err(Error::Quadrature { lo: 0.0, hi: reach, message: format!("kernel cell averages failed at t = {t}") });
    }
    let tail_mass = cols.iter().map(|c| c.1).sum::<f64>() * dv;
    let lmax = l.iter().cloned().fold(0.0, f64::max);
    let amin = half.iter().cloned().fold(f64::INFINITY, f64::min);
    let q = n + 2.0 * s;
    let tail_error = tail_mass / mass * q * (q + 1.0) / 24.0 * (lmax / amin).powi(2);
    if tail_error > opts.tail_tol {
        return Err(Error::KernelTail { tail: tail_error, tol: opts.tail_tol });
    }
    Ok(PeriodizedKernel { values, mass, tail_mass, tail_error })
}

/// Spectrum of the normalized periodized kernel: Σ_k K(y_k) e^{−iξ·y_k} ΔV / mass.
fn kernel_transform(grid: &GridMeta, k: &PeriodizedKernel) -> Vec<Complex64> {
    let c = grid.cell_volume() / k.mass;
    spectral::forward(&k.values, &grid.dims).into_iter().map(|v| v * c).collect()
}

pub fn poisson_convolve(u: &TraceField, s: f64, t_levels: &[f64]) -> Result<HalfSpaceField> {
    poisson_convolve_with(u, s, t_levels, &PoissonOptions::default())
}

/// U(·, t) = P_s(·, t) ⊛ u on the torus for every level; t = 0 returns u.
pub fn poisson_convolve_with(u: &TraceField, s: f64, t_levels: &[f64], opts: &PoissonOptions) -> Result<HalfSpaceField> {
    check_s(s)?;
    if t_levels.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("t levels must be non-negative".into()));
    }
    let spec = spectral::forward(&u.values, &u.grid.dims);
    let mut values = Vec::with_capacity(u.grid.len() * t_levels.len());
    for &t in t_levels {
        if t == 0.0 {
            values.extend_from_slice(&u.values);
            continue;
        }
        let k = periodized_kernel(&u.grid, s, t, opts)?;
        let kh = kernel_transform(&u.grid, &k);
        let prod: Vec<Complex64> = spec.iter().zip(&kh).map(|(a, b)| a * b).collect();
        values.extend(spectral::inverse_real(prod, &u.grid.dims));
    }
    let id = Weight::power(s)?.id().to_string();
    HalfSpaceField::new(u.grid.clone(), t_levels.to_vec(), values, &id, Provenance::PoissonConvolution)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSymbolOptions {
    pub period: f64,
    pub points: usize,
    pub profile_tol: f64,
    pub poisson: PoissonOptions,
}

impl Default for PoissonSymbolOptions {
    fn default() -> Self {
        Self { period: 8.0 * std::f64::consts::PI, points: 2048, profile_tol: 1e-9, poisson: PoissonOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonSymbolCheck {
    pub s: f64,
    /// max |F(P_s)(ξ, t) − g(ξ², t)| over the grid
    pub max_deviation: f64,
    /// max |F(P_s)(ξ, t) − e^{−|ξ|t}|, only for s = ½
    pub max_deviation_closed_form: Option<f64>,
    /// (ξ, t, transform, g)
    pub entries: Vec<(f64, f64, f64, f64)>,
    pub max_tail_error: f64,
}

/// ξ_k = 2πk/L for k = 0, …, modes − 1.
pub fn lattice_xi_grid(modes: usize, period: f64) -> Vec<f64> {
    (0..modes).map(|k| 2.0 * std::f64::consts::PI * k as f64 / period).collect()
}

pub fn verify_poisson_symbol(s: f64, xi_grid: &[f64], t_levels: &[f64]) -> Result<PoissonSymbolCheck> {
    verify_poisson_symbol_with(s, xi_grid, t_levels, &PoissonSymbolOptions::default())
}

/// Compares the discrete transform of the sampled periodized kernel with
/// the profiles of the weight t^{1−2s}. Every ξ must be a frequency of the
/// period `opts.period`.
pub fn verify_poisson_symbol_with(
    s: f64,
    xi_grid: &[f64],
    t_levels: &[f64],
    opts: &PoissonSymbolOptions,
) -> Result<PoissonSymbolCheck> {
    check_s(s)?;
    let base = 2.0 * std::f64::consts::PI / opts.period;
    let mut modes = Vec::with_capacity(xi_grid.len());
    for xi in xi_grid {
        let k = (xi.abs() / base).round();
        if (xi.abs() / base - k).abs() > 1e-8 || k as usize >= opts.points / 2 {
            return Err(Error::InvalidArgument(format!("xi = {xi} is not a resolved frequency of period {}", opts.period)));
        }
        modes.push(k as usize);
    }
    if t_levels.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("t levels must be positive".into()));
    }
    let grid = GridMeta::periodic(&[opts.points], &[opts.period])?;
    let w = Weight::power(s)?;
    // λ from the lattice index so that it matches the kernel rows exactly
    let lambdas: Vec<f64> = {
        let mut l: Vec<f64> = modes.iter().map(|k| (base * *k as f64).powi(2)).collect();
        l.sort_by(|a, b| a.partial_cmp(b).unwrap());
        l.dedup();
        l
    };
    let gk = profile_kernel(&w, &lambdas, t_levels, opts.profile_tol)?;
    let mut entries = Vec::new();
    let mut max_dev: f64 = 0.0;
    let mut max_exact: f64 = 0.0;
    let mut max_tail: f64 = 0.0;
    for (j, &t) in t_levels.iter().enumerate() {
        let k = periodized_kernel(&grid, s, t, &opts.poisson)?;
        max_tail = max_tail.max(k.tail_error);
        let kh = kernel_transform(&grid, &k);
        for (xi, m) in xi_grid.iter().zip(&modes) {
            // the kernel is even, so its transform is real
            let f = kh[*m].re;
            let lam = (base * *m as f64).powi(2);
            let g = gk.get(gk.lambdas.iter().position(|l| *l == lam).unwrap(), j);
            max_dev = max_dev.max((f - g).abs());
            max_exact = max_exact.max((f - (-xi.abs() * t).exp()).abs());
            entries.push((*xi, t, f, g));
        }
    }
    Ok(PoissonSymbolCheck {
        s,
        max_deviation: max_dev,
        max_deviation_closed_form: if s == 0.5 { Some(max_exact) } else { None },
        entries,
        max_tail_error: max_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_preserved() {
        let grid = GridMeta::periodic(&[64], &[10.0]).unwrap();
        let u = TraceField::new(grid, vec![1.0; 64]).unwrap();
        let big_u = poisson_convolve(&u, 0.3, &[0.5, 2.0]).unwrap();
        assert!(big_u.values.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn cauchy_kernel_damps_modes_exponentially() {
        let grid = GridMeta::periodic(&[256], &[2.0 * std::f64::consts::PI]).unwrap();
        let u = TraceField::from_fn(grid, |p| p[0].cos()).unwrap();
        let big_u = poisson_convolve(&u, 0.5, &[0.3, 1.0]).unwrap();
        for (j, t) in [0.3f64, 1.0].iter().enumerate() {
            for (a, b) in big_u.level(j).iter().zip(&u.values) {
                assert!((a - (-t).exp() * b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn plane_tail_matches_disc_formula_for_large_squares() {
        // far away the rectangle complement behaves like the closed form
        let tail = Tail::new(0.4, 1.0);
        let a = 1e3;
        let v = tail.plane([-a, -a], [a, a]);
        let phi_int = {
            let (x, w) = gauss_legendre(40);
            let q = std::f64::consts::FRAC_PI_4;
            x.iter().zip(&w).map(|(x, w)| w * (0.5 * q * (x + 1.0)).cos().powf(0.8)).sum::<f64>() * 0.5 * q
        };
        let approx = 8.0 * phi_int * a.powf(-0.8) / 0.8;
        assert!((v - approx).abs() < 1e-5 * approx);
    }

    #[test]
    fn rejects_bad_s() {
        let grid = GridMeta::periodic(&[8], &[1.0]).unwrap();
        let u = TraceField::new(grid, vec![0.0; 8]).unwrap();
        assert!(poisson_convolve(&u, 1.0, &[1.0]).is_err());
    }
}
