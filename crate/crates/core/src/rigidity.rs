//! Angle fields of Z = ∂₁U + i∂₂U, the residual of div(a ρ² ∇θ) = 0, the
//! energy-growth statistic and direction extraction for fields on ℝ² × [0, T].

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{GridMeta, HalfSpaceField};
use crate::spectral;
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub eps_rho: f64,
    /// bound on the circular variance of the doubled angle
    pub tol_theta: f64,
    /// bound on the per-level direction deviation (radians)
    pub tol_omega: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eps_rho: 1e-8, tol_theta: 1e-6, tol_omega: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct AngleFields {
    pub grid: GridMeta,
    pub t_levels: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub rho: Vec<f64>,
    /// arcsin(∂₂U/ρ) ∈ [−π/2, π/2]; NaN where masked
    pub theta: Vec<f64>,
    /// atan2(∂₂U, ∂₁U); NaN where masked
    pub angle: Vec<f64>,
    /// true where ρ ≥ eps_rho · max ρ
    pub mask: Vec<bool>,
    pub eps_rho: f64,
}

impl AngleFields {
    pub fn level_len(&self) -> usize {
        self.grid.len()
    }

    pub fn masked_fraction(&self) -> f64 {
        self.mask.iter().filter(|m| !**m).count() as f64 / self.mask.len() as f64
    }
}

const C8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

/// Differences on a non-periodic line: eighth-order central in the interior,
/// fourth-order within four samples of the ends.
fn fd_line(f: &[f64], h: f64, out: &mut [f64]) {
    fd4_line(f, h, out);
    let n = f.len();
    if n < 9 {
        return;
    }
    for i in 4..n - 4 {
        let mut d = 0.0;
        for (k, c) in C8.iter().enumerate() {
            d += c * (f[i + k + 1] - f[i - k - 1]);
        }
        out[i] = d / h;
    }
}

fn fd4_line(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let c = 1.0 / (12.0 * h);
    if n < 5 {
        for i in 0..n {
            let (a, b) = if i == 0 { (0, 1) } else if i == n - 1 { (n - 2, n - 1) } else { (i - 1, i + 1) };
            out[i] = (f[b] - f[a]) / ((b - a) as f64 * h);
        }
        return;
    }
    out[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    out[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
    for i in 2..n - 2 {
        out[i] = c * (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]);
    }
    out[n - 2] = -c * (-3.0 * f[n - 1] - 10.0 * f[n - 2] + 18.0 * f[n - 3] - 6.0 * f[n - 4] + f[n - 5]);
    out[n - 1] = -c * (-25.0 * f[n - 1] + 48.0 * f[n - 2] - 36.0 * f[n - 3] + 16.0 * f[n - 4] - 3.0 * f[n - 5]);
}

fn fd4_2d(values: &[f64], grid: &GridMeta, axis: usize) -> Vec<f64> {
    let (n1, n2) = (grid.dims[0], grid.dims[1]);
    let h = grid.spacing(axis);
    let mut out = vec![0.0; values.len()];
    if axis == 0 {
        for j in 0..n2 {
            fd_line(&values[j * n1..(j + 1) * n1], h, &mut out[j * n1..(j + 1) * n1]);
        }
    } else {
        let mut line = vec![0.0; n2];
        let mut d = vec![0.0; n2];
        for i in 0..n1 {
            for j in 0..n2 {
                line[j] = values[i + j * n1];
            }
            fd_line(&line, h, &mut d);
            for j in 0..n2 {
                out[i + j * n1] = d[j];
            }
        }
    }
    out
}

/// Spatial gradient of one level: spectral on periodic grids, fourth-order
/// differences otherwise.
pub fn spatial_gradient(level: &[f64], grid: &GridMeta) -> (Vec<f64>, Vec<f64>) {
    if grid.periodic {
        (
            spectral::derivative(level, &grid.dims, &grid.periods, 0),
            spectral::derivative(level, &grid.dims, &grid.periods, 1),
        )
    } else {
        (fd4_2d(level, grid, 0), fd4_2d(level, grid, 1))
    }
}

pub fn angle_fields(u: &HalfSpaceField, eps_rho: f64) -> Result<AngleFields> {
    if u.grid.ndim() != 2 {
        return Err(Error::GridMismatch("angle fields need a 2D grid".into()));
    }
    if u.levels() < 2 {
        return Err(Error::GridMismatch("angle fields need at least two t levels".into()));
    }
    let grads: Vec<(Vec<f64>, Vec<f64>)> =
        (0..u.levels()).into_par_iter().map(|j| spatial_gradient(u.level(j), &u.grid)).collect();
    let mut d1 = Vec::with_capacity(u.values.len());
    let mut d2 = Vec::with_capacity(u.values.len());
    for (a, b) in grads {
        d1.extend(a);
        d2.extend(b);
    }
    let rho: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a.hypot(*b)).collect();
    let rmax = rho.iter().cloned().fold(0.0, f64::max);
    let umax = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let hmin = u.grid.spacing(0).min(u.grid.spacing(1));
    // gradients at round-off level of the field carry no direction
    let floor = 64.0 * f64::EPSILON * umax / hmin;
    let cut = (eps_rho * rmax).max(floor);
    let mask: Vec<bool> = rho.iter().map(|r| *r >= cut && *r > 0.0).collect();
    if !mask.iter().any(|m| *m) {
        return Err(Error::Degenerate("every point is masked (vanishing gradient)".into()));
    }
    let mut theta = Vec::with_capacity(rho.len());
    let mut angle = Vec::with_capacity(rho.len());
    for i in 0..rho.len() {
        if mask[i] {
            theta.push((d2[i] / rho[i]).clamp(-1.0, 1.0).asin());
            angle.push(d2[i].atan2(d1[i]));
        } else {
            theta.push(f64::NAN);
            angle.push(f64::NAN);
        }
    }
    Ok(AngleFields { grid: u.grid.clone(), t_levels: u.t_levels.clone(), d1, d2, rho, theta, angle, mask, eps_rho })
}

/// Refuses fields where ∂₂U is negative (beyond the masking threshold) at
/// any unmasked point.
pub fn monotonicity_gate(f: &AngleFields) -> Result<()> {
    let rmax = f.rho.iter().cloned().fold(0.0, f64::max);
    let cut = f.eps_rho * rmax;
    let unmasked = f.mask.iter().filter(|m| **m).count();
    let bad = f.mask.iter().zip(&f.d2).filter(|(m, d)| **m && **d < -cut).count();
    if bad > 0 {
        return Err(Error::NotMonotone { fraction: bad as f64 / unmasked as f64 });
    }
    Ok(())
}

fn wrap(d: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    d - tau * (d / tau).round()
}

/// Nodes this close to a non-periodic edge are left out of the residual.
const EDGE: usize = 5;

/// (interior_l2, boundary_flux) for div(a ρ² ∇θ) = 0 and −a ρ ∂ₜθ → 0.
///
/// The divergence is taken in flux form on the (x₁, x₂, t) grid using the
/// full angle with wrapped differences; t faces carry the cell average of a.
/// Only nodes whose six neighbours are unmasked contribute, and on
/// non-periodic grids only those whose stencil avoids the low-order edge band.
pub fn theta_residual(u: &HalfSpaceField, w: &Weight, f: &AngleFields) -> Result<(f64, f64)> {
    let (n1, n2) = (u.grid.dims[0], u.grid.dims[1]);
    let np = n1 * n2;
    let nt = u.levels();
    let t = &u.t_levels;
    let (h1, h2) = (u.grid.spacing(0), u.grid.spacing(1));
    let per = u.grid.periodic;
    let a_face: Vec<f64> = (0..nt - 1)
        .map(|j| Ok(w.integral(t[j], t[j + 1])? / (t[j + 1] - t[j])))
        .collect::<Result<_>>()?;
    let a_node: Vec<f64> = t.iter().map(|tj| if *tj > 0.0 { w.value(*tj) } else { f64::NAN }).collect();
    let idx = |i: usize, k: usize, j: usize| j * np + k * n1 + i;
    let neighbour = |i: usize, n: usize, step: i64| -> Option<usize> {
        let v = i as i64 + step;
        if per {
            Some(v.rem_euclid(n as i64) as usize)
        } else if i < EDGE || i + EDGE >= n {
            None
        } else {
            Some(v as usize)
        }
    };
    let flux = |p: usize, q: usize, coef: f64, h: f64| -> f64 {
        let r2 = 0.5 * (f.rho[p] * f.rho[p] + f.rho[q] * f.rho[q]);
        coef * r2 * wrap(f.angle[q] - f.angle[p]) / h
    };
    let level_sums: Vec<(f64, usize)> = (1..nt.saturating_sub(1))
        .into_par_iter()
        .map(|j| {
            let mut sum = 0.0;
            let mut count = 0usize;
            let vol_t = 0.5 * (t[j + 1] - t[j - 1]);
            for k in 0..n2 {
                for i in 0..n1 {
                    let c = idx(i, k, j);
                    let (Some(ip), Some(im), Some(kp), Some(km)) =
                        (neighbour(i, n1, 1), neighbour(i, n1, -1), neighbour(k, n2, 1), neighbour(k, n2, -1))
                    else {
                        continue;
                    };
                    let nb = [idx(ip, k, j), idx(im, k, j), idx(i, kp, j), idx(i, km, j), idx(i, k, j + 1), idx(i, k, j - 1)];
                    if !f.mask[c] || nb.iter().any(|q| !f.mask[*q]) {
                        continue;
                    }
                    let a = a_node[j];
                    let div1 = (flux(c, nb[0], a, h1) - flux(nb[1], c, a, h1)) / h1;
                    let div2 = (flux(c, nb[2], a, h2) - flux(nb[3], c, a, h2)) / h2;
                    let div3 = (flux(c, nb[4], a_face[j], t[j + 1] - t[j]) - flux(nb[5], c, a_face[j - 1], t[j] - t[j - 1]))
                        / vol_t;
                    let d = div1 + div2 + div3;
                    sum += d * d * h1 * h2 * vol_t;
                    count += 1;
                }
            }
            (sum, count)
        })
        .collect();
    let interior: f64 = level_sums.iter().map(|s| s.0).sum();
    let counted: usize = level_sums.iter().map(|s| s.1).sum();
    if counted == 0 {
        return Err(Error::Degenerate("no unmasked interior nodes for the angle residual".into()));
    }
    // flux variable a ρ ∂ₜθ on the first cells, extrapolated linearly in
    // the cumulative weight mass to t = 0
    let cells = (nt - 1).min(2);
    let mut mass = Vec::with_capacity(cells);
    let mut acc = 0.0;
    for j in 0..cells {
        let c = a_face[j] * (t[j + 1] - t[j]);
        mass.push(acc + 0.5 * c);
        acc += c;
    }
    let mut bsum = 0.0;
    for p in 0..np {
        let q: Option<Vec<f64>> = (0..cells)
            .map(|j| {
                let (a, b) = (j * np + p, (j + 1) * np + p);
                if f.mask[a] && f.mask[b] {
                    Some(a_face[j] * 0.5 * (f.rho[a] + f.rho[b]) * wrap(f.angle[b] - f.angle[a]) / (t[j + 1] - t[j]))
                } else {
                    None
                }
            })
            .collect();
        let Some(q) = q else { continue };
        let v = if cells == 2 { q[0] - (q[1] - q[0]) / (mass[1] - mass[0]) * mass[0] } else { q[0] };
        bsum += v * v * h1 * h2;
    }
    Ok((interior.sqrt(), bsum.sqrt()))
}

/// E(R) = R⁻² ∫ a(t) (∂₂U)² over the half-annulus R ≤ |(x, t)| ≤ 2R.
///
/// Each node owns the box around it (midpoints in t); boxes cut by the
/// spheres are split into 4×4×4 sub-boxes whose t-extent is weighted by
/// the exact integral of a.
pub fn growth_statistic(u: &HalfSpaceField, w: &Weight, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    if u.grid.ndim() != 2 {
        return Err(Error::GridMismatch("growth statistic needs a 2D grid".into()));
    }
    let grads: Vec<Vec<f64>> = (0..u.levels()).into_par_iter().map(|j| spatial_gradient(u.level(j), &u.grid).1).collect();
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
            }
            let (e, covered) = annulus_integral(&u.grid, &u.t_levels, w, &grads, r)?;
            let exact = 14.0 * std::f64::consts::PI / 3.0 * r * r * r;
            let outside = 1.0 - covered / exact;
            if outside > 1e-3 {
                return Err(Error::AnnulusOutsideGrid { radius: r, outside_fraction: outside });
            }
            Ok((r, e / (r * r)))
        })
        .collect()
}

const SUB: usize = 4;

/// (∫ a (∂₂U)², unweighted covered volume) over the half-annulus.
fn annulus_integral(grid: &GridMeta, t: &[f64], w: &Weight, d2: &[Vec<f64>], r: f64) -> Result<(f64, f64)> {
    let (n1, n2) = (grid.dims[0], grid.dims[1]);
    let (h1, h2) = (grid.spacing(0), grid.spacing(1));
    let nt = t.len();
    let (r_in, r_out) = (r, 2.0 * r);
    let t_edges: Vec<(f64, f64)> = (0..nt)
        .map(|j| {
            let lo = if j == 0 { 0.0 } else { 0.5 * (t[j - 1] + t[j]) };
            let hi = if j == nt - 1 { t[j] } else { 0.5 * (t[j] + t[j + 1]) };
            (lo, hi)
        })
        .collect();
    let mut total = 0.0;
    let mut covered = 0.0;
    for (j, &(tlo, thi)) in t_edges.iter().enumerate() {
        if tlo >= r_out || thi <= tlo {
            continue;
        }
        let dt = (thi - tlo) / SUB as f64;
        let mut sub_w = [0.0; SUB];
        for (q, sw) in sub_w.iter_mut().enumerate() {
            let a = tlo + q as f64 * dt;
            *sw = w.integral(a, a + dt)?;
        }
        let w_cell: f64 = sub_w.iter().sum();
        for k in 0..n2 {
            let x2 = grid.coord(1, k);
            for i in 0..n1 {
                let x1 = grid.coord(0, i);
                let nearest = |c: f64, h: f64| if c.abs() <= 0.5 * h { 0.0 } else { c.abs() - 0.5 * h };
                let (m1, m2) = (nearest(x1, h1), nearest(x2, h2));
                let rmin = (m1 * m1 + m2 * m2 + tlo * tlo).sqrt();
                let (f1, f2) = (x1.abs() + 0.5 * h1, x2.abs() + 0.5 * h2);
                let rmax = (f1 * f1 + f2 * f2 + thi * thi).sqrt();
                if rmin >= r_out || rmax <= r_in {
                    continue;
                }
                let g = d2[j][k * n1 + i];
                let g2 = g * g;
                if rmin >= r_in && rmax <= r_out {
                    total += g2 * w_cell * h1 * h2;
                    covered += (thi - tlo) * h1 * h2;
                    continue;
                }
                let area = h1 * h2 / (SUB * SUB) as f64;
                for a in 0..SUB {
                    let y1 = x1 - 0.5 * h1 + (a as f64 + 0.5) * h1 / SUB as f64;
                    for b in 0..SUB {
                        let y2 = x2 - 0.5 * h2 + (b as f64 + 0.5) * h2 / SUB as f64;
                        for (q, sw) in sub_w.iter().enumerate() {
                            let s = tlo + (q as f64 + 0.5) * dt;
                            let rr = (y1 * y1 + y2 * y2 + s * s).sqrt();
                            if rr >= r_in && rr <= r_out {
                                total += g2 * sw * area;
                                covered += dt * area;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((total, covered))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Direction {
    /// unit direction per level, oriented with ω₂ ≥ 0
    pub omega_per_level: Vec<[f64; 2]>,
    pub theta_per_level: Vec<f64>,
    /// defined only when every level agrees with the pooled direction
    pub omega_global: Option<[f64; 2]>,
    pub theta_global: f64,
    pub alpha: f64,
    /// 1 − |mean e^{2iθ}| over all unmasked points
    pub circular_variance: f64,
    pub max_level_deviation: f64,
    pub is_one_dimensional: bool,
}

fn oriented(theta2: f64) -> f64 {
    // half of the doubled mean angle, mapped into (0, π]
    let mut th = 0.5 * theta2;
    if th <= 0.0 {
        th += std::f64::consts::PI;
    }
    th
}

fn axial_distance(a: f64, b: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let d = (a - b).rem_euclid(pi);
    d.min(pi - d)
}

pub fn extract_direction(f: &AngleFields, tol: &Tolerances) -> Result<Direction> {
    let np = f.level_len();
    let nt = f.t_levels.len();
    let mut per_level = Vec::with_capacity(nt);
    let (mut cs, mut sn, mut count) = (0.0, 0.0, 0usize);
    for j in 0..nt {
        let (mut c, mut s, mut n) = (0.0, 0.0, 0usize);
        for p in j * np..(j + 1) * np {
            if f.mask[p] {
                let (a, b) = (2.0 * f.angle[p]).sin_cos();
                c += b;
                s += a;
                n += 1;
            }
        }
        if n > 0 {
            per_level.push(Some(oriented(s.atan2(c))));
        } else {
            per_level.push(None);
        }
        cs += c;
        sn += s;
        count += n;
    }
    if count == 0 {
        return Err(Error::Degenerate("no unmasked points".into()));
    }
    let theta_global = oriented(sn.atan2(cs));
    let circular_variance = (1.0 - (cs * cs + sn * sn).sqrt() / count as f64).max(0.0);
    let levels: Vec<f64> = per_level.iter().flatten().cloned().collect();
    let max_level_deviation = levels.iter().map(|th| axial_distance(*th, theta_global)).fold(0.0, f64::max);
    let agree = max_level_deviation <= tol.tol_omega;
    let unit = |th: f64| [th.cos(), th.sin()];
    Ok(Direction {
        omega_per_level: levels.iter().map(|th| unit(*th)).collect(),
        theta_per_level: levels.clone(),
        omega_global: if agree { Some(unit(theta_global)) } else { None },
        theta_global,
        alpha: theta_global.sin().powi(2),
        circular_variance,
        max_level_deviation,
        is_one_dimensional: agree && circular_variance <= tol.tol_theta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidityReport {
    pub theta_residual_l2: f64,
    pub theta_boundary_flux: f64,
    pub growth_curve: Vec<(f64, f64)>,
    pub growth_sup: f64,
    pub omega_global: Option<[f64; 2]>,
    pub omega_per_level: Vec<[f64; 2]>,
    pub alpha: f64,
    pub is_one_dimensional: bool,
    pub tolerances: Tolerances,
    pub theta_global: f64,
    pub circular_variance: f64,
    pub max_level_deviation: f64,
    pub masked_fraction: f64,
}

/// All diagnostics for one field. Fails with `NotMonotone` when ∂₂U changes
/// sign on the unmasked set.
pub fn rigidity_report(u: &HalfSpaceField, w: &Weight, radii: &[f64], tol: &Tolerances) -> Result<RigidityReport> {
    let f = angle_fields(u, tol.eps_rho)?;
    monotonicity_gate(&f)?;
    let (interior, boundary) = theta_residual(u, w, &f)?;
    let d = extract_direction(&f, tol)?;
    let growth_curve = if radii.is_empty() { Vec::new() } else { growth_statistic(u, w, radii)? };
    let growth_sup = growth_curve.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(RigidityReport {
        theta_residual_l2: interior,
        theta_boundary_flux: boundary,
        growth_curve,
        growth_sup,
        omega_global: d.omega_global,
        omega_per_level: d.omega_per_level,
        alpha: d.alpha,
        is_one_dimensional: d.is_one_dimensional,
        tolerances: *tol,
        theta_global: d.theta_global,
        circular_variance: d.circular_variance,
        max_level_deviation: d.max_level_deviation,
        masked_fraction: f.masked_fraction(),
    })
}
