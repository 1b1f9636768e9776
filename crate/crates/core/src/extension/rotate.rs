use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{GridMeta, HalfSpaceField};
use crate::spectral;

const UPSAMPLE: usize = 8;
const STENCIL: usize = 8;

/// Band-limited refinement of one period of samples by zero padding.
fn upsample(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let m = n * UPSAMPLE;
    let spec = spectral::forward(values, &[n]);
    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        if n % 2 == 0 && k == n / 2 {
            padded[k] += 0.5 * spec[k];
            padded[m - k] += 0.5 * spec[k];
        } else if k < n / 2 {
            padded[k] = spec[k];
        } else {
            padded[m - (n - k)] = spec[k];
        }
    }
    spectral::inverse_real(padded, &[m]).into_iter().map(|v| v * UPSAMPLE as f64).collect()
}

/// Degree-7 Lagrange interpolation on a periodic uniform grid.
fn interpolate(fine: &[f64], origin: f64, h: f64, x: f64) -> f64 {
    let m = fine.len() as i64;
    let pos = (x - origin) / h;
    let base = pos.floor() as i64 - (STENCIL as i64 / 2 - 1);
    let mut out = 0.0;
    for i in 0..STENCIL as i64 {
        let mut l = 1.0;
        for j in 0..STENCIL as i64 {
            if j != i {
                l *= (pos - (base + j) as f64) / (i - j) as f64;
            }
        }
        out += l * fine[(base + i).rem_euclid(m) as usize];
    }
    out
}

/// U(x, t) = V(ω·x, t) for a 1D field V, sampled on a 2D grid, with
/// ω = (cos angle, sin angle). The 2D grid is usually non-periodic and must
/// fit inside one period of V along ω.
pub fn rotate_profile(v: &HalfSpaceField, grid: &GridMeta, angle: f64) -> Result<HalfSpaceField> {
    if v.grid.ndim() != 1 || grid.ndim() != 2 {
        return Err(Error::GridMismatch("rotation maps a 1D field onto a 2D grid".into()));
    }
    let omega = [angle.cos(), angle.sin()];
    let (lo, hi) = (v.grid.origin[0], v.grid.origin[0] + v.grid.periods[0]);
    let proj: Vec<f64> = (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            omega[0] * p[0] + omega[1] * p[1]
        })
        .collect();
    if proj.iter().any(|s| *s < lo || *s >= hi) {
        return Err(Error::GridMismatch("the 2D grid projects outside the 1D period".into()));
    }
    let h = v.grid.spacing(0) / UPSAMPLE as f64;
    let mut values = Vec::with_capacity(grid.len() * v.levels());
    for j in 0..v.levels() {
        let fine = upsample(v.level(j));
        values.extend(proj.iter().map(|s| interpolate(&fine, lo, h, *s)));
    }
    HalfSpaceField::new(grid.clone(), v.t_levels.clone(), values, &v.weight_id, v.provenance)
}
