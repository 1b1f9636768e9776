//! Periodic traces on ℝⁿ (n ∈ {1, 2}) and half-space fields on ℝⁿ × [0, T].

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub dims: Vec<usize>,
    pub periods: Vec<f64>,
    /// coordinate of sample 0 along each axis
    pub origin: Vec<f64>,
    /// whether the samples describe one period of a periodic function
    pub periodic: bool,
}

impl GridMeta {
    /// Periodic grid centred at the origin: x_k = −L/2 + k L/N.
    pub fn periodic(dims: &[usize], periods: &[f64]) -> Result<Self> {
        let origin = periods.iter().map(|l| -0.5 * l).collect();
        Self::with_origin(dims, periods, origin, true)
    }

    pub fn with_origin(dims: &[usize], periods: &[f64], origin: Vec<f64>, periodic: bool) -> Result<Self> {
        if dims.is_empty() || dims.len() > 2 {
            return Err(Error::GridMismatch(format!("only 1D and 2D grids are supported, got {} axes", dims.len())));
        }
        if periods.len() != dims.len() || origin.len() != dims.len() {
            return Err(Error::GridMismatch("dims, periods and origin differ in length".into()));
        }
        if dims.iter().any(|n| *n < 2) {
            return Err(Error::GridMismatch("every axis needs at least 2 samples".into()));
        }
        if periods.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::GridMismatch("periods must be positive".into()));
        }
        Ok(Self { dims: dims.to_vec(), periods: periods.to_vec(), origin, periodic })
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.dims[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.ndim()).map(|a| self.spacing(a)).product()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing(axis)
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.dims[axis]).map(|i| self.coord(axis, i)).collect()
    }

    /// Coordinates of the flat index `idx` (x₁ fastest).
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut rem = idx;
        let mut p = Vec::with_capacity(self.ndim());
        for axis in 0..self.ndim() {
            p.push(self.coord(axis, rem % self.dims[axis]));
            rem /= self.dims[axis];
        }
        p
    }

    /// |ξ|² in FFT order.
    pub fn squared_frequencies(&self) -> Vec<f64> {
        spectral::squared_frequencies(&self.dims, &self.periods)
    }

    pub fn same_shape(&self, other: &GridMeta) -> bool {
        self.dims == other.dims && self.periods == other.periods
    }
}

/// Samples of a periodic trace u with a lazily computed spectrum
/// û = √(∏L)/∏N · DFT(u), normalized so that Σ|u|²Δx = Σ|û|².
#[derive(Debug)]
pub struct TraceField {
    pub grid: GridMeta,
    pub values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl Clone for TraceField {
    fn clone(&self) -> Self {
        Self { grid: self.grid.clone(), values: self.values.clone(), spectrum: OnceLock::new() }
    }
}

impl PartialEq for TraceField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl TraceField {
    pub fn new(grid: GridMeta, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for a grid of {} points", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::GridMismatch(format!("value {i} is not finite")));
        }
        Ok(Self { grid, values, spectrum: OnceLock::new() })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: GridMeta, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::new(grid, values)
    }

    /// Scale between the raw DFT and the normalized spectrum.
    pub fn spectral_scale(&self) -> f64 {
        let l: f64 = self.grid.periods.iter().product();
        l.sqrt() / self.grid.len() as f64
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let c = self.spectral_scale();
            spectral::forward(&self.values, &self.grid.dims).into_iter().map(|v| v * c).collect()
        })
    }

    /// Inverse of [`TraceField::spectrum`].
    pub fn from_spectrum(grid: GridMeta, spectrum: Vec<Complex64>) -> Result<Self> {
        let l: f64 = grid.periods.iter().product();
        let c = grid.len() as f64 / l.sqrt();
        let scaled: Vec<Complex64> = spectrum.into_iter().map(|v| v * c).collect();
        Self::new(grid.clone(), spectral::inverse_real(scaled, &grid.dims))
    }

    /// |Σ|u|²Δx − Σ|û|²| relative to Σ|u|²Δx.
    pub fn parseval_gap(&self) -> f64 {
        let lhs: f64 = self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume();
        let rhs: f64 = self.spectrum().iter().map(|c| c.norm_sqr()).sum();
        if lhs == 0.0 {
            rhs
        } else {
            (lhs - rhs).abs() / lhs
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FourierFormula,
    PoissonConvolution,
    External,
}

/// U(x, t_j) on a tensor grid, x fastest and t slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceField {
    pub grid: GridMeta,
    pub t_levels: Vec<f64>,
    pub values: Vec<f64>,
    pub weight_id: String,
    pub provenance: Provenance,
}

impl HalfSpaceField {
    pub fn new(grid: GridMeta, t_levels: Vec<f64>, values: Vec<f64>, weight_id: &str, provenance: Provenance) -> Result<Self> {
        if t_levels.is_empty() {
            return Err(Error::GridMismatch("no t levels".into()));
        }
        if t_levels.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || t_levels.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::GridMismatch("t levels must be non-negative and strictly increasing".into()));
        }
        if values.len() != grid.len() * t_levels.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} points x {} levels",
                values.len(),
                grid.len(),
                t_levels.len()
            )));
        }
        Ok(Self { grid, t_levels, values, weight_id: weight_id.to_string(), provenance })
    }

    /// Samples a closed-form field U(x, t).
    pub fn from_fn<F: Fn(&[f64], f64) -> f64>(grid: GridMeta, t_levels: Vec<f64>, f: F) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * t_levels.len());
        for &t in &t_levels {
            for i in 0..grid.len() {
                values.push(f(&grid.point(i), t));
            }
        }
        Self::new(grid, t_levels, values, "", Provenance::External)
    }

    pub fn levels(&self) -> usize {
        self.t_levels.len()
    }

    pub fn level(&self, j: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn level_trace(&self, j: usize) -> Result<TraceField> {
        TraceField::new(self.grid.clone(), self.level(j).to_vec())
    }

    /// Largest relative deviation of the t = 0 level from `u` (in max norm),
    /// or `None` if the first level is not at t = 0.
    pub fn boundary_gap(&self, u: &TraceField) -> Option<f64> {
        if self.t_levels[0] != 0.0 {
            return None;
        }
        let scale = u.max_abs().max(f64::MIN_POSITIVE);
        Some(self.level(0).iter().zip(&u.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parseval_holds() {
        let g = GridMeta::periodic(&[32, 16], &[3.0, 5.0]).unwrap();
        let u = TraceField::from_fn(g, |p| (p[0] * 2.1).sin() + 0.3 * (p[1] * 1.3).cos() + 0.2).unwrap();
        assert!(u.parseval_gap() < 1e-12);
        let back = TraceField::from_spectrum(u.grid.clone(), u.spectrum().to_vec()).unwrap();
        for (a, b) in u.values.iter().zip(&back.values) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn coordinates_are_centred() {
        let g = GridMeta::periodic(&[4], &[8.0]).unwrap();
        assert_eq!(g.axis_coords(0), vec![-4.0, -2.0, 0.0, 2.0]);
        let g = GridMeta::periodic(&[4, 2], &[8.0, 2.0]).unwrap();
        assert_eq!(g.point(5), vec![-2.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(GridMeta::periodic(&[4, 4, 4], &[1.0, 1.0, 1.0]).is_err());
        let g = GridMeta::periodic(&[4], &[1.0]).unwrap();
        assert!(TraceField::new(g.clone(), vec![0.0; 3]).is_err());
        assert!(TraceField::new(g.clone(), vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(HalfSpaceField::new(g, vec![0.0, 0.0], vec![0.0; 8], "", Provenance::External).is_err());
    }
}
