//! Tabulated weights: a clamped cubic spline through (ln t, ln a), with
//! power-law extension outside the knot range. The end slopes of the
//! spline are the least-squares log-log slopes over the first and last
//! decade of knots, so the extension joins the spline in a C¹ fashion.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LogLogSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// second derivatives d²y/dx² at the knots
    m: Vec<f64>,
    slope_lo: f64,
    slope_hi: f64,
}

impl LogLogSpline {
    pub fn new(t: &[f64], a: &[f64]) -> Result<Self> {
        if t.len() != a.len() {
            return Err(Error::InvalidWeight("knot and value counts differ".into()));
        }
        if t.len() < 2 {
            return Err(Error::InvalidWeight("table needs at least two rows".into()));
        }
        for (i, (&ti, &ai)) in t.iter().zip(a).enumerate() {
            if !(ti > 0.0 && ti.is_finite()) {
                return Err(Error::InvalidWeight(format!("row {i}: t must be positive and finite")));
            }
            if !(ai > 0.0 && ai.is_finite()) {
                return Err(Error::InvalidWeight(format!("row {i}: a must be positive and finite")));
            }
            if i > 0 && ti <= t[i - 1] {
                return Err(Error::InvalidWeight(format!("row {i}: t must be strictly increasing")));
            }
        }
        let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = a.iter().map(|v| v.ln()).collect();
        let n = x.len();
        let ln10 = 10f64.ln();
        let hi_idx: Vec<usize> = (0..n).filter(|&i| x[i] >= x[n - 1] - ln10).collect();
        let lo_idx: Vec<usize> = (0..n).filter(|&i| x[i] <= x[0] + ln10).collect();
        let slope_hi = ls_slope(&x, &y, &hi_idx);
        let slope_lo = ls_slope(&x, &y, &lo_idx);
        let m = clamped_second_derivatives(&x, &y, slope_lo, slope_hi);
        Ok(Self { x, y, m, slope_lo, slope_hi })
    }

    /// Reads a CSV file with header `t,a`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "a" {
            return Err(Error::Format(format!("table header must be 't,a', found '{}'", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut t = Vec::new();
        let mut a = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| Error::Format(format!("row {}: cannot parse '{s}'", i + 1)))
            };
            t.push(parse(&rec[0])?);
            a.push(parse(&rec[1])?);
        }
        Self::new(&t, &a)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().zip(&self.y).map(|(x, y)| (x.exp(), y.exp()))
    }

    /// (a, a') at t > 0.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let xv = t.ln();
        let n = self.x.len();
        let (y, dy) = if xv <= self.x[0] {
            (self.y[0] + self.slope_lo * (xv - self.x[0]), self.slope_lo)
        } else if xv >= self.x[n - 1] {
            (self.y[n - 1] + self.slope_hi * (xv - self.x[n - 1]), self.slope_hi)
        } else {
            let i = match self.x.binary_search_by(|p| p.partial_cmp(&xv).unwrap()) {
                Ok(i) => i.min(n - 2),
                Err(i) => i - 1,
            };
            let h = self.x[i + 1] - self.x[i];
            let a = (self.x[i + 1] - xv) / h;
            let b = (xv - self.x[i]) / h;
            let y = a * self.y[i]
                + b * self.y[i + 1]
                + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0;
            let dy = (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * self.m[i]
                + (3.0 * b * b - 1.0) / 6.0 * h * self.m[i + 1];
            (y, dy)
        };
        let a = y.exp();
        (a, a * dy / t)
    }
}

fn ls_slope(x: &[f64], y: &[f64], idx: &[usize]) -> f64 {
    if idx.len() < 2 {
        // a single knot in the decade: use the neighbouring secant
        let n = x.len();
        let i = idx.first().copied().unwrap_or(n - 1).min(n - 2);
        return (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
    }
    let k = idx.len() as f64;
    let mx = idx.iter().map(|&i| x[i]).sum::<f64>() / k;
    let my = idx.iter().map(|&i| y[i]).sum::<f64>() / k;
    let sxy: f64 = idx.iter().map(|&i| (x[i] - mx) * (y[i] - my)).sum();
    let sxx: f64 = idx.iter().map(|&i| (x[i] - mx).powi(2)).sum();
    sxy / sxx
}

fn clamped_second_derivatives(x: &[f64], y: &[f64], d0: f64, dn: f64) -> Vec<f64> {
    let n = x.len();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let h0 = x[1] - x[0];
    diag[0] = h0 / 3.0;
    sup[0] = h0 / 6.0;
    rhs[0] = (y[1] - y[0]) / h0 - d0;
    for i in 1..n - 1 {
        let hl = x[i] - x[i - 1];
        let hr = x[i + 1] - x[i];
        sub[i] = hl / 6.0;
        diag[i] = (hl + hr) / 3.0;
        sup[i] = hr / 6.0;
        rhs[i] = (y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl;
    }
    let hn = x[n - 1] - x[n - 2];
    sub[n - 1] = hn / 6.0;
    diag[n - 1] = hn / 3.0;
    rhs[n - 1] = dn - (y[n - 1] - y[n - 2]) / hn;
    crate::linalg::solve_tridiagonal(&sub, &diag, &sup, &rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_samples_are_reproduced_exactly() {
        let t: Vec<f64> = (0..40).map(|i| 1e-3 * (5e4f64).powf(i as f64 / 39.0)).collect();
        let a: Vec<f64> = t.iter().map(|t| t.powf(0.3)).collect();
        let s = LogLogSpline::new(&t, &a).unwrap();
        for probe in [1e-4, 0.01, 2.0, 49.0, 500.0] {
            let (v, d) = s.eval(probe);
            assert!((v - probe.powf(0.3)).abs() < 1e-12 * v);
            assert!((d - 0.3 * probe.powf(-0.7)).abs() < 1e-10 * d.abs());
        }
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(LogLogSpline::new(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(LogLogSpline::new(&[0.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(LogLogSpline::new(&[1.0, 2.0], &[1.0, -2.0]).is_err());
        assert!(LogLogSpline::new(&[1.0], &[1.0]).is_err());
    }
}
