//! FFT helpers on 1D and 2D periodic grids stored with x₁ fastest.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// Angular wavenumbers 2πk/L in FFT order (k = 0, 1, …, n/2−1, −n/2, …, −1).
pub fn wavenumbers(n: usize, period: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / period;
    (0..n)
        .map(|k| {
            let kk = if k < (n + 1) / 2 { k as i64 } else { k as i64 - n as i64 };
            base * kk as f64
        })
        .collect()
}

/// Unnormalized in-place transform along every axis.
pub fn fft_nd(data: &mut [Complex64], dims: &[usize], direction: FftDirection) {
    let total: usize = dims.iter().product();
    assert_eq!(total, data.len());
    let mut planner = FftPlanner::new();
    let mut stride = 1;
    for &n in dims {
        if n > 1 {
            let fft = planner.plan_fft(n, direction);
            if stride == 1 {
                fft.process(data);
            } else {
                let mut line = vec![Complex64::new(0.0, 0.0); n];
                let block = stride * n;
                for outer in (0..total).step_by(block) {
                    for inner in 0..stride {
                        for (k, v) in line.iter_mut().enumerate() {
                            *v = data[outer + inner + k * stride];
                        }
                        fft.process(&mut line);
                        for (k, v) in line.iter().enumerate() {
                            data[outer + inner + k * stride] = *v;
                        }
                    }
                }
            }
        }
        stride *= n;
    }
}

pub fn forward(values: &[f64], dims: &[usize]) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft_nd(&mut c, dims, FftDirection::Forward);
    c
}

/// Inverse transform including the 1/N factor; returns the real part.
pub fn inverse_real(mut spectrum: Vec<Complex64>, dims: &[usize]) -> Vec<f64> {
    fft_nd(&mut spectrum, dims, FftDirection::Inverse);
    let scale = 1.0 / spectrum.len() as f64;
    spectrum.iter().map(|c| c.re * scale).collect()
}

/// |ξ|² for every entry of a spectrum in FFT order.
pub fn squared_frequencies(dims: &[usize], periods: &[f64]) -> Vec<f64> {
    let ks: Vec<Vec<f64>> = dims.iter().zip(periods).map(|(n, l)| wavenumbers(*n, *l)).collect();
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut s = 0.0;
        for (axis, n) in dims.iter().enumerate() {
            let k = ks[axis][rem % n];
            rem /= n;
            s += k * k;
        }
        out.push(s);
    }
    out
}

/// Multiplier i ξ_axis with the Nyquist entry zeroed (keeps derivatives of
/// real data real).
pub fn derivative_multiplier(dims: &[usize], periods: &[f64], axis: usize) -> Vec<Complex64> {
    let n = dims[axis];
    let mut k = wavenumbers(n, periods[axis]);
    if n % 2 == 0 {
        k[n / 2] = 0.0;
    }
    let stride: usize = dims[..axis].iter().product();
    let total: usize = dims.iter().product();
    (0..total).map(|idx| Complex64::new(0.0, k[(idx / stride) % n])).collect()
}

/// Spectral partial derivative of periodic samples along `axis`.
pub fn derivative(values: &[f64], dims: &[usize], periods: &[f64], axis: usize) -> Vec<f64> {
    let mut c = forward(values, dims);
    let mult = derivative_multiplier(dims, periods, axis);
    for (v, m) in c.iter_mut().zip(&mult) {
        *v *= m;
    }
    inverse_real(c, dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wavenumber_order() {
        let k = wavenumbers(4, 2.0 * PI);
        assert_eq!(k, vec![0.0, 1.0, -2.0, -1.0]);
    }

    #[test]
    fn round_trip_2d() {
        let dims = [8, 4];
        let v: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = inverse_real(forward(&v, &dims), &dims);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_modes() {
        let dims = [16, 8];
        let periods = [2.0 * PI, 4.0 * PI];
        let mut v = Vec::new();
        for j in 0..8 {
            for i in 0..16 {
                let x = 2.0 * PI * i as f64 / 16.0;
                let y = 4.0 * PI * j as f64 / 8.0;
                v.push((2.0 * x).sin() * (0.5 * y).cos());
            }
        }
        let d1 = derivative(&v, &dims, &periods, 0);
        let d2 = derivative(&v, &dims, &periods, 1);
        for j in 0..8 {
            for i in 0..16 {
                let x = 2.0 * PI * i as f64 / 16.0;
                let y = 4.0 * PI * j as f64 / 8.0;
                assert!((d1[i + 16 * j] - 2.0 * (2.0 * x).cos() * (0.5 * y).cos()).abs() < 1e-12);
                assert!((d2[i + 16 * j] + 0.5 * (2.0 * x).sin() * (0.5 * y).sin()).abs() < 1e-12);
            }
        }
    }
}
