//! Shape-preserving piecewise cubic Hermite interpolation (Fritsch–Butland
//! slopes, the same construction as PCHIP).

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// `x` must be strictly increasing with at least one point.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty());
        let n = x.len();
        let mut d = vec![0.0; n];
        if n == 2 {
            let s = (y[1] - y[0]) / (x[1] - x[0]);
            d = vec![s, s];
        } else if n > 2 {
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let del: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
            for i in 1..n - 1 {
                if del[i - 1] * del[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], del[0], del[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Self { x, y, d }
    }

    pub fn xs(&self) -> &[f64] {
        &self.x
    }

    pub fn ys(&self) -> &[f64] {
        &self.y
    }

    fn locate(&self, xv: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|p| p.partial_cmp(&xv).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value at `xv`; outside the knot range the end cubic is continued.
    pub fn eval(&self, xv: f64) -> f64 {
        if self.x.len() == 1 {
            return self.y[0];
        }
        let i = self.locate(xv);
        let h = self.x[i + 1] - self.x[i];
        let s = (xv - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    pub fn derivative(&self, xv: f64) -> f64 {
        if self.x.len() == 1 {
            return 0.0;
        }
        let i = self.locate(xv);
        let h = self.x[i + 1] - self.x[i];
        let s = (xv - self.x[i]) / h;
        let d00 = 6.0 * s * (s - 1.0) / h;
        let d10 = (1.0 - s) * (1.0 - 3.0 * s);
        let d01 = -d00;
        let d11 = s * (3.0 * s - 2.0);
        d00 * self.y[i] + d10 * self.d[i] + d01 * self.y[i + 1] + d11 * self.d[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}
