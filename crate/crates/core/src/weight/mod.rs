//! One-dimensional weights a(t) on the half line.

mod a2;
pub mod expr;
mod table;

use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use a2::{a2_diagnose, A2Options, A2Report, IntervalFailure};
pub use expr::{parse_expr, Expr};
pub use table::LogLogSpline;

use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    /// a(t) = t^(1-2s)
    Power { s: f64 },
    Tabulated(LogLogSpline),
    Expression(Expr),
}

/// An immutable, positive, C¹ weight on (0, ∞).
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    kind: WeightKind,
    spec: String,
    id: String,
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

/// Parses `power:s=F`, `table:PATH` or `expr:EXPR`. Parse error positions
/// are byte offsets into the full spec string.
pub fn parse_weight(spec: &str) -> Result<Weight> {
    Weight::parse(spec)
}

fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..8])
}

impl Weight {
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if let Some(rest) = spec.strip_prefix("power:") {
            let Some(val) = rest.strip_prefix("s=") else {
                return Err(Error::Parse { position: 6, message: "expected 's='".into() });
            };
            let s: f64 = val.trim().parse().map_err(|_| Error::Parse {
                position: 8,
                message: format!("invalid number '{val}'"),
            })?;
            Self::power(s)
        } else if let Some(path) = spec.strip_prefix("table:") {
            if path.is_empty() {
                return Err(Error::Parse { position: 6, message: "missing table path".into() });
            }
            let spline = LogLogSpline::from_csv(Path::new(path))?;
            Self::from_spline(spline, spec.to_string())
        } else if let Some(src) = spec.strip_prefix("expr:") {
            let e = parse_expr(src).map_err(|err| match err {
                Error::Parse { position, message } => Error::Parse { position: position + 5, message },
                other => other,
            })?;
            let w = Weight {
                kind: WeightKind::Expression(e),
                spec: spec.to_string(),
                id: digest(&[b"expr", src.split_whitespace().collect::<String>().as_bytes()]),
            };
            w.check_probes()?;
            Ok(w)
        } else {
            Err(Error::Parse {
                position: 0,
                message: "weight spec must start with 'power:', 'table:' or 'expr:'".into(),
            })
        }
    }

    /// a(t) = t^(1-2s), s in (0, 1).
    pub fn power(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidWeight(format!("power weight needs s in (0,1), got {s}")));
        }
        Ok(Weight {
            kind: WeightKind::Power { s },
            spec: format!("power:s={s}"),
            id: digest(&[b"power", &s.to_le_bytes()]),
        })
    }

    pub fn from_table(t: &[f64], a: &[f64]) -> Result<Self> {
        let spline = LogLogSpline::new(t, a)?;
        Self::from_spline(spline, format!("table:<{} rows>", t.len()))
    }

    fn from_spline(spline: LogLogSpline, spec: String) -> Result<Self> {
        let mut bytes = Vec::new();
        for (t, a) in spline.knots() {
            bytes.extend_from_slice(&t.to_le_bytes());
            bytes.extend_from_slice(&a.to_le_bytes());
        }
        let w = Weight { kind: WeightKind::Tabulated(spline), spec, id: digest(&[b"table", &bytes]) };
        w.check_probes()?;
        Ok(w)
    }

    fn check_probes(&self) -> Result<()> {
        for i in 0..=30 {
            let t = 1e-3 * 10f64.powf(5.0 * i as f64 / 30.0);
            let (a, da) = self.eval_unchecked(t);
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidWeight(format!("weight is not positive at probe t = {t:.4e} (a = {a})")));
            }
            if !da.is_finite() {
                return Err(Error::InvalidWeight(format!("weight derivative is not finite at probe t = {t:.4e}")));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn spec(&self) -> &str {
        &self.spec
    }

    /// Stable content hash.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// `Some(s)` for power weights.
    pub fn fractional_order(&self) -> Option<f64> {
        match self.kind {
            WeightKind::Power { s } => Some(s),
            _ => None,
        }
    }

    /// (a(t), a'(t)) for t > 0.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        if !(t > 0.0) {
            return Err(Error::WeightEval { t, message: "t must be positive".into() });
        }
        let (a, da) = self.eval_unchecked(t);
        if !(a > 0.0 && a.is_finite() && da.is_finite()) {
            return Err(Error::WeightEval { t, message: format!("a = {a}, a' = {da}") });
        }
        Ok((a, da))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> (f64, f64) {
        match &self.kind {
            WeightKind::Power { s } => {
                let alpha = 1.0 - 2.0 * s;
                let a = t.powf(alpha);
                (a, alpha * a / t)
            }
            WeightKind::Tabulated(sp) => sp.eval(t),
            WeightKind::Expression(e) => {
                let d = e.eval(t);
                (d.v, d.d)
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            WeightKind::Power { s } => t.powf(1.0 - 2.0 * s),
            _ => self.eval_unchecked(t).0,
        }
    }

    /// Local exponent t a'(t)/a(t) as t -> 0, clamped to (-0.99, 0.99).
    pub fn exponent_at_origin(&self) -> f64 {
        match self.kind {
            WeightKind::Power { s } => 1.0 - 2.0 * s,
            _ => {
                let t = 1e-8;
                let (a, da) = self.eval_unchecked(t);
                let p = t * da / a;
                if p.is_finite() {
                    p.clamp(-0.99, 0.99)
                } else {
                    0.0
                }
            }
        }
    }

    /// ∫_lo^hi a(t) dt, accurate to about `1e-13` relative.
    pub fn integral(&self, lo: f64, hi: f64) -> Result<f64> {
        self.integral_of(lo, hi, false)
    }

    /// ∫_lo^hi dt / a(t).
    pub fn reciprocal_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        self.integral_of(lo, hi, true)
    }

    fn integral_of(&self, lo: f64, hi: f64, reciprocal: bool) -> Result<f64> {
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::InvalidArgument(format!("bad integration range [{lo}, {hi}]")));
        }
        if hi == lo {
            return Ok(0.0);
        }
        if let WeightKind::Power { s } = self.kind {
            let alpha = if reciprocal { 2.0 * s - 1.0 } else { 1.0 - 2.0 * s };
            let p = alpha + 1.0;
            return Ok((hi.powf(p) - lo.powf(p)) / p);
        }
        let f = |t: f64| {
            let a = self.value(t);
            if reciprocal {
                1.0 / a
            } else {
                a
            }
        };
        let v = if lo == 0.0 {
            // graded rule on [0, min(hi, 1)], adaptive beyond
            let cut = hi.min(1.0);
            let head = quadrature::graded_from_zero(&f, cut, 48)?;
            if hi > cut {
                head + quadrature::adaptive(&f, cut, hi, 1e-13)?
            } else {
                head
            }
        } else {
            quadrature::adaptive(&f, lo, hi, 1e-13)?
        };
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Quadrature { lo, hi, message: format!("integral = {v}") })
        }
    }

    /// Cheap element integral of a over [lo, hi] for mesh assembly: exact
    /// for power weights, a power-law fit through the endpoints on cells
    /// touching or close to the origin, 3-point Gauss elsewhere.
    pub(crate) fn cell_integral(&self, lo: f64, hi: f64) -> f64 {
        if let WeightKind::Power { s } = self.kind {
            let p = 2.0 - 2.0 * s;
            return (hi.powf(p) - lo.powf(p)) / p;
        }
        if lo == 0.0 {
            return quadrature::first_cell_power_law(&|t| self.value(t), hi).unwrap_or(f64::NAN);
        }
        if hi > 1.5 * lo {
            let al = self.value(lo);
            let ar = self.value(hi);
            let r = (hi / lo).ln();
            let p = (ar / al).ln() / r;
            if (p + 1.0).abs() < 1e-10 {
                return al * lo * r;
            }
            return (ar * hi - al * lo) / (p + 1.0);
        }
        const X: f64 = 0.774_596_669_241_483_4;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        half * (5.0 / 9.0 * (self.value(mid - half * X) + self.value(mid + half * X)) + 8.0 / 9.0 * self.value(mid))
    }
}
