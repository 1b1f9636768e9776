//! Run configuration shared by the command-line tools.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridMeta;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub log: bool,
}

impl LambdaGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda min must be positive, got {}", self.min)));
        }
        if !(self.max >= self.min && self.max.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda max {} is below min {}", self.max, self.min)));
        }
        if self.count == 0 || (self.count == 1 && self.max != self.min) {
            return Err(Error::InvalidArgument("lambda count must be at least 2 for a range".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        if self.count == 1 {
            return Ok(vec![self.min]);
        }
        let k = (self.count - 1) as f64;
        let mut v: Vec<f64> = (0..self.count)
            .map(|i| {
                let f = i as f64 / k;
                if self.log {
                    (self.min.ln() + f * (self.max / self.min).ln()).exp()
                } else {
                    self.min + f * (self.max - self.min)
                }
            })
            .collect();
        // land exactly on the requested end points
        v[0] = self.min;
        v[self.count - 1] = self.max;
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSet {
    pub tol_profile: f64,
    pub tol_symbol: f64,
    pub eps_rho: f64,
    pub tol_theta: f64,
    pub tol_omega: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self { tol_profile: 1e-7, tol_symbol: 1e-6, eps_rho: 1e-8, tol_theta: 1e-6, tol_omega: 1e-4 }
    }
}

impl ToleranceSet {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_profile", self.tol_profile),
            ("tol_symbol", self.tol_symbol),
            ("eps_rho", self.eps_rho),
            ("tol_theta", self.tol_theta),
            ("tol_omega", self.tol_omega),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Either an explicit list of t levels or a graded set t_j = T (j/J)^γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TLevels {
    List(Vec<f64>),
    Auto { t_max: f64, count: usize, grading: f64 },
}

impl TLevels {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            TLevels::List(v) => v.clone(),
            TLevels::Auto { t_max, count, grading } => graded_levels(*t_max, *count, *grading)?,
        };
        validate_levels(&v)?;
        Ok(v)
    }
}

pub fn graded_levels(t_max: f64, count: usize, grading: f64) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) || count < 1 || !(grading >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "graded levels need t_max > 0, count >= 1 and grading >= 1 (got {t_max}, {count}, {grading})"
        )));
    }
    let mut v: Vec<f64> = (0..=count).map(|j| t_max * (j as f64 / count as f64).powf(grading)).collect();
    v[count] = t_max;
    Ok(v)
}

pub fn validate_levels(v: &[f64]) -> Result<()> {
    if v.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("t levels must start at 0".into()));
    }
    if v.windows(2).any(|p| !(p[1] > p[0])) || v.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("t levels must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Parses "0,0.5,1" or "auto" (which yields `default`).
pub fn parse_levels(text: &str, default: &TLevels) -> Result<Vec<f64>> {
    if text.trim() == "auto" {
        return default.values();
    }
    let v = parse_list(text)?;
    validate_levels(&v)?;
    Ok(v)
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("cannot parse '{}' as a number", p.trim())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: Vec<usize>,
    pub periods: Vec<f64>,
    #[serde(default)]
    pub t_levels: Option<TLevels>,
}

impl GridSpec {
    pub fn grid(&self) -> Result<GridMeta> {
        GridMeta::periodic(&self.n, &self.periods).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub weight: Option<String>,
    pub lambda_grid: Option<LambdaGrid>,
    pub tolerances: ToleranceSet,
    pub grid: Option<GridSpec>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        if let Some(l) = &self.lambda_grid {
            l.validate()?;
        }
        if let Some(g) = &self.grid {
            g.grid()?;
            if let Some(t) = &g.t_levels {
                t.values()?;
            }
        }
        Ok(())
    }
}
