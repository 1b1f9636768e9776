//! Grid files (one JSON header line followed by little-endian f64 samples,
//! x fastest and t slowest) and CSV tables.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridMeta, HalfSpaceField, Provenance, TraceField};

pub const DTYPE: &str = "f64-le";
pub const ORDER: &str = "row-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub dims: Vec<usize>,
    pub periods: Vec<f64>,
    pub t_levels: Vec<f64>,
    pub dtype: String,
    pub order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl GridHeader {
    fn from_field(f: &HalfSpaceField) -> Self {
        Self {
            dims: f.grid.dims.clone(),
            periods: f.grid.periods.clone(),
            t_levels: f.t_levels.clone(),
            dtype: DTYPE.into(),
            order: ORDER.into(),
            origin: Some(f.grid.origin.clone()),
            periodic: Some(f.grid.periodic),
            weight_id: if f.weight_id.is_empty() { None } else { Some(f.weight_id.clone()) },
            provenance: Some(f.provenance),
        }
    }

    fn grid(&self) -> Result<GridMeta> {
        let origin = self.origin.clone().unwrap_or_else(|| self.periods.iter().map(|l| -0.5 * l).collect());
        GridMeta::with_origin(&self.dims, &self.periods, origin, self.periodic.unwrap_or(true))
    }
}

pub fn encode_field(f: &HalfSpaceField) -> Result<Vec<u8>> {
    let header = serde_json::to_string(&GridHeader::from_field(f)).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(header.len() + 1 + 8 * f.values.len());
    out.extend_from_slice(header.as_bytes());
    out.push(b'\n');
    for v in &f.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_field<R: Read>(reader: R) -> Result<HalfSpaceField> {
    let mut r = BufReader::new(reader);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: GridHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("bad grid header: {e}")))?;
    if header.dtype != DTYPE || header.order != ORDER {
        return Err(Error::Format(format!("unsupported layout {} / {}", header.dtype, header.order)));
    }
    let grid = header.grid()?;
    let count = grid.len() * header.t_levels.len();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * count {
        return Err(Error::Format(format!("expected {} data bytes, found {}", 8 * count, bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    HalfSpaceField::new(
        grid,
        header.t_levels,
        values,
        header.weight_id.as_deref().unwrap_or(""),
        header.provenance.unwrap_or(Provenance::External),
    )
}

pub fn write_field(path: &Path, f: &HalfSpaceField) -> Result<()> {
    fs::write(path, encode_field(f)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<HalfSpaceField> {
    decode_field(fs::File::open(path)?)
}

/// A trace is stored as a grid file with the single level t = 0.
pub fn write_trace(path: &Path, u: &TraceField) -> Result<()> {
    let f = HalfSpaceField::new(u.grid.clone(), vec![0.0], u.values.clone(), "", Provenance::External)?;
    write_field(path, &f)
}

pub fn read_trace(path: &Path) -> Result<TraceField> {
    let f = read_field(path)?;
    if f.t_levels.len() != 1 {
        return Err(Error::Format(format!("a trace file has one level, found {}", f.t_levels.len())));
    }
    TraceField::new(f.grid, f.values)
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(mut out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = GridMeta::periodic(&[8, 4], &[2.0, 1.0]).unwrap();
        let vals: Vec<f64> = (0..64).map(|i| (i as f64 * 0.123).sin() / 3.0).collect();
        let f = HalfSpaceField::new(g, vec![0.0, 0.5], vals, "abc", Provenance::FourierFormula).unwrap();
        let bytes = encode_field(&f).unwrap();
        let first = bytes.iter().position(|b| *b == b'\n').unwrap();
        let header = std::str::from_utf8(&bytes[..first]).unwrap();
        assert!(header.starts_with(r#"{"dims":[8,4],"periods":[2.0,1.0],"t_levels":[0.0,0.5],"dtype":"f64-le","order":"row-major""#));
        let back = decode_field(&bytes[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn minimal_header_is_accepted() {
        let mut bytes = br#"{"dims":[2],"periods":[1.0],"t_levels":[0.0],"dtype":"f64-le","order":"row-major"}"#.to_vec();
        bytes.push(b'\n');
        bytes.extend_from_slice(&1.5f64.to_le_bytes());
        bytes.extend_from_slice(&(-2.0f64).to_le_bytes());
        let f = decode_field(&bytes[..]).unwrap();
        assert_eq!(f.values, vec![1.5, -2.0]);
        assert_eq!(f.grid.origin, vec![-0.5]);
        assert_eq!(f.provenance, Provenance::External);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let mut bytes = br#"{"dims":[2],"periods":[1.0],"t_levels":[0.0],"dtype":"f64-le","order":"row-major"}"#.to_vec();
        bytes.push(b'\n');
        bytes.extend_from_slice(&1.5f64.to_le_bytes());
        assert!(matches!(decode_field(&bytes[..]), Err(Error::Format(_))));
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        let mut out = Vec::new();
        write_csv(&mut out, &["a", "b"], &[vec![0.1, 2.0]]).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s, "a,b\n1.0000000000000001e-1,2.0000000000000000e0\n");
    }
}
