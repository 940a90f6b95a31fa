//! CSV and number formatting shared by the CLI and the harness.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::fracparts::{OrderedPoints, UnitFrac};
use crate::{Error, Result};

/// Exact decimal expansion of a 128-bit fraction truncated to `sig`
/// significant digits.
pub fn unit_frac_decimal(t: UnitFrac, sig: usize) -> String {
    if t.0 == 0 {
        return "0".into();
    }
    // t / 2^128 has at most 128 decimals; 2^-128 > 1e-39, so 80 places leave
    // room for 30+ significant digits.
    const PLACES: u32 = 80;
    let scaled: BigUint = (BigUint::from(t.0) * BigUint::from(10u8).pow(PLACES)) >> 128u32;
    let digits = format!("{:0>width$}", scaled.to_str_radix(10), width = PLACES as usize);
    let first = digits.find(|c| c != '0').unwrap_or(digits.len() - 1);
    let end = (first + sig).min(digits.len());
    let mut s = format!("0.{}", &digits[..end]);
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    s
}

/// Parses a decimal in `[0, 1)` into the nearest 128-bit fraction.
/// Falls back to `f64` for exponent notation.
pub fn parse_unit_frac(s: &str) -> Result<UnitFrac> {
    let s = s.trim();
    if let Some(frac) = s.strip_prefix("0.").or_else(|| s.strip_prefix('.')) {
        if !frac.is_empty() && frac.bytes().all(|b| b.is_ascii_digit()) {
            let num = BigUint::parse_bytes(frac.as_bytes(), 10).unwrap_or_default();
            let den = BigUint::from(10u8).pow(frac.len() as u32);
            let v = ((num << 128u32) + (&den >> 1u32)) / den;
            return Ok(UnitFrac(v.to_u128().unwrap_or(u128::MAX)));
        }
    }
    if s == "0" {
        return Ok(UnitFrac::ZERO);
    }
    let v: f64 = s.parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
    if !(0.0..1.0).contains(&v) {
        return Err(Error::Parse(format!("theta {v} outside [0, 1)")));
    }
    Ok(UnitFrac::from_f64(v))
}

/// `x` with 17 significant digits, no exponent for moderate magnitudes.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-6..=15).contains(&mag) {
        let places = (16 - mag).max(0) as usize;
        format!("{x:.places$}")
    } else {
        format!("{x:.16e}")
    }
}

/// Writes `contents` to `path` via a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".into(),
    });
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Sequence CSV: `index,value`.
pub fn sequence_csv(values: &[BigUint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_str_radix(10)])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_sequence_csv(path: &Path) -> Result<Vec<BigUint>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v = rec.get(1).ok_or_else(|| Error::Parse("missing value column".into()))?;
        out.push(
            BigUint::parse_bytes(v.trim().as_bytes(), 10)
                .ok_or_else(|| Error::Parse(format!("bad integer {v:?}")))?,
        );
    }
    if out.iter().any(Zero::is_zero) {
        return Err(Error::Parse("sequence values must be positive".into()));
    }
    Ok(out)
}

/// Theta CSV: `x,theta` with 30 significant digits, index order.
pub fn theta_csv(points: &OrderedPoints) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "theta"])?;
    for (i, t) in points.by_index().iter().enumerate() {
        w.write_record([(i + 1).to_string(), unit_frac_decimal(*t, 30)])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Reads a theta CSV back. Rows are placed by their `x` column.
pub fn read_theta_csv(path: &Path) -> Result<OrderedPoints> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows: Vec<(usize, UnitFrac)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let x: usize = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse("bad x column".into()))?;
        let t = parse_unit_frac(rec.get(1).ok_or_else(|| Error::Parse("missing theta".into()))?)?;
        rows.push((x, t));
    }
    rows.sort_by_key(|r| r.0);
    // 30 decimal digits ~ 99 bits
    Ok(OrderedPoints::new(rows.into_iter().map(|r| r.1).collect(), 96, "csv"))
}
