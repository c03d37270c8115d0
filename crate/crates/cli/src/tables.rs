//! CSV schemas for histograms, peak tables, decay curves and spectra.
//!
//! | table     | header                 |
//! |-----------|------------------------|
//! | histogram | `tau_ps,counts`        |
//! | decay     | `t_ps,counts`          |
//! | peaks     | `m,area,sigma`         |
//! | spectrum  | `x,counts`             |
//! | vismap    | `t1_ps,t2star_ps,visibility` |
//!
//! Numbers are written with Rust's shortest round-trip formatting.

use crate::error::{CliError, Result};
use photonlab::correlate::{DecayHistogram, Histogram, PeakTable};
use photonlab::fit::{BinnedCounts, Spectrum};
use std::fmt::Write as _;
use std::str::FromStr;

pub fn histogram_csv(h: &Histogram) -> String {
    let mut s = String::from("tau_ps,counts\n");
    for (tau, c) in h.centers().zip(&h.counts) {
        writeln!(s, "{tau},{c}").expect("write to string");
    }
    s
}

pub fn decay_csv(d: &DecayHistogram) -> String {
    let mut s = String::from("t_ps,counts\n");
    for (i, c) in d.counts.iter().enumerate() {
        writeln!(s, "{},{c}", d.center(i)).expect("write to string");
    }
    s
}

pub fn peaks_csv(t: &PeakTable) -> String {
    let mut s = String::from("m,area,sigma\n");
    for e in &t.entries {
        writeln!(s, "{},{},{}", e.m, e.area, e.sigma).expect("write to string");
    }
    s
}

pub fn spectrum_csv(sp: &Spectrum) -> String {
    let mut s = String::from("x,counts\n");
    for (x, c) in sp.x.iter().zip(&sp.counts) {
        writeln!(s, "{x},{c}").expect("write to string");
    }
    s
}

/// Parses a CSV whose header must equal `expected` (a trailing optional
/// column may be listed in `optional`). Returns the rows as strings.
fn rows(text: &str, schema: &str, expected: &[&str], optional: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Format(format!("{schema} CSV: {e}")))?
        .iter()
        .map(String::from)
        .collect();
    let ok = header.len() >= expected.len()
        && header.len() <= expected.len() + optional.len()
        && header.iter().zip(expected.iter().chain(optional)).all(|(h, e)| h == e);
    if !ok {
        return Err(CliError::Format(format!(
            "{schema} CSV must have header `{}`, found `{}`",
            expected.join(","),
            header.join(",")
        )));
    }
    reader
        .records()
        .enumerate()
        .map(|(i, r)| {
            let r = r.map_err(|e| CliError::Format(format!("{schema} CSV row {}: {e}", i + 1)))?;
            Ok(r.iter().map(String::from).collect())
        })
        .collect()
}

fn field<T: FromStr>(schema: &str, row: usize, name: &str, text: &str) -> Result<T> {
    text.parse().map_err(|_| CliError::Format(format!("{schema} CSV row {}: {name} = {text:?} is not valid", row + 1)))
}

pub fn parse_histogram(text: &str) -> Result<Histogram> {
    let rows = rows(text, "histogram", &["tau_ps", "counts"], &[])?;
    let mut tau = Vec::with_capacity(rows.len());
    let mut counts = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        tau.push(field::<i64>("histogram", i, "tau_ps", &r[0])?);
        counts.push(field::<u64>("histogram", i, "counts", &r[1])?);
    }
    let bad = || CliError::Format("histogram CSV must have an odd number of uniform bins centred on tau = 0".into());
    if tau.len() < 3 || tau.len() % 2 == 0 {
        return Err(bad());
    }
    let w = tau[1] - tau[0];
    let k = (tau.len() / 2) as i64;
    if w <= 0 || tau.iter().enumerate().any(|(i, &t)| t != (i as i64 - k) * w) {
        return Err(bad());
    }
    let mut h = Histogram::new(w, k * w)?;
    if h.counts.len() != counts.len() {
        return Err(bad());
    }
    h.counts = counts;
    Ok(h)
}

/// Uniformly spaced `(x, counts)` series; the bin width is the spacing.
fn parse_binned(text: &str, schema: &str, x_name: &str) -> Result<BinnedCounts> {
    let rows = rows(text, schema, &[x_name, "counts"], &[])?;
    let mut x = Vec::with_capacity(rows.len());
    let mut counts = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        x.push(field::<f64>(schema, i, x_name, &r[0])?);
        let c = field::<f64>(schema, i, "counts", &r[1])?;
        if !(c >= 0.0 && c.is_finite()) {
            return Err(CliError::Format(format!("{schema} CSV row {}: counts must be finite and >= 0", i + 1)));
        }
        counts.push(c);
    }
    if x.len() < 2 {
        return Err(CliError::Format(format!("{schema} CSV needs at least 2 rows")));
    }
    let width = x[1] - x[0];
    let uniform = width > 0.0 && x.windows(2).all(|p| ((p[1] - p[0]) - width).abs() <= 1e-9 * width.max(1.0));
    if !uniform {
        return Err(CliError::Format(format!("{schema} CSV: {x_name} must be uniformly spaced and increasing")));
    }
    Ok(BinnedCounts { x, width, counts })
}

pub fn parse_decay(text: &str) -> Result<BinnedCounts> {
    parse_binned(text, "decay", "t_ps")
}

/// A histogram CSV as binned counts restricted to `|tau| <= half_width`.
pub fn parse_histogram_binned(text: &str, half_width: i64) -> Result<BinnedCounts> {
    Ok(BinnedCounts::from(&parse_histogram(text)?.restrict(half_width)))
}

/// Peak table; the `sigma` column is optional and recomputed from the area.
pub fn parse_peaks(text: &str) -> Result<PeakTable> {
    let rows = rows(text, "peaks", &["m", "area"], &["sigma"])?;
    let mut areas = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        areas.push((field::<i64>("peaks", i, "m", &r[0])?, field::<u64>("peaks", i, "area", &r[1])?));
    }
    PeakTable::from_areas(areas).map_err(|e| CliError::Format(format!("peaks CSV: {e}")))
}

pub fn parse_spectrum(text: &str) -> Result<Spectrum> {
    let rows = rows(text, "spectrum", &["x", "counts"], &[])?;
    let mut sp = Spectrum::default();
    for (i, r) in rows.iter().enumerate() {
        sp.x.push(field::<f64>("spectrum", i, "x", &r[0])?);
        sp.counts.push(field::<f64>("spectrum", i, "counts", &r[1])?);
    }
    if sp.x.iter().chain(&sp.counts).any(|v| !v.is_finite()) {
        return Err(CliError::Format("spectrum CSV values must be finite".into()));
    }
    Ok(sp)
}
