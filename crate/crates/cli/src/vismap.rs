//! Windowed two-photon visibility over a (T1, T2*) grid.

use crate::duration::parse_duration;
use crate::error::{CliError, Result};
use photonlab::analytic::{coherence_time, windowed_visibility};
use std::fmt::Write as _;

/// Operating point appended as the last row of every map.
pub const OPERATING_POINT: (f64, f64) = (257.5, 1470.0);

/// `start:stop:step` with optional duration units; `stop` is inclusive
/// (to within a millionth of a step).
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let usage = |msg: &str| CliError::Usage(format!("--t1-range {text:?}: {msg}"));
    let [start, stop, step] = parts[..] else {
        return Err(usage("expected start:stop:step"));
    };
    let get = |s: &str| parse_duration(s).map(|d| d.ps()).map_err(|e| usage(&e));
    let (start, stop, step) = (get(start)?, get(stop)?, get(step)?);
    if !(start > 0.0 && start.is_finite() && stop.is_finite() && step > 0.0) {
        return Err(usage("need 0 < start, finite stop and step > 0"));
    }
    if stop < start {
        return Err(usage("empty range (stop < start)"));
    }
    let n = ((stop - start) / step + 1e-6).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// Comma-separated durations; `inf` is allowed.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_duration(s).map(|d| d.ps()).map_err(|e| CliError::Usage(format!("--t2star-list: {e}"))))
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(CliError::Usage("--t2star-list is empty".into()));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(CliError::Usage("--t2star-list values must be > 0".into()));
    }
    Ok(values)
}

pub fn visibility(t1: f64, t2_star: f64) -> Result<f64> {
    Ok(windowed_visibility(t1, coherence_time(t1, t2_star)?)?)
}

/// CSV `t1_ps,t2star_ps,visibility`, T1-major, then the operating point.
pub fn vismap_csv(t1s: &[f64], t2stars: &[f64]) -> Result<String> {
    let mut s = String::from("t1_ps,t2star_ps,visibility\n");
    let rows = t1s.iter().flat_map(|&t1| t2stars.iter().map(move |&t2s| (t1, t2s)));
    for (t1, t2s) in rows.chain(std::iter::once(OPERATING_POINT)) {
        writeln!(s, "{t1},{t2s},{}", visibility(t1, t2s)?).expect("write to string");
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operating_points() {
        assert!((visibility(257.5, 1470.0).unwrap() - 0.740554).abs() < 1e-6);
        assert!((visibility(48.0, 1470.0).unwrap() - 1470.0 / 1566.0).abs() < 1e-12);
        assert_eq!(visibility(100.0, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("100:300:100").unwrap(), vec![100.0, 200.0, 300.0]);
        assert_eq!(parse_range("0.1ns:0.25ns:50ps").unwrap(), vec![100.0, 150.0, 200.0, 250.0]);
        assert_eq!(parse_range("5:5:1").unwrap(), vec![5.0]);
        for bad in ["300:100:10", "0:10:1", "1:10", "1:10:0", "a:b:c"] {
            assert_eq!(parse_range(bad).unwrap_err().exit_code(), 2, "{bad}");
        }
        assert_eq!(parse_list("500, 1470,inf").unwrap(), vec![500.0, 1470.0, f64::INFINITY]);
        assert!(parse_list("").is_err());
    }

    #[test]
    fn layout() {
        let csv = vismap_csv(&[100.0], &[200.0, f64::INFINITY]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t1_ps,t2star_ps,visibility");
        assert_eq!(lines[1], format!("100,200,{}", 0.5));
        assert_eq!(lines[2], "100,inf,1");
        assert!(lines[3].starts_with("257.5,1470,0.7405"));
    }
}
