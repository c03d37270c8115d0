use super::models::{blinking, blinking_params};
use super::{nlls_fit, poisson_weights, FitOptions, FitProblem, FitResult, ParamSpec};
use crate::correlate::PeakTable;
use crate::error::{Error, Result};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Fits `h0 (1 + a_blink exp(-|m| rep / t_blink))` to the side-peak areas.
///
/// The centre peak is dropped. Starting values: `h0` from the outer quarter
/// of peaks, `a_blink` from the first side peaks, `t_blink` from where the
/// excess has fallen by `1/e`. If the inner quarter of peaks does not exceed
/// the outer quarter by three standard errors, `a_blink` is pinned at 0,
/// `t_blink` is left unidentified (fixed) and the result carries the
/// `no_blinking` flag. A table spanning less than `2 t_blink` is flagged
/// `short_span`.
pub fn fit_blinking(t: &PeakTable, rep_period: f64) -> Result<FitResult> {
    if !(rep_period > 0.0) {
        return Err(Error::Domain("rep_period must be positive".into()));
    }
    let side = t.without_center();
    if side.len() < 10 {
        return Err(Error::InsufficientData(format!("blinking fit needs at least 10 side peaks, got {}", side.len())));
    }
    let x: Vec<f64> = side.entries.iter().map(|e| e.m as f64).collect();
    let y: Vec<f64> = side.entries.iter().map(|e| e.area as f64).collect();

    let mut by_distance: Vec<(i64, f64)> = side.entries.iter().map(|e| (e.m.abs(), e.area as f64)).collect();
    by_distance.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let quarter = (by_distance.len() / 4).max(2);
    let near: Vec<f64> = by_distance[..quarter].iter().map(|p| p.1).collect();
    let far: Vec<f64> = by_distance[by_distance.len() - quarter..].iter().map(|p| p.1).collect();
    let h0 = mean(&far).max(1.0);
    let excess_se = (mean(&near).max(1.0) / near.len() as f64 + h0 / far.len() as f64).sqrt();
    let has_excess = mean(&near) - h0 > 3.0 * excess_se;

    let d_max = by_distance.last().map(|p| p.0).unwrap_or(1);
    let first: Vec<f64> = by_distance.iter().filter(|p| p.0 == by_distance[0].0).map(|p| p.1).collect();
    let a0 = (mean(&first) / h0 - 1.0).max(0.05);
    let d_e = distances_until_drop(&by_distance, h0, a0).unwrap_or((d_max / 5).max(1));
    let t_blink0 = d_e as f64 * rep_period;

    let mut params = blinking_params([h0, a0, t_blink0]);
    if !has_excess {
        params[1] = ParamSpec::fixed("a_blink", 0.0);
        params[2] = ParamSpec::fixed("t_blink", t_blink0);
    }
    let model = blinking(rep_period);
    let weights = poisson_weights(&y);
    let problem = FitProblem { model: &model, x: &x, y: &y, weights: &weights, params };
    let mut fit = nlls_fit(&problem, FitOptions::counts())?;
    if !has_excess {
        fit.flags.push("no_blinking".into());
    } else if (d_max as f64) * rep_period < 2.0 * fit.value("t_blink") {
        fit.flags.push("short_span".into());
    }
    Ok(fit)
}

/// Smallest `|m|` whose mean excess over `h0` has fallen below `a0 / e`.
fn distances_until_drop(by_distance: &[(i64, f64)], h0: f64, a0: f64) -> Option<i64> {
    let mut i = 0;
    while i < by_distance.len() {
        let d = by_distance[i].0;
        let group: Vec<f64> = by_distance[i..].iter().take_while(|p| p.0 == d).map(|p| p.1).collect();
        i += group.len();
        if mean(&group) / h0 - 1.0 < a0 / std::f64::consts::E {
            return Some(d.max(1));
        }
    }
    None
}
