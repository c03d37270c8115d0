use super::models::{abs_exp_integral, hom_center, hom_center_params};
use super::{nlls_fit, BinnedCounts, FitOptions, FitProblem, FitResult, ParamSpec};
use crate::analytic::Measured;
use crate::error::{domain, Error, Result};

struct Start {
    amplitude: f64,
    visibility: f64,
    baseline: f64,
}

fn starting_values(data: &BinnedCounts, t1: f64) -> Result<Start> {
    let n = data.counts.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!("centre-peak fit needs at least 8 bins, got {n}")));
    }
    let mut by_distance: Vec<(f64, f64)> = data.x.iter().zip(&data.counts).map(|(x, c)| (x.abs(), *c)).collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let outer = &by_distance[n - (n / 10).max(1)..];
    let baseline = outer.iter().map(|p| p.1).sum::<f64>() / outer.len() as f64;
    // Away from the dip the peak is the bare exponential envelope.
    let cut = 1.5 * t1;
    let wing: f64 = by_distance.iter().filter(|p| p.0 > cut).map(|p| p.1 - baseline).sum();
    let total: f64 = by_distance.iter().map(|p| p.1 - baseline).sum();
    let wing_share = 2.0 * t1 * (-cut / t1).exp();
    let amplitude = if wing > 0.0 { wing / wing_share } else { total / (2.0 * t1) }.max(1e-12);
    let centre = by_distance[0];
    let envelope = amplitude * abs_exp_integral(-0.5 * data.width, 0.5 * data.width, t1);
    let visibility = (1.0 - (centre.1 - baseline) / envelope).clamp(0.05, 0.95);
    Ok(Start { amplitude, visibility, baseline })
}

/// Fits the co-polarized HOM centre peak with `t1` held fixed.
///
/// Parameters: `amplitude` (counts per ps at `tau = 0` without the dip),
/// `visibility` in `[0, 1]`, `t1` (fixed), `t2` in `(0, 2 t1]`, `baseline`
/// (counts per bin). `irf_sigma` is the Gaussian jitter of the measured
/// delay, `sqrt(s_a^2 + s_b^2)` for two detectors; with 0 the model is the
/// bare exponential pair. Pass only the centre-peak region, `|tau| <= rep/2`.
pub fn fit_hom_center(data: &BinnedCounts, t1_fixed: f64, irf_sigma: f64) -> Result<FitResult> {
    fit_center(data, t1_fixed, irf_sigma, false)
}

/// Cross-polarized variant: the dip term is switched off (`visibility = 0`,
/// `t2` fixed and meaningless), leaving the exponential envelope.
pub fn fit_hom_center_cross(data: &BinnedCounts, t1_fixed: f64, irf_sigma: f64) -> Result<FitResult> {
    fit_center(data, t1_fixed, irf_sigma, true)
}

fn fit_center(data: &BinnedCounts, t1: f64, irf_sigma: f64, cross: bool) -> Result<FitResult> {
    if !(t1 > 0.0) {
        return Err(domain("t1_fixed must be positive"));
    }
    if !(irf_sigma >= 0.0) {
        return Err(domain("irf_sigma must be >= 0"));
    }
    let start = starting_values(data, t1)?;
    let amplitude = start.amplitude;
    let mut params = hom_center_params([amplitude, start.visibility, t1, t1, start.baseline]);
    if cross {
        params[1] = ParamSpec::fixed("visibility", 0.0);
        params[3] = ParamSpec::fixed("t2", 2.0 * t1);
    }
    let model = hom_center(data.width, irf_sigma);
    let weights = data.weights();
    let problem = FitProblem { model: &model, x: &data.x, y: &data.counts, weights: &weights, params };
    nlls_fit(&problem, FitOptions::counts())
}

/// Baseline-free area of a fitted centre peak, `A (2 T1 - V T2)`, with the
/// error propagated through the fit covariance.
pub fn hom_center_area(fit: &FitResult) -> Result<Measured> {
    let names = ["amplitude", "visibility", "t1", "t2"];
    if names.iter().any(|n| fit.index(n).is_none()) {
        return Err(domain("not a centre-peak fit"));
    }
    let (a, v, t1, t2) = (fit.value("amplitude"), fit.value("visibility"), fit.value("t1"), fit.value("t2"));
    let area = a * (2.0 * t1 - v * t2);
    let grad = [2.0 * t1 - v * t2, -a * t2, 2.0 * a, -a * v];
    let mut var = 0.0;
    for (i, ni) in names.iter().enumerate() {
        for (j, nj) in names.iter().enumerate() {
            let c = fit.cov(ni, nj);
            if c.is_finite() {
                var += grad[i] * grad[j] * c;
            }
        }
    }
    Ok(Measured::new(area, var.max(0.0).sqrt()))
}

/// `1 - area_co / cross_area`, where `area_co` is the analytic integral of the
/// fitted co-polarized model and `cross_area` the baseline-free
/// cross-polarized centre area on the same normalization.
pub fn visibility_from_fits(co: &FitResult, cross_area: Measured) -> Result<Measured> {
    if !co.converged {
        return Err(Error::Fit("co-polarized centre fit did not converge".into()));
    }
    if !(cross_area.value > 0.0) {
        return Err(domain(format!("cross-polarized area must be positive, got {}", cross_area.value)));
    }
    let co_area = hom_center_area(co)?;
    let r = co_area.value / cross_area.value;
    let sigma = ((co_area.sigma / cross_area.value).powi(2) + (r * cross_area.sigma / cross_area.value).powi(2)).sqrt();
    Ok(Measured::new(1.0 - r, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_exp_integral_pieces() {
        let t = 257.5;
        assert!((abs_exp_integral(-1e6, 1e6, t) - 2.0 * t).abs() < 1e-9);
        assert!((abs_exp_integral(-25.0, 25.0, t) - 2.0 * t * (1.0 - (-25.0 / t).exp())).abs() < 1e-12);
        assert_eq!(abs_exp_integral(-80.0, -30.0, t), abs_exp_integral(30.0, 80.0, t));
        let left = abs_exp_integral(-40.0, 0.0, t) + abs_exp_integral(0.0, 65.0, t);
        assert!((abs_exp_integral(-40.0, 65.0, t) - left).abs() < 1e-12);
    }
}
