use super::models::{two_lorentzians, two_lorentzians_params, voigt_line, voigt_line_params};
use super::{nlls_fit, poisson_weights, FitOptions, FitProblem, FitResult, ParamSpec, Spectrum};
use crate::analytic::{voigt_fwhm, Measured, VoigtWidths};
use crate::error::{domain, Error, Result};

/// Indices of `x` in increasing order.
fn x_order(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    idx
}

fn check(s: &Spectrum, min_points: usize) -> Result<()> {
    if s.x.len() != s.counts.len() {
        return Err(domain("spectrum abscissa and counts differ in length"));
    }
    if s.x.len() < min_points {
        return Err(Error::InsufficientData(format!("spectrum needs at least {min_points} points, got {}", s.x.len())));
    }
    Ok(())
}

/// Mean of the outer tenth of the points on each side.
fn edge_baseline(y_sorted: &[f64]) -> f64 {
    let k = (y_sorted.len() / 10).max(1);
    let edges: Vec<f64> = y_sorted[..k].iter().chain(&y_sorted[y_sorted.len() - k..]).copied().collect();
    edges.iter().sum::<f64>() / edges.len() as f64
}

/// Width of the region above half of `peak` (over `base`) around index `i_peak`.
fn half_max_width(x: &[f64], y: &[f64], i_peak: usize, base: f64) -> f64 {
    let half = base + 0.5 * (y[i_peak] - base);
    let mut lo = i_peak;
    while lo > 0 && y[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = i_peak;
    while hi + 1 < y.len() && y[hi + 1] >= half {
        hi += 1;
    }
    let spacing = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    (x[hi] - x[lo]).max(2.0 * spacing)
}

/// Fits a peak-normalized Voigt line plus constant background.
///
/// Parameters: `center`, `lorentz_fwhm`, `gauss_fwhm`, `amplitude` (peak
/// height above background), `baseline`. Derived quantities:
/// `voigt_fwhm` and `gauss_deconvolved = sqrt(max(0, f_G^2 - f_instr^2))`.
/// When the fitted Gaussian width lies more than two standard errors below
/// the instrument width the deconvolved width is reported as 0 and the fit
/// is flagged `gauss_below_instrument`.
pub fn fit_voigt_line(spectrum: &Spectrum, instrument_gauss_fwhm: Measured) -> Result<FitResult> {
    check(spectrum, 8)?;
    let order = x_order(&spectrum.x);
    let xs: Vec<f64> = order.iter().map(|&i| spectrum.x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| spectrum.counts[i]).collect();
    let base = edge_baseline(&ys);
    let i_peak = (0..ys.len()).fold(0, |m, i| if ys[i] > ys[m] { i } else { m });
    let amp = ys[i_peak] - base;
    if !(amp > 0.0) {
        return Err(Error::InsufficientData("spectrum has no line above background".into()));
    }
    let width = half_max_width(&xs, &ys, i_peak, base);

    let weights = poisson_weights(&spectrum.counts);
    let problem = FitProblem {
        model: &voigt_line,
        x: &spectrum.x,
        y: &spectrum.counts,
        weights: &weights,
        params: voigt_line_params([xs[i_peak], 0.4 * width, 0.7 * width, amp, base]),
    };
    let mut fit = nlls_fit(&problem, FitOptions::counts())?;

    let (fl, fg) = (fit.value("lorentz_fwhm"), fit.value("gauss_fwhm"));
    let total = voigt_fwhm(VoigtWidths::new(fl, fg));
    let root = (0.2166 * fl * fl + fg * fg).sqrt();
    let d_fl = 0.5346 + 0.2166 * fl / root;
    let d_fg = fg / root;
    let var = d_fl * d_fl * fit.cov("lorentz_fwhm", "lorentz_fwhm")
        + 2.0 * d_fl * d_fg * fit.cov("lorentz_fwhm", "gauss_fwhm")
        + d_fg * d_fg * fit.cov("gauss_fwhm", "gauss_fwhm");
    fit.derived.insert("voigt_fwhm".into(), Measured::new(total, var.max(0.0).sqrt()));

    let g = fit.get("gauss_fwhm").unwrap_or(Measured::exact(fg));
    let deconvolved = deconvolve_gaussian(g, instrument_gauss_fwhm);
    if deconvolved.1 {
        fit.flags.push("gauss_below_instrument".into());
    }
    fit.derived.insert("gauss_deconvolved".into(), deconvolved.0);
    Ok(fit)
}

/// Quadrature subtraction of the instrument width, with a flag for a total
/// width significantly below the instrument width.
///
/// At or below the instrument width the value is 0 and the error is the
/// width reachable within one standard error of both inputs.
pub fn deconvolve_gaussian(total: Measured, instrument: Measured) -> (Measured, bool) {
    let diff = total.value * total.value - instrument.value * instrument.value;
    if diff > 0.0 {
        let v = diff.sqrt();
        let s = ((total.value * total.sigma).powi(2) + (instrument.value * instrument.sigma).powi(2)).sqrt() / v;
        return (Measured::new(v, s), false);
    }
    let combined = (total.sigma.powi(2) + instrument.sigma.powi(2)).sqrt();
    let below = instrument.value - total.value > 2.0 * combined;
    let reach =
        ((total.value + total.sigma).powi(2) - (instrument.value - instrument.sigma).max(0.0).powi(2)).max(0.0).sqrt();
    (Measured::new(0.0, reach), below)
}

/// Local maxima of a 5-point moving average, largest first.
fn smoothed_maxima(y: &[f64]) -> Vec<(usize, f64)> {
    let n = y.len();
    let s: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let mut peaks: Vec<(usize, f64)> =
        (1..n - 1).filter(|&i| s[i] >= s[i - 1] && s[i] > s[i + 1]).map(|i| (i, s[i])).collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks
}

/// Fits two orthogonally polarized Lorentzian cavity modes plus background.
///
/// Starting values come from the two largest local maxima of the smoothed
/// spectrum. When the modes overlap into a single maximum it is split at
/// `+-FWHM/4` (flag `single_maximum_init`). The mode at shorter abscissa is
/// reported as `h`. If the fit cannot separate two modes (coincident
/// centres, a vanishing amplitude or a singular covariance) a single
/// Lorentzian is fitted instead, with `amp_v = 0`, the `v` shape copied from
/// `h`, and the flag `degenerate`.
pub fn fit_cavity_modes(spectrum: &Spectrum) -> Result<FitResult> {
    check(spectrum, 10)?;
    let order = x_order(&spectrum.x);
    let xs: Vec<f64> = order.iter().map(|&i| spectrum.x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| spectrum.counts[i]).collect();
    let maxima = smoothed_maxima(&ys);
    let base = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let Some(&(i1, h1)) = maxima.first() else {
        return Err(Error::InsufficientData("spectrum has no interior maximum".into()));
    };
    let mut flags = Vec::new();
    let significant: Vec<(usize, f64)> = maxima.iter().copied().filter(|m| m.1 - base > 0.1 * (h1 - base)).collect();
    let init = if significant.len() >= 2 {
        let (i2, h2) = significant[1];
        let sep = (xs[i2] - xs[i1]).abs();
        [xs[i1], sep, xs[i2], sep, h1 - base, h2 - base, base]
    } else {
        flags.push("single_maximum_init".to_string());
        let f = half_max_width(&xs, &ys, i1, base);
        let a = 0.6 * (h1 - base);
        [xs[i1] - 0.25 * f, 0.5 * f, xs[i1] + 0.25 * f, 0.5 * f, a, a, base]
    };

    let weights = poisson_weights(&spectrum.counts);
    let run = |params: Vec<ParamSpec>| {
        let problem =
            FitProblem { model: &two_lorentzians, x: &spectrum.x, y: &spectrum.counts, weights: &weights, params };
        nlls_fit(&problem, FitOptions::counts())
    };
    let spec = |p: &[f64; 7]| two_lorentzians_params([p[0], p[1], p[2], p[3], p[4].max(1e-9), p[5].max(1e-9), p[6]]);
    let mut fit = run(spec(&init))?;
    if fit.params[0] > fit.params[2] {
        swap_modes(&mut fit);
    }
    let (ah, av) = (fit.params[4], fit.params[5]);
    let separation = (fit.params[2] - fit.params[0]).abs();
    let degenerate = fit.has_flag("singular_normal_matrix")
        || separation < 0.05 * fit.params[1].min(fit.params[3])
        || ah.min(av) < 1e-3 * ah.max(av);
    if degenerate {
        let f = half_max_width(&xs, &ys, i1, base);
        let mut single = spec(&[xs[i1], f, xs[i1], f, h1 - base, 0.0, base]);
        single[2] = ParamSpec::fixed("center_v", xs[i1]);
        single[3] = ParamSpec::fixed("fwhm_v", f);
        single[5] = ParamSpec::fixed("amp_v", 0.0);
        fit = run(single)?;
        fit.params[2] = fit.params[0];
        fit.params[3] = fit.params[1];
        flags.push("degenerate".to_string());
    }
    fit.flags.extend(flags);
    Ok(fit)
}

fn swap_modes(fit: &mut FitResult) {
    let perm = [2, 3, 0, 1, 5, 4, 6];
    let old = fit.clone();
    for (i, &pi) in perm.iter().enumerate() {
        fit.params[i] = old.params[pi];
        fit.stderr[i] = old.stderr[pi];
        for (j, &pj) in perm.iter().enumerate() {
            fit.covariance[i][j] = old.covariance[pi][pj];
        }
    }
}

/// Centre (midpoint of the half-maximum crossings) and FWHM of the summed
/// modes of a cavity fit, background excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeLine {
    pub center: f64,
    pub fwhm: f64,
}

pub fn cavity_composite(fit: &FitResult) -> Result<CompositeLine> {
    if fit.params.len() != 7 {
        return Err(domain("not a cavity-mode fit"));
    }
    let mut p = fit.params.clone();
    p[6] = 0.0;
    let f = |x: f64| two_lorentzians(x, &p);
    let lo = p[0].min(p[2]) - 3.0 * p[1].max(p[3]);
    let hi = p[0].max(p[2]) + 3.0 * p[1].max(p[3]);
    let n = 20_000;
    let step = (hi - lo) / n as f64;
    let (mut x_peak, mut y_peak) = (lo, f(lo));
    for k in 1..=n {
        let x = lo + k as f64 * step;
        if f(x) > y_peak {
            x_peak = x;
            y_peak = f(x);
        }
    }
    let half = 0.5 * y_peak;
    let crossing = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if f(mid) >= half {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };
    let reach = 50.0 * p[1].max(p[3]);
    let left = crossing(x_peak, x_peak - reach);
    let right = crossing(x_peak, x_peak + reach);
    Ok(CompositeLine { center: 0.5 * (left + right), fwhm: right - left })
}
