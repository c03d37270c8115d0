//! Model functions and parameter layouts shared by the concrete fits.
//!
//! Each model is `f(x, p)` with the parameter order given by the matching
//! `*_params` constructor, which also fixes the bounds used by the fits.
//! They are public so that synthetic data and custom starting points can be
//! fed to [`nlls_fit`](super::nlls_fit) directly.

use super::lifetime::emg_bin_fraction;
use super::ParamSpec;
use crate::analytic::{voigt_profile, VoigtWidths};

/// Bin-integrated lifetime model, `p = [t1, amplitude, t0, baseline]`.
/// `x` is the bin centre, `amplitude` the total decay counts.
pub fn lifetime(width: f64, irf_sigma: f64) -> impl Fn(f64, &[f64]) -> f64 {
    move |x: f64, p: &[f64]| p[1] * emg_bin_fraction(x - 0.5 * width, x + 0.5 * width, p[2], p[0], irf_sigma) + p[3]
}

pub fn lifetime_params(init: [f64; 4]) -> Vec<ParamSpec> {
    vec![
        ParamSpec::positive("t1", init[0]),
        ParamSpec::positive("amplitude", init[1]),
        ParamSpec::free("t0", init[2]),
        ParamSpec::free("baseline", init[3]),
    ]
}

/// Side-peak envelope over the pulse index `m`, `p = [h0, a_blink, t_blink]`.
pub fn blinking(rep_period: f64) -> impl Fn(f64, &[f64]) -> f64 {
    move |m: f64, p: &[f64]| p[0] * (1.0 + p[1] * (-m.abs() * rep_period / p[2]).exp())
}

pub fn blinking_params(init: [f64; 3]) -> Vec<ParamSpec> {
    vec![
        ParamSpec::positive("h0", init[0]),
        ParamSpec::positive("a_blink", init[1]),
        ParamSpec::positive("t_blink", init[2]),
    ]
}

/// `integral_a^b exp(-|tau| / t) dtau`.
pub(crate) fn abs_exp_integral(a: f64, b: f64, t: f64) -> f64 {
    let one_sided = |lo: f64, hi: f64| t * (-lo / t).exp() * -(-(hi - lo) / t).exp_m1();
    if a >= 0.0 {
        one_sided(a, b)
    } else if b <= 0.0 {
        one_sided(-b, -a)
    } else {
        one_sided(0.0, -a) + one_sided(0.0, b)
    }
}

/// `integral_a^b (exp(-|.| / t) * G_sigma)(tau) dtau`: the two-sided
/// exponential blurred by Gaussian timing jitter, as two mirrored
/// exponentially-modified Gaussians.
pub(crate) fn blurred_abs_exp_integral(a: f64, b: f64, t: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return abs_exp_integral(a, b, t);
    }
    // A bin more than 9 sigma from zero only sees the near-side exponential;
    // the mirrored half is below Phi(-9) relative.
    if a >= 9.0 * sigma {
        return t * emg_bin_fraction(a, b, 0.0, t, sigma);
    }
    if b <= -9.0 * sigma {
        return t * emg_bin_fraction(-b, -a, 0.0, t, sigma);
    }
    t * (emg_bin_fraction(a, b, 0.0, t, sigma) + emg_bin_fraction(-b, -a, 0.0, t, sigma))
}

/// Bin-integrated HOM centre peak,
/// `A int_bin (exp(-|tau|/T1) - V exp(-2|tau|/T2)) * G + baseline`, where
/// `G` is the Gaussian delay jitter of the detector pair (`irf_sigma`, 0 for
/// none). `p = [amplitude, visibility, t1, t2, baseline]`; amplitude in
/// counts per ps.
pub fn hom_center(width: f64, irf_sigma: f64) -> impl Fn(f64, &[f64]) -> f64 {
    move |x: f64, p: &[f64]| {
        let (a, b) = (x - 0.5 * width, x + 0.5 * width);
        let envelope = blurred_abs_exp_integral(a, b, p[2], irf_sigma);
        let dip = blurred_abs_exp_integral(a, b, 0.5 * p[3], irf_sigma);
        p[0] * (envelope - p[1] * dip) + p[4]
    }
}

/// `t1` is always fixed; `visibility` in `[0, 1]`, `t2` in `(0, 2 t1]`.
pub fn hom_center_params(init: [f64; 5]) -> Vec<ParamSpec> {
    let t1 = init[2];
    vec![
        ParamSpec::positive("amplitude", init[0]),
        ParamSpec::bounded("visibility", init[1], 0.0, 1.0),
        ParamSpec::fixed("t1", t1),
        ParamSpec::bounded("t2", init[3], 0.0, 2.0 * t1),
        ParamSpec::free("baseline", init[4]),
    ]
}

/// Peak-normalized Voigt line, `p = [center, lorentz_fwhm, gauss_fwhm, amplitude, baseline]`.
pub fn voigt_line(x: f64, p: &[f64]) -> f64 {
    voigt_profile(x, p[0], VoigtWidths { lorentz_fwhm: p[1], gauss_fwhm: p[2] }, p[3]) + p[4]
}

pub fn voigt_line_params(init: [f64; 5]) -> Vec<ParamSpec> {
    vec![
        ParamSpec::free("center", init[0]),
        ParamSpec::positive("lorentz_fwhm", init[1]),
        ParamSpec::positive("gauss_fwhm", init[2]),
        ParamSpec::positive("amplitude", init[3]),
        ParamSpec::free("baseline", init[4]),
    ]
}

/// Two Lorentzian modes plus background,
/// `p = [center_h, fwhm_h, center_v, fwhm_v, amp_h, amp_v, baseline]`.
pub fn two_lorentzians(x: f64, p: &[f64]) -> f64 {
    let l = |c: f64, f: f64, a: f64| a / (1.0 + (2.0 * (x - c) / f).powi(2));
    l(p[0], p[1], p[4]) + l(p[2], p[3], p[5]) + p[6]
}

pub fn two_lorentzians_params(init: [f64; 7]) -> Vec<ParamSpec> {
    vec![
        ParamSpec::free("center_h", init[0]),
        ParamSpec::positive("fwhm_h", init[1]),
        ParamSpec::free("center_v", init[2]),
        ParamSpec::positive("fwhm_v", init[3]),
        ParamSpec::positive("amp_h", init[4]),
        ParamSpec::positive("amp_v", init[5]),
        ParamSpec::free("baseline", init[6]),
    ]
}
