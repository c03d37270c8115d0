use super::faddeeva::faddeeva;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

/// Lorentzian and Gaussian full widths at half maximum (μeV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoigtWidths {
    pub lorentz_fwhm: f64,
    pub gauss_fwhm: f64,
}

impl VoigtWidths {
    pub fn new(lorentz_fwhm: f64, gauss_fwhm: f64) -> Self {
        debug_assert!(lorentz_fwhm >= 0.0 && gauss_fwhm >= 0.0);
        Self { lorentz_fwhm, gauss_fwhm }
    }
}

/// Olivero-Longbothum estimate of the Voigt FWHM.
pub fn voigt_fwhm(widths: VoigtWidths) -> f64 {
    let fl = widths.lorentz_fwhm;
    let fg = widths.gauss_fwhm;
    0.5346 * fl + (0.2166 * fl * fl + fg * fg).sqrt()
}

/// Voigt lineshape scaled so that its value at `center` equals `amplitude`.
pub fn voigt_profile(x: f64, center: f64, widths: VoigtWidths, amplitude: f64) -> f64 {
    let d = x - center;
    let gamma = 0.5 * widths.lorentz_fwhm;
    let sigma = super::fwhm_to_sigma(widths.gauss_fwhm);
    if sigma == 0.0 {
        if gamma == 0.0 {
            return if d == 0.0 { amplitude } else { 0.0 };
        }
        return amplitude * gamma * gamma / (d * d + gamma * gamma);
    }
    if gamma == 0.0 {
        return amplitude * (-0.5 * (d / sigma).powi(2)).exp();
    }
    let scale = 1.0 / (sigma * SQRT_2);
    let y = gamma * scale;
    let num = faddeeva(Complex64::new(d * scale, y)).re;
    let peak = faddeeva(Complex64::new(0.0, y)).re;
    amplitude * num / peak
}
