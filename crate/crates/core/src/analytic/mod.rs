//! Closed-form relations for the emitter, the interferometers and the
//! spectral lineshape. These are pure functions; the simulator and the
//! fitters are validated against them.

mod faddeeva;
mod pattern;
mod voigt;

pub use faddeeva::{erfcx, faddeeva};
pub use pattern::{expected_peak_pattern, Setup};
pub use voigt::{voigt_fwhm, voigt_profile, VoigtWidths};

use crate::error::{domain, Result};
use serde::{Deserialize, Serialize};

/// A value with one standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        debug_assert!(sigma >= 0.0 || sigma.is_nan());
        Self { value, sigma }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }

    /// Distance from `target` in units of sigma (infinite for an exact value that misses).
    pub fn pull(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.sigma
        }
    }
}

impl std::fmt::Display for Measured {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ± {}", self.value, self.sigma)
    }
}

/// Two-state blinking: strength and correlation time (ps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlinkModel {
    pub a_blink: f64,
    pub t_blink: f64,
}

impl BlinkModel {
    pub const NONE: BlinkModel = BlinkModel { a_blink: 0.0, t_blink: 1.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.a_blink >= 0.0 && self.a_blink.is_finite()) {
            return Err(domain(format!("a_blink must be finite and >= 0, got {}", self.a_blink)));
        }
        if !(self.t_blink > 0.0) {
            return Err(domain(format!("t_blink must be > 0, got {}", self.t_blink)));
        }
        Ok(())
    }

    /// Stationary probability of the bright state, `1 / (1 + a_blink)`.
    pub fn on_probability(&self) -> f64 {
        1.0 / (1.0 + self.a_blink)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterModel {
    /// Radiative lifetime T1 (ps).
    pub t1: f64,
    /// Pure dephasing time T2* (ps); `f64::INFINITY` for a Fourier-limited emitter.
    pub t2_star: f64,
    pub excitation_prob: f64,
    /// Probability of an extra, distinguishable photon given a primary emission.
    pub contamination_prob: f64,
    pub blink: BlinkModel,
}

impl EmitterModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1.is_finite()) {
            return Err(domain(format!("t1 must be finite and > 0, got {}", self.t1)));
        }
        if !(self.t2_star > 0.0) {
            return Err(domain(format!("t2_star must be > 0 or infinite, got {}", self.t2_star)));
        }
        check_probability("excitation_prob", self.excitation_prob)?;
        check_probability("contamination_prob", self.contamination_prob)?;
        self.blink.validate()
    }

    pub fn t2(&self) -> f64 {
        1.0 / (0.5 / self.t1 + 1.0 / self.t2_star)
    }
}

/// Pulsed excitation: repetition period (integer ps) and pulse count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcitationClock {
    pub rep_period: u64,
    pub n_pulses: u64,
}

impl ExcitationClock {
    /// 1 / 76 MHz on the picosecond grid.
    pub const DEFAULT_REP_PERIOD: u64 = 13_158;

    pub fn new(n_pulses: u64) -> Self {
        Self { rep_period: Self::DEFAULT_REP_PERIOD, n_pulses }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rep_period == 0 {
            return Err(domain("rep_period must be > 0"));
        }
        Ok(())
    }

    /// Duration of the record, `n_pulses * rep_period`.
    pub fn span(&self) -> u64 {
        self.n_pulses * self.rep_period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Gaussian timing jitter, standard deviation (ps).
    pub irf_sigma: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    /// Dead time (ps).
    pub dead_time: f64,
}

impl DetectorModel {
    pub const IDEAL: DetectorModel = DetectorModel { efficiency: 1.0, irf_sigma: 0.0, dark_rate: 0.0, dead_time: 0.0 };

    pub fn validate(&self) -> Result<()> {
        check_probability("efficiency", self.efficiency)?;
        for (name, v) in [("irf_sigma", self.irf_sigma), ("dark_rate", self.dark_rate), ("dead_time", self.dead_time)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Standard deviation of a Gaussian with the given FWHM.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (8.0 * std::f64::consts::LN_2).sqrt()
}

/// Coherence time `T2 = 1 / (1/(2 T1) + 1/T2*)`.
pub fn coherence_time(t1: f64, t2_star: f64) -> Result<f64> {
    if !(t1 > 0.0 && t1.is_finite()) || !(t2_star > 0.0) {
        return Err(domain(format!("coherence_time needs t1 > 0 and t2_star > 0, got ({t1}, {t2_star})")));
    }
    Ok(1.0 / (0.5 / t1 + 1.0 / t2_star))
}

/// Pure dephasing time recovered from lifetime and coherence time.
/// Returns infinity at the Fourier limit `t2 == 2 t1`.
pub fn pure_dephasing_time(t1: f64, t2: f64) -> Result<f64> {
    if !(t1 > 0.0 && t1.is_finite()) || !(t2 > 0.0) {
        return Err(domain(format!("pure_dephasing_time needs positive inputs, got ({t1}, {t2})")));
    }
    if t2 > 2.0 * t1 {
        return Err(domain(format!("t2 = {t2} exceeds the Fourier limit 2*t1 = {}", 2.0 * t1)));
    }
    let rate = 1.0 / t2 - 0.5 / t1;
    Ok(if rate <= 0.0 { f64::INFINITY } else { 1.0 / rate })
}

/// First-order error propagation for [`pure_dephasing_time`].
pub fn pure_dephasing_time_measured(t1: Measured, t2: Measured) -> Result<Measured> {
    let t2s = pure_dephasing_time(t1.value, t2.value)?;
    if t2s.is_infinite() {
        return Ok(Measured::new(t2s, f64::INFINITY));
    }
    // d T2*/d T2 = T2*^2 / T2^2,  d T2*/d T1 = -T2*^2 / (2 T1^2)
    let d_t2 = (t2s / t2.value).powi(2);
    let d_t1 = 0.5 * (t2s / t1.value).powi(2);
    let sigma = ((d_t2 * t2.sigma).powi(2) + (d_t1 * t1.sigma).powi(2)).sqrt();
    Ok(Measured::new(t2s, sigma))
}

/// Co-polarized HOM centre-peak shape `A (exp(-|tau|/T1) - V exp(-2|tau|/T2))`.
pub fn hom_center_model(tau: f64, amplitude: f64, visibility: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(t1 > 0.0) || !(t2 > 0.0) {
        return Err(domain(format!("hom_center_model needs t1, t2 > 0, got ({t1}, {t2})")));
    }
    Ok(hom_center_unchecked(tau, amplitude, visibility, t1, t2))
}

#[inline]
pub(crate) fn hom_center_unchecked(tau: f64, amplitude: f64, visibility: f64, t1: f64, t2: f64) -> f64 {
    let a = tau.abs();
    amplitude * ((-a / t1).exp() - visibility * (-2.0 * a / t2).exp())
}

/// Window-integrated two-photon visibility `T2 / (2 T1)`.
pub fn windowed_visibility(t1: f64, t2: f64) -> Result<f64> {
    if !(t1 > 0.0) || !(t2 > 0.0) {
        return Err(domain(format!("windowed_visibility needs positive inputs, got ({t1}, {t2})")));
    }
    if t2 > 2.0 * t1 * (1.0 + 1e-12) {
        return Err(domain(format!("t2 = {t2} exceeds the Fourier limit 2*t1 = {}", 2.0 * t1)));
    }
    Ok((t2 / (2.0 * t1)).min(1.0))
}

/// Purcell enhancement `t1_ref / t1`, linearised error propagation.
pub fn purcell_factor(t1_ref: Measured, t1: Measured) -> Result<Measured> {
    if !(t1_ref.value > 0.0) || !(t1.value > 0.0) {
        return Err(domain("purcell_factor needs positive lifetimes"));
    }
    let f = t1_ref.value / t1.value;
    let rel = ((t1_ref.sigma / t1_ref.value).powi(2) + (t1.sigma / t1.value).powi(2)).sqrt();
    Ok(Measured::new(f, f * rel))
}

/// Coincidence peak area `h0 (1 + a_blink exp(-|m| rep_period / t_blink))`.
pub fn blinking_envelope(m: i64, h0: f64, a_blink: f64, t_blink: f64, rep_period: f64) -> Result<f64> {
    if !(t_blink > 0.0) {
        return Err(domain(format!("t_blink must be > 0, got {t_blink}")));
    }
    Ok(h0 * (1.0 + a_blink * (-(m.unsigned_abs() as f64) * rep_period / t_blink).exp()))
}

/// Upper bound on the quantum efficiency from the blinking strength, `1 / (1 + A)`.
pub fn quantum_efficiency_bound(a_blink: Measured) -> Result<Measured> {
    if !(a_blink.value >= 0.0) {
        return Err(domain(format!("a_blink must be >= 0, got {}", a_blink.value)));
    }
    let d = 1.0 + a_blink.value;
    Ok(Measured::new(1.0 / d, a_blink.sigma / (d * d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn coherence_time_examples() {
        // 1 / (1/515 + 1/1470)
        let t2 = coherence_time(257.5, 1470.0).unwrap();
        assert!(close(t2, 381.385_390_428_2, 1e-6), "{t2}");
        assert_eq!(coherence_time(257.5, f64::INFINITY).unwrap(), 515.0);
        assert!(close(coherence_time(100.0, 100.0).unwrap(), 200.0 / 3.0, 1e-12));
        assert!(coherence_time(0.0, 1.0).is_err());
        assert!(coherence_time(1.0, -1.0).is_err());
    }

    #[test]
    fn pure_dephasing_examples() {
        let t2s = pure_dephasing_time(257.5, 381.4).unwrap();
        assert!(close(t2s, 1470.0, 1.0), "{t2s}");
        assert!(pure_dephasing_time(257.5, 515.0).unwrap().is_infinite());
        assert!(close(pure_dephasing_time(100.0, 200.0 / 3.0).unwrap(), 100.0, 1e-9));
        assert!(pure_dephasing_time(257.5, 515.1).is_err());
    }

    #[test]
    fn pure_dephasing_error_propagation_matches_reported_scale() {
        // T2 = 381 ± 22 → T2* ≈ 1470 ± 3xx
        let m = pure_dephasing_time_measured(Measured::exact(257.5), Measured::new(381.0, 22.0)).unwrap();
        assert!(close(m.value, 1463.0, 10.0), "{m}");
        assert!(m.sigma > 300.0 && m.sigma < 340.0, "{m}");
    }

    #[test]
    fn hom_center_examples() {
        assert_eq!(hom_center_model(0.0, 5.0, 1.0, 257.5, 300.0).unwrap(), 0.0);
        let far = hom_center_model(5000.0, 2.0, 0.7, 257.5, 381.0).unwrap();
        let envelope = 2.0 * (-5000.0f64 / 257.5).exp();
        // the dip has decayed to a sub-percent correction of the envelope
        assert!((far - envelope) < 0.0 && ((far - envelope) / envelope).abs() < 1e-2);
        assert!(hom_center_model(1.0, 1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn hom_center_integral_with_unit_visibility() {
        // Trapezoid on a fine grid against A (2 T1 - T2).
        let (a, t1, t2) = (3.0, 257.5, 381.385);
        let h = 0.05;
        let n = (40.0 * t1 / h) as i64;
        let mut s = 0.0;
        for k in -n..=n {
            let w = if k.abs() == n { 0.5 } else { 1.0 };
            s += w * hom_center_model(k as f64 * h, a, 1.0, t1, t2).unwrap();
        }
        assert!(close(s * h, a * (2.0 * t1 - t2), 1e-3), "{}", s * h);
    }

    #[test]
    fn dip_to_envelope_area_ratio_is_windowed_visibility() {
        // Composite Simpson over +-40 T1 on each half line.
        for &(t1, t2s) in &[(257.5, 1470.0), (48.0, 1470.0), (100.0, 30.0), (500.0, 1e6)] {
            let t2 = coherence_time(t1, t2s).unwrap();
            let n = 400_000;
            let h = 40.0 * t1 / n as f64;
            let (mut model, mut env) = (0.0, 0.0);
            for k in 0..=n {
                let w = if k == 0 || k == n {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let tau = k as f64 * h;
                model += w * hom_center_model(tau, 1.0, 1.0, t1, t2).unwrap();
                env += w * (-tau / t1).exp();
            }
            let v = 1.0 - model / env;
            assert!((v - windowed_visibility(t1, t2).unwrap()).abs() < 1e-6, "({t1},{t2s}): {v}");
        }
    }

    #[test]
    fn windowed_visibility_examples() {
        assert!(close(windowed_visibility(257.5, 380.8).unwrap(), 0.739_417, 1e-6));
        let v48 = windowed_visibility(48.0, coherence_time(48.0, 1470.0).unwrap()).unwrap();
        assert!(close(v48, 1470.0 / 1566.0, 1e-12) && v48 > 0.935);
        assert_eq!(windowed_visibility(100.0, 200.0).unwrap(), 1.0);
        assert!(windowed_visibility(100.0, 201.0).is_err());
    }

    #[test]
    fn purcell_examples() {
        let f = purcell_factor(Measured::new(1210.0, 115.0), Measured::new(257.5, 0.2)).unwrap();
        assert!(close(f.value, 4.70, 0.005) && close(f.sigma, 0.45, 0.005), "{f}");
        assert_eq!(purcell_factor(Measured::exact(300.0), Measured::exact(300.0)).unwrap(), Measured::exact(1.0));
        assert_eq!(purcell_factor(Measured::exact(2000.0), Measured::exact(500.0)).unwrap(), Measured::exact(4.0));
        assert!(purcell_factor(Measured::exact(1.0), Measured::exact(0.0)).is_err());
    }

    #[test]
    fn blinking_envelope_examples() {
        let v = blinking_envelope(1, 1.0, 3.70, 506_000.0, 13_158.0).unwrap();
        assert!(close(v, 1.0 + 3.70 * (-13_158.0f64 / 506_000.0).exp(), 1e-12));
        assert!(close(v, 4.605, 5e-4));
        assert!(close(blinking_envelope(1_000_000, 2.5, 3.7, 506_000.0, 13_158.0).unwrap(), 2.5, 1e-12));
        assert_eq!(blinking_envelope(3, 2.0, 0.0, 10.0, 13_158.0).unwrap(), 2.0);
        assert!(blinking_envelope(1, 1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn efficiency_bound_examples() {
        let eta = quantum_efficiency_bound(Measured::new(3.70, 0.02)).unwrap();
        assert!(close(eta.value, 0.2128, 1e-4) && close(eta.sigma, 0.0009, 5e-5), "{eta}");
        assert_eq!(quantum_efficiency_bound(Measured::exact(0.0)).unwrap(), Measured::exact(1.0));
        assert_eq!(quantum_efficiency_bound(Measured::exact(1.0)).unwrap(), Measured::exact(0.5));
        assert!(quantum_efficiency_bound(Measured::exact(-0.1)).is_err());
    }

    proptest! {
        #[test]
        fn coherence_round_trip(t1 in 1.0f64..5000.0, t2s in 1.0f64..1e6) {
            let t2 = coherence_time(t1, t2s).unwrap();
            prop_assert!(t2 <= 2.0 * t1);
            let back = pure_dephasing_time(t1, t2).unwrap();
            prop_assert!(((back - t2s) / t2s).abs() < 1e-9, "{} vs {}", back, t2s);
        }

        #[test]
        fn coherence_monotone(t1 in 1.0f64..5000.0, x in 1.0f64..1e5, dx in 1e-3f64..1e3) {
            prop_assert!(coherence_time(t1, x + dx).unwrap() > coherence_time(t1, x).unwrap());
        }

        #[test]
        fn visibility_matches_dephasing_form(t1 in 1.0f64..5000.0, t2s in 1.0f64..1e6) {
            let v = windowed_visibility(t1, coherence_time(t1, t2s).unwrap()).unwrap();
            prop_assert!((v - t2s / (t2s + 2.0 * t1)).abs() < 1e-12);
        }

        #[test]
        fn blinking_scale_invariance(m in -400i64..400, a in 0.0f64..10.0, tb in 1e3f64..1e7, rep in 1e3f64..1e5, c in 0.01f64..100.0) {
            let x = blinking_envelope(m, 1.0, a, tb, rep).unwrap();
            let y = blinking_envelope(m, 1.0, a, tb * c, rep * c).unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * x);
        }

        #[test]
        fn blinking_monotone_in_separation(m in 0i64..400, a in 0.0f64..10.0, tb in 1e3f64..1e7) {
            let x = blinking_envelope(m, 1.0, a, tb, 13_158.0).unwrap();
            let y = blinking_envelope(m + 1, 1.0, a, tb, 13_158.0).unwrap();
            prop_assert!(y <= x);
        }
    }
}
