//! Monte-Carlo generation of time-tag records.
//!
//! The pipeline is blink trace → photon emission → interferometer routing →
//! detector model. Every stage draws from its own ChaCha8 sub-stream, keyed
//! by the master seed and a block index, so results do not depend on thread
//! count or evaluation order.

mod blink;
mod detector;
mod emit;
mod rng;
mod route;

pub use blink::simulate_blink_trace;
pub use detector::apply_detector;
pub use emit::{emit_photons, PhotonEvent};
pub use rng::derive_seed;
pub use route::{route_hbt, route_hom, HomSetup, Polarization};

use crate::analytic::{DetectorModel, EmitterModel, ExcitationClock, Setup};
use crate::correlate::{cross_correlate, g2_sidepeak, integrate_peaks, CorrConfig};
use crate::error::{domain, Result};
use crate::tags::TimeTagStream;

/// Everything needed to produce one two-channel record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub emitter: EmitterModel,
    pub clock: ExcitationClock,
    pub setup: Setup,
    pub detectors: [DetectorModel; 2],
    /// Short/long arm transmission of the Mach-Zehnder (HOM setups only).
    pub arm_transmission: [f64; 2],
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        self.clock.validate()?;
        for d in &self.detectors {
            d.validate()?;
        }
        if self.arm_transmission.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(domain("arm transmissions must lie in [0, 1]"));
        }
        Ok(())
    }
}

const SALT_BLINK: u64 = 1;
const SALT_EMIT: u64 = 2;
const SALT_ROUTE: u64 = 3;

/// Runs blink → emit → route for `cfg`. Identical configs give identical streams.
pub fn run_experiment(cfg: &SimConfig) -> Result<(TimeTagStream, TimeTagStream)> {
    cfg.validate()?;
    let trace = simulate_blink_trace(&cfg.clock, &cfg.emitter.blink, derive_seed(cfg.seed, SALT_BLINK))?;
    let photons = emit_photons(&trace, &cfg.emitter, &cfg.clock, derive_seed(cfg.seed, SALT_EMIT))?;
    drop(trace);
    let route_seed = derive_seed(cfg.seed, SALT_ROUTE);
    match cfg.setup {
        Setup::Hbt => route_hbt(&photons, &cfg.detectors, &cfg.clock, route_seed),
        Setup::HomCo | Setup::HomCross => {
            let setup = HomSetup {
                polarization: if cfg.setup == Setup::HomCo { Polarization::Co } else { Polarization::Cross },
                t2_star: cfg.emitter.t2_star,
                arm_transmission: cfg.arm_transmission,
            };
            route_hom(&photons, &setup, &cfg.detectors, &cfg.clock, route_seed)
        }
    }
}

/// Expected HBT side-peak g2 for a given contamination probability.
///
/// With on-probability `beta`, excitation probability `p`, per-emission
/// extra-photon probability `eps` and first-neighbour blinking bunching
/// `f1 = 1 + A exp(-rep/T_blink)`:
/// `g2 = 2 eps / (beta p f1 (1 + eps)^2)`.
pub fn expected_g2_sidepeak(emitter: &EmitterModel, rep_period: u64, eps: f64) -> f64 {
    let beta = emitter.blink.on_probability();
    let f1 = 1.0 + emitter.blink.a_blink * (-(rep_period as f64) / emitter.blink.t_blink).exp();
    2.0 * eps / (beta * emitter.excitation_prob * f1 * (1.0 + eps).powi(2))
}

/// Inverts [`expected_g2_sidepeak`] (smaller root).
pub fn contamination_for_g2(emitter: &EmitterModel, rep_period: u64, target: f64) -> Result<f64> {
    if !(target >= 0.0) {
        return Err(domain("target g2 must be >= 0"));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    // target (1+e)^2 = k e, k = g2(e) (1+e)^2 / e
    let k = expected_g2_sidepeak(emitter, rep_period, 1.0) * 4.0;
    let b = k - 2.0 * target;
    let disc = b * b - 4.0 * target * target;
    if disc < 0.0 || b <= 0.0 {
        return Err(domain(format!("g2 = {target} is not reachable with this emitter")));
    }
    let eps = (b - disc.sqrt()) / (2.0 * target);
    if eps > 1.0 {
        return Err(domain(format!("g2 = {target} needs contamination probability {eps} > 1")));
    }
    Ok(eps)
}

/// Calibrates `contamination_prob` so that the simulated HBT side-peak g2
/// matches `target`.
///
/// Starts from the analytic inverse, then bisects on short simulated runs
/// (`probe_pulses` pulses, fixed seed) over `[0, 2 eps0]`.
pub fn calibrate_contamination(cfg: &SimConfig, target: f64, probe_pulses: u64, iterations: usize) -> Result<f64> {
    let eps0 = contamination_for_g2(&cfg.emitter, cfg.clock.rep_period, target)?;
    if eps0 == 0.0 || iterations == 0 {
        return Ok(eps0);
    }
    let rep = cfg.clock.rep_period as i64;
    let corr = CorrConfig { bin_width: 50, window: 2 * rep, peak_window: 3000 };
    let measure = |eps: f64| -> Result<f64> {
        let mut probe = *cfg;
        probe.setup = Setup::Hbt;
        probe.clock.n_pulses = probe_pulses;
        probe.emitter.contamination_prob = eps;
        let (a, b) = run_experiment(&probe)?;
        let h = cross_correlate(&a, &b, &corr)?;
        let peaks = integrate_peaks(&h, rep, corr.peak_window, 1)?;
        Ok(g2_sidepeak(&peaks)?.value)
    };
    let (mut lo, mut hi) = (0.0, (2.0 * eps0).min(1.0));
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if measure(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
