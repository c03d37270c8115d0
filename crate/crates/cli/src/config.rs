//! Run configuration files (TOML).
//!
//! ```toml
//! [emitter]
//! t1 = "257.5ps"
//! t2_star = "1470ps"
//! excitation_prob = 1.0
//! target_g2_sidepeak = 0.031   # or contamination_prob = 0.0153
//!
//! [blink]
//! a_blink = 3.70
//! t_blink = "506ns"
//!
//! [clock]
//! rep_period = "13158ps"
//! n_pulses = 20000000
//!
//! [detectors]
//! efficiency = 0.5
//! irf_sigma = "16.1ps"
//!
//! [setup]
//! kind = "hbt"
//!
//! [seed]
//! value = 7
//! ```
//!
//! Every section except `[emitter]`, `[clock]` and `[seed]` may be omitted;
//! unknown keys are rejected.

use crate::duration::Duration;
use crate::error::{CliError, Result};
use photonlab::analytic::{BlinkModel, DetectorModel, EmitterModel, ExcitationClock, Setup};
use photonlab::correlate::CorrConfig;
use photonlab::sim::{calibrate_contamination, derive_seed, SimConfig};
use photonlab::Measured;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub emitter: EmitterSection,
    #[serde(default)]
    pub blink: BlinkSection,
    pub clock: ClockSection,
    #[serde(default)]
    pub detectors: DetectorSection,
    #[serde(default)]
    pub setup: SetupSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub seed: SeedSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    pub t1: Duration,
    #[serde(default = "infinite")]
    pub t2_star: Duration,
    #[serde(default = "one")]
    pub excitation_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contamination_prob: Option<f64>,
    /// Calibrate `contamination_prob` so the simulated HBT side-peak g2
    /// matches this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_g2_sidepeak: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlinkSection {
    #[serde(default)]
    pub a_blink: f64,
    #[serde(default = "one_ps")]
    pub t_blink: Duration,
}

impl Default for BlinkSection {
    fn default() -> Self {
        Self { a_blink: 0.0, t_blink: one_ps() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSection {
    #[serde(default = "default_rep")]
    pub rep_period: Duration,
    pub n_pulses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default = "one")]
    pub efficiency: f64,
    #[serde(default = "zero_ps")]
    pub irf_sigma: Duration,
    /// Dark counts per second.
    #[serde(default)]
    pub dark_rate: f64,
    #[serde(default = "zero_ps")]
    pub dead_time: Duration,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self { efficiency: 1.0, irf_sigma: zero_ps(), dark_rate: 0.0, dead_time: zero_ps() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupSection {
    /// `hbt`, `hom_co` or `hom_cross`; used by `simulate`.
    #[serde(default = "default_kind")]
    pub kind: String,
    /// Short/long Mach-Zehnder arm transmission.
    #[serde(default = "unit_arms")]
    pub arm_transmission: [f64; 2],
}

impl Default for SetupSection {
    fn default() -> Self {
        Self { kind: default_kind(), arm_transmission: unit_arms() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_bin")]
    pub bin_width: Duration,
    #[serde(default = "default_window")]
    pub window: Duration,
    #[serde(default = "default_peak_window")]
    pub peak_window: Duration,
    #[serde(default = "default_bin")]
    pub decay_bin_width: Duration,
    #[serde(default = "default_pre_trigger")]
    pub decay_pre_trigger: Duration,
    /// Contiguous blocks for jackknife errors of peak ratios.
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    /// Reference (bulk) lifetime for the Purcell factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_ref: Option<Duration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_ref_sigma: Option<Duration>,
    #[serde(default = "default_calibration_pulses")]
    pub calibration_pulses: u64,
    #[serde(default = "default_calibration_iterations")]
    pub calibration_iterations: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            bin_width: default_bin(),
            window: default_window(),
            peak_window: default_peak_window(),
            decay_bin_width: default_bin(),
            decay_pre_trigger: default_pre_trigger(),
            blocks: default_blocks(),
            t1_ref: None,
            t1_ref_sigma: None,
            calibration_pulses: default_calibration_pulses(),
            calibration_iterations: default_calibration_iterations(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub value: u64,
}

fn one() -> f64 {
    1.0
}
fn infinite() -> Duration {
    Duration(f64::INFINITY)
}
fn one_ps() -> Duration {
    Duration(1.0)
}
fn zero_ps() -> Duration {
    Duration(0.0)
}
fn default_rep() -> Duration {
    Duration(ExcitationClock::DEFAULT_REP_PERIOD as f64)
}
fn default_kind() -> String {
    "hbt".into()
}
fn unit_arms() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_bin() -> Duration {
    Duration(50.0)
}
fn default_window() -> Duration {
    Duration(5_000_000.0)
}
fn default_peak_window() -> Duration {
    Duration(3000.0)
}
fn default_pre_trigger() -> Duration {
    Duration(2000.0)
}
fn default_blocks() -> usize {
    32
}
fn default_calibration_pulses() -> u64 {
    2_000_000
}
fn default_calibration_iterations() -> usize {
    12
}

/// Salt for the contamination calibration probe runs.
const SALT_CALIBRATION: u64 = 100;

fn whole(name: &str, d: Duration) -> Result<i64> {
    let ps = d.whole_ps().map_err(|e| CliError::Format(format!("{name}: {e}")))?;
    i64::try_from(ps).map_err(|_| CliError::Format(format!("{name}: {ps} ps is too large")))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Format(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Format(msg) => CliError::Format(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok((cfg, text))
    }

    fn validate(&self) -> Result<()> {
        let e = &self.emitter;
        if e.contamination_prob.is_some() && e.target_g2_sidepeak.is_some() {
            return Err(CliError::Format(
                "invalid config: emitter.contamination_prob and emitter.target_g2_sidepeak are mutually exclusive"
                    .into(),
            ));
        }
        self.setup()?;
        let cfg = self.sim_config(0.0)?;
        cfg.validate().map_err(|e| CliError::Format(format!("invalid config: {e}")))?;
        self.corr_config()?.validate().map_err(|e| CliError::Format(format!("invalid config: analysis: {e}")))?;
        whole("analysis.decay_bin_width", self.analysis.decay_bin_width)?;
        whole("analysis.decay_pre_trigger", self.analysis.decay_pre_trigger)?;
        if self.analysis.blocks < 2 {
            return Err(CliError::Format("invalid config: analysis.blocks must be >= 2".into()));
        }
        if self.analysis.t1_ref_sigma.is_some() && self.analysis.t1_ref.is_none() {
            return Err(CliError::Format("invalid config: analysis.t1_ref_sigma given without analysis.t1_ref".into()));
        }
        Ok(())
    }

    pub fn setup(&self) -> Result<Setup> {
        self.setup.kind.parse().map_err(|e| CliError::Format(format!("invalid config: setup.kind: {e}")))
    }

    pub fn rep_period(&self) -> Result<u64> {
        Ok(whole("clock.rep_period", self.clock.rep_period)? as u64)
    }

    /// Simulation parameters with the given contamination probability.
    pub fn sim_config(&self, contamination_prob: f64) -> Result<SimConfig> {
        let e = &self.emitter;
        let d = &self.detectors;
        let det = DetectorModel {
            efficiency: d.efficiency,
            irf_sigma: d.irf_sigma.ps(),
            dark_rate: d.dark_rate,
            dead_time: d.dead_time.ps(),
        };
        Ok(SimConfig {
            emitter: EmitterModel {
                t1: e.t1.ps(),
                t2_star: e.t2_star.ps(),
                excitation_prob: e.excitation_prob,
                contamination_prob,
                blink: BlinkModel { a_blink: self.blink.a_blink, t_blink: self.blink.t_blink.ps() },
            },
            clock: ExcitationClock { rep_period: self.rep_period()?, n_pulses: self.clock.n_pulses },
            setup: self.setup()?,
            detectors: [det; 2],
            arm_transmission: self.setup.arm_transmission,
            seed: self.seed.value,
        })
    }

    /// Contamination probability: given directly, or calibrated by short
    /// HBT probe runs when `target_g2_sidepeak` is set.
    pub fn contamination(&self) -> Result<f64> {
        match (self.emitter.contamination_prob, self.emitter.target_g2_sidepeak) {
            (Some(p), _) => Ok(p),
            (None, None) => Ok(0.0),
            (None, Some(target)) => {
                let mut probe = self.sim_config(0.0)?;
                probe.seed = derive_seed(self.seed.value, SALT_CALIBRATION);
                Ok(calibrate_contamination(
                    &probe,
                    target,
                    self.analysis.calibration_pulses,
                    self.analysis.calibration_iterations,
                )?)
            }
        }
    }

    pub fn corr_config(&self) -> Result<CorrConfig> {
        let a = &self.analysis;
        Ok(CorrConfig {
            bin_width: whole("analysis.bin_width", a.bin_width)?,
            window: whole("analysis.window", a.window)?,
            peak_window: whole("analysis.peak_window", a.peak_window)?,
        })
    }

    pub fn t1_ref(&self) -> Option<Measured> {
        let a = &self.analysis;
        a.t1_ref.map(|t| Measured::new(t.ps(), a.t1_ref_sigma.map_or(0.0, |s| s.ps())))
    }

    pub fn decay_binning(&self) -> Result<(i64, i64)> {
        Ok((
            whole("analysis.decay_bin_width", self.analysis.decay_bin_width)?,
            whole("analysis.decay_pre_trigger", self.analysis.decay_pre_trigger)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[emitter]\nt1 = \"257.5ps\"\n[clock]\nn_pulses = 10\n[seed]\nvalue = 1\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        let sim = cfg.sim_config(0.0).unwrap();
        assert_eq!(sim.clock.rep_period, 13158);
        assert!(sim.emitter.t2_star.is_infinite());
        assert_eq!(sim.setup, Setup::Hbt);
        assert_eq!(cfg.corr_config().unwrap(), CorrConfig::default());
        assert_eq!(cfg.contamination().unwrap(), 0.0);
    }

    #[test]
    fn durations_accept_units() {
        let text = MINIMAL.replace("n_pulses = 10", "n_pulses = 10\nrep_period = \"13.158ns\"")
            + "[blink]\na_blink = 3.7\nt_blink = \"0.506us\"\n";
        let sim = RunConfig::from_toml(&text).unwrap().sim_config(0.0).unwrap();
        assert_eq!(sim.clock.rep_period, 13158);
        assert_eq!(sim.emitter.blink.t_blink, 506_000.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = MINIMAL.replace("[clock]", "t3 = 5\n[clock]");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("t3") && err.contains("line 3"), "{err}");
        let err = RunConfig::from_toml(&(MINIMAL.to_owned() + "[extra]\nx = 1\n")).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn invalid_values_are_format_errors() {
        for (from, to) in [
            ("n_pulses = 10", "n_pulses = 10\nrep_period = \"0.5ps\""),
            ("t1 = \"257.5ps\"", "t1 = \"257.5ps\"\nexcitation_prob = 1.5"),
            ("t1 = \"257.5ps\"", "t1 = \"257.5ps\"\ncontamination_prob = 0.1\ntarget_g2_sidepeak = 0.03"),
            ("value = 1", "value = 1\n[setup]\nkind = \"mzi\""),
            ("t1 = \"257.5ps\"", "t1 = \"257.5fs\""),
        ] {
            let err = RunConfig::from_toml(&MINIMAL.replace(from, to)).unwrap_err();
            assert_eq!(err.exit_code(), 3, "{to}: {err}");
        }
    }

    #[test]
    fn serialized_config_parses_back() {
        let text = MINIMAL.to_owned() + "[analysis]\nt1_ref = \"1.21ns\"\nt1_ref_sigma = \"115ps\"\n";
        let cfg = RunConfig::from_toml(&text).unwrap();
        let again = RunConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.t1_ref(), Some(Measured::new(1210.0, 115.0)));
    }
}
