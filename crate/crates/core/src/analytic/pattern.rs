use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Measurement geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    /// Single 50:50 beamsplitter with one detector per output.
    Hbt,
    /// Unbalanced Mach-Zehnder, co-polarized arms (photons can interfere).
    HomCo,
    /// Unbalanced Mach-Zehnder, cross-polarized arms (fully distinguishable).
    HomCross,
}

impl Setup {
    pub fn as_str(&self) -> &'static str {
        match self {
            Setup::Hbt => "hbt",
            Setup::HomCo => "hom_co",
            Setup::HomCross => "hom_cross",
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hbt" => Ok(Setup::Hbt),
            "hom_co" => Ok(Setup::HomCo),
            "hom_cross" => Ok(Setup::HomCross),
            other => Err(domain(format!("unknown setup '{other}' (expected hbt, hom_co or hom_cross)"))),
        }
    }
}

/// Ideal (blinking-free, lossless) coincidence peak area at separation `m`,
/// normalized to the uncorrelated level.
///
/// For the HOM geometries the value is obtained by enumerating the arm
/// choices of every pulse that can feed the two output slots: slot `j`
/// collects pulse `j` through the short arm and pulse `j - 1` through the
/// long arm. Cross-slot coincidences only depend on the photon numbers
/// (each photon leaves by either port with probability 1/2); same-slot
/// coincidences need two photons that leave by different ports, which has
/// probability `1/2` for distinguishable photons and `(1 - hom_vis)/2` for
/// co-polarized ones. `g2_zero` scales the HBT centre peak.
pub fn expected_peak_pattern(setup: Setup, m: i64, g2_zero: f64, hom_vis: f64) -> Result<f64> {
    match setup {
        Setup::Hbt => Ok(if m == 0 { g2_zero } else { 1.0 }),
        Setup::HomCo => Ok(enumerate_umzi(m, 0.5 * (1.0 - hom_vis)) / UNCORRELATED),
        Setup::HomCross => Ok(enumerate_umzi(m, 0.5) / UNCORRELATED),
    }
}

/// Far-peak value of `E[n_port0(slot 0) n_port1(slot m)]` for one photon per pulse.
const UNCORRELATED: f64 = 0.25;

fn enumerate_umzi(m: i64, p_split: f64) -> f64 {
    // Pulses feeding slots 0 and m: {-1, 0, m-1, m}. Deduplicate so a pulse
    // shared between the slots gets a single arm choice.
    let mut pulses = vec![-1, 0, m - 1, m];
    pulses.sort_unstable();
    pulses.dedup();
    let n = pulses.len();
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        // bit set => long arm
        let long = |p: i64| -> bool {
            let i = pulses.iter().position(|&q| q == p).expect("pulse enumerated");
            mask & (1 << i) != 0
        };
        let photons_in = |slot: i64| -> u32 { u32::from(!long(slot)) + u32::from(long(slot - 1)) };
        let value = if m == 0 {
            if photons_in(0) == 2 {
                p_split
            } else {
                0.0
            }
        } else {
            0.25 * f64::from(photons_in(0)) * f64::from(photons_in(m))
        };
        total += value;
    }
    total / f64::from(1u32 << n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_pattern_values() {
        assert_eq!(expected_peak_pattern(Setup::HomCross, 0, 0.0, 0.0).unwrap(), 0.5);
        assert_eq!(expected_peak_pattern(Setup::HomCross, 1, 0.0, 0.0).unwrap(), 0.75);
        assert_eq!(expected_peak_pattern(Setup::HomCross, -1, 0.0, 0.0).unwrap(), 0.75);
        assert_eq!(expected_peak_pattern(Setup::Hbt, 0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(expected_peak_pattern(Setup::Hbt, 0, 0.03, 0.0).unwrap(), 0.03);
        for m in [2, -2, 3, 17, -40] {
            assert_eq!(expected_peak_pattern(Setup::HomCo, m, 0.0, 0.7).unwrap(), 1.0);
            assert_eq!(expected_peak_pattern(Setup::HomCross, m, 0.0, 0.0).unwrap(), 1.0);
            assert_eq!(expected_peak_pattern(Setup::Hbt, m, 0.0, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn co_polarized_centre_scales_with_visibility() {
        assert_eq!(expected_peak_pattern(Setup::HomCo, 0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(expected_peak_pattern(Setup::HomCo, 0, 0.0, 0.0).unwrap(), 0.5);
        let v = 0.74;
        assert!((expected_peak_pattern(Setup::HomCo, 0, 0.0, v).unwrap() - 0.5 * (1.0 - v)).abs() < 1e-15);
        assert_eq!(expected_peak_pattern(Setup::HomCo, 1, 0.0, v).unwrap(), 0.75);
    }

    #[test]
    fn setup_tags() {
        for s in [Setup::Hbt, Setup::HomCo, Setup::HomCross] {
            assert_eq!(s.as_str().parse::<Setup>().unwrap(), s);
        }
        assert!("mzi".parse::<Setup>().is_err());
    }
}
