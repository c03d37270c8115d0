use super::rng::{substream, Stage, BLOCK};
use crate::analytic::{EmitterModel, ExcitationClock};
use crate::error::{domain, Result};
use rand::Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonEvent {
    pub pulse_index: u64,
    /// Delay after the excitation pulse (ps).
    pub emit_offset: f64,
    /// Contamination photons never interfere.
    pub distinguishable: bool,
}

impl PhotonEvent {
    pub fn emission_time(&self, rep_period: u64) -> f64 {
        (self.pulse_index * rep_period) as f64 + self.emit_offset
    }
}

/// Emits photons for every bright pulse.
///
/// Each pulse consumes exactly four uniforms (excitation, primary delay,
/// contamination, extra delay) whether or not it emits, so changing a
/// probability leaves the remaining randomness untouched.
pub fn emit_photons(
    trace: &[bool],
    emitter: &EmitterModel,
    clock: &ExcitationClock,
    seed: u64,
) -> Result<Vec<PhotonEvent>> {
    emitter.validate()?;
    if trace.len() as u64 != clock.n_pulses {
        return Err(domain(format!("trace has {} pulses, clock has {}", trace.len(), clock.n_pulses)));
    }
    let t1 = emitter.t1;
    let blocks: Vec<Vec<PhotonEvent>> = trace
        .par_chunks(BLOCK)
        .enumerate()
        .map(|(b, chunk)| {
            let mut rng = substream(seed, Stage::Emit, b as u64);
            let mut out = Vec::new();
            for (i, &on) in chunk.iter().enumerate() {
                let u: [f64; 4] = rng.random();
                if !on || u[0] >= emitter.excitation_prob {
                    continue;
                }
                let pulse_index = (b * BLOCK + i) as u64;
                out.push(PhotonEvent { pulse_index, emit_offset: exponential(u[1], t1), distinguishable: false });
                if u[2] < emitter.contamination_prob {
                    out.push(PhotonEvent { pulse_index, emit_offset: exponential(u[3], t1), distinguishable: true });
                }
            }
            out
        })
        .collect();
    Ok(blocks.concat())
}

/// Inverse-CDF exponential sample from a uniform in [0, 1).
#[inline]
pub(crate) fn exponential(u: f64, mean: f64) -> f64 {
    -mean * (-u).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::BlinkModel;

    fn emitter(p: f64, eps: f64) -> EmitterModel {
        EmitterModel {
            t1: 257.5,
            t2_star: 1470.0,
            excitation_prob: p,
            contamination_prob: eps,
            blink: BlinkModel::NONE,
        }
    }

    #[test]
    fn zero_excitation_is_dark() {
        let clock = ExcitationClock::new(10_000);
        let trace = vec![true; 10_000];
        assert!(emit_photons(&trace, &emitter(0.0, 0.5), &clock, 1).unwrap().is_empty());
    }

    #[test]
    fn off_pulses_emit_nothing() {
        let clock = ExcitationClock::new(1000);
        let trace: Vec<bool> = (0..1000).map(|i| i % 3 == 0).collect();
        let ph = emit_photons(&trace, &emitter(1.0, 0.0), &clock, 1).unwrap();
        assert_eq!(ph.len(), 334);
        assert!(ph.iter().all(|p| p.pulse_index % 3 == 0));
    }

    #[test]
    fn no_contamination_means_single_photons() {
        let clock = ExcitationClock::new(200_000);
        let ph = emit_photons(&vec![true; 200_000], &emitter(0.8, 0.0), &clock, 5).unwrap();
        assert!(ph.windows(2).all(|w| w[0].pulse_index < w[1].pulse_index));
        assert!(ph.iter().all(|p| !p.distinguishable));
    }

    #[test]
    fn mean_delay_is_lifetime() {
        let n = 1_200_000;
        let clock = ExcitationClock::new(n);
        let ph = emit_photons(&vec![true; n as usize], &emitter(1.0, 0.0), &clock, 9).unwrap();
        assert_eq!(ph.len(), n as usize);
        let mean = ph.iter().map(|p| p.emit_offset).sum::<f64>() / n as f64;
        // standard error 257.5 / sqrt(1.2e6) = 0.235 ps
        assert!((mean - 257.5).abs() < 4.0 * 0.235, "{mean}");
    }

    #[test]
    fn contamination_rate() {
        let n = 400_000u64;
        let clock = ExcitationClock::new(n);
        let ph = emit_photons(&vec![true; n as usize], &emitter(0.5, 0.1), &clock, 2).unwrap();
        let extra = ph.iter().filter(|p| p.distinguishable).count() as f64;
        let primary = ph.len() as f64 - extra;
        assert!((extra / primary - 0.1).abs() < 4.0 * (0.09f64 / primary).sqrt());
    }
}
