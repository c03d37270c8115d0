use super::detector::detect;
use super::emit::PhotonEvent;
use super::rng::{derive_seed, substream, Stage, BLOCK};
use crate::analytic::{DetectorModel, ExcitationClock};
use crate::error::{domain, Result};
use crate::tags::TimeTagStream;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Co,
    Cross,
}

/// Per-channel detector seeds derived from one routing seed.
fn detector_seed(seed: u64, channel: u16) -> u64 {
    derive_seed(seed, 0xDE7E_C700 + u64::from(channel))
}

/// HBT: every photon picks an output port with probability 1/2.
pub fn route_hbt(
    photons: &[PhotonEvent],
    detectors: &[DetectorModel; 2],
    clock: &ExcitationClock,
    seed: u64,
) -> Result<(TimeTagStream, TimeTagStream)> {
    let rep = clock.rep_period;
    let ports: Vec<(Vec<f64>, Vec<f64>)> = photons
        .par_chunks(BLOCK)
        .enumerate()
        .map(|(b, chunk)| {
            let mut rng = substream(seed, Stage::RouteHbt, b as u64);
            let mut p0 = Vec::with_capacity(chunk.len() / 2 + 1);
            let mut p1 = Vec::with_capacity(chunk.len() / 2 + 1);
            for ph in chunk {
                let t = ph.emission_time(rep);
                if rng.random::<bool>() {
                    p1.push(t);
                } else {
                    p0.push(t);
                }
            }
            (p0, p1)
        })
        .collect();
    finish(ports, detectors, clock, seed)
}

/// Configuration of the unbalanced Mach-Zehnder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomSetup {
    pub polarization: Polarization,
    /// Pure dephasing time of the source (ps); sets the interference law.
    pub t2_star: f64,
    /// Transmission of the short and long arm.
    pub arm_transmission: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    time: f64,
    slot: i64,
    distinguishable: bool,
}

/// Unbalanced Mach-Zehnder with a one-period delay followed by a 50:50
/// beamsplitter.
///
/// Photons are grouped by arrival slot (nearest multiple of the period).
/// A slot with two indistinguishable, co-polarized photons sends them to
/// different ports with probability `(1 - exp(-2 |dt| / T2*)) / 2`; any
/// other pair does so with probability 1/2. With three or more photons the
/// closest pair follows that rule and the rest are routed independently.
pub fn route_hom(
    photons: &[PhotonEvent],
    setup: &HomSetup,
    detectors: &[DetectorModel; 2],
    clock: &ExcitationClock,
    seed: u64,
) -> Result<(TimeTagStream, TimeTagStream)> {
    if !(setup.t2_star > 0.0) {
        return Err(domain("t2_star must be > 0"));
    }
    if setup.arm_transmission.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(domain("arm transmissions must lie in [0, 1]"));
    }
    let rep = clock.rep_period as f64;

    let mut inflight: Vec<InFlight> = photons
        .par_chunks(BLOCK)
        .enumerate()
        .map(|(b, chunk)| {
            let mut rng = substream(seed, Stage::HomArm, b as u64);
            let mut out = Vec::with_capacity(chunk.len());
            for ph in chunk {
                let [u_arm, u_loss]: [f64; 2] = rng.random();
                let long = u_arm < 0.5;
                if u_loss >= setup.arm_transmission[usize::from(long)] {
                    continue;
                }
                let time = ph.emission_time(clock.rep_period) + if long { rep } else { 0.0 };
                // Nearest period; exact half-period ties go to the earlier slot.
                let slot = ((time - 0.5 * rep) / rep).ceil() as i64;
                out.push(InFlight { time, slot, distinguishable: ph.distinguishable });
            }
            out
        })
        .collect::<Vec<_>>()
        .concat();
    inflight.par_sort_by(|a, b| a.slot.cmp(&b.slot).then(a.time.total_cmp(&b.time)));

    // Split into runs of slots sharing one random stream.
    let mut bounds = vec![0];
    for i in 1..inflight.len() {
        if inflight[i].slot.div_euclid(BLOCK as i64) != inflight[i - 1].slot.div_euclid(BLOCK as i64) {
            bounds.push(i);
        }
    }
    bounds.push(inflight.len());
    let runs: Vec<&[InFlight]> = bounds.windows(2).map(|w| &inflight[w[0]..w[1]]).filter(|r| !r.is_empty()).collect();

    let co = setup.polarization == Polarization::Co;
    let ports: Vec<(Vec<f64>, Vec<f64>)> = runs
        .par_iter()
        .map(|run| {
            let block = run[0].slot.div_euclid(BLOCK as i64) as u64;
            let mut rng = substream(seed, Stage::HomPort, block);
            let mut p = (Vec::with_capacity(run.len() / 2 + 1), Vec::with_capacity(run.len() / 2 + 1));
            let push = |port: bool, t: f64, p: &mut (Vec<f64>, Vec<f64>)| {
                if port {
                    p.1.push(t)
                } else {
                    p.0.push(t)
                }
            };
            for group in run.chunk_by(|a, b| a.slot == b.slot) {
                if group.len() == 1 {
                    push(rng.random::<bool>(), group[0].time, &mut p);
                    continue;
                }
                // Closest pair in time is adjacent after sorting.
                let k = (0..group.len() - 1)
                    .min_by(|&i, &j| {
                        (group[i + 1].time - group[i].time).total_cmp(&(group[j + 1].time - group[j].time))
                    })
                    .expect("group has two photons");
                let (a, b) = (group[k], group[k + 1]);
                let p_split = if co && !a.distinguishable && !b.distinguishable {
                    0.5 * (1.0 - (-2.0 * (b.time - a.time).abs() / setup.t2_star).exp())
                } else {
                    0.5
                };
                let [u_split, u_port]: [f64; 2] = rng.random();
                let first_port = u_port < 0.5;
                push(first_port, a.time, &mut p);
                push(if u_split < p_split { !first_port } else { first_port }, b.time, &mut p);
                for (i, extra) in group.iter().enumerate() {
                    if i != k && i != k + 1 {
                        push(rng.random::<bool>(), extra.time, &mut p);
                    }
                }
            }
            p
        })
        .collect();
    finish(ports, detectors, clock, seed)
}

fn finish(
    ports: Vec<(Vec<f64>, Vec<f64>)>,
    detectors: &[DetectorModel; 2],
    clock: &ExcitationClock,
    seed: u64,
) -> Result<(TimeTagStream, TimeTagStream)> {
    let (p0, p1): (Vec<Vec<f64>>, Vec<Vec<f64>>) = ports.into_iter().unzip();
    let span = clock.span();
    let ch0 = detect(&p0.concat(), &detectors[0], span, detector_seed(seed, 0), 0)?;
    let ch1 = detect(&p1.concat(), &detectors[1], span, detector_seed(seed, 1), 1)?;
    Ok((ch0, ch1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(offset_a: f64, offset_b: f64, distinguishable: bool) -> Vec<PhotonEvent> {
        // Pulse 0 long arm meets pulse 1 short arm in slot 1 only when the
        // arm draws cooperate, so construct many independent pulse pairs.
        (0..200_000u64)
            .flat_map(|k| {
                [
                    PhotonEvent { pulse_index: 4 * k, emit_offset: offset_a, distinguishable: false },
                    PhotonEvent { pulse_index: 4 * k + 1, emit_offset: offset_b, distinguishable },
                ]
            })
            .collect()
    }

    fn same_slot_coincidences(a: &TimeTagStream, b: &TimeTagStream, rep: u64) -> usize {
        let slots: std::collections::HashSet<u64> = a.tags().iter().map(|t| (t + rep / 2) / rep).collect();
        b.tags().iter().filter(|t| slots.contains(&((*t + rep / 2) / rep))).count()
    }

    #[test]
    fn fourier_limited_photons_always_bunch() {
        let clock = ExcitationClock::new(800_000);
        let photons = pair(100.0, 100.0, false);
        let setup = HomSetup { polarization: Polarization::Co, t2_star: f64::INFINITY, arm_transmission: [1.0, 1.0] };
        let (a, b) = route_hom(&photons, &setup, &[DetectorModel::IDEAL; 2], &clock, 17).unwrap();
        assert_eq!(same_slot_coincidences(&a, &b, clock.rep_period), 0);
        // Bunched pairs arrive together at one detector and register once;
        // a quarter of the 400k photon pairs meet in one slot.
        let lost = (photons.len() - a.len() - b.len()) as f64;
        assert!((lost - 50_000.0).abs() < 4.0 * 50_000f64.sqrt(), "{lost}");
    }

    #[test]
    fn distinguishable_pairs_split_half_the_time() {
        let clock = ExcitationClock::new(800_000);
        let rep = clock.rep_period;
        for (pol, dist) in [(Polarization::Cross, false), (Polarization::Co, true)] {
            let photons = pair(100.0, 100.0, dist);
            let setup = HomSetup { polarization: pol, t2_star: f64::INFINITY, arm_transmission: [1.0, 1.0] };
            let (a, b) = route_hom(&photons, &setup, &[DetectorModel::IDEAL; 2], &clock, 5).unwrap();
            // 200k pulse pairs, 1/4 meet in one slot, half of those split.
            let c = same_slot_coincidences(&a, &b, rep) as f64;
            let expect = 200_000.0 * 0.25 * 0.5;
            assert!((c - expect).abs() < 4.0 * expect.sqrt(), "{pol:?}: {c} vs {expect}");
        }
    }

    #[test]
    fn arm_loss_removes_photons() {
        let clock = ExcitationClock::new(800_000);
        let photons = pair(10.0, 10.0, false);
        let setup = HomSetup { polarization: Polarization::Cross, t2_star: 1000.0, arm_transmission: [1.0, 0.0] };
        let (a, b) = route_hom(&photons, &setup, &[DetectorModel::IDEAL; 2], &clock, 5).unwrap();
        let n = (a.len() + b.len()) as f64;
        assert!((n / photons.len() as f64 - 0.5).abs() < 0.01);
        // every surviving photon took the short arm, so it sits at its own pulse slot
        assert!(a.tags().iter().chain(b.tags()).all(|t| t % rep_of(&clock) == 10));
    }

    fn rep_of(c: &ExcitationClock) -> u64 {
        c.rep_period
    }

    #[test]
    fn single_photons_never_coincide_in_hbt() {
        let clock = ExcitationClock::new(100_000);
        let photons: Vec<PhotonEvent> =
            (0..100_000).map(|k| PhotonEvent { pulse_index: k, emit_offset: 50.0, distinguishable: false }).collect();
        let (a, b) = route_hbt(&photons, &[DetectorModel::IDEAL; 2], &clock, 2).unwrap();
        assert_eq!(a.len() + b.len(), 100_000);
        assert_eq!(same_slot_coincidences(&a, &b, clock.rep_period), 0);
    }
}
