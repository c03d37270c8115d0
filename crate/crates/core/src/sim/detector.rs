use super::rng::{substream, Stage, BLOCK};
use crate::analytic::DetectorModel;
use crate::error::Result;
use crate::tags::{check_strictly_increasing, TimeTagStream};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

/// Passes a tag stream through a detector: efficiency thinning, Gaussian
/// timing jitter, dark counts over `[0, total_span)`, re-sorting and dead time.
pub fn apply_detector(
    stream: &TimeTagStream,
    det: &DetectorModel,
    total_span: u64,
    seed: u64,
) -> Result<TimeTagStream> {
    check_strictly_increasing(stream.tags())?;
    let arrivals: Vec<f64> = stream.tags().iter().map(|&t| t as f64).collect();
    detect(&arrivals, det, total_span, seed, stream.channel)
}

/// Detector model on exact (sub-picosecond) optical arrival times.
///
/// Arrivals may come in any order; the order only determines which random
/// numbers each photon sees.
pub(crate) fn detect(
    arrivals: &[f64],
    det: &DetectorModel,
    total_span: u64,
    seed: u64,
    channel: u16,
) -> Result<TimeTagStream> {
    det.validate()?;
    let mut tags: Vec<i64> = arrivals
        .par_chunks(BLOCK)
        .enumerate()
        .map(|(b, chunk)| {
            let mut rng = substream(seed, Stage::Detector, b as u64);
            let mut out = Vec::with_capacity(chunk.len());
            for &t in chunk {
                let keep = rng.random::<f64>() < det.efficiency;
                let jitter: f64 = StandardNormal.sample(&mut rng);
                if keep {
                    out.push((t + det.irf_sigma * jitter).round() as i64);
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .concat();

    let expected_dark = det.dark_rate * total_span as f64 * 1e-12;
    if expected_dark > 0.0 {
        let mut rng = substream(seed, Stage::Dark, 0);
        let n = Poisson::new(expected_dark).map(|p| p.sample(&mut rng)).unwrap_or(0.0) as u64;
        tags.extend((0..n).map(|_| (rng.random::<f64>() * total_span as f64).floor() as i64));
    }

    tags.par_sort_unstable();
    let mut out = Vec::with_capacity(tags.len());
    let mut last: Option<u64> = None;
    for t in tags {
        if t < 0 {
            continue;
        }
        let t = t as u64;
        let accept = match last {
            None => true,
            Some(prev) => t > prev && (t - prev) as f64 >= det.dead_time,
        };
        if accept {
            out.push(t);
            last = Some(t);
        }
    }
    Ok(TimeTagStream::from_sorted_unchecked(channel, out))
}
