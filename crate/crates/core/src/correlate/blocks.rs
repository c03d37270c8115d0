//! Block resampling for uncertainties that Poisson propagation misses.
//!
//! Blinking makes neighbouring pulses correlated over hundreds of periods,
//! so peak areas from one record fluctuate together and the Poisson errors
//! of ratios such as the windowed visibility come out too small. Cutting the
//! record into long contiguous blocks and jackknifing over them recovers the
//! full variance as long as each block is much longer than the correlation
//! time.

use super::{correlate_slices, CorrConfig, Histogram, PeakEntry, PeakTable};
use crate::analytic::Measured;
use crate::error::{domain, Result};
use crate::tags::TimeTagStream;

/// Coincidence histograms of `n_blocks` contiguous pieces of `a` (equal tag
/// counts, last piece absorbs the remainder), each against all of `b`.
///
/// Every pair is counted in exactly one block, so the blocks sum bin-for-bin
/// to [`cross_correlate`](super::cross_correlate) of the full streams.
pub fn correlate_blocks(
    a: &TimeTagStream,
    b: &TimeTagStream,
    cfg: &CorrConfig,
    n_blocks: usize,
) -> Result<Vec<Histogram>> {
    if n_blocks < 2 {
        return Err(domain("block resampling needs at least 2 blocks"));
    }
    let tags = a.tags();
    let n = tags.len();
    (0..n_blocks).map(|k| correlate_slices(&tags[k * n / n_blocks..(k + 1) * n / n_blocks], b.tags(), cfg)).collect()
}

/// Entry-wise sum of peak tables with identical `m` layout, optionally
/// leaving out table `skip`.
pub fn sum_tables(tables: &[PeakTable], skip: Option<usize>) -> Result<PeakTable> {
    let first = tables.first().ok_or_else(|| domain("no peak tables to sum"))?;
    let mut areas: Vec<u64> = vec![0; first.len()];
    for (i, t) in tables.iter().enumerate() {
        if t.entries.len() != first.len() || t.entries.iter().zip(&first.entries).any(|(x, y)| x.m != y.m) {
            return Err(domain("peak tables cover different m ranges"));
        }
        if Some(i) != skip {
            areas.iter_mut().zip(&t.entries).for_each(|(s, e)| *s += e.area);
        }
    }
    Ok(PeakTable { entries: first.entries.iter().zip(areas).map(|(e, a)| PeakEntry::new(e.m, a)).collect() })
}

/// Delete-one jackknife over `n` blocks.
///
/// `stat(None)` evaluates the statistic on all blocks, `stat(Some(i))` on
/// all but block `i`. Returns the full-data value with the jackknife
/// standard error `sqrt((n-1)/n * sum (x_i - mean)^2)`.
pub fn jackknife(n: usize, stat: impl Fn(Option<usize>) -> Result<f64>) -> Result<Measured> {
    if n < 2 {
        return Err(domain("jackknife needs at least 2 blocks"));
    }
    let full = stat(None)?;
    let loo = (0..n).map(|i| stat(Some(i))).collect::<Result<Vec<f64>>>()?;
    let mean = loo.iter().sum::<f64>() / n as f64;
    let ss: f64 = loo.iter().map(|x| (x - mean).powi(2)).sum();
    Ok(Measured::new(full, ((n as f64 - 1.0) / n as f64 * ss).sqrt()))
}
