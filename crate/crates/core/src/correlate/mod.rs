//! Coincidence histograms from pairs of time-tag streams, and the peak
//! statistics derived from them.

mod blocks;
mod peaks;

pub use blocks::{correlate_blocks, jackknife, sum_tables};

pub use peaks::{
    g2_poisson, g2_sidepeak, hom_visibility_windowed, integrate_peaks, poisson_level, PeakEntry, PeakTable,
};

use crate::error::{domain, Result};
use crate::tags::{check_sorted, TimeTagStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Binning for [`cross_correlate`] and [`integrate_peaks`] (all in ps).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrConfig {
    pub bin_width: i64,
    /// Half-width of the delay window.
    pub window: i64,
    /// Integration width around each coincidence peak.
    pub peak_window: i64,
}

impl Default for CorrConfig {
    fn default() -> Self {
        Self { bin_width: 50, window: 5_000_000, peak_window: 3000 }
    }
}

impl CorrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bin_width <= 0 || self.window < 0 || self.peak_window <= 0 {
            return Err(domain(format!("invalid correlation config {self:?}")));
        }
        Ok(())
    }
}

/// Coincidence counts over the delay `tau = t_b - t_a`.
///
/// Bin `k` (relative to the centre) holds delays in
/// `[k w - w/2, k w + w/2)`, so the centre bin straddles zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub bin_width: i64,
    pub window: i64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(bin_width: i64, window: i64) -> Result<Self> {
        if bin_width <= 0 || window < 0 {
            return Err(domain("histogram needs bin_width > 0 and window >= 0"));
        }
        let half = half_bins(bin_width, window);
        Ok(Self { bin_width, window, counts: vec![0; (2 * half + 1) as usize] })
    }

    /// Number of bins on each side of the centre bin.
    pub fn half_bins(&self) -> i64 {
        (self.counts.len() as i64 - 1) / 2
    }

    /// Centre of bin `index` (ps).
    pub fn center(&self, index: usize) -> i64 {
        (index as i64 - self.half_bins()) * self.bin_width
    }

    pub fn centers(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.counts.len()).map(|i| self.center(i))
    }

    /// Bin holding delay `tau`, if inside the histogram.
    pub fn bin_of(&self, tau: i64) -> Option<usize> {
        let k = (2 * tau + self.bin_width).div_euclid(2 * self.bin_width) + self.half_bins();
        (0..self.counts.len() as i64).contains(&k).then_some(k as usize)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bins whose centres satisfy `|center| <= half_width`.
    pub fn restrict(&self, half_width: i64) -> Histogram {
        let keep = (half_width / self.bin_width).min(self.half_bins());
        let mid = self.half_bins();
        Histogram {
            bin_width: self.bin_width,
            window: half_width.min(self.window),
            counts: self.counts[(mid - keep) as usize..=(mid + keep) as usize].to_vec(),
        }
    }

    /// The histogram of the swapped stream pair.
    pub fn mirrored(&self) -> Histogram {
        let mut counts = self.counts.clone();
        counts.reverse();
        Histogram { counts, ..*self }
    }
}

fn half_bins(bin_width: i64, window: i64) -> i64 {
    (2 * window + bin_width).div_euclid(2 * bin_width)
}

const CHUNK: usize = 1 << 14;

/// All-pairs coincidence histogram of `b` relative to `a` within `±window`.
///
/// Two-pointer sweep over the sorted streams, `O(n_a + n_b + pairs)`.
/// Stream `a` is split into chunks processed in parallel; the result is
/// independent of scheduling.
pub fn cross_correlate(a: &TimeTagStream, b: &TimeTagStream, cfg: &CorrConfig) -> Result<Histogram> {
    correlate_slices(a.tags(), b.tags(), cfg)
}

/// [`cross_correlate`] on raw, non-decreasing tag slices.
pub fn correlate_slices(a: &[u64], b: &[u64], cfg: &CorrConfig) -> Result<Histogram> {
    cfg.validate()?;
    check_sorted(a)?;
    check_sorted(b)?;
    let mut hist = Histogram::new(cfg.bin_width, cfg.window)?;
    let n_bins = hist.counts.len();
    let w = cfg.bin_width;
    let win = cfg.window;
    // 2 tau + w + 2 shift >= 0 for every counted pair, so the bin index is an
    // unsigned division.
    let offset = w + 2 * hist.half_bins() * w;

    let counts = a
        .par_chunks(CHUNK)
        .fold(
            || vec![0u64; n_bins],
            |mut h, chunk| {
                let first = chunk[0] as i64;
                let mut lo = b.partition_point(|&t| (t as i64) < first - win);
                let mut hi = lo;
                for &ta in chunk {
                    let ta = ta as i64;
                    while lo < b.len() && (b[lo] as i64) < ta - win {
                        lo += 1;
                    }
                    hi = hi.max(lo);
                    while hi < b.len() && (b[hi] as i64) <= ta + win {
                        hi += 1;
                    }
                    for &tb in &b[lo..hi] {
                        let shifted = (2 * (tb as i64 - ta) + offset) as u64;
                        h[(shifted / (2 * w as u64)) as usize] += 1;
                    }
                }
                h
            },
        )
        .reduce(
            || vec![0u64; n_bins],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                x
            },
        );
    hist.counts = counts;
    Ok(hist)
}

/// Arrival-time histogram relative to the excitation pulses (TCSPC decay).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecayHistogram {
    pub bin_width: i64,
    /// Left edge of the first bin (ps, usually negative).
    pub start: i64,
    pub counts: Vec<u64>,
}

impl DecayHistogram {
    pub fn center(&self, index: usize) -> f64 {
        self.start as f64 + (index as f64 + 0.5) * self.bin_width as f64
    }
}

/// Folds a tag stream onto one excitation period.
///
/// Delays are taken in `[-pre_trigger, rep_period - pre_trigger)`; a partial
/// final bin is dropped.
pub fn decay_histogram(
    stream: &TimeTagStream,
    rep_period: u64,
    bin_width: i64,
    pre_trigger: i64,
) -> Result<DecayHistogram> {
    if rep_period == 0 || bin_width <= 0 || pre_trigger < 0 || pre_trigger as u64 >= rep_period {
        return Err(domain("decay_histogram needs rep_period > pre_trigger >= 0 and bin_width > 0"));
    }
    let n_bins = (rep_period as i64 / bin_width) as usize;
    let mut counts = vec![0u64; n_bins];
    let rep = rep_period as i64;
    for &t in stream.tags() {
        let phase = (t as i64 + pre_trigger).rem_euclid(rep);
        let k = (phase / bin_width) as usize;
        if k < n_bins {
            counts[k] += 1;
        }
    }
    Ok(DecayHistogram { bin_width, start: -pre_trigger, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(tags: Vec<u64>) -> TimeTagStream {
        TimeTagStream::new(0, tags).unwrap()
    }

    /// O(n^2) reference: every pair, same bin rule.
    fn brute_force(a: &[u64], b: &[u64], cfg: &CorrConfig) -> Vec<u64> {
        let k = (2 * cfg.window + cfg.bin_width).div_euclid(2 * cfg.bin_width);
        let mut h = vec![0u64; (2 * k + 1) as usize];
        for &x in a {
            for &y in b {
                let tau = y as i64 - x as i64;
                if tau.abs() <= cfg.window {
                    let idx = (2 * tau + cfg.bin_width).div_euclid(2 * cfg.bin_width) + k;
                    h[idx as usize] += 1;
                }
            }
        }
        h
    }

    #[test]
    fn single_pair_lands_in_centre_bin() {
        let cfg = CorrConfig { bin_width: 50, window: 1000, peak_window: 100 };
        let h = cross_correlate(&stream(vec![0]), &stream(vec![0]), &cfg).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[h.bin_of(0).unwrap()], 1);
        assert_eq!(h.counts.len() % 2, 1);
    }

    #[test]
    fn small_enumeration() {
        let cfg = CorrConfig { bin_width: 50, window: 1000, peak_window: 100 };
        let h = cross_correlate(&stream(vec![0, 100]), &stream(vec![0, 100]), &cfg).unwrap();
        assert_eq!(h.counts[h.bin_of(0).unwrap()], 2);
        assert_eq!(h.counts[h.bin_of(100).unwrap()], 1);
        assert_eq!(h.counts[h.bin_of(-100).unwrap()], 1);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn half_open_bin_edges() {
        let cfg = CorrConfig { bin_width: 50, window: 1000, peak_window: 100 };
        let h = cross_correlate(&stream(vec![1000]), &stream(vec![975, 1025]), &cfg).unwrap();
        // -25 belongs to the centre bin, +25 to the next one
        assert_eq!(h.counts[h.bin_of(0).unwrap()], 1);
        assert_eq!(h.counts[h.bin_of(50).unwrap()], 1);
        assert_eq!(h.bin_of(-25), h.bin_of(0));
        assert_eq!(h.bin_of(25), h.bin_of(50));
    }

    #[test]
    fn window_edge_is_inclusive() {
        let cfg = CorrConfig { bin_width: 50, window: 1000, peak_window: 100 };
        let h = cross_correlate(&stream(vec![5000]), &stream(vec![4000, 6000, 6001]), &cfg).unwrap();
        assert_eq!(h.total(), 2);
    }

    #[test]
    fn rejects_unsorted_input() {
        let cfg = CorrConfig::default();
        let bad = TimeTagStream::from_sorted_unchecked(0, vec![]);
        assert!(cross_correlate(&bad, &bad, &cfg).unwrap().counts.iter().all(|&c| c == 0));
        assert!(correlate_slices(&[3, 2], &[1], &cfg).is_err());
    }

    #[test]
    fn decay_histogram_folds_onto_period() {
        let s = stream(vec![13_158 * 2 + 10, 13_158 * 5 - 20, 13_158 * 7 + 260]);
        let d = decay_histogram(&s, 13_158, 50, 2000).unwrap();
        assert_eq!(d.counts.len(), 263);
        assert_eq!(d.counts.iter().sum::<u64>(), 3);
        assert_eq!(d.counts[(2010 / 50) as usize], 1);
        assert_eq!(d.counts[(1980 / 50) as usize], 1);
        assert_eq!(d.center(0), -1975.0);
    }

    fn tags_strategy() -> impl Strategy<Value = Vec<u64>> {
        prop::collection::vec(0u64..200_000, 0..400).prop_map(|mut v| {
            v.sort_unstable();
            v
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(a in tags_strategy(), b in tags_strategy(), w in 1i64..400, win in 0i64..20_000) {
            let cfg = CorrConfig { bin_width: w, window: win, peak_window: 1 };
            let h = correlate_slices(&a, &b, &cfg).unwrap();
            prop_assert_eq!(h.counts, brute_force(&a, &b, &cfg));
        }

        #[test]
        fn mirror_and_shift(a in tags_strategy(), b in tags_strategy(), shift in 0u64..1_000_000) {
            let cfg = CorrConfig { bin_width: 64, window: 5000, peak_window: 1 };
            let ab = correlate_slices(&a, &b, &cfg).unwrap();
            let ba = correlate_slices(&b, &a, &cfg).unwrap();
            // Mirroring holds exactly when no delay sits on a bin edge; with an
            // even width the edges are at +-32 mod 64, so compare through pairs.
            let sa: Vec<u64> = a.iter().map(|t| t + shift).collect();
            let sb: Vec<u64> = b.iter().map(|t| t + shift).collect();
            prop_assert_eq!(&correlate_slices(&sa, &sb, &cfg).unwrap(), &ab);
            let odd = CorrConfig { bin_width: 63, ..cfg };
            let ab = correlate_slices(&a, &b, &odd).unwrap();
            let ba_odd = correlate_slices(&b, &a, &odd).unwrap();
            prop_assert_eq!(ba_odd, ab.mirrored());
            prop_assert_eq!(ba.total(), ab.total());
        }
    }
}
