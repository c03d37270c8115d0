use super::Histogram;
use crate::analytic::Measured;
use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEntry {
    /// Pulse separation index.
    pub m: i64,
    pub area: u64,
    /// Poisson error, `sqrt(area)`.
    pub sigma: f64,
}

impl PeakEntry {
    pub fn new(m: i64, area: u64) -> Self {
        Self { m, area, sigma: (area as f64).sqrt() }
    }

    fn measured(&self) -> Measured {
        Measured::new(self.area as f64, poisson_sigma(self.area))
    }
}

/// Integrated coincidence peaks, ordered by `m`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakTable {
    pub entries: Vec<PeakEntry>,
}

impl PeakTable {
    pub fn from_areas(areas: impl IntoIterator<Item = (i64, u64)>) -> Result<Self> {
        let mut entries: Vec<PeakEntry> = areas.into_iter().map(|(m, a)| PeakEntry::new(m, a)).collect();
        entries.sort_by_key(|e| e.m);
        if entries.windows(2).any(|w| w[0].m == w[1].m) {
            return Err(domain("duplicate peak index in peak table"));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, m: i64) -> Option<&PeakEntry> {
        self.entries.binary_search_by_key(&m, |e| e.m).ok().map(|i| &self.entries[i])
    }

    fn require(&self, m: i64) -> Result<&PeakEntry> {
        self.get(m).ok_or_else(|| Error::InsufficientData(format!("peak m = {m} missing from table")))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Copy without the `m = 0` peak.
    pub fn without_center(&self) -> PeakTable {
        PeakTable { entries: self.entries.iter().copied().filter(|e| e.m != 0).collect() }
    }
}

/// Poisson error used in propagation; an empty bin is assigned one count of
/// uncertainty so that ratios with a zero numerator keep a finite error.
fn poisson_sigma(area: u64) -> f64 {
    (area.max(1) as f64).sqrt()
}

/// Sums histogram bins whose centres fall in
/// `[m rep - peak_window/2, m rep + peak_window/2)` for `|m| <= m_range`.
pub fn integrate_peaks(h: &Histogram, rep_period: i64, peak_window: i64, m_range: i64) -> Result<PeakTable> {
    if rep_period <= 0 || peak_window <= 0 || m_range < 0 {
        return Err(domain("integrate_peaks needs rep_period > 0, peak_window > 0, m_range >= 0"));
    }
    if peak_window > rep_period {
        return Err(domain(format!("peak windows overlap: peak_window {peak_window} > rep_period {rep_period}")));
    }
    if 2 * (m_range * rep_period) + peak_window > 2 * h.window {
        return Err(domain(format!(
            "peak m = {m_range} (+{} ps) extends past the histogram window {}",
            peak_window / 2,
            h.window
        )));
    }
    let w = h.bin_width;
    let half = h.half_bins();
    let mut entries = Vec::with_capacity((2 * m_range + 1) as usize);
    for m in -m_range..=m_range {
        // 2 c in [2 m rep - pw, 2 m rep + pw), c = k w
        let lo2 = 2 * m * rep_period - peak_window;
        let hi2 = 2 * m * rep_period + peak_window;
        let k_lo = lo2.div_euclid(2 * w) + i64::from(lo2.rem_euclid(2 * w) != 0);
        let k_hi = (hi2 - 1).div_euclid(2 * w);
        let area = (k_lo.max(-half)..=k_hi.min(half)).map(|k| h.counts[(k + half) as usize]).sum();
        entries.push(PeakEntry::new(m, area));
    }
    Ok(PeakTable { entries })
}

/// Mean and standard error of the peak areas with `|m| >= far_min`.
pub fn poisson_level(t: &PeakTable, far_min: i64) -> Result<Measured> {
    let far: Vec<f64> = t.entries.iter().filter(|e| e.m.abs() >= far_min).map(|e| e.area as f64).collect();
    if far.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "only {} peaks with |m| >= {far_min}, need at least 5",
            far.len()
        )));
    }
    let n = far.len() as f64;
    let mean = far.iter().sum::<f64>() / n;
    let var = far.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Measured::new(mean, (var / n).sqrt()))
}

fn ratio(num: Measured, den: Measured) -> Measured {
    let r = num.value / den.value;
    let s = ((num.sigma / den.value).powi(2) + (num.value * den.sigma / (den.value * den.value)).powi(2)).sqrt();
    Measured::new(r, s)
}

/// Centre peak over the mean of the two first side peaks.
pub fn g2_sidepeak(t: &PeakTable) -> Result<Measured> {
    let center = t.require(0)?.measured();
    let side = t.require(-1)?.area + t.require(1)?.area;
    if side == 0 {
        return Err(domain("first side peaks are empty"));
    }
    let side = Measured::new(side as f64 / 2.0, (side as f64).sqrt() / 2.0);
    Ok(ratio(center, side))
}

/// Centre peak over the uncorrelated (far-peak) level.
pub fn g2_poisson(t: &PeakTable, far_min: i64) -> Result<Measured> {
    let center = t.require(0)?.measured();
    let h0 = poisson_level(t, far_min)?;
    if h0.value <= 0.0 {
        return Err(domain("uncorrelated peak level is zero"));
    }
    Ok(ratio(center, h0))
}

/// `1 - A_co / A_cross` with each centre area normalized to its own
/// uncorrelated level.
pub fn hom_visibility_windowed(co: &PeakTable, cross: &PeakTable, far_min: i64) -> Result<Measured> {
    let co_norm = g2_poisson(co, far_min)?;
    let cross_norm = g2_poisson(cross, far_min)?;
    if cross.require(0)?.area == 0 {
        return Err(domain("cross-polarized centre peak is empty"));
    }
    let r = ratio(co_norm, cross_norm);
    Ok(Measured::new(1.0 - r.value, r.sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comb(rep: i64, m_max: i64, window: i64) -> Histogram {
        let mut h = Histogram::new(50, window).unwrap();
        for m in -m_max..=m_max {
            let i = h.bin_of(m * rep).unwrap();
            h.counts[i] += 1;
        }
        h
    }

    #[test]
    fn comb_gives_unit_areas() {
        let h = comb(13_158, 20, 300_000);
        let t = integrate_peaks(&h, 13_158, 3000, 20).unwrap();
        assert_eq!(t.len(), 41);
        assert!(t.entries.iter().all(|e| e.area == 1 && e.sigma == 1.0));
    }

    #[test]
    fn full_period_windows_partition_counts() {
        let mut h = Histogram::new(50, 100_000).unwrap();
        for (i, c) in h.counts.iter_mut().enumerate() {
            *c = (i as u64 * 7919) % 13;
        }
        let rep = 13_158;
        let m_range = 7;
        let t = integrate_peaks(&h, rep, rep, m_range).unwrap();
        let span_total: u64 = h
            .centers()
            .zip(&h.counts)
            .filter(|(c, _)| 2 * c.abs() < 2 * m_range * rep + rep || 2 * *c == -(2 * m_range * rep + rep))
            .map(|(_, n)| n)
            .sum();
        assert_eq!(t.entries.iter().map(|e| e.area).sum::<u64>(), span_total);
    }

    #[test]
    fn rejects_overlap_and_overflow() {
        let h = Histogram::new(50, 100_000).unwrap();
        assert!(integrate_peaks(&h, 13_158, 13_159, 1).is_err());
        assert!(integrate_peaks(&h, 13_158, 3000, 8).is_err());
        assert!(integrate_peaks(&h, 13_158, 3000, 7).is_ok());
    }

    fn table(areas: &[(i64, u64)]) -> PeakTable {
        PeakTable::from_areas(areas.iter().copied()).unwrap()
    }

    #[test]
    fn poisson_level_examples() {
        let t = table(&[(10, 98), (11, 102), (12, 100), (-10, 99), (-11, 101), (1, 5000)]);
        let h0 = poisson_level(&t, 10).unwrap();
        assert_eq!(h0.value, 100.0);
        assert!((h0.sigma - (0.5f64).sqrt()).abs() < 1e-12);
        let flat = table(&[(5, 40), (6, 40), (7, 40), (8, 40), (9, 40)]);
        assert_eq!(poisson_level(&flat, 5).unwrap(), Measured::new(40.0, 0.0));
        assert!(poisson_level(&flat, 6).is_err());
    }

    #[test]
    fn g2_sidepeak_examples() {
        let t = table(&[(-1, 400), (0, 0), (1, 400)]);
        let g = g2_sidepeak(&t).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.sigma > 0.0 && g.sigma < 0.01);
        let t = table(&[(-1, 400), (0, 400), (1, 400)]);
        assert_eq!(g2_sidepeak(&t).unwrap().value, 1.0);
        // sigma^2 = 1/400 + 1/800
        assert!((g2_sidepeak(&t).unwrap().sigma - (1.0f64 / 400.0 + 1.0 / 800.0).sqrt()).abs() < 1e-12);
        assert!(g2_sidepeak(&table(&[(-1, 0), (0, 3), (1, 0)])).is_err());
        assert!(g2_sidepeak(&table(&[(0, 3), (1, 4)])).is_err());
    }

    #[test]
    fn g2_normalizations_agree_without_blinking() {
        let mut areas = vec![(0, 30), (-1, 1000), (1, 1000)];
        areas.extend((2..12).flat_map(|m| [(m, 1000), (-m, 1000)]));
        let t = table(&areas);
        assert_eq!(g2_poisson(&t, 5).unwrap().value, g2_sidepeak(&t).unwrap().value);
    }

    #[test]
    fn hom_visibility_examples() {
        let mut cross: Vec<(i64, u64)> = (1..10).flat_map(|m| [(m, 2000), (-m, 2000)]).collect();
        cross.push((0, 1000));
        let cross_t = table(&cross);
        assert_eq!(hom_visibility_windowed(&cross_t, &cross_t, 2).unwrap().value, 0.0);
        let mut co = cross.clone();
        co.retain(|&(m, _)| m != 0);
        co.push((0, 0));
        assert_eq!(hom_visibility_windowed(&table(&co), &cross_t, 2).unwrap().value, 1.0);
        let mut empty = cross.clone();
        empty.retain(|&(m, _)| m != 0);
        empty.push((0, 0));
        assert!(hom_visibility_windowed(&cross_t, &table(&empty), 2).is_err());
    }
}
