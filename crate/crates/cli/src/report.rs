//! The end-to-end pipeline: simulate HBT and both HOM polarizations,
//! correlate, integrate peaks and run every fit.

use crate::config::RunConfig;
use crate::error::{CliError, Result, StageExt};
use photonlab::analytic::{purcell_factor, pure_dephasing_time_measured, quantum_efficiency_bound, Setup};
use photonlab::correlate::{
    correlate_blocks, decay_histogram, g2_poisson, g2_sidepeak, hom_visibility_windowed, integrate_peaks, jackknife,
    poisson_level, sum_tables, CorrConfig, Histogram, PeakTable,
};
use photonlab::fit::{
    fit_blinking, fit_hom_center, fit_hom_center_cross, fit_lifetime, hom_center_area, visibility_from_fits,
    BinnedCounts, FitResult,
};
use photonlab::sim::{derive_seed, run_experiment, SimConfig};
use photonlab::{Measured, TimeTagStream};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

const SALT_HBT: u64 = 101;
const SALT_HOM_CO: u64 = 102;
const SALT_HOM_CROSS: u64 = 103;

/// Far-peak threshold without a blinking estimate.
pub const DEFAULT_FAR_MIN: i64 = 50;

/// A value with one standard error. Non-finite numbers are written as the
/// strings `"inf"`, `"-inf"` and `"nan"` so the JSON stays valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    #[serde(with = "lenient")]
    pub value: f64,
    #[serde(with = "lenient")]
    pub sigma: f64,
}

impl From<Measured> for Quantity {
    fn from(m: Measured) -> Self {
        Self { value: m.value, sigma: m.sigma }
    }
}

impl From<Quantity> for Measured {
    fn from(q: Quantity) -> Self {
        Measured::new(q.value, q.sigma)
    }
}

mod lenient {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the configuration file as read.
    pub config_sha256: String,
}

/// Intermediate numbers worth keeping next to the headline quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub contamination_prob: f64,
    pub far_min: i64,
    pub m_range: i64,
    pub blocks: usize,
    pub hbt_counts: [u64; 2],
    pub hom_co_counts: [u64; 2],
    pub hom_cross_counts: [u64; 2],
    /// Poisson-propagated errors, for comparison with the jackknife ones.
    pub g2_sidepeak_poisson: Quantity,
    pub g2_poisson_poisson: Quantity,
    pub v_hom_windowed_poisson: Quantity,
    /// Fit standard error of T2 alone, and its shift from T1 ± sigma.
    pub t2_fit_sigma: f64,
    pub t2_from_t1_sigma: f64,
    pub hom_center_visibility: Quantity,
    pub h0: Quantity,
    pub fit_flags: BTreeMap<String, Vec<String>>,
}

/// The headline quantities of one simulated measurement campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub inputs: RunConfig,
    pub t1: Quantity,
    pub t2: Quantity,
    pub t2_star: Quantity,
    pub g2_sidepeak: Quantity,
    pub g2_poisson: Quantity,
    pub a_blink: Quantity,
    pub t_blink: Quantity,
    pub eta_bound: Quantity,
    pub v_hom_windowed: Quantity,
    pub v_hom_fit: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purcell: Option<Quantity>,
    pub provenance: Provenance,
    pub diagnostics: Diagnostics,
}

impl ReportDocument {
    /// Pretty JSON with keys in lexicographic order at every level.
    pub fn to_canonical_json(&self) -> Result<String> {
        canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Format(format!("report JSON: {e}")))
    }
}

/// Serializes through `serde_json::Value`, whose maps are sorted, so the
/// output does not depend on struct field order.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Largest `m` whose peak window fits inside the correlation window.
pub fn max_m_range(corr: &CorrConfig, rep: i64) -> i64 {
    (2 * corr.window - corr.peak_window).div_euclid(2 * rep)
}

/// `ceil(5 T_blink / rep)` when the blinking fit found an envelope, else
/// [`DEFAULT_FAR_MIN`].
pub fn far_min_from_fit(blink: &FitResult, rep: f64) -> i64 {
    if blink.has_flag("no_blinking") {
        DEFAULT_FAR_MIN
    } else {
        (5.0 * blink.value("t_blink") / rep).ceil() as i64
    }
}

/// Peak tables of contiguous blocks of one record plus the merged histogram.
pub struct BlockedRecord {
    pub counts: [u64; 2],
    pub tables: Vec<PeakTable>,
    pub histogram: Histogram,
}

impl BlockedRecord {
    pub fn measure(
        a: &TimeTagStream,
        b: &TimeTagStream,
        corr: &CorrConfig,
        rep: i64,
        m_range: i64,
        blocks: usize,
    ) -> Result<Self> {
        let hists = correlate_blocks(a, b, corr, blocks)?;
        let tables =
            hists.iter().map(|h| integrate_peaks(h, rep, corr.peak_window, m_range)).collect::<Result<Vec<_>, _>>()?;
        let mut histogram = Histogram::new(corr.bin_width, corr.window)?;
        for h in &hists {
            histogram.counts.iter_mut().zip(&h.counts).for_each(|(s, c)| *s += c);
        }
        Ok(Self { counts: [a.len() as u64, b.len() as u64], tables, histogram })
    }

    pub fn table(&self) -> Result<PeakTable> {
        Ok(sum_tables(&self.tables, None)?)
    }
}

fn simulate(sim: &SimConfig, setup: Setup, salt: u64) -> Result<(TimeTagStream, TimeTagStream)> {
    let mut cfg = *sim;
    cfg.setup = setup;
    cfg.seed = derive_seed(sim.seed, salt);
    Ok(run_experiment(&cfg)?)
}

/// Jackknife error, but never below the Poisson one: a peak that is empty
/// in every block gives a jackknife error of exactly zero.
fn at_least_poisson(jk: Measured, poisson: Measured) -> Measured {
    Measured::new(jk.value, jk.sigma.max(poisson.sigma))
}

struct CentreFits {
    t2: Measured,
    t2_fit_sigma: f64,
    t2_from_t1: f64,
    visibility: Measured,
    v_fit: Measured,
}

fn converged(fit: FitResult, what: &str) -> Result<FitResult> {
    if fit.converged {
        Ok(fit)
    } else {
        Err(CliError::NotConverged(format!("{what} (flags: {})", fit.flags.join(", "))))
    }
}

/// Runs the full pipeline for `cfg`. `config_text` is hashed into the provenance.
pub fn run_report(cfg: &RunConfig, config_text: &str) -> Result<ReportDocument> {
    let rep = cfg.rep_period().stage("config")?;
    let corr = cfg.corr_config().stage("config")?;
    let blocks = cfg.analysis.blocks;
    let m_range = max_m_range(&corr, rep as i64);
    let contamination = cfg.contamination().stage("calibrate contamination")?;
    let sim = cfg.sim_config(contamination).stage("config")?;
    let det_sigma = sim.detectors.map(|d| d.irf_sigma);
    let mut flags = BTreeMap::new();

    // HBT: blinking, g2, lifetime
    let (a, b) = simulate(&sim, Setup::Hbt, SALT_HBT).stage("simulate hbt")?;
    let hbt = BlockedRecord::measure(&a, &b, &corr, rep as i64, m_range, blocks).stage("correlate hbt")?;
    let hbt_table = hbt.table().stage("peaks hbt")?;
    let blink = converged(fit_blinking(&hbt_table, rep as f64)?, "blinking").stage("fit blinking")?;
    flags.insert("blinking".to_string(), blink.flags.clone());
    let far_min = far_min_from_fit(&blink, rep as f64);
    if far_min + 4 > m_range {
        return Err(CliError::Core(photonlab::Error::InsufficientData(format!(
            "far_min = {far_min} leaves fewer than 5 far peaks within m_range = {m_range}; widen analysis.window"
        ))))
        .stage("poisson level");
    }
    let h0 = poisson_level(&hbt_table, far_min).stage("poisson level")?;
    let g2s_poisson = g2_sidepeak(&hbt_table).stage("g2")?;
    let g2p_poisson = g2_poisson(&hbt_table, far_min).stage("g2")?;
    let g2s = jackknife(blocks, |s| Ok(g2_sidepeak(&sum_tables(&hbt.tables, s)?)?.value)).stage("g2")?;
    let g2p = jackknife(blocks, |s| Ok(g2_poisson(&sum_tables(&hbt.tables, s)?, far_min)?.value)).stage("g2")?;
    let (g2s, g2p) = (at_least_poisson(g2s, g2s_poisson), at_least_poisson(g2p, g2p_poisson));

    let (bin, pre) = cfg.decay_binning().stage("config")?;
    let mut decay = decay_histogram(&a, rep, bin, pre).stage("decay histogram")?;
    let decay_b = decay_histogram(&b, rep, bin, pre).stage("decay histogram")?;
    decay.counts.iter_mut().zip(&decay_b.counts).for_each(|(x, y)| *x += y);
    drop((a, b));
    let lifetime_irf = det_sigma[0].hypot(det_sigma[1]) / std::f64::consts::SQRT_2;
    let life = converged(fit_lifetime(&BinnedCounts::from(&decay), lifetime_irf)?, "lifetime").stage("fit lifetime")?;
    flags.insert("lifetime".to_string(), life.flags.clone());
    let t1 = life.get("t1").expect("lifetime fit has t1");

    // HOM: windowed visibility and centre-peak fits
    let (a, b) = simulate(&sim, Setup::HomCo, SALT_HOM_CO).stage("simulate hom_co")?;
    let co = BlockedRecord::measure(&a, &b, &corr, rep as i64, m_range, blocks).stage("correlate hom_co")?;
    drop((a, b));
    let (a, b) = simulate(&sim, Setup::HomCross, SALT_HOM_CROSS).stage("simulate hom_cross")?;
    let cross = BlockedRecord::measure(&a, &b, &corr, rep as i64, m_range, blocks).stage("correlate hom_cross")?;
    drop((a, b));
    let (co_table, cross_table) = (co.table().stage("peaks hom_co")?, cross.table().stage("peaks hom_cross")?);
    let v_win_poisson = hom_visibility_windowed(&co_table, &cross_table, far_min).stage("windowed visibility")?;
    let v_win = jackknife(blocks, |s| {
        Ok(hom_visibility_windowed(&sum_tables(&co.tables, s)?, &sum_tables(&cross.tables, s)?, far_min)?.value)
    })
    .stage("windowed visibility")?;
    let v_win = at_least_poisson(v_win, v_win_poisson);

    let pair_irf = det_sigma[0].hypot(det_sigma[1]);
    let half = rep as i64 / 2;
    let co_center = BinnedCounts::from(&co.histogram.restrict(half));
    let cross_center = BinnedCounts::from(&cross.histogram.restrict(half));
    let cross_fit = converged(fit_hom_center_cross(&cross_center, t1.value, pair_irf)?, "cross-polarized centre")
        .stage("fit hom centre")?;
    flags.insert("hom_cross".to_string(), cross_fit.flags.clone());
    let h0_co = poisson_level(&co_table, far_min).stage("windowed visibility")?;
    let h0_cross = poisson_level(&cross_table, far_min).stage("windowed visibility")?;
    let cross_area = hom_center_area(&cross_fit).stage("fit visibility")?;
    let scale = h0_co.value / h0_cross.value;
    let cross_area = Measured::new(cross_area.value * scale, cross_area.sigma * scale);

    let centre = if co_center.counts.iter().all(|&c| c == 0.0) {
        // Only V = 1 with T2 = 2 T1 predicts an empty peak; the amplitude
        // and therefore the fit are undetermined there.
        flags.insert("hom_co".to_string(), vec!["empty_centre_peak".to_string()]);
        CentreFits {
            t2: Measured::new(2.0 * t1.value, 2.0 * t1.sigma),
            t2_fit_sigma: 0.0,
            t2_from_t1: 2.0 * t1.sigma,
            visibility: Measured::exact(1.0),
            v_fit: Measured::new(1.0, 1.0 / cross_area.value),
        }
    } else {
        let co_fit = converged(fit_hom_center(&co_center, t1.value, pair_irf)?, "co-polarized centre")
            .stage("fit hom centre")?;
        flags.insert("hom_co".to_string(), co_fit.flags.clone());
        // T1 enters the centre fit as a fixed value; move it by one sigma to
        // propagate its uncertainty into T2.
        let shifted = |dt: f64| -> Result<f64> {
            let f =
                converged(fit_hom_center(&co_center, t1.value + dt, pair_irf)?, "co-polarized centre (T1 shifted)")?;
            Ok(f.value("t2"))
        };
        let t2_fit = co_fit.get("t2").expect("hom fit has t2");
        let t2_from_t1 = if t1.sigma > 0.0 {
            0.5 * (shifted(t1.sigma).stage("fit hom centre")? - shifted(-t1.sigma).stage("fit hom centre")?).abs()
        } else {
            0.0
        };
        CentreFits {
            t2: Measured::new(t2_fit.value, t2_fit.sigma.hypot(t2_from_t1)),
            t2_fit_sigma: t2_fit.sigma,
            t2_from_t1,
            visibility: co_fit.get("visibility").expect("hom fit has visibility"),
            v_fit: visibility_from_fits(&co_fit, cross_area).stage("fit visibility")?,
        }
    };
    let t2_star = pure_dephasing_time_measured(t1, centre.t2).stage("pure dephasing")?;

    let a_blink = blink.get("a_blink").expect("blinking fit has a_blink");
    let eta = quantum_efficiency_bound(a_blink).stage("efficiency bound")?;
    let purcell = cfg.t1_ref().map(|r| purcell_factor(r, t1)).transpose().stage("purcell")?;

    Ok(ReportDocument {
        inputs: cfg.clone(),
        t1: t1.into(),
        t2: centre.t2.into(),
        t2_star: t2_star.into(),
        g2_sidepeak: g2s.into(),
        g2_poisson: g2p.into(),
        a_blink: a_blink.into(),
        t_blink: blink.get("t_blink").expect("blinking fit has t_blink").into(),
        eta_bound: eta.into(),
        v_hom_windowed: v_win.into(),
        v_hom_fit: centre.v_fit.into(),
        purcell: purcell.map(Into::into),
        provenance: Provenance {
            tool: "photonlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed.value,
            config_sha256: sha256_hex(config_text.as_bytes()),
        },
        diagnostics: Diagnostics {
            contamination_prob: contamination,
            far_min,
            m_range,
            blocks,
            hbt_counts: hbt.counts,
            hom_co_counts: co.counts,
            hom_cross_counts: cross.counts,
            g2_sidepeak_poisson: g2s_poisson.into(),
            g2_poisson_poisson: g2p_poisson.into(),
            v_hom_windowed_poisson: v_win_poisson.into(),
            t2_fit_sigma: centre.t2_fit_sigma,
            t2_from_t1_sigma: centre.t2_from_t1,
            hom_center_visibility: centre.visibility.into(),
            h0: h0.into(),
            fit_flags: flags,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_quantities_survive_json() {
        let q = Quantity { value: f64::INFINITY, sigma: f64::NAN };
        let text = serde_json::to_string(&q).unwrap();
        assert_eq!(text, r#"{"value":"inf","sigma":"nan"}"#);
        let back: Quantity = serde_json::from_str(&text).unwrap();
        assert!(back.value.is_infinite() && back.sigma.is_nan());
        assert!(serde_json::from_str::<Quantity>(r#"{"value":"big","sigma":1}"#).is_err());
    }

    #[test]
    fn m_range_fits_window() {
        assert_eq!(max_m_range(&CorrConfig::default(), 13158), 379);
        let c = CorrConfig { bin_width: 50, window: 13158 + 1500, peak_window: 3000 };
        assert_eq!(max_m_range(&c, 13158), 1);
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
