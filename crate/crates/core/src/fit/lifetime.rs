use super::models::{lifetime, lifetime_params};
use super::{nlls_fit, BinnedCounts, FitOptions, FitProblem, FitResult};
use crate::analytic::erfcx;
use crate::error::{Error, Result};
use std::f64::consts::SQRT_2;

fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `exp(s^2 / 2T^2 - u/T) Phi(u/s - s/T)`, the exponential part of the
/// exponentially-modified Gaussian CDF, evaluated without overflow.
fn emg_tail(u: f64, t1: f64, sigma: f64) -> f64 {
    let z = u / sigma - sigma / t1;
    if z < 0.0 {
        0.5 * (-0.5 * (u / sigma).powi(2)).exp() * erfcx(-z / SQRT_2)
    } else {
        (0.5 * (sigma / t1).powi(2) - u / t1).exp() * phi(z)
    }
}

fn emg_cdf(u: f64, t1: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if u > 0.0 { -(-u / t1).exp_m1() } else { 0.0 };
    }
    phi(u / sigma) - emg_tail(u, t1, sigma)
}

fn emg_survival(u: f64, t1: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if u > 0.0 { (-u / t1).exp() } else { 1.0 };
    }
    // Far past the onset the Gaussian terms are below phi(9)/9 ~ 1e-19
    // relative and the survival is the shifted exponential.
    if u / sigma - sigma / t1 >= 9.0 {
        return (0.5 * (sigma / t1).powi(2) - u / t1).exp();
    }
    phi(-u / sigma) + emg_tail(u, t1, sigma)
}

/// Probability that an exponential delay (lifetime `t1`, onset `t0`) blurred
/// by Gaussian jitter `sigma` lands in `[a, b)`.
pub fn emg_bin_fraction(a: f64, b: f64, t0: f64, t1: f64, sigma: f64) -> f64 {
    let (ua, ub) = (a - t0, b - t0);
    if ua > 0.0 {
        emg_survival(ua, t1, sigma) - emg_survival(ub, t1, sigma)
    } else {
        emg_cdf(ub, t1, sigma) - emg_cdf(ua, t1, sigma)
    }
}

/// Fits a mono-exponential decay convolved with the Gaussian instrument
/// response (`irf_sigma`, held fixed) plus a constant background.
///
/// Parameters: `t1`, `amplitude` (total decay counts), `t0` (onset),
/// `baseline` (counts per bin). Bin contents are integrated exactly, so the
/// result does not depend on the bin width beyond statistics. The last tenth
/// of the histogram must be free of signal (at least ~10 `t1` of tail).
pub fn fit_lifetime(data: &BinnedCounts, irf_sigma: f64) -> Result<FitResult> {
    if !(irf_sigma >= 0.0) {
        return Err(Error::Domain(format!("irf_sigma must be >= 0, got {irf_sigma}")));
    }
    let n = data.counts.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!("lifetime fit needs at least 10 bins, got {n}")));
    }
    let w = data.width;
    // Starting values from the data in x order, so that they do not depend
    // on the order of the points.
    let mut sorted: Vec<(f64, f64)> = data.x.iter().copied().zip(data.counts.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tail = &sorted[n - (n / 10).max(1)..];
    let baseline = tail.iter().map(|p| p.1).sum::<f64>() / tail.len() as f64;
    let i_max = (0..n).fold(0, |m, i| if sorted[i].1 > sorted[m].1 { i } else { m });
    let height = sorted[i_max].1 - baseline;
    if !(height > 0.0) {
        return Err(Error::InsufficientData("decay histogram has no peak above background".into()));
    }
    let i_edge = (0..=i_max).find(|&i| sorted[i].1 - baseline >= 0.5 * height).unwrap_or(i_max);
    let t0 = sorted[i_edge].0 - 0.5 * w;
    let area: f64 = sorted.iter().map(|p| p.1 - baseline).sum::<f64>().max(height);
    let t1 = (area * w / height).max(w);

    let model = lifetime(w, irf_sigma);
    let weights = data.weights();
    let problem = FitProblem {
        model: &model,
        x: &data.x,
        y: &data.counts,
        weights: &weights,
        params: lifetime_params([t1, area, t0, baseline]),
    };
    nlls_fit(&problem, FitOptions::counts())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Simpson rule over the exponential delay of the Gaussian bin
    /// probability, independent of the closed form.
    fn emg_numeric(a: f64, b: f64, t0: f64, t1: f64, sigma: f64) -> f64 {
        let n = 400_000;
        let h = 40.0 * t1 / n as f64;
        let g = |s: f64| (-s / t1).exp() / t1 * (phi((b - t0 - s) / sigma) - phi((a - t0 - s) / sigma));
        let inner: f64 = (1..n).map(|k| if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h)).sum();
        (g(0.0) + inner + g(n as f64 * h)) * h / 3.0
    }

    #[test]
    fn bin_fraction_matches_numeric_convolution() {
        for (a, b) in [(-100.0, -50.0), (-20.0, 30.0), (0.0, 50.0), (400.0, 450.0), (1500.0, 1600.0)] {
            let exact = emg_bin_fraction(a, b, 0.0, 257.5, 16.1);
            let num = emg_numeric(a, b, 0.0, 257.5, 16.1);
            assert!((exact - num).abs() < 1e-6 * num, "[{a}, {b}): {exact} vs {num}");
        }
        // scipy.stats.exponnorm(K = 257.5 / 16.1, scale = 16.1) CDF difference
        let f = emg_bin_fraction(-100.0, -50.0, 0.0, 257.5, 16.1);
        assert!((f / 1.611_241_426_805_4e-5 - 1.0).abs() < 1e-9, "{f}");
    }

    #[test]
    fn bin_fractions_sum_to_one() {
        let total: f64 =
            (-40..400).map(|k| emg_bin_fraction(k as f64 * 50.0, (k + 1) as f64 * 50.0, 13.0, 257.5, 16.1)).sum();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }

    #[test]
    fn zero_jitter_is_a_shifted_exponential() {
        let f = emg_bin_fraction(100.0, 150.0, 30.0, 200.0, 0.0);
        assert!((f - ((-70.0f64 / 200.0).exp() - (-120.0f64 / 200.0).exp())).abs() < 1e-15);
        assert_eq!(emg_bin_fraction(-50.0, 0.0, 30.0, 200.0, 0.0), 0.0);
        // tiny jitter converges to the same value
        let g = emg_bin_fraction(100.0, 150.0, 30.0, 200.0, 1e-6);
        assert!((f - g).abs() < 1e-9);
    }

    #[test]
    fn deep_tail_keeps_relative_precision() {
        let f = emg_bin_fraction(20_000.0, 20_050.0, 0.0, 257.5, 16.1);
        let approx =
            (0.5 * (16.1f64 / 257.5).powi(2)).exp() * ((-20_000.0f64 / 257.5).exp() - (-20_050.0f64 / 257.5).exp());
        assert!(((f - approx) / approx).abs() < 1e-9, "{f} vs {approx}");
    }
}
