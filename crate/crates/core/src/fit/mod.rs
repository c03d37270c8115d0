//! Weighted nonlinear least squares and the concrete model fits.
//!
//! [`nlls_fit`] is a Levenberg-Marquardt engine over named, optionally
//! bounded or fixed parameters. The model fits build a [`FitProblem`] from
//! histogram or spectrum data, choose data-driven starting values and return
//! a [`FitResult`] whose standard errors come from the fit covariance.

mod blinking;
mod hom;
mod lifetime;
mod lm;
pub mod models;
mod spectral;

pub use blinking::fit_blinking;
pub use hom::{fit_hom_center, fit_hom_center_cross, hom_center_area, visibility_from_fits};
pub use lifetime::{emg_bin_fraction, fit_lifetime};
pub use lm::{default_step, forward_jacobian, nlls_fit, ErrorScale, FitOptions, FitProblem};
pub use spectral::{cavity_composite, deconvolve_gaussian, fit_cavity_modes, fit_voigt_line, CompositeLine};

use crate::analytic::Measured;
use crate::correlate::{DecayHistogram, Histogram};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One named model parameter with its starting value and admissible range.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub init: f64,
    pub lower: f64,
    pub upper: f64,
    /// Held at `init` and excluded from the Jacobian.
    pub fixed: bool,
}

impl ParamSpec {
    pub fn free(name: &str, init: f64) -> Self {
        Self { name: name.to_string(), init, lower: f64::NEG_INFINITY, upper: f64::INFINITY, fixed: false }
    }

    pub fn fixed(name: &str, value: f64) -> Self {
        Self { fixed: true, ..Self::free(name, value) }
    }

    pub fn bounded(name: &str, init: f64, lower: f64, upper: f64) -> Self {
        Self { lower, upper, ..Self::free(name, init) }
    }

    pub fn positive(name: &str, init: f64) -> Self {
        Self::bounded(name, init, 0.0, f64::INFINITY)
    }
}

/// Outcome of a least-squares fit.
///
/// Parameters are stored in model order; `stderr[i]` is
/// `sqrt(covariance[i][i])` and is zero for fixed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub stderr: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub n_dof: i64,
    pub converged: bool,
    pub n_iter: usize,
    /// Diagnostics such as `singular_normal_matrix`, `n_dof_zero`, `degenerate`.
    pub flags: Vec<String>,
    /// Quantities computed from the fitted parameters (e.g. a deconvolved width).
    pub derived: BTreeMap<String, Measured>,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Parameter value and standard error by name.
    pub fn get(&self, name: &str) -> Option<Measured> {
        self.index(name).map(|i| Measured::new(self.params[i], self.stderr[i]))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("fit has no parameter {name}")).value
    }

    pub fn cov(&self, a: &str, b: &str) -> f64 {
        match (self.index(a), self.index(b)) {
            (Some(i), Some(j)) => self.covariance[i][j],
            _ => panic!("fit has no parameters {a}, {b}"),
        }
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    /// Reduced chi-square, `NaN` when there are no degrees of freedom.
    pub fn reduced_chi2(&self) -> f64 {
        if self.n_dof > 0 {
            self.chi2 / self.n_dof as f64
        } else {
            f64::NAN
        }
    }
}

/// Counts in equal-width bins, `x` holding bin centres.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCounts {
    pub x: Vec<f64>,
    pub width: f64,
    pub counts: Vec<f64>,
}

impl BinnedCounts {
    /// Poisson weights `1 / max(count, 1)`.
    pub fn weights(&self) -> Vec<f64> {
        poisson_weights(&self.counts)
    }
}

impl From<&Histogram> for BinnedCounts {
    fn from(h: &Histogram) -> Self {
        Self {
            x: h.centers().map(|c| c as f64).collect(),
            width: h.bin_width as f64,
            counts: h.counts.iter().map(|&c| c as f64).collect(),
        }
    }
}

impl From<&DecayHistogram> for BinnedCounts {
    fn from(h: &DecayHistogram) -> Self {
        Self {
            x: (0..h.counts.len()).map(|i| h.center(i)).collect(),
            width: h.bin_width as f64,
            counts: h.counts.iter().map(|&c| c as f64).collect(),
        }
    }
}

/// Sampled spectrum: counts at abscissae (energy or wavelength).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Spectrum {
    pub x: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Spectrum {
    pub fn new(x: Vec<f64>, counts: Vec<f64>) -> Self {
        Self { x, counts }
    }
}

/// Gaussian approximation of Poisson variance, floored at one count.
pub fn poisson_weights(counts: &[f64]) -> Vec<f64> {
    counts.iter().map(|&c| 1.0 / c.max(1.0)).collect()
}
