//! Simulation and analysis toolkit for pulsed single-photon sources.
//!
//! The crate is split into four layers:
//!
//! - [`analytic`]: closed-form coherence, visibility, blinking, Purcell and
//!   lineshape relations. Everything else is checked against these.
//! - [`sim`]: Monte-Carlo generation of time-tag records from a blinking,
//!   dephasing emitter behind an HBT beamsplitter or an unbalanced
//!   Mach-Zehnder (HOM) interferometer.
//! - [`correlate`]: streaming cross-correlation of time-tag streams,
//!   coincidence-peak integration and the derived g2/visibility estimators.
//! - [`fit`]: a Levenberg-Marquardt least-squares engine and the concrete
//!   lifetime, blinking, HOM, Voigt and cavity-mode fits.
//!
//! All times are picoseconds, all energies are micro-electronvolts.

// Domain checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod correlate;
mod error;
pub mod fit;
pub mod sim;
mod tags;

pub use analytic::Measured;
pub use error::{Error, Result};
pub use tags::TimeTagStream;
