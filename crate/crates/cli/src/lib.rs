//! Command-line front end for [`photonlab`]: run configuration files, the
//! `.ptt` time-tag format, CSV/JSON outputs and the end-to-end report.

// Domain checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod duration;
pub mod error;
pub mod ptt;
pub mod report;
pub mod tables;
pub mod vismap;

pub use commands::{run, Cli};
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use report::{run_report, ReportDocument};
