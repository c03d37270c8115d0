//! Command-line interface definition and dispatch.

use crate::config::RunConfig;
use crate::duration::{parse_duration, Duration};
use crate::error::{CliError, Result};
use crate::report::{canonical_json, far_min_from_fit, run_report, sha256_hex, DEFAULT_FAR_MIN};
use crate::{ptt, tables, vismap};
use clap::{Args, Parser, Subcommand};
use photonlab::correlate::{correlate_slices, decay_histogram, g2_poisson, g2_sidepeak, integrate_peaks, CorrConfig};
use photonlab::fit::{
    cavity_composite, fit_blinking, fit_cavity_modes, fit_hom_center, fit_hom_center_cross, fit_lifetime,
    fit_voigt_line, FitResult,
};
use photonlab::sim::run_experiment;
use photonlab::Measured;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "photonlab", version, about = "Simulate and analyse pulsed single-photon source measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a two-channel record; writes <PREFIX>.ch0.ptt, <PREFIX>.ch1.ptt and <PREFIX>.meta.json.
    Simulate {
        config: PathBuf,
        prefix: PathBuf,
        /// Override [setup] kind (hbt, hom_co, hom_cross).
        #[arg(long)]
        setup: Option<String>,
    },
    /// Coincidence histogram of B relative to A (CSV `tau_ps,counts`).
    Correlate {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "50ps", value_parser = duration_arg)]
        bin: Duration,
        /// Half-width of the delay window.
        #[arg(long, default_value = "5us", value_parser = duration_arg)]
        window: Duration,
        #[command(flatten)]
        out: Output,
    },
    /// Integrate coincidence peaks of a histogram CSV (CSV `m,area,sigma`).
    Peaks {
        histogram: PathBuf,
        #[arg(long, default_value = "13158ps", value_parser = duration_arg)]
        rep: Duration,
        #[arg(long, default_value = "3ns", value_parser = duration_arg)]
        peak_window: Duration,
        /// Largest |m|; defaults to the widest range inside the histogram.
        #[arg(long)]
        m_range: Option<i64>,
        #[command(flatten)]
        out: Output,
    },
    /// Arrival-time histogram folded on the excitation period (CSV `t_ps,counts`).
    Decay {
        tags: PathBuf,
        #[arg(long, default_value = "13158ps", value_parser = duration_arg)]
        rep: Duration,
        #[arg(long, default_value = "50ps", value_parser = duration_arg)]
        bin: Duration,
        #[arg(long, default_value = "2ns", value_parser = duration_arg)]
        pre_trigger: Duration,
        #[command(flatten)]
        out: Output,
    },
    /// Fit a model; writes FitResult JSON. Exit code 4 if the fit did not converge.
    Fit {
        #[command(subcommand)]
        kind: FitKind,
    },
    /// Run the full simulate-and-analyse pipeline; writes ReportDocument JSON.
    Report {
        config: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Windowed HOM visibility over a (T1, T2*) grid (CSV `t1_ps,t2star_ps,visibility`).
    ///
    /// The last row is the operating point T1 = 257.5 ps, T2* = 1470 ps.
    Vismap {
        /// start:stop:step, e.g. 20:600:20 or 0.02ns:0.6ns:20ps.
        #[arg(long)]
        t1_range: String,
        /// Comma-separated T2* values, e.g. 500,1470,inf.
        #[arg(long)]
        t2star_list: String,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Subcommand)]
pub enum FitKind {
    /// Exponential decay convolved with a Gaussian IRF (input: decay CSV).
    Lifetime {
        input: PathBuf,
        /// IRF standard deviation.
        #[arg(long, default_value = "0ps", value_parser = duration_arg)]
        irf: Duration,
        #[command(flatten)]
        out: Output,
    },
    /// Blinking envelope of the side peaks (input: peaks CSV).
    Blinking {
        input: PathBuf,
        #[arg(long, default_value = "13158ps", value_parser = duration_arg)]
        rep: Duration,
        #[command(flatten)]
        out: Output,
    },
    /// HOM centre-peak model with T1 held fixed (input: histogram CSV).
    Hom {
        input: PathBuf,
        /// Lifetime to hold fixed.
        #[arg(long, required = true, value_parser = duration_arg)]
        t1_fix: Duration,
        /// Combined timing jitter of the detector pair (standard deviation).
        #[arg(long, default_value = "0ps", value_parser = duration_arg)]
        irf: Duration,
        /// Fit the cross-polarized envelope (visibility fixed to 0).
        #[arg(long)]
        cross: bool,
        #[arg(long, default_value = "13158ps", value_parser = duration_arg)]
        rep: Duration,
        #[command(flatten)]
        out: Output,
    },
    /// Side-peak and Poisson-level g2(0) (input: peaks CSV); parameters are those of the blinking fit.
    G2 {
        input: PathBuf,
        #[arg(long, default_value = "13158ps", value_parser = duration_arg)]
        rep: Duration,
        /// Far-peak threshold; defaults to ceil(5 T_blink / rep), or 50 without blinking.
        #[arg(long)]
        far_min: Option<i64>,
        #[command(flatten)]
        out: Output,
    },
    /// Voigt line plus baseline (input: spectrum CSV).
    Voigt {
        input: PathBuf,
        /// Instrument Gaussian FWHM to deconvolve, with its error.
        #[arg(long, default_value_t = 0.0)]
        instrument_fwhm: f64,
        #[arg(long, default_value_t = 0.0)]
        instrument_sigma: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Two Lorentzian cavity modes plus baseline (input: spectrum CSV).
    Cavity {
        input: PathBuf,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write to this file instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn duration_arg(text: &str) -> std::result::Result<Duration, String> {
    parse_duration(text)
}

fn whole(flag: &str, d: Duration) -> Result<i64> {
    let ps = d.whole_ps().map_err(|e| CliError::Usage(format!("--{flag}: {e}")))?;
    i64::try_from(ps).map_err(|_| CliError::Usage(format!("--{flag}: value too large")))
}

fn emit(out: &Output, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Adds the input file name to format errors.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        CliError::Format(msg) => CliError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    config: &'a RunConfig,
    setup: String,
    contamination_prob: f64,
    counts: [usize; 2],
    config_sha256: String,
    version: &'static str,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, prefix, setup } => {
            let (mut cfg, text) = RunConfig::load(&config)?;
            if let Some(kind) = setup {
                cfg.setup.kind = kind;
                cfg.setup().map_err(|e| CliError::Usage(format!("--setup: {e}")))?;
            }
            let eps = cfg.contamination()?;
            let (a, b) = run_experiment(&cfg.sim_config(eps)?)?;
            let path = |suffix: &str| {
                let mut p = prefix.clone().into_os_string();
                p.push(suffix);
                PathBuf::from(p)
            };
            ptt::write(&path(".ch0.ptt"), &a)?;
            ptt::write(&path(".ch1.ptt"), &b)?;
            let meta = SimulationMeta {
                config: &cfg,
                setup: cfg.setup()?.to_string(),
                contamination_prob: eps,
                counts: [a.len(), b.len()],
                config_sha256: sha256_hex(text.as_bytes()),
                version: env!("CARGO_PKG_VERSION"),
            };
            let meta_path = path(".meta.json");
            std::fs::write(&meta_path, canonical_json(&meta)?).map_err(|e| CliError::io(&meta_path, e))
        }
        Command::Correlate { a, b, bin, window, out } => {
            let cfg = CorrConfig { bin_width: whole("bin", bin)?, window: whole("window", window)?, peak_window: 1 };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let (a, b) = (ptt::read(&a, 0)?, ptt::read(&b, 1)?);
            let h = correlate_slices(a.tags(), b.tags(), &cfg)?;
            emit(&out, &tables::histogram_csv(&h))
        }
        Command::Peaks { histogram, rep, peak_window, m_range, out } => {
            let h = in_file(&histogram, tables::parse_histogram(&read_text(&histogram)?))?;
            let (rep, pw) = (whole("rep", rep)?, whole("peak-window", peak_window)?);
            if rep <= 0 || pw <= 0 {
                return Err(CliError::Usage("--rep and --peak-window must be > 0".into()));
            }
            let m_range = m_range.unwrap_or_else(|| (2 * h.window - pw).div_euclid(2 * rep).max(0));
            let t = integrate_peaks(&h, rep, pw, m_range).map_err(|e| CliError::Usage(e.to_string()))?;
            emit(&out, &tables::peaks_csv(&t))
        }
        Command::Decay { tags, rep, bin, pre_trigger, out } => {
            let s = ptt::read(&tags, 0)?;
            let d =
                decay_histogram(&s, whole("rep", rep)? as u64, whole("bin", bin)?, whole("pre-trigger", pre_trigger)?)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            emit(&out, &tables::decay_csv(&d))
        }
        Command::Fit { kind } => run_fit(kind),
        Command::Report { config, out } => {
            let (cfg, text) = RunConfig::load(&config)?;
            let doc = run_report(&cfg, &text)?;
            emit(&out, &doc.to_canonical_json()?)
        }
        Command::Vismap { t1_range, t2star_list, out } => {
            let t1s = vismap::parse_range(&t1_range)?;
            let t2s = vismap::parse_list(&t2star_list)?;
            emit(&out, &vismap::vismap_csv(&t1s, &t2s)?)
        }
    }
}

/// Writes the fit, then reports non-convergence through the exit code.
fn finish_fit(fit: &FitResult, out: &Output) -> Result<()> {
    emit(out, &canonical_json(fit)?)?;
    if fit.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("flags: {}", fit.flags.join(", "))))
    }
}

fn run_fit(kind: FitKind) -> Result<()> {
    match kind {
        FitKind::Lifetime { input, irf, out } => {
            let data = in_file(&input, tables::parse_decay(&read_text(&input)?))?;
            finish_fit(&fit_lifetime(&data, irf.ps())?, &out)
        }
        FitKind::Blinking { input, rep, out } => {
            let t = in_file(&input, tables::parse_peaks(&read_text(&input)?))?;
            finish_fit(&fit_blinking(&t, rep.ps())?, &out)
        }
        FitKind::Hom { input, t1_fix, irf, cross, rep, out } => {
            let half = whole("rep", rep)? / 2;
            let data = in_file(&input, tables::parse_histogram_binned(&read_text(&input)?, half))?;
            let fit = if cross {
                fit_hom_center_cross(&data, t1_fix.ps(), irf.ps())?
            } else {
                fit_hom_center(&data, t1_fix.ps(), irf.ps())?
            };
            finish_fit(&fit, &out)
        }
        FitKind::G2 { input, rep, far_min, out } => {
            let t = in_file(&input, tables::parse_peaks(&read_text(&input)?))?;
            let mut fit = fit_blinking(&t, rep.ps())?;
            let far_min = match far_min {
                Some(m) => m,
                None if fit.converged => far_min_from_fit(&fit, rep.ps()),
                None => DEFAULT_FAR_MIN,
            };
            fit.derived.insert("g2_sidepeak".into(), g2_sidepeak(&t)?);
            fit.derived.insert("g2_poisson".into(), g2_poisson(&t, far_min)?);
            fit.derived.insert("far_min".into(), Measured::exact(far_min as f64));
            finish_fit(&fit, &out)
        }
        FitKind::Voigt { input, instrument_fwhm, instrument_sigma, out } => {
            let sp = in_file(&input, tables::parse_spectrum(&read_text(&input)?))?;
            finish_fit(&fit_voigt_line(&sp, Measured::new(instrument_fwhm, instrument_sigma))?, &out)
        }
        FitKind::Cavity { input, out } => {
            let sp = in_file(&input, tables::parse_spectrum(&read_text(&input)?))?;
            let mut fit = fit_cavity_modes(&sp)?;
            if fit.converged {
                let (center, fwhm) = composite_with_errors(&fit)?;
                fit.derived.insert("composite_center".into(), center);
                fit.derived.insert("composite_fwhm".into(), fwhm);
            }
            finish_fit(&fit, &out)
        }
    }
}

/// Composite line of the two fitted modes with errors propagated through
/// the fit covariance by central differences.
fn composite_with_errors(fit: &FitResult) -> Result<(Measured, Measured)> {
    let base = cavity_composite(fit)?;
    let n = fit.params.len();
    let mut grad = vec![[0.0; 2]; n];
    for (i, g) in grad.iter_mut().enumerate() {
        let h = 1e-6 * fit.params[i].abs().max(1e-3);
        let at = |d: f64| -> Result<[f64; 2]> {
            let mut f = fit.clone();
            f.params[i] += d;
            let c = cavity_composite(&f)?;
            Ok([c.center, c.fwhm])
        };
        let (p, m) = (at(h)?, at(-h)?);
        *g = [(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)];
    }
    let var = |k: usize| -> f64 {
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += grad[i][k] * fit.covariance[i][j] * grad[j][k];
            }
        }
        v.max(0.0)
    };
    Ok((Measured::new(base.center, var(0).sqrt()), Measured::new(base.fwhm, var(1).sqrt())))
}
