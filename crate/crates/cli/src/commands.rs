//! Subcommands and the exit-code contract: 0 accept (or success), 3 reject,
//! 1 usage error, 2 data error.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use uhdtest::procedure::prepare_splits;
use uhdtest::rmtlab::{classical_locations, exact_model, semicircle_model, PopulationSpectrum, SpectralModel};
use uhdtest::simharness::{empirical_size_power, power_curve, SweepResult};
use uhdtest::tuning::{calibrate_delta, select_theta_prepared, ThetaGrid, TunerReading, DEFAULT_THETA};
use uhdtest::{
    dr_threshold, run_test, sample_covariance_spectrum, spectrum_summary, DeltaSpec, Error, Spectrum,
    SpectrumSummary, TestConfig, ThetaSpec, ThresholdMode,
};

use crate::io::{parse_scenario, read_matrix, read_values};
use crate::report::{parse_calibration, render_calibration, RunReport};

pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_REJECT: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }
}

/// Configuration mistakes are usage errors; anything the data caused is a
/// data error.
fn classify(e: Error, explicit_n: bool) -> Failure {
    match e {
        Error::InvalidConfig(_) | Error::GridTooSmall(_) | Error::InvalidBandwidth(_) => Failure::usage(e.to_string()),
        Error::Size(_) if explicit_n => Failure::usage(e.to_string()),
        other => Failure::data(other.to_string()),
    }
}

type CmdResult = std::result::Result<i32, Failure>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaArg {
    Value(f64),
    Auto,
}

fn parse_theta(s: &str) -> std::result::Result<ThetaArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(ThetaArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(ThetaArg::Value(v)),
        _ => Err(format!("expected a positive number or 'auto', got '{s}'")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaArg {
    Value(f64),
    Auto,
    Binomial,
    Gaussian,
}

fn parse_delta(s: &str) -> std::result::Result<DeltaArg, String> {
    match s.to_ascii_lowercase().as_str() {
        "auto" => Ok(DeltaArg::Auto),
        "binomial" => Ok(DeltaArg::Binomial),
        "gaussian" => Ok(DeltaArg::Gaussian),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(DeltaArg::Value)
            .ok_or_else(|| format!("expected a number, 'auto', 'binomial' or 'gaussian', got '{s}'")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "uhdtest", version, about = "Two-sample covariance test for p >> n data")]
pub struct Cli {
    /// Worker threads; never changes numeric output.
    #[arg(long, global = true, env = "UHDTEST_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct TestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Split size; defaults to floor(N) - 5.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "k-splits", default_value_t = 1000)]
    pub k_splits: usize,
    /// Bandwidth multiplier, or 'auto' to tune it.
    #[arg(long, default_value = "auto", value_parser = parse_theta)]
    pub theta: ThetaArg,
    /// Threshold: a value, 'auto' (calibrate), 'binomial' or 'gaussian'.
    #[arg(long, default_value = "binomial", value_parser = parse_delta)]
    pub delta: DeltaArg,
    /// Replicates for '--delta auto'.
    #[arg(long, default_value_t = 200)]
    pub b: usize,
    /// Threshold from a file written by 'calibrate'; overrides --delta.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eps1: f64,
}

impl TestArgs {
    fn config(&self) -> TestConfig {
        TestConfig {
            n: self.n,
            k_splits: self.k_splits,
            alpha: self.alpha,
            eps: self.eps,
            eps1: self.eps1,
            theta: match self.theta {
                ThetaArg::Value(t) => ThetaSpec::Value(t),
                ThetaArg::Auto => ThetaSpec::Auto,
            },
            delta: match self.delta {
                DeltaArg::Value(d) => DeltaSpec::Value(d),
                DeltaArg::Auto => DeltaSpec::Calibrate { b: self.b },
                DeltaArg::Binomial => DeltaSpec::Formula(ThresholdMode::Binomial),
                DeltaArg::Gaussian => DeltaSpec::Formula(ThresholdMode::Gaussian),
            },
            seed: self.seed,
            ..TestConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the test on two samples.
    Test {
        x: PathBuf,
        y: PathBuf,
        #[command(flatten)]
        args: TestArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate the decision-ratio threshold on Gaussian replicates.
    Calibrate {
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: usize,
        #[arg(long = "k-splits", default_value_t = 100)]
        k_splits: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 200)]
        b: usize,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select the bandwidth multiplier for two samples.
    Tune {
        x: PathBuf,
        y: PathBuf,
        #[command(flatten)]
        args: TestArgs,
        /// Read the raw decision ratios instead of their moving average.
        #[arg(long)]
        unsmoothed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a size/power sweep for a scenario file; writes CSV rows.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        /// Comma-separated shifts for a case III power curve.
        #[arg(long = "power-curve", value_delimiter = ',')]
        power_curve: Option<Vec<f64>>,
        #[command(flatten)]
        args: TestArgs,
        /// Append rows to this file instead of printing them.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the spectrum of one sample as JSON.
    Spectra {
        x: PathBuf,
        /// Population eigenvalues for a model overlay.
        #[arg(long)]
        population: Option<PathBuf>,
        /// Overlay from the exact fixed point instead of the semicircle.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> std::result::Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::data(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::data(e.to_string()))
        }
    }
}

fn load(path: &Path) -> std::result::Result<uhdtest::DataMatrix, Failure> {
    read_matrix(path).map_err(|e| Failure::data(e.to_string()))
}

pub fn execute(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Test { x, y, args, out } => cmd_test(&x, &y, &args, out.as_deref()),
        Command::Calibrate { n1, n2, n, p, k_splits, alpha, b, theta, seed, out } => {
            cmd_calibrate(n1, n2, n, p, k_splits, alpha, b, theta, seed, out.as_deref())
        }
        Command::Tune { x, y, args, unsmoothed, out } => cmd_tune(&x, &y, &args, unsmoothed, out.as_deref()),
        Command::Simulate { scenario, reps, power_curve, args, out } => {
            cmd_simulate(&scenario, reps, power_curve.as_deref(), &args, out.as_deref())
        }
        Command::Spectra { x, population, exact, grid, out } => {
            cmd_spectra(&x, population.as_deref(), exact, grid, out.as_deref())
        }
    }
}

pub fn cmd_test(x_path: &Path, y_path: &Path, args: &TestArgs, out: Option<&Path>) -> CmdResult {
    let mut config = args.config();
    let explicit_n = args.n.is_some();
    let x = load(x_path)?;
    let y = load(y_path)?;
    if x.p() != y.p() {
        return Err(Failure::data(format!("X has {} columns but Y has {}", x.p(), y.p())));
    }
    let mut delta_source = match args.delta {
        DeltaArg::Value(_) => "explicit",
        DeltaArg::Auto => "calibrated",
        DeltaArg::Binomial => "binomial",
        DeltaArg::Gaussian => "gaussian",
    };
    if let Some(path) = &args.calibration {
        let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        let cal = parse_calibration(&text).map_err(|e| Failure::data(e.to_string()))?;
        if cal.params.k_splits != config.k_splits || cal.params.alpha != config.alpha {
            return Err(Failure::usage(format!(
                "calibration file was made for k_splits = {} and alpha = {}",
                cal.params.k_splits, cal.params.alpha
            )));
        }
        if cal.params.p != x.p() || cal.params.n1 != x.n() || cal.params.n2 != y.n() {
            eprintln!("warning: calibration shape differs from the data");
        }
        // A calibrated threshold may sit below alpha, so it bypasses the
        // explicit-value check by running with the resolved value.
        delta_source = "calibration_file";
        config.theta = match config.theta {
            ThetaSpec::Auto => ThetaSpec::Value(cal.params.theta),
            t => t,
        };
        let theta = match config.theta {
            ThetaSpec::Value(t) => t,
            ThetaSpec::Auto => unreachable!(),
        };
        let summary = uhdtest::procedure::run_test_resolved(&x, &y, &config, theta, cal.delta)
            .map_err(|e| classify(e, explicit_n))?;
        return finish(summary, &config, &x, &y, delta_source, "explicit", out);
    }
    let theta_source = match args.theta {
        ThetaArg::Value(_) => "explicit",
        ThetaArg::Auto => "tuned",
    };
    let summary = run_test(&x, &y, &config).map_err(|e| classify(e, explicit_n))?;
    finish(summary, &config, &x, &y, delta_source, theta_source, out)
}

fn finish(
    s: uhdtest::DecisionSummary,
    config: &TestConfig,
    x: &uhdtest::DataMatrix,
    y: &uhdtest::DataMatrix,
    delta_source: &str,
    theta_source: &str,
    out: Option<&Path>,
) -> CmdResult {
    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        reject: s.reject,
        dr: s.dr,
        delta: s.delta_used,
        delta_source: delta_source.to_string(),
        alpha: config.alpha,
        theta: s.theta_used,
        theta_source: theta_source.to_string(),
        n: s.n_used,
        k_splits: config.k_splits,
        n_auto_reject: s.n_auto_reject,
        n_efficient: s.n_efficient,
        n_discarded: s.n_discarded,
        rounds: s.rounds,
        eps: config.eps,
        eps1: config.eps1,
        seed: config.seed,
        n1: x.n(),
        n2: y.n(),
        p: x.p(),
    };
    emit(out, &report.render())?;
    Ok(if report.reject { EXIT_REJECT } else { EXIT_ACCEPT })
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_calibrate(
    n1: usize,
    n2: usize,
    n: Option<usize>,
    p: usize,
    k_splits: usize,
    alpha: f64,
    b: usize,
    theta: f64,
    seed: u64,
    out: Option<&Path>,
) -> CmdResult {
    if b == 0 {
        return Err(Failure::usage("--b must be at least 1"));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Failure::usage("--theta must be positive"));
    }
    let config = TestConfig { n, k_splits, alpha, theta: ThetaSpec::Value(theta), ..TestConfig::default() };
    let n = config.resolve_n(n1, n2).map_err(|e| Failure::usage(e.to_string()))?;
    let cal = calibrate_delta(n1, n2, n, p, k_splits, alpha, b, theta, seed).map_err(|e| classify(e, true))?;
    emit(out, &render_calibration(&cal))?;
    Ok(EXIT_ACCEPT)
}

pub fn cmd_tune(x_path: &Path, y_path: &Path, args: &TestArgs, unsmoothed: bool, out: Option<&Path>) -> CmdResult {
    let config = args.config();
    let explicit_n = args.n.is_some();
    let x = load(x_path)?;
    let y = load(y_path)?;
    let prepared = prepare_splits(&x, &y, &config).map_err(|e| classify(e, explicit_n))?;
    let reading = if unsmoothed { TunerReading::Unsmoothed } else { TunerReading::Smoothed };
    let grid = ThetaGrid::default();
    let sel = select_theta_prepared(&prepared, config.alpha, &grid, reading).map_err(|e| classify(e, explicit_n))?;
    let mut d = crate::report::KvDoc::new();
    d.push("schema_version", crate::report::SCHEMA_VERSION)
        .push("kind", "tuning")
        .push("theta", sel.theta)
        .push("index", sel.index)
        .push("fallback", sel.fallback)
        .push("reading", if unsmoothed { "unsmoothed" } else { "smoothed" })
        .push("seed", config.seed)
        .push("k_splits", config.k_splits)
        .push("n", prepared.n)
        .push_list("grid", grid.values())
        .push_list("dr", &sel.dr)
        .push_list("smoothed", &sel.smoothed);
    emit(out, &d.render())?;
    Ok(EXIT_ACCEPT)
}

pub const CSV_HEADER: &str = "case,p,n1,n2,dist,hypothesis,param,seed,reps,rejections,rejection_rate,mean_dr,delta,wall_time";

fn csv_row(r: &SweepResult) -> String {
    let s = &r.scenario;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        s.case,
        s.p,
        s.n1,
        s.n2,
        s.dist,
        s.hypothesis,
        s.param.map_or(String::new(), |v| v.to_string()),
        s.seed,
        r.reps,
        r.rejections,
        r.rejection_rate,
        r.mean_dr,
        r.delta.map_or(String::new(), |v| v.to_string()),
        r.wall_time.as_secs_f64()
    )
}

pub fn cmd_simulate(path: &Path, reps: usize, grid: Option<&[f64]>, args: &TestArgs, out: Option<&Path>) -> CmdResult {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let scenario = parse_scenario(&text).map_err(|e| Failure::data(e.to_string()))?;
    if reps == 0 {
        return Err(Failure::usage("--reps must be at least 1"));
    }
    let config = args.config();
    let explicit_n = args.n.is_some();
    let results: Vec<SweepResult> = match grid {
        Some(eps) => power_curve(&scenario, eps, reps, &config)
            .map_err(|e| classify(e, explicit_n))?
            .into_iter()
            .map(|(_, r)| r)
            .collect(),
        None => vec![empirical_size_power(&scenario, reps, &config).map_err(|e| classify(e, explicit_n))?],
    };
    let rows: String = results.iter().map(|r| csv_row(r) + "\n").collect();
    match out {
        Some(p) => {
            let fresh = fs::metadata(p).map(|m| m.len() == 0).unwrap_or(true);
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Failure::data(format!("{}: {e}", p.display())))?;
            let header = if fresh { format!("{CSV_HEADER}\n") } else { String::new() };
            f.write_all((header + &rows).as_bytes()).map_err(|e| Failure::data(e.to_string()))?;
        }
        None => emit(None, &format!("{CSV_HEADER}\n{rows}"))?,
    }
    Ok(EXIT_ACCEPT)
}

#[derive(Debug, Serialize)]
struct Overlay {
    mode: String,
    phi: f64,
    support: (f64, f64),
    center: f64,
    /// Median classical location.
    median_location: f64,
    grid: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize)]
struct SpectraOutput {
    n: usize,
    p: usize,
    eigenvalues: Vec<f64>,
    summary: SpectrumSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    overlay: Option<Overlay>,
}

fn overlay(model: &SpectralModel, n: usize, points: usize) -> std::result::Result<Overlay, Failure> {
    let (lo, hi) = model.support;
    let points = points.max(2);
    let grid = (0..points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            (x, model.density(x))
        })
        .collect();
    let omega = classical_locations(model, n.max(2)).map_err(|e| Failure::data(e.to_string()))?.omega;
    let median_location = uhdtest::stats::median(&omega);
    Ok(Overlay {
        mode: format!("{:?}", model.mode),
        phi: model.phi,
        support: model.support,
        center: model.center(),
        median_location,
        grid,
    })
}

pub fn cmd_spectra(x_path: &Path, population: Option<&Path>, exact: bool, points: usize, out: Option<&Path>) -> CmdResult {
    let x = load(x_path)?;
    let spec: Spectrum = sample_covariance_spectrum(&x).map_err(|e| Failure::data(e.to_string()))?;
    let summary = spectrum_summary(&spec).map_err(|e| Failure::data(e.to_string()))?;
    let overlay = match population {
        Some(p) => {
            let sigma = read_values(p).map_err(|e| Failure::data(e.to_string()))?;
            let pop = PopulationSpectrum::new(sigma).map_err(|e| Failure::data(e.to_string()))?;
            let phi = x.p() as f64 / x.n() as f64;
            let model = if exact {
                exact_model(&pop, phi).map_err(|e| Failure::data(e.to_string()))?
            } else {
                semicircle_model(&pop, phi)
            };
            Some(overlay(&model, x.n(), points)?)
        }
        None => None,
    };
    let doc = SpectraOutput { n: x.n(), p: x.p(), eigenvalues: spec.eigenvalues, summary, overlay };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::data(e.to_string()))? + "\n";
    emit(out, &text)?;
    Ok(EXIT_ACCEPT)
}

/// Threshold preview used by the README examples and tests.
pub fn threshold_pair(k: usize, alpha: f64) -> (f64, f64) {
    (dr_threshold(k, alpha, ThresholdMode::Gaussian), dr_threshold(k, alpha, ThresholdMode::Binomial))
}
