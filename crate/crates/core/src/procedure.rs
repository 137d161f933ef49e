//! The repeated-splitting test: draw `K` splits, classify each, vote, and
//! compare the decision ratio with a threshold.
//!
//! Spectra depend only on the split, not on the bandwidth, so they are
//! computed once in [`PreparedSplits`] and reused by bandwidth sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{rng_for, Stream};
use crate::spectra::{sample_covariance_spectrum, spectrum_summary, DataMatrix, Spectrum, SpectrumSummary};
use crate::splitkit::{
    classify_split, default_split_size, split_once, validate_split_size, Sample, SplitClass, SplitTag,
    DEFAULT_EPS, DEFAULT_EPS1,
};
use crate::stats::{binomial_quantile, normal_quantile};
use crate::teststat::{split_decision, two_sample_statistic, variance_constant, SplitRecord, VarianceConstant};
use crate::tuning::{bandwidth_from_theta, calibrate_delta, select_theta_prepared, ThetaGrid, TunerReading};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdMode {
    Binomial,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThetaSpec {
    Value(f64),
    /// Select from the default grid with the bandwidth tuner.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeltaSpec {
    Value(f64),
    /// Calibrate on `b` standard Gaussian replicates of the same shape.
    Calibrate { b: usize },
    Formula(ThresholdMode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Split size; `None` means `floor(N) - 5`.
    pub n: Option<usize>,
    pub k_splits: usize,
    pub alpha: f64,
    pub eps: f64,
    pub eps1: f64,
    pub theta: ThetaSpec,
    pub delta: DeltaSpec,
    pub seed: u64,
    pub max_resample_rounds: usize,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            n: None,
            k_splits: 1000,
            alpha: 0.05,
            eps: DEFAULT_EPS,
            eps1: DEFAULT_EPS1,
            theta: ThetaSpec::Auto,
            delta: DeltaSpec::Formula(ThresholdMode::Binomial),
            seed: 0,
            max_resample_rounds: 10,
        }
    }
}

impl TestConfig {
    /// Checks the configuration against the sample sizes and returns the
    /// split size to use.
    pub fn resolve_n(&self, n1: usize, n2: usize) -> Result<usize> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.k_splits == 0 {
            return Err(Error::InvalidConfig("k_splits must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps1 > 0.0) {
            return Err(Error::InvalidConfig("eps and eps1 must be positive".into()));
        }
        if self.max_resample_rounds == 0 {
            return Err(Error::InvalidConfig("max_resample_rounds must be at least 1".into()));
        }
        match self.theta {
            ThetaSpec::Value(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::InvalidConfig(format!("theta must be positive, got {t}")));
            }
            _ => {}
        }
        match self.delta {
            DeltaSpec::Value(d) if !(d > self.alpha && d < 1.0) => {
                return Err(Error::InvalidConfig(format!("delta must lie in (alpha, 1), got {d}")));
            }
            DeltaSpec::Calibrate { b: 0 } => {
                return Err(Error::InvalidConfig("calibration needs at least one replicate".into()));
            }
            _ => {}
        }
        match self.n {
            Some(n) => {
                validate_split_size(n, n1, n2)?;
                Ok(n)
            }
            None => default_split_size(n1, n2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub dr: f64,
    pub n_auto_reject: usize,
    pub n_efficient: usize,
    pub n_discarded: usize,
    pub delta_used: f64,
    pub theta_used: f64,
    pub n_used: usize,
    /// Number of full rounds of `K` splits drawn (1 unless resampling kicked in).
    pub rounds: usize,
    pub reject: bool,
    pub records: Vec<SplitRecord>,
}

/// One split with its spectra already computed.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub class: SplitClass,
    pub spec_x: Spectrum,
    pub spec_y: Spectrum,
    pub z_summary: SpectrumSummary,
}

#[derive(Debug, Clone)]
pub struct PreparedSplits {
    pub splits: Vec<PreparedSplit>,
    pub n: usize,
    pub rounds: usize,
}

/// Per-split votes and the decision ratio for one bandwidth multiplier.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub records: Vec<SplitRecord>,
    pub dr: f64,
    pub n_auto_reject: usize,
    pub n_efficient: usize,
    pub n_discarded: usize,
}

#[allow(clippy::too_many_arguments)]
fn prepare_one(x: &DataMatrix, y: &DataMatrix, n: usize, eps: f64, eps1: f64, seed: u64, stream: Stream, index: u64) -> Result<PreparedSplit> {
    let mut rng = rng_for(seed, stream, index);
    let triple = split_once(x, y, n, &mut rng)?;
    let spec_x = sample_covariance_spectrum(&x.select_rows(&triple.x_indices)?)?;
    let spec_y = sample_covariance_spectrum(&y.select_rows(&triple.y_indices)?)?;
    let z_parent = match triple.z_source {
        Sample::X => x,
        Sample::Y => y,
    };
    let spec_z = sample_covariance_spectrum(&z_parent.select_rows(&triple.z_indices)?)?;
    let class = classify_split(&spec_x, &spec_y, &spec_z, eps, eps1)?;
    let z_summary = spectrum_summary(&spec_z)?;
    Ok(PreparedSplit { class, spec_x, spec_y, z_summary })
}

/// Draws and classifies `K` splits, redrawing the whole batch while none of
/// them is usable.
pub fn prepare_splits(x: &DataMatrix, y: &DataMatrix, config: &TestConfig) -> Result<PreparedSplits> {
    if x.p() != y.p() {
        return Err(Error::Dimension(format!("X has {} columns but Y has {}", x.p(), y.p())));
    }
    let n = config.resolve_n(x.n(), y.n())?;
    let k = config.k_splits;
    for round in 0..config.max_resample_rounds {
        let (stream, offset) = if round == 0 { (Stream::Split, 0) } else { (Stream::Resample, (round * k) as u64) };
        let splits = (0..k)
            .into_par_iter()
            .map(|i| prepare_one(x, y, n, config.eps, config.eps1, config.seed, stream, offset + i as u64))
            .collect::<Result<Vec<_>>>()?;
        if splits.iter().any(|s| s.class.tag != SplitTag::Discarded) {
            return Ok(PreparedSplits { splits, n, rounds: round + 1 });
        }
    }
    Err(Error::NoUsableSplits { rounds: config.max_resample_rounds, k_splits: k })
}

impl PreparedSplits {
    pub fn evaluate(&self, theta: f64, alpha: f64, v: &VarianceConstant) -> Result<Evaluation> {
        let records = self
            .splits
            .par_iter()
            .map(|s| evaluate_split(s, theta, alpha, v))
            .collect::<Result<Vec<_>>>()?;
        let count = |tag| records.iter().filter(|r| r.class.tag == tag).count();
        let (n_auto_reject, n_efficient, n_discarded) =
            (count(SplitTag::AutoReject), count(SplitTag::Efficient), count(SplitTag::Discarded));
        let votes: usize = records
            .iter()
            .filter(|r| r.class.tag != SplitTag::Discarded)
            .map(|r| r.vote as usize)
            .sum();
        let usable = n_auto_reject + n_efficient;
        if usable == 0 {
            return Err(Error::NoUsableSplits { rounds: self.rounds, k_splits: self.splits.len() });
        }
        let dr = votes as f64 / usable as f64;
        Ok(Evaluation { records, dr, n_auto_reject, n_efficient, n_discarded })
    }
}

fn evaluate_split(s: &PreparedSplit, theta: f64, alpha: f64, v: &VarianceConstant) -> Result<SplitRecord> {
    let gamma = s.class.gamma;
    match s.class.tag {
        SplitTag::AutoReject => {
            Ok(SplitRecord { gamma, eta0: 0.0, t_x: 0.0, t_y: 0.0, t: 0.0, class: s.class, vote: 1 })
        }
        SplitTag::Discarded => {
            Ok(SplitRecord { gamma, eta0: 0.0, t_x: 0.0, t_y: 0.0, t: 0.0, class: s.class, vote: 0 })
        }
        SplitTag::Efficient => {
            let eta0 = bandwidth_from_theta(theta, &s.z_summary)?;
            let t_x = crate::teststat::local_statistic(&s.spec_x, gamma, eta0)?;
            let t_y = crate::teststat::local_statistic(&s.spec_y, gamma, eta0)?;
            let t = t_x - t_y;
            debug_assert_eq!(t, two_sample_statistic(&s.spec_x, &s.spec_y, gamma, eta0)?);
            Ok(SplitRecord { gamma, eta0, t_x, t_y, t, class: s.class, vote: split_decision(t, alpha, v) })
        }
    }
}

/// Decision-ratio threshold from the binomial law of the vote count or its
/// normal approximation.
pub fn dr_threshold(k_splits: usize, alpha: f64, mode: ThresholdMode) -> f64 {
    let k = k_splits as f64;
    match mode {
        ThresholdMode::Gaussian => alpha + normal_quantile(1.0 - alpha / 2.0) * (alpha * (1.0 - alpha) / k).sqrt(),
        ThresholdMode::Binomial => binomial_quantile(k_splits as u64, alpha, 1.0 - alpha) as f64 / k,
    }
}

/// Runs the full test. `θ` is tuned first when requested, and calibration
/// reuses the resolved `θ`.
pub fn run_test(x: &DataMatrix, y: &DataMatrix, config: &TestConfig) -> Result<DecisionSummary> {
    let v = variance_constant()?;
    let prepared = prepare_splits(x, y, config)?;
    let theta = match config.theta {
        ThetaSpec::Value(t) => t,
        ThetaSpec::Auto => {
            select_theta_prepared(&prepared, config.alpha, &ThetaGrid::default(), TunerReading::Smoothed)?.theta
        }
    };
    let delta = match config.delta {
        DeltaSpec::Value(d) => d,
        DeltaSpec::Formula(mode) => dr_threshold(config.k_splits, config.alpha, mode),
        DeltaSpec::Calibrate { b } => {
            calibrate_delta(x.n(), y.n(), prepared.n, x.p(), config.k_splits, config.alpha, b, theta, config.seed)?.delta
        }
    };
    summarize(&prepared, theta, delta, config.alpha, &v)
}

/// Runs the test with an already resolved `theta` and `delta`. Sweeps use
/// this to calibrate once and reuse the threshold; `delta` is not checked
/// against `alpha` here because a calibrated value may fall below it.
pub fn run_test_resolved(x: &DataMatrix, y: &DataMatrix, config: &TestConfig, theta: f64, delta: f64) -> Result<DecisionSummary> {
    let v = variance_constant()?;
    let prepared = prepare_splits(x, y, config)?;
    summarize(&prepared, theta, delta, config.alpha, &v)
}

fn summarize(prepared: &PreparedSplits, theta: f64, delta: f64, alpha: f64, v: &VarianceConstant) -> Result<DecisionSummary> {
    let eval = prepared.evaluate(theta, alpha, v)?;
    Ok(DecisionSummary {
        dr: eval.dr,
        n_auto_reject: eval.n_auto_reject,
        n_efficient: eval.n_efficient,
        n_discarded: eval.n_discarded,
        delta_used: delta,
        theta_used: theta,
        n_used: prepared.n,
        rounds: prepared.rounds,
        reject: eval.dr > delta,
        records: eval.records,
    })
}
