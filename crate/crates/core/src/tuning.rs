//! Bandwidth multiplier selection and threshold calibration.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedure::{prepare_splits, PreparedSplits, TestConfig, ThetaSpec};
use crate::seeds::{derive_seed, rng_for, Stream};
use crate::spectra::{DataMatrix, SpectrumSummary};
use crate::teststat::variance_constant;

/// Bandwidth multiplier used when one has to be fixed up front, e.g. for a
/// threshold calibrated once and reused across many tests.
pub const DEFAULT_THETA: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    values: Vec<f64>,
}

impl ThetaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 6 {
            return Err(Error::GridTooSmall(values.len()));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) || values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("theta grid must be positive and strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `s` evenly spaced values from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, s: usize) -> Result<Self> {
        if s < 2 {
            return Err(Error::GridTooSmall(s));
        }
        Self::new((0..s).map(|i| lo + (hi - lo) * i as f64 / (s - 1) as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for ThetaGrid {
    /// Twelve values from 0.05 to 0.60.
    fn default() -> Self {
        Self::linspace(0.05, 0.60, 12).expect("static grid is valid")
    }
}

/// `eta0 = theta * std` of the reference spectrum.
pub fn bandwidth_from_theta(theta: f64, z_summary: &SpectrumSummary) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidBandwidth(theta));
    }
    if z_summary.std <= 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(theta * z_summary.std)
}

/// Which series the stability rule reads: the moving average (default) or
/// the raw decision ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TunerReading {
    #[default]
    Smoothed,
    Unsmoothed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSelection {
    pub theta: f64,
    /// Zero-based grid index of the choice.
    pub index: usize,
    pub fallback: bool,
    pub dr: Vec<f64>,
    pub smoothed: Vec<f64>,
}

/// Window-3 simple moving average; `s - 2` entries.
pub fn moving_average3(dr: &[f64]) -> Vec<f64> {
    dr.windows(3).map(|w| (w[0] + w[1] + w[2]) / 3.0).collect()
}

fn variance(xs: &[f64]) -> f64 {
    crate::stats::sample_variance(xs)
}

/// Applies the selection rule to a decision-ratio curve and returns the
/// zero-based grid index plus whether the fallback fired.
///
/// With 1-based `k`, `DR'_k` is the moving average for `k = 1..s-2` and
/// `v_t` the variance of the first `t + 1` entries of the read series. The
/// choice is the smallest `l` in `[3, s-2]` with `series_l > max / 5` and
/// `v_{l-2} > v_{l-1}`; otherwise the first maximiser of `DR'`.
pub fn select_index(dr: &[f64], reading: TunerReading) -> Result<(usize, bool)> {
    let s = dr.len();
    if s < 6 {
        return Err(Error::GridTooSmall(s));
    }
    let smoothed = moving_average3(dr);
    let series: &[f64] = match reading {
        TunerReading::Smoothed => &smoothed,
        TunerReading::Unsmoothed => &dr[..s - 2],
    };
    let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // v[t] for 1-based t = 1..s-3 stored at v[t - 1].
    let v: Vec<f64> = (1..=s - 3).map(|t| variance(&series[..=t])).collect();
    for l in 3..=s - 2 {
        if series[l - 1] > max / 5.0 && v[l - 3] > v[l - 2] {
            return Ok((l - 1, false));
        }
    }
    let smax = smoothed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = smoothed.iter().position(|&d| d == smax).unwrap_or(0);
    Ok((first, true))
}

/// Decision ratios over a grid, reusing one set of splits.
pub fn dr_curve(prepared: &PreparedSplits, alpha: f64, grid: &ThetaGrid) -> Result<Vec<f64>> {
    let v = variance_constant()?;
    grid.values().iter().map(|&t| Ok(prepared.evaluate(t, alpha, &v)?.dr)).collect()
}

pub fn select_theta_prepared(
    prepared: &PreparedSplits,
    alpha: f64,
    grid: &ThetaGrid,
    reading: TunerReading,
) -> Result<ThetaSelection> {
    let dr = dr_curve(prepared, alpha, grid)?;
    let (index, fallback) = select_index(&dr, reading)?;
    let smoothed = moving_average3(&dr);
    Ok(ThetaSelection { theta: grid.values()[index], index, fallback, dr, smoothed })
}

pub fn select_theta(x: &DataMatrix, y: &DataMatrix, config: &TestConfig, grid: &ThetaGrid) -> Result<f64> {
    let prepared = prepare_splits(x, y, config)?;
    Ok(select_theta_prepared(&prepared, config.alpha, grid, TunerReading::Smoothed)?.theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub n1: usize,
    pub n2: usize,
    pub n: usize,
    pub p: usize,
    pub k_splits: usize,
    pub alpha: f64,
    pub theta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub delta: f64,
    pub dr_samples: Vec<f64>,
    pub b: usize,
    pub params: CalibrationParams,
}

/// The `ceil(level * len)`-th order statistic (1-based) of `samples`.
pub fn upper_order_statistic(samples: &[f64], level: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    // Guard against 0.95 * 1000 landing a hair above 950.
    let rank = ((level * b as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(b) - 1]
}

pub fn standard_gaussian<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> DataMatrix {
    let values = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    DataMatrix::new(n, p, values).expect("finite Gaussian draws")
}

/// Decision-ratio distribution under standard Gaussian data of the given
/// shape, and its `(1 - alpha)` order statistic.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_delta(
    n1: usize,
    n2: usize,
    n: usize,
    p: usize,
    k_splits: usize,
    alpha: f64,
    b: usize,
    theta: f64,
    seed: u64,
) -> Result<CalibrationResult> {
    if b == 0 {
        return Err(Error::InvalidConfig("calibration needs at least one replicate".into()));
    }
    if p == 0 {
        return Err(Error::InvalidConfig("feature count must be positive".into()));
    }
    let base = TestConfig {
        n: Some(n),
        k_splits,
        alpha,
        theta: ThetaSpec::Value(theta),
        ..TestConfig::default()
    };
    base.resolve_n(n1, n2)?;
    let v = variance_constant()?;
    let dr_samples = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, Stream::Calibration, i as u64);
            let x = standard_gaussian(n1, p, &mut rng);
            let y = standard_gaussian(n2, p, &mut rng);
            let config = TestConfig { seed: derive_seed(seed, Stream::Calibration, i as u64), ..base.clone() };
            let prepared = prepare_splits(&x, &y, &config)?;
            Ok(prepared.evaluate(theta, alpha, &v)?.dr)
        })
        .collect::<Result<Vec<f64>>>()?;
    let delta = upper_order_statistic(&dr_samples, 1.0 - alpha);
    Ok(CalibrationResult {
        delta,
        dr_samples,
        b,
        params: CalibrationParams { n1, n2, n, p, k_splits, alpha, theta, seed },
    })
}
