//! Simulation scenarios and size/power sweeps.
//!
//! Three covariance designs: a Toeplitz matrix rescaled by a random diagonal,
//! the identity against a banded MA(1)-type perturbation, and a randomly
//! rotated diagonal against a shifted copy. Innovations are Gaussian or a
//! centered two-point law with fourth cumulant -1.5.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedure::{dr_threshold, run_test, run_test_resolved, DeltaSpec, TestConfig, ThetaSpec};
use crate::rmtlab::PopulationSpectrum;
use crate::seeds::{derive_seed, rng_for, Stream};
use crate::spectra::DataMatrix;
use crate::tuning::calibrate_delta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseId {
    /// Toeplitz `0.5^{|i-j|}`; alternative `D^{1/2} S D^{1/2}`, `d ~ U(0.5, 2.5)`.
    I,
    /// Identity; alternative `I + Delta` with `theta^2` diagonal and `theta` off-diagonal.
    II,
    /// `Q D Q^T`, `d ~ U(3, 6)`, Haar `Q`; alternative adds `eps I`.
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Innovation {
    Gaussian,
    TwoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    Null,
    Alternative,
}

macro_rules! text_enum {
    ($t:ty, $what:literal, $($v:path => [$($s:literal),+]),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = match self { $($v => [$($s),+][0]),+ };
                f.write_str(s)
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($($s)|+ => Ok($v),)+
                    other => Err(Error::Parse(format!(concat!("unknown ", $what, " '{}'"), other))),
                }
            }
        }
    };
}

text_enum!(CaseId, "case", CaseId::I => ["I", "i", "1"], CaseId::II => ["II", "ii", "2"], CaseId::III => ["III", "iii", "3"]);
text_enum!(Innovation, "distribution", Innovation::Gaussian => ["gaussian", "normal"], Innovation::TwoPoint => ["two_point", "two-point", "twopoint"]);
text_enum!(Hypothesis, "hypothesis", Hypothesis::Null => ["null", "h0"], Hypothesis::Alternative => ["alternative", "alt", "h1"]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub case: CaseId,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub dist: Innovation,
    pub hypothesis: Hypothesis,
    /// Case II `theta` or Case III `eps`; absent under the null and for Case I.
    pub param: Option<f64>,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidConfig("p must be positive".into()));
        }
        if self.n1 < 3 || self.n2 < 3 {
            return Err(Error::InvalidConfig("each sample needs at least 3 rows".into()));
        }
        let wants_param = self.hypothesis == Hypothesis::Alternative && self.case != CaseId::I;
        match (wants_param, self.param) {
            (true, Some(v)) if v > 0.0 && v.is_finite() => Ok(()),
            (true, Some(v)) => Err(Error::InvalidConfig(format!("case {} parameter must be positive, got {v}", self.case))),
            (true, None) => Err(Error::InvalidConfig(format!("case {} alternative needs a parameter", self.case))),
            (false, Some(_)) => Err(Error::InvalidConfig(format!(
                "case {} {} takes no parameter",
                self.case,
                self.hypothesis
            ))),
            (false, None) => Ok(()),
        }
    }
}

/// `Sigma = A A^T`, kept as the factor `A`.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Identity(usize),
    Dense(DMatrix<f64>),
}

impl Factor {
    pub fn p(&self) -> usize {
        match self {
            Factor::Identity(p) => *p,
            Factor::Dense(a) => a.nrows(),
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        match self {
            Factor::Identity(p) => DMatrix::identity(*p, *p),
            Factor::Dense(a) => a * a.transpose(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PopulationPair {
    pub sigma1_factor: Factor,
    pub sigma2_factor: Factor,
    pub sigma1_eigs: PopulationSpectrum,
    pub sigma2_eigs: PopulationSpectrum,
}

/// `V diag(sqrt(lambda)) V^T`.
fn sqrt_from_eigen(vectors: &DMatrix<f64>, values: &[f64]) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, &l) in values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(l.sqrt());
    }
    &scaled * vectors.transpose()
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    match values.iter().cloned().fold(f64::INFINITY, f64::min) {
        m if m > 0.0 => Ok(()),
        m => Err(Error::NotPositiveDefinite(format!("{what} has smallest eigenvalue {m:e}"))),
    }
}

/// Symmetric square root of a symmetric positive definite matrix.
fn symmetric_sqrt(sigma: DMatrix<f64>, what: &str) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let eig = SymmetricEigen::try_new(sigma, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical(format!("eigendecomposition of {what} did not converge")))?;
    let values: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    check_positive(&values, what)?;
    Ok((sqrt_from_eigen(&eig.eigenvectors, &values), values))
}

pub fn toeplitz_half(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| 0.5f64.powi((i as i32 - j as i32).abs()))
}

/// Eigenpairs of `I + Delta`: values `1 + theta^2 + 2 theta cos(k pi/(p+1))`,
/// vectors the discrete sine basis.
pub fn banded_eigenpairs(p: usize, theta: f64) -> (DMatrix<f64>, Vec<f64>) {
    let h = std::f64::consts::PI / (p + 1) as f64;
    let norm = (2.0 / (p + 1) as f64).sqrt();
    let vectors = DMatrix::from_fn(p, p, |j, k| norm * (h * ((j + 1) * (k + 1)) as f64).sin());
    let values = (1..=p).map(|k| 1.0 + theta * theta + 2.0 * theta * (h * k as f64).cos()).collect();
    (vectors, values)
}

pub fn banded_perturbation(p: usize, theta: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
        0 => 1.0 + theta * theta,
        1 => theta,
        _ => 0.0,
    })
}

/// Haar orthogonal matrix: QR of a Gaussian matrix with the signs of `R`'s
/// diagonal folded into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn gen_population<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<PopulationPair> {
    scenario.validate()?;
    let p = scenario.p;
    let alt = scenario.hypothesis == Hypothesis::Alternative;
    let (f1, e1, f2, e2) = match scenario.case {
        CaseId::I => {
            let base = toeplitz_half(p);
            let (a1, e1) = symmetric_sqrt(base.clone(), "Toeplitz covariance")?;
            if alt {
                let d: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.5)).collect();
                let s2 = DMatrix::from_fn(p, p, |i, j| d[i].sqrt() * base[(i, j)] * d[j].sqrt());
                let (a2, e2) = symmetric_sqrt(s2, "rescaled Toeplitz covariance")?;
                (Factor::Dense(a1), e1, Factor::Dense(a2), e2)
            } else {
                (Factor::Dense(a1.clone()), e1.clone(), Factor::Dense(a1), e1)
            }
        }
        CaseId::II => {
            let ones = vec![1.0; p];
            if alt {
                let theta = scenario.param.expect("validated");
                let (v, e2) = banded_eigenpairs(p, theta);
                check_positive(&e2, "banded covariance")?;
                (Factor::Identity(p), ones, Factor::Dense(sqrt_from_eigen(&v, &e2)), e2)
            } else {
                (Factor::Identity(p), ones.clone(), Factor::Identity(p), ones)
            }
        }
        CaseId::III => {
            let q = haar_orthogonal(p, rng);
            let d: Vec<f64> = (0..p).map(|_| rng.random_range(3.0..6.0)).collect();
            let a1 = sqrt_from_eigen(&q, &d);
            if alt {
                let eps = scenario.param.expect("validated");
                let d2: Vec<f64> = d.iter().map(|x| x + eps).collect();
                (Factor::Dense(a1), d, Factor::Dense(sqrt_from_eigen(&q, &d2)), d2)
            } else {
                (Factor::Dense(a1.clone()), d.clone(), Factor::Dense(a1), d)
            }
        }
    };
    Ok(PopulationPair {
        sigma1_factor: f1,
        sigma2_factor: f2,
        sigma1_eigs: PopulationSpectrum::new(e1)?,
        sigma2_eigs: PopulationSpectrum::new(e2)?,
    })
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// One innovation draw.
pub fn innovation<R: Rng + ?Sized>(dist: Innovation, rng: &mut R) -> f64 {
    match dist {
        Innovation::Gaussian => rng.sample(StandardNormal),
        Innovation::TwoPoint => {
            if rng.random_bool(1.0 / 3.0) {
                SQRT2
            } else {
                -SQRT2 / 2.0
            }
        }
    }
}

/// `n` rows `A xi` with i.i.d. innovations.
pub fn gen_sample<R: Rng + ?Sized>(factor: &Factor, n: usize, dist: Innovation, rng: &mut R) -> Result<DataMatrix> {
    if n < 3 {
        return Err(Error::Size(format!("a sample needs at least 3 rows, got {n}")));
    }
    let p = factor.p();
    let xi: Vec<f64> = (0..n * p).map(|_| innovation(dist, rng)).collect();
    let values = match factor {
        Factor::Identity(_) => xi,
        Factor::Dense(a) => {
            // Column-major p x n holds the innovations row by row; A * that
            // is the transposed sample, i.e. the sample in row-major order.
            let xt = DMatrix::from_column_slice(p, n, &xi);
            (a * xt).as_slice().to_vec()
        }
    };
    DataMatrix::new(n, p, values)
}

/// Draws both samples of replicate `index`.
pub fn gen_replicate(scenario: &Scenario, pair: &PopulationPair, index: u64) -> Result<(DataMatrix, DataMatrix)> {
    let mut rng = rng_for(scenario.seed, Stream::Replicate, index);
    let x = gen_sample(&pair.sigma1_factor, scenario.n1, scenario.dist, &mut rng)?;
    let y = gen_sample(&pair.sigma2_factor, scenario.n2, scenario.dist, &mut rng)?;
    Ok((x, y))
}

pub fn scenario_population(scenario: &Scenario) -> Result<PopulationPair> {
    gen_population(scenario, &mut rng_for(scenario.seed, Stream::Population, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: Scenario,
    pub reps: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub mean_dr: f64,
    /// Threshold used when it was fixed for the whole sweep.
    pub delta: Option<f64>,
    pub wall_time: Duration,
}

/// Resolves a sweep-wide `delta` when `theta` is fixed: calibration runs once
/// on the scenario's shape rather than once per replicate.
fn sweep_delta(scenario: &Scenario, config: &TestConfig) -> Result<Option<(f64, f64)>> {
    let ThetaSpec::Value(theta) = config.theta else {
        return Ok(None);
    };
    let n = config.resolve_n(scenario.n1, scenario.n2)?;
    let delta = match config.delta {
        DeltaSpec::Value(d) => d,
        DeltaSpec::Formula(mode) => dr_threshold(config.k_splits, config.alpha, mode),
        DeltaSpec::Calibrate { b } => {
            let seed = derive_seed(config.seed, Stream::Calibration, u64::MAX);
            calibrate_delta(scenario.n1, scenario.n2, n, scenario.p, config.k_splits, config.alpha, b, theta, seed)?.delta
        }
    };
    Ok(Some((theta, delta)))
}

pub fn empirical_size_power(scenario: &Scenario, reps: usize, config: &TestConfig) -> Result<SweepResult> {
    let fixed = sweep_delta(scenario, config)?;
    sweep_with(scenario, reps, config, fixed)
}

fn sweep_with(scenario: &Scenario, reps: usize, config: &TestConfig, fixed: Option<(f64, f64)>) -> Result<SweepResult> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let start = Instant::now();
    let pair = scenario_population(scenario)?;
    let outcomes = (0..reps)
        .into_par_iter()
        .map(|i| {
            let (x, y) = gen_replicate(scenario, &pair, i as u64)?;
            let c = TestConfig { seed: derive_seed(config.seed ^ scenario.seed, Stream::Test, i as u64), ..config.clone() };
            let s = match fixed {
                Some((theta, delta)) => run_test_resolved(&x, &y, &c, theta, delta)?,
                None => run_test(&x, &y, &c)?,
            };
            Ok((s.reject, s.dr))
        })
        .collect::<Result<Vec<_>>>()?;
    let rejections = outcomes.iter().filter(|o| o.0).count();
    let mean_dr = outcomes.iter().map(|o| o.1).sum::<f64>() / reps as f64;
    Ok(SweepResult {
        scenario: scenario.clone(),
        reps,
        rejections,
        rejection_rate: rejections as f64 / reps as f64,
        mean_dr,
        delta: fixed.map(|f| f.1),
        wall_time: start.elapsed(),
    })
}

/// Case III power over a grid of shifts. The population and replicate
/// streams are shared across grid points, and `eps = 0` runs the null.
pub fn power_curve(base: &Scenario, eps_grid: &[f64], reps: usize, config: &TestConfig) -> Result<Vec<(f64, SweepResult)>> {
    if base.case != CaseId::III {
        return Err(Error::InvalidConfig("power curves are defined for case III".into()));
    }
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::InvalidConfig("shift grid must be non-empty and non-negative".into()));
    }
    let fixed = sweep_delta(base, config)?;
    eps_grid
        .iter()
        .map(|&eps| {
            let s = if eps == 0.0 {
                Scenario { hypothesis: Hypothesis::Null, param: None, ..base.clone() }
            } else {
                Scenario { hypothesis: Hypothesis::Alternative, param: Some(eps), ..base.clone() }
            };
            Ok((eps, sweep_with(&s, reps, config, fixed)?))
        })
        .collect()
}
