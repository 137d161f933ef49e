//! Windowed eigenvalue statistics.
//!
//! Each test-bed spectrum contributes `sum_j u_j K(u_j)` with
//! `u_j = (lambda_j - gamma) / eta0` and `K` the mollifier: a smoothed
//! indicator of `[-1, 1]` whose shoulders reach zero at `|x| = 1.05`.

mod variance;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::Spectrum;
use crate::splitkit::SplitClass;
use crate::stats::normal_quantile;

pub use variance::{
    tail_reduction, variance_constant, variance_functional_adaptive, variance_functional_tensor, Profile, VarianceConstant,
    VarianceMethod,
};

/// Outer edge of the mollifier support.
pub const KERNEL_SUPPORT: f64 = 1.05;
const SHOULDER_SQ: f64 = 0.05 * 0.05;
const LOG_FLUSH: f64 = -700.0;

/// The mollifier kernel.
pub fn mollifier(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 1.0 {
        1.0
    } else if ax >= KERNEL_SUPPORT {
        0.0
    } else {
        let d = ax - 1.0;
        let gap = SHOULDER_SQ - d * d;
        if gap <= 0.0 {
            return 0.0;
        }
        let log_k = 1.0 / SHOULDER_SQ - 1.0 / gap;
        if log_k < LOG_FLUSH {
            0.0
        } else {
            log_k.exp()
        }
    }
}

/// Derivative of [`mollifier`].
pub fn mollifier_derivative(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 1.0 || ax >= KERNEL_SUPPORT {
        return 0.0;
    }
    let d = ax - 1.0;
    let gap = SHOULDER_SQ - d * d;
    let k = mollifier(x);
    if k == 0.0 {
        return 0.0;
    }
    -2.0 * d / (gap * gap) * k * x.signum()
}

/// `sum_j u_j K(u_j)`, `u_j = (lambda_j - gamma) / eta0`, over eigenvalues
/// strictly inside the kernel support.
pub fn local_statistic(spec: &Spectrum, gamma: f64, eta0: f64) -> Result<f64> {
    if !(eta0 > 0.0 && eta0.is_finite()) {
        return Err(Error::InvalidBandwidth(eta0));
    }
    if spec.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let reach = KERNEL_SUPPORT * eta0;
    Ok(spec
        .eigenvalues
        .iter()
        .filter(|&&l| (l - gamma).abs() < reach)
        .map(|&l| {
            let u = (l - gamma) / eta0;
            u * mollifier(u)
        })
        .sum())
}

pub fn two_sample_statistic(spec_x: &Spectrum, spec_y: &Spectrum, gamma: f64, eta0: f64) -> Result<f64> {
    Ok(local_statistic(spec_x, gamma, eta0)? - local_statistic(spec_y, gamma, eta0)?)
}

/// Rejection boundary `z_{1-alpha/2} sqrt(2v)`.
pub fn critical_value(alpha: f64, v: &VarianceConstant) -> f64 {
    normal_quantile(1.0 - alpha / 2.0) * (2.0 * v.v).sqrt()
}

/// Per-split vote: 1 iff `|t| >= z_{1-alpha/2} sqrt(2v)`.
pub fn split_decision(t: f64, alpha: f64, v: &VarianceConstant) -> u8 {
    u8::from(t.abs() >= critical_value(alpha, v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub gamma: f64,
    /// Bandwidth; zero for automatic rejections, which never evaluate it.
    pub eta0: f64,
    pub t_x: f64,
    pub t_y: f64,
    pub t: f64,
    pub class: SplitClass,
    pub vote: u8,
}
