//! The variance constant
//! `v = (1 / 2 pi^2) * iint (K(x1) - K(x2))^2 / (x1 - x2)^2 dx1 dx2`.
//!
//! Outside `[-L, L]` (`L = 1.05`) the kernel is zero, so the two mixed
//! regions collapse to the one-dimensional tail
//! `int_{-L}^{L} K(x)^2 (1/(L - x) + 1/(L + x)) dx` each. The remaining
//! square is evaluated twice, by a tensorized composite Gauss–Legendre rule
//! (diagonal nodes take the limit `K'(x)^2`) and by nested adaptive
//! Gauss–Kronrod with the inner range split at the diagonal. Both must agree
//! to `1e-6` relative before the value is accepted.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{mollifier, mollifier_derivative, KERNEL_SUPPORT};
use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, integrate_with_breaks, QuadOptions};

const AGREEMENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceMethod {
    /// Value from the tensor Gauss–Legendre rule, checked by nested adaptive
    /// Gauss–Kronrod.
    TensorGaussLegendreCheckedByAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceConstant {
    pub v: f64,
    pub method: VarianceMethod,
    /// Absolute disagreement between the two schemes.
    pub est_error: f64,
}

/// A kernel-like function: `f` on `[-half_width, half_width]`, constant
/// `outside` beyond it, with interior breakpoints where it is not analytic.
pub struct Profile<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    pub df: &'a dyn Fn(f64) -> f64,
    /// Sorted, starting at `-half_width` and ending at `half_width`.
    pub breaks: &'a [f64],
    pub outside: f64,
}

impl Profile<'_> {
    fn half_width(&self) -> f64 {
        *self.breaks.last().expect("breakpoints")
    }

    fn tail_weight(&self, x: f64, cutoff: f64) -> f64 {
        let l = self.half_width();
        let d = (self.f)(x) - self.outside;
        if d == 0.0 {
            return 0.0;
        }
        let right = 1.0 / (l - x) - if cutoff.is_finite() { 1.0 / (cutoff - x) } else { 0.0 };
        let left = 1.0 / (l + x) - if cutoff.is_finite() { 1.0 / (cutoff + x) } else { 0.0 };
        d * d * (right + left)
    }

    fn pair(&self, x: f64, y: f64, fx: f64, fy: f64) -> f64 {
        let h = x - y;
        if h.abs() < 1e-12 {
            let d = (self.df)(x);
            d * d
        } else {
            let d = fx - fy;
            d * d / (h * h)
        }
    }
}

fn mollifier_breaks() -> [f64; 10] {
    // The shoulder collapses to ~1e-7 within 0.01 of the plateau edge, and
    // pairs straddling a plateau edge vary on the same scale.
    [-KERNEL_SUPPORT, -1.01, -1.0, -0.99, -0.9, 0.9, 0.99, 1.0, 1.01, KERNEL_SUPPORT]
}

fn panel_edges(breaks: &[f64]) -> Vec<f64> {
    let mut edges = vec![breaks[0]];
    for ab in breaks.windows(2) {
        let len = ab[1] - ab[0];
        let h = if len <= 0.011 { 2.5e-4 } else if len <= 0.1 { 2e-3 } else { 0.1 };
        let m = (len / h).ceil().max(1.0) as usize;
        for i in 1..=m {
            edges.push(ab[0] + len * i as f64 / m as f64);
        }
    }
    edges
}

/// Scheme A: tensor product of composite Gauss–Legendre panels.
pub fn variance_functional_tensor(profile: &Profile<'_>, order: usize) -> f64 {
    let (gx, gw) = gauss_legendre(order);
    let edges = panel_edges(profile.breaks);
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for ab in edges.windows(2) {
        let c = 0.5 * (ab[0] + ab[1]);
        let h = 0.5 * (ab[1] - ab[0]);
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(c + h * x);
            ws.push(h * w);
        }
    }
    let fs: Vec<f64> = xs.iter().map(|&x| (profile.f)(x)).collect();
    let dfs: Vec<f64> = xs.iter().map(|&x| (profile.df)(x)).collect();
    let mut inner = 0.0;
    for i in 0..xs.len() {
        let mut row = 0.0;
        for j in 0..i {
            if fs[i] == fs[j] {
                continue;
            }
            let h = xs[i] - xs[j];
            let d = fs[i] - fs[j];
            row += ws[j] * d * d / (h * h);
        }
        // Off-diagonal pairs appear twice by symmetry; the diagonal once.
        inner += ws[i] * (2.0 * row + ws[i] * dfs[i] * dfs[i]);
    }
    let tail: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * profile.tail_weight(x, f64::INFINITY)).sum();
    (inner + 2.0 * tail) / (2.0 * PI * PI)
}

/// Scheme B: nested adaptive Gauss–Kronrod, inner range split at `y = x`.
pub fn variance_functional_adaptive(profile: &Profile<'_>) -> Result<f64> {
    let inner_opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_panels: 4000 };
    let outer_opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_panels: 4000 };
    let mut failure = None;
    let outer = integrate_with_breaks(
        |x| {
            let fx = (profile.f)(x);
            let mut pts: Vec<f64> = profile.breaks.to_vec();
            pts.push(x);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let g = integrate_with_breaks(|y| profile.pair(x, y, fx, (profile.f)(y)), &pts, inner_opts);
            match g {
                Ok(r) => r.value + 2.0 * profile.tail_weight(x, f64::INFINITY),
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        profile.breaks,
        outer_opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(outer?.value / (2.0 * PI * PI))
}

/// Mixed-region contribution `int K(x)^2 [(1/(L-x) - 1/(R-x)) + (1/(L+x) - 1/(R+x))] dx`
/// for the second variable restricted to `L < |y| < cutoff`; `cutoff = inf`
/// gives the full closed-form tail.
pub fn tail_reduction(cutoff: f64) -> Result<f64> {
    let df = mollifier_derivative;
    let breaks = mollifier_breaks();
    let profile = Profile { f: &mollifier, df: &df, breaks: &breaks, outside: 0.0 };
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-13, max_panels: 4000 };
    Ok(integrate_with_breaks(|x| profile.tail_weight(x, cutoff), &breaks, opts)?.value)
}

fn compute() -> Result<VarianceConstant> {
    let df = mollifier_derivative;
    let breaks = mollifier_breaks();
    let profile = Profile { f: &mollifier, df: &df, breaks: &breaks, outside: 0.0 };
    let a = variance_functional_tensor(&profile, 12);
    let b = variance_functional_adaptive(&profile)?;
    let diff = (a - b).abs();
    if !(diff <= AGREEMENT * a.abs()) {
        return Err(Error::Quadrature(format!(
            "tensor rule gave {a}, adaptive rule gave {b}; relative gap {:e}",
            diff / a.abs()
        )));
    }
    Ok(VarianceConstant { v: a, method: VarianceMethod::TensorGaussLegendreCheckedByAdaptive, est_error: diff })
}

static CACHE: OnceLock<Result<VarianceConstant>> = OnceLock::new();

/// The variance constant, computed on first use and cached for the process.
pub fn variance_constant() -> Result<VarianceConstant> {
    CACHE.get_or_init(compute).clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_has_zero_functional() {
        let f = |_x: f64| 0.7;
        let df = |_x: f64| 0.0;
        let breaks = [-1.0, 0.0, 1.0];
        let p = Profile { f: &f, df: &df, breaks: &breaks, outside: 0.7 };
        assert_eq!(variance_functional_tensor(&p, 8), 0.0);
        assert_eq!(variance_functional_adaptive(&p).unwrap(), 0.0);
    }

    #[test]
    fn smooth_bump_schemes_agree() {
        // 1 - x^2 on [-1, 1], zero outside.
        let f = |x: f64| if x.abs() < 1.0 { 1.0 - x * x } else { 0.0 };
        let df = |x: f64| if x.abs() < 1.0 { -2.0 * x } else { 0.0 };
        let breaks = [-1.0, 1.0];
        let p = Profile { f: &f, df: &df, breaks: &breaks, outside: 0.0 };
        let a = variance_functional_tensor(&p, 16);
        let b = variance_functional_adaptive(&p).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() < 1e-8 * a, "{a} vs {b}");
    }

    #[test]
    fn shipped_constant_is_positive_and_cross_validated() {
        let v = variance_constant().unwrap();
        assert!(v.v > 0.0);
        assert!(v.est_error <= 1e-6 * v.v);
    }
}
