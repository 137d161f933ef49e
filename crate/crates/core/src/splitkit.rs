//! Three-way data splitting and split classification.
//!
//! A split draws `n` rows from each sample as test beds and `n` further rows
//! from the larger sample (ties go to `X`) as the reference block `Z`, which
//! supplies the window location. Each split is then classified as an
//! automatic rejection, an efficient split, or discarded.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{DataMatrix, Spectrum};

pub const DEFAULT_EPS: f64 = 0.05;
pub const DEFAULT_EPS1: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sample {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitTriple {
    pub x_indices: Vec<usize>,
    pub y_indices: Vec<usize>,
    /// Rows of the larger parent, disjoint from its test-bed rows.
    pub z_indices: Vec<usize>,
    pub z_source: Sample,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitTag {
    AutoReject,
    Efficient,
    Discarded,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::AutoReject => "auto_reject",
            SplitTag::Efficient => "efficient",
            SplitTag::Discarded => "discarded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitClass {
    pub tag: SplitTag,
    /// Median of the reference spectrum.
    pub gamma: f64,
}

/// `N = min{max(n1, n2)/2, n1, n2}`; a split size must be strictly below it.
pub fn split_bound(n1: usize, n2: usize) -> f64 {
    (n1.max(n2) as f64 / 2.0).min(n1 as f64).min(n2 as f64)
}

/// `floor(N) - 5`, the default split size.
pub fn default_split_size(n1: usize, n2: usize) -> Result<usize> {
    let bound = split_bound(n1, n2).floor() as usize;
    bound
        .checked_sub(5)
        .filter(|&n| n >= 3)
        .ok_or_else(|| Error::Size(format!("samples of {n1} and {n2} rows are too small for a default split size")))
}

pub fn validate_split_size(n: usize, n1: usize, n2: usize) -> Result<()> {
    let bound = split_bound(n1, n2);
    if n < 3 {
        return Err(Error::Size(format!("split size must be at least 3, got {n}")));
    }
    if n as f64 >= bound {
        return Err(Error::Size(format!("split size {n} must be strictly below N = {bound}")));
    }
    Ok(())
}

/// Partial Fisher–Yates: the first `k` entries of `pool` become a uniform
/// draw without replacement.
fn partial_shuffle<R: Rng + ?Sized>(pool: &mut [usize], k: usize, rng: &mut R) {
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
}

pub fn split_once<R: Rng + ?Sized>(x: &DataMatrix, y: &DataMatrix, n: usize, rng: &mut R) -> Result<SplitTriple> {
    split_sizes(x.n(), y.n(), x.p(), y.p(), n, rng)
}

/// Index-only form of [`split_once`] for callers that know the shapes.
pub fn split_sizes<R: Rng + ?Sized>(
    n1: usize,
    n2: usize,
    p1: usize,
    p2: usize,
    n: usize,
    rng: &mut R,
) -> Result<SplitTriple> {
    if p1 != p2 {
        return Err(Error::Dimension(format!("X has {p1} columns but Y has {p2}")));
    }
    validate_split_size(n, n1, n2)?;
    let z_source = if n1 >= n2 { Sample::X } else { Sample::Y };
    let mut xs: Vec<usize> = (0..n1).collect();
    let mut ys: Vec<usize> = (0..n2).collect();
    let (x_indices, y_indices, z_indices) = match z_source {
        Sample::X => {
            partial_shuffle(&mut xs, 2 * n, rng);
            partial_shuffle(&mut ys, n, rng);
            (xs[..n].to_vec(), ys[..n].to_vec(), xs[n..2 * n].to_vec())
        }
        Sample::Y => {
            partial_shuffle(&mut xs, n, rng);
            partial_shuffle(&mut ys, 2 * n, rng);
            (xs[..n].to_vec(), ys[..n].to_vec(), ys[n..2 * n].to_vec())
        }
    };
    Ok(SplitTriple { x_indices, y_indices, z_indices, z_source, n })
}

pub fn classify_split(spec_x: &Spectrum, spec_y: &Spectrum, spec_z: &Spectrum, eps: f64, eps1: f64) -> Result<SplitClass> {
    if spec_x.is_empty() || spec_y.is_empty() || spec_z.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let gamma = crate::spectra::spectrum_summary(spec_z)?.median;
    let (l1, ln) = (spec_x.largest(), spec_x.smallest());
    let (m1, mn) = (spec_y.largest(), spec_y.smallest());
    let (rx, ry) = (l1 - ln, m1 - mn);

    let separation = (l1 - mn).abs().max((m1 - ln).abs());
    let tag = if separation > rx + ry + eps1 {
        SplitTag::AutoReject
    } else {
        let fits_y = (gamma - m1).abs().max((gamma - mn).abs()) <= ry - eps;
        let fits_x = (gamma - l1).abs().max((gamma - ln).abs()) <= rx - eps;
        if fits_x && fits_y {
            SplitTag::Efficient
        } else {
            SplitTag::Discarded
        }
    };
    Ok(SplitClass { tag, gamma })
}
