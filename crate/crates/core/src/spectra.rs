//! Scaled sample-covariance spectra computed through the centered Gram matrix.
//!
//! For an `n x p` block with `p` possibly in the tens of thousands, the
//! nonzero eigenvalues of `(pn)^{-1/2} * sum_i (x_i - xbar)(x_i - xbar)^T`
//! coincide with those of the `n x n` matrix `(pn)^{-1/2} * Xc Xc^T`. Only the
//! latter is ever formed. Centering leaves one structural zero in the Gram
//! spectrum, which is dropped: a [`Spectrum`] always holds `n - 1` values.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x p` sample block stored row-major; rows are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(format!("need at least 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(Error::Dimension("need at least 1 column".into()));
        }
        if values.len() != n * p {
            return Err(Error::Dimension(format!(
                "expected {} values for a {n}x{p} matrix, got {}",
                n * p,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite entry at row {}, column {}",
                i / p,
                i % p
            )));
        }
        Ok(Self { n, p, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension(format!("row {r} has {} columns, expected {p}", rows[r].len())));
        }
        Self::new(rows.len(), p, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.p, values)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.p, self.values.iter().map(|v| v * c).collect())
    }
}

/// Descending eigenvalues of a scaled centered sample covariance, structural
/// zero removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Sample count of the block the spectrum came from.
    pub n: usize,
    /// Feature count; 0 when built from raw values.
    pub p: usize,
}

impl Spectrum {
    /// Builds a spectrum from arbitrary values (sorted descending). The source
    /// dimensions are unknown, so `n = len + 1` and `p = 0`.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let n = values.len() + 1;
        Self { eigenvalues: values, n, p: 0 }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest eigenvalue. Panics on an empty spectrum.
    pub fn largest(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn smallest(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn range(&self) -> f64 {
        self.largest() - self.smallest()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub median: f64,
    pub std: f64,
    pub range: f64,
    pub max: f64,
    pub min: f64,
}

/// Full descending spectrum of the `n x n` matrix `(pn)^{-1/2} Xc Xc^T`,
/// including the structural zero. Exposed for diagnostics.
pub fn centered_gram_eigenvalues(data: &DataMatrix) -> Result<Vec<f64>> {
    let (n, p) = (data.n, data.p);
    let mut centered = data.values.clone();
    let mut mean = vec![0.0; p];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(data.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for row in centered.chunks_exact_mut(p) {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let xc = DMatrix::from_row_slice(n, p, &centered);
    let mut gram = &xc * xc.transpose();
    let scale = 1.0 / ((p as f64) * (n as f64)).sqrt();
    for j in 0..n {
        for i in j..n {
            let v = 0.5 * (gram[(i, j)] + gram[(j, i)]) * scale;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// Spectrum of the `(pn)^{-1/2}`-scaled centered sample covariance of `data`.
pub fn sample_covariance_spectrum(data: &DataMatrix) -> Result<Spectrum> {
    if data.n < 3 {
        return Err(Error::Dimension(format!(
            "need at least 3 rows for a non-trivial spectrum, got {}",
            data.n
        )));
    }
    let mut vals = centered_gram_eigenvalues(data)?;
    vals.pop();
    let tol = 1e-10 * vals[0].max(1.0);
    for v in &mut vals {
        if *v < -tol {
            return Err(Error::Numerical(format!("eigenvalue {v:e} is below -{tol:e}")));
        }
        if *v < tol {
            *v = 0.0;
        }
    }
    Ok(Spectrum { eigenvalues: vals, n: data.n, p: data.p })
}

pub fn spectrum_summary(s: &Spectrum) -> Result<SpectrumSummary> {
    if s.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let vals = &s.eigenvalues;
    let len = vals.len();
    // Descending order: the middle of the list is the median either way.
    let median = if len % 2 == 1 {
        vals[len / 2]
    } else {
        0.5 * (vals[len / 2 - 1] + vals[len / 2])
    };
    let mean = vals.iter().sum::<f64>() / len as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len as f64;
    let max = vals[0];
    let min = vals[len - 1];
    Ok(SpectrumSummary { median, std: var.sqrt(), range: max - min, max, min })
}
