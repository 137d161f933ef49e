use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("split size error: {0}")]
    Size(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("spectrum has zero spread; bandwidth is undefined")]
    DegenerateSpectrum,

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("fixed-point iteration did not converge: {0}")]
    Convergence(String),

    #[error(
        "no usable splits after {rounds} rounds of {k_splits}: every split was discarded \
         (bulk spectra overlap too little for efficiency yet never separate enough to auto-reject)"
    )]
    NoUsableSplits { rounds: usize, k_splits: usize },

    #[error("theta grid needs at least 6 strictly increasing positive values, got {0}")]
    GridTooSmall(usize),

    #[error("covariance is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
