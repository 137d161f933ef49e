//! Two-sample test for equality of covariance matrices when the feature
//! dimension dwarfs the sample sizes (`p >> n`).
//!
//! The test repeatedly splits the two samples, compares the eigenvalues of
//! `(pn)^{-1/2}`-scaled sample covariances inside a narrow window around a
//! reference location, and aggregates the per-split votes into a decision
//! ratio. Around the procedure sit the supporting pieces:
//!
//! * [`spectra`]: centered Gram-matrix spectra and summaries.
//! * [`splitkit`]: the three-way data splitter and split classification.
//! * [`teststat`]: mollifier kernel, windowed statistics, variance constant.
//! * [`procedure`]: the full K-split test and decision thresholds.
//! * [`tuning`]: bandwidth multiplier selection and threshold calibration.
//! * [`rmtlab`]: random-matrix oracles (Stieltjes fixed point, densities,
//!   classical locations, theoretical means).
//! * [`simharness`]: simulation scenarios and size/power sweeps.

// Guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod procedure;
pub mod quad;
pub mod rmtlab;
pub mod seeds;
pub mod simharness;
pub mod spectra;
pub mod splitkit;
pub mod stats;
pub mod teststat;
pub mod tuning;

pub use error::{Error, Result};
pub use procedure::{dr_threshold, run_test, DecisionSummary, DeltaSpec, TestConfig, ThetaSpec, ThresholdMode};
pub use spectra::{sample_covariance_spectrum, spectrum_summary, DataMatrix, Spectrum, SpectrumSummary};
pub use splitkit::{classify_split, split_once, SplitClass, SplitTag, SplitTriple};
pub use teststat::{local_statistic, mollifier, split_decision, two_sample_statistic, variance_constant, SplitRecord, VarianceConstant};
