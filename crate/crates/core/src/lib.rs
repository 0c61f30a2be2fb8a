//! Frequency-domain elastic wave simulation driven by microlocally isotropic
//! Gaussian sources, and recovery of the source micro-correlation strength
//! from frequency-averaged exterior measurements.

// `!(x <= tol)` is used on purpose so that NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod fft;
pub mod green;
pub mod grid;
pub mod krylov;
pub mod lseq;
pub mod medium;
pub mod quad;
pub mod randfield;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{Bump, SourceGrid};
pub use medium::ElasticMedium;
