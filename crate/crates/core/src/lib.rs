//! Divide-and-conquer kernel ridge regression with a Wald-type test on the
//! averaged estimator.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dnc;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod normal;
pub mod points;
pub mod rates;
pub mod simlab;
pub mod solver;
pub mod spectra;

pub use error::{Error, Result};
pub use points::Points;
pub use spectra::{Eigenvalue, Family, SpectralSums, Spectrum};
