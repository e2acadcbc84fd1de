//! Cross-validation prediction intervals and their diagnostics.
//!
//! The crate covers the full pipeline from data to interval:
//!
//! * [`data`] loads datasets and samples the synthetic processes,
//! * [`predictors`] fits the prediction algorithms and the leave-fold-out residuals,
//! * [`ecdf`] and [`intervals`] turn residuals into Jackknife, Jackknife+, CV and CV+ intervals,
//! * [`levy`] computes the Lévy gauge between step distribution functions and its bounds,
//! * [`risk`] and [`stability`] estimate risks and stability quantities,
//! * [`simlab`] runs the Monte-Carlo experiments, and [`cli`] exposes everything as a binary.

pub mod cli;
pub mod data;
pub mod ecdf;
pub mod error;
pub mod intervals;
pub mod levy;
pub mod linalg;
pub mod monotone;
pub mod partition;
pub mod predictors;
pub mod risk;
pub mod rng;
pub mod simlab;
pub mod stability;

pub use error::{Error, ErrorKind, Result};
