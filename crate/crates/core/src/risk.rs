//! Risk estimates from leave-one-out residuals.

use crate::error::{Error, Result};
use crate::monotone::MonotoneFn;
use crate::rng::pairwise_sum;

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    pairwise_sum(&v) / v.len() as f64
}

fn nonempty(residuals: &[f64]) -> Result<()> {
    if residuals.is_empty() {
        return Err(Error::TooFewRows(0));
    }
    Ok(())
}

/// `((1/n) sum loss(|u_i| - eps) - eps, (1/n) sum loss(|u_i| + eps) + eps)` for a
/// non-decreasing loss.
pub fn loss_plugin_bounds(residuals: &[f64], loss: &MonotoneFn, eps: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidTolerance(format!("eps must be positive, got {eps}")));
    }
    nonempty(residuals)?;
    loss.check_monotone()?;
    let lo = mean_of(residuals.iter().map(|u| loss.eval(u.abs() - eps))) - eps;
    let hi = mean_of(residuals.iter().map(|u| loss.eval(u.abs() + eps))) + eps;
    Ok((lo, hi))
}

/// Mean squared residual.
pub fn mse_estimate(residuals: &[f64]) -> Result<f64> {
    nonempty(residuals)?;
    Ok(mean_of(residuals.iter().map(|u| u * u)))
}

/// Residuals further than this from an integer are rejected by [`misclassification_estimate`].
pub const INTEGER_TOL: f64 = 1e-9;

/// Fraction of nonzero residuals; the residuals must be integer-valued.
pub fn misclassification_estimate(residuals: &[f64]) -> Result<f64> {
    nonempty(residuals)?;
    if let Some(i) = residuals.iter().position(|u| (u - u.round()).abs() > INTEGER_TOL) {
        return Err(Error::NonIntegerResiduals(i));
    }
    let wrong = residuals.iter().filter(|u| u.round() != 0.0).count();
    Ok(wrong as f64 / residuals.len() as f64)
}
