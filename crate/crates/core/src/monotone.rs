//! Non-decreasing functions used as losses and as test functions for
//! expectation bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-decreasing real function from a small closed family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonotoneFn {
    /// `max(0, x)^2`; equals `x^2` on the nonnegative half-line.
    SquaredHinge,
    /// `max(0, x)`; equals `|x|` on the nonnegative half-line.
    Absolute,
    /// `1{x >= threshold}`.
    Indicator { threshold: f64 },
    /// `min(max(x, lo), hi)`.
    Clamp { lo: f64, hi: f64 },
    /// `1 / (1 + exp(-x / scale))`.
    Logistic { scale: f64 },
    Constant { value: f64 },
    /// Linear interpolation through `(xs, ys)`, constant beyond the end knots.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

/// Probe grid for [`MonotoneFn::check_monotone`]: 4001 equispaced points on `[-200, 200]`.
const PROBE_HALF_WIDTH: f64 = 200.0;
const PROBE_POINTS: usize = 4001;

impl MonotoneFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MonotoneFn::SquaredHinge => {
                let p = x.max(0.0);
                p * p
            }
            MonotoneFn::Absolute => x.max(0.0),
            MonotoneFn::Indicator { threshold } => f64::from(u8::from(x >= *threshold)),
            MonotoneFn::Clamp { lo, hi } => x.max(*lo).min(*hi),
            MonotoneFn::Logistic { scale } => 1.0 / (1.0 + (-x / scale).exp()),
            MonotoneFn::Constant { value } => *value,
            MonotoneFn::Table { xs, ys } => interpolate(xs, ys, x),
        }
    }

    /// `(inf f, sup f)` when both are finite.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            MonotoneFn::SquaredHinge | MonotoneFn::Absolute => None,
            MonotoneFn::Indicator { .. } | MonotoneFn::Logistic { .. } => Some((0.0, 1.0)),
            MonotoneFn::Clamp { lo, hi } => Some((*lo, *hi)),
            MonotoneFn::Constant { value } => Some((*value, *value)),
            MonotoneFn::Table { ys, .. } => Some((ys[0], ys[ys.len() - 1])),
        }
    }

    /// Lipschitz constant, if the function is Lipschitz.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            MonotoneFn::SquaredHinge | MonotoneFn::Indicator { .. } => None,
            MonotoneFn::Absolute | MonotoneFn::Clamp { .. } => Some(1.0),
            MonotoneFn::Logistic { scale } => Some(0.25 / scale),
            MonotoneFn::Constant { .. } => Some(0.0),
            MonotoneFn::Table { xs, ys } => Some(
                xs.windows(2).zip(ys.windows(2)).map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0])).fold(0.0, f64::max),
            ),
        }
    }

    /// Checks parameters and monotonicity.
    ///
    /// Tables are checked knot by knot; every function is additionally
    /// probed on the documented grid plus its own knots and thresholds.
    pub fn check_monotone(&self) -> Result<()> {
        match self {
            MonotoneFn::Indicator { threshold } if !threshold.is_finite() => {
                return Err(Error::InvalidParameter("indicator threshold must be finite".into()))
            }
            MonotoneFn::Clamp { lo, hi } if !(lo <= hi) => {
                return Err(Error::NonMonotoneLoss(format!("clamp bounds are reversed: {lo} > {hi}")))
            }
            MonotoneFn::Logistic { scale } if !(*scale > 0.0) => {
                return Err(Error::NonMonotoneLoss(format!("logistic scale must be positive, got {scale}")))
            }
            MonotoneFn::Constant { value } if !value.is_finite() => {
                return Err(Error::InvalidParameter("constant must be finite".into()))
            }
            MonotoneFn::Table { xs, ys } => {
                if xs.is_empty() || xs.len() != ys.len() {
                    return Err(Error::InvalidParameter("table needs equally many (>= 1) xs and ys".into()));
                }
                if xs.iter().chain(ys).any(|v| !v.is_finite()) || xs.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidParameter("table knots must be finite and strictly increasing".into()));
                }
                if let Some(i) = ys.windows(2).position(|w| w[1] < w[0]) {
                    return Err(Error::NonMonotoneLoss(format!("table decreases between knots {i} and {}", i + 1)));
                }
            }
            _ => {}
        }
        let mut grid: Vec<f64> = (0..PROBE_POINTS)
            .map(|i| -PROBE_HALF_WIDTH + 2.0 * PROBE_HALF_WIDTH * i as f64 / (PROBE_POINTS - 1) as f64)
            .collect();
        match self {
            MonotoneFn::Table { xs, .. } => grid.extend_from_slice(xs),
            MonotoneFn::Indicator { threshold } => grid.push(*threshold),
            _ => {}
        }
        grid.sort_by(f64::total_cmp);
        let values: Vec<f64> = grid.iter().map(|&x| self.eval(x)).collect();
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::NonMonotoneLoss(format!("decreases between {} and {}", grid[i], grid[i + 1])));
        }
        Ok(())
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let idx = xs.partition_point(|&k| k <= x);
    if idx == 0 {
        return ys[0];
    }
    if idx == xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1, y0, y1) = (xs[idx - 1], xs[idx], ys[idx - 1], ys[idx]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluations() {
        assert_eq!(MonotoneFn::SquaredHinge.eval(-2.0), 0.0);
        assert_eq!(MonotoneFn::SquaredHinge.eval(1.5), 2.25);
        assert_eq!(MonotoneFn::Absolute.eval(3.0), 3.0);
        assert_eq!(MonotoneFn::Indicator { threshold: 1.0 }.eval(1.0), 1.0);
        assert_eq!(MonotoneFn::Indicator { threshold: 1.0 }.eval(0.999), 0.0);
        assert_eq!(MonotoneFn::Clamp { lo: -1.0, hi: 2.0 }.eval(5.0), 2.0);
        assert_eq!(MonotoneFn::Logistic { scale: 1.0 }.eval(0.0), 0.5);
        let t = MonotoneFn::Table { xs: vec![0.0, 1.0, 3.0], ys: vec![0.0, 2.0, 3.0] };
        assert_eq!((t.eval(-1.0), t.eval(0.5), t.eval(2.0), t.eval(9.0)), (0.0, 1.0, 2.5, 3.0));
        assert_eq!(t.lipschitz(), Some(2.0));
        assert_eq!(t.bounds(), Some((0.0, 3.0)));
    }

    #[test]
    fn monotonicity_checks() {
        assert!(MonotoneFn::SquaredHinge.check_monotone().is_ok());
        assert!(MonotoneFn::Table { xs: vec![0.0, 1.0], ys: vec![1.0, 0.0] }.check_monotone().is_err());
        assert!(matches!(
            MonotoneFn::Logistic { scale: -1.0 }.check_monotone(),
            Err(Error::NonMonotoneLoss(_))
        ));
        assert!(matches!(
            MonotoneFn::Table { xs: vec![1.0, 0.0], ys: vec![0.0, 1.0] }.check_monotone(),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn json_shape() {
        let f: MonotoneFn = serde_json::from_str(r#"{"kind":"indicator","threshold":0.5}"#).unwrap();
        assert_eq!(f, MonotoneFn::Indicator { threshold: 0.5 });
        let g: MonotoneFn = serde_json::from_str(r#"{"kind":"squared_hinge"}"#).unwrap();
        assert_eq!(g, MonotoneFn::SquaredHinge);
    }
}
