//! The Lévy gauge `L_delta(F, G)` between step distribution functions and
//! the bounds that control it.
//!
//! `L_delta(F, G) = sup_t max(F(t) - G(t + delta), G(t) - F(t + delta))`.
//!
//! For step functions the first term only needs to be evaluated at the
//! jumps of `F`: on every interval where `F` is constant the term is largest
//! at the left end, because `G(t + delta)` is non-decreasing in `t`. Below
//! the first jump both cdfs vanish far enough to the left, so the supremum
//! is never negative. The second term is handled by swapping roles.

use serde::{Deserialize, Serialize};

use crate::ecdf::{weighted_ecdf, ExtReal, StepCdf};
use crate::error::{Error, Result};
use crate::monotone::MonotoneFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaugeSide {
    #[serde(rename = "F_over_G")]
    FOverG,
    #[serde(rename = "G_over_F")]
    GOverF,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeResult {
    pub value: f64,
    pub witness_t: f64,
    pub side: GaugeSide,
}

/// `(sup_t F(t) - G(t + delta), maximizing t)`, with the supremum floored at 0.
fn one_side(f: &StepCdf, g: &StepCdf, delta: f64) -> (f64, f64) {
    let (fj, gj) = (f.jumps(), g.jumps());
    let mut best = f64::NEG_INFINITY;
    let mut witness = f64::NAN;
    let mut ptr = 0;
    for (i, &a) in fj.iter().enumerate() {
        let shifted = a + delta;
        while ptr < gj.len() && gj[ptr] <= shifted {
            ptr += 1;
        }
        let g_val = if ptr == 0 { 0.0 } else { g.cum()[ptr - 1] };
        let diff = f.cum()[i] - g_val;
        if diff > best {
            best = diff;
            witness = a;
        }
    }
    if best >= 0.0 {
        (best, witness)
    } else {
        // Every candidate is negative; the supremum 0 is attained far to the left.
        (0.0, fj[0].min(gj[0] - delta) - 1.0)
    }
}

/// Exact Lévy gauge; `delta` must be nonnegative.
pub fn gauge(f: &StepCdf, g: &StepCdf, delta: f64) -> Result<GaugeResult> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidTolerance(format!("gauge requires a finite delta >= 0, got {delta}")));
    }
    let (v1, t1) = one_side(f, g, delta);
    let (v2, t2) = one_side(g, f, delta);
    Ok(if v2 > v1 {
        GaugeResult { value: v2, witness_t: t2, side: GaugeSide::GOverF }
    } else {
        GaugeResult { value: v1, witness_t: t1, side: GaugeSide::FOverG }
    })
}

fn gauge_value(f: &StepCdf, g: &StepCdf, delta: f64) -> f64 {
    one_side(f, g, delta).0.max(one_side(g, f, delta).0)
}

/// The gauge at `delta = 0`, i.e. the Kolmogorov distance `sup |F - G|`.
pub fn gauge_delta0_is_kolmogorov(f: &StepCdf, g: &StepCdf) -> f64 {
    gauge_value(f, g, 0.0)
}

/// `(Q_{alpha - L}(F) - delta, Q_{alpha + L}(F) + delta)` with `L = L_delta(F, G)`;
/// the two values bracket `Q_alpha(G)`.
pub fn quantile_sandwich(f: &StepCdf, g: &StepCdf, delta: f64, alpha: f64) -> Result<(ExtReal, ExtReal)> {
    if alpha <= 0.0 {
        return Ok((ExtReal::NegInf, ExtReal::NegInf));
    }
    let l = gauge(f, g, delta)?.value;
    Ok((f.quantile(alpha - l) - delta, f.quantile(alpha + l) + delta))
}

fn check_pairs(a: &[f64], b: &[f64], weights: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() != weights.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: weights.len() });
    }
    Ok(())
}

/// `sum_i p_i 1{|a_i - b_i| > delta}`, an upper bound for the gauge between
/// the weighted ecdfs of `a` and `b`.
pub fn gauge_bound_matched_pairs(a: &[f64], b: &[f64], weights: &[f64], delta: f64) -> Result<f64> {
    check_pairs(a, b, weights)?;
    Ok(a.iter().zip(b).zip(weights).filter(|((x, y), _)| (*x - *y).abs() > delta).map(|(_, p)| p).sum())
}

/// `delta^-1 sum_i p_i |a_i - b_i|`, the first-moment coupling bound.
pub fn gauge_bound_wasserstein(a: &[f64], b: &[f64], weights: &[f64], delta: f64) -> Result<f64> {
    check_pairs(a, b, weights)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidTolerance(format!("delta must be positive, got {delta}")));
    }
    let moment: f64 = a.iter().zip(b).zip(weights).map(|((x, y), p)| p * (x - y).abs()).sum();
    Ok(moment / delta)
}

/// Exact `int_lo^hi (F - G)^2 dx` for step cdfs; the bounds may be infinite.
pub fn squared_difference_integral(f: &StepCdf, g: &StepCdf, lo: f64, hi: f64) -> f64 {
    if !(lo < hi) {
        return 0.0;
    }
    let mut points: Vec<f64> =
        f.jumps().iter().chain(g.jumps()).copied().filter(|&t| t > lo && t < hi).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let first = f.jumps()[0].min(g.jumps()[0]);
    let last = f.jumps()[f.len() - 1].max(g.jumps()[g.len() - 1]);
    let mut total = 0.0;
    let mut left = lo;
    for right in points.into_iter().chain(std::iter::once(hi)) {
        // F - G is constant on [left, right); outside [first, last) it is 0.
        let probe = if left.is_finite() { left } else { first - 1.0 };
        let d = f.eval(probe) - g.eval(probe);
        if d != 0.0 && left >= first && left < last {
            total += d * d * (right - left);
        }
        left = right;
    }
    total
}

/// `1 - F(mu + K) + F(mu - K) + sqrt(delta^-1 int_{[mu-K-delta, mu+K+2delta]} (F - G)^2)`.
pub fn gauge_bound_l2(f: &StepCdf, g: &StepCdf, delta: f64, mu: f64, k: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidTolerance(format!("delta must be positive, got {delta}")));
    }
    if !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!("K must be nonnegative, got {k}")));
    }
    let tail = 1.0 - f.eval(mu + k) + f.eval(mu - k);
    let integral = squared_difference_integral(f, g, mu - k - delta, mu + k + 2.0 * delta);
    Ok(tail + (integral / delta).sqrt())
}

/// `sqrt(delta^-1 int_R (F - G)^2)`.
pub fn gauge_bound_l2_global(f: &StepCdf, g: &StepCdf, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidTolerance(format!("delta must be positive, got {delta}")));
    }
    Ok((squared_difference_integral(f, g, f64::NEG_INFINITY, f64::INFINITY) / delta).sqrt())
}

/// Bracket for `E f(X)`, `X ~ F`, from `Y ~ G`:
/// `[E f(Y - delta) - (M2 - M1) L, E f(Y + delta) + (M2 - M1) L]`.
pub fn expectation_transfer(func: &MonotoneFn, f: &StepCdf, g: &StepCdf, delta: f64) -> Result<(f64, f64)> {
    func.check_monotone()?;
    let (m1, m2) = func.bounds().ok_or(Error::UnboundedLoss)?;
    let l = gauge(f, g, delta)?.value;
    let lo = g.expect(|y| func.eval(y - delta)) - (m2 - m1) * l;
    let hi = g.expect(|y| func.eval(y + delta)) + (m2 - m1) * l;
    Ok((lo, hi))
}

/// `Lip * delta + (M2 - M1) L_delta(F, G)`, bounding `|E f(X) - E f(Y)|`.
pub fn lipschitz_transfer_bound(func: &MonotoneFn, f: &StepCdf, g: &StepCdf, delta: f64) -> Result<f64> {
    func.check_monotone()?;
    let (m1, m2) = func.bounds().ok_or(Error::UnboundedLoss)?;
    let lip = func
        .lipschitz()
        .ok_or_else(|| Error::InvalidParameter("function is not Lipschitz".into()))?;
    Ok(lip * delta + (m2 - m1) * gauge(f, g, delta)?.value)
}

/// `V * sup |F - G|`, bounding `|E g(X) - E g(Y)|` for `g` of total variation `V`.
pub fn koksma_bound(total_variation: f64, f: &StepCdf, g: &StepCdf) -> f64 {
    total_variation * gauge_delta0_is_kolmogorov(f, g)
}

/// Weighted ecdfs of two matched samples.
pub fn matched_ecdfs(a: &[f64], b: &[f64], weights: &[f64]) -> Result<(StepCdf, StepCdf)> {
    check_pairs(a, b, weights)?;
    Ok((weighted_ecdf(a, weights)?, weighted_ecdf(b, weights)?))
}
