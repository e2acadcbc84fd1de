//! Weighted step distribution functions and the extended quantile.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance for weight sums and for comparing levels against cumulative weights.
///
/// A level within `GUARD` of a cumulative weight counts as reaching it, so
/// `alpha = 0.7` with ten equal atoms selects the seventh atom even though the
/// running sum of ten `0.1`s is not exactly `0.7`.
pub const GUARD: f64 = 1e-12;

/// A real number or one of the two infinities.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn from_f64(v: f64) -> ExtReal {
        if v == f64::INFINITY {
            ExtReal::PosInf
        } else if v == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(v)
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn total_cmp(&self, other: &ExtReal) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: f64) -> ExtReal {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(v + rhs),
            inf => inf,
        }
    }
}

impl Sub<f64> for ExtReal {
    type Output = ExtReal;
    fn sub(self, rhs: f64) -> ExtReal {
        self + (-rhs)
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::Finite(v) => ExtReal::Finite(-v),
            ExtReal::PosInf => ExtReal::NegInf,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => f.write_str("+inf"),
        }
    }
}

/// Finite values serialize as JSON numbers, infinities as `"-inf"` / `"+inf"`.
impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::NegInf => s.serialize_str("-inf"),
            ExtReal::PosInf => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<ExtReal, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(ExtReal::Finite(v)),
            Repr::Text(t) => match t.as_str() {
                "-inf" => Ok(ExtReal::NegInf),
                "+inf" | "inf" => Ok(ExtReal::PosInf),
                other => Err(serde::de::Error::custom(format!("not an extended real: {other}"))),
            },
        }
    }
}

/// A right-continuous step distribution function with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepCdfRepr")]
pub struct StepCdf {
    jumps: Vec<f64>,
    cum: Vec<f64>,
}

#[derive(Deserialize)]
struct StepCdfRepr {
    jumps: Vec<f64>,
    cum: Vec<f64>,
}

impl TryFrom<StepCdfRepr> for StepCdf {
    type Error = Error;

    fn try_from(r: StepCdfRepr) -> Result<StepCdf> {
        StepCdf::from_parts(r.jumps, r.cum)
    }
}

impl StepCdf {
    /// Builds a cdf from jump points and cumulative weights, checking every invariant.
    pub fn from_parts(jumps: Vec<f64>, cum: Vec<f64>) -> Result<StepCdf> {
        if jumps.len() != cum.len() {
            return Err(Error::LengthMismatch { left: jumps.len(), right: cum.len() });
        }
        let Some(&last) = cum.last() else {
            return Err(Error::WeightSumError(0.0));
        };
        if (last - 1.0).abs() > GUARD {
            return Err(Error::WeightSumError(last));
        }
        if jumps.iter().any(|t| !t.is_finite()) || jumps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::MalformedInput("jumps must be finite and strictly increasing".into()));
        }
        if !(cum[0] > 0.0) || cum.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::MalformedInput("cumulative weights must be positive and increasing".into()));
        }
        let mut cum = cum;
        *cum.last_mut().expect("nonempty") = 1.0;
        Ok(StepCdf { jumps, cum })
    }

    /// Point mass at `t`.
    pub fn dirac(t: f64) -> StepCdf {
        StepCdf { jumps: vec![t], cum: vec![1.0] }
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    /// Mass of atom `j`.
    pub fn atom_weight(&self, j: usize) -> f64 {
        if j == 0 {
            self.cum[0]
        } else {
            self.cum[j] - self.cum[j - 1]
        }
    }

    /// `F(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.jumps.partition_point(|&s| s <= t);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// `F(t-)`, the mass strictly below `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let idx = self.jumps.partition_point(|&s| s < t);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// `Q_alpha(F) = inf { x : F(x) >= alpha }` over the extended reals.
    pub fn quantile(&self, alpha: f64) -> ExtReal {
        if alpha <= GUARD {
            return ExtReal::NegInf;
        }
        if alpha > 1.0 + GUARD {
            return ExtReal::PosInf;
        }
        let idx = self.cum.partition_point(|&c| c < alpha - GUARD);
        ExtReal::Finite(self.jumps[idx.min(self.jumps.len() - 1)])
    }

    /// The distribution of `scale * X + shift` for `scale > 0`.
    pub fn affine(&self, scale: f64, shift: f64) -> StepCdf {
        debug_assert!(scale > 0.0);
        StepCdf { jumps: self.jumps.iter().map(|t| scale * t + shift).collect(), cum: self.cum.clone() }
    }

    /// `sum_j w_j f(t_j)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.len()).map(|j| self.atom_weight(j) * f(self.jumps[j])).sum()
    }
}

/// Distribution function of `values` with the given atom weights; equal values merge.
pub fn weighted_ecdf(values: &[f64], weights: &[f64]) -> Result<StepCdf> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch { left: values.len(), right: weights.len() });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::MalformedInput("ecdf values must be finite".into()));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("ecdf weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    if values.is_empty() || (total - 1.0).abs() > GUARD {
        return Err(Error::WeightSumError(total));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut jumps: Vec<f64> = Vec::with_capacity(values.len());
    let mut cum: Vec<f64> = Vec::with_capacity(values.len());
    let mut running = 0.0;
    for i in order {
        running += weights[i];
        if jumps.last() == Some(&values[i]) {
            *cum.last_mut().expect("nonempty") = running;
        } else {
            jumps.push(values[i]);
            cum.push(running);
        }
    }
    for c in &mut cum {
        *c = c.min(1.0);
    }
    *cum.last_mut().expect("nonempty") = 1.0;
    Ok(StepCdf { jumps, cum })
}

/// Equal-weight ecdf.
pub fn uniform_ecdf(values: &[f64]) -> Result<StepCdf> {
    let w = vec![1.0 / values.len() as f64; values.len()];
    weighted_ecdf(values, &w)
}

/// Ecdf of values grouped by fold, with weight `1 / (k |K_j|)` on each value of fold `j`.
pub fn fold_ecdf(per_fold: &[Vec<f64>]) -> Result<StepCdf> {
    if let Some(j) = per_fold.iter().position(Vec::is_empty) {
        return Err(Error::EmptyFold(j));
    }
    if per_fold.len() < 2 {
        return Err(Error::FoldLeavesNothing(0));
    }
    let k = per_fold.len() as f64;
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for fold in per_fold {
        let w = 1.0 / (k * fold.len() as f64);
        values.extend_from_slice(fold);
        weights.extend(std::iter::repeat_n(w, fold.len()));
    }
    weighted_ecdf(&values, &weights)
}

pub fn quantile(f: &StepCdf, alpha: f64) -> ExtReal {
    f.quantile(alpha)
}

pub fn eval_cdf(f: &StepCdf, t: f64) -> f64 {
    f.eval(t)
}

pub fn left_limit(f: &StepCdf, t: f64) -> f64 {
    f.left_limit(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const THIRD: f64 = 1.0 / 3.0;

    #[test]
    fn merges_duplicates() {
        let f = weighted_ecdf(&[0.0, 0.0, 1.0], &[THIRD, THIRD, THIRD]).unwrap();
        assert_eq!(f.jumps(), &[0.0, 1.0]);
        assert!((f.cum()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.cum()[1], 1.0);
    }

    #[test]
    fn dirac_and_right_continuity() {
        let f = weighted_ecdf(&[5.0], &[1.0]).unwrap();
        assert_eq!(f, StepCdf::dirac(5.0));
        let g = uniform_ecdf(&[1.0, 2.0, 3.0]).unwrap();
        assert!((g.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((g.eval(1.999) - THIRD).abs() < 1e-15);
        assert!((g.left_limit(2.0) - THIRD).abs() < 1e-15);
        assert_eq!(g.eval(1e300), 1.0);
        let d = StepCdf::dirac(0.0);
        assert_eq!((d.eval(0.0), d.left_limit(0.0)), (1.0, 0.0));
    }

    #[test]
    fn weight_errors() {
        assert!(matches!(weighted_ecdf(&[1.0, 2.0], &[0.5, 0.4]), Err(Error::WeightSumError(_))));
        assert!(matches!(weighted_ecdf(&[], &[]), Err(Error::WeightSumError(_))));
        assert!(matches!(weighted_ecdf(&[1.0], &[0.5, 0.5]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn fold_weights() {
        let f = fold_ecdf(&[vec![0.0, 0.0], vec![1.0]]).unwrap();
        assert!((f.eval(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(f.eval(1.0), 1.0);
        let vals = [0.3, -1.0, 2.0, 0.7, 0.1, 4.0];
        let balanced = fold_ecdf(&[vals[..3].to_vec(), vals[3..].to_vec()]).unwrap();
        let uniform = uniform_ecdf(&vals).unwrap();
        assert_eq!(balanced.jumps(), uniform.jumps());
        for (a, b) in balanced.cum().iter().zip(uniform.cum()) {
            assert!((a - b).abs() < 1e-15);
        }
        let singles = fold_ecdf(&vals.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        assert_eq!(singles.jumps(), uniform.jumps());
        assert_eq!(fold_ecdf(&[vec![1.0], vec![]]), Err(Error::EmptyFold(1)));
    }

    #[test]
    fn quantile_extension_and_order_statistics() {
        let f = uniform_ecdf(&[-4.0, 2.0, -2.0]).unwrap();
        assert_eq!(f.quantile(0.0), ExtReal::NegInf);
        assert_eq!(f.quantile(-0.5), ExtReal::NegInf);
        assert_eq!(f.quantile(1.1), ExtReal::PosInf);
        assert_eq!(f.quantile(2.0 / 3.0), ExtReal::Finite(-2.0));
        assert_eq!(f.quantile(1.0), ExtReal::Finite(2.0));
        let ten: Vec<f64> = (0..10).map(f64::from).collect();
        let g = uniform_ecdf(&ten).unwrap();
        for m in 1..=10 {
            let alpha = m as f64 * 0.1;
            assert_eq!(g.quantile(alpha), ExtReal::Finite((m - 1) as f64), "alpha = {alpha}");
        }
    }

    #[test]
    fn ext_real_order_and_json() {
        assert!(ExtReal::NegInf < ExtReal::Finite(-1e300));
        assert!(ExtReal::Finite(1e300) < ExtReal::PosInf);
        assert_eq!(ExtReal::PosInf - 3.0, ExtReal::PosInf);
        assert_eq!(serde_json::to_string(&ExtReal::NegInf).unwrap(), "\"-inf\"");
        let back: ExtReal = serde_json::from_str("2.5").unwrap();
        assert_eq!(back, ExtReal::Finite(2.5));
    }

    #[test]
    fn json_round_trip_checks_invariants() {
        let f = uniform_ecdf(&[1.0, 2.0, 4.0]).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<StepCdf>(&text).unwrap(), f);
        assert!(serde_json::from_str::<StepCdf>(r#"{"jumps":[2,1],"cum":[0.5,1]}"#).is_err());
        assert!(serde_json::from_str::<StepCdf>(r#"{"jumps":[1,2],"cum":[0.5,0.9]}"#).is_err());
    }

    fn arb_cdf() -> impl Strategy<Value = StepCdf> {
        prop::collection::vec((-5i32..5, 1u32..5), 1..12).prop_map(|atoms| {
            let total: u32 = atoms.iter().map(|a| a.1).sum();
            let values: Vec<f64> = atoms.iter().map(|a| a.0 as f64 * 0.5).collect();
            let weights: Vec<f64> = atoms.iter().map(|a| a.1 as f64 / total as f64).collect();
            weighted_ecdf(&values, &weights).unwrap()
        })
    }

    proptest! {
        #[test]
        fn sandwich_at_quantiles(f in arb_cdf()) {
            for i in 1..=200 {
                let alpha = i as f64 / 200.0;
                let q = f.quantile(alpha).finite().unwrap();
                prop_assert!(f.left_limit(q) <= alpha + GUARD);
                prop_assert!(alpha <= f.eval(q) + GUARD);
            }
        }

        #[test]
        fn quantile_is_monotone(f in arb_cdf(), a in -0.2f64..1.2, b in -0.2f64..1.2) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(f.quantile(lo) <= f.quantile(hi));
        }
    }
}
