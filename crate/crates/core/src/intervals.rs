//! Prediction intervals from leave-fold-out residuals.
//!
//! With a singleton partition, `cv` is the Jackknife and `cv_plus` the
//! Jackknife+.

use serde::{Deserialize, Serialize};

use crate::ecdf::{weighted_ecdf, ExtReal, StepCdf, GUARD};
use crate::error::{Error, Result};
use crate::predictors::ResidualBundle;

/// A closed interval over the extended reals; empty when `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredInterval {
    pub lo: ExtReal,
    pub hi: ExtReal,
}

impl PredInterval {
    pub fn new(lo: ExtReal, hi: ExtReal) -> PredInterval {
        PredInterval { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    /// `hi - lo`; `+inf` if nonempty with an infinite endpoint, 0 if empty.
    pub fn length(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        match (self.lo, self.hi) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => b - a,
            _ => f64::INFINITY,
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        let y = ExtReal::Finite(y);
        self.lo <= y && y <= self.hi
    }

    /// Whether `self` is a subset of `other`.
    pub fn is_subset_of(&self, other: &PredInterval) -> bool {
        self.is_empty() || (other.lo <= self.lo && self.hi <= other.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum IntervalBase {
    /// Atoms `yhat(x) + u_i`.
    Cv,
    /// Atoms `yhat^{\K_j(i)}(x) + u_i`.
    CvPlus,
    /// Atoms `yhat(x) + y_i - yhat_i` with in-sample fitted values.
    FittedValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntervalMethod {
    pub base: IntervalBase,
    #[serde(default)]
    pub symmetrized: bool,
}

impl IntervalMethod {
    pub const JACKKNIFE: IntervalMethod = IntervalMethod { base: IntervalBase::Cv, symmetrized: false };
    pub const JACKKNIFE_PLUS: IntervalMethod = IntervalMethod { base: IntervalBase::CvPlus, symmetrized: false };

    pub fn new(base: IntervalBase, symmetrized: bool) -> IntervalMethod {
        IntervalMethod { base, symmetrized }
    }
}

/// Weight of each residual index: `1 / (k |K_j|)` for fold methods, `1 / n` for fitted values.
fn atom_weights(base: IntervalBase, bundle: &ResidualBundle) -> Vec<f64> {
    let part = &bundle.partition;
    match base {
        IntervalBase::FittedValues => vec![1.0 / bundle.n() as f64; bundle.n()],
        _ => (0..bundle.n()).map(|i| part.atom_weight(part.fold_of(i))).collect(),
    }
}

/// Per-index residuals and centres for the chosen base.
fn centred_residuals(base: IntervalBase, bundle: &ResidualBundle) -> Result<(Vec<f64>, Vec<f64>)> {
    let part = &bundle.partition;
    let n = bundle.n();
    Ok(match base {
        IntervalBase::Cv => (bundle.loo_residuals.clone(), vec![bundle.full_prediction; n]),
        IntervalBase::CvPlus => (
            bundle.loo_residuals.clone(),
            (0..n).map(|i| bundle.fold_predictions[part.fold_of(i)]).collect(),
        ),
        IntervalBase::FittedValues => (bundle.fitted_residuals()?, vec![bundle.full_prediction; n]),
    })
}

/// The distribution function whose quantiles give a non-symmetrized interval.
pub fn interval_ecdf(base: IntervalBase, bundle: &ResidualBundle) -> Result<StepCdf> {
    bundle.validate()?;
    let (res, centre) = centred_residuals(base, bundle)?;
    let atoms: Vec<f64> = centre.iter().zip(&res).map(|(c, u)| c + u).collect();
    weighted_ecdf(&atoms, &atom_weights(base, bundle))
}

/// The delta-distorted interval with quantile levels `alpha1`, `alpha2`.
///
/// Non-symmetrized: `[Q_{alpha1}(G) - delta, Q_{alpha2}(G) + delta]` for the
/// ecdf `G` of the base's atoms.
///
/// Symmetrized, with `beta = alpha2 - alpha1`:
/// * `cv` and `fitted_values`: `yhat(x) -/+ (Q_beta(|r|) + delta)` for the
///   absolute residuals `|r_i|` of the base;
/// * `cv_plus`: upper end `Q_beta` of `yhat^{\K_j(i)}(x) + |u_i|`, lower end
///   the mirrored `-Q_beta` of `-yhat^{\K_j(i)}(x) + |u_i|`, each moved out by `delta`.
pub fn interval(
    method: IntervalMethod,
    bundle: &ResidualBundle,
    alpha1: f64,
    alpha2: f64,
    delta: f64,
) -> Result<PredInterval> {
    check_levels(alpha1, alpha2, delta)?;
    if !method.symmetrized {
        let g = interval_ecdf(method.base, bundle)?;
        return Ok(PredInterval::new(g.quantile(alpha1) - delta, g.quantile(alpha2) + delta));
    }
    bundle.validate()?;
    let beta = alpha2 - alpha1;
    let weights = atom_weights(method.base, bundle);
    let (res, centre) = centred_residuals(method.base, bundle)?;
    let abs: Vec<f64> = res.iter().map(|u| u.abs()).collect();
    match method.base {
        IntervalBase::Cv | IntervalBase::FittedValues => {
            let q = weighted_ecdf(&abs, &weights)?.quantile(beta) + delta;
            let y = bundle.full_prediction;
            Ok(PredInterval::new(-q + y, q + y))
        }
        IntervalBase::CvPlus => {
            let up: Vec<f64> = centre.iter().zip(&abs).map(|(c, a)| c + a).collect();
            let down: Vec<f64> = centre.iter().zip(&abs).map(|(c, a)| -c + a).collect();
            let hi = weighted_ecdf(&up, &weights)?.quantile(beta) + delta;
            let lo = -(weighted_ecdf(&down, &weights)?.quantile(beta) + delta);
            Ok(PredInterval::new(lo, hi))
        }
    }
}

fn check_levels(alpha1: f64, alpha2: f64, delta: f64) -> Result<()> {
    if !alpha1.is_finite() || !alpha2.is_finite() || !delta.is_finite() {
        return Err(Error::InvalidParameter("alpha1, alpha2 and delta must be finite".into()));
    }
    Ok(())
}

/// The result of [`shortest_interval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortestInterval {
    pub alpha1: f64,
    pub alpha2: f64,
    pub interval: PredInterval,
}

/// The shortest interval among all level pairs with `alpha2 - alpha1 = nominal`,
/// `0 <= alpha1 <= 1 - nominal`.
///
/// The length is a step function of `alpha1` that only changes at cumulative
/// weights of the atoms and at those levels minus `nominal`, so scanning those
/// breakpoints is exhaustive. Ties go to the smallest `alpha1`.
pub fn shortest_interval(
    method: IntervalMethod,
    bundle: &ResidualBundle,
    nominal: f64,
    delta: f64,
) -> Result<ShortestInterval> {
    if !(nominal > 0.0 && nominal <= 1.0) {
        return Err(Error::InvalidParameter(format!("nominal level must lie in (0, 1], got {nominal}")));
    }
    let slack = 1.0 - nominal;
    let mut candidates = vec![0.0];
    if !method.symmetrized {
        let g = interval_ecdf(method.base, bundle)?;
        for &c in g.cum() {
            for a in [c, c - nominal] {
                if a > GUARD && a <= slack + GUARD {
                    candidates.push(a.min(slack));
                }
            }
        }
        if slack > GUARD {
            candidates.push(slack);
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
    }
    let mut best: Option<ShortestInterval> = None;
    for alpha1 in candidates {
        let alpha2 = alpha1 + nominal;
        let iv = interval(method, bundle, alpha1, alpha2, delta)?;
        if best.is_none_or(|b| iv.length() < b.interval.length()) {
            best = Some(ShortestInterval { alpha1, alpha2, interval: iv });
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// `F(Q_{alpha2}(F) + 2 delta) - F((Q_{alpha1}(F) - 2 delta)-)` for the
/// fold-weighted ecdf `F` of the residuals.
///
/// Much larger than `alpha2 - alpha1` signals residual mass piling up at the
/// interval ends, where inflating by `delta` buys extra coverage.
pub fn coverage_ceiling(bundle: &ResidualBundle, alpha1: f64, alpha2: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidTolerance(format!("coverage ceiling needs delta > 0, got {delta}")));
    }
    check_levels(alpha1, alpha2, delta)?;
    bundle.validate()?;
    let f = weighted_ecdf(&bundle.loo_residuals, &atom_weights(IntervalBase::Cv, bundle))?;
    let upper = match f.quantile(alpha2) {
        ExtReal::NegInf => 0.0,
        ExtReal::Finite(q) => f.eval(q + 2.0 * delta),
        ExtReal::PosInf => 1.0,
    };
    let lower = match f.quantile(alpha1) {
        ExtReal::NegInf => 0.0,
        ExtReal::Finite(q) => f.left_limit(q - 2.0 * delta),
        ExtReal::PosInf => 1.0,
    };
    Ok((upper - lower).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TrainingSet;
    use crate::partition::FoldPartition;
    use crate::predictors::{leave_fold_out_residuals, PredictorSpec};

    fn max_example() -> ResidualBundle {
        let t = TrainingSet::from_columns(vec![1.0, 5.0, 3.0], vec![0.0; 3], 1).unwrap();
        let part = FoldPartition::singletons(3).unwrap();
        leave_fold_out_residuals(&PredictorSpec::MaxResponse, &t, &part, &[0.0], true).unwrap()
    }

    #[test]
    fn jackknife_example() {
        let b = max_example();
        let iv = interval(IntervalMethod::JACKKNIFE, &b, 0.0, 2.0 / 3.0, 0.0).unwrap();
        assert_eq!(iv, PredInterval::new(ExtReal::NegInf, ExtReal::Finite(3.0)));
        assert_eq!(iv.length(), f64::INFINITY);
        let plus = interval(IntervalMethod::JACKKNIFE_PLUS, &b, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(plus.hi, ExtReal::Finite(5.0));
    }

    #[test]
    fn constant_predictor_full_range() {
        let t = TrainingSet::from_columns(vec![1.0, 4.0, 2.0], vec![0.0; 3], 1).unwrap();
        let part = FoldPartition::singletons(3).unwrap();
        let b = leave_fold_out_residuals(&PredictorSpec::Constant { value: 1.0 }, &t, &part, &[0.0], false).unwrap();
        let iv = interval(IntervalMethod::JACKKNIFE, &b, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(iv, PredInterval::new(ExtReal::NegInf, ExtReal::Finite(4.0)));
    }

    #[test]
    fn reversed_levels_are_empty() {
        let b = max_example();
        let iv = interval(IntervalMethod::JACKKNIFE, &b, 0.9, 0.2, 0.0).unwrap();
        assert!(iv.is_empty());
        assert_eq!(iv.length(), 0.0);
        assert!(!iv.contains(3.0));
    }

    #[test]
    fn fitted_values_require_fitted() {
        let mut b = max_example();
        b.fitted_values = None;
        let m = IntervalMethod::new(IntervalBase::FittedValues, false);
        assert_eq!(interval(m, &b, 0.1, 0.9, 0.0), Err(Error::MissingFittedValues));
    }

    #[test]
    fn symmetrized_jackknife() {
        let b = max_example();
        let m = IntervalMethod::new(IntervalBase::Cv, true);
        // |u| = (4, 2, 2); Q_{2/3} = 2.
        let iv = interval(m, &b, 0.0, 2.0 / 3.0, 0.5).unwrap();
        assert_eq!(iv, PredInterval::new(ExtReal::Finite(2.5), ExtReal::Finite(7.5)));
        let none = interval(m, &b, 0.5, 0.5, 0.0).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn shortest_scan() {
        let t = TrainingSet::from_columns(vec![-1.0, 0.0, 1.0], vec![0.0; 3], 1).unwrap();
        let part = FoldPartition::singletons(3).unwrap();
        let b = leave_fold_out_residuals(&PredictorSpec::Constant { value: 0.0 }, &t, &part, &[0.0], false).unwrap();
        let s = shortest_interval(IntervalMethod::JACKKNIFE, &b, 2.0 / 3.0, 0.0).unwrap();
        assert_eq!(s.interval.length(), 2.0);
        assert!((s.alpha1 - 1.0 / 3.0).abs() < 1e-12);
        let s = shortest_interval(IntervalMethod::JACKKNIFE, &b, 0.5, 0.0).unwrap();
        assert_eq!(s.interval, PredInterval::new(ExtReal::Finite(-1.0), ExtReal::Finite(0.0)));
        let all = shortest_interval(IntervalMethod::JACKKNIFE, &b, 1.0, 0.0).unwrap();
        assert_eq!((all.alpha1, all.alpha2), (0.0, 1.0));
        let flat = TrainingSet::from_columns(vec![2.0; 3], vec![0.0; 3], 1).unwrap();
        let b = leave_fold_out_residuals(&PredictorSpec::Constant { value: 0.0 }, &flat, &part, &[0.0], false).unwrap();
        let s = shortest_interval(IntervalMethod::JACKKNIFE, &b, 0.4, 0.0).unwrap();
        assert_eq!(s.interval, PredInterval::new(ExtReal::Finite(2.0), ExtReal::Finite(2.0)));
    }

    #[test]
    fn ceiling_examples() {
        let t = TrainingSet::from_columns(vec![0.0, 10.0, 20.0, 30.0], vec![0.0; 4], 1).unwrap();
        let part = FoldPartition::singletons(4).unwrap();
        let b = leave_fold_out_residuals(&PredictorSpec::Constant { value: 0.0 }, &t, &part, &[0.0], false).unwrap();
        assert_eq!(coverage_ceiling(&b, 0.25, 0.75, 1.0).unwrap(), 0.75);
        assert_eq!(coverage_ceiling(&b, 0.5, 0.5, 1.0).unwrap(), 0.25);
        let flat = TrainingSet::from_columns(vec![3.0; 4], vec![0.0; 4], 1).unwrap();
        let b = leave_fold_out_residuals(&PredictorSpec::Constant { value: 0.0 }, &flat, &part, &[0.0], false).unwrap();
        assert_eq!(coverage_ceiling(&b, 0.2, 0.6, 0.1).unwrap(), 1.0);
        assert!(matches!(coverage_ceiling(&b, 0.2, 0.6, 0.0), Err(Error::InvalidTolerance(_))));
    }
}
