//! Monte-Carlo stability estimators and finite-sample bound evaluators.
//!
//! Each replication draws from its own random stream (see [`crate::rng`]),
//! so every estimate is reproducible for a seed regardless of thread count.

use serde::{Deserialize, Serialize};

use crate::data::{DgpSpec, TrainingSet};
use crate::error::{Error, Result};
use crate::partition::{FoldPartition, PartitionRule};
use crate::predictors::{fit_predict, FoldFits, PredictorSpec};
use crate::rng::{try_par_reps, McEstimate, RngSeed, StreamRng};

/// `|yhat(x) - yhat^{\K_j}(x)|` for every fold `j`.
pub fn fold_deviations(
    spec: &PredictorSpec,
    train: &TrainingSet,
    partition: &FoldPartition,
    x: &[f64],
) -> Result<Vec<f64>> {
    let fits = FoldFits::new(spec, train, partition)?;
    let full = fits.predict_full(x);
    Ok(fits.fold_predictions(x).into_iter().map(|v| (full - v).abs()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityProfile {
    pub eps_grid: Vec<f64>,
    /// Estimates of `(1/k) sum_j P(|yhat - yhat^{\K_j}| >= eps)`.
    pub exceed_prob: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Estimate of `(1/k) sum_j E|yhat - yhat^{\K_j}|`.
    pub mean_abs: f64,
    pub mean_abs_std_err: f64,
    pub reps: usize,
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    Ok(())
}

/// Draws a training set of `n` rows and one test point from the law indexed by `n`.
fn draw_with_test_point(dgp: &DgpSpec, n: usize, rng: &mut StreamRng) -> (TrainingSet, Vec<f64>) {
    let train = dgp.draw(n, n, rng);
    let x = dgp.draw(n, 1, rng).row(0).to_vec();
    (train, x)
}

pub fn oos_stability_profile(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    n: usize,
    rule: PartitionRule,
    eps_grid: &[f64],
    reps: usize,
    seed: RngSeed,
) -> Result<StabilityProfile> {
    check_reps(reps)?;
    dgp.validate()?;
    spec.validate()?;
    if eps_grid.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidTolerance("eps grid must be positive".into()));
    }
    let partition = rule.build(n)?;
    let per_rep = try_par_reps(seed, reps, |_, rng| {
        let (train, x) = draw_with_test_point(dgp, n, rng);
        let devs = fold_deviations(spec, &train, &partition, &x)?;
        let k = devs.len() as f64;
        let exceed: Vec<f64> =
            eps_grid.iter().map(|&e| devs.iter().filter(|&&d| d >= e).count() as f64 / k).collect();
        Ok::<_, Error>((exceed, devs.iter().sum::<f64>() / k))
    })?;
    let mut exceed_prob = Vec::with_capacity(eps_grid.len());
    let mut std_err = Vec::with_capacity(eps_grid.len());
    for e in 0..eps_grid.len() {
        let est = McEstimate::from_samples(&per_rep.iter().map(|r| r.0[e]).collect::<Vec<_>>());
        exceed_prob.push(est.value);
        std_err.push(est.std_err);
    }
    let mean_abs = McEstimate::from_samples(&per_rep.iter().map(|r| r.1).collect::<Vec<_>>());
    Ok(StabilityProfile {
        eps_grid: eps_grid.to_vec(),
        exceed_prob,
        std_err,
        mean_abs: mean_abs.value,
        mean_abs_std_err: mean_abs.std_err,
        reps,
    })
}

/// `E|A(x, T_{n+m-1}) - A(x, T_{n-1})|` where both training sets share their
/// first `n - 1` rows and `x` is the `(n+m)`-th draw.
pub fn m_stability(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    n: usize,
    m: usize,
    reps: usize,
    seed: RngSeed,
) -> Result<McEstimate> {
    check_reps(reps)?;
    dgp.validate()?;
    if m < 1 || n < 2 {
        return Err(Error::InvalidParameter("m-stability needs m >= 1 and n >= 2".into()));
    }
    let diffs = try_par_reps(seed, reps, |_, rng| {
        let rows = dgp.draw(n, n + m, rng);
        let x = rows.row(n + m - 1);
        let big = fit_predict(spec, &rows.prefix(n + m - 1), x)?;
        let small = fit_predict(spec, &rows.prefix(n - 1), x)?;
        Ok::<_, Error>((big - small).abs())
    })?;
    Ok(McEstimate::from_samples(&diffs))
}

/// `Var(A(x, T_n)) - Var(A(x, T_{n-1}))`, with `T_{n-1}` the first `n - 1`
/// rows of `T_n` and a shared test point.
///
/// The standard error treats the two sample means as known, which is
/// accurate to `O(1/reps)`.
pub fn variance_gap(spec: &PredictorSpec, dgp: &DgpSpec, n: usize, reps: usize, seed: RngSeed) -> Result<McEstimate> {
    if reps < 2 || n < 2 {
        return Err(Error::InvalidParameter("variance gap needs reps >= 2 and n >= 2".into()));
    }
    dgp.validate()?;
    let pairs = try_par_reps(seed, reps, |_, rng| {
        let (train, x) = draw_with_test_point(dgp, n, rng);
        let a = fit_predict(spec, &train, &x)?;
        let b = fit_predict(spec, &train.prefix(n - 1), &x)?;
        Ok::<_, Error>((a, b))
    })?;
    let a = McEstimate::from_samples(&pairs.iter().map(|p| p.0).collect::<Vec<_>>()).value;
    let b = McEstimate::from_samples(&pairs.iter().map(|p| p.1).collect::<Vec<_>>()).value;
    let scale = reps as f64 / (reps - 1) as f64;
    let d: Vec<f64> = pairs.iter().map(|&(x, y)| scale * ((x - a) * (x - a) - (y - b) * (y - b))).collect();
    Ok(McEstimate::from_samples(&d))
}

/// Nested estimate of `E[(E[yhat_{n+1} | T_{n-1}, x_{n+1}] - yhat^{\n})^2]`.
///
/// The inner mean over fresh `n`-th rows is squared after subtracting its
/// sampling variance `s^2 / inner_reps`, which removes the upward bias.
pub fn update_drift(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    n: usize,
    outer_reps: usize,
    inner_reps: usize,
    seed: RngSeed,
) -> Result<McEstimate> {
    if inner_reps < 2 {
        return Err(Error::InnerTooSmall(inner_reps));
    }
    check_reps(outer_reps)?;
    dgp.validate()?;
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let terms = try_par_reps(seed, outer_reps, |_, rng| {
        let (base, x) = draw_with_test_point(dgp, n, rng);
        let base = base.prefix(n - 1);
        let reduced = fit_predict(spec, &base, &x)?;
        let extra = dgp.draw(n, inner_reps, rng);
        let mut y = base.y().to_vec();
        let mut feats = base.features().to_vec();
        y.push(0.0);
        feats.extend_from_slice(extra.row(0));
        let p = base.p();
        let mut preds = Vec::with_capacity(inner_reps);
        for r in 0..inner_reps {
            y[n - 1] = extra.y()[r];
            feats[(n - 1) * p..].copy_from_slice(extra.row(r));
            let augmented = TrainingSet::from_draws(y.clone(), feats.clone(), p);
            preds.push(fit_predict(spec, &augmented, &x)? - reduced);
        }
        let inner = McEstimate::from_samples(&preds);
        let var_of_mean = inner.std_err * inner.std_err;
        Ok::<_, Error>(inner.value * inner.value - var_of_mean)
    })?;
    Ok(McEstimate::from_samples(&terms))
}

/// Externally estimated expectations entering the finite-sample CV bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacInputs {
    pub k: usize,
    pub delta: f64,
    pub eps: f64,
    /// The truncation level `L >= 0`.
    pub l: f64,
    /// `P(|y - yhat - mu| >= L)`.
    pub tail_prob: f64,
    /// `E|y - yhat - mu|`.
    pub abs_error: f64,
    /// `E|yhat - yhat^{\K_j}|` per fold.
    pub abs_stability: Vec<f64>,
    /// `E min(2L + 3 delta, |yhat - yhat^{\K_j}|)` per fold; when absent,
    /// `min(2L + 3 delta, abs_stability_j)` is used, which can only lower the bound.
    #[serde(default)]
    pub truncated_stability: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacBounds {
    pub bound_trunc: f64,
    pub bound_abs: f64,
}

/// Both lower bounds on `P(inf coverage gap > -2 eps)` for k-fold CV, each capped at 1.
pub fn pac_bound_cv(inputs: &PacInputs) -> Result<PacBounds> {
    let PacInputs { k, delta, eps, l, tail_prob, abs_error, .. } = *inputs;
    if !(delta > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidTolerance(format!("delta and eps must be positive, got {delta} and {eps}")));
    }
    if !(l >= 0.0) {
        return Err(Error::InvalidParameter(format!("L must be nonnegative, got {l}")));
    }
    if k == 0 || inputs.abs_stability.len() != k {
        return Err(Error::LengthMismatch { left: k, right: inputs.abs_stability.len() });
    }
    let cap = 2.0 * l + 3.0 * delta;
    let truncated: Vec<f64> = match &inputs.truncated_stability {
        Some(t) if t.len() != k => return Err(Error::LengthMismatch { left: k, right: t.len() }),
        Some(t) => t.clone(),
        None => inputs.abs_stability.iter().map(|&a| a.min(cap)).collect(),
    };
    let kf = k as f64;
    let e2 = eps * eps;
    let bound_trunc = 1.0
        - 2.0 * tail_prob / eps
        - (8.0 * l + 12.0 * delta) / (kf * delta * e2)
        - 4.0 * (5.0 * kf + 1.0) / (kf * kf * delta * e2) * truncated.iter().sum::<f64>();
    let bound_abs = 1.0
        - abs_error / (kf * delta * e2)
        - (5.0 * kf + 1.0) / (kf * kf * delta * e2) * inputs.abs_stability.iter().sum::<f64>();
    Ok(PacBounds { bound_trunc: bound_trunc.min(1.0), bound_abs: bound_abs.min(1.0) })
}

/// `(1 / (k eps^2)) sum_j P(|yhat - yhat^{\K_j}| > delta)`; values above 1 are vacuous.
pub fn equivalence_bound(k: usize, eps: f64, delta: f64, exceed_probs: &[f64]) -> Result<f64> {
    if !(eps > 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidTolerance(format!("need eps > 0 and delta >= 0, got {eps} and {delta}")));
    }
    if k == 0 || exceed_probs.len() != k {
        return Err(Error::LengthMismatch { left: k, right: exceed_probs.len() });
    }
    if exceed_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter("probabilities must lie in [0, 1]".into()));
    }
    Ok(exceed_probs.iter().sum::<f64>() / (k as f64 * eps * eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(tail: f64, abs_error: f64, stab: f64) -> PacInputs {
        PacInputs {
            k: 100,
            delta: 1.0,
            eps: 0.1,
            l: 0.0,
            tail_prob: tail,
            abs_error,
            abs_stability: vec![stab; 100],
            truncated_stability: None,
        }
    }

    #[test]
    fn pac_examples() {
        let perfect = |k: usize| PacInputs { k, abs_stability: vec![0.0; k], ..inputs(0.0, 0.0, 0.0) };
        let b = pac_bound_cv(&perfect(1_000_000)).unwrap();
        assert!((b.bound_trunc - (1.0 - 1.2e-3)).abs() < 1e-12 && b.bound_abs == 1.0);
        let b = pac_bound_cv(&inputs(0.05, 0.0, 0.0)).unwrap();
        assert!((b.bound_trunc + 12.0).abs() < 1e-12);
        assert_eq!(b.bound_abs, 1.0);
        let bad = PacInputs { delta: 0.0, ..inputs(0.0, 0.0, 0.0) };
        assert!(matches!(pac_bound_cv(&bad), Err(Error::InvalidTolerance(_))));
    }

    #[test]
    fn pac_is_monotone_in_inputs() {
        let base = pac_bound_cv(&inputs(0.01, 0.1, 0.001)).unwrap();
        for worse in [inputs(0.02, 0.1, 0.001), inputs(0.01, 0.2, 0.001), inputs(0.01, 0.1, 0.002)] {
            let b = pac_bound_cv(&worse).unwrap();
            assert!(b.bound_trunc <= base.bound_trunc && b.bound_abs <= base.bound_abs);
        }
    }

    #[test]
    fn equivalence_examples() {
        assert_eq!(equivalence_bound(3, 0.5, 0.1, &[0.0; 3]).unwrap(), 0.0);
        assert!((equivalence_bound(10, 0.5, 0.1, &[0.05; 10]).unwrap() - 0.2).abs() < 1e-15);
        assert!(equivalence_bound(10, 1e-3, 0.1, &[0.05; 10]).unwrap() > 1.0);
        assert!(equivalence_bound(2, 0.5, 0.1, &[0.05]).is_err());
    }

    #[test]
    fn constant_predictor_is_perfectly_stable() {
        let spec = PredictorSpec::Constant { value: 1.0 };
        let dgp = DgpSpec::gaussian_linear(vec![1.0, 2.0], 1.0);
        let prof =
            oos_stability_profile(&spec, &dgp, 20, PartitionRule::LeaveOneOut, &[0.01, 0.1], 50, RngSeed(1)).unwrap();
        assert_eq!(prof.exceed_prob, vec![0.0, 0.0]);
        assert_eq!(prof.mean_abs, 0.0);
        assert_eq!(m_stability(&spec, &dgp, 10, 3, 20, RngSeed(2)).unwrap().value, 0.0);
        assert_eq!(variance_gap(&spec, &dgp, 10, 20, RngSeed(3)).unwrap().value, 0.0);
        assert_eq!(update_drift(&spec, &dgp, 10, 20, 5, RngSeed(4)).unwrap().value, 0.0);
        assert_eq!(update_drift(&spec, &dgp, 10, 20, 1, RngSeed(4)), Err(Error::InnerTooSmall(1)));
    }

    #[test]
    fn dirac_threshold_m_stability() {
        let spec = PredictorSpec::DiracThreshold { level: 3.0, threshold: None };
        let dgp = DgpSpec::DiracFirst { p: 2, y_sigma: 1.0 };
        for n in [10, 50] {
            for (m, want) in [(1, 0.0), (2, 3.0), (5, 3.0)] {
                let est = m_stability(&spec, &dgp, n, m, 30, RngSeed(5)).unwrap();
                assert_eq!((est.value, est.std_err), (want, 0.0));
            }
        }
    }
}
