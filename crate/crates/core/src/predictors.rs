//! Prediction algorithms and leave-fold-out residuals.
//!
//! Every algorithm is symmetric in its training rows. Sums over rows are
//! accumulated in a canonical row order (sorted by response, then features),
//! so permuting the training set leaves every prediction bit-identical.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::TrainingSet;
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky};
use crate::partition::FoldPartition;
use crate::rng::pairwise_sum;

/// A prediction algorithm together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorSpec {
    /// `x' beta` with `beta = (X'X + lambda m I)^-1 X'Y` on `m` training rows.
    Ridge { lambda: f64 },
    /// Mean response of the `neighbors` nearest rows in Euclidean distance.
    KnnMean { neighbors: usize },
    /// Largest training response.
    MaxResponse,
    /// Negated largest training response.
    NegMaxResponse,
    /// `level * 1{x_1 < threshold}`; the threshold defaults to the training-set size.
    DiracThreshold {
        level: f64,
        #[serde(default)]
        threshold: Option<f64>,
    },
    Constant { value: f64 },
    /// Mean response plus `shift` when the training-set size is even.
    MeanParityShift { shift: f64 },
}

impl PredictorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PredictorSpec::Ridge { lambda } if !(*lambda >= 0.0) || !lambda.is_finite() => {
                Err(Error::InvalidParameter("ridge requires a finite lambda >= 0".into()))
            }
            PredictorSpec::KnnMean { neighbors: 0 } => {
                Err(Error::InvalidParameter("knn_mean requires neighbors >= 1".into()))
            }
            PredictorSpec::DiracThreshold { level, .. } if !level.is_finite() => {
                Err(Error::InvalidParameter("dirac_threshold level must be finite".into()))
            }
            PredictorSpec::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidParameter("constant value must be finite".into()))
            }
            PredictorSpec::MeanParityShift { shift } if !shift.is_finite() => {
                Err(Error::InvalidParameter("shift must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A fitted predictor on a subset of the rows of some training set.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Linear(Vec<f64>),
    Constant(f64),
    /// Knn keeps the indices of its training rows into the owning set.
    Knn { rows: Vec<usize>, neighbors: usize },
    Threshold { level: f64, threshold: f64 },
}

impl FittedModel {
    /// Predicts at `x`; `train` must be the set the model was fitted on.
    pub fn predict(&self, train: &TrainingSet, x: &[f64]) -> f64 {
        match self {
            FittedModel::Linear(beta) => dot(beta, x),
            FittedModel::Constant(c) => *c,
            FittedModel::Knn { rows, neighbors } => knn_predict(train, rows, *neighbors, x),
            FittedModel::Threshold { level, threshold } => {
                if x[0] < *threshold {
                    *level
                } else {
                    0.0
                }
            }
        }
    }
}

fn cmp_rows(train: &TrainingSet, a: usize, b: usize) -> Ordering {
    train.y()[a]
        .total_cmp(&train.y()[b])
        .then_with(|| {
            let (ra, rb) = (train.row(a), train.row(b));
            ra.iter().zip(rb).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
        })
}

/// `rows` sorted into canonical order; ties keep the lower index first.
fn canonical(train: &TrainingSet, rows: &[usize]) -> Vec<usize> {
    let mut order = rows.to_vec();
    order.sort_by(|&a, &b| cmp_rows(train, a, b).then(a.cmp(&b)));
    order
}

fn knn_predict(train: &TrainingSet, rows: &[usize], neighbors: usize, x: &[f64]) -> f64 {
    let mut dist: Vec<(f64, usize)> = rows
        .iter()
        .map(|&i| {
            let d = train.row(i).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (d, i)
        })
        .collect();
    let k = neighbors.min(dist.len());
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, by_dist);
    }
    let mut ys: Vec<f64> = dist[..k].iter().map(|&(_, i)| train.y()[i]).collect();
    ys.sort_by(f64::total_cmp);
    pairwise_sum(&ys) / k as f64
}

fn mean_response(train: &TrainingSet, rows: &[usize]) -> f64 {
    let mut ys: Vec<f64> = rows.iter().map(|&i| train.y()[i]).collect();
    ys.sort_by(f64::total_cmp);
    pairwise_sum(&ys) / ys.len() as f64
}

fn max_response(train: &TrainingSet, rows: &[usize]) -> f64 {
    rows.iter().map(|&i| train.y()[i]).fold(f64::NEG_INFINITY, f64::max)
}

/// Accumulates `X'X` and `X'Y` over `rows` in the given order.
fn gram(train: &TrainingSet, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let p = train.p();
    let mut g = vec![0.0; p * p];
    let mut b = vec![0.0; p];
    for &i in rows {
        let xi = train.row(i);
        let yi = train.y()[i];
        for a in 0..p {
            b[a] += xi[a] * yi;
            let row = &mut g[a * p..a * p + p];
            for c in 0..=a {
                row[c] += xi[a] * xi[c];
            }
        }
    }
    symmetrize(&mut g, p);
    (g, b)
}

fn symmetrize(g: &mut [f64], p: usize) {
    for a in 0..p {
        for c in 0..a {
            g[c * p + a] = g[a * p + c];
        }
    }
}

fn ridge_solve(mut g: Vec<f64>, b: &[f64], p: usize, lambda: f64, m: usize) -> Result<Vec<f64>> {
    let shift = lambda * m as f64;
    for a in 0..p {
        g[a * p + a] += shift;
    }
    Ok(Cholesky::factor(&g, p)?.solve(b))
}

/// Fits `spec` on the given rows of `train`.
pub fn fit_rows(spec: &PredictorSpec, train: &TrainingSet, rows: &[usize]) -> Result<FittedModel> {
    spec.validate()?;
    if rows.is_empty() {
        return Err(Error::TooFewRows(0));
    }
    Ok(match spec {
        PredictorSpec::Ridge { lambda } => {
            let (g, b) = gram(train, &canonical(train, rows));
            FittedModel::Linear(ridge_solve(g, &b, train.p(), *lambda, rows.len())?)
        }
        PredictorSpec::KnnMean { neighbors } => FittedModel::Knn { rows: rows.to_vec(), neighbors: *neighbors },
        PredictorSpec::MaxResponse => FittedModel::Constant(max_response(train, rows)),
        PredictorSpec::NegMaxResponse => FittedModel::Constant(-max_response(train, rows)),
        PredictorSpec::DiracThreshold { level, threshold } => FittedModel::Threshold {
            level: *level,
            threshold: threshold.unwrap_or(rows.len() as f64),
        },
        PredictorSpec::Constant { value } => FittedModel::Constant(*value),
        PredictorSpec::MeanParityShift { shift } => {
            let bump = if rows.len() % 2 == 0 { *shift } else { 0.0 };
            FittedModel::Constant(mean_response(train, rows) + bump)
        }
    })
}

/// Fits on all rows of `train`.
pub fn fit(spec: &PredictorSpec, train: &TrainingSet) -> Result<FittedModel> {
    let rows: Vec<usize> = (0..train.n()).collect();
    fit_rows(spec, train, &rows)
}

/// Fits on `train` and predicts at `xnew`.
pub fn fit_predict(spec: &PredictorSpec, train: &TrainingSet, xnew: &[f64]) -> Result<f64> {
    check_dim(train, xnew)?;
    Ok(fit(spec, train)?.predict(train, xnew))
}

/// Ridge coefficients `(X'X + lambda n I)^-1 X'Y`.
pub fn ridge_coefficients(train: &TrainingSet, lambda: f64) -> Result<Vec<f64>> {
    match fit(&PredictorSpec::Ridge { lambda }, train)? {
        FittedModel::Linear(beta) => Ok(beta),
        _ => unreachable!("ridge always fits a linear model"),
    }
}

fn check_dim(train: &TrainingSet, x: &[f64]) -> Result<()> {
    if x.len() != train.p() {
        return Err(Error::DimensionMismatch { expected: train.p(), got: x.len() });
    }
    Ok(())
}

/// How ridge fold fits are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefitStrategy {
    /// Downdate the full Gram system by each fold's rows.
    #[default]
    Downdate,
    Naive,
}

/// Everything about a training set and partition that does not depend on the
/// test point: one fit per fold, the full-data fit, and the residuals.
#[derive(Debug, Clone)]
pub struct FoldFits {
    train: TrainingSet,
    partition: FoldPartition,
    full: FittedModel,
    folds: Vec<FittedModel>,
    residuals: Vec<f64>,
}

impl FoldFits {
    pub fn new(spec: &PredictorSpec, train: &TrainingSet, partition: &FoldPartition) -> Result<FoldFits> {
        FoldFits::with_strategy(spec, train, partition, RefitStrategy::default())
    }

    pub fn with_strategy(
        spec: &PredictorSpec,
        train: &TrainingSet,
        partition: &FoldPartition,
        strategy: RefitStrategy,
    ) -> Result<FoldFits> {
        spec.validate()?;
        if partition.n() != train.n() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} indices but the training set has {} rows",
                partition.n(),
                train.n()
            )));
        }
        let full = fit(spec, train)?;
        let folds = match (spec, strategy) {
            (PredictorSpec::Ridge { lambda }, RefitStrategy::Downdate) => ridge_downdate(train, partition, *lambda)?,
            _ => (0..partition.k())
                .map(|j| fit_rows(spec, train, &partition.complement(j)))
                .collect::<Result<Vec<_>>>()?,
        };
        let residuals = (0..train.n())
            .map(|i| train.y()[i] - folds[partition.fold_of(i)].predict(train, train.row(i)))
            .collect();
        Ok(FoldFits { train: train.clone(), partition: partition.clone(), full, folds, residuals })
    }

    pub fn train(&self) -> &TrainingSet {
        &self.train
    }

    pub fn partition(&self) -> &FoldPartition {
        &self.partition
    }

    /// Leave-fold-out residuals `y_i - yhat^{\K_j(i)}(x_i)`.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn fold_model(&self, j: usize) -> &FittedModel {
        &self.folds[j]
    }

    pub fn full_model(&self) -> &FittedModel {
        &self.full
    }

    pub fn predict_full(&self, x: &[f64]) -> f64 {
        self.full.predict(&self.train, x)
    }

    pub fn predict_fold(&self, j: usize, x: &[f64]) -> f64 {
        self.folds[j].predict(&self.train, x)
    }

    /// Fold predictions at `x`, one per fold.
    pub fn fold_predictions(&self, x: &[f64]) -> Vec<f64> {
        (0..self.folds.len()).map(|j| self.predict_fold(j, x)).collect()
    }

    /// In-sample predictions of the full-data fit.
    pub fn fitted_values(&self) -> Vec<f64> {
        (0..self.train.n()).map(|i| self.predict_full(self.train.row(i))).collect()
    }

    pub fn bundle_at(&self, xnew: &[f64], want_fitted: bool) -> Result<ResidualBundle> {
        check_dim(&self.train, xnew)?;
        Ok(ResidualBundle {
            partition: self.partition.clone(),
            loo_residuals: self.residuals.clone(),
            fold_predictions: self.fold_predictions(xnew),
            full_prediction: self.predict_full(xnew),
            fitted_values: want_fitted.then(|| self.fitted_values()),
            responses: want_fitted.then(|| self.train.y().to_vec()),
        })
    }
}

fn ridge_downdate(train: &TrainingSet, partition: &FoldPartition, lambda: f64) -> Result<Vec<FittedModel>> {
    let p = train.p();
    let all: Vec<usize> = (0..train.n()).collect();
    let (g_full, b_full) = gram(train, &canonical(train, &all));
    (0..partition.k())
        .map(|j| {
            let fold = partition.fold(j);
            let (g_k, b_k) = gram(train, &canonical(train, fold));
            let g: Vec<f64> = g_full.iter().zip(&g_k).map(|(a, b)| a - b).collect();
            let b: Vec<f64> = b_full.iter().zip(&b_k).map(|(a, b)| a - b).collect();
            ridge_solve(g, &b, p, lambda, train.n() - fold.len()).map(FittedModel::Linear)
        })
        .collect()
}

/// Leave-fold-out quantities evaluated at one new feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBundle {
    pub partition: FoldPartition,
    pub loo_residuals: Vec<f64>,
    pub fold_predictions: Vec<f64>,
    pub full_prediction: f64,
    /// In-sample predictions of the full-data fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitted_values: Option<Vec<f64>>,
    /// Training responses, needed together with the fitted values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responses: Option<Vec<f64>>,
}

impl ResidualBundle {
    pub fn n(&self) -> usize {
        self.loo_residuals.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.partition.n();
        if self.loo_residuals.len() != n {
            return Err(Error::InvalidBundle(format!("{} residuals for {} indices", self.loo_residuals.len(), n)));
        }
        if self.fold_predictions.len() != self.partition.k() {
            return Err(Error::InvalidBundle(format!(
                "{} fold predictions for {} folds",
                self.fold_predictions.len(),
                self.partition.k()
            )));
        }
        let finite = self.loo_residuals.iter().chain(&self.fold_predictions).all(|v| v.is_finite());
        if !finite || !self.full_prediction.is_finite() {
            return Err(Error::InvalidBundle("non-finite entry".into()));
        }
        for extra in [&self.fitted_values, &self.responses].into_iter().flatten() {
            if extra.len() != n {
                return Err(Error::InvalidBundle(format!("{} in-sample values for {} indices", extra.len(), n)));
            }
        }
        Ok(())
    }

    /// `y_i - yhat_i` from the full-data fit.
    pub fn fitted_residuals(&self) -> Result<Vec<f64>> {
        match (&self.fitted_values, &self.responses) {
            (Some(f), Some(y)) => Ok(y.iter().zip(f).map(|(y, f)| y - f).collect()),
            _ => Err(Error::MissingFittedValues),
        }
    }
}

/// Refits once per fold and evaluates the residuals and the predictions at `xnew`.
pub fn leave_fold_out_residuals(
    spec: &PredictorSpec,
    train: &TrainingSet,
    partition: &FoldPartition,
    xnew: &[f64],
    want_fitted: bool,
) -> Result<ResidualBundle> {
    check_dim(train, xnew)?;
    FoldFits::new(spec, train, partition)?.bundle_at(xnew, want_fitted)
}
