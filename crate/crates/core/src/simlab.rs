//! Monte-Carlo experiments on conditional coverage, Jackknife/Jackknife+
//! equivalence, interval lengths and gauge convergence.
//!
//! Every experiment freezes a training set per replication, caches its fold
//! fits, and scores fresh test points drawn from the same stream. Coverage of
//! a non-symmetrized interval is evaluated without building it: with `G` the
//! interval ecdf, `Q_a(G) - d <= y` iff `G(y + d) >= a` and
//! `y <= Q_b(G) + d` iff `G((y - d)-) < b`, both up to the quantile guard.

use serde::{Deserialize, Serialize};

use crate::data::{DgpSpec, TrainingSet};
use crate::ecdf::{uniform_ecdf, weighted_ecdf, StepCdf, GUARD};
use crate::error::{Error, Result};
use crate::intervals::{interval, IntervalBase, IntervalMethod};
use crate::levy::gauge;
use crate::monotone::MonotoneFn;
use crate::partition::{FoldPartition, PartitionRule};
use crate::predictors::{FoldFits, PredictorSpec};
use crate::rng::{pairwise_sum, try_par_reps, McEstimate, RngSeed, StreamRng};
use crate::stability::equivalence_bound;

/// Test points are drawn in blocks of this many rows to bound memory.
const TEST_BLOCK: usize = 4096;

/// How far the interval ends are moved outward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Distortion {
    Fixed(f64),
    /// `iqr_multiple` times the interquartile range of the fold-weighted
    /// residual ecdf of each training set; negative values shrink.
    ResidualIqr { iqr_multiple: f64 },
}

impl Distortion {
    fn resolve(self, residuals: &StepCdf) -> f64 {
        match self {
            Distortion::Fixed(d) => d,
            Distortion::ResidualIqr { iqr_multiple } => {
                iqr_multiple * (residuals.quantile(0.75).to_f64() - residuals.quantile(0.25).to_f64())
            }
        }
    }
}

impl From<f64> for Distortion {
    fn from(d: f64) -> Self {
        Distortion::Fixed(d)
    }
}

/// One interval whose coverage is to be measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageQuery {
    pub method: IntervalMethod,
    pub alpha1: f64,
    pub alpha2: f64,
    pub delta: Distortion,
}

impl CoverageQuery {
    pub fn new(method: IntervalMethod, alpha1: f64, alpha2: f64, delta: impl Into<Distortion>) -> CoverageQuery {
        CoverageQuery { method, alpha1, alpha2, delta: delta.into() }
    }
}

/// Atoms sorted ascending with running weight totals.
struct SortedAtoms {
    values: Vec<f64>,
    cum: Vec<f64>,
}

impl SortedAtoms {
    fn new(values: &[f64], weights: &[f64]) -> SortedAtoms {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let mut acc = 0.0;
        let cum = order
            .iter()
            .map(|&i| {
                acc += weights[i];
                acc
            })
            .collect();
        SortedAtoms { values: order.iter().map(|&i| values[i]).collect(), cum }
    }

    fn mass_upto(&self, idx: usize) -> f64 {
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// Weight of atoms `<= t`.
    fn at(&self, t: f64) -> f64 {
        self.mass_upto(self.values.partition_point(|&v| v <= t))
    }

    /// Weight of atoms `< t`.
    fn below(&self, t: f64) -> f64 {
        self.mass_upto(self.values.partition_point(|&v| v < t))
    }
}

/// Predictions of the full fit and of every fold fit at one test point.
struct PointPredictions {
    full: f64,
    folds: Vec<f64>,
}

/// A frozen training set with its fold fits and precomputed residual orders.
struct FrozenFit {
    fits: FoldFits,
    weights: Vec<f64>,
    residuals: SortedAtoms,
    fitted: Option<SortedAtoms>,
    residual_ecdf: StepCdf,
}

impl FrozenFit {
    fn new(spec: &PredictorSpec, train: &TrainingSet, partition: &FoldPartition, want_fitted: bool) -> Result<FrozenFit> {
        let fits = FoldFits::new(spec, train, partition)?;
        let weights: Vec<f64> = (0..train.n()).map(|i| partition.atom_weight(partition.fold_of(i))).collect();
        let residuals = SortedAtoms::new(fits.residuals(), &weights);
        let fitted = want_fitted.then(|| {
            let res: Vec<f64> = train.y().iter().zip(fits.fitted_values()).map(|(y, f)| y - f).collect();
            SortedAtoms::new(&res, &vec![1.0 / train.n() as f64; train.n()])
        });
        let residual_ecdf = weighted_ecdf(fits.residuals(), &weights)?;
        Ok(FrozenFit { fits, weights, residuals, fitted, residual_ecdf })
    }

    fn predictions(&self, x: &[f64]) -> PointPredictions {
        PointPredictions { full: self.fits.predict_full(x), folds: self.fits.fold_predictions(x) }
    }

    /// `(G(y + s), G((y - s)-))` for the interval ecdf `G` of `base`.
    fn cdf_pair(&self, base: IntervalBase, pred: &PointPredictions, y: f64, s: f64) -> (f64, f64) {
        match base {
            IntervalBase::Cv => (self.residuals.at(y + s - pred.full), self.residuals.below(y - s - pred.full)),
            IntervalBase::FittedValues => {
                let f = self.fitted.as_ref().expect("fitted residuals requested up front");
                (f.at(y + s - pred.full), f.below(y - s - pred.full))
            }
            IntervalBase::CvPlus => {
                let part = self.fits.partition();
                let res = self.fits.residuals();
                let (hi, lo) = (y + s, y - s);
                let mut at = Vec::with_capacity(res.len());
                let mut below = Vec::with_capacity(res.len());
                for (i, u) in res.iter().enumerate() {
                    let atom = pred.folds[part.fold_of(i)] + u;
                    at.push(if atom <= hi { self.weights[i] } else { 0.0 });
                    below.push(if atom < lo { self.weights[i] } else { 0.0 });
                }
                (pairwise_sum(&at), pairwise_sum(&below))
            }
        }
    }

    fn covers(&self, q: &ResolvedQuery, pred: &PointPredictions, x: &[f64], y: f64) -> Result<bool> {
        if q.method.symmetrized {
            let bundle = self.fits.bundle_at(x, q.method.base == IntervalBase::FittedValues)?;
            return Ok(interval(q.method, &bundle, q.alpha1, q.alpha2, q.delta)?.contains(y));
        }
        let (up, down) = self.cdf_pair(q.method.base, pred, y, q.delta);
        Ok(up >= q.alpha1 - GUARD && down < q.alpha2 - GUARD)
    }
}

struct ResolvedQuery {
    method: IntervalMethod,
    alpha1: f64,
    alpha2: f64,
    delta: f64,
}

fn resolve(queries: &[CoverageQuery], frozen: &FrozenFit) -> Vec<ResolvedQuery> {
    queries
        .iter()
        .map(|q| ResolvedQuery {
            method: q.method,
            alpha1: q.alpha1,
            alpha2: q.alpha2,
            delta: q.delta.resolve(&frozen.residual_ecdf),
        })
        .collect()
}

fn check_mc(mc_test: usize, reps: usize) -> Result<()> {
    if mc_test == 0 || reps == 0 {
        return Err(Error::InvalidParameter("need at least one replication and one test point".into()));
    }
    Ok(())
}

fn check_queries(queries: &[CoverageQuery]) -> Result<()> {
    for q in queries {
        if !q.alpha1.is_finite() || !q.alpha2.is_finite() {
            return Err(Error::InvalidParameter("alpha1 and alpha2 must be finite".into()));
        }
        let delta_ok = match q.delta {
            Distortion::Fixed(d) => d.is_finite(),
            Distortion::ResidualIqr { iqr_multiple } => iqr_multiple.is_finite(),
        };
        if !delta_ok {
            return Err(Error::InvalidParameter("delta must be finite".into()));
        }
    }
    Ok(())
}

/// Calls `visit(x, y)` for `count` fresh rows from the law indexed by `n`.
fn for_each_test_point(
    dgp: &DgpSpec,
    n: usize,
    count: usize,
    rng: &mut StreamRng,
    mut visit: impl FnMut(&[f64], f64) -> Result<()>,
) -> Result<()> {
    let mut left = count;
    while left > 0 {
        let block = dgp.draw(n, left.min(TEST_BLOCK), rng);
        for i in 0..block.n() {
            visit(block.row(i), block.y()[i])?;
        }
        left -= block.n();
    }
    Ok(())
}

fn coverages_on(
    frozen: &FrozenFit,
    dgp: &DgpSpec,
    queries: &[CoverageQuery],
    mc_test: usize,
    rng: &mut StreamRng,
) -> Result<Vec<f64>> {
    let resolved = resolve(queries, frozen);
    let mut hits = vec![0usize; queries.len()];
    for_each_test_point(dgp, frozen.fits.train().n(), mc_test, rng, |x, y| {
        let pred = frozen.predictions(x);
        for (q, h) in resolved.iter().zip(hits.iter_mut()) {
            if frozen.covers(q, &pred, x, y)? {
                *h += 1;
            }
        }
        Ok(())
    })?;
    Ok(hits.into_iter().map(|h| h as f64 / mc_test as f64).collect())
}

fn needs_fitted(queries: &[CoverageQuery]) -> bool {
    queries.iter().any(|q| q.method.base == IntervalBase::FittedValues)
}

/// Fraction of `mc_test` fresh test points covered by each query's interval
/// built on the frozen training set `train`.
pub fn conditional_coverages(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    train: &TrainingSet,
    rule: PartitionRule,
    queries: &[CoverageQuery],
    mc_test: usize,
    seed: RngSeed,
) -> Result<Vec<f64>> {
    check_mc(mc_test, 1)?;
    check_queries(queries)?;
    dgp.validate()?;
    if dgp.p() != train.p() {
        return Err(Error::DimensionMismatch { expected: train.p(), got: dgp.p() });
    }
    let frozen = FrozenFit::new(spec, train, &rule.build(train.n())?, needs_fitted(queries))?;
    coverages_on(&frozen, dgp, queries, mc_test, &mut seed.rng())
}

/// Single-query form of [`conditional_coverages`].
#[allow(clippy::too_many_arguments)]
pub fn conditional_coverage(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    train: &TrainingSet,
    rule: PartitionRule,
    method: IntervalMethod,
    alpha1: f64,
    alpha2: f64,
    delta: f64,
    mc_test: usize,
    seed: RngSeed,
) -> Result<f64> {
    let q = CoverageQuery::new(method, alpha1, alpha2, delta);
    Ok(conditional_coverages(spec, dgp, train, rule, &[q], mc_test, seed)?[0])
}

/// Mean and lower quantiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Summary> {
        let f = uniform_ecdf(values)?;
        Ok(Summary {
            mean: pairwise_sum(values) / values.len() as f64,
            q05: f.quantile(0.05).to_f64(),
            q50: f.quantile(0.5).to_f64(),
            q95: f.quantile(0.95).to_f64(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub query: CoverageQuery,
    pub nominal: f64,
    pub conditional_cov: Vec<f64>,
    pub summary: Summary,
    pub mc_test_points: usize,
    pub reps: usize,
}

/// Coverage of several intervals over `train_reps` fresh training sets; all
/// queries share each replication's training set and test points.
#[allow(clippy::too_many_arguments)]
pub fn coverage_table(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    n: usize,
    rule: PartitionRule,
    queries: &[CoverageQuery],
    train_reps: usize,
    mc_test: usize,
    seed: RngSeed,
) -> Result<Vec<CoverageReport>> {
    check_mc(mc_test, train_reps)?;
    check_queries(queries)?;
    dgp.validate()?;
    let partition = rule.build(n)?;
    let per_rep = try_par_reps(seed, train_reps, |_, rng| {
        let train = dgp.draw(n, n, rng);
        let frozen = FrozenFit::new(spec, &train, &partition, needs_fitted(queries))?;
        coverages_on(&frozen, dgp, queries, mc_test, rng)
    })?;
    queries
        .iter()
        .enumerate()
        .map(|(qi, q)| {
            let cov: Vec<f64> = per_rep.iter().map(|r| r[qi]).collect();
            Ok(CoverageReport {
                query: *q,
                nominal: q.alpha2 - q.alpha1,
                summary: Summary::of(&cov)?,
                conditional_cov: cov,
                mc_test_points: mc_test,
                reps: train_reps,
            })
        })
        .collect()
}

/// Distribution of the conditional coverage over fresh training sets.
#[allow(clippy::too_many_arguments)]
pub fn coverage_distribution(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    n: usize,
    rule: PartitionRule,
    query: CoverageQuery,
    train_reps: usize,
    mc_test: usize,
    seed: RngSeed,
) -> Result<CoverageReport> {
    let mut reports = coverage_table(spec, dgp, n, rule, &[query], train_reps, mc_test, seed)?;
    Ok(reports.remove(0))
}

/// Settings of the CV versus CV+ comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSetup {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Distortion of both intervals.
    pub kappa: f64,
    /// Stability tolerance on `|yhat - yhat^{\K_j}|`.
    pub delta: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRep {
    pub cov_cv: f64,
    pub cov_cv_plus: f64,
    /// `inf` over all level pairs of `cov_CV(a1 - eps, a2 + eps, kappa + delta) - cov_CV+(a1, a2, kappa)`.
    pub inf_gap: f64,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub setup: EquivalenceSetup,
    pub per_rep: Vec<EquivalenceRep>,
    /// 95% quantile of `|cov_cv - cov_cv_plus|`.
    pub abs_gap_q95: f64,
    pub max_abs_gap: f64,
    pub event_freq: f64,
    pub event_std_err: f64,
    /// Per-fold estimates of `P(|yhat - yhat^{\K_j}| > delta)`.
    pub exceed_probs: Vec<f64>,
    pub bound: f64,
    pub mc_test_points: usize,
    pub reps: usize,
}

/// Range-add, global-min segment tree.
struct MinTree {
    size: usize,
    min: Vec<i64>,
    lazy: Vec<i64>,
}

impl MinTree {
    fn new(len: usize) -> MinTree {
        let size = len.next_power_of_two();
        MinTree { size, min: vec![0; 2 * size], lazy: vec![0; 2 * size] }
    }

    fn add(&mut self, from: usize, v: i64) {
        self.add_rec(1, 0, self.size, from, v);
    }

    fn add_rec(&mut self, node: usize, lo: usize, hi: usize, from: usize, v: i64) {
        if hi <= from {
            return;
        }
        if lo >= from {
            self.min[node] += v;
            self.lazy[node] += v;
            return;
        }
        let mid = (lo + hi) / 2;
        self.add_rec(2 * node, lo, mid, from, v);
        self.add_rec(2 * node + 1, mid, hi, from, v);
        self.min[node] = self.lazy[node] + self.min[2 * node].min(self.min[2 * node + 1]);
    }

    fn global_min(&self) -> i64 {
        self.min[1]
    }
}

/// `inf_{a1, a2}` of `#{a1 <= lower_cv_t, a2 > upper_cv_t} - #{a1 <= lower_plus_t, a2 > upper_plus_t}`.
///
/// Both counts only change when `a1` crosses a lower key or `a2` crosses an
/// upper key, so sweeping `a1` downward over the lower keys while keeping the
/// count as a function of the upper-key rank of `a2` in a segment tree is exact.
fn inf_count_difference(cv: &[(f64, f64)], plus: &[(f64, f64)]) -> i64 {
    let mut uppers: Vec<f64> = cv.iter().chain(plus).map(|p| p.1).collect();
    uppers.sort_by(f64::total_cmp);
    uppers.dedup();
    let mut events: Vec<(f64, f64, i64)> = cv
        .iter()
        .map(|&(a, b)| (a, b, 1))
        .chain(plus.iter().map(|&(a, b)| (a, b, -1)))
        .collect();
    events.sort_by(|x, y| y.0.total_cmp(&x.0));
    // Slot j stands for a2 just above uppers[j - 1]; slot 0 for a2 below every key.
    let mut tree = MinTree::new(uppers.len() + 1);
    let mut best = 0;
    let mut i = 0;
    while i < events.len() {
        let key = events[i].0;
        while i < events.len() && events[i].0 == key {
            let rank = uppers.partition_point(|&u| u < events[i].1);
            tree.add(rank + 1, events[i].2);
            i += 1;
        }
        best = best.min(tree.global_min());
    }
    best
}

/// Compares CV and CV+ on identical training sets and test points, and
/// checks the finite-sample relation between them.
#[allow(clippy::too_many_arguments)]
pub fn jk_vs_jkplus_gap(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    n: usize,
    rule: PartitionRule,
    setup: EquivalenceSetup,
    train_reps: usize,
    mc_test: usize,
    seed: RngSeed,
) -> Result<EquivalenceReport> {
    check_mc(mc_test, train_reps)?;
    dgp.validate()?;
    let EquivalenceSetup { alpha1, alpha2, kappa, delta, eps } = setup;
    if !(eps > 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidTolerance("need eps > 0 and delta >= 0".into()));
    }
    if ![alpha1, alpha2, kappa, delta, eps].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("equivalence settings must be finite".into()));
    }
    let partition = rule.build(n)?;
    let k = partition.k();
    let per_rep = try_par_reps(seed, train_reps, |_, rng| {
        let train = dgp.draw(n, n, rng);
        let frozen = FrozenFit::new(spec, &train, &partition, false)?;
        let mut cv_keys = Vec::with_capacity(mc_test);
        let mut plus_keys = Vec::with_capacity(mc_test);
        let (mut hit_cv, mut hit_plus) = (0usize, 0usize);
        let mut exceed = vec![0usize; k];
        for_each_test_point(dgp, n, mc_test, rng, |x, y| {
            let pred = frozen.predictions(x);
            let (u, w) = frozen.cdf_pair(IntervalBase::Cv, &pred, y, kappa);
            hit_cv += usize::from(u >= alpha1 - GUARD && w < alpha2 - GUARD);
            let (u, w) = frozen.cdf_pair(IntervalBase::CvPlus, &pred, y, kappa);
            hit_plus += usize::from(u >= alpha1 - GUARD && w < alpha2 - GUARD);
            plus_keys.push((u + GUARD, w + GUARD));
            let (u, w) = frozen.cdf_pair(IntervalBase::Cv, &pred, y, kappa + delta);
            cv_keys.push((u + eps + GUARD, w - eps + GUARD));
            for (e, f) in exceed.iter_mut().zip(&pred.folds) {
                *e += usize::from((pred.full - f).abs() > delta);
            }
            Ok(())
        })?;
        let inf_gap = inf_count_difference(&cv_keys, &plus_keys) as f64 / mc_test as f64;
        let rep = EquivalenceRep {
            cov_cv: hit_cv as f64 / mc_test as f64,
            cov_cv_plus: hit_plus as f64 / mc_test as f64,
            inf_gap,
            event: inf_gap <= -eps,
        };
        Ok::<_, Error>((rep, exceed))
    })?;
    let gaps: Vec<f64> = per_rep.iter().map(|(r, _)| (r.cov_cv - r.cov_cv_plus).abs()).collect();
    let events: Vec<f64> = per_rep.iter().map(|(r, _)| f64::from(u8::from(r.event))).collect();
    let freq = McEstimate::from_samples(&events);
    let total = (train_reps * mc_test) as f64;
    let exceed_probs: Vec<f64> =
        (0..k).map(|j| per_rep.iter().map(|(_, e)| e[j]).sum::<usize>() as f64 / total).collect();
    Ok(EquivalenceReport {
        setup,
        abs_gap_q95: Summary::of(&gaps)?.q95,
        max_abs_gap: gaps.iter().copied().fold(0.0, f64::max),
        event_freq: freq.value,
        event_std_err: freq.std_err,
        bound: equivalence_bound(k, eps, delta, &exceed_probs)?,
        exceed_probs,
        per_rep: per_rep.into_iter().map(|(r, _)| r).collect(),
        mc_test_points: mc_test,
        reps: train_reps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityRep {
    /// Coverage of the `-2 delta` shrunken interval at `(alpha1, alpha2)`.
    pub shrunk: f64,
    /// Coverage of the `delta` inflated interval at `(0, alpha1)`.
    pub lower_tail: f64,
    /// Coverage of the `delta` inflated interval at `(alpha2, 1)`.
    pub upper_tail: f64,
    /// `shrunk - (alpha2 - alpha1)`.
    pub overshoot: f64,
    /// `max(0, alpha1 - lower_tail) + max(0, 1 - alpha2 - upper_tail)`.
    pub dual_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub per_rep: Vec<DualityRep>,
    /// Replications where the overshoot exceeds the dual tolerance.
    pub violations: usize,
}

/// Checks that shrunken intervals cannot overshoot by more than the
/// undercoverage of the two inflated tail intervals next to them.
#[allow(clippy::too_many_arguments)]
pub fn shrunken_duality(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    n: usize,
    rule: PartitionRule,
    method: IntervalMethod,
    alpha1: f64,
    alpha2: f64,
    delta: f64,
    train_reps: usize,
    mc_test: usize,
    seed: RngSeed,
) -> Result<DualityReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidTolerance("duality check needs delta > 0".into()));
    }
    let queries = [
        CoverageQuery::new(method, alpha1, alpha2, -2.0 * delta),
        CoverageQuery::new(method, 0.0, alpha1, delta),
        CoverageQuery::new(method, alpha2, 1.0, delta),
    ];
    let table = coverage_table(spec, dgp, n, rule, &queries, train_reps, mc_test, seed)?;
    let per_rep: Vec<DualityRep> = (0..train_reps)
        .map(|r| {
            let (shrunk, lower_tail, upper_tail) =
                (table[0].conditional_cov[r], table[1].conditional_cov[r], table[2].conditional_cov[r]);
            DualityRep {
                shrunk,
                lower_tail,
                upper_tail,
                overshoot: shrunk - (alpha2 - alpha1),
                dual_eps: (alpha1 - lower_tail).max(0.0) + (1.0 - alpha2 - upper_tail).max(0.0),
            }
        })
        .collect();
    let violations = per_rep.iter().filter(|r| r.overshoot > r.dual_eps + 1e-12).count();
    Ok(DualityReport { per_rep, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthReport {
    pub methods: (IntervalMethod, IntervalMethod),
    pub alpha1: f64,
    pub alpha2: f64,
    /// Per replication, the lengths of the two methods' intervals at one fresh test point.
    pub lengths: Vec<(f64, f64)>,
    /// Fraction of replications with `first <= second`.
    pub frac_first_le: f64,
    /// Fraction of replications with `first < second`.
    pub frac_first_lt: f64,
    /// Fraction of replications where the first interval is a subset of the second.
    pub frac_first_subset: f64,
}

/// Lengths of two interval methods on the same training sets and test points.
#[allow(clippy::too_many_arguments)]
pub fn length_compare(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    n: usize,
    rule: PartitionRule,
    methods: (IntervalMethod, IntervalMethod),
    alpha1: f64,
    alpha2: f64,
    train_reps: usize,
    seed: RngSeed,
) -> Result<LengthReport> {
    check_mc(1, train_reps)?;
    dgp.validate()?;
    let partition = rule.build(n)?;
    let want_fitted = methods.0.base == IntervalBase::FittedValues || methods.1.base == IntervalBase::FittedValues;
    let per_rep = try_par_reps(seed, train_reps, |_, rng| {
        let train = dgp.draw(n, n, rng);
        let test = dgp.draw(n, 1, rng);
        let bundle = FoldFits::new(spec, &train, &partition)?.bundle_at(test.row(0), want_fitted)?;
        let a = interval(methods.0, &bundle, alpha1, alpha2, 0.0)?;
        let b = interval(methods.1, &bundle, alpha1, alpha2, 0.0)?;
        Ok::<_, Error>((a.length(), b.length(), a.is_subset_of(&b)))
    })?;
    let reps = train_reps as f64;
    let frac = |f: &dyn Fn(&(f64, f64, bool)) -> bool| per_rep.iter().filter(|r| f(r)).count() as f64 / reps;
    Ok(LengthReport {
        methods,
        alpha1,
        alpha2,
        frac_first_le: frac(&|r| r.0 <= r.1),
        frac_first_lt: frac(&|r| r.0 < r.1),
        frac_first_subset: frac(&|r| r.2),
        lengths: per_rep.iter().map(|r| (r.0, r.1)).collect(),
    })
}

/// One grid point of a Monte-Carlo trend experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub delta: f64,
    pub mean: f64,
    pub std_err: f64,
    pub per_rep: Vec<f64>,
}

impl GridPoint {
    fn new(n: usize, delta: f64, per_rep: Vec<f64>) -> GridPoint {
        let est = McEstimate::from_samples(&per_rep);
        GridPoint { n, delta, mean: est.value, std_err: est.std_err, per_rep }
    }
}

fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() || n_grid.iter().any(|&n| n < 2) {
        return Err(Error::InvalidParameter("n grid must be nonempty with every n >= 2".into()));
    }
    Ok(())
}

/// Gauge between the fold-weighted residual ecdf and an `mc_oracle`-point
/// ecdf of fresh prediction errors, for every `n` and `delta`.
#[allow(clippy::too_many_arguments)]
pub fn gauge_convergence(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    n_grid: &[usize],
    rule: PartitionRule,
    deltas: &[f64],
    train_reps: usize,
    mc_oracle: usize,
    seed: RngSeed,
) -> Result<Vec<GridPoint>> {
    check_mc(mc_oracle, train_reps)?;
    check_grid(n_grid)?;
    dgp.validate()?;
    if deltas.is_empty() || deltas.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(Error::InvalidTolerance("gauge tolerances must be finite and nonnegative".into()));
    }
    let mut out = Vec::new();
    for (gi, &n) in n_grid.iter().enumerate() {
        let partition = rule.build(n)?;
        let per_rep = try_par_reps(seed.derive(gi as u64), train_reps, |_, rng| {
            let train = dgp.draw(n, n, rng);
            let fits = FoldFits::new(spec, &train, &partition)?;
            let weights: Vec<f64> = (0..n).map(|i| partition.atom_weight(partition.fold_of(i))).collect();
            let f_hat = weighted_ecdf(fits.residuals(), &weights)?;
            let mut errors = Vec::with_capacity(mc_oracle);
            for_each_test_point(dgp, n, mc_oracle, rng, |x, y| {
                errors.push(y - fits.predict_full(x));
                Ok(())
            })?;
            let f_n = uniform_ecdf(&errors)?;
            deltas.iter().map(|&d| Ok(gauge(&f_hat, &f_n, d)?.value)).collect::<Result<Vec<f64>>>()
        })?;
        for (di, &d) in deltas.iter().enumerate() {
            out.push(GridPoint::new(n, d, per_rep.iter().map(|r| r[di]).collect()));
        }
    }
    Ok(out)
}

/// Mean length of the symmetrized CV interval at level `nominal` over an `n` grid.
pub fn infinite_length_probe(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    n_grid: &[usize],
    rule: PartitionRule,
    nominal: f64,
    train_reps: usize,
    seed: RngSeed,
) -> Result<Vec<GridPoint>> {
    check_mc(1, train_reps)?;
    check_grid(n_grid)?;
    dgp.validate()?;
    if !(nominal > 0.0 && nominal < 1.0) {
        return Err(Error::InvalidParameter(format!("nominal level must lie in (0, 1), got {nominal}")));
    }
    let method = IntervalMethod::new(IntervalBase::Cv, true);
    n_grid
        .iter()
        .enumerate()
        .map(|(gi, &n)| {
            let partition = rule.build(n)?;
            let lengths = try_par_reps(seed.derive(gi as u64), train_reps, |_, rng| {
                let train = dgp.draw(n, n, rng);
                let test = dgp.draw(n, 1, rng);
                let bundle = FoldFits::new(spec, &train, &partition)?.bundle_at(test.row(0), false)?;
                Ok::<_, Error>(interval(method, &bundle, 0.0, nominal, 0.0)?.length())
            })?;
            Ok(GridPoint::new(n, 0.0, lengths))
        })
        .collect()
}

/// `E[loss(|y - yhat(x)|) | T_n]` from `mc_test` fresh test points.
pub fn conditional_risk(
    spec: &PredictorSpec,
    dgp: &DgpSpec,
    train: &TrainingSet,
    loss: &MonotoneFn,
    mc_test: usize,
    seed: RngSeed,
) -> Result<McEstimate> {
    check_mc(mc_test, 1)?;
    dgp.validate()?;
    loss.check_monotone()?;
    let model = crate::predictors::fit(spec, train)?;
    let mut values = Vec::with_capacity(mc_test);
    for_each_test_point(dgp, train.n(), mc_test, &mut seed.rng(), |x, y| {
        values.push(loss.eval((y - model.predict(train, x)).abs()));
        Ok(())
    })?;
    Ok(McEstimate::from_samples(&values))
}

/// Whether `means` is monotone along the grid up to `3` combined standard
/// errors between neighbours.
pub fn is_monotone_within(means: &[f64], std_errs: &[f64], increasing: bool) -> bool {
    means.windows(2).zip(std_errs.windows(2)).all(|(m, s)| {
        let slack = 3.0 * (s[0] * s[0] + s[1] * s[1]).sqrt();
        if increasing {
            m[1] >= m[0] - slack
        } else {
            m[1] <= m[0] + slack
        }
    })
}

/// Serializes rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Serialize)]
struct CoverageRow {
    query: usize,
    rep: usize,
    nominal: f64,
    coverage: f64,
}

#[derive(Serialize)]
struct EquivalenceRow {
    rep: usize,
    cov_cv: f64,
    cov_cv_plus: f64,
    inf_gap: f64,
    event: bool,
}

#[derive(Serialize)]
struct LengthRow {
    rep: usize,
    first: f64,
    second: f64,
}

#[derive(Serialize)]
struct GridRow {
    n: usize,
    delta: f64,
    rep: usize,
    value: f64,
}

pub fn coverage_csv(reports: &[CoverageReport]) -> Result<String> {
    to_csv(reports.iter().enumerate().flat_map(|(query, r)| {
        r.conditional_cov.iter().enumerate().map(move |(rep, &coverage)| CoverageRow {
            query,
            rep,
            nominal: r.nominal,
            coverage,
        })
    }))
}

pub fn equivalence_csv(report: &EquivalenceReport) -> Result<String> {
    to_csv(report.per_rep.iter().enumerate().map(|(rep, r)| EquivalenceRow {
        rep,
        cov_cv: r.cov_cv,
        cov_cv_plus: r.cov_cv_plus,
        inf_gap: r.inf_gap,
        event: r.event,
    }))
}

pub fn length_csv(report: &LengthReport) -> Result<String> {
    to_csv(report.lengths.iter().enumerate().map(|(rep, &(first, second))| LengthRow { rep, first, second }))
}

pub fn grid_csv(points: &[GridPoint]) -> Result<String> {
    to_csv(points.iter().flat_map(|g| {
        g.per_rep.iter().enumerate().map(move |(rep, &value)| GridRow { n: g.n, delta: g.delta, rep, value })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecdf::ExtReal;

    fn linear() -> DgpSpec {
        DgpSpec::gaussian_linear(vec![1.0, -0.5], 1.0)
    }

    #[test]
    fn fast_coverage_matches_interval_construction() {
        let dgp = linear();
        let spec = PredictorSpec::Ridge { lambda: 0.1 };
        let train = dgp.sample(12, RngSeed(3)).unwrap();
        for rule in [PartitionRule::LeaveOneOut, PartitionRule::KFold { k: 3 }] {
            let part = rule.build(12).unwrap();
            let frozen = FrozenFit::new(&spec, &train, &part, true).unwrap();
            let test = dgp.draw(12, 200, &mut RngSeed(4).rng());
            for base in [IntervalBase::Cv, IntervalBase::CvPlus, IntervalBase::FittedValues] {
                for (a1, a2, d) in [(0.05, 0.95, 0.0), (0.0, 1.0, 0.2), (0.25, 0.5, -0.3), (0.6, 0.3, 0.0), (-0.2, 1.3, 0.0)]
                {
                    let method = IntervalMethod::new(base, false);
                    let q = ResolvedQuery { method, alpha1: a1, alpha2: a2, delta: d };
                    for i in 0..test.n() {
                        let x = test.row(i);
                        let y = test.y()[i];
                        let bundle = frozen.fits.bundle_at(x, true).unwrap();
                        let direct = interval(method, &bundle, a1, a2, d).unwrap().contains(y);
                        assert_eq!(frozen.covers(&q, &frozen.predictions(x), x, y).unwrap(), direct);
                    }
                }
            }
        }
    }

    #[test]
    fn trivial_coverages() {
        let dgp = linear();
        let train = dgp.sample(15, RngSeed(1)).unwrap();
        let c = PredictorSpec::Constant { value: 0.0 };
        let rule = PartitionRule::LeaveOneOut;
        let full = conditional_coverage(&c, &dgp, &train, rule, IntervalMethod::JACKKNIFE, 0.0, 1.0, 1e9, 500, RngSeed(2));
        assert_eq!(full.unwrap(), 1.0);
        let empty = conditional_coverage(&c, &dgp, &train, rule, IntervalMethod::JACKKNIFE, 0.8, 0.2, 0.0, 500, RngSeed(2));
        assert_eq!(empty.unwrap(), 0.0);
    }

    #[test]
    fn exchangeable_coverage_of_constant_predictor() {
        // With a constant predictor the residuals are the responses, so the
        // test response is exchangeable with them: [Q_{a/n}, Q_{b/n}] is
        // [Y_(a), Y_(b)] and covers with probability exactly (b - a) / (n + 1).
        let dgp = DgpSpec::gaussian_linear(vec![0.0], 1.0);
        let spec = PredictorSpec::Constant { value: 0.0 };
        for (n, a, b) in [(4, 1, 3), (8, 2, 7)] {
            let q = CoverageQuery::new(
                IntervalMethod::JACKKNIFE,
                a as f64 / n as f64,
                b as f64 / n as f64,
                0.0,
            );
            let rep = coverage_distribution(&spec, &dgp, n, PartitionRule::LeaveOneOut, q, 400, 500, RngSeed(n as u64))
                .unwrap();
            let want = (b - a) as f64 / (n + 1) as f64;
            let est = McEstimate::from_samples(&rep.conditional_cov);
            assert!((est.value - want).abs() <= 3.0 * est.std_err, "{} vs {want}", est.value);
        }
    }

    #[test]
    fn inf_count_difference_matches_brute_force() {
        use rand::Rng;
        let mut rng = RngSeed(9).rng();
        for _ in 0..200 {
            let m = rng.random_range(1..8);
            let grid = |rng: &mut StreamRng| rng.random_range(0..5) as f64 / 4.0;
            let cv: Vec<(f64, f64)> = (0..m).map(|_| (grid(&mut rng), grid(&mut rng))).collect();
            let plus: Vec<(f64, f64)> = (0..m).map(|_| (grid(&mut rng), grid(&mut rng))).collect();
            let count = |pts: &[(f64, f64)], a1: f64, a2: f64| pts.iter().filter(|p| a1 <= p.0 && a2 > p.1).count() as i64;
            let mut brute = 0;
            for i in -2..=10 {
                for j in -2..=10 {
                    let (a1, a2) = (i as f64 / 8.0, j as f64 / 8.0);
                    brute = brute.min(count(&cv, a1, a2) - count(&plus, a1, a2));
                }
            }
            assert_eq!(inf_count_difference(&cv, &plus), brute);
        }
    }

    #[test]
    fn constant_predictor_has_no_cv_gap() {
        let setup = EquivalenceSetup { alpha1: 0.1, alpha2: 0.9, kappa: 0.0, delta: 0.0, eps: 0.05 };
        let rep = jk_vs_jkplus_gap(
            &PredictorSpec::Constant { value: 1.0 },
            &linear(),
            20,
            PartitionRule::LeaveOneOut,
            setup,
            10,
            300,
            RngSeed(5),
        )
        .unwrap();
        assert!(rep.per_rep.iter().all(|r| r.cov_cv == r.cov_cv_plus && !r.event));
        assert_eq!((rep.max_abs_gap, rep.bound, rep.event_freq), (0.0, 0.0, 0.0));
    }

    #[test]
    fn duality_has_no_violations() {
        let rep = shrunken_duality(
            &PredictorSpec::Ridge { lambda: 0.01 },
            &linear(),
            30,
            PartitionRule::KFold { k: 5 },
            IntervalMethod::JACKKNIFE_PLUS,
            0.1,
            0.9,
            0.1,
            20,
            500,
            RngSeed(6),
        )
        .unwrap();
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn max_response_lengths() {
        let methods = (IntervalMethod::JACKKNIFE_PLUS, IntervalMethod::JACKKNIFE);
        let rep =
            length_compare(&PredictorSpec::MaxResponse, &linear(), 10, PartitionRule::LeaveOneOut, methods, 0.05, 0.95, 50, RngSeed(7))
                .unwrap();
        assert_eq!((rep.frac_first_le, rep.frac_first_lt, rep.frac_first_subset), (1.0, 1.0, 1.0));
    }

    #[test]
    fn gauge_is_monotone_in_delta_per_rep() {
        let pts = gauge_convergence(
            &PredictorSpec::Ridge { lambda: 0.1 },
            &linear(),
            &[20],
            PartitionRule::LeaveOneOut,
            &[0.0, 0.5],
            10,
            400,
            RngSeed(8),
        )
        .unwrap();
        assert!(pts[0].per_rep.iter().zip(&pts[1].per_rep).all(|(a, b)| b <= a));
    }

    #[test]
    fn distortion_json_and_resolution() {
        let d: Distortion = serde_json::from_str("0.5").unwrap();
        assert_eq!(d, Distortion::Fixed(0.5));
        let d: Distortion = serde_json::from_str(r#"{"iqr_multiple":-0.1}"#).unwrap();
        let f = uniform_ecdf(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.quantile(0.75), ExtReal::Finite(2.0));
        assert_eq!(f.quantile(0.25), ExtReal::Finite(0.0));
        assert!((d.resolve(&f) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let pts = vec![GridPoint::new(10, 0.0, vec![1.0, 2.0])];
        let s = grid_csv(&pts).unwrap();
        assert_eq!(s, "n,delta,rep,value\n10,0.0,0,1.0\n10,0.0,1,2.0\n");
    }

    #[test]
    fn monotone_check() {
        assert!(is_monotone_within(&[1.0, 2.0, 3.0], &[0.0; 3], true));
        assert!(is_monotone_within(&[1.0, 0.9, 3.0], &[0.1; 3], true));
        assert!(!is_monotone_within(&[1.0, 0.0, 3.0], &[0.1; 3], true));
    }
}
