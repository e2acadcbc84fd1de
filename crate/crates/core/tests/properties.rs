use cvpi::data::DgpSpec;
use cvpi::intervals::{interval, IntervalMethod};
use cvpi::partition::{FoldPartition, PartitionRule};
use cvpi::predictors::{leave_fold_out_residuals, PredictorSpec};
use cvpi::rng::RngSeed;
use cvpi::simlab::conditional_coverage;
use cvpi::stability::{m_stability, oos_stability_profile};

fn linear() -> DgpSpec {
    DgpSpec::gaussian_linear(vec![0.8, -0.4, 0.2], 1.0)
}

#[test]
fn sampling_is_a_pure_function_of_the_seed() {
    let a = linear().sample(50, RngSeed(11)).unwrap();
    let b = linear().sample(50, RngSeed(11)).unwrap();
    let c = linear().sample(50, RngSeed(12)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn constant_predictor_makes_jackknife_and_plus_agree() {
    let train = linear().sample(25, RngSeed(3)).unwrap();
    let bundle = leave_fold_out_residuals(
        &PredictorSpec::Constant { value: 0.3 },
        &train,
        &FoldPartition::singletons(25).unwrap(),
        &[0.1, 0.2, 0.3],
        false,
    )
    .unwrap();
    for (a1, a2) in [(0.05, 0.95), (0.1, 0.8), (0.0, 1.0), (0.3, 0.31)] {
        for delta in [-0.2, 0.0, 0.5] {
            let jack = interval(IntervalMethod::JACKKNIFE, &bundle, a1, a2, delta).unwrap();
            let plus = interval(IntervalMethod::JACKKNIFE_PLUS, &bundle, a1, a2, delta).unwrap();
            assert_eq!(jack, plus, "levels ({a1}, {a2}), delta {delta}");
        }
    }
}

#[test]
fn exceedance_profile_decreases_in_eps() {
    let grid = [0.001, 0.01, 0.05, 0.1, 0.5];
    let profile = oos_stability_profile(
        &PredictorSpec::Ridge { lambda: 0.1 },
        &linear(),
        40,
        PartitionRule::KFold { k: 5 },
        &grid,
        300,
        RngSeed(21),
    )
    .unwrap();
    assert!(profile.exceed_prob.windows(2).all(|w| w[0] >= w[1]), "{:?}", profile.exceed_prob);
    assert!(profile.exceed_prob.iter().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn one_step_stability_matches_loo_profile_mean() {
    let spec = PredictorSpec::Ridge { lambda: 0.1 };
    let n = 30;
    let reps = 3000;
    let profile =
        oos_stability_profile(&spec, &linear(), n, PartitionRule::LeaveOneOut, &[0.1], reps, RngSeed(31)).unwrap();
    let step = m_stability(&spec, &linear(), n, 1, reps, RngSeed(32)).unwrap();
    let gap = (profile.mean_abs - step.value).abs();
    let sigma = (profile.mean_abs_std_err.powi(2) + step.std_err.powi(2)).sqrt();
    assert!(gap <= 3.0 * sigma, "profile {} vs m=1 {} (sigma {sigma})", profile.mean_abs, step.value);
}

#[test]
fn conditional_coverage_is_monotone_in_delta() {
    let spec = PredictorSpec::Ridge { lambda: 0.01 };
    let train = linear().sample(60, RngSeed(41)).unwrap();
    let rule = PartitionRule::LeaveOneOut;
    let covs: Vec<f64> = [-0.5, -0.1, 0.0, 0.1, 0.5]
        .iter()
        .map(|&d| {
            conditional_coverage(&spec, &linear(), &train, rule, IntervalMethod::JACKKNIFE_PLUS, 0.05, 0.95, d, 20_000,
                RngSeed(42))
            .unwrap()
        })
        .collect();
    assert!(covs.windows(2).all(|w| w[0] <= w[1]), "{covs:?}");
}
