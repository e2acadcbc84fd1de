//! The `cvpi` command-line interface.
//!
//! Results are printed as one JSON document with a top-level `"schema": "1"`
//! field, or written to `--out`. Failures print a one-line JSON error object
//! and exit with 2 (usage), 3 (data) or 4 (numeric). A `--config` JSON object
//! supplies defaults for any long flag of the invoked subcommand; flags given
//! on the command line take precedence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::data::{load_dataset, DataFormat, DgpSpec, TrainingSet};
use crate::ecdf::StepCdf;
use crate::error::{Error, ErrorKind, Result};
use crate::intervals::{coverage_ceiling, interval, shortest_interval, IntervalBase, IntervalMethod};
use crate::levy::{gauge, gauge_delta0_is_kolmogorov};
use crate::monotone::MonotoneFn;
use crate::partition::PartitionRule;
use crate::predictors::{leave_fold_out_residuals, FoldFits, PredictorSpec};
use crate::risk::{loss_plugin_bounds, misclassification_estimate, mse_estimate};
use crate::rng::RngSeed;
use crate::simlab::{self, CoverageQuery, Distortion, EquivalenceSetup};
use crate::stability::{self, PacInputs};

pub const SCHEMA: &str = "1";

#[derive(Parser, Debug)]
#[command(name = "cvpi", version, about = "Cross-validation prediction intervals and diagnostics")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write a tidy CSV of per-replication values here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// JSON object of default flag values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prediction interval at one new feature vector.
    Interval(IntervalArgs),
    /// Risk estimates from leave-fold-out residuals.
    Risk(RiskArgs),
    /// Levy gauge between two step distribution functions.
    Gauge(GaugeArgs),
    /// Stability estimates and the bounds built from them.
    #[command(subcommand)]
    Stability(StabilityCommand),
    /// Monte-Carlo experiments on coverage, length and the gauge.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Draw a dataset from a data-generating process.
    Dgp(DgpArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    format: Option<DataFormat>,
    /// Predictor as inline JSON or a path to a JSON file.
    #[arg(long)]
    predictor: String,
    /// Number of folds; leave-one-out when absent.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct IntervalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "cv")]
    method: IntervalBase,
    #[arg(long)]
    symmetrized: bool,
    #[arg(long, allow_negative_numbers = true)]
    alpha1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha2: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    xnew: Vec<f64>,
    /// Return the shortest interval of this nominal level instead of fixed levels.
    #[arg(long)]
    shortest: Option<f64>,
}

#[derive(Args, Debug)]
struct RiskArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Non-decreasing loss as inline JSON or a path; squared loss by default.
    #[arg(long)]
    loss: Option<String>,
}

#[derive(Args, Debug)]
struct GaugeArgs {
    #[arg(long)]
    f: String,
    #[arg(long)]
    g: String,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Predictor as inline JSON or a path to a JSON file.
    #[arg(long)]
    predictor: String,
    /// Data-generating process as inline JSON or a path to a JSON file.
    #[arg(long)]
    dgp: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    reps: usize,
}

#[derive(Subcommand, Debug)]
enum StabilityCommand {
    /// Out-of-sample stability profile over an eps grid.
    Profile {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        eps_grid: Vec<f64>,
    },
    /// m-stability coefficient.
    Mstab {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        m: usize,
    },
    /// Finite-sample lower bounds for CV coverage from estimated inputs.
    Pacbound {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        l: f64,
        #[arg(long, default_value_t = 0.0)]
        tail: f64,
        #[arg(long, default_value_t = 0.0)]
        abs_error: f64,
        /// Per-fold E|yhat - yhat^{\K_j}|; a single value is repeated for every fold.
        #[arg(long, value_delimiter = ',', required = true)]
        stability: Vec<f64>,
        /// Per-fold truncated stability terms.
        #[arg(long, value_delimiter = ',')]
        truncated: Option<Vec<f64>>,
    },
    /// Bound on the frequency of CV falling behind CV+.
    Eqbound {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Per-fold exceedance probabilities; a single value is repeated for every fold.
        #[arg(long, value_delimiter = ',', required = true)]
        probs: Vec<f64>,
    },
    /// Var(yhat with n rows) - Var(yhat with n - 1 rows).
    VarGap {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Squared drift added by one new observation.
    Drift {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 20)]
        inner: usize,
    },
}

#[derive(Args, Debug)]
struct LevelArgs {
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    alpha1: f64,
    #[arg(long, default_value_t = 0.95, allow_negative_numbers = true)]
    alpha2: f64,
}

#[derive(Subcommand, Debug)]
enum SimCommand {
    /// Distribution of the conditional coverage over training sets.
    Coverage {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        levels: LevelArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "cv")]
        method: IntervalBase,
        #[arg(long)]
        symmetrized: bool,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true, conflicts_with = "delta_iqr")]
        delta: f64,
        /// Distortion as a multiple of each training set's residual IQR.
        #[arg(long, allow_negative_numbers = true)]
        delta_iqr: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        mc_test: usize,
    },
    /// CV versus CV+ coverage on identical training sets.
    Equiv {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        levels: LevelArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        kappa: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        mc_test: usize,
    },
    /// Interval lengths of two methods.
    Length {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        levels: LevelArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "cv_plus")]
        first: IntervalBase,
        #[arg(long, value_enum, default_value = "cv")]
        second: IntervalBase,
        #[arg(long)]
        symmetrized: bool,
    },
    /// Gauge between residual ecdf and prediction-error distribution over an n grid.
    Gauge {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        mc_oracle: usize,
    },
    /// Mean symmetrized interval length over an n grid.
    Problen {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 0.9)]
        nominal: f64,
    },
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    predictor: String,
    #[arg(long)]
    dgp: String,
    #[arg(long, value_delimiter = ',', required = true)]
    n_grid: Vec<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
}

#[derive(Args, Debug)]
struct DgpArgs {
    #[arg(long)]
    dgp: String,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: DataFormat,
}

/// What a subcommand produced.
struct Output {
    command: &'static str,
    result: Value,
    csv: Option<String>,
    /// Raw text written instead of the JSON envelope.
    raw: Option<String>,
}

impl Output {
    fn json(command: &'static str, result: impl Serialize) -> Result<Output> {
        Ok(Output { command, result: to_value(result)?, csv: None, raw: None })
    }

    fn with_csv(mut self, csv: String) -> Output {
        self.csv = Some(csv);
        self
    }
}

fn to_value(v: impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::MalformedInput(e.to_string()))
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                eprint!("{e}");
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            print_error("usage", first);
            return 2;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> i32 {
    let (kind, code) = match e.kind() {
        ErrorKind::Usage => ("usage", 2),
        ErrorKind::Data => ("data", 3),
        ErrorKind::Numeric => ("numeric", 4),
    };
    print_error(kind, &e.to_string());
    code
}

fn print_error(kind: &str, message: &str) {
    println!("{}", json!({"schema": SCHEMA, "error": {"kind": kind, "message": message}}));
}

/// Appends `--key value` for every config entry whose flag is not already on
/// the command line.
fn merge_config(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path)?;
    let config: Value = serde_json::from_str(&text).map_err(|e| Error::MalformedInput(format!("config: {e}")))?;
    let Value::Object(map) = config else {
        return Err(Error::MalformedInput("config must be a JSON object".into()));
    };
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let given = args.iter().any(|a| {
            let s = a.to_string_lossy();
            s == flag || s.starts_with(&format!("{flag}="))
        });
        if given {
            continue;
        }
        let rendered = match value {
            Value::Bool(true) => {
                args.push(flag.into());
                continue;
            }
            Value::Bool(false) | Value::Null => continue,
            Value::String(s) => s,
            Value::Number(n) => n.to_string(),
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            obj @ Value::Object(_) => obj.to_string(),
        };
        args.push(format!("{flag}={rendered}").into());
    }
    Ok(args)
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let seed = RngSeed(g.seed);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    log::info!("running with seed {} on {} worker threads", g.seed, pool.current_num_threads());
    let start = std::time::Instant::now();
    let out = pool.install(|| dispatch(&cli.command, seed))?;
    log::info!("{} finished in {:.2?}", out.command, start.elapsed());
    if let (Some(path), Some(csv)) = (&g.csv, &out.csv) {
        fs::write(path, csv)?;
        log::debug!("wrote csv to {}", path.display());
    } else if g.csv.is_some() {
        log::warn!("{} produces no csv output; --csv ignored", out.command);
    }
    let text = match out.raw {
        Some(raw) => raw,
        None => {
            let doc = json!({"schema": SCHEMA, "command": out.command, "seed": g.seed, "result": out.result});
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::MalformedInput(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    match &g.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Parses inline JSON, or reads JSON from the file at `arg`.
fn json_arg<T: DeserializeOwned>(what: &str, arg: &str) -> Result<T> {
    let trimmed = arg.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        arg.to_string()
    } else {
        fs::read_to_string(Path::new(arg))?
    };
    serde_json::from_str(&text).map_err(|e| Error::MalformedInput(format!("{what}: {e}")))
}

fn rule(k: Option<usize>) -> Result<PartitionRule> {
    match k {
        None => Ok(PartitionRule::LeaveOneOut),
        Some(k) if k < 2 => Err(Error::InvalidParameter(format!("--k must be at least 2, got {k}"))),
        Some(k) => Ok(PartitionRule::KFold { k }),
    }
}

fn load(args: &DataArgs) -> Result<(TrainingSet, PredictorSpec, PartitionRule)> {
    let format = args.format.unwrap_or_else(|| DataFormat::from_path(&args.data));
    let train = load_dataset(&args.data, format)?;
    let spec: PredictorSpec = json_arg("predictor", &args.predictor)?;
    spec.validate()?;
    Ok((train, spec, rule(args.k)?))
}

fn model(args: &ModelArgs) -> Result<(PredictorSpec, DgpSpec)> {
    let spec: PredictorSpec = json_arg("predictor", &args.predictor)?;
    let dgp: DgpSpec = json_arg("dgp", &args.dgp)?;
    spec.validate()?;
    dgp.validate()?;
    Ok((spec, dgp))
}

/// Repeats a single value `k` times; otherwise requires exactly `k` values.
fn per_fold(values: &[f64], k: usize) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; k]),
        len if len == k => Ok(values.to_vec()),
        len => Err(Error::LengthMismatch { left: k, right: len }),
    }
}

fn dispatch(command: &Command, seed: RngSeed) -> Result<Output> {
    match command {
        Command::Interval(a) => run_interval(a),
        Command::Risk(a) => run_risk(a),
        Command::Gauge(a) => {
            let f: StepCdf = json_arg("f", &a.f)?;
            let g: StepCdf = json_arg("g", &a.g)?;
            let r = gauge(&f, &g, a.delta)?;
            Output::json(
                "gauge",
                json!({"value": r.value, "witness_t": r.witness_t, "side": r.side, "delta": a.delta,
                       "kolmogorov": gauge_delta0_is_kolmogorov(&f, &g)}),
            )
        }
        Command::Stability(s) => run_stability(s, seed),
        Command::Sim(s) => run_sim(s, seed),
        Command::Dgp(a) => {
            let dgp: DgpSpec = json_arg("dgp", &a.dgp)?;
            let train = dgp.sample(a.n, seed)?;
            let raw = match a.format {
                DataFormat::Csv => train.to_csv_string(),
                DataFormat::Json => train.to_json_string() + "\n",
            };
            Ok(Output { command: "dgp", result: Value::Null, csv: None, raw: Some(raw) })
        }
    }
}

fn run_interval(a: &IntervalArgs) -> Result<Output> {
    let (train, spec, rule) = load(&a.data)?;
    let partition = rule.build(train.n())?;
    let want_fitted = a.method == IntervalBase::FittedValues;
    let bundle = leave_fold_out_residuals(&spec, &train, &partition, &a.xnew, want_fitted)?;
    let method = IntervalMethod::new(a.method, a.symmetrized);
    let (alpha1, alpha2, iv) = match a.shortest {
        Some(nominal) => {
            let s = shortest_interval(method, &bundle, nominal, a.delta)?;
            (s.alpha1, s.alpha2, s.interval)
        }
        None => {
            let (Some(a1), Some(a2)) = (a.alpha1, a.alpha2) else {
                return Err(Error::InvalidParameter("--alpha1 and --alpha2 are required without --shortest".into()));
            };
            (a1, a2, interval(method, &bundle, a1, a2, a.delta)?)
        }
    };
    let ceiling = if a.delta > 0.0 { Some(coverage_ceiling(&bundle, alpha1, alpha2, a.delta)?) } else { None };
    Output::json(
        "interval",
        json!({"lo": iv.lo, "hi": iv.hi, "length": iv.length(), "empty": iv.is_empty(), "alpha1": alpha1,
               "alpha2": alpha2, "delta": a.delta, "method": method, "k": partition.k(),
               "prediction": bundle.full_prediction, "coverage_ceiling": ceiling}),
    )
}

fn run_risk(a: &RiskArgs) -> Result<Output> {
    let (train, spec, rule) = load(&a.data)?;
    let partition = rule.build(train.n())?;
    let fits = FoldFits::new(&spec, &train, &partition)?;
    let residuals = fits.residuals();
    let loss: MonotoneFn = match &a.loss {
        Some(l) => json_arg("loss", l)?,
        None => MonotoneFn::SquaredHinge,
    };
    let (lo, hi) = loss_plugin_bounds(residuals, &loss, a.eps)?;
    let misclassification = match misclassification_estimate(residuals) {
        Ok(v) => Some(v),
        Err(Error::NonIntegerResiduals(_)) => None,
        Err(e) => return Err(e),
    };
    Output::json(
        "risk",
        json!({"mse": mse_estimate(residuals)?, "plugin_bounds": [lo, hi], "eps": a.eps, "loss": loss,
               "misclassification": misclassification, "n": train.n(), "k": partition.k()}),
    )
}

fn run_stability(command: &StabilityCommand, seed: RngSeed) -> Result<Output> {
    match command {
        StabilityCommand::Profile { model: m, k, eps_grid } => {
            let (spec, dgp) = model(m)?;
            let p = stability::oos_stability_profile(&spec, &dgp, m.n, rule(*k)?, eps_grid, m.reps, seed)?;
            #[derive(Serialize)]
            struct Row {
                eps: f64,
                exceed_prob: f64,
                std_err: f64,
            }
            let csv = simlab::to_csv(
                (0..p.eps_grid.len()).map(|i| Row { eps: p.eps_grid[i], exceed_prob: p.exceed_prob[i], std_err: p.std_err[i] }),
            )?;
            Ok(Output::json("stability profile", &p)?.with_csv(csv))
        }
        StabilityCommand::Mstab { model: m, m: extra } => {
            let (spec, dgp) = model(m)?;
            Output::json("stability mstab", stability::m_stability(&spec, &dgp, m.n, *extra, m.reps, seed)?)
        }
        StabilityCommand::Pacbound { k, delta, eps, l, tail, abs_error, stability: stab, truncated } => {
            let inputs = PacInputs {
                k: *k,
                delta: *delta,
                eps: *eps,
                l: *l,
                tail_prob: *tail,
                abs_error: *abs_error,
                abs_stability: per_fold(stab, *k)?,
                truncated_stability: truncated.as_deref().map(|t| per_fold(t, *k)).transpose()?,
            };
            let b = stability::pac_bound_cv(&inputs)?;
            Output::json("stability pacbound", json!({"bound_trunc": b.bound_trunc, "bound_abs": b.bound_abs, "inputs": inputs}))
        }
        StabilityCommand::Eqbound { k, eps, delta, probs } => {
            let bound = stability::equivalence_bound(*k, *eps, *delta, &per_fold(probs, *k)?)?;
            Output::json("stability eqbound", json!({"bound": bound, "vacuous": bound >= 1.0}))
        }
        StabilityCommand::VarGap { model: m } => {
            let (spec, dgp) = model(m)?;
            Output::json("stability var-gap", stability::variance_gap(&spec, &dgp, m.n, m.reps, seed)?)
        }
        StabilityCommand::Drift { model: m, inner } => {
            let (spec, dgp) = model(m)?;
            Output::json("stability drift", stability::update_drift(&spec, &dgp, m.n, m.reps, *inner, seed)?)
        }
    }
}

fn run_sim(command: &SimCommand, seed: RngSeed) -> Result<Output> {
    match command {
        SimCommand::Coverage { model: m, levels, k, method, symmetrized, delta, delta_iqr, mc_test } => {
            let (spec, dgp) = model(m)?;
            let d = match delta_iqr {
                Some(mult) => Distortion::ResidualIqr { iqr_multiple: *mult },
                None => Distortion::Fixed(*delta),
            };
            let q = CoverageQuery::new(IntervalMethod::new(*method, *symmetrized), levels.alpha1, levels.alpha2, d);
            let r = simlab::coverage_distribution(&spec, &dgp, m.n, rule(*k)?, q, m.reps, *mc_test, seed)?;
            let csv = simlab::coverage_csv(std::slice::from_ref(&r))?;
            Ok(Output::json("sim coverage", &r)?.with_csv(csv))
        }
        SimCommand::Equiv { model: m, levels, k, kappa, delta, eps, mc_test } => {
            let (spec, dgp) = model(m)?;
            let setup =
                EquivalenceSetup { alpha1: levels.alpha1, alpha2: levels.alpha2, kappa: *kappa, delta: *delta, eps: *eps };
            let r = simlab::jk_vs_jkplus_gap(&spec, &dgp, m.n, rule(*k)?, setup, m.reps, *mc_test, seed)?;
            let csv = simlab::equivalence_csv(&r)?;
            Ok(Output::json("sim equiv", &r)?.with_csv(csv))
        }
        SimCommand::Length { model: m, levels, k, first, second, symmetrized } => {
            let (spec, dgp) = model(m)?;
            let methods = (IntervalMethod::new(*first, *symmetrized), IntervalMethod::new(*second, *symmetrized));
            let r = simlab::length_compare(&spec, &dgp, m.n, rule(*k)?, methods, levels.alpha1, levels.alpha2, m.reps, seed)?;
            let csv = simlab::length_csv(&r)?;
            Ok(Output::json("sim length", &r)?.with_csv(csv))
        }
        SimCommand::Gauge { grid, deltas, mc_oracle } => {
            let (spec, dgp) = grid_model(grid)?;
            let pts =
                simlab::gauge_convergence(&spec, &dgp, &grid.n_grid, rule(grid.k)?, deltas, grid.reps, *mc_oracle, seed)?;
            let csv = simlab::grid_csv(&pts)?;
            Ok(Output::json("sim gauge", grid_summary(&pts))?.with_csv(csv))
        }
        SimCommand::Problen { grid, nominal } => {
            let (spec, dgp) = grid_model(grid)?;
            let pts = simlab::infinite_length_probe(&spec, &dgp, &grid.n_grid, rule(grid.k)?, *nominal, grid.reps, seed)?;
            let csv = simlab::grid_csv(&pts)?;
            Ok(Output::json("sim problen", grid_summary(&pts))?.with_csv(csv))
        }
    }
}

fn grid_model(grid: &GridArgs) -> Result<(PredictorSpec, DgpSpec)> {
    let spec: PredictorSpec = json_arg("predictor", &grid.predictor)?;
    let dgp: DgpSpec = json_arg("dgp", &grid.dgp)?;
    spec.validate()?;
    dgp.validate()?;
    Ok((spec, dgp))
}

fn grid_summary(points: &[simlab::GridPoint]) -> Value {
    Value::Array(
        points
            .iter()
            .map(|p| json!({"n": p.n, "delta": p.delta, "mean": p.mean, "std_err": p.std_err, "reps": p.per_rep.len()}))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_fills_missing_flags_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"eps": 0.5, "k": 10, "probs": [0.05], "delta": 0.2, "seed": 9}"#).unwrap();
        let args: Vec<OsString> =
            ["cvpi", "stability", "eqbound", "--eps", "0.25", "--config", path.to_str().unwrap()].map(Into::into).into();
        let merged: Vec<String> = merge_config(args).unwrap().into_iter().map(|a| a.into_string().unwrap()).collect();
        assert!(merged.contains(&"--k=10".to_string()));
        assert!(merged.contains(&"--probs=0.05".to_string()));
        assert!(!merged.iter().any(|a| a.starts_with("--eps=")));
        let cli = Cli::try_parse_from(merged).unwrap();
        assert_eq!(cli.global.seed, 9);
        match cli.command {
            Command::Stability(StabilityCommand::Eqbound { k, eps, .. }) => assert_eq!((k, eps), (10, 0.25)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn per_fold_expansion() {
        assert_eq!(per_fold(&[0.1], 3).unwrap(), vec![0.1; 3]);
        assert!(per_fold(&[0.1, 0.2], 3).is_err());
    }
}
