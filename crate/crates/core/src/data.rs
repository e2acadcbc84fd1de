//! Datasets, file ingestion, and the synthetic data-generating processes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// One labelled observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub y: f64,
    pub x: Vec<f64>,
}

/// An ordered set of samples with a common feature dimension.
///
/// Stored column-wise for the response and row-major for the features.
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    y: Vec<f64>,
    x: Vec<f64>,
    p: usize,
}

impl TrainingSet {
    pub fn new(samples: Vec<Sample>) -> Result<TrainingSet> {
        if samples.len() < 2 {
            return Err(Error::TooFewRows(samples.len()));
        }
        let p = samples[0].x.len();
        let mut y = Vec::with_capacity(samples.len());
        let mut x = Vec::with_capacity(samples.len() * p);
        for (i, s) in samples.into_iter().enumerate() {
            if s.x.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: s.x.len() });
            }
            if !s.y.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedInput(format!("non-finite value in row {}", i + 1)));
            }
            y.push(s.y);
            x.extend_from_slice(&s.x);
        }
        Ok(TrainingSet { y, x, p })
    }

    /// Builds a set from a response column and row-major features.
    pub fn from_columns(y: Vec<f64>, x: Vec<f64>, p: usize) -> Result<TrainingSet> {
        if y.len() < 2 {
            return Err(Error::TooFewRows(y.len()));
        }
        if x.len() != y.len() * p {
            return Err(Error::DimensionMismatch { expected: y.len() * p, got: x.len() });
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::MalformedInput("non-finite value".into()));
        }
        Ok(TrainingSet { y, x, p })
    }

    /// Draw buffers (test batches, single rows) may hold fewer than two rows.
    pub(crate) fn from_draws(y: Vec<f64>, x: Vec<f64>, p: usize) -> TrainingSet {
        debug_assert_eq!(x.len(), y.len() * p);
        TrainingSet { y, x, p }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample { y: self.y[i], x: self.row(i).to_vec() }
    }

    pub fn samples(&self) -> Vec<Sample> {
        (0..self.n()).map(|i| self.sample(i)).collect()
    }

    /// The first `count` rows as a new set.
    pub fn prefix(&self, count: usize) -> TrainingSet {
        TrainingSet::from_draws(self.y[..count].to_vec(), self.x[..count * self.p].to_vec(), self.p)
    }

    /// Rows reordered by `perm` (row `i` of the result is row `perm[i]` here).
    pub fn permuted(&self, perm: &[usize]) -> TrainingSet {
        let y = perm.iter().map(|&i| self.y[i]).collect();
        let x = perm.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        TrainingSet::from_draws(y, x, self.p)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("y");
        for j in 1..=self.p {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for i in 0..self.n() {
            let _ = write!(out, "{}", self.y[i]);
            for v in self.row(i) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.samples()).expect("samples serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => DataFormat::Json,
            _ => DataFormat::Csv,
        }
    }
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<TrainingSet> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, format)
}

pub fn parse_dataset(text: &str, format: DataFormat) -> Result<TrainingSet> {
    match format {
        DataFormat::Csv => parse_csv(text),
        DataFormat::Json => parse_json(text),
    }
}

fn parse_csv(text: &str) -> Result<TrainingSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::MalformedInput(e.to_string()))?.clone();
    if header.is_empty() || &header[0] != "y" {
        return Err(Error::MalformedInput("header must start with \"y\"".into()));
    }
    for (j, name) in header.iter().enumerate().skip(1) {
        if name != format!("x{j}") {
            return Err(Error::MalformedInput(format!("expected column x{j}, found {name:?}")));
        }
    }
    let p = header.len() - 1;
    let mut y = Vec::new();
    let mut x = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::MalformedInput(e.to_string()))?;
        if record.len() != p + 1 {
            return Err(Error::MalformedInput(format!(
                "row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                p + 1
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::MalformedInput(format!("row {}: cannot parse {field:?}", line + 1)))?;
            if !v.is_finite() {
                return Err(Error::MalformedInput(format!("row {}: non-finite value", line + 1)));
            }
            if j == 0 {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    TrainingSet::from_columns(y, x, p)
}

fn parse_json(text: &str) -> Result<TrainingSet> {
    let samples: Vec<Sample> = serde_json::from_str(text).map_err(|e| Error::MalformedInput(e.to_string()))?;
    TrainingSet::new(samples)
}

/// Standard normal cdf.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Class label for the classification DGP: `1 + (floor(K * Phi(x1)) mod K)`.
pub fn classification_label(x1: f64, class_count: usize) -> f64 {
    let k = class_count as f64;
    let bucket = (k * std_normal_cdf(x1)).floor() as usize % class_count;
    (1 + bucket) as f64
}

/// Data-generating processes.
///
/// Each process is a triangular array indexed by the nominal sample size
/// `n`; most ignore the index, the ones built for the necessity experiments
/// use it to scale the response or place the first feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpSpec {
    /// `y = beta'x + sigma * n^power * u`, `x ~ N(0, I_p)`, `u ~ N(0, 1)`.
    GaussianLinear {
        beta: Vec<f64>,
        sigma: f64,
        #[serde(default)]
        noise_scale_power: f64,
        #[serde(default)]
        norm_bound: Option<f64>,
    },
    /// `x ~ N(0, I_p)`, `y = 1 + (floor(K * Phi(x1)) mod K)`.
    ClassificationGrid { p: usize, class_count: usize },
    /// Uniform resampling of a fixed table of rows.
    CustomTable { rows: Vec<Sample> },
    /// `y = height * sqrt(n)` with probability `rate / n`, else 0; `x ~ N(0, I_p)`.
    RareSpike { p: usize, rate: f64, height: f64 },
    /// First feature fixed at `n`, remaining features `N(0, 1)`, `y ~ N(0, y_sigma^2)`.
    DiracFirst { p: usize, y_sigma: f64 },
}

impl DgpSpec {
    pub fn gaussian_linear(beta: Vec<f64>, sigma: f64) -> DgpSpec {
        DgpSpec::GaussianLinear { beta, sigma, noise_scale_power: 0.0, norm_bound: None }
    }

    pub fn p(&self) -> usize {
        match self {
            DgpSpec::GaussianLinear { beta, .. } => beta.len(),
            DgpSpec::ClassificationGrid { p, .. } | DgpSpec::RareSpike { p, .. } | DgpSpec::DiracFirst { p, .. } => *p,
            DgpSpec::CustomTable { rows } => rows.first().map_or(0, |r| r.x.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            DgpSpec::GaussianLinear { beta, sigma, noise_scale_power, norm_bound } => {
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return bad("gaussian_linear requires sigma > 0");
                }
                if !noise_scale_power.is_finite() || beta.iter().any(|b| !b.is_finite()) {
                    return bad("gaussian_linear parameters must be finite");
                }
                if let Some(m) = norm_bound {
                    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
                    if norm > *m {
                        return bad("||beta|| exceeds the declared bound");
                    }
                }
                Ok(())
            }
            DgpSpec::ClassificationGrid { p, class_count } => {
                if *class_count < 2 {
                    return bad("classification requires at least 2 classes");
                }
                if *p < 1 {
                    return bad("classification requires p >= 1");
                }
                Ok(())
            }
            DgpSpec::CustomTable { rows } => {
                if rows.is_empty() {
                    return bad("custom_table needs at least one row");
                }
                let p = rows[0].x.len();
                if let Some(bad_row) = rows.iter().find(|r| r.x.len() != p) {
                    return Err(Error::DimensionMismatch { expected: p, got: bad_row.x.len() });
                }
                Ok(())
            }
            DgpSpec::RareSpike { rate, height, .. } => {
                if !(*rate > 0.0) || !height.is_finite() {
                    return bad("rare_spike requires rate > 0 and finite height");
                }
                Ok(())
            }
            DgpSpec::DiracFirst { p, y_sigma } => {
                if *p < 1 || !(*y_sigma >= 0.0) {
                    return bad("dirac_first requires p >= 1 and y_sigma >= 0");
                }
                Ok(())
            }
        }
    }

    /// Draws `count` i.i.d. rows from the law indexed by `n`.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, count: usize, rng: &mut R) -> TrainingSet {
        let p = self.p();
        let mut y = Vec::with_capacity(count);
        let mut x = Vec::with_capacity(count * p);
        for _ in 0..count {
            let start = x.len();
            match self {
                DgpSpec::GaussianLinear { beta, sigma, noise_scale_power, .. } => {
                    let mut signal = 0.0;
                    for b in beta {
                        let v: f64 = StandardNormal.sample(rng);
                        signal += b * v;
                        x.push(v);
                    }
                    let u: f64 = StandardNormal.sample(rng);
                    y.push(signal + sigma * (n as f64).powf(*noise_scale_power) * u);
                }
                DgpSpec::ClassificationGrid { p, class_count } => {
                    for _ in 0..*p {
                        x.push(StandardNormal.sample(rng));
                    }
                    y.push(classification_label(x[start], *class_count));
                }
                DgpSpec::CustomTable { rows } => {
                    let r = &rows[rng.random_range(0..rows.len())];
                    x.extend_from_slice(&r.x);
                    y.push(r.y);
                }
                DgpSpec::RareSpike { p, rate, height } => {
                    for _ in 0..*p {
                        x.push(StandardNormal.sample(rng));
                    }
                    let hit = rng.random::<f64>() < rate / n as f64;
                    y.push(if hit { height * (n as f64).sqrt() } else { 0.0 });
                }
                DgpSpec::DiracFirst { p, y_sigma } => {
                    x.push(n as f64);
                    for _ in 1..*p {
                        x.push(StandardNormal.sample(rng));
                    }
                    let u: f64 = StandardNormal.sample(rng);
                    y.push(y_sigma * u);
                }
            }
        }
        TrainingSet::from_draws(y, x, p)
    }

    /// Draws a training set of `n` rows from the law indexed by `n`.
    pub fn sample(&self, n: usize, seed: RngSeed) -> Result<TrainingSet> {
        self.validate()?;
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        Ok(self.draw(n, n, &mut seed.rng()))
    }
}

pub fn sample_gaussian_linear(n: usize, p: usize, beta: &[f64], sigma: f64, seed: RngSeed) -> Result<TrainingSet> {
    if beta.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: beta.len() });
    }
    DgpSpec::gaussian_linear(beta.to_vec(), sigma).sample(n, seed)
}

pub fn sample_classification(n: usize, p: usize, class_count: usize, seed: RngSeed) -> Result<TrainingSet> {
    DgpSpec::ClassificationGrid { p, class_count }.sample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_parses_minimal_file() {
        let t = parse_dataset("y,x1\n1.0,2.0\n3.0,4.0", DataFormat::Csv).unwrap();
        assert_eq!((t.n(), t.p()), (2, 1));
        assert_eq!(t.y(), &[1.0, 3.0]);
        assert_eq!(t.row(1), &[4.0]);
    }

    #[test]
    fn empty_json_is_too_few_rows() {
        assert_eq!(parse_dataset("[]", DataFormat::Json), Err(Error::TooFewRows(0)));
    }

    #[test]
    fn nan_is_rejected() {
        let r = parse_dataset("y,x1\n1.0,NaN\n2.0,3.0", DataFormat::Csv);
        assert!(matches!(r, Err(Error::MalformedInput(_))));
        let r = parse_dataset("y,x1\n1.0,inf\n2.0,3.0", DataFormat::Csv);
        assert!(matches!(r, Err(Error::MalformedInput(_))));
    }

    #[test]
    fn bad_header_and_ragged_rows() {
        assert!(matches!(parse_dataset("z,x1\n1,2\n3,4", DataFormat::Csv), Err(Error::MalformedInput(_))));
        assert!(matches!(parse_dataset("y,x2\n1,2\n3,4", DataFormat::Csv), Err(Error::MalformedInput(_))));
        assert!(matches!(parse_dataset("y,x1\n1,2\n3", DataFormat::Csv), Err(Error::MalformedInput(_))));
    }

    #[test]
    fn json_ragged_is_dimension_mismatch() {
        let r = parse_dataset(r#"[{"y":1,"x":[1]},{"y":2,"x":[1,2]}]"#, DataFormat::Json);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let t = sample_gaussian_linear(50, 3, &[1.0, -0.5, 0.25], 1.3, RngSeed(9)).unwrap();
        let back = parse_dataset(&t.to_csv_string(), DataFormat::Csv).unwrap();
        assert_eq!(t, back);
        let back = parse_dataset(&t.to_json_string(), DataFormat::Json).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn zero_signal_vanishing_noise() {
        let t = sample_gaussian_linear(2, 1, &[0.0], 1e-12, RngSeed(1)).unwrap();
        assert!(t.y().iter().all(|y| y.abs() < 1e-9));
    }

    #[test]
    fn gaussian_linear_mean_is_near_zero_across_seeds() {
        for s in 0..10 {
            let t = sample_gaussian_linear(1000, 3, &[1.0, 0.0, 0.0], 1.0, RngSeed(s)).unwrap();
            let mean = t.y().iter().sum::<f64>() / 1000.0;
            assert!(mean.abs() < 0.15, "seed {s}: mean {mean}");
        }
    }

    #[test]
    fn gaussian_linear_variance() {
        let beta = [1.0, 0.5];
        let t = sample_gaussian_linear(100_000, 2, &beta, 0.8, RngSeed(5)).unwrap();
        let n = t.n() as f64;
        let mean = t.y().iter().sum::<f64>() / n;
        let var = t.y().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 0.64 + 1.25;
        assert!((var - target).abs() < 0.05 * target, "var {var}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_gaussian_linear(20, 2, &[1.0, 2.0], 1.0, RngSeed(3)).unwrap();
        let b = sample_gaussian_linear(20, 2, &[1.0, 2.0], 1.0, RngSeed(3)).unwrap();
        assert_eq!(a, b);
        let a = sample_classification(20, 2, 3, RngSeed(3)).unwrap();
        let b = sample_classification(20, 2, 3, RngSeed(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn beta_length_must_match() {
        let r = sample_gaussian_linear(10, 2, &[1.0], 1.0, RngSeed(0));
        assert_eq!(r, Err(Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn classification_codomain_and_coverage() {
        let t = sample_classification(10, 2, 2, RngSeed(2)).unwrap();
        assert!(t.y().iter().all(|&y| y == 1.0 || y == 2.0));
        let t = sample_classification(500, 2, 3, RngSeed(4)).unwrap();
        for k in 1..=3 {
            assert!(t.y().iter().any(|&y| y == k as f64), "class {k} missing");
        }
        assert!(matches!(sample_classification(10, 2, 1, RngSeed(0)), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn classification_label_rule() {
        // Phi(0) = 1/2 so floor(2 * 1/2) mod 2 = 1 -> class 2
        assert_eq!(classification_label(0.0, 2), 2.0);
        assert_eq!(classification_label(-0.1, 2), 1.0);
        assert_eq!(classification_label(40.0, 3), 1.0);
    }

    #[test]
    fn sigma_must_be_positive() {
        let d = DgpSpec::gaussian_linear(vec![1.0], 0.0);
        assert!(matches!(d.sample(10, RngSeed(0)), Err(Error::InvalidParameter(_))));
        let d = DgpSpec::GaussianLinear { beta: vec![3.0, 4.0], sigma: 1.0, noise_scale_power: 0.0, norm_bound: Some(4.0) };
        assert!(matches!(d.validate(), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn dirac_first_places_index() {
        let d = DgpSpec::DiracFirst { p: 2, y_sigma: 1.0 };
        let t = d.sample(7, RngSeed(1)).unwrap();
        assert!((0..7).all(|i| t.row(i)[0] == 7.0));
    }

    #[test]
    fn dgp_spec_json_shape() {
        let d: DgpSpec = serde_json::from_str(r#"{"kind":"gaussian_linear","beta":[1,0],"sigma":1}"#).unwrap();
        assert_eq!(d, DgpSpec::gaussian_linear(vec![1.0, 0.0], 1.0));
    }
}
