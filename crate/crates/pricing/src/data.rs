//! Core transaction-data types: samples, datasets, logging-price
//! (propensity) models, linear pricing policies, and CSV I/O.
//!
//! A sample records one posted-price interaction: the buyer context
//! `features`, the offered `price`, the binary outcome `sold`, and the
//! logging density `propensity` of the offered price. Off-policy learners
//! reweight samples by inverse propensity, so propensities must be strictly
//! positive wherever prices are logged.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::numeric::{self, adaptive_simpson, normal_quantile};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("feature dimension mismatch at sample {index}: expected {expected}, got {got}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("io error for {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("propensity column expected but not present in {path}")]
    MissingPropensityColumn { path: String },
    #[error("invalid propensity model: {0}")]
    BadPropensityModel(String),
    #[error("cannot fit log-normal model: {0}")]
    LogNormalFit(String),
}

// ── Samples and datasets ─────────────────────────────────────────────────

/// One logged posted-price transaction.
///
/// `sold` is stored as a float so that foreign data with out-of-range
/// indicators can be loaded into memory and rejected by [`Dataset::validate`]
/// with a precise report instead of failing at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub price: f64,
    /// Sale indicator; valid values are exactly 0.0 and 1.0.
    pub sold: f64,
    /// Logging density of `price`; `None` until filled from a model or file.
    pub propensity: Option<f64>,
}

/// An immutable collection of samples with a common feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_dim: usize,
}

/// A single validation finding, tied to the offending sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub message: String,
}

impl Dataset {
    /// Builds a dataset, enforcing only the structural invariant (all
    /// samples share `feature_dim`). Value-level problems are reported by
    /// [`Dataset::validate`].
    pub fn new(samples: Vec<Sample>, feature_dim: usize) -> Result<Self, DataError> {
        for (index, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(DataError::DimensionMismatch {
                    index,
                    expected: feature_dim,
                    got: s.features.len(),
                });
            }
        }
        Ok(Dataset { samples, feature_dim })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Scans every sample for value-level problems: non-finite or
    /// non-positive prices, non-binary sale indicators, missing or
    /// non-positive propensities (overlap violations), and non-finite
    /// features. Returns an empty vector when the data is clean.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (index, s) in self.samples.iter().enumerate() {
            if s.features.iter().any(|v| !v.is_finite()) {
                out.push(Violation { index, message: "non-finite feature value".into() });
            }
            if !s.price.is_finite() || s.price <= 0.0 {
                out.push(Violation { index, message: format!("price must be positive, got {}", s.price) });
            }
            if s.sold != 0.0 && s.sold != 1.0 {
                out.push(Violation { index, message: format!("sale indicator not binary, got {}", s.sold) });
            }
            match s.propensity {
                None => out.push(Violation { index, message: "propensity missing (overlap violated)".into() }),
                Some(p) if !(p.is_finite() && p > 0.0) => {
                    out.push(Violation { index, message: format!("propensity must be positive, got {p} (overlap violated)") })
                }
                _ => {}
            }
        }
        out
    }

    /// Returns a copy with every propensity set to `model.density(price)`.
    pub fn with_propensities(&self, model: &PropensityModel) -> Dataset {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample { propensity: Some(model.density(s.price)), ..s.clone() })
            .collect();
        Dataset { samples, feature_dim: self.feature_dim }
    }

    /// Deterministic stride subsample of about `cap` samples, preserving
    /// order. Returns a clone when the dataset is already small enough.
    pub fn stride_subsample(&self, cap: usize) -> Dataset {
        if cap == 0 || self.samples.len() <= cap {
            return self.clone();
        }
        let n = self.samples.len();
        let samples = (0..cap).map(|i| self.samples[i * n / cap].clone()).collect();
        Dataset { samples, feature_dim: self.feature_dim }
    }

    pub fn mean_price(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.price).sum::<f64>() / self.samples.len() as f64
    }
}

// ── Linear pricing policies ──────────────────────────────────────────────

/// Linear pricing policy `price(x) = <theta, x> (+ intercept)`.
///
/// Feature vectors carry no implicit intercept; callers that want one append
/// a constant-1 feature or set `intercept` explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicy {
    pub theta: Vec<f64>,
    pub intercept: Option<f64>,
}

impl LinearPolicy {
    pub fn new(theta: Vec<f64>) -> Self {
        LinearPolicy { theta, intercept: None }
    }

    pub fn with_intercept(theta: Vec<f64>, intercept: f64) -> Self {
        LinearPolicy { theta, intercept: Some(intercept) }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn price(&self, features: &[f64]) -> f64 {
        debug_assert_eq!(features.len(), self.theta.len());
        let mut p = self.intercept.unwrap_or(0.0);
        for (t, x) in self.theta.iter().zip(features) {
            p += t * x;
        }
        p
    }
}

// ── Propensity (logging price) models ────────────────────────────────────

/// Parametric model of the logging price distribution. `density` supplies
/// inverse-propensity weights; `sample` draws prices by inverse-CDF
/// transform so one uniform draw maps to one price.
#[derive(Debug, Clone, PartialEq)]
pub enum PropensityModel {
    Uniform { a: f64, b: f64 },
    Triangular { low: f64, mode: f64, high: f64 },
    /// Density `exp(-(p-location)/scale)/scale` for `p >= location`.
    Exponential { scale: f64, location: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl PropensityModel {
    pub fn uniform(a: f64, b: f64) -> Result<Self, DataError> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(DataError::BadPropensityModel(format!("uniform needs a < b, got [{a}, {b}]")));
        }
        Ok(PropensityModel::Uniform { a, b })
    }

    pub fn triangular(low: f64, mode: f64, high: f64) -> Result<Self, DataError> {
        if !(low.is_finite() && high.is_finite() && mode.is_finite() && low <= mode && mode <= high && low < high) {
            return Err(DataError::BadPropensityModel(format!(
                "triangular needs low <= mode <= high with low < high, got ({low}, {mode}, {high})"
            )));
        }
        Ok(PropensityModel::Triangular { low, mode, high })
    }

    pub fn exponential(scale: f64, location: f64) -> Result<Self, DataError> {
        if !(scale.is_finite() && scale > 0.0 && location.is_finite()) {
            return Err(DataError::BadPropensityModel(format!(
                "exponential needs scale > 0, got scale={scale}, location={location}"
            )));
        }
        Ok(PropensityModel::Exponential { scale, location })
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self, DataError> {
        if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(DataError::BadPropensityModel(format!(
                "log-normal needs sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(PropensityModel::LogNormal { mu, sigma })
    }

    pub fn density(&self, p: f64) -> f64 {
        match *self {
            PropensityModel::Uniform { a, b } => {
                if p >= a && p <= b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            PropensityModel::Triangular { low, mode, high } => {
                if p < low || p > high {
                    0.0
                } else if p < mode {
                    2.0 * (p - low) / ((high - low) * (mode - low))
                } else if p > mode {
                    2.0 * (high - p) / ((high - low) * (high - mode))
                } else {
                    // Density is continuous at the mode; both one-sided
                    // formulas give 2/(high-low) when the mode is interior.
                    2.0 / (high - low)
                }
            }
            PropensityModel::Exponential { scale, location } => {
                if p < location {
                    0.0
                } else {
                    (-(p - location) / scale).exp() / scale
                }
            }
            PropensityModel::LogNormal { mu, sigma } => {
                if p <= 0.0 {
                    0.0
                } else {
                    let z = (p.ln() - mu) / sigma;
                    (-0.5 * z * z).exp() / (p * sigma * numeric::SQRT_2PI)
                }
            }
        }
    }

    pub fn cdf(&self, p: f64) -> f64 {
        match *self {
            PropensityModel::Uniform { a, b } => ((p - a) / (b - a)).clamp(0.0, 1.0),
            PropensityModel::Triangular { low, mode, high } => {
                if p <= low {
                    0.0
                } else if p >= high {
                    1.0
                } else if p <= mode {
                    (p - low) * (p - low) / ((high - low) * (mode - low))
                } else {
                    1.0 - (high - p) * (high - p) / ((high - low) * (high - mode))
                }
            }
            PropensityModel::Exponential { scale, location } => {
                if p <= location {
                    0.0
                } else {
                    1.0 - (-(p - location) / scale).exp()
                }
            }
            PropensityModel::LogNormal { mu, sigma } => {
                if p <= 0.0 {
                    0.0
                } else {
                    numeric::normal_cdf((p.ln() - mu) / sigma)
                }
            }
        }
    }

    /// Inverse-CDF transform of a uniform draw `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&u));
        match *self {
            PropensityModel::Uniform { a, b } => a + u * (b - a),
            PropensityModel::Triangular { low, mode, high } => {
                let split = (mode - low) / (high - low);
                if u < split {
                    low + (u * (high - low) * (mode - low)).sqrt()
                } else {
                    high - ((1.0 - u) * (high - low) * (high - mode)).sqrt()
                }
            }
            PropensityModel::Exponential { scale, location } => location - scale * (1.0 - u).ln(),
            PropensityModel::LogNormal { mu, sigma } => {
                let u = u.clamp(1e-300, 1.0 - 1e-16);
                (mu + sigma * normal_quantile(u)).exp()
            }
        }
    }

    /// Draws one price, consuming exactly one uniform variate from `rng`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PropensityModel::Uniform { a, b } => 0.5 * (a + b),
            PropensityModel::Triangular { low, mode, high } => (low + mode + high) / 3.0,
            PropensityModel::Exponential { scale, location } => location + scale,
            PropensityModel::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// Numerically integrates the density over its effective support.
    /// Exponential-family tails beyond the truncation point are added in
    /// closed form; the result should be 1 up to quadrature error.
    pub fn density_mass(&self) -> f64 {
        match *self {
            PropensityModel::Uniform { a, b } => adaptive_simpson(|p| self.density(p), a, b, 1e-10, 10_000),
            PropensityModel::Triangular { low, mode, high } => {
                // Integrate each smooth piece separately: the density has a
                // kink at the mode.
                adaptive_simpson(|p| self.density(p), low, mode.max(low + 0.0), 1e-10, 10_000)
                    + adaptive_simpson(|p| self.density(p), mode, high, 1e-10, 10_000)
            }
            PropensityModel::Exponential { scale, location } => {
                // Truncate where the density falls below 1e-14 and add the
                // exact tail mass.
                let cut = location + scale * (1e14f64 * scale.max(1.0)).ln();
                adaptive_simpson(|p| self.density(p), location, cut, 1e-10, 10_000)
                    + (-(cut - location) / scale).exp()
            }
            PropensityModel::LogNormal { mu, sigma } => {
                // The support spans many orders of magnitude, so a single
                // quadrature call can probe past the density peak and see
                // only zeros. Integrate segment by segment on a ladder of
                // log-quantile breakpoints instead.
                let ladder = [-9.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 9.0];
                let mass: f64 = ladder
                    .windows(2)
                    .map(|w| {
                        let lo = (mu + w[0] * sigma).exp();
                        let hi = (mu + w[1] * sigma).exp();
                        adaptive_simpson(|p| self.density(p), lo, hi, 1e-11, 10_000)
                    })
                    .sum();
                mass + 1.0 - numeric::normal_cdf(9.0) + numeric::normal_cdf(-9.0)
            }
        }
    }
}

/// Fits a log-normal propensity model by matching moments of log-prices
/// (mean and population standard deviation).
pub fn fit_lognormal(prices: &[f64]) -> Result<PropensityModel, DataError> {
    if prices.len() < 2 {
        return Err(DataError::LogNormalFit(format!(
            "need at least 2 prices, got {}",
            prices.len()
        )));
    }
    if let Some(bad) = prices.iter().find(|&&p| !(p.is_finite() && p > 0.0)) {
        return Err(DataError::LogNormalFit(format!("nonpositive price {bad}")));
    }
    let logs: Vec<f64> = prices.iter().map(|p| p.ln()).collect();
    let (mu, sigma) = numeric::mean_and_pop_sd(&logs);
    if sigma <= 1e-12 {
        return Err(DataError::LogNormalFit("degenerate price history (all prices equal)".into()));
    }
    PropensityModel::log_normal(mu, sigma)
}

// ── CSV I/O ──────────────────────────────────────────────────────────────
//
// Schema: header `x0,...,x{m-1},price,sold[,propensity]`, one numeric row
// per sample. Floats are written with 17 significant digits so
// save -> load round-trips bit for bit. Lines starting with `#` are
// skipped.

/// Formats a float with 17 significant digits (exact f64 round trip).
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse { path: path.display().to_string(), line, message: message.into() }
}

/// Loads a dataset from CSV. Feature dimension is inferred from the header.
/// When `expect_propensity` is set, a missing propensity column is an error;
/// otherwise propensities are read if present and left unset if not.
pub fn load_csv(path: &Path, expect_propensity: bool) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (header_no, header) = loop {
        match lines.next() {
            Some((i, line)) => {
                let line = line.map_err(|e| io_err(path, e))?;
                if line.trim().is_empty() || line.trim_start().starts_with('#') {
                    continue;
                }
                break (i + 1, line);
            }
            None => return Err(parse_err(path, 1, "missing header")),
        }
    };

    let cols: Vec<&str> = header.trim().split(',').map(|c| c.trim()).collect();
    let has_propensity = cols.last() == Some(&"propensity");
    if expect_propensity && !has_propensity {
        return Err(DataError::MissingPropensityColumn { path: path.display().to_string() });
    }
    let non_feature = if has_propensity { 3 } else { 2 };
    if cols.len() < non_feature + 1 {
        return Err(parse_err(path, header_no, format!("header has too few columns: {header}")));
    }
    let feature_dim = cols.len() - non_feature;
    for (j, col) in cols.iter().take(feature_dim).enumerate() {
        if *col != format!("x{j}") {
            return Err(parse_err(path, header_no, format!("expected feature column x{j}, got {col}")));
        }
    }
    if cols[feature_dim] != "price" || cols[feature_dim + 1] != "sold" {
        return Err(parse_err(path, header_no, "expected columns price,sold after features"));
    }

    let mut samples = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(|f| f.trim()).collect();
        if fields.len() != cols.len() {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {} fields, got {}", cols.len(), fields.len()),
            ));
        }
        let mut nums = Vec::with_capacity(fields.len());
        for (j, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("column {} is not a number: {f:?}", cols[j])))?;
            nums.push(v);
        }
        let features = nums[..feature_dim].to_vec();
        let price = nums[feature_dim];
        let sold = nums[feature_dim + 1];
        if sold != 0.0 && sold != 1.0 {
            return Err(parse_err(path, line_no, format!("sold must be 0 or 1, got {}", fields[feature_dim + 1])));
        }
        let propensity = if has_propensity { Some(nums[feature_dim + 2]) } else { None };
        samples.push(Sample { features, price, sold, propensity });
    }
    Dataset::new(samples, feature_dim)
}

/// Writes a dataset as CSV with the schema accepted by [`load_csv`].
/// The propensity column is emitted only when every sample carries one.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<(), DataError> {
    let with_prop = dataset.samples().iter().all(|s| s.propensity.is_some());
    let mut out = String::new();
    for j in 0..dataset.feature_dim() {
        let _ = write!(out, "x{j},");
    }
    out.push_str("price,sold");
    if with_prop {
        out.push_str(",propensity");
    }
    out.push('\n');
    for s in dataset.samples() {
        for x in &s.features {
            let _ = write!(out, "{},", format_f64(*x));
        }
        let _ = write!(out, "{},{}", format_f64(s.price), s.sold as i64);
        if with_prop {
            let _ = write!(out, ",{}", format_f64(s.propensity.unwrap()));
        }
        out.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| io_err(path, e))
}
