//! Benchmark policy learners and demand-model cross-validation.
//!
//! Two demand estimators (logistic regression and a product-Gaussian
//! kernel smoother) feed the direct method, which prices by maximizing
//! estimated revenue. Alongside it live the kernel inverse-propensity
//! learner, the model-free reward maximizer, and the epsilon-insensitive
//! regression learner. [`cross_validate`] picks a loss parameter from a
//! grid by the estimated revenue of each fitted policy under a shared
//! demand model, breaking exact ties toward the distribution-robust
//! default parameter.

use thiserror::Error;

use crate::data::{DataError, Dataset, LinearPolicy};
use crate::losses::{empirical_risk, EpsCoef, LossError, LossSpec};
use crate::numeric::chunked_sum;
use crate::solver::{fit_convex, fit_nonconvex, FitResult, SolverConfig, SolverError};

// ── Errors ───────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

// ── Demand models ────────────────────────────────────────────────────────

/// Logistic purchase-probability model over `[x; p; 1]`.
#[derive(Debug, Clone)]
pub struct LogisticDemand {
    /// Feature weights, then the price weight, then the bias.
    pub weights: Vec<f64>,
    /// Set when any weight escaped past 10^3 during fitting, the
    /// signature of (near-)perfectly separated labels.
    pub separation_warning: bool,
    pub iterations: u64,
}

/// Nadaraya-Watson smoother of sale indicators over `[x; p]` with a
/// product Gaussian kernel.
#[derive(Debug, Clone)]
pub struct KernelDemand {
    bandwidths: Vec<f64>,
    // training points stored flat, stride = feature_dim + 1, price last
    points: Vec<f64>,
    sales: Vec<f64>,
    dim: usize,
    mean_sale: f64,
}

#[derive(Debug, Clone)]
pub enum DemandModel {
    Logistic(LogisticDemand),
    Kernel(KernelDemand),
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// log(1 + e^z) without overflow
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticDemand {
    fn score(&self, x: &[f64], price: f64) -> f64 {
        let m = self.weights.len();
        debug_assert_eq!(x.len() + 2, m);
        let mut z = self.weights[m - 1] + self.weights[m - 2] * price;
        for (w, v) in self.weights.iter().zip(x) {
            z += w * v;
        }
        z
    }

    pub fn predict(&self, x: &[f64], price: f64) -> f64 {
        sigmoid(self.score(x, price)).clamp(0.0, 1.0)
    }
}

impl KernelDemand {
    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn predict(&self, x: &[f64], price: f64) -> f64 {
        let d = self.dim;
        debug_assert_eq!(x.len() + 1, d);
        let n = self.sales.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let row = &self.points[i * d..(i + 1) * d];
            let mut q = 0.0;
            for j in 0..d - 1 {
                let t = (x[j] - row[j]) / self.bandwidths[j];
                q += t * t;
            }
            let t = (price - row[d - 1]) / self.bandwidths[d - 1];
            q += t * t;
            let w = (-0.5 * q).exp();
            num += w * self.sales[i];
            den += w;
        }
        if den < 1e-300 {
            // query too far from every training point
            return self.mean_sale.clamp(0.0, 1.0);
        }
        (num / den).clamp(0.0, 1.0)
    }
}

impl DemandModel {
    /// Estimated purchase probability at context `x` and price `p`.
    pub fn predict(&self, x: &[f64], price: f64) -> f64 {
        match self {
            DemandModel::Logistic(m) => m.predict(x, price),
            DemandModel::Kernel(m) => m.predict(x, price),
        }
    }
}

/// Maximum-likelihood logistic demand via gradient ascent with a
/// doubling/backtracking line search. Stops when the gradient infinity
/// norm of the mean log-likelihood drops below 1e-8, an iterate weight
/// escapes past 10^3 (separation), or 10^4 iterations pass.
pub fn fit_logistic_demand(data: &Dataset) -> Result<DemandModel, PolicyError> {
    if data.is_empty() {
        return Err(PolicyError::Invalid("empty dataset".into()));
    }
    if let Some(v) = data.validate().first() {
        return Err(PolicyError::Invalid(format!("sample {}: {}", v.index, v.message)));
    }
    let n = data.len();
    let dim = data.feature_dim();
    let m = dim + 2;
    let samples = data.samples();
    let score = |w: &[f64], i: usize| -> f64 {
        let s = &samples[i];
        let mut z = w[m - 1] + w[m - 2] * s.price;
        for (wj, v) in w.iter().zip(&s.features) {
            z += wj * v;
        }
        z
    };
    // mean Bernoulli log-likelihood: y z - log(1 + e^z)
    let loglik = |w: &[f64]| -> f64 {
        chunked_sum(n, |i| {
            let z = score(w, i);
            samples[i].sold * z - softplus(z)
        }) / n as f64
    };

    let mut w: Vec<f64> = vec![0.0; m];
    let mut resid = vec![0.0; n];
    let mut grad = vec![0.0; m];
    let mut step: f64 = 1.0;
    let mut separation = false;
    let mut iterations = 0;
    'ascent: for iter in 0..10_000u64 {
        iterations = iter;
        let ll = loglik(&w);
        for i in 0..n {
            resid[i] = samples[i].sold - sigmoid(score(&w, i));
        }
        for j in 0..m {
            grad[j] = chunked_sum(n, |i| {
                let s = &samples[i];
                let f = if j < dim {
                    s.features[j]
                } else if j == dim {
                    s.price
                } else {
                    1.0
                };
                f * resid[i]
            }) / n as f64;
        }
        let ginf = grad.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
        if ginf < 1e-8 {
            break;
        }
        // Ray search along the gradient: backtrack to an improving step,
        // then ride the improvement by doubling. On separated labels the
        // likelihood increases along the ray forever, so the doubling
        // only stops once a weight escapes past 10^3.
        let candidate = |t: f64| -> Vec<f64> {
            w.iter().zip(&grad).map(|(wj, g)| wj + t * g).collect()
        };
        let mut lt = loglik(&candidate(step));
        while lt <= ll {
            step *= 0.5;
            if step < 1e-18 {
                break 'ascent;
            }
            lt = loglik(&candidate(step));
        }
        loop {
            let wide = candidate(2.0 * step);
            let lw = loglik(&wide);
            // ride exact ties: the ray likelihood is concave, and on
            // separated labels it saturates to an exact 0.0 plateau long
            // before any weight reaches the escape bar
            if lw < lt {
                break;
            }
            step *= 2.0;
            lt = lw;
            if wide.iter().any(|v| v.abs() > 1e3) {
                w = wide;
                separation = true;
                break 'ascent;
            }
        }
        w = candidate(step);
    }
    if !w.iter().all(|v| v.is_finite()) {
        return Err(PolicyError::Invalid("logistic weights left the finite range".into()));
    }
    Ok(DemandModel::Logistic(LogisticDemand { weights: w, separation_warning: separation, iterations }))
}

/// Kernel smoother with per-dimension rule-of-thumb bandwidths
/// `1.06 sigma n^{-1/5}` unless explicit ones are given.
pub fn fit_kernel_demand(
    data: &Dataset,
    bandwidths: Option<Vec<f64>>,
) -> Result<DemandModel, PolicyError> {
    let n = data.len();
    if n < 50 {
        return Err(PolicyError::Invalid(format!("kernel demand needs at least 50 samples, got {n}")));
    }
    let dim = data.feature_dim() + 1;
    let samples = data.samples();
    let mut points = Vec::with_capacity(n * dim);
    let mut sales = Vec::with_capacity(n);
    for s in samples {
        points.extend_from_slice(&s.features);
        points.push(s.price);
        sales.push(s.sold);
    }
    let bandwidths = match bandwidths {
        Some(h) => {
            if h.len() != dim || h.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(PolicyError::Invalid(format!(
                    "need {dim} positive bandwidths (features then price), got {h:?}"
                )));
            }
            h
        }
        None => {
            let scale = (n as f64).powf(-0.2);
            (0..dim)
                .map(|j| {
                    let mean = (0..n).map(|i| points[i * dim + j]).sum::<f64>() / n as f64;
                    let var = (0..n)
                        .map(|i| {
                            let d = points[i * dim + j] - mean;
                            d * d
                        })
                        .sum::<f64>()
                        / n as f64;
                    // constant coordinates get a token bandwidth; any query
                    // off that value then falls back to the global mean
                    (1.06 * var.sqrt() * scale).max(1e-9 * (1.0 + mean.abs()))
                })
                .collect()
        }
    };
    let mean_sale = chunked_sum(n, |i| sales[i]) / n as f64;
    Ok(DemandModel::Kernel(KernelDemand { bandwidths, points, sales, dim, mean_sale }))
}

// ── Policy learners ──────────────────────────────────────────────────────

/// Prices by maximizing estimated revenue `mean pi(x) f(x, pi(x))`
/// under a fitted demand model.
pub fn direct_method_policy(
    demand: &DemandModel,
    data: &Dataset,
    cfg: &SolverConfig,
) -> Result<FitResult, PolicyError> {
    let samples = data.samples();
    let objective = |p: &LinearPolicy| {
        chunked_sum(samples.len(), |i| {
            let price = p.price(&samples[i].features);
            price * demand.predict(&samples[i].features, price)
        }) / samples.len() as f64
    };
    Ok(fit_nonconvex(objective, data, cfg, None)?)
}

/// Maximizes the kernel inverse-propensity revenue estimate.
pub fn kernel_ipw_policy(
    data: &Dataset,
    bandwidth: f64,
    cfg: &SolverConfig,
) -> Result<FitResult, PolicyError> {
    let spec = LossSpec::kernel_ipw(bandwidth)?;
    reward_policy(&spec, data, cfg)
}

/// Maximizes the model-free revenue proxy `mean pi Y 1{P > pi}`.
pub fn model_free_policy(data: &Dataset, cfg: &SolverConfig) -> Result<FitResult, PolicyError> {
    reward_policy(&LossSpec::model_free(), data, cfg)
}

fn reward_policy(
    spec: &LossSpec,
    data: &Dataset,
    cfg: &SolverConfig,
) -> Result<FitResult, PolicyError> {
    // surface data problems (dims, propensities) once, up front
    let probe = LinearPolicy::new(vec![0.0; data.feature_dim()]);
    empirical_risk(spec, &probe, data, cfg.weight_cap)?;
    let objective =
        |p: &LinearPolicy| empirical_risk(spec, p, data, cfg.weight_cap).unwrap_or(f64::NEG_INFINITY);
    Ok(fit_nonconvex(objective, data, cfg, None)?)
}

/// Convex epsilon-insensitive regression of price onto the sold/unsold
/// bands, minimized exactly by the subgradient solver.
pub fn eps_insensitive_policy(
    data: &Dataset,
    c1: EpsCoef,
    c2: EpsCoef,
    cfg: &SolverConfig,
) -> Result<FitResult, PolicyError> {
    let spec = LossSpec::eps_insensitive(c1, c2)?;
    Ok(fit_convex(&spec, data, cfg)?)
}

// ── Cross-validation over a loss-parameter grid ──────────────────────────

/// Loss family being tuned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvLoss {
    Hinge,
    Quantile,
    EpsInsensitive,
}

/// One grid entry: a scalar (hinge `c`, quantile `tau`) or an
/// epsilon-insensitive `(c1, c2)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CvParam {
    Scalar(f64),
    Pair(f64, f64),
}

/// Parameter with the best worst-case revenue ratio for the hinge family.
pub const ROBUST_HINGE_C: f64 = 0.8234;
/// Parameter with the best worst-case revenue ratio for the quantile family.
pub const ROBUST_QUANTILE_TAU: f64 = 0.209;

#[derive(Debug, Clone)]
pub struct CvResult {
    pub grid: Vec<CvParam>,
    pub policies: Vec<LinearPolicy>,
    pub estimated_revenues: Vec<f64>,
    pub chosen_index: usize,
}

impl CvResult {
    pub fn chosen_policy(&self) -> &LinearPolicy {
        &self.policies[self.chosen_index]
    }

    pub fn chosen_param(&self) -> CvParam {
        self.grid[self.chosen_index]
    }
}

#[derive(Debug, Clone, Default)]
pub struct CvOptions {
    /// Stride-subsample the revenue evaluation features to about this
    /// many points (kernel demand makes full evaluation quadratic).
    pub eval_cap: Option<usize>,
    /// Estimate revenues on this dataset's features instead of the
    /// training features.
    pub holdout: Option<Dataset>,
}

/// Default candidate grids: 0.05-spaced for the scalar families (fine
/// enough that grid quantization stays below the noise floor of the
/// revenue scoring), the 4x4 coefficient product for eps-insensitive.
pub fn default_grid(kind: CvLoss) -> Vec<CvParam> {
    match kind {
        CvLoss::Hinge => (2..=20).map(|k| CvParam::Scalar(k as f64 / 20.0)).collect(),
        CvLoss::Quantile => (1..=19).map(|k| CvParam::Scalar(k as f64 / 20.0)).collect(),
        CvLoss::EpsInsensitive => {
            let mut out = Vec::new();
            for &c1 in &[1.1, 1.3, 1.6, 2.0] {
                for &c2 in &[0.9, 0.7, 0.4, 0.0] {
                    out.push(CvParam::Pair(c1, c2));
                }
            }
            out
        }
    }
}

fn make_spec(kind: CvLoss, param: &CvParam) -> Result<LossSpec, PolicyError> {
    match (kind, param) {
        (CvLoss::Hinge, CvParam::Scalar(c)) => Ok(LossSpec::hinge(*c)?),
        (CvLoss::Quantile, CvParam::Scalar(t)) => Ok(LossSpec::quantile(*t)?),
        (CvLoss::EpsInsensitive, CvParam::Pair(c1, c2)) => {
            Ok(LossSpec::eps_insensitive(EpsCoef::Finite(*c1), EpsCoef::Finite(*c2))?)
        }
        _ => Err(PolicyError::Invalid(format!("grid entry {param:?} does not fit {kind:?}"))),
    }
}

fn sort_key(p: &CvParam) -> (f64, f64) {
    match *p {
        CvParam::Scalar(v) => (v, 0.0),
        CvParam::Pair(a, b) => (a, b),
    }
}

// distance from the robust default, the first tie-break
fn default_distance(kind: CvLoss, p: &CvParam) -> f64 {
    match (kind, *p) {
        (CvLoss::Hinge, CvParam::Scalar(v)) => (v - ROBUST_HINGE_C).abs(),
        (CvLoss::Quantile, CvParam::Scalar(v)) => (v - ROBUST_QUANTILE_TAU).abs(),
        (CvLoss::EpsInsensitive, CvParam::Pair(a, b)) => (a - 1.5).abs() + (b - 0.5).abs(),
        _ => f64::INFINITY,
    }
}

/// Fits one policy per grid parameter and scores each by estimated
/// revenue `mean pi(x) f(x, pi(x))` under the demand model. Fitting
/// happens in ascending parameter order with warm starts, whatever the
/// input order, so a permuted grid selects the same parameter. Exact
/// revenue ties go to the parameter nearest the robust default, then to
/// the smaller parameter.
pub fn cross_validate(
    kind: CvLoss,
    data: &Dataset,
    demand: &DemandModel,
    grid: &[CvParam],
    cfg: &SolverConfig,
    opts: &CvOptions,
) -> Result<CvResult, PolicyError> {
    if grid.is_empty() {
        return Err(PolicyError::Invalid("empty cross-validation grid".into()));
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (sort_key(&grid[i]), sort_key(&grid[j]));
        a.partial_cmp(&b).expect("grid parameters are finite")
    });

    let mut policies: Vec<Option<LinearPolicy>> = vec![None; grid.len()];
    let mut warm: Option<Vec<f64>> = None;
    for &idx in &order {
        let spec = make_spec(kind, &grid[idx])?;
        let local = SolverConfig { init: warm.clone().or_else(|| cfg.init.clone()), ..cfg.clone() };
        let fit = fit_convex(&spec, data, &local)?;
        warm = Some(fit.policy.theta.clone());
        policies[idx] = Some(fit.policy);
    }
    let policies: Vec<LinearPolicy> = policies.into_iter().map(|p| p.unwrap()).collect();

    let eval_base = opts.holdout.as_ref().unwrap_or(data);
    let eval_data = match opts.eval_cap {
        Some(cap) => eval_base.stride_subsample(cap),
        None => eval_base.clone(),
    };
    let eval = eval_data.samples();
    let estimated_revenues: Vec<f64> = policies
        .iter()
        .map(|p| {
            chunked_sum(eval.len(), |i| {
                let price = p.price(&eval[i].features);
                price * demand.predict(&eval[i].features, price)
            }) / eval.len() as f64
        })
        .collect();

    let mut chosen_index = 0;
    for k in 1..grid.len() {
        let better = match estimated_revenues[k].partial_cmp(&estimated_revenues[chosen_index]) {
            Some(std::cmp::Ordering::Greater) => true,
            Some(std::cmp::Ordering::Equal) => {
                let (dk, dc) =
                    (default_distance(kind, &grid[k]), default_distance(kind, &grid[chosen_index]));
                dk < dc || (dk == dc && sort_key(&grid[k]) < sort_key(&grid[chosen_index]))
            }
            _ => false,
        };
        if better {
            chosen_index = k;
        }
    }
    Ok(CvResult { grid: grid.to_vec(), policies, estimated_revenues, chosen_index })
}

// ── Tests ────────────────────────────────────────────────────────────────
