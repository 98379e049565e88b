//! Optimizers for linear pricing policies: full-batch projected
//! subgradient descent with suffix averaging for the convex surrogate
//! risks, and a deterministic multi-start compass search for the reward
//! objectives, whose evaluations are discontinuous or non-smooth in the
//! policy.
//!
//! Both paths are deterministic given the config seed and the data order.
//! Gradient and risk reductions run through fixed-order chunked sums, so
//! repeated fits produce bit-identical policies.

use rand::Rng;

use thiserror::Error;

use crate::data::{Dataset, LinearPolicy};
use crate::losses::{empirical_risk, empirical_risk_gradient, LossError, LossSpec};
use crate::numeric::seeded_rng;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver config: {0}")]
    InvalidConfig(String),
    #[error("objective became non-finite at iteration {iteration}")]
    Diverged { iteration: u64 },
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Objective checkpoints (and the convergence window) in iterations.
const CHECKPOINT: u64 = 100;

/// Compass search stops once its step falls below this.
const PATTERN_STEP_MIN: f64 = 1e-5;

/// Substream tag for the random multistart draws.
const START_STREAM: u64 = 0x7374_6172_7473;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Subgradient iterations (convex path) or objective-evaluation budget
    /// (compass path).
    pub max_iters: u64,
    /// Relative objective-change tolerance between consecutive checkpoints.
    pub tol: f64,
    /// Radius `B` of the L2 ball the policy is projected onto.
    pub norm_cap: f64,
    /// Ridge weight λ; 0 disables regularization.
    pub reg_lambda: f64,
    /// Step size numerator for the λ = 0 schedule `step_scale/√t`.
    /// `None` derives `mean price / √(feature dim)` from the data.
    pub step_scale: Option<f64>,
    pub seed: u64,
    /// Number of seeded random starts on the compass path.
    pub multistarts: u32,
    /// Clip inverse propensity weights at this value during risk and
    /// gradient evaluation.
    pub weight_cap: Option<f64>,
    /// Starting point; `None` is the zero vector.
    pub init: Option<Vec<f64>>,
    /// Derive λ from the generalization-driven schedule
    /// `√(2·max{τ,1−τ}²/(d²B²n))` with `d` the smallest propensity in the
    /// data; overrides `reg_lambda`. Hinge and quantile risks only.
    pub use_generalization_lambda: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 50_000,
            tol: 1e-9,
            norm_cap: 100.0,
            reg_lambda: 0.0,
            step_scale: None,
            seed: 0,
            multistarts: 10,
            weight_cap: None,
            init: None,
            use_generalization_lambda: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.norm_cap > 0.0 && self.norm_cap.is_finite()) {
            return bad(format!("norm_cap must be positive, got {}", self.norm_cap));
        }
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return bad(format!("reg_lambda must be nonnegative, got {}", self.reg_lambda));
        }
        if let Some(s) = self.step_scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("step_scale must be positive, got {s}"));
            }
        }
        if self.multistarts == 0 {
            return bad("multistarts must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub policy: LinearPolicy,
    /// Objective at `policy`: empirical risk plus λ‖θ‖² on the convex
    /// path, raw reward on the compass path.
    pub objective: f64,
    /// Iterations run (convex) or objective evaluations spent (compass).
    pub iterations: u64,
    /// Whether the tolerance fired (convex) or every start's step shrank
    /// below resolution within budget (compass).
    pub converged: bool,
    /// Checkpoint objectives of the suffix-averaged iterate; `None` on the
    /// compass path.
    pub trace: Option<Vec<f64>>,
}

// ── Generalization-driven constants ──────────────────────────────────────

/// Ridge weight `√(2·max{τ,1−τ}² / (d²·B²·n))` balancing empirical risk
/// against policy norm for an IPW-weighted surrogate with minimum
/// propensity `d`.
pub fn generalization_lambda(tau_or_c: f64, d: f64, b: f64, n: u64) -> Result<f64, SolverError> {
    if !(d > 0.0 && b > 0.0 && n >= 1) {
        return Err(SolverError::InvalidConfig(format!(
            "lambda schedule needs d > 0, B > 0, n >= 1, got d={d}, B={b}, n={n}"
        )));
    }
    let top = tau_or_c.max(1.0 - tau_or_c);
    Ok((2.0 * top * top / (d * d * b * b * n as f64)).sqrt())
}

/// Lipschitz constant `max{τ,1−τ}/d` of the IPW-weighted surrogate in the
/// policy price.
pub fn lipschitz_constant(tau_or_c: f64, d: f64) -> Result<f64, SolverError> {
    if !(d > 0.0) {
        return Err(SolverError::InvalidConfig(format!("lipschitz constant needs d > 0, got {d}")));
    }
    Ok(tau_or_c.max(1.0 - tau_or_c) / d)
}

/// Samples sufficient for ε excess risk: `⌈8·max{τ,1−τ}²·B²/(d²·ε²)⌉`.
pub fn sample_complexity(tau_or_c: f64, d: f64, b: f64, eps: f64) -> Result<u64, SolverError> {
    if !(d > 0.0 && b > 0.0 && eps > 0.0) {
        return Err(SolverError::InvalidConfig(format!(
            "sample complexity needs d > 0, B > 0, eps > 0, got d={d}, B={b}, eps={eps}"
        )));
    }
    let top = tau_or_c.max(1.0 - tau_or_c);
    Ok((8.0 * top * top * b * b / (d * d * eps * eps)).ceil() as u64)
}

// ── Convex path ──────────────────────────────────────────────────────────

fn project(theta: &mut [f64], cap: f64) {
    let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > cap {
        let shrink = cap / norm;
        for v in theta.iter_mut() {
            *v *= shrink;
        }
    }
}

fn norm_sq(theta: &[f64]) -> f64 {
    theta.iter().map(|v| v * v).sum()
}

fn effective_lambda(
    spec: &LossSpec,
    data: &Dataset,
    cfg: &SolverConfig,
) -> Result<f64, SolverError> {
    if !cfg.use_generalization_lambda {
        return Ok(cfg.reg_lambda);
    }
    let param = match *spec {
        LossSpec::Hinge { c } => c,
        LossSpec::Quantile { tau } => tau,
        _ => {
            return Err(SolverError::InvalidConfig(
                "the lambda schedule applies to hinge and quantile risks only".into(),
            ))
        }
    };
    let mut d = f64::INFINITY;
    for (i, s) in data.samples().iter().enumerate() {
        match s.propensity {
            Some(p) if p.is_finite() && p > 0.0 => d = d.min(p),
            _ => return Err(SolverError::Loss(LossError::BadPropensity { index: i })),
        }
    }
    generalization_lambda(param, d, cfg.norm_cap, data.len() as u64)
}

/// Minimizes `empirical_risk + λ‖θ‖²` over `‖θ‖₂ <= norm_cap` by projected
/// subgradient descent. Steps follow `1/(λt)` when λ > 0, else
/// `step_scale/√t`. Every [`CHECKPOINT`] iterations the trailing-half
/// suffix average of the iterates is evaluated; the best checkpoint is
/// returned, and the run stops early once the checkpoint objective
/// stabilizes to within `tol` relative change.
pub fn fit_convex(
    spec: &LossSpec,
    data: &Dataset,
    cfg: &SolverConfig,
) -> Result<FitResult, SolverError> {
    cfg.validate()?;
    if !spec.is_convex() {
        return Err(SolverError::Loss(LossError::NotConvex(spec.name())));
    }
    let m = data.feature_dim();
    let lambda = effective_lambda(spec, data, cfg)?;
    let step_scale = match cfg.step_scale {
        Some(s) => s,
        None => data.mean_price() / (m as f64).sqrt(),
    };
    let mut theta = match &cfg.init {
        Some(t0) => {
            if t0.len() != m {
                return Err(SolverError::InvalidConfig(format!(
                    "init has dimension {}, data has {m}",
                    t0.len()
                )));
            }
            t0.clone()
        }
        None => vec![0.0; m],
    };
    project(&mut theta, cfg.norm_cap);

    // Prefix sums of the projected iterates; the suffix average over
    // (t/2, t] at checkpoint t is a difference of two entries.
    let mut prefix: Vec<f64> = vec![0.0; m];
    let mut policy = LinearPolicy::new(theta);
    let mut trace = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut prev_obj: Option<f64> = None;
    let mut converged = false;
    let mut reached = 0;

    for t in 1..=cfg.max_iters {
        reached = t;
        let base = prefix.len() - m;
        for i in 0..m {
            let s = prefix[base + i] + policy.theta[i];
            prefix.push(s);
        }

        if t % CHECKPOINT == 0 || t == cfg.max_iters {
            let lo = (t / 2) as usize;
            let count = (t as usize - lo) as f64;
            let avg: Vec<f64> = (0..m)
                .map(|i| (prefix[t as usize * m + i] - prefix[lo * m + i]) / count)
                .collect();
            let avg_policy = LinearPolicy::new(avg);
            let obj =
                empirical_risk(spec, &avg_policy, data, cfg.weight_cap)? + lambda * norm_sq(&avg_policy.theta);
            if !obj.is_finite() {
                return Err(SolverError::Diverged { iteration: t });
            }
            trace.push(obj);
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, avg_policy.theta));
            }
            if let Some(p) = prev_obj {
                if (obj - p).abs() <= cfg.tol * (1.0 + p.abs()) {
                    converged = true;
                    break;
                }
            }
            prev_obj = Some(obj);
            if t == cfg.max_iters {
                break;
            }
        }

        let mut grad = empirical_risk_gradient(spec, &policy, data, cfg.weight_cap)?;
        let eta = if lambda > 0.0 {
            for (g, th) in grad.iter_mut().zip(&policy.theta) {
                *g += 2.0 * lambda * th;
            }
            1.0 / (lambda * t as f64)
        } else {
            step_scale / (t as f64).sqrt()
        };
        for (th, g) in policy.theta.iter_mut().zip(&grad) {
            *th -= eta * g;
        }
        project(&mut policy.theta, cfg.norm_cap);
    }

    let (objective, theta) = best.expect("at least one checkpoint ran");
    Ok(FitResult {
        policy: LinearPolicy::new(theta),
        objective,
        iterations: reached,
        converged,
        trace: Some(trace),
    })
}

// ── Compass path ─────────────────────────────────────────────────────────

/// Policy-price scale for random starts: a unit coordinate move should
/// shift prices by roughly one observed mean price.
fn start_scale(data: &Dataset) -> f64 {
    let n = data.len() as f64;
    let m = data.feature_dim() as f64;
    let sum_abs: f64 =
        data.samples().iter().map(|s| s.features.iter().map(|v| v.abs()).sum::<f64>()).sum();
    let scale = data.mean_price() / (sum_abs / (n * m));
    if scale.is_finite() && scale > 0.0 {
        scale
    } else {
        1.0
    }
}

/// Maximizes an arbitrary policy objective by best-of-2m compass search
/// from each start: user-supplied starts first, then `multistarts` seeded
/// random draws. Moves are clamped to the `norm_cap` ball; the step starts
/// at half the start's largest coordinate (floored at 0.1), halves on
/// failure to improve, and the start finishes below [`PATTERN_STEP_MIN`].
/// `max_iters` is the total objective-evaluation budget across starts.
pub fn fit_nonconvex<F: Fn(&LinearPolicy) -> f64>(
    objective: F,
    data: &Dataset,
    cfg: &SolverConfig,
    starts: Option<&[Vec<f64>]>,
) -> Result<FitResult, SolverError> {
    cfg.validate()?;
    let m = data.feature_dim();
    let mut start_list: Vec<Vec<f64>> = Vec::new();
    if let Some(user) = starts {
        for s in user {
            if s.len() != m {
                return Err(SolverError::InvalidConfig(format!(
                    "start has dimension {}, data has {m}",
                    s.len()
                )));
            }
            start_list.push(s.clone());
        }
    }
    let scale = start_scale(data);
    let mut rng = seeded_rng(cfg.seed, &[START_STREAM]);
    for _ in 0..cfg.multistarts {
        start_list.push((0..m).map(|_| rng.gen_range(0.0..scale)).collect());
    }

    let budget = cfg.max_iters;
    let mut used = 0u64;
    let mut best_val = f64::NEG_INFINITY;
    let mut best_theta: Vec<f64> = vec![0.0; m];
    let mut finished_all = true;

    'starts: for start in &start_list {
        let mut theta = start.clone();
        project(&mut theta, cfg.norm_cap);
        if used >= budget {
            finished_all = false;
            break;
        }
        let mut cur = objective(&LinearPolicy::new(theta.clone()));
        used += 1;
        if cur > best_val {
            best_val = cur;
            best_theta = theta.clone();
        }
        let inf_norm = theta.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let mut step = (0.5 * inf_norm).max(0.1);
        while step >= PATTERN_STEP_MIN {
            let mut improved: Option<(f64, Vec<f64>)> = None;
            for i in 0..m {
                for dir in [1.0f64, -1.0] {
                    if used >= budget {
                        finished_all = false;
                        break 'starts;
                    }
                    let mut cand = theta.clone();
                    cand[i] += dir * step;
                    project(&mut cand, cfg.norm_cap);
                    let v = objective(&LinearPolicy::new(cand.clone()));
                    used += 1;
                    if v > cur && improved.as_ref().map_or(true, |(b, _)| v > *b) {
                        improved = Some((v, cand));
                    }
                }
            }
            match improved {
                Some((v, cand)) => {
                    cur = v;
                    theta = cand;
                    if cur > best_val {
                        best_val = cur;
                        best_theta = theta.clone();
                    }
                }
                None => step *= 0.5,
            }
        }
    }

    // Report the objective recomputed at the winner, so the number always
    // matches the returned policy.
    let policy = LinearPolicy::new(best_theta);
    let objective_value = objective(&policy);
    Ok(FitResult {
        policy,
        objective: objective_value,
        iterations: used,
        converged: finished_all,
        trace: None,
    })
}

// ── Tests ────────────────────────────────────────────────────────────────
