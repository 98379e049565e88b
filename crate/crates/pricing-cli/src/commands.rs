//! Subcommand bodies: each takes parsed flags, does the work through
//! the library, and writes one CSV artifact.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use pricing::bounds::{verify_tightness, BoundCurve, WorstCaseKind};
use pricing::data::{format_f64, load_csv, save_csv};
use pricing::policies::{
    cross_validate, default_grid, fit_kernel_demand, fit_logistic_demand, kernel_ipw_policy,
    model_free_policy, CvLoss, CvParam, CvOptions, DemandModel,
};
use pricing::solver::fit_convex;
use pricing::synthetic::{generate, FeatureLaw, GKind, Scenario, ValuationFamily};
use pricing::{Dataset, LossSpec, PropensityModel, SolverConfig};

use crate::experiment::{build_price_law, LearnerSpec};
use crate::usage_err;

pub const BOUNDS_SCHEMA: &str = "pricing-bounds-v1";
pub const TIGHTNESS_SCHEMA: &str = "pricing-tightness-v1";
pub const POLICY_SCHEMA: &str = "pricing-policy-v1";
pub const CROSSVAL_SCHEMA: &str = "pricing-crossval-v1";

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sanitize(msg: &str) -> String {
    msg.replace(['\n', '\r'], " ").replace(',', ";")
}

// ── bounds ───────────────────────────────────────────────────────────────

/// Evaluates the worst-case revenue-ratio guarantee on a parameter grid
/// and writes `param,value,branch` rows.
pub fn cmd_bounds(kind: &str, min: f64, max: f64, steps: usize, out: &Path) -> Result<()> {
    if steps == 0 {
        return Err(usage_err("steps must be at least 1"));
    }
    let grid: Vec<f64> = if steps == 1 {
        if min != max {
            return Err(usage_err("steps = 1 evaluates a single point and needs min == max"));
        }
        vec![min]
    } else {
        if !(min < max) {
            return Err(usage_err(format!("need min < max, got {min} and {max}")));
        }
        (0..steps).map(|k| min + (max - min) * k as f64 / (steps - 1) as f64).collect()
    };
    let curve = match kind {
        "hinge" => BoundCurve::hinge(&grid)?,
        "quantile" => BoundCurve::quantile(&grid)?,
        other => return Err(usage_err(format!("kind `{other}` (expected hinge or quantile)"))),
    };

    let mut text = format!("# schema: {BOUNDS_SCHEMA}\nparam,value,branch\n");
    for i in 0..curve.parameter_grid.len() {
        text.push_str(&format!(
            "{},{},{}\n",
            format_f64(curve.parameter_grid[i]),
            format_f64(curve.values[i]),
            curve.branch[i],
        ));
    }
    write_file(out, &text)?;
    println!("wrote {} bound rows to {}", grid.len(), out.display());
    Ok(())
}

// ── tightness ────────────────────────────────────────────────────────────

/// Checks each parameter's branch bound against its extremal
/// distribution. Invalid parameters become flagged rows; the run
/// continues.
pub fn cmd_tightness(kind: &str, params: &[f64], out: &Path) -> Result<()> {
    let wck = match kind {
        "hinge_below" => WorstCaseKind::HingeBelow,
        "hinge_above" => WorstCaseKind::HingeAbove,
        "quantile_below" => WorstCaseKind::QuantileBelow,
        "quantile_above" => WorstCaseKind::QuantileAbove,
        other => {
            return Err(usage_err(format!(
                "kind `{other}` (expected hinge_below, hinge_above, quantile_below, or quantile_above)"
            )))
        }
    };
    if params.is_empty() {
        return Err(usage_err("pass at least one parameter via --params"));
    }

    let mut text = format!("# schema: {TIGHTNESS_SCHEMA}\nparam,bound,achieved,gap,case\n");
    for &p in params {
        match verify_tightness(wck, p) {
            Ok(report) => text.push_str(&format!(
                "{},{},{},{},{}\n",
                format_f64(report.parameter),
                format_f64(report.bound_value),
                format_f64(report.achieved_ratio),
                format_f64(report.gap),
                report.distribution_kind,
            )),
            Err(e) => {
                text.push_str(&format!("{},,,,invalid: {}\n", format_f64(p), sanitize(&e.to_string())))
            }
        }
    }
    write_file(out, &text)?;
    println!("wrote {} tightness rows to {}", params.len(), out.display());
    Ok(())
}

// ── fit ──────────────────────────────────────────────────────────────────

pub struct FitArgs {
    pub data: PathBuf,
    /// Fixed-parameter learner token: `hinge:c`, `quantile:tau`,
    /// `eps:c1:c2`, `kernel_ipw[:h]`, or `model_free`.
    pub loss: String,
    pub seed: u64,
    pub out: PathBuf,
    pub propensity_model: Option<String>,
    pub propensity_params: Vec<f64>,
}

/// Loads the dataset, attaches a logging density if requested, resolves
/// missing propensities, and then delegates to [`fit_loaded`].
pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let learner = LearnerSpec::parse(&args.loss)?;
    let spec = match &learner {
        LearnerSpec::Hinge(c) => LossSpec::hinge(*c)?,
        LearnerSpec::Quantile(t) => LossSpec::quantile(*t)?,
        LearnerSpec::Eps(c1, c2) => LossSpec::eps_insensitive(*c1, *c2)?,
        LearnerSpec::KernelIpw(h) => LossSpec::kernel_ipw(*h)?,
        LearnerSpec::ModelFree => LossSpec::model_free(),
        LearnerSpec::HingeCv | LearnerSpec::QuantileCv | LearnerSpec::EpsCv => {
            return Err(usage_err("`fit` takes a fixed loss; use `crossval` to tune a parameter grid"))
        }
        LearnerSpec::LogisticDm => {
            return Err(usage_err(
                "logistic_dm is a two-stage learner, not a loss; it runs inside `experiment`",
            ))
        }
    };

    let data = load_dataset(
        &args.data,
        spec.needs_propensity(),
        args.propensity_model.as_deref(),
        &args.propensity_params,
        &learner.token(),
    )?;

    let cfg = SolverConfig { seed: args.seed, ..SolverConfig::default() };
    let fit = if spec.is_convex() {
        fit_convex(&spec, &data, &cfg)?
    } else {
        match &learner {
            LearnerSpec::KernelIpw(h) => kernel_ipw_policy(&data, *h, &cfg)?,
            LearnerSpec::ModelFree => model_free_policy(&data, &cfg)?,
            _ => unreachable!("non-convex specs are kernel_ipw or model_free"),
        }
    };

    let theta = &fit.policy.theta;
    let mut text = format!(
        "# schema: {POLICY_SCHEMA}\n# loss: {}\n# objective: {}\n# seed: {}\n# converged: {}\n# iterations: {}\n",
        learner.token(),
        format_f64(fit.objective),
        args.seed,
        fit.converged,
        fit.iterations,
    );
    let header: Vec<String> = (0..theta.len()).map(|j| format!("theta_{j}")).collect();
    text.push_str(&header.join(","));
    text.push('\n');
    let row: Vec<String> = theta.iter().map(|v| format_f64(*v)).collect();
    text.push_str(&row.join(","));
    text.push('\n');
    write_file(&args.out, &text)?;
    println!("wrote {}-coefficient policy to {}", theta.len(), args.out.display());
    Ok(())
}

/// Shared loading path: propensities are attached from an explicit
/// logging model when given; a loss that reweights by propensity and a
/// dataset without one is a usage error naming the missing flag.
fn load_dataset(
    path: &Path,
    needs_propensity: bool,
    model_name: Option<&str>,
    model_params: &[f64],
    loss_label: &str,
) -> Result<Dataset> {
    let data = load_csv(path, false)?;
    let has_propensity = data.samples().iter().all(|s| s.propensity.is_some());
    match model_name {
        Some(name) => {
            let law = build_price_law(name, model_params)?;
            Ok(data.with_propensities(&law))
        }
        None if needs_propensity && !has_propensity => Err(usage_err(format!(
            "{} has no propensity column and the {loss_label} loss reweights by it; \
             pass --propensity-model NAME --propensity-params P1,P2,... to attach a logging density",
            path.display()
        ))),
        None => Ok(data),
    }
}

// ── crossval ─────────────────────────────────────────────────────────────

pub struct CrossvalArgs {
    pub data: PathBuf,
    /// Loss family to tune: `hinge`, `quantile`, or `eps`.
    pub loss: String,
    /// Demand model scoring the grid: `logistic` or `kernel`.
    pub demand: String,
    pub demand_cap: usize,
    pub eval_cap: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub propensity_model: Option<String>,
    pub propensity_params: Vec<f64>,
}

/// Tunes a loss family over its default grid and writes one row per
/// parameter with the demand-model revenue estimate.
pub fn cmd_crossval(args: &CrossvalArgs) -> Result<()> {
    let kind = match args.loss.as_str() {
        "hinge" => CvLoss::Hinge,
        "quantile" => CvLoss::Quantile,
        "eps" => CvLoss::EpsInsensitive,
        other => return Err(usage_err(format!("loss `{other}` (expected hinge, quantile, or eps)"))),
    };
    let needs_propensity = !matches!(kind, CvLoss::EpsInsensitive);
    let data = load_dataset(
        &args.data,
        needs_propensity,
        args.propensity_model.as_deref(),
        &args.propensity_params,
        &args.loss,
    )?;

    let demand_data = data.stride_subsample(args.demand_cap);
    let demand: DemandModel = match args.demand.as_str() {
        "logistic" => fit_logistic_demand(&demand_data)?,
        "kernel" => fit_kernel_demand(&demand_data, None)?,
        other => return Err(usage_err(format!("demand `{other}` (expected logistic or kernel)"))),
    };

    let grid = default_grid(kind);
    let cfg = SolverConfig { seed: args.seed, ..SolverConfig::default() };
    let cv = cross_validate(
        kind,
        &data,
        &demand,
        &grid,
        &cfg,
        &CvOptions { eval_cap: Some(args.eval_cap), holdout: None },
    )?;

    let mut text = format!("# schema: {CROSSVAL_SCHEMA}\nparam1,param2,estimated_revenue,chosen\n");
    for (i, param) in cv.grid.iter().enumerate() {
        let (p1, p2) = match param {
            CvParam::Scalar(v) => (format_f64(*v), String::new()),
            CvParam::Pair(a, b) => (format_f64(*a), format_f64(*b)),
        };
        text.push_str(&format!(
            "{p1},{p2},{},{}\n",
            format_f64(cv.estimated_revenues[i]),
            u32::from(i == cv.chosen_index),
        ));
    }
    write_file(&args.out, &text)?;
    let chosen = match cv.chosen_param() {
        CvParam::Scalar(v) => format!("{v}"),
        CvParam::Pair(a, b) => format!("{a}:{b}"),
    };
    println!("chose {}:{chosen}; wrote {} grid rows to {}", args.loss, cv.grid.len(), args.out.display());
    Ok(())
}

// ── simulate ─────────────────────────────────────────────────────────────

pub struct SimulateArgs {
    pub family: String,
    pub g: String,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub price: Option<String>,
    pub price_params: Vec<f64>,
    pub feature_lo: Option<f64>,
    pub feature_hi: Option<f64>,
}

/// Draws one synthetic posted-price dataset and writes it as CSV
/// (features, price, sold, propensity).
pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let family = parse_family(&args.family)?;
    let g = parse_g(&args.g)?;
    let price_law = match &args.price {
        Some(name) => build_price_law(name, &args.price_params)?,
        None => default_price_law(family)?,
    };
    let (lo, hi) = default_feature_bounds(family);
    let feature_law =
        FeatureLaw::square(args.feature_lo.unwrap_or(lo), args.feature_hi.unwrap_or(hi));
    let scenario = Scenario {
        valuation_family: family,
        g_kind: g,
        feature_law,
        price_law,
        n: args.n,
        seed: args.seed,
    };
    scenario.validate()?;
    let run = generate(&scenario)?;
    save_csv(&run.data, &args.out)?;
    println!("wrote {} samples to {}", run.data.len(), args.out.display());
    Ok(())
}

pub fn parse_family(s: &str) -> Result<ValuationFamily> {
    match s {
        "uniform_band" => Ok(ValuationFamily::UniformBand),
        "shifted_exponential" => Ok(ValuationFamily::ShiftedExponential),
        other => Err(usage_err(format!(
            "family `{other}` (expected uniform_band or shifted_exponential)"
        ))),
    }
}

pub fn parse_g(s: &str) -> Result<GKind> {
    match s {
        "linear" => Ok(GKind::Linear),
        "step" => Ok(GKind::Step),
        other => Err(usage_err(format!("g `{other}` (expected linear or step)"))),
    }
}

/// Paper-standard logging law per valuation family.
pub fn default_price_law(family: ValuationFamily) -> Result<PropensityModel> {
    Ok(match family {
        ValuationFamily::UniformBand => PropensityModel::uniform(1.0, 3.0)?,
        ValuationFamily::ShiftedExponential => PropensityModel::uniform(0.0, 15.0)?,
    })
}

pub fn default_feature_bounds(family: ValuationFamily) -> (f64, f64) {
    match family {
        ValuationFamily::UniformBand => (1.0, 2.0),
        ValuationFamily::ShiftedExponential => (1.0, 5.0),
    }
}

// ── Tests ────────────────────────────────────────────────────────────────
