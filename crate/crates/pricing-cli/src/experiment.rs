//! Simulation-study orchestration: a scenario crossed with a learner
//! list, a sample-size grid, and seeded replications, emitting one CSV
//! row per (learner, n, rep) plus a per-cell summary file.
//!
//! Every row is a pure function of `(config, base_seed)`. The dataset
//! seed is shared by all learners inside a `(n, rep)` cell so learners
//! compete on identical data; the per-row fit seed additionally mixes
//! in the learner token, so removing grid points or learners from a
//! config never shifts the seeds of the remaining rows.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};

use pricing::data::format_f64;
use pricing::evaluation::{
    fit_evaluator, model_based_revenue, split_prescription_evaluation, true_expected_revenue,
    EvalKind, EvalProtocol, EvaluatorKind,
};
use pricing::losses::EpsCoef;
use pricing::numeric::derive_seed;
use pricing::policies::{
    cross_validate, default_grid, direct_method_policy, eps_insensitive_policy, fit_kernel_demand,
    fit_logistic_demand, kernel_ipw_policy, model_free_policy, CvLoss, CvOptions, DemandModel,
};
use pricing::solver::fit_convex;
use pricing::synthetic::{
    distance_to_oracle, generate, oracle_policy, sample_test_features, FeatureLaw, GKind,
    Scenario, ValuationFamily,
};
use pricing::{Dataset, LinearPolicy, LossSpec, PropensityModel, SolverConfig};

use crate::config::Config;

pub const RESULTS_SCHEMA: &str = "pricing-experiment-results-v1";
pub const SUMMARY_SCHEMA: &str = "pricing-experiment-summary-v1";

// ── Learners ─────────────────────────────────────────────────────────────

/// One column of the study: either a tuned family (`*_cv`) or a fixed
/// parameterization. Tokens are `name[:param[:param]]`.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerSpec {
    HingeCv,
    QuantileCv,
    EpsCv,
    Hinge(f64),
    Quantile(f64),
    Eps(EpsCoef, EpsCoef),
    LogisticDm,
    KernelIpw(f64),
    ModelFree,
}

impl LearnerSpec {
    pub fn parse(token: &str) -> Result<Self> {
        let parts: Vec<&str> = token.split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| anyhow!("learner `{token}`: `{s}` is not a number"))
        };
        match parts.as_slice() {
            ["hinge_cv"] => Ok(LearnerSpec::HingeCv),
            ["quantile_cv"] => Ok(LearnerSpec::QuantileCv),
            ["eps_cv"] => Ok(LearnerSpec::EpsCv),
            ["logistic_dm"] => Ok(LearnerSpec::LogisticDm),
            ["model_free"] => Ok(LearnerSpec::ModelFree),
            ["kernel_ipw"] => Ok(LearnerSpec::KernelIpw(0.2)),
            ["kernel_ipw", h] => Ok(LearnerSpec::KernelIpw(num(h)?)),
            ["hinge", c] => Ok(LearnerSpec::Hinge(num(c)?)),
            ["quantile", t] => Ok(LearnerSpec::Quantile(num(t)?)),
            ["eps", c1, c2] => {
                let c1 = match *c1 {
                    "inf" | "+inf" => EpsCoef::Off,
                    v => EpsCoef::Finite(num(v)?),
                };
                let c2 = match *c2 {
                    "-inf" => EpsCoef::Off,
                    v => EpsCoef::Finite(num(v)?),
                };
                Ok(LearnerSpec::Eps(c1, c2))
            }
            _ => bail!(
                "unknown learner `{token}` (expected hinge_cv, quantile_cv, eps_cv, \
                 logistic_dm, kernel_ipw[:h], model_free, hinge:c, quantile:tau, or eps:c1:c2)"
            ),
        }
    }

    /// Canonical token; also the `learner` CSV column and the seed salt.
    pub fn token(&self) -> String {
        match self {
            LearnerSpec::HingeCv => "hinge_cv".into(),
            LearnerSpec::QuantileCv => "quantile_cv".into(),
            LearnerSpec::EpsCv => "eps_cv".into(),
            LearnerSpec::Hinge(c) => format!("hinge:{c}"),
            LearnerSpec::Quantile(t) => format!("quantile:{t}"),
            LearnerSpec::Eps(c1, c2) => {
                let a = match c1 {
                    EpsCoef::Finite(v) => format!("{v}"),
                    EpsCoef::Off => "inf".into(),
                };
                let b = match c2 {
                    EpsCoef::Finite(v) => format!("{v}"),
                    EpsCoef::Off => "-inf".into(),
                };
                format!("eps:{a}:{b}")
            }
            LearnerSpec::LogisticDm => "logistic_dm".into(),
            LearnerSpec::KernelIpw(h) => format!("kernel_ipw:{h}"),
            LearnerSpec::ModelFree => "model_free".into(),
        }
    }

    fn is_cv(&self) -> bool {
        matches!(self, LearnerSpec::HingeCv | LearnerSpec::QuantileCv | LearnerSpec::EpsCv)
    }
}

// ── Scenario spec ────────────────────────────────────────────────────────

/// Scenario shape without the per-replication `(n, seed)` pair.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub family: ValuationFamily,
    pub g: GKind,
    pub feature_law: FeatureLaw,
    pub price_law: PropensityModel,
}

impl ScenarioSpec {
    pub fn instantiate(&self, n: usize, seed: u64) -> Result<Scenario> {
        let s = Scenario {
            valuation_family: self.family,
            g_kind: self.g,
            feature_law: self.feature_law.clone(),
            price_law: self.price_law.clone(),
            n,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    /// `family/g` label used as the `scenario` CSV column.
    pub fn name(&self) -> String {
        let fam = match self.family {
            ValuationFamily::UniformBand => "uniform_band",
            ValuationFamily::ShiftedExponential => "shifted_exponential",
        };
        let g = match self.g {
            GKind::Linear => "linear",
            GKind::Step => "step",
        };
        format!("{fam}/{g}")
    }
}

/// Positional price-law constructor shared by the CLI flags:
/// uniform(lo, hi), triangular(lo, mode, hi), exponential(rate[, location])
/// with `rate` the density decay `rate·exp(-rate·(p-location))`, and
/// lognormal(mu, sigma).
pub fn build_price_law(name: &str, params: &[f64]) -> Result<PropensityModel> {
    let law = match (name, params) {
        ("uniform", [lo, hi]) => PropensityModel::uniform(*lo, *hi)?,
        ("triangular", [lo, mode, hi]) => PropensityModel::triangular(*lo, *mode, *hi)?,
        ("exponential", [rate]) => exponential_from_rate(*rate, 0.0)?,
        ("exponential", [rate, location]) => exponential_from_rate(*rate, *location)?,
        ("lognormal", [mu, sigma]) => PropensityModel::log_normal(*mu, *sigma)?,
        ("uniform" | "triangular" | "exponential" | "lognormal", _) => bail!(
            "price law `{name}` takes uniform(lo,hi), triangular(lo,mode,hi), \
             exponential(rate[,location]), or lognormal(mu,sigma); got {} parameters",
            params.len()
        ),
        _ => bail!("unknown price law `{name}`"),
    };
    Ok(law)
}

fn exponential_from_rate(rate: f64, location: f64) -> Result<PropensityModel> {
    if !(rate.is_finite() && rate > 0.0) {
        bail!("exponential price law needs rate > 0, got {rate}");
    }
    Ok(PropensityModel::exponential(1.0 / rate, location)?)
}

// ── Experiment configuration ─────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub learners: Vec<LearnerSpec>,
    pub n_grid: Vec<usize>,
    pub replications: u32,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    /// Demand model that scores candidate parameters inside `*_cv`
    /// learners.
    pub cv_demand: EvaluatorKind,
    /// Demand-model fits see at most this many (stride-subsampled) rows.
    pub demand_cap: usize,
    /// Revenue scoring inside cross-validation uses at most this many
    /// training rows.
    pub eval_cap: usize,
    pub oracle_draws: usize,
    /// Fresh contexts for the distance-to-oracle metric.
    pub test_size: usize,
    /// Monte-Carlo draws for the analytic revenue column.
    pub n_mc: usize,
    pub protocol: EvalProtocol,
    /// Objective-evaluation budget and restart count for the
    /// pattern-search learners (direct method, kernel IPW, model-free).
    pub nonconvex_evals: u64,
    pub nonconvex_multistarts: u32,
    pub weight_cap: Option<f64>,
    /// Record wall-clock fit times. Off by default: timing varies
    /// between runs, and the default keeps reruns byte-identical.
    pub measure_time: bool,
    pub threads: Option<usize>,
}

const KNOWN_KEYS: &[&str] = &[
    "scenario.family",
    "scenario.g",
    "scenario.price",
    "scenario.price.lo",
    "scenario.price.hi",
    "scenario.price.mode",
    "scenario.price.rate",
    "scenario.price.location",
    "scenario.price.mu",
    "scenario.price.sigma",
    "scenario.feature_lo",
    "scenario.feature_hi",
    "learners",
    "n_grid",
    "replications",
    "base_seed",
    "output_dir",
    "cv.demand",
    "demand_cap",
    "eval_cap",
    "oracle_draws",
    "test_size",
    "n_mc",
    "eval.protocol",
    "eval.split_fraction",
    "eval.evaluator",
    "nonconvex_evals",
    "nonconvex_multistarts",
    "weight_cap",
    "measure_time",
    "threads",
    "allow_large_n",
];

/// Largest sample size allowed without `allow_large_n = true`.
pub const DEFAULT_N_CAP: usize = 30_000;

impl ExperimentConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_known(KNOWN_KEYS)?;

        let family = match cfg.require("scenario.family")? {
            "uniform_band" => ValuationFamily::UniformBand,
            "shifted_exponential" => ValuationFamily::ShiftedExponential,
            other => bail!("scenario.family `{other}` (expected uniform_band or shifted_exponential)"),
        };
        let g = match cfg.require("scenario.g")? {
            "linear" => GKind::Linear,
            "step" => GKind::Step,
            other => bail!("scenario.g `{other}` (expected linear or step)"),
        };
        let (feat_lo, feat_hi) = match family {
            ValuationFamily::UniformBand => (1.0, 2.0),
            ValuationFamily::ShiftedExponential => (1.0, 5.0),
        };
        let feature_law = FeatureLaw::square(
            cfg.parse_or("scenario.feature_lo", feat_lo)?,
            cfg.parse_or("scenario.feature_hi", feat_hi)?,
        );
        let price_law = price_law_from_config(cfg, family)?;
        let scenario = ScenarioSpec { family, g, feature_law, price_law };

        let mut learners = Vec::new();
        for token in cfg.list("learners")? {
            let spec = LearnerSpec::parse(&token)?;
            if learners.contains(&spec) {
                bail!("learner `{}` listed twice", spec.token());
            }
            learners.push(spec);
        }

        let n_grid: Vec<usize> = match cfg.get("n_grid") {
            None => vec![300, 3_000, 30_000],
            Some(_) => cfg
                .list("n_grid")?
                .iter()
                .map(|s| s.parse::<usize>().map_err(|_| anyhow!("n_grid entry `{s}` is not an integer")))
                .collect::<Result<_>>()?,
        };
        if n_grid.windows(2).any(|w| w[0] >= w[1]) {
            bail!("n_grid must be strictly increasing, got {n_grid:?}");
        }
        if n_grid.first().is_none_or(|&n| n < 2) {
            bail!("n_grid needs sizes of at least 2, got {n_grid:?}");
        }
        let allow_large = cfg.parse_or("allow_large_n", false)?;
        if !allow_large && n_grid.iter().any(|&n| n > DEFAULT_N_CAP) {
            bail!(
                "n_grid exceeds the default cap of {DEFAULT_N_CAP}; set `allow_large_n = true` \
                 to run larger sizes"
            );
        }

        let replications: u32 = cfg.require_parse("replications")?;
        if replications < 1 {
            bail!("replications must be at least 1");
        }

        let cv_demand = match cfg.get("cv.demand").unwrap_or("logistic") {
            "logistic" => EvaluatorKind::Logistic,
            "kernel" => EvaluatorKind::Kernel,
            other => bail!("cv.demand `{other}` (expected logistic or kernel)"),
        };

        let test_size = cfg.parse_or("test_size", 10_000)?;
        let protocol = match cfg.get("eval.protocol").unwrap_or("analytic") {
            "analytic" => EvalProtocol::analytic(test_size),
            "model_based" => {
                let evaluator = match cfg.get("eval.evaluator").unwrap_or("logistic") {
                    "logistic" => EvaluatorKind::Logistic,
                    "kernel" => EvaluatorKind::Kernel,
                    other => bail!("eval.evaluator `{other}` (expected logistic or kernel)"),
                };
                EvalProtocol::model_based(cfg.parse_or("eval.split_fraction", 0.5)?, evaluator, test_size)
            }
            other => bail!("eval.protocol `{other}` (expected analytic or model_based)"),
        };
        protocol.validate()?;

        let exp = ExperimentConfig {
            scenario,
            learners,
            n_grid,
            replications,
            base_seed: cfg.parse_or("base_seed", 0)?,
            output_dir: PathBuf::from(cfg.require("output_dir")?),
            cv_demand,
            demand_cap: cfg.parse_or("demand_cap", 2_000)?,
            eval_cap: cfg.parse_or("eval_cap", 5_000)?,
            oracle_draws: cfg.parse_or("oracle_draws", 10_000)?,
            test_size,
            n_mc: cfg.parse_or("n_mc", 20_000)?,
            protocol,
            nonconvex_evals: cfg.parse_or("nonconvex_evals", 6_000)?,
            nonconvex_multistarts: cfg.parse_or("nonconvex_multistarts", 3)?,
            weight_cap: cfg.get("weight_cap").map(|s| s.parse()).transpose().map_err(|e| anyhow!("weight_cap: {e}"))?,
            measure_time: cfg.parse_or("measure_time", false)?,
            threads: cfg.get("threads").map(|s| s.parse()).transpose().map_err(|e| anyhow!("threads: {e}"))?,
        };
        if exp.oracle_draws < 10_000 {
            bail!("oracle_draws must be at least 10000, got {}", exp.oracle_draws);
        }
        if exp.test_size == 0 || exp.n_mc == 0 || exp.demand_cap == 0 || exp.eval_cap == 0 {
            bail!("test_size, n_mc, demand_cap, and eval_cap must be positive");
        }
        Ok(exp)
    }
}

fn price_law_from_config(cfg: &Config, family: ValuationFamily) -> Result<PropensityModel> {
    let p = |key: &str| -> Result<f64> { cfg.require_parse(key) };
    match cfg.get("scenario.price") {
        // paper-standard logging per family
        None => Ok(match family {
            ValuationFamily::UniformBand => PropensityModel::uniform(1.0, 3.0)?,
            ValuationFamily::ShiftedExponential => PropensityModel::uniform(0.0, 15.0)?,
        }),
        Some("uniform") => Ok(PropensityModel::uniform(p("scenario.price.lo")?, p("scenario.price.hi")?)?),
        Some("triangular") => Ok(PropensityModel::triangular(
            p("scenario.price.lo")?,
            p("scenario.price.mode")?,
            p("scenario.price.hi")?,
        )?),
        Some("exponential") => {
            exponential_from_rate(p("scenario.price.rate")?, cfg.parse_or("scenario.price.location", 0.0)?)
        }
        Some("lognormal") => {
            Ok(PropensityModel::log_normal(p("scenario.price.mu")?, p("scenario.price.sigma")?)?)
        }
        Some(other) => bail!("scenario.price `{other}` (expected uniform, triangular, exponential, or lognormal)"),
    }
}

// ── Seeds ────────────────────────────────────────────────────────────────

const DATA_TAG: u64 = 0x6461_7461; // "data"

/// FNV-1a over the learner token: a stable 64-bit learner identity that
/// survives reordering or subsetting the learner list.
pub fn learner_tag(token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of the shared dataset inside one `(n, rep)` cell.
pub fn dataset_seed(base_seed: u64, scenario_idx: u64, n: usize, rep: u32) -> u64 {
    derive_seed(base_seed, &[scenario_idx, DATA_TAG, n as u64, rep as u64])
}

/// Per-row fit seed: the dataset-seed ingredients plus the learner tag.
pub fn row_seed(base_seed: u64, scenario_idx: u64, learner: &str, n: usize, rep: u32) -> u64 {
    derive_seed(base_seed, &[scenario_idx, learner_tag(learner), n as u64, rep as u64])
}

// ── Result rows ──────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub scenario: String,
    pub learner: String,
    pub n: usize,
    pub rep: u32,
    pub seed: u64,
    pub distance: Option<f64>,
    pub revenue: Option<f64>,
    pub revenue_se: Option<f64>,
    pub fit_seconds: f64,
    /// `ok`, or a flattened error message.
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub scenario: String,
    pub learner: String,
    pub n: usize,
    pub reps_ok: u32,
    pub mean_distance: f64,
    pub se_distance: f64,
    pub mean_revenue: f64,
    pub se_revenue: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub results: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

// commas and newlines would break the CSV row
fn sanitize(msg: &str) -> String {
    msg.replace(['\n', '\r'], " ").replace(',', ";")
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

pub fn render_results_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("# schema: {RESULTS_SCHEMA}\n");
    out.push_str("scenario,learner,n,rep,seed,distance,revenue,revenue_se,fit_seconds,status\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.3},{}\n",
            r.scenario,
            r.learner,
            r.n,
            r.rep,
            r.seed,
            opt_f64(r.distance),
            opt_f64(r.revenue),
            opt_f64(r.revenue_se),
            r.fit_seconds,
            r.status,
        ));
    }
    out
}

pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("# schema: {SUMMARY_SCHEMA}\n");
    out.push_str("scenario,learner,n,reps_ok,mean_distance,se_distance,mean_revenue,se_revenue\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.scenario,
            r.learner,
            r.n,
            r.reps_ok,
            format_f64(r.mean_distance),
            format_f64(r.se_distance),
            format_f64(r.mean_revenue),
            format_f64(r.se_revenue),
        ));
    }
    out
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Means and standard errors of the successful rows per
/// (scenario, learner, n) cell. Cells with no successes are dropped.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, usize)> = rows
        .iter()
        .map(|r| (r.scenario.clone(), r.learner.clone(), r.n))
        .collect();
    keys.dedup();
    keys.sort();
    keys.dedup();

    let mut out = Vec::new();
    for (scenario, learner, n) in keys {
        let ok: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| r.scenario == scenario && r.learner == learner && r.n == n && r.status == "ok")
            .collect();
        if ok.is_empty() {
            continue;
        }
        let distances: Vec<f64> = ok.iter().filter_map(|r| r.distance).collect();
        let revenues: Vec<f64> = ok.iter().filter_map(|r| r.revenue).collect();
        let (mean_distance, se_distance) = mean_and_se(&distances);
        let (mean_revenue, se_revenue) = mean_and_se(&revenues);
        out.push(SummaryRow {
            scenario,
            learner,
            n,
            reps_ok: ok.len() as u32,
            mean_distance,
            se_distance,
            mean_revenue,
            se_revenue,
        });
    }
    out
}

// ── Runner ───────────────────────────────────────────────────────────────

/// Index of the (single) scenario in the seed-derivation formula.
const SCENARIO_IDX: u64 = 0;

struct CellOutcome {
    rows: Vec<ResultRow>,
}

/// Runs the full grid. Cells are independent jobs handed to a worker
/// pool; rows come back in completion order and are sorted into the
/// canonical (scenario, learner, n, rep) order before anything reads
/// them, so threading never changes the output.
pub fn run_experiment(exp: &ExperimentConfig) -> Result<ExperimentOutput> {
    if exp.learners.is_empty() {
        bail!("no learners configured");
    }
    let jobs: Vec<(usize, u32)> = exp
        .n_grid
        .iter()
        .flat_map(|&n| (0..exp.replications).map(move |rep| (n, rep)))
        .collect();

    let workers = exp
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1))
        .clamp(1, jobs.len().max(1));

    let next = AtomicUsize::new(0);
    let collected: Mutex<Vec<ResultRow>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(n, rep)) = jobs.get(j) else { break };
                let outcome = run_cell(exp, n, rep);
                collected.lock().expect("worker poisoned the row buffer").extend(outcome.rows);
            });
        }
    });

    let mut results = collected.into_inner().expect("worker poisoned the row buffer");
    results.sort_by(|a, b| {
        (&a.scenario, &a.learner, a.n, a.rep).cmp(&(&b.scenario, &b.learner, b.n, b.rep))
    });
    let summary = summarize(&results);
    Ok(ExperimentOutput { results, summary })
}

/// Writes `results.csv` and `summary.csv` under the configured output
/// directory, creating it if needed.
pub fn write_experiment(exp: &ExperimentConfig, out: &ExperimentOutput) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(&exp.output_dir)
        .with_context(|| format!("creating {}", exp.output_dir.display()))?;
    let results_path = exp.output_dir.join("results.csv");
    let summary_path = exp.output_dir.join("summary.csv");
    std::fs::write(&results_path, render_results_csv(&out.results))
        .with_context(|| format!("writing {}", results_path.display()))?;
    std::fs::write(&summary_path, render_summary_csv(&out.summary))
        .with_context(|| format!("writing {}", summary_path.display()))?;
    Ok((results_path, summary_path))
}

/// One `(n, rep)` cell: generate the shared dataset, fit the oracle,
/// then run every learner on the same data. Cell-level failures taint
/// every row; per-learner failures taint only their own.
fn run_cell(exp: &ExperimentConfig, n: usize, rep: u32) -> CellOutcome {
    let scenario_name = exp.scenario.name();
    let mut rows: Vec<ResultRow> = exp
        .learners
        .iter()
        .map(|l| ResultRow {
            scenario: scenario_name.clone(),
            learner: l.token(),
            n,
            rep,
            seed: row_seed(exp.base_seed, SCENARIO_IDX, &l.token(), n, rep),
            distance: None,
            revenue: None,
            revenue_se: None,
            fit_seconds: 0.0,
            status: String::new(),
        })
        .collect();

    match run_cell_inner(exp, n, rep, &mut rows) {
        Ok(()) => {}
        Err(e) => {
            let msg = format!("error: {}", sanitize(&format!("{e:#}")));
            for row in rows.iter_mut().filter(|r| r.status.is_empty()) {
                row.status = msg.clone();
            }
        }
    }
    CellOutcome { rows }
}

fn run_cell_inner(exp: &ExperimentConfig, n: usize, rep: u32, rows: &mut [ResultRow]) -> Result<()> {
    let scenario = exp
        .scenario
        .instantiate(n, dataset_seed(exp.base_seed, SCENARIO_IDX, n, rep))
        .context("building scenario")?;
    let run = generate(&scenario).context("generating data")?;
    let oracle =
        oracle_policy(&scenario, exp.oracle_draws, &run.feature_means).context("fitting oracle")?;
    let test_features = sample_test_features(&scenario, exp.test_size);

    // Model-based evaluation fits learners on the prescription half and
    // the evaluator on the held-out half.
    let (fit_data, evaluator) = match exp.protocol.kind {
        EvalKind::Analytic => (run.data.clone(), None),
        EvalKind::ModelBased { split_fraction, evaluator } => {
            let (prescription, evaluation) =
                split_prescription_evaluation(&run.data, split_fraction).context("splitting data")?;
            let model = fit_evaluator(evaluator, &evaluation).context("fitting evaluator")?;
            (prescription, Some((evaluation, model)))
        }
    };

    let demand_data = fit_data.stride_subsample(exp.demand_cap);
    let needs_cv_demand = exp.learners.iter().any(LearnerSpec::is_cv);
    let needs_logistic = exp.learners.contains(&LearnerSpec::LogisticDm)
        || (needs_cv_demand && exp.cv_demand == EvaluatorKind::Logistic);
    let needs_kernel = needs_cv_demand && exp.cv_demand == EvaluatorKind::Kernel;
    let logistic: Option<Result<DemandModel, String>> = needs_logistic
        .then(|| fit_logistic_demand(&demand_data).map_err(|e| format!("logistic demand: {e}")));
    let kernel: Option<Result<DemandModel, String>> = needs_kernel
        .then(|| fit_kernel_demand(&demand_data, None).map_err(|e| format!("kernel demand: {e}")));
    let cv_demand = match exp.cv_demand {
        EvaluatorKind::Logistic => &logistic,
        EvaluatorKind::Kernel => &kernel,
    };

    for (learner, row) in exp.learners.iter().zip(rows.iter_mut()) {
        let started = Instant::now();
        match fit_learner(exp, learner, &fit_data, cv_demand, &logistic, row.seed) {
            Ok(policy) => {
                if exp.measure_time {
                    row.fit_seconds = started.elapsed().as_secs_f64();
                }
                row.distance = Some(distance_to_oracle(&policy, &oracle, &test_features));
                match &evaluator {
                    None => {
                        let est =
                            true_expected_revenue(&policy, &scenario, &run.feature_means, exp.n_mc)
                                .context("revenue estimate")?;
                        row.revenue = Some(est.mean);
                        row.revenue_se = Some(est.se);
                    }
                    Some((eval_data, model)) => {
                        let est = model_based_revenue(&policy, eval_data, model)
                            .context("model-based revenue")?;
                        row.revenue = Some(est);
                        row.revenue_se = Some(0.0);
                    }
                }
                row.status = "ok".into();
            }
            Err(e) => {
                row.status = format!("error: {}", sanitize(&format!("{e:#}")));
            }
        }
    }
    Ok(())
}

fn fit_learner(
    exp: &ExperimentConfig,
    learner: &LearnerSpec,
    data: &Dataset,
    cv_demand: &Option<Result<DemandModel, String>>,
    logistic: &Option<Result<DemandModel, String>>,
    seed: u64,
) -> Result<LinearPolicy> {
    let dim = data.feature_dim();
    let convex_cfg = SolverConfig {
        seed,
        init: Some(vec![0.5; dim]),
        weight_cap: exp.weight_cap,
        ..SolverConfig::default()
    };
    let reward_cfg = SolverConfig {
        seed,
        max_iters: exp.nonconvex_evals,
        multistarts: exp.nonconvex_multistarts,
        weight_cap: exp.weight_cap,
        ..SolverConfig::default()
    };
    let demand_of = |slot: &Option<Result<DemandModel, String>>| -> Result<DemandModel> {
        match slot {
            Some(Ok(m)) => Ok(m.clone()),
            Some(Err(msg)) => bail!("{msg}"),
            None => bail!("demand model was not prepared"),
        }
    };
    let cv = |kind: CvLoss| -> Result<LinearPolicy> {
        let demand = demand_of(cv_demand)?;
        let result = cross_validate(
            kind,
            data,
            &demand,
            &default_grid(kind),
            &convex_cfg,
            &CvOptions { eval_cap: Some(exp.eval_cap), holdout: None },
        )?;
        Ok(result.chosen_policy().clone())
    };

    let policy = match learner {
        LearnerSpec::HingeCv => cv(CvLoss::Hinge)?,
        LearnerSpec::QuantileCv => cv(CvLoss::Quantile)?,
        LearnerSpec::EpsCv => cv(CvLoss::EpsInsensitive)?,
        LearnerSpec::Hinge(c) => fit_convex(&LossSpec::hinge(*c)?, data, &convex_cfg)?.policy,
        LearnerSpec::Quantile(t) => fit_convex(&LossSpec::quantile(*t)?, data, &convex_cfg)?.policy,
        LearnerSpec::Eps(c1, c2) => eps_insensitive_policy(data, *c1, *c2, &convex_cfg)?.policy,
        LearnerSpec::LogisticDm => {
            let demand = demand_of(logistic)?;
            direct_method_policy(&demand, data, &reward_cfg)?.policy
        }
        LearnerSpec::KernelIpw(h) => kernel_ipw_policy(data, *h, &reward_cfg)?.policy,
        LearnerSpec::ModelFree => model_free_policy(data, &reward_cfg)?.policy,
    };
    Ok(policy)
}

// ── Tests ────────────────────────────────────────────────────────────────
