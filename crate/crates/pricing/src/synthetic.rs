//! Synthetic posted-price market generator and oracle reference policies.
//!
//! A [`Scenario`] draws features, hidden valuations, and offered prices
//! from three isolated RNG substreams, so regenerating with a different
//! price law reproduces the exact same buyers. Sales follow the posted
//! price rule `Y = 1{P <= V}` and every sample carries the true price
//! density as its propensity, which makes ignorability hold by
//! construction. The oracle policy maximizes empirical revenue on
//! valuation draws the learners never see.

use rand::Rng;
use thiserror::Error;

use crate::data::{DataError, Dataset, LinearPolicy, PropensityModel, Sample};
use crate::numeric::{chunked_sum, derive_seed, seeded_rng};
use crate::solver::{fit_nonconvex, SolverConfig, SolverError};

// ── Errors ───────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid scenario: {detail}")]
    InvalidScenario { detail: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

// ── Scenario description ─────────────────────────────────────────────────

/// Conditional valuation law given the context index `g(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValuationFamily {
    /// `V = g(X) + Uniform(0, 3)`.
    UniformBand,
    /// `V = 5 + Exponential(scale = g(X))`.
    ShiftedExponential,
}

/// Context index shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GKind {
    /// `g(x) = (x1 + x2) / 2`.
    Linear,
    /// `g(x) = (1{x1 >= m1} + 1{x2 >= m2}) / 2` with per-run frozen means.
    Step,
}

/// Axis-aligned uniform box for the feature draw, one `(lo, hi)` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLaw {
    pub bounds: Vec<(f64, f64)>,
}

impl FeatureLaw {
    /// Square two-dimensional box `[lo, hi]^2`.
    pub fn square(lo: f64, hi: f64) -> Self {
        FeatureLaw { bounds: vec![(lo, hi); 2] }
    }
}

/// Full description of one synthetic market.
///
/// `seed` drives four substreams (features, valuations, prices, oracle)
/// so any one ingredient can be regenerated counterfactually without
/// disturbing the others.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub valuation_family: ValuationFamily,
    pub g_kind: GKind,
    pub feature_law: FeatureLaw,
    pub price_law: PropensityModel,
    pub n: usize,
    pub seed: u64,
}

const FEATURE_STREAM: u64 = 0x6665_6174;
const VALUATION_STREAM: u64 = 0x7661_6c73;
const PRICE_STREAM: u64 = 0x7072_6373;
const TEST_STREAM: u64 = 0x7465_7374;
const ORACLE_STREAM: u64 = 0x6f72_636c;

impl Scenario {
    /// Standard uniform-band market: features on `[1, 2]^2`, prices
    /// uniform on `[1, 3]` (so every propensity is exactly 0.5).
    pub fn uniform_band(g_kind: GKind, n: usize, seed: u64) -> Result<Self, SyntheticError> {
        Ok(Scenario {
            valuation_family: ValuationFamily::UniformBand,
            g_kind,
            feature_law: FeatureLaw::square(1.0, 2.0),
            price_law: PropensityModel::uniform(1.0, 3.0)?,
            n,
            seed,
        })
    }

    /// Standard shifted-exponential market: features on `[1, 5]^2`,
    /// price law supplied by the caller.
    pub fn shifted_exponential(
        g_kind: GKind,
        price_law: PropensityModel,
        n: usize,
        seed: u64,
    ) -> Result<Self, SyntheticError> {
        let s = Scenario {
            valuation_family: ValuationFamily::ShiftedExponential,
            g_kind,
            feature_law: FeatureLaw::square(1.0, 5.0),
            price_law,
            n,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        if self.n == 0 {
            return Err(SyntheticError::InvalidScenario { detail: "n must be positive".into() });
        }
        if self.feature_law.bounds.len() != 2 {
            return Err(SyntheticError::InvalidScenario {
                detail: format!(
                    "context index needs exactly 2 features, got a {}-dim box",
                    self.feature_law.bounds.len()
                ),
            });
        }
        for &(lo, hi) in &self.feature_law.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SyntheticError::InvalidScenario {
                    detail: format!("feature bounds need lo < hi, got [{lo}, {hi}]"),
                });
            }
            // Nonnegative features keep g(x) >= 0, which the valuation
            // sampler and the closed-form pointwise optimum rely on.
            if self.g_kind == GKind::Linear && lo < 0.0 {
                return Err(SyntheticError::InvalidScenario {
                    detail: format!("linear index needs nonnegative features, got lo = {lo}"),
                });
            }
        }
        Ok(())
    }

    /// Context index at `x`. `feature_means` is only read for the step
    /// shape; pass the frozen means of the generating run.
    pub fn g_value(&self, x: &[f64], feature_means: &[f64]) -> f64 {
        match self.g_kind {
            GKind::Linear => g_linear(x),
            GKind::Step => g_step(x, feature_means),
        }
    }

    /// Analytic conditional survival `P(V >= p | X = x)`.
    pub fn conditional_survival(&self, x: &[f64], price: f64, feature_means: &[f64]) -> f64 {
        let g = self.g_value(x, feature_means);
        match self.valuation_family {
            ValuationFamily::UniformBand => ((g + 3.0 - price) / 3.0).clamp(0.0, 1.0),
            ValuationFamily::ShiftedExponential => {
                if price <= 5.0 {
                    1.0
                } else {
                    // scale 0 degenerates to a point mass at 5; the
                    // division then yields +inf and the survival 0.
                    (-(price - 5.0) / g).exp()
                }
            }
        }
    }

    /// Revenue-maximizing price for the conditional valuation law at `x`.
    ///
    /// Uniform band: the parabola `p (g + 3 - p) / 3` peaks at
    /// `(g + 3) / 2` while that point stays above `g`, i.e. for `g <= 3`;
    /// beyond that the certain sale at `p = g` wins. Shifted exponential:
    /// revenue grows linearly up to 5, then `p e^{-(p-5)/g}` falls as long
    /// as `g <= 5`, so the boundary price 5 is optimal (and `p = g` past
    /// that).
    pub fn pointwise_optimal_price(&self, x: &[f64], feature_means: &[f64]) -> f64 {
        let g = self.g_value(x, feature_means);
        match self.valuation_family {
            ValuationFamily::UniformBand => {
                if g <= 3.0 {
                    (g + 3.0) / 2.0
                } else {
                    g
                }
            }
            ValuationFamily::ShiftedExponential => g.max(5.0),
        }
    }
}

/// `g(x) = (x1 + x2) / 2`.
pub fn g_linear(x: &[f64]) -> f64 {
    0.5 * (x[0] + x[1])
}

/// `g(x) = (1{x1 >= m1} + 1{x2 >= m2}) / 2`.
pub fn g_step(x: &[f64], feature_means: &[f64]) -> f64 {
    let hit = |i: usize| -> f64 {
        if x[i] >= feature_means[i] {
            1.0
        } else {
            0.0
        }
    };
    0.5 * (hit(0) + hit(1))
}

// ── Generation ───────────────────────────────────────────────────────────

/// One generated market: the observable transaction log plus the hidden
/// valuations and the frozen feature means that define the step index.
#[derive(Debug, Clone)]
pub struct SyntheticRun {
    pub data: Dataset,
    pub valuations: Vec<f64>,
    pub feature_means: Vec<f64>,
}

fn draw_features<R: Rng>(law: &FeatureLaw, rng: &mut R) -> Vec<f64> {
    law.bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()
}

fn draw_valuation<R: Rng>(family: ValuationFamily, g: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    match family {
        ValuationFamily::UniformBand => g + 3.0 * u,
        // inverse-CDF standard exponential; u < 1 keeps it finite
        ValuationFamily::ShiftedExponential => 5.0 + g * (-(1.0 - u).ln()),
    }
}

/// Draws the scenario's market. All features come first so the step
/// means freeze before any valuation is sampled.
pub fn generate(scenario: &Scenario) -> Result<SyntheticRun, SyntheticError> {
    scenario.validate()?;
    let mut feat_rng = seeded_rng(scenario.seed, &[FEATURE_STREAM]);
    let mut val_rng = seeded_rng(scenario.seed, &[VALUATION_STREAM]);
    let mut price_rng = seeded_rng(scenario.seed, &[PRICE_STREAM]);

    let n = scenario.n;
    let dim = scenario.feature_law.bounds.len();
    let features: Vec<Vec<f64>> =
        (0..n).map(|_| draw_features(&scenario.feature_law, &mut feat_rng)).collect();
    let mut feature_means = vec![0.0; dim];
    for x in &features {
        for (m, v) in feature_means.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in &mut feature_means {
        *m /= n as f64;
    }

    let valuations: Vec<f64> = features
        .iter()
        .map(|x| {
            let g = scenario.g_value(x, &feature_means);
            draw_valuation(scenario.valuation_family, g, &mut val_rng)
        })
        .collect();

    let samples: Vec<Sample> = features
        .into_iter()
        .zip(&valuations)
        .map(|(x, &v)| {
            let price = scenario.price_law.sample(&mut price_rng);
            Sample {
                features: x,
                price,
                sold: if price <= v { 1.0 } else { 0.0 },
                propensity: Some(scenario.price_law.density(price)),
            }
        })
        .collect();

    Ok(SyntheticRun { data: Dataset::new(samples, dim)?, valuations, feature_means })
}

/// Fresh feature draws for policy evaluation, from a stream disjoint
/// from the training draws.
pub fn sample_test_features(scenario: &Scenario, count: usize) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(scenario.seed, &[TEST_STREAM]);
    (0..count).map(|_| draw_features(&scenario.feature_law, &mut rng)).collect()
}

// ── Oracle reference policies ────────────────────────────────────────────

/// Revenue-optimal linear policy fitted directly on valuation draws.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    pub policy: LinearPolicy,
    /// Empirical revenue `mean pi(x) 1{pi(x) <= v}` on the fitting draws.
    pub valuation_objective: f64,
}

/// Maximizes empirical revenue on `(features, valuations)` pairs over
/// linear no-intercept policies. `price_targets` seeds the search: the
/// least-squares projection of those targets onto the feature span is
/// the first start, followed by an all-0.5 start and the solver's own
/// random restarts.
pub fn fit_valuation_optimal(
    features: &[Vec<f64>],
    valuations: &[f64],
    price_targets: &[f64],
    cfg: &SolverConfig,
) -> Result<OraclePolicy, SyntheticError> {
    if features.is_empty() || features.len() != valuations.len() || features.len() != price_targets.len() {
        return Err(SyntheticError::InvalidScenario {
            detail: format!(
                "oracle fit needs equal-length nonempty draws, got {} features, {} valuations, {} targets",
                features.len(),
                valuations.len(),
                price_targets.len()
            ),
        });
    }
    let m = features[0].len();
    // The dataset exists only to give the pattern search its step and
    // dimension; prices carry the valuations so steps match their scale.
    let samples: Vec<Sample> = features
        .iter()
        .zip(valuations)
        .map(|(x, &v)| Sample { features: x.clone(), price: v, sold: 1.0, propensity: None })
        .collect();
    let data = Dataset::new(samples, m)?;

    let objective = |p: &LinearPolicy| {
        let terms: Vec<f64> = features
            .iter()
            .zip(valuations)
            .map(|(x, &v)| {
                let price = p.price(x);
                if price <= v {
                    price
                } else {
                    0.0
                }
            })
            .collect();
        chunked_sum(terms.len(), |i| terms[i]) / terms.len() as f64
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(ls) = least_squares_fit(features, price_targets) {
        starts.push(ls);
    }
    starts.push(vec![0.5; m]);
    let fit = fit_nonconvex(objective, &data, cfg, Some(&starts))?;
    Ok(OraclePolicy { policy: fit.policy, valuation_objective: fit.objective })
}

/// Fits the oracle for a scenario on `n_oracle` hidden draws from the
/// oracle substream. `feature_means` must be the frozen means of the
/// training run when the index is a step (ignored for the linear index).
pub fn oracle_policy(
    scenario: &Scenario,
    n_oracle: usize,
    feature_means: &[f64],
) -> Result<OraclePolicy, SyntheticError> {
    scenario.validate()?;
    if n_oracle < 10_000 {
        return Err(SyntheticError::InvalidScenario {
            detail: format!("oracle needs at least 10000 draws, got {n_oracle}"),
        });
    }
    if scenario.g_kind == GKind::Step && feature_means.len() != scenario.feature_law.bounds.len() {
        return Err(SyntheticError::InvalidScenario {
            detail: "step index needs the frozen feature means of the training run".into(),
        });
    }
    let mut feat_rng = seeded_rng(scenario.seed, &[ORACLE_STREAM, 1]);
    let mut val_rng = seeded_rng(scenario.seed, &[ORACLE_STREAM, 2]);
    let features: Vec<Vec<f64>> =
        (0..n_oracle).map(|_| draw_features(&scenario.feature_law, &mut feat_rng)).collect();
    let valuations: Vec<f64> = features
        .iter()
        .map(|x| {
            let g = scenario.g_value(x, feature_means);
            draw_valuation(scenario.valuation_family, g, &mut val_rng)
        })
        .collect();
    let targets: Vec<f64> =
        features.iter().map(|x| scenario.pointwise_optimal_price(x, feature_means)).collect();
    let cfg = SolverConfig { seed: derive_seed(scenario.seed, &[ORACLE_STREAM, 3]), ..Default::default() };
    fit_valuation_optimal(&features, &valuations, &targets, &cfg)
}

/// Least-squares `theta` for `<theta, x> ~ target`, or None when the
/// normal equations are singular (collinear features).
fn least_squares_fit(features: &[Vec<f64>], targets: &[f64]) -> Option<Vec<f64>> {
    let m = features[0].len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (x, &t) in features.iter().zip(targets) {
        for i in 0..m {
            b[i] += x[i] * t;
            for j in 0..m {
                a[i][j] += x[i] * x[j];
            }
        }
    }
    solve_linear(a, b)
}

/// Gaussian elimination with partial pivoting, sized for tiny systems.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for col in (0..m).rev() {
        let mut acc = b[col];
        for k in col + 1..m {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

// ── Distance to the oracle ───────────────────────────────────────────────

/// Mean absolute price gap `mean |pi_oracle(x) - pi(x)|` over a fresh
/// test feature set.
pub fn distance_to_oracle(
    candidate: &LinearPolicy,
    oracle: &OraclePolicy,
    test_features: &[Vec<f64>],
) -> f64 {
    assert!(!test_features.is_empty(), "empty test feature set");
    let gaps: Vec<f64> = test_features
        .iter()
        .map(|x| (oracle.policy.price(x) - candidate.price(x)).abs())
        .collect();
    chunked_sum(gaps.len(), |i| gaps[i]) / gaps.len() as f64
}

// ── Tests ────────────────────────────────────────────────────────────────
