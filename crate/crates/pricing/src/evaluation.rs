//! Policy evaluation: exact expected revenue under known synthetic
//! markets, and the split-sample model-based protocol for settings
//! where only transaction data exists.
//!
//! The analytic path Monte-Carlos fresh contexts and uses the
//! scenario's closed-form conditional survival, so the only noise is
//! the context draw. The model-based path fits a demand model on an
//! evaluation split that the prescribing learner never saw and scores
//! `mean pi(x) f(x, pi(x))`.

use thiserror::Error;

use crate::data::{DataError, Dataset, LinearPolicy};
use crate::numeric::{chunked_sum, mean_and_pop_sd, seeded_rng};
use crate::policies::{fit_kernel_demand, fit_logistic_demand, DemandModel, PolicyError};
use crate::synthetic::{Scenario, SyntheticError};

// ── Errors ───────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

// ── Evaluation protocols ─────────────────────────────────────────────────

/// Demand family used by the model-based evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluatorKind {
    Logistic,
    Kernel,
}

#[derive(Debug, Clone)]
pub enum EvalKind {
    /// Score policies with the scenario's closed-form survival.
    Analytic,
    /// Split the data, fit an evaluator demand model on the held-out
    /// part, and score policies against it.
    ModelBased { split_fraction: f64, evaluator: EvaluatorKind },
}

#[derive(Debug, Clone)]
pub struct EvalProtocol {
    pub kind: EvalKind,
    /// Fresh context draws used for distance and analytic revenue.
    pub test_size: usize,
}

impl EvalProtocol {
    pub fn analytic(test_size: usize) -> Self {
        EvalProtocol { kind: EvalKind::Analytic, test_size }
    }

    pub fn model_based(split_fraction: f64, evaluator: EvaluatorKind, test_size: usize) -> Self {
        EvalProtocol { kind: EvalKind::ModelBased { split_fraction, evaluator }, test_size }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.test_size == 0 {
            return Err(EvalError::Invalid("test_size must be positive".into()));
        }
        if let EvalKind::ModelBased { split_fraction, .. } = self.kind {
            if !(split_fraction > 0.0 && split_fraction < 1.0) {
                return Err(EvalError::Invalid(format!(
                    "split fraction must lie in (0, 1), got {split_fraction}"
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic prefix split into (prescription, evaluation) parts.
/// Generated data is exchangeable, so a prefix split is unbiased.
pub fn split_prescription_evaluation(
    data: &Dataset,
    split_fraction: f64,
) -> Result<(Dataset, Dataset), EvalError> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(EvalError::Invalid(format!(
            "split fraction must lie in (0, 1), got {split_fraction}"
        )));
    }
    let n = data.len();
    if n < 2 {
        return Err(EvalError::Invalid(format!("need at least 2 samples to split, got {n}")));
    }
    let k = ((n as f64 * split_fraction).round() as usize).clamp(1, n - 1);
    let dim = data.feature_dim();
    let prescription = Dataset::new(data.samples()[..k].to_vec(), dim)?;
    let evaluation = Dataset::new(data.samples()[k..].to_vec(), dim)?;
    Ok((prescription, evaluation))
}

/// Fits the requested evaluator family on the evaluation split.
pub fn fit_evaluator(kind: EvaluatorKind, data: &Dataset) -> Result<DemandModel, EvalError> {
    Ok(match kind {
        EvaluatorKind::Logistic => fit_logistic_demand(data)?,
        EvaluatorKind::Kernel => fit_kernel_demand(data, None)?,
    })
}

// ── Revenue estimates ────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueEstimate {
    pub mean: f64,
    /// Monte-Carlo standard error of the mean.
    pub se: f64,
}

const REVENUE_STREAM: u64 = 0x7265_7631;

/// Expected revenue of `policy` under the scenario's true conditional
/// survival, by Monte-Carlo over `n_mc` fresh contexts. `feature_means`
/// must be the frozen means of the training run for step-index
/// scenarios (ignored otherwise).
pub fn true_expected_revenue(
    policy: &LinearPolicy,
    scenario: &Scenario,
    feature_means: &[f64],
    n_mc: usize,
) -> Result<RevenueEstimate, EvalError> {
    scenario.validate()?;
    if n_mc == 0 {
        return Err(EvalError::Invalid("n_mc must be positive".into()));
    }
    let mut rng = seeded_rng(scenario.seed, &[REVENUE_STREAM]);
    let terms: Vec<f64> = (0..n_mc)
        .map(|_| {
            let x: Vec<f64> = scenario
                .feature_law
                .bounds
                .iter()
                .map(|&(lo, hi)| rand::Rng::gen_range(&mut rng, lo..hi))
                .collect();
            let price = policy.price(&x);
            price * scenario.conditional_survival(&x, price, feature_means)
        })
        .collect();
    let (mean, sd) = mean_and_pop_sd(&terms);
    Ok(RevenueEstimate { mean, se: sd / (n_mc as f64).sqrt() })
}

/// Revenue of `policy` under an arbitrary demand estimate
/// `f(x, p) -> purchase probability`: `mean pi(x) f(x, pi(x))`.
pub fn model_based_revenue_with<F: Fn(&[f64], f64) -> f64>(
    policy: &LinearPolicy,
    eval_data: &Dataset,
    demand: F,
) -> Result<f64, EvalError> {
    if eval_data.is_empty() {
        return Err(EvalError::Invalid("empty evaluation dataset".into()));
    }
    let samples = eval_data.samples();
    let total = chunked_sum(samples.len(), |i| {
        let price = policy.price(&samples[i].features);
        price * demand(&samples[i].features, price)
    });
    Ok(total / samples.len() as f64)
}

/// [`model_based_revenue_with`] under a fitted demand model.
pub fn model_based_revenue(
    policy: &LinearPolicy,
    eval_data: &Dataset,
    evaluator: &DemandModel,
) -> Result<f64, EvalError> {
    model_based_revenue_with(policy, eval_data, |x, p| evaluator.predict(x, p))
}

// ── Tests ────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::policies::LogisticDemand;
    use crate::solver::SolverConfig;
    use crate::synthetic::{generate, oracle_policy, GKind, Scenario};

    #[test]
    fn protocol_validation() {
        assert!(EvalProtocol::analytic(100).validate().is_ok());
        assert!(EvalProtocol::analytic(0).validate().is_err());
        for bad in [0.0, 1.0, -0.5, 1.5] {
            let p = EvalProtocol::model_based(bad, EvaluatorKind::Kernel, 10);
            assert!(p.validate().is_err(), "accepted split fraction {bad}");
        }
    }

    #[test]
    fn split_is_a_disjoint_cover() {
        let scenario = Scenario::uniform_band(GKind::Linear, 100, 3).unwrap();
        let data = generate(&scenario).unwrap().data;
        let (train, eval) = split_prescription_evaluation(&data, 0.3).unwrap();
        assert_eq!(train.len(), 30);
        assert_eq!(eval.len(), 70);
        assert_eq!(train.samples()[0].price, data.samples()[0].price);
        assert_eq!(eval.samples()[0].price, data.samples()[30].price);
        assert!(split_prescription_evaluation(&data, 0.0).is_err());
    }

    #[test]
    fn zero_policy_earns_nothing() {
        let scenario = Scenario::uniform_band(GKind::Linear, 10, 3).unwrap();
        let policy = LinearPolicy::new(vec![0.0, 0.0]);
        let est = true_expected_revenue(&policy, &scenario, &[], 5_000).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.se, 0.0);
    }

    #[test]
    fn constant_index_matches_closed_form() {
        // step index with thresholds below the box: g(x) = 1 everywhere,
        // so a constant-price policy has deterministic revenue
        let scenario = Scenario::uniform_band(GKind::Step, 10, 5).unwrap();
        let means = [-1e9, -1e9];
        let policy = LinearPolicy::with_intercept(vec![0.0, 0.0], 2.0);
        let est = true_expected_revenue(&policy, &scenario, &means, 2_000).unwrap();
        assert!((est.mean - 2.0 * (2.0 / 3.0)).abs() < 1e-12);
        assert!(est.se < 1e-12);
    }

    #[test]
    fn linear_index_revenue_matches_exact_integral() {
        // policy pi(x) = x1 + 1 on the uniform band with linear index:
        // E[(x1 + 1)(2 + (x2 - x1)/2)/3] = 119/72 by direct integration
        let scenario = Scenario::uniform_band(GKind::Linear, 10, 5).unwrap();
        let policy = LinearPolicy::with_intercept(vec![1.0, 0.0], 1.0);
        let est = true_expected_revenue(&policy, &scenario, &[], 100_000).unwrap();
        let exact = 119.0 / 72.0;
        assert!(
            (est.mean - exact).abs() <= 3.0 * est.se,
            "mc {} vs exact {exact} (se {})",
            est.mean,
            est.se
        );
        assert!(est.se > 0.0 && est.se < 0.01);
    }

    #[test]
    fn model_based_revenue_trivials_and_linearity() {
        let scenario = Scenario::uniform_band(GKind::Linear, 200, 9).unwrap();
        let data = generate(&scenario).unwrap().data;
        let policy = LinearPolicy::new(vec![0.7, 0.6]);
        let mean_price: f64 =
            data.samples().iter().map(|s| policy.price(&s.features)).sum::<f64>()
                / data.len() as f64;

        // saturated evaluators: +800 bias predicts 1, -800 predicts 0
        let sure = |b: f64| {
            DemandModel::Logistic(LogisticDemand {
                weights: vec![0.0, 0.0, 0.0, b],
                separation_warning: false,
                iterations: 0,
            })
        };
        let one = model_based_revenue(&policy, &data, &sure(800.0)).unwrap();
        assert!((one - mean_price).abs() < 1e-12);
        assert_eq!(model_based_revenue(&policy, &data, &sure(-800.0)).unwrap(), 0.0);

        // the estimate is linear in the demand estimate
        let f1 = |x: &[f64], p: f64| 0.3 + 0.1 * (x[0] - p).tanh();
        let f2 = |x: &[f64], p: f64| 0.5 - 0.05 * (x[1] * p).sin();
        let blend = model_based_revenue_with(&policy, &data, |x, p| 0.5 * (f1(x, p) + f2(x, p)))
            .unwrap();
        let separate = 0.5
            * (model_based_revenue_with(&policy, &data, f1).unwrap()
                + model_based_revenue_with(&policy, &data, f2).unwrap());
        assert!((blend - separate).abs() < 1e-12);

        // identical policies get identical estimates
        let twin = LinearPolicy::new(vec![0.7, 0.6]);
        let evaluator = sure(800.0);
        assert_eq!(
            model_based_revenue(&policy, &data, &evaluator).unwrap(),
            model_based_revenue(&twin, &data, &evaluator).unwrap()
        );
    }

    #[test]
    fn oracle_dominates_other_linear_policies() {
        let scenario = Scenario::uniform_band(GKind::Linear, 2_000, 13).unwrap();
        let run = generate(&scenario).unwrap();
        let oracle = oracle_policy(&scenario, 10_000, &[]).unwrap();
        let o = true_expected_revenue(&oracle.policy, &scenario, &[], 20_000).unwrap();

        let hinge = crate::solver::fit_convex(
            &crate::losses::LossSpec::hinge(0.8).unwrap(),
            &run.data,
            &SolverConfig::default(),
        )
        .unwrap();
        let mut scaled = oracle.policy.clone();
        for t in &mut scaled.theta {
            *t *= 1.15;
        }
        let candidates = [
            LinearPolicy::new(vec![0.5, 0.5]),
            LinearPolicy::new(vec![1.0, 0.0]),
            scaled,
            hinge.policy,
        ];
        for cand in &candidates {
            let c = true_expected_revenue(cand, &scenario, &[], 20_000).unwrap();
            assert!(
                o.mean + 3.0 * (o.se + c.se) >= c.mean,
                "candidate {:?} earns {} vs oracle {}",
                cand.theta,
                c.mean,
                o.mean
            );
        }
    }

    #[test]
    fn model_based_protocol_end_to_end() {
        // fit an evaluator on the held-out split and check it scores a
        // sane policy above a bad one
        let scenario = Scenario::uniform_band(GKind::Linear, 4_000, 17).unwrap();
        let data = generate(&scenario).unwrap().data;
        let (_, eval) = split_prescription_evaluation(&data, 0.5).unwrap();
        let evaluator = fit_evaluator(EvaluatorKind::Logistic, &eval).unwrap();
        let sane = LinearPolicy::new(vec![0.75, 0.75]);
        let silly = LinearPolicy::with_intercept(vec![0.0, 0.0], 50.0);
        let good = model_based_revenue(&sane, &eval, &evaluator).unwrap();
        let bad = model_based_revenue(&silly, &eval, &evaluator).unwrap();
        assert!(good > bad, "sane {good} vs overpriced {bad}");

        let mut samples = Vec::new();
        let empty = Dataset::new(samples.drain(..).collect::<Vec<Sample>>(), 2).unwrap();
        assert!(model_based_revenue(&sane, &empty, &evaluator).is_err());
    }
}
