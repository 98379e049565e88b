//! Valuation distributions represented by their survival function
//! `F̄(p) = P(V >= p)`, with machinery for expected revenue and the three
//! prices the theory turns on: the revenue-optimal price `p*`, the
//! hinge-optimal price `p_h = c·E[V]`, and the quantile-optimal price `p_q`
//! solving `∫₀^{p_q} F̄ = (1−τ)·∫₀^∞ F̄`.
//!
//! Survivals are evaluated with the purchase rule `P <= V`, so `F̄(p)` is
//! the probability of selling at price `p` and is left-inclusive at jumps:
//! a point mass at `v` still buys at price exactly `v`. Revenue at a
//! terminal jump therefore uses the supremum convention automatically.

use std::sync::Arc;

use thiserror::Error;

use crate::numeric::{adaptive_simpson, grid_then_golden_max};

#[derive(Debug, Error)]
pub enum ValuationError {
    #[error("invalid distribution parameter: {0}")]
    InvalidParam(String),
    #[error("mean valuation is not finite: {0}")]
    InfiniteMean(String),
}

/// Behavior of the survival beyond the bounded part of the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// Survival is exactly zero beyond the bounded end.
    None,
    /// Survival decays as `F̄(end)·exp(−rate·(p − end))` beyond the end.
    Exponential { rate: f64 },
}

#[derive(Clone)]
enum Kind {
    /// `V ~ Uniform(a, b)`.
    Uniform { a: f64, b: f64 },
    /// Survival 1 on `[0, location]`, then `exp(−(p−location)/scale)`.
    /// `scale` is the mean excess above `location`.
    ShiftedExponential { location: f64, scale: f64 },
    /// Point mass at `v`.
    StepAt { v: f64 },
    /// Survival `exp(−rate·p)` on `[0, cutoff]`, zero beyond: exponential
    /// decay with a terminal jump to zero. `rate = 0` degenerates to a
    /// point mass at the cutoff.
    PiecewiseExponential { rate: f64, cutoff: f64 },
    /// User-supplied survival on `[0, upper]`, continued by the declared
    /// tail beyond (zero for `Tail::None`).
    Custom { survival: Arc<dyn Fn(f64) -> f64 + Send + Sync>, upper: f64, tail: Tail },
}

impl std::fmt::Debug for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kind::Uniform { a, b } => write!(f, "Uniform({a}, {b})"),
            Kind::ShiftedExponential { location, scale } => {
                write!(f, "ShiftedExponential(location={location}, scale={scale})")
            }
            Kind::StepAt { v } => write!(f, "StepAt({v})"),
            Kind::PiecewiseExponential { rate, cutoff } => {
                write!(f, "PiecewiseExponential(rate={rate}, cutoff={cutoff})")
            }
            Kind::Custom { upper, tail, .. } => write!(f, "Custom(upper={upper}, tail={tail:?})"),
        }
    }
}

/// A valuation distribution described by its survival function.
#[derive(Debug, Clone)]
pub struct ValuationDistribution {
    kind: Kind,
}

const SURVIVAL_FLOOR: f64 = 1e-12;

impl ValuationDistribution {
    pub fn uniform(a: f64, b: f64) -> Result<Self, ValuationError> {
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
            return Err(ValuationError::InvalidParam(format!("uniform needs 0 <= a < b, got [{a}, {b}]")));
        }
        Ok(Self { kind: Kind::Uniform { a, b } })
    }

    pub fn shifted_exponential(location: f64, scale: f64) -> Result<Self, ValuationError> {
        if !(location.is_finite() && location >= 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(ValuationError::InvalidParam(format!(
                "shifted exponential needs location >= 0 and scale > 0, got ({location}, {scale})"
            )));
        }
        Ok(Self { kind: Kind::ShiftedExponential { location, scale } })
    }

    pub fn step_at(v: f64) -> Result<Self, ValuationError> {
        if !(v.is_finite() && v > 0.0) {
            return Err(ValuationError::InvalidParam(format!("step needs v > 0, got {v}")));
        }
        Ok(Self { kind: Kind::StepAt { v } })
    }

    pub fn piecewise_exponential(rate: f64, cutoff: f64) -> Result<Self, ValuationError> {
        if !(rate.is_finite() && rate >= 0.0 && cutoff.is_finite() && cutoff > 0.0) {
            return Err(ValuationError::InvalidParam(format!(
                "piecewise exponential needs rate >= 0 and cutoff > 0, got ({rate}, {cutoff})"
            )));
        }
        Ok(Self { kind: Kind::PiecewiseExponential { rate, cutoff } })
    }

    /// Wraps a user-supplied survival, truncated to zero beyond `upper`.
    /// The survival must satisfy `f(0) = 1` and be non-increasing; use
    /// [`survival_logconcavity_check`] to probe log-concavity.
    pub fn from_survival(
        survival: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        upper: f64,
    ) -> Result<Self, ValuationError> {
        Self::from_survival_with_tail(survival, upper, Tail::None)
    }

    /// Like [`Self::from_survival`] but continues beyond `upper` with a
    /// declared tail: `F̄(p) = F̄(upper)·exp(−rate·(p−upper))` for an
    /// exponential tail.
    pub fn from_survival_with_tail(
        survival: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        upper: f64,
        tail: Tail,
    ) -> Result<Self, ValuationError> {
        if !(upper.is_finite() && upper > 0.0) {
            return Err(ValuationError::InvalidParam(format!("custom survival needs finite upper > 0, got {upper}")));
        }
        Ok(Self { kind: Kind::Custom { survival, upper, tail } })
    }

    /// Survival `P(V >= p)`; left-inclusive at jumps.
    pub fn survival(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 1.0;
        }
        match &self.kind {
            Kind::Uniform { a, b } => ((b - p) / (b - a)).clamp(0.0, 1.0),
            Kind::ShiftedExponential { location, scale } => {
                if p <= *location {
                    1.0
                } else {
                    (-(p - location) / scale).exp()
                }
            }
            Kind::StepAt { v } => {
                if p <= *v {
                    1.0
                } else {
                    0.0
                }
            }
            Kind::PiecewiseExponential { rate, cutoff } => {
                if p <= *cutoff {
                    (-rate * p).exp()
                } else {
                    0.0
                }
            }
            Kind::Custom { survival, upper, tail } => {
                if p > *upper {
                    match *tail {
                        Tail::None => 0.0,
                        Tail::Exponential { rate } => {
                            survival(*upper).clamp(0.0, 1.0) * (-rate * (p - upper)).exp()
                        }
                    }
                } else {
                    survival(p).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// End of the bounded part of the support and the tail beyond it.
    fn bounded_end(&self) -> (f64, Tail) {
        match &self.kind {
            Kind::Uniform { b, .. } => (*b, Tail::None),
            Kind::ShiftedExponential { location, scale } => (*location, Tail::Exponential { rate: 1.0 / scale }),
            Kind::StepAt { v } => (*v, Tail::None),
            Kind::PiecewiseExponential { cutoff, .. } => (*cutoff, Tail::None),
            Kind::Custom { upper, tail, .. } => (*upper, *tail),
        }
    }

    /// Price beyond which the survival is below the numeric floor.
    fn effective_upper(&self) -> f64 {
        let (end, tail) = self.bounded_end();
        match tail {
            Tail::None => end,
            Tail::Exponential { rate } if rate > 0.0 => {
                let s_end = self.survival(end).max(SURVIVAL_FLOOR);
                end + (s_end / SURVIVAL_FLOOR).ln() / rate
            }
            Tail::Exponential { .. } => end,
        }
    }

    /// Prices where the survival jumps (terminal point masses).
    fn jump_points(&self) -> Vec<f64> {
        match &self.kind {
            Kind::StepAt { v } => vec![*v],
            Kind::PiecewiseExponential { cutoff, .. } => vec![*cutoff],
            // A custom survival truncated with no tail may end with
            // positive mass at its upper point.
            Kind::Custom { upper, tail: Tail::None, .. } => vec![*upper],
            _ => vec![],
        }
    }

    /// Boundaries of smooth pieces of the survival inside `[0, end]`.
    fn smooth_breaks(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Uniform { a, b } => vec![0.0, *a, *b],
            Kind::ShiftedExponential { location, .. } => vec![0.0, *location],
            Kind::StepAt { v } => vec![0.0, *v],
            Kind::PiecewiseExponential { cutoff, .. } => vec![0.0, *cutoff],
            Kind::Custom { upper, .. } => vec![0.0, *upper],
        }
    }

    /// Expected revenue `p · F̄(p)` at a posted price.
    pub fn expected_revenue(&self, p: f64) -> f64 {
        if p < 0.0 {
            return 0.0;
        }
        p * self.survival(p)
    }

    /// `∫₀^x F̄` with `x` inside the bounded part handled by piecewise
    /// adaptive quadrature and the exponential tail in closed form.
    fn cumulative_survival(&self, x: f64) -> f64 {
        let (end, tail) = self.bounded_end();
        let bounded_x = x.min(end);
        let mut total = 0.0;
        let mut prev = 0.0;
        for b in self.smooth_breaks().into_iter().skip(1) {
            let hi = b.min(bounded_x);
            if hi > prev {
                total += adaptive_simpson(|p| self.survival(p), prev, hi, 1e-11, 10_000);
            }
            prev = b;
            if prev >= bounded_x {
                break;
            }
        }
        if x > end {
            if let Tail::Exponential { rate } = tail {
                let s_end = self.survival(end);
                total += s_end * (1.0 - (-rate * (x - end)).exp()) / rate;
            }
        }
        total
    }

    /// Mean valuation `E[V] = ∫₀^∞ F̄`.
    pub fn mean_valuation(&self) -> Result<f64, ValuationError> {
        let (end, tail) = self.bounded_end();
        let mut total = self.cumulative_survival(end);
        match tail {
            Tail::None => {}
            Tail::Exponential { rate } => {
                if rate <= 0.0 {
                    return Err(ValuationError::InfiniteMean(format!("exponential tail rate {rate} <= 0")));
                }
                total += self.survival(end) / rate;
            }
        }
        if !total.is_finite() {
            return Err(ValuationError::InfiniteMean(format!("integral of survival diverged for {:?}", self.kind)));
        }
        Ok(total)
    }

    /// Global maximizer of expected revenue: dense grid scan over the
    /// effective support, golden-section refinement in the bracketing cell,
    /// with jump prices included as candidates. Ties break toward smaller p.
    pub fn optimal_price(&self) -> (f64, f64) {
        let upper = self.effective_upper();
        let n_grid = 10_000;
        let (mut best_p, mut best_r) = grid_then_golden_max(|p| self.expected_revenue(p), 0.0, upper, n_grid);
        // Survival jumps are revenue suprema the grid can miss; the
        // left-inclusive survival evaluates them directly.
        for j in self.jump_points() {
            let r = self.expected_revenue(j);
            if r > best_r || (r == best_r && j < best_p) {
                best_p = j;
                best_r = r;
            }
        }
        (best_p, best_r)
    }

    /// Minimizer of the population hinge risk: `c · E[V]`.
    pub fn hinge_price(&self, c: f64) -> Result<f64, ValuationError> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(ValuationError::InvalidParam(format!("hinge price needs 0 < c <= 1, got {c}")));
        }
        Ok(c * self.mean_valuation()?)
    }

    /// Minimizer of the population quantile risk: the price where the
    /// cumulative survival reaches a `(1−τ)` share of its total, found by
    /// monotone bisection.
    pub fn quantile_price(&self, tau: f64) -> Result<f64, ValuationError> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(ValuationError::InvalidParam(format!("quantile price needs 0 < tau < 1, got {tau}")));
        }
        let total = self.mean_valuation()?;
        let target = (1.0 - tau) * total;
        let mut lo = 0.0;
        let mut hi = self.effective_upper().max(1e-12);
        // The cumulative reaches `total` only in the limit; expand until the
        // bracket covers the target.
        let mut guard = 0;
        while self.cumulative_survival(hi) < target && guard < 200 {
            hi *= 2.0;
            guard += 1;
        }
        let tol = 1e-9;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let ratio = self.cumulative_survival(mid) / total;
            if (ratio - (1.0 - tau)).abs() <= tol && (hi - lo) <= 1e-9 * (1.0 + hi.abs()) {
                return Ok(mid);
            }
            if ratio < 1.0 - tau {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Numeric check that the survival carries unit probability mass:
    /// quadrature of `−F̄'` over smooth pieces plus exact jump and tail
    /// masses.
    pub fn total_mass_quadrature(&self) -> f64 {
        let (end, tail) = self.bounded_end();
        let h = 1e-6;
        let deriv = |p: f64| -(self.survival(p + h) - self.survival(p - h)) / (2.0 * h);
        let mut mass = 0.0;
        let breaks = self.smooth_breaks();
        for w in breaks.windows(2) {
            let (s, e) = (w[0], w[1].min(end));
            if e <= s {
                continue;
            }
            // Central differences are wrong within h of a kink; patch the
            // margins with exact survival differences.
            let margin = 2.0 * h;
            if e - s > 4.0 * margin {
                mass += self.survival(s) - self.survival(s + margin);
                mass += adaptive_simpson(deriv, s + margin, e - margin, 1e-9, 10_000);
                mass += self.survival(e - margin) - self.survival(e);
            } else {
                mass += self.survival(s) - self.survival(e);
            }
        }
        // Terminal jump at the bounded end (step-like kinds).
        let beyond = match tail {
            Tail::None => 0.0,
            Tail::Exponential { .. } => self.survival(end),
        };
        mass += self.survival(end) - beyond;
        // Exponential tail carries exactly the survival mass at its start.
        mass + beyond
    }
}

// ── Log-concavity probe ──────────────────────────────────────────────────

/// One violated midpoint inequality: `ln F̄(mid) < ½(ln F̄(a)+ln F̄(b)) − 1e-9`.
#[derive(Debug, Clone)]
pub struct LogConcavityViolation {
    pub a: f64,
    pub mid: f64,
    pub b: f64,
    pub deficit: f64,
}

#[derive(Debug, Clone)]
pub struct LogConcavityReport {
    pub checked_triples: usize,
    pub violations: Vec<LogConcavityViolation>,
}

impl LogConcavityReport {
    pub fn is_log_concave(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tests the midpoint inequality for log-concavity of the survival over all
/// grid triples `(a, (a+b)/2, b)` inside the region where `F̄ > 1e-12`.
pub fn survival_logconcavity_check(dist: &ValuationDistribution, grid_size: usize) -> LogConcavityReport {
    assert!(grid_size >= 3, "grid needs at least 3 points");
    let upper = dist.effective_upper();
    let xs: Vec<f64> = (0..grid_size).map(|i| upper * i as f64 / (grid_size - 1) as f64).collect();
    let ln_s: Vec<Option<f64>> = xs
        .iter()
        .map(|&x| {
            let s = dist.survival(x);
            if s > SURVIVAL_FLOOR {
                Some(s.ln())
            } else {
                None
            }
        })
        .collect();
    let mut report = LogConcavityReport { checked_triples: 0, violations: Vec::new() };
    for i in 0..grid_size {
        for j in (i + 2)..grid_size {
            if (j - i) % 2 != 0 {
                continue;
            }
            let m = (i + j) / 2;
            if let (Some(la), Some(lm), Some(lb)) = (ln_s[i], ln_s[m], ln_s[j]) {
                report.checked_triples += 1;
                let deficit = 0.5 * (la + lb) - lm - 1e-9;
                if deficit > 0.0 {
                    report.violations.push(LogConcavityViolation { a: xs[i], mid: xs[m], b: xs[j], deficit });
                }
            }
        }
    }
    report
}
