//! Surrogate losses and reward estimators for posted-price data.
//!
//! Convex losses (minimized over policies):
//! - hinge-style: `(1/φ)[cY(P−π)⁺ + (1−cY)(π−P)⁺]`
//! - quantile: `(Y/φ)[(1−τ)(P−π)⁺ + τ(π−P)⁺]`
//! - ε-insensitive: `Y[(P−π)⁺ + (π−c₁P)⁺] + (1−Y)[(π−P)⁺ + (c₂P−π)⁺]`,
//!   deliberately unweighted by propensity.
//!
//! Reward estimators (maximized over policies):
//! - model-free: `π·Y·1{P > π}`
//! - kernel IPW: `(1/(hφ))·K((π−P)/h)·P·Y` with standard normal `K`.
//!
//! Subgradients use a fixed kink convention: at a kink the element of the
//! subdifferential closest to zero is returned, which is 0 for every kink
//! of the losses above. This keeps iterates stationary when many samples
//! sit exactly at the policy price.

use thiserror::Error;

use crate::data::{Dataset, LinearPolicy, Sample};
use crate::numeric::{self, chunked_sum};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("invalid loss parameter: {0}")]
    InvalidParam(String),
    #[error("operation requires a convex loss, got {0}")]
    NotConvex(&'static str),
    #[error("sample {index} has no usable propensity (must be positive)")]
    BadPropensity { index: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("policy dimension {policy} does not match feature dimension {data}")]
    DimensionMismatch { policy: usize, data: usize },
}

/// Upper or lower coefficient of the ε-insensitive loss. `Off` disables the
/// corresponding arm entirely (the degenerate c₁→+∞ / c₂→−∞ setting),
/// keeping all arithmetic finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsCoef {
    Finite(f64),
    Off,
}

/// Loss/reward selector with parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    Hinge { c: f64 },
    Quantile { tau: f64 },
    EpsInsensitive { c1: EpsCoef, c2: EpsCoef },
    ModelFree,
    KernelIpw { bandwidth: f64 },
}

impl LossSpec {
    pub fn hinge(c: f64) -> Result<Self, LossError> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(LossError::InvalidParam(format!("hinge needs 0 < c <= 1, got {c}")));
        }
        Ok(LossSpec::Hinge { c })
    }

    pub fn quantile(tau: f64) -> Result<Self, LossError> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(LossError::InvalidParam(format!("quantile needs 0 < tau < 1, got {tau}")));
        }
        Ok(LossSpec::Quantile { tau })
    }

    pub fn eps_insensitive(c1: EpsCoef, c2: EpsCoef) -> Result<Self, LossError> {
        if let EpsCoef::Finite(v) = c1 {
            if !(v.is_finite() && v > 1.0) {
                return Err(LossError::InvalidParam(format!("eps-insensitive needs c1 > 1, got {v}")));
            }
        }
        if let EpsCoef::Finite(v) = c2 {
            if !(v.is_finite() && v < 1.0) {
                return Err(LossError::InvalidParam(format!("eps-insensitive needs c2 < 1, got {v}")));
            }
        }
        Ok(LossSpec::EpsInsensitive { c1, c2 })
    }

    pub fn model_free() -> Self {
        LossSpec::ModelFree
    }

    pub fn kernel_ipw(bandwidth: f64) -> Result<Self, LossError> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(LossError::InvalidParam(format!("kernel IPW needs bandwidth > 0, got {bandwidth}")));
        }
        Ok(LossSpec::KernelIpw { bandwidth })
    }

    pub fn is_convex(&self) -> bool {
        matches!(
            self,
            LossSpec::Hinge { .. } | LossSpec::Quantile { .. } | LossSpec::EpsInsensitive { .. }
        )
    }

    /// True for objectives that are maximized (rewards) rather than
    /// minimized (losses).
    pub fn is_reward(&self) -> bool {
        matches!(self, LossSpec::ModelFree | LossSpec::KernelIpw { .. })
    }

    /// True when per-sample evaluation divides by the logging propensity.
    pub fn needs_propensity(&self) -> bool {
        matches!(
            self,
            LossSpec::Hinge { .. } | LossSpec::Quantile { .. } | LossSpec::KernelIpw { .. }
        )
    }

    /// Short kind label for error messages and report rows.
    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Hinge { .. } => "hinge",
            LossSpec::Quantile { .. } => "quantile",
            LossSpec::EpsInsensitive { .. } => "eps_insensitive",
            LossSpec::ModelFree => "model_free",
            LossSpec::KernelIpw { .. } => "kernel_ipw",
        }
    }

    /// Pointwise value at policy price `pi`. `ipw` is the (possibly capped)
    /// inverse propensity weight; kinds that ignore the logging policy
    /// ignore it.
    pub fn value_parts(&self, pi: f64, price: f64, sold: f64, ipw: f64) -> f64 {
        match *self {
            LossSpec::Hinge { c } => hinge_value(pi, price, sold, ipw, c),
            LossSpec::Quantile { tau } => quantile_value(pi, price, sold, ipw, tau),
            LossSpec::EpsInsensitive { c1, c2 } => eps_insensitive_value(pi, price, sold, c1, c2),
            LossSpec::ModelFree => model_free_value(pi, price, sold),
            LossSpec::KernelIpw { bandwidth } => kernel_ipw_value(pi, price, sold, ipw, bandwidth),
        }
    }

    /// Pointwise value at `pi` for a full sample.
    pub fn value(&self, pi: f64, sample: &Sample) -> Result<f64, LossError> {
        let ipw = self.ipw_for(sample, 0)?;
        Ok(self.value_parts(pi, sample.price, sample.sold, ipw))
    }

    /// Subgradient in `pi` for convex kinds (kink convention: element of the
    /// subdifferential closest to zero, which is 0 at every kink).
    pub fn subgradient(&self, pi: f64, sample: &Sample) -> Result<f64, LossError> {
        let ipw = self.ipw_for(sample, 0)?;
        match *self {
            LossSpec::Hinge { c } => Ok(hinge_subgradient(pi, sample.price, sample.sold, ipw, c)),
            LossSpec::Quantile { tau } => Ok(quantile_subgradient(pi, sample.price, sample.sold, ipw, tau)),
            LossSpec::EpsInsensitive { c1, c2 } => {
                Ok(eps_insensitive_subgradient(pi, sample.price, sample.sold, c1, c2))
            }
            _ => Err(LossError::NotConvex(self.name())),
        }
    }

    fn ipw_for(&self, sample: &Sample, index: usize) -> Result<f64, LossError> {
        if !self.needs_propensity() {
            return Ok(1.0);
        }
        match sample.propensity {
            Some(p) if p.is_finite() && p > 0.0 => Ok(1.0 / p),
            _ => Err(LossError::BadPropensity { index }),
        }
    }
}

// ── Pointwise formulas ───────────────────────────────────────────────────

#[inline]
fn pos(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

#[inline]
pub fn hinge_value(pi: f64, price: f64, sold: f64, ipw: f64, c: f64) -> f64 {
    ipw * (c * sold * pos(price - pi) + (1.0 - c * sold) * pos(pi - price))
}

#[inline]
pub fn hinge_subgradient(pi: f64, price: f64, sold: f64, ipw: f64, c: f64) -> f64 {
    if pi < price {
        -ipw * c * sold
    } else if pi > price {
        ipw * (1.0 - c * sold)
    } else {
        0.0
    }
}

#[inline]
pub fn quantile_value(pi: f64, price: f64, sold: f64, ipw: f64, tau: f64) -> f64 {
    sold * ipw * ((1.0 - tau) * pos(price - pi) + tau * pos(pi - price))
}

#[inline]
pub fn quantile_subgradient(pi: f64, price: f64, sold: f64, ipw: f64, tau: f64) -> f64 {
    if sold == 0.0 || pi == price {
        0.0
    } else if pi < price {
        -sold * ipw * (1.0 - tau)
    } else {
        sold * ipw * tau
    }
}

#[inline]
pub fn eps_insensitive_value(pi: f64, price: f64, sold: f64, c1: EpsCoef, c2: EpsCoef) -> f64 {
    if sold == 1.0 {
        let upper = match c1 {
            EpsCoef::Finite(c1) => pos(pi - c1 * price),
            EpsCoef::Off => 0.0,
        };
        pos(price - pi) + upper
    } else {
        let lower = match c2 {
            EpsCoef::Finite(c2) => pos(c2 * price - pi),
            EpsCoef::Off => 0.0,
        };
        pos(pi - price) + lower
    }
}

#[inline]
pub fn eps_insensitive_subgradient(pi: f64, price: f64, sold: f64, c1: EpsCoef, c2: EpsCoef) -> f64 {
    if sold == 1.0 {
        let mut g = 0.0;
        if pi < price {
            g -= 1.0;
        }
        if let EpsCoef::Finite(c1) = c1 {
            if pi > c1 * price {
                g += 1.0;
            }
        }
        g
    } else {
        let mut g = 0.0;
        if pi > price {
            g += 1.0;
        }
        if let EpsCoef::Finite(c2) = c2 {
            if pi < c2 * price {
                g -= 1.0;
            }
        }
        g
    }
}

#[inline]
pub fn model_free_value(pi: f64, price: f64, sold: f64) -> f64 {
    if price > pi {
        pi * sold
    } else {
        0.0
    }
}

#[inline]
pub fn kernel_ipw_value(pi: f64, price: f64, sold: f64, ipw: f64, bandwidth: f64) -> f64 {
    if sold == 0.0 {
        return 0.0;
    }
    ipw / bandwidth * numeric::normal_pdf((pi - price) / bandwidth) * price * sold
}

// ── Empirical risk over a dataset ────────────────────────────────────────

fn check_dims(policy: &LinearPolicy, data: &Dataset) -> Result<(), LossError> {
    if data.is_empty() {
        return Err(LossError::EmptyDataset);
    }
    if policy.dim() != data.feature_dim() {
        return Err(LossError::DimensionMismatch { policy: policy.dim(), data: data.feature_dim() });
    }
    Ok(())
}

fn ipw_weights(spec: &LossSpec, data: &Dataset, weight_cap: Option<f64>) -> Result<Vec<f64>, LossError> {
    let cap = weight_cap.unwrap_or(f64::INFINITY);
    if !(cap > 0.0) {
        return Err(LossError::InvalidParam(format!("weight cap must be positive, got {cap}")));
    }
    data.samples()
        .iter()
        .enumerate()
        .map(|(index, s)| spec.ipw_for(s, index).map(|w| w.min(cap)))
        .collect()
}

/// Mean per-sample loss (or reward) of `policy` on `data`. Inverse
/// propensity weights are clipped at `weight_cap` when given; capping is a
/// variance-control device for empirical estimation only.
pub fn empirical_risk(
    spec: &LossSpec,
    policy: &LinearPolicy,
    data: &Dataset,
    weight_cap: Option<f64>,
) -> Result<f64, LossError> {
    check_dims(policy, data)?;
    let w = ipw_weights(spec, data, weight_cap)?;
    let samples = data.samples();
    let sum = chunked_sum(samples.len(), |i| {
        let s = &samples[i];
        spec.value_parts(policy.price(&s.features), s.price, s.sold, w[i])
    });
    Ok(sum / samples.len() as f64)
}

/// Gradient of [`empirical_risk`] in `policy.theta` for convex kinds:
/// the mean of `subgradient(π(xᵢ)) · xᵢ`.
pub fn empirical_risk_gradient(
    spec: &LossSpec,
    policy: &LinearPolicy,
    data: &Dataset,
    weight_cap: Option<f64>,
) -> Result<Vec<f64>, LossError> {
    check_dims(policy, data)?;
    if !spec.is_convex() {
        return Err(LossError::NotConvex(spec.name()));
    }
    let w = ipw_weights(spec, data, weight_cap)?;
    let samples = data.samples();
    let m = data.feature_dim();
    let mut grad = vec![0.0; m];
    // Chunked accumulation in fixed index order: bit-stable results.
    let mut start = 0usize;
    while start < samples.len() {
        let end = (start + numeric::REDUCE_CHUNK).min(samples.len());
        let mut local = vec![0.0; m];
        for i in start..end {
            let s = &samples[i];
            let pi = policy.price(&s.features);
            let slope = match *spec {
                LossSpec::Hinge { c } => hinge_subgradient(pi, s.price, s.sold, w[i], c),
                LossSpec::Quantile { tau } => quantile_subgradient(pi, s.price, s.sold, w[i], tau),
                LossSpec::EpsInsensitive { c1, c2 } => {
                    eps_insensitive_subgradient(pi, s.price, s.sold, c1, c2)
                }
                _ => unreachable!("convexity checked above"),
            };
            if slope != 0.0 {
                for (g, x) in local.iter_mut().zip(&s.features) {
                    *g += slope * x;
                }
            }
        }
        for (g, l) in grad.iter_mut().zip(&local) {
            *g += l;
        }
        start = end;
    }
    let inv_n = 1.0 / samples.len() as f64;
    for g in &mut grad {
        *g *= inv_n;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use rand::Rng;

    fn sample(price: f64, sold: f64, propensity: f64) -> Sample {
        Sample { features: vec![1.0], price, sold, propensity: Some(propensity) }
    }

    #[test]
    fn hinge_reference_values() {
        let spec = LossSpec::hinge(1.0).unwrap();
        assert_eq!(spec.value(2.0, &sample(3.0, 1.0, 0.5)).unwrap(), 2.0);
        let spec = LossSpec::hinge(0.8).unwrap();
        assert_eq!(spec.value(3.0, &sample(2.0, 0.0, 1.0)).unwrap(), 1.0);
        for c in [0.2, 0.9] {
            let spec = LossSpec::hinge(c).unwrap();
            assert_eq!(spec.value(2.5, &sample(2.5, 1.0, 0.7)).unwrap(), 0.0);
            assert_eq!(spec.value(2.5, &sample(2.5, 0.0, 0.7)).unwrap(), 0.0);
        }
    }

    #[test]
    fn quantile_reference_values() {
        let spec = LossSpec::quantile(0.2).unwrap();
        assert!((spec.value(2.0, &sample(3.0, 1.0, 1.0)).unwrap() - 0.8).abs() < 1e-15);
        let spec = LossSpec::quantile(0.25).unwrap();
        assert_eq!(spec.value(4.0, &sample(3.0, 0.0, 0.5)).unwrap(), 0.0);
        assert!((spec.value(4.0, &sample(3.0, 1.0, 0.5)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quantile_zero_for_unsold_everywhere() {
        let spec = LossSpec::quantile(0.7).unwrap();
        for pi in [0.1, 1.0, 2.9, 17.0] {
            assert_eq!(spec.value(pi, &sample(2.0, 0.0, 0.3)).unwrap(), 0.0);
        }
    }

    #[test]
    fn eps_insensitive_reference_values() {
        let spec = LossSpec::eps_insensitive(EpsCoef::Finite(1.5), EpsCoef::Finite(0.5)).unwrap();
        assert!((spec.value(2.0, &sample(1.0, 1.0, 1.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!((spec.value(0.3, &sample(1.0, 0.0, 1.0)).unwrap() - 0.2).abs() < 1e-15);
        // Zero-loss band [P, c1 P] for sold samples.
        for pi in [1.0, 1.2, 1.5] {
            assert_eq!(spec.value(pi, &sample(1.0, 1.0, 1.0)).unwrap(), 0.0);
        }
    }

    #[test]
    fn eps_insensitive_degenerate_flags_match_scaled_hinge() {
        // With both arms off, the loss equals propensity * hinge(c=1) at
        // every point.
        let eps = LossSpec::eps_insensitive(EpsCoef::Off, EpsCoef::Off).unwrap();
        let hinge = LossSpec::hinge(1.0).unwrap();
        let mut rng = crate::numeric::seeded_rng(3, &[1]);
        for _ in 0..2000 {
            let price = 0.1 + 5.0 * rng.gen::<f64>();
            let sold = if rng.gen::<f64>() < 0.5 { 1.0 } else { 0.0 };
            let phi = 0.05 + rng.gen::<f64>();
            let pi = 6.0 * rng.gen::<f64>();
            let s = sample(price, sold, phi);
            let lhs = eps.value(pi, &s).unwrap();
            let rhs = phi * hinge.value(pi, &s).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12, "pi={pi} price={price} sold={sold} phi={phi}");
        }
    }

    #[test]
    fn model_free_boundary_is_strict() {
        let spec = LossSpec::model_free();
        assert_eq!(spec.value(2.0, &sample(3.0, 1.0, 1.0)).unwrap(), 2.0);
        assert_eq!(spec.value(3.0, &sample(3.0, 1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(spec.value(2.0, &sample(3.0, 0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn kernel_ipw_reference_values() {
        let spec = LossSpec::kernel_ipw(0.2).unwrap();
        let at_center = spec.value(2.0, &sample(2.0, 1.0, 0.5)).unwrap();
        assert!((at_center - 10.0 * crate::numeric::normal_pdf(0.0) * 2.0).abs() < 1e-12);
        assert!((at_center - 7.9788).abs() < 1e-3);
        assert_eq!(spec.value(2.0, &sample(2.0, 0.0, 0.5)).unwrap(), 0.0);
        // Five bandwidths out, the reward is negligible.
        let far = spec.value(3.0, &sample(2.0, 1.0, 0.5)).unwrap();
        assert!(far <= 1e-4 * at_center);
    }

    #[test]
    fn subgradient_reference_values() {
        let hinge = LossSpec::hinge(1.0).unwrap();
        assert_eq!(hinge.subgradient(2.0, &sample(3.0, 1.0, 0.5)).unwrap(), -2.0);
        assert_eq!(hinge.subgradient(3.0, &sample(3.0, 1.0, 0.5)).unwrap(), 0.0);
        let quant = LossSpec::quantile(0.2).unwrap();
        assert!((quant.subgradient(4.0, &sample(3.0, 1.0, 1.0)).unwrap() - 0.2).abs() < 1e-15);
        let mf = LossSpec::model_free();
        assert!(matches!(mf.subgradient(1.0, &sample(3.0, 1.0, 1.0)), Err(LossError::NotConvex(_))));
    }

    #[test]
    fn subgradient_matches_central_difference_away_from_kinks() {
        let specs = [
            LossSpec::hinge(0.37).unwrap(),
            LossSpec::quantile(0.81).unwrap(),
            LossSpec::eps_insensitive(EpsCoef::Finite(1.4), EpsCoef::Finite(0.3)).unwrap(),
            LossSpec::eps_insensitive(EpsCoef::Off, EpsCoef::Finite(0.6)).unwrap(),
        ];
        let mut rng = crate::numeric::seeded_rng(5, &[9]);
        let eps = 1e-6;
        for spec in &specs {
            let mut checked = 0;
            while checked < 500 {
                let price = 0.5 + 4.0 * rng.gen::<f64>();
                let sold = if rng.gen::<f64>() < 0.5 { 1.0 } else { 0.0 };
                let phi = 0.1 + rng.gen::<f64>();
                let pi = 6.0 * rng.gen::<f64>();
                // Stay away from every kink location.
                let kinks = [price, 1.4 * price, 0.3 * price, 0.6 * price];
                if kinks.iter().any(|k| (pi - k).abs() <= 1e-3 * price) {
                    continue;
                }
                let s = sample(price, sold, phi);
                let g = spec.subgradient(pi, &s).unwrap();
                let fd = (spec.value(pi + eps, &s).unwrap() - spec.value(pi - eps, &s).unwrap()) / (2.0 * eps);
                assert!((g - fd).abs() <= 1e-5, "{spec:?} pi={pi} price={price} sold={sold}: {g} vs {fd}");
                checked += 1;
            }
        }
    }

    #[test]
    fn midpoint_convexity_random_probe() {
        let specs = [
            LossSpec::hinge(0.55).unwrap(),
            LossSpec::quantile(0.3).unwrap(),
            LossSpec::eps_insensitive(EpsCoef::Finite(2.0), EpsCoef::Finite(0.0)).unwrap(),
        ];
        let mut rng = crate::numeric::seeded_rng(17, &[4]);
        for spec in &specs {
            for _ in 0..5000 {
                let s = sample(0.2 + 4.0 * rng.gen::<f64>(), f64::from(rng.gen::<bool>()), 0.1 + rng.gen::<f64>());
                let p1 = 6.0 * rng.gen::<f64>();
                let p2 = 6.0 * rng.gen::<f64>();
                let mid = spec.value(0.5 * (p1 + p2), &s).unwrap();
                let avg = 0.5 * (spec.value(p1, &s).unwrap() + spec.value(p2, &s).unwrap());
                assert!(mid <= avg + 1e-12);
            }
        }
    }

    #[test]
    fn scale_equivariance_pointwise() {
        let hinge = LossSpec::hinge(0.6).unwrap();
        let quant = LossSpec::quantile(0.35).unwrap();
        let mut rng = crate::numeric::seeded_rng(23, &[8]);
        for _ in 0..1000 {
            let price = 0.2 + 3.0 * rng.gen::<f64>();
            let sold = f64::from(rng.gen::<bool>());
            let phi = 0.2 + rng.gen::<f64>();
            let pi = 4.0 * rng.gen::<f64>();
            let alpha = 0.1 + 5.0 * rng.gen::<f64>();
            for spec in [&hinge, &quant] {
                let base = spec.value(pi, &sample(price, sold, phi)).unwrap();
                let scaled = spec.value(alpha * pi, &sample(alpha * price, sold, phi)).unwrap();
                assert!((scaled - alpha * base).abs() <= 1e-10 * (1.0 + base.abs()));
            }
        }
    }

    #[test]
    fn empirical_risk_basics() {
        let data = Dataset::new(
            vec![
                Sample { features: vec![2.0], price: 4.0, sold: 1.0, propensity: Some(0.5) },
                Sample { features: vec![1.0], price: 2.0, sold: 0.0, propensity: Some(0.5) },
            ],
            1,
        )
        .unwrap();
        let spec = LossSpec::hinge(1.0).unwrap();
        // theta=2 prices both samples exactly at P: zero risk.
        let policy = LinearPolicy::new(vec![2.0]);
        assert_eq!(empirical_risk(&spec, &policy, &data, None).unwrap(), 0.0);

        let policy = LinearPolicy::new(vec![1.0]);
        let risk = empirical_risk(&spec, &policy, &data, None).unwrap();
        // Sample 1: pi=2, P=4, sold → 2*(4-2)=4; sample 2: pi=1, P=2, unsold → 2*(1-2)⁺=0.
        assert!((risk - 2.0).abs() < 1e-15);

        // Duplication leaves the mean unchanged.
        let mut doubled = data.samples().to_vec();
        doubled.extend_from_slice(data.samples());
        let doubled = Dataset::new(doubled, 1).unwrap();
        assert_eq!(
            empirical_risk(&spec, &policy, &data, None).unwrap(),
            empirical_risk(&spec, &policy, &doubled, None).unwrap()
        );

        // An infinite cap is a no-op.
        assert_eq!(
            empirical_risk(&spec, &policy, &data, Some(f64::INFINITY)).unwrap(),
            empirical_risk(&spec, &policy, &data, None).unwrap()
        );
        // A tight cap shrinks the weighted risk.
        let capped = empirical_risk(&spec, &policy, &data, Some(1.0)).unwrap();
        assert!((capped - 1.0).abs() < 1e-15);

        let empty = Dataset::new(vec![], 1).unwrap();
        assert!(matches!(empirical_risk(&spec, &policy, &empty, None), Err(LossError::EmptyDataset)));
    }

    #[test]
    fn empirical_gradient_matches_mean_of_pointwise() {
        let data = Dataset::new(
            vec![
                Sample { features: vec![1.0, 2.0], price: 3.0, sold: 1.0, propensity: Some(0.4) },
                Sample { features: vec![2.0, 0.5], price: 1.0, sold: 0.0, propensity: Some(0.8) },
            ],
            2,
        )
        .unwrap();
        let spec = LossSpec::quantile(0.3).unwrap();
        let policy = LinearPolicy::new(vec![0.4, 0.9]);
        let grad = empirical_risk_gradient(&spec, &policy, &data, None).unwrap();
        let mut want = vec![0.0, 0.0];
        for s in data.samples() {
            let g = spec.subgradient(policy.price(&s.features), s).unwrap();
            for (w, x) in want.iter_mut().zip(&s.features) {
                *w += g * x / data.len() as f64;
            }
        }
        for (a, b) in grad.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(
            empirical_risk_gradient(&LossSpec::model_free(), &policy, &data, None),
            Err(LossError::NotConvex(_))
        ));
    }

    #[test]
    fn propensity_required_only_where_used() {
        let no_prop = Dataset::new(
            vec![Sample { features: vec![1.0], price: 2.0, sold: 1.0, propensity: None }],
            1,
        )
        .unwrap();
        let policy = LinearPolicy::new(vec![1.0]);
        let hinge = LossSpec::hinge(0.5).unwrap();
        assert!(matches!(
            empirical_risk(&hinge, &policy, &no_prop, None),
            Err(LossError::BadPropensity { index: 0 })
        ));
        // ε-insensitive and model-free ignore the logging policy entirely.
        let eps = LossSpec::eps_insensitive(EpsCoef::Finite(1.5), EpsCoef::Finite(0.5)).unwrap();
        assert!(empirical_risk(&eps, &policy, &no_prop, None).is_ok());
        assert!(empirical_risk(&LossSpec::model_free(), &policy, &no_prop, None).is_ok());
    }
}
