//! Property tests over the public API: invariants that must hold for
//! arbitrary inputs, not just the worked examples in the unit tests.

use proptest::prelude::*;

use pricing::bounds::{hinge_bound, quantile_bound, verify_tightness, WorstCaseKind};
use pricing::data::{format_f64, load_csv, save_csv};
use pricing::losses::EpsCoef;
use pricing::numeric::derive_seed;
use pricing::solver::fit_convex;
use pricing::{Dataset, LossSpec, PropensityModel, Sample, SolverConfig};

// ── Strategies ───────────────────────────────────────────────────────────

fn convex_spec() -> impl Strategy<Value = LossSpec> {
    prop_oneof![
        (0.01f64..=1.0).prop_map(|c| LossSpec::hinge(c).unwrap()),
        (0.01f64..0.99).prop_map(|t| LossSpec::quantile(t).unwrap()),
        (1.01f64..5.0, -2.0f64..0.99).prop_map(|(c1, c2)| {
            LossSpec::eps_insensitive(EpsCoef::Finite(c1), EpsCoef::Finite(c2)).unwrap()
        }),
        (1.01f64..5.0).prop_map(|c1| LossSpec::eps_insensitive(EpsCoef::Finite(c1), EpsCoef::Off).unwrap()),
        (-2.0f64..0.99).prop_map(|c2| LossSpec::eps_insensitive(EpsCoef::Off, EpsCoef::Finite(c2)).unwrap()),
        Just(LossSpec::eps_insensitive(EpsCoef::Off, EpsCoef::Off).unwrap()),
    ]
}

fn sample() -> impl Strategy<Value = Sample> {
    (0.01f64..50.0, any::<bool>(), 0.01f64..10.0).prop_map(|(price, sold, prop)| Sample {
        features: vec![1.0],
        price,
        sold: sold as u8 as f64,
        propensity: Some(prop),
    })
}

// ── Losses ───────────────────────────────────────────────────────────────

proptest! {
    #[test]
    fn convex_losses_satisfy_the_subgradient_inequality(
        spec in convex_spec(),
        s in sample(),
        a in -60.0f64..60.0,
        b in -60.0f64..60.0,
    ) {
        let fa = spec.value(a, &s).unwrap();
        let fb = spec.value(b, &s).unwrap();
        let g = spec.subgradient(a, &s).unwrap();
        // global lower linearization, the defining property of a subgradient
        let slack = fb - (fa + g * (b - a));
        prop_assert!(slack >= -1e-9 * (1.0 + fa.abs() + fb.abs()), "slack {slack}");
    }

    #[test]
    fn losses_are_zero_at_the_logged_price_and_never_negative(
        spec in convex_spec(),
        s in sample(),
        pi in -60.0f64..60.0,
    ) {
        prop_assert!(spec.value(pi, &s).unwrap() >= 0.0);
        let at_logged = spec.value(s.price, &s).unwrap();
        prop_assert_eq!(at_logged, 0.0);
    }

    #[test]
    fn eps_with_both_sides_off_is_exactly_the_unweighted_hinge(
        pi in -60.0f64..60.0,
        price in 0.01f64..50.0,
        sold in any::<bool>(),
    ) {
        let eps = LossSpec::eps_insensitive(EpsCoef::Off, EpsCoef::Off).unwrap();
        let hinge = LossSpec::hinge(1.0).unwrap();
        let sold = sold as u8 as f64;
        prop_assert_eq!(
            eps.value_parts(pi, price, sold, 1.0),
            hinge.value_parts(pi, price, sold, 1.0)
        );
    }
}

// ── Guarantees ───────────────────────────────────────────────────────────

proptest! {
    #[test]
    fn guarantee_values_stay_inside_the_unit_interval(
        c in 0.001f64..=1.0,
        tau in 0.001f64..0.999,
    ) {
        let h = hinge_bound(c).unwrap().value;
        prop_assert!(h > 0.0 && h <= 1.0, "hinge({c}) = {h}");
        let q = quantile_bound(tau).unwrap().value;
        prop_assert!(q > 0.0 && q <= 1.0, "quantile({tau}) = {q}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn extremal_distributions_never_beat_their_branch_bound(
        kind_sel in 0usize..4,
        u in 0.0f64..1.0,
    ) {
        // map u into each branch's validity range: below branches cover
        // their full domains, hinge_above needs [0.5, 1), quantile_above
        // (0, 0.5]
        let (kind, param) = match kind_sel {
            0 => (WorstCaseKind::HingeBelow, 0.05 + 0.9 * u),
            1 => (WorstCaseKind::HingeAbove, 0.5 + 0.45 * u),
            2 => (WorstCaseKind::QuantileBelow, 0.05 + 0.9 * u),
            _ => (WorstCaseKind::QuantileAbove, 0.05 + 0.45 * u),
        };
        let report = verify_tightness(kind, param).unwrap();
        prop_assert!(report.gap >= -1e-4, "{kind} at {param}: gap {}", report.gap);
    }
}

// ── Seeds, formatting, serialization ─────────────────────────────────────

proptest! {
    #[test]
    fn seed_derivation_is_deterministic_and_tag_sensitive(
        base in any::<u64>(),
        tags in proptest::collection::vec(any::<u64>(), 1..4),
        flip in any::<u64>(),
    ) {
        prop_assert_eq!(derive_seed(base, &tags), derive_seed(base, &tags));
        let mut other = tags.clone();
        other[0] ^= flip.max(1); // guaranteed different first tag
        prop_assert_ne!(derive_seed(base, &tags), derive_seed(base, &other));
    }

    #[test]
    fn float_formatting_round_trips_bit_exactly(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let back: f64 = format_f64(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn uniform_propensity_density_is_the_reciprocal_width(
        lo in -10.0f64..10.0,
        width in 0.1f64..20.0,
        p in -30.0f64..30.0,
    ) {
        let model = PropensityModel::uniform(lo, lo + width).unwrap();
        let d = model.density(p);
        if p >= lo && p <= lo + width {
            prop_assert!((d - 1.0 / width).abs() <= 1e-12 / width);
        } else {
            prop_assert_eq!(d, 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn dataset_csv_round_trip_is_exact(
        rows in proptest::collection::vec(
            (
                proptest::collection::vec(-1e6f64..1e6, 3),
                1e-6f64..1e6,
                any::<bool>(),
                1e-6f64..1e3,
            ),
            1..20,
        ),
        with_propensity in any::<bool>(),
    ) {
        let samples: Vec<Sample> = rows
            .into_iter()
            .map(|(features, price, sold, prop)| Sample {
                features,
                price,
                sold: sold as u8 as f64,
                propensity: with_propensity.then_some(prop),
            })
            .collect();
        let data = Dataset::new(samples, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roundtrip.csv");
        save_csv(&data, &path).unwrap();
        let back = load_csv(&path, with_propensity).unwrap();
        prop_assert_eq!(back, data);
    }
}

// ── Solver ───────────────────────────────────────────────────────────────

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn convex_fits_return_finite_policies_inside_the_norm_ball(
        spec in convex_spec(),
        rows in proptest::collection::vec((0.1f64..5.0, any::<bool>()), 5..40),
    ) {
        let samples: Vec<Sample> = rows
            .into_iter()
            .map(|(price, sold)| Sample {
                features: vec![1.0],
                price,
                sold: sold as u8 as f64,
                propensity: Some(0.5),
            })
            .collect();
        let data = Dataset::new(samples, 1).unwrap();
        let cfg = SolverConfig { max_iters: 300, norm_cap: 10.0, ..SolverConfig::default() };
        let fit = fit_convex(&spec, &data, &cfg).unwrap();
        prop_assert!(fit.policy.theta.iter().all(|t| t.is_finite()));
        let norm = fit.policy.theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        prop_assert!(norm <= 10.0 + 1e-9, "norm {norm}");
        prop_assert!(fit.objective.is_finite() && fit.objective >= 0.0);
    }
}
