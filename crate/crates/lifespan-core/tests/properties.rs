//! Property tests for the structural invariants of the exponent algebra,
//! the special functions, the metric family, and the fitting harness.

use lifespan_core::exponents::{
    classify, fujita_exponent, glassey_exponent, strauss_exponent, ProblemParams, Regime,
};
use lifespan_core::geometry::RadialMetric;
use lifespan_core::harness::fit_power_law;
use lifespan_core::special_functions::bessel_k;
use lifespan_core::wave_solver::InitialData;
use proptest::prelude::*;

proptest! {
    #[test]
    fn strauss_exponent_is_the_positive_quadratic_root(d in 2.0f64..40.0) {
        let q = strauss_exponent(d).unwrap();
        prop_assert!(q > 1.0, "q_S({d}) = {q} ≤ 1");
        let poly = (d - 1.0) * q * q - (d + 1.0) * q - 2.0;
        prop_assert!(poly.abs() <= 1e-9 * (d + q * q), "root residual {poly} at d = {d}");
    }

    #[test]
    fn critical_exponents_decrease_in_dimension(d in 2.0f64..40.0, h in 0.01f64..5.0) {
        prop_assert!(strauss_exponent(d + h).unwrap() < strauss_exponent(d).unwrap());
        prop_assert!(glassey_exponent(d + h).unwrap() < glassey_exponent(d).unwrap());
        prop_assert!(fujita_exponent(d + h).unwrap() < fujita_exponent(d).unwrap());
    }

    #[test]
    fn classify_marks_one_dominant_minimal_bound(
        n in 2u32..=4,
        mu1 in 0.0f64..3.0,
        mu2_frac in 0.0f64..1.0,
        c1 in 0.0f64..2.0,
        c2 in 0.0f64..2.0,
        p in 1.05f64..4.0,
        q in 1.05f64..4.0,
    ) {
        let mu2 = mu2_frac * (mu1 - 1.0) * (mu1 - 1.0) / 4.0;
        let params = ProblemParams { n, mu1, mu2, p: Some(p), q: Some(q), c1, c2 };
        let preds = classify(&params).unwrap();
        prop_assert!(!preds.is_empty());

        if preds.iter().any(|x| x.regime == Regime::NoPrediction) {
            prop_assert_eq!(preds.len(), 1, "NoPrediction must be the only entry");
            prop_assert!(!preds[0].dominant);
        } else {
            prop_assert!(preds.iter().all(|x| x.exponent < 0.0),
                "every predicted bound grows as ε → 0: {preds:?}");
            let dominants: Vec<_> = preds.iter().filter(|x| x.dominant).collect();
            prop_assert_eq!(dominants.len(), 1, "exactly one dominant: {:?}", preds);
            let best = dominants[0].log_bound_at(1e-3);
            for other in &preds {
                prop_assert!(best <= other.log_bound_at(1e-3) + 1e-9,
                    "dominant bound is not minimal: {preds:?}");
            }
        }

        prop_assert_eq!(&preds, &classify(&params).unwrap(), "classification must be deterministic");
    }

    #[test]
    fn fit_power_law_recovers_exact_laws(
        slope_mag in 0.05f64..3.0,
        negative in proptest::bool::ANY,
        log_amp in -2.0f64..2.0,
    ) {
        let slope = if negative { -slope_mag } else { slope_mag };
        let amp = 10f64.powf(log_amp);
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = 10f64.powf(i as f64 / 10.0);
                (x, amp * x.powf(slope))
            })
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9, "slope {} vs {slope}", fit.slope);
        prop_assert!(fit.r_squared > 1.0 - 1e-9, "r² = {}", fit.r_squared);
        prop_assert!(fit.max_log_residual < 1e-9);
    }

    #[test]
    fn long_range_metric_is_elliptic_with_controlled_geodesics(
        n in 2u32..=4,
        kappa in 0.0f64..0.5,
        decay in 0.5f64..3.0,
    ) {
        let m = RadialMetric::long_range(n, kappa, decay).unwrap();
        prop_assert!(m.check_ellipticity(50.0, 500).is_ok());
        let mut prev = 0.0;
        for j in 1..=100 {
            let r = 0.5 * j as f64;
            let k = m.k(r);
            prop_assert!((1.0 - 1e-12..=1.0 + kappa + 1e-12).contains(&k),
                "K({r}) = {k} outside [1, 1+κ]");
            let g = m.geodesic_radius(r);
            prop_assert!(g > prev, "geodesic radius not increasing at r = {r}");
            prop_assert!(g >= r - 1e-9 && g <= (1.0 + kappa) * r + 1e-9,
                "r̃({r}) = {g} outside [r, (1+κ)r]");
            prev = g;
        }
    }

    #[test]
    fn sign_condition_accepts_nonnegative_data_under_nonnegative_shift(
        mu1 in 1.0f64..3.0,
        amp0 in 0.0f64..4.0,
        amp1 in 0.0f64..4.0,
        eps in 0.01f64..2.0,
    ) {
        prop_assume!(amp0 + amp1 > 1e-6);
        let metric = RadialMetric::flat(3);
        let params = ProblemParams::power_only(3, mu1, 0.0, 1.3);
        let data = InitialData::new(&metric, eps, 1.0).with_amplitudes(amp0, amp1);
        prop_assert!(data.validate(&metric, &params).is_ok());
        let trivial = InitialData::new(&metric, eps, 1.0).with_amplitudes(0.0, 0.0);
        prop_assert!(trivial.validate(&metric, &params).is_err());
    }

    #[test]
    fn bessel_k_satisfies_the_three_term_recurrence(nu in 0.0f64..3.0, x in 0.2f64..30.0) {
        let k0 = bessel_k(nu, x).unwrap();
        let k1 = bessel_k(nu + 1.0, x).unwrap();
        let k2 = bessel_k(nu + 2.0, x).unwrap();
        let rhs = k0 + 2.0 * (nu + 1.0) / x * k1;
        prop_assert!(
            ((k2 - rhs) / k2).abs() <= 1e-7,
            "K recurrence residual at ν = {nu}, x = {x}: {k2} vs {rhs}"
        );
    }
}
