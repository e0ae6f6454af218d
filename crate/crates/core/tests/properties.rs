use ccopt_core::distributions::GammaLaw;
use ccopt_core::erlang::{erlang_c_delay, max_load_for_target};
use ccopt_core::experiments::nearest_rank;
use ccopt_core::gaussian::{exact_membership, mean_field_approx, LinearCC};
use ccopt_core::queue::Dataset;
use ccopt_core::special::{digamma, ln_gamma, reg_incomplete_beta, reg_lower_incomplete_gamma, reg_upper_incomplete_gamma};
use ccopt_core::staffing::constraint_probability_gamma;
use ccopt_core::vb::ProductGammaPosterior;
use proptest::prelude::*;

proptest! {
    #[test]
    fn digamma_recurrence(x in 1e-3f64..500.0) {
        let lhs = digamma(x + 1.0).unwrap();
        let rhs = digamma(x).unwrap() + 1.0 / x;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn ln_gamma_recurrence(x in 1e-3f64..500.0) {
        let lhs = ln_gamma(x + 1.0).unwrap();
        let rhs = ln_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn incomplete_gamma_is_monotone_and_complementary(a in 0.05f64..200.0, x in 0.0f64..300.0, dx in 1e-3f64..10.0) {
        let p = reg_lower_incomplete_gamma(a, x).unwrap();
        let p2 = reg_lower_incomplete_gamma(a, x + dx).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(p2 >= p);
        let q = reg_upper_incomplete_gamma(a, x).unwrap();
        prop_assert!((p + q - 1.0).abs() < 1e-13);
    }

    #[test]
    fn incomplete_beta_is_monotone_and_symmetric(a in 0.05f64..300.0, b in 0.05f64..300.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let i_lo = reg_incomplete_beta(a, b, lo).unwrap();
        let i_hi = reg_incomplete_beta(a, b, hi).unwrap();
        prop_assert!((0.0..=1.0).contains(&i_lo));
        prop_assert!(i_hi >= i_lo - 1e-15);
        let mirror = reg_incomplete_beta(b, a, 1.0 - x).unwrap();
        prop_assert!((reg_incomplete_beta(a, b, x).unwrap() + mirror - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_load_increases_with_servers(c in 1u32..150, alpha in 0.01f64..0.99) {
        let r = max_load_for_target(c, alpha).unwrap();
        let r_next = max_load_for_target(c + 1, alpha).unwrap();
        prop_assert!(r_next > r);
        prop_assert!(r < c as f64);
        prop_assert!((erlang_c_delay(r, c).unwrap() - alpha).abs() < 1e-8);
    }

    #[test]
    fn constraint_probability_nondecreasing(
        aq in 1.01f64..3000.0, bq in 0.01f64..500.0, as_ in 1.01f64..3000.0, bs in 0.01f64..500.0,
        c in 1u32..100, alpha in 0.05f64..0.95,
    ) {
        let q = ProductGammaPosterior::new(GammaLaw::new(aq, bq).unwrap(), GammaLaw::new(as_, bs).unwrap());
        let p = constraint_probability_gamma(&q, c, alpha).unwrap();
        let p_next = constraint_probability_gamma(&q, c + 1, alpha).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(p_next >= p);
    }

    #[test]
    fn dataset_csv_roundtrip(rows in prop::collection::vec((1e-300f64..1e300, 1e-300f64..1e300), 1..60)) {
        let (t, s): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        let d = Dataset::new(t, s).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        prop_assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn nearest_rank_quantiles_are_ordered(mut v in prop::collection::vec(1u32..300, 1..300)) {
        v.sort_unstable();
        let (q05, q50, q95) = (nearest_rank(&v, 5), nearest_rank(&v, 50), nearest_rank(&v, 95));
        prop_assert!(q05 <= q50 && q50 <= q95);
        prop_assert!(v.contains(&q50));
    }

    #[test]
    fn mean_field_variances_are_conditional(s in -0.99f64..0.99) {
        let law = ccopt_core::distributions::BivariateNormal::standard_correlated(s).unwrap();
        let q = mean_field_approx(&law).unwrap();
        prop_assert!((q.cov()[0][0] - (1.0 - s * s)).abs() < 1e-12);
        prop_assert!((q.cov()[1][1] - (1.0 - s * s)).abs() < 1e-12);
        prop_assert_eq!(q.mean(), law.mean());
    }

    #[test]
    fn exact_region_is_star_shaped(s in -0.9f64..0.9, beta in 0.51f64..0.99, x in -3.0f64..3.0, y in -3.0f64..3.0, k in 0.0f64..1.0) {
        let cc = LinearCC::example(s, beta).unwrap();
        if exact_membership(&cc, [x, y]) {
            prop_assert!(exact_membership(&cc, [k * x, k * y]));
        }
    }
}
