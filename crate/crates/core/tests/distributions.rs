//! Special functions and p-values checked against statrs.

use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma as statrs_ln_gamma;

use spillover::stats::{f_upper_tail, incomplete_beta, ln_gamma, student_t_cdf, student_t_critical, student_t_two_sided_p};

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs + rel * b.abs().max(a.abs())
}

#[test]
fn t_table_values() {
    // 97.5% quantiles from standard tables
    for (df, q) in [(1.0, 12.706_204_736), (5.0, 2.570_581_836), (30.0, 2.042_272_456), (1000.0, 1.962_339_081)] {
        assert!(close(student_t_critical(0.05, df), q, 1e-8, 0.0), "df {df}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn ln_gamma_agrees(x in 0.01f64..300.0) {
        prop_assert!(close(ln_gamma(x), statrs_ln_gamma(x), 1e-12, 1e-12));
    }

    #[test]
    fn regularized_beta_agrees(a in 0.1f64..200.0, b in 0.1f64..200.0, x in 0.0f64..=1.0) {
        prop_assert!(close(incomplete_beta(a, b, x), beta_reg(a, b, x), 1e-9, 1e-12));
    }

    #[test]
    fn t_p_values_agree(t in -40.0f64..40.0, df in 1.0f64..5000.0) {
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        let expected = 2.0 * dist.cdf(-t.abs());
        prop_assert!(close(student_t_two_sided_p(t, df), expected, 1e-8, 1e-13));
        prop_assert!(close(student_t_cdf(t, df), dist.cdf(t), 1e-8, 1e-13));
    }

    #[test]
    fn t_critical_inverts_tail(alpha in 0.001f64..0.5, df in 1.0f64..2000.0) {
        let q = student_t_critical(alpha, df);
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        prop_assert!(close(2.0 * dist.cdf(-q), alpha, 1e-7, 1e-12));
    }

    #[test]
    fn f_tail_agrees(f in 0.0f64..50.0, d1 in 1.0f64..20.0, d2 in 1.0f64..5000.0) {
        let dist = FisherSnedecor::new(d1, d2).unwrap();
        prop_assert!(close(f_upper_tail(f, d1, d2), dist.sf(f), 1e-7, 1e-12));
    }
}
