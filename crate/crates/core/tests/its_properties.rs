//! Algebraic properties of the ITS fit on noiseless and perturbed data.

use proptest::prelude::*;

use spillover::its::{build_design, fit_ols, Coefficients, DesignOptions, Granularity, Weighting};
use spillover::lexicon::{DailyPoint, Scope};

fn point(user: &str, t: i64, y: f64, tokens: u64) -> DailyPoint {
    DailyPoint {
        user: user.to_string(),
        day: 17_000 + t,
        relative_day: t,
        hate_ratio: y,
        tokens,
        hate_tokens: 0,
        scope: Scope::Outside,
    }
}

fn group(users: &[&str], b: i64, y: impl Fn(i64) -> f64) -> Vec<DailyPoint> {
    users
        .iter()
        .flat_map(|u| (-b..=b).map(|t| point(u, t, y(t), 100)).collect::<Vec<_>>())
        .collect()
}

fn coefficients() -> impl Strategy<Value = [f64; 8]> {
    (
        0.01f64..0.05,
        -1e-5f64..1e-5,
        -0.005f64..0.005,
        -0.005f64..0.005,
        -1e-5f64..1e-5,
        -1e-5f64..1e-5,
        -0.005f64..0.005,
        -1e-5f64..1e-5,
    )
        .prop_map(|(a, b, c, d, e, f, g, h)| [a, b, c, d, e, f, g, h])
}

fn opts(granularity: Granularity, weighting: Weighting) -> DesignOptions {
    DesignOptions { granularity, weighting }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_fit_recovers_planted(beta in coefficients(), b in 30u32..120) {
        let c = Coefficients::from_array(beta);
        let bi = b as i64;
        let tr = group(&["t1", "t2"], bi, |t| c.predict(t, true));
        let co = group(&["c1", "c2"], bi, |t| c.predict(t, false));
        for g in [Granularity::UserDay, Granularity::GroupDay] {
            let fit = fit_ols(&build_design(&tr, &co, b, opts(g, Weighting::Unweighted)).unwrap()).unwrap();
            for (got, want) in fit.coefficients.to_array().iter().zip(beta) {
                prop_assert!((got - want).abs() < 1e-12, "{g:?}: {got} vs {want}");
            }
            let expected = 100.0 * (beta[3] + beta[6]) / (beta[0] + beta[2]);
            prop_assert!((fit.relative_increase().unwrap() - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn offset_moves_only_the_intercept(beta in coefficients(), shift in -0.01f64..0.01, noise_seed in 0u64..1000) {
        let c = Coefficients::from_array(beta);
        let wobble = |t: i64| (((t + noise_seed as i64) * 7919) % 101) as f64 * 1e-5;
        let tr = group(&["t"], 60, |t| c.predict(t, true) + wobble(t));
        let co = group(&["c"], 60, |t| c.predict(t, false) - wobble(t));
        let shifted = |pts: &[DailyPoint]| -> Vec<DailyPoint> {
            pts.iter().map(|p| DailyPoint { hate_ratio: p.hate_ratio + shift, ..p.clone() }).collect()
        };
        let o = opts(Granularity::UserDay, Weighting::Unweighted);
        let base = fit_ols(&build_design(&tr, &co, 60, o).unwrap()).unwrap().coefficients.to_array();
        let moved = fit_ols(&build_design(&shifted(&tr), &shifted(&co), 60, o).unwrap()).unwrap().coefficients.to_array();
        prop_assert!((moved[0] - base[0] - shift).abs() < 1e-10);
        for j in 1..8 {
            prop_assert!((moved[j] - base[j]).abs() < 1e-10, "column {j}");
        }
    }

    #[test]
    fn equal_token_weights_match_unweighted(beta in coefficients(), noise_seed in 0u64..1000) {
        let c = Coefficients::from_array(beta);
        let wobble = |t: i64| (((t * 31 + noise_seed as i64) * 104_729) % 97) as f64 * 1e-5;
        let tr = group(&["t"], 45, |t| c.predict(t, true) + wobble(t));
        let co = group(&["c"], 45, |t| c.predict(t, false) + wobble(-t));
        let u = fit_ols(&build_design(&tr, &co, 45, opts(Granularity::UserDay, Weighting::Unweighted)).unwrap()).unwrap();
        let w = fit_ols(&build_design(&tr, &co, 45, opts(Granularity::UserDay, Weighting::TokenCount)).unwrap()).unwrap();
        for (a, b) in u.coefficients.to_array().iter().zip(w.coefficients.to_array()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in u.std_errors.iter().zip(w.std_errors) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
        }
    }
}

#[test]
fn days_outside_the_window_are_ignored() {
    let c = Coefficients::from_array([0.02, 1e-5, 0.004, 0.001, -1e-5, 2e-6, 0.006, 3e-6]);
    let mut tr = group(&["t"], 40, |t| c.predict(t, true));
    let co = group(&["c"], 40, |t| c.predict(t, false));
    let o = opts(Granularity::UserDay, Weighting::Unweighted);
    let inside = fit_ols(&build_design(&tr, &co, 40, o).unwrap()).unwrap();
    tr.push(point("t", 41, 0.9, 100));
    tr.push(point("t", -41, 0.9, 100));
    let outside = fit_ols(&build_design(&tr, &co, 40, o).unwrap()).unwrap();
    assert_eq!(inside.n, outside.n);
    assert_eq!(inside.coefficients, outside.coefficients);
}
