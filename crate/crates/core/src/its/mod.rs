//! Interrupted time series: design, OLS fit, bandwidth cross-validation and
//! bandwidth sensitivity.

mod cv;
mod design;
mod ols;
mod report;
mod sweep;

pub use cv::{cv_bandwidth, default_candidates, group_daily_means, BandwidthSearch, DEFAULT_CV_ROUNDS};
pub use design::{build_design, design_row, Design, DesignOptions, Granularity, Observation, Weighting, COLUMN_NAMES, MIN_BANDWIDTH};
pub use ols::{least_squares, LinearFit};
pub use report::{write_daily_means_csv, write_fit_json, write_plot_lines_csv, write_sweep_csv, FitReport};
pub use sweep::{sensitivity_sweep, SweepEntry, SweepTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::student_t_critical;

/// The eight ITS coefficients in design-column order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Coefficients {
    #[serde(rename = "const")]
    pub constant: f64,
    pub time: f64,
    pub expos: f64,
    pub inter: f64,
    pub time_expos: f64,
    pub time_inter: f64,
    pub expos_inter: f64,
    pub time_expos_inter: f64,
}

impl Coefficients {
    pub fn from_array(a: [f64; 8]) -> Self {
        Coefficients {
            constant: a[0],
            time: a[1],
            expos: a[2],
            inter: a[3],
            time_expos: a[4],
            time_inter: a[5],
            expos_inter: a[6],
            time_expos_inter: a[7],
        }
    }

    pub fn to_array(self) -> [f64; 8] {
        [
            self.constant,
            self.time,
            self.expos,
            self.inter,
            self.time_expos,
            self.time_inter,
            self.expos_inter,
            self.time_expos_inter,
        ]
    }

    /// Model value for a group and period on relative day `t`.
    pub fn predict(&self, t: i64, exposed: bool) -> f64 {
        design_row(t, exposed)
            .iter()
            .zip(self.to_array())
            .map(|(x, b)| x * b)
            .sum()
    }

    /// (intercept, slope) of the line for one group and period.
    pub fn line(&self, exposed: bool, post: bool) -> (f64, f64) {
        let e = if exposed { 1.0 } else { 0.0 };
        let i = if post { 1.0 } else { 0.0 };
        let intercept = self.constant + e * self.expos + i * self.inter + e * i * self.expos_inter;
        let slope = self.time + e * self.time_expos + i * self.time_inter + e * i * self.time_expos_inter;
        (intercept, slope)
    }

    /// `100 * (inter + expos_inter) / (const + expos)`.
    pub fn relative_increase(&self) -> Result<f64> {
        let baseline = self.constant + self.expos;
        if !(baseline > 0.0) {
            return Err(Error::NonPositiveBaseline(baseline));
        }
        Ok(100.0 * (self.inter + self.expos_inter) / baseline)
    }
}

/// Fitted ITS model with inference.
#[derive(Debug, Clone)]
pub struct ItsFit {
    pub coefficients: Coefficients,
    pub std_errors: [f64; 8],
    pub t_stats: [f64; 8],
    pub p_values: [f64; 8],
    pub f_stat: f64,
    pub f_p_value: f64,
    pub n: usize,
    pub df_resid: usize,
    pub rss: f64,
    pub bandwidth: u32,
}

impl ItsFit {
    /// Two-sided confidence intervals at `level` (e.g. 0.95).
    pub fn confidence_intervals(&self, level: f64) -> [(f64, f64); 8] {
        let q = student_t_critical(1.0 - level, self.df_resid as f64);
        let b = self.coefficients.to_array();
        std::array::from_fn(|j| (b[j] - q * self.std_errors[j], b[j] + q * self.std_errors[j]))
    }

    pub fn relative_increase(&self) -> Result<f64> {
        self.coefficients.relative_increase()
    }
}

fn to8(v: &[f64]) -> [f64; 8] {
    std::array::from_fn(|j| v[j])
}

/// Fits the eight-term ITS regression on a built design.
pub fn fit_ols(design: &Design) -> Result<ItsFit> {
    let x = design.matrix();
    let y = design.response();
    let weights = design.weights();
    let fit = least_squares(&x, &y, weights.as_deref(), &COLUMN_NAMES)?;
    Ok(ItsFit {
        coefficients: Coefficients::from_array(to8(&fit.coefficients)),
        std_errors: to8(&fit.std_errors),
        t_stats: to8(&fit.t_stats),
        p_values: to8(&fit.p_values),
        f_stat: fit.f_stat,
        f_p_value: fit.f_p_value,
        n: fit.n,
        df_resid: fit.df_resid,
        rss: fit.rss,
        bandwidth: design.bandwidth,
    })
}

/// Relative jump of the treatment group at day 0, in percent.
pub fn relative_increase(fit: &ItsFit) -> Result<f64> {
    fit.relative_increase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{DailyPoint, Scope};

    fn points(exposed: bool, f: impl Fn(i64) -> f64) -> Vec<DailyPoint> {
        (-40..=40)
            .flat_map(|t| {
                (0..2).map(move |u| (t, u))
            })
            .map(|(t, u)| DailyPoint {
                user: format!("{}{u}", if exposed { "t" } else { "c" }),
                day: 20_000 + t,
                relative_day: t,
                hate_ratio: f(t),
                tokens: 100,
                hate_tokens: 0,
                scope: Scope::Outside,
            })
            .collect()
    }

    #[test]
    fn constant_response_is_fit_exactly() {
        let d = build_design(&points(true, |_| 0.25), &points(false, |_| 0.25), 30, DesignOptions::default()).unwrap();
        let fit = fit_ols(&d).unwrap();
        let b = fit.coefficients.to_array();
        assert!((b[0] - 0.25).abs() < 1e-12);
        for v in &b[1..] {
            assert!(v.abs() < 1e-12, "{b:?}");
        }
    }

    #[test]
    fn four_lines_are_coefficient_combinations() {
        let c = Coefficients::from_array([0.1, 0.01, 0.2, 0.3, 0.02, 0.03, 0.4, 0.04]);
        assert_eq!(c.line(false, false), (0.1, 0.01));
        let (a, s) = c.line(true, true);
        assert!((a - 1.0).abs() < 1e-15 && (s - 0.1).abs() < 1e-15);
        assert!((c.predict(7, true) - (a + 7.0 * s)).abs() < 1e-12);
        assert!((c.predict(-7, false) - (0.1 - 0.07)).abs() < 1e-15);
    }

    #[test]
    fn relative_increase_definition() {
        let mut c = Coefficients::from_array([0.002, 0.0, 0.001, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.relative_increase().unwrap(), 0.0);
        c.inter = 0.0003;
        c.expos_inter = 0.0006;
        assert!((c.relative_increase().unwrap() - 30.0).abs() < 1e-9);
        c.expos = -0.002;
        assert!(matches!(c.relative_increase(), Err(Error::NonPositiveBaseline(_))));
    }

    #[test]
    fn shifting_y_moves_only_the_constant() {
        let f = |t: i64| 0.01 + 0.0001 * (t as f64).sin().abs() + if t >= 0 { 0.002 } else { 0.0 };
        let base = fit_ols(&build_design(&points(true, f), &points(false, |t| f(t) * 0.5), 40, DesignOptions::default()).unwrap()).unwrap();
        let shifted = fit_ols(
            &build_design(&points(true, |t| f(t) + 0.3), &points(false, |t| f(t) * 0.5 + 0.3), 40, DesignOptions::default()).unwrap(),
        )
        .unwrap();
        let (a, b) = (base.coefficients.to_array(), shifted.coefficients.to_array());
        assert!((b[0] - a[0] - 0.3).abs() < 1e-10);
        for j in 1..8 {
            assert!((b[j] - a[j]).abs() < 1e-10);
        }
    }
}
