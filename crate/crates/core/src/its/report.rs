//! Fit, sweep and plot-data artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::{ItsFit, SweepTable, COLUMN_NAMES};
use crate::error::Result;
use crate::fsutil::{write_atomic, write_json};

#[derive(Debug, Serialize)]
pub struct CoefficientReport {
    pub name: &'static str,
    pub estimate: f64,
    pub std_error: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub bandwidth: u32,
    pub n: usize,
    pub df_resid: usize,
    pub coefficients: Vec<CoefficientReport>,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub relative_increase_pct: Option<f64>,
}

impl FitReport {
    pub fn new(fit: &ItsFit) -> Self {
        let b = fit.coefficients.to_array();
        FitReport {
            bandwidth: fit.bandwidth,
            n: fit.n,
            df_resid: fit.df_resid,
            coefficients: (0..8)
                .map(|j| CoefficientReport {
                    name: COLUMN_NAMES[j],
                    estimate: b[j],
                    std_error: fit.std_errors[j],
                    t: fit.t_stats[j],
                    p: fit.p_values[j],
                })
                .collect(),
            f_statistic: fit.f_stat,
            f_p_value: fit.f_p_value,
            relative_increase_pct: fit.relative_increase().ok(),
        }
    }
}

pub fn write_fit_json(path: &Path, fit: &ItsFit) -> Result<()> {
    write_json(path, &FitReport::new(fit))
}

/// `bandwidth,coefficient,value,ci_low,ci_high,p` rows, bandwidth ascending.
pub fn write_sweep_csv(path: &Path, table: &SweepTable, level: f64) -> Result<()> {
    let mut out = String::from("bandwidth,coefficient,value,ci_low,ci_high,p\n");
    for fit in table.fits() {
        let b = fit.coefficients.to_array();
        let ci = fit.confidence_intervals(level);
        for j in 0..8 {
            out.push_str(&format!(
                "{},{},{:?},{:?},{:?},{:?}\n",
                fit.bandwidth, COLUMN_NAMES[j], b[j], ci[j].0, ci[j].1, fit.p_values[j]
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Best-fit line endpoints for each group and period.
pub fn write_plot_lines_csv(path: &Path, fit: &ItsFit) -> Result<()> {
    let b = fit.bandwidth as i64;
    let mut out = String::from("group,period,t_start,t_end,y_start,y_end\n");
    for (group, exposed) in [("control", false), ("treatment", true)] {
        for (period, post, t0, t1) in [("pre", false, -b, -1), ("post", true, 0, b)] {
            let (a, s) = fit.coefficients.line(exposed, post);
            out.push_str(&format!(
                "{group},{period},{t0},{t1},{},{}\n",
                a + s * t0 as f64,
                a + s * t1 as f64
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Daily means per group: `group,relative_day,mean,n`.
pub fn write_daily_means_csv(path: &Path, groups: &[(&str, &BTreeMap<i64, (f64, usize)>)]) -> Result<()> {
    let mut out = String::from("group,relative_day,mean,n\n");
    for (name, series) in groups {
        for (day, (mean, n)) in series.iter() {
            out.push_str(&format!("{name},{day},{mean},{n}\n"));
        }
    }
    write_atomic(path, out.as_bytes())
}
