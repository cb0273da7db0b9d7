use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::DailyPoint;

/// Smallest bandwidth the estimator accepts, in days.
pub const MIN_BANDWIDTH: u32 = 30;

/// Column names of the ITS design, in order.
pub const COLUMN_NAMES: [&str; 8] = [
    "const",
    "time",
    "expos",
    "inter",
    "time_expos",
    "time_inter",
    "expos_inter",
    "time_expos_inter",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    /// One row per user-day.
    #[default]
    UserDay,
    /// One row per group-day holding the group's mean ratio.
    GroupDay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Unweighted,
    /// Weight rows by their token count.
    TokenCount,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub granularity: Granularity,
    pub weighting: Weighting,
}

/// Regression row for relative day `t`; interrupted from day 0 inclusive.
pub fn design_row(t: i64, exposed: bool) -> [f64; 8] {
    let t = t as f64;
    let e = if exposed { 1.0 } else { 0.0 };
    let i = if t >= 0.0 { 1.0 } else { 0.0 };
    [1.0, t, e, i, t * e, t * i, e * i, t * e * i]
}

/// One regression observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub exposed: bool,
    pub t: i64,
    pub y: f64,
    pub weight: f64,
}

impl Observation {
    pub fn interrupted(&self) -> bool {
        self.t >= 0
    }
}

#[derive(Debug, Clone)]
pub struct Design {
    pub observations: Vec<Observation>,
    pub bandwidth: u32,
    pub weighted: bool,
}

impl Design {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.observations.len();
        let mut x = DMatrix::zeros(n, 8);
        for (i, o) in self.observations.iter().enumerate() {
            for (j, v) in design_row(o.t, o.exposed).iter().enumerate() {
                x[(i, j)] = *v;
            }
        }
        x
    }

    pub fn response(&self) -> DVector<f64> {
        DVector::from_iterator(self.observations.len(), self.observations.iter().map(|o| o.y))
    }

    pub fn weights(&self) -> Option<Vec<f64>> {
        self.weighted
            .then(|| self.observations.iter().map(|o| o.weight).collect())
    }
}

fn group_observations(points: &[DailyPoint], exposed: bool, bandwidth: u32, opts: DesignOptions) -> Vec<Observation> {
    let b = bandwidth as i64;
    let in_window = points.iter().filter(|p| p.relative_day.abs() <= b);
    match opts.granularity {
        Granularity::UserDay => in_window
            .map(|p| Observation {
                exposed,
                t: p.relative_day,
                y: p.hate_ratio,
                weight: p.tokens as f64,
            })
            .collect(),
        Granularity::GroupDay => {
            // (sum ratio, users, hate tokens, tokens)
            let mut days: BTreeMap<i64, (f64, u64, u64, u64)> = BTreeMap::new();
            for p in in_window {
                let e = days.entry(p.relative_day).or_default();
                e.0 += p.hate_ratio;
                e.1 += 1;
                e.2 += p.hate_tokens;
                e.3 += p.tokens;
            }
            days.into_iter()
                .map(|(t, (sum, users, hate, tokens))| {
                    let y = match opts.weighting {
                        Weighting::Unweighted => sum / users as f64,
                        Weighting::TokenCount => hate as f64 / tokens as f64,
                    };
                    Observation {
                        exposed,
                        t,
                        y,
                        weight: tokens as f64,
                    }
                })
                .collect()
        }
    }
}

/// Stacks control then treatment observations within `[-bandwidth, bandwidth]`.
pub fn build_design(treatment: &[DailyPoint], control: &[DailyPoint], bandwidth: u32, opts: DesignOptions) -> Result<Design> {
    if bandwidth < MIN_BANDWIDTH {
        return Err(Error::InvalidInput(format!(
            "bandwidth {bandwidth} is below the minimum of {MIN_BANDWIDTH} days"
        )));
    }
    let mut observations = group_observations(control, false, bandwidth, opts);
    let treated = group_observations(treatment, true, bandwidth, opts);
    for (label, obs) in [("control", &observations), ("treatment", &treated)] {
        let pre = obs.iter().any(|o| !o.interrupted());
        let post = obs.iter().any(|o| o.interrupted());
        if !pre || !post {
            return Err(Error::Unidentifiable(format!(
                "{label} group has no {} observations within bandwidth {bandwidth}",
                if pre { "post-treatment" } else { "pre-treatment" }
            )));
        }
    }
    observations.extend(treated);
    Ok(Design {
        observations,
        bandwidth,
        weighted: opts.weighting == Weighting::TokenCount,
    })
}
