//! Pre-period group series with a slope break, for bandwidth selection.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreSeriesSpec {
    pub seed: u64,
    /// Days -1 ..= -days are generated.
    pub days: i64,
    /// Value at day -1 before noise.
    pub level: f64,
    /// Slope (per day) before `break_day`.
    pub slope_before: f64,
    /// Slope from `break_day` onward.
    pub slope_after: f64,
    pub break_day: Option<i64>,
    /// Gaussian noise sd as a fraction of `level`.
    pub noise: f64,
}

impl Default for PreSeriesSpec {
    fn default() -> Self {
        PreSeriesSpec {
            seed: 1,
            days: 465,
            level: 0.004,
            slope_before: 0.0,
            slope_after: 0.0,
            break_day: None,
            noise: 0.0,
        }
    }
}

/// Continuous piecewise-linear series through `level` at day -1.
pub fn pre_series(spec: &PreSeriesSpec) -> BTreeMap<i64, f64> {
    let mut rng = stream_rng(spec.seed, 11);
    let normal = Normal::new(0.0, (spec.noise * spec.level).abs()).expect("finite sd");
    let b = spec.break_day.unwrap_or(i64::MIN);
    let mean = |d: i64| -> f64 {
        if d >= b {
            spec.level + spec.slope_after * (d + 1) as f64
        } else {
            spec.level + spec.slope_after * (b + 1) as f64 + spec.slope_before * (d - b) as f64
        }
    };
    (1..=spec.days)
        .map(|k| {
            let d = -k;
            let noise = if spec.noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            (d, mean(d) + noise)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinked_mean_is_continuous() {
        let s = pre_series(&PreSeriesSpec {
            days: 100,
            level: 1.0,
            slope_before: 0.0,
            slope_after: 0.01,
            break_day: Some(-60),
            ..PreSeriesSpec::default()
        });
        assert_eq!(s.len(), 100);
        assert!((s[&-1] - 1.0).abs() < 1e-12);
        assert!((s[&-60] - (1.0 - 0.59)).abs() < 1e-12);
        assert!((s[&-61] - s[&-60]).abs() < 1e-12);
        assert!((s[&-100] - s[&-60]).abs() < 1e-12);
    }
}
