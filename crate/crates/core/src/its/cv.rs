use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::design::MIN_BANDWIDTH;
use crate::error::{Error, Result};
use crate::lexicon::DailyPoint;

pub const DEFAULT_CV_ROUNDS: u32 = 100;

/// Bandwidths 30, 35, ..., 365.
pub fn default_candidates() -> Vec<u32> {
    (30..=365).step_by(5).collect()
}

/// Rolling-origin leave-one-out search over bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthSearch {
    pub candidates: Vec<u32>,
    pub rounds: u32,
    pub rmse: Vec<f64>,
    pub selected: u32,
}

/// Mean hate ratio and user count per relative day.
pub fn group_daily_means(points: &[DailyPoint]) -> BTreeMap<i64, (f64, usize)> {
    let mut acc: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for p in points {
        let e = acc.entry(p.relative_day).or_default();
        e.0 += p.hate_ratio;
        e.1 += 1;
    }
    for v in acc.values_mut() {
        v.0 /= v.1 as f64;
    }
    acc
}

/// Number of consecutive days -1, -2, ... present in the series.
fn contiguous_pre_days(series: &BTreeMap<i64, f64>) -> u32 {
    let mut d = 0u32;
    while series.contains_key(&(-(d as i64) - 1)) {
        d += 1;
    }
    d
}

/// Squared error of predicting day `-round` from a line fit on the `bandwidth`
/// days before `-(round + 1)` inclusive.
fn round_error(values: &[f64], bandwidth: u32, round: u32) -> f64 {
    // values[k] holds day -(k + 1)
    let first = round as usize; // day -(round + 1)
    let b = bandwidth as usize;
    let n = b as f64;
    // x = -(k + 1) for k in first..first + b
    let mut sx = 0.0;
    let mut sy = 0.0;
    for k in first..first + b {
        sx += -((k + 1) as f64);
        sy += values[k];
    }
    let mx = sx / n;
    let my = sy / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for k in first..first + b {
        let dx = -((k + 1) as f64) - mx;
        sxx += dx * dx;
        sxy += dx * (values[k] - my);
    }
    let slope = sxy / sxx;
    let x_target = -(round as f64);
    let pred = my + slope * (x_target - mx);
    let err = pred - values[round as usize - 1];
    err * err
}

/// Selects the bandwidth whose rolling one-step-ahead predictions over the
/// last `rounds` pre-treatment days have the smallest RMSE. Near-ties
/// (within `1e-9` of the series scale) go to the larger bandwidth.
pub fn cv_bandwidth(series: &BTreeMap<i64, f64>, candidates: &[u32], rounds: u32) -> Result<BandwidthSearch> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate bandwidths".into()));
    }
    if rounds == 0 {
        return Err(Error::InvalidInput("cross-validation needs at least one round".into()));
    }
    if let Some(b) = candidates.iter().find(|&&b| b < MIN_BANDWIDTH) {
        return Err(Error::InvalidInput(format!("candidate bandwidth {b} is below {MIN_BANDWIDTH}")));
    }
    let mut candidates = candidates.to_vec();
    candidates.sort_unstable();
    candidates.dedup();

    let covered = contiguous_pre_days(series);
    let max_candidate = *candidates.last().expect("non-empty");
    if covered < max_candidate + rounds {
        let feasible = candidates
            .iter()
            .copied()
            .filter(|&b| b + rounds <= covered)
            .max();
        return Err(Error::InsufficientCoverage {
            reason: format!(
                "bandwidth {max_candidate} with {rounds} rounds needs days -{}..-1, series covers -{covered}..-1",
                max_candidate + rounds
            ),
            max_feasible: feasible,
        });
    }

    let values: Vec<f64> = (0..covered as i64).map(|k| series[&(-k - 1)]).collect();
    let rmse: Vec<f64> = candidates
        .par_iter()
        .map(|&b| {
            let sse: f64 = (1..=rounds).map(|r| round_error(&values, b, r)).sum();
            (sse / rounds as f64).sqrt()
        })
        .collect();

    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let best = rmse.iter().copied().fold(f64::INFINITY, f64::min);
    let tie_tol = 1e-9 * scale;
    let selected = candidates
        .iter()
        .zip(&rmse)
        .filter(|(_, r)| **r <= best + tie_tol)
        .map(|(b, _)| *b)
        .max()
        .expect("at least one candidate attains the minimum");

    Ok(BandwidthSearch {
        candidates,
        rounds,
        rmse,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(len: i64, f: impl Fn(i64) -> f64) -> BTreeMap<i64, f64> {
        (1..=len).map(|k| (-k, f(-k))).collect()
    }

    #[test]
    fn linear_series_selects_largest_candidate() {
        let s = series(500, |d| 0.003 + 1e-5 * d as f64);
        let r = cv_bandwidth(&s, &default_candidates(), 100).unwrap();
        assert_eq!(r.selected, 365);
        assert!(r.rmse.iter().all(|e| *e < 1e-12));
    }

    #[test]
    fn short_series_reports_feasible_maximum() {
        let s = series(200, |_| 0.1);
        match cv_bandwidth(&s, &default_candidates(), 100).unwrap_err() {
            Error::InsufficientCoverage { max_feasible, .. } => assert_eq!(max_feasible, Some(100)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn gaps_limit_coverage() {
        let mut s = series(500, |_| 0.1);
        s.remove(&-50);
        assert!(matches!(
            cv_bandwidth(&s, &[30], 30),
            Err(Error::InsufficientCoverage { max_feasible: None, .. })
        ));
    }

    #[test]
    fn worked_example_window() {
        // bandwidth 50, round 1 fits days -51..-2 and predicts -1
        let s = series(200, |d| if d == -1 { 1.0 } else { 0.0 });
        let r = cv_bandwidth(&s, &[50], 1).unwrap();
        assert!((r.rmse[0] - 1.0).abs() < 1e-12);
        let s = series(200, |d| if d == -52 { 1.0 } else { 0.0 });
        assert_eq!(cv_bandwidth(&s, &[50], 1).unwrap().rmse[0], 0.0);
    }

    #[test]
    fn rejects_small_candidates() {
        assert!(cv_bandwidth(&series(300, |_| 0.0), &[25], 10).is_err());
    }
}
