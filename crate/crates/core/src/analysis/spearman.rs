use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::student_t_two_sided_p;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankCorrelation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with a two-sided t-approximation p-value.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<RankCorrelation> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 pairs, got {n}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in rank input".into()));
    }
    let rho = pearson(&average_ranks(a), &average_ranks(b))
        .ok_or_else(|| Error::UndefinedCorrelation("one of the vectors is constant".into()))?;
    let df = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        student_t_two_sided_p(rho * (df / (1.0 - rho * rho)).sqrt(), df)
    };
    Ok(RankCorrelation { rho, p_value, n })
}
