//! Reference implementations used to cross-check the library.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// Least squares through the normal equations `X'X b = X'y`, solved by
/// Gaussian elimination with partial pivoting.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in col + 1..p {
            let f = a[r][col] / a[col][col];
            for c in col..=p {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| a[i][j] * b[j]).sum();
        b[i] = (a[i][p] - s) / a[i][i];
    }
    b
}

/// Rolling one-step-ahead bandwidth search written from the definition:
/// for round r the line is fit on days -(B + r) ..= -(r + 1) through raw
/// 2x2 normal equations and evaluated at day -r.
pub fn cv_oracle(series: &BTreeMap<i64, f64>, candidates: &[u32], rounds: u32) -> (Vec<f64>, u32) {
    let mut rmse = Vec::new();
    for &b in candidates {
        let mut sse = 0.0;
        for r in 1..=rounds as i64 {
            let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for d in -(b as i64 + r)..=-(r + 1) {
                let x = d as f64;
                let v = series[&d];
                n += 1.0;
                sx += x;
                sy += v;
                sxx += x * x;
                sxy += x * v;
            }
            let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            let intercept = (sy - slope * sx) / n;
            let e = intercept + slope * (-r as f64) - series[&-r];
            sse += e * e;
        }
        rmse.push((sse / rounds as f64).sqrt());
    }
    let scale = series.values().fold(0.0_f64, |m, v| m.max(v.abs()));
    let best = rmse.iter().copied().fold(f64::INFINITY, f64::min);
    let selected = candidates
        .iter()
        .zip(&rmse)
        .filter(|(_, r)| **r <= best + 1e-9 * scale)
        .map(|(b, _)| *b)
        .max()
        .unwrap();
    (rmse, selected)
}

/// Mid-ranks by counting: rank = #smaller + (#equal + 1) / 2.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let eq = v.iter().filter(|y| *y == x).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

/// Tie-corrected Spearman from the sum of squared rank differences.
pub fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ra = brute_ranks(a);
    let rb = brute_ranks(b);
    let tie_term = |v: &[f64]| -> f64 {
        let mut seen: Vec<f64> = Vec::new();
        let mut t = 0.0;
        for x in v {
            if !seen.contains(x) {
                seen.push(*x);
                let c = v.iter().filter(|y| *y == x).count() as f64;
                t += (c * c * c - c) / 12.0;
            }
        }
        t
    };
    let base = (n * n * n - n) / 12.0;
    let sa = base - tie_term(a);
    let sb = base - tie_term(b);
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    (sa + sb - d2) / (2.0 * (sa * sb).sqrt())
}
