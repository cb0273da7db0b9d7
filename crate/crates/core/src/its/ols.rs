//! Least squares by Householder QR with classical inference.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::stats::{f_upper_tail, student_t_two_sided_p};

/// Relative size below which an R diagonal entry marks a collinear column.
const RANK_TOL: f64 = 1e-10;

/// Generic OLS result; column 0 is assumed to be the intercept for the F test.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Unscaled `(X^T W X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
    pub rss: f64,
    pub tss: f64,
    pub sigma2: f64,
    pub n: usize,
    pub df_resid: usize,
    pub f_stat: f64,
    pub f_p_value: f64,
}

/// Fits `y ~ X` (rows of `x` are observations). `weights`, when given, turn
/// the fit into weighted least squares.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, weights: Option<&[f64]>, names: &[&str]) -> Result<LinearFit> {
    let (n, p) = x.shape();
    assert_eq!(y.len(), n, "response length must match design rows");
    assert_eq!(names.len(), p, "one name per design column");
    if n <= p {
        return Err(Error::Unidentifiable(format!("{n} observations for {p} coefficients")));
    }

    let (xs, ys) = match weights {
        Some(w) => {
            assert_eq!(w.len(), n, "one weight per row");
            if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidInput("weights must be positive and finite".into()));
            }
            let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
            let mut xs = x.clone();
            for (i, s) in sw.iter().enumerate() {
                xs.row_mut(i).scale_mut(*s);
            }
            let ys = DVector::from_iterator(n, y.iter().zip(&sw).map(|(a, s)| a * s));
            (xs, ys)
        }
        None => (x.clone(), y.clone()),
    };

    let col_norms: Vec<f64> = (0..p).map(|j| xs.column(j).norm()).collect();
    let qr = xs.clone().qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..p)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOL * col_norms[j].max(f64::MIN_POSITIVE))
        .map(|j| names[j].to_string())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }

    let mut qty = ys.clone();
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&head)
        .ok_or_else(|| Error::RankDeficient(names.iter().map(|s| s.to_string()).collect()))?;

    let fitted = &xs * &beta;
    let resid = &ys - fitted;
    let rss = resid.norm_squared();

    let wsum: f64 = weights.map_or(n as f64, |w| w.iter().sum());
    let ymean = match weights {
        Some(w) => y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum,
        None => y.mean(),
    };
    let tss: f64 = match weights {
        Some(w) => y.iter().zip(w).map(|(a, b)| b * (a - ymean).powi(2)).sum(),
        None => y.iter().map(|a| (a - ymean).powi(2)).sum(),
    };

    let df_resid = n - p;
    let sigma2 = rss / df_resid as f64;
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient(names.iter().map(|s| s.to_string()).collect()))?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let std_errors: Vec<f64> = (0..p).map(|j| (sigma2 * xtx_inv[(j, j)]).sqrt()).collect();
    let t_stats: Vec<f64> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, s)| if *s > 0.0 { b / s } else if *b == 0.0 { 0.0 } else { b.signum() * f64::INFINITY })
        .collect();
    let p_values = t_stats
        .iter()
        .map(|t| student_t_two_sided_p(*t, df_resid as f64))
        .collect();

    let df_model = (p - 1) as f64;
    let explained = (tss - rss).max(0.0);
    let f_stat = if p == 1 {
        f64::NAN
    } else if rss > 0.0 {
        (explained / df_model) / sigma2
    } else if explained > 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    };
    let f_p_value = f_upper_tail(f_stat, df_model, df_resid as f64);

    Ok(LinearFit {
        coefficients,
        std_errors,
        t_stats,
        p_values,
        xtx_inv,
        rss,
        tss,
        sigma2,
        n,
        df_resid,
        f_stat,
        f_p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_columns_are_named() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, 2.0, 1.0, 2.0, 4.0, 1.0, 3.0, 6.0, 1.0, 4.0, 8.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 5.0]);
        let err = least_squares(&x, &y, None, &["const", "a", "b"]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(ref c) if c == &vec!["b".to_string()]));
    }

    #[test]
    fn simple_line_inference() {
        // y = 1 + 2x + e, textbook values computed by hand
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [3.1, 4.9, 7.2, 8.8, 11.0];
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let y = DVector::from_row_slice(&ys);
        let fit = least_squares(&x, &y, None, &["const", "x"]).unwrap();
        assert!((fit.coefficients[1] - 1.97).abs() < 1e-12);
        assert!((fit.coefficients[0] - 1.09).abs() < 1e-12);
        // rss = 0.091, sigma2 = rss/3, se(slope) = sqrt(sigma2 / 10)
        assert!((fit.rss - 0.091).abs() < 1e-12);
        assert!((fit.std_errors[1] - (0.091_f64 / 3.0 / 10.0).sqrt()).abs() < 1e-12);
        // F equals t^2 with a single regressor
        assert!((fit.f_stat - fit.t_stats[1].powi(2)).abs() < 1e-6 * fit.f_stat);
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_element(2, 2, 1.0);
        let y = DVector::from_element(2, 1.0);
        assert!(matches!(least_squares(&x, &y, None, &["a", "b"]), Err(Error::Unidentifiable(_))));
    }
}
