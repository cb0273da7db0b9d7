use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ridge as a fraction of the mean feature variance.
pub const RIDGE_FRACTION: f64 = 1e-6;
const INVERSE_CHECK_TOL: f64 = 1e-6;

/// Feature covariance with its (ridged) inverse.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub covariance: DMatrix<f64>,
    pub ridge: f64,
    pub inverse: DMatrix<f64>,
    // whitening: z = lower_inv * diag(1/scale) * x
    scale: DVector<f64>,
    lower_inv: DMatrix<f64>,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl CovarianceEstimate {
    /// Sample covariance (n - 1 denominator) of `rows`, ridged by
    /// `RIDGE_FRACTION * trace / dim`.
    pub fn estimate(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("covariance needs at least 2 rows, got {n}")));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("feature rows differ in dimension".into()));
        }
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = DMatrix::zeros(dim, dim);
        let mut centered = vec![0.0; dim];
        for r in rows {
            for (c, (v, m)) in centered.iter_mut().zip(r.iter().zip(&mean)) {
                *c = v - m;
            }
            for i in 0..dim {
                let ci = centered[i];
                if ci == 0.0 {
                    continue;
                }
                for j in i..dim {
                    cov[(i, j)] += ci * centered[j];
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov[(i, j)] / (n - 1) as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let trace = cov.trace();
        let ridge = if trace > 0.0 {
            RIDGE_FRACTION * trace / dim as f64
        } else {
            RIDGE_FRACTION
        };
        Self::from_covariance(cov, Some(ridge))
    }

    /// Inverts `covariance + ridge * I`. Without a ridge a singular matrix is
    /// an error.
    pub fn from_covariance(covariance: DMatrix<f64>, ridge: Option<f64>) -> Result<Self> {
        let dim = covariance.nrows();
        if dim == 0 || covariance.ncols() != dim {
            return Err(Error::InvalidInput("covariance must be square and non-empty".into()));
        }
        let eps = ridge.unwrap_or(0.0);
        let ridged = &covariance + DMatrix::identity(dim, dim) * eps;
        let scale = DVector::from_iterator(dim, (0..dim).map(|i| ridged[(i, i)].max(0.0).sqrt()));
        if scale.iter().any(|s| *s == 0.0) {
            return Err(Error::SingularCovariance);
        }
        let corr = DMatrix::from_fn(dim, dim, |i, j| ridged[(i, j)] / (scale[i] * scale[j]));
        let chol = corr.clone().cholesky().ok_or(Error::SingularCovariance)?;
        let lower = chol.l();
        let lower_inv = lower
            .solve_lower_triangular(&DMatrix::identity(dim, dim))
            .ok_or(Error::SingularCovariance)?;
        let corr_inv = lower_inv.transpose() * &lower_inv;
        let mut inverse = DMatrix::from_fn(dim, dim, |i, j| corr_inv[(i, j)] / (scale[i] * scale[j]));

        let identity = DMatrix::<f64>::identity(dim, dim);
        let mut residual = inf_norm(&(&ridged * &inverse - &identity));
        // one or two Newton-Schulz refinements recover digits lost to scaling
        for _ in 0..2 {
            if residual < INVERSE_CHECK_TOL {
                break;
            }
            let correction = &identity - &ridged * &inverse;
            inverse = &inverse + &inverse * correction;
            residual = inf_norm(&(&ridged * &inverse - &identity));
        }
        if !(residual < INVERSE_CHECK_TOL) {
            return Err(Error::SingularCovariance);
        }
        // symmetrize
        let inverse = (&inverse + inverse.transpose()) * 0.5;
        Ok(CovarianceEstimate {
            covariance: ridged,
            ridge: eps,
            inverse,
            scale,
            lower_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    /// Coordinates in which Mahalanobis distance is Euclidean.
    pub fn whiten(&self, x: &[f64]) -> Vec<f64> {
        let scaled = DVector::from_iterator(x.len(), x.iter().zip(self.scale.iter()).map(|(v, s)| v / s));
        (&self.lower_inv * scaled).iter().copied().collect()
    }

    /// Infinity norm of `S S^{-1} - I` for the ridged covariance.
    pub fn inverse_check(&self) -> f64 {
        let dim = self.dim();
        inf_norm(&(&self.covariance * &self.inverse - DMatrix::<f64>::identity(dim, dim)))
    }
}

/// `sqrt((x - y)^T S^{-1} (x - y))`.
pub fn mahalanobis_distance(x: &[f64], y: &[f64], cov: &CovarianceEstimate) -> Result<f64> {
    if x.len() != y.len() || x.len() != cov.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {} with covariance of size {}",
            x.len(),
            y.len(),
            cov.dim()
        )));
    }
    let d = DVector::from_iterator(x.len(), x.iter().zip(y).map(|(a, b)| a - b));
    let q = (d.transpose() * &cov.inverse * &d)[(0, 0)];
    Ok(q.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_are_at_zero() {
        let cov = CovarianceEstimate::from_covariance(DMatrix::identity(3, 3), None).unwrap();
        assert_eq!(mahalanobis_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &cov).unwrap(), 0.0);
    }

    #[test]
    fn identity_covariance_is_euclidean() {
        let cov = CovarianceEstimate::from_covariance(DMatrix::identity(2, 2), None).unwrap();
        let d = mahalanobis_distance(&[0.0, 0.0], &[3.0, 4.0], &cov).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_quadratic_form() {
        let cov = CovarianceEstimate::from_covariance(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])), None).unwrap();
        let d = mahalanobis_distance(&[1.0, 1.0], &[0.0, 0.0], &cov).unwrap();
        assert!((d - 2.5_f64.sqrt()).abs() < 1e-12);
        assert!((d - 1.581_138_830_084_19).abs() < 1e-10);
    }

    #[test]
    fn singular_without_ridge_is_an_error() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            CovarianceEstimate::from_covariance(s.clone(), None),
            Err(Error::SingularCovariance)
        ));
        let ok = CovarianceEstimate::from_covariance(s, Some(1e-6)).unwrap();
        assert!(ok.inverse_check() < 1e-6);
    }

    #[test]
    fn whitening_matches_quadratic_form() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let a = i as f64;
                vec![16_000.0 + 37.0 * (a * 1.3).sin() * 100.0, a * 3.0 + (a * 0.7).cos(), (a * 0.1).sin(), 0.0]
            })
            .collect();
        let cov = CovarianceEstimate::estimate(&rows).unwrap();
        assert!(cov.inverse_check() < 1e-6);
        let (x, y) = (&rows[3], &rows[17]);
        let direct = mahalanobis_distance(x, y, &cov).unwrap();
        let zx = cov.whiten(x);
        let zy = cov.whiten(y);
        let via_whitening = zx.iter().zip(&zy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!((direct - via_whitening).abs() < 1e-6 * direct.max(1.0));
        assert!((direct - mahalanobis_distance(y, x, &cov).unwrap()).abs() < 1e-12);
    }
}
