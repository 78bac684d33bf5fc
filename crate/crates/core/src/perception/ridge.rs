use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear model fitted by ridge-regularized normal equations. The intercept
/// is not penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Solves `(XcᵀXc + λI) β = Xcᵀyc` on centered data, then recovers the
/// intercept from the means.
pub fn fit_ridge<R: AsRef<[f64]>>(x: &[R], y: &[f64], lambda: f64) -> Result<RidgeModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidArgument(format!("{} rows but {} targets", x.len(), y.len())));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let p = x[0].as_ref().len();
    if x.iter().any(|r| r.as_ref().len() != p) {
        return Err(Error::InvalidArgument("rows have differing lengths".into()));
    }
    let n = x.len() as f64;
    let mut xm = vec![0.0; p];
    for r in x {
        for (m, v) in xm.iter_mut().zip(r.as_ref()) {
            *m += v / n;
        }
    }
    let ym = y.iter().sum::<f64>() / n;

    let mut a = vec![0.0; p * p];
    let mut b = vec![0.0; p];
    let mut xc = vec![0.0; p];
    for (r, &t) in x.iter().zip(y) {
        for (c, (v, m)) in xc.iter_mut().zip(r.as_ref().iter().zip(&xm)) {
            *c = v - m;
        }
        let yc = t - ym;
        for i in 0..p {
            b[i] += xc[i] * yc;
            for j in 0..=i {
                a[i * p + j] += xc[i] * xc[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[j * p + i] = a[i * p + j];
        }
        a[i * p + i] += lambda;
    }
    let beta = cholesky_solve(&mut a, &b, p).ok_or_else(|| {
        Error::Numerical(format!(
            "normal equations are rank-deficient with lambda = {lambda}; use lambda > 0"
        ))
    })?;
    let intercept = ym - beta.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>();
    Ok(RidgeModel {
        intercept,
        coefficients: beta,
        lambda,
    })
}

/// In-place Cholesky factorization and solve of a symmetric `p×p` system.
/// `None` when a pivot is not safely positive.
fn cholesky_solve(a: &mut [f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let scale = (0..p).map(|i| a[i * p + i].abs()).fold(0.0, f64::max);
    let tol = scale * 1e-12;
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > tol) {
            return None;
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    // L z = b
    let mut z = b.to_vec();
    for i in 0..p {
        for k in 0..i {
            z[i] -= a[i * p + k] * z[k];
        }
        z[i] /= a[i * p + i];
    }
    // Lᵀ x = z
    for i in (0..p).rev() {
        for k in i + 1..p {
            z[i] -= a[k * p + i] * z[k];
        }
        z[i] /= a[i * p + i];
    }
    Some(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] - 2.0).collect();
        let m = fit_ridge(&x, &y, 0.0).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((m.intercept + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_needs_lambda() {
        let x: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(fit_ridge(&x, &y, 0.0), Err(Error::Numerical(_))));
        assert!(fit_ridge(&x, &y, 1e-3).is_ok());
    }
}
