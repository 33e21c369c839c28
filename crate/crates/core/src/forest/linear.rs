//! Ordinary least squares with an intercept, solved by Householder QR.

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// sqrt(SSR / (n - p - 1)); zero when there are no residual degrees of freedom.
    pub residual_std: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}

pub fn fit_linear(data: &Dataset) -> Result<LinearModel> {
    let n = data.n_samples();
    let p = data.n_features() + 1;
    if n < p {
        return Err(Error::SingularDesign(format!(
            "{n} samples cannot determine {p} coefficients"
        )));
    }

    // Column-major design matrix with a leading column of ones.
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(p);
    a.push(vec![1.0; n]);
    for j in 0..data.n_features() {
        a.push(data.features().iter().map(|row| row[j]).collect());
    }
    let mut b = data.target().to_vec();

    let scale = a
        .iter()
        .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);

    let mut r_diag = vec![0.0; p];
    for k in 0..p {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * scale.max(1.0) {
            let name = if k == 0 {
                "intercept".to_string()
            } else {
                data.feature_names()[k - 1].clone()
            };
            return Err(Error::SingularDesign(format!(
                "column `{name}` is linearly dependent on earlier columns"
            )));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let v_norm_sq: f64 = v.iter().map(|x| x * x).sum();
        for col in a.iter_mut().skip(k) {
            reflect(&v, v_norm_sq, &mut col[k..]);
        }
        reflect(&v, v_norm_sq, &mut b[k..]);
        r_diag[k] = a[k][k];
    }

    // Back substitution on R beta = Q^T b.
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = b[i];
        for j in i + 1..p {
            s -= a[j][i] * beta[j];
        }
        beta[i] = s / r_diag[i];
    }

    let ssr: f64 = b[p..].iter().map(|v| v * v).sum();
    let dof = n - p;
    let residual_std = if dof > 0 { (ssr / dof as f64).sqrt() } else { 0.0 };

    Ok(LinearModel {
        feature_names: data.feature_names().to_vec(),
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        residual_std,
    })
}

fn reflect(v: &[f64], v_norm_sq: f64, x: &mut [f64]) {
    if v_norm_sq == 0.0 {
        return;
    }
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * dot / v_norm_sq;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        let names = (0..x[0].len()).map(|i| format!("x{i}")).collect();
        Dataset::new(x, y, names).unwrap()
    }

    #[test]
    fn exact_line() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 3.0).collect();
        let m = fit_linear(&dataset(x, y)).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.intercept, 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.residual_std, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn constant_target_has_zero_slopes() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let m = fit_linear(&dataset(x, vec![4.0; 12])).unwrap();
        for b in &m.coefficients {
            assert_abs_diff_eq!(*b, 0.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(m.intercept, 4.0, epsilon = 1e-10);
    }

    #[test]
    fn rank_deficiency_detected() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(
            fit_linear(&dataset(x, y)),
            Err(Error::SingularDesign(_))
        ));

        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let err = fit_linear(&dataset(x, y)).unwrap_err().to_string();
        assert!(err.contains("x1"), "{err}");
    }
}
