use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_design, ModelError};

/// Pivots below this fraction of the largest pivot (on unit-norm centred
/// columns) mark a column as linearly dependent.
const RANK_TOLERANCE: f64 = 1e-10;

/// Ordinary least-squares model `y = intercept + coefficients · x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub feature_names: Vec<String>,
}

/// Least-squares fit with intercept.
///
/// Columns are centred and scaled to unit norm, then solved through a
/// column-pivoted QR decomposition so exact or near collinearity surfaces as
/// [`ModelError::SingularDesign`] naming the dependent columns.
pub fn fit_lr(x: &[Vec<f64>], y: &[f64], feature_names: &[String]) -> Result<LrModel, ModelError> {
    let d = check_design(x, y, feature_names)?;
    let n = x.len();
    if n < d + 1 {
        return Err(ModelError::Parameter(format!(
            "linear regression needs at least {} rows for {d} features, got {n}",
            d + 1
        )));
    }

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let col_mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut design = DMatrix::from_fn(n, d, |i, j| x[i][j] - col_mean[j]);
    let mut norms = Vec::with_capacity(d);
    let mut dependent = Vec::new();
    for (j, name) in feature_names.iter().enumerate() {
        let norm = design.column(j).norm();
        if norm == 0.0 {
            dependent.push(name.clone());
            norms.push(1.0);
        } else {
            design.column_mut(j).unscale_mut(norm);
            norms.push(norm);
        }
    }
    if !dependent.is_empty() {
        return Err(ModelError::SingularDesign { dependent });
    }

    let qr = design.col_piv_qr();
    let r = qr.r();
    let mut order = DMatrix::from_fn(1, d, |_, j| j as f64);
    qr.p().permute_columns(&mut order);
    let lead = r[(0, 0)].abs();
    let dependent: Vec<String> = (0..d)
        .filter(|&k| r[(k, k)].abs() <= RANK_TOLERANCE * lead)
        .map(|k| feature_names[order[(0, k)] as usize].clone())
        .collect();
    if !dependent.is_empty() {
        return Err(ModelError::SingularDesign { dependent });
    }

    let rhs = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let qty = qr.q().transpose() * rhs;
    let permuted = r
        .rows(0, d)
        .solve_upper_triangular(&qty.rows(0, d))
        .ok_or_else(|| ModelError::SingularDesign {
            dependent: feature_names.to_vec(),
        })?;
    let mut beta = vec![0.0; d];
    for k in 0..d {
        beta[order[(0, k)] as usize] = permuted[k];
    }
    let coefficients: Vec<f64> = (0..d).map(|j| beta[j] / norms[j]).collect();
    let intercept = y_mean - coefficients.iter().zip(&col_mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LrModel {
        coefficients,
        intercept,
        feature_names: feature_names.to_vec(),
    })
}

/// `intercept + dot(coefficients, x)`.
pub fn predict_lr(model: &LrModel, x: &[f64]) -> Result<f64, ModelError> {
    if x.len() != model.coefficients.len() {
        return Err(ModelError::DimensionMismatch {
            expected: model.coefficients.len(),
            got: x.len(),
        });
    }
    Ok(model.intercept + model.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>())
}
