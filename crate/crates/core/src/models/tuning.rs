use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::svr::{fit_svr, predict_svr, Standardization, SvrModel, SvrParams};
use super::{check_design, ModelError};

/// Hyperparameter grid for the rbf SVR. Gamma values are multiples of
/// `1 / (d * var)`, with `var` the variance of the standardized training
/// matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrGrid {
    pub c: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub gamma_factors: Vec<f64>,
    /// Cross-validation folds inside the training rows.
    pub folds: usize,
}

impl Default for SvrGrid {
    fn default() -> Self {
        Self {
            c: vec![1.0, 10.0, 100.0],
            epsilon: vec![0.1, 0.5, 1.0],
            gamma_factors: vec![0.5, 1.0, 2.0],
            folds: 5,
        }
    }
}

impl SvrGrid {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.c.is_empty() || self.epsilon.is_empty() || self.gamma_factors.is_empty() {
            return Err(ModelError::Parameter("SVR grid has an empty axis".into()));
        }
        if self.folds < 2 {
            return Err(ModelError::Parameter(format!(
                "grid search needs at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.gamma_factors.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(ModelError::Parameter("gamma factors must be positive".into()));
        }
        Ok(())
    }
}

/// `1 / (d * var)` over the standardized rows.
pub fn base_gamma(x: &[Vec<f64>]) -> f64 {
    let s = Standardization::fit(x);
    let z: Vec<f64> = x.iter().flat_map(|r| s.apply(r)).collect();
    let d = s.mean.len() as f64;
    let m = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / z.len() as f64;
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0 / d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedSvr {
    pub params: SvrParams,
    pub validation_mae: f64,
    pub model: SvrModel,
}

/// Grid search by k-fold validation MAE on the given rows only, then a
/// refit on all of them. Ties go to the first combination in
/// (C, epsilon, gamma) order.
pub fn tune_svr(
    x: &[Vec<f64>],
    y: &[f64],
    feature_names: &[String],
    grid: &SvrGrid,
    seed: u64,
) -> Result<TunedSvr, ModelError> {
    grid.validate()?;
    check_design(x, y, feature_names)?;
    let n = x.len();
    if n < 2 * grid.folds {
        return Err(ModelError::Parameter(format!(
            "{n} rows are too few for {}-fold validation",
            grid.folds
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: Vec<usize> = {
        let mut f = vec![0; n];
        for (pos, &row) in order.iter().enumerate() {
            f[row] = pos % grid.folds;
        }
        f
    };
    let gamma0 = base_gamma(x);

    let mut best: Option<(f64, SvrParams)> = None;
    let mut last_err = None;
    for &c in &grid.c {
        for &epsilon in &grid.epsilon {
            for &factor in &grid.gamma_factors {
                let params = SvrParams::new(c, epsilon, KernelSpec::Rbf { gamma: factor * gamma0 });
                match cross_validated_mae(x, y, feature_names, &fold_of, grid.folds, &params) {
                    Ok(score) => {
                        if best.as_ref().is_none_or(|(b, _)| score < *b) {
                            best = Some((score, params));
                        }
                    }
                    Err(e) => last_err = Some(e),
                }
            }
        }
    }
    let Some((validation_mae, params)) = best else {
        return Err(last_err.unwrap_or_else(|| ModelError::Parameter("empty grid".into())));
    };
    let model = fit_svr(x, y, feature_names, &params)?;
    Ok(TunedSvr {
        params,
        validation_mae,
        model,
    })
}

fn cross_validated_mae(
    x: &[Vec<f64>],
    y: &[f64],
    names: &[String],
    fold_of: &[usize],
    folds: usize,
    params: &SvrParams,
) -> Result<f64, ModelError> {
    let mut abs_err = 0.0;
    for f in 0..folds {
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        for i in (0..x.len()).filter(|&i| fold_of[i] != f) {
            tx.push(x[i].clone());
            ty.push(y[i]);
        }
        let model = fit_svr(&tx, &ty, names, params)?;
        for i in (0..x.len()).filter(|&i| fold_of[i] == f) {
            abs_err += (predict_svr(&model, &x[i])? - y[i]).abs();
        }
    }
    Ok(abs_err / x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Vec<Vec<f64>>, Vec<f64>, Vec<String>) {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0]).collect();
        let y = x.iter().map(|r| (r[0] * 1.5).sin() * 4.0 + 10.0).collect();
        (x, y, vec!["f0".into()])
    }

    #[test]
    fn tuning_is_deterministic() {
        let (x, y, names) = data();
        let a = tune_svr(&x, &y, &names, &SvrGrid::default(), 11).unwrap();
        let b = tune_svr(&x, &y, &names, &SvrGrid::default(), 11).unwrap();
        assert_eq!(a, b);
        assert!(a.validation_mae < 1.0);
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let (x, y, names) = data();
        let grid = SvrGrid {
            c: vec![10.0],
            epsilon: vec![0.5],
            gamma_factors: vec![1.0],
            folds: 4,
        };
        let t = tune_svr(&x, &y, &names, &grid, 0).unwrap();
        assert_eq!(t.params.c, 10.0);
        assert_eq!(t.params.epsilon, 0.5);
        assert_eq!(t.params.kernel, KernelSpec::Rbf { gamma: base_gamma(&x) });
    }

    #[test]
    fn degenerate_grids_rejected() {
        let (x, y, names) = data();
        let g = SvrGrid {
            folds: 1,
            ..Default::default()
        };
        assert!(tune_svr(&x, &y, &names, &g, 0).is_err());
        let mut g = SvrGrid::default();
        g.c.clear();
        assert!(tune_svr(&x, &y, &names, &g, 0).is_err());
    }

    #[test]
    fn base_gamma_of_standardized_data() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * 3) as f64 + 1.0]).collect();
        assert!((base_gamma(&x) - 0.5).abs() < 1e-12);
    }
}
