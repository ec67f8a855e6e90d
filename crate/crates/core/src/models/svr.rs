//! ε-insensitive support vector regression.
//!
//! The soft-margin dual is solved over 2l variables `[α; α*]`:
//!
//! ```text
//! min ½ (α − α*)ᵀ K (α − α*) + ε Σ (α + α*) − Σ y (α − α*)
//! s.t. Σ (α − α*) = 0,  0 ≤ α, α* ≤ C
//! ```
//!
//! with sequential minimal optimisation, using the maximal-violating first
//! index and second-order selection of the partner. The fitted regressor is
//! `f(x) = Σ v_i k(x, x_i) + b` with `v = α − α*`.

use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::{check_design, ModelError};

/// Dual weights at or below this magnitude do not make a support vector.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
    /// Stop once the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl SvrParams {
    pub fn new(c: f64, epsilon: f64, kernel: KernelSpec) -> Self {
        Self {
            c,
            epsilon,
            kernel,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(ModelError::Parameter(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(ModelError::Parameter(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(ModelError::Parameter(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        self.kernel.validate()
    }
}

/// Per-feature `(x - mean) / scale` map; zero-variance features keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let d = x.first().map_or(0, |r| r.len());
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// A fitted support vector regressor. Support vectors are stored in
/// standardized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_weights: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub epsilon: f64,
    pub c: f64,
    pub standardization: Standardization,
    pub feature_names: Vec<String>,
    /// Dual objective at the returned solution (minimisation form).
    pub dual_objective: f64,
    pub kkt_violation: f64,
    pub iterations: usize,
}

impl SvrModel {
    pub fn n_features(&self) -> usize {
        self.standardization.mean.len()
    }
}

/// Solver state over the 2l dual variables; index `s < l` is `α_s` (sign +1),
/// `s >= l` is `α*_{s-l}` (sign −1).
struct Smo<'a> {
    kernel: &'a [Vec<f64>],
    l: usize,
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    linear: Vec<f64>,
}

impl Smo<'_> {
    fn sign(&self, s: usize) -> f64 {
        if s < self.l {
            1.0
        } else {
            -1.0
        }
    }

    fn q(&self, s: usize, t: usize) -> f64 {
        self.sign(s) * self.sign(t) * self.kernel[s % self.l][t % self.l]
    }

    fn at_upper(&self, s: usize) -> bool {
        self.alpha[s] >= self.c
    }

    fn at_lower(&self, s: usize) -> bool {
        self.alpha[s] <= 0.0
    }

    /// Returns the working pair, or `None` with the current violation once
    /// it falls below `tol`.
    fn select(&self, tol: f64) -> (Option<(usize, usize)>, f64) {
        let n = 2 * self.l;
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = None;
        for t in 0..n {
            let yg = -self.sign(t) * self.grad[t];
            let movable = if self.sign(t) > 0.0 {
                !self.at_upper(t)
            } else {
                !self.at_lower(t)
            };
            if movable && yg >= gmax {
                gmax = yg;
                gmax_idx = Some(t);
            }
        }
        let Some(i) = gmax_idx else {
            return (None, 0.0);
        };

        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = None;
        let mut best_obj = f64::INFINITY;
        let qii = self.kernel[i % self.l][i % self.l];
        for j in 0..n {
            let movable = if self.sign(j) > 0.0 {
                !self.at_lower(j)
            } else {
                !self.at_upper(j)
            };
            if !movable {
                continue;
            }
            let yg = self.sign(j) * self.grad[j];
            gmax2 = gmax2.max(yg);
            let grad_diff = gmax + yg;
            if grad_diff > 0.0 {
                let qjj = self.kernel[j % self.l][j % self.l];
                let quad = qii + qjj - 2.0 * self.sign(i) * self.sign(j) * self.q(i, j);
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    best = Some(j);
                }
            }
        }
        let violation = gmax + gmax2;
        match best {
            Some(j) if violation >= tol => (Some((i, j)), violation),
            _ => (None, violation.max(0.0)),
        }
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let qii = self.kernel[i % self.l][i % self.l];
        let qjj = self.kernel[j % self.l][j % self.l];
        let qij = self.q(i, j);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        if self.sign(i) != self.sign(j) {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..2 * self.l {
            self.grad[t] += self.q(i, t) * di + self.q(j, t) * dj;
        }
    }

    /// Offset `b` from the KKT conditions: the mean over free variables, or
    /// the midpoint of the feasible interval when none are free.
    fn bias(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut free = 0usize;
        for t in 0..2 * self.l {
            let yg = self.sign(t) * self.grad[t];
            let positive = self.sign(t) > 0.0;
            if self.at_upper(t) {
                if positive {
                    lb = lb.max(yg);
                } else {
                    ub = ub.min(yg);
                }
            } else if self.at_lower(t) {
                if positive {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        let rho = if free > 0 {
            free_sum / free as f64
        } else {
            0.5 * (ub + lb)
        };
        -rho
    }

    fn objective(&self) -> f64 {
        0.5 * self
            .alpha
            .iter()
            .zip(self.grad.iter().zip(&self.linear))
            .map(|(a, (g, p))| a * (g + p))
            .sum::<f64>()
    }
}

/// Fits an ε-SVR on internally standardized features.
pub fn fit_svr(
    x: &[Vec<f64>],
    y: &[f64],
    feature_names: &[String],
    params: &SvrParams,
) -> Result<SvrModel, ModelError> {
    params.validate()?;
    check_design(x, y, feature_names)?;
    let l = x.len();
    if l < 2 {
        return Err(ModelError::Parameter(format!("SVR needs at least 2 samples, got {l}")));
    }
    let standardization = Standardization::fit(x);
    let z: Vec<Vec<f64>> = x.iter().map(|r| standardization.apply(r)).collect();
    let kernel: Vec<Vec<f64>> = z
        .iter()
        .map(|a| z.iter().map(|b| params.kernel.apply(a, b)).collect())
        .collect();

    let linear: Vec<f64> = (0..2 * l)
        .map(|s| {
            if s < l {
                params.epsilon - y[s]
            } else {
                params.epsilon + y[s - l]
            }
        })
        .collect();
    let mut smo = Smo {
        kernel: &kernel,
        l,
        c: params.c,
        alpha: vec![0.0; 2 * l],
        grad: linear.clone(),
        linear,
    };

    let mut iterations = 0;
    let violation = loop {
        let (pair, violation) = smo.select(params.tol);
        let Some((i, j)) = pair else {
            break violation;
        };
        if iterations >= params.max_iter {
            return Err(ModelError::Convergence {
                iterations,
                kkt_violation: violation,
            });
        }
        smo.update(i, j);
        iterations += 1;
    };

    let bias = smo.bias();
    let dual_objective = smo.objective();
    let mut support_vectors = Vec::new();
    let mut dual_weights = Vec::new();
    for (i, row) in z.into_iter().enumerate() {
        let v = smo.alpha[i] - smo.alpha[i + l];
        if v.abs() > SUPPORT_THRESHOLD {
            support_vectors.push(row);
            dual_weights.push(v);
        }
    }
    Ok(SvrModel {
        support_vectors,
        dual_weights,
        bias,
        kernel: params.kernel,
        epsilon: params.epsilon,
        c: params.c,
        standardization,
        feature_names: feature_names.to_vec(),
        dual_objective,
        kkt_violation: violation,
        iterations,
    })
}

/// `Σ v_i k(z, x_i) + b` with `z` the standardized input.
pub fn predict_svr(model: &SvrModel, x: &[f64]) -> Result<f64, ModelError> {
    if x.len() != model.n_features() {
        return Err(ModelError::DimensionMismatch {
            expected: model.n_features(),
            got: x.len(),
        });
    }
    let z = model.standardization.apply(x);
    Ok(model
        .support_vectors
        .iter()
        .zip(&model.dual_weights)
        .map(|(sv, v)| v * model.kernel.apply(&z, sv))
        .sum::<f64>()
        + model.bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn constant_target_fits_through_bias() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        for kernel in [KernelSpec::Linear, KernelSpec::Rbf { gamma: 0.5 }] {
            let m = fit_svr(&x, &[4.2; 6], &names(2), &SvrParams::new(10.0, 0.1, kernel)).unwrap();
            assert!(m.support_vectors.is_empty());
            for row in &x {
                assert!((predict_svr(&m, row).unwrap() - 4.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn line_is_recovered() {
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..4).map(|i| 2.0 * i as f64).collect();
        let m = fit_svr(&x, &y, &names(1), &SvrParams::new(100.0, 0.01, KernelSpec::Linear)).unwrap();
        for (row, yi) in x.iter().zip(&y) {
            assert!((predict_svr(&m, row).unwrap() - yi).abs() < 0.02);
        }
        assert!((predict_svr(&m, &[1.5]).unwrap() - 3.0).abs() < 0.02);
        let sum: f64 = m.dual_weights.iter().sum();
        assert!(sum.abs() < 1e-6);
        assert!(m.dual_weights.iter().all(|v| v.abs() <= 100.0 + 1e-9));
    }

    #[test]
    fn empty_expansion_predicts_bias() {
        let m = SvrModel {
            support_vectors: vec![],
            dual_weights: vec![],
            bias: 3.25,
            kernel: KernelSpec::Rbf { gamma: 1.0 },
            epsilon: 0.1,
            c: 1.0,
            standardization: Standardization {
                mean: vec![0.0, 0.0],
                scale: vec![1.0, 1.0],
            },
            feature_names: names(2),
            dual_objective: 0.0,
            kkt_violation: 0.0,
            iterations: 0,
        };
        assert_eq!(predict_svr(&m, &[9.0, -1.0]).unwrap(), 3.25);
        assert!(matches!(
            predict_svr(&m, &[9.0]),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_linear_support_vector() {
        let sv = vec![1.0, -2.0, 0.5];
        let m = SvrModel {
            support_vectors: vec![sv.clone()],
            dual_weights: vec![1.0],
            bias: 0.0,
            kernel: KernelSpec::Linear,
            epsilon: 0.1,
            c: 1.0,
            standardization: Standardization {
                mean: vec![0.0; 3],
                scale: vec![1.0; 3],
            },
            feature_names: names(3),
            dual_objective: 0.0,
            kkt_violation: 0.0,
            iterations: 0,
        };
        let norm2: f64 = sv.iter().map(|v| v * v).sum();
        assert_eq!(predict_svr(&m, &sv).unwrap(), norm2);
    }

    #[test]
    fn bad_hyperparameters_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = [0.0, 1.0];
        for p in [
            SvrParams::new(0.0, 0.1, KernelSpec::Linear),
            SvrParams::new(1.0, -0.1, KernelSpec::Linear),
            SvrParams::new(1.0, 0.1, KernelSpec::Rbf { gamma: 0.0 }),
        ] {
            assert!(matches!(fit_svr(&x, &y, &names(1), &p), Err(ModelError::Parameter(_))));
        }
        let p = SvrParams::new(1.0, 0.1, KernelSpec::Linear);
        assert!(fit_svr(&x[..1], &y[..1], &names(1), &p).is_err());
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()])
            .collect();
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.3).sin() * 5.0).collect();
        let mut p = SvrParams::new(100.0, 0.01, KernelSpec::Rbf { gamma: 1.0 });
        p.max_iter = 2;
        match fit_svr(&x, &y, &names(2), &p) {
            Err(ModelError::Convergence { kkt_violation, .. }) => assert!(kkt_violation > p.tol),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn standardization_is_stored() {
        let x = vec![vec![10.0, 5.0], vec![20.0, 5.0], vec![30.0, 5.0]];
        let s = Standardization::fit(&x);
        assert_eq!(s.mean, vec![20.0, 5.0]);
        assert_eq!(s.scale[1], 1.0);
        assert!((s.scale[0] - (200.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
