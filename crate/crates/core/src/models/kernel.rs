use serde::{Deserialize, Serialize};

use super::ModelError;

/// Kernel used by the support vector regressor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self, ModelError> {
        let k = KernelSpec::Rbf { gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma.is_finite() && gamma > 0.0) => Err(ModelError::Parameter(format!(
                "rbf gamma must be positive, got {gamma}"
            ))),
            _ => Ok(()),
        }
    }

    /// Kernel value for two equally long vectors; callers check dimensions.
    pub(crate) fn apply(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// `dot(a, b)` for the linear kernel, `exp(-gamma * |a - b|^2)` for rbf.
pub fn kernel_eval(kernel: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64, ModelError> {
    if a.len() != b.len() {
        return Err(ModelError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    kernel.validate()?;
    Ok(kernel.apply(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_of_identical_points_is_one() {
        for gamma in [1e-3, 0.5, 7.0] {
            let k = KernelSpec::Rbf { gamma };
            assert_eq!(kernel_eval(&k, &[1.5, -2.0], &[1.5, -2.0]).unwrap(), 1.0);
        }
    }

    #[test]
    fn linear_is_dot_product() {
        assert_eq!(
            kernel_eval(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            11.0
        );
    }

    #[test]
    fn rbf_hand_value() {
        let v = kernel_eval(&KernelSpec::Rbf { gamma: 0.5 }, &[0.0], &[2.0]).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.1353).abs() < 1e-4);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        assert!(matches!(
            kernel_eval(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_positive_gamma_rejected() {
        assert!(KernelSpec::rbf(0.0).is_err());
        assert!(KernelSpec::rbf(-1.0).is_err());
    }
}
