//! Optional TOML run configuration. Command-line flags override file values,
//! which override built-in defaults.

use std::path::Path;

use gaitrisk::models::SvrGrid;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub extract: ExtractSection,
    #[serde(default)]
    pub rank: RankSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub window_s: Option<f64>,
    pub threshold_hz: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankSection {
    pub k: Option<usize>,
    pub keep_ties: Option<bool>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub k: Option<usize>,
    pub model: Option<ModelChoice>,
    pub top_k: Option<usize>,
    pub n_splits: Option<usize>,
    pub train_ratio: Option<f64>,
    pub cutoff_s: Option<f64>,
    pub seed: Option<u64>,
    pub increment_check: Option<bool>,
    pub keep_ties: Option<bool>,
    pub svr: Option<SvrSection>,
}

/// Fixed SVR hyperparameters, or a grid to search inside each split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SvrSection {
    Tuned {
        c: Option<Vec<f64>>,
        epsilon: Option<Vec<f64>>,
        gamma_factors: Option<Vec<f64>>,
        folds: Option<usize>,
    },
    Fixed {
        c: f64,
        epsilon: f64,
        /// RBF width; a linear kernel when absent.
        gamma: Option<f64>,
    },
}

impl SvrSection {
    pub fn grid(&self) -> Option<SvrGrid> {
        match self {
            SvrSection::Tuned {
                c,
                epsilon,
                gamma_factors,
                folds,
            } => {
                let d = SvrGrid::default();
                Some(SvrGrid {
                    c: c.clone().unwrap_or(d.c),
                    epsilon: epsilon.clone().unwrap_or(d.epsilon),
                    gamma_factors: gamma_factors.clone().unwrap_or(d.gamma_factors),
                    folds: folds.unwrap_or(d.folds),
                })
            }
            SvrSection::Fixed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Lr,
    Svr,
    Both,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n_videos: Option<usize>,
    pub n_subjects: Option<usize>,
    pub duration_s: Option<f64>,
    pub fps: Option<f64>,
    pub sensor_noise_m: Option<f64>,
    pub no_dependence: Option<bool>,
    pub seed: Option<u64>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
}

/// First of flag, file value, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }

    #[test]
    fn parses_sections() {
        let cfg: FileConfig = toml::from_str(
            r#"
            [evaluate]
            model = "both"
            n_splits = 20
            [evaluate.svr]
            mode = "tuned"
            c = [1.0, 10.0]
            [simulate]
            n_videos = 30
            "#,
        )
        .unwrap();
        assert_eq!(cfg.evaluate.model, Some(ModelChoice::Both));
        assert_eq!(cfg.evaluate.n_splits, Some(20));
        let grid = cfg.evaluate.svr.unwrap().grid().unwrap();
        assert_eq!(grid.c, vec![1.0, 10.0]);
        assert_eq!(grid.folds, 5);
        assert_eq!(cfg.simulate.n_videos, Some(30));
        assert!(toml::from_str::<FileConfig>("[rank]\nbogus = 1\n").is_err());
    }
}
