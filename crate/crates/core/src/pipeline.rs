//! Association ranking, feature selection and repeated-split evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copent::{copula_entropy, SampleMatrix};
use crate::gaitfeat::FeatureVector;
use crate::models::{fit_lr, fit_svr, tune_svr, FittedModel, ModelError, SvrGrid, SvrParams};
use crate::seed::derive_seed;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_CUTOFF_S: f64 = 13.5;
pub const DEFAULT_N_SPLITS: usize = 100;
pub const DEFAULT_TRAIN_RATIO: f64 = 0.8;
/// Evaluation needs at least this many samples.
pub const MIN_EVALUATION_SAMPLES: usize = 10;
/// Relative MAE change tolerated when one more ranked feature is added.
pub const INCREMENT_TOLERANCE: f64 = 0.10;
const TIE_SEED: u64 = 0x7469_6573;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("report serialization: {0}")]
    Serialization(String),
}

/// One recording: its feature vector and measured TUG time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitSample {
    pub features: FeatureVector,
    pub tug_s: f64,
    pub subject_id: String,
    pub video_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<GaitSample>,
}

impl Dataset {
    /// Requires at least one sample, identical feature names across samples
    /// and positive finite TUG scores.
    pub fn new(samples: Vec<GaitSample>) -> Result<Self, PipelineError> {
        let Some(first) = samples.first() else {
            return Err(PipelineError::Dataset("no samples".into()));
        };
        if first.features.is_empty() {
            return Err(PipelineError::Dataset("samples carry no features".into()));
        }
        for s in &samples {
            if s.features.names() != first.features.names() {
                return Err(PipelineError::Dataset(format!(
                    "video {} has a different feature layout",
                    s.video_id
                )));
            }
            if !(s.tug_s.is_finite() && s.tug_s > 0.0) {
                return Err(PipelineError::Dataset(format!(
                    "video {} has invalid TUG score {}",
                    s.video_id, s.tug_s
                )));
            }
        }
        Ok(Self { samples })
    }

    /// Builds a dataset from plain rows; ids are the row numbers.
    pub fn from_rows(feature_names: &[&str], rows: &[Vec<f64>], tug_s: &[f64]) -> Result<Self, PipelineError> {
        if rows.len() != tug_s.len() {
            return Err(PipelineError::LengthMismatch(rows.len(), tug_s.len()));
        }
        let names: Vec<String> = feature_names.iter().map(|s| s.to_string()).collect();
        let samples = rows
            .iter()
            .zip(tug_s)
            .enumerate()
            .map(|(i, (r, &y))| {
                let features =
                    FeatureVector::new(names.clone(), r.clone()).map_err(|e| PipelineError::Dataset(e.to_string()))?;
                Ok(GaitSample {
                    features,
                    tug_s: y,
                    subject_id: format!("s{i}"),
                    video_id: format!("v{i}"),
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        Self::new(samples)
    }

    pub fn samples(&self) -> &[GaitSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        self.samples[0].features.names()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names().len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names().iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.features.values()[j]).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.tug_s).collect()
    }

    /// Rows restricted to the given samples and features.
    pub fn matrix(&self, rows: &[usize], features: &[usize]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|&i| {
                let v = self.samples[i].features.values();
                features.iter().map(|&j| v[j]).collect()
            })
            .collect()
    }

    /// Copy with feature `j` replaced by `f` applied to it.
    pub fn map_feature(&self, j: usize, f: impl Fn(f64) -> f64) -> Result<Self, PipelineError> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let mut values = s.features.values().to_vec();
                values[j] = f(values[j]);
                let features = FeatureVector::new(s.features.names().to_vec(), values)
                    .map_err(|e| PipelineError::Dataset(e.to_string()))?;
                Ok(GaitSample { features, ..s.clone() })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        Self::new(samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceEntry {
    pub name: String,
    pub feature_index: usize,
    /// Signed copula entropy in nats; `None` when the estimate failed.
    pub copula_entropy: Option<f64>,
    pub rank: usize,
    /// Samples whose feature value is shared with another sample.
    pub tied_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// How tied values are treated before copula entropy estimation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieHandling {
    /// Tied values get distinct ranks in a fixed pseudo-random order.
    #[default]
    Break,
    /// Tied values share the maximal rank.
    Keep,
}

/// Features ordered by copula entropy with the TUG score, most negative
/// (strongest association) first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub schema_version: u32,
    pub entries: Vec<DependenceEntry>,
    pub k_used: usize,
    pub n_samples: usize,
    pub ties: TieHandling,
}

impl DependenceReport {
    pub fn entry(&self, name: &str) -> Option<&DependenceEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        serde_json::to_string_pretty(self).map_err(|e| PipelineError::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Serialization(e.to_string()))
    }

    /// `rank,feature,copula_entropy_nats` rows; failed estimates leave the value empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,copula_entropy_nats\n");
        for e in &self.entries {
            let value = e.copula_entropy.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e.rank, e.name, value));
        }
        out
    }
}

/// Ranks `1..=n` of `x`, with tied values put in a random order drawn from `seed`.
///
/// The result depends on `x` only through its ordering, so it is unchanged by
/// any strictly increasing transform.
pub fn untied_ranks(x: &[f64], seed: u64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // Adding zero maps -0.0 to 0.0 so the two compare as a tie.
    order.sort_by(|&a, &b| (x[a] + 0.0).total_cmp(&(x[b] + 0.0)));
    let mut ranks = vec![0.0; x.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = (r + 1) as f64;
    }
    ranks
}

fn tied_samples(x: &[f64]) -> usize {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    (0..sorted.len())
        .filter(|&i| (i > 0 && sorted[i - 1] == sorted[i]) || (i + 1 < sorted.len() && sorted[i + 1] == sorted[i]))
        .count()
}

fn order_entries(entries: &mut [DependenceEntry]) {
    entries.sort_by(|a, b| match (a.copula_entropy, b.copula_entropy) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.name.cmp(&b.name)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.name.cmp(&b.name),
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
}

/// Pairwise copula entropy of every feature with the TUG score, breaking ties.
///
/// Tied values put several pseudo-observations on one coordinate and drive
/// neighbour distances, and with them the entropy, towards minus infinity,
/// so a coarse feature can look strongly associated. See
/// [`rank_features_with`].
pub fn rank_features(data: &Dataset, k: usize) -> Result<DependenceReport, PipelineError> {
    rank_features_with(data, k, TieHandling::Break)
}

/// Pairwise copula entropy of every feature with the TUG score.
///
/// With [`TieHandling::Break`] ties in each column are ordered by a fixed
/// pseudo-random permutation before estimation. Failed estimates are kept
/// with their error and ranked after all successful ones.
pub fn rank_features_with(data: &Dataset, k: usize, ties: TieHandling) -> Result<DependenceReport, PipelineError> {
    let n = data.len();
    if k == 0 || k >= n {
        return Err(PipelineError::Parameter(format!(
            "k must satisfy 1 <= k < n (k = {k}, n = {n})"
        )));
    }
    let prepare = |x: Vec<f64>, seed: u64| match ties {
        TieHandling::Break => untied_ranks(&x, seed),
        TieHandling::Keep => x,
    };
    let tug = prepare(data.targets(), TIE_SEED);
    let mut entries: Vec<DependenceEntry> = data
        .feature_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let column = data.column(j);
            let ranks = prepare(column.clone(), derive_seed(TIE_SEED, j as u64));
            let estimate =
                SampleMatrix::from_columns(&[&ranks, &tug], &[name, "tug_s"]).and_then(|m| copula_entropy(&m, k));
            let (copula_entropy, error) = match estimate {
                Ok(e) => (Some(e.value), None),
                Err(e) => (None, Some(e.to_string())),
            };
            DependenceEntry {
                name: name.clone(),
                feature_index: j,
                copula_entropy,
                rank: 0,
                tied_samples: tied_samples(&column),
                error,
            }
        })
        .collect();
    order_entries(&mut entries);
    Ok(DependenceReport {
        schema_version: REPORT_SCHEMA_VERSION,
        entries,
        k_used: k,
        n_samples: n,
        ties,
    })
}

/// Dataset indices of the `top_k` best-ranked features, in rank order.
pub fn select_features(report: &DependenceReport, top_k: usize) -> Result<Vec<usize>, PipelineError> {
    if top_k == 0 || top_k > report.entries.len() {
        return Err(PipelineError::Parameter(format!(
            "top_k must be between 1 and {}, got {top_k}",
            report.entries.len()
        )));
    }
    let mut entries: Vec<&DependenceEntry> = report.entries.iter().collect();
    entries.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.name.cmp(&b.name)));
    Ok(entries[..top_k].iter().map(|e| e.feature_index).collect())
}

/// Mean absolute error in seconds.
pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64, PipelineError> {
    if y_true.len() != y_pred.len() {
        return Err(PipelineError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(PipelineError::Parameter("MAE of an empty set".into()));
    }
    Ok(y_true.iter().zip(y_pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / y_true.len() as f64)
}

/// Share of samples whose faller status (`score > cutoff_s`) agrees between
/// true and predicted scores.
pub fn diagnosis_accuracy(y_true: &[f64], y_pred: &[f64], cutoff_s: f64) -> Result<f64, PipelineError> {
    if y_true.len() != y_pred.len() {
        return Err(PipelineError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(PipelineError::Parameter("accuracy of an empty set".into()));
    }
    let agree = y_true
        .iter()
        .zip(y_pred)
        .filter(|(a, b)| (**a > cutoff_s) == (**b > cutoff_s))
        .count();
    Ok(agree as f64 / y_true.len() as f64)
}

/// How the SVR gets its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SvrSetup {
    /// Grid search inside each training split.
    Tuned(SvrGrid),
    Fixed(SvrParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Lr,
    Svr(SvrSetup),
}

impl ModelKind {
    pub fn tuned_svr() -> Self {
        ModelKind::Svr(SvrSetup::Tuned(SvrGrid::default()))
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Svr(_) => "SVR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub n_splits: usize,
    pub train_ratio: f64,
    pub cutoff_s: f64,
    pub master_seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            n_splits: DEFAULT_N_SPLITS,
            train_ratio: DEFAULT_TRAIN_RATIO,
            cutoff_s: DEFAULT_CUTOFF_S,
            master_seed: 0,
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.n_splits == 0 {
            return Err(PipelineError::Parameter("n_splits must be at least 1".into()));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(PipelineError::Parameter(format!(
                "train_ratio must lie in (0, 1), got {}",
                self.train_ratio
            )));
        }
        if !self.cutoff_s.is_finite() {
            return Err(PipelineError::Parameter("cutoff must be finite".into()));
        }
        Ok(())
    }

    /// Seed of split `index` (0-based).
    pub fn split_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, index as u64)
    }
}

/// Random partition into `floor(train_ratio * n)` training rows and the rest.
pub fn split_indices(n: usize, train_ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), PipelineError> {
    let n_train = (train_ratio * n as f64).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(PipelineError::Parameter(format!(
            "train_ratio {train_ratio} leaves an empty side for {n} samples"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(n_train);
    Ok((order, test))
}

/// Fits `kind` on the given training rows and features.
pub fn fit_split_model(
    data: &Dataset,
    kind: &ModelKind,
    features: &[usize],
    train: &[usize],
    seed: u64,
) -> Result<FittedModel, ModelError> {
    let x = data.matrix(train, features);
    let y: Vec<f64> = train.iter().map(|&i| data.samples[i].tug_s).collect();
    let names: Vec<String> = features.iter().map(|&j| data.feature_names()[j].clone()).collect();
    Ok(match kind {
        ModelKind::Lr => FittedModel::Lr(fit_lr(&x, &y, &names)?),
        ModelKind::Svr(SvrSetup::Fixed(p)) => FittedModel::Svr(fit_svr(&x, &y, &names, p)?),
        ModelKind::Svr(SvrSetup::Tuned(grid)) => {
            FittedModel::Svr(tune_svr(&x, &y, &names, grid, derive_seed(seed, 1))?.model)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub video_id: String,
    pub tug_true_s: f64,
    pub tug_pred_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub mae_s: Option<f64>,
    pub diagnosis_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mae_mean_s: Option<f64>,
    pub mae_std_s: Option<f64>,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub n_succeeded: usize,
    pub failed_splits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub model_kind: ModelKind,
    pub selected_features: Vec<String>,
    pub per_split: Vec<SplitResult>,
    pub summary: Summary,
    pub cutoff_s: f64,
    pub n_splits: usize,
    pub train_ratio: f64,
    pub master_seed: u64,
}

impl EvaluationReport {
    pub fn failed_fraction(&self) -> f64 {
        self.summary.failed_splits.len() as f64 / self.n_splits as f64
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        serde_json::to_string_pretty(self).map_err(|e| PipelineError::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Serialization(e.to_string()))
    }

    /// `split,seed,mae_s,diagnosis_accuracy,error` rows.
    pub fn splits_csv(&self) -> String {
        let mut out = String::from("split,seed,mae_s,diagnosis_accuracy,error\n");
        for s in &self.per_split {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.split,
                s.seed,
                s.mae_s.map(|v| v.to_string()).unwrap_or_default(),
                s.diagnosis_accuracy.map(|v| v.to_string()).unwrap_or_default(),
                s.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            ));
        }
        out
    }

    /// `split,video_id,tug_true_s,tug_pred_s` rows, one per test prediction.
    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("split,video_id,tug_true_s,tug_pred_s\n");
        for s in &self.per_split {
            for p in &s.predictions {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    s.split, p.video_id, p.tug_true_s, p.tug_pred_s
                ));
            }
        }
        out
    }
}

fn mean_std(x: &[f64]) -> (Option<f64>, Option<f64>) {
    if x.is_empty() {
        return (None, None);
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
    (Some(m), Some(var.sqrt()))
}

fn run_split(
    data: &Dataset,
    kind: &ModelKind,
    features: &[usize],
    config: &EvaluationConfig,
    split: usize,
) -> SplitResult {
    let seed = config.split_seed(split);
    let mut result = SplitResult {
        split,
        seed,
        n_train: 0,
        n_test: 0,
        mae_s: None,
        diagnosis_accuracy: None,
        error: None,
        predictions: Vec::new(),
    };
    let (train, test) = match split_indices(data.len(), config.train_ratio, seed) {
        Ok(p) => p,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    result.n_train = train.len();
    result.n_test = test.len();
    let outcome = fit_split_model(data, kind, features, &train, seed).and_then(|model| {
        test.iter()
            .map(|&i| model.predict(&data.matrix(&[i], features)[0]))
            .collect::<Result<Vec<f64>, ModelError>>()
    });
    match outcome {
        Ok(pred) => {
            let truth: Vec<f64> = test.iter().map(|&i| data.samples[i].tug_s).collect();
            result.mae_s = mae(&truth, &pred).ok();
            result.diagnosis_accuracy = diagnosis_accuracy(&truth, &pred, config.cutoff_s).ok();
            result.predictions = test
                .iter()
                .zip(truth.iter().zip(&pred))
                .map(|(&i, (&t, &p))| Prediction {
                    video_id: data.samples[i].video_id.clone(),
                    tug_true_s: t,
                    tug_pred_s: p,
                })
                .collect();
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result
}

/// Repeated random train/test evaluation.
///
/// Split `s` draws its partition from a seed derived from `(master_seed, s)`,
/// so results do not depend on scheduling; splits run in parallel and are
/// reported in index order. Failed splits stay in the report with their
/// error and are excluded from the summary.
pub fn evaluate(
    data: &Dataset,
    kind: &ModelKind,
    selected_features: &[usize],
    config: &EvaluationConfig,
) -> Result<EvaluationReport, PipelineError> {
    config.validate()?;
    if data.len() < MIN_EVALUATION_SAMPLES {
        return Err(PipelineError::Dataset(format!(
            "evaluation needs at least {MIN_EVALUATION_SAMPLES} samples, got {}",
            data.len()
        )));
    }
    if selected_features.is_empty() {
        return Err(PipelineError::Parameter("no features selected".into()));
    }
    if let Some(&bad) = selected_features.iter().find(|&&j| j >= data.n_features()) {
        return Err(PipelineError::Parameter(format!("feature index {bad} does not exist")));
    }
    if let ModelKind::Svr(SvrSetup::Fixed(p)) = kind {
        p.validate().map_err(|e| PipelineError::Parameter(e.to_string()))?;
    }
    if let ModelKind::Svr(SvrSetup::Tuned(g)) = kind {
        g.validate().map_err(|e| PipelineError::Parameter(e.to_string()))?;
    }

    let per_split: Vec<SplitResult> = (0..config.n_splits)
        .into_par_iter()
        .map(|s| run_split(data, kind, selected_features, config, s))
        .collect();

    let maes: Vec<f64> = per_split.iter().filter_map(|s| s.mae_s).collect();
    let accs: Vec<f64> = per_split.iter().filter_map(|s| s.diagnosis_accuracy).collect();
    let (mae_mean_s, mae_std_s) = mean_std(&maes);
    let (accuracy_mean, accuracy_std) = mean_std(&accs);
    let failed_splits = per_split
        .iter()
        .filter(|s| s.error.is_some())
        .map(|s| s.split)
        .collect();
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model_kind: kind.clone(),
        selected_features: selected_features
            .iter()
            .map(|&j| data.feature_names()[j].clone())
            .collect(),
        summary: Summary {
            mae_mean_s,
            mae_std_s,
            accuracy_mean,
            accuracy_std,
            n_succeeded: maes.len(),
            failed_splits,
        },
        per_split,
        cutoff_s: config.cutoff_s,
        n_splits: config.n_splits,
        train_ratio: config.train_ratio,
        master_seed: config.master_seed,
    })
}

/// Effect on summary MAE of adding the next-ranked feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementCheck {
    /// Label of the evaluated model, as in [`ModelKind::label`].
    pub model: String,
    pub base_features: Vec<String>,
    pub extended_features: Vec<String>,
    pub mae_base_s: f64,
    pub mae_extended_s: f64,
    /// `|mae_extended - mae_base| / mae_base`
    pub relative_change: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

/// Evaluates the top `base_k` features and the top `base_k + 1` on the same
/// splits and compares summary MAE against [`INCREMENT_TOLERANCE`].
pub fn increment_check(
    data: &Dataset,
    kind: &ModelKind,
    report: &DependenceReport,
    base_k: usize,
    config: &EvaluationConfig,
) -> Result<IncrementCheck, PipelineError> {
    let base = select_features(report, base_k)?;
    let extended = select_features(report, base_k + 1)?;
    let run = |features: &[usize]| -> Result<(f64, Vec<String>), PipelineError> {
        let r = evaluate(data, kind, features, config)?;
        let m = r
            .summary
            .mae_mean_s
            .ok_or_else(|| PipelineError::Dataset("every split failed; no MAE to compare".into()))?;
        Ok((m, r.selected_features))
    };
    let (mae_base_s, base_features) = run(&base)?;
    let (mae_extended_s, extended_features) = run(&extended)?;
    let relative_change = (mae_extended_s - mae_base_s).abs() / mae_base_s;
    Ok(IncrementCheck {
        model: kind.label().to_string(),
        base_features,
        extended_features,
        mae_base_s,
        mae_extended_s,
        relative_change,
        tolerance: INCREMENT_TOLERANCE,
        within_tolerance: relative_change < INCREMENT_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::KernelSpec;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[10.0, 20.0], &[12.0, 19.0]).unwrap(), 1.5);
        assert_eq!(mae(&[1.0, 5.0, 9.0], &[1.5, 5.5, 9.5]).unwrap(), 0.5);
        assert!(matches!(
            mae(&[1.0], &[1.0, 2.0]),
            Err(PipelineError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(diagnosis_accuracy(&[10.0, 20.0], &[12.0, 25.0], 13.5).unwrap(), 1.0);
        assert_eq!(diagnosis_accuracy(&[10.0, 20.0], &[14.0, 12.0], 13.5).unwrap(), 0.0);
        assert_eq!(diagnosis_accuracy(&[13.5], &[13.5], 13.5).unwrap(), 1.0);
        assert_eq!(diagnosis_accuracy(&[13.5], &[13.6], 13.5).unwrap(), 0.0);
        assert!(diagnosis_accuracy(&[1.0], &[], 13.5).is_err());
    }

    #[test]
    fn split_sizes_use_floor() {
        let (train, test) = split_indices(10, 0.8, 3).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let (train, test) = split_indices(146, 0.8, 3).unwrap();
        assert_eq!((train.len(), test.len()), (116, 30));
        let mut all: Vec<usize> = train.into_iter().chain(test).collect();
        all.sort_unstable();
        assert_eq!(all, (0..146).collect::<Vec<_>>());
        assert!(split_indices(2, 0.4, 0).is_err());
    }

    fn linear_dataset(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = i as f64 * 0.37 % 3.1;
                let b = (i as f64 * 1.7).sin();
                vec![a, b]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 8.0 + 2.0 * r[0] - 1.5 * r[1]).collect();
        Dataset::from_rows(&["a", "b"], &rows, &y).unwrap()
    }

    #[test]
    fn lr_is_exact_on_its_generating_model() {
        let data = linear_dataset(40);
        let cfg = EvaluationConfig {
            n_splits: 10,
            ..Default::default()
        };
        let r = evaluate(&data, &ModelKind::Lr, &[0, 1], &cfg).unwrap();
        assert!(r.summary.mae_mean_s.unwrap() <= 1e-8);
        assert_eq!(r.summary.accuracy_mean, Some(1.0));
    }

    #[test]
    fn one_split_of_ten_samples() {
        let data = linear_dataset(10);
        let cfg = EvaluationConfig {
            n_splits: 1,
            ..Default::default()
        };
        let r = evaluate(&data, &ModelKind::Lr, &[0], &cfg).unwrap();
        assert_eq!(r.per_split.len(), 1);
        assert_eq!((r.per_split[0].n_train, r.per_split[0].n_test), (8, 2));
    }

    #[test]
    fn failed_splits_are_reported() {
        // Feature 1 is constant, so every LR fit is singular.
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, 1.0]).collect();
        let y: Vec<f64> = (0..12).map(|i| 5.0 + i as f64).collect();
        let data = Dataset::from_rows(&["a", "b"], &rows, &y).unwrap();
        let cfg = EvaluationConfig {
            n_splits: 4,
            ..Default::default()
        };
        let r = evaluate(&data, &ModelKind::Lr, &[0, 1], &cfg).unwrap();
        assert_eq!(r.summary.failed_splits, vec![0, 1, 2, 3]);
        assert_eq!(r.summary.mae_mean_s, None);
        assert!(r
            .per_split
            .iter()
            .all(|s| s.error.as_deref().unwrap().contains("singular")));
        assert_eq!(r.failed_fraction(), 1.0);
    }

    #[test]
    fn bad_configs_rejected() {
        let data = linear_dataset(20);
        let zero = EvaluationConfig {
            n_splits: 0,
            ..Default::default()
        };
        assert!(matches!(
            evaluate(&data, &ModelKind::Lr, &[0], &zero),
            Err(PipelineError::Parameter(_))
        ));
        let cfg = EvaluationConfig::default();
        assert!(evaluate(&data, &ModelKind::Lr, &[5], &cfg).is_err());
        assert!(evaluate(&data, &ModelKind::Lr, &[], &cfg).is_err());
        assert!(evaluate(&linear_dataset(9), &ModelKind::Lr, &[0], &cfg).is_err());
        let bad_svr = ModelKind::Svr(SvrSetup::Fixed(SvrParams::new(-1.0, 0.1, KernelSpec::Linear)));
        assert!(evaluate(&data, &bad_svr, &[0], &cfg).is_err());
    }

    #[test]
    fn ranking_orders_by_signed_entropy() {
        let n = 200;
        let tug: Vec<f64> = (0..n).map(|i| 6.0 + (i as f64 * 0.61) % 20.0).collect();
        let rows: Vec<Vec<f64>> = tug
            .iter()
            .enumerate()
            .map(|(i, t)| {
                vec![
                    ((i * 7919) % 211) as f64,
                    1.0 / t,
                    t.ln() + ((i * 31) % 7) as f64 * 0.05,
                ]
            })
            .collect();
        let data = Dataset::from_rows(&["noise", "exact", "noisy"], &rows, &tug).unwrap();
        let r = rank_features(&data, 3).unwrap();
        let names: Vec<&str> = r.entries.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names[0], "exact");
        assert_eq!(r.entries.iter().map(|e| e.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(select_features(&r, 1).unwrap(), vec![1]);
        assert_eq!(select_features(&r, 3).unwrap().len(), 3);
        assert!(select_features(&r, 0).is_err());
        assert!(select_features(&r, 4).is_err());
        assert!(rank_features(&data, n).is_err());
    }

    #[test]
    fn failed_estimates_rank_last() {
        let entry = |name: &str, v: Option<f64>| DependenceEntry {
            name: name.into(),
            feature_index: 0,
            copula_entropy: v,
            rank: 0,
            tied_samples: 0,
            error: v.is_none().then(|| "failed".to_string()),
        };
        let mut entries = vec![
            entry("a", None),
            entry("b", Some(0.2)),
            entry("c", Some(-0.1)),
            entry("d", Some(0.2)),
        ];
        order_entries(&mut entries);
        let names: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["c", "b", "d", "a"]);
        assert_eq!(entries[3].rank, 4);
    }

    #[test]
    fn tie_breaking() {
        let x = [3.0, 1.0, 3.0, 2.0, 3.0];
        let r = untied_ranks(&x, 5);
        assert_eq!((r[1], r[3]), (1.0, 2.0));
        let mut top = vec![r[0], r[2], r[4]];
        top.sort_by(f64::total_cmp);
        assert_eq!(top, vec![3.0, 4.0, 5.0]);
        assert_eq!(r, untied_ranks(&x.map(|v| v.exp()), 5));
        assert_eq!(tied_samples(&x), 3);
        assert_eq!(tied_samples(&[1.0, 2.0]), 0);
    }

    #[test]
    fn heavily_tied_feature_is_not_spuriously_strong() {
        let tug: Vec<f64> = (0..146).map(|i| 5.0 + (i as f64 * 0.37) % 25.0).collect();
        let rows: Vec<Vec<f64>> = (0..146).map(|i| vec![if i % 30 == 0 { 1.0 } else { 0.0 }]).collect();
        let data = Dataset::from_rows(&["tied"], &rows, &tug).unwrap();
        let r = rank_features(&data, 3).unwrap();
        assert!(r.entries[0].copula_entropy.unwrap().abs() < 0.3);
        assert_eq!(r.entries[0].tied_samples, 146);
        let kept = rank_features_with(&data, 3, TieHandling::Keep).unwrap();
        assert!(kept.entries[0].copula_entropy.unwrap() < -1.0);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![]).is_err());
        assert!(Dataset::from_rows(&["a"], &[vec![1.0]], &[0.0]).is_err());
        assert!(Dataset::from_rows(&["a"], &[vec![1.0]], &[1.0, 2.0]).is_err());
    }
}
