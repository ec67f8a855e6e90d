use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use gaitrisk::formats::{self, ManifestEntry};
use gaitrisk::gaitfeat::ExtractionConfig;
use gaitrisk::models::KernelSpec;
use gaitrisk::pipeline::{increment_check, IncrementCheck, SvrSetup};
use gaitrisk::synthgait::CohortTruth;
use gaitrisk::{
    evaluate, extract_features, generate_cohort, rank_features_with, select_features, CohortParams, Dataset,
    DependenceReport, EvaluationConfig, EvaluationReport, GaitSample, ModelKind, SvrParams, TieHandling, WalkerParams,
};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{pick, FileConfig, ModelChoice, SvrSection};
use crate::error::CliError;
use crate::output::{ensure_dir, sibling, write_atomic, write_text};
use crate::{EvaluateArgs, ExtractArgs, RankArgs, SimulateArgs};

/// Share of failed splits above which `evaluate` exits with an error.
const MAX_FAILED_SPLIT_FRACTION: f64 = 0.10;
const MANIFEST_FILE: &str = "manifest.csv";
const TRUTH_FILE: &str = "truth.json";

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    Ok(formats::read_feature_csv(open(path)?, &path.display().to_string())?)
}

#[derive(Debug, Serialize)]
struct ExtractSettings {
    window_s: f64,
    threshold_hz: f64,
}

pub fn extract(args: &ExtractArgs, file: &FileConfig) -> Result<(), CliError> {
    let config = ExtractionConfig {
        window_s: pick(
            args.window_s,
            file.extract.window_s,
            ExtractionConfig::default().window_s,
        ),
        threshold_hz: pick(
            args.threshold_hz,
            file.extract.threshold_hz,
            ExtractionConfig::default().threshold_hz,
        ),
    };
    if !(config.window_s.is_finite() && config.window_s > 0.0) {
        return Err(CliError::Input(format!(
            "window_s must be positive, got {}",
            config.window_s
        )));
    }
    if !(config.threshold_hz.is_finite() && config.threshold_hz > 0.0) {
        return Err(CliError::Input(format!(
            "threshold_hz must be positive, got {}",
            config.threshold_hz
        )));
    }
    info!(
        "extract: effective config {}",
        serde_json::to_string(&ExtractSettings {
            window_s: config.window_s,
            threshold_hz: config.threshold_hz
        })
        .unwrap_or_default()
    );

    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.pose_dir.join(MANIFEST_FILE));
    let entries = fs::read_dir(&args.pose_dir)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.pose_dir.display())))?;
    let mut pose_ids = BTreeSet::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Input(e.to_string()))?.path();
        if path.extension().is_some_and(|x| x == "csv") && path != manifest_path {
            if let Some(stem) = path.file_stem() {
                pose_ids.insert(stem.to_string_lossy().into_owned());
            }
        }
    }
    if pose_ids.is_empty() {
        return Err(CliError::Input(format!(
            "no input: {} contains no pose CSV files",
            args.pose_dir.display()
        )));
    }
    let manifest = formats::read_manifest(open(&manifest_path)?, &manifest_path.display().to_string())?;
    let listed: BTreeSet<String> = manifest.iter().map(|m| m.video_id.clone()).collect();
    let unlisted: Vec<&String> = pose_ids.difference(&listed).collect();
    let missing: Vec<&String> = listed.difference(&pose_ids).collect();
    if !unlisted.is_empty() || !missing.is_empty() {
        return Err(CliError::Input(format!(
            "manifest mismatch: pose files without manifest entry {unlisted:?}; manifest entries without pose file {missing:?}"
        )));
    }

    let results: Vec<(PathBuf, Result<GaitSample, String>)> = manifest
        .par_iter()
        .map(|m| {
            let path = args.pose_dir.join(format!("{}.csv", m.video_id));
            let outcome = open(&path)
                .map_err(|e| e.to_string())
                .and_then(|r| {
                    formats::read_pose_csv(r, &m.subject_id, &path.display().to_string()).map_err(|e| e.to_string())
                })
                .and_then(|series| extract_features(&series, &config).map_err(|e| e.to_string()))
                .map(|features| GaitSample {
                    features,
                    tug_s: m.tug_s,
                    subject_id: m.subject_id.clone(),
                    video_id: m.video_id.clone(),
                });
            (path, outcome)
        })
        .collect();

    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (path, outcome) in results {
        match outcome {
            Ok(s) => samples.push(s),
            Err(e) => {
                warn!("{}: {e}", path.display());
                failures.push(format!("{}: {e}", path.display()));
            }
        }
    }
    if !samples.is_empty() {
        write_atomic(&args.out, |w| Ok(formats::write_feature_csv(&samples, w)?))?;
        info!("wrote {} feature rows to {}", samples.len(), args.out.display());
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{} of {} files failed:\n  {}",
            failures.len(),
            manifest.len(),
            failures.join("\n  ")
        )))
    }
}

#[derive(Debug, Serialize)]
struct RankDocument<'a> {
    command: &'static str,
    config: RankSettings,
    report: &'a DependenceReport,
}

#[derive(Debug, Serialize)]
struct RankSettings {
    features: String,
    k: usize,
    ties: TieHandling,
}

fn ties(flag: bool, file: Option<bool>) -> TieHandling {
    if flag || file.unwrap_or(false) {
        TieHandling::Keep
    } else {
        TieHandling::Break
    }
}

pub fn rank(args: &RankArgs, file: &FileConfig) -> Result<(), CliError> {
    let k = pick(args.k, file.rank.k, gaitrisk::copent::DEFAULT_K);
    let ties = ties(args.keep_ties, file.rank.keep_ties);
    let data = read_dataset(&args.features)?;
    let report = rank_features_with(&data, k, ties)?;
    let doc = RankDocument {
        command: "rank",
        config: RankSettings {
            features: args.features.display().to_string(),
            k,
            ties,
        },
        report: &report,
    };
    write_text(&args.out, &to_json(&doc)?)?;
    write_text(&sibling(&args.out, "csv"), &report.to_csv())?;
    for e in report.entries.iter().take(5) {
        let value = e
            .copula_entropy
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into());
        println!("{:>2}  {:<32} {value}", e.rank, e.name);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluateSettings {
    features: String,
    k: usize,
    ties: TieHandling,
    model: ModelChoice,
    top_k: usize,
    n_splits: usize,
    train_ratio: f64,
    cutoff_s: f64,
    master_seed: u64,
    svr: SvrSetup,
    increment_check: bool,
}

#[derive(Debug, Serialize)]
struct EvaluateDocument<'a> {
    command: &'static str,
    config: &'a EvaluateSettings,
    dependence: &'a DependenceReport,
    evaluations: &'a [EvaluationReport],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    increment_checks: Vec<IncrementCheck>,
}

fn svr_setup(args: &EvaluateArgs, file: &FileConfig) -> Result<SvrSetup, CliError> {
    let fixed_flags = args.svr_c.is_some() || args.svr_epsilon.is_some() || args.svr_gamma.is_some();
    if fixed_flags {
        let (c, epsilon, gamma) = match &file.evaluate.svr {
            Some(SvrSection::Fixed { c, epsilon, gamma }) => (Some(*c), Some(*epsilon), *gamma),
            _ => (None, None, None),
        };
        let c = args.svr_c.or(c).unwrap_or(10.0);
        let epsilon = args.svr_epsilon.or(epsilon).unwrap_or(0.5);
        let kernel = match args.svr_gamma.or(gamma) {
            Some(g) => KernelSpec::rbf(g).map_err(|e| CliError::Input(e.to_string()))?,
            None => KernelSpec::Linear,
        };
        return Ok(SvrSetup::Fixed(SvrParams::new(c, epsilon, kernel)));
    }
    Ok(match &file.evaluate.svr {
        None => SvrSetup::Tuned(Default::default()),
        Some(SvrSection::Fixed { c, epsilon, gamma }) => {
            let kernel = match gamma {
                Some(g) => KernelSpec::rbf(*g).map_err(|e| CliError::Input(e.to_string()))?,
                None => KernelSpec::Linear,
            };
            SvrSetup::Fixed(SvrParams::new(*c, *epsilon, kernel))
        }
        Some(section) => SvrSetup::Tuned(section.grid().unwrap_or_default()),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn evaluate_cmd(args: &EvaluateArgs, file: &FileConfig) -> Result<(), CliError> {
    let f = &file.evaluate;
    let defaults = EvaluationConfig::default();
    let settings = EvaluateSettings {
        features: args.features.display().to_string(),
        k: pick(args.k, f.k, gaitrisk::copent::DEFAULT_K),
        ties: ties(args.keep_ties, f.keep_ties),
        model: pick(args.model, f.model, ModelChoice::Both),
        top_k: pick(args.top_k, f.top_k, 3),
        n_splits: pick(args.n_splits, f.n_splits, defaults.n_splits),
        train_ratio: pick(args.train_ratio, f.train_ratio, defaults.train_ratio),
        cutoff_s: pick(args.cutoff_s, f.cutoff_s, defaults.cutoff_s),
        master_seed: pick(args.seed, f.seed, defaults.master_seed),
        svr: svr_setup(args, file)?,
        increment_check: args.increment_check || f.increment_check.unwrap_or(false),
    };
    let config = EvaluationConfig {
        n_splits: settings.n_splits,
        train_ratio: settings.train_ratio,
        cutoff_s: settings.cutoff_s,
        master_seed: settings.master_seed,
    };
    config.validate()?;
    match &settings.svr {
        SvrSetup::Fixed(p) => p.validate(),
        SvrSetup::Tuned(g) => g.validate(),
    }
    .map_err(|e| CliError::Input(e.to_string()))?;

    let data = read_dataset(&args.features)?;
    let dependence = rank_features_with(&data, settings.k, settings.ties)?;
    let selected = select_features(&dependence, settings.top_k)?;
    let kinds: Vec<ModelKind> = match settings.model {
        ModelChoice::Lr => vec![ModelKind::Lr],
        ModelChoice::Svr => vec![ModelKind::Svr(settings.svr.clone())],
        ModelChoice::Both => vec![ModelKind::Lr, ModelKind::Svr(settings.svr.clone())],
    };
    let mut evaluations = Vec::with_capacity(kinds.len());
    for kind in &kinds {
        info!("evaluating {} on {} splits", kind.label(), config.n_splits);
        evaluations.push(evaluate(&data, kind, &selected, &config)?);
    }
    let mut increment_checks = Vec::new();
    if settings.increment_check && settings.top_k < data.n_features() {
        for kind in &kinds {
            increment_checks.push(increment_check(&data, kind, &dependence, settings.top_k, &config)?);
        }
    }

    let doc = EvaluateDocument {
        command: "evaluate",
        config: &settings,
        dependence: &dependence,
        evaluations: &evaluations,
        increment_checks,
    };
    write_text(&args.out, &to_json(&doc)?)?;

    let mut summary =
        String::from("model,features,mae_mean_s,mae_std_s,accuracy_mean,accuracy_std,n_succeeded,n_failed\n");
    let mut splits = String::from("model,split,seed,mae_s,diagnosis_accuracy,error\n");
    let mut predictions = String::from("model,split,video_id,tug_true_s,tug_pred_s\n");
    for r in &evaluations {
        let label = r.model_kind.label();
        let s = &r.summary;
        summary.push_str(&format!(
            "{label},{},{},{},{},{},{},{}\n",
            r.selected_features.join(";"),
            opt(s.mae_mean_s),
            opt(s.mae_std_s),
            opt(s.accuracy_mean),
            opt(s.accuracy_std),
            s.n_succeeded,
            s.failed_splits.len()
        ));
        for line in r.splits_csv().lines().skip(1) {
            splits.push_str(&format!("{label},{line}\n"));
        }
        for line in r.predictions_csv().lines().skip(1) {
            predictions.push_str(&format!("{label},{line}\n"));
        }
    }
    write_text(&sibling(&args.out, "summary.csv"), &summary)?;
    write_text(&sibling(&args.out, "splits.csv"), &splits)?;
    write_text(&sibling(&args.out, "predictions.csv"), &predictions)?;

    println!("features: {}", evaluations[0].selected_features.join(", "));
    println!(
        "{:<6} {:>16} {:>22} {:>8}",
        "model", "MAE (s)", "diagnosis accuracy", "failed"
    );
    for r in &evaluations {
        let s = &r.summary;
        let mae = match (s.mae_mean_s, s.mae_std_s) {
            (Some(m), Some(sd)) => format!("{m:.3} ± {sd:.3}"),
            _ => "n/a".into(),
        };
        let acc = match (s.accuracy_mean, s.accuracy_std) {
            (Some(m), Some(sd)) => format!("{:.1}% ± {:.1}%", 100.0 * m, 100.0 * sd),
            _ => "n/a".into(),
        };
        println!(
            "{:<6} {mae:>16} {acc:>22} {:>8}",
            r.model_kind.label(),
            s.failed_splits.len()
        );
    }
    for c in &doc.increment_checks {
        println!(
            "{} adding {}: MAE {:.3} -> {:.3} s ({:+.1}%, tolerance {:.0}%)",
            c.model,
            c.extended_features.last().map(String::as_str).unwrap_or("?"),
            c.mae_base_s,
            c.mae_extended_s,
            100.0 * (c.mae_extended_s - c.mae_base_s) / c.mae_base_s,
            100.0 * c.tolerance
        );
    }

    let worst = evaluations.iter().map(|r| r.failed_fraction()).fold(0.0, f64::max);
    if worst > MAX_FAILED_SPLIT_FRACTION {
        return Err(CliError::Internal(format!(
            "{:.0}% of splits failed (limit {:.0}%)",
            100.0 * worst,
            100.0 * MAX_FAILED_SPLIT_FRACTION
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TruthDocument<'a> {
    truth: &'a CohortTruth,
    videos: Vec<VideoTruth<'a>>,
}

#[derive(Debug, Serialize)]
struct VideoTruth<'a> {
    video_id: &'a str,
    tug_s: f64,
    attempts: usize,
    walker: &'a WalkerParams,
}

pub fn simulate(args: &SimulateArgs, file: &FileConfig) -> Result<(), CliError> {
    let s = &file.simulate;
    let d = CohortParams::default();
    let params = CohortParams {
        n_videos: pick(args.n_videos, s.n_videos, d.n_videos),
        n_subjects: pick(args.n_subjects, s.n_subjects, d.n_subjects),
        duration_s: pick(args.duration_s, s.duration_s, d.duration_s),
        fps: pick(args.fps, s.fps, d.fps),
        sensor_noise_m: pick(args.sensor_noise_m, s.sensor_noise_m, d.sensor_noise_m),
        dependence_enabled: !(args.no_dependence || s.no_dependence.unwrap_or(false)),
        seed: pick(args.seed, s.seed, d.seed),
        ..d
    };
    params.validate()?;
    ensure_dir(&args.out_dir)?;
    let cohort = generate_cohort(&params)?;
    if cohort.truth.regenerated_videos > 0 {
        info!(
            "{} videos were regenerated after failed extraction",
            cohort.truth.regenerated_videos
        );
    }

    cohort.videos.par_iter().try_for_each(|v| {
        let path = args.out_dir.join(format!("{}.csv", v.video_id));
        write_atomic(&path, |w| Ok(formats::write_pose_csv(&v.series, w)?))
    })?;
    let manifest: Vec<ManifestEntry> = cohort
        .videos
        .iter()
        .map(|v| ManifestEntry {
            video_id: v.video_id.clone(),
            subject_id: v.subject_id.clone(),
            tug_s: v.tug_s,
        })
        .collect();
    write_atomic(&args.out_dir.join(MANIFEST_FILE), |w| {
        Ok(formats::write_manifest(&manifest, w)?)
    })?;
    let truth = TruthDocument {
        truth: &cohort.truth,
        videos: cohort
            .videos
            .iter()
            .map(|v| VideoTruth {
                video_id: &v.video_id,
                tug_s: v.tug_s,
                attempts: v.attempts,
                walker: &v.walker,
            })
            .collect(),
    };
    write_text(&args.out_dir.join(TRUTH_FILE), &to_json(&truth)?)?;
    println!(
        "wrote {} pose files, manifest and truth to {}",
        cohort.videos.len(),
        args.out_dir.display()
    );
    Ok(())
}
