//! Seeded synthetic data: walking pose series, correlated Gaussian samples
//! and a cohort of recordings with a planted feature–TUG dependence.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf};
use thiserror::Error;

use crate::copent::SampleMatrix;
use crate::gaitfeat::{extract_features, joints, ExtractionConfig, GaitError, PoseFrame, PoseSeries};
use crate::pipeline::{Dataset, GaitSample};
use crate::seed::derive_seed;

/// Allowed relative gap between `speed * step_period` and `step_length`.
pub const STEP_CONSISTENCY: f64 = 0.2;
/// Extraction attempts per cohort video before giving up.
pub const MAX_ATTEMPTS: usize = 20;

const HIP_HEIGHT_M: f64 = 0.95;
const HIP_HALF_WIDTH_M: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("video {video}: extraction failed after {attempts} attempts: {source}")]
    Extraction {
        video: usize,
        attempts: usize,
        source: GaitError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkerParams {
    pub speed_mps: f64,
    pub step_length_m: f64,
    pub step_period_s: f64,
    /// Vertical oscillation amplitude, one cycle per step.
    pub v_amplitude_m: f64,
    /// Mediolateral sway amplitude, one cycle per stride.
    pub ml_amplitude_m: f64,
    /// Standard deviation of per-stride speed.
    pub speed_jitter_mps: f64,
    /// Standard deviation of independent noise on every coordinate.
    pub sensor_noise_m: f64,
    pub duration_s: f64,
    pub fps: f64,
    pub seed: u64,
}

impl Default for WalkerParams {
    fn default() -> Self {
        Self {
            speed_mps: 1.0,
            step_length_m: 0.6,
            step_period_s: 0.6,
            v_amplitude_m: 0.02,
            ml_amplitude_m: 0.02,
            speed_jitter_mps: 0.0,
            sensor_noise_m: 0.0,
            duration_s: 30.0,
            fps: 30.0,
            seed: 0,
        }
    }
}

impl WalkerParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = [
            ("speed_mps", self.speed_mps),
            ("step_length_m", self.step_length_m),
            ("step_period_s", self.step_period_s),
            ("duration_s", self.duration_s),
            ("fps", self.fps),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SynthError::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("v_amplitude_m", self.v_amplitude_m),
            ("ml_amplitude_m", self.ml_amplitude_m),
            ("speed_jitter_mps", self.speed_jitter_mps),
            ("sensor_noise_m", self.sensor_noise_m),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SynthError::Parameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        let implied = self.speed_mps * self.step_period_s;
        if (implied - self.step_length_m).abs() > STEP_CONSISTENCY * self.step_length_m {
            return Err(SynthError::Parameter(format!(
                "speed {} m/s with step period {} s implies steps of {implied:.3} m, \
                 inconsistent with step length {} m",
                self.speed_mps, self.step_period_s, self.step_length_m
            )));
        }
        Ok(())
    }

    /// Distance covered per step at the nominal speed.
    pub fn effective_step_length(&self) -> f64 {
        self.speed_mps * self.step_period_s
    }

    pub fn stride_time(&self) -> f64 {
        2.0 * self.step_period_s
    }
}

/// Forward position under a piecewise-constant velocity, one speed per step.
struct Progression {
    step_s: f64,
    speeds: Vec<f64>,
    offsets: Vec<f64>,
}

impl Progression {
    fn new(step_s: f64, speeds: Vec<f64>) -> Self {
        let offsets = speeds
            .iter()
            .scan(0.0, |x, v| {
                let start = *x;
                *x += v * step_s;
                Some(start)
            })
            .collect();
        Self {
            step_s,
            speeds,
            offsets,
        }
    }

    fn at(&self, t: f64) -> f64 {
        let k = ((t / self.step_s).floor() as usize).min(self.speeds.len() - 1);
        self.offsets[k] + self.speeds[k] * (t - k as f64 * self.step_s)
    }
}

/// A skeleton walking along world +x.
///
/// The hip midpoint bobs vertically once per step, with peaks at multiples
/// of the step period, and sways sideways once per stride. Between two
/// vertical peaks it advances at a constant speed drawn from
/// N(speed, 2 jitter²), so the mean speed of every stride (two consecutive
/// steps, whichever step it starts on) has standard deviation `jitter`. With
/// zero jitter the forward velocity is exactly `speed_mps`.
pub fn generate_walker(params: &WalkerParams) -> Result<PoseSeries, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n_steps = (params.duration_s / params.step_period_s).ceil() as usize + 1;
    let floor = 0.1 * params.speed_mps;
    let step_sd = std::f64::consts::SQRT_2 * params.speed_jitter_mps;
    let speeds: Vec<f64> = (0..n_steps)
        .map(|_| {
            if params.speed_jitter_mps > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                (params.speed_mps + step_sd * z).max(floor)
            } else {
                params.speed_mps
            }
        })
        .collect();
    let path = Progression::new(params.step_period_s, speeds);

    let n_frames = (params.duration_s * params.fps).round() as usize + 1;
    let noise = params.sensor_noise_m;
    let mut frames = Vec::with_capacity(n_frames);
    for j in 0..n_frames {
        let t = j as f64 / params.fps;
        let x = path.at(t);
        let y = params.ml_amplitude_m * (PI * t / params.step_period_s).sin();
        let z = HIP_HEIGHT_M + params.v_amplitude_m * (2.0 * PI * t / params.step_period_s).cos();
        let base = [
            (joints::LEFT_HIP, [x, y + HIP_HALF_WIDTH_M, z]),
            (joints::RIGHT_HIP, [x, y - HIP_HALF_WIDTH_M, z]),
            ("nose", [x + 0.08, y, z + 0.65]),
            ("left_ankle", [x, y + HIP_HALF_WIDTH_M, 0.08]),
            ("right_ankle", [x, y - HIP_HALF_WIDTH_M, 0.08]),
        ];
        let mut joint_map = BTreeMap::new();
        for (name, mut p) in base {
            if noise > 0.0 {
                for c in &mut p {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *c += noise * z;
                }
            }
            joint_map.insert(name.to_string(), p);
        }
        frames.push(PoseFrame {
            timestamp_s: t,
            joints: joint_map,
        });
    }
    PoseSeries::new(frames, params.fps, format!("walker-{}", params.seed))
        .map_err(|e| SynthError::Parameter(e.to_string()))
}

/// `n` draws from a standard bivariate Gaussian with correlation `rho`.
pub fn gaussian_samples(rho: f64, n: usize, seed: u64) -> Result<SampleMatrix, SynthError> {
    if !(rho.abs() < 1.0) {
        return Err(SynthError::Parameter(format!("|rho| must be below 1, got {rho}")));
    }
    if n < 10 {
        return Err(SynthError::Parameter(format!("need at least 10 samples, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = (1.0 - rho * rho).sqrt();
    let mut values = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        values.push(a);
        values.push(rho * a + c * b);
    }
    SampleMatrix::new(values, n, 2, vec!["x".into(), "y".into()]).map_err(|e| SynthError::Parameter(e.to_string()))
}

/// Two-component TUG marginal: a lognormal body of quick, healthy tests and
/// a shifted lognormal tail of slow ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TugDistribution {
    pub body_median_s: f64,
    pub body_sigma: f64,
    pub tail_fraction: f64,
    pub tail_shift_s: f64,
    pub tail_median_s: f64,
    pub tail_sigma: f64,
}

impl Default for TugDistribution {
    fn default() -> Self {
        Self {
            body_median_s: 8.5,
            body_sigma: 0.18,
            tail_fraction: 0.15,
            tail_shift_s: 12.0,
            tail_median_s: 10.0,
            tail_sigma: 0.7,
        }
    }
}

impl TugDistribution {
    pub fn validate(&self) -> Result<(), SynthError> {
        let ok = self.body_median_s > 0.0
            && self.body_sigma > 0.0
            && (0.0..1.0).contains(&self.tail_fraction)
            && self.tail_shift_s >= 0.0
            && self.tail_median_s > 0.0
            && self.tail_sigma > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SynthError::Parameter(format!("invalid TUG distribution {self:?}")))
        }
    }

    /// `n` scores drawn by stratified sampling of each component, in random
    /// order. Stratification keeps the tail populated even for one cohort.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n_tail = (self.tail_fraction * n as f64).round() as usize;
        let std_normal = NormalCdf::new(0.0, 1.0).expect("unit normal");
        let stratified = |m: usize, rng: &mut ChaCha8Rng, f: &dyn Fn(f64) -> f64| -> Vec<f64> {
            (0..m)
                .map(|i| {
                    let u = (i as f64 + rng.random::<f64>()) / m as f64;
                    f(std_normal.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12)))
                })
                .collect()
        };
        let mut out = stratified(n - n_tail, rng, &|z| self.body_median_s * (self.body_sigma * z).exp());
        out.extend(stratified(n_tail, rng, &|z| {
            self.tail_shift_s + self.tail_median_s * (self.tail_sigma * z).exp()
        }));
        out.shuffle(rng);
        out
    }
}

/// Maps a TUG score to walking behaviour.
///
/// Speed falls as `speed_scale / tug` (clamped) with lognormal noise whose
/// spread grows with TUG; per-stride speed jitter grows as a power of TUG
/// with little noise. Step period is drawn independently of TUG, so step
/// length follows speed linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceSpec {
    pub speed_scale: f64,
    pub min_speed_mps: f64,
    pub max_speed_mps: f64,
    pub speed_noise_base: f64,
    pub speed_noise_slope: f64,
    pub jitter_scale_mps: f64,
    pub jitter_exponent: f64,
    pub jitter_noise: f64,
    /// Upper bound on jitter as a fraction of speed.
    pub jitter_cap: f64,
    pub step_period_mean_s: f64,
    pub step_period_sd_s: f64,
}

impl Default for DependenceSpec {
    fn default() -> Self {
        Self {
            speed_scale: 10.5,
            min_speed_mps: 0.3,
            max_speed_mps: 1.45,
            speed_noise_base: 0.12,
            speed_noise_slope: 0.004,
            jitter_scale_mps: 0.015,
            jitter_exponent: 1.5,
            jitter_noise: 0.05,
            jitter_cap: 0.6,
            step_period_mean_s: 0.55,
            step_period_sd_s: 0.04,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortParams {
    pub n_videos: usize,
    pub n_subjects: usize,
    pub duration_s: f64,
    pub fps: f64,
    pub sensor_noise_m: f64,
    pub tug: TugDistribution,
    pub dependence: DependenceSpec,
    /// When false, walkers are driven by an independent draw instead of the
    /// recorded TUG score.
    pub dependence_enabled: bool,
    pub seed: u64,
}

impl Default for CohortParams {
    fn default() -> Self {
        Self {
            n_videos: 146,
            n_subjects: 40,
            duration_s: 20.0,
            fps: 30.0,
            sensor_noise_m: 0.001,
            tug: TugDistribution::default(),
            dependence: DependenceSpec::default(),
            dependence_enabled: true,
            seed: 0,
        }
    }
}

impl CohortParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_videos < 10 {
            return Err(SynthError::Parameter(format!(
                "a cohort needs at least 10 videos, got {}",
                self.n_videos
            )));
        }
        if self.n_subjects == 0 {
            return Err(SynthError::Parameter("n_subjects must be at least 1".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0 && self.fps.is_finite() && self.fps > 0.0) {
            return Err(SynthError::Parameter("duration and fps must be positive".into()));
        }
        if !(self.sensor_noise_m.is_finite() && self.sensor_noise_m >= 0.0) {
            return Err(SynthError::Parameter("sensor noise must be non-negative".into()));
        }
        self.tug.validate()
    }
}

/// Walker parameters for one recording driven by `tug_s`.
pub fn walker_for_tug(
    tug_s: f64,
    spec: &DependenceSpec,
    params: &CohortParams,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> WalkerParams {
    let z_speed: f64 = StandardNormal.sample(rng);
    let z_jitter: f64 = StandardNormal.sample(rng);
    let sigma = spec.speed_noise_base + spec.speed_noise_slope * tug_s;
    let speed = (spec.speed_scale / tug_s).clamp(spec.min_speed_mps, spec.max_speed_mps) * (sigma * z_speed).exp();
    let period = Normal::new(spec.step_period_mean_s, spec.step_period_sd_s)
        .expect("finite period spread")
        .sample(rng)
        .max(0.3);
    let jitter =
        (spec.jitter_scale_mps * (tug_s / 6.0).powf(spec.jitter_exponent) * (spec.jitter_noise * z_jitter).exp())
            .min(spec.jitter_cap * speed);
    WalkerParams {
        speed_mps: speed,
        step_length_m: speed * period,
        step_period_s: period,
        v_amplitude_m: 0.02,
        ml_amplitude_m: 0.02,
        speed_jitter_mps: jitter,
        sensor_noise_m: params.sensor_noise_m,
        duration_s: params.duration_s,
        fps: params.fps,
        seed,
    }
}

/// Ground truth recorded alongside a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTruth {
    pub informative_features: Vec<String>,
    pub dependence_enabled: bool,
    pub regenerated_videos: usize,
    pub params: CohortParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortVideo {
    pub video_id: String,
    pub subject_id: String,
    pub tug_s: f64,
    pub walker: WalkerParams,
    pub series: PoseSeries,
    /// Generation attempts needed for a successful extraction.
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub videos: Vec<CohortVideo>,
    pub dataset: Dataset,
    pub truth: CohortTruth,
}

/// Features the default dependence spec makes informative about TUG.
pub fn planted_features() -> Vec<String> {
    ["speed_variability.mean", "gait_speed.mean", "step_length.mean"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// A synthetic cohort of walking recordings with TUG scores.
///
/// Each video is synthesized from its own derived seed and run through
/// feature extraction; a video whose extraction fails is regenerated from a
/// perturbed seed, and the number of such videos is recorded in the truth.
pub fn generate_cohort(params: &CohortParams) -> Result<Cohort, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, u64::MAX));
    let tugs = params.tug.sample(params.n_videos, &mut rng);
    let drivers = if params.dependence_enabled {
        tugs.clone()
    } else {
        params.tug.sample(params.n_videos, &mut rng)
    };
    let extraction = ExtractionConfig::default();

    let made: Vec<(CohortVideo, crate::gaitfeat::FeatureVector)> = (0..params.n_videos)
        .into_par_iter()
        .map(|i| {
            let video_seed = derive_seed(params.seed, i as u64);
            let mut last_err = None;
            for attempt in 0..MAX_ATTEMPTS {
                let seed = derive_seed(video_seed, attempt as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let walker = walker_for_tug(drivers[i], &params.dependence, params, &mut rng, seed);
                let series = generate_walker(&walker)?;
                match extract_features(&series, &extraction) {
                    Ok(features) => {
                        let video = CohortVideo {
                            video_id: format!("v{i:04}"),
                            subject_id: format!("s{:03}", i % params.n_subjects),
                            tug_s: tugs[i],
                            walker,
                            series,
                            attempts: attempt + 1,
                        };
                        return Ok((video, features));
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            Err(SynthError::Extraction {
                video: i,
                attempts: MAX_ATTEMPTS,
                source: last_err.expect("at least one attempt"),
            })
        })
        .collect::<Result<_, _>>()?;

    let regenerated_videos = made.iter().filter(|(v, _)| v.attempts > 1).count();
    let samples = made
        .iter()
        .map(|(v, f)| GaitSample {
            features: f.clone(),
            tug_s: v.tug_s,
            subject_id: v.subject_id.clone(),
            video_id: v.video_id.clone(),
        })
        .collect();
    let dataset = Dataset::new(samples).map_err(|e| SynthError::Parameter(e.to_string()))?;
    Ok(Cohort {
        videos: made.into_iter().map(|(v, _)| v).collect(),
        dataset,
        truth: CohortTruth {
            informative_features: if params.dependence_enabled {
                planted_features()
            } else {
                Vec::new()
            },
            dependence_enabled: params.dependence_enabled,
            regenerated_videos,
            params: *params,
        },
    })
}
