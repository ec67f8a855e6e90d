//! Gait characteristics from 3D pose series.
//!
//! World coordinates are meters with `z` pointing up. The body centre is the
//! midpoint of the two hip joints; its trajectory is rotated into body axes
//! (anteroposterior, mediolateral, vertical), cut into fixed windows, and each
//! window yields the nine characteristics below. The feature vector holds the
//! mean and population variance of every characteristic across windows.

use std::collections::BTreeMap;
use std::fmt;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_WINDOW_S: f64 = 5.0;
pub const DEFAULT_THRESHOLD_HZ: f64 = 0.7;

/// Peaks must rise this far (in units of the window's vertical std) above
/// their surroundings.
pub const MIN_PROMINENCE_STD: f64 = 0.3;
pub const MIN_PEAK_SEPARATION_S: f64 = 0.3;
/// Spectral analysis needs at least this many uniformly resampled points.
pub const MIN_SPECTRUM_SAMPLES: usize = 64;
/// Heading is undefined below this net horizontal displacement.
pub const MIN_DISPLACEMENT_M: f64 = 0.5;
/// Accelerations below this are finite-difference round-off and are set to 0.
pub const ACCEL_ROUNDOFF_FLOOR: f64 = 1e-9;
const HEADING_SMOOTHING_S: f64 = 1.0;
/// Timestamps this close to a window boundary count as on it.
const BOUNDARY_TOLERANCE_S: f64 = 1e-9;

/// Joint names accepted in pose files.
pub mod joints {
    pub const LEFT_HIP: &str = "left_hip";
    pub const RIGHT_HIP: &str = "right_hip";

    /// Body centre joints every frame must carry.
    pub const REQUIRED: [&str; 2] = [LEFT_HIP, RIGHT_HIP];

    pub const VOCABULARY: [&str; 17] = [
        "nose",
        "left_eye",
        "right_eye",
        "left_ear",
        "right_ear",
        "left_shoulder",
        "right_shoulder",
        "left_elbow",
        "right_elbow",
        "left_wrist",
        "right_wrist",
        "left_hip",
        "right_hip",
        "left_knee",
        "right_knee",
        "left_ankle",
        "right_ankle",
    ];

    pub fn is_known(name: &str) -> bool {
        VOCABULARY.contains(&name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaitError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("stationary subject: net horizontal displacement {displacement_m:.3} m is below {MIN_DISPLACEMENT_M} m")]
    Stationary { displacement_m: f64 },
    #[error("signal of {duration_s:.3} s is shorter than half a {window_s} s window")]
    TooShort { duration_s: f64, window_s: f64 },
    #[error("insufficient gait events: {peaks} peaks found, at least 3 needed")]
    InsufficientGaitEvents { peaks: usize },
    #[error("undefined spectrum: {0}")]
    UndefinedSpectrum(String),
    #[error("incomplete feature: no window produced a value for {field}")]
    IncompleteFeature { field: Characteristic },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// One frame of joint positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub timestamp_s: f64,
    pub joints: BTreeMap<String, [f64; 3]>,
}

/// Timestamped joint positions of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSeries {
    frames: Vec<PoseFrame>,
    frame_rate_hz: f64,
    subject_id: String,
}

impl PoseSeries {
    pub fn new(frames: Vec<PoseFrame>, frame_rate_hz: f64, subject_id: impl Into<String>) -> Result<Self, GaitError> {
        if frames.len() < 2 {
            return Err(GaitError::Schema(format!(
                "a pose series needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(GaitError::Schema(format!(
                "frame rate must be positive, got {frame_rate_hz}"
            )));
        }
        for (i, frame) in frames.iter().enumerate() {
            if !frame.timestamp_s.is_finite() {
                return Err(GaitError::Schema(format!("frame {i}: non-finite timestamp")));
            }
            if i > 0 && frame.timestamp_s <= frames[i - 1].timestamp_s {
                return Err(GaitError::Schema(format!(
                    "frame {i}: timestamp {} does not increase",
                    frame.timestamp_s
                )));
            }
            for joint in joints::REQUIRED {
                if !frame.joints.contains_key(joint) {
                    return Err(GaitError::Schema(format!("frame {i}: missing joint {joint}")));
                }
            }
            if let Some((name, _)) = frame.joints.iter().find(|(_, p)| p.iter().any(|c| !c.is_finite())) {
                return Err(GaitError::Schema(format!(
                    "frame {i}: non-finite coordinate for {name}"
                )));
            }
        }
        Ok(Self {
            frames,
            frame_rate_hz,
            subject_id: subject_id.into(),
        })
    }

    pub fn frames(&self) -> &[PoseFrame] {
        &self.frames
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    /// Same series with every joint rotated by `angle_rad` about the vertical axis.
    pub fn rotated_about_vertical(&self, angle_rad: f64) -> Self {
        let (s, c) = angle_rad.sin_cos();
        self.map_positions(|[x, y, z]| [c * x - s * y, s * x + c * y, z])
    }

    /// Same series with `offset_s` added to every timestamp.
    pub fn time_shifted(&self, offset_s: f64) -> Self {
        let mut out = self.clone();
        for f in &mut out.frames {
            f.timestamp_s += offset_s;
        }
        out
    }

    /// Same series with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        self.map_positions(|p| p.map(|c| c * factor))
    }

    fn map_positions(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = self.clone();
        for frame in &mut out.frames {
            for p in frame.joints.values_mut() {
                *p = f(*p);
            }
        }
        out
    }

    fn body_centre(&self, i: usize) -> [f64; 3] {
        let j = &self.frames[i].joints;
        let l = j[joints::LEFT_HIP];
        let r = j[joints::RIGHT_HIP];
        [0.5 * (l[0] + r[0]), 0.5 * (l[1] + r[1]), 0.5 * (l[2] + r[2])]
    }
}

/// Body-axis index into [`BodyFrameSignal`] arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Anteroposterior, the direction of travel.
    Ap = 0,
    /// Mediolateral, positive to the subject's left.
    Ml = 1,
    /// Vertical, positive up.
    V = 2,
}

/// Body-centre kinematics resolved into (AP, ML, V) axes.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyFrameSignal {
    pub t: Vec<f64>,
    pub position: [Vec<f64>; 3],
    pub velocity: [Vec<f64>; 3],
    pub acceleration: [Vec<f64>; 3],
    /// Nominal sampling rate, used only for spectral resampling.
    pub frame_rate_hz: f64,
}

impl BodyFrameSignal {
    /// Builds a signal from body-axis positions; velocity and acceleration
    /// come from central finite differences on the given timestamps.
    pub fn from_positions(t: Vec<f64>, position: [Vec<f64>; 3], frame_rate_hz: f64) -> Result<Self, GaitError> {
        if t.len() < 2 {
            return Err(GaitError::Schema("a signal needs at least 2 samples".into()));
        }
        if position.iter().any(|p| p.len() != t.len()) {
            return Err(GaitError::Schema("position arrays differ in length from time".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GaitError::Schema("timestamps must strictly increase".into()));
        }
        let velocity = position.clone().map(|p| derivative(&t, &p));
        let acceleration = velocity.clone().map(|v| {
            derivative(&t, &v)
                .into_iter()
                .map(|a| if a.abs() < ACCEL_ROUNDOFF_FLOOR { 0.0 } else { a })
                .collect()
        });
        Ok(Self {
            t,
            position,
            velocity,
            acceleration,
            frame_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn axis_position(&self, axis: Axis) -> &[f64] {
        &self.position[axis as usize]
    }

    fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let cut = |a: &[Vec<f64>; 3]| {
            [
                a[0][range.clone()].to_vec(),
                a[1][range.clone()].to_vec(),
                a[2][range.clone()].to_vec(),
            ]
        };
        Self {
            t: self.t[range.clone()].to_vec(),
            position: cut(&self.position),
            velocity: cut(&self.velocity),
            acceleration: cut(&self.acceleration),
            frame_rate_hz: self.frame_rate_hz,
        }
    }

    /// Horizontal (AP, ML) position linearly interpolated at time `at`.
    fn horizontal_at(&self, at: f64) -> [f64; 2] {
        [
            interpolate(&self.t, &self.position[0], at),
            interpolate(&self.t, &self.position[1], at),
        ]
    }
}

fn derivative(t: &[f64], x: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (x[b] - x[a]) / (t[b] - t[a])
        })
        .collect()
}

fn interpolate(t: &[f64], x: &[f64], at: f64) -> f64 {
    let hi = t.partition_point(|&s| s < at).clamp(1, t.len() - 1);
    let lo = hi - 1;
    let w = (at - t[lo]) / (t[hi] - t[lo]);
    x[lo] + w * (x[hi] - x[lo])
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standard deviation with the `n - 1` divisor; zero for a single value.
fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn population_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Rotates the hip-midpoint trajectory into body axes.
///
/// The heading is the direction from the mean horizontal position over the
/// first second to the mean over the last second.
pub fn to_body_frame(series: &PoseSeries) -> Result<BodyFrameSignal, GaitError> {
    let n = series.frames.len();
    if n < 2 {
        return Err(GaitError::Schema("a pose series needs at least 2 frames".into()));
    }
    let t: Vec<f64> = series.frames.iter().map(|f| f.timestamp_s).collect();
    let centre: Vec<[f64; 3]> = (0..n).map(|i| series.body_centre(i)).collect();

    let (t0, t1) = (t[0], t[n - 1]);
    let mean_xy = |keep: &dyn Fn(f64) -> bool| {
        let pts: Vec<&[f64; 3]> = centre
            .iter()
            .zip(&t)
            .filter(|(_, &ti)| keep(ti))
            .map(|(c, _)| c)
            .collect();
        let k = pts.len() as f64;
        [
            pts.iter().map(|p| p[0]).sum::<f64>() / k,
            pts.iter().map(|p| p[1]).sum::<f64>() / k,
        ]
    };
    let start = mean_xy(&|ti| ti <= t0 + HEADING_SMOOTHING_S);
    let end = mean_xy(&|ti| ti >= t1 - HEADING_SMOOTHING_S);
    let (dx, dy) = (end[0] - start[0], end[1] - start[1]);
    let displacement_m = dx.hypot(dy);
    if !(displacement_m >= MIN_DISPLACEMENT_M) {
        return Err(GaitError::Stationary { displacement_m });
    }
    let (hx, hy) = (dx / displacement_m, dy / displacement_m);

    let ap = centre.iter().map(|p| p[0] * hx + p[1] * hy).collect();
    let ml = centre.iter().map(|p| -p[0] * hy + p[1] * hx).collect();
    let v = centre.iter().map(|p| p[2]).collect();
    BodyFrameSignal::from_positions(t, [ap, ml, v], series.frame_rate_hz)
}

/// Cuts a signal into consecutive non-overlapping windows of `window_s`.
///
/// A trailing remainder is kept as its own window when it spans at least
/// half a window.
pub fn segment_windows(signal: &BodyFrameSignal, window_s: f64) -> Result<Vec<BodyFrameSignal>, GaitError> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(GaitError::Parameter(format!(
            "window length must be positive, got {window_s}"
        )));
    }
    let duration_s = signal.duration_s();
    if duration_s < window_s / 2.0 {
        return Err(GaitError::TooShort { duration_s, window_s });
    }
    let full = (duration_s / window_s).floor() as usize;
    let remainder = duration_s - full as f64 * window_s;
    let count = if remainder >= window_s / 2.0 { full + 1 } else { full };
    let t0 = signal.t[0];

    let mut windows = Vec::with_capacity(count);
    let mut begin = 0;
    for w in 0..count {
        let end = if w + 1 == count && count > full {
            signal.len()
        } else {
            // A frame on the boundary opens the next window however the
            // subtraction rounds.
            let stop = (w + 1) as f64 * window_s - BOUNDARY_TOLERANCE_S;
            signal.t.partition_point(|&s| s - t0 < stop)
        };
        windows.push(signal.slice(begin..end));
        begin = end;
    }
    Ok(windows)
}

/// Times of vertical body-centre peaks, one per step.
///
/// The vertical position is detrended with a least-squares line; local maxima
/// must have a prominence of at least [`MIN_PROMINENCE_STD`] times the
/// detrended standard deviation and lie [`MIN_PEAK_SEPARATION_S`] apart
/// (higher peaks win). Peak times are refined by a parabola through the
/// peak sample and its neighbours.
pub fn detect_strides(signal: &BodyFrameSignal) -> Result<Vec<f64>, GaitError> {
    let t = &signal.t;
    let n = t.len();
    if n < 3 {
        return Err(GaitError::InsufficientGaitEvents { peaks: 0 });
    }
    let v = detrend(t, signal.axis_position(Axis::V));
    let sigma = population_std(&v);
    if !(sigma > 0.0) {
        return Err(GaitError::InsufficientGaitEvents { peaks: 0 });
    }

    let mut candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
        .filter(|&i| prominence(&v, i) >= MIN_PROMINENCE_STD * sigma)
        .collect();
    candidates.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in candidates {
        if kept.iter().all(|&j| (t[i] - t[j]).abs() >= MIN_PEAK_SEPARATION_S) {
            kept.push(i);
        }
    }
    kept.sort_unstable();

    if kept.len() < 3 {
        return Err(GaitError::InsufficientGaitEvents { peaks: kept.len() });
    }
    Ok(kept.into_iter().map(|i| refine_peak(t, &v, i)).collect())
}

/// Stride times from step peaks: each peak to its second-next peak.
pub fn stride_times(peaks: &[f64]) -> Vec<f64> {
    peaks.windows(3).map(|w| w[2] - w[0]).collect()
}

fn detrend(t: &[f64], x: &[f64]) -> Vec<f64> {
    let tm = mean(t);
    let xm = mean(x);
    let sxx: f64 = t.iter().map(|ti| (ti - tm).powi(2)).sum();
    let sxy: f64 = t.iter().zip(x).map(|(ti, xi)| (ti - tm) * (xi - xm)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    t.iter().zip(x).map(|(ti, xi)| xi - xm - slope * (ti - tm)).collect()
}

/// Height of peak `i` above the higher of the two lowest points reached
/// before the signal climbs above the peak on either side.
fn prominence(v: &[f64], i: usize) -> f64 {
    let peak = v[i];
    let mut left_min = peak;
    for &x in v[..i].iter().rev() {
        if x > peak {
            break;
        }
        left_min = left_min.min(x);
    }
    let mut right_min = peak;
    for &x in &v[i + 1..] {
        if x > peak {
            break;
        }
        right_min = right_min.min(x);
    }
    peak - left_min.max(right_min)
}

fn refine_peak(t: &[f64], v: &[f64], i: usize) -> f64 {
    let (t0, t1, t2) = (t[i - 1], t[i], t[i + 1]);
    let (v0, v1, v2) = (v[i - 1], v[i], v[i + 1]);
    let d01 = (v1 - v0) / (t1 - t0);
    let d12 = (v2 - v1) / (t2 - t1);
    let a = (d12 - d01) / (t2 - t0);
    if !(a < 0.0) {
        return t1;
    }
    let b = d01 - a * (t0 + t1);
    (-b / (2.0 * a)).clamp(t0, t2)
}

/// Frequency-domain characteristics of one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFeatures {
    pub stride_frequency_hz: f64,
    pub low_frequency_percentage: f64,
}

/// Modal-frequency stride estimate and vertical low-frequency power share.
///
/// Acceleration is resampled to the nominal frame rate and mean-removed.
/// `stride_frequency` is the median of the ML modal frequency and half the V
/// and AP modal frequencies; axes without power are left out of the median.
/// `low_frequency_percentage` is the V-axis power in `(0, threshold_hz]`
/// over the V-axis power above 0 Hz.
pub fn spectral_features(signal: &BodyFrameSignal, threshold_hz: f64) -> Result<SpectralFeatures, GaitError> {
    if !(threshold_hz.is_finite() && threshold_hz > 0.0) {
        return Err(GaitError::Parameter(format!(
            "threshold must be positive, got {threshold_hz}"
        )));
    }
    let fs = signal.frame_rate_hz;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(GaitError::Parameter(format!("frame rate must be positive, got {fs}")));
    }
    let t0 = signal.t[0];
    let samples = (signal.duration_s() * fs + 1e-9).floor() as usize + 1;
    if samples < MIN_SPECTRUM_SAMPLES {
        return Err(GaitError::UndefinedSpectrum(format!(
            "{samples} resampled points, at least {MIN_SPECTRUM_SAMPLES} needed"
        )));
    }
    let grid: Vec<f64> = (0..samples).map(|j| t0 + j as f64 / fs).collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(samples);
    let mut spectra = Vec::with_capacity(3);
    for axis in &signal.acceleration {
        let resampled: Vec<f64> = grid.iter().map(|&g| interpolate(&signal.t, axis, g)).collect();
        let m = mean(&resampled);
        let mut buf: Vec<Complex<f64>> = resampled.iter().map(|&x| Complex::new(x - m, 0.0)).collect();
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..=samples / 2].iter().map(|c| c.norm_sqr()).collect();
        spectra.push(power);
    }
    let freq = |k: usize| k as f64 * fs / samples as f64;
    let total = |p: &[f64]| p[1..].iter().sum::<f64>();
    let modal = |p: &[f64]| {
        let mut best = 1;
        for k in 2..p.len() {
            if p[k] > p[best] {
                best = k;
            }
        }
        freq(best)
    };

    let power_v = &spectra[Axis::V as usize];
    let total_v = total(power_v);
    if !(total_v > 0.0) {
        return Err(GaitError::UndefinedSpectrum(
            "vertical acceleration carries no power".into(),
        ));
    }
    let mut estimates = Vec::with_capacity(3);
    for (axis, factor) in [(Axis::Ml, 1.0), (Axis::V, 0.5), (Axis::Ap, 0.5)] {
        let p = &spectra[axis as usize];
        if total(p) > 0.0 {
            estimates.push(factor * modal(p));
        }
    }
    estimates.sort_by(f64::total_cmp);
    let mid = estimates.len() / 2;
    let stride_frequency_hz = if estimates.len() % 2 == 1 {
        estimates[mid]
    } else {
        0.5 * (estimates[mid - 1] + estimates[mid])
    };

    let low: f64 = (1..power_v.len())
        .filter(|&k| freq(k) <= threshold_hz)
        .map(|k| power_v[k])
        .sum();
    Ok(SpectralFeatures {
        stride_frequency_hz,
        low_frequency_percentage: (low / total_v).clamp(0.0, 1.0),
    })
}

/// The nine per-window gait characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristic {
    GaitSpeed,
    SpeedVariability,
    StrideTime,
    StrideTimeVariability,
    StrideFrequency,
    MovementIntensity,
    LowFrequencyPercentage,
    AccelerationRange,
    StepLength,
}

impl Characteristic {
    pub const ALL: [Characteristic; 9] = [
        Characteristic::GaitSpeed,
        Characteristic::SpeedVariability,
        Characteristic::StrideTime,
        Characteristic::StrideTimeVariability,
        Characteristic::StrideFrequency,
        Characteristic::MovementIntensity,
        Characteristic::LowFrequencyPercentage,
        Characteristic::AccelerationRange,
        Characteristic::StepLength,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Characteristic::GaitSpeed => "gait_speed",
            Characteristic::SpeedVariability => "speed_variability",
            Characteristic::StrideTime => "stride_time",
            Characteristic::StrideTimeVariability => "stride_time_variability",
            Characteristic::StrideFrequency => "stride_frequency",
            Characteristic::MovementIntensity => "movement_intensity",
            Characteristic::LowFrequencyPercentage => "low_frequency_percentage",
            Characteristic::AccelerationRange => "acceleration_range",
            Characteristic::StepLength => "step_length",
        }
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Characteristics of one window. Stride-based and spectral values are
/// `None` when the window has too few peaks or no usable spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitCharacteristics {
    /// m/s
    pub gait_speed: f64,
    /// m/s
    pub speed_variability: Option<f64>,
    /// s
    pub stride_time: Option<f64>,
    /// s
    pub stride_time_variability: Option<f64>,
    /// Hz
    pub stride_frequency: Option<f64>,
    /// m/s²
    pub movement_intensity: f64,
    pub low_frequency_percentage: Option<f64>,
    /// m/s²
    pub acceleration_range: f64,
    /// m
    pub step_length: Option<f64>,
}

impl GaitCharacteristics {
    pub fn get(&self, c: Characteristic) -> Option<f64> {
        match c {
            Characteristic::GaitSpeed => Some(self.gait_speed),
            Characteristic::SpeedVariability => self.speed_variability,
            Characteristic::StrideTime => self.stride_time,
            Characteristic::StrideTimeVariability => self.stride_time_variability,
            Characteristic::StrideFrequency => self.stride_frequency,
            Characteristic::MovementIntensity => Some(self.movement_intensity),
            Characteristic::LowFrequencyPercentage => self.low_frequency_percentage,
            Characteristic::AccelerationRange => Some(self.acceleration_range),
            Characteristic::StepLength => self.step_length,
        }
    }
}

/// Computes all nine characteristics for one window.
///
/// Gait speed is the net horizontal displacement over the window duration.
/// Stride speeds are net horizontal displacements between a peak and its
/// second-next peak over the stride time; step length is the mean horizontal
/// displacement between consecutive peaks. Stride variabilities are sample
/// standard deviations. Intensity and range use the acceleration magnitude.
pub fn compute_characteristics(window: &BodyFrameSignal, threshold_hz: f64) -> Result<GaitCharacteristics, GaitError> {
    let n = window.len();
    if n < 2 || window.duration_s() <= 0.0 {
        return Err(GaitError::Schema("a window needs at least 2 samples".into()));
    }
    let last = n - 1;
    let gait_speed = (window.position[0][last] - window.position[0][0])
        .hypot(window.position[1][last] - window.position[1][0])
        / window.duration_s();

    let magnitude: Vec<f64> = (0..n)
        .map(|i| {
            let a = &window.acceleration;
            let m = (a[0][i].powi(2) + a[1][i].powi(2) + a[2][i].powi(2)).sqrt();
            if m < ACCEL_ROUNDOFF_FLOOR {
                0.0
            } else {
                m
            }
        })
        .collect();
    let movement_intensity = population_std(&magnitude);
    let (lo, hi) = magnitude
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| {
            (lo.min(m), hi.max(m))
        });
    let acceleration_range = hi - lo;

    let mut out = GaitCharacteristics {
        gait_speed,
        speed_variability: None,
        stride_time: None,
        stride_time_variability: None,
        stride_frequency: None,
        movement_intensity,
        low_frequency_percentage: None,
        acceleration_range,
        step_length: None,
    };

    if let Ok(peaks) = detect_strides(window) {
        let strides = stride_times(&peaks);
        let at: Vec<[f64; 2]> = peaks.iter().map(|&p| window.horizontal_at(p)).collect();
        let dist = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]).hypot(b[1] - a[1]);
        let speeds: Vec<f64> = (0..strides.len())
            .map(|i| dist(at[i], at[i + 2]) / strides[i])
            .collect();
        let steps: Vec<f64> = at.windows(2).map(|w| dist(w[0], w[1])).collect();
        out.stride_time = Some(mean(&strides));
        out.stride_time_variability = Some(sample_std(&strides));
        out.speed_variability = Some(sample_std(&speeds));
        out.step_length = Some(mean(&steps));
    }
    if let Ok(spec) = spectral_features(window, threshold_hz) {
        out.stride_frequency = Some(spec.stride_frequency_hz);
        out.low_frequency_percentage = Some(spec.low_frequency_percentage);
    }
    Ok(out)
}

/// Named feature values; for gait data, the 18 mean/variance slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self, GaitError> {
        if names.len() != values.len() {
            return Err(GaitError::Schema(format!(
                "{} feature names for {} values",
                names.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GaitError::Schema("feature values must be finite".into()));
        }
        Ok(Self { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// The 18 feature names in slot order: `<characteristic>.mean`, `<characteristic>.var`.
pub fn gait_feature_names() -> Vec<String> {
    Characteristic::ALL
        .iter()
        .flat_map(|c| [format!("{}.mean", c.name()), format!("{}.var", c.name())])
        .collect()
}

/// Mean and population variance of each characteristic across windows.
///
/// Windows missing a value are skipped for that characteristic only.
pub fn aggregate_features(per_window: &[GaitCharacteristics]) -> Result<FeatureVector, GaitError> {
    let mut values = Vec::with_capacity(18);
    for c in Characteristic::ALL {
        let xs: Vec<f64> = per_window.iter().filter_map(|w| w.get(c)).collect();
        if xs.is_empty() {
            return Err(GaitError::IncompleteFeature { field: c });
        }
        let m = mean(&xs);
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        values.push(m);
        values.push(var);
    }
    FeatureVector::new(gait_feature_names(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub window_s: f64,
    pub threshold_hz: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            window_s: DEFAULT_WINDOW_S,
            threshold_hz: DEFAULT_THRESHOLD_HZ,
        }
    }
}

/// Per-window characteristics of a whole series.
pub fn extract_windows(series: &PoseSeries, config: &ExtractionConfig) -> Result<Vec<GaitCharacteristics>, GaitError> {
    let signal = to_body_frame(series)?;
    segment_windows(&signal, config.window_s)?
        .iter()
        .map(|w| compute_characteristics(w, config.threshold_hz))
        .collect()
}

/// The 18-value feature vector of a whole series.
pub fn extract_features(series: &PoseSeries, config: &ExtractionConfig) -> Result<FeatureVector, GaitError> {
    aggregate_features(&extract_windows(series, config)?)
}
