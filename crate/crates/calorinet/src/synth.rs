//! Deterministic synthetic dataset generation: moving-ellipse silhouettes,
//! gravity-plus-band accelerometer traces, and first-order-lag calorie
//! dynamics with known structure, so end-to-end behavior can be checked
//! against values computable from the generator parameters alone.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::core::{
    AccelSample, Activity, ActivityLabel, CalorieSample, Dataset, Session, SilhouetteFrame,
    SubjectRecord, FRAME_RATE_HZ,
};
use crate::error::{Error, Result};

/// Ellipse motion of one activity: horizontal oscillation plus a size factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    /// Center oscillation amplitude, pixels.
    pub amplitude: f64,
    pub frequency_hz: f64,
    /// Multiplies the base ellipse semi-axes.
    pub scale: f64,
}

/// Accelerometer signature of one activity: a single band sinusoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelSignature {
    pub band_hz: f64,
    /// Sinusoid amplitude, m/s².
    pub amplitude: f64,
}

/// Per-activity behavior of a synthetic subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityModel {
    /// Steady-state energy expenditure above resting, kcal/min.
    pub increment_kcal_per_min: f64,
    pub motion: MotionModel,
    pub accel: AccelSignature,
}

/// A synthetic subject: dynamics parameters plus a private seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthProfile {
    pub seed: u64,
    pub resting_kcal_per_min: f64,
    /// First-order metabolic time constant, seconds.
    pub lag_secs: f64,
    pub weight_kg: f64,
    pub height_cm: f64,
    /// Gravity vector per accelerometer (waist, wrist), m/s².
    pub gravity: [[f64; 3]; 2],
    /// Additive white noise std on every accel axis, m/s².
    pub accel_noise_std: f64,
    pub activities: BTreeMap<Activity, ActivityModel>,
}

impl SynthProfile {
    pub fn validate(&self) -> Result<()> {
        if self.resting_kcal_per_min <= 0.0 {
            return Err(Error::Argument("resting rate must be positive".into()));
        }
        if self.lag_secs <= 0.0 {
            return Err(Error::Argument("metabolic time constant must be positive".into()));
        }
        if self.weight_kg <= 0.0 || self.height_cm <= 0.0 {
            return Err(Error::Argument("weight and height must be positive".into()));
        }
        if self.accel_noise_std < 0.0 {
            return Err(Error::Argument("accel noise std must be non-negative".into()));
        }
        for (activity, m) in &self.activities {
            if m.increment_kcal_per_min < 0.0
                || m.motion.amplitude < 0.0
                || m.motion.scale <= 0.0
                || m.accel.amplitude < 0.0
            {
                return Err(Error::Argument(format!(
                    "invalid dynamics for activity {activity}"
                )));
            }
            let nyquist = FRAME_RATE_HZ / 2.0;
            if m.motion.frequency_hz < 0.0
                || m.motion.frequency_hz >= nyquist
                || m.accel.band_hz < 0.0
                || m.accel.band_hz >= nyquist
            {
                return Err(Error::Argument(format!(
                    "frequencies for activity {activity} must lie in [0, {nyquist}) Hz"
                )));
            }
        }
        Ok(())
    }

    /// Largest per-activity increment, kcal/min.
    pub fn max_increment(&self) -> f64 {
        self.activities
            .values()
            .map(|m| m.increment_kcal_per_min)
            .fold(0.0, f64::max)
    }
}

/// A plausible default subject; `index` varies resting rate and gravity
/// orientation slightly so subjects are distinguishable.
pub fn default_profile(index: usize) -> SynthProfile {
    let g = 9.81;
    let tilt = 0.05 * index as f64;
    let mut activities = BTreeMap::new();
    let entries: [(Activity, f64, f64, f64, f64, f64, f64); 4] = [
        // (activity, increment, motion amp, motion hz, scale, band hz, accel amp)
        (Activity::Stand, 0.2, 0.0, 0.0, 1.0, 0.5, 0.1),
        (Activity::Sit, 0.1, 0.5, 0.2, 0.7, 0.5, 0.05),
        (Activity::Walk, 2.2, 4.0, 1.0, 1.0, 2.0, 2.0),
        (Activity::Exercise, 4.5, 8.0, 2.0, 1.1, 6.0, 4.0),
    ];
    for (activity, inc, amp, mhz, scale, bhz, aamp) in entries {
        activities.insert(
            activity,
            ActivityModel {
                increment_kcal_per_min: inc,
                motion: MotionModel {
                    amplitude: amp,
                    frequency_hz: mhz,
                    scale,
                },
                accel: AccelSignature {
                    band_hz: bhz,
                    amplitude: aamp,
                },
            },
        );
    }
    SynthProfile {
        seed: 0x5348_u64.wrapping_add(index as u64),
        resting_kcal_per_min: 1.2 + 0.1 * index as f64,
        lag_secs: 5.0,
        weight_kg: 60.0 + 5.0 * index as f64,
        height_cm: 165.0 + 3.0 * index as f64,
        gravity: [[tilt.sin() * g, 0.0, tilt.cos() * g], [0.0, tilt.sin() * g, tilt.cos() * g]],
        accel_noise_std: 0.05,
        activities,
    }
}

/// Parses a profile from simple `key = value` text. Scalar keys:
/// `seed`, `resting_kcal_per_min`, `lag_secs`, `weight_kg`, `height_cm`,
/// `accel_noise_std`, `gravity_waist`/`gravity_wrist` (three comma-separated
/// numbers). Per-activity keys use an activity-name prefix, e.g.
/// `walk.increment`, `walk.motion_amplitude`, `walk.motion_hz`,
/// `walk.motion_scale`, `walk.band_hz`, `walk.accel_amplitude`.
pub fn parse_profile(text: &str) -> Result<SynthProfile> {
    let mut profile = default_profile(0);
    profile.activities.clear();
    let parse_err = |line: usize, msg: String| Error::Parse {
        file: "profile".into(),
        line,
        msg,
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected 'key = value', got '{trimmed}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| parse_err(line, format!("invalid number '{v}'")))
        };
        let vec3 = |v: &str| -> Result<[f64; 3]> {
            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(parse_err(line, format!("expected 3 numbers, got '{v}'")));
            }
            Ok([num(parts[0])?, num(parts[1])?, num(parts[2])?])
        };

        match key {
            "seed" => {
                profile.seed = value
                    .parse()
                    .map_err(|_| parse_err(line, format!("invalid seed '{value}'")))?
            }
            "resting_kcal_per_min" => profile.resting_kcal_per_min = num(value)?,
            "lag_secs" => profile.lag_secs = num(value)?,
            "weight_kg" => profile.weight_kg = num(value)?,
            "height_cm" => profile.height_cm = num(value)?,
            "accel_noise_std" => profile.accel_noise_std = num(value)?,
            "gravity_waist" => profile.gravity[0] = vec3(value)?,
            "gravity_wrist" => profile.gravity[1] = vec3(value)?,
            _ => {
                let (name, field) = key
                    .split_once('.')
                    .ok_or_else(|| parse_err(line, format!("unknown key '{key}'")))?;
                let activity = Activity::parse(name)
                    .ok_or_else(|| parse_err(line, format!("unknown activity '{name}'")))?;
                let model = profile.activities.entry(activity).or_insert(ActivityModel {
                    increment_kcal_per_min: 0.0,
                    motion: MotionModel {
                        amplitude: 0.0,
                        frequency_hz: 0.0,
                        scale: 1.0,
                    },
                    accel: AccelSignature {
                        band_hz: 0.0,
                        amplitude: 0.0,
                    },
                });
                match field {
                    "increment" => model.increment_kcal_per_min = num(value)?,
                    "motion_amplitude" => model.motion.amplitude = num(value)?,
                    "motion_hz" => model.motion.frequency_hz = num(value)?,
                    "motion_scale" => model.motion.scale = num(value)?,
                    "band_hz" => model.accel.band_hz = num(value)?,
                    "accel_amplitude" => model.accel.amplitude = num(value)?,
                    _ => return Err(parse_err(line, format!("unknown key '{key}'"))),
                }
            }
        }
    }
    profile.validate()?;
    Ok(profile)
}

/// What to generate: subjects, session script, and image geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub sessions_per_subject: usize,
    /// Activity sequence with per-entry duration in seconds.
    pub script: Vec<(Activity, f64)>,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sessions_per_subject: 2,
            script: vec![
                (Activity::Stand, 60.0),
                (Activity::Walk, 60.0),
                (Activity::Exercise, 60.0),
                (Activity::Sit, 60.0),
            ],
            width: 80,
            height: 60,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sessions_per_subject == 0 {
            return Err(Error::Argument("need at least one session per subject".into()));
        }
        if self.script.is_empty() || self.script.iter().any(|(_, secs)| *secs <= 0.0) {
            return Err(Error::Argument(
                "activity script must be non-empty with positive durations".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Argument("image dimensions must be positive".into()));
        }
        Ok(())
    }

    /// Total frames per session.
    pub fn frames(&self) -> u64 {
        self.script
            .iter()
            .map(|(_, secs)| (secs * FRAME_RATE_HZ).round() as u64)
            .sum()
    }
}

/// Rounds to the canonical 6-decimal on-disk precision, so generated
/// in-memory datasets equal their write-then-load round trip exactly.
fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn mix(seed: u64, index: u64) -> u64 {
    seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Renders a filled ellipse into a binary mask.
fn render_ellipse(
    width: usize,
    height: usize,
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
) -> Vec<u8> {
    let mut mask = vec![0u8; width * height];
    for y in 0..height {
        for x in 0..width {
            let dx = (x as f64 - cx) / rx;
            let dy = (y as f64 - cy) / ry;
            if dx * dx + dy * dy <= 1.0 {
                mask[y * width + x] = 1;
            }
        }
    }
    mask
}

/// Activity in effect at frame `t` plus the frame where its segment starts.
fn script_at(script: &[(Activity, f64)], t: u64) -> (Activity, u64) {
    let mut start = 0u64;
    for (activity, secs) in script {
        let frames = (secs * FRAME_RATE_HZ).round() as u64;
        if t < start + frames {
            return (*activity, start);
        }
        start += frames;
    }
    let (activity, _) = script[script.len() - 1];
    (activity, start)
}

fn generate_session(
    id: &str,
    config: &SynthConfig,
    profile: &SynthProfile,
    rng: &mut ChaCha8Rng,
) -> Result<Session> {
    let frames = config.frames();
    let (w, h) = (config.width, config.height);
    let base_rx = w as f64 * 0.2;
    let base_ry = h as f64 * 0.3;
    let noise = Normal::new(0.0, profile.accel_noise_std.max(1e-12))
        .map_err(|e| Error::Argument(format!("invalid noise std: {e}")))?;
    let motion_phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let accel_phase: f64 = rng.gen_range(0.0..2.0 * PI);

    let mut silhouettes = Vec::with_capacity(frames as usize);
    let mut accel = Vec::with_capacity(frames as usize);
    let mut calories = Vec::with_capacity(frames as usize);
    let mut labels = Vec::new();

    let first = script_at(&config.script, 0).0;
    let first_model = profile.activities.get(&first).ok_or_else(|| {
        Error::Argument(format!("profile has no dynamics for activity {first}"))
    })?;
    // Start at the first segment's steady state.
    let mut kcal = profile.resting_kcal_per_min + first_model.increment_kcal_per_min;
    let alpha = 1.0 - (-1.0 / (FRAME_RATE_HZ * profile.lag_secs)).exp();

    for t in 0..frames {
        let (activity, _) = script_at(&config.script, t);
        let model = profile.activities.get(&activity).ok_or_else(|| {
            Error::Argument(format!("profile has no dynamics for activity {activity}"))
        })?;
        let secs = t as f64 / FRAME_RATE_HZ;

        let cx = w as f64 / 2.0
            + model.motion.amplitude
                * (2.0 * PI * model.motion.frequency_hz * secs + motion_phase).sin();
        let cy = h as f64 / 2.0;
        let mask = render_ellipse(w, h, cx, cy, base_rx * model.motion.scale, base_ry * model.motion.scale);
        silhouettes.push(SilhouetteFrame::new(t, w, h, mask)?);

        let band = model.accel.amplitude
            * (2.0 * PI * model.accel.band_hz * secs + accel_phase).sin();
        let mut channels = [0.0f64; 6];
        for (acc, g) in profile.gravity.iter().enumerate() {
            for axis in 0..3 {
                let v = g[axis]
                    + if axis == 0 { band } else { 0.0 }
                    + noise.sample(rng);
                channels[acc * 3 + axis] = round6(v);
            }
        }
        accel.push(AccelSample::new(t, channels)?);

        let steady = profile.resting_kcal_per_min + model.increment_kcal_per_min;
        kcal += (steady - kcal) * alpha;
        calories.push(CalorieSample::new(t, Some(round6(kcal)))?);
    }

    let mut start = 0u64;
    for (activity, secs) in &config.script {
        let seg = (secs * FRAME_RATE_HZ).round() as u64;
        labels.push(ActivityLabel::new(start, start + seg - 1, *activity)?);
        start += seg;
    }

    Ok(Session {
        id: id.to_string(),
        silhouettes,
        accel,
        calories,
        labels,
    })
}

/// Generates one subject per profile, each with `sessions_per_subject`
/// sessions following the shared activity script. Fully deterministic:
/// derived per-subject/per-session seeds make the same inputs produce the
/// same dataset (and hence byte-identical output trees).
pub fn generate_dataset(config: &SynthConfig, profiles: &[SynthProfile]) -> Result<Dataset> {
    config.validate()?;
    if profiles.is_empty() {
        return Err(Error::Argument("need at least one subject profile".into()));
    }
    let mut subjects = Vec::with_capacity(profiles.len());
    for (i, profile) in profiles.iter().enumerate() {
        profile.validate()?;
        let mut sessions = Vec::with_capacity(config.sessions_per_subject);
        for s in 0..config.sessions_per_subject {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(
                config.seed ^ profile.seed,
                (i * config.sessions_per_subject + s) as u64,
            ));
            sessions.push(generate_session(
                &format!("session{:02}", s + 1),
                config,
                profile,
                &mut rng,
            )?);
        }
        subjects.push(SubjectRecord {
            id: format!("subject{:02}", i + 1),
            weight_kg: round6(profile.weight_kg),
            height_cm: round6(profile.height_cm),
            sessions,
        });
    }
    Ok(Dataset { subjects })
}

/// Parameters of [`make_split_information_set`], exposed so its irreducible
/// error floors can be computed without regenerating anything.
pub mod split_info {
    pub const SUBJECTS: usize = 6;
    pub const SEGMENT_SECS: f64 = 20.0;
    pub const SEGMENTS: usize = 9;
    pub const LAG_SECS: f64 = 5.0;
    pub const BASE_KCAL_PER_MIN: f64 = 2.0;
    /// Calorie contribution of the silhouette-visible posture factor.
    pub const POSTURE_COEFF: f64 = 1.5;
    /// Calorie contribution of the accel-visible vibration factor.
    pub const VIBRATION_COEFF: f64 = 1.5;
    pub const VIBRATION_HZ: f64 = 6.0;
    pub const VIBRATION_AMPLITUDE: f64 = 3.0;
    pub const WIDTH: usize = 16;
    pub const HEIGHT: usize = 12;
    pub const WEIGHT_KG: f64 = 70.0;
    pub const HEIGHT_CM: f64 = 175.0;
}

/// A dataset whose calorie signal splits into a silhouette-only factor
/// (posture: large vs small ellipse) and an accel-only factor (a 6 Hz
/// vibration invisible in silhouettes), both piecewise constant over 20 s
/// segments and filtered through a 5 s first-order lag. Neither single
/// modality can predict the other factor's contribution; fusion sees both.
pub fn make_split_information_set(seed: u64) -> Result<Dataset> {
    use split_info::*;
    let seg_frames = (SEGMENT_SECS * FRAME_RATE_HZ).round() as u64;
    let frames = seg_frames * SEGMENTS as u64;
    let alpha = 1.0 - (-1.0 / (FRAME_RATE_HZ * LAG_SECS)).exp();

    let mut subjects = Vec::with_capacity(SUBJECTS);
    for i in 0..SUBJECTS {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, i as u64));
        let posture: Vec<f64> = (0..SEGMENTS).map(|_| rng.gen_range(0..2) as f64).collect();
        let vibration: Vec<f64> = (0..SEGMENTS).map(|_| rng.gen_range(0..2) as f64).collect();
        let accel_phase: f64 = rng.gen_range(0.0..2.0 * PI);

        let mut silhouettes = Vec::with_capacity(frames as usize);
        let mut accel = Vec::with_capacity(frames as usize);
        let mut calories = Vec::with_capacity(frames as usize);
        let mut kcal =
            BASE_KCAL_PER_MIN + POSTURE_COEFF * posture[0] + VIBRATION_COEFF * vibration[0];

        for t in 0..frames {
            let seg = (t / seg_frames) as usize;
            let secs = t as f64 / FRAME_RATE_HZ;

            // Posture shows only in the ellipse size.
            let scale = if posture[seg] > 0.5 { 1.0 } else { 0.6 };
            let mask = render_ellipse(
                WIDTH,
                HEIGHT,
                WIDTH as f64 / 2.0,
                HEIGHT as f64 / 2.0,
                WIDTH as f64 * 0.25 * scale,
                HEIGHT as f64 * 0.35 * scale,
            );
            silhouettes.push(SilhouetteFrame::new(t, WIDTH, HEIGHT, mask)?);

            // Vibration shows only in the accelerometers.
            let band = VIBRATION_AMPLITUDE
                * vibration[seg]
                * (2.0 * PI * VIBRATION_HZ * secs + accel_phase).sin();
            let channels = [
                round6(band),
                0.0,
                9.81,
                round6(band),
                0.0,
                9.81,
            ];
            accel.push(AccelSample::new(t, channels)?);

            let steady = BASE_KCAL_PER_MIN
                + POSTURE_COEFF * posture[seg]
                + VIBRATION_COEFF * vibration[seg];
            kcal += (steady - kcal) * alpha;
            calories.push(CalorieSample::new(t, Some(round6(kcal)))?);
        }

        subjects.push(SubjectRecord {
            id: format!("subject{:02}", i + 1),
            weight_kg: WEIGHT_KG,
            height_cm: HEIGHT_CM,
            sessions: vec![Session {
                id: "session01".into(),
                silhouettes,
                accel,
                calories,
                // One label for the whole session: labels carry no factor
                // information, so they cannot leak across modalities.
                labels: vec![ActivityLabel::new(0, frames - 1, Activity::Exercise)?],
            }],
        });
    }
    Ok(Dataset { subjects })
}

/// Weights the lag filter places on the current and previous segments' factor
/// values at frame `t`, newest first. Computed from the generator parameters
/// only; the weights sum to 1 because generation starts at the first
/// segment's steady state.
pub fn lag_segment_weights(t: u64, segment_secs: f64, lag_secs: f64) -> Vec<f64> {
    let seg_frames = (segment_secs * FRAME_RATE_HZ).round() as u64;
    let seg = (t / seg_frames) as usize;
    if seg == 0 {
        // Generation starts at segment 0's steady state, so segment 0 holds
        // all the weight until the first switch.
        return vec![1.0];
    }
    // The recursion applies one update per frame, so the current segment has
    // acted for (offset + 1) frames at frame t.
    let s = ((t % seg_frames) + 1) as f64 / FRAME_RATE_HZ;
    let seg_decay = (-(seg_frames as f64) / (FRAME_RATE_HZ * lag_secs)).exp();
    let mut weights = Vec::with_capacity(seg + 1);
    let mut remaining = (-s / lag_secs).exp();
    weights.push(1.0 - remaining);
    for _ in 1..seg {
        weights.push(remaining * (1.0 - seg_decay));
        remaining *= seg_decay;
    }
    if seg >= 1 {
        weights.push(remaining);
    }
    weights
}

/// Lower bound on the RMSE of any predictor blind to one factor of
/// [`make_split_information_set`]: the factor's conditional std, averaged
/// over the frames sampled at `stride`, computed analytically from the
/// generator parameters.
pub fn split_information_floor(coeff: f64, stride: u64) -> f64 {
    use split_info::*;
    let seg_frames = (SEGMENT_SECS * FRAME_RATE_HZ).round() as u64;
    let frames = seg_frames * SEGMENTS as u64;
    let mut total = 0.0;
    let mut count = 0usize;
    for t in (0..frames).step_by(stride as usize) {
        let sq_sum: f64 = lag_segment_weights(t, SEGMENT_SECS, LAG_SECS)
            .iter()
            .map(|w| w * w)
            .sum();
        // Independent Bernoulli(1/2) factor values have variance 1/4.
        total += coeff * coeff * 0.25 * sq_sum;
        count += 1;
    }
    (total / count as f64).sqrt()
}

/// A small dataset with a long (20 s) metabolic lag: activity switches every
/// 15 s between states whose increments need ~half a minute of history to
/// estimate, so short temporal buffers lose information.
pub fn make_lag_set(seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0xb1ff));
    let choices = [Activity::Stand, Activity::Walk, Activity::Exercise];
    let script: Vec<(Activity, f64)> = (0..10)
        .map(|_| (choices[rng.gen_range(0..choices.len())], 15.0))
        .collect();
    let config = SynthConfig {
        sessions_per_subject: 1,
        script,
        width: 16,
        height: 12,
        seed,
    };
    let profiles: Vec<SynthProfile> = (0..3)
        .map(|i| SynthProfile {
            lag_secs: 20.0,
            ..default_profile(i)
        })
        .collect();
    generate_dataset(&config, &profiles)
}
