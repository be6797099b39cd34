//! Leave-one-subject-out cross-validation: fold planning, sample extraction,
//! missing-modality imputation, RMSE reporting, and the buffer-size sweep.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::accel::{remove_gravity, window_at, GravityFilterConfig};
use crate::core::{Activity, Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::models::{build_variant, BranchHyper, ModelShapes, VariantName};
use crate::nn::{train, TrainConfig, TrainReport, TrainSample};
use crate::augment::AugmentConfig;
use crate::silhouette::{Engine, TemporalScaleConfig};

/// Default evaluation/training sampling stride, in frames.
pub const SAMPLE_STRIDE: u64 = 30;

/// One cross-validation fold: train on everyone except the test subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub test_subject: String,
    pub train_subjects: Vec<String>,
    pub seed: u64,
}

/// One fold per subject, ordered by subject id; per-fold seeds derived from
/// `base_seed` so folds can run independently.
pub fn loso_folds(dataset: &Dataset, base_seed: u64) -> Result<Vec<FoldPlan>> {
    if dataset.subjects.len() < 2 {
        return Err(Error::Argument(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            dataset.subjects.len()
        )));
    }
    let mut ids: Vec<String> = dataset.subjects.iter().map(|s| s.id.clone()).collect();
    ids.sort();
    Ok(ids
        .iter()
        .enumerate()
        .map(|(i, id)| FoldPlan {
            test_subject: id.clone(),
            train_subjects: ids.iter().filter(|o| *o != id).cloned().collect(),
            seed: base_seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
        })
        .collect())
}

/// How model inputs are cut out of a session's streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    pub scale: TemporalScaleConfig,
    /// Accel window length in samples.
    pub accel_len: usize,
    /// Feed raw accelerometer readings instead of gravity-removed ones.
    pub raw_accel: bool,
    pub gravity: GravityFilterConfig,
    /// Frames between consecutive samples.
    pub stride: u64,
    /// Evaluate frames before one full longest-window buffer has been seen.
    pub include_warmup: bool,
}

impl SampleConfig {
    pub fn new(scale: TemporalScaleConfig, accel_len: usize, raw_accel: bool) -> Self {
        Self {
            scale,
            accel_len,
            raw_accel,
            gravity: GravityFilterConfig::default(),
            stride: SAMPLE_STRIDE,
            include_warmup: true,
        }
    }
}

/// A model input/target pair with the provenance needed for imputation and
/// per-subject reporting.
#[derive(Debug, Clone)]
pub struct Sample {
    pub subject: String,
    pub session: String,
    pub timestamp: u64,
    pub activity: Option<Activity>,
    pub inner: TrainSample,
}

/// Extracts stride-spaced samples from every session of `subject`.
///
/// A sample is emitted at each stride multiple that has calorie ground truth;
/// its silhouette stack (if any frames were seen) and trailing accel window
/// (if the clock position is covered) come from the same timestamp, so the
/// two modalities share their horizon.
pub fn extract_samples(subject: &SubjectRecord, cfg: &SampleConfig) -> Result<Vec<Sample>> {
    if cfg.stride == 0 {
        return Err(Error::Argument("sampling stride must be positive".into()));
    }
    let mut out = Vec::new();
    for session in &subject.sessions {
        let accel_series = if session.accel.is_empty() {
            Vec::new()
        } else if cfg.raw_accel {
            session.accel.clone()
        } else {
            remove_gravity(&session.accel, cfg.gravity)?
        };

        let mut engine = match session.silhouettes.first() {
            Some(f) => Some(Engine::new(cfg.scale, f.width, f.height)?),
            None => None,
        };
        let mut next_frame = 0usize;
        let warmup = cfg.scale.max_buffer as u64;

        for t in (0..=session.last_frame()).step_by(cfg.stride as usize) {
            if let Some(engine) = engine.as_mut() {
                while next_frame < session.silhouettes.len()
                    && session.silhouettes[next_frame].timestamp <= t
                {
                    engine.push_frame(&session.silhouettes[next_frame])?;
                    next_frame += 1;
                }
            }
            if !cfg.include_warmup && t + 1 < warmup {
                continue;
            }
            let Some(target) = session.calorie_at(t) else {
                continue;
            };
            let silhouette = match engine.as_ref() {
                Some(e) if e.frames_pushed() > 0 => Some(e.current_stack()?),
                _ => None,
            };
            let accel = window_at(&accel_series, t, cfg.accel_len).ok();
            out.push(Sample {
                subject: subject.id.clone(),
                session: session.id.clone(),
                timestamp: t,
                activity: session.label_at(t),
                inner: TrainSample {
                    silhouette,
                    accel,
                    target,
                },
            });
        }
    }
    Ok(out)
}

/// Fills in missing modalities from uniformly drawn same-subject, same-label
/// donor samples; samples that still miss a required modality are dropped.
/// Returns the surviving samples and the dropped count.
pub fn impute_missing(
    samples: Vec<Sample>,
    need_silhouette: bool,
    need_accel: bool,
    rng: &mut ChaCha8Rng,
) -> (Vec<Sample>, usize) {
    let donors: Vec<usize> = (0..samples.len()).collect();
    let mut filled = Vec::with_capacity(samples.len());
    let mut dropped = 0usize;

    for i in 0..samples.len() {
        let mut sample = samples[i].clone();
        if need_silhouette && sample.inner.silhouette.is_none() {
            let pool: Vec<usize> = donors
                .iter()
                .copied()
                .filter(|&j| {
                    samples[j].subject == sample.subject
                        && samples[j].activity == sample.activity
                        && sample.activity.is_some()
                        && samples[j].inner.silhouette.is_some()
                })
                .collect();
            match pool.choose(rng) {
                Some(&j) => sample.inner.silhouette = samples[j].inner.silhouette.clone(),
                None => {
                    dropped += 1;
                    continue;
                }
            }
        }
        if need_accel && sample.inner.accel.is_none() {
            let pool: Vec<usize> = donors
                .iter()
                .copied()
                .filter(|&j| {
                    samples[j].subject == sample.subject
                        && samples[j].activity == sample.activity
                        && sample.activity.is_some()
                        && samples[j].inner.accel.is_some()
                })
                .collect();
            match pool.choose(rng) {
                Some(&j) => sample.inner.accel = samples[j].inner.accel.clone(),
                None => {
                    dropped += 1;
                    continue;
                }
            }
        }
        filled.push(sample);
    }
    (filled, dropped)
}

/// One scored frame: a prediction/ground-truth pair with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalFrame {
    pub subject: String,
    pub session: String,
    pub timestamp: u64,
    pub activity: Option<Activity>,
    pub prediction: Option<f64>,
    pub ground_truth: Option<f64>,
}

/// Per-subject RMSE breakdown, kcal/min.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRmse {
    pub overall: f64,
    pub per_activity: BTreeMap<Activity, f64>,
}

/// Aggregated error report: per-subject values averaged across subjects, for
/// each activity and over all evaluable frames.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub per_activity: BTreeMap<Activity, f64>,
    pub overall: f64,
    pub per_subject: BTreeMap<String, SubjectRmse>,
    /// Frames that entered the overall average.
    pub evaluated_frames: usize,
}

impl RmseReport {
    /// `activity,rmse` rows followed by `overall,<value>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("activity,rmse\n");
        for (activity, rmse) in &self.per_activity {
            out.push_str(&format!("{activity},{rmse:.6}\n"));
        }
        out.push_str(&format!("overall,{:.6}\n", self.overall));
        out
    }
}

fn rmse(sq_errors: &[f64]) -> f64 {
    (sq_errors.iter().sum::<f64>() / sq_errors.len() as f64).sqrt()
}

/// Scores `frames`: per-activity and overall RMSE are computed per subject
/// first, then averaged across subjects. Frames without a prediction or with
/// MISSING ground truth are excluded; zero evaluable frames overall is an
/// error.
pub fn rmse_report(frames: &[EvalFrame]) -> Result<RmseReport> {
    // subject -> (overall sq errors, activity -> sq errors)
    let mut by_subject: BTreeMap<&str, (Vec<f64>, BTreeMap<Activity, Vec<f64>>)> = BTreeMap::new();
    let mut evaluated = 0usize;
    for frame in frames {
        let (Some(pred), Some(truth)) = (frame.prediction, frame.ground_truth) else {
            continue;
        };
        let sq = (pred - truth).powi(2);
        let entry = by_subject.entry(&frame.subject).or_default();
        entry.0.push(sq);
        evaluated += 1;
        if let Some(activity) = frame.activity {
            entry.1.entry(activity).or_default().push(sq);
        }
    }
    if evaluated == 0 {
        return Err(Error::Report("no evaluable frames: every frame lacks a prediction or ground truth".into()));
    }

    let mut per_subject = BTreeMap::new();
    let mut activity_values: BTreeMap<Activity, Vec<f64>> = BTreeMap::new();
    let mut overall_values = Vec::new();
    for (subject, (all_sq, by_activity)) in &by_subject {
        let overall = rmse(all_sq);
        overall_values.push(overall);
        let mut per_activity = BTreeMap::new();
        for (activity, sq) in by_activity {
            let value = rmse(sq);
            per_activity.insert(*activity, value);
            activity_values.entry(*activity).or_default().push(value);
        }
        per_subject.insert(subject.to_string(), SubjectRmse {
            overall,
            per_activity,
        });
    }

    let per_activity = activity_values
        .into_iter()
        .map(|(a, vs)| (a, vs.iter().sum::<f64>() / vs.len() as f64))
        .collect();
    Ok(RmseReport {
        per_activity,
        overall: overall_values.iter().sum::<f64>() / overall_values.len() as f64,
        per_subject,
        evaluated_frames: evaluated,
    })
}

/// Full cross-validation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub scale: TemporalScaleConfig,
    pub hyper: BranchHyper,
    pub train: TrainConfig,
    pub augment: Option<AugmentConfig>,
    pub gravity: GravityFilterConfig,
    pub stride: u64,
    pub include_warmup: bool,
    /// ZhuVariant's fixed raw-accel window length.
    pub zhu_len: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            scale: TemporalScaleConfig::default(),
            hyper: BranchHyper::default(),
            train: TrainConfig::default(),
            augment: None,
            gravity: GravityFilterConfig::default(),
            stride: SAMPLE_STRIDE,
            include_warmup: true,
            zhu_len: 256,
            seed: 0,
        }
    }
}

impl EvalConfig {
    fn sample_config(&self, variant: VariantName) -> SampleConfig {
        let accel_len = if variant.uses_raw_accel() {
            self.zhu_len
        } else {
            self.scale.max_buffer
        };
        SampleConfig {
            scale: self.scale,
            accel_len,
            raw_accel: variant.uses_raw_accel(),
            gravity: self.gravity,
            stride: self.stride,
            include_warmup: self.include_warmup,
        }
    }

    /// Input geometry implied by the dataset and buffer schedule.
    pub fn shapes(&self, dataset: &Dataset) -> ModelShapes {
        let frame = dataset
            .subjects
            .iter()
            .flat_map(|s| s.sessions.iter())
            .flat_map(|s| s.silhouettes.first());
        let (width, height) = frame
            .map(|f| (f.width, f.height))
            .next()
            .unwrap_or((320, 240));
        ModelShapes {
            width,
            height,
            channels: self.scale.channels(),
            accel_len: self.scale.max_buffer,
            zhu_len: self.zhu_len,
        }
    }
}

/// Contiguous-tail split: the last 10% (at least one) of each subject's
/// samples go to validation, the rest to training.
pub fn split_validation_tail(samples: Vec<Sample>) -> (Vec<Sample>, Vec<Sample>) {
    let mut by_subject: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    for s in samples {
        by_subject.entry(s.subject.clone()).or_default().push(s);
    }
    let (mut train_set, mut val_set) = (Vec::new(), Vec::new());
    for (_, subject_samples) in by_subject {
        let n = subject_samples.len();
        let n_val = (n / 10).max(1).min(n.saturating_sub(1));
        for (i, s) in subject_samples.into_iter().enumerate() {
            if i < n - n_val {
                train_set.push(s);
            } else {
                val_set.push(s);
            }
        }
    }
    (train_set, val_set)
}

/// Outcome of one fold: the scored test frames plus training diagnostics.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: FoldPlan,
    pub frames: Vec<EvalFrame>,
    pub report: TrainReport,
    pub dropped_samples: usize,
}

/// Runs one fold: trains the variant on the fold's training subjects and
/// scores every stride-spaced test-subject frame.
pub fn run_fold(
    dataset: &Dataset,
    fold: &FoldPlan,
    variant: VariantName,
    config: &EvalConfig,
) -> Result<FoldOutcome> {
    let sample_cfg = config.sample_config(variant);

    let mut pool = Vec::new();
    for id in &fold.train_subjects {
        let subject = dataset
            .subject(id)
            .ok_or_else(|| Error::Argument(format!("unknown subject {id}")))?;
        pool.extend(extract_samples(subject, &sample_cfg)?);
    }
    let mut impute_rng = ChaCha8Rng::seed_from_u64(fold.seed ^ 0x5bf0_3635);
    let (pool, dropped) = impute_missing(
        pool,
        variant.uses_silhouette(),
        variant.uses_accel(),
        &mut impute_rng,
    );
    let (train_samples, val_samples) = split_validation_tail(pool);
    let to_inner = |v: &[Sample]| v.iter().map(|s| s.inner.clone()).collect::<Vec<_>>();

    let shapes = config.shapes(dataset);
    let mut built = build_variant(variant, &shapes, &config.hyper, fold.seed)?;
    let train_cfg = TrainConfig {
        seed: fold.seed,
        ..config.train
    };
    let augment = config.augment.map(|mut a| {
        a.seed ^= fold.seed;
        a
    });
    let report = train(
        &mut built.model,
        &to_inner(&train_samples),
        &to_inner(&val_samples),
        &train_cfg,
        augment.as_ref(),
    )?;

    let test_subject = dataset
        .subject(&fold.test_subject)
        .ok_or_else(|| Error::Argument(format!("unknown subject {}", fold.test_subject)))?;
    let mut frames = Vec::new();
    for sample in extract_samples(test_subject, &sample_cfg)? {
        let complete = (!variant.uses_silhouette() || sample.inner.silhouette.is_some())
            && (!variant.uses_accel() || sample.inner.accel.is_some());
        let prediction = if complete {
            let sil = sample.inner.silhouette.as_ref().map(crate::nn::stack_to_tensor);
            let accel = sample.inner.accel.as_ref().map(crate::nn::window_to_tensor);
            let (pred, _) = built.model.forward(
                sil.as_ref().filter(|_| variant.uses_silhouette()),
                accel.as_ref().filter(|_| variant.uses_accel()),
            )?;
            Some(pred)
        } else {
            None
        };
        frames.push(EvalFrame {
            subject: sample.subject,
            session: sample.session,
            timestamp: sample.timestamp,
            activity: sample.activity,
            prediction,
            ground_truth: Some(sample.inner.target),
        });
    }
    Ok(FoldOutcome {
        fold: fold.clone(),
        frames,
        report,
        dropped_samples: dropped,
    })
}

/// Result of a full leave-one-subject-out evaluation.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: RmseReport,
    pub frames: Vec<EvalFrame>,
    pub folds: Vec<FoldOutcome>,
}

/// Full leave-one-subject-out evaluation of `variant` over `dataset`.
pub fn evaluate_variant(
    dataset: &Dataset,
    variant: VariantName,
    config: &EvalConfig,
) -> Result<EvalOutcome> {
    let folds = loso_folds(dataset, config.seed)?;
    let mut outcomes = Vec::with_capacity(folds.len());
    let mut frames = Vec::new();
    for fold in &folds {
        let outcome = run_fold(dataset, fold, variant, config)?;
        frames.extend(outcome.frames.iter().cloned());
        outcomes.push(outcome);
    }
    let report = rmse_report(&frames)?;
    Ok(EvalOutcome {
        report,
        frames,
        folds: outcomes,
    })
}

/// Repeats the full evaluation for each buffer size `T`, tying the accel
/// window length to the longest silhouette interval. Returns `(T, overall)`
/// pairs in input order.
pub fn buffer_sweep(
    dataset: &Dataset,
    t_values: &[usize],
    variant: VariantName,
    config: &EvalConfig,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let scale = TemporalScaleConfig::new(t, config.scale.last_scale)?;
        let cfg = EvalConfig {
            scale,
            ..config.clone()
        };
        let outcome = evaluate_variant(dataset, variant, &cfg)?;
        out.push((t, outcome.report.overall));
    }
    Ok(out)
}
