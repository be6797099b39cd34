//! The four learned model variants and the METs lookup baseline.
//!
//! - `CaloriNet`: silhouette branch + accel branch, fused by one dense head.
//! - `SiluCalNet`: silhouette branch only.
//! - `AccuCalNet`: accel branch only (ReLU, gravity-removed input).
//! - `ZhuVariant`: accel branch only (tanh, 256-sample raw-accel window).
//!
//! Branch sub-networks are structurally identical between the fused and
//! single-modality variants, so ablations compare like with like.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::core::{Activity, CaloriePrediction, Session};
use crate::error::{Error, Result};
use crate::nn::{Layer, Model, Padding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum VariantName {
    CaloriNet,
    SiluCalNet,
    AccuCalNet,
    ZhuVariant,
}

impl VariantName {
    pub const ALL: [VariantName; 4] = [
        VariantName::CaloriNet,
        VariantName::SiluCalNet,
        VariantName::AccuCalNet,
        VariantName::ZhuVariant,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "calorinet" => Ok(VariantName::CaloriNet),
            "silucalnet" => Ok(VariantName::SiluCalNet),
            "accucalnet" => Ok(VariantName::AccuCalNet),
            "zhuvariant" | "zhu" => Ok(VariantName::ZhuVariant),
            other => Err(Error::Argument(format!("unknown model variant '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            VariantName::CaloriNet => "CaloriNet",
            VariantName::SiluCalNet => "SiluCalNet",
            VariantName::AccuCalNet => "AccuCalNet",
            VariantName::ZhuVariant => "ZhuVariant",
        }
    }

    pub fn uses_silhouette(&self) -> bool {
        matches!(self, VariantName::CaloriNet | VariantName::SiluCalNet)
    }

    pub fn uses_accel(&self) -> bool {
        !matches!(self, VariantName::SiluCalNet)
    }

    /// ZhuVariant consumes the raw accelerometer signal; the others consume
    /// the gravity-removed signal.
    pub fn uses_raw_accel(&self) -> bool {
        matches!(self, VariantName::ZhuVariant)
    }
}

impl std::fmt::Display for VariantName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Input geometry for variant construction.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelShapes {
    pub width: usize,
    pub height: usize,
    /// Silhouette stack channel count (N + 1).
    pub channels: usize,
    /// Accel window length for CaloriNet / AccuCalNet; tied to the largest
    /// silhouette interval so both modalities share the same horizon.
    pub accel_len: usize,
    /// ZhuVariant keeps its original short window.
    pub zhu_len: usize,
}

impl Default for ModelShapes {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            channels: 5,
            accel_len: 1000,
            zhu_len: 256,
        }
    }
}

impl ModelShapes {
    pub fn accel_window_len(&self, name: VariantName) -> usize {
        if name.uses_raw_accel() {
            self.zhu_len
        } else {
            self.accel_len
        }
    }
}

/// Filter counts and kernel geometry shared by both branches.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BranchHyper {
    pub filters_first: usize,
    pub filters_second: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pool: usize,
}

impl Default for BranchHyper {
    fn default() -> Self {
        Self {
            filters_first: 8,
            filters_second: 4,
            kernel: 5,
            stride: 2,
            pool: 2,
        }
    }
}

/// A resolved variant: the network plus its input contract.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVariant {
    pub name: VariantName,
    pub model: Model,
}

fn silhouette_branch(shapes: &ModelShapes, hyper: &BranchHyper, rng: &mut ChaCha8Rng) -> Vec<Layer> {
    vec![
        Layer::conv2d(
            shapes.channels,
            hyper.filters_first,
            hyper.kernel,
            hyper.stride,
            Padding::Same,
            rng,
        ),
        Layer::Relu,
        Layer::MaxPool2d {
            size: hyper.pool,
            stride: hyper.stride,
        },
        Layer::conv2d(
            hyper.filters_first,
            hyper.filters_second,
            hyper.kernel,
            hyper.stride,
            Padding::Same,
            rng,
        ),
        Layer::Relu,
        Layer::MaxPool2d {
            size: hyper.pool,
            stride: hyper.stride,
        },
        Layer::Flatten,
    ]
}

fn accel_branch(hyper: &BranchHyper, tanh: bool, rng: &mut ChaCha8Rng) -> Vec<Layer> {
    let act = if tanh { Layer::Tanh } else { Layer::Relu };
    vec![
        Layer::conv1d_grouped(6, 1, hyper.filters_first, hyper.kernel, hyper.stride, rng),
        act.clone(),
        Layer::MaxPool1d {
            size: hyper.pool,
            stride: hyper.stride,
        },
        Layer::conv1d_grouped(
            6,
            hyper.filters_first,
            hyper.filters_second,
            hyper.kernel,
            hyper.stride,
            rng,
        ),
        act,
        Layer::MaxPool1d {
            size: hyper.pool,
            stride: hyper.stride,
        },
        Layer::Flatten,
    ]
}

/// Builds a variant with fan-in-scaled uniform initialization from `seed`.
pub fn build_variant(
    name: VariantName,
    shapes: &ModelShapes,
    hyper: &BranchHyper,
    seed: u64,
) -> Result<ModelVariant> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sil_shape = vec![shapes.channels, shapes.height, shapes.width];
    let accel_shape = vec![6, shapes.accel_window_len(name)];

    let (sil, accel) = match name {
        VariantName::CaloriNet => (
            Some(silhouette_branch(shapes, hyper, &mut rng)),
            Some(accel_branch(hyper, false, &mut rng)),
        ),
        VariantName::SiluCalNet => (Some(silhouette_branch(shapes, hyper, &mut rng)), None),
        VariantName::AccuCalNet => (None, Some(accel_branch(hyper, false, &mut rng))),
        VariantName::ZhuVariant => (None, Some(accel_branch(hyper, true, &mut rng))),
    };

    let mut features = 0;
    if let Some(branch) = &sil {
        features += Model::branch_feature_len(branch, &sil_shape)?;
    }
    if let Some(branch) = &accel {
        features += Model::branch_feature_len(branch, &accel_shape)?;
    }
    let head = vec![Layer::dense(features, 1, &mut rng)];

    Ok(ModelVariant {
        name,
        model: Model {
            silhouette_input_shape: sil.is_some().then_some(sil_shape),
            accel_input_shape: accel.is_some().then_some(accel_shape),
            silhouette_branch: sil,
            accel_branch: accel,
            head,
        },
    })
}

/// Activity-class MET values (multiples of resting metabolic rate).
///
/// The defaults approximate Compendium categories for the eleven activities;
/// they are configuration, not ground truth, and can be overridden from a
/// CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetsTable {
    values: HashMap<Activity, f64>,
}

impl Default for MetsTable {
    fn default() -> Self {
        let values = [
            (Activity::Stand, 1.3),
            (Activity::Sit, 1.3),
            (Activity::Walk, 3.5),
            (Activity::Wipe, 2.5),
            (Activity::Vacuum, 3.3),
            (Activity::Sweep, 3.3),
            (Activity::Lie, 1.0),
            (Activity::Exercise, 6.0),
            (Activity::Stretch, 2.3),
            (Activity::Clean, 3.0),
            (Activity::Read, 1.3),
        ]
        .into_iter()
        .collect();
        Self { values }
    }
}

impl MetsTable {
    /// Loads `activity,met` rows, requiring all eleven classes and positive
    /// values.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut values = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line.trim() != "activity,met" {
                    return Err(Error::Parse {
                        file: path.display().to_string(),
                        line: 1,
                        msg: "expected header 'activity,met'".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                file: path.display().to_string(),
                line: i + 1,
                msg,
            };
            let (name, met) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected 2 fields".into()))?;
            let activity = Activity::parse(name.trim())
                .ok_or_else(|| parse_err(format!("unknown activity '{name}'")))?;
            let met: f64 = met
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("invalid MET value '{met}'")))?;
            if met <= 0.0 {
                return Err(parse_err(format!("MET value must be positive, got {met}")));
            }
            values.insert(activity, met);
        }
        for a in Activity::ALL {
            if !values.contains_key(&a) {
                return Err(Error::MetLookup(a.to_string()));
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, activity: Activity) -> Result<f64> {
        self.values
            .get(&activity)
            .copied()
            .ok_or_else(|| Error::MetLookup(activity.to_string()))
    }

    pub fn default_csv() -> String {
        let mut out = String::from("activity,met\n");
        let table = MetsTable::default();
        for a in Activity::ALL {
            out.push_str(&format!("{},{}\n", a, table.values[&a]));
        }
        out
    }
}

/// Standard Compendium conversion: kcal/min = MET * 3.5 mlO2/kg/min * kg / 200.
pub fn met_to_kcal_per_min(met: f64, weight_kg: f64) -> f64 {
    met * 3.5 * weight_kg / 200.0
}

/// Step-wise METs baseline: one constant kcal/min value per label interval,
/// MISSING on unlabeled frames. Frames run from 0 to the session's last.
pub fn mets_predict(
    session: &Session,
    weight_kg: f64,
    table: &MetsTable,
) -> Result<Vec<CaloriePrediction>> {
    if weight_kg <= 0.0 {
        return Err(Error::Argument("subject weight must be positive".into()));
    }
    let last = session.last_frame();
    let mut out = Vec::with_capacity(last as usize + 1);
    for frame in 0..=last {
        let value = match session.label_at(frame) {
            Some(activity) => Some(met_to_kcal_per_min(table.get(activity)?, weight_kg)),
            None => None,
        };
        out.push(CaloriePrediction {
            timestamp: frame,
            value,
        });
    }
    Ok(out)
}
