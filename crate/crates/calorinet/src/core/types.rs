//! Domain types shared by every other module.

use crate::error::{Error, Result};

/// Canonical clock rate: one timestamp tick is one video frame.
///
/// The accelerometer and calorie streams are resampled onto this clock at
/// load time, so all modules can treat frame indices as a shared time axis.
pub const FRAME_RATE_HZ: f64 = 30.0;

/// One timestamped binary foreground mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteFrame {
    pub timestamp: u64,
    pub width: usize,
    pub height: usize,
    /// Row-major, `width * height` entries, each 0 or 1.
    pub mask: Vec<u8>,
}

impl SilhouetteFrame {
    pub fn new(timestamp: u64, width: usize, height: usize, mask: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "silhouette dimensions must be positive, got {width}x{height}"
            )));
        }
        if mask.len() != width * height {
            return Err(Error::Argument(format!(
                "mask length {} does not match {}x{}",
                mask.len(),
                width,
                height
            )));
        }
        if mask.iter().any(|&v| v > 1) {
            return Err(Error::Argument("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            timestamp,
            width,
            height,
            mask,
        })
    }
}

/// One 6-channel accelerometer reading on the canonical clock.
///
/// Channel order is waist (x, y, z) then wrist (x, y, z), in m/s².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelSample {
    pub timestamp: u64,
    pub channels: [f64; 6],
}

impl AccelSample {
    pub fn new(timestamp: u64, channels: [f64; 6]) -> Result<Self> {
        if channels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "accel sample at frame {timestamp} contains non-finite values"
            )));
        }
        Ok(Self {
            timestamp,
            channels,
        })
    }
}

/// Ground-truth energy expenditure at a timestamp, kcal/min.
///
/// `value == None` marks MISSING data (a calorimeter gap).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalorieSample {
    pub timestamp: u64,
    pub value: Option<f64>,
}

impl CalorieSample {
    pub fn new(timestamp: u64, value: Option<f64>) -> Result<Self> {
        if let Some(v) = value {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Argument(format!(
                    "calorie value at frame {timestamp} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self { timestamp, value })
    }
}

/// A predicted kcal/min at a timestamp. `None` = no prediction available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaloriePrediction {
    pub timestamp: u64,
    pub value: Option<f64>,
}

/// The eleven activity classes of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Activity {
    Stand,
    Sit,
    Walk,
    Wipe,
    Vacuum,
    Sweep,
    Lie,
    Exercise,
    Stretch,
    Clean,
    Read,
}

impl Activity {
    pub const ALL: [Activity; 11] = [
        Activity::Stand,
        Activity::Sit,
        Activity::Walk,
        Activity::Wipe,
        Activity::Vacuum,
        Activity::Sweep,
        Activity::Lie,
        Activity::Exercise,
        Activity::Stretch,
        Activity::Clean,
        Activity::Read,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Activity::Stand => "stand",
            Activity::Sit => "sit",
            Activity::Walk => "walk",
            Activity::Wipe => "wipe",
            Activity::Vacuum => "vacuum",
            Activity::Sweep => "sweep",
            Activity::Lie => "lie",
            Activity::Exercise => "exercise",
            Activity::Stretch => "stretch",
            Activity::Clean => "clean",
            Activity::Read => "read",
        }
    }

    pub fn parse(s: &str) -> Option<Activity> {
        Activity::ALL.iter().copied().find(|a| a.name() == s)
    }
}

impl std::fmt::Display for Activity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A labeled interval `[start, end]` of frames. Frames outside every label
/// interval are UNLABELED.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityLabel {
    pub start: u64,
    pub end: u64,
    pub activity: Activity,
}

impl ActivityLabel {
    pub fn new(start: u64, end: u64, activity: Activity) -> Result<Self> {
        if start >= end {
            return Err(Error::Argument(format!(
                "label interval must satisfy start < end, got [{start}, {end}]"
            )));
        }
        Ok(Self {
            start,
            end,
            activity,
        })
    }

    pub fn contains(&self, frame: u64) -> bool {
        frame >= self.start && frame <= self.end
    }
}

/// One recording session: four aligned streams on the canonical clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub silhouettes: Vec<SilhouetteFrame>,
    pub accel: Vec<AccelSample>,
    pub calories: Vec<CalorieSample>,
    pub labels: Vec<ActivityLabel>,
}

impl Session {
    /// Activity label covering `frame`, or `None` when unlabeled.
    pub fn label_at(&self, frame: u64) -> Option<Activity> {
        self.labels
            .iter()
            .find(|l| l.contains(frame))
            .map(|l| l.activity)
    }

    /// Calorie ground truth at `frame`; `None` if missing or out of range.
    pub fn calorie_at(&self, frame: u64) -> Option<f64> {
        let idx = self
            .calories
            .binary_search_by_key(&frame, |c| c.timestamp)
            .ok()?;
        self.calories[idx].value
    }

    /// Last timestamp present in any stream.
    pub fn last_frame(&self) -> u64 {
        let s = self.silhouettes.last().map(|f| f.timestamp).unwrap_or(0);
        let a = self.accel.last().map(|f| f.timestamp).unwrap_or(0);
        let c = self.calories.last().map(|f| f.timestamp).unwrap_or(0);
        s.max(a).max(c)
    }
}

/// One subject: metadata plus their recording sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    pub weight_kg: f64,
    pub height_cm: f64,
    pub sessions: Vec<Session>,
}

/// A loaded, validated dataset. Immutable after loading.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub subjects: Vec<SubjectRecord>,
}

impl Dataset {
    pub fn subject(&self, id: &str) -> Option<&SubjectRecord> {
        self.subjects.iter().find(|s| s.id == id)
    }
}
