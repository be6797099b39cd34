//! Streaming multi-scale temporal silhouette templates.
//!
//! The engine keeps a ring buffer of the last `T` binary silhouettes and one
//! integer running sum per temporal scale. Each scale `k` averages the most
//! recent `dt_k = floor(T / 3^k)` frames, so a stack snapshot is one division
//! per pixel per channel, and pushing a frame costs O(pixels · scales)
//! regardless of `T`. Sums are integers (masks are binary), which makes the
//! incremental engine exactly equal to brute-force recomputation.

use std::collections::VecDeque;
use std::path::Path;

use crate::core::pbm;
use crate::core::SilhouetteFrame;
use crate::error::{Error, Result};

/// Multi-scale buffer schedule: `dt_k = floor(T / 3^k)` for `k = 0..=N`,
/// clamped to at least one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TemporalScaleConfig {
    /// Maximum buffer size `T` in frames.
    pub max_buffer: usize,
    /// Index of the last scale `N`; the stack has `N + 1` channels.
    pub last_scale: usize,
}

impl Default for TemporalScaleConfig {
    fn default() -> Self {
        Self {
            max_buffer: 1000,
            last_scale: 4,
        }
    }
}

impl TemporalScaleConfig {
    pub fn new(max_buffer: usize, last_scale: usize) -> Result<Self> {
        let cfg = Self {
            max_buffer,
            last_scale,
        };
        cfg.intervals()?;
        Ok(cfg)
    }

    pub fn channels(&self) -> usize {
        self.last_scale + 1
    }

    /// Window lengths per scale, strictly decreasing or the config is invalid.
    pub fn intervals(&self) -> Result<Vec<usize>> {
        if self.max_buffer == 0 {
            return Err(Error::Config("max buffer size must be positive".into()));
        }
        let mut out = Vec::with_capacity(self.last_scale + 1);
        let mut divisor = 1usize;
        for k in 0..=self.last_scale {
            let dt = (self.max_buffer / divisor).max(1);
            if let Some(&prev) = out.last() {
                if dt >= prev {
                    return Err(Error::Config(format!(
                        "scale intervals must be strictly decreasing, got dt_{} = {} after dt_{} = {}",
                        k,
                        dt,
                        k - 1,
                        prev
                    )));
                }
            }
            out.push(dt);
            divisor = divisor.saturating_mul(3);
        }
        Ok(out)
    }
}

/// The `(N+1)`-channel multi-scale average-silhouette tensor at one timestamp.
///
/// Channel 0 is the longest window; every value lies in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSilhouetteStack {
    pub timestamp: u64,
    pub width: usize,
    pub height: usize,
    /// One `width * height` row-major plane per scale.
    pub channels: Vec<Vec<f64>>,
}

impl TemporalSilhouetteStack {
    /// Dumps each channel as an 8-bit P5 graymap for visual inspection.
    pub fn dump_pgm(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        for (k, plane) in self.channels.iter().enumerate() {
            let path = dir.join(format!("t{:06}_scale{}.pgm", self.timestamp, k));
            pbm::write_pgm(&path, self.width, self.height, plane)?;
        }
        Ok(())
    }
}

/// Incremental engine: single writer, snapshot reads.
#[derive(Debug, Clone)]
pub struct Engine {
    intervals: Vec<usize>,
    width: usize,
    height: usize,
    /// Last `dt_0` masks, oldest first.
    ring: VecDeque<Vec<u8>>,
    /// Per-scale integer pixel sums over that scale's current window.
    sums: Vec<Vec<u32>>,
    pushed: u64,
    last_timestamp: Option<u64>,
}

impl Engine {
    pub fn new(config: TemporalScaleConfig, width: usize, height: usize) -> Result<Self> {
        let intervals = config.intervals()?;
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "engine dimensions must be positive, got {width}x{height}"
            )));
        }
        let pixels = width * height;
        Ok(Self {
            ring: VecDeque::with_capacity(intervals[0]),
            sums: vec![vec![0u32; pixels]; intervals.len()],
            intervals,
            width,
            height,
            pushed: 0,
            last_timestamp: None,
        })
    }

    pub fn intervals(&self) -> &[usize] {
        &self.intervals
    }

    pub fn frames_pushed(&self) -> u64 {
        self.pushed
    }

    /// Number of frames currently resident in the ring buffer.
    pub fn resident_frames(&self) -> usize {
        self.ring.len()
    }

    pub fn push_frame(&mut self, frame: &SilhouetteFrame) -> Result<()> {
        if frame.width != self.width || frame.height != self.height {
            return Err(Error::Stream(format!(
                "frame {} is {}x{}, engine expects {}x{}",
                frame.timestamp, frame.width, frame.height, self.width, self.height
            )));
        }
        if let Some(last) = self.last_timestamp {
            if frame.timestamp <= last {
                return Err(Error::Stream(format!(
                    "out-of-order frame: {} after {}",
                    frame.timestamp, last
                )));
            }
        }

        let resident = self.ring.len();
        for (k, &dt) in self.intervals.iter().enumerate() {
            // Window k holds the last min(dt, pushed) frames; when already
            // full, the frame dt-from-the-end leaves as the new one enters.
            if resident >= dt {
                let leaving = &self.ring[resident - dt];
                let sum = &mut self.sums[k];
                for (s, &v) in sum.iter_mut().zip(leaving.iter()) {
                    *s -= v as u32;
                }
            }
            let sum = &mut self.sums[k];
            for (s, &v) in sum.iter_mut().zip(frame.mask.iter()) {
                *s += v as u32;
            }
        }
        self.ring.push_back(frame.mask.clone());
        if self.ring.len() > self.intervals[0] {
            self.ring.pop_front();
        }
        self.pushed += 1;
        self.last_timestamp = Some(frame.timestamp);
        Ok(())
    }

    /// Snapshot of the current multi-scale stack.
    ///
    /// During warm-up each channel divides by the actual number of frames in
    /// its window rather than `dt_k`, so output is defined from the first
    /// pushed frame on.
    pub fn current_stack(&self) -> Result<TemporalSilhouetteStack> {
        let Some(timestamp) = self.last_timestamp else {
            return Err(Error::State("no frames pushed yet".into()));
        };
        let mut channels = Vec::with_capacity(self.intervals.len());
        for (k, &dt) in self.intervals.iter().enumerate() {
            let count = dt.min(self.pushed as usize) as f64;
            channels.push(self.sums[k].iter().map(|&s| s as f64 / count).collect());
        }
        Ok(TemporalSilhouetteStack {
            timestamp,
            width: self.width,
            height: self.height,
            channels,
        })
    }
}

/// Reference implementation: recomputes every channel by full summation over
/// the trailing window. Used as the oracle the incremental engine is checked
/// against; integer sums keep the comparison exact.
pub fn brute_force_stack(
    frames: &[SilhouetteFrame],
    config: TemporalScaleConfig,
    t: u64,
) -> Result<TemporalSilhouetteStack> {
    let intervals = config.intervals()?;
    let idx = frames
        .iter()
        .position(|f| f.timestamp == t)
        .ok_or_else(|| Error::Argument(format!("timestamp {t} not present in frame list")))?;
    let (width, height) = (frames[idx].width, frames[idx].height);
    let pixels = width * height;
    let mut channels = Vec::with_capacity(intervals.len());
    for &dt in &intervals {
        let count = dt.min(idx + 1);
        let mut sum = vec![0u32; pixels];
        for frame in &frames[idx + 1 - count..=idx] {
            for (s, &v) in sum.iter_mut().zip(frame.mask.iter()) {
                *s += v as u32;
            }
        }
        channels.push(sum.iter().map(|&s| s as f64 / count as f64).collect());
    }
    Ok(TemporalSilhouetteStack {
        timestamp: t,
        width,
        height,
        channels,
    })
}
