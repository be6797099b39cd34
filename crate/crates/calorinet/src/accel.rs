//! Accelerometer preprocessing: gravity estimation and removal, and
//! fixed-length windows aligned with silhouette stacks.
//!
//! Gravity is taken as the output of a trailing moving-average smoother over
//! a 1-second window, applied per channel (the stationary-white-noise
//! reduction of a finite-impulse-response Wiener smoother). The trailing
//! (causal) form is used so the streaming predictor and the offline
//! evaluator compute identical values; its magnitude response is the same as
//! the centered form.

use crate::core::{AccelSample, FRAME_RATE_HZ};
use crate::error::{Error, Result};

/// Gravity smoother configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GravityFilterConfig {
    /// Smoothing window in seconds.
    pub window_secs: f64,
    /// Sample rate of the canonical clock, Hz.
    pub sample_rate_hz: f64,
}

impl Default for GravityFilterConfig {
    fn default() -> Self {
        Self {
            window_secs: 1.0,
            sample_rate_hz: FRAME_RATE_HZ,
        }
    }
}

impl GravityFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_secs <= 0.0 || self.sample_rate_hz <= 0.0 {
            return Err(Error::Config(
                "gravity filter window and sample rate must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Window length in samples, at least 1.
    pub fn window_len(&self) -> usize {
        ((self.window_secs * self.sample_rate_hz).round() as usize).max(1)
    }
}

/// A fixed-length 6-channel window ending at `end_timestamp`, rows oldest
/// first, zero-padded on the left during warm-up.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelWindow {
    pub end_timestamp: u64,
    /// `len x 6`, m/s².
    pub data: Vec<[f64; 6]>,
}

impl AccelWindow {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Per-channel smoothed low-frequency component at every input timestamp.
///
/// Output length equals input length; each estimate averages the trailing
/// window (clamped at the stream start), so a constant signal is a fixed
/// point from the first sample on.
pub fn estimate_gravity(samples: &[AccelSample], config: GravityFilterConfig) -> Result<Vec<[f64; 6]>> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Argument("gravity estimation needs at least one sample".into()));
    }
    let w = config.window_len();
    let mut out = Vec::with_capacity(samples.len());
    let mut running = [0.0f64; 6];
    for i in 0..samples.len() {
        for k in 0..6 {
            running[k] += samples[i].channels[k];
            if i >= w {
                running[k] -= samples[i - w].channels[k];
            }
        }
        let count = (i + 1).min(w) as f64;
        let mut g = [0.0f64; 6];
        for k in 0..6 {
            g[k] = running[k] / count;
        }
        out.push(g);
    }
    Ok(out)
}

/// Subtracts the gravity estimate from every sample (high-pass filtering).
pub fn remove_gravity(samples: &[AccelSample], config: GravityFilterConfig) -> Result<Vec<AccelSample>> {
    let gravity = estimate_gravity(samples, config)?;
    Ok(samples
        .iter()
        .zip(gravity.iter())
        .map(|(s, g)| {
            let mut ch = [0.0f64; 6];
            for k in 0..6 {
                ch[k] = s.channels[k] - g[k];
            }
            AccelSample {
                timestamp: s.timestamp,
                channels: ch,
            }
        })
        .collect())
}

/// The last `len` samples ending at timestamp `t`, zero-padded on the left
/// when fewer exist. Pure: identical `(series, t, len)` gives an identical
/// window.
pub fn window_at(series: &[AccelSample], t: u64, len: usize) -> Result<AccelWindow> {
    let idx = series
        .binary_search_by_key(&t, |s| s.timestamp)
        .map_err(|_| Error::Argument(format!("timestamp {t} not present in accel series")))?;
    let available = (idx + 1).min(len);
    let mut data = vec![[0.0f64; 6]; len];
    for (row, sample) in data[len - available..]
        .iter_mut()
        .zip(series[idx + 1 - available..=idx].iter())
    {
        *row = sample.channels;
    }
    Ok(AccelWindow {
        end_timestamp: t,
        data,
    })
}
