//! Training-time stochastic augmentation for both modalities.
//!
//! Silhouette stacks get one flip/rotation/shift draw per call, applied
//! identically to every channel so the scales stay spatially aligned. Accel
//! windows get one magnitude scalar (Gaussian, mean 1, std 0.1) shared by
//! all 6 channels, then an independent axis permutation per accelerometer.
//! All randomness comes from the rng passed in, so a fixed seed gives
//! identical output.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::accel::AccelWindow;
use crate::error::{Error, Result};
use crate::silhouette::TemporalSilhouetteStack;

/// The six permutations of three axes, in a fixed order for uniform draws.
pub const AXIS_PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AugmentConfig {
    /// Probability of a horizontal flip.
    pub flip_prob: f64,
    /// Rotation drawn uniformly from `[-rotation_deg, rotation_deg]`.
    pub rotation_deg: f64,
    /// Shift drawn uniformly from `[-shift_frac, shift_frac]` of width/height.
    pub shift_frac: f64,
    /// Mean of the accel magnitude scalar.
    pub accel_scale_mean: f64,
    /// Standard deviation of the accel magnitude scalar.
    pub accel_scale_std: f64,
    /// Whether to permute the x-y-z axes of each accelerometer.
    pub permute_axes: bool,
    /// Base seed; per-sample rngs are derived from this.
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_prob: 0.5,
            rotation_deg: 5.0,
            shift_frac: 0.20,
            accel_scale_mean: 1.0,
            accel_scale_std: 0.1,
            permute_axes: true,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Identity configuration: augmentation disabled.
    pub fn disabled() -> Self {
        Self {
            flip_prob: 0.0,
            rotation_deg: 0.0,
            shift_frac: 0.0,
            accel_scale_mean: 1.0,
            accel_scale_std: 0.0,
            permute_axes: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Config("flip probability must be in [0, 1]".into()));
        }
        if self.rotation_deg < 0.0 || self.shift_frac < 0.0 || self.accel_scale_std < 0.0 {
            return Err(Error::Config("augmentation ranges must be non-negative".into()));
        }
        Ok(())
    }

    /// True when every draw is the identity transform.
    pub fn is_identity(&self) -> bool {
        self.flip_prob == 0.0
            && self.rotation_deg == 0.0
            && self.shift_frac == 0.0
            && self.accel_scale_std == 0.0
            && self.accel_scale_mean == 1.0
            && !self.permute_axes
    }
}

/// One geometric draw, exposed so tests can force specific transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SilhouetteTransform {
    pub flip: bool,
    pub angle_rad: f64,
    pub dx: f64,
    pub dy: f64,
}

pub fn draw_silhouette_transform(
    config: &AugmentConfig,
    width: usize,
    height: usize,
    rng: &mut impl Rng,
) -> SilhouetteTransform {
    let flip = rng.gen_bool(config.flip_prob);
    let angle_rad = if config.rotation_deg > 0.0 {
        rng.gen_range(-config.rotation_deg..=config.rotation_deg).to_radians()
    } else {
        0.0
    };
    let (dx, dy) = if config.shift_frac > 0.0 {
        (
            rng.gen_range(-config.shift_frac..=config.shift_frac) * width as f64,
            rng.gen_range(-config.shift_frac..=config.shift_frac) * height as f64,
        )
    } else {
        (0.0, 0.0)
    };
    SilhouetteTransform {
        flip,
        angle_rad,
        dx,
        dy,
    }
}

/// Applies flip, then rotation about the image center, then shift — the same
/// transform to all channels. Nearest-neighbor sampling, out-of-frame
/// regions filled with 0.
pub fn apply_silhouette_transform(
    stack: &TemporalSilhouetteStack,
    t: SilhouetteTransform,
) -> TemporalSilhouetteStack {
    let (w, h) = (stack.width, stack.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (cos_a, sin_a) = (t.angle_rad.cos(), t.angle_rad.sin());

    let mut channels = Vec::with_capacity(stack.channels.len());
    for plane in &stack.channels {
        let mut out = vec![0.0f64; w * h];
        for y in 0..h {
            for x in 0..w {
                // Invert shift, then rotation, then flip.
                let ux = x as f64 - t.dx;
                let uy = y as f64 - t.dy;
                let rx = cx + (ux - cx) * cos_a + (uy - cy) * sin_a;
                let ry = cy - (ux - cx) * sin_a + (uy - cy) * cos_a;
                let sx = if t.flip { w as f64 - 1.0 - rx } else { rx };
                let (ix, iy) = (sx.round(), ry.round());
                if ix >= 0.0 && iy >= 0.0 && (ix as usize) < w && (iy as usize) < h {
                    out[y * w + x] = plane[iy as usize * w + ix as usize];
                }
            }
        }
        channels.push(out);
    }
    TemporalSilhouetteStack {
        timestamp: stack.timestamp,
        width: w,
        height: h,
        channels,
    }
}

pub fn augment_silhouette(
    stack: &TemporalSilhouetteStack,
    config: &AugmentConfig,
    rng: &mut impl Rng,
) -> TemporalSilhouetteStack {
    let t = draw_silhouette_transform(config, stack.width, stack.height, rng);
    apply_silhouette_transform(stack, t)
}

/// Scales the whole window by one Gaussian scalar, then permutes channels
/// 0-2 and 3-5 with independent uniform permutation draws.
pub fn augment_accel(
    window: &AccelWindow,
    config: &AugmentConfig,
    rng: &mut impl Rng,
) -> AccelWindow {
    let scale = if config.accel_scale_std > 0.0 {
        Normal::new(config.accel_scale_mean, config.accel_scale_std)
            .expect("validated std")
            .sample(rng)
    } else {
        config.accel_scale_mean
    };
    let perm_waist = if config.permute_axes {
        AXIS_PERMUTATIONS[rng.gen_range(0..AXIS_PERMUTATIONS.len())]
    } else {
        AXIS_PERMUTATIONS[0]
    };
    let perm_wrist = if config.permute_axes {
        AXIS_PERMUTATIONS[rng.gen_range(0..AXIS_PERMUTATIONS.len())]
    } else {
        AXIS_PERMUTATIONS[0]
    };

    let data = window
        .data
        .iter()
        .map(|row| {
            let mut out = [0.0f64; 6];
            for k in 0..3 {
                out[k] = row[perm_waist[k]] * scale;
                out[k + 3] = row[perm_wrist[k] + 3] * scale;
            }
            out
        })
        .collect();
    AccelWindow {
        end_timestamp: window.end_timestamp,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dot_stack(w: usize, h: usize, x: usize, y: usize) -> TemporalSilhouetteStack {
        let mut plane = vec![0.0; w * h];
        plane[y * w + x] = 1.0;
        TemporalSilhouetteStack {
            timestamp: 0,
            width: w,
            height: h,
            channels: vec![plane.clone(), plane],
        }
    }

    #[test]
    fn zero_config_is_identity() {
        let stack = dot_stack(8, 6, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = augment_silhouette(&stack, &AugmentConfig::disabled(), &mut rng);
        assert_eq!(out, stack);
    }

    #[test]
    fn flip_is_an_involution() {
        let stack = dot_stack(9, 5, 2, 1);
        let t = SilhouetteTransform {
            flip: true,
            angle_rad: 0.0,
            dx: 0.0,
            dy: 0.0,
        };
        let once = apply_silhouette_transform(&stack, t);
        assert_ne!(once, stack);
        let twice = apply_silhouette_transform(&once, t);
        assert_eq!(twice, stack);
    }

    #[test]
    fn interior_shift_preserves_mass() {
        let stack = dot_stack(20, 20, 10, 10);
        let t = SilhouetteTransform {
            flip: false,
            angle_rad: 0.0,
            dx: 3.4,
            dy: -2.2,
        };
        let out = apply_silhouette_transform(&stack, t);
        for (a, b) in stack.channels.iter().zip(out.channels.iter()) {
            let (ma, mb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            assert_eq!(ma, mb);
        }
    }

    #[test]
    fn out_of_frame_content_becomes_zero() {
        let stack = dot_stack(8, 8, 0, 0);
        let t = SilhouetteTransform {
            flip: false,
            angle_rad: 0.0,
            dx: -3.0,
            dy: -3.0,
        };
        let out = apply_silhouette_transform(&stack, t);
        assert!(out.channels[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_channels_get_the_same_transform() {
        let mut stack = dot_stack(16, 16, 5, 9);
        stack.channels.push(stack.channels[0].clone());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let out = augment_silhouette(&stack, &AugmentConfig::default(), &mut rng);
        assert_eq!(out.channels[0], out.channels[1]);
        assert_eq!(out.channels[0], out.channels[2]);
    }

    #[test]
    fn same_seed_gives_identical_output() {
        let stack = dot_stack(12, 12, 4, 4);
        let cfg = AugmentConfig::default();
        let a = augment_silhouette(&stack, &cfg, &mut ChaCha8Rng::seed_from_u64(42));
        let b = augment_silhouette(&stack, &cfg, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    fn ramp_window(len: usize) -> AccelWindow {
        AccelWindow {
            end_timestamp: 0,
            data: (0..len)
                .map(|i| {
                    let v = i as f64;
                    [v, v + 1.0, v + 2.0, v + 3.0, v + 4.0, v + 5.0]
                })
                .collect(),
        }
    }

    #[test]
    fn unit_scale_identity_permutation_is_identity() {
        let window = ramp_window(10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = augment_accel(&window, &AugmentConfig::disabled(), &mut rng);
        assert_eq!(out, window);
    }

    #[test]
    fn channel_norms_are_permuted_and_scaled() {
        let window = ramp_window(32);
        let cfg = AugmentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let out = augment_accel(&window, &cfg, &mut rng);

        let norms = |w: &AccelWindow, range: std::ops::Range<usize>| -> Vec<f64> {
            range
                .map(|c| w.data.iter().map(|r| r[c] * r[c]).sum::<f64>().sqrt())
                .collect()
        };
        // Recover the scalar from total energy, then compare norm multisets
        // within each accelerometer.
        let total_in: f64 = norms(&window, 0..6).iter().map(|n| n * n).sum();
        let total_out: f64 = norms(&out, 0..6).iter().map(|n| n * n).sum();
        let s = (total_out / total_in).sqrt();
        for range in [0..3usize, 3..6] {
            let mut a: Vec<f64> = norms(&window, range.clone()).iter().map(|n| n * s).collect();
            let mut b = norms(&out, range);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn scale_statistics_match_gaussian() {
        let cfg = AugmentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let window = AccelWindow {
            end_timestamp: 0,
            data: vec![[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]],
        };
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let out = augment_accel(&window, &cfg, &mut rng);
            // Recover |s| from the row energy; the draw is positive w.h.p.
            let s = (out.data[0].iter().map(|v| v * v).sum::<f64>() / 2.0).sqrt();
            sum += s;
            sum_sq += s * s;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((std - 0.1).abs() < 0.01, "std {std}");
    }

    #[test]
    fn permutation_draws_are_uniform() {
        // Chi-square over the 6 permutations, 6e4 draws, p = 0.01 (df = 5,
        // critical value 15.086).
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 60_000usize;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            counts[rng.gen_range(0..AXIS_PERMUTATIONS.len())] += 1;
        }
        let expected = n as f64 / 6.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 15.086, "chi2 {chi2}");
    }
}
