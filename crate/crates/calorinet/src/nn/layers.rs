//! Layer kernels with exact backpropagation.
//!
//! Layouts: 2D activations are `[channels, height, width]`, 1D activations
//! `[channels, length]`, dense activations `[n]`. Convolutions support valid
//! and same padding; pooling is always valid. Max pooling breaks ties by the
//! first maximum, so forward and backward are deterministic.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Padding {
    Valid,
    Same,
}

impl Padding {
    /// Output length and leading pad for input `n`, kernel `k`, stride `s`.
    fn plan(self, n: usize, k: usize, s: usize) -> Result<(usize, usize)> {
        match self {
            Padding::Valid => {
                if n < k {
                    return Err(Error::Shape {
                        expected: format!("input >= kernel {k}"),
                        got: format!("{n}"),
                    });
                }
                Ok(((n - k) / s + 1, 0))
            }
            Padding::Same => {
                let out = n.div_ceil(s);
                let total = ((out - 1) * s + k).saturating_sub(n);
                Ok((out, total / 2))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Layer {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        /// `[out_channels, in_channels, kernel, kernel]`
        weights: Tensor,
        bias: Vec<f64>,
    },
    /// Per-group 1D convolution: each group of input channels is convolved
    /// with its own filters, independently of the other groups.
    Conv1dGrouped {
        groups: usize,
        in_per_group: usize,
        out_per_group: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        /// `[groups, out_per_group, in_per_group, kernel]`
        weights: Tensor,
        bias: Vec<f64>,
    },
    Relu,
    Tanh,
    MaxPool2d {
        size: usize,
        stride: usize,
    },
    MaxPool1d {
        size: usize,
        stride: usize,
    },
    Flatten,
    Dense {
        in_dim: usize,
        out_dim: usize,
        /// `[out_dim, in_dim]`
        weights: Tensor,
        bias: Vec<f64>,
    },
}

/// Per-layer forward cache, consumed by `backward`.
#[derive(Debug, Clone)]
pub enum Cache {
    Input(Tensor),
    TanhOutput(Tensor),
    MaxPool {
        input_shape: Vec<usize>,
        argmax: Vec<usize>,
    },
    Shape(Vec<usize>),
    None,
}

/// Parameter gradients for one layer, in the layer's own storage order.
#[derive(Debug, Clone, Default)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn uniform_fan_in(rng: &mut impl Rng, fan_in: usize, n: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

impl Layer {
    pub fn conv2d(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Layer::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weights: Tensor::from_data(
                &[out_channels, in_channels, kernel, kernel],
                uniform_fan_in(rng, fan_in, out_channels * fan_in),
            )
            .expect("consistent shape"),
            bias: vec![0.0; out_channels],
        }
    }

    pub fn conv1d_grouped(
        groups: usize,
        in_per_group: usize,
        out_per_group: usize,
        kernel: usize,
        stride: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_per_group * kernel;
        Layer::Conv1dGrouped {
            groups,
            in_per_group,
            out_per_group,
            kernel,
            stride,
            padding: Padding::Valid,
            weights: Tensor::from_data(
                &[groups, out_per_group, in_per_group, kernel],
                uniform_fan_in(rng, fan_in, groups * out_per_group * fan_in),
            )
            .expect("consistent shape"),
            bias: vec![0.0; groups * out_per_group],
        }
    }

    pub fn dense(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        Layer::Dense {
            in_dim,
            out_dim,
            weights: Tensor::from_data(
                &[out_dim, in_dim],
                uniform_fan_in(rng, in_dim, out_dim * in_dim),
            )
            .expect("consistent shape"),
            bias: vec![0.0; out_dim],
        }
    }

    /// Short label for gradient-check reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d { .. } => "conv2d",
            Layer::Conv1dGrouped { .. } => "conv1d_grouped",
            Layer::Relu => "relu",
            Layer::Tanh => "tanh",
            Layer::MaxPool2d { .. } => "maxpool2d",
            Layer::MaxPool1d { .. } => "maxpool1d",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv2d { weights, bias, .. }
            | Layer::Conv1dGrouped { weights, bias, .. }
            | Layer::Dense { weights, bias, .. } => weights.len() + bias.len(),
            _ => 0,
        }
    }

    pub fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>> {
        let bad = |expected: String| Error::Shape {
            expected,
            got: format!("{in_shape:?}"),
        };
        match self {
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                let [c, h, w] = in_shape else {
                    return Err(bad("[channels, height, width]".into()));
                };
                if c != in_channels {
                    return Err(bad(format!("{in_channels} input channels")));
                }
                let (ho, _) = padding.plan(*h, *kernel, *stride)?;
                let (wo, _) = padding.plan(*w, *kernel, *stride)?;
                Ok(vec![*out_channels, ho, wo])
            }
            Layer::Conv1dGrouped {
                groups,
                in_per_group,
                out_per_group,
                kernel,
                stride,
                padding,
                ..
            } => {
                let [c, l] = in_shape else {
                    return Err(bad("[channels, length]".into()));
                };
                if *c != groups * in_per_group {
                    return Err(bad(format!("{} input channels", groups * in_per_group)));
                }
                let (lo, _) = padding.plan(*l, *kernel, *stride)?;
                Ok(vec![groups * out_per_group, lo])
            }
            Layer::Relu | Layer::Tanh => Ok(in_shape.to_vec()),
            Layer::MaxPool2d { size, stride } => {
                let [c, h, w] = in_shape else {
                    return Err(bad("[channels, height, width]".into()));
                };
                let (ho, _) = Padding::Valid.plan(*h, *size, *stride)?;
                let (wo, _) = Padding::Valid.plan(*w, *size, *stride)?;
                Ok(vec![*c, ho, wo])
            }
            Layer::MaxPool1d { size, stride } => {
                let [c, l] = in_shape else {
                    return Err(bad("[channels, length]".into()));
                };
                let (lo, _) = Padding::Valid.plan(*l, *size, *stride)?;
                Ok(vec![*c, lo])
            }
            Layer::Flatten => Ok(vec![in_shape.iter().product()]),
            Layer::Dense { in_dim, out_dim, .. } => {
                if in_shape != [*in_dim] {
                    return Err(bad(format!("[{in_dim}]")));
                }
                Ok(vec![*out_dim])
            }
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Cache)> {
        let out_shape = self.out_shape(&input.shape)?;
        match self {
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                weights,
                bias,
            } => {
                let (h, w) = (input.shape[1], input.shape[2]);
                let (ho, pad_y) = padding.plan(h, *kernel, *stride)?;
                let (wo, pad_x) = padding.plan(w, *kernel, *stride)?;
                let mut out = Tensor::zeros(&out_shape);
                for o in 0..*out_channels {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let mut acc = bias[o];
                            for c in 0..*in_channels {
                                for ky in 0..*kernel {
                                    let iy = (oy * stride + ky) as isize - pad_y as isize;
                                    if iy < 0 || iy as usize >= h {
                                        continue;
                                    }
                                    for kx in 0..*kernel {
                                        let ix = (ox * stride + kx) as isize - pad_x as isize;
                                        if ix < 0 || ix as usize >= w {
                                            continue;
                                        }
                                        acc += weights.data
                                            [((o * in_channels + c) * kernel + ky) * kernel + kx]
                                            * input.data[(c * h + iy as usize) * w + ix as usize];
                                    }
                                }
                            }
                            out.data[(o * ho + oy) * wo + ox] = acc;
                        }
                    }
                }
                Ok((out, Cache::Input(input.clone())))
            }
            Layer::Conv1dGrouped {
                groups,
                in_per_group,
                out_per_group,
                kernel,
                stride,
                padding,
                weights,
                bias,
            } => {
                let l = input.shape[1];
                let (lo, pad) = padding.plan(l, *kernel, *stride)?;
                let mut out = Tensor::zeros(&out_shape);
                for g in 0..*groups {
                    for o in 0..*out_per_group {
                        let oc = g * out_per_group + o;
                        for ox in 0..lo {
                            let mut acc = bias[oc];
                            for c in 0..*in_per_group {
                                let ic = g * in_per_group + c;
                                for k in 0..*kernel {
                                    let ix = (ox * stride + k) as isize - pad as isize;
                                    if ix < 0 || ix as usize >= l {
                                        continue;
                                    }
                                    acc += weights.data
                                        [((g * out_per_group + o) * in_per_group + c) * kernel + k]
                                        * input.data[ic * l + ix as usize];
                                }
                            }
                            out.data[oc * lo + ox] = acc;
                        }
                    }
                }
                Ok((out, Cache::Input(input.clone())))
            }
            Layer::Relu => {
                let mut out = input.clone();
                for v in &mut out.data {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                Ok((out, Cache::Input(input.clone())))
            }
            Layer::Tanh => {
                let mut out = input.clone();
                for v in &mut out.data {
                    *v = v.tanh();
                }
                Ok((out.clone(), Cache::TanhOutput(out)))
            }
            Layer::MaxPool2d { size, stride } => {
                let (c_n, h, w) = (input.shape[0], input.shape[1], input.shape[2]);
                let (ho, _) = Padding::Valid.plan(h, *size, *stride)?;
                let (wo, _) = Padding::Valid.plan(w, *size, *stride)?;
                let mut out = Tensor::zeros(&out_shape);
                let mut argmax = vec![0usize; out.len()];
                for c in 0..c_n {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let mut best = f64::NEG_INFINITY;
                            let mut best_idx = 0;
                            for ky in 0..*size {
                                for kx in 0..*size {
                                    let idx = (c * h + oy * stride + ky) * w + ox * stride + kx;
                                    if input.data[idx] > best {
                                        best = input.data[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                            let oidx = (c * ho + oy) * wo + ox;
                            out.data[oidx] = best;
                            argmax[oidx] = best_idx;
                        }
                    }
                }
                Ok((
                    out,
                    Cache::MaxPool {
                        input_shape: input.shape.clone(),
                        argmax,
                    },
                ))
            }
            Layer::MaxPool1d { size, stride } => {
                let (c_n, l) = (input.shape[0], input.shape[1]);
                let (lo, _) = Padding::Valid.plan(l, *size, *stride)?;
                let mut out = Tensor::zeros(&out_shape);
                let mut argmax = vec![0usize; out.len()];
                for c in 0..c_n {
                    for ox in 0..lo {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_idx = 0;
                        for k in 0..*size {
                            let idx = c * l + ox * stride + k;
                            if input.data[idx] > best {
                                best = input.data[idx];
                                best_idx = idx;
                            }
                        }
                        out.data[c * lo + ox] = best;
                        argmax[c * lo + ox] = best_idx;
                    }
                }
                Ok((
                    out,
                    Cache::MaxPool {
                        input_shape: input.shape.clone(),
                        argmax,
                    },
                ))
            }
            Layer::Flatten => {
                let out = Tensor::from_data(&out_shape, input.data.clone())?;
                Ok((out, Cache::Shape(input.shape.clone())))
            }
            Layer::Dense {
                in_dim,
                out_dim,
                weights,
                bias,
            } => {
                let mut out = Tensor::zeros(&out_shape);
                for o in 0..*out_dim {
                    let row = &weights.data[o * in_dim..(o + 1) * in_dim];
                    out.data[o] = bias[o]
                        + row
                            .iter()
                            .zip(input.data.iter())
                            .map(|(w, x)| w * x)
                            .sum::<f64>();
                }
                Ok((out, Cache::Input(input.clone())))
            }
        }
    }

    /// Returns (input gradient, parameter gradients).
    pub fn backward(&self, grad_out: &Tensor, cache: &Cache) -> Result<(Tensor, LayerGrads)> {
        match (self, cache) {
            (
                Layer::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    weights,
                    ..
                },
                Cache::Input(input),
            ) => {
                let (h, w) = (input.shape[1], input.shape[2]);
                let (ho, pad_y) = padding.plan(h, *kernel, *stride)?;
                let (wo, pad_x) = padding.plan(w, *kernel, *stride)?;
                let mut grad_in = Tensor::zeros(&input.shape);
                let mut gw = vec![0.0; weights.len()];
                let mut gb = vec![0.0; *out_channels];
                for o in 0..*out_channels {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let g = grad_out.data[(o * ho + oy) * wo + ox];
                            if g == 0.0 {
                                continue;
                            }
                            gb[o] += g;
                            for c in 0..*in_channels {
                                for ky in 0..*kernel {
                                    let iy = (oy * stride + ky) as isize - pad_y as isize;
                                    if iy < 0 || iy as usize >= h {
                                        continue;
                                    }
                                    for kx in 0..*kernel {
                                        let ix = (ox * stride + kx) as isize - pad_x as isize;
                                        if ix < 0 || ix as usize >= w {
                                            continue;
                                        }
                                        let widx =
                                            ((o * in_channels + c) * kernel + ky) * kernel + kx;
                                        let iidx = (c * h + iy as usize) * w + ix as usize;
                                        gw[widx] += g * input.data[iidx];
                                        grad_in.data[iidx] += g * weights.data[widx];
                                    }
                                }
                            }
                        }
                    }
                }
                Ok((grad_in, LayerGrads { weights: gw, bias: gb }))
            }
            (
                Layer::Conv1dGrouped {
                    groups,
                    in_per_group,
                    out_per_group,
                    kernel,
                    stride,
                    padding,
                    weights,
                    ..
                },
                Cache::Input(input),
            ) => {
                let l = input.shape[1];
                let (lo, pad) = padding.plan(l, *kernel, *stride)?;
                let mut grad_in = Tensor::zeros(&input.shape);
                let mut gw = vec![0.0; weights.len()];
                let mut gb = vec![0.0; groups * out_per_group];
                for g_i in 0..*groups {
                    for o in 0..*out_per_group {
                        let oc = g_i * out_per_group + o;
                        for ox in 0..lo {
                            let g = grad_out.data[oc * lo + ox];
                            if g == 0.0 {
                                continue;
                            }
                            gb[oc] += g;
                            for c in 0..*in_per_group {
                                let ic = g_i * in_per_group + c;
                                for k in 0..*kernel {
                                    let ix = (ox * stride + k) as isize - pad as isize;
                                    if ix < 0 || ix as usize >= l {
                                        continue;
                                    }
                                    let widx =
                                        ((g_i * out_per_group + o) * in_per_group + c) * kernel + k;
                                    let iidx = ic * l + ix as usize;
                                    gw[widx] += g * input.data[iidx];
                                    grad_in.data[iidx] += g * weights.data[widx];
                                }
                            }
                        }
                    }
                }
                Ok((grad_in, LayerGrads { weights: gw, bias: gb }))
            }
            (Layer::Relu, Cache::Input(input)) => {
                let mut grad_in = grad_out.clone();
                for (g, &x) in grad_in.data.iter_mut().zip(input.data.iter()) {
                    if x <= 0.0 {
                        *g = 0.0;
                    }
                }
                Ok((grad_in, LayerGrads::default()))
            }
            (Layer::Tanh, Cache::TanhOutput(output)) => {
                let mut grad_in = grad_out.clone();
                for (g, &y) in grad_in.data.iter_mut().zip(output.data.iter()) {
                    *g *= 1.0 - y * y;
                }
                Ok((grad_in, LayerGrads::default()))
            }
            (Layer::MaxPool2d { .. } | Layer::MaxPool1d { .. }, Cache::MaxPool { input_shape, argmax }) => {
                let mut grad_in = Tensor::zeros(input_shape);
                for (out_idx, &in_idx) in argmax.iter().enumerate() {
                    grad_in.data[in_idx] += grad_out.data[out_idx];
                }
                Ok((grad_in, LayerGrads::default()))
            }
            (Layer::Flatten, Cache::Shape(input_shape)) => {
                let grad_in = Tensor::from_data(input_shape, grad_out.data.clone())?;
                Ok((grad_in, LayerGrads::default()))
            }
            (
                Layer::Dense {
                    in_dim,
                    out_dim,
                    weights,
                    ..
                },
                Cache::Input(input),
            ) => {
                let mut grad_in = Tensor::zeros(&input.shape);
                let mut gw = vec![0.0; weights.len()];
                let mut gb = vec![0.0; *out_dim];
                for o in 0..*out_dim {
                    let g = grad_out.data[o];
                    gb[o] = g;
                    for i in 0..*in_dim {
                        gw[o * in_dim + i] = g * input.data[i];
                        grad_in.data[i] += g * weights.data[o * in_dim + i];
                    }
                }
                Ok((grad_in, LayerGrads { weights: gw, bias: gb }))
            }
            _ => Err(Error::State(format!(
                "backward called on {} with mismatched cache",
                self.kind()
            ))),
        }
    }

    /// Appends this layer's parameters to `out` (weights then bias).
    pub fn collect_params(&self, out: &mut Vec<f64>) {
        match self {
            Layer::Conv2d { weights, bias, .. }
            | Layer::Conv1dGrouped { weights, bias, .. }
            | Layer::Dense { weights, bias, .. } => {
                out.extend_from_slice(&weights.data);
                out.extend_from_slice(bias);
            }
            _ => {}
        }
    }

    /// Loads parameters from `params` starting at `offset`; returns the new
    /// offset.
    pub fn assign_params(&mut self, params: &[f64], offset: usize) -> usize {
        match self {
            Layer::Conv2d { weights, bias, .. }
            | Layer::Conv1dGrouped { weights, bias, .. }
            | Layer::Dense { weights, bias, .. } => {
                let wn = weights.len();
                weights.data.copy_from_slice(&params[offset..offset + wn]);
                let bn = bias.len();
                bias.copy_from_slice(&params[offset + wn..offset + wn + bn]);
                offset + wn + bn
            }
            _ => offset,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn valid_shape_formula_matches_enumeration() {
        // output = floor((n - k)/s) + 1, checked against direct counting of
        // window placements.
        for n in 1usize..40 {
            for k in 1..=n {
                for s in 1usize..5 {
                    let (out, _) = Padding::Valid.plan(n, k, s).unwrap();
                    let count = (0..).take_while(|i| i * s + k <= n).count();
                    assert_eq!(out, count, "n={n} k={k} s={s}");
                }
            }
        }
    }

    #[test]
    fn accel_branch_shape_chain() {
        // 1000 -> 498 -> 249 -> 123 -> 61 per channel, valid padding.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv1 = Layer::conv1d_grouped(6, 1, 8, 5, 2, &mut rng);
        let pool = Layer::MaxPool1d { size: 2, stride: 2 };
        let conv2 = Layer::conv1d_grouped(6, 8, 4, 5, 2, &mut rng);
        let s1 = conv1.out_shape(&[6, 1000]).unwrap();
        assert_eq!(s1, vec![48, 498]);
        let s2 = pool.out_shape(&s1).unwrap();
        assert_eq!(s2, vec![48, 249]);
        let s3 = conv2.out_shape(&s2).unwrap();
        assert_eq!(s3, vec![24, 123]);
        let s4 = pool.out_shape(&s3).unwrap();
        assert_eq!(s4, vec![24, 61]);
    }

    #[test]
    fn silhouette_branch_shape_chain() {
        // 240x320 -> 120x160 -> 60x80 -> 30x40 -> 15x20, 5x5 same-padded
        // convs with stride 2, valid 2x2 pooling with stride 2.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv1 = Layer::conv2d(5, 8, 5, 2, Padding::Same, &mut rng);
        let pool = Layer::MaxPool2d { size: 2, stride: 2 };
        let conv2 = Layer::conv2d(8, 4, 5, 2, Padding::Same, &mut rng);
        let s1 = conv1.out_shape(&[5, 240, 320]).unwrap();
        assert_eq!(s1, vec![8, 120, 160]);
        let s2 = pool.out_shape(&s1).unwrap();
        assert_eq!(s2, vec![8, 60, 80]);
        let s3 = conv2.out_shape(&s2).unwrap();
        assert_eq!(s3, vec![4, 30, 40]);
        let s4 = pool.out_shape(&s3).unwrap();
        assert_eq!(s4, vec![4, 15, 20]);
    }

    #[test]
    fn dense_forward_matches_hand_computation() {
        let layer = Layer::Dense {
            in_dim: 2,
            out_dim: 1,
            weights: Tensor::from_data(&[1, 2], vec![2.0, -1.0]).unwrap(),
            bias: vec![0.5],
        };
        let x = Tensor::from_data(&[2], vec![3.0, 4.0]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.data, vec![2.0 * 3.0 - 4.0 + 0.5]);
    }

    #[test]
    fn conv2d_identity_kernel_reproduces_input() {
        let layer = Layer::Conv2d {
            in_channels: 1,
            out_channels: 1,
            kernel: 1,
            stride: 1,
            padding: Padding::Valid,
            weights: Tensor::from_data(&[1, 1, 1, 1], vec![1.0]).unwrap(),
            bias: vec![0.0],
        };
        let x = Tensor::from_data(&[1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn maxpool_backward_routes_to_argmax_only() {
        let layer = Layer::MaxPool1d { size: 2, stride: 2 };
        let x = Tensor::from_data(&[1, 4], vec![1.0, 3.0, 7.0, 2.0]).unwrap();
        let (y, cache) = layer.forward(&x).unwrap();
        assert_eq!(y.data, vec![3.0, 7.0]);
        let g = Tensor::from_data(&[1, 2], vec![1.0, 1.0]).unwrap();
        let (gi, _) = layer.backward(&g, &cache).unwrap();
        assert_eq!(gi.data, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn param_roundtrip_through_flat_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut layer = Layer::conv2d(2, 3, 3, 1, Padding::Valid, &mut rng);
        let mut params = Vec::new();
        layer.collect_params(&mut params);
        assert_eq!(params.len(), layer.param_count());
        let shifted: Vec<f64> = params.iter().map(|v| v + 1.0).collect();
        let end = layer.assign_params(&shifted, 0);
        assert_eq!(end, params.len());
        let mut back = Vec::new();
        layer.collect_params(&mut back);
        assert_eq!(back, shifted);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn same_padding_output_is_ceil_n_over_s(n in 1usize..200, k in 1usize..8, s in 1usize..4) {
            let (out, _) = Padding::Same.plan(n, k, s).unwrap();
            prop_assert_eq!(out, n.div_ceil(s));
        }
    }
}
