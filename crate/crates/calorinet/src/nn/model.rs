//! Two-branch regression model: per-modality layer stacks whose flattened
//! features are concatenated and fed to a fully connected head producing a
//! single kcal/min scalar.

use crate::accel::AccelWindow;
use crate::error::{Error, Result};
use crate::nn::layers::{Cache, Layer, LayerGrads};
use crate::nn::tensor::Tensor;
use crate::silhouette::TemporalSilhouetteStack;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Model {
    /// Present for silhouette-consuming variants; ends with a Flatten layer.
    pub silhouette_branch: Option<Vec<Layer>>,
    /// Present for accelerometer-consuming variants; ends with a Flatten layer.
    pub accel_branch: Option<Vec<Layer>>,
    /// Operates on the concatenated branch features; output shape `[1]`.
    pub head: Vec<Layer>,
    pub silhouette_input_shape: Option<Vec<usize>>,
    pub accel_input_shape: Option<Vec<usize>>,
}

/// Forward activations cached for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    silhouette: Vec<Cache>,
    accel: Vec<Cache>,
    head: Vec<Cache>,
    silhouette_features: usize,
    accel_features: usize,
}

fn run_branch(layers: &[Layer], input: &Tensor) -> Result<(Tensor, Vec<Cache>)> {
    let mut caches = Vec::with_capacity(layers.len());
    let mut x = input.clone();
    for layer in layers {
        let (y, cache) = layer.forward(&x)?;
        caches.push(cache);
        x = y;
    }
    Ok((x, caches))
}

fn branch_backward(
    layers: &[Layer],
    caches: &[Cache],
    grad_out: &Tensor,
) -> Result<(Tensor, Vec<LayerGrads>)> {
    let mut grads = vec![LayerGrads::default(); layers.len()];
    let mut g = grad_out.clone();
    for (i, layer) in layers.iter().enumerate().rev() {
        let (gi, lg) = layer.backward(&g, &caches[i])?;
        grads[i] = lg;
        g = gi;
    }
    Ok((g, grads))
}

impl Model {
    /// Output feature length of a branch for a given input shape.
    pub fn branch_feature_len(layers: &[Layer], input_shape: &[usize]) -> Result<usize> {
        let mut shape = input_shape.to_vec();
        for layer in layers {
            shape = layer.out_shape(&shape)?;
        }
        Ok(shape.iter().product())
    }

    pub fn requires_silhouette(&self) -> bool {
        self.silhouette_branch.is_some()
    }

    pub fn requires_accel(&self) -> bool {
        self.accel_branch.is_some()
    }

    fn check_input(
        present: Option<&Tensor>,
        branch: Option<&Vec<Layer>>,
        expected_shape: Option<&Vec<usize>>,
        name: &str,
    ) -> Result<()> {
        match (present, branch) {
            (Some(t), Some(_)) => {
                let expected = expected_shape.expect("branch implies input shape");
                if &t.shape != expected {
                    return Err(Error::Shape {
                        expected: format!("{name} input {expected:?}"),
                        got: format!("{:?}", t.shape),
                    });
                }
                Ok(())
            }
            (None, Some(_)) => Err(Error::Shape {
                expected: format!("{name} input present"),
                got: "absent".into(),
            }),
            (Some(_), None) => Err(Error::Shape {
                expected: format!("no {name} input"),
                got: "present".into(),
            }),
            (None, None) => Ok(()),
        }
    }

    /// Deterministic scalar prediction with cached activations.
    pub fn forward(
        &self,
        silhouette: Option<&Tensor>,
        accel: Option<&Tensor>,
    ) -> Result<(f64, ForwardCache)> {
        Self::check_input(
            silhouette,
            self.silhouette_branch.as_ref(),
            self.silhouette_input_shape.as_ref(),
            "silhouette",
        )?;
        Self::check_input(
            accel,
            self.accel_branch.as_ref(),
            self.accel_input_shape.as_ref(),
            "accel",
        )?;
        if silhouette.is_none() && accel.is_none() {
            return Err(Error::Argument("at least one input must be present".into()));
        }

        let mut features = Vec::new();
        let mut cache = ForwardCache {
            silhouette: Vec::new(),
            accel: Vec::new(),
            head: Vec::new(),
            silhouette_features: 0,
            accel_features: 0,
        };
        if let (Some(branch), Some(input)) = (&self.silhouette_branch, silhouette) {
            let (out, caches) = run_branch(branch, input)?;
            cache.silhouette = caches;
            cache.silhouette_features = out.len();
            features.extend_from_slice(&out.data);
        }
        if let (Some(branch), Some(input)) = (&self.accel_branch, accel) {
            let (out, caches) = run_branch(branch, input)?;
            cache.accel = caches;
            cache.accel_features = out.len();
            features.extend_from_slice(&out.data);
        }
        let concat = Tensor::from_data(&[features.len()], features)?;
        let (out, head_caches) = run_branch(&self.head, &concat)?;
        cache.head = head_caches;
        if out.len() != 1 {
            return Err(Error::Shape {
                expected: "scalar head output".into(),
                got: format!("{:?}", out.shape),
            });
        }
        out.assert_finite()?;
        Ok((out.data[0], cache))
    }

    /// Backpropagates `d loss / d prediction`, returning the flat parameter
    /// gradient (aligned with [`Model::get_params`]) and the gradients with
    /// respect to each present input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: f64,
    ) -> Result<(Vec<f64>, Option<Tensor>, Option<Tensor>)> {
        let scalar = Tensor::from_data(&[1], vec![upstream])?;
        let (concat_grad, head_grads) = branch_backward(&self.head, &cache.head, &scalar)?;

        let mut sil_grads: Vec<LayerGrads> = Vec::new();
        let mut accel_grads: Vec<LayerGrads> = Vec::new();
        let mut sil_input_grad = None;
        let mut accel_input_grad = None;

        let mut offset = 0usize;
        if let Some(branch) = &self.silhouette_branch {
            if cache.silhouette_features > 0 {
                let g = Tensor::from_data(
                    &[cache.silhouette_features],
                    concat_grad.data[..cache.silhouette_features].to_vec(),
                )?;
                let (gi, grads) = branch_backward(branch, &cache.silhouette, &g)?;
                sil_input_grad = Some(gi);
                sil_grads = grads;
                offset = cache.silhouette_features;
            } else {
                return Err(Error::State("backward before forward on silhouette branch".into()));
            }
        }
        if let Some(branch) = &self.accel_branch {
            if cache.accel_features > 0 {
                let g = Tensor::from_data(
                    &[cache.accel_features],
                    concat_grad.data[offset..offset + cache.accel_features].to_vec(),
                )?;
                let (gi, grads) = branch_backward(branch, &cache.accel, &g)?;
                accel_input_grad = Some(gi);
                accel_grads = grads;
            } else {
                return Err(Error::State("backward before forward on accel branch".into()));
            }
        }

        // Flatten in the same order as collect_params: silhouette branch,
        // accel branch, head; per layer weights then bias.
        let mut flat = Vec::with_capacity(self.param_count());
        let branches: [(&Option<Vec<Layer>>, &[LayerGrads]); 2] = [
            (&self.silhouette_branch, &sil_grads),
            (&self.accel_branch, &accel_grads),
        ];
        for (branch, grads) in branches {
            if let Some(layers) = branch {
                for (layer, lg) in layers.iter().zip(grads.iter()) {
                    debug_assert_eq!(layer.param_count(), lg.weights.len() + lg.bias.len());
                    flat.extend_from_slice(&lg.weights);
                    flat.extend_from_slice(&lg.bias);
                }
            }
        }
        for (layer, lg) in self.head.iter().zip(head_grads.iter()) {
            debug_assert_eq!(layer.param_count(), lg.weights.len() + lg.bias.len());
            flat.extend_from_slice(&lg.weights);
            flat.extend_from_slice(&lg.bias);
        }
        Ok((flat, sil_input_grad, accel_input_grad))
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.silhouette_branch
            .iter()
            .flatten()
            .chain(self.accel_branch.iter().flatten())
            .chain(self.head.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.silhouette_branch
            .iter_mut()
            .flatten()
            .chain(self.accel_branch.iter_mut().flatten())
            .chain(self.head.iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(Layer::param_count).sum()
    }

    pub fn get_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in self.layers() {
            layer.collect_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut offset = 0;
        for layer in self.layers_mut() {
            offset = layer.assign_params(params, offset);
        }
        debug_assert_eq!(offset, params.len());
    }

    /// `(label, param_count)` per parameterized layer, in flat-vector order.
    /// Used for per-layer gradient-check reporting.
    pub fn param_layout(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        let sections: [(&str, Option<&Vec<Layer>>); 3] = [
            ("silhouette", self.silhouette_branch.as_ref()),
            ("accel", self.accel_branch.as_ref()),
            ("head", Some(&self.head)),
        ];
        for (section, layers) in sections {
            if let Some(layers) = layers {
                for (i, layer) in layers.iter().enumerate() {
                    if layer.param_count() > 0 {
                        out.push((format!("{section}[{i}]:{}", layer.kind()), layer.param_count()));
                    }
                }
            }
        }
        out
    }
}

/// Converts a silhouette stack into the `[channels, height, width]` tensor
/// the network consumes. Channel 0 stays the longest window.
pub fn stack_to_tensor(stack: &TemporalSilhouetteStack) -> Tensor {
    let mut data = Vec::with_capacity(stack.channels.len() * stack.width * stack.height);
    for plane in &stack.channels {
        data.extend_from_slice(plane);
    }
    Tensor::from_data(&[stack.channels.len(), stack.height, stack.width], data)
        .expect("stack planes are dense")
}

/// Converts an accel window into the `[6, length]` tensor the network
/// consumes.
pub fn window_to_tensor(window: &AccelWindow) -> Tensor {
    let l = window.data.len();
    let mut data = vec![0.0; 6 * l];
    for (i, row) in window.data.iter().enumerate() {
        for c in 0..6 {
            data[c * l + i] = row[c];
        }
    }
    Tensor::from_data(&[6, l], data).expect("dense window")
}
