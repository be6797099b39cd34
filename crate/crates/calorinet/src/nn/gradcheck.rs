//! Central finite-difference verification of the analytic gradients.

use crate::error::Result;
use crate::nn::model::Model;
use crate::nn::tensor::Tensor;

/// Maximum relative gradient error for one parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: String,
    pub max_relative_error: f64,
}

/// Perturbs every parameter of `model` by `±eps` and compares the central
/// finite difference of the squared-error loss against the analytic
/// gradient. Relative error uses `|a - n| / max(|a|, |n|, 1e-8)`.
///
/// Parameters sitting on a non-differentiable point (a ReLU pre-activation
/// or max-pool tie within `eps` of switching) are excluded: there the two
/// one-sided slopes genuinely differ and no finite difference approximates
/// the subgradient the backward pass returns. A kink is flagged when the
/// one-sided slopes disagree by more than 1e-4 relative — smooth curvature
/// contributes only O(eps), orders of magnitude below that.
///
/// Intended for test-sized models; cost is two forward passes per parameter.
pub fn grad_check(
    model: &mut Model,
    silhouette: Option<&Tensor>,
    accel: Option<&Tensor>,
    target: f64,
    eps: f64,
) -> Result<Vec<LayerCheck>> {
    let (pred, cache) = model.forward(silhouette, accel)?;
    let (analytic, _, _) = model.backward(&cache, 2.0 * (pred - target))?;
    let loss_zero = (pred - target).powi(2);

    let mut params = model.get_params();
    let mut numeric = vec![Some(0.0); params.len()];
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + eps;
        model.set_params(&params);
        let (p_plus, _) = model.forward(silhouette, accel)?;
        params[i] = orig - eps;
        model.set_params(&params);
        let (p_minus, _) = model.forward(silhouette, accel)?;
        params[i] = orig;
        let loss_plus = (p_plus - target).powi(2);
        let loss_minus = (p_minus - target).powi(2);
        let slope_plus = (loss_plus - loss_zero) / eps;
        let slope_minus = (loss_zero - loss_minus) / eps;
        let smooth = (slope_plus - slope_minus).abs()
            <= 1e-4 * slope_plus.abs().max(slope_minus.abs()).max(1.0);
        numeric[i] = smooth.then_some((loss_plus - loss_minus) / (2.0 * eps));
    }
    model.set_params(&params);

    let mut out = Vec::new();
    let mut offset = 0usize;
    for (label, count) in model.param_layout() {
        let mut max_err = 0.0f64;
        for i in offset..offset + count {
            let Some(n) = numeric[i] else { continue };
            let a = analytic[i];
            let err = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            max_err = max_err.max(err);
        }
        out.push(LayerCheck {
            layer: label,
            max_relative_error: max_err,
        });
        offset += count;
    }
    Ok(out)
}
