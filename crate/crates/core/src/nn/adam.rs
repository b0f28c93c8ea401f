use crate::error::{Error, Result};

use super::network::{Gradients, LayerParams, NetworkInstance};
use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment accumulators, shaped like the parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub first_moment: Vec<Option<LayerParams>>,
    pub second_moment: Vec<Option<LayerParams>>,
    pub step_count: u64,
    pub config: AdamConfig,
}

fn zeros_like(params: &[Option<LayerParams>]) -> Vec<Option<LayerParams>> {
    params
        .iter()
        .map(|p| {
            p.as_ref().map(|p| LayerParams {
                weight: Tensor::zeros(p.weight.shape().to_vec()),
                bias: p.bias.as_ref().map(|b| Tensor::zeros(b.shape().to_vec())),
            })
        })
        .collect()
}

impl AdamState {
    pub fn new(net: &NetworkInstance, config: AdamConfig) -> Self {
        Self {
            first_moment: zeros_like(net.params()),
            second_moment: zeros_like(net.params()),
            step_count: 0,
            config,
        }
    }

    /// One bias-corrected Adam update of every parameter in `net`.
    ///
    /// Gradients are checked for finiteness before anything is modified.
    pub fn step(&mut self, net: &mut NetworkInstance, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.params.len() != net.params().len() {
            return Err(Error::Dimension {
                expected: vec![net.params().len()],
                actual: vec![grads.params.len()],
            });
        }
        for (id, g) in grads.params.iter().enumerate() {
            let Some(g) = g else { continue };
            let finite = g.weight.is_finite() && g.bias.as_ref().is_none_or(Tensor::is_finite);
            if !finite {
                return Err(Error::NonFinite {
                    node: net.graph().node(id).name.clone(),
                });
            }
        }
        self.step_count += 1;
        let t = self.step_count;
        let cfg = self.config;
        let params = net.params_mut();
        for (id, slot) in params.iter_mut().enumerate() {
            let (Some(p), Some(g), Some(m), Some(v)) = (
                slot.as_mut(),
                grads.params[id].as_ref(),
                self.first_moment[id].as_mut(),
                self.second_moment[id].as_mut(),
            ) else {
                continue;
            };
            adam_update(
                p.weight.data_mut(),
                g.weight.data(),
                m.weight.data_mut(),
                v.weight.data_mut(),
                t,
                lr,
                &cfg,
            );
            if let (Some(pb), Some(gb), Some(mb), Some(vb)) =
                (p.bias.as_mut(), g.bias.as_ref(), m.bias.as_mut(), v.bias.as_mut())
            {
                adam_update(pb.data_mut(), gb.data(), mb.data_mut(), vb.data_mut(), t, lr, &cfg);
            }
        }
        Ok(())
    }
}

/// Applies one Adam step to `net` in place.
pub fn adam_step(net: &mut NetworkInstance, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    state.step(net, grads, lr)
}

/// Elementwise Adam recurrence for step `t` (1-based):
/// `m = b1 m + (1 - b1) g`, `v = b2 v + (1 - b2) g^2`,
/// `w -= lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_update(
    weights: &mut [f32],
    grads: &[f32],
    m: &mut [f32],
    v: &mut [f32],
    t: u64,
    lr: f64,
    cfg: &AdamConfig,
) {
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..weights.len() {
        let g = f64::from(grads[i]);
        let mi = cfg.beta1 * f64::from(m[i]) + (1.0 - cfg.beta1) * g;
        let vi = cfg.beta2 * f64::from(v[i]) + (1.0 - cfg.beta2) * g * g;
        m[i] = mi as f32;
        v[i] = vi as f32;
        let update = lr * (mi / c1) / ((vi / c2).sqrt() + cfg.epsilon);
        weights[i] = (f64::from(weights[i]) - update) as f32;
    }
}
