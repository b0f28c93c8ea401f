use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;

use super::graph::{Graph, Node, NodeId};
use super::init::he_uniform_init;
use super::kernels::{self, Window};
use super::layer::{FeatureShape, LayerKind};
use super::tensor::Tensor;

pub const BN_EPSILON: f64 = 1e-5;

/// How batch-norm layers normalise an untrained network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchNormMode {
    /// Statistics of the current batch (training-mode normalisation).
    #[default]
    BatchStatistics,
    /// Freshly initialised running statistics: mean 0, variance 1.
    InitialRunningStatistics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

static NEXT_STATE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_state_id() -> u64 {
    NEXT_STATE_ID.fetch_add(1, Ordering::Relaxed)
}

/// A graph plus one set of weights.
///
/// Forward passes take `&self`, so an instance can be shared between threads.
/// Any mutable access to the weights invalidates tapes recorded earlier.
#[derive(Clone, Debug)]
pub struct NetworkInstance {
    graph: Arc<Graph>,
    params: Vec<Option<LayerParams>>,
    init_seed: u64,
    bn_mode: BatchNormMode,
    state_id: u64,
}

/// Activations recorded by [`NetworkInstance::forward_tape`].
/// Per-node `1 / sqrt(var + eps)` of batch-statistics normalisation.
type BnCache = Vec<Option<Vec<f64>>>;

#[derive(Clone, Debug)]
pub struct Tape {
    state_id: u64,
    batch: usize,
    values: Vec<Tensor>,
    bn_inv_std: BnCache,
}

impl Tape {
    pub fn logits(&self) -> &Tensor {
        self.values.last().expect("tape holds at least the output")
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    /// Aligned with [`NetworkInstance::params`].
    pub params: Vec<Option<LayerParams>>,
    /// Gradient with respect to the batch, laid out like the batch.
    pub input: Tensor,
}

fn conv_window(input: FeatureShape, output: FeatureShape, kernel: usize, stride: usize, padding: usize) -> Window {
    let (FeatureShape::Spatial { channels, height, width }, FeatureShape::Spatial { height: oh, width: ow, .. }) =
        (input, output)
    else {
        unreachable!("builder guarantees spatial shapes around windowed layers")
    };
    Window {
        channels,
        height,
        width,
        kernel,
        stride,
        padding,
        out_height: oh,
        out_width: ow,
    }
}

fn nhwc_to_nchw(x: &[f32], n: usize, h: usize, w: usize, c: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; x.len()];
    for b in 0..n {
        for y in 0..h {
            for xx in 0..w {
                for ch in 0..c {
                    out[((b * c + ch) * h + y) * w + xx] = x[((b * h + y) * w + xx) * c + ch];
                }
            }
        }
    }
    out
}

fn nchw_to_nhwc(x: &[f32], n: usize, h: usize, w: usize, c: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; x.len()];
    for b in 0..n {
        for ch in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    out[((b * h + y) * w + xx) * c + ch] = x[((b * c + ch) * h + y) * w + xx];
                }
            }
        }
    }
    out
}

fn accumulate(slot: &mut Option<Tensor>, grad: Tensor) {
    match slot {
        Some(existing) => existing.add_assign(&grad),
        None => *slot = Some(grad),
    }
}

impl NetworkInstance {
    /// He-uniform weights, zero biases. Node `i` draws from the stream
    /// `derive_seed(init_seed, i)`.
    pub fn new(graph: Arc<Graph>, init_seed: u64) -> Result<Self> {
        let params = graph
            .nodes()
            .iter()
            .enumerate()
            .map(|(id, node)| {
                let Some(&src) = node.inputs.first() else {
                    return Ok(None);
                };
                let Some((wshape, bias)) = node.spec.param_shapes(graph.node(src).shape) else {
                    return Ok(None);
                };
                let weight = he_uniform_init(node.spec.fan_in, &wshape, derive_seed(init_seed, id as u64))
                    .map_err(|_| Error::InvalidLayer {
                        layer: node.name.clone(),
                        reason: "fan_in must be positive".into(),
                    })?;
                Ok(Some(LayerParams {
                    weight,
                    bias: bias.map(|b| Tensor::zeros(vec![b])),
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            graph,
            params,
            init_seed,
            bn_mode: BatchNormMode::default(),
            state_id: fresh_state_id(),
        })
    }

    /// Builds an instance from explicit weights, validating every shape.
    pub fn with_params(graph: Arc<Graph>, params: Vec<Option<LayerParams>>) -> Result<Self> {
        let mut net = Self::new(graph, 0)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn with_batch_norm_mode(mut self, mode: BatchNormMode) -> Self {
        self.bn_mode = mode;
        self
    }

    pub fn batch_norm_mode(&self) -> BatchNormMode {
        self.bn_mode
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn params(&self) -> &[Option<LayerParams>] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.graph.param_count()
    }

    pub fn params_mut(&mut self) -> &mut [Option<LayerParams>] {
        self.state_id = fresh_state_id();
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<Option<LayerParams>>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Dimension {
                expected: vec![self.params.len()],
                actual: vec![params.len()],
            });
        }
        for (old, new) in self.params.iter().zip(&params) {
            match (old, new) {
                (None, None) => {}
                (Some(o), Some(n)) => {
                    if o.weight.shape() != n.weight.shape() {
                        return Err(Error::Dimension {
                            expected: o.weight.shape().to_vec(),
                            actual: n.weight.shape().to_vec(),
                        });
                    }
                    let ob = o.bias.as_ref().map(|b| b.shape().to_vec());
                    let nb = n.bias.as_ref().map(|b| b.shape().to_vec());
                    if ob != nb {
                        return Err(Error::Dimension {
                            expected: ob.unwrap_or_default(),
                            actual: nb.unwrap_or_default(),
                        });
                    }
                }
                _ => {
                    return Err(Error::Protocol(
                        "parameter layout does not match the graph".into(),
                    ))
                }
            }
        }
        self.params = params;
        self.state_id = fresh_state_id();
        Ok(())
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        let [h, w, c] = self.graph.input_hwc();
        let s = batch.shape();
        if s.len() != 4 || s[1..] != [h, w, c] || s[0] == 0 {
            return Err(Error::Dimension {
                expected: vec![s.first().copied().unwrap_or(1).max(1), h, w, c],
                actual: s.to_vec(),
            });
        }
        Ok(s[0])
    }

    /// Class logits `[N, classes]` for a `[N, H, W, C]` batch.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        let (mut values, _) = self.run(batch, false)?;
        Ok(values[self.graph.output()].take().expect("output computed"))
    }

    /// Forward pass that keeps every activation for [`Self::backward`].
    pub fn forward_tape(&self, batch: &Tensor) -> Result<Tape> {
        let n = self.check_batch(batch)?;
        let (values, bn_inv_std) = self.run(batch, true)?;
        let mut values = values;
        values.truncate(self.graph.output() + 1);
        let values: Vec<Tensor> = values.into_iter().map(|v| v.expect("kept")).collect();
        Ok(Tape {
            state_id: self.state_id,
            batch: n,
            values,
            bn_inv_std,
        })
    }

    fn run(&self, batch: &Tensor, keep: bool) -> Result<(Vec<Option<Tensor>>, BnCache)> {
        let n = self.check_batch(batch)?;
        let nodes = self.graph.nodes();
        let [h, w, c] = self.graph.input_hwc();
        let mut values: Vec<Option<Tensor>> = vec![None; nodes.len()];
        let mut bn_cache: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        values[0] = Some(Tensor::new(
            vec![n, c, h, w],
            nhwc_to_nchw(batch.data(), n, h, w, c),
        )?);
        let out = self.graph.output();
        for id in 1..=out {
            let node = &nodes[id];
            let (value, inv_std) = self.eval(id, node, &values, n)?;
            values[id] = Some(value);
            bn_cache[id] = inv_std;
            if !keep {
                for &i in &node.inputs {
                    if self.graph.last_use()[i] == id {
                        values[i] = None;
                    }
                }
            }
        }
        if !values[out].as_ref().is_some_and(Tensor::is_finite) {
            return Err(Error::NonFinite {
                node: nodes[out].name.clone(),
            });
        }
        Ok((values, bn_cache))
    }

    fn eval(
        &self,
        id: NodeId,
        node: &Node,
        values: &[Option<Tensor>],
        n: usize,
    ) -> Result<(Tensor, Option<Vec<f64>>)> {
        let input = |k: usize| values[node.inputs[k]].as_ref().expect("inputs are live");
        let x = input(0);
        let in_shape = self.graph.node(node.inputs[0]).shape;
        let out_shape = node.shape.with_batch(n);
        let data = match node.spec.kind {
            LayerKind::Input => unreachable!("input is node 0"),
            LayerKind::Dense { .. } | LayerKind::Classifier { .. } => {
                let p = self.params[id].as_ref().expect("dense params");
                let b = p.bias.as_ref().expect("dense bias");
                kernels::dense_forward(x.data(), p.weight.data(), b.data(), n)
            }
            LayerKind::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let p = self.params[id].as_ref().expect("conv params");
                let win = conv_window(in_shape, node.shape, kernel, stride, padding);
                kernels::conv_forward(x.data(), p.weight.data(), &win, out_channels, n)
            }
            LayerKind::AvgPool {
                kernel,
                stride,
                padding,
            } => {
                let win = conv_window(in_shape, node.shape, kernel, stride, padding);
                kernels::avg_pool_forward(x.data(), &win, n)
            }
            LayerKind::BatchNorm => match self.bn_mode {
                BatchNormMode::BatchStatistics => {
                    let (y, inv_std) =
                        kernels::batch_norm_forward(x.data(), n, in_shape.channels(), in_shape.plane(), BN_EPSILON);
                    return Ok((Tensor::new(out_shape, y)?, Some(inv_std)));
                }
                BatchNormMode::InitialRunningStatistics => {
                    let scale = 1.0 / (1.0 + BN_EPSILON).sqrt();
                    x.data().iter().map(|&v| (f64::from(v) * scale) as f32).collect()
                }
            },
            LayerKind::Relu => x.data().iter().map(|&v| v.max(0.0)).collect(),
            LayerKind::Zeroize => vec![0.0; x.len()],
            LayerKind::Identity => x.data().to_vec(),
            LayerKind::Add => {
                let mut acc: Vec<f64> = x.data().iter().map(|&v| f64::from(v)).collect();
                for k in 1..node.inputs.len() {
                    for (a, &v) in acc.iter_mut().zip(input(k).data()) {
                        *a += f64::from(v);
                    }
                }
                acc.into_iter().map(|v| v as f32).collect()
            }
            LayerKind::GlobalAvgPool => {
                kernels::global_avg_pool_forward(x.data(), n * in_shape.channels(), in_shape.plane())
            }
        };
        Ok((Tensor::new(out_shape, data)?, None))
    }

    /// Gradients of `sum(logits * upstream)` with respect to every parameter
    /// and to the batch.
    pub fn backward(&self, tape: &Tape, upstream: &Tensor) -> Result<Gradients> {
        if tape.state_id != self.state_id {
            return Err(Error::Protocol(
                "tape was not recorded by this network with its current weights".into(),
            ));
        }
        let out = self.graph.output();
        if upstream.shape() != tape.logits().shape() {
            return Err(Error::Dimension {
                expected: tape.logits().shape().to_vec(),
                actual: upstream.shape().to_vec(),
            });
        }
        let n = tape.batch;
        let nodes = self.graph.nodes();
        let mut grads: Vec<Option<Tensor>> = vec![None; out + 1];
        let mut pgrads: Vec<Option<LayerParams>> = self
            .params
            .iter()
            .map(|p| {
                p.as_ref().map(|p| LayerParams {
                    weight: Tensor::zeros(p.weight.shape().to_vec()),
                    bias: p.bias.as_ref().map(|b| Tensor::zeros(b.shape().to_vec())),
                })
            })
            .collect();
        grads[out] = Some(upstream.clone());
        for id in (1..=out).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            let node = &nodes[id];
            let src = node.inputs[0];
            let in_shape = nodes[src].shape;
            let x = &tape.values[src];
            let x_shape = x.shape().to_vec();
            let dx = match node.spec.kind {
                LayerKind::Input => unreachable!(),
                LayerKind::Dense { .. } | LayerKind::Classifier { .. } => {
                    let p = self.params[id].as_ref().expect("dense params");
                    let outputs = node.shape.numel();
                    let (dx, dw, db) = kernels::dense_backward(x.data(), p.weight.data(), g.data(), n, outputs);
                    pgrads[id] = Some(LayerParams {
                        weight: Tensor::new(p.weight.shape().to_vec(), dw)?,
                        bias: Some(Tensor::new(vec![outputs], db)?),
                    });
                    Some(dx)
                }
                LayerKind::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                } => {
                    let p = self.params[id].as_ref().expect("conv params");
                    let win = conv_window(in_shape, node.shape, kernel, stride, padding);
                    let (dx, dw) = kernels::conv_backward(x.data(), p.weight.data(), g.data(), &win, out_channels, n);
                    pgrads[id] = Some(LayerParams {
                        weight: Tensor::new(p.weight.shape().to_vec(), dw)?,
                        bias: None,
                    });
                    Some(dx)
                }
                LayerKind::AvgPool {
                    kernel,
                    stride,
                    padding,
                } => {
                    let win = conv_window(in_shape, node.shape, kernel, stride, padding);
                    Some(kernels::avg_pool_backward(g.data(), &win, n))
                }
                LayerKind::BatchNorm => match self.bn_mode {
                    BatchNormMode::BatchStatistics => {
                        let inv_std = tape.bn_inv_std[id].as_ref().expect("batch statistics recorded");
                        Some(kernels::batch_norm_backward(
                            tape.values[id].data(),
                            g.data(),
                            inv_std,
                            n,
                            in_shape.plane(),
                        ))
                    }
                    BatchNormMode::InitialRunningStatistics => {
                        let scale = 1.0 / (1.0 + BN_EPSILON).sqrt();
                        Some(g.data().iter().map(|&v| (f64::from(v) * scale) as f32).collect())
                    }
                },
                LayerKind::Relu => Some(
                    g.data()
                        .iter()
                        .zip(tape.values[id].data())
                        .map(|(&d, &y)| if y > 0.0 { d } else { 0.0 })
                        .collect(),
                ),
                LayerKind::Zeroize => None,
                LayerKind::Identity => Some(g.data().to_vec()),
                LayerKind::Add => {
                    for &i in &node.inputs[1..] {
                        accumulate(&mut grads[i], g.clone());
                    }
                    Some(g.into_data())
                }
                LayerKind::GlobalAvgPool => Some(kernels::global_avg_pool_backward(g.data(), in_shape.plane())),
            };
            if let Some(dx) = dx {
                accumulate(&mut grads[src], Tensor::new(x_shape, dx)?);
            }
        }
        let [h, w, c] = self.graph.input_hwc();
        let input = match grads[0].take() {
            Some(g) => Tensor::new(vec![n, h, w, c], nchw_to_nhwc(g.data(), n, h, w, c))?,
            None => Tensor::zeros(vec![n, h, w, c]),
        };
        Ok(Gradients { params: pgrads, input })
    }

    /// One row per image: the gradient of that image's summed logits with
    /// respect to its own pixels (`[N, H * W * C]`, pixel order as in the
    /// batch).
    pub fn input_jacobian(&self, batch: &Tensor) -> Result<Tensor> {
        let tape = self.forward_tape(batch)?;
        let n = tape.batch;
        let classes = self.graph.num_classes();
        let row = batch.row_len();
        let coupled = self.bn_mode == BatchNormMode::BatchStatistics && self.graph.contains_batch_norm();
        if !coupled {
            let ones = Tensor::filled(vec![n, classes], 1.0);
            return self.backward(&tape, &ones)?.input.reshape(vec![n, row]);
        }
        let mut out = Vec::with_capacity(n * row);
        for i in 0..n {
            let mut mask = Tensor::zeros(vec![n, classes]);
            mask.data_mut()[i * classes..(i + 1) * classes].fill(1.0);
            let g = self.backward(&tape, &mask)?;
            out.extend_from_slice(g.input.row(i));
        }
        Tensor::new(vec![n, row], out)
    }
}
