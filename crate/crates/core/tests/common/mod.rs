//! Helpers shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use tlnas::datasets::{write_benchmark_fixture, write_flat_binary, BenchmarkEntry, ImageDataset, Split};
use tlnas::nn::{BatchNormMode, GraphBuilder, LayerKind, NetworkInstance, Tensor};
use tlnas::rng::{derive_seed, Stream};
use tlnas::CellSpec;

/// Denominator floor of the gradient relative error. Gradients in the test
/// networks are of order one; `f32` rounding leaves about 2e-5 absolute noise
/// in the finite differences.
pub const GRAD_FLOOR: f64 = 5e-2;
const GRAD_EPS: f32 = 1.0 / 32.0;
const COORDS_PER_CASE: usize = 12;

/// Dyadic value in `[-1, 1]` on a 1/32 grid, so that linear layers are exact
/// in `f32` under dyadic perturbations.
fn dyadic(stream: &mut Stream) -> f32 {
    (stream.below(65) as f32 - 32.0) / 32.0
}

/// Input values away from zero by at least 1/8, keeping ReLU off its kink.
fn dyadic_margin(stream: &mut Stream) -> f32 {
    let m = (stream.below(25) as f32 + 4.0) / 32.0;
    if stream.below(2) == 0 {
        m
    } else {
        -m
    }
}

/// Layer kinds covered by the gradient check, in case order.
pub const GRAD_KINDS: [&str; 13] = [
    "dense",
    "conv3x3",
    "conv3x3_stride2",
    "conv1x1",
    "avgpool3x3",
    "avgpool2x2_stride2",
    "batchnorm_batch",
    "batchnorm_running",
    "relu",
    "add",
    "zeroize",
    "global_avgpool",
    "classifier",
];

fn case_network(kind: &str, bn: &mut BatchNormMode) -> Arc<tlnas::nn::Graph> {
    let mut g = GraphBuilder::new(4, 4, 2);
    let x = g.input();
    let conv = |out_channels, kernel, stride, padding| LayerKind::Conv2d {
        out_channels,
        kernel,
        stride,
        padding,
    };
    let mid = match kind {
        "dense" => g.push("dense", LayerKind::Dense { out_units: 5 }, &[x]),
        "conv3x3" => g.push("conv", conv(3, 3, 1, 1), &[x]),
        "conv3x3_stride2" => g.push("conv", conv(3, 3, 2, 1), &[x]),
        "conv1x1" => g.push("conv", conv(3, 1, 1, 0), &[x]),
        "avgpool3x3" => g.push("pool", LayerKind::AvgPool { kernel: 3, stride: 1, padding: 1 }, &[x]),
        "avgpool2x2_stride2" => g.push("pool", LayerKind::AvgPool { kernel: 2, stride: 2, padding: 0 }, &[x]),
        "batchnorm_batch" | "batchnorm_running" => {
            if kind == "batchnorm_running" {
                *bn = BatchNormMode::InitialRunningStatistics;
            }
            let c = g.push("conv", conv(2, 3, 1, 1), &[x]).unwrap();
            g.push("bn", LayerKind::BatchNorm, &[c])
        }
        "relu" => g.push("relu", LayerKind::Relu, &[x]),
        "add" => {
            let c = g.push("conv", conv(2, 3, 1, 1), &[x]).unwrap();
            let i = g.push("skip", LayerKind::Identity, &[x]).unwrap();
            g.push("add", LayerKind::Add, &[c, i])
        }
        "zeroize" => {
            let z = g.push("zero", LayerKind::Zeroize, &[x]).unwrap();
            let c = g.push("conv", conv(2, 1, 1, 0), &[x]).unwrap();
            g.push("add", LayerKind::Add, &[z, c])
        }
        "global_avgpool" => g.push("gap", LayerKind::GlobalAvgPool, &[x]),
        "classifier" => Ok(x),
        other => panic!("unknown kind {other}"),
    }
    .unwrap();
    let out = g.push("classifier", LayerKind::Classifier { num_classes: 3 }, &[mid]).unwrap();
    Arc::new(g.finish(out).unwrap())
}

/// Central difference at `h` and `h / 2`, extrapolated to cancel the `h^2`
/// term.
fn richardson(f: impl Fn(f32) -> f64, h: f32) -> f64 {
    let d = |h: f32| (f(h) - f(-h)) / (2.0 * h as f64);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn projected_loss(net: &NetworkInstance, batch: &Tensor, r: &[f64]) -> f64 {
    let logits = net.forward(batch).unwrap();
    logits.data().iter().zip(r).map(|(&l, &w)| l as f64 * w).sum()
}

/// Result of one backward-vs-central-difference comparison.
#[derive(Debug)]
pub struct GradCase {
    pub kind: &'static str,
    pub coords: usize,
    pub max_rel_error: f64,
}

/// Compares reverse-mode gradients with central differences on randomly
/// sampled parameter and input coordinates for case `index`.
pub fn gradient_case(index: usize, seed: u64) -> GradCase {
    gradient_case_with_eps(index, seed, GRAD_EPS)
}

pub fn gradient_case_with_eps(index: usize, seed: u64, eps: f32) -> GradCase {
    let kind = GRAD_KINDS[index % GRAD_KINDS.len()];
    let mut stream = Stream::new(derive_seed(seed, index as u64));
    let mut bn = BatchNormMode::BatchStatistics;
    let graph = case_network(kind, &mut bn);
    let mut net = NetworkInstance::new(graph, stream.next_u64()).unwrap().with_batch_norm_mode(bn);
    for p in net.params_mut().iter_mut().flatten() {
        p.weight.data_mut().iter_mut().for_each(|w| *w = dyadic(&mut stream));
        if let Some(b) = p.bias.as_mut() {
            b.data_mut().iter_mut().for_each(|w| *w = dyadic(&mut stream));
        }
    }
    let n = 3;
    let batch_data: Vec<f32> = (0..n * 4 * 4 * 2).map(|_| dyadic_margin(&mut stream)).collect();
    let batch = Tensor::new(vec![n, 4, 4, 2], batch_data).unwrap();
    let r: Vec<f64> = (0..n * 3).map(|_| dyadic(&mut stream) as f64).collect();

    let tape = net.forward_tape(&batch).unwrap();
    let upstream = Tensor::new(vec![n, 3], r.iter().map(|&v| v as f32).collect()).unwrap();
    let grads = net.backward(&tape, &upstream).unwrap();

    // (layer, is_bias, offset) for parameters; layer == usize::MAX for the input.
    let mut coords: Vec<(usize, bool, usize)> = Vec::new();
    for (layer, p) in net.params().iter().enumerate() {
        if let Some(p) = p {
            coords.extend((0..p.weight.len()).map(|i| (layer, false, i)));
            if let Some(b) = &p.bias {
                coords.extend((0..b.len()).map(|i| (layer, true, i)));
            }
        }
    }
    coords.extend((0..batch.len()).map(|i| (usize::MAX, false, i)));
    stream.shuffle(&mut coords);
    coords.truncate(COORDS_PER_CASE);

    let mut max_rel: f64 = 0.0;
    for &(layer, is_bias, i) in &coords {
        let (analytic, numeric) = if layer == usize::MAX {
            let eval = |delta: f32| {
                let mut probe = batch.clone();
                probe.data_mut()[i] += delta;
                projected_loss(&net, &probe, &r)
            };
            (grads.input.data()[i] as f64, richardson(eval, eps))
        } else {
            let eval = |delta: f32| {
                let mut probe = net.clone();
                let p = probe.params_mut()[layer].as_mut().unwrap();
                let t = if is_bias { p.bias.as_mut().unwrap() } else { &mut p.weight };
                t.data_mut()[i] += delta;
                projected_loss(&probe, &batch, &r)
            };
            let num = richardson(eval, eps);
            let g = grads.params[layer].as_ref().unwrap();
            let a = if is_bias { g.bias.as_ref().unwrap().data()[i] } else { g.weight.data()[i] };
            (a as f64, num)
        };
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
        max_rel = max_rel.max(rel);
    }
    GradCase {
        kind,
        coords: coords.len(),
        max_rel_error: max_rel,
    }
}

/// Synthetic 3-channel dataset whose labels depend on image brightness, so
/// untrained networks see class structure.
pub fn synthetic_dataset(name: &str, n: usize, side: usize, classes: usize, seed: u64) -> ImageDataset {
    let mut stream = Stream::new(seed);
    let mut images = Vec::with_capacity(n * side * side * 3);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = stream.below(classes as u64) as usize;
        let base = (label * 200 / classes.max(1)) as u64;
        for _ in 0..side * side * 3 {
            images.push((base + stream.below(56)) as u8);
        }
        labels.push(label as u16);
    }
    let ds = ImageDataset {
        name: name.into(),
        split: Split::Train,
        height: side,
        width: side,
        channels: 3,
        classes,
        images,
        labels,
    };
    ds.validate().unwrap();
    ds
}

/// Writes a synthetic `TLNAS1` file and a fixture covering `n_archs` cells.
pub fn synthetic_search_inputs(dir: &Path, n_archs: usize) -> (PathBuf, PathBuf) {
    let data = dir.join("synthetic.tlnas");
    write_flat_binary(&synthetic_dataset("synthetic", 128, 8, 4, 11), &data).unwrap();
    let mut stream = Stream::new(5);
    let picks = stream.sample_indices(CellSpec::enumerate().count(), n_archs);
    let entries: Vec<BenchmarkEntry> = picks
        .into_iter()
        .map(|i| {
            let val = 40.0 + 55.0 * stream.next_f64();
            BenchmarkEntry {
                arch: CellSpec::from_index(i).unwrap(),
                dataset: "synthetic".into(),
                val_acc: (val * 100.0).round() / 100.0,
                test_acc: ((val - 1.0 + 2.0 * stream.next_f64()) * 100.0).round() / 100.0,
            }
        })
        .collect();
    let fixture = dir.join("fixture.jsonl");
    write_benchmark_fixture(entries.iter(), &fixture).unwrap();
    (data, fixture)
}

/// Directory holding real datasets and the benchmark fixture.
pub fn data_root() -> PathBuf {
    std::env::var_os("TLNAS_DATA_DIR").map_or_else(
        || Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).unwrap().join("data"),
        PathBuf::from,
    )
}
