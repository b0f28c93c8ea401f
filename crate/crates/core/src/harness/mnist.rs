use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{reduce_train_per_class, DatasetBatch, DatasetSplits, Split};
use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, AdamConfig, AdamState, NetworkInstance, Tensor};
use crate::rng::{seed_hash, Stream};
use crate::scoring::accuracy;
use crate::search_space::{instantiate_network, ArchitectureSpec, MlpSpec};
use crate::stats::{population_mean_std, spearman_test};

use super::config::Normalization;

/// Learning rates the study may search over.
pub const LR_GRID: [f64; 6] = [0.0001, 0.0003, 0.001, 0.003, 0.01, 0.03];

const SHUFFLE_TAG: u64 = 0x5348_5546;
const REDUCE_TAG: u64 = 0x5245_4455;

/// Widths of the 4 x 4 desk subset.
const DESK_WIDTHS: [usize; 4] = [8, 32, 128, 512];

/// 16 grid points: every pairing of four widths spread over the grid.
pub fn desk_mlp_subset() -> Vec<MlpSpec> {
    DESK_WIDTHS
        .iter()
        .flat_map(|&a| DESK_WIDTHS.iter().map(move |&b| MlpSpec { units_layer1: a, units_layer2: b }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs excluded from best-validation selection.
    pub burn_in: usize,
    /// Split on which the untrained accuracy is measured.
    pub untrained_split: Split,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 200,
            batch_size: 50,
            burn_in: 50,
            untrained_split: Split::Train,
        }
    }
}

/// Preprocessed reduced-train, validation and test sets.
#[derive(Clone, Debug)]
pub struct MnistData {
    pub train: DatasetBatch,
    pub val: DatasetBatch,
    pub test: DatasetBatch,
}

impl MnistData {
    pub fn prepare(
        splits: &DatasetSplits,
        per_class: usize,
        reduce_seed: u64,
        normalization: Normalization,
    ) -> Result<MnistData> {
        let transform = normalization.transform(splits);
        let reduced = reduce_train_per_class(&splits.train, per_class, reduce_seed)?;
        let all = |n: usize| (0..n).collect::<Vec<_>>();
        Ok(MnistData {
            train: DatasetBatch::gather(&reduced, &all(reduced.len()), &transform, reduce_seed)?,
            val: DatasetBatch::gather(&splits.val, &all(splits.val.len()), &transform, 0)?,
            test: DatasetBatch::gather(&splits.test, &all(splits.test.len()), &transform, 0)?,
        })
    }

    pub fn split(&self, split: Split) -> &DatasetBatch {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn input_hwc(&self) -> [usize; 3] {
        let s = self.train.pixels.shape();
        [s[1], s[2], s[3]]
    }
}

/// Tracks the best validation accuracy over eligible epochs (1-based).
/// Epochs after the burn-in are eligible; when training is no longer than
/// the burn-in, only the final epoch is. Ties keep the earlier epoch.
#[derive(Clone, Debug)]
pub struct BestEpochTracker {
    burn_in: usize,
    epochs: usize,
    best: Option<(usize, f64)>,
}

impl BestEpochTracker {
    pub fn new(burn_in: usize, epochs: usize) -> Self {
        BestEpochTracker {
            burn_in,
            epochs,
            best: None,
        }
    }

    pub fn eligible(&self, epoch: usize) -> bool {
        epoch > self.burn_in || (self.epochs <= self.burn_in && epoch == self.epochs)
    }

    /// True when `acc` becomes the new best.
    pub fn offer(&mut self, epoch: usize, acc: f64) -> bool {
        if !self.eligible(epoch) || self.best.is_some_and(|(_, b)| acc <= b) {
            return false;
        }
        self.best = Some((epoch, acc));
        true
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

/// Best eligible epoch (1-based) of a validation curve.
pub fn select_best_epoch(val_curve: &[f64], burn_in: usize) -> Option<usize> {
    let mut t = BestEpochTracker::new(burn_in, val_curve.len());
    for (i, &acc) in val_curve.iter().enumerate() {
        t.offer(i + 1, acc);
    }
    t.best().map(|(e, _)| e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub untrained_acc: f64,
    /// `None` when training diverged.
    pub test_acc: Option<f64>,
    pub val_acc: Option<f64>,
    pub best_epoch: Option<usize>,
}

fn rows(t: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let len = t.row_len();
    let mut data = Vec::with_capacity(idx.len() * len);
    for &i in idx {
        data.extend_from_slice(t.row(i));
    }
    let mut shape = t.shape().to_vec();
    shape[0] = idx.len();
    Tensor::new(shape, data)
}

fn eval(net: &NetworkInstance, data: &DatasetBatch) -> Result<f64> {
    Ok(accuracy(&net.forward(&data.pixels)?, &data.labels))
}

enum Step {
    Ok,
    Diverged,
}

fn train_epoch(
    net: &mut NetworkInstance,
    adam: &mut AdamState,
    data: &DatasetBatch,
    order: &[usize],
    batch_size: usize,
    lr: f64,
) -> Result<Step> {
    for chunk in order.chunks(batch_size) {
        let x = rows(&data.pixels, chunk)?;
        let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
        let tape = match net.forward_tape(&x) {
            Ok(t) => t,
            Err(Error::NonFinite { .. }) => return Ok(Step::Diverged),
            Err(e) => return Err(e),
        };
        let (loss, grad) = softmax_cross_entropy(tape.logits(), &labels)?;
        if !loss.is_finite() {
            return Ok(Step::Diverged);
        }
        let grads = net.backward(&tape, &grad)?;
        match adam.step(net, &grads, lr) {
            Ok(()) => {}
            Err(Error::NonFinite { .. }) => return Ok(Step::Diverged),
            Err(e) => return Err(e),
        }
    }
    Ok(Step::Ok)
}

/// Trains one MLP with Adam and returns its untrained accuracy and the test
/// accuracy of the best-validation eligible epoch.
pub fn train_mlp(spec: &MlpSpec, data: &MnistData, lr: f64, seed: u64, opts: &TrainOptions) -> Result<TrainOutcome> {
    if !(lr >= 0.0 && lr.is_finite()) || opts.epochs == 0 || opts.batch_size == 0 {
        return Err(Error::OutOfRange {
            what: "training options",
            value: format!("lr {lr}, {opts:?}"),
            allowed: "finite lr >= 0, epochs and batch size >= 1".into(),
        });
    }
    let graph = instantiate_network(&ArchitectureSpec::Mlp(*spec), data.train.classes, data.input_hwc())?;
    let mut net = NetworkInstance::new(Arc::clone(&graph), seed)?;
    let untrained_acc = eval(&net, data.split(opts.untrained_split))?;
    let mut adam = AdamState::new(&net, AdamConfig::default());
    let mut tracker = BestEpochTracker::new(opts.burn_in, opts.epochs);
    let mut best_params = None;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    for epoch in 1..=opts.epochs {
        Stream::new(seed_hash(&[seed, SHUFFLE_TAG, epoch as u64])).shuffle(&mut order);
        if let Step::Diverged = train_epoch(&mut net, &mut adam, &data.train, &order, opts.batch_size, lr)? {
            log::warn!("{spec} lr {lr} seed {seed:#x}: diverged in epoch {epoch}");
            return Ok(TrainOutcome {
                untrained_acc,
                test_acc: None,
                val_acc: None,
                best_epoch: None,
            });
        }
        if tracker.eligible(epoch) {
            let acc = eval(&net, &data.val)?;
            if tracker.offer(epoch, acc) {
                best_params = Some(net.params().to_vec());
            }
        }
    }
    let (best_epoch, val_acc) = tracker.best().expect("final epoch is always eligible");
    if let Some(p) = best_params {
        net.set_params(p)?;
    }
    Ok(TrainOutcome {
        untrained_acc,
        test_acc: Some(eval(&net, &data.test)?),
        val_acc: Some(val_acc),
        best_epoch: Some(best_epoch),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub archs: Vec<MlpSpec>,
    pub n_seeds: usize,
    pub lrs: Vec<f64>,
    pub master_seed: u64,
    pub per_class: usize,
    pub normalization: Normalization,
    pub train: TrainOptions,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            archs: desk_mlp_subset(),
            n_seeds: 10,
            lrs: vec![0.001, 0.01],
            master_seed: 0,
            per_class: 20,
            normalization: Normalization::UnitScale,
            train: TrainOptions::default(),
        }
    }
}

impl StudyConfig {
    /// All 144 widths, 100 seeds, the full learning-rate grid.
    pub fn full_grid() -> StudyConfig {
        StudyConfig {
            archs: crate::search_space::enumerate_mlp_space(),
            n_seeds: 100,
            lrs: LR_GRID.to_vec(),
            ..StudyConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.archs.is_empty() || self.n_seeds == 0 || self.lrs.is_empty() {
            return Err(Error::OutOfRange {
                what: "study size",
                value: format!("{} archs, {} seeds, {} lrs", self.archs.len(), self.n_seeds, self.lrs.len()),
                allowed: "at least one of each".into(),
            });
        }
        if let Some(lr) = self.lrs.iter().find(|lr| !LR_GRID.contains(lr)) {
            return Err(Error::OutOfRange {
                what: "learning rate",
                value: lr.to_string(),
                allowed: format!("{LR_GRID:?}"),
            });
        }
        Ok(())
    }

    /// Seed of the per-class train reduction.
    pub fn reduce_seed(&self) -> u64 {
        seed_hash(&[self.master_seed, REDUCE_TAG])
    }

    /// Training seed `s`, shared by every architecture and learning rate.
    pub fn seed(&self, s: usize) -> u64 {
        seed_hash(&[self.master_seed, s as u64])
    }
}

/// Moments for one architecture at its best learning rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub mlp: MlpSpec,
    pub lr_selected: f64,
    pub mu_t: f64,
    pub sigma_t: f64,
    pub mu_u: f64,
    pub sigma_u: f64,
    pub cv_u: f64,
    pub n_params: usize,
    /// Seeds that trained without diverging at `lr_selected`.
    pub n_seeds: usize,
    pub n_failed: usize,
}

/// Trains every (architecture, lr, seed) and keeps, per architecture, the
/// lr with the highest mean test accuracy (earlier lr on ties). Moments use
/// the seeds that did not diverge. Architectures where every lr diverged on
/// every seed are left out with a warning.
pub fn run_mnist_study(cfg: &StudyConfig, data: &MnistData) -> Result<Vec<StudyRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = (0..cfg.archs.len())
        .flat_map(|a| (0..cfg.lrs.len()).flat_map(move |l| (0..cfg.n_seeds).map(move |s| (a, l, s))))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(a, l, s)| {
            let started = std::time::Instant::now();
            let out = train_mlp(&cfg.archs[a], data, cfg.lrs[l], cfg.seed(s), &cfg.train)?;
            log::info!(
                "{} lr {} seed {s}: {:.1}s",
                cfg.archs[a],
                cfg.lrs[l],
                started.elapsed().as_secs_f64()
            );
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_arch = cfg.lrs.len() * cfg.n_seeds;
    let mut records = Vec::with_capacity(cfg.archs.len());
    for (a, mlp) in cfg.archs.iter().enumerate() {
        let mut best: Option<(usize, f64, f64, Vec<f64>)> = None;
        for l in 0..cfg.lrs.len() {
            let start = a * per_arch + l * cfg.n_seeds;
            let runs = &outcomes[start..start + cfg.n_seeds];
            let t: Vec<f64> = runs.iter().filter_map(|o| o.test_acc).collect();
            let Ok((mu, sd)) = population_mean_std(&t) else { continue };
            let u: Vec<f64> = runs.iter().filter(|o| o.test_acc.is_some()).map(|o| o.untrained_acc).collect();
            if best.as_ref().is_none_or(|b| mu > b.1) {
                best = Some((l, mu, sd, u));
            }
        }
        let Some((l, mu_t, sigma_t, u)) = best else {
            log::warn!("{mlp}: every training diverged, architecture left out");
            continue;
        };
        let (mu_u, sigma_u) = population_mean_std(&u)?;
        records.push(StudyRecord {
            mlp: *mlp,
            lr_selected: cfg.lrs[l],
            mu_t,
            sigma_t,
            mu_u,
            sigma_u,
            cv_u: if mu_u == 0.0 { 0.0 } else { sigma_u / mu_u },
            n_params: crate::search_space::count_parameters(
                &ArchitectureSpec::Mlp(*mlp),
                data.train.classes,
                data.input_hwc(),
            )?,
            n_seeds: u.len(),
            n_failed: cfg.n_seeds - u.len(),
        });
    }
    Ok(records)
}

/// Rank relation between CV_U and mean trained accuracy over a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyAnalysis {
    pub n_records: usize,
    pub spearman_rho: f64,
    /// Two-sided.
    pub spearman_p: f64,
    /// Mean `mu_t` of the quarter of records with the lowest `cv_u`
    /// (rounded up).
    pub low_cv_quartile_mu_t: f64,
    pub overall_mu_t: f64,
}

pub fn analyze_study(records: &[StudyRecord]) -> Result<StudyAnalysis> {
    if records.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rank correlation needs 3 records, got {}",
            records.len()
        )));
    }
    let cv: Vec<f64> = records.iter().map(|r| r.cv_u).collect();
    let mu: Vec<f64> = records.iter().map(|r| r.mu_t).collect();
    let (spearman_rho, spearman_p) = spearman_test(&cv, &mu)?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| cv[a].total_cmp(&cv[b]).then(a.cmp(&b)));
    let q = records.len().div_ceil(4);
    let quartile: Vec<f64> = order[..q].iter().map(|&i| mu[i]).collect();
    Ok(StudyAnalysis {
        n_records: records.len(),
        spearman_rho,
        spearman_p,
        low_cv_quartile_mu_t: population_mean_std(&quartile)?.0,
        overall_mu_t: population_mean_std(&mu)?.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{ImageDataset, PixelTransform};

    fn toy_data(n_train: usize, n_eval: usize) -> MnistData {
        let mut s = Stream::new(99);
        let mk = |n: usize, s: &mut Stream| {
            let labels: Vec<u16> = (0..n).map(|i| (i % 10) as u16).collect();
            // Class k lights up row k; noise elsewhere.
            let mut images = vec![0u8; n * 28 * 28];
            for (i, &l) in labels.iter().enumerate() {
                for c in 0..28 {
                    images[i * 784 + usize::from(l) * 28 + c] = 200;
                }
                for _ in 0..20 {
                    let p = s.below(784) as usize;
                    images[i * 784 + p] = s.next_u32() as u8;
                }
            }
            ImageDataset {
                name: "toy".into(),
                split: Split::Train,
                height: 28,
                width: 28,
                channels: 1,
                classes: 10,
                images,
                labels,
            }
        };
        let all = |n: usize| (0..n).collect::<Vec<_>>();
        let t = PixelTransform::UnitScale;
        MnistData {
            train: DatasetBatch::gather(&mk(n_train, &mut s), &all(n_train), &t, 0).unwrap(),
            val: DatasetBatch::gather(&mk(n_eval, &mut s), &all(n_eval), &t, 0).unwrap(),
            test: DatasetBatch::gather(&mk(n_eval, &mut s), &all(n_eval), &t, 0).unwrap(),
        }
    }

    #[test]
    fn burn_in_excludes_early_peak() {
        let mut curve = vec![0.5; 200];
        curve[39] = 0.99;
        curve[119] = 0.9;
        assert_eq!(select_best_epoch(&curve, 50), Some(120));
        assert_eq!(select_best_epoch(&[0.2, 0.9, 0.3], 50), Some(3));
        assert_eq!(select_best_epoch(&[0.2, 0.4, 0.4], 1), Some(2));
    }

    #[test]
    fn zero_lr_keeps_untrained_accuracy() {
        let data = toy_data(40, 30);
        let opts = TrainOptions {
            epochs: 4,
            batch_size: 10,
            burn_in: 1,
            untrained_split: Split::Test,
        };
        let out = train_mlp(&MlpSpec::new(16, 8).unwrap(), &data, 0.0, 5, &opts).unwrap();
        assert_eq!(out.test_acc, Some(out.untrained_acc));
    }

    #[test]
    fn training_learns_separable_toy() {
        let data = toy_data(100, 50);
        let opts = TrainOptions {
            epochs: 30,
            batch_size: 20,
            burn_in: 5,
            untrained_split: Split::Train,
        };
        let out = train_mlp(&MlpSpec::new(32, 16).unwrap(), &data, 0.01, 1, &opts).unwrap();
        assert!(out.test_acc.unwrap() > 0.9, "{out:?}");
        assert!(out.best_epoch.unwrap() > 5);
    }

    #[test]
    fn huge_lr_diverges_or_trains_without_error() {
        let data = toy_data(20, 10);
        let opts = TrainOptions {
            epochs: 3,
            batch_size: 10,
            burn_in: 0,
            untrained_split: Split::Train,
        };
        let out = train_mlp(&MlpSpec::new(8, 8).unwrap(), &data, 1e30, 2, &opts).unwrap();
        assert_eq!(out.test_acc.is_none(), out.best_epoch.is_none());
    }

    #[test]
    fn study_moments_cover_every_seed() {
        let data = toy_data(30, 20);
        let cfg = StudyConfig {
            archs: vec![MlpSpec::new(8, 8).unwrap()],
            n_seeds: 3,
            lrs: vec![0.001],
            train: TrainOptions {
                epochs: 2,
                batch_size: 10,
                burn_in: 1,
                untrained_split: Split::Train,
            },
            ..StudyConfig::default()
        };
        let records = run_mnist_study(&cfg, &data).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!((r.n_seeds, r.n_failed, r.n_params), (3, 0, 6442));
        let t: Vec<f64> = (0..3)
            .map(|s| train_mlp(&cfg.archs[0], &data, 0.001, cfg.seed(s), &cfg.train).unwrap().test_acc.unwrap())
            .collect();
        let (m, sd) = population_mean_std(&t).unwrap();
        assert_eq!((r.mu_t, r.sigma_t), (m, sd));
    }

    #[test]
    fn study_rejects_off_grid_lr() {
        let cfg = StudyConfig {
            lrs: vec![0.002],
            ..StudyConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn desk_subset_has_16_grid_points() {
        let d = desk_mlp_subset();
        assert_eq!(d.len(), 16);
        assert!(d.iter().all(|m| MlpSpec::new(m.units_layer1, m.units_layer2).is_ok()));
    }
}

#[cfg(test)]
mod analysis_tests {
    use super::*;

    fn rec(cv_u: f64, mu_t: f64) -> StudyRecord {
        StudyRecord {
            mlp: MlpSpec { units_layer1: 8, units_layer2: 8 },
            lr_selected: 0.001,
            mu_t,
            sigma_t: 0.0,
            mu_u: 0.1,
            sigma_u: 0.0,
            cv_u,
            n_params: 1,
            n_seeds: 1,
            n_failed: 0,
        }
    }

    #[test]
    fn perfectly_decreasing_relation() {
        let rs: Vec<StudyRecord> = (0..8).map(|i| rec(f64::from(i), 0.9 - 0.05 * f64::from(i))).collect();
        let a = analyze_study(&rs).unwrap();
        assert_eq!(a.spearman_rho, -1.0);
        assert!((a.low_cv_quartile_mu_t - 0.875).abs() < 1e-12);
        assert!(a.low_cv_quartile_mu_t >= a.overall_mu_t);
    }
}
