use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;

use tlnas::datasets::{load_benchmark_fixture, load_dataset_dir, sample_batch, BenchmarkFixture, DatasetSplits, Split};
use tlnas::harness::{
    analyze_study, desk_mlp_subset, optimal_baseline, random_baseline, run_mnist_study, run_selection_experiment,
    ExperimentConfig, MnistData, Normalization, RunRecord, ScoreKind, SelectionSummary, StudyConfig, TrainOptions,
};
use tlnas::nn::BatchNormMode;
use tlnas::report::{
    emit_scatter_svg, study_scatter_points, summarize, write_jsonl, write_summary_csv, AxesConfig, RUN_SCHEMA,
    STUDY_SCHEMA,
};
use tlnas::rng::{derive_seed, seed_hash};
use tlnas::scoring::{graph_for_batch, graph_mellor_score, graph_untrained_stats};
use tlnas::search_space::{enumerate_mlp_space, ArchitectureSpec, CellSpec, MlpSpec, SkeletonConfig};

use crate::args::{BaselineArgs, Merge, NetArgs, ScoreArgs, SearchArgs, StudyArgs};
use crate::Failure;

type CmdResult = Result<(), Failure>;

/// Sections of a `--config` file, one per command.
#[derive(Default)]
pub struct ConfigFile {
    table: toml::Table,
    path: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile, Failure> {
        let Some(path) = path else { return Ok(ConfigFile::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
        Ok(ConfigFile {
            table,
            path: Some(path.to_path_buf()),
        })
    }

    fn section<T: DeserializeOwned + Default>(&self, name: &str) -> Result<T, Failure> {
        match self.table.get(name) {
            None => Ok(T::default()),
            Some(v) => v.clone().try_into().map_err(|e| {
                Failure::Usage(format!(
                    "config {} [{name}]: {e}",
                    self.path.as_deref().unwrap_or(Path::new("?")).display()
                ))
            }),
        }
    }
}

fn data_root() -> PathBuf {
    std::env::var_os("TLNAS_DATA_DIR").map_or_else(|| PathBuf::from("data"), PathBuf::from)
}

/// Prints the resolved configuration as a reusable TOML section, followed by
/// comment lines for derived values.
fn print_resolved<T: Serialize>(section: &str, value: &T, derived: &[String]) -> CmdResult {
    let mut table = toml::Table::new();
    table.insert(
        section.into(),
        toml::Value::try_from(value).map_err(|e| Failure::Usage(e.to_string()))?,
    );
    let text = toml::to_string(&table).map_err(|e| Failure::Usage(e.to_string()))?;
    eprintln!("# resolved configuration\n{}", text.trim_end());
    for d in derived {
        eprintln!("# {d}");
    }
    Ok(())
}

fn skeleton_of(net: &NetArgs) -> Result<SkeletonConfig, Failure> {
    let base = match net.skeleton.as_deref() {
        Some("desk") => SkeletonConfig::DESK,
        _ => SkeletonConfig::CANONICAL,
    };
    let s = SkeletonConfig {
        stem_channels: net.stem_channels.unwrap_or(base.stem_channels),
        cells_per_stack: net.cells_per_stack.unwrap_or(base.cells_per_stack),
    };
    s.validate()?;
    Ok(s)
}

/// Fills every unset network option.
fn resolve_net(net: NetArgs) -> Result<(NetArgs, SkeletonConfig), Failure> {
    let skeleton = skeleton_of(&net)?;
    Ok((
        NetArgs {
            skeleton: None,
            stem_channels: Some(skeleton.stem_channels),
            cells_per_stack: Some(skeleton.cells_per_stack),
            batch_norm: Some(net.batch_norm.unwrap_or_default()),
            normalization: Some(net.normalization.unwrap_or_default()),
        },
        skeleton,
    ))
}

fn load_data(path: &Path) -> Result<DatasetSplits, Failure> {
    let started = Instant::now();
    let d = load_dataset_dir(path)?;
    log::info!(
        "loaded {} from {} in {:.2}s: sizes {:?}",
        d.name(),
        path.display(),
        started.elapsed().as_secs_f64(),
        d.sizes()
    );
    Ok(d)
}

fn load_fixture(path: &Path) -> Result<BenchmarkFixture, Failure> {
    if !path.is_file() {
        return Err(Failure::Data(format!("fixture {} not found", path.display())));
    }
    Ok(load_benchmark_fixture(path)?)
}

fn parse_mlp(s: &str) -> Result<MlpSpec, Failure> {
    Ok(s.parse::<MlpSpec>()?)
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    arch: String,
    dataset: &'a str,
    split: Split,
    n_init: usize,
    batch_size: usize,
    seed: u64,
    batch_seed: u64,
    init_base_seed: u64,
    accuracies: Vec<f64>,
    mu_u: f64,
    sigma_u: f64,
    cv_u: f64,
    degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    mellor: Option<tlnas::scoring::JacobianScore>,
}

pub fn score(cli: ScoreArgs, file: &ConfigFile) -> CmdResult {
    let a = cli.merge(file.section("score")?);
    let (net, skeleton) = resolve_net(a.net)?;
    let spec = match (&a.arch, &a.mlp) {
        (Some(arch), None) => ArchitectureSpec::cell(arch.parse::<CellSpec>()?, skeleton),
        (None, Some(m)) => ArchitectureSpec::Mlp(parse_mlp(m)?),
        _ => return Err(Failure::Usage("give exactly one of --arch or --mlp".into())),
    };
    let dataset = a.dataset.unwrap_or_else(|| "cifar10".into());
    let r = ScoreArgs {
        data: Some(a.data.unwrap_or_else(|| data_root().join(&dataset))),
        dataset: Some(dataset.clone()),
        n_init: Some(a.n_init.unwrap_or(100)),
        batch_size: Some(a.batch_size.unwrap_or(256)),
        seed: Some(a.seed.unwrap_or(0)),
        split: Some(a.split.unwrap_or(Split::Train)),
        mellor: Some(a.mellor.unwrap_or(false)),
        net,
        ..a
    };
    let (n_init, n_bs, seed) = (r.n_init.unwrap(), r.batch_size.unwrap(), r.seed.unwrap());
    let batch_seed = seed_hash(&[seed, 0]);
    let init_base = seed_hash(&[seed, 1]);
    print_resolved(
        "score",
        &r,
        &[format!("batch_seed = {batch_seed}"), format!("init seeds: derive_seed({init_base}, i)")],
    )?;
    if n_init == 0 {
        return Err(Failure::Usage("--n-init must be at least 1".into()));
    }
    let data = load_data(r.data.as_deref().unwrap())?;
    let normalization = r.net.normalization.unwrap();
    let bn = r.net.batch_norm.unwrap_or(BatchNormMode::BatchStatistics);
    let split = r.split.unwrap();
    let batch = sample_batch(data.split(split), n_bs, batch_seed, &normalization.transform(&data))?;
    let started = Instant::now();
    let graph = graph_for_batch(&spec, &batch)?;
    let built = started.elapsed().as_secs_f64();
    let seeds: Vec<u64> = (0..n_init as u64).map(|i| derive_seed(init_base, i)).collect();
    let scoring = Instant::now();
    let stats = graph_untrained_stats(&graph, &batch, &seeds, bn)?;
    let scored = scoring.elapsed().as_secs_f64();
    eprintln!(
        "timing: instantiate {built:.3}s, scoring {scored:.3}s ({:.4}s per initialisation)",
        scored / n_init as f64
    );
    let mellor = if r.mellor.unwrap() {
        Some(graph_mellor_score(&graph, &batch, seeds[0], bn)?)
    } else {
        None
    };
    let out = ScoreOutput {
        arch: spec_string(&spec),
        dataset: &dataset,
        split,
        n_init,
        batch_size: n_bs,
        seed,
        batch_seed,
        init_base_seed: init_base,
        degenerate: stats.is_degenerate(),
        accuracies: stats.accuracies,
        mu_u: stats.mu_u,
        sigma_u: stats.sigma_u,
        cv_u: stats.cv_u,
        mellor,
    };
    println!("{}", serde_json::to_string_pretty(&out).map_err(tlnas::Error::from)?);
    Ok(())
}

fn spec_string(spec: &ArchitectureSpec) -> String {
    match spec {
        ArchitectureSpec::Mlp(m) => m.to_string(),
        ArchitectureSpec::Cell { cell, .. } => cell.to_string(),
    }
}

fn fmt_ms(m: Option<tlnas::harness::MeanStd>) -> String {
    m.map_or_else(|| "n/a".into(), |m| format!("{:.2} ± {:.2}", m.mean, m.std))
}

fn print_summary(s: &SelectionSummary) {
    println!(
        "{:<8} {:<15} val {:<16} test {:<16} runs {} skipped {}",
        s.method,
        s.dataset,
        fmt_ms(s.val),
        fmt_ms(s.test),
        s.n_runs,
        s.n_skipped
    );
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))
}

pub fn search(cli: SearchArgs, file: &ConfigFile) -> CmdResult {
    let a = cli.merge(file.section("search")?);
    let (net, skeleton) = resolve_net(a.net)?;
    let dataset = a.dataset.unwrap_or_else(|| "cifar10".into());
    let r = SearchArgs {
        data: Some(a.data.unwrap_or_else(|| data_root().join(&dataset))),
        fixture: Some(a.fixture.unwrap_or_else(|| data_root().join("nasbench201.jsonl"))),
        dataset: Some(dataset.clone()),
        n_runs: Some(a.n_runs.unwrap_or(500)),
        n_a: Some(a.n_a.unwrap_or(100)),
        n_init: Some(a.n_init.unwrap_or(100)),
        batch_size: Some(a.batch_size.unwrap_or(256)),
        score: Some(a.score.unwrap_or(ScoreKind::CvU)),
        seed: Some(a.seed.unwrap_or(0)),
        out: Some(a.out.unwrap_or_else(|| PathBuf::from("tlnas-out"))),
        with_baselines: Some(a.with_baselines.unwrap_or(false)),
        net,
    };
    let cfg = ExperimentConfig {
        dataset,
        n_runs: r.n_runs.unwrap(),
        n_a: r.n_a.unwrap(),
        n_init: r.n_init.unwrap(),
        n_bs: r.batch_size.unwrap(),
        score: r.score.unwrap(),
        master_seed: r.seed.unwrap(),
        skeleton,
        batch_norm: r.net.batch_norm.unwrap(),
        normalization: r.net.normalization.unwrap(),
    };
    let derived: Vec<String> = (0..cfg.n_runs as u64)
        .map(|run| {
            format!(
                "run {run}: batch_seed = {}, sampling_seed = {}",
                seed_hash(&[cfg.master_seed, run]),
                seed_hash(&[cfg.master_seed, run, 1])
            )
        })
        .collect();
    print_resolved("search", &r, &derived)?;
    cfg.validate()?;
    let fixture = load_fixture(r.fixture.as_deref().unwrap())?;
    let data = load_data(r.data.as_deref().unwrap())?;
    let started = Instant::now();
    let (mut records, summary) = run_selection_experiment(&cfg, &data, &fixture)?;
    eprintln!("timing: {} runs in {:.2}s", cfg.n_runs, started.elapsed().as_secs_f64());
    let out = r.out.as_deref().unwrap();
    create_dir(out)?;
    write_jsonl(&records, RUN_SCHEMA, out.join("runs.jsonl"))?;
    print_summary(&summary);
    if r.with_baselines.unwrap() {
        let (rnd, rs) = random_baseline(&cfg, &fixture)?;
        let (opt, os) = optimal_baseline(&cfg, &fixture)?;
        print_summary(&rs);
        print_summary(&os);
        let baselines: Vec<RunRecord> = rnd.into_iter().chain(opt).collect();
        write_jsonl(&baselines, RUN_SCHEMA, out.join("baselines.jsonl"))?;
        records.extend(baselines);
    }
    write_summary_csv(&summarize(&records), out.join("summary.csv"))?;
    Ok(())
}

fn parse_archs(s: &str) -> Result<Vec<MlpSpec>, Failure> {
    match s {
        "desk" => Ok(desk_mlp_subset()),
        "full" => Ok(enumerate_mlp_space()),
        list => list.split(';').map(|t| parse_mlp(t.trim())).collect(),
    }
}

pub fn study(cli: StudyArgs, file: &ConfigFile) -> CmdResult {
    let a = cli.merge(file.section("study")?);
    let defaults = StudyConfig::default();
    let r = StudyArgs {
        mnist: Some(a.mnist.unwrap_or_else(|| data_root().join("mnist"))),
        archs: Some(a.archs.unwrap_or_else(|| "desk".into())),
        seeds: Some(a.seeds.unwrap_or(defaults.n_seeds)),
        lrs: Some(a.lrs.unwrap_or(defaults.lrs.clone())),
        seed: Some(a.seed.unwrap_or(defaults.master_seed)),
        epochs: Some(a.epochs.unwrap_or(defaults.train.epochs)),
        batch_size: Some(a.batch_size.unwrap_or(defaults.train.batch_size)),
        burn_in: Some(a.burn_in.unwrap_or(defaults.train.burn_in)),
        per_class: Some(a.per_class.unwrap_or(defaults.per_class)),
        untrained_split: Some(a.untrained_split.unwrap_or(defaults.train.untrained_split)),
        normalization: Some(a.normalization.unwrap_or(Normalization::UnitScale)),
        out: Some(a.out.unwrap_or_else(|| PathBuf::from("tlnas-study"))),
    };
    let cfg = StudyConfig {
        archs: parse_archs(r.archs.as_deref().unwrap())?,
        n_seeds: r.seeds.unwrap(),
        lrs: r.lrs.clone().unwrap(),
        master_seed: r.seed.unwrap(),
        per_class: r.per_class.unwrap(),
        normalization: r.normalization.unwrap(),
        train: TrainOptions {
            epochs: r.epochs.unwrap(),
            batch_size: r.batch_size.unwrap(),
            burn_in: r.burn_in.unwrap(),
            untrained_split: r.untrained_split.unwrap(),
        },
    };
    let mut derived = vec![format!("reduce_seed = {}", cfg.reduce_seed())];
    derived.extend((0..cfg.n_seeds).map(|s| format!("training seed {s} = {}", cfg.seed(s))));
    print_resolved("study", &r, &derived)?;
    cfg.validate()?;
    let splits = load_data(r.mnist.as_deref().unwrap())?;
    let data = MnistData::prepare(&splits, cfg.per_class, cfg.reduce_seed(), cfg.normalization)?;
    let started = Instant::now();
    let records = run_mnist_study(&cfg, &data)?;
    eprintln!(
        "timing: {} trainings in {:.1}s",
        cfg.archs.len() * cfg.lrs.len() * cfg.n_seeds,
        started.elapsed().as_secs_f64()
    );
    let out = r.out.as_deref().unwrap();
    create_dir(out)?;
    write_jsonl(&records, STUDY_SCHEMA, out.join("study.jsonl"))?;
    let axes = AxesConfig {
        title: "Untrained-accuracy variation against trained accuracy".into(),
        x_label: "CV_U".into(),
        y_label: "mean trained test accuracy (%)".into(),
        color_label: "log10 parameters".into(),
        log_x: true,
        ..AxesConfig::default()
    };
    emit_scatter_svg(&study_scatter_points(&records), &axes, out.join("study_scatter.svg"))?;
    println!("{:<11} {:>8} {:>9} {:>9} {:>9} {:>9}", "mlp", "lr", "mu_t", "sigma_t", "cv_u", "params");
    for rec in &records {
        println!(
            "{:<11} {:>8} {:>9.4} {:>9.4} {:>9.4} {:>9}",
            rec.mlp.to_string(),
            rec.lr_selected,
            rec.mu_t,
            rec.sigma_t,
            rec.cv_u,
            rec.n_params
        );
    }
    match analyze_study(&records) {
        Ok(an) => {
            println!(
                "spearman rho(cv_u, mu_t) = {:.4} (p = {:.3e}); low-cv quartile mu_t {:.4}, overall {:.4}",
                an.spearman_rho, an.spearman_p, an.low_cv_quartile_mu_t, an.overall_mu_t
            );
            let text = serde_json::to_string_pretty(&an).map_err(tlnas::Error::from)?;
            let path = out.join("study_analysis.json");
            std::fs::write(&path, text + "\n").map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        }
        Err(e) => eprintln!("no rank analysis: {e}"),
    }
    Ok(())
}

pub fn baseline(cli: BaselineArgs, file: &ConfigFile) -> CmdResult {
    let a = cli.merge(file.section("baseline")?);
    let kind = a.kind.unwrap_or_else(|| "random".into());
    if kind != "random" && kind != "optimal" {
        return Err(Failure::Usage(format!("--kind must be random or optimal, not {kind}")));
    }
    let r = BaselineArgs {
        kind: Some(kind.clone()),
        fixture: Some(a.fixture.unwrap_or_else(|| data_root().join("nasbench201.jsonl"))),
        dataset: Some(a.dataset.unwrap_or_else(|| "cifar10".into())),
        n_runs: Some(a.n_runs.unwrap_or(500)),
        n_a: Some(a.n_a.unwrap_or(if kind == "random" { 1 } else { 10 })),
        seed: Some(a.seed.unwrap_or(0)),
        out: a.out,
    };
    let cfg = ExperimentConfig {
        dataset: r.dataset.clone().unwrap(),
        n_runs: r.n_runs.unwrap(),
        n_a: r.n_a.unwrap(),
        master_seed: r.seed.unwrap(),
        ..ExperimentConfig::default()
    };
    print_resolved("baseline", &r, &["sampling seed of run i = seed_hash([seed, i, 1])".into()])?;
    let fixture = load_fixture(r.fixture.as_deref().unwrap())?;
    let (records, summary) = if kind == "random" {
        random_baseline(&cfg, &fixture)?
    } else {
        optimal_baseline(&cfg, &fixture)?
    };
    print_summary(&summary);
    if let Some(out) = r.out.as_deref() {
        create_dir(out)?;
        write_jsonl(&records, RUN_SCHEMA, out.join(format!("{kind}.jsonl")))?;
        write_summary_csv(&summarize(&records), out.join(format!("{kind}_summary.csv")))?;
    }
    Ok(())
}
