//! Selection experiments against the benchmark fixture, their baselines, and
//! the MNIST MLP study.

mod baselines;
mod config;
mod mnist;
mod selection;

pub use baselines::{optimal_baseline, random_baseline};
pub use config::{ExperimentConfig, Normalization, ScoreKind};
pub use mnist::{
    analyze_study, desk_mlp_subset, run_mnist_study, select_best_epoch, train_mlp, BestEpochTracker, MnistData, StudyConfig,
    StudyAnalysis, StudyRecord, TrainOutcome, TrainOptions, LR_GRID,
};
pub use selection::{
    run_selection_experiment, score_candidates, select_architecture, select_by_score, summarize_runs, Candidate,
    MeanStd, RunRecord, SelectionSummary,
};
