use serde::{Deserialize, Serialize};

use crate::datasets::{DatasetSplits, PixelTransform};
use crate::error::{Error, Result};
use crate::nn::BatchNormMode;
use crate::search_space::SkeletonConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Minimum positive CV_U.
    #[default]
    #[serde(alias = "cv")]
    CvU,
    /// Maximum Jacobian score.
    Mellor,
}

impl ScoreKind {
    pub fn method_name(self) -> &'static str {
        match self {
            ScoreKind::CvU => "cv_u",
            ScoreKind::Mellor => "mellor",
        }
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cv" | "cv_u" => Ok(ScoreKind::CvU),
            "mellor" => Ok(ScoreKind::Mellor),
            _ => Err(Error::Parse {
                token: s.into(),
                reason: "expected cv or mellor".into(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Per-channel standardisation with train-split statistics.
    #[default]
    Standardize,
    /// Pixels in [0, 1].
    UnitScale,
}

impl Normalization {
    pub fn transform(self, data: &DatasetSplits) -> PixelTransform {
        match self {
            Normalization::Standardize => PixelTransform::Standardize(data.channel_stats.clone()),
            Normalization::UnitScale => PixelTransform::UnitScale,
        }
    }
}

/// One selection experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub n_runs: usize,
    pub n_a: usize,
    pub n_init: usize,
    pub n_bs: usize,
    pub score: ScoreKind,
    pub master_seed: u64,
    pub skeleton: SkeletonConfig,
    pub batch_norm: BatchNormMode,
    pub normalization: Normalization,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: "cifar10".into(),
            n_runs: 500,
            n_a: 100,
            n_init: 100,
            n_bs: 256,
            score: ScoreKind::CvU,
            master_seed: 0,
            skeleton: SkeletonConfig::CANONICAL,
            batch_norm: BatchNormMode::BatchStatistics,
            normalization: Normalization::Standardize,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("n_runs", self.n_runs),
            ("n_a", self.n_a),
            ("n_init", self.n_init),
            ("n_bs", self.n_bs),
        ] {
            if v == 0 {
                return Err(Error::OutOfRange {
                    what,
                    value: "0".into(),
                    allowed: ">= 1".into(),
                });
            }
        }
        if self.score == ScoreKind::Mellor && self.n_bs < 2 {
            return Err(Error::OutOfRange {
                what: "n_bs",
                value: self.n_bs.to_string(),
                allowed: ">= 2 for the Jacobian score".into(),
            });
        }
        self.skeleton.validate()
    }
}
