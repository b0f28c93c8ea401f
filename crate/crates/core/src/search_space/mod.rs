//! The two search spaces: the 12 x 12 grid of two-hidden-layer MLPs and the
//! 5^6 NAS-Bench-201 cell space.

mod cell;
mod mlp;
mod skeleton;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use cell::{sample_architectures, CellOp, CellSpec, CELL_EDGES, CELL_SPACE_SIZE};
pub use mlp::{enumerate_mlp_space, MlpSpec, MLP_UNITS};
pub use skeleton::{count_parameters, instantiate_network, SkeletonConfig};

/// Either point of either search space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum ArchitectureSpec {
    Mlp(MlpSpec),
    Cell {
        cell: CellSpec,
        skeleton: SkeletonConfig,
    },
}

impl ArchitectureSpec {
    pub fn cell(cell: CellSpec, skeleton: SkeletonConfig) -> Self {
        ArchitectureSpec::Cell { cell, skeleton }
    }
}

impl From<MlpSpec> for ArchitectureSpec {
    fn from(m: MlpSpec) -> Self {
        ArchitectureSpec::Mlp(m)
    }
}

impl fmt::Display for ArchitectureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArchitectureSpec::Mlp(m) => write!(f, "{m}"),
            ArchitectureSpec::Cell { cell, .. } => write!(f, "{cell}"),
        }
    }
}
