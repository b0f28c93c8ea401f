use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Edges of the 4-node cell, in string order: (1,0), (2,0), (2,1), (3,0),
/// (3,1), (3,2) as `(target, source)`.
pub const CELL_EDGES: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

pub const CELL_SPACE_SIZE: usize = 15_625;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellOp {
    Zeroize,
    SkipConnect,
    Conv1x1,
    Conv3x3,
    AvgPool3x3,
}

impl CellOp {
    pub const ALL: [CellOp; 5] = [
        CellOp::Zeroize,
        CellOp::SkipConnect,
        CellOp::Conv1x1,
        CellOp::Conv3x3,
        CellOp::AvgPool3x3,
    ];

    /// Benchmark token. `none` is the zeroize op.
    pub fn token(self) -> &'static str {
        match self {
            CellOp::Zeroize => "none",
            CellOp::SkipConnect => "skip_connect",
            CellOp::Conv1x1 => "nor_conv_1x1",
            CellOp::Conv3x3 => "nor_conv_3x3",
            CellOp::AvgPool3x3 => "avg_pool_3x3",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        CellOp::ALL.into_iter().find(|op| op.token() == token)
    }

    fn index(self) -> usize {
        CellOp::ALL.iter().position(|&o| o == self).expect("listed")
    }
}

/// One operation per cell edge, ordered as [`CELL_EDGES`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellSpec {
    pub edge_ops: [CellOp; 6],
}

impl CellSpec {
    pub fn new(edge_ops: [CellOp; 6]) -> Self {
        Self { edge_ops }
    }

    pub fn uniform(op: CellOp) -> Self {
        Self { edge_ops: [op; 6] }
    }

    /// Base-5 index with edge 0 most significant.
    pub fn index(&self) -> usize {
        self.edge_ops.iter().fold(0, |acc, op| acc * 5 + op.index())
    }

    pub fn from_index(mut index: usize) -> Result<Self> {
        if index >= CELL_SPACE_SIZE {
            return Err(Error::OutOfRange {
                what: "cell index",
                value: index.to_string(),
                allowed: format!("0..{CELL_SPACE_SIZE}"),
            });
        }
        let mut ops = [CellOp::Zeroize; 6];
        for slot in ops.iter_mut().rev() {
            *slot = CellOp::ALL[index % 5];
            index /= 5;
        }
        Ok(Self { edge_ops: ops })
    }

    pub fn enumerate() -> impl Iterator<Item = CellSpec> {
        (0..CELL_SPACE_SIZE).map(|i| CellSpec::from_index(i).expect("in range"))
    }

    /// Operations feeding node `target`, as `(source, op)`.
    pub fn incoming(&self, target: usize) -> impl Iterator<Item = (usize, CellOp)> + '_ {
        CELL_EDGES
            .iter()
            .zip(self.edge_ops)
            .filter(move |((t, _), _)| *t == target)
            .map(|((_, s), op)| (*s, op))
    }
}

/// `n` distinct cells drawn uniformly from the whole space.
pub fn sample_architectures(n: usize, seed: u64) -> Result<Vec<CellSpec>> {
    if n == 0 || n > CELL_SPACE_SIZE {
        return Err(Error::OutOfRange {
            what: "architecture count",
            value: n.to_string(),
            allowed: format!("1..={CELL_SPACE_SIZE}"),
        });
    }
    Stream::new(seed)
        .sample_indices(CELL_SPACE_SIZE, n)
        .into_iter()
        .map(CellSpec::from_index)
        .collect()
}

impl fmt::Display for CellSpec {
    /// `|op~0|+|op~0|op~1|+|op~0|op~1|op~2|`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for target in 1..=3 {
            if target > 1 {
                f.write_str("+")?;
            }
            f.write_str("|")?;
            for (source, op) in self.incoming(target) {
                write!(f, "{}~{}|", op.token(), source)?;
            }
        }
        Ok(())
    }
}

impl FromStr for CellSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |token: &str, reason: &str| Error::Parse {
            token: token.to_string(),
            reason: reason.to_string(),
        };
        let groups: Vec<&str> = s.split('+').collect();
        if groups.len() != 3 {
            return Err(err(s, "expected three node groups separated by `+`"));
        }
        let mut ops = Vec::with_capacity(6);
        for (g, group) in groups.iter().enumerate() {
            let target = g + 1;
            let inner = group
                .strip_prefix('|')
                .and_then(|r| r.strip_suffix('|'))
                .ok_or_else(|| err(group, "node group must start and end with `|`"))?;
            let edges: Vec<&str> = inner.split('|').collect();
            if edges.len() != target {
                return Err(err(
                    group,
                    &format!("node {target} needs {target} incoming edges, found {}", edges.len()),
                ));
            }
            for (expected_source, edge) in edges.iter().enumerate() {
                let (name, source) = edge
                    .split_once('~')
                    .ok_or_else(|| err(edge, "edge must be `op~index`"))?;
                let op = CellOp::from_token(name).ok_or_else(|| err(name, "unknown operation"))?;
                if source != expected_source.to_string() {
                    return Err(err(
                        edge,
                        &format!("expected predecessor index {expected_source}"),
                    ));
                }
                ops.push(op);
            }
        }
        let edge_ops: [CellOp; 6] = ops.try_into().expect("3 groups of 1 + 2 + 3 edges");
        Ok(Self { edge_ops })
    }
}

impl Serialize for CellSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
