use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed widths for each hidden layer.
pub const MLP_UNITS: [usize; 12] = [8, 16, 24, 32, 56, 64, 96, 128, 256, 512, 1024, 2048];

/// Two-hidden-layer fully connected network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MlpSpec {
    pub units_layer1: usize,
    pub units_layer2: usize,
}

impl MlpSpec {
    pub fn new(units_layer1: usize, units_layer2: usize) -> Result<Self> {
        for u in [units_layer1, units_layer2] {
            if !MLP_UNITS.contains(&u) {
                return Err(Error::OutOfRange {
                    what: "hidden units",
                    value: u.to_string(),
                    allowed: format!("{MLP_UNITS:?}"),
                });
            }
        }
        Ok(Self {
            units_layer1,
            units_layer2,
        })
    }
}

/// All 144 grid points in lexicographic order.
pub fn enumerate_mlp_space() -> Vec<MlpSpec> {
    MLP_UNITS
        .iter()
        .flat_map(|&a| {
            MLP_UNITS.iter().map(move |&b| MlpSpec {
                units_layer1: a,
                units_layer2: b,
            })
        })
        .collect()
}

impl fmt::Display for MlpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.units_layer1, self.units_layer2)
    }
}

impl FromStr for MlpSpec {
    type Err = Error;

    /// Parses `"W1,W2"`.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim().parse::<usize>().map_err(|_| Error::Parse {
                token: t.to_string(),
                reason: "expected an integer width".into(),
            })
        };
        match s.split(',').collect::<Vec<_>>().as_slice() {
            [a, b] => MlpSpec::new(parse(a)?, parse(b)?),
            _ => Err(Error::Parse {
                token: s.to_string(),
                reason: "expected two comma-separated widths".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_144_points() {
        let all = enumerate_mlp_space();
        assert_eq!(all.len(), 144);
        assert_eq!(all[0], MlpSpec::new(8, 8).unwrap());
        assert_eq!(all.iter().filter(|m| **m == MlpSpec::new(56, 1024).unwrap()).count(), 1);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_off_grid_widths() {
        assert!(MlpSpec::new(10, 8).is_err());
        assert!("8,4096".parse::<MlpSpec>().is_err());
        assert_eq!("64,128".parse::<MlpSpec>().unwrap(), MlpSpec::new(64, 128).unwrap());
    }
}
