use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::CellSpec;

/// Trained accuracies (percentages) of one architecture on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub arch: CellSpec,
    pub dataset: String,
    pub val_acc: f64,
    pub test_acc: f64,
}

/// Entries indexed by dataset, then by architecture index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchmarkFixture {
    by_dataset: BTreeMap<String, BTreeMap<usize, BenchmarkEntry>>,
}

impl BenchmarkFixture {
    pub fn insert(&mut self, entry: BenchmarkEntry) -> Result<()> {
        for (what, v) in [("val_acc", entry.val_acc), ("test_acc", entry.test_acc)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::OutOfRange {
                    what,
                    value: v.to_string(),
                    allowed: "[0, 100]".into(),
                });
            }
        }
        let table = self.by_dataset.entry(entry.dataset.clone()).or_default();
        match table.entry(entry.arch.index()) {
            Entry::Occupied(_) => Err(Error::Protocol(format!(
                "duplicate fixture entry for {} on {}",
                entry.arch, entry.dataset
            ))),
            Entry::Vacant(slot) => {
                slot.insert(entry);
                Ok(())
            }
        }
    }

    pub fn get(&self, arch: &CellSpec, dataset: &str) -> Option<&BenchmarkEntry> {
        self.by_dataset.get(dataset)?.get(&arch.index())
    }

    pub fn lookup(&self, arch: &CellSpec, dataset: &str) -> Result<&BenchmarkEntry> {
        self.get(arch, dataset).ok_or_else(|| Error::FixtureMiss {
            arch: arch.to_string(),
            dataset: dataset.to_string(),
        })
    }

    pub fn datasets(&self) -> impl Iterator<Item = &str> {
        self.by_dataset.keys().map(String::as_str)
    }

    /// Architectures present for `dataset`, in index order.
    pub fn architectures(&self, dataset: &str) -> Vec<CellSpec> {
        self.entries(dataset).map(|e| e.arch).collect()
    }

    pub fn entries<'a>(&'a self, dataset: &str) -> impl Iterator<Item = &'a BenchmarkEntry> + 'a {
        self.by_dataset.get(dataset).into_iter().flat_map(|t| t.values())
    }

    pub fn count(&self, dataset: &str) -> usize {
        self.by_dataset.get(dataset).map_or(0, BTreeMap::len)
    }

    pub fn len(&self) -> usize {
        self.by_dataset.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parses a JSON-lines fixture; blank lines are skipped. Errors carry the
/// 1-based line number.
pub fn load_benchmark_fixture(path: impl AsRef<Path>) -> Result<BenchmarkFixture> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut fixture = BenchmarkFixture::default();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: BenchmarkEntry = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        fixture
            .insert(entry)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
    }
    Ok(fixture)
}

pub fn write_benchmark_fixture<'a>(
    entries: impl IntoIterator<Item = &'a BenchmarkEntry>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
