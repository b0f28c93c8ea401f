use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{summarize_runs, RunRecord};
use crate::stats::welch_t_test;

/// One (method, dataset, split) cell of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub dataset: String,
    pub split: String,
    pub n_runs: usize,
    pub n_skipped: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Two-sided Welch p-value against the random baseline.
    pub p_vs_random: Option<f64>,
    /// One-sided p-value for "mean above the random baseline".
    pub p_greater_vs_random: Option<f64>,
}

fn accuracies(records: &[&RunRecord], split: &str) -> Vec<f64> {
    records
        .iter()
        .filter_map(|r| if split == "val" { r.trained_val } else { r.trained_test })
        .collect()
}

/// Population mean and std per (method, dataset, split). Groups are sorted
/// by run id first, so the result does not depend on record order.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.dataset.clone(), r.method.clone())).or_default().push(r);
    }
    for g in groups.values_mut() {
        g.sort_by(|a, b| {
            a.run_id
                .cmp(&b.run_id)
                .then_with(|| a.trained_test.unwrap_or(f64::NAN).total_cmp(&b.trained_test.unwrap_or(f64::NAN)))
        });
    }
    let mut rows = Vec::new();
    for ((dataset, method), group) in &groups {
        let owned: Vec<RunRecord> = group.iter().map(|r| (*r).clone()).collect();
        let s = summarize_runs(&owned);
        let random = groups.get(&(dataset.clone(), "random".to_string()));
        for (split, m) in [("val", s.val), ("test", s.test)] {
            let test = match random {
                Some(rnd) if method != "random" => {
                    welch_t_test(&accuracies(group, split), &accuracies(rnd, split)).ok()
                }
                _ => None,
            };
            rows.push(SummaryRow {
                method: method.clone(),
                dataset: dataset.clone(),
                split: split.into(),
                n_runs: s.n_runs,
                n_skipped: s.n_skipped,
                mean: m.map(|m| m.mean),
                std: m.map(|m| m.std),
                p_vs_random: test.map(|t| t.p_value),
                p_greater_vs_random: test.map(|t| t.p_greater()),
            });
        }
    }
    rows
}

/// `x` with 6 significant digits: fixed notation for magnitudes in
/// `[1e-4, 1e15)`, scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').map_or(0, |i| i + 1)..].parse().unwrap_or(0);
    if (-4..15).contains(&exp) {
        format!("{x:.*}", (5 - exp).max(0) as usize)
    } else {
        sci
    }
}

const HEADER: [&str; 9] = [
    "method",
    "dataset",
    "split",
    "n_runs",
    "n_skipped",
    "mean",
    "std",
    "p_vs_random",
    "p_greater_vs_random",
];

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

pub fn write_summary_csv(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.dataset.clone(),
            r.split.clone(),
            r.n_runs.to_string(),
            r.n_skipped.to_string(),
            opt(r.mean),
            opt(r.std),
            opt(r.p_vs_random),
            opt(r.p_greater_vs_random),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let mut rd = csv::Reader::from_path(path)?;
    if rd.headers()?.iter().ne(HEADER) {
        return Err(Error::format(path, "unexpected summary header"));
    }
    let num = |s: &str, line: u64| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| Error::format(path, format!("line {line}: bad number {s:?}")))
    };
    let count = |s: &str, line: u64| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::format(path, format!("line {line}: bad count {s:?}")))
    };
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(SummaryRow {
            method: rec[0].to_string(),
            dataset: rec[1].to_string(),
            split: rec[2].to_string(),
            n_runs: count(&rec[3], line)?,
            n_skipped: count(&rec[4], line)?,
            mean: num(&rec[5], line)?,
            std: num(&rec[6], line)?,
            p_vs_random: num(&rec[7], line)?,
            p_greater_vs_random: num(&rec[8], line)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::search_space::CellSpec;

    fn record(method: &str, run_id: u64, test: Option<f64>) -> RunRecord {
        RunRecord {
            run_id,
            method: method.into(),
            dataset: "cifar10".into(),
            batch_seed: None,
            candidates: vec![],
            selected: test.map(|_| CellSpec::from_index(run_id as usize).unwrap()),
            trained_val: test.map(|t| t - 1.0),
            trained_test: test,
        }
    }

    fn records() -> Vec<RunRecord> {
        let mut s = Stream::new(3);
        let mut out = Vec::new();
        for i in 0..30 {
            out.push(record("cv_u", i, (i != 4).then(|| 90.0 + s.next_f64() * 3.0)));
            out.push(record("random", i, Some(60.0 + s.next_f64() * 30.0)));
        }
        out
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(86.61234567), "86.6123");
        assert_eq!(format_sig(0.000123456789), "0.000123457");
        assert_eq!(format_sig(9.9999996), "10.0000");
        assert_eq!(format_sig(1.5e-30), "1.50000e-30");
        assert_eq!(format_sig(-2.0), "-2.00000");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn single_record() {
        let rows = summarize(&[record("cv_u", 0, Some(91.5))]);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[1].mean, rows[1].std), (Some(91.5), Some(0.0)));
        assert_eq!(rows[1].p_vs_random, None);
    }

    #[test]
    fn matches_harness_summary_and_flags_skips() {
        let rs = records();
        let rows = summarize(&rs);
        let cv: Vec<RunRecord> = rs.iter().filter(|r| r.method == "cv_u").cloned().collect();
        let s = summarize_runs(&cv);
        let row = rows.iter().find(|r| r.method == "cv_u" && r.split == "test").unwrap();
        assert_eq!(row.mean, s.test.map(|m| m.mean));
        assert_eq!(row.std, s.test.map(|m| m.std));
        assert_eq!((row.n_runs, row.n_skipped), (30, 1));
        assert!(row.p_greater_vs_random.unwrap() < 1e-6);
    }

    #[test]
    fn order_independent() {
        let mut rs = records();
        let a = summarize(&rs);
        Stream::new(8).shuffle(&mut rs);
        assert_eq!(summarize(&rs), a);
    }

    #[test]
    fn empty_table_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_summary_csv(&summarize(&[]), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 1);
        assert!(read_summary_csv(&p).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let rows = summarize(&records());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_summary_csv(&rows, &p).unwrap();
        let back = read_summary_csv(&p).unwrap();
        let round = |x: Option<f64>| x.map(|v| format_sig(v).parse::<f64>().unwrap());
        let expected: Vec<SummaryRow> = rows
            .into_iter()
            .map(|r| SummaryRow {
                mean: round(r.mean),
                std: round(r.std),
                p_vs_random: round(r.p_vs_random),
                p_greater_vs_random: round(r.p_greater_vs_random),
                ..r
            })
            .collect();
        assert_eq!(back, expected);
    }
}
