use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::{RunResult, ORIGINAL};
use crate::error::{Error, Result};
use crate::metrics::{median, summarize};
use crate::reduction::Method;

/// Median/IQR of test R² for one (dataset, learner, method, rate) group.
///
/// Statistics are taken over successful runs only; `failed` counts the rest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub dataset: String,
    pub learner: String,
    pub method: String,
    pub rate: f64,
    pub runs: usize,
    pub failed: usize,
    pub test_r2_median: Option<f64>,
    pub test_r2_iqr: Option<f64>,
    pub train_r2_median: Option<f64>,
    pub train_seconds_median: Option<f64>,
    pub reduce_seconds_median: Option<f64>,
}

/// Median training time per group and its speedup over the unreduced runs
/// of the same dataset and learner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeRow {
    pub dataset: String,
    pub learner: String,
    pub method: String,
    pub rate: f64,
    pub train_seconds_median: Option<f64>,
    pub speedup: Option<f64>,
}

type Key = (String, String, usize, String, u64);

fn method_rank(m: &str) -> usize {
    if m == ORIGINAL {
        return 0;
    }
    Method::ALL
        .iter()
        .position(|x| x.as_str() == m)
        .map_or(Method::ALL.len() + 1, |p| p + 1)
}

fn key(r: &RunResult) -> Key {
    (
        r.dataset.clone(),
        r.learner.clone(),
        method_rank(&r.method),
        r.method.clone(),
        r.rate.to_bits(),
    )
}

fn groups(results: &[RunResult]) -> BTreeMap<Key, Vec<&RunResult>> {
    let mut g: BTreeMap<Key, Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        g.entry(key(r)).or_default().push(r);
    }
    g
}

pub fn report(results: &[RunResult]) -> Vec<ReportRow> {
    groups(results)
        .into_values()
        .map(|runs| {
            let ok: Vec<&RunResult> = runs.iter().copied().filter(|r| r.is_ok()).collect();
            let test: Vec<f64> = ok.iter().filter_map(|r| r.test_r2).collect();
            let summary = summarize(&test).ok();
            let first = runs[0];
            ReportRow {
                dataset: first.dataset.clone(),
                learner: first.learner.clone(),
                method: first.method.clone(),
                rate: first.rate,
                runs: runs.len(),
                failed: runs.len() - ok.len(),
                test_r2_median: summary.as_ref().map(|s| s.median),
                test_r2_iqr: summary.as_ref().map(|s| s.iqr),
                train_r2_median: median(&ok.iter().filter_map(|r| r.train_r2).collect::<Vec<_>>()),
                train_seconds_median: median(&ok.iter().map(|r| r.train_seconds).collect::<Vec<_>>()),
                reduce_seconds_median: median(&ok.iter().map(|r| r.reduce_seconds).collect::<Vec<_>>()),
            }
        })
        .collect()
}

pub fn runtime_table(rows: &[ReportRow]) -> Vec<RuntimeRow> {
    let baseline: BTreeMap<(&str, &str), f64> = rows
        .iter()
        .filter(|r| r.method == ORIGINAL)
        .filter_map(|r| Some(((r.dataset.as_str(), r.learner.as_str()), r.train_seconds_median?)))
        .collect();
    rows.iter()
        .map(|r| {
            let base = baseline.get(&(r.dataset.as_str(), r.learner.as_str()));
            RuntimeRow {
                dataset: r.dataset.clone(),
                learner: r.learner.clone(),
                method: r.method.clone(),
                rate: r.rate,
                train_seconds_median: r.train_seconds_median,
                speedup: match (base, r.train_seconds_median) {
                    (Some(&b), Some(t)) if t > 0.0 => Some(b / t),
                    _ => None,
                },
            }
        })
        .collect()
}

fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<report writer>".into(),
        source,
    })
}

pub fn write_report<W: Write>(writer: W, rows: &[ReportRow]) -> Result<()> {
    write_rows(writer, rows)
}

pub fn write_runtime<W: Write>(writer: W, rows: &[RuntimeRow]) -> Result<()> {
    write_rows(writer, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(method: &str, rate: f64, repeat: usize, test_r2: f64, secs: f64) -> RunResult {
        RunResult {
            method: method.into(),
            rate,
            repeat,
            test_r2: Some(test_r2),
            train_r2: Some(test_r2),
            train_seconds: secs,
            ..Default::default()
        }
    }

    #[test]
    fn single_result() {
        let rows = report(&[run("sampling", 0.1, 0, 0.7, 1.0)]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].test_r2_median, Some(0.7));
        assert_eq!(rows[0].test_r2_iqr, Some(0.0));
    }

    #[test]
    fn ten_run_group_by_hand() {
        // Sorted: .50 .60 .70 .80 .85 .88 .90 .91 .93 .99
        // median = (.85 + .88) / 2 = .865
        // Q1 at h = 2.25: .70 + .25·.10 = .725; Q3 at h = 6.75: .90 + .75·.01 = .9075
        let vals = [0.9, 0.5, 0.88, 0.7, 0.99, 0.6, 0.93, 0.8, 0.91, 0.85];
        let runs: Vec<RunResult> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| run("kmeans", 0.3, i, v, 1.0))
            .collect();
        let rows = report(&runs);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].test_r2_median.unwrap() - 0.865).abs() < 1e-12);
        assert!((rows[0].test_r2_iqr.unwrap() - (0.9075 - 0.725)).abs() < 1e-12);
        assert_eq!(rows[0].runs, 10);
    }

    #[test]
    fn groups_never_mix() {
        let mut runs = Vec::new();
        for (m, method) in ["sampling", "binning", "kmeans"].iter().enumerate() {
            for (k, rate) in [0.1, 0.3].iter().enumerate() {
                for rep in 0..4 {
                    let v = (m * 10 + k) as f64 / 100.0;
                    runs.push(run(method, *rate, rep, v, 1.0));
                }
            }
        }
        runs.push(RunResult {
            learner: "gp".into(),
            ..run("sampling", 0.1, 0, 0.99, 1.0)
        });
        let rows = report(&runs);
        assert_eq!(rows.len(), 7);
        for row in rows.iter().filter(|r| r.learner == "lr") {
            let members: Vec<&RunResult> = runs
                .iter()
                .filter(|r| r.method == row.method && r.rate == row.rate && r.learner == "lr")
                .collect();
            assert_eq!(row.runs, members.len());
            assert_eq!(row.test_r2_iqr, Some(0.0));
            assert_eq!(row.test_r2_median, members[0].test_r2);
        }
    }

    #[test]
    fn failures_are_counted_not_scored() {
        let mut bad = run("binning", 0.01, 1, 0.0, 0.0);
        bad.status = "failed: empty".into();
        bad.test_r2 = None;
        let rows = report(&[run("binning", 0.01, 0, 0.4, 1.0), bad]);
        assert_eq!((rows[0].runs, rows[0].failed), (2, 1));
        assert_eq!(rows[0].test_r2_median, Some(0.4));
    }

    #[test]
    fn speedup_against_original() {
        let mut runs = vec![run(ORIGINAL, 1.0, 0, 0.9, 10.0), run(ORIGINAL, 1.0, 1, 0.9, 12.0)];
        runs.push(run("sampling", 0.5, 0, 0.9, 5.5));
        let rt = runtime_table(&report(&runs));
        assert_eq!(rt[0].method, ORIGINAL);
        assert_eq!(rt[0].speedup, Some(1.0));
        assert_eq!(rt[1].speedup, Some(2.0));
    }
}
