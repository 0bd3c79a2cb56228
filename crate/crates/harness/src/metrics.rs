//! Success-rate-weighted evaluation counts and their CSV form.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use crfmnes::BenchmarkName;
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, io_err, Result};
use crate::experiment::RunRecord;

/// One row per population size. `sp_metric` is the mean evaluation count of
/// the successful trials divided by the success rate, and is absent when no
/// trial succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    #[serde(with = "crate::serde_name")]
    pub function: BenchmarkName,
    pub d: usize,
    pub lambda: usize,
    pub trials: usize,
    pub success_rate: f64,
    pub mean_evals_success: Option<f64>,
    pub sp_metric: Option<f64>,
}

impl MetricRow {
    pub fn failed(&self) -> bool {
        self.sp_metric.is_none()
    }
}

/// Groups records by `(function, d, λ)`.
pub fn success_metric(records: &[RunRecord]) -> Vec<MetricRow> {
    let mut groups: BTreeMap<(BenchmarkName, usize, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.function, r.d, r.lambda)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((function, d, lambda), runs)| {
            let trials = runs.len();
            let evals: Vec<f64> = runs
                .iter()
                .filter(|r| r.success)
                .map(|r| r.evals_used as f64)
                .collect();
            let success_rate = evals.len() as f64 / trials as f64;
            let mean = (!evals.is_empty()).then(|| evals.iter().sum::<f64>() / evals.len() as f64);
            MetricRow {
                function,
                d,
                lambda,
                trials,
                success_rate,
                mean_evals_success: mean,
                sp_metric: mean.map(|m| m / success_rate),
            }
        })
        .collect()
}

pub fn write_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    rdr.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err(path))
}
