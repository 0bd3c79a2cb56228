//! Multi-trial runs over a population-size grid.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use crfmnes::benchmarks::{preset, BenchmarkName};
use crfmnes::{default_lambda, default_max_evals, optimize};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, io_err, HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub function: BenchmarkName,
    pub dim: usize,
    pub lambdas: Vec<usize>,
    pub trials: usize,
    pub target_fval: f64,
    pub max_evals: usize,
    pub base_seed: u64,
}

impl ExperimentGrid {
    /// Five multiples of the default population size (or the fixed
    /// Rastrigin list when one exists), ten trials, `5d × 10⁴` budget.
    pub fn with_defaults(function: BenchmarkName, dim: usize) -> Self {
        Self {
            function,
            dim,
            lambdas: auto_lambdas(function, dim),
            trials: 10,
            target_fval: 1e-10,
            max_evals: default_max_evals(dim),
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::InvalidGrid(msg));
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        if self.trials == 0 {
            return bad("at least one trial is required".into());
        }
        if self.lambdas.is_empty() {
            return bad("empty λ list".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| **l < 2 || *l % 2 != 0) {
            return bad(format!("λ = {l} is not an even number ≥ 2"));
        }
        if self.target_fval.is_nan() {
            return bad("target is NaN".into());
        }
        Ok(())
    }

    pub fn seed_for(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    /// All `(λ, trial)` cells in canonical order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let lambdas: BTreeSet<usize> = self.lambdas.iter().copied().collect();
        lambdas
            .into_iter()
            .flat_map(|l| (0..self.trials).map(move |t| (l, t)))
            .collect()
    }
}

pub fn auto_lambdas(function: BenchmarkName, dim: usize) -> Vec<usize> {
    if function == BenchmarkName::Rastrigin {
        if let Some(l) = crfmnes::benchmarks::rastrigin_lambdas(dim) {
            return l;
        }
    }
    let base = default_lambda(dim);
    (1..=5).map(|k| k * base).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(with = "crate::serde_name")]
    pub function: BenchmarkName,
    pub d: usize,
    pub lambda: usize,
    pub trial: usize,
    pub seed: u64,
    pub evals_used: usize,
    pub best_fval: f64,
    pub success: bool,
    pub wall_time_s: f64,
}

impl RunRecord {
    fn cell(&self) -> (usize, usize) {
        (self.lambda, self.trial)
    }
}

pub fn run_single(grid: &ExperimentGrid, lambda: usize, trial: usize) -> Result<RunRecord> {
    let spec = preset(grid.function, grid.dim)?;
    let seed = grid.seed_for(trial);
    let config = spec
        .strategy_config()
        .with_lambda(lambda)
        .with_seed(seed)
        .with_target(grid.target_fval)
        .with_max_evals(grid.max_evals);
    let start = Instant::now();
    let result = optimize(config, spec.objective()).map_err(|source| HarnessError::Run {
        lambda,
        trial,
        source,
    })?;
    Ok(RunRecord {
        function: grid.function,
        d: grid.dim,
        lambda,
        trial,
        seed,
        evals_used: result.evals_used,
        best_fval: result.best_fval,
        success: result.reached_target,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs every `(λ, trial)` cell of the grid, in parallel over cells.
///
/// With `records_path`, each finished run is appended to that CSV file as
/// soon as it completes, and cells already present in the file are loaded
/// instead of rerun. The returned records are sorted by `(λ, trial)`.
pub fn run_experiment(grid: &ExperimentGrid, records_path: Option<&Path>) -> Result<Vec<RunRecord>> {
    grid.validate()?;
    let mut done = match records_path {
        Some(p) if p.exists() => load_records(p, grid)?,
        _ => Vec::new(),
    };
    if let Some(p) = records_path {
        // rewrite in canonical form, dropping any torn trailing line
        write_records(p, &done)?;
    }
    let finished: BTreeSet<(usize, usize)> = done.iter().map(RunRecord::cell).collect();
    let pending: Vec<(usize, usize)> = grid
        .cells()
        .into_iter()
        .filter(|c| !finished.contains(c))
        .collect();

    let sink = match records_path {
        Some(p) => Some((Mutex::new(append_writer(p)?), p)),
        None => None,
    };
    let fresh: Vec<RunRecord> = pending
        .par_iter()
        .map(|&(lambda, trial)| {
            let rec = run_single(grid, lambda, trial)?;
            if let Some((writer, path)) = &sink {
                let mut w = writer.lock().expect("record writer poisoned");
                w.serialize(&rec).map_err(csv_err(path))?;
                w.flush().map_err(io_err(path))?;
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;

    done.extend(fresh);
    done.sort_by_key(RunRecord::cell);
    if let Some(p) = records_path {
        write_records(p, &done)?;
    }
    Ok(done)
}

fn append_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(RECORD_HEADER).map_err(csv_err(path))?;
    for r in records {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

const RECORD_HEADER: [&str; 9] = [
    "function",
    "d",
    "lambda",
    "trial",
    "seed",
    "evals_used",
    "best_fval",
    "success",
    "wall_time_s",
];

/// Reads records, skipping unparsable lines (an interrupted write leaves at
/// most one). Records for other functions, dimensions or seeds are an error;
/// duplicates keep the first occurrence; cells outside the grid are dropped.
pub fn load_records(path: &Path, grid: &ExperimentGrid) -> Result<Vec<RunRecord>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out: Vec<RunRecord> = Vec::new();
    let mut seen = BTreeSet::new();
    let wanted: BTreeSet<(usize, usize)> = grid.cells().into_iter().collect();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() || line.starts_with("function,") {
            continue;
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(line.as_bytes());
        let rec: RunRecord = match rdr.deserialize().next() {
            Some(Ok(r)) => r,
            _ => continue,
        };
        if rec.function != grid.function || rec.d != grid.dim || rec.seed != grid.seed_for(rec.trial) {
            return Err(HarnessError::ResumeMismatch {
                path: path.to_path_buf(),
                detail: format!(
                    "found {} d={} seed={} for trial {}",
                    rec.function, rec.d, rec.seed, rec.trial
                ),
            });
        }
        if wanted.contains(&rec.cell()) && seen.insert(rec.cell()) {
            out.push(rec);
        }
    }
    out.sort_by_key(RunRecord::cell);
    Ok(out)
}
