//! Wall time of the strategy itself, measured on a constant objective.

use std::time::Instant;

use crfmnes::{CrFmNes, Error, StrategyConfig};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub d: usize,
    pub lambda: usize,
    pub iterations: usize,
    pub repeats: usize,
    pub mean_s: f64,
    pub std_s: f64,
}

/// Seconds for `iterations` ask/tell rounds. All candidates tie, so the
/// ranking is the sampling order and nothing depends on the objective.
pub fn time_iterations(dim: usize, lambda: usize, iterations: usize, seed: u64) -> Result<f64> {
    let config = StrategyConfig::new(vec![0.0; dim], 1.0)
        .with_lambda(lambda)
        .with_seed(seed)
        .with_max_evals(usize::MAX);
    let mut es = CrFmNes::new(config)?;
    let fvals = vec![0.0; lambda];
    let start = Instant::now();
    for _ in 0..iterations {
        es.ask()?;
        match es.tell(&fvals) {
            // a degenerate shape only ends adaptation early; keep timing
            Ok(()) | Err(Error::Numerical(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(start.elapsed().as_secs_f64())
}

/// Mean and sample standard deviation over `repeats` runs per dimension.
pub fn timing_bench(dims: &[usize], lambda: usize, iterations: usize, repeats: usize) -> Result<Vec<TimingRow>> {
    dims.iter()
        .map(|&d| {
            let times = (0..repeats)
                .map(|r| time_iterations(d, lambda, iterations, r as u64))
                .collect::<Result<Vec<f64>>>()?;
            let n = times.len() as f64;
            let mean = times.iter().sum::<f64>() / n;
            let var = if times.len() > 1 {
                times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            Ok(TimingRow {
                d,
                lambda,
                iterations,
                repeats,
                mean_s: mean,
                std_s: var.sqrt(),
            })
        })
        .collect()
}

pub fn write_timing_csv(rows: &[TimingRow], path: &std::path::Path) -> Result<()> {
    use crate::error::{csv_err, io_err};
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
