//! Benchmark objectives and their initial-distribution presets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::strategy::StrategyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BenchmarkName {
    Sphere,
    KTablet,
    Ellipsoid,
    Rosenbrock,
    Rastrigin,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 5] = [
        BenchmarkName::Sphere,
        BenchmarkName::KTablet,
        BenchmarkName::Ellipsoid,
        BenchmarkName::Rosenbrock,
        BenchmarkName::Rastrigin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::Sphere => "sphere",
            BenchmarkName::KTablet => "ktablet",
            BenchmarkName::Ellipsoid => "ellipsoid",
            BenchmarkName::Rosenbrock => "rosenbrock",
            BenchmarkName::Rastrigin => "rastrigin",
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownBenchmark(pub String);

impl fmt::Display for UnknownBenchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown benchmark '{}' (expected one of sphere, ktablet, ellipsoid, rosenbrock, rastrigin)",
            self.0
        )
    }
}

impl std::error::Error for UnknownBenchmark {}

impl FromStr for BenchmarkName {
    type Err = UnknownBenchmark;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "sphere" => Ok(BenchmarkName::Sphere),
            "ktablet" | "tablet" => Ok(BenchmarkName::KTablet),
            "ellipsoid" => Ok(BenchmarkName::Ellipsoid),
            "rosenbrock" => Ok(BenchmarkName::Rosenbrock),
            "rastrigin" => Ok(BenchmarkName::Rastrigin),
            _ => Err(UnknownBenchmark(s.to_string())),
        }
    }
}

/// A benchmark instance with its initial distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub name: BenchmarkName,
    pub dim: usize,
    /// Number of unscaled leading coordinates of k-Tablet, `⌊d/4⌋`.
    pub k: usize,
    pub init_mean: Vec<f64>,
    pub init_sigma: f64,
}

impl BenchmarkSpec {
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        evaluate(self, x)
    }

    /// Strategy configuration starting from this benchmark's preset.
    pub fn strategy_config(&self) -> StrategyConfig {
        StrategyConfig::new(self.init_mean.clone(), self.init_sigma)
    }

    /// Objective as a plain closure. Panics on a dimension mismatch.
    pub fn objective(&self) -> impl Fn(&[f64]) -> f64 + Send + Sync + '_ {
        move |x| self.evaluate(x).expect("dimension checked by caller")
    }
}

/// Preset initial distribution: `m = (3, …, 3)`, `σ = 2` everywhere except
/// Rosenbrock, which starts at `m = 0`, `σ = 0.5`.
pub fn preset(name: BenchmarkName, dim: usize) -> Result<BenchmarkSpec> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let (m, sigma) = match name {
        BenchmarkName::Rosenbrock => (0.0, 0.5),
        _ => (3.0, 2.0),
    };
    Ok(BenchmarkSpec {
        name,
        dim,
        k: dim / 4,
        init_mean: vec![m; dim],
        init_sigma: sigma,
    })
}

pub fn evaluate(spec: &BenchmarkSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            got: x.len(),
        });
    }
    Ok(match spec.name {
        BenchmarkName::Sphere => sphere(x),
        BenchmarkName::KTablet => ktablet(x, spec.k),
        BenchmarkName::Ellipsoid => ellipsoid(x),
        BenchmarkName::Rosenbrock => rosenbrock(x),
        BenchmarkName::Rastrigin => rastrigin(x),
    })
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn ktablet(x: &[f64], k: usize) -> f64 {
    let k = k.min(x.len());
    let head: f64 = x[..k].iter().map(|v| v * v).sum();
    let tail: f64 = x[k..].iter().map(|v| (100.0 * v).powi(2)).sum();
    head + tail
}

/// `Σ (1000^((i−1)/(d−1)) xᵢ)²`; reduces to `x₁²` at `d = 1`.
pub fn ellipsoid(x: &[f64]) -> f64 {
    let d = x.len();
    if d == 1 {
        return x[0] * x[0];
    }
    let denom = (d - 1) as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| (1000f64.powf(i as f64 / denom) * v).powi(2))
        .sum()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

/// Population sizes used on Rastrigin for the dimensions 80, 200, 600 and
/// 1000, each rounded up to an even number.
pub fn rastrigin_lambdas(dim: usize) -> Option<Vec<usize>> {
    let multipliers: [f64; 5] = match dim {
        80 => [20.0, 22.0, 24.0, 26.0, 28.0],
        200 => [12.0, 14.0, 16.0, 18.0, 20.0],
        600 => [6.0, 7.0, 8.0, 9.0, 10.0],
        1000 => [4.0, 4.5, 5.0, 5.5, 6.0],
        _ => return None,
    };
    Some(
        multipliers
            .iter()
            .map(|m| {
                let lam = (m * dim as f64).ceil() as usize;
                lam + lam % 2
            })
            .collect(),
    )
}
