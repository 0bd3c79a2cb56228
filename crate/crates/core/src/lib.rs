//! Cost-reduced fast-moving natural evolution strategy (CR-FM-NES).
//!
//! Black-box minimizer whose search distribution is
//! `N(m, σ² D (I + v vᵀ) D)` with diagonal `D` and a single vector `v`.
//! All per-generation work is `O(λ d)` time and `O(λ d)` memory.
//!
//! ```
//! use crfmnes::{optimize, StrategyConfig};
//!
//! let config = StrategyConfig::new(vec![3.0; 10], 2.0)
//!     .with_seed(7)
//!     .with_target(1e-10);
//! let result = optimize(config, |x| x.iter().map(|v| v * v).sum()).unwrap();
//! assert!(result.reached_target);
//! ```

pub mod adaptation;
pub mod benchmarks;
pub mod distribution;
pub mod error;
pub mod linalg;
pub mod natgrad;
pub mod oracle;
pub mod strategy;
pub mod weights;

pub use benchmarks::{preset, BenchmarkName, BenchmarkSpec};
pub use distribution::DistributionParams;
pub use error::{Error, Result};
pub use strategy::{
    default_lambda, default_max_evals, optimize, CrFmNes, InitialDistribution, OptimizeResult,
    StateSnapshot, StrategyConfig, TerminationReason,
};
