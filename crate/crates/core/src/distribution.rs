//! Search distribution `N(m, σ² D (I + v vᵀ) D)` and antithetic sampling.
//!
//! The covariance is never materialized on the runtime path: a draw
//! `z ~ N(0, I)` is shaped into `y = z + (√(1 + ‖v‖²) − 1)⟨z, v̄⟩ v̄`, which has
//! covariance `I + v vᵀ`, and then mapped to `x = m + σ D y`. Both steps are
//! `O(d)`.

use nalgebra::DMatrix;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// ChaCha stream used for drawing the initial `v`. Candidate sampling uses
/// stream 0 of the same seed, so the two never overlap.
pub const INIT_STREAM: u64 = 1;

/// Random source used throughout the crate.
pub type StrategyRng = ChaCha8Rng;

/// Builds the sampling generator for `seed` (stream 0).
pub fn sampling_rng(seed: u64) -> StrategyRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// State of the restricted-covariance search distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionParams {
    /// Mean, in problem units.
    pub mean: Vec<f64>,
    /// Global step size.
    pub sigma: f64,
    /// Diagonal of `D`.
    pub d_diag: Vec<f64>,
    /// Rank-one direction.
    pub v: Vec<f64>,
}

impl DistributionParams {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `det(D (I + v vᵀ) D)` via the matrix determinant lemma, in log space.
    pub fn log_det_shape(&self) -> f64 {
        let log_d: f64 = self.d_diag.iter().map(|d| d.ln()).sum();
        2.0 * log_d + dot(&self.v, &self.v).ln_1p()
    }

    /// Maps a shaped draw `y` to the problem space: `m + σ D y`.
    pub fn to_problem_space(&self, y: &[f64]) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.d_diag)
            .zip(y)
            .map(|((m, d), y)| m + self.sigma * d * y)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        for len in [self.d_diag.len(), self.v.len()] {
            if len != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: len,
                });
            }
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidStepSize(self.sigma));
        }
        if let Some((index, &value)) = self
            .d_diag
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d > 0.0))
        {
            return Err(Error::InvalidDiagonal { index, value });
        }
        if norm(&self.v) == 0.0 {
            return Err(Error::DegenerateDirection);
        }
        Ok(())
    }
}

/// Builds the initial distribution.
///
/// When `v0` is `None`, `v` is drawn with i.i.d. `N(0, 1/d)` entries from
/// stream [`INIT_STREAM`] of `seed`, so `‖v‖ ≈ 1`.
pub fn init_params(
    dim: usize,
    m0: &[f64],
    sigma0: f64,
    d0: &[f64],
    v0: Option<&[f64]>,
    seed: u64,
) -> Result<DistributionParams> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let v = match v0 {
        Some(v) => v.to_vec(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(INIT_STREAM);
            let scale = 1.0 / (dim as f64).sqrt();
            (0..dim)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
    };
    if m0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: m0.len(),
        });
    }
    let params = DistributionParams {
        mean: m0.to_vec(),
        sigma: sigma0,
        d_diag: d0.to_vec(),
        v,
    };
    params.validate()?;
    Ok(params)
}

/// Shapes a standard normal draw so that its covariance is `I + v vᵀ`.
pub fn transform_z_to_y(z: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if z.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            got: z.len(),
        });
    }
    let norm_v = norm(v);
    if norm_v == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    let vbar: Vec<f64> = v.iter().map(|x| x / norm_v).collect();
    Ok(shape(z, &vbar, stretch_factor(norm_v)))
}

/// `√(1 + ‖v‖²) − 1`, written to stay accurate for small `‖v‖`.
fn stretch_factor(norm_v: f64) -> f64 {
    let n2 = norm_v * norm_v;
    n2 / ((1.0 + n2).sqrt() + 1.0)
}

/// `z + stretch ⟨z, v̄⟩ v̄`.
fn shape(z: &[f64], vbar: &[f64], stretch: f64) -> Vec<f64> {
    let coef = stretch * dot(z, vbar);
    z.iter().zip(vbar).map(|(z, vb)| z + coef * vb).collect()
}

/// One sampled point with its standard, shaped and problem-space coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    /// Objective value, `None` until evaluated.
    pub fval: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub candidates: Vec<Candidate>,
    pub sorted: bool,
}

impl Population {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Attaches objective values in sampling order.
    pub fn assign_fitness(&mut self, fvals: &[f64]) -> Result<()> {
        if fvals.len() != self.candidates.len() {
            return Err(Error::FitnessCountMismatch {
                expected: self.candidates.len(),
                got: fvals.len(),
            });
        }
        if let Some((index, &value)) = fvals.iter().enumerate().find(|(_, f)| !f.is_finite()) {
            return Err(Error::NonFiniteFitness { index, value });
        }
        for (c, &f) in self.candidates.iter_mut().zip(fvals) {
            c.fval = Some(f);
        }
        self.sorted = false;
        Ok(())
    }

    /// Stable sort by objective value; equal values keep sampling order.
    pub fn sort(&mut self) {
        self.candidates.sort_by(|a, b| {
            let fa = a.fval.unwrap_or(f64::INFINITY);
            let fb = b.fval.unwrap_or(f64::INFINITY);
            fa.total_cmp(&fb)
        });
        self.sorted = true;
    }

    pub fn z_sorted(&self) -> Vec<&[f64]> {
        self.candidates.iter().map(|c| c.z.as_slice()).collect()
    }
}

/// Draws `lambda` antithetic candidates: `z₂ᵢ = −z₂ᵢ₋₁`.
pub fn sample_population<R: Rng + ?Sized>(
    params: &DistributionParams,
    lambda: usize,
    rng: &mut R,
) -> Result<Population> {
    if lambda < 2 || !lambda.is_multiple_of(2) {
        return Err(Error::InvalidPopulationSize(lambda));
    }
    let dim = params.dim();
    let norm_v = norm(&params.v);
    if norm_v == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    let vbar: Vec<f64> = params.v.iter().map(|x| x / norm_v).collect();
    let stretch = stretch_factor(norm_v);

    let mut candidates = Vec::with_capacity(lambda);
    for _ in 0..lambda / 2 {
        let z: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let z_neg: Vec<f64> = z.iter().map(|x| -x).collect();
        for z in [z, z_neg] {
            let y = shape(&z, &vbar, stretch);
            let x = params.to_problem_space(&y);
            candidates.push(Candidate {
                z,
                y,
                x,
                fval: None,
            });
        }
    }
    Ok(Population {
        candidates,
        sorted: false,
    })
}

/// Dense `σ² D (I + v vᵀ) D`. Test and oracle use only.
pub fn covariance_dense(params: &DistributionParams) -> DMatrix<f64> {
    let dim = params.dim();
    let s2 = params.sigma * params.sigma;
    DMatrix::from_fn(dim, dim, |i, j| {
        let inner = if i == j { 1.0 } else { 0.0 } + params.v[i] * params.v[j];
        s2 * params.d_diag[i] * inner * params.d_diag[j]
    })
}
