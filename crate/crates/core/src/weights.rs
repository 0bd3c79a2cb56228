//! Rank-based and distance-based recombination weights.

use crate::error::{Error, Result};
use crate::linalg::norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Rank,
    Distance,
}

/// Recombination weights indexed by rank (best first). They sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub w: Vec<f64>,
    pub kind: WeightKind,
}

impl WeightSet {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightConstants {
    pub mu_eff: f64,
    pub alpha_dist: f64,
}

impl WeightConstants {
    pub fn new(dim: usize, lambda: usize) -> Result<Self> {
        Ok(Self {
            mu_eff: mu_eff(lambda)?,
            alpha_dist: alpha_dist(dim, lambda)?,
        })
    }
}

fn check_lambda(lambda: usize) -> Result<()> {
    if lambda < 2 || !lambda.is_multiple_of(2) {
        return Err(Error::InvalidPopulationSize(lambda));
    }
    Ok(())
}

/// Unnormalized rank utilities `max(0, ln(λ/2 + 1) − ln i)`.
fn rank_utilities(lambda: usize) -> Vec<f64> {
    let top = (lambda as f64 / 2.0 + 1.0).ln();
    (1..=lambda)
        .map(|i| (top - (i as f64).ln()).max(0.0))
        .collect()
}

fn normalize_and_center(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    let shift = 1.0 / raw.len() as f64;
    raw.iter().map(|w| w / total - shift).collect()
}

pub fn rank_weights(lambda: usize) -> Result<WeightSet> {
    check_lambda(lambda)?;
    Ok(WeightSet {
        w: normalize_and_center(&rank_utilities(lambda)),
        kind: WeightKind::Rank,
    })
}

/// Variance-effective selection mass of the rank weights.
pub fn mu_eff(lambda: usize) -> Result<f64> {
    let w = rank_weights(lambda)?;
    let shift = 1.0 / lambda as f64;
    let sq: f64 = w.w.iter().map(|w| (w + shift).powi(2)).sum();
    Ok(1.0 / sq)
}

/// Rank weights boosted by `exp(α ‖zᵢ‖)`; `z_sorted` is in rank order.
pub fn distance_weights<Z: AsRef<[f64]>>(z_sorted: &[Z], alpha: f64) -> Result<WeightSet> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let lambda = z_sorted.len();
    check_lambda(lambda)?;
    let rank = rank_utilities(lambda);
    let exponents: Vec<f64> = z_sorted.iter().map(|z| alpha * norm(z.as_ref())).collect();
    // exp(α‖z‖) can overflow in high dimension; a common factor cancels in
    // the normalization, so shift by the largest exponent that carries weight.
    let offset = exponents
        .iter()
        .zip(&rank)
        .filter(|(_, r)| **r > 0.0)
        .map(|(e, _)| *e)
        .fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = rank
        .iter()
        .zip(&exponents)
        .map(|(r, e)| if *r > 0.0 { r * (e - offset).exp() } else { 0.0 })
        .collect();
    Ok(WeightSet {
        w: normalize_and_center(&raw),
        kind: WeightKind::Distance,
    })
}

/// Positive root of `(1 + x²) exp(x²/2) / 0.24 − 10 − d`.
///
/// Newton's method from `x = 1` on the logarithm of the defining equation,
/// `ln(1 + x²) + x²/2 − ln(0.24 (10 + d))`, which has the same root, is convex
/// and increasing on `x > 0`, and does not overflow for large `d`.
pub fn h_inv(dim: usize) -> Result<f64> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    const MAX_ITER: usize = 100;
    let target = (0.24 * (10.0 + dim as f64)).ln();
    let mut x = 1.0f64;
    for _ in 0..MAX_ITER {
        let g = (x * x).ln_1p() + 0.5 * x * x - target;
        let slope = 2.0 * x / (1.0 + x * x) + x;
        let step = g / slope;
        x -= step;
        if step.abs() <= 1e-15 * x.abs() {
            if h_inv_residual(x, dim).abs() <= 1e-10 * (10.0 + dim as f64) {
                return Ok(x);
            }
            break;
        }
    }
    Err(Error::NoConvergence(MAX_ITER))
}

/// Residual of the defining equation of [`h_inv`].
pub fn h_inv_residual(x: f64, dim: usize) -> f64 {
    (1.0 + x * x) * (0.5 * x * x).exp() / 0.24 - 10.0 - dim as f64
}

/// Distance-weight exponent `α = h_inv(d) · min(1, √(λ/d))`.
pub fn alpha_dist(dim: usize, lambda: usize) -> Result<f64> {
    let h = h_inv(dim)?;
    Ok(h * (lambda as f64 / dim as f64).sqrt().min(1.0))
}
