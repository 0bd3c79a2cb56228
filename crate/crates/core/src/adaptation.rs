//! Per-iteration updates of the evolution paths, phase, mean, `v`, `D` and `σ`.

use crate::distribution::{DistributionParams, Population};
use crate::error::{Error, Result};
use crate::linalg::{axpy, norm};
use crate::natgrad::NaturalGradient;
use crate::weights::{mu_eff, WeightSet};

/// Lower bound on `‖v‖` after an update.
pub const MIN_NORM_V: f64 = 1e-8;

/// Lower bound on a diagonal entry of `D`, relative to its previous value.
pub const D_CLAMP_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Movement,
    Stagnation,
    Convergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub p_sigma: Vec<f64>,
    pub p_c: Vec<f64>,
    /// Completed iterations.
    pub t: u64,
    pub phase: Phase,
}

impl EvolutionState {
    pub fn new(dim: usize) -> Self {
        Self {
            p_sigma: vec![0.0; dim],
            p_c: vec![0.0; dim],
            t: 0,
            phase: Phase::Movement,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub c_sigma: f64,
    pub c_c: f64,
    pub eta_m: f64,
    pub eta_sigma_move: f64,
    pub eta_sigma_stag: f64,
    pub eta_sigma_conv: f64,
    pub eta_b: f64,
    pub c1: f64,
    pub c1_cma: f64,
}

impl LearningRates {
    pub fn eta_sigma(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Movement => self.eta_sigma_move,
            Phase::Stagnation => self.eta_sigma_stag,
            Phase::Convergence => self.eta_sigma_conv,
        }
    }
}

/// Default learning rates for dimension `dim` and population size `lambda`.
///
/// `c1 = (d − 5)/6 · c1_cma` is negative below `d = 5`; it is floored at zero
/// there so the rank-one term never pushes away from the evolution path.
pub fn learning_rates(dim: usize, lambda: usize) -> Result<LearningRates> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    let d = dim as f64;
    let lam = lambda as f64;
    let mu = mu_eff(lambda)?;
    let c1_cma = 2.0 / ((d + 1.3).powi(2) + mu);
    Ok(LearningRates {
        c_sigma: (mu + 2.0) / (d + mu + 5.0),
        c_c: (4.0 + mu / d) / (d + 4.0 + 2.0 * mu / d),
        eta_m: 1.0,
        eta_sigma_move: 1.0,
        eta_sigma_stag: ((0.024 * lam + 0.7 * d + 20.0) / (d + 12.0)).tanh(),
        eta_sigma_conv: 2.0 * ((0.025 * lam + 0.75 * d + 10.0) / (d + 4.0)).tanh(),
        eta_b: (((0.02 * lam).min(3.0 * d.ln()) + 5.0) / (0.23 * d + 25.0)).tanh(),
        c1: ((d - 5.0) / 6.0 * c1_cma).max(0.0),
        c1_cma,
    })
}

/// `E‖N(0, I_d)‖ ≈ √d (1 − 1/(4d) + 1/(21d²))`.
pub fn expected_norm(dim: usize) -> f64 {
    let d = dim as f64;
    d.sqrt() * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))
}

pub fn detect_phase(p_sigma_norm: f64, upsilon: f64) -> Phase {
    if p_sigma_norm >= upsilon {
        Phase::Movement
    } else if p_sigma_norm >= 0.1 * upsilon {
        Phase::Stagnation
    } else {
        Phase::Convergence
    }
}

fn path_coefficient(c: f64, mu_eff: f64) -> f64 {
    (c * (2.0 - c) * mu_eff).sqrt()
}

/// `p_σ ← (1 − c_σ) p_σ + √(c_σ(2 − c_σ) μ_eff) Σ wᵢ zᵢ` with rank weights.
pub fn update_p_sigma<Z: AsRef<[f64]>>(
    p_sigma: &mut [f64],
    z_sorted: &[Z],
    rank_weights: &WeightSet,
    c_sigma: f64,
    mu_eff: f64,
) {
    let coef = path_coefficient(c_sigma, mu_eff);
    for p in p_sigma.iter_mut() {
        *p *= 1.0 - c_sigma;
    }
    for (z, w) in z_sorted.iter().zip(&rank_weights.w) {
        axpy(coef * w, z.as_ref(), p_sigma);
    }
}

/// `Σ wᵢ (xᵢ − m) / σ`, computed as `Σ wᵢ D yᵢ`.
pub fn weighted_step(population: &Population, weights: &WeightSet, params: &DistributionParams) -> Vec<f64> {
    let mut step = vec![0.0; params.dim()];
    for (c, w) in population.candidates.iter().zip(&weights.w) {
        axpy(*w, &c.y, &mut step);
    }
    for (s, d) in step.iter_mut().zip(&params.d_diag) {
        *s *= d;
    }
    step
}

/// `p_c ← (1 − c_c) p_c + √(c_c(2 − c_c) μ_eff) Σ wᵢ (xᵢ − m)/σ`.
pub fn update_p_c(
    p_c: &mut [f64],
    population: &Population,
    weights: &WeightSet,
    params: &DistributionParams,
    c_c: f64,
    mu_eff: f64,
) -> Result<()> {
    if !population.sorted {
        return Err(Error::UnsortedPopulation);
    }
    let step = weighted_step(population, weights, params);
    let coef = path_coefficient(c_c, mu_eff);
    for (p, s) in p_c.iter_mut().zip(&step) {
        *p = (1.0 - c_c) * *p + coef * s;
    }
    Ok(())
}

/// `m ← m + η_m Σ wᵢ (xᵢ − m)`.
pub fn update_mean(
    params: &mut DistributionParams,
    population: &Population,
    weights: &WeightSet,
    eta_m: f64,
) -> Result<()> {
    if !population.sorted {
        return Err(Error::UnsortedPopulation);
    }
    let mut shift = vec![0.0; params.dim()];
    for (c, w) in population.candidates.iter().zip(&weights.w) {
        for ((s, x), m) in shift.iter_mut().zip(&c.x).zip(&params.mean) {
            *s += w * (x - m);
        }
    }
    axpy(eta_m, &shift, &mut params.mean);
    Ok(())
}

/// Additive natural-gradient step on `v` and `D`:
/// `θ ← θ + η_B Σ wᵢ ∇̃θ ln p(xᵢ) + c1 ∇̃θ ln p(m + σ p_c)`.
///
/// Diagonal entries are kept at or above [`D_CLAMP_RATIO`] times their old
/// value, and `‖v‖` at or above [`MIN_NORM_V`] along the old direction.
/// Returns how many `D` entries were clamped.
pub fn update_v_d(
    params: &mut DistributionParams,
    grad: &NaturalGradient,
    eta_b: f64,
    c1: f64,
) -> Result<usize> {
    let old_v = params.v.clone();

    for ((v, g), r) in params.v.iter_mut().zip(&grad.grad_v).zip(&grad.rank_one_v) {
        *v += eta_b * g + c1 * r;
    }

    let mut clamped = 0;
    for ((d, g), r) in params
        .d_diag
        .iter_mut()
        .zip(&grad.grad_d)
        .zip(&grad.rank_one_d)
    {
        let floor = D_CLAMP_RATIO * *d;
        let next = *d + eta_b * g + c1 * r;
        if !next.is_finite() {
            return Err(Error::Numerical("non-finite D update".into()));
        }
        if next < floor {
            clamped += 1;
            *d = floor;
        } else {
            *d = next;
        }
    }

    let new_norm = norm(&params.v);
    if !new_norm.is_finite() {
        return Err(Error::Numerical("non-finite v update".into()));
    }
    if new_norm < MIN_NORM_V {
        let dir = if new_norm > 0.0 { params.v.clone() } else { old_v };
        let n = norm(&dir);
        if n == 0.0 {
            return Err(Error::DegenerateDirection);
        }
        params.v = dir.iter().map(|x| MIN_NORM_V * x / n).collect();
    }
    Ok(clamped)
}

/// Rescales `D` so that `det(D (I + v vᵀ) D) = 1`. Returns the determinant
/// before rescaling.
pub fn normalize_d(params: &mut DistributionParams) -> Result<f64> {
    if params.d_diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Numerical("non-positive D entry".into()));
    }
    let log_det = params.log_det_shape();
    if !log_det.is_finite() {
        return Err(Error::Numerical(format!("log det A = {log_det}")));
    }
    let divisor = (log_det / (2.0 * params.dim() as f64)).exp();
    for d in params.d_diag.iter_mut() {
        *d /= divisor;
    }
    Ok(log_det.exp())
}

/// `σ ← σ exp(η_σ/2 · G_σ)`.
pub fn update_sigma(sigma: f64, g_sigma: f64, eta_sigma: f64) -> Result<f64> {
    let next = sigma * (0.5 * eta_sigma * g_sigma).exp();
    if !(next.is_finite() && next > 0.0) {
        return Err(Error::Numerical(format!("σ became {next}")));
    }
    Ok(next)
}
