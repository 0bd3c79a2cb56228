//! Natural gradients of `ln p` with respect to `v` and the diagonal of `D`.
//!
//! The Fisher block of `(v, D)` is inverted implicitly with the five-step
//! `s`/`t` procedure below. The off-diagonal `v`–`D` blocks are scaled by
//! `α_vd ≤ 1`, which keeps the diagonal matrix `H` of step 4 positive, and the
//! Schur complement reduces to `D⁻¹ (H + b v̄̄ v̄̄ᵀ) D⁻¹`. Its inverse is applied
//! with Sherman–Morrison, so everything is `O(d)` per sample.

use crate::distribution::{DistributionParams, Population};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::weights::WeightSet;

/// Above this `‖v‖²` the step-3 and step-4 coefficients lose all precision.
pub const MAX_NORM_V2: f64 = 1e150;

/// Quantities shared by every sample of one iteration. They depend on `v`
/// only.
#[derive(Debug, Clone, PartialEq)]
pub struct VdGeometry {
    pub norm_v: f64,
    pub norm_v2: f64,
    /// `v / ‖v‖`
    pub vbar: Vec<f64>,
    /// `v̄ ⊙ v̄`
    pub vbarbar: Vec<f64>,
    /// `1 + ‖v‖²`
    pub gamma_v: f64,
    pub alpha_vd: f64,
    pub b: f64,
    /// Diagonal of `H = 2I − (b + 2α_vd²) V̄²`.
    pub h_diag: Vec<f64>,
    /// `H⁻¹ v̄̄`
    inv_h_vbarbar: Vec<f64>,
    /// `b / (1 + b ⟨v̄̄, H⁻¹ v̄̄⟩)`
    sm_coef: f64,
}

impl VdGeometry {
    pub fn new(v: &[f64]) -> Result<Self> {
        let norm_v2 = dot(v, v);
        if norm_v2 == 0.0 {
            return Err(Error::DegenerateDirection);
        }
        if !(norm_v2 <= MAX_NORM_V2) {
            return Err(Error::Numerical(format!("‖v‖² = {norm_v2:e} overflows")));
        }
        let norm_v = norm_v2.sqrt();
        let vbar: Vec<f64> = v.iter().map(|x| x / norm_v).collect();
        let vbarbar: Vec<f64> = vbar.iter().map(|x| x * x).collect();
        let gamma_v = 1.0 + norm_v2;
        let gamma_vd = gamma_v.powf(-0.5);
        let norm_v4 = norm_v2 * norm_v2;
        let max_vbarbar = vbarbar.iter().copied().fold(0.0, f64::max);
        let alpha_vd = ((norm_v4 + (2.0 - gamma_vd) * gamma_v / max_vbarbar).sqrt()
            / (2.0 + norm_v2))
            .min(1.0);
        let a2 = alpha_vd * alpha_vd;
        let b = -(1.0 - a2) * norm_v4 / gamma_v + 2.0 * a2;
        let h_diag: Vec<f64> = vbarbar.iter().map(|vv| 2.0 - (b + 2.0 * a2) * vv).collect();
        let inv_h_vbarbar: Vec<f64> = vbarbar.iter().zip(&h_diag).map(|(v, h)| v / h).collect();
        let sm_coef = b / (1.0 + b * dot(&vbarbar, &inv_h_vbarbar));
        if !(sm_coef.is_finite() && alpha_vd.is_finite()) {
            return Err(Error::Numerical("non-finite Fisher coefficients".into()));
        }
        Ok(Self {
            norm_v,
            norm_v2,
            vbar,
            vbarbar,
            gamma_v,
            alpha_vd,
            b,
            h_diag,
            inv_h_vbarbar,
            sm_coef,
        })
    }

    pub fn dim(&self) -> usize {
        self.vbar.len()
    }

    /// `1 + b ⟨v̄̄, H⁻¹ v̄̄⟩`, the Sherman–Morrison denominator.
    pub fn sherman_morrison_denominator(&self) -> f64 {
        1.0 + self.b * dot(&self.vbarbar, &self.inv_h_vbarbar)
    }

    /// Step 4: `s ← (H + b v̄̄ v̄̄ᵀ)⁻¹ s`, in place.
    pub fn solve_step4(&self, s: &mut [f64]) {
        let proj = dot(s, &self.inv_h_vbarbar);
        for ((s, h), u) in s.iter_mut().zip(&self.h_diag).zip(&self.inv_h_vbarbar) {
            *s = *s / h - self.sm_coef * proj * u;
        }
    }

    /// `(H + b v̄̄ v̄̄ᵀ) s`. Used to check the step-4 solve.
    pub fn apply_step4_matrix(&self, s: &[f64]) -> Vec<f64> {
        let proj = self.b * dot(&self.vbarbar, s);
        s.iter()
            .zip(&self.h_diag)
            .zip(&self.vbarbar)
            .map(|((s, h), vv)| h * s + proj * vv)
            .collect()
    }

    /// Runs steps 1–5 for a shaped point `y = D⁻¹(x − m)/σ`, writing `s` and
    /// `t` into the provided buffers.
    pub fn st_from_y(&self, y: &[f64], s: &mut [f64], t: &mut [f64]) {
        let nv2 = self.norm_v2;
        let gamma = self.gamma_v;
        let alpha = self.alpha_vd;
        let yv = dot(y, &self.vbar);

        // 1
        let c1 = nv2 * yv / gamma;
        for ((s, y), vb) in s.iter_mut().zip(y).zip(&self.vbar) {
            *s = y * y - c1 * y * vb - 1.0;
        }
        // 2
        let c2 = 0.5 * (yv * yv + gamma);
        for ((t, y), vb) in t.iter_mut().zip(y).zip(&self.vbar) {
            *t = yv * y - c2 * vb;
        }
        // 3
        let vt = dot(&self.vbar, t);
        let scale = alpha / gamma;
        for (((s, t), vb), vv) in s.iter_mut().zip(t.iter()).zip(&self.vbar).zip(&self.vbarbar) {
            *s -= scale * ((2.0 + nv2) * vb * t - nv2 * vt * vv);
        }
        // 4
        self.solve_step4(s);
        // 5
        let svv = dot(s, &self.vbarbar);
        for ((t, s), vb) in t.iter_mut().zip(s.iter()).zip(&self.vbar) {
            *t -= alpha * ((2.0 + nv2) * vb * s - svv * vb);
        }
    }
}

/// Result of the `s`/`t` procedure for one point, with the shared
/// quantities it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct StWorkspace {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub vbar: Vec<f64>,
    pub vbarbar: Vec<f64>,
    pub gamma_v: f64,
    pub alpha_vd: f64,
    pub b: f64,
    pub h_diag: Vec<f64>,
}

impl StWorkspace {
    /// `∇̃_v ln p = ‖v‖⁻¹ t`
    pub fn grad_v(&self, norm_v: f64) -> Vec<f64> {
        self.t.iter().map(|t| t / norm_v).collect()
    }

    /// `∇̃_D ln p = D s`
    pub fn grad_d(&self, d_diag: &[f64]) -> Vec<f64> {
        self.s.iter().zip(d_diag).map(|(s, d)| d * s).collect()
    }
}

/// Computes `s` and `t` for a problem-space point `x`.
pub fn compute_st(x: &[f64], params: &DistributionParams) -> Result<StWorkspace> {
    let dim = params.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    let geom = VdGeometry::new(&params.v)?;
    let y = shaped_coordinates(x, params);
    let mut s = vec![0.0; dim];
    let mut t = vec![0.0; dim];
    geom.st_from_y(&y, &mut s, &mut t);
    if !s.iter().chain(&t).all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite s/t".into()));
    }
    Ok(StWorkspace {
        s,
        t,
        vbar: geom.vbar,
        vbarbar: geom.vbarbar,
        gamma_v: geom.gamma_v,
        alpha_vd: geom.alpha_vd,
        b: geom.b,
        h_diag: geom.h_diag,
    })
}

/// `D⁻¹ (x − m) / σ`
pub fn shaped_coordinates(x: &[f64], params: &DistributionParams) -> Vec<f64> {
    x.iter()
        .zip(&params.mean)
        .zip(&params.d_diag)
        .map(|((x, m), d)| (x - m) / d / params.sigma)
        .collect()
}

/// Weighted natural gradient plus the separately kept rank-one term.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalGradient {
    /// `Σ wᵢ ∇̃_v ln p(xᵢ)`
    pub grad_v: Vec<f64>,
    /// `Σ wᵢ ∇̃_D ln p(xᵢ)`
    pub grad_d: Vec<f64>,
    /// `∇̃_v ln p(m + σ p_c)`
    pub rank_one_v: Vec<f64>,
    /// `∇̃_D ln p(m + σ p_c)`
    pub rank_one_d: Vec<f64>,
    pub g_sigma: f64,
}

impl NaturalGradient {
    pub fn is_finite(&self) -> bool {
        self.grad_v
            .iter()
            .chain(&self.grad_d)
            .chain(&self.rank_one_v)
            .chain(&self.rank_one_d)
            .all(|v| v.is_finite())
            && self.g_sigma.is_finite()
    }
}

/// Natural gradient from a sorted population, evaluated at the parameters
/// the population was sampled from. `pc_point` is `m + σ p_c`.
pub fn natgrad_vd(
    population: &Population,
    weights: &WeightSet,
    params: &DistributionParams,
    pc_point: &[f64],
) -> Result<NaturalGradient> {
    check_sorted(population, weights)?;
    let ys: Vec<Vec<f64>> = population
        .candidates
        .iter()
        .map(|c| shaped_coordinates(&c.x, params))
        .collect();
    let pc_y = shaped_coordinates(pc_point, params);
    let mut grad = natgrad_from_shaped(ys.iter().map(Vec::as_slice), weights, params, &pc_y)?;
    grad.g_sigma = grad_sigma(population, weights, params.dim())?;
    Ok(grad)
}

/// Same as [`natgrad_vd`] but from already-shaped points `yᵢ` and
/// `D⁻¹ p_c`. Uses `O(d)` scratch regardless of the population size.
/// `g_sigma` is left at zero.
pub fn natgrad_from_shaped<'a, I>(
    ys: I,
    weights: &WeightSet,
    params: &DistributionParams,
    pc_y: &[f64],
) -> Result<NaturalGradient>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let dim = params.dim();
    let geom = VdGeometry::new(&params.v)?;
    let mut s = vec![0.0; dim];
    let mut t = vec![0.0; dim];
    let mut acc_s = vec![0.0; dim];
    let mut acc_t = vec![0.0; dim];
    for (y, &w) in ys.into_iter().zip(&weights.w) {
        if w == 0.0 {
            continue;
        }
        geom.st_from_y(y, &mut s, &mut t);
        axpy(w, &s, &mut acc_s);
        axpy(w, &t, &mut acc_t);
    }
    let inv_norm = 1.0 / geom.norm_v;
    let grad_v = acc_t.iter().map(|t| t * inv_norm).collect();
    let grad_d = acc_s.iter().zip(&params.d_diag).map(|(s, d)| d * s).collect();

    geom.st_from_y(pc_y, &mut s, &mut t);
    let rank_one_v = t.iter().map(|t| t * inv_norm).collect();
    let rank_one_d = s.iter().zip(&params.d_diag).map(|(s, d)| d * s).collect();

    let grad = NaturalGradient {
        grad_v,
        grad_d,
        rank_one_v,
        rank_one_d,
        g_sigma: 0.0,
    };
    if !grad.is_finite() {
        return Err(Error::Numerical("non-finite natural gradient".into()));
    }
    Ok(grad)
}

/// `Tr(Σ wᵢ (zᵢ zᵢᵀ − I)) / d`, without forming any matrix.
pub fn grad_sigma(population: &Population, weights: &WeightSet, dim: usize) -> Result<f64> {
    check_sorted(population, weights)?;
    let d = dim as f64;
    Ok(population
        .candidates
        .iter()
        .zip(&weights.w)
        .map(|(c, w)| w * (dot(&c.z, &c.z) - d))
        .sum::<f64>()
        / d)
}

fn check_sorted(population: &Population, weights: &WeightSet) -> Result<()> {
    if !population.sorted {
        return Err(Error::UnsortedPopulation);
    }
    if weights.len() != population.len() {
        return Err(Error::DimensionMismatch {
            expected: population.len(),
            got: weights.len(),
        });
    }
    Ok(())
}
