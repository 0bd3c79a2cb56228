//! Dense brute-force counterparts of the `O(d)` fast paths.
//!
//! Nothing here is used by the optimizer. These routines build full `d × d`
//! (or `2d × 2d`) matrices and are meant for small `d` in tests:
//!
//! * [`schur_lhs_dense`] / [`schur_rhs_dense`]: the Schur complement of the
//!   `v`-block of the `α_vd`-scaled Fisher matrix, once as the difference of
//!   the two expanded bracket terms and once in the closed form
//!   `D⁻¹ (H + b v̄̄ v̄̄ᵀ) D⁻¹` that the fast step-4 solve relies on.
//! * [`dense_natgrad`]: the natural gradient of `ln p(x)` w.r.t. `(v, D)`
//!   from a Fisher matrix obtained as the finite-difference Hessian of the
//!   Gaussian KL divergence, solved densely against a finite-difference
//!   score.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::distribution::{covariance_dense, DistributionParams};
use crate::natgrad::VdGeometry;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("dense Fisher system is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error(transparent)]
    Core(#[from] crate::Error),
}

/// Largest condition number accepted by [`dense_natgrad`].
pub const MAX_CONDITION: f64 = 1e12;

/// Relative step of the KL-Hessian differences (before halving for the
/// Richardson pass).
pub const KL_HESSIAN_STEP: f64 = 2e-3;

/// Step of the central differences of the log-density.
pub const SCORE_STEP: f64 = 1e-6;

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

fn inv_diag(v: &[f64]) -> DMatrix<f64> {
    let inv: Vec<f64> = v.iter().map(|x| 1.0 / x).collect();
    diag(&inv)
}

/// `I_{D,D} − α² I_{D,v} I_{v,v}⁻¹ I_{v,D}`, as the difference of the two
/// expanded terms:
///
/// `γ⁻¹ D⁻¹ [2γ I + ‖v‖² V² − V v vᵀ V] D⁻¹`
/// `− α² γ⁻¹ D⁻¹ V̄ [(2 + ‖v‖²)² I − (2 + 2‖v‖² + ‖v‖⁴) v̄ v̄ᵀ] V̄ D⁻¹`.
pub fn schur_lhs_dense(v: &[f64], d_diag: &[f64], alpha_vd: f64) -> DMatrix<f64> {
    let dim = v.len();
    let vv = DVector::from_column_slice(v);
    let nv2 = vv.norm_squared();
    let nv = nv2.sqrt();
    let gamma = 1.0 + nv2;
    let eye = DMatrix::<f64>::identity(dim, dim);
    let big_v = diag(v);
    let big_vbar = &big_v / nv;
    let vbar = &vv / nv;
    let d_inv = inv_diag(d_diag);

    let inner1 = &eye * (2.0 * gamma) + &big_v * &big_v * nv2 - &big_v * &vv * vv.transpose() * &big_v;
    let term1 = &d_inv * inner1 * &d_inv / gamma;

    let inner2 = &eye * (2.0 + nv2).powi(2) - &vbar * vbar.transpose() * (2.0 + 2.0 * nv2 + nv2 * nv2);
    let term2 = &d_inv * &big_vbar * inner2 * &big_vbar * &d_inv * (alpha_vd * alpha_vd / gamma);

    term1 - term2
}

/// `D⁻¹ (H + b v̄̄ v̄̄ᵀ) D⁻¹` with `b = −(1 − α²)‖v‖⁴/γ + 2α²` and
/// `H = 2I − (b + 2α²) V̄²`.
pub fn schur_rhs_dense(v: &[f64], d_diag: &[f64], alpha_vd: f64) -> DMatrix<f64> {
    let (b, h) = schur_rhs_coefficients(v, alpha_vd);
    let nv2: f64 = v.iter().map(|x| x * x).sum();
    let vbarbar = DVector::from_iterator(v.len(), v.iter().map(|x| x * x / nv2));
    let d_inv = inv_diag(d_diag);
    let inner = diag(h.as_slice()) + &vbarbar * vbarbar.transpose() * b;
    &d_inv * inner * &d_inv
}

/// `(b, diag(H))` for the closed form.
pub fn schur_rhs_coefficients(v: &[f64], alpha_vd: f64) -> (f64, DVector<f64>) {
    let nv2: f64 = v.iter().map(|x| x * x).sum();
    let gamma = 1.0 + nv2;
    let a2 = alpha_vd * alpha_vd;
    let b = -(1.0 - a2) * nv2 * nv2 / gamma + 2.0 * a2;
    let h = DVector::from_iterator(v.len(), v.iter().map(|x| 2.0 - (b + 2.0 * a2) * x * x / nv2));
    (b, h)
}

/// Covariance as a function of `θ = (v, diag D)` with `σ` held fixed.
fn covariance_at(theta: &[f64], sigma: f64) -> DMatrix<f64> {
    let dim = theta.len() / 2;
    let p = DistributionParams {
        mean: vec![0.0; dim],
        sigma,
        d_diag: theta[dim..].to_vec(),
        v: theta[..dim].to_vec(),
    };
    covariance_dense(&p)
}

fn theta_of(params: &DistributionParams) -> Vec<f64> {
    params.v.iter().chain(&params.d_diag).copied().collect()
}

/// `ln N(x; m, C)`.
pub fn log_density(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> Result<f64, OracleError> {
    let dim = x.len();
    let chol = cov.clone().cholesky().ok_or(OracleError::NotPositiveDefinite)?;
    let r = DVector::from_iterator(dim, x.iter().zip(mean).map(|(x, m)| x - m));
    let sol = chol.solve(&r);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(-0.5 * (r.dot(&sol) + log_det + dim as f64 * (2.0 * std::f64::consts::PI).ln()))
}

/// `KL(N(0, P) ‖ N(0, Q))`.
pub fn gaussian_kl(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64, OracleError> {
    let dim = p.nrows() as f64;
    let cq = q.clone().cholesky().ok_or(OracleError::NotPositiveDefinite)?;
    let cp = p.clone().cholesky().ok_or(OracleError::NotPositiveDefinite)?;
    let trace = cq.solve(p).trace();
    let log_det = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(0.5 * (trace - dim + log_det(&cq.l()) - log_det(&cp.l())))
}

/// Score of `ln p(x)` split by parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub m: DVector<f64>,
    pub v: DVector<f64>,
    pub d: DVector<f64>,
}

impl Score {
    /// `(v, D)` part as one vector.
    pub fn shape_part(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.v.len() + self.d.len(),
            self.v.iter().chain(self.d.iter()).copied(),
        )
    }
}

/// Central-difference score of `ln p(x)` w.r.t. `m`, `v` and `diag D`.
pub fn score_fd(x: &[f64], params: &DistributionParams, step: f64) -> Result<Score, OracleError> {
    let dim = params.dim();
    let theta = theta_of(params);
    let lp_shape = |th: &[f64]| log_density(x, &params.mean, &covariance_at(th, params.sigma));
    let cov = covariance_dense(params);
    let lp_mean = |m: &[f64]| log_density(x, m, &cov);

    let mut g_shape = DVector::zeros(2 * dim);
    for i in 0..2 * dim {
        let h = step * theta[i].abs().max(1.0);
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up[i] += h;
        dn[i] -= h;
        g_shape[i] = (lp_shape(&up)? - lp_shape(&dn)?) / (2.0 * h);
    }
    let mut g_m = DVector::zeros(dim);
    for i in 0..dim {
        let h = step * params.mean[i].abs().max(1.0);
        let mut up = params.mean.clone();
        let mut dn = params.mean.clone();
        up[i] += h;
        dn[i] -= h;
        g_m[i] = (lp_mean(&up)? - lp_mean(&dn)?) / (2.0 * h);
    }
    Ok(Score {
        m: g_m,
        v: g_shape.rows(0, dim).into_owned(),
        d: g_shape.rows(dim, dim).into_owned(),
    })
}

/// `∂C/∂θᵢ` for `θ = (v, diag D)`, in closed form.
pub fn covariance_jacobian(params: &DistributionParams) -> Vec<DMatrix<f64>> {
    let dim = params.dim();
    let s2 = params.sigma * params.sigma;
    let dm = diag(&params.d_diag);
    let v = DVector::from_column_slice(&params.v);
    let inner = DMatrix::<f64>::identity(dim, dim) + &v * v.transpose();
    let mut out = Vec::with_capacity(2 * dim);
    for k in 0..dim {
        let mut e = DVector::zeros(dim);
        e[k] = 1.0;
        let dk = &e * v.transpose() + &v * e.transpose();
        out.push(&dm * dk * &dm * s2);
    }
    for k in 0..dim {
        let mut ekk = DMatrix::zeros(dim, dim);
        ekk[(k, k)] = 1.0;
        let a = &ekk * &inner * &dm;
        out.push((&a + a.transpose()) * s2);
    }
    out
}

/// Closed-form Gaussian score:
/// `∂ᵢ ln p = −½ tr(C⁻¹ ∂ᵢC) + ½ rᵀ C⁻¹ ∂ᵢC C⁻¹ r`, `∇_m ln p = C⁻¹ r`.
pub fn score_analytic(x: &[f64], params: &DistributionParams) -> Result<Score, OracleError> {
    let dim = params.dim();
    let cov = covariance_dense(params);
    let cinv = cov.try_inverse().ok_or(OracleError::NotPositiveDefinite)?;
    let r = DVector::from_iterator(dim, x.iter().zip(&params.mean).map(|(x, m)| x - m));
    let u = &cinv * &r;
    let jac = covariance_jacobian(params);
    let g: Vec<f64> = jac
        .iter()
        .map(|dc| -0.5 * (&cinv * dc).trace() + 0.5 * u.dot(&(dc * &u)))
        .collect();
    Ok(Score {
        m: u,
        v: DVector::from_column_slice(&g[..dim]),
        d: DVector::from_column_slice(&g[dim..]),
    })
}

/// Fisher matrix of `(v, diag D)` by `½ tr(C⁻¹ ∂ᵢC C⁻¹ ∂ⱼC)`.
pub fn fisher_trace_form(params: &DistributionParams) -> Result<DMatrix<f64>, OracleError> {
    let n = 2 * params.dim();
    let cinv = covariance_dense(params)
        .try_inverse()
        .ok_or(OracleError::NotPositiveDefinite)?;
    let prod: Vec<DMatrix<f64>> = covariance_jacobian(params)
        .iter()
        .map(|dc| &cinv * dc)
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| 0.5 * (&prod[i] * &prod[j]).trace()))
}

/// Fisher matrix of `(v, diag D)` as the Hessian of
/// `θ' ↦ KL(N(m, C(θ)) ‖ N(m, C(θ')))` at `θ' = θ`.
///
/// Central second differences with steps `h` and `h/2` are combined by
/// Richardson extrapolation, cancelling the `O(h²)` error term.
pub fn fisher_kl_hessian(params: &DistributionParams) -> Result<DMatrix<f64>, OracleError> {
    let h1 = kl_hessian_at_step(params, KL_HESSIAN_STEP)?;
    let h2 = kl_hessian_at_step(params, 0.5 * KL_HESSIAN_STEP)?;
    Ok((h2 * 4.0 - h1) / 3.0)
}

fn kl_hessian_at_step(params: &DistributionParams, step: f64) -> Result<DMatrix<f64>, OracleError> {
    let theta = theta_of(params);
    let n = theta.len();
    let base = covariance_dense(params);
    let kl = |shift: &[(usize, f64)]| {
        let mut th = theta.clone();
        for &(i, dh) in shift {
            th[i] += dh;
        }
        gaussian_kl(&base, &covariance_at(&th, params.sigma))
    };
    let steps: Vec<f64> = theta.iter().map(|t| step * t.abs().max(1.0)).collect();
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let hi = steps[i];
        // KL vanishes at θ' = θ
        hess[(i, i)] = (kl(&[(i, hi)])? + kl(&[(i, -hi)])?) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let val = (kl(&[(i, hi), (j, hj)])? - kl(&[(i, hi), (j, -hj)])?
                - kl(&[(i, -hi), (j, hj)])?
                + kl(&[(i, -hi), (j, -hj)])?)
                / (4.0 * hi * hj);
            hess[(i, j)] = val;
            hess[(j, i)] = val;
        }
    }
    Ok(hess)
}

/// Blocks of the `(v, D)` Fisher matrix and the cross-block scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFisherBlocks {
    pub i_vv: DMatrix<f64>,
    pub i_vd: DMatrix<f64>,
    pub i_dd: DMatrix<f64>,
    pub alpha_vd: f64,
}

impl DenseFisherBlocks {
    pub fn from_matrix(full: &DMatrix<f64>, alpha_vd: f64) -> Self {
        let dim = full.nrows() / 2;
        Self {
            i_vv: full.view((0, 0), (dim, dim)).into_owned(),
            i_vd: full.view((0, dim), (dim, dim)).into_owned(),
            i_dd: full.view((dim, dim), (dim, dim)).into_owned(),
            alpha_vd,
        }
    }

    /// `[[I_vv, α I_vd], [α I_dv, I_dd]]`
    pub fn scaled(&self) -> DMatrix<f64> {
        let dim = self.i_vv.nrows();
        let mut out = DMatrix::zeros(2 * dim, 2 * dim);
        out.view_mut((0, 0), (dim, dim)).copy_from(&self.i_vv);
        out.view_mut((dim, dim), (dim, dim)).copy_from(&self.i_dd);
        let cross = &self.i_vd * self.alpha_vd;
        out.view_mut((0, dim), (dim, dim)).copy_from(&cross);
        out.view_mut((dim, 0), (dim, dim)).copy_from(&cross.transpose());
        out
    }

    /// `I_DD − α² I_Dv I_vv⁻¹ I_vD`
    pub fn schur_complement(&self) -> Option<DMatrix<f64>> {
        let inv_vv = self.i_vv.clone().try_inverse()?;
        let a2 = self.alpha_vd * self.alpha_vd;
        Some(&self.i_dd - self.i_vd.transpose() * inv_vv * &self.i_vd * a2)
    }
}

/// Dense natural gradient components.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNatGrad {
    pub grad_v: DVector<f64>,
    pub grad_d: DVector<f64>,
    pub condition: f64,
}

/// `F_α⁻¹ ∇ ln p(x)` for the `(v, D)` block, all pieces numerical.
pub fn dense_natgrad(x: &[f64], params: &DistributionParams) -> Result<DenseNatGrad, OracleError> {
    let dim = params.dim();
    let alpha = VdGeometry::new(&params.v)?.alpha_vd;
    let fisher = fisher_kl_hessian(params)?;
    let scaled = DenseFisherBlocks::from_matrix(&fisher, alpha).scaled();
    let sv = scaled.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(OracleError::IllConditioned(condition));
    }
    let g = score_fd(x, params, SCORE_STEP)?.shape_part();
    let sol = scaled
        .lu()
        .solve(&g)
        .ok_or(OracleError::IllConditioned(f64::INFINITY))?;
    Ok(DenseNatGrad {
        grad_v: sol.rows(0, dim).into_owned(),
        grad_d: sol.rows(dim, dim).into_owned(),
        condition,
    })
}
