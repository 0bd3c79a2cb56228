#![allow(dead_code)]

use crfmnes::distribution::{sample_population, DistributionParams};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Random but moderately conditioned distribution.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DistributionParams {
    let scale = log_uniform(rng, 0.1, 3.0);
    let v = gaussian_vec(rng, dim).iter().map(|x| x * scale).collect();
    DistributionParams {
        mean: gaussian_vec(rng, dim),
        sigma: log_uniform(rng, 0.3, 3.0),
        d_diag: (0..dim).map(|_| log_uniform(rng, 0.3, 3.0)).collect(),
        v,
    }
}

/// A point drawn from the distribution itself.
pub fn sample_point<R: Rng + ?Sized>(rng: &mut R, params: &DistributionParams) -> Vec<f64> {
    sample_population(params, 2, rng)
        .expect("valid params")
        .candidates
        .swap_remove(0)
        .x
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
