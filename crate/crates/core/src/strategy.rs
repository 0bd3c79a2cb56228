//! Ask/tell optimizer driving one full adaptation step per generation.

use crate::adaptation::{
    detect_phase, expected_norm, learning_rates, normalize_d, update_mean, update_p_c,
    update_p_sigma, update_sigma, update_v_d, EvolutionState, LearningRates, Phase,
};
use crate::distribution::{
    init_params, sample_population, sampling_rng, DistributionParams, Population, StrategyRng,
};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::natgrad::{grad_sigma, natgrad_from_shaped};
use crate::weights::{distance_weights, rank_weights, WeightConstants, WeightSet};

/// Step sizes outside `[SIGMA_MIN, SIGMA_MAX]` end a run as numerical failure.
pub const SIGMA_MAX: f64 = 1e100;
pub const SIGMA_MIN: f64 = 1e-300;

/// `4 + ⌊3 ln d⌋`, bumped to the next even number when odd.
pub fn default_lambda(dim: usize) -> usize {
    let base = (3.0 * (dim.max(1) as f64).ln()).floor() as usize;
    if base.is_multiple_of(2) {
        4 + base
    } else {
        5 + base
    }
}

/// Evaluation budget `5d × 10⁴`.
pub fn default_max_evals(dim: usize) -> usize {
    5 * dim * 10_000
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDistribution {
    pub mean: Vec<f64>,
    pub sigma: f64,
    /// Defaults to the identity.
    pub d_diag: Option<Vec<f64>>,
    /// Defaults to a random draw with `‖v‖ ≈ 1`.
    pub v: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub dim: usize,
    pub lambda: usize,
    pub init: InitialDistribution,
    pub target_fval: f64,
    pub max_evals: usize,
    pub seed: u64,
}

impl StrategyConfig {
    /// Default population size, a `5d × 10⁴` budget and a `1e-10` target.
    pub fn new(mean: Vec<f64>, sigma: f64) -> Self {
        let dim = mean.len();
        Self {
            dim,
            lambda: default_lambda(dim),
            init: InitialDistribution {
                mean,
                sigma,
                d_diag: None,
                v: None,
            },
            target_fval: 1e-10,
            max_evals: default_max_evals(dim),
            seed: 0,
        }
    }

    pub fn with_lambda(mut self, lambda: usize) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target_fval = target;
        self
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn with_v(mut self, v: Vec<f64>) -> Self {
        self.init.v = Some(v);
        self
    }

    pub fn with_d_diag(mut self, d: Vec<f64>) -> Self {
        self.init.d_diag = Some(d);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminationReason {
    Target,
    Budget,
    Numerical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub best_x: Vec<f64>,
    pub best_fval: f64,
    pub evals_used: usize,
    pub reached_target: bool,
    pub termination_reason: TerminationReason,
    pub generations: u64,
}

/// Read-only view of the optimizer state, for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub params: DistributionParams,
    pub evolution: EvolutionState,
    pub evals: usize,
    pub best_fval: Option<f64>,
    pub d_clamp_count: usize,
    pub last_g_sigma: f64,
    pub numerical_failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CrFmNes {
    config: StrategyConfig,
    params: DistributionParams,
    evolution: EvolutionState,
    rates: LearningRates,
    constants: WeightConstants,
    rank_weights: WeightSet,
    upsilon: f64,
    rng: StrategyRng,
    pending: Option<Population>,
    evals: usize,
    best: Option<(Vec<f64>, f64)>,
    d_clamp_count: usize,
    last_g_sigma: f64,
    numerical_failure: Option<String>,
}

impl CrFmNes {
    pub fn new(config: StrategyConfig) -> Result<Self> {
        let dim = config.dim;
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if config.lambda < 2 || !config.lambda.is_multiple_of(2) {
            return Err(Error::InvalidPopulationSize(config.lambda));
        }
        if config.max_evals < config.lambda {
            return Err(Error::BudgetTooSmall {
                max_evals: config.max_evals,
                lambda: config.lambda,
            });
        }
        let d0 = config
            .init
            .d_diag
            .clone()
            .unwrap_or_else(|| vec![1.0; dim]);
        let params = init_params(
            dim,
            &config.init.mean,
            config.init.sigma,
            &d0,
            config.init.v.as_deref(),
            config.seed,
        )?;
        Ok(Self {
            rates: learning_rates(dim, config.lambda)?,
            constants: WeightConstants::new(dim, config.lambda)?,
            rank_weights: rank_weights(config.lambda)?,
            upsilon: expected_norm(dim),
            rng: sampling_rng(config.seed),
            evolution: EvolutionState::new(dim),
            params,
            pending: None,
            evals: 0,
            best: None,
            d_clamp_count: 0,
            last_g_sigma: 0.0,
            numerical_failure: None,
            config,
        })
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    pub fn params(&self) -> &DistributionParams {
        &self.params
    }

    pub fn evolution(&self) -> &EvolutionState {
        &self.evolution
    }

    pub fn learning_rates(&self) -> &LearningRates {
        &self.rates
    }

    pub fn weight_constants(&self) -> &WeightConstants {
        &self.constants
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.best.as_ref().map(|(x, f)| (x.as_slice(), *f))
    }

    /// Set once the state has left the numerically safe region.
    pub fn numerical_failure(&self) -> Option<&str> {
        self.numerical_failure.as_deref()
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            params: self.params.clone(),
            evolution: self.evolution.clone(),
            evals: self.evals,
            best_fval: self.best.as_ref().map(|b| b.1),
            d_clamp_count: self.d_clamp_count,
            last_g_sigma: self.last_g_sigma,
            numerical_failure: self.numerical_failure.clone(),
        }
    }

    /// Samples a new generation and returns its points in sampling order.
    pub fn ask(&mut self) -> Result<Vec<Vec<f64>>> {
        self.sample()?;
        Ok(self.pending_points().iter().map(|x| x.to_vec()).collect())
    }

    fn sample(&mut self) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::AskPending);
        }
        let pop = sample_population(&self.params, self.config.lambda, &mut self.rng)?;
        self.pending = Some(pop);
        Ok(())
    }

    fn pending_points(&self) -> Vec<&[f64]> {
        self.pending
            .as_ref()
            .map(|p| p.candidates.iter().map(|c| c.x.as_slice()).collect())
            .unwrap_or_default()
    }

    /// Consumes objective values for the last `ask`, in the same order.
    pub fn tell(&mut self, fvals: &[f64]) -> Result<()> {
        let mut pop = self.pending.take().ok_or(Error::TellWithoutAsk)?;
        if let Err(e) = pop.assign_fitness(fvals) {
            self.pending = Some(pop);
            return Err(e);
        }
        self.evals += pop.len();
        pop.sort();
        let top = &pop.candidates[0];
        let top_f = top.fval.expect("assigned above");
        if self.best.as_ref().is_none_or(|b| top_f < b.1) {
            self.best = Some((top.x.clone(), top_f));
        }

        match self.adapt(&pop) {
            Ok(()) => {
                let s = self.params.sigma;
                if !(SIGMA_MIN..=SIGMA_MAX).contains(&s) {
                    self.numerical_failure = Some(format!("σ = {s:e} out of range"));
                }
                Ok(())
            }
            Err(Error::Numerical(msg)) => {
                self.numerical_failure = Some(msg.clone());
                Err(Error::Numerical(msg))
            }
            Err(e) => Err(e),
        }
    }

    fn adapt(&mut self, pop: &Population) -> Result<()> {
        let dim = self.config.dim;
        let z_sorted = pop.z_sorted();

        update_p_sigma(
            &mut self.evolution.p_sigma,
            &z_sorted,
            &self.rank_weights,
            self.rates.c_sigma,
            self.constants.mu_eff,
        );
        let phase = detect_phase(norm(&self.evolution.p_sigma), self.upsilon);
        self.evolution.phase = phase;
        let dist_weights;
        let weights = if phase == Phase::Movement {
            dist_weights = distance_weights(&z_sorted, self.constants.alpha_dist)?;
            &dist_weights
        } else {
            &self.rank_weights
        };
        let eta_sigma = self.rates.eta_sigma(phase);

        update_p_c(
            &mut self.evolution.p_c,
            pop,
            weights,
            &self.params,
            self.rates.c_c,
            self.constants.mu_eff,
        )?;

        // all gradients at the iteration-t distribution; the rank-one point
        // m + σ p_c has shaped coordinates D⁻¹ p_c
        let pc_y: Vec<f64> = self
            .evolution
            .p_c
            .iter()
            .zip(&self.params.d_diag)
            .map(|(p, d)| p / d)
            .collect();
        let mut grad = natgrad_from_shaped(
            pop.candidates.iter().map(|c| c.y.as_slice()),
            weights,
            &self.params,
            &pc_y,
        )?;
        grad.g_sigma = grad_sigma(pop, weights, dim)?;

        update_mean(&mut self.params, pop, weights, self.rates.eta_m)?;
        self.d_clamp_count += update_v_d(&mut self.params, &grad, self.rates.eta_b, self.rates.c1)?;
        normalize_d(&mut self.params)?;
        self.params.sigma = update_sigma(self.params.sigma, grad.g_sigma, eta_sigma)?;
        self.last_g_sigma = grad.g_sigma;

        if self.params.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Numerical("non-finite mean".into()));
        }
        self.evolution.t += 1;
        Ok(())
    }

    /// Runs ask/evaluate/tell until the target, the budget or a numerical
    /// failure. Non-finite objective values are returned as errors.
    pub fn optimize<F>(&mut self, mut f: F) -> Result<OptimizeResult>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let lambda = self.config.lambda;
        let reason = loop {
            if self.numerical_failure.is_some() {
                break TerminationReason::Numerical;
            }
            if self.evals + lambda > self.config.max_evals {
                break TerminationReason::Budget;
            }
            self.sample()?;
            let fvals: Vec<f64> = self.pending_points().into_iter().map(&mut f).collect();
            match self.tell(&fvals) {
                Ok(()) | Err(Error::Numerical(_)) => {}
                Err(e) => return Err(e),
            }
            if self.best.as_ref().is_some_and(|b| b.1 <= self.config.target_fval) {
                break TerminationReason::Target;
            }
        };
        let (best_x, best_fval) = self
            .best
            .clone()
            .unwrap_or_else(|| (self.params.mean.clone(), f64::INFINITY));
        Ok(OptimizeResult {
            reached_target: best_fval <= self.config.target_fval,
            best_x,
            best_fval,
            evals_used: self.evals,
            termination_reason: reason,
            generations: self.evolution.t,
        })
    }
}

/// Builds an optimizer from `config` and runs it on `f`.
pub fn optimize<F>(config: StrategyConfig, f: F) -> Result<OptimizeResult>
where
    F: FnMut(&[f64]) -> f64,
{
    CrFmNes::new(config)?.optimize(f)
}
