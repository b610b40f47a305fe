//! Maximum-likelihood estimation of `(beta, H)`: grid initialization,
//! simulated annealing with additive transformation moves, and a parametric
//! bootstrap of the estimator distribution.

use crate::error::{Error, Result};
use crate::fbm::{FbmMethod, FbmSampler};
use crate::hurst::TimeGrid;
use crate::likelihood::LikelihoodEngine;
use crate::model::ModelSpec;
use crate::path::{simulate_with_increments, simulate_with_sampler, ObservedPath};
use crate::seeds;
use crate::stats::quantile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::io::Write;

/// Equispaced search grid for one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 || !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidConfig(format!(
                "grid must have count >= 1 and finite lo <= hi, got [{lo}, {hi}] x {count}"
            )));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let step = if self.count > 1 {
            (self.hi - self.lo) / (self.count - 1) as f64
        } else {
            0.0
        };
        (0..self.count).map(move |k| self.lo + step * k as f64)
    }
}

/// What the annealer maximizes; the flat target accepts every move and is
/// used to exercise proposal symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitTarget {
    #[default]
    LogLikelihood,
    Flat,
}

/// Annealing run configuration.
#[derive(Debug, Clone)]
pub struct AnnealConfig {
    /// Iteration count `N`.
    pub n_iter: usize,
    /// Step scale for `beta` moves (`a_1`).
    pub step_beta: f64,
    /// Step scale for `H` moves (`a_2`).
    pub step_h: f64,
    pub grid_beta: GridSpec,
    pub grid_h: GridSpec,
    pub seed: u64,
    pub eta: f64,
    pub target: FitTarget,
    /// Record the chain states in the result.
    pub record_trace: bool,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            n_iter: 20_000,
            step_beta: 1e-4,
            step_h: 1e-4,
            grid_beta: GridSpec { lo: -2.0, hi: 2.0, count: 21 },
            grid_h: GridSpec { lo: 0.05, hi: 0.95, count: 21 },
            seed: 0,
            eta: crate::hurst::DEFAULT_ETA,
            target: FitTarget::LogLikelihood,
            record_trace: false,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_beta >= 0.0 && self.step_h >= 0.0) {
            return Err(Error::InvalidConfig("annealing steps must be >= 0".into()));
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(Error::InvalidEta(self.eta));
        }
        if self.grid_h.lo < self.eta || self.grid_h.hi > 1.0 - self.eta {
            return Err(Error::InvalidConfig(format!(
                "H grid [{}, {}] leaves [{}, {}]",
                self.grid_h.lo,
                self.grid_h.hi,
                self.eta,
                1.0 - self.eta
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }
}

/// One recorded annealing state.
#[derive(Debug, Clone, Copy)]
pub struct AnnealState {
    pub beta: f64,
    pub h: f64,
    pub log_lik: f64,
}

/// Annealing output: the best visited state and bookkeeping.
#[derive(Debug, Clone)]
pub struct MleResult {
    pub beta_hat: f64,
    pub h_hat: f64,
    pub best_loglik: f64,
    pub init: (f64, f64),
    pub accept_rate: f64,
    pub trace: Option<Vec<AnnealState>>,
}

/// Cooling schedule: `1/t` for `t < 3`; above that the nominal triple-log
/// temperature, clamped away from its non-positive range (`log log log t`
/// only turns positive past `t = e^e ~ 15.15`), falling back to `1/t` while
/// non-positive.
pub fn temperature(t: usize) -> f64 {
    let tf = t as f64;
    if t >= 3 {
        let lll = tf.ln().ln().ln();
        if lll > 0.0 {
            return 1.0 / lll.max(1e-3);
        }
    }
    1.0 / tf
}

/// Exhaustive likelihood maximization over the configured grid; ties break
/// toward the smallest `H`, then the smallest `beta`.
pub fn grid_init(path: &ObservedPath, model: &ModelSpec, config: &AnnealConfig) -> Result<(f64, f64)> {
    config.validate()?;
    let mut engine = LikelihoodEngine::new(path, model, config.eta)?;
    let mut best = f64::NEG_INFINITY;
    let mut arg = (config.grid_beta.lo, config.grid_h.lo);
    for h in config.grid_h.points() {
        match config.target {
            FitTarget::Flat => {
                if best < 0.0 {
                    best = 0.0;
                    arg = (config.grid_beta.lo, h);
                }
            }
            FitTarget::LogLikelihood => {
                let sums = engine.sums(h)?;
                for b in config.grid_beta.points() {
                    let ll = sums.log_likelihood_at(b);
                    if ll > best {
                        best = ll;
                        arg = (b, h);
                    }
                }
            }
        }
    }
    Ok(arg)
}

/// Simulated annealing over `(beta, H)` with additive transformation moves:
/// each iteration draws one `|eps|` and two independent signs, proposes
/// `(beta + b1 a1 |eps|, H + b2 a2 |eps|)`, accepts with probability
/// `min(1, exp((L' - L)/tau_t))`, and finally reports the best state the
/// chain ever sat in (the initializer included). Proposals leaving
/// `[eta, 1-eta]` in `H` are rejected outright.
pub fn anneal_tmcmc(path: &ObservedPath, model: &ModelSpec, config: &AnnealConfig) -> Result<MleResult> {
    config.validate()?;
    let init = grid_init(path, model, config)?;
    let mut engine = LikelihoodEngine::new(path, model, config.eta)?;
    let eval = |engine: &mut LikelihoodEngine, beta: f64, h: f64| -> Result<f64> {
        match config.target {
            FitTarget::LogLikelihood => Ok(engine.log_likelihood(beta, h)?.value),
            FitTarget::Flat => Ok(0.0),
        }
    };

    let (mut beta, mut h) = init;
    let mut current = eval(&mut engine, beta, h)?;
    let (mut best_beta, mut best_h, mut best_ll) = (beta, h, current);
    let mut trace = config.record_trace.then(Vec::new);
    if let Some(tr) = trace.as_mut() {
        tr.push(AnnealState { beta, h, log_lik: current });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut accepted = 0usize;
    for t in 1..=config.n_iter {
        let eps: f64 = StandardNormal.sample(&mut rng);
        let eps = eps.abs();
        let b1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let b2 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let cand_beta = beta + b1 * config.step_beta * eps;
        let cand_h = h + b2 * config.step_h * eps;
        if cand_h >= config.eta && cand_h <= 1.0 - config.eta {
            let cand_ll = eval(&mut engine, cand_beta, cand_h)?;
            let log_alpha = (cand_ll - current) / temperature(t);
            if log_alpha >= 0.0 || rng.random::<f64>() < log_alpha.exp() {
                beta = cand_beta;
                h = cand_h;
                current = cand_ll;
                accepted += 1;
                if current > best_ll {
                    best_beta = beta;
                    best_h = h;
                    best_ll = current;
                }
            }
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(AnnealState { beta, h, log_lik: current });
        }
    }

    Ok(MleResult {
        beta_hat: best_beta,
        h_hat: best_h,
        best_loglik: best_ll,
        init,
        accept_rate: if config.n_iter == 0 { 0.0 } else { accepted as f64 / config.n_iter as f64 },
        trace,
    })
}

/// Noise source for bootstrap replicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapNoise {
    Fbm(FbmMethod),
    /// Deterministic skeleton paths; replicates collapse to one fit.
    Zero,
}

/// Empirical distribution of the MLE over resimulated datasets, with
/// percentile confidence intervals.
#[derive(Debug, Clone)]
pub struct BootstrapDistribution {
    pub replicates: Vec<MleResult>,
    /// Path seed of each surviving replicate, aligned with `replicates`.
    pub seeds: Vec<u64>,
    /// Replicate indexes of the survivors.
    pub indices: Vec<usize>,
    pub failures: usize,
    pub ci_beta: (f64, f64),
    pub ci_h: (f64, f64),
    pub level: f64,
}

impl BootstrapDistribution {
    /// Writes `rep,beta_hat,h_hat,loglik,seed` rows.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "rep,beta_hat,h_hat,loglik,seed")?;
        for ((rep, r), seed) in self.indices.iter().zip(&self.replicates).zip(&self.seeds) {
            writeln!(w, "{},{},{},{},{}", rep, r.beta_hat, r.h_hat, r.best_loglik, seed)?;
        }
        Ok(())
    }
}

/// Simulates `n_replicates` paths at `(beta0, h0)`, fits each with
/// [`anneal_tmcmc`] under replicate-derived seeds, and returns percentile
/// intervals at `level`. Replicates run in parallel; output order is by
/// replicate index. Fails when more than 10% of replicates error.
pub fn bootstrap_mle(
    model: &ModelSpec,
    beta0: f64,
    h0: f64,
    grid: &TimeGrid,
    config: &AnnealConfig,
    n_replicates: usize,
    level: f64,
    noise: BootstrapNoise,
) -> Result<BootstrapDistribution> {
    if n_replicates < 2 {
        return Err(Error::InvalidConfig("bootstrap needs at least 2 replicates".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level must be in (0,1), got {level}")));
    }
    config.validate()?;
    let sampler = match noise {
        BootstrapNoise::Fbm(method) => Some(FbmSampler::new(h0, *grid, method)?),
        BootstrapNoise::Zero => None,
    };

    let runs: Vec<(u64, Result<MleResult>)> = (0..n_replicates)
        .into_par_iter()
        .map(|rep| {
            let path_seed = seeds::derive(config.seed, 2 * rep as u64);
            let fit_seed = seeds::derive(config.seed, 2 * rep as u64 + 1);
            let fit = (|| {
                let path = match &sampler {
                    Some(s) => simulate_with_sampler(model, beta0, s, path_seed)?,
                    None => simulate_with_increments(model, beta0, grid, &vec![0.0; grid.n()])?,
                };
                anneal_tmcmc(&path, model, &config.with_seed(fit_seed))
            })();
            (path_seed, fit)
        })
        .collect();

    let total = runs.len();
    let mut replicates = Vec::new();
    let mut kept_seeds = Vec::new();
    let mut indices = Vec::new();
    let mut failures = 0usize;
    let mut first_err = String::new();
    for (rep, (seed, run)) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => {
                replicates.push(r);
                kept_seeds.push(seed);
                indices.push(rep);
            }
            Err(e) => {
                if failures == 0 {
                    first_err = e.to_string();
                }
                failures += 1;
            }
        }
    }
    if failures * 10 > total {
        return Err(Error::ReplicateFailures(failures, total, first_err));
    }

    let mut betas: Vec<f64> = replicates.iter().map(|r| r.beta_hat).collect();
    let mut hs: Vec<f64> = replicates.iter().map(|r| r.h_hat).collect();
    betas.sort_by(|a, b| a.total_cmp(b));
    hs.sort_by(|a, b| a.total_cmp(b));
    let lo_p = (1.0 - level) / 2.0;
    let hi_p = (1.0 + level) / 2.0;
    Ok(BootstrapDistribution {
        ci_beta: (quantile(&betas, lo_p), quantile(&betas, hi_p)),
        ci_h: (quantile(&hs, lo_p), quantile(&hs, hi_p)),
        replicates,
        seeds: kept_seeds,
        indices,
        failures,
        level,
    })
}
