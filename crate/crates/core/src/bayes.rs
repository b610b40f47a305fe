//! Bayesian inference for `(beta, H)`: normal priors on `beta` and on the
//! logit of `H`, sampled by a two-stage additive TMCMC.

use crate::error::{Error, Result};
use crate::likelihood::{KernelWeightCache, LikelihoodEngine};
use crate::mle::MleResult;
use crate::model::ModelSpec;
use crate::path::ObservedPath;
use crate::stats::{effective_sample_size, quantile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write;

/// Logistic map `nu -> exp(nu)/(1+exp(nu))`, evaluated in overflow-safe
/// form; the image always lies in (0, 1).
pub fn logistic(nu: f64) -> f64 {
    if nu >= 0.0 {
        1.0 / (1.0 + (-nu).exp())
    } else {
        let e = nu.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`logistic`]: `log(h / (1-h))`.
pub fn logit(h: f64) -> f64 {
    (h / (1.0 - h)).ln()
}

fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - 0.5 * z * z
}

/// Independent normal priors: `nu ~ N(nu_mean, nu_sd^2)` on the Hurst logit
/// and `beta ~ N(beta_mean, beta_sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub nu_mean: f64,
    pub nu_sd: f64,
    pub beta_mean: f64,
    pub beta_sd: f64,
}

impl PriorSpec {
    pub fn new(nu_mean: f64, nu_sd: f64, beta_mean: f64, beta_sd: f64) -> Result<Self> {
        if !(nu_sd > 0.0 && beta_sd > 0.0) {
            return Err(Error::InvalidConfig("prior standard deviations must be > 0".into()));
        }
        Ok(Self { nu_mean, nu_sd, beta_mean, beta_sd })
    }

    pub fn log_density(&self, beta: f64, nu: f64) -> f64 {
        log_normal_pdf(nu, self.nu_mean, self.nu_sd) + log_normal_pdf(beta, self.beta_mean, self.beta_sd)
    }
}

/// Priors centered at the MLE: `nu_mean = logit(h_hat)`, wide scales
/// `(0.2, 0.1)` normally and tight scales `(0.02, 0.01)` for the extreme
/// Hurst cases.
pub fn default_priors(mle: &MleResult, case_extreme: bool) -> PriorSpec {
    let (nu_sd, beta_sd) = if case_extreme { (0.02, 0.01) } else { (0.2, 0.1) };
    PriorSpec {
        nu_mean: logit(mle.h_hat),
        nu_sd,
        beta_mean: mle.beta_hat,
        beta_sd,
    }
}

/// Target of the chain: the posterior, or the prior alone (flat
/// likelihood) for sampler validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BayesTarget {
    #[default]
    Posterior,
    PriorOnly,
}

/// TMCMC run configuration.
#[derive(Debug, Clone)]
pub struct TmcmcConfig {
    pub n_iter: usize,
    /// Step scale of `beta` moves (`a_1`).
    pub step_beta: f64,
    /// Step scale of `nu` moves (`a_2`).
    pub step_nu: f64,
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
    pub eta: f64,
    /// Starting point `(beta, nu)`; the prior mean when unset.
    pub init: Option<(f64, f64)>,
    pub target: BayesTarget,
}

impl Default for TmcmcConfig {
    fn default() -> Self {
        Self {
            n_iter: 50_000,
            step_beta: 0.05,
            step_nu: 0.05,
            seed: 0,
            burn_in: 1000,
            thin: 50,
            eta: crate::hurst::DEFAULT_ETA,
            init: None,
            target: BayesTarget::Posterior,
        }
    }
}

impl TmcmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_beta >= 0.0 && self.step_nu >= 0.0) {
            return Err(Error::InvalidConfig("TMCMC steps must be >= 0".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be >= 1".into()));
        }
        if self.burn_in > self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "burn-in {} exceeds iteration count {}",
                self.burn_in, self.n_iter
            )));
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(Error::InvalidEta(self.eta));
        }
        Ok(())
    }
}

/// One recorded chain state (the final value of its iteration) together
/// with the per-stage acceptance flags of that iteration.
#[derive(Debug, Clone, Copy)]
pub struct BayesState {
    pub beta: f64,
    pub nu: f64,
    pub log_post: f64,
    pub stage1_accepted: bool,
    pub stage2_accepted: bool,
}

impl BayesState {
    pub fn h(&self) -> f64 {
        logistic(self.nu)
    }
}

/// Recorded chain history.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub states: Vec<BayesState>,
    pub burn_in: usize,
    pub thin: usize,
    /// Stage-wise acceptance fractions over the whole run.
    pub accept_rates: (f64, f64),
}

impl ChainTrace {
    pub fn post_burn_in(&self) -> &[BayesState] {
        &self.states[self.burn_in.min(self.states.len())..]
    }

    /// Post-burn-in states, one in every `thin`, with their original
    /// iteration indexes.
    pub fn thinned(&self) -> impl Iterator<Item = (usize, &BayesState)> {
        self.states
            .iter()
            .enumerate()
            .skip(self.burn_in)
            .filter(move |(i, _)| (i - self.burn_in) % self.thin == 0)
    }

    /// Writes the thinned post-burn-in trace as
    /// `iter,beta,nu,h,log_post,stage1_accepted,stage2_accepted`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "iter,beta,nu,h,log_post,stage1_accepted,stage2_accepted")?;
        for (i, s) in self.thinned() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                i,
                s.beta,
                s.nu,
                s.h(),
                s.log_post,
                s.stage1_accepted as u8,
                s.stage2_accepted as u8
            )?;
        }
        Ok(())
    }
}

/// Posterior summary over the post-burn-in states.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub mean_beta: f64,
    pub mean_h: f64,
    pub bci_beta: (f64, f64),
    pub bci_h: (f64, f64),
    pub level: f64,
    /// Effective sample sizes of the `beta` and `H` series; `None` flags a
    /// degenerate (constant) chain.
    pub ess_beta: Option<f64>,
    pub ess_h: Option<f64>,
}

/// Log-posterior at `(beta, nu)`: the path log-likelihood at
/// `(beta, logistic(nu))` plus the prior log-density. The chain lives in
/// `(beta, nu)` coordinates, so no extra Jacobian enters here.
pub fn log_posterior(
    path: &ObservedPath,
    model: &ModelSpec,
    beta: f64,
    nu: f64,
    prior: &PriorSpec,
    cache: &mut KernelWeightCache,
) -> Result<f64> {
    let h = logistic(nu);
    let ll = crate::likelihood::log_likelihood(path, model, beta, h, cache)?;
    Ok(ll.value + prior.log_density(beta, nu))
}

/// Two-stage additive TMCMC. Stage one moves the coordinates with one
/// shared `|eps|` and independent signs; stage two moves both coordinates
/// with one `|eps|` and a single shared sign. Both stages accept with the
/// posterior-density ratio. Proposals whose `H` leaves `[eta, 1-eta]` are
/// rejected outright.
pub fn run_tmcmc(
    path: &ObservedPath,
    model: &ModelSpec,
    prior: &PriorSpec,
    config: &TmcmcConfig,
) -> Result<ChainTrace> {
    config.validate()?;
    let mut engine = match config.target {
        BayesTarget::Posterior => Some(LikelihoodEngine::new(path, model, config.eta)?),
        BayesTarget::PriorOnly => None,
    };
    let mut log_post = |beta: f64, nu: f64| -> Result<Option<f64>> {
        let h = logistic(nu);
        if h < config.eta || h > 1.0 - config.eta {
            return Ok(None);
        }
        let mut lp = prior.log_density(beta, nu);
        if let Some(engine) = engine.as_mut() {
            lp += engine.log_likelihood(beta, h)?.value;
        }
        Ok(Some(lp))
    };

    let (mut beta, mut nu) = config.init.unwrap_or((prior.beta_mean, prior.nu_mean));
    let mut current = log_post(beta, nu)?.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "initial state nu = {nu} maps outside the admissible Hurst range"
        ))
    })?;

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut states = Vec::with_capacity(config.n_iter + 1);
    states.push(BayesState {
        beta,
        nu,
        log_post: current,
        stage1_accepted: false,
        stage2_accepted: false,
    });
    let (mut acc1, mut acc2) = (0usize, 0usize);

    for _ in 0..config.n_iter {
        // stage 1: one innovation, independent signs per coordinate
        let eps: f64 = StandardNormal.sample(&mut rng);
        let eps = eps.abs();
        let b1 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let b2 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let mut s1 = false;
        if let Some(cand) = log_post(beta + b1 * config.step_beta * eps, nu + b2 * config.step_nu * eps)? {
            let delta = cand - current;
            if delta >= 0.0 || rng.random::<f64>() < delta.exp() {
                beta += b1 * config.step_beta * eps;
                nu += b2 * config.step_nu * eps;
                current = cand;
                s1 = true;
                acc1 += 1;
            }
        }

        // stage 2: one innovation, one shared sign for both coordinates
        let eps: f64 = StandardNormal.sample(&mut rng);
        let eps = eps.abs();
        let sign = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        let mut s2 = false;
        if let Some(cand) =
            log_post(beta + sign * config.step_beta * eps, nu + sign * config.step_nu * eps)?
        {
            let delta = cand - current;
            if delta >= 0.0 || rng.random::<f64>() < delta.exp() {
                beta += sign * config.step_beta * eps;
                nu += sign * config.step_nu * eps;
                current = cand;
                s2 = true;
                acc2 += 1;
            }
        }

        states.push(BayesState {
            beta,
            nu,
            log_post: current,
            stage1_accepted: s1,
            stage2_accepted: s2,
        });
    }

    let n = config.n_iter.max(1) as f64;
    Ok(ChainTrace {
        states,
        burn_in: config.burn_in,
        thin: config.thin,
        accept_rates: (acc1 as f64 / n, acc2 as f64 / n),
    })
}

/// Posterior means, equal-tail credible intervals and effective sample
/// sizes over the post-burn-in states.
pub fn summarize(trace: &ChainTrace, level: f64) -> Result<PosteriorSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level must be in (0,1), got {level}")));
    }
    let kept = trace.post_burn_in();
    if kept.is_empty() {
        return Err(Error::EmptyChain { burn_in: trace.burn_in, len: trace.states.len() });
    }
    let betas: Vec<f64> = kept.iter().map(|s| s.beta).collect();
    let hs: Vec<f64> = kept.iter().map(|s| s.h()).collect();
    let mut b_sorted = betas.clone();
    let mut h_sorted = hs.clone();
    b_sorted.sort_by(|a, b| a.total_cmp(b));
    h_sorted.sort_by(|a, b| a.total_cmp(b));
    let lo = (1.0 - level) / 2.0;
    let hi = (1.0 + level) / 2.0;
    Ok(PosteriorSummary {
        mean_beta: crate::stats::mean(&betas),
        mean_h: crate::stats::mean(&hs),
        bci_beta: (quantile(&b_sorted, lo), quantile(&b_sorted, hi)),
        bci_h: (quantile(&h_sorted, lo), quantile(&h_sorted, hi)),
        level,
        ess_beta: effective_sample_size(&betas),
        ess_h: effective_sample_size(&hs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hurst::{TimeGrid, DEFAULT_ETA};
    use crate::model::example_model;
    use approx::assert_relative_eq;

    fn golden_path() -> ObservedPath {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        ObservedPath::new(grid, vec![0.0, 0.125, -0.0625, 0.25, 0.1875]).unwrap()
    }

    #[test]
    fn logistic_map_basics() {
        assert_eq!(logistic(0.0), 0.5);
        assert_relative_eq!(logistic(0.5), 0.6224593312018546, max_relative = 1e-13);
        assert!(logistic(800.0) <= 1.0 && logistic(800.0) > 0.99);
        assert!(logistic(-800.0) >= 0.0 && logistic(-800.0) < 0.01);
        assert_relative_eq!(logit(logistic(1.3)), 1.3, max_relative = 1e-12);
    }

    #[test]
    fn golden_log_posterior() {
        let path = golden_path();
        let model = example_model();
        let prior = PriorSpec::new(0.25, 0.2, 0.25, 0.1).unwrap();
        let mut cache = KernelWeightCache::new(*path.grid(), DEFAULT_ETA);
        let lp = log_posterior(&path, &model, 0.3, 0.5, &prior, &mut cache).unwrap();
        assert_relative_eq!(lp, 0.4500496109861544, max_relative = 1e-12);
    }

    #[test]
    fn prior_only_target_peaks_at_prior_mean() {
        let path = golden_path();
        let model = example_model();
        let prior = PriorSpec::new(0.3, 0.2, 0.8, 0.1).unwrap();
        let mut config = TmcmcConfig::default();
        config.target = BayesTarget::PriorOnly;
        config.n_iter = 0;
        config.burn_in = 0;
        let at_mean = prior.log_density(0.8, 0.3);
        for (db, dn) in [(0.1, 0.0), (-0.1, 0.0), (0.0, 0.1), (0.1, -0.1)] {
            assert!(prior.log_density(0.8 + db, 0.3 + dn) < at_mean);
        }
        // and the prior-only chain never touches the path: a run works even
        // with an otherwise degenerate likelihood input
        let trace = run_tmcmc(&path, &model, &prior, &config).unwrap();
        assert_eq!(trace.states.len(), 1);
    }

    #[test]
    fn zero_steps_keep_chain_constant() {
        let path = golden_path();
        let model = example_model();
        let prior = PriorSpec::new(0.0, 0.2, 0.3, 0.1).unwrap();
        let mut config = TmcmcConfig::default();
        config.n_iter = 50;
        config.burn_in = 0;
        config.step_beta = 0.0;
        config.step_nu = 0.0;
        let trace = run_tmcmc(&path, &model, &prior, &config).unwrap();
        assert_eq!(trace.states.len(), 51);
        for s in &trace.states {
            assert_eq!(s.beta, 0.3);
            assert_eq!(s.nu, 0.0);
            assert_eq!(s.h(), 0.5);
        }
    }

    #[test]
    fn prior_recovery_moments() {
        // flat likelihood: the prior is the exact stationary law
        let path = golden_path();
        let model = example_model();
        let prior = PriorSpec::new(0.4, 0.2, 0.1, 0.1).unwrap();
        let mut config = TmcmcConfig::default();
        config.target = BayesTarget::PriorOnly;
        config.n_iter = 40_000;
        config.burn_in = 1000;
        config.seed = 12;
        let trace = run_tmcmc(&path, &model, &prior, &config).unwrap();
        let nus: Vec<f64> = trace.post_burn_in().iter().map(|s| s.nu).collect();
        let ess = effective_sample_size(&nus).unwrap();
        let mean = crate::stats::mean(&nus);
        let sd = crate::stats::variance(&nus).sqrt();
        let se_mean = prior.nu_sd / ess.sqrt();
        assert!((mean - prior.nu_mean).abs() < 3.0 * se_mean, "mean {mean}, se {se_mean}");
        let se_sd = prior.nu_sd * (0.5 / ess).sqrt();
        assert!((sd - prior.nu_sd).abs() < 3.0 * se_sd, "sd {sd}, se {se_sd}");
    }

    #[test]
    fn posterior_chain_stays_in_support_and_reports_rates() {
        let grid = TimeGrid::new(5.0, 50).unwrap();
        let model = example_model();
        let path = crate::path::simulate_sde(
            &model,
            0.7,
            0.5,
            &grid,
            crate::fbm::FbmMethod::CovarianceFactorization,
            8,
        )
        .unwrap();
        let prior = PriorSpec::new(logit(0.97), 0.4, 0.7, 0.3).unwrap();
        let mut config = TmcmcConfig::default();
        config.n_iter = 400;
        config.burn_in = 0;
        config.step_nu = 0.8; // pushes proposals against the upper bound
        config.seed = 3;
        let trace = run_tmcmc(&path, &model, &prior, &config).unwrap();
        for s in &trace.states {
            let h = s.h();
            assert!(h >= config.eta && h <= 1.0 - config.eta);
        }
        assert!(trace.accept_rates.0 > 0.0 && trace.accept_rates.0 < 1.0);
    }

    #[test]
    fn chain_is_deterministic() {
        let path = golden_path();
        let model = example_model();
        let prior = PriorSpec::new(0.2, 0.2, 0.5, 0.1).unwrap();
        let mut config = TmcmcConfig::default();
        config.n_iter = 300;
        config.seed = 9;
        config.burn_in = 10;
        let a = run_tmcmc(&path, &model, &prior, &config).unwrap();
        let b = run_tmcmc(&path, &model, &prior, &config).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x.beta.to_bits(), y.beta.to_bits());
            assert_eq!(x.nu.to_bits(), y.nu.to_bits());
        }
    }

    #[test]
    fn summarize_constant_chain_flags_ess() {
        let states: Vec<BayesState> = (0..100)
            .map(|_| BayesState {
                beta: 1.5,
                nu: 0.0,
                log_post: 0.0,
                stage1_accepted: false,
                stage2_accepted: false,
            })
            .collect();
        let trace = ChainTrace { states, burn_in: 10, thin: 5, accept_rates: (0.0, 0.0) };
        let s = summarize(&trace, 0.95).unwrap();
        assert_eq!(s.mean_beta, 1.5);
        assert_eq!(s.mean_h, 0.5);
        assert_eq!(s.bci_beta, (1.5, 1.5));
        assert!(s.ess_beta.is_none() && s.ess_h.is_none());
    }

    #[test]
    fn summarize_iid_normal_matches_moments() {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let states: Vec<BayesState> = (0..20_000)
            .map(|_| {
                let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                BayesState {
                    beta: 2.0 + 0.5 * z,
                    nu: 0.0,
                    log_post: 0.0,
                    stage1_accepted: true,
                    stage2_accepted: false,
                }
            })
            .collect();
        let trace = ChainTrace { states, burn_in: 0, thin: 1, accept_rates: (1.0, 0.0) };
        let s = summarize(&trace, 0.95).unwrap();
        assert_relative_eq!(s.mean_beta, 2.0, epsilon = 0.02);
        assert_relative_eq!(s.bci_beta.0, 2.0 - 1.96 * 0.5, epsilon = 0.05);
        assert_relative_eq!(s.bci_beta.1, 2.0 + 1.96 * 0.5, epsilon = 0.05);
        let ess = s.ess_beta.unwrap();
        assert!(ess > 15_000.0, "ess = {ess}");
    }

    #[test]
    fn summarize_rejects_overlong_burn_in() {
        let trace = ChainTrace {
            states: vec![
                BayesState {
                    beta: 0.0,
                    nu: 0.0,
                    log_post: 0.0,
                    stage1_accepted: false,
                    stage2_accepted: false,
                };
                5
            ],
            burn_in: 5,
            thin: 1,
            accept_rates: (0.0, 0.0),
        };
        assert!(matches!(summarize(&trace, 0.95), Err(Error::EmptyChain { .. })));
    }

    #[test]
    fn default_priors_follow_case_rules() {
        let mle = MleResult {
            beta_hat: 1.4,
            h_hat: 0.856,
            best_loglik: 0.0,
            init: (0.0, 0.5),
            accept_rate: 0.0,
            trace: None,
        };
        let wide = default_priors(&mle, false);
        assert_eq!(wide.nu_sd, 0.2);
        assert_eq!(wide.beta_sd, 0.1);
        let tight = default_priors(&mle, true);
        assert_eq!(tight.nu_sd, 0.02);
        assert_eq!(tight.beta_sd, 0.01);
        assert_relative_eq!(tight.nu_mean, 1.7824570765657413, max_relative = 1e-12);
        assert_eq!(tight.beta_mean, 1.4);

        let mid = MleResult { h_hat: 0.5, ..mle };
        assert_eq!(default_priors(&mid, false).nu_mean, 0.0);
    }

    #[test]
    fn thinned_export_shape() {
        let states: Vec<BayesState> = (0..=200)
            .map(|i| BayesState {
                beta: i as f64,
                nu: 0.0,
                log_post: 0.0,
                stage1_accepted: false,
                stage2_accepted: false,
            })
            .collect();
        let trace = ChainTrace { states, burn_in: 50, thin: 10, accept_rates: (0.0, 0.0) };
        let rows: Vec<(usize, f64)> = trace.thinned().map(|(i, s)| (i, s.beta)).collect();
        assert_eq!(rows.first(), Some(&(50, 50.0)));
        assert_eq!(rows.len(), 16); // 151 post-burn-in states, one in 10
        assert!(rows.iter().all(|(i, _)| (i - 50) % 10 == 0));
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,beta,nu,h,log_post,stage1_accepted,stage2_accepted\n"));
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = TmcmcConfig::default();
        c.burn_in = c.n_iter + 1;
        assert!(c.validate().is_err());
        let mut c = TmcmcConfig::default();
        c.thin = 0;
        assert!(c.validate().is_err());
        // initial state outside the admissible Hurst range
        let path = golden_path();
        let prior = PriorSpec::new(0.0, 0.2, 0.0, 0.1).unwrap();
        let mut c = TmcmcConfig::default();
        c.init = Some((0.0, 50.0));
        c.n_iter = 1;
        c.burn_in = 0;
        assert!(run_tmcmc(&path, &example_model(), &prior, &c).is_err());
    }
}
