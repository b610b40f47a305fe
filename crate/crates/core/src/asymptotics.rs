//! Normalization constants for the standardized MLE of `beta` and the
//! fixed-wrong-Hurst plug-in experiment.

use crate::error::{Error, Result};
use crate::fbm::{FbmMethod, FbmSampler};
use crate::hurst::{HurstConstants, TimeGrid};
use crate::likelihood::KernelWeightCache;
use crate::mle::BootstrapDistribution;
use crate::model::ModelSpec;
use crate::path::{simulate_with_increments, ObservedPath};
use crate::seeds;
use rayon::prelude::*;
use std::io::Write;

/// Scaling constants of the limiting normal law of the `beta` MLE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationConstants {
    pub h: f64,
    /// Kernel-ratio integral `C_1(H)`; for constant-ratio models this is
    /// `ratio * B(3/2-H, 3/2-H)`.
    pub c1: f64,
    /// Standardization denominator `alpha_H` (or `a_H` in the general
    /// branch).
    pub alpha_h: f64,
    /// The time exponent of the scaling: `1-H` for constant ratio, `2-H`
    /// otherwise.
    pub rate_exponent: f64,
}

/// Constant-ratio branch: `alpha_H = k_H c_H / (4 H (1-H) C_1(H))` with
/// `C_1(H) = ratio * B(3/2-H, 3/2-H)` and rate exponent `1-H`.
pub fn alpha_constant_ratio(h: f64, ratio_value: f64, eta: f64) -> Result<NormalizationConstants> {
    if ratio_value == 0.0 {
        return Err(Error::InvalidConfig("ratio must be nonzero".into()));
    }
    let c = HurstConstants::new(h, eta)?;
    let c1 = ratio_value * c.beta_integral;
    Ok(NormalizationConstants {
        h,
        c1,
        alpha_h: c.k_h * c.c_h / (4.0 * h * (1.0 - h) * c1),
        rate_exponent: 1.0 - h,
    })
}

/// General branch: `a_H = k_H c_H / (2 H C_2)` with a caller-supplied
/// `C_2` value (it has no closed form for non-constant ratios) and rate
/// exponent `2-H`.
pub fn a_general(h: f64, c2_value: f64, eta: f64) -> Result<NormalizationConstants> {
    if c2_value == 0.0 {
        return Err(Error::InvalidConfig("C2 must be nonzero".into()));
    }
    let c = HurstConstants::new(h, eta)?;
    Ok(NormalizationConstants {
        h,
        c1: c2_value,
        alpha_h: c.k_h * c.c_h / (2.0 * h * c2_value),
        rate_exponent: 2.0 - h,
    })
}

/// Standardized statistics `Psi_r = T^{1-h_hat_r} / |alpha(h_hat_r)| *
/// (beta_hat_r - beta0)`, one per bootstrap replicate, with `alpha`
/// evaluated at each replicate's own Hurst estimate.
pub fn standardized_mle(
    boot: &BootstrapDistribution,
    beta0: f64,
    t_max: f64,
    ratio_value: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    boot.replicates
        .iter()
        .map(|r| {
            let norm = alpha_constant_ratio(r.h_hat, ratio_value, eta)?;
            Ok(t_max.powf(norm.rate_exponent) / norm.alpha_h.abs() * (r.beta_hat - beta0))
        })
        .collect()
}

/// `d_H = 2 k_H^{-1} (1-H) C_1(H)`, the drift-curvature constant of the
/// plug-in analysis.
pub fn d_constant_ratio(h: f64, ratio_value: f64, eta: f64) -> Result<f64> {
    let c = HurstConstants::new(h, eta)?;
    Ok(2.0 * (1.0 - h) * ratio_value * c.beta_integral / c.k_h)
}

/// Leading term of the plug-in estimator when `H` is fixed at `h_star`:
/// `beta0 (d_{h0} / d_{h_star}) T^{2 (h_star - h0)}`.
pub fn plug_in_limit(beta0: f64, h0: f64, h_star: f64, t: f64, ratio_value: f64, eta: f64) -> Result<f64> {
    let d0 = d_constant_ratio(h0, ratio_value, eta)?;
    let ds = d_constant_ratio(h_star, ratio_value, eta)?;
    Ok(beta0 * (d0 / ds) * t.powf(2.0 * (h_star - h0)))
}

/// One row of the plug-in experiment.
#[derive(Debug, Clone, Copy)]
pub struct InconsistencyRow {
    pub seed: u64,
    pub t_max: f64,
    pub n: usize,
    pub beta_tilde: f64,
    pub theory: f64,
}

/// Configuration of the plug-in experiment.
#[derive(Debug, Clone)]
pub struct InconsistencyConfig {
    /// Increasing horizons; each is analyzed as a prefix of one path
    /// simulated out to the largest horizon.
    pub t_values: Vec<f64>,
    /// Grid density: the full path gets `ceil(rate * T_max^2)` cells, so
    /// every prefix satisfies `n >= rate * T^2`.
    pub n_rate: f64,
    pub n_seeds: usize,
    pub master_seed: u64,
    pub eta: f64,
}

impl Default for InconsistencyConfig {
    fn default() -> Self {
        Self {
            t_values: vec![5.0, 10.0, 20.0],
            n_rate: 20.0,
            n_seeds: 20,
            master_seed: 0,
            eta: crate::hurst::DEFAULT_ETA,
        }
    }
}

/// Plug-in experiment: simulate at the true `(beta0, h0)`, fix the Hurst
/// value at `h_star` in the drift-integral and variance terms while the
/// data transform keeps the true `h0` (the estimator's divergence is a
/// property of that mismatch), and record the profile estimate of `beta`
/// per horizon. Horizons are nested prefixes of one realization per seed.
pub fn inconsistency_experiment(
    model: &ModelSpec,
    beta0: f64,
    h0: f64,
    h_star: f64,
    config: &InconsistencyConfig,
) -> Result<Vec<InconsistencyRow>> {
    if h_star == h0 {
        return Err(Error::InvalidConfig("h_star must differ from h0".into()));
    }
    if !model.ratio_is_constant() {
        return Err(Error::InvalidConfig(
            "the plug-in experiment needs a constant-ratio model".into(),
        ));
    }
    if config.t_values.is_empty() || config.t_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("t_values must be strictly increasing".into()));
    }
    if !(config.n_rate > 0.0) || config.n_seeds == 0 {
        return Err(Error::InvalidConfig("n_rate and n_seeds must be positive".into()));
    }
    let t_full = *config.t_values.last().unwrap();
    let n_full = (config.n_rate * t_full * t_full).ceil() as usize;
    let full_grid = TimeGrid::new(t_full, n_full)?;
    let dt = full_grid.dt();
    let sampler = FbmSampler::new(h0, full_grid, FbmMethod::CirculantEmbedding)?;

    let rows: Vec<Result<Vec<InconsistencyRow>>> = (0..config.n_seeds)
        .into_par_iter()
        .map(|s| {
            let seed = seeds::derive(config.master_seed, s as u64);
            let increments = sampler.sample(seed);
            let full = simulate_with_increments(model, beta0, &full_grid, &increments)?;
            let mut out = Vec::with_capacity(config.t_values.len());
            for &t in &config.t_values {
                let n = (t / dt).round() as usize;
                let t_snap = dt * n as f64;
                let grid = TimeGrid::new(t_snap, n)?;
                let prefix = ObservedPath::new(grid, full.values()[..=n].to_vec())?;
                let mut cache = KernelWeightCache::new(grid, config.eta);
                let dz0 = crate::likelihood::compute_delta_z(&prefix, model, h0, &mut cache)?;
                let dgs = crate::likelihood::compute_delta_g(&prefix, model, h_star, &mut cache)?;
                let cs = HurstConstants::new(h_star, config.eta)?;
                let e = 2.0 - 2.0 * h_star;
                let c22 = cs.c2 * cs.c2;
                let (mut szg, mut sgg) = (0.0, 0.0);
                for i in 0..n {
                    let v2 = c22 * (grid.point(i + 1).powf(e) - grid.point(i).powf(e));
                    szg += dz0[i] * dgs[i] / v2;
                    sgg += dgs[i] * dgs[i] / v2;
                }
                if sgg == 0.0 {
                    return Err(Error::DegenerateDesign);
                }
                out.push(InconsistencyRow {
                    seed,
                    t_max: t_snap,
                    n,
                    beta_tilde: szg / sgg,
                    theory: plug_in_limit(beta0, h0, h_star, t_snap, model.ratio_value(), config.eta)?,
                });
            }
            Ok(out)
        })
        .collect();

    let mut flat = Vec::new();
    for r in rows {
        flat.extend(r?);
    }
    Ok(flat)
}

/// Writes `T,n,beta_tilde,theory_prediction,seed` rows.
pub fn write_inconsistency_csv(rows: &[InconsistencyRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "T,n,beta_tilde,theory_prediction,seed")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.t_max, r.n, r.beta_tilde, r.theory, r.seed)?;
    }
    Ok(())
}
