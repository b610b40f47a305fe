//! Kernel transform of an observed path into near-independent Gaussian
//! increments, and the log-likelihood over `(beta, H)`.
//!
//! The observed increments are rescaled by the diffusion coefficient at the
//! left endpoint of each cell (so the noise enters linearly) and pushed
//! through the singular kernel `k_H(t, s)`. On a uniform grid the kernel
//! factors into a per-cell term `u_j = s*_j^{1/2-H}` and a lag term `v_m`
//! holding the exact cell integral of `(t-s)^{1/2-H}`, which makes each
//! transform a discrete convolution. The reported value is the log-density
//! of the observed increments under the discretized model: the Gaussian
//! factor of the martingale increments plus the log-Jacobian of the
//! triangular transform (the Jacobian vanishes at `H = 1/2`).

use crate::error::{Error, Result};
use crate::hurst::{HurstConstants, TimeGrid};
use crate::model::ModelSpec;
use crate::path::ObservedPath;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::io::Write;
use std::sync::Arc;

/// Grid size from which kernel sums run through an FFT convolution instead
/// of the direct triangular loop.
const FFT_MIN_N: usize = 512;

/// Per-Hurst kernel weight tables with exact-match caching.
///
/// Holds the logarithm tables that make an `H` change cost `O(n)`
/// exponentiations, the current factor arrays `u`, `v`, and the
/// log-Jacobian of the induced triangular map. The full triangular weight
/// `k_H(t_i, s*_j)`-style entry is exposed through [`KernelWeightCache::weight`].
pub struct KernelWeightCache {
    grid: TimeGrid,
    eta: f64,
    ln_s_mid: Vec<f64>,
    sum_ln_s_mid_tail: f64, // cells 1.., cell 0 is integrated exactly
    ln_lag: Vec<f64>,       // ln(m), m = 1..=n
    last_h: Option<f64>,
    consts: Option<HurstConstants>,
    u: Vec<f64>,
    v: Vec<f64>,
    log_det: f64,
}

impl KernelWeightCache {
    pub fn new(grid: TimeGrid, eta: f64) -> Self {
        let n = grid.n();
        let ln_s_mid: Vec<f64> = (0..n).map(|j| grid.midpoint(j).ln()).collect();
        let sum_ln_s_mid_tail = ln_s_mid[1..].iter().sum();
        let ln_lag = (1..=n).map(|m| (m as f64).ln()).collect();
        Self {
            grid,
            eta,
            ln_s_mid,
            sum_ln_s_mid_tail,
            ln_lag,
            last_h: None,
            consts: None,
            u: Vec::new(),
            v: Vec::new(),
            log_det: 0.0,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Rebuilds the factor tables unless `h` matches the cached value
    /// exactly.
    pub fn ensure(&mut self, h: f64) -> Result<()> {
        if self.last_h == Some(h) {
            return Ok(());
        }
        let consts = HurstConstants::new(h, self.eta)?;
        let n = self.grid.n();
        let dt = self.grid.dt();
        let p = 0.5 - h;
        let q = 1.0 + p; // 3/2 - H > 0
        let dt_p = dt.powf(p);
        // cell 0 touches the s = 0 singularity: use the exact cell mean of
        // s^p there; midpoints are accurate enough on the smooth cells
        self.u.clear();
        self.u.push(dt_p / q);
        self.u
            .extend(self.ln_s_mid[1..].iter().map(|ls| (p * ls).exp()));
        // v_m = dt^p (m^q - (m-1)^q) / q, the exact cell integral of the
        // singular factor at lag m (divided by the cell width)
        self.v.clear();
        self.v.reserve(n);
        let mut prev = 0.0; // 0^q
        for m in 0..n {
            let cur = (q * self.ln_lag[m]).exp();
            self.v.push(dt_p * (cur - prev) / q);
            prev = cur;
        }
        // det of the triangular map: product of newest-cell weights u_i v_1 / k_H
        self.log_det = p * self.sum_ln_s_mid_tail + (p * dt.ln() - q.ln())
            + n as f64 * ((self.v[0]).ln() - consts.k_h.ln());
        self.last_h = Some(h);
        self.consts = Some(consts);
        Ok(())
    }

    /// Hurst constants for the cached `h`.
    pub fn constants(&self) -> &HurstConstants {
        self.consts.as_ref().expect("cache not built; call ensure() first")
    }

    /// Log-Jacobian of the increment map at the cached `h`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Kernel quadrature weight of cell `j` in `Z_{t_i}` (`j < i`,
    /// `1 <= i <= n`) at the cached `h`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        assert!(j < i && i <= self.grid.n());
        self.u[j] * self.v[i - j - 1] / self.constants().k_h
    }
}

/// FFT plans and scratch for large-grid kernel sums.
pub struct FftConvolver {
    len: usize,
    fft_len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf_a: Vec<Complex<f64>>,
    buf_b: Vec<Complex<f64>>,
}

impl FftConvolver {
    pub fn new(n: usize) -> Self {
        let fft_len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            len: n,
            fft_len,
            fwd: planner.plan_fft_forward(fft_len),
            inv: planner.plan_fft_inverse(fft_len),
            buf_a: vec![Complex::new(0.0, 0.0); fft_len],
            buf_b: vec![Complex::new(0.0, 0.0); fft_len],
        }
    }

    /// First `n` entries of the linear convolution `a * b`.
    fn convolve_prefix(&mut self, a: &[f64], b: &[f64], out: &mut Vec<f64>) {
        let m = self.fft_len;
        for c in self.buf_a.iter_mut() {
            *c = Complex::new(0.0, 0.0);
        }
        for c in self.buf_b.iter_mut() {
            *c = Complex::new(0.0, 0.0);
        }
        for (i, x) in a.iter().enumerate() {
            self.buf_a[i].re = *x;
        }
        for (i, x) in b.iter().enumerate() {
            self.buf_b[i].re = *x;
        }
        self.fwd.process(&mut self.buf_a);
        self.fwd.process(&mut self.buf_b);
        for (x, y) in self.buf_a.iter_mut().zip(&self.buf_b) {
            *x *= *y;
        }
        self.inv.process(&mut self.buf_a);
        out.clear();
        out.extend(self.buf_a[..self.len].iter().map(|c| c.re / m as f64));
    }
}

/// `Z_{t_i}` for `i = 1..=n` from weighted cell values: direct triangular
/// sum below [`FFT_MIN_N`], FFT convolution above.
fn kernel_partial_sums(
    weighted: &[f64],
    v: &[f64],
    k_h: f64,
    convolver: Option<&mut FftConvolver>,
    out: &mut Vec<f64>,
) {
    let n = weighted.len();
    match convolver {
        Some(c) if n >= FFT_MIN_N => {
            c.convolve_prefix(weighted, v, out);
            for z in out.iter_mut() {
                *z /= k_h;
            }
        }
        _ => {
            out.clear();
            out.reserve(n);
            for i in 1..=n {
                let mut acc = 0.0;
                for j in 0..i {
                    acc += weighted[j] * v[i - j - 1];
                }
                out.push(acc / k_h);
            }
        }
    }
}

/// Diffusion-rescaled increments `y_j = (X_{t_{j+1}} - X_{t_j}) / C(t_j, X_{t_j})`.
fn build_y(path: &ObservedPath, model: &ModelSpec) -> Result<Vec<f64>> {
    let grid = path.grid();
    let xs = path.values();
    let mut y = Vec::with_capacity(grid.n());
    for j in 0..grid.n() {
        let t = grid.point(j);
        let c = model.diffusion_c(t, xs[j]);
        if c == 0.0 {
            return Err(Error::ZeroDiffusion { index: j, t, x: xs[j] });
        }
        y.push((xs[j + 1] - xs[j]) / c);
    }
    Ok(y)
}

/// Drift-over-diffusion values at cell midpoints, `(B/C)(s*_j, X-bar_j)`,
/// for models without constant-ratio structure.
fn build_ratio_mid(path: &ObservedPath, model: &ModelSpec) -> Result<Vec<f64>> {
    let grid = path.grid();
    let xs = path.values();
    let mut g = Vec::with_capacity(grid.n());
    for j in 0..grid.n() {
        let s = grid.midpoint(j);
        let x_bar = 0.5 * (xs[j] + xs[j + 1]);
        let c = model.diffusion_c(s, x_bar);
        if c == 0.0 {
            return Err(Error::ZeroDiffusion { index: j, t: s, x: x_bar });
        }
        g.push(model.drift_b(s, x_bar) / c);
    }
    Ok(g)
}

/// Per-cell decomposition of a path at one `(beta, H)`: transform
/// increments, drift-integral increments, martingale residuals and their
/// model variances.
#[derive(Debug, Clone)]
pub struct MartingaleDecomposition {
    pub delta_z: Vec<f64>,
    pub delta_g: Vec<f64>,
    pub delta_m: Vec<f64>,
    pub v_sq: Vec<f64>,
    pub h: f64,
    pub beta: f64,
}

impl MartingaleDecomposition {
    /// Writes `i,t,delta_z,delta_g,delta_m,v_sq` rows (t is the right
    /// endpoint of cell `i`).
    pub fn write_csv(&self, grid: &TimeGrid, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "i,t,delta_z,delta_g,delta_m,v_sq")?;
        for i in 0..self.delta_z.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                i,
                grid.point(i + 1),
                self.delta_z[i],
                self.delta_g[i],
                self.delta_m[i],
                self.v_sq[i]
            )?;
        }
        Ok(())
    }
}

/// Log-likelihood value and the number of increment terms behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub n_terms: usize,
}

impl LogLikelihood {
    /// The minimization objective `-2 log L`.
    pub fn neg_two_log(&self) -> f64 {
        -2.0 * self.value
    }
}

/// Reusable evaluator binding one `(path, model)` pair: precomputes the
/// diffusion-rescaled increments once and owns the kernel cache plus FFT
/// scratch, so that each new `H` costs `O(n)` exponentiations and one
/// convolution. Chains and workers each own their engine.
pub struct LikelihoodEngine {
    grid: TimeGrid,
    y: Vec<f64>,
    ratio_mid: Option<Vec<f64>>, // general-ratio models only
    ratio_const: Option<f64>,
    cache: KernelWeightCache,
    convolver: Option<FftConvolver>,
    weighted: Vec<f64>,
    z: Vec<f64>,
    zg: Vec<f64>,
}

/// Sufficient statistics of the exact-in-`beta` quadratic log-likelihood at
/// a fixed `H`.
#[derive(Debug, Clone, Copy)]
pub struct ProfileSums {
    /// `beta`-free part: Gaussian normalizers plus the log-Jacobian.
    pub base: f64,
    /// `sum dz_i^2 / v2_i`
    pub szz: f64,
    /// `sum dz_i dg_i / v2_i`
    pub szg: f64,
    /// `sum dg_i^2 / v2_i`
    pub sgg: f64,
    pub n_terms: usize,
}

impl ProfileSums {
    pub fn log_likelihood_at(&self, beta: f64) -> f64 {
        self.base - 0.5 * (self.szz - 2.0 * beta * self.szg + beta * beta * self.sgg)
    }

    pub fn profile_beta(&self) -> Result<f64> {
        if self.sgg == 0.0 {
            return Err(Error::DegenerateDesign);
        }
        Ok(self.szg / self.sgg)
    }
}

impl LikelihoodEngine {
    pub fn new(path: &ObservedPath, model: &ModelSpec, eta: f64) -> Result<Self> {
        let grid = *path.grid();
        let y = build_y(path, model)?;
        let (ratio_mid, ratio_const) = if model.ratio_is_constant() {
            (None, Some(model.ratio_value()))
        } else {
            (Some(build_ratio_mid(path, model)?), None)
        };
        let n = grid.n();
        Ok(Self {
            grid,
            y,
            ratio_mid,
            ratio_const,
            cache: KernelWeightCache::new(grid, eta),
            convolver: (n >= FFT_MIN_N).then(|| FftConvolver::new(n)),
            weighted: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            zg: Vec::with_capacity(n),
        })
    }

    pub fn eta(&self) -> f64 {
        self.cache.eta()
    }

    fn delta_from_partial(z: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(z.len());
        let mut prev = 0.0;
        for zi in z {
            out.push(zi - prev);
            prev = *zi;
        }
        out
    }

    /// Transform increments `dZ_i` at `h`.
    fn delta_z(&mut self, h: f64) -> Result<Vec<f64>> {
        self.cache.ensure(h)?;
        self.weighted.clear();
        self.weighted.extend(self.cache.u.iter().zip(&self.y).map(|(u, y)| u * y));
        kernel_partial_sums(
            &self.weighted,
            &self.cache.v,
            self.cache.constants().k_h,
            self.convolver.as_mut(),
            &mut self.z,
        );
        Ok(Self::delta_from_partial(&self.z))
    }

    /// Drift-integral increments `dG_i` at `h` (`beta` excluded): closed
    /// form for constant-ratio models, kernel quadrature otherwise.
    fn delta_g(&mut self, h: f64) -> Result<Vec<f64>> {
        self.cache.ensure(h)?;
        let consts = *self.cache.constants();
        if let Some(r) = self.ratio_const {
            let e = 2.0 - 2.0 * h;
            let scale = r * consts.beta_integral / consts.k_h;
            return Ok((0..self.grid.n())
                .map(|i| {
                    scale * (self.grid.point(i + 1).powf(e) - self.grid.point(i).powf(e))
                })
                .collect());
        }
        let ratio = self.ratio_mid.as_ref().expect("general model has midpoint ratios");
        let dt = self.grid.dt();
        self.weighted.clear();
        self.weighted
            .extend(self.cache.u.iter().zip(ratio).map(|(u, g)| u * g * dt));
        kernel_partial_sums(
            &self.weighted,
            &self.cache.v,
            consts.k_h,
            self.convolver.as_mut(),
            &mut self.zg,
        );
        Ok(Self::delta_from_partial(&self.zg))
    }

    fn v_squared(&self, h: f64) -> Vec<f64> {
        let consts = self.cache.constants();
        let e = 2.0 - 2.0 * h;
        let c = consts.c2 * consts.c2;
        (0..self.grid.n())
            .map(|i| c * (self.grid.point(i + 1).powf(e) - self.grid.point(i).powf(e)))
            .collect()
    }

    /// Full decomposition at `(beta, h)`.
    pub fn decompose(&mut self, beta: f64, h: f64) -> Result<MartingaleDecomposition> {
        let delta_z = self.delta_z(h)?;
        let delta_g = self.delta_g(h)?;
        let v_sq = self.v_squared(h);
        let delta_m = delta_z
            .iter()
            .zip(&delta_g)
            .map(|(z, g)| z - beta * g)
            .collect();
        Ok(MartingaleDecomposition { delta_z, delta_g, delta_m, v_sq, h, beta })
    }

    /// Log-density of the observed increments at `(beta, h)`.
    pub fn log_likelihood(&mut self, beta: f64, h: f64) -> Result<LogLikelihood> {
        let d = self.decompose(beta, h)?;
        let mut value = self.cache.log_det();
        for i in 0..d.delta_m.len() {
            value += -0.5 * LN_2PI - 0.5 * d.v_sq[i].ln()
                - d.delta_m[i] * d.delta_m[i] / (2.0 * d.v_sq[i]);
        }
        Ok(LogLikelihood { value, n_terms: d.delta_m.len() })
    }

    /// Quadratic sufficient statistics at `h`; one transform serves any
    /// number of `beta` evaluations.
    pub fn sums(&mut self, h: f64) -> Result<ProfileSums> {
        let delta_z = self.delta_z(h)?;
        let delta_g = self.delta_g(h)?;
        let v_sq = self.v_squared(h);
        let mut base = self.cache.log_det();
        let (mut szz, mut szg, mut sgg) = (0.0, 0.0, 0.0);
        for i in 0..delta_z.len() {
            base += -0.5 * LN_2PI - 0.5 * v_sq[i].ln();
            szz += delta_z[i] * delta_z[i] / v_sq[i];
            szg += delta_z[i] * delta_g[i] / v_sq[i];
            sgg += delta_g[i] * delta_g[i] / v_sq[i];
        }
        Ok(ProfileSums { base, szz, szg, sgg, n_terms: delta_z.len() })
    }

    /// Exact maximizer of the log-likelihood in `beta` at fixed `h`.
    pub fn profile_beta(&mut self, h: f64) -> Result<f64> {
        self.sums(h)?.profile_beta()
    }
}

const LN_2PI: f64 = 1.8378770664093453;

fn check_cache_grid(path: &ObservedPath, cache: &KernelWeightCache) -> Result<()> {
    if path.grid() != cache.grid() {
        return Err(Error::InvalidConfig(
            "kernel cache was built for a different grid".into(),
        ));
    }
    Ok(())
}

/// Transform increments `dZ_i` of `path` at Hurst value `h`.
pub fn compute_delta_z(
    path: &ObservedPath,
    model: &ModelSpec,
    h: f64,
    cache: &mut KernelWeightCache,
) -> Result<Vec<f64>> {
    check_cache_grid(path, cache)?;
    cache.ensure(h)?;
    let y = build_y(path, model)?;
    let weighted: Vec<f64> = cache.u.iter().zip(&y).map(|(u, y)| u * y).collect();
    let mut z = Vec::new();
    let mut conv = (path.grid().n() >= FFT_MIN_N).then(|| FftConvolver::new(path.grid().n()));
    kernel_partial_sums(&weighted, &cache.v, cache.constants().k_h, conv.as_mut(), &mut z);
    Ok(LikelihoodEngine::delta_from_partial(&z))
}

/// Drift-integral increments `dG_i` of `path` at `h` (excluding `beta`).
pub fn compute_delta_g(
    path: &ObservedPath,
    model: &ModelSpec,
    h: f64,
    cache: &mut KernelWeightCache,
) -> Result<Vec<f64>> {
    check_cache_grid(path, cache)?;
    cache.ensure(h)?;
    let grid = path.grid();
    let consts = *cache.constants();
    if model.ratio_is_constant() {
        let e = 2.0 - 2.0 * h;
        let scale = model.ratio_value() * consts.beta_integral / consts.k_h;
        return Ok((0..grid.n())
            .map(|i| scale * (grid.point(i + 1).powf(e) - grid.point(i).powf(e)))
            .collect());
    }
    let ratio = build_ratio_mid(path, model)?;
    let dt = grid.dt();
    let weighted: Vec<f64> = cache.u.iter().zip(&ratio).map(|(u, g)| u * g * dt).collect();
    let mut zg = Vec::new();
    let mut conv = (grid.n() >= FFT_MIN_N).then(|| FftConvolver::new(grid.n()));
    kernel_partial_sums(&weighted, &cache.v, consts.k_h, conv.as_mut(), &mut zg);
    Ok(LikelihoodEngine::delta_from_partial(&zg))
}

/// Full decomposition of `path` at `(beta, h)`.
pub fn decompose(
    path: &ObservedPath,
    model: &ModelSpec,
    beta: f64,
    h: f64,
    cache: &mut KernelWeightCache,
) -> Result<MartingaleDecomposition> {
    let delta_z = compute_delta_z(path, model, h, cache)?;
    let delta_g = compute_delta_g(path, model, h, cache)?;
    let consts = cache.constants();
    let e = 2.0 - 2.0 * h;
    let c = consts.c2 * consts.c2;
    let grid = path.grid();
    let v_sq: Vec<f64> = (0..grid.n())
        .map(|i| c * (grid.point(i + 1).powf(e) - grid.point(i).powf(e)))
        .collect();
    let delta_m = delta_z.iter().zip(&delta_g).map(|(z, g)| z - beta * g).collect();
    Ok(MartingaleDecomposition { delta_z, delta_g, delta_m, v_sq, h, beta })
}

/// Log-density of the observed increments of `path` at `(beta, h)`.
pub fn log_likelihood(
    path: &ObservedPath,
    model: &ModelSpec,
    beta: f64,
    h: f64,
    cache: &mut KernelWeightCache,
) -> Result<LogLikelihood> {
    let d = decompose(path, model, beta, h, cache)?;
    let mut value = cache.log_det();
    for i in 0..d.delta_m.len() {
        value += -0.5 * LN_2PI - 0.5 * d.v_sq[i].ln()
            - d.delta_m[i] * d.delta_m[i] / (2.0 * d.v_sq[i]);
    }
    Ok(LogLikelihood { value, n_terms: d.delta_m.len() })
}

/// Exact maximizer of the log-likelihood in `beta` at fixed `h`.
pub fn profile_beta(
    path: &ObservedPath,
    model: &ModelSpec,
    h: f64,
    cache: &mut KernelWeightCache,
) -> Result<f64> {
    let d = decompose(path, model, 0.0, h, cache)?;
    let (mut szg, mut sgg) = (0.0, 0.0);
    for i in 0..d.delta_z.len() {
        szg += d.delta_z[i] * d.delta_g[i] / d.v_sq[i];
        sgg += d.delta_g[i] * d.delta_g[i] / d.v_sq[i];
    }
    if sgg == 0.0 {
        return Err(Error::DegenerateDesign);
    }
    Ok(szg / sgg)
}
