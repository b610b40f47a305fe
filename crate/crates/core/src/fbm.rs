//! Exact synthesis of fractional Gaussian noise (fBm increments) on a
//! uniform grid.
//!
//! Two exact methods: a dense covariance factorization (Cholesky of the
//! Toeplitz increment covariance, cubic setup) and circulant embedding
//! (Davies-Harte, `O(n log n)` per draw). Increments are sampled directly in
//! stationary form rather than as level differences; the increment
//! covariance is better conditioned than the level covariance.

use crate::error::{Error, Result};
use crate::hurst::TimeGrid;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Which factorization backs the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbmMethod {
    /// Dense Cholesky factor of the n x n increment covariance.
    CovarianceFactorization,
    /// Davies-Harte circulant embedding of size 2n.
    CirculantEmbedding,
}

enum Factor {
    Cholesky(DMatrix<f64>),
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
}

/// Seeded generator of fBm increments `ΔW^H_i` on a fixed grid.
///
/// Immutable once built; one factorization serves any number of draws and
/// can be shared across threads.
pub struct FbmSampler {
    h: f64,
    grid: TimeGrid,
    method: FbmMethod,
    factor: Factor,
}

/// Autocovariance of fBm increments at integer lag `k` on a grid with step
/// `dt`: `0.5 (|k+1|^{2H} − 2|k|^{2H} + |k−1|^{2H}) dt^{2H}`.
pub fn increment_autocovariance(h: f64, k: usize, dt: f64) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e)) * dt.powf(e)
}

impl FbmSampler {
    pub fn new(h: f64, grid: TimeGrid, method: FbmMethod) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) || !h.is_finite() {
            return Err(Error::HurstOutOfRange { h, lo: 0.0, hi: 1.0 });
        }
        let n = grid.n();
        let dt = grid.dt();
        let factor = match method {
            FbmMethod::CovarianceFactorization => {
                let cov = DMatrix::from_fn(n, n, |i, j| {
                    increment_autocovariance(h, i.abs_diff(j), dt)
                });
                let chol = cov.cholesky().ok_or_else(|| Error::Factorization {
                    h,
                    n,
                    reason: "increment covariance is not positive definite".into(),
                })?;
                Factor::Cholesky(chol.unpack())
            }
            FbmMethod::CirculantEmbedding => {
                let m = 2 * n;
                let mut row = vec![Complex::new(0.0, 0.0); m];
                for k in 0..=n {
                    row[k].re = increment_autocovariance(h, k, dt);
                }
                for k in 1..n {
                    row[m - k].re = row[k].re;
                }
                let mut planner = FftPlanner::new();
                let fft = planner.plan_fft_forward(m);
                fft.process(&mut row);
                let scale = increment_autocovariance(h, 0, dt) * m as f64;
                let mut sqrt_eig = Vec::with_capacity(m);
                for ev in &row {
                    let lambda = ev.re;
                    if lambda < -1e-9 * scale {
                        return Err(Error::Factorization {
                            h,
                            n,
                            reason: format!("circulant embedding eigenvalue {lambda} < 0"),
                        });
                    }
                    sqrt_eig.push(lambda.max(0.0).sqrt());
                }
                Factor::Circulant { sqrt_eig, fft }
            }
        };
        Ok(Self { h, grid, method, factor })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn method(&self) -> FbmMethod {
        self.method
    }

    /// Draws the `n` increments deterministically from `seed`.
    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = self.grid.n();
        let normal = |rng: &mut ChaCha12Rng| -> f64 { StandardNormal.sample(rng) };
        match &self.factor {
            Factor::Cholesky(l) => {
                let z = DVector::from_fn(n, |_, _| normal(&mut rng));
                let mut out = vec![0.0; n];
                // forward substitution through the lower factor
                let y = l * z;
                out.copy_from_slice(y.as_slice());
                out
            }
            Factor::Circulant { sqrt_eig, fft } => {
                let m = 2 * n;
                let root_m = (m as f64).sqrt();
                let root_2m = (2.0 * m as f64).sqrt();
                let mut a = vec![Complex::new(0.0, 0.0); m];
                let z_head: Vec<f64> = (0..=n).map(|_| normal(&mut rng)).collect();
                let z_tail: Vec<f64> = (0..n.saturating_sub(1)).map(|_| normal(&mut rng)).collect();
                a[0].re = sqrt_eig[0] / root_m * z_head[0];
                a[n].re = sqrt_eig[n] / root_m * z_head[n];
                for k in 1..n {
                    let s = sqrt_eig[k] / root_2m;
                    a[k] = Complex::new(s * z_head[k], s * z_tail[k - 1]);
                    a[m - k] = a[k].conj();
                }
                fft.process(&mut a);
                a[..n].iter().map(|c| c.re).collect()
            }
        }
    }
}
