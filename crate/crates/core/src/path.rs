//! Observed paths and Euler integration of the SDE.

use crate::error::{Error, Result};
use crate::fbm::{FbmMethod, FbmSampler};
use crate::hurst::TimeGrid;
use crate::model::ModelSpec;
use std::io::{BufRead, Write};

/// A path observed on a uniform grid: `values[i] = X_{t_i}`, `i = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedPath {
    grid: TimeGrid,
    values: Vec<f64>,
    seed: Option<u64>,
    true_params: Option<(f64, f64)>,
}

impl ObservedPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() + 1 {
            return Err(Error::PathLength { len: values.len(), expected: grid.n() + 1 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinitePath { index: i });
        }
        Ok(Self { grid, values, seed: None, true_params: None })
    }

    pub fn with_provenance(mut self, seed: u64, beta: f64, h: f64) -> Self {
        self.seed = Some(seed);
        self.true_params = Some((beta, h));
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `(beta, h)` the path was simulated under, when known.
    pub fn true_params(&self) -> Option<(f64, f64)> {
        self.true_params
    }

    /// Writes `index,t,x` rows, one per grid point.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "index,t,x")?;
        for (i, x) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{}", i, self.grid.point(i), x)?;
        }
        Ok(())
    }

    /// Reads a path written by [`ObservedPath::write_csv`]. The time column
    /// fixes `t_max`; the grid is reconstructed from the row count.
    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut values = Vec::new();
        let mut t_last = 0.0;
        for line in r.lines() {
            let line = line.map_err(|e| Error::InvalidConfig(format!("path csv: {e}")))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("index") {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(_), Some(t), Some(x)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::InvalidConfig(format!("path csv: short row `{line}`")));
            };
            t_last = t
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("path csv time: {e}")))?;
            values.push(
                x.parse::<f64>()
                    .map_err(|e| Error::InvalidConfig(format!("path csv value: {e}")))?,
            );
        }
        if values.len() < 2 {
            return Err(Error::InvalidConfig("path csv: need at least 2 rows".into()));
        }
        let grid = TimeGrid::new(t_last, values.len() - 1)?;
        Self::new(grid, values)
    }
}

/// Euler step sequence `X_{i+1} = X_i + beta B(t_i, X_i) dt + C(t_i, X_i) dW_i`
/// driven by explicitly supplied increments (all-zero increments give the
/// deterministic skeleton).
pub fn simulate_with_increments(
    model: &ModelSpec,
    beta: f64,
    grid: &TimeGrid,
    increments: &[f64],
) -> Result<ObservedPath> {
    if increments.len() != grid.n() {
        return Err(Error::IncrementLength { len: increments.len(), expected: grid.n() });
    }
    let dt = grid.dt();
    let mut values = Vec::with_capacity(grid.n() + 1);
    let mut x = model.x0();
    values.push(x);
    for (i, dw) in increments.iter().enumerate() {
        let t = grid.point(i);
        let c = model.diffusion_c(t, x);
        if c == 0.0 {
            return Err(Error::ZeroDiffusion { index: i, t, x });
        }
        x = x + beta * model.drift_b(t, x) * dt + c * dw;
        if !x.is_finite() {
            return Err(Error::NonFinitePath { index: i + 1 });
        }
        values.push(x);
    }
    ObservedPath::new(*grid, values)
}

/// Simulates the SDE with fBm increments drawn from `sampler` under `seed`.
pub fn simulate_with_sampler(
    model: &ModelSpec,
    beta: f64,
    sampler: &FbmSampler,
    seed: u64,
) -> Result<ObservedPath> {
    let increments = sampler.sample(seed);
    let path = simulate_with_increments(model, beta, sampler.grid(), &increments)?;
    Ok(path.with_provenance(seed, beta, sampler.h()))
}

/// One-shot simulation: builds a sampler for `(h, grid, method)` and runs
/// the Euler recursion.
pub fn simulate_sde(
    model: &ModelSpec,
    beta: f64,
    h: f64,
    grid: &TimeGrid,
    method: FbmMethod,
    seed: u64,
) -> Result<ObservedPath> {
    let sampler = FbmSampler::new(h, *grid, method)?;
    simulate_with_sampler(model, beta, &sampler, seed)
}
