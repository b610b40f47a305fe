//! SDE model specification: drift multiplier structure `beta * B(t, x)` and
//! diffusion coefficient `C(t, x)`.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

type Coeff = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift/diffusion pair for `dX = beta * B(t,X) dt + C(t,X) dW^H` plus the
/// initial state and the (declared) structure of the ratio `B/C`.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    drift_b: Coeff,
    diffusion_c: Coeff,
    ratio_is_constant: bool,
    ratio_value: f64,
    x0: f64,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("ratio_is_constant", &self.ratio_is_constant)
            .field("ratio_value", &self.ratio_value)
            .field("x0", &self.x0)
            .finish()
    }
}

impl ModelSpec {
    /// Model whose ratio `B/C` is the constant `ratio_value`. The claim is
    /// spot-checked on a 10x10 probe grid away from diffusion zeros.
    pub fn constant_ratio(
        name: impl Into<String>,
        drift_b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        diffusion_c: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        ratio_value: f64,
        x0: f64,
    ) -> Result<Self> {
        let model = Self {
            name: name.into(),
            drift_b: Arc::new(drift_b),
            diffusion_c: Arc::new(diffusion_c),
            ratio_is_constant: true,
            ratio_value,
            x0,
        };
        for i in 0..10 {
            for j in 0..10 {
                let t = i as f64 / 9.0;
                let x = -0.9 + 0.2 * j as f64;
                let c = (model.diffusion_c)(t, x);
                if c == 0.0 {
                    continue;
                }
                let found = (model.drift_b)(t, x) / c;
                if (found - ratio_value).abs() > 1e-9 * ratio_value.abs().max(1.0) {
                    return Err(Error::RatioMismatch { t, x, found, declared: ratio_value });
                }
            }
        }
        Ok(model)
    }

    /// Model with no constant-ratio structure; the drift integral is then
    /// evaluated by kernel quadrature instead of the closed form.
    pub fn general(
        name: impl Into<String>,
        drift_b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        diffusion_c: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        x0: f64,
    ) -> Self {
        Self {
            name: name.into(),
            drift_b: Arc::new(drift_b),
            diffusion_c: Arc::new(diffusion_c),
            ratio_is_constant: false,
            ratio_value: f64::NAN,
            x0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn drift_b(&self, t: f64, x: f64) -> f64 {
        (self.drift_b)(t, x)
    }

    pub fn diffusion_c(&self, t: f64, x: f64) -> f64 {
        (self.diffusion_c)(t, x)
    }

    pub fn ratio_is_constant(&self) -> bool {
        self.ratio_is_constant
    }

    /// Constant value of `B/C`; meaningful only when `ratio_is_constant`.
    pub fn ratio_value(&self) -> f64 {
        self.ratio_value
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
}

/// The mean-reverting example model `dX = beta (1−X) dt + (1−X) dW^H`,
/// started at 0; `B/C = 1`.
pub fn example_model() -> ModelSpec {
    ModelSpec::constant_ratio("example", |_, x| 1.0 - x, |_, x| 1.0 - x, 1.0, 0.0)
        .expect("example model has ratio 1 by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_model_values() {
        let m = example_model();
        assert_eq!(m.drift_b(0.0, 0.3), 0.7);
        assert_eq!(m.diffusion_c(2.0, 0.3), 0.7);
        assert_eq!(m.ratio_value(), 1.0);
        assert!(m.ratio_is_constant());
        assert_eq!(m.x0(), 0.0);
        // diffusion vanishes at the model boundary x = 1
        assert_eq!(m.diffusion_c(0.0, 1.0), 0.0);
    }

    #[test]
    fn ratio_probe_rejects_mislabeled_model() {
        let err = ModelSpec::constant_ratio("bad", |_, x| 2.0 * (1.0 - x), |_, x| 1.0 - x, 1.0, 0.0);
        assert!(matches!(err, Err(Error::RatioMismatch { .. })));
    }

    #[test]
    fn general_model_carries_coefficients() {
        let m = ModelSpec::general("ramp", |t, _| t, |_, _| 1.0, 0.0);
        assert!(!m.ratio_is_constant());
        assert_eq!(m.drift_b(0.25, 9.0), 0.25);
        assert_eq!(m.diffusion_c(0.25, 9.0), 1.0);
    }
}
