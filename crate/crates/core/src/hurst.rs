//! Hurst-dependent constants, the singular kernel and deterministic time
//! transforms.
//!
//! Everything here is a pure function of the Hurst parameter `H` and the
//! observation grid. The constants collapse to 1 at `H = 1/2`, where the
//! driving noise is ordinary Brownian motion.

use crate::error::{Error, Result};
use statrs::function::gamma::gamma;

/// Default half-width `eta` of the admissible Hurst range `[eta, 1 - eta]`.
pub const DEFAULT_ETA: f64 = 0.01;

/// All Hurst-dependent scalars needed by the likelihood and the asymptotic
/// normalizations, for one value of `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstConstants {
    /// Hurst parameter the constants were built for.
    pub h: f64,
    /// Normalizer of the singular kernel: `2H Γ(3/2−H) Γ(H+1/2)`.
    pub k_h: f64,
    /// Time-transform normalizer: `2H Γ(3−2H) Γ(H+1/2) / Γ(3/2−H)`.
    pub lambda_h: f64,
    /// Martingale scale: `sqrt(2H Γ(3/2−H) / (Γ(H+1/2) Γ(2−2H)))`.
    pub c_h: f64,
    /// Martingale variance multiplier: `c_h / (2H sqrt(2−2H))`.
    pub c2: f64,
    /// `B(3/2−H, 3/2−H) = Γ(3/2−H)² / Γ(3−2H)`, the kernel's total mass
    /// factor; shared by the drift integral and the normality constants.
    pub beta_integral: f64,
}

impl HurstConstants {
    /// Builds the constant set, rejecting `h` outside `[eta, 1 - eta]`.
    pub fn new(h: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 0.5) || !eta.is_finite() {
            return Err(Error::InvalidEta(eta));
        }
        if !h.is_finite() || h < eta || h > 1.0 - eta {
            return Err(Error::HurstOutOfRange { h, lo: eta, hi: 1.0 - eta });
        }
        let g_a = gamma(1.5 - h); // Γ(3/2−H)
        let g_b = gamma(h + 0.5); // Γ(H+1/2)
        let g_c = gamma(2.0 - 2.0 * h); // Γ(2−2H)
        let g_d = gamma(3.0 - 2.0 * h); // Γ(3−2H)
        let k_h = 2.0 * h * g_a * g_b;
        let lambda_h = 2.0 * h * g_d * g_b / g_a;
        let c_h = (2.0 * h * g_a / (g_b * g_c)).sqrt();
        let c2 = c_h / (2.0 * h * (2.0 - 2.0 * h).sqrt());
        let beta_integral = g_a * g_a / g_d;
        Ok(Self { h, k_h, lambda_h, c_h, c2, beta_integral })
    }
}

/// Uniform observation grid `t_i = t_max * i / n`, `i = 0..=n`.
///
/// Points are always computed per index rather than by accumulation, so the
/// grid is bit-stable for any `(t_max, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() || n == 0 {
            return Err(Error::InvalidGrid { t_max, n });
        }
        Ok(Self { t_max, n })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Step length `t_max / n`.
    pub fn dt(&self) -> f64 {
        self.t_max / self.n as f64
    }

    /// Grid point `t_i = t_max * i / n` for `i = 0..=n`.
    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n);
        self.t_max * i as f64 / self.n as f64
    }

    /// Midpoint of cell `j`: `s*_j = t_max * (2j + 1) / (2n)`, `j = 0..n-1`.
    pub fn midpoint(&self, j: usize) -> f64 {
        debug_assert!(j < self.n);
        self.t_max * (2 * j + 1) as f64 / (2 * self.n) as f64
    }

    /// The non-zero grid points `t_1, ..., t_n`.
    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n).map(|i| self.point(i))
    }
}

/// Singular kernel `k_H(t, s) = k_H^{-1} s^{1/2−H} (t−s)^{1/2−H}` for
/// `0 < s < t`.
pub fn kernel_kh(t: f64, s: f64, consts: &HurstConstants) -> Result<f64> {
    if !(s > 0.0 && s < t) {
        return Err(Error::KernelDomain { s, t });
    }
    let p = 0.5 - consts.h;
    Ok(s.powf(p) * (t - s).powf(p) / consts.k_h)
}

/// Increments `Δw_i = λ_H^{-1} (t_{i+1}^{2−2H} − t_i^{2−2H})` of the
/// deterministic time transform, one per grid cell.
pub fn w_increments(grid: &TimeGrid, consts: &HurstConstants) -> Vec<f64> {
    let e = 2.0 - 2.0 * consts.h;
    (0..grid.n())
        .map(|i| (grid.point(i + 1).powf(e) - grid.point(i).powf(e)) / consts.lambda_h)
        .collect()
}

/// Martingale increment variances `υ²_i = c_2² (t_{i+1}^{2−2H} − t_i^{2−2H})`.
pub fn v_squared(grid: &TimeGrid, consts: &HurstConstants) -> Vec<f64> {
    let e = 2.0 - 2.0 * consts.h;
    let c = consts.c2 * consts.c2;
    (0..grid.n())
        .map(|i| c * (grid.point(i + 1).powf(e) - grid.point(i).powf(e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // High-precision reference values computed with a 50-digit gamma
    // implementation, frozen here.
    const K_07: f64 = 1.496543064961833;
    const LAM_08: f64 = 0.9815215189358115;
    const C_07: f64 = 1.0918091308839126;
    const C2_03: f64 = 1.0286695481554528;
    const BINT_07: f64 = 1.516964232792923;

    #[test]
    fn half_collapses_to_unity() {
        let c = HurstConstants::new(0.5, DEFAULT_ETA).unwrap();
        assert_relative_eq!(c.k_h, 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.lambda_h, 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.c_h, 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.c2, 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.beta_integral, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn frozen_oracle_values() {
        let c = HurstConstants::new(0.7, DEFAULT_ETA).unwrap();
        assert_relative_eq!(c.k_h, K_07, max_relative = 1e-13);
        assert_relative_eq!(c.c_h, C_07, max_relative = 1e-13);
        assert_relative_eq!(c.beta_integral, BINT_07, max_relative = 1e-13);
        let c8 = HurstConstants::new(0.8, DEFAULT_ETA).unwrap();
        assert_relative_eq!(c8.lambda_h, LAM_08, max_relative = 1e-13);
        let c3 = HurstConstants::new(0.3, DEFAULT_ETA).unwrap();
        assert_relative_eq!(c3.c2, C2_03, max_relative = 1e-13);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(HurstConstants::new(0.0, 0.05).is_err());
        assert!(HurstConstants::new(1.0, 0.05).is_err());
        assert!(HurstConstants::new(0.04, 0.05).is_err());
        assert!(HurstConstants::new(0.5, 0.0).is_err());
        assert!(HurstConstants::new(0.5, 0.6).is_err());
        assert!(HurstConstants::new(f64::NAN, 0.05).is_err());
    }

    #[test]
    fn kernel_values() {
        let c = HurstConstants::new(0.5, DEFAULT_ETA).unwrap();
        assert_relative_eq!(kernel_kh(3.0, 1.7, &c).unwrap(), 1.0, max_relative = 1e-12);

        let c = HurstConstants::new(0.7, DEFAULT_ETA).unwrap();
        // 50-digit oracle: (1/k_0.7) * 0.5^{-0.2} * 0.5^{-0.2}
        assert_relative_eq!(
            kernel_kh(1.0, 0.5, &c).unwrap(),
            0.8817039360016988,
            max_relative = 1e-13
        );

        assert!(kernel_kh(1.0, 1.0, &c).is_err());
        assert!(kernel_kh(1.0, 0.0, &c).is_err());
        assert!(kernel_kh(1.0, 1.5, &c).is_err());
    }

    #[test]
    fn w_increments_brownian_case() {
        let grid = TimeGrid::new(5.0, 100).unwrap();
        let c = HurstConstants::new(0.5, DEFAULT_ETA).unwrap();
        for dw in w_increments(&grid, &c) {
            assert_relative_eq!(dw, 0.05, max_relative = 1e-12);
        }
    }

    #[test]
    fn w_increments_telescope() {
        let grid = TimeGrid::new(5.0, 100).unwrap();
        for h in [0.1, 0.3, 0.62, 0.9] {
            let c = HurstConstants::new(h, DEFAULT_ETA).unwrap();
            let total: f64 = w_increments(&grid, &c).iter().sum();
            let expected = 5.0_f64.powf(2.0 - 2.0 * h) / c.lambda_h;
            assert_relative_eq!(total, expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn w_increment_scalar_oracle() {
        // λ_{0.8}^{-1} (1.05^{0.4} − 1), 50-digit oracle
        let c = HurstConstants::new(0.8, DEFAULT_ETA).unwrap();
        let dw = (1.05_f64.powf(0.4) - 1.0) / c.lambda_h;
        assert_relative_eq!(dw, 0.020078774265032477, max_relative = 1e-13);
    }

    #[test]
    fn v_squared_matches_w_increments() {
        let grid = TimeGrid::new(2.5, 37).unwrap();
        for h in [0.15, 0.5, 0.85] {
            let c = HurstConstants::new(h, DEFAULT_ETA).unwrap();
            let v2 = v_squared(&grid, &c);
            let dw = w_increments(&grid, &c);
            for (a, b) in v2.iter().zip(&dw) {
                assert!(*a > 0.0 && *b > 0.0);
                assert_relative_eq!(*a, c.c2 * c.c2 * c.lambda_h * b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn v_squared_first_cell_oracle() {
        // c2(0.3)^2 * 0.05^{1.4}, 50-digit oracle
        let grid = TimeGrid::new(5.0, 100).unwrap();
        let c = HurstConstants::new(0.3, DEFAULT_ETA).unwrap();
        let v2 = v_squared(&grid, &c);
        assert_relative_eq!(v2[0], 0.015962825759030594, max_relative = 1e-13);
    }

    #[test]
    fn constants_continuous_in_h() {
        for h in [0.11, 0.34, 0.5, 0.77, 0.89] {
            let a = HurstConstants::new(h, DEFAULT_ETA).unwrap();
            let b = HurstConstants::new(h + 1e-8, DEFAULT_ETA).unwrap();
            for (x, y) in [
                (a.k_h, b.k_h),
                (a.lambda_h, b.lambda_h),
                (a.c_h, b.c_h),
                (a.c2, b.c2),
                (a.beta_integral, b.beta_integral),
            ] {
                assert_relative_eq!(x, y, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn grid_points_exact() {
        let grid = TimeGrid::new(5.0, 100).unwrap();
        assert_eq!(grid.point(0), 0.0);
        assert_eq!(grid.point(100), 5.0);
        assert_eq!(grid.point(37), 5.0 * 37.0 / 100.0);
        assert_eq!(grid.midpoint(0), 5.0 / 200.0);
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(5.0, 0).is_err());
        assert!(TimeGrid::new(f64::INFINITY, 10).is_err());
    }

    /// Oracle for the Beta identity: composite Simpson on dyadic shells
    /// shrinking toward each singular endpoint. Independent of the
    /// closed-form `beta_integral`.
    fn kernel_mass_quadrature(t: f64, consts: &HurstConstants) -> f64 {
        let simpson = |a: f64, b: f64| {
            let m = 128;
            let h = (b - a) / m as f64;
            let f = |s: f64| kernel_kh(t, s, consts).unwrap();
            let mut acc = f(a) + f(b);
            for k in 1..m {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(a + k as f64 * h);
            }
            acc * h / 3.0
        };
        let mut total = 0.0;
        // shells [t/2^{k+1}, t/2^k] cover (~0, t/2]; mirrored shells cover
        // [t/2, ~t); the unresolved endpoint slivers carry O(2^{-30}) of the
        // mass. Stop once a shell boundary is no longer representable.
        for k in 1..=60 {
            let lo = t / 2f64.powi(k + 1);
            let hi = t / 2f64.powi(k);
            if t - lo >= t || lo == 0.0 {
                break;
            }
            total += simpson(lo, hi);
            total += simpson(t - hi, t - lo);
        }
        total
    }

    proptest::proptest! {
        #[test]
        fn increments_positive_and_consistent(
            h in 0.02f64..0.98,
            t_max in 0.1f64..50.0,
            n in 1usize..200,
        ) {
            let c = HurstConstants::new(h, 0.01).unwrap();
            let grid = TimeGrid::new(t_max, n).unwrap();
            let dw = w_increments(&grid, &c);
            let v2 = v_squared(&grid, &c);
            let mut total = 0.0;
            for (a, b) in dw.iter().zip(&v2) {
                proptest::prop_assert!(*a > 0.0 && a.is_finite());
                proptest::prop_assert!(*b > 0.0 && b.is_finite());
                // v2 = c2^2 lambda_H dw, cell by cell
                proptest::prop_assert!((b - c.c2 * c.c2 * c.lambda_h * a).abs() <= 1e-9 * b);
                total += a;
            }
            let telescoped = t_max.powf(2.0 - 2.0 * h) / c.lambda_h;
            proptest::prop_assert!((total - telescoped).abs() <= 1e-8 * telescoped);
        }
    }

    #[test]
    fn kernel_quadrature_identity() {
        // ∫_0^t k_H(t,s) ds = k_H^{-1} t^{2−2H} B(3/2−H,3/2−H)
        for h in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let c = HurstConstants::new(h, DEFAULT_ETA).unwrap();
            for t in [0.5f64, 1.0, 5.0] {
                let closed = t.powf(2.0 - 2.0 * h) * c.beta_integral / c.k_h;
                let quad = kernel_mass_quadrature(t, &c);
                assert_relative_eq!(quad, closed, max_relative = 1e-6);
            }
        }
    }
}
