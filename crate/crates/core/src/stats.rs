//! Small statistical helpers shared by diagnostics and tests: quantiles,
//! Kolmogorov-Smirnov against the standard normal, effective sample size.

use statrs::distribution::{ContinuousCDF, Normal};

/// Inverse-ECDF quantile (lowest order statistic whose ECDF reaches `p`).
/// With two points and `p` in the tails this returns the two order
/// statistics themselves.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let n = sorted.len();
    let k = (p * n as f64).ceil() as usize;
    sorted[k.clamp(1, n) - 1]
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// One-sample Kolmogorov-Smirnov result against N(0, 1).
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// KS test of `xs` against the standard normal. The p-value uses the
/// asymptotic Kolmogorov distribution with the Stephens small-sample
/// correction.
pub fn ks_test_standard_normal(xs: &[f64]) -> KsResult {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = normal.cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    KsResult { statistic: d, p_value: kolmogorov_sf(lambda) }
}

/// Survival function of the Kolmogorov distribution,
/// `2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * x * x).exp();
        if term < 1e-18 {
            break;
        }
        s += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Effective sample size via the initial-positive-sequence estimator on
/// paired autocorrelations. `None` when the series is constant.
pub fn effective_sample_size(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 4 {
        return None;
    }
    let m = mean(xs);
    let c0 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return None;
    }
    let acf = |lag: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n - lag {
            s += (xs[i] - m) * (xs[i + lag] - m);
        }
        s / n as f64 / c0
    };
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    Some(n as f64 / (1.0 + 2.0 * sum))
}

/// Upper-tail p-value of a 1-df chi-square statistic.
pub fn chi_square_1df_sf(x: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if x <= 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(1.0).unwrap().cdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn quantile_two_points_gives_order_statistics() {
        let xs = [1.0, 2.0];
        assert_eq!(quantile(&xs, 0.025), 1.0);
        assert_eq!(quantile(&xs, 0.975), 2.0);
    }

    #[test]
    fn quantile_matches_inverse_ecdf() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(quantile(&xs, 0.025), 3.0); // ceil(2.5) = 3
        assert_eq!(quantile(&xs, 0.975), 98.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 100.0);
    }

    #[test]
    fn ks_accepts_normal_samples_and_rejects_shifted_ones() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let mut passes = 0;
        for _ in 0..100 {
            let xs: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
            if ks_test_standard_normal(&xs).p_value > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 95, "only {passes}/100 normal samples passed");

        let shifted: Vec<f64> = (0..500)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z + 1.0
            })
            .collect();
        assert!(ks_test_standard_normal(&shifted).p_value < 1e-6);
    }

    #[test]
    fn kolmogorov_sf_reference_point() {
        // Q(1.0) = 0.26999967...
        assert_relative_eq!(kolmogorov_sf(1.0), 0.26999967167735456, max_relative = 1e-10);
    }

    #[test]
    fn ess_of_iid_is_near_n() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ess = effective_sample_size(&xs).unwrap();
        assert!(ess > 3000.0 && ess < 5200.0, "ess = {ess}");
    }

    #[test]
    fn ess_flags_constant_series() {
        assert!(effective_sample_size(&[1.0; 50]).is_none());
    }

    #[test]
    fn ess_shrinks_for_correlated_series() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..4000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = 0.9 * x + e;
                x
            })
            .collect();
        let ess = effective_sample_size(&xs).unwrap();
        // theory: n (1-rho)/(1+rho) ~ n/19
        assert!(ess < 700.0, "ess = {ess}");
    }
}
