//! Shared statistical helpers for the integration suites: sample moments,
//! a two-sided Kolmogorov-Smirnov distance against a reference CDF, and
//! the asymptotic critical value for a given test level.

#![allow(dead_code)]

use statrs::distribution::{ContinuousCDF, Normal};

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Sample skewness (biased, fine for large n).
pub fn skewness(xs: &[f64]) -> f64 {
    let (mean, var) = mean_var(xs);
    let n = xs.len() as f64;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    m3 / var.powf(1.5)
}

/// Two-sided KS distance sup |F_n(x) - F(x)|. Sorts the sample in place.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Asymptotic KS critical value c(level)/sqrt(n); level 0.01 -> c = 1.6276,
/// level 0.05 -> c = 1.3581 (Kolmogorov distribution quantiles).
pub fn ks_critical(n: usize, level: f64) -> f64 {
    let c = if (level - 0.01).abs() < 1e-12 {
        1.6276
    } else if (level - 0.05).abs() < 1e-12 {
        1.3581
    } else {
        // K(c) = 1 - 2 sum (-1)^{j-1} exp(-2 j^2 c^2) inverted by bisection.
        let tail = |c: f64| {
            let mut s = 0.0;
            for j in 1..100 {
                let term = (-2.0 * (j as f64).powi(2) * c * c).exp();
                s += if j % 2 == 1 { term } else { -term };
            }
            2.0 * s
        };
        let (mut lo, mut hi) = (0.2, 3.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if tail(mid) > level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    c / (n as f64).sqrt()
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Standard normal quantile.
pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}
