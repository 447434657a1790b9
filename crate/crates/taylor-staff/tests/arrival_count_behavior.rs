//! Distributional checks on arrival counts: the conditional-Poisson
//! property given the intensity path, closed-form count moments for the
//! static and dynamic mixing models, the Poisson collapse at zero
//! volatility, rate-truncation frequency, and timestamp binning.

mod common;

use common::{mean_var, std_normal_cdf};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use taylor_staff::analytics::arrival_moments;
use taylor_staff::arrivals::{
    counts_from_timestamps, generate, generate_count_matrix, m3_truncation_probability,
    ArrivalModelSpec, CountMatrix, ModelVariant,
};
use taylor_staff::intensity::{GcirParams, InitCondition};
use taylor_staff::rng::derive_seed;

/// One cell of a grouped Poisson histogram: counts in [lo, hi] with the
/// expected frequency under the null.
struct Cell {
    lo: u64,
    hi: u64,
    expected: f64,
}

/// Groups the Poisson(mean) support into consecutive cells whose expected
/// counts all reach `min_expected`; the pmf comes from the recurrence
/// p(j+1) = p(j) * mean / (j+1) and the final cell absorbs the upper
/// tail.
fn poisson_cells(mean: f64, n: f64, min_expected: f64) -> Vec<Cell> {
    let hi_cut = (mean + 15.0 * mean.sqrt()).ceil() as usize;
    let mut pmf = Vec::with_capacity(hi_cut + 1);
    let mut w = (-mean).exp();
    assert!(w > 0.0, "Poisson pmf underflowed at zero; this oracle needs a smaller mean");
    let mut covered = 0.0;
    for j in 0..=hi_cut {
        pmf.push(w);
        covered += w;
        w *= mean / (j as f64 + 1.0);
    }
    let mut cells: Vec<Cell> = Vec::new();
    let mut lo = 0u64;
    let mut acc = 0.0;
    for (j, &p) in pmf.iter().enumerate() {
        acc += n * p;
        if acc >= min_expected {
            cells.push(Cell { lo, hi: j as u64, expected: acc });
            lo = j as u64 + 1;
            acc = 0.0;
        }
    }
    // Leftover cells plus the tail mass beyond the cutoff fold into the
    // last closed cell, which then covers everything above its floor.
    acc += n * (1.0 - covered).max(0.0);
    let last = cells.last_mut().expect("at least one cell must close");
    last.expected += acc;
    last.hi = u64::MAX;
    cells
}

/// Pearson chi-square statistic of observed integer draws against the
/// grouped cells.
fn chi_square_stat(draws: &[u64], cells: &[Cell]) -> (f64, usize) {
    let mut stat = 0.0;
    for cell in cells {
        let obs = draws.iter().filter(|&&x| x >= cell.lo && x <= cell.hi).count() as f64;
        stat += (obs - cell.expected).powi(2) / cell.expected;
    }
    (stat, cells.len() - 1)
}

/// With zero volatility and a fixed start above the mean, the intensity
/// path is the deterministic relaxation and the count over one interval
/// must be plain Poisson at the integrated mass
/// lambda delta + (x0 - lambda)(1 - e^{-kappa delta}) / kappa.
/// A Pearson chi-square test at level 0.01 checks 100 000 draws.
#[test]
fn counts_given_deterministic_intensity_are_poisson() {
    let (lambda, kappa, x0, delta) = (100.0, 0.5, 150.0, 0.5);
    let p = GcirParams::new(lambda, kappa, 0.0, 0.5, InitCondition::FixedValue(x0)).unwrap();
    let spec = ArrivalModelSpec::stationary(ModelVariant::M5(p)).unwrap();
    let n = 100_000usize;
    let matrix = generate_count_matrix(&spec, n, 1, delta, 611).unwrap();

    let mass = lambda * delta + (x0 - lambda) * (-(-kappa * delta).exp_m1()) / kappa;
    let cells = poisson_cells(mass, n as f64, 5.0);
    let (stat, df) = chi_square_stat(&matrix.counts, &cells);
    let crit = ChiSquared::new(df as f64).unwrap().inverse_cdf(0.99);
    assert!(
        stat < crit,
        "chi-square {stat:.2} over critical value {crit:.2} on {df} degrees of freedom"
    );
}

fn single_segment_counts(variant: ModelVariant, m: usize, delta: f64, seed: u64) -> Vec<f64> {
    let spec = ArrivalModelSpec::stationary(variant).unwrap();
    let matrix = generate_count_matrix(&spec, m, 1, delta, seed).unwrap();
    matrix.counts.iter().map(|&c| c as f64).collect()
}

/// Checks a Monte Carlo count sample against closed-form moments with
/// four-standard-error bands, and that its dispersion ratio clearly
/// exceeds the Poisson value of one.
fn assert_count_moments(draws: &[f64], mean: f64, var: f64, label: &str) {
    let n = draws.len() as f64;
    let (m, v) = mean_var(draws);
    let se_mean = (var / n).sqrt();
    assert!(
        (m - mean).abs() < 4.0 * se_mean,
        "{label}: sample mean {m:.3} vs {mean:.3} (se {se_mean:.4})"
    );
    let m4 = draws.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se_var = ((m4 - v * v) / n).sqrt();
    assert!(
        (v - var).abs() < 4.0 * se_var,
        "{label}: sample variance {v:.2} vs {var:.2} (se {se_var:.3})"
    );
    assert!(v / m > 1.5, "{label}: dispersion ratio {:.3} not clearly above 1", v / m);
}

/// Count means and variances over one interval match the model algebra:
/// the dynamic model's stationary-start moments, the busyness mixture's
/// variance lambda delta + sigma_g^2 (lambda delta)^2, and the static
/// power-law model's lambda delta + sigma_y^2 lambda^{alpha+1} delta^2.
#[test]
fn count_moments_match_closed_forms() {
    let m = 20_000usize;

    let p = GcirParams::new(100.0, 0.1, 0.5, 0.5, InitCondition::Stationary).unwrap();
    let mom = arrival_moments(&p, 1.0).unwrap();
    assert!((mom.cod - 13.0) < 0.2 && mom.cod > 12.9, "dispersion anchor moved: {}", mom.cod);
    let draws = single_segment_counts(ModelVariant::M5(p), m, 1.0, 612);
    assert_count_moments(&draws, mom.mean, mom.variance, "dynamic");

    let (lambda, sigma_g) = (100.0, 0.25);
    let draws = single_segment_counts(ModelVariant::M2 { lambda, sigma_g }, m, 1.0, 613);
    let var = lambda + sigma_g * sigma_g * lambda * lambda;
    assert_count_moments(&draws, lambda, var, "busyness mixture");

    let (lambda, alpha, sigma_y) = (100.0, 0.5, 0.5);
    let draws =
        single_segment_counts(ModelVariant::M3 { lambda, alpha, sigma_y }, m, 1.0, 614);
    let var = lambda + sigma_y * sigma_y * lambda.powf(alpha + 1.0);
    assert_count_moments(&draws, lambda, var, "static power law");
}

/// Setting sigma = 0 in the dynamic model freezes the intensity at
/// lambda, so counts collapse to Poisson: dispersion ratio one.
#[test]
fn zero_volatility_dynamic_counts_collapse_to_poisson() {
    let p = GcirParams::new(100.0, 1.0, 0.0, 0.5, InitCondition::AtLambda).unwrap();
    let draws = single_segment_counts(ModelVariant::M5(p), 20_000, 0.5, 615);
    let (m, v) = mean_var(&draws);
    assert!((m - 50.0).abs() < 0.2, "mean {m:.3} vs Poisson mean 50");
    assert!((v / m - 1.0).abs() < 0.05, "dispersion ratio {:.4} should be 1", v / m);
}

/// The static power-law rate lambda + lambda^{(alpha+1)/2} sigma_y Z is
/// truncated at zero with probability Phi(-lambda^{(1-alpha)/2}/sigma_y);
/// at lambda 4, alpha 0, sigma_y 1 that is Phi(-2). The generator's
/// truncation flag must fire at that frequency.
#[test]
fn rate_truncation_frequency_matches_normal_tail() {
    let (lambda, alpha, sigma_y) = (4.0, 0.0, 1.0);
    let p = m3_truncation_probability(lambda, alpha, sigma_y);
    let z = lambda.powf((1.0 - alpha) / 2.0) / sigma_y;
    assert!((p - std_normal_cdf(-z)).abs() < 1e-12, "closed form drifted: {p}");

    let spec =
        ArrivalModelSpec::stationary(ModelVariant::M3 { lambda, alpha, sigma_y }).unwrap();
    let n = 20_000usize;
    let truncated = (0..n)
        .filter(|&i| {
            generate(&spec, 0.5, derive_seed(616, i as u64, 0)).unwrap().provenance.rate_truncated
        })
        .count();
    let freq = truncated as f64 / n as f64;
    let band = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
    assert!((freq - p).abs() < band, "truncation frequency {freq:.5} vs {p:.5} (band {band:.5})");
}

/// Binning a path's timestamps reproduces the interval counts and the
/// total; an interval that does not divide the horizon is rejected.
#[test]
fn timestamp_binning_is_consistent_with_interval_counts() {
    let p = GcirParams::new(100.0, 0.5, 0.5, 0.25, InitCondition::Stationary).unwrap();
    let spec = ArrivalModelSpec::stationary(ModelVariant::M5(p)).unwrap();
    let path = generate(&spec, 12.0, 617).unwrap();
    assert!(!path.timestamps.is_empty());

    let delta = 0.5;
    let bins = counts_from_timestamps(&path, delta).unwrap();
    assert_eq!(bins.len(), 24);
    assert_eq!(bins.iter().sum::<u64>() as usize, path.timestamps.len());
    for (i, &b) in bins.iter().enumerate() {
        let expected = path.count_in(i as f64 * delta, (i + 1) as f64 * delta);
        assert_eq!(b as usize, expected, "bin {i} disagrees with count_in");
    }

    assert!(counts_from_timestamps(&path, 5.0).is_err(), "5 does not divide 12 evenly");

    let matrix = CountMatrix::from_rows(vec![bins.clone(), bins], delta, None).unwrap();
    assert_eq!(matrix.m, 2);
    assert_eq!(matrix.k, 24);
    let means = matrix.segment_means();
    for (i, &mu) in means.iter().enumerate() {
        assert!((mu - matrix.get(0, i) as f64).abs() < 1e-12);
    }
}
