//! Arrival-path and count-matrix generation under five nested arrival
//! models, a periodic non-stationary extension, and a
//! Dirichlet-allocation benchmark model.
//!
//! The model family, ordered by what drives over-dispersion:
//!
//! * M1: homogeneous Poisson at rate lambda (no over-dispersion).
//! * M2: mixed Poisson, rate lambda * G with G a unit-mean Gamma variable
//!   of variance sigma_g^2 drawn once per path.
//! * M3: static doubly stochastic Poisson with rate
//!   lambda + lambda^((alpha+1)/2) * Y, Y ~ Normal(0, sigma_y^2), drawn
//!   once per path and truncated at zero.
//! * M4: dynamic square-root intensity, the alpha = 0 special case of M5.
//! * M5: dynamic generalized CIR intensity from [`crate::intensity`].
//!
//! Dynamic paths are generated by conditioning on a simulated intensity
//! trajectory: each fine grid cell receives a Poisson count with mean
//! equal to the trapezoid integral of the intensity over the cell, and
//! that many arrival times are placed uniformly inside the cell. Given
//! the integrated intensity this is exact; thinning is avoided because
//! the CIR intensity is unbounded.
//!
//! The non-stationary extension replaces the scalar lambda by a periodic
//! piecewise-constant profile: within each segment the SDE uses that
//! segment's rate in both drift and diffusion scaling, the intensity
//! state carries over continuously across segment boundaries, and cycles
//! restart independently.

use crate::error::{invalid, Result};
use crate::intensity::{
    sample_initial, trapezoid_cumulative, uniform_grid, GcirParams, InitCondition, IntensityPath,
    TransitionSampler,
};
use crate::rng;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use std::fmt;

/// Default fine-grid step for timestamp generation, in time units.
pub const DEFAULT_FINE_STEP: f64 = 0.01;

/// Floor on the fine-grid step used when deriving it from a counting
/// interval as delta/100.
pub const MIN_FINE_STEP: f64 = 1e-3;

/// One of the five arrival models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelVariant {
    /// Homogeneous Poisson process.
    M1 { lambda: f64 },
    /// Gamma-mixed Poisson: rate lambda * G, G unit-mean with variance
    /// sigma_g^2, one draw per path.
    M2 { lambda: f64, sigma_g: f64 },
    /// Static power-law intensity lambda + lambda^((alpha+1)/2) * Y with
    /// Y ~ Normal(0, sigma_y^2), one draw per path, truncated at zero.
    M3 { lambda: f64, alpha: f64, sigma_y: f64 },
    /// Dynamic square-root intensity; equivalent to M5 with alpha = 0.
    M4 { lambda: f64, kappa: f64, sigma: f64 },
    /// Dynamic generalized CIR intensity.
    M5(GcirParams),
}

impl ModelVariant {
    /// Base mean rate of the model.
    pub fn lambda(&self) -> f64 {
        match *self {
            ModelVariant::M1 { lambda } => lambda,
            ModelVariant::M2 { lambda, .. } => lambda,
            ModelVariant::M3 { lambda, .. } => lambda,
            ModelVariant::M4 { lambda, .. } => lambda,
            ModelVariant::M5(p) => p.lambda,
        }
    }

    /// Dispersion exponent: 0 for M1/M4, 1 for M2, declared alpha for
    /// M3/M5.
    pub fn alpha(&self) -> f64 {
        match *self {
            ModelVariant::M1 { .. } => 0.0,
            ModelVariant::M2 { .. } => 1.0,
            ModelVariant::M3 { alpha, .. } => alpha,
            ModelVariant::M4 { .. } => 0.0,
            ModelVariant::M5(p) => p.alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelVariant::M1 { lambda } => {
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(invalid!("M1 lambda must be positive, got {lambda}"));
                }
            }
            ModelVariant::M2 { lambda, sigma_g } => {
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(invalid!("M2 lambda must be positive, got {lambda}"));
                }
                if !(sigma_g >= 0.0) || !sigma_g.is_finite() {
                    return Err(invalid!("M2 sigma_g must be nonnegative, got {sigma_g}"));
                }
            }
            ModelVariant::M3 { lambda, alpha, sigma_y } => {
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(invalid!("M3 lambda must be positive, got {lambda}"));
                }
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(invalid!("M3 alpha must lie in [0, 1], got {alpha}"));
                }
                if !(sigma_y >= 0.0) || !sigma_y.is_finite() {
                    return Err(invalid!("M3 sigma_y must be nonnegative, got {sigma_y}"));
                }
            }
            ModelVariant::M4 { lambda, kappa, sigma } => {
                GcirParams::new(lambda, kappa, sigma, 0.0, InitCondition::Stationary)?;
            }
            ModelVariant::M5(p) => {
                GcirParams::new(p.lambda, p.kappa, p.sigma, p.alpha, p.init)?;
            }
        }
        Ok(())
    }

    /// Dynamic-intensity parameters for M4/M5, with an optionally
    /// overridden rate level (used by the non-stationary profile).
    pub(crate) fn gcir(&self, lambda_override: Option<f64>) -> Option<GcirParams> {
        let mut p = match *self {
            ModelVariant::M4 { lambda, kappa, sigma } => GcirParams {
                lambda,
                kappa,
                sigma,
                alpha: 0.0,
                init: InitCondition::Stationary,
            },
            ModelVariant::M5(p) => p,
            _ => return None,
        };
        if let Some(l) = lambda_override {
            p.lambda = l;
        }
        Some(p)
    }

    fn is_dynamic(&self) -> bool {
        matches!(self, ModelVariant::M4 { .. } | ModelVariant::M5(_))
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ModelVariant::M1 { lambda } => write!(f, "M1(lambda={lambda})"),
            ModelVariant::M2 { lambda, sigma_g } => write!(f, "M2(lambda={lambda},sigma_g={sigma_g})"),
            ModelVariant::M3 { lambda, alpha, sigma_y } => {
                write!(f, "M3(lambda={lambda},alpha={alpha},sigma_y={sigma_y})")
            }
            ModelVariant::M4 { lambda, kappa, sigma } => {
                write!(f, "M4(lambda={lambda},kappa={kappa},sigma={sigma})")
            }
            ModelVariant::M5(p) => write!(
                f,
                "M5(lambda={},kappa={},sigma={},alpha={},init={:?})",
                p.lambda, p.kappa, p.sigma, p.alpha, p.init
            ),
        }
    }
}

/// Periodic piecewise-constant rate profile: k segments of length
/// `delta`, repeating with period k * delta.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    pub delta: f64,
    pub rates: Vec<f64>,
}

impl RateProfile {
    pub fn new(delta: f64, rates: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(invalid!("segment length must be positive, got {delta}"));
        }
        if rates.is_empty() {
            return Err(invalid!("rate profile must have at least one segment"));
        }
        if let Some(r) = rates.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(invalid!("segment rates must be positive, got {r}"));
        }
        Ok(Self { delta, rates })
    }

    pub fn k(&self) -> usize {
        self.rates.len()
    }

    /// Cycle length k * delta.
    pub fn period(&self) -> f64 {
        self.delta * self.rates.len() as f64
    }
}

/// Full arrival-model specification: a variant plus an optional
/// non-stationary rate profile replacing the scalar rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalModelSpec {
    pub variant: ModelVariant,
    pub nonstationary: Option<RateProfile>,
}

impl ArrivalModelSpec {
    pub fn stationary(variant: ModelVariant) -> Result<Self> {
        variant.validate()?;
        Ok(Self { variant, nonstationary: None })
    }

    pub fn with_profile(variant: ModelVariant, profile: RateProfile) -> Result<Self> {
        variant.validate()?;
        // Dynamic variants must satisfy the positivity bound at every
        // segment rate; with alpha < 1 the smallest rate is binding.
        if let Some(base) = variant.gcir(None) {
            for &r in &profile.rates {
                let p = base_with_lambda(base, r);
                p.require_dynamic()?;
            }
        }
        Ok(Self { variant, nonstationary: Some(profile) })
    }
}

fn base_with_lambda(mut p: GcirParams, lambda: f64) -> GcirParams {
    p.lambda = lambda;
    p
}

/// How a generated path came to be; kept with the path for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub model: String,
    pub seed: u64,
    /// True when a static random rate was truncated at zero (M3 with an
    /// extreme negative mixing draw).
    pub rate_truncated: bool,
}

/// A realized arrival path: sorted event times on [0, horizon].
#[derive(Debug, Clone)]
pub struct ArrivalPath {
    pub timestamps: Vec<f64>,
    pub horizon: f64,
    pub provenance: Provenance,
}

impl ArrivalPath {
    /// Number of arrivals in (from, to].
    pub fn count_in(&self, from: f64, to: f64) -> usize {
        self.timestamps.iter().filter(|&&t| t > from && t <= to).count()
    }
}

/// m independent cycles by k segments of arrival counts, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    pub m: usize,
    pub k: usize,
    pub counts: Vec<u64>,
    pub delta: f64,
    pub segment_rates: Option<Vec<f64>>,
}

impl CountMatrix {
    pub fn from_rows(rows: Vec<Vec<u64>>, delta: f64, segment_rates: Option<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid!("count matrix needs at least one cycle"));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(invalid!("count matrix needs at least one segment"));
        }
        if rows.iter().any(|r| r.len() != k) {
            return Err(invalid!("all cycles must have the same number of segments"));
        }
        if let Some(rates) = &segment_rates {
            if rates.len() != k {
                return Err(invalid!("segment rate labels must match segment count"));
            }
        }
        let m = rows.len();
        let counts = rows.into_iter().flatten().collect();
        Ok(Self { m, k, counts, delta, segment_rates })
    }

    pub fn row(&self, j: usize) -> &[u64] {
        &self.counts[j * self.k..(j + 1) * self.k]
    }

    pub fn get(&self, j: usize, i: usize) -> u64 {
        self.counts[j * self.k + i]
    }

    /// Sample mean of each segment's counts across cycles.
    pub fn segment_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.k];
        for j in 0..self.m {
            for (i, &c) in self.row(j).iter().enumerate() {
                means[i] += c as f64;
            }
        }
        for v in &mut means {
            *v /= self.m as f64;
        }
        means
    }

    /// Unbiased sample variance of each segment's counts across cycles.
    pub fn segment_variances(&self) -> Vec<f64> {
        let means = self.segment_means();
        let mut vars = vec![0.0; self.k];
        for j in 0..self.m {
            for (i, &c) in self.row(j).iter().enumerate() {
                let d = c as f64 - means[i];
                vars[i] += d * d;
            }
        }
        let denom = (self.m as f64 - 1.0).max(1.0);
        for v in &mut vars {
            *v /= denom;
        }
        vars
    }
}

/// Dirichlet-allocation arrival model: a Gamma daily total split across
/// segments by Dirichlet proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct AdlSpec {
    pub total_shape: f64,
    pub total_rate: f64,
    pub dirichlet: Vec<f64>,
    pub delta: f64,
}

impl AdlSpec {
    pub fn new(total_shape: f64, total_rate: f64, dirichlet: Vec<f64>, delta: f64) -> Result<Self> {
        if !(total_shape > 0.0) || !total_shape.is_finite() {
            return Err(invalid!("total shape must be positive, got {total_shape}"));
        }
        if !(total_rate > 0.0) || !total_rate.is_finite() {
            return Err(invalid!("total rate must be positive, got {total_rate}"));
        }
        if dirichlet.is_empty() {
            return Err(invalid!("Dirichlet concentration vector must be nonempty"));
        }
        if let Some(a) = dirichlet.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(invalid!("Dirichlet concentrations must be positive, got {a}"));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(invalid!("segment length must be positive, got {delta}"));
        }
        Ok(Self { total_shape, total_rate, dirichlet, delta })
    }

    pub fn k(&self) -> usize {
        self.dirichlet.len()
    }
}

/// Probability that the M3 static rate draw is truncated at zero,
/// P(lambda + lambda^((alpha+1)/2) Y < 0) for Y ~ Normal(0, sigma_y^2).
pub fn m3_truncation_probability(lambda: f64, alpha: f64, sigma_y: f64) -> f64 {
    if sigma_y == 0.0 {
        return 0.0;
    }
    let z = lambda.powf((1.0 - alpha) / 2.0) / sigma_y;
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

/// Generates one stationary arrival path with the default fine-grid step.
pub fn generate(spec: &ArrivalModelSpec, horizon: f64, seed: u64) -> Result<ArrivalPath> {
    generate_with_step(spec, horizon, DEFAULT_FINE_STEP, seed)
}

/// Generates one stationary arrival path; `step` controls the fine grid
/// on which dynamic intensities are sampled and arrivals placed.
pub fn generate_with_step(
    spec: &ArrivalModelSpec,
    horizon: f64,
    step: f64,
    seed: u64,
) -> Result<ArrivalPath> {
    if spec.nonstationary.is_some() {
        return Err(invalid!(
            "spec carries a rate profile; use generate_nonstationary for periodic rates"
        ));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid!("horizon must be positive, got {horizon}"));
    }
    spec.variant.validate()?;
    let mut rng = rng::root(seed);
    let (timestamps, truncated) =
        stationary_timestamps(&spec.variant, horizon, step, &mut rng)?;
    Ok(ArrivalPath {
        timestamps,
        horizon,
        provenance: Provenance {
            model: spec.variant.to_string(),
            seed,
            rate_truncated: truncated,
        },
    })
}

/// Generates a path for the static random-rate models M2/M3: the rate is
/// drawn once, then a homogeneous Poisson path is laid down at that rate.
pub fn generate_static_dspp(variant: &ModelVariant, horizon: f64, seed: u64) -> Result<ArrivalPath> {
    if !matches!(variant, ModelVariant::M2 { .. } | ModelVariant::M3 { .. }) {
        return Err(invalid!("static random-rate generation applies to M2 and M3 only"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid!("horizon must be positive, got {horizon}"));
    }
    variant.validate()?;
    let mut rng = rng::root(seed);
    let (rate, truncated) = static_rate(variant, &mut rng);
    let timestamps = homogeneous_timestamps(rate, 0.0, horizon, &mut rng);
    Ok(ArrivalPath {
        timestamps,
        horizon,
        provenance: Provenance { model: variant.to_string(), seed, rate_truncated: truncated },
    })
}

/// Generates independent cycles of a periodic non-stationary model, one
/// path per cycle over [0, period]. Within a cycle the intensity state is
/// continuous across segment boundaries; each cycle restarts from the
/// configured initial condition (with rates interpreted relative to the
/// first segment).
pub fn generate_nonstationary(
    spec: &ArrivalModelSpec,
    cycles: usize,
    seed: u64,
) -> Result<Vec<ArrivalPath>> {
    let profile = spec
        .nonstationary
        .as_ref()
        .ok_or_else(|| invalid!("spec has no rate profile; use generate for stationary models"))?;
    if cycles == 0 {
        return Err(invalid!("cycle count must be positive"));
    }
    spec.variant.validate()?;
    let step = fine_step_for(profile.delta);
    let mut paths = Vec::with_capacity(cycles);
    for j in 0..cycles {
        let mut rng = rng::substream(seed, j as u64);
        let (timestamps, truncated) =
            profile_timestamps(&spec.variant, profile, step, &mut rng)?;
        paths.push(ArrivalPath {
            timestamps,
            horizon: profile.period(),
            provenance: Provenance {
                model: format!("{}+profile(k={})", spec.variant, profile.k()),
                seed,
                rate_truncated: truncated,
            },
        });
    }
    Ok(paths)
}

/// Generates cycles of the Dirichlet-allocation model: per cycle a Gamma
/// total Z, Dirichlet proportions p, counts round(p_i * Z), and uniform
/// placement within each segment.
pub fn generate_adl(spec: &AdlSpec, cycles: usize, seed: u64) -> Result<(CountMatrix, Vec<ArrivalPath>)> {
    if cycles == 0 {
        return Err(invalid!("cycle count must be positive"));
    }
    let k = spec.k();
    let horizon = spec.delta * k as f64;
    let total = Gamma::new(spec.total_shape, 1.0 / spec.total_rate)
        .map_err(|e| invalid!("invalid Gamma total law: {e}"))?;
    let mut rows = Vec::with_capacity(cycles);
    let mut paths = Vec::with_capacity(cycles);
    for j in 0..cycles {
        let mut rng = rng::substream(seed, j as u64);
        let z = total.sample(&mut rng);
        let p = dirichlet_sample(&spec.dirichlet, &mut rng);
        let mut row = Vec::with_capacity(k);
        let mut ts: Vec<f64> = Vec::new();
        for (i, &pi) in p.iter().enumerate() {
            let n = (pi * z).round().max(0.0) as u64;
            row.push(n);
            let a = i as f64 * spec.delta;
            let b = a + spec.delta;
            let start = ts.len();
            for _ in 0..n {
                ts.push(rng.random_range(a..b));
            }
            ts[start..].sort_unstable_by(f64::total_cmp);
        }
        rows.push(row);
        paths.push(ArrivalPath {
            timestamps: ts,
            horizon,
            provenance: Provenance {
                model: format!(
                    "ADL(shape={},rate={},k={k})",
                    spec.total_shape, spec.total_rate
                ),
                seed,
                rate_truncated: false,
            },
        });
    }
    let matrix = CountMatrix::from_rows(rows, spec.delta, None)?;
    Ok((matrix, paths))
}

/// Bins a path's timestamps into consecutive intervals of length `delta`;
/// `delta` must divide the horizon within rounding tolerance. Interval i
/// is [i delta, (i+1) delta), with the horizon endpoint folded into the
/// final interval so every timestamp lands in exactly one bin.
pub fn counts_from_timestamps(path: &ArrivalPath, delta: f64) -> Result<Vec<u64>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid!("counting interval must be positive, got {delta}"));
    }
    let ratio = path.horizon / delta;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-6 * ratio.max(1.0) {
        return Err(invalid!(
            "counting interval {delta} does not divide horizon {} evenly",
            path.horizon
        ));
    }
    let k = k as usize;
    let mut counts = vec![0u64; k];
    for &t in &path.timestamps {
        let idx = ((t / delta).floor() as usize).min(k - 1);
        counts[idx] += 1;
    }
    Ok(counts)
}

/// Generates an m-by-k count matrix of independent cycles without
/// materializing timestamps: counts per segment are Poisson draws with
/// the integrated-intensity mass of that segment. For a non-stationary
/// spec, `k` and `delta` must match the profile.
pub fn generate_count_matrix(
    spec: &ArrivalModelSpec,
    cycles: usize,
    k: usize,
    delta: f64,
    seed: u64,
) -> Result<CountMatrix> {
    if cycles == 0 || k == 0 {
        return Err(invalid!("count matrix needs positive cycle and segment counts"));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid!("counting interval must be positive, got {delta}"));
    }
    spec.variant.validate()?;
    if let Some(profile) = &spec.nonstationary {
        if profile.k() != k {
            return Err(invalid!(
                "segment count {k} does not match profile length {}",
                profile.k()
            ));
        }
        if (profile.delta - delta).abs() > 1e-9 * delta {
            return Err(invalid!(
                "counting interval {delta} does not match profile segment length {}",
                profile.delta
            ));
        }
    }
    if let Some(p) = spec.variant.gcir(None) {
        p.require_dynamic()?;
    }
    let segment_rates = spec.nonstationary.as_ref().map(|p| p.rates.clone());
    let mut rows = Vec::with_capacity(cycles);
    for j in 0..cycles {
        let mut rng = rng::substream(seed, j as u64);
        rows.push(count_row(spec, k, delta, &mut rng)?);
    }
    CountMatrix::from_rows(rows, delta, segment_rates)
}

/// One cycle's segment counts.
fn count_row<R: Rng + ?Sized>(
    spec: &ArrivalModelSpec,
    k: usize,
    delta: f64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let rates: Vec<f64> = match &spec.nonstationary {
        Some(profile) => profile.rates.clone(),
        None => vec![spec.variant.lambda(); k],
    };
    match spec.variant {
        ModelVariant::M1 { .. } => {
            Ok(rates.iter().map(|&r| poisson_count(r * delta, rng)).collect())
        }
        ModelVariant::M2 { .. } | ModelVariant::M3 { .. } => {
            // One mixing draw per cycle scales every segment's rate.
            let lambda = spec.variant.lambda();
            let (rate, _) = static_rate(&spec.variant, rng);
            let factor = rate / lambda;
            Ok(rates.iter().map(|&r| poisson_count(r * factor * delta, rng)).collect())
        }
        ModelVariant::M4 { .. } | ModelVariant::M5(_) => {
            let base = spec.variant.gcir(None).unwrap();
            let cells = cells_per_interval(delta);
            let step = delta / cells as f64;
            let path = match &spec.nonstationary {
                Some(profile) => profile_intensity_path(base, profile, step, rng)?,
                None => {
                    let p = spec.variant.gcir(None).unwrap();
                    crate::intensity::simulate_path_with(&p, k as f64 * delta, step, rng)?
                }
            };
            let mut row = Vec::with_capacity(k);
            for i in 0..k {
                let lo = i * cells;
                let hi = ((i + 1) * cells).min(path.cum_integral.len() - 1);
                let mass = path.cum_integral[hi] - path.cum_integral[lo];
                row.push(poisson_count(mass, rng));
            }
            Ok(row)
        }
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite Poisson mean").sample(rng) as u64
}

/// Number of fine cells per counting interval: targets delta/100 with a
/// floor of MIN_FINE_STEP.
fn cells_per_interval(delta: f64) -> usize {
    let target = (delta / 100.0).max(MIN_FINE_STEP);
    (delta / target).round().max(1.0) as usize
}

fn fine_step_for(delta: f64) -> f64 {
    delta / cells_per_interval(delta) as f64
}

/// Stationary timestamps for any variant; returns the truncation flag
/// from static rate draws.
fn stationary_timestamps<R: Rng + ?Sized>(
    variant: &ModelVariant,
    horizon: f64,
    step: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, bool)> {
    match variant {
        ModelVariant::M1 { lambda } => Ok((homogeneous_timestamps(*lambda, 0.0, horizon, rng), false)),
        ModelVariant::M2 { .. } | ModelVariant::M3 { .. } => {
            let (rate, truncated) = static_rate(variant, rng);
            Ok((homogeneous_timestamps(rate, 0.0, horizon, rng), truncated))
        }
        ModelVariant::M4 { .. } | ModelVariant::M5(_) => {
            let p = variant.gcir(None).unwrap();
            let path = crate::intensity::simulate_path_with(&p, horizon, step, rng)?;
            Ok((cell_arrivals(&path, rng), false))
        }
    }
}

/// Draws the per-path random rate for M2/M3; the boolean reports whether
/// the M3 rate was truncated at zero.
fn static_rate<R: Rng + ?Sized>(variant: &ModelVariant, rng: &mut R) -> (f64, bool) {
    match *variant {
        ModelVariant::M2 { lambda, sigma_g } => {
            if sigma_g == 0.0 {
                return (lambda, false);
            }
            // Unit-mean Gamma: shape 1/sigma_g^2, scale sigma_g^2.
            let shape = 1.0 / (sigma_g * sigma_g);
            let g = Gamma::new(shape, sigma_g * sigma_g)
                .expect("positive Gamma shape")
                .sample(rng);
            (lambda * g, false)
        }
        ModelVariant::M3 { lambda, alpha, sigma_y } => {
            if sigma_y == 0.0 {
                return (lambda, false);
            }
            let y = Normal::new(0.0, sigma_y).expect("valid Normal").sample(rng);
            let raw = lambda + lambda.powf((alpha + 1.0) / 2.0) * y;
            if raw < 0.0 {
                (0.0, true)
            } else {
                (raw, false)
            }
        }
        _ => unreachable!("static rate only defined for M2/M3"),
    }
}

/// Homogeneous Poisson path on (a, b] at a fixed rate: a Poisson total
/// and uniform order statistics.
fn homogeneous_timestamps<R: Rng + ?Sized>(rate: f64, a: f64, b: f64, rng: &mut R) -> Vec<f64> {
    let mean = rate * (b - a);
    if mean <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(mean).expect("positive finite Poisson mean").sample(rng) as usize;
    let mut ts: Vec<f64> = (0..n).map(|_| rng.random_range(a..b)).collect();
    ts.sort_unstable_by(f64::total_cmp);
    ts
}

/// Conditional-Poisson arrivals given a realized intensity path: each
/// grid cell gets a Poisson count with the cell's trapezoid mass, placed
/// uniformly inside the cell. Cells are visited in order, so the result
/// is sorted after a per-cell sort.
fn cell_arrivals<R: Rng + ?Sized>(path: &IntensityPath, rng: &mut R) -> Vec<f64> {
    let mut ts = Vec::with_capacity(path.total_integral().ceil() as usize + 16);
    for i in 1..path.grid.len() {
        let mass = path.cum_integral[i] - path.cum_integral[i - 1];
        if mass <= 0.0 {
            continue;
        }
        let n = Poisson::new(mass).expect("positive finite Poisson mean").sample(rng) as usize;
        if n == 0 {
            continue;
        }
        let (a, b) = (path.grid[i - 1], path.grid[i]);
        let start = ts.len();
        for _ in 0..n {
            ts.push(rng.random_range(a..b));
        }
        ts[start..].sort_unstable_by(f64::total_cmp);
    }
    ts
}

/// Intensity path across one full cycle of the profile: per-segment
/// transition samplers with the segment's rate in drift and diffusion,
/// state carried across boundaries.
fn profile_intensity_path<R: Rng + ?Sized>(
    base: GcirParams,
    profile: &RateProfile,
    step: f64,
    rng: &mut R,
) -> Result<IntensityPath> {
    let first = base_with_lambda(base, profile.rates[0]);
    first.require_dynamic()?;
    let mut x = sample_initial(&first, rng);
    let mut grid = vec![0.0];
    let mut values = vec![x];
    for (i, &rate) in profile.rates.iter().enumerate() {
        let p = base_with_lambda(base, rate);
        p.require_dynamic()?;
        let seg_grid = uniform_grid(profile.delta, step);
        let offset = i as f64 * profile.delta;
        let full = TransitionSampler::new(&p, step);
        for w in seg_grid.windows(2) {
            let h = w[1] - w[0];
            x = if (h - step).abs() <= 1e-9 * step {
                full.step(x, rng)
            } else {
                TransitionSampler::new(&p, h).step(x, rng)
            };
            grid.push(offset + w[1]);
            values.push(x);
        }
    }
    let cum_integral = trapezoid_cumulative(&grid, &values);
    Ok(IntensityPath { grid, values, cum_integral })
}

/// Timestamps for one cycle of a non-stationary spec.
fn profile_timestamps<R: Rng + ?Sized>(
    variant: &ModelVariant,
    profile: &RateProfile,
    step: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, bool)> {
    if variant.is_dynamic() {
        let base = variant.gcir(None).unwrap();
        let path = profile_intensity_path(base, profile, step, rng)?;
        return Ok((cell_arrivals(&path, rng), false));
    }
    // Static variants: one mixing draw per cycle scales each segment.
    let lambda = variant.lambda();
    let (factor, truncated) = match variant {
        ModelVariant::M1 { .. } => (1.0, false),
        _ => {
            let (rate, truncated) = static_rate(variant, rng);
            (rate / lambda, truncated)
        }
    };
    let mut ts = Vec::new();
    for (i, &rate) in profile.rates.iter().enumerate() {
        let a = i as f64 * profile.delta;
        let seg = homogeneous_timestamps(rate * factor, a, a + profile.delta, rng);
        ts.extend(seg);
    }
    Ok((ts, truncated))
}

/// Dirichlet draw by Gamma normalization; concentrations validated
/// upstream.
fn dirichlet_sample<R: Rng + ?Sized>(conc: &[f64], rng: &mut R) -> Vec<f64> {
    let mut g: Vec<f64> = conc
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive Gamma shape").sample(rng))
        .collect();
    let sum: f64 = g.iter().sum();
    if sum <= 0.0 {
        // All shapes underflowed to zero draws; fall back to uniform.
        let k = conc.len() as f64;
        return vec![1.0 / k; conc.len()];
    }
    for v in &mut g {
        *v /= sum;
    }
    g
}
