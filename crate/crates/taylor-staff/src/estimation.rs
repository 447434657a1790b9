//! Maximum-likelihood fitting of the five arrival models from count
//! matrices, SIPP rate estimators, the two-step non-stationary fit, and
//! AIC/BIC model selection.
//!
//! The likelihood is the heavy-traffic Gaussian approximation: segment
//! counts of one cycle are treated as multivariate normal with mean and
//! covariance from analytics::mvn_moments, so the objective needs only
//! the per-cycle sufficient statistics (sample mean vector and scatter
//! matrix) instead of high-dimensional integration. The Poisson model is
//! the exception and uses its exact likelihood. Optimization is a
//! derivative-free simplex search on transformed parameters (log scales,
//! logit for alpha) with the square-root positivity bound enforced by
//! penalty, restarted from randomized starting points.

use crate::analytics::{mvn_moments, MvnMoments};
use crate::arrivals::{ArrivalModelSpec, CountMatrix, ModelVariant, RateProfile};
use crate::error::{invalid, Error, Result};
use crate::intensity::{GcirParams, InitCondition};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use statrs::function::gamma::ln_gamma;
use std::hash::{Hash, Hasher};

/// Which arrival model a fit targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl ModelTag {
    pub const ALL: [ModelTag; 5] =
        [ModelTag::M1, ModelTag::M2, ModelTag::M3, ModelTag::M4, ModelTag::M5];

    /// Number of parameters optimized beyond the segment rates.
    fn free_dim(&self) -> usize {
        match self {
            ModelTag::M1 => 0,
            ModelTag::M2 => 1,
            ModelTag::M3 | ModelTag::M4 => 2,
            ModelTag::M5 => 3,
        }
    }
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelTag::M1 => "M1",
            ModelTag::M2 => "M2",
            ModelTag::M3 => "M3",
            ModelTag::M4 => "M4",
            ModelTag::M5 => "M5",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(ModelTag::M1),
            "m2" => Ok(ModelTag::M2),
            "m3" => Ok(ModelTag::M3),
            "m4" => Ok(ModelTag::M4),
            "m5" => Ok(ModelTag::M5),
            other => Err(invalid!("unknown model tag {other:?}, expected m1..m5")),
        }
    }
}

/// Options controlling the simplex search.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Randomized restarts beyond the deterministic start.
    pub restarts: usize,
    /// Total objective-evaluation budget across all restarts.
    pub max_evaluations: usize,
    /// Optimize lambda jointly instead of profiling it out via the
    /// sample mean (stationary fits only).
    pub joint_lambda: bool,
    /// Seed for the restart offsets.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 5, max_evaluations: 10_000, joint_lambda: false, seed: 0 }
    }
}

/// Fitted model with likelihood and information criteria.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ModelTag,
    /// False when the rates came from SIPP (two-step fit).
    pub stationary: bool,
    /// Mean rate across segments.
    pub lambda: f64,
    /// Segment rates: one entry for stationary fits, k for two-step.
    pub rates: Vec<f64>,
    pub alpha: Option<f64>,
    pub kappa: Option<f64>,
    pub sigma: Option<f64>,
    pub sigma_y: Option<f64>,
    pub sigma_g: Option<f64>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    /// Counted parameters: rates count as one in stationary mode and as
    /// zero in two-step mode, where they are fixed before optimizing.
    pub q: usize,
    /// Number of observed cycles.
    pub m: usize,
    pub k: usize,
    pub delta: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// The covariance needed diagonal jitter at the reported optimum.
    pub jittered: bool,
    /// Hash of the training data, used to keep rankings honest.
    pub data_fingerprint: u64,
}

impl FitResult {
    /// The fitted model at its mean rate, for downstream simulation or
    /// staffing.
    pub fn variant(&self) -> Result<ModelVariant> {
        build_variant(self.model, self.lambda, &self.free_params())
    }

    fn free_params(&self) -> Vec<f64> {
        match self.model {
            ModelTag::M1 => vec![],
            ModelTag::M2 => vec![self.sigma_g.unwrap_or(0.0)],
            ModelTag::M3 => vec![self.alpha.unwrap_or(0.0), self.sigma_y.unwrap_or(0.0)],
            ModelTag::M4 => vec![self.kappa.unwrap_or(0.0), self.sigma.unwrap_or(0.0)],
            ModelTag::M5 => vec![
                self.alpha.unwrap_or(0.0),
                self.kappa.unwrap_or(0.0),
                self.sigma.unwrap_or(0.0),
            ],
        }
    }
}

fn fingerprint(data: &CountMatrix) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    data.m.hash(&mut h);
    data.k.hash(&mut h);
    data.delta.to_bits().hash(&mut h);
    data.counts.hash(&mut h);
    h.finish()
}

/// Per-cycle sufficient statistics of the Gaussian objective.
struct SuffStats {
    n_bar: DVector<f64>,
    scatter: DMatrix<f64>,
    m: usize,
}

fn suff_stats(data: &CountMatrix) -> SuffStats {
    let (m, k) = (data.m, data.k);
    let mut n_bar = DVector::zeros(k);
    for j in 0..m {
        for (i, &c) in data.row(j).iter().enumerate() {
            n_bar[i] += c as f64;
        }
    }
    n_bar /= m as f64;
    let mut scatter = DMatrix::zeros(k, k);
    let mut dev = DVector::zeros(k);
    for j in 0..m {
        for (i, &c) in data.row(j).iter().enumerate() {
            dev[i] = c as f64 - n_bar[i];
        }
        scatter.ger(1.0, &dev, &dev, 1.0);
    }
    SuffStats { n_bar, scatter, m }
}

/// Gaussian log-likelihood of the data summarized by `stats` under the
/// given moments, via sufficient statistics:
/// -(km/2) ln 2pi - (m/2) ln det - (tr(Sigma^-1 S) + m q(mean)) / 2.
/// Returns the likelihood and whether the covariance needed jitter.
fn gaussian_loglik(moments: &MvnMoments, stats: &SuffStats) -> (f64, bool) {
    let k = moments.mean_vector.len();
    let m = stats.m as f64;
    let mean = DVector::from_column_slice(&moments.mean_vector);
    let mut jittered = false;
    let chol = match Cholesky::new(moments.covariance.clone()) {
        Some(c) => c,
        None => {
            let mut cov = moments.covariance.clone();
            let eps = 1e-8 * cov.diagonal().mean();
            for i in 0..k {
                cov[(i, i)] += eps;
            }
            jittered = true;
            match Cholesky::new(cov) {
                Some(c) => c,
                None => return (f64::NEG_INFINITY, true),
            }
        }
    };
    let mut ln_det = 0.0;
    let l = chol.l_dirty();
    for i in 0..k {
        ln_det += l[(i, i)].ln();
    }
    ln_det *= 2.0;
    let trace = chol.solve(&stats.scatter).trace();
    let diff = &stats.n_bar - &mean;
    let quad = diff.dot(&chol.solve(&diff));
    let ll = -0.5 * (k as f64 * m * (2.0 * std::f64::consts::PI).ln()
        + m * ln_det
        + trace
        + m * quad);
    (ll, jittered)
}

/// Exact Poisson log-likelihood with per-segment rates.
fn poisson_loglik(data: &CountMatrix, rates: &[f64]) -> f64 {
    let mut ll = 0.0;
    for j in 0..data.m {
        for (i, &c) in data.row(j).iter().enumerate() {
            let mean = rates[i] * data.delta;
            let n = c as f64;
            ll += n * mean.ln() - mean - ln_gamma(n + 1.0);
        }
    }
    ll
}

/// Builds the model variant from the mean rate and natural free
/// parameters, ordered as in `free_params`.
fn build_variant(tag: ModelTag, lambda: f64, theta: &[f64]) -> Result<ModelVariant> {
    Ok(match tag {
        ModelTag::M1 => ModelVariant::M1 { lambda },
        ModelTag::M2 => ModelVariant::M2 { lambda, sigma_g: theta[0] },
        ModelTag::M3 => ModelVariant::M3 { lambda, alpha: theta[0], sigma_y: theta[1] },
        ModelTag::M4 => ModelVariant::M4 { lambda, kappa: theta[0], sigma: theta[1] },
        ModelTag::M5 => ModelVariant::M5(GcirParams::new(
            lambda,
            theta[1],
            theta[2],
            theta[0],
            InitCondition::Stationary,
        )?),
    })
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Transformed coordinates -> natural free parameters. Alpha uses a
/// logit scale, everything else a log scale.
fn natural_params(tag: ModelTag, u: &[f64]) -> Vec<f64> {
    match tag {
        ModelTag::M1 => vec![],
        ModelTag::M2 => vec![u[0].exp()],
        ModelTag::M3 => vec![logistic(u[0]), u[1].exp()],
        ModelTag::M4 => vec![u[0].exp(), u[1].exp()],
        ModelTag::M5 => vec![logistic(u[0]), u[1].exp(), u[2].exp()],
    }
}

const PENALTY: f64 = 1e12;

/// Negative Gaussian log-likelihood as a function of the transformed
/// free parameters, with penalties steering the search away from
/// overflow regions and square-root-bound violations.
struct Objective<'a> {
    tag: ModelTag,
    stats: &'a SuffStats,
    k: usize,
    delta: f64,
    /// Fixed segment rates (two-step) or None for stationary mode.
    profile_rates: Option<&'a [f64]>,
    /// Mean rate; ignored when the leading coordinate is ln lambda.
    lambda: f64,
    joint_lambda: bool,
}

impl Objective<'_> {
    fn dim(&self) -> usize {
        self.tag.free_dim() + usize::from(self.joint_lambda)
    }

    fn eval(&self, u: &[f64]) -> f64 {
        if let Some(excess) = u.iter().map(|x| (x.abs() - 30.0).max(0.0)).find(|e| *e > 0.0) {
            return PENALTY * (1.0 + excess * excess);
        }
        let (lambda, free_u) = if self.joint_lambda {
            (u[0].exp(), &u[1..])
        } else {
            (self.lambda, u)
        };
        let theta = natural_params(self.tag, free_u);
        // Square-root positivity bound for the dynamic models, checked at
        // the smallest rate where it binds; violations are graded so the
        // simplex can walk back into the feasible region.
        if matches!(self.tag, ModelTag::M4 | ModelTag::M5) {
            let (alpha, kappa, sigma) = match self.tag {
                ModelTag::M4 => (0.0, theta[0], theta[1]),
                _ => (theta[0], theta[1], theta[2]),
            };
            let min_rate = self
                .profile_rates
                .map(|r| r.iter().cloned().fold(f64::INFINITY, f64::min))
                .unwrap_or(lambda);
            let deficit = sigma * sigma - 2.0 * kappa * min_rate.powf(1.0 - alpha);
            if deficit > 0.0 {
                return PENALTY * (1.0 + deficit);
            }
        }
        let spec = match self.profile_rates {
            Some(rates) => match RateProfile::new(self.delta, rates.to_vec())
                .and_then(|p| {
                    ArrivalModelSpec::with_profile(build_variant(self.tag, lambda, &theta)?, p)
                }) {
                Ok(s) => s,
                Err(_) => return PENALTY,
            },
            None => match build_variant(self.tag, lambda, &theta)
                .and_then(ArrivalModelSpec::stationary)
            {
                Ok(s) => s,
                Err(_) => return PENALTY,
            },
        };
        let moments = match mvn_moments(&spec, self.k, self.delta) {
            Ok(m) => m,
            Err(_) => return PENALTY,
        };
        let (ll, _) = gaussian_loglik(&moments, self.stats);
        if ll.is_finite() {
            -ll
        } else {
            PENALTY
        }
    }
}

/// Derivative-free Nelder-Mead simplex search. Returns the best point,
/// its value, evaluations used, and whether the simplex collapsed below
/// tolerance within the budget.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    scale: f64,
    max_evals: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    // Simplex of n+1 vertices: start plus one step along each axis.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let fx0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), fx0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += scale;
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }
    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if (worst - best).abs() <= 1e-9 * (1.0 + best.abs()) && size <= 1e-7 {
            converged = true;
            break;
        }
        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let reflect: Vec<f64> =
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| 2.0 * c - w).collect();
        let fr = eval(&reflect, &mut evals);
        if fr < simplex[0].1 {
            let expand: Vec<f64> =
                centroid.iter().zip(&reflect).map(|(c, r)| c + 2.0 * (r - c)).collect();
            let fe = eval(&expand, &mut evals);
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = if fr < simplex[n].1 {
                centroid.iter().zip(&reflect).map(|(c, r)| c + 0.5 * (r - c)).collect()
            } else {
                centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + 0.5 * (w - c)).collect()
            };
            let fc = eval(&contract, &mut evals);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                let best_x = simplex[0].0.clone();
                for v in simplex[1..].iter_mut() {
                    for (xi, bi) in v.0.iter_mut().zip(&best_x) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    v.1 = eval(&v.0, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0.clone(), simplex[0].1, evals, converged)
}

/// Deterministic starting point in transformed coordinates, from moment
/// matching: the mean excess of segment variance over the Poisson level
/// pins the noise scale, and the mean-reversion guess sits at the
/// geometric middle of the resolvable timescales.
fn initial_point(tag: ModelTag, data: &CountMatrix, lambda: f64) -> Vec<f64> {
    let delta = data.delta;
    let mean_count = lambda * delta;
    let v_bar =
        data.segment_variances().iter().sum::<f64>() / data.k as f64;
    let excess = (v_bar - mean_count).max(0.05 * mean_count).max(1e-9);
    match tag {
        ModelTag::M1 => vec![],
        ModelTag::M2 => vec![(excess.sqrt() / mean_count).ln()],
        ModelTag::M3 => {
            let sigma_y0 = (excess / (lambda.powf(1.5) * delta * delta)).sqrt();
            vec![0.0, sigma_y0.ln()]
        }
        ModelTag::M4 | ModelTag::M5 => {
            let alpha0 = 0.5;
            let kappa0 = 1.0 / (delta * (data.k.max(1) as f64).sqrt());
            let power = if tag == ModelTag::M4 { 1.0 } else { alpha0 + 1.0 };
            let u = kappa0 * delta;
            let g = 1.0 + (-u).exp_m1() / u;
            let sigma0 =
                (excess * kappa0 * kappa0 / (lambda.powf(power) * delta * g)).sqrt();
            if tag == ModelTag::M4 {
                vec![kappa0.ln(), sigma0.ln()]
            } else {
                vec![0.0, kappa0.ln(), sigma0.ln()]
            }
        }
    }
}

struct SearchOutcome {
    u_best: Vec<f64>,
    evaluations: usize,
    converged: bool,
}

/// Multistart simplex search over the objective; errors if no restart
/// converges or the optimum never leaves the penalty region.
fn optimize(obj: &Objective, x0: Vec<f64>, options: &FitOptions) -> Result<SearchOutcome> {
    let runs = 1 + options.restarts;
    let budget_per_run = options.max_evaluations.div_ceil(runs).max(50);
    let mut rng = crate::rng::root(options.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut total_evals = 0usize;
    let mut any_converged = false;
    let f = |u: &[f64]| obj.eval(u);
    for run in 0..runs {
        let start: Vec<f64> = if run == 0 {
            x0.clone()
        } else {
            x0.iter().map(|&x| x + rng.random_range(-2.5..2.5)).collect()
        };
        let (u, fu, used, conv) = nelder_mead(&f, &start, 0.5, budget_per_run);
        total_evals += used;
        any_converged |= conv;
        if best.as_ref().is_none_or(|(_, fb)| fu < *fb) {
            best = Some((u, fu));
        }
        if total_evals >= options.max_evaluations {
            break;
        }
    }
    let (u_best, f_best) = best.expect("at least one run");
    if f_best >= PENALTY {
        return Err(Error::NonConvergence(
            "likelihood search never left the penalty region".into(),
        ));
    }
    if !any_converged {
        return Err(Error::NonConvergence(format!(
            "no simplex run converged within {} evaluations",
            options.max_evaluations
        )));
    }
    Ok(SearchOutcome { u_best, evaluations: total_evals, converged: any_converged })
}

fn check_data(data: &CountMatrix) -> Result<f64> {
    if data.m < 2 {
        return Err(invalid!("need at least 2 cycles, got {}", data.m));
    }
    let total: u64 = data.counts.iter().sum();
    if total == 0 {
        return Err(invalid!("count matrix is all zeros; no rate is identifiable"));
    }
    Ok(total as f64 / (data.m as f64 * data.k as f64 * data.delta))
}

/// Assembles the FitResult from the optimum of a Gaussian fit.
#[allow(clippy::too_many_arguments)]
fn finish_gaussian_fit(
    tag: ModelTag,
    data: &CountMatrix,
    obj: &Objective,
    outcome: SearchOutcome,
    rates: Vec<f64>,
    stationary: bool,
    q: usize,
    print: u64,
) -> Result<FitResult> {
    let (lambda, free_u) = if obj.joint_lambda {
        (outcome.u_best[0].exp(), &outcome.u_best[1..])
    } else {
        (obj.lambda, &outcome.u_best[..])
    };
    let theta = natural_params(tag, free_u);
    let spec = match obj.profile_rates {
        Some(r) => ArrivalModelSpec::with_profile(
            build_variant(tag, lambda, &theta)?,
            RateProfile::new(obj.delta, r.to_vec())?,
        )?,
        None => ArrivalModelSpec::stationary(build_variant(tag, lambda, &theta)?)?,
    };
    let moments = mvn_moments(&spec, obj.k, obj.delta)?;
    let (ll, jittered) = gaussian_loglik(&moments, obj.stats);
    let mut result = FitResult {
        model: tag,
        stationary,
        lambda,
        rates,
        alpha: None,
        kappa: None,
        sigma: None,
        sigma_y: None,
        sigma_g: None,
        log_likelihood: ll,
        aic: 2.0 * q as f64 - 2.0 * ll,
        bic: q as f64 * (data.m as f64).ln() - 2.0 * ll,
        q,
        m: data.m,
        k: data.k,
        delta: data.delta,
        converged: outcome.converged,
        evaluations: outcome.evaluations,
        jittered,
        data_fingerprint: print,
    };
    match tag {
        ModelTag::M1 => {}
        ModelTag::M2 => result.sigma_g = Some(theta[0]),
        ModelTag::M3 => {
            result.alpha = Some(theta[0]);
            result.sigma_y = Some(theta[1]);
        }
        ModelTag::M4 => {
            result.kappa = Some(theta[0]);
            result.sigma = Some(theta[1]);
        }
        ModelTag::M5 => {
            result.alpha = Some(theta[0]);
            result.kappa = Some(theta[1]);
            result.sigma = Some(theta[2]);
        }
    }
    Ok(result)
}

/// Exact-Poisson fit used for the M1 branches.
fn poisson_fit(
    data: &CountMatrix,
    rates: Vec<f64>,
    lambda: f64,
    stationary: bool,
    q: usize,
    print: u64,
) -> FitResult {
    let per_segment: Vec<f64> = if rates.len() == data.k {
        rates.clone()
    } else {
        vec![lambda; data.k]
    };
    let ll = poisson_loglik(data, &per_segment);
    FitResult {
        model: ModelTag::M1,
        stationary,
        lambda,
        rates,
        alpha: None,
        kappa: None,
        sigma: None,
        sigma_y: None,
        sigma_g: None,
        log_likelihood: ll,
        aic: 2.0 * q as f64 - 2.0 * ll,
        bic: q as f64 * (data.m as f64).ln() - 2.0 * ll,
        q,
        m: data.m,
        k: data.k,
        delta: data.delta,
        converged: true,
        evaluations: 0,
        jittered: false,
        data_fingerprint: print,
    }
}

/// Fits one model to stationary count data by maximizing the Gaussian
/// likelihood (exact Poisson likelihood for M1). The mean rate is
/// profiled out via the sample mean unless `joint_lambda` is set; the
/// parameter count q includes the rate.
pub fn fit_mle(data: &CountMatrix, model: ModelTag, options: &FitOptions) -> Result<FitResult> {
    let lambda_hat = check_data(data)?;
    let print = fingerprint(data);
    if model == ModelTag::M1 {
        // Poisson MLE is the sample mean rate; no search needed.
        return Ok(poisson_fit(data, vec![lambda_hat], lambda_hat, true, 1, print));
    }
    let stats = suff_stats(data);
    let q = 1 + model.free_dim();
    let obj = Objective {
        tag: model,
        stats: &stats,
        k: data.k,
        delta: data.delta,
        profile_rates: None,
        lambda: lambda_hat,
        joint_lambda: options.joint_lambda,
    };
    let mut x0 = initial_point(model, data, lambda_hat);
    if options.joint_lambda {
        x0.insert(0, lambda_hat.ln());
    }
    debug_assert_eq!(x0.len(), obj.dim());
    let outcome = optimize(&obj, x0, options)?;
    finish_gaussian_fit(model, data, &obj, outcome, vec![lambda_hat], true, q, print)
}

/// Time-of-day windows are half-open [start, end) in cycle time.
pub type Window = (f64, f64);

/// How SIPP turns sub-interval counts into segment rates.
#[derive(Debug, Clone, PartialEq)]
pub enum SippKind {
    /// Mean sub-interval rate per segment.
    Avg,
    /// Smallest sub-interval rate per segment.
    Min,
    /// Largest sub-interval rate per segment.
    Max,
    /// Min inside `min_window`, Max inside `max_window`, Avg elsewhere.
    Mix { min_window: Window, max_window: Window },
}

/// SIPP rate estimator: a kind plus the number of sub-intervals per
/// segment available in the data.
#[derive(Debug, Clone, PartialEq)]
pub struct SippVariant {
    pub kind: SippKind,
    pub sub_intervals: usize,
}

impl SippVariant {
    pub fn new(kind: SippKind, sub_intervals: usize) -> Result<Self> {
        if sub_intervals == 0 {
            return Err(invalid!("need at least one sub-interval per segment"));
        }
        if let SippKind::Mix { min_window, max_window } = &kind {
            for (a, b) in [min_window, max_window] {
                if !(a < b) {
                    return Err(invalid!("window ({a}, {b}) must have start < end"));
                }
            }
            let disjoint = min_window.1 <= max_window.0 || max_window.1 <= min_window.0;
            if !disjoint {
                return Err(invalid!("Mix windows must be disjoint"));
            }
        }
        Ok(Self { kind, sub_intervals })
    }

    /// Mix with the default windows: Min over 06:00-09:00 and Max over
    /// 16:00-20:00 cycle time.
    pub fn mix_default(sub_intervals: usize) -> Result<Self> {
        Self::new(
            SippKind::Mix { min_window: (6.0, 9.0), max_window: (16.0, 20.0) },
            sub_intervals,
        )
    }
}

/// SIPP rate estimates per segment. The data columns are read as h
/// sub-intervals per segment; h = 1 collapses every kind to the plain
/// per-segment mean rate.
pub fn sipp_estimate(data: &CountMatrix, variant: &SippVariant) -> Result<Vec<f64>> {
    let h = variant.sub_intervals;
    if h == 0 || data.k % h != 0 {
        return Err(invalid!(
            "{h} sub-intervals per segment do not divide {} columns",
            data.k
        ));
    }
    let k = data.k / h;
    let sub_delta = data.delta;
    let segment_delta = sub_delta * h as f64;
    // Mean count per sub-interval column, as a rate.
    let mut sub_rates = vec![0.0; data.k];
    for j in 0..data.m {
        for (i, &c) in data.row(j).iter().enumerate() {
            sub_rates[i] += c as f64;
        }
    }
    for r in sub_rates.iter_mut() {
        *r /= data.m as f64 * sub_delta;
    }
    let mut rates = Vec::with_capacity(k);
    for seg in 0..k {
        let slice = &sub_rates[seg * h..(seg + 1) * h];
        let avg = slice.iter().sum::<f64>() / h as f64;
        let min = slice.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let rate = match &variant.kind {
            SippKind::Avg => avg,
            SippKind::Min => min,
            SippKind::Max => max,
            SippKind::Mix { min_window, max_window } => {
                let start = seg as f64 * segment_delta;
                if start >= min_window.0 && start < min_window.1 {
                    min
                } else if start >= max_window.0 && start < max_window.1 {
                    max
                } else {
                    avg
                }
            }
        };
        rates.push(rate);
    }
    Ok(rates)
}

/// Sums each group of h adjacent columns into one segment column.
fn aggregate_segments(data: &CountMatrix, h: usize) -> Result<CountMatrix> {
    if h == 1 {
        return Ok(data.clone());
    }
    let k = data.k / h;
    let rows: Vec<Vec<u64>> = (0..data.m)
        .map(|j| {
            let row = data.row(j);
            (0..k).map(|seg| row[seg * h..(seg + 1) * h].iter().sum()).collect()
        })
        .collect();
    CountMatrix::from_rows(rows, data.delta * h as f64, None)
}

/// Two-step non-stationary fit: segment rates fixed from SIPP, then the
/// remaining parameters maximized over the Gaussian likelihood with the
/// non-stationary count moments. The parameter count q excludes the
/// rates.
pub fn two_step_fit(
    data: &CountMatrix,
    model: ModelTag,
    sipp: &SippVariant,
    options: &FitOptions,
) -> Result<FitResult> {
    check_data(data)?;
    let print = fingerprint(data);
    let rates = sipp_estimate(data, sipp)?;
    let segment_data = aggregate_segments(data, sipp.sub_intervals)?;
    let lambda_bar = rates.iter().sum::<f64>() / rates.len() as f64;
    if model == ModelTag::M1 {
        if let Some(r) = rates.iter().find(|r| !(**r > 0.0)) {
            return Err(invalid!("segment rate {r} is not positive; cannot fit"));
        }
        return Ok(poisson_fit(&segment_data, rates, lambda_bar, false, 0, print));
    }
    let stats = suff_stats(&segment_data);
    let q = model.free_dim();
    let obj = Objective {
        tag: model,
        stats: &stats,
        k: segment_data.k,
        delta: segment_data.delta,
        profile_rates: Some(&rates),
        lambda: lambda_bar,
        joint_lambda: false,
    };
    let x0 = initial_point(model, &segment_data, lambda_bar);
    let outcome = optimize(&obj, x0, options)?;
    finish_gaussian_fit(model, &segment_data, &obj, outcome, rates.clone(), false, q, print)
}

/// One row of a model ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub model: ModelTag,
    pub value: f64,
    /// Gap to the best model under the same criterion.
    pub delta: f64,
    /// Gap exceeds 10: strong evidence against this model.
    pub strong: bool,
}

/// Fits ranked by AIC and by BIC (ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRanking {
    pub by_aic: Vec<RankEntry>,
    pub by_bic: Vec<RankEntry>,
}

/// Ranks at least two fits of the same data by information criteria.
pub fn select_model(fits: &[FitResult]) -> Result<ModelRanking> {
    if fits.len() < 2 {
        return Err(invalid!("need at least two fits to rank, got {}", fits.len()));
    }
    let print = fits[0].data_fingerprint;
    if fits.iter().any(|f| f.data_fingerprint != print) {
        return Err(invalid!("fits cover different data sets; ranking would be meaningless"));
    }
    let rank = |value: fn(&FitResult) -> f64| -> Vec<RankEntry> {
        let mut entries: Vec<(ModelTag, f64)> = fits.iter().map(|f| (f.model, value(f))).collect();
        entries.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = entries[0].1;
        entries
            .into_iter()
            .map(|(model, v)| RankEntry {
                model,
                value: v,
                delta: v - best,
                strong: v - best > 10.0,
            })
            .collect()
    };
    Ok(ModelRanking { by_aic: rank(|f| f.aic), by_bic: rank(|f| f.bic) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrivals::generate_count_matrix;
    use approx::assert_relative_eq;

    fn m1_data(lambda: f64, m: usize, k: usize, delta: f64, seed: u64) -> CountMatrix {
        let spec = ArrivalModelSpec::stationary(ModelVariant::M1 { lambda }).unwrap();
        generate_count_matrix(&spec, m, k, delta, seed).unwrap()
    }

    #[test]
    fn poisson_mle_is_sample_mean_rate() {
        let data = m1_data(100.0, 50, 6, 0.25, 9);
        let fit = fit_mle(&data, ModelTag::M1, &FitOptions::default()).unwrap();
        let grand_mean =
            data.counts.iter().sum::<u64>() as f64 / (50.0 * 6.0 * 0.25);
        assert_relative_eq!(fit.lambda, grand_mean, epsilon = 1e-12);
        assert_eq!(fit.q, 1);
        assert_relative_eq!(fit.aic, 2.0 - 2.0 * fit.log_likelihood, epsilon = 1e-12);
        assert_relative_eq!(
            fit.bic,
            (50.0f64).ln() - 2.0 * fit.log_likelihood,
            epsilon = 1e-12
        );
        // The exact Poisson likelihood is maximized at the sample mean.
        let ll_at = |l: f64| poisson_loglik(&data, &vec![l; 6]);
        assert!(ll_at(grand_mean) > ll_at(grand_mean * 1.05));
        assert!(ll_at(grand_mean) > ll_at(grand_mean * 0.95));
    }

    #[test]
    fn sufficient_statistics_match_rowwise_likelihood() {
        let data = m1_data(30.0, 8, 3, 0.5, 4);
        let stats = suff_stats(&data);
        // An arbitrary non-diagonal SPD covariance and off mean.
        let spec = ArrivalModelSpec::stationary(ModelVariant::M2 {
            lambda: 31.0,
            sigma_g: 0.2,
        })
        .unwrap();
        let moments = mvn_moments(&spec, 3, 0.5).unwrap();
        let (ll, jittered) = gaussian_loglik(&moments, &stats);
        assert!(!jittered);
        let inv = moments.covariance.clone().try_inverse().unwrap();
        let ln_det = moments.covariance.determinant().ln();
        let mean = DVector::from_column_slice(&moments.mean_vector);
        let mut naive = 0.0;
        for j in 0..data.m {
            let x = DVector::from_iterator(3, data.row(j).iter().map(|&c| c as f64));
            let d = &x - &mean;
            naive += -0.5
                * (3.0 * (2.0 * std::f64::consts::PI).ln()
                    + ln_det
                    + (d.transpose() * &inv * &d)[(0, 0)]);
        }
        assert_relative_eq!(ll, naive, epsilon = 1e-8, max_relative = 1e-10);
    }

    #[test]
    fn simplex_finds_quadratic_minimum() {
        let f = |x: &[f64]| {
            (x[0] - 1.0).powi(2) + 2.0 * (x[1] + 0.5).powi(2) + 0.5 * (x[2] - 2.0).powi(2)
        };
        let (x, fx, _, converged) = nelder_mead(&f, &[0.0, 0.0, 0.0], 0.5, 2000);
        assert!(converged);
        assert!(fx < 1e-10);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(x[1], -0.5, epsilon = 1e-4);
        assert_relative_eq!(x[2], 2.0, epsilon = 1e-4);
    }

    #[test]
    fn sipp_kinds_on_known_subrates() {
        // One segment of three sub-intervals with rates 6, 12, 18:
        // counts 2, 4, 6 over sub-delta 1/3.
        let rows: Vec<Vec<u64>> = (0..4).map(|_| vec![2, 4, 6]).collect();
        let data = CountMatrix::from_rows(rows, 1.0 / 3.0, None).unwrap();
        let avg = sipp_estimate(&data, &SippVariant::new(SippKind::Avg, 3).unwrap()).unwrap();
        let min = sipp_estimate(&data, &SippVariant::new(SippKind::Min, 3).unwrap()).unwrap();
        let max = sipp_estimate(&data, &SippVariant::new(SippKind::Max, 3).unwrap()).unwrap();
        assert_relative_eq!(avg[0], 12.0, epsilon = 1e-12);
        assert_relative_eq!(min[0], 6.0, epsilon = 1e-12);
        assert_relative_eq!(max[0], 18.0, epsilon = 1e-12);
        // Constant counts collapse all kinds to the same rate.
        let flat = CountMatrix::from_rows(vec![vec![5, 5]; 3], 0.5, None).unwrap();
        for kind in [SippKind::Avg, SippKind::Min, SippKind::Max] {
            let r = sipp_estimate(&flat, &SippVariant::new(kind, 1).unwrap()).unwrap();
            assert_eq!(r, vec![10.0, 10.0]);
        }
        // Sub-intervals must divide the columns.
        assert!(sipp_estimate(&data, &SippVariant::new(SippKind::Avg, 2).unwrap()).is_err());
    }

    #[test]
    fn sipp_avg_equals_column_means() {
        let data = m1_data(40.0, 12, 5, 0.5, 8);
        let rates =
            sipp_estimate(&data, &SippVariant::new(SippKind::Avg, 1).unwrap()).unwrap();
        for i in 0..5 {
            let col_mean =
                (0..12).map(|j| data.get(j, i) as f64).sum::<f64>() / 12.0;
            assert_relative_eq!(rates[i], col_mean / 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn sipp_mix_routes_windows() {
        // Four segments of length 6 covering a 24-hour cycle; windows
        // pick Min for the segment starting at 6 and Max at 18.
        let rows = vec![vec![4, 8, 10, 2, 6, 10, 12, 4]; 5];
        let data = CountMatrix::from_rows(rows, 3.0, None).unwrap();
        let mix = SippVariant::new(
            SippKind::Mix { min_window: (6.0, 9.0), max_window: (16.0, 20.0) },
            2,
        )
        .unwrap();
        let rates = sipp_estimate(&data, &mix).unwrap();
        // Sub-rates per segment: (4/3, 8/3), (10/3, 2/3), (2, 10/3), (4, 4/3).
        assert_relative_eq!(rates[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(rates[1], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(rates[2], 8.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(rates[3], 4.0, epsilon = 1e-12);
        // Overlapping windows are rejected.
        assert!(SippVariant::new(
            SippKind::Mix { min_window: (6.0, 10.0), max_window: (9.0, 12.0) },
            1
        )
        .is_err());
    }

    #[test]
    fn two_step_with_equal_rates_matches_stationary_fit() {
        // Mirrored columns force exactly equal column means, so the SIPP
        // profile equals the profiled stationary rate and both fits
        // optimize the identical objective.
        let spec = ArrivalModelSpec::stationary(ModelVariant::M5(
            GcirParams::new(60.0, 0.5, 0.4, 0.5, InitCondition::Stationary).unwrap(),
        ))
        .unwrap();
        let base = generate_count_matrix(&spec, 30, 2, 0.5, 21).unwrap();
        let mut rows: Vec<Vec<u64>> = (0..30).map(|j| base.row(j).to_vec()).collect();
        let mirrored: Vec<Vec<u64>> =
            rows.iter().map(|r| vec![r[1], r[0]]).collect();
        rows.extend(mirrored);
        let data = CountMatrix::from_rows(rows, 0.5, None).unwrap();

        let options = FitOptions { restarts: 2, max_evaluations: 4000, ..Default::default() };
        let stationary = fit_mle(&data, ModelTag::M5, &options).unwrap();
        let two_step = two_step_fit(
            &data,
            ModelTag::M5,
            &SippVariant::new(SippKind::Avg, 1).unwrap(),
            &options,
        )
        .unwrap();
        assert_relative_eq!(two_step.rates[0], two_step.rates[1], epsilon = 1e-12);
        assert_relative_eq!(two_step.rates[0], stationary.lambda, epsilon = 1e-12);
        assert_relative_eq!(
            two_step.log_likelihood,
            stationary.log_likelihood,
            epsilon = 1e-6
        );
        assert_relative_eq!(
            two_step.alpha.unwrap(),
            stationary.alpha.unwrap(),
            epsilon = 1e-5
        );
        assert_relative_eq!(
            two_step.kappa.unwrap(),
            stationary.kappa.unwrap(),
            max_relative = 1e-4
        );
        assert_relative_eq!(
            two_step.sigma.unwrap(),
            stationary.sigma.unwrap(),
            max_relative = 1e-4
        );
        // Two-step counts only the non-rate parameters.
        assert_eq!(stationary.q, 4);
        assert_eq!(two_step.q, 3);
    }

    #[test]
    fn ranking_orders_and_flags() {
        let data = m1_data(50.0, 10, 4, 0.5, 2);
        let base = fit_mle(&data, ModelTag::M1, &FitOptions::default()).unwrap();
        let mut better = base.clone();
        better.model = ModelTag::M5;
        better.q = 4;
        better.log_likelihood = base.log_likelihood + 20.0;
        better.aic = 2.0 * 4.0 - 2.0 * better.log_likelihood;
        better.bic = 4.0 * (10.0f64).ln() - 2.0 * better.log_likelihood;
        let ranking = select_model(&[base.clone(), better.clone()]).unwrap();
        assert_eq!(ranking.by_aic[0].model, ModelTag::M5);
        assert_eq!(ranking.by_aic[0].delta, 0.0);
        assert!(!ranking.by_aic[0].strong);
        assert!(ranking.by_aic[1].delta > 10.0);
        assert!(ranking.by_aic[1].strong);

        // Identical likelihoods: the smaller parameter count wins.
        let mut small_q = base.clone();
        small_q.model = ModelTag::M4;
        small_q.q = 3;
        small_q.aic = 2.0 * 3.0 - 2.0 * base.log_likelihood;
        let mut large_q = base.clone();
        large_q.model = ModelTag::M5;
        large_q.q = 4;
        large_q.aic = 2.0 * 4.0 - 2.0 * base.log_likelihood;
        let r2 = select_model(&[large_q, small_q]).unwrap();
        assert_eq!(r2.by_aic[0].model, ModelTag::M4);

        // Single fit and mixed data are rejected.
        assert!(select_model(std::slice::from_ref(&base)).is_err());
        let other_data = m1_data(50.0, 10, 4, 0.5, 3);
        let other = fit_mle(&other_data, ModelTag::M1, &FitOptions::default()).unwrap();
        assert!(select_model(&[base, other]).is_err());
    }

    #[test]
    fn rejects_degenerate_data() {
        let data = m1_data(20.0, 1, 4, 0.5, 5);
        assert!(fit_mle(&data, ModelTag::M1, &FitOptions::default()).is_err());
        let zeros = CountMatrix::from_rows(vec![vec![0, 0]; 5], 1.0, None).unwrap();
        assert!(fit_mle(&zeros, ModelTag::M5, &FitOptions::default()).is_err());
    }

    #[test]
    fn model_tags_parse_and_print() {
        for tag in ModelTag::ALL {
            let s = tag.to_string();
            assert_eq!(s.parse::<ModelTag>().unwrap(), tag);
            assert_eq!(s.to_lowercase().parse::<ModelTag>().unwrap(), tag);
        }
        assert!("m6".parse::<ModelTag>().is_err());
    }
}
