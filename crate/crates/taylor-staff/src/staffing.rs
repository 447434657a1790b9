//! Staffing rules for service systems with over-dispersed arrivals.
//!
//! Every rule returns an integer staffing level n = ceil(base + safety)
//! with base = lambda / mu. They differ in the safety term: the classic
//! square-root rule assumes Poisson arrivals; the linear rule matches a
//! gamma-mixed Poisson whose variance grows quadratically; the alpha
//! rules interpolate with safety proportional to lambda^((alpha+1)/2),
//! with coefficients taken either from a static mixing variance or from
//! the steady-state variance functional V1 of the intensity-driven
//! infinite-server queue. The refined alpha rule replaces the Gaussian
//! coefficient with one calibrated by simulation-based stochastic
//! approximation so that the finite-server exceedance probability hits
//! the target exactly.

use crate::analytics::{v1, V1Horizon};
use crate::arrivals::{generate, ArrivalModelSpec, ArrivalPath, ModelVariant};
use crate::error::{invalid, Error, Result};
use crate::intensity::{GcirParams, InitCondition};
use crate::queue::{simulate_queue, Capacity};
use crate::rng::derive_seed;
use crate::service::ServiceDistSpec;
use statrs::distribution::{ContinuousCDF, Normal};

/// Delay quality-of-service target: the acceptable exceedance
/// probability epsilon in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosTarget {
    pub epsilon: f64,
}

impl QosTarget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid!("epsilon must lie in (0, 1), got {epsilon}"));
        }
        Ok(Self { epsilon })
    }

    /// Standard normal quantile at 1 - epsilon.
    pub fn beta(&self) -> f64 {
        Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(1.0 - self.epsilon)
    }
}

/// Which safety formula produced a staffing decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaffingRule {
    Sqrt,
    SqrtCir,
    Linear,
    AlphaStatic,
    BasicAlpha,
    RefinedAlpha,
}

impl std::fmt::Display for StaffingRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            StaffingRule::Sqrt => "sqrt",
            StaffingRule::SqrtCir => "sqrt-cir",
            StaffingRule::Linear => "linear",
            StaffingRule::AlphaStatic => "alpha-static",
            StaffingRule::BasicAlpha => "basic-alpha",
            StaffingRule::RefinedAlpha => "refined-alpha",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for StaffingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(StaffingRule::Sqrt),
            "sqrt-cir" => Ok(StaffingRule::SqrtCir),
            "linear" => Ok(StaffingRule::Linear),
            "alpha-static" => Ok(StaffingRule::AlphaStatic),
            "basic-alpha" => Ok(StaffingRule::BasicAlpha),
            "refined-alpha" => Ok(StaffingRule::RefinedAlpha),
            other => Err(invalid!("unknown staffing rule {other:?}")),
        }
    }
}

/// Integer staffing level with its decomposition into offered load and
/// safety margin.
#[derive(Debug, Clone, PartialEq)]
pub struct StaffingDecision {
    pub rule: StaffingRule,
    pub lambda: f64,
    pub epsilon: f64,
    pub base: f64,
    pub safety: f64,
    pub n: u64,
    /// Calibrated coefficient, present only for the refined alpha rule.
    pub delta_star: Option<f64>,
}

fn decide(
    rule: StaffingRule,
    lambda: f64,
    epsilon: f64,
    base: f64,
    safety: f64,
    delta_star: Option<f64>,
) -> StaffingDecision {
    // A system with arrivals always gets at least one server, even when
    // a very lax target drives base + safety below 1.
    let n = (base + safety).ceil().max(1.0) as u64;
    StaffingDecision { rule, lambda, epsilon, base, safety, n, delta_star }
}

fn check_lambda_mu(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid!("lambda must be positive and finite, got {lambda}"));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(invalid!("mu must be positive and finite, got {mu}"));
    }
    Ok(())
}

/// Square-root safety staffing for Poisson arrivals:
/// n = ceil(lambda/mu + beta sqrt(lambda/mu)).
pub fn sqrt_rule(lambda: f64, mu: f64, target: &QosTarget) -> Result<StaffingDecision> {
    check_lambda_mu(lambda, mu)?;
    let base = lambda / mu;
    let safety = target.beta() * base.sqrt();
    Ok(decide(StaffingRule::Sqrt, lambda, target.epsilon, base, safety, None))
}

/// Linear safety staffing for a gamma-mixed Poisson process with mixing
/// coefficient of variation sigma_g: n = ceil(lambda/mu + beta lambda
/// sigma_g / mu). The margin scales with lambda itself because the
/// mixing noise never averages out.
pub fn linear_rule(
    lambda: f64,
    mu: f64,
    sigma_g: f64,
    target: &QosTarget,
) -> Result<StaffingDecision> {
    check_lambda_mu(lambda, mu)?;
    if !(sigma_g >= 0.0) || !sigma_g.is_finite() {
        return Err(invalid!("sigma_g must be nonnegative, got {sigma_g}"));
    }
    let base = lambda / mu;
    let safety = target.beta() * lambda * sigma_g / mu;
    Ok(decide(StaffingRule::Linear, lambda, target.epsilon, base, safety, None))
}

/// Alpha safety staffing for the static power-law mixture: safety =
/// beta lambda^((alpha+1)/2) sqrt(sigma_y^2/mu^2 + 1{alpha=0}/mu). The
/// Poisson term enters only at alpha = 0, where both variance sources
/// share the same order in lambda.
pub fn alpha_static_rule(
    lambda: f64,
    mu: f64,
    alpha: f64,
    sigma_y: f64,
    target: &QosTarget,
) -> Result<StaffingDecision> {
    check_lambda_mu(lambda, mu)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid!("alpha must lie in [0, 1], got {alpha}"));
    }
    if !(sigma_y >= 0.0) || !sigma_y.is_finite() {
        return Err(invalid!("sigma_y must be nonnegative, got {sigma_y}"));
    }
    let base = lambda / mu;
    let poisson_term = if alpha == 0.0 { 1.0 / mu } else { 0.0 };
    let coeff = (sigma_y * sigma_y / (mu * mu) + poisson_term).sqrt();
    let safety = target.beta() * lambda.powf(0.5 * (alpha + 1.0)) * coeff;
    Ok(decide(StaffingRule::AlphaStatic, lambda, target.epsilon, base, safety, None))
}

/// Safety coefficient of the dynamic alpha rules: beta sqrt(V1(inf) +
/// 1{alpha=0}/mu), multiplying lambda^((alpha+1)/2).
fn alpha_dynamic_coefficient(
    service: &ServiceDistSpec,
    kappa: f64,
    sigma: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let v = v1(service, kappa, sigma, V1Horizon::Infinite)?;
    let poisson_term = if alpha == 0.0 { 1.0 / service.mu() } else { 0.0 };
    Ok(beta * (v + poisson_term).sqrt())
}

/// Basic alpha staffing for the dynamic intensity model: safety = beta
/// lambda^((alpha+1)/2) sqrt(V1(inf) + 1{alpha=0}/mu), with V1 the
/// steady-state variance functional of the infinite-server queue.
pub fn basic_alpha_rule(
    lambda: f64,
    service: &ServiceDistSpec,
    kappa: f64,
    sigma: f64,
    alpha: f64,
    target: &QosTarget,
) -> Result<StaffingDecision> {
    check_lambda_mu(lambda, service.mu())?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid!("alpha must lie in [0, 1], got {alpha}"));
    }
    let base = lambda / service.mu();
    let coeff = alpha_dynamic_coefficient(service, kappa, sigma, alpha, target.beta())?;
    let safety = coeff * lambda.powf(0.5 * (alpha + 1.0));
    Ok(decide(StaffingRule::BasicAlpha, lambda, target.epsilon, base, safety, None))
}

/// Square-root staffing corrected for a mean-reverting intensity: the
/// alpha = 0 case of the basic alpha rule, n = ceil(lambda/mu + beta
/// sqrt(lambda) sqrt(V1(inf) + 1/mu)).
pub fn sqrt_cir_rule(
    lambda: f64,
    service: &ServiceDistSpec,
    kappa: f64,
    sigma: f64,
    target: &QosTarget,
) -> Result<StaffingDecision> {
    let d = basic_alpha_rule(lambda, service, kappa, sigma, 0.0, target)?;
    Ok(StaffingDecision { rule: StaffingRule::SqrtCir, ..d })
}

/// Tuning constants for the stochastic-approximation calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmTuning {
    /// Arrival rate of the calibration system.
    pub lambda_sim: f64,
    /// Horizon of each calibration replication; the exceedance is probed
    /// once, at this time, so it doubles as the warm-up length.
    pub t_sim: f64,
    /// Replications per coefficient evaluation.
    pub replications: usize,
    /// Iteration cap before the search is declared non-convergent.
    pub max_iterations: usize,
    /// Stop once |M(delta) - epsilon| is at most this.
    pub stop_tolerance: f64,
    /// Step size schedule a_i = c / (i + c) with this c.
    pub step_scale: f64,
    /// The iterate must stay within [0, factor * delta_0].
    pub divergence_factor: f64,
}

impl Default for AlgorithmTuning {
    fn default() -> Self {
        Self {
            lambda_sim: 100.0,
            t_sim: 24.0,
            replications: 100,
            max_iterations: 200,
            stop_tolerance: 0.01,
            step_scale: 20.0,
            divergence_factor: 10.0,
        }
    }
}

impl AlgorithmTuning {
    fn validate(&self) -> Result<()> {
        if !(self.lambda_sim > 0.0) || !self.lambda_sim.is_finite() {
            return Err(invalid!("lambda_sim must be positive, got {}", self.lambda_sim));
        }
        if !(self.t_sim > 0.0) || !self.t_sim.is_finite() {
            return Err(invalid!("t_sim must be positive, got {}", self.t_sim));
        }
        if self.replications == 0 {
            return Err(invalid!("need at least one replication"));
        }
        if self.max_iterations == 0 {
            return Err(invalid!("need at least one iteration"));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(invalid!("stop tolerance must be nonnegative"));
        }
        if !(self.step_scale > 0.0) {
            return Err(invalid!("step scale must be positive"));
        }
        if !(self.divergence_factor > 0.0) {
            return Err(invalid!("divergence factor must be positive"));
        }
        Ok(())
    }
}

/// One iteration of the coefficient search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub delta: f64,
    pub staffing: u64,
    pub exceedance: f64,
}

/// Calibrates the refined safety coefficient delta* by stochastic
/// approximation on a simulated finite-server system at `lambda_sim`:
/// starting from the basic-alpha coefficient delta_0, each iteration
/// staffs n_i = ceil(lambda_sim/mu + delta_i lambda_sim^((alpha+1)/2)),
/// estimates the exceedance M(delta_i) = P(Q(t_sim) > n_i) over the
/// replications, and raises the coefficient when the exceedance is above
/// target (and lowers it otherwise) with steps c/(i+c).
///
/// The same arrival paths and per-replication service streams are reused
/// across iterations (common random numbers), so M is a deterministic
/// step function of delta and the search is reproducible given the seed.
pub fn refined_delta(
    service: &ServiceDistSpec,
    kappa: f64,
    sigma: f64,
    alpha: f64,
    target: &QosTarget,
    tuning: &AlgorithmTuning,
    seed: u64,
) -> Result<(f64, Vec<TraceEntry>)> {
    tuning.validate()?;
    let params =
        GcirParams::new(tuning.lambda_sim, kappa, sigma, alpha, InitCondition::Stationary)?;
    let spec = ArrivalModelSpec::stationary(ModelVariant::M5(params))?;
    let mu = service.mu();

    let delta_0 = alpha_dynamic_coefficient(service, kappa, sigma, alpha, target.beta())?;
    let hi = tuning.divergence_factor * delta_0;
    if !(delta_0 > 0.0) {
        return Err(invalid!(
            "starting coefficient must be positive, got {delta_0}; the refined rule needs a \
             stochastic intensity and a target below one half"
        ));
    }

    let arrivals: Vec<ArrivalPath> = (0..tuning.replications)
        .map(|j| generate(&spec, tuning.t_sim, derive_seed(seed, j as u64, 0)))
        .collect::<Result<_>>()?;
    let power = 0.5 * (alpha + 1.0);
    let base = tuning.lambda_sim / mu;

    let mut delta = delta_0;
    let mut trace: Vec<TraceEntry> = Vec::new();
    for i in 0..tuning.max_iterations {
        let n = (base + delta * tuning.lambda_sim.powf(power)).ceil().max(1.0) as u64;
        let mut exceed = 0usize;
        for (j, path) in arrivals.iter().enumerate() {
            let q = simulate_queue(
                path,
                service,
                Capacity::Finite(n),
                derive_seed(seed, j as u64, 1),
            )?;
            if q.level_at(tuning.t_sim) > n {
                exceed += 1;
            }
        }
        let m_est = exceed as f64 / tuning.replications as f64;
        trace.push(TraceEntry { iteration: i, delta, staffing: n, exceedance: m_est });

        if (m_est - target.epsilon).abs() <= tuning.stop_tolerance {
            return Ok((delta, trace));
        }
        let step = tuning.step_scale / (i as f64 + tuning.step_scale);
        // The exceedance is decreasing in delta, so the root-finding
        // update must move with the error, not against it.
        delta += step * (m_est - target.epsilon);
        if !(0.0..=hi).contains(&delta) {
            return Err(Error::NonConvergence(format!(
                "coefficient search left [0, {hi:.6}] at iteration {i}: delta {delta:.6} after \
                 exceedance {m_est:.4} (target {})",
                target.epsilon
            )));
        }
    }
    let tail: Vec<String> = trace
        .iter()
        .rev()
        .take(3)
        .map(|e| format!("iter {} delta {:.6} exceedance {:.4}", e.iteration, e.delta, e.exceedance))
        .collect();
    Err(Error::NonConvergence(format!(
        "coefficient search did not settle within {} iterations (target {}): {}",
        tuning.max_iterations,
        target.epsilon,
        tail.join("; ")
    )))
}

/// Staffing decision from an already calibrated refined coefficient:
/// n = ceil(lambda/mu + delta* lambda^((alpha+1)/2)). The coefficient is
/// portable across deployment rates.
pub fn refined_decision(
    lambda: f64,
    mu: f64,
    alpha: f64,
    delta_star: f64,
    target: &QosTarget,
) -> Result<StaffingDecision> {
    check_lambda_mu(lambda, mu)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid!("alpha must lie in [0, 1], got {alpha}"));
    }
    if !delta_star.is_finite() || delta_star < 0.0 {
        return Err(invalid!("delta_star must be nonnegative, got {delta_star}"));
    }
    let base = lambda / mu;
    let safety = delta_star * lambda.powf(0.5 * (alpha + 1.0));
    Ok(decide(StaffingRule::RefinedAlpha, lambda, target.epsilon, base, safety, Some(delta_star)))
}

/// Refined alpha staffing: calibrates delta* at the tuning system and
/// applies it at the deployment rate `lambda`. Returns the decision and
/// the full iteration trace.
pub fn refined_alpha_rule(
    lambda: f64,
    service: &ServiceDistSpec,
    kappa: f64,
    sigma: f64,
    alpha: f64,
    target: &QosTarget,
    tuning: &AlgorithmTuning,
    seed: u64,
) -> Result<(StaffingDecision, Vec<TraceEntry>)> {
    let (delta_star, trace) = refined_delta(service, kappa, sigma, alpha, target, tuning, seed)?;
    let decision = refined_decision(lambda, service.mu(), alpha, delta_star, target)?;
    Ok((decision, trace))
}

/// Steady-state delay probability of the M/M/n queue at offered load
/// a = lambda/mu (Erlang C), via the stable Erlang-B recursion.
pub fn erlang_c(n: u64, offered_load: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid!("need at least one server"));
    }
    if !(offered_load > 0.0) || !offered_load.is_finite() {
        return Err(invalid!("offered load must be positive, got {offered_load}"));
    }
    let rho = offered_load / n as f64;
    if rho >= 1.0 {
        return Err(invalid!(
            "offered load {offered_load} needs more than {n} servers for stability"
        ));
    }
    let mut b = 1.0;
    for k in 1..=n {
        b = offered_load * b / (k as f64 + offered_load * b);
    }
    Ok(b / (1.0 - rho + rho * b))
}
