//! Closed-form and quadrature analytics for the arrival models.
//!
//! Contents:
//!
//! * stationary arrival-count moments and the coefficient of dispersion
//!   of the dynamic model: Var[A(t)] = lambda t +
//!   (sigma^2 lambda^(alpha+1) t / kappa^2) g(kappa t) with
//!   g(u) = 1 - (1 - e^(-u))/u;
//! * the exact Laplace transform of A(t) under the stationary law,
//!   evaluated in log space so large lambda t does not overflow;
//! * Ornstein-Uhlenbeck covariances (stationary and fixed-start) and the
//!   asymptotic variance functional V1 built from them by nested adaptive
//!   Gauss-Legendre quadrature;
//! * mean vectors and covariance matrices of per-segment counts for all
//!   five arrival models, the inputs to the Gaussian likelihood;
//! * ordinary least squares of log variance on log mean, the power-law
//!   dispersion fit.

use crate::arrivals::{ArrivalModelSpec, ModelVariant};
use crate::error::{invalid, Result};
use crate::intensity::{GcirParams, InitCondition};
use crate::service::{ServiceDistSpec, ServiceFamily};
use nalgebra::DMatrix;

/// Mean, variance, and coefficient of dispersion of a count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalMoments {
    pub mean: f64,
    pub variance: f64,
    /// variance / mean; at least 1 under the stationary dynamic model.
    pub cod: f64,
}

/// Mean vector and covariance matrix of per-segment counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnMoments {
    pub mean_vector: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

/// Result of the log-log dispersion regression
/// log Var = (1 + alpha) log Mean + c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorFit {
    /// Slope minus one.
    pub alpha_hat: f64,
    pub intercept_c: f64,
    pub r_squared: f64,
}

/// g(u) = 1 - (1 - e^(-u))/u, the variance growth factor; series branch
/// keeps small arguments accurate.
pub(crate) fn growth_g(u: f64) -> f64 {
    debug_assert!(u >= 0.0);
    if u < 1e-8 {
        u / 2.0 - u * u / 6.0
    } else {
        1.0 + (-u).exp_m1() / u
    }
}

/// Variance of the integrated stationary OU process,
/// Var[int_0^t U(s) ds] = (sigma^2 t / kappa^2) g(kappa t).
pub fn integrated_ou_variance(kappa: f64, sigma: f64, t: f64) -> f64 {
    if sigma == 0.0 || t == 0.0 {
        return 0.0;
    }
    sigma * sigma * t / (kappa * kappa) * growth_g(kappa * t)
}

/// Stationary-start moments of the arrival count A(t) under the dynamic
/// model: mean lambda t, variance lambda t plus the integrated-intensity
/// term, and their ratio.
pub fn arrival_moments(p: &GcirParams, t: f64) -> Result<ArrivalMoments> {
    if p.init != InitCondition::Stationary {
        return Err(invalid!(
            "arrival moments hold for the stationary initial law; fixed starts lack this closed form"
        ));
    }
    p.require_dynamic()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid!("time must be positive and finite, got {t}"));
    }
    let mean = p.lambda * t;
    if p.sigma == 0.0 {
        return Ok(ArrivalMoments { mean, variance: mean, cod: 1.0 });
    }
    let sigma2 = p.sigma * p.sigma;
    let g = growth_g(p.kappa * t);
    let extra_cod = sigma2 * p.lambda.powf(p.alpha) / (p.kappa * p.kappa) * g;
    Ok(ArrivalMoments { mean, variance: mean * (1.0 + extra_cod), cod: 1.0 + extra_cod })
}

/// Natural log of E[e^(-theta A(t))] under the stationary initial law.
///
/// With theta' = 1 - e^(-theta) and eta = sqrt(kappa^2 +
/// 2 sigma^2 lambda^alpha theta'), the transform is
/// phi(theta', t)^gamma * (1 + (sigma^2 lambda^alpha / (2 kappa))
/// psi(theta', t))^(-gamma), gamma = 2 kappa lambda^(1-alpha) / sigma^2.
/// Every exponential is kept in log space because eta t can exceed 700.
///
/// sigma = 0 reduces to the Poisson transform, log L = lambda t
/// (e^(-theta) - 1). Slightly negative theta is accepted as long as the
/// discriminant under eta stays positive, which supports numerical
/// differentiation at zero.
pub fn log_laplace_a(p: &GcirParams, theta: f64, t: f64) -> Result<f64> {
    if p.init != InitCondition::Stationary {
        return Err(invalid!("the Laplace transform here is for the stationary initial law"));
    }
    p.require_dynamic()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid!("time must be positive and finite, got {t}"));
    }
    if !theta.is_finite() {
        return Err(invalid!("theta must be finite, got {theta}"));
    }
    // theta' = 1 - e^(-theta), computed without cancellation.
    let thetap = -(-theta).exp_m1();
    if p.sigma == 0.0 {
        return Ok(-p.lambda * t * thetap);
    }
    let sigma2 = p.sigma * p.sigma;
    let la = p.lambda.powf(p.alpha);
    let a2 = 2.0 * sigma2 * la;
    let disc = p.kappa * p.kappa + a2 * thetap;
    if disc <= 0.0 {
        return Err(invalid!(
            "theta = {theta} lies outside the transform's domain (discriminant {disc} <= 0)"
        ));
    }
    let eta = disc.sqrt();
    // eta - kappa without cancellation for small theta'.
    let eta_minus_kappa = a2 * thetap / (eta + p.kappa);
    let denom = eta_minus_kappa * (-eta * t).exp() + eta + p.kappa;
    let gamma = 2.0 * p.kappa * p.lambda.powf(1.0 - p.alpha) / sigma2;
    let log_phi = (2.0 * eta).ln() - 0.5 * t * eta_minus_kappa - denom.ln();
    let psi = 2.0 * thetap * (-(-eta * t).exp_m1()) / denom;
    let psi_term = sigma2 * la / (2.0 * p.kappa) * psi;
    if psi_term <= -1.0 {
        return Err(invalid!("theta = {theta} lies outside the transform's domain"));
    }
    Ok(gamma * (log_phi - psi_term.ln_1p()))
}

/// E[e^(-theta A(t))] under the stationary initial law; see
/// [`log_laplace_a`].
pub fn laplace_a(p: &GcirParams, theta: f64, t: f64) -> Result<f64> {
    Ok(log_laplace_a(p, theta, t)?.exp())
}

/// Which OU start the covariance kernel assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuInit {
    Stationary,
    /// Deterministic start at the mean, so covariance vanishes at time 0.
    Fixed,
}

/// Covariance of an OU process dU = -kappa U dt + sigma dB at times s, v.
pub fn ou_cov(kappa: f64, sigma: f64, init: OuInit, s: f64, v: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid!("kappa must be positive, got {kappa}"));
    }
    if !(s >= 0.0) || !(v >= 0.0) {
        return Err(invalid!("times must be nonnegative, got ({s}, {v})"));
    }
    let scale = sigma * sigma / (2.0 * kappa);
    let gap = (-kappa * (s - v).abs()).exp();
    Ok(match init {
        OuInit::Stationary => scale * gap,
        OuInit::Fixed => scale * (gap - (-kappa * (s + v)).exp()),
    })
}

/// Horizon for the asymptotic variance functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum V1Horizon {
    Finite(f64),
    /// Steady-state limit, resolved by truncating where both the OU
    /// kernel and the service survival drop below 1e-8.
    Infinite,
}

/// V1(t) = 2 int_0^t int_0^s Fbar(t-s) Fbar(t-v) Cov[U(s), U(v)] dv ds
/// with the stationary OU kernel: the intensity-driven part of the
/// infinite-server queue-length variance, per unit lambda^(alpha+1).
///
/// Exponential service at steady state short-circuits to the closed form
/// sigma^2 / (2 kappa mu (mu + kappa)); everything else is nested
/// adaptive quadrature at relative tolerance 1e-6.
pub fn v1(service: &ServiceDistSpec, kappa: f64, sigma: f64, horizon: V1Horizon) -> Result<f64> {
    v1_with_init(service, kappa, sigma, horizon, OuInit::Stationary)
}

/// [`v1`] with a selectable OU start; the fixed-start kernel only
/// differs over a finite horizon.
pub fn v1_with_init(
    service: &ServiceDistSpec,
    kappa: f64,
    sigma: f64,
    horizon: V1Horizon,
    init: OuInit,
) -> Result<f64> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid!("sigma must be nonnegative, got {sigma}"));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid!("kappa must be positive, got {kappa}"));
    }
    if let V1Horizon::Finite(t) = horizon {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid!("horizon must be nonnegative and finite, got {t}"));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
    }
    if service.family == ServiceFamily::Exponential
        && horizon == V1Horizon::Infinite
        && init == OuInit::Stationary
    {
        let mu = service.mu();
        return Ok(sigma * sigma / (2.0 * kappa * mu * (mu + kappa)));
    }
    let (t_eff, fixed_horizon) = match horizon {
        V1Horizon::Finite(t) => (t, matches!(init, OuInit::Fixed).then_some(t)),
        // At steady state the fixed-start correction has decayed away.
        V1Horizon::Infinite => (truncation_point(service, kappa), None),
    };
    Ok(v1_quadrature(service, kappa, sigma, t_eff, fixed_horizon))
}

/// Upper limit standing in for infinity: both e^(-kappa t) and the
/// service survival are below 1e-8 beyond it.
fn truncation_point(service: &ServiceDistSpec, kappa: f64) -> f64 {
    let ou_cut = (1e8f64).ln() / kappa;
    let mut x = service.mean.max(1.0);
    while service.survival(x) >= 1e-8 && x < 1e12 {
        x *= 2.0;
    }
    ou_cut.max(x)
}

/// Nested quadrature for V1 after the change of variables u = t - s,
/// w = t - v:
/// (sigma^2/kappa) int_0^t Fbar(u) int_u^t Fbar(w) e^(-kappa (w-u)) dw du,
/// with the fixed-start correction subtracting e^(-kappa (2T - u - w))
/// inside the inner kernel when `fixed_horizon` = Some(T).
pub(crate) fn v1_quadrature(
    service: &ServiceDistSpec,
    kappa: f64,
    sigma: f64,
    t: f64,
    fixed_horizon: Option<f64>,
) -> f64 {
    let inner = |u: f64| -> f64 {
        let f = |w: f64| {
            let mut kernel = (-kappa * (w - u)).exp();
            if let Some(big_t) = fixed_horizon {
                kernel -= (-kappa * (2.0 * big_t - u - w)).exp();
            }
            service.survival(w) * kernel
        };
        quad::integrate(&f, u, t, 1e-7)
    };
    let outer = |u: f64| service.survival(u) * inner(u);
    sigma * sigma / kappa * quad::integrate(&outer, 0.0, t, 1e-6)
}

/// Mean vector and covariance of the k per-segment counts under `spec`,
/// the Gaussian-likelihood inputs.
///
/// Dynamic models: diagonal entries are the stationary count variance
/// over one segment; the off-diagonal (i < l, zero-indexed) is
/// (lambda_i lambda_l)^((alpha+1)/2) sigma^2/(2 kappa^3) (1-a)^2
/// (a^(l-i-1) - a^(l+i)) with a = e^(-kappa delta), the integrated OU
/// covariance between the two segments. Static models: diagonal
/// lambda_i delta + lambda_i^(alpha+1) s^2 delta^2 and constant-in-gap
/// off-diagonals (lambda_i lambda_l)^((alpha+1)/2) s^2 delta^2. The pure
/// Poisson model is diagonal.
pub fn mvn_moments(spec: &ArrivalModelSpec, k: usize, delta: f64) -> Result<MvnMoments> {
    if k == 0 {
        return Err(invalid!("need at least one segment"));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid!("segment length must be positive, got {delta}"));
    }
    spec.variant.validate()?;
    let rates: Vec<f64> = match &spec.nonstationary {
        Some(profile) => {
            if profile.k() != k {
                return Err(invalid!(
                    "segment count {k} does not match profile length {}",
                    profile.k()
                ));
            }
            if (profile.delta - delta).abs() > 1e-9 * delta {
                return Err(invalid!(
                    "segment length {delta} does not match profile segment length {}",
                    profile.delta
                ));
            }
            profile.rates.clone()
        }
        None => vec![spec.variant.lambda(); k],
    };
    let mean_vector: Vec<f64> = rates.iter().map(|r| r * delta).collect();
    let covariance = match spec.variant {
        ModelVariant::M1 { .. } => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            mean_vector.clone(),
        )),
        ModelVariant::M2 { sigma_g, .. } => static_covariance(&rates, 1.0, sigma_g, delta),
        ModelVariant::M3 { alpha, sigma_y, .. } => static_covariance(&rates, alpha, sigma_y, delta),
        ModelVariant::M4 { kappa, sigma, .. } => dynamic_covariance(&rates, 0.0, kappa, sigma, delta)?,
        ModelVariant::M5(p) => dynamic_covariance(&rates, p.alpha, p.kappa, p.sigma, delta)?,
    };
    Ok(MvnMoments { mean_vector, covariance })
}

fn static_covariance(rates: &[f64], alpha: f64, s: f64, delta: f64) -> DMatrix<f64> {
    let k = rates.len();
    let s2d2 = s * s * delta * delta;
    let half = (alpha + 1.0) / 2.0;
    let pow: Vec<f64> = rates.iter().map(|r| r.powf(half)).collect();
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        cov[(i, i)] = rates[i] * delta + pow[i] * pow[i] * s2d2;
        for l in (i + 1)..k {
            let c = pow[i] * pow[l] * s2d2;
            cov[(i, l)] = c;
            cov[(l, i)] = c;
        }
    }
    cov
}

fn dynamic_covariance(
    rates: &[f64],
    alpha: f64,
    kappa: f64,
    sigma: f64,
    delta: f64,
) -> Result<DMatrix<f64>> {
    if !(kappa > 0.0) {
        return Err(invalid!("dynamic-model count covariance requires kappa > 0, got {kappa}"));
    }
    let k = rates.len();
    let sigma2 = sigma * sigma;
    let half = (alpha + 1.0) / 2.0;
    let pow: Vec<f64> = rates.iter().map(|r| r.powf(half)).collect();
    let g = growth_g(kappa * delta);
    let a = (-kappa * delta).exp();
    let one_minus_a = -(-kappa * delta).exp_m1();
    let base = sigma2 / (2.0 * kappa * kappa * kappa) * one_minus_a * one_minus_a;
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        cov[(i, i)] = rates[i] * delta
            + sigma2 * pow[i] * pow[i] * delta / (kappa * kappa) * g;
        for l in (i + 1)..k {
            let c = pow[i] * pow[l]
                * base
                * (a.powi((l - i - 1) as i32) - a.powi((l + i) as i32));
            cov[(i, l)] = c;
            cov[(l, i)] = c;
        }
    }
    Ok(cov)
}

/// Ordinary least squares of log variance on log mean across segments or
/// rate levels; the fitted slope minus one estimates the dispersion
/// exponent.
pub fn taylor_regression(means: &[f64], variances: &[f64]) -> Result<TaylorFit> {
    if means.len() != variances.len() {
        return Err(invalid!(
            "means and variances differ in length: {} vs {}",
            means.len(),
            variances.len()
        ));
    }
    if means.len() < 2 {
        return Err(invalid!("need at least two (mean, variance) pairs, got {}", means.len()));
    }
    if means.iter().chain(variances).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(invalid!("all means and variances must be positive and finite"));
    }
    let x: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let y: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let xbar = x.iter().sum::<f64>() / n;
    let ybar = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - xbar) * (xi - xbar)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(xi, yi)| (xi - xbar) * (yi - ybar)).sum();
    if sxx == 0.0 {
        return Err(invalid!("all means are equal; the log-log slope is undefined"));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_tot: f64 = y.iter().map(|yi| (yi - ybar) * (yi - ybar)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| {
            let r = yi - (intercept + slope * xi);
            r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(TaylorFit { alpha_hat: slope - 1.0, intercept_c: intercept, r_squared })
}

/// Adaptive Gauss-Legendre quadrature, private to this module.
mod quad {
    use std::sync::OnceLock;

    const N: usize = 15;

    /// Nodes and weights of the N-point rule on [-1, 1], computed once by
    /// Newton iteration on the Legendre recurrence.
    fn rule() -> &'static [(f64, f64); N] {
        static RULE: OnceLock<[(f64, f64); N]> = OnceLock::new();
        RULE.get_or_init(|| {
            let mut out = [(0.0, 0.0); N];
            let n = N as f64;
            for (i, slot) in out.iter_mut().enumerate() {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (p, d) = legendre(x);
                    dp = d;
                    let step = p / d;
                    x -= step;
                    if step.abs() < 1e-15 {
                        let (_, d2) = legendre(x);
                        dp = d2;
                        break;
                    }
                }
                *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
            }
            out
        })
    }

    /// Value and derivative of the degree-N Legendre polynomial.
    fn legendre(x: f64) -> (f64, f64) {
        let mut p0 = 1.0f64;
        let mut p1 = x;
        for j in 2..=N {
            let jf = j as f64;
            let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
            p0 = p1;
            p1 = p2;
        }
        let d = N as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, d)
    }

    fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for &(x, w) in rule() {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Integrates f over [a, b] to the given relative tolerance by
    /// recursive bisection of Gauss-Legendre panels.
    pub(super) fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let whole = panel(f, a, b);
        let scale = whole.abs().max(1e-300);
        refine(f, a, b, whole, rel_tol * scale, 48)
    }

    fn refine<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol_abs: f64,
        depth: u32,
    ) -> f64 {
        let mid = 0.5 * (a + b);
        let left = panel(f, a, mid);
        let right = panel(f, mid, b);
        let sum = left + right;
        if (sum - whole).abs() <= tol_abs || depth == 0 {
            return sum;
        }
        refine(f, a, mid, left, 0.5 * tol_abs, depth - 1)
            + refine(f, mid, b, right, 0.5 * tol_abs, depth - 1)
    }
}
