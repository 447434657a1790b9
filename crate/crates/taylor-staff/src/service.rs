//! Service-time distributions parameterized by mean and standard
//! deviation.
//!
//! Queue simulation draws i.i.d. service times from one of three
//! families. The lognormal and gamma families are re-parameterized from
//! the requested (mean, sd) pair:
//!
//! * lognormal: location = ln(m^2 / sqrt(m^2 + s^2)), shape^2 = ln(1 + s^2/m^2)
//! * gamma: shape = m^2 / s^2, rate = m / s^2
//!
//! The survival function `F_bar` feeds the asymptotic variance
//! functionals in [`crate::analytics`]; `1/mean` is the service rate `mu`
//! appearing in every staffing rule.

use crate::error::{invalid, Result};
use rand::Rng;
use rand_distr::Distribution;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

/// Service-time family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceFamily {
    Exponential,
    Lognormal,
    Gamma,
}

/// A service-time law given by family, mean, and standard deviation.
///
/// The standard deviation is ignored for the exponential family, whose sd
/// always equals its mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceDistSpec {
    pub family: ServiceFamily,
    pub mean: f64,
    pub sd: f64,
}

impl ServiceDistSpec {
    pub fn new(family: ServiceFamily, mean: f64, sd: f64) -> Result<Self> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(invalid!("service mean must be positive, got {mean}"));
        }
        if family != ServiceFamily::Exponential && (!(sd > 0.0) || !sd.is_finite()) {
            return Err(invalid!("service sd must be positive, got {sd}"));
        }
        let sd = if family == ServiceFamily::Exponential { mean } else { sd };
        Ok(Self { family, mean, sd })
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        Self::new(ServiceFamily::Exponential, mean, mean)
    }

    pub fn lognormal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(ServiceFamily::Lognormal, mean, sd)
    }

    pub fn gamma(mean: f64, sd: f64) -> Result<Self> {
        Self::new(ServiceFamily::Gamma, mean, sd)
    }

    /// Service rate, the reciprocal mean service time.
    pub fn mu(&self) -> f64 {
        1.0 / self.mean
    }

    /// Survival function P(S > x).
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self.family {
            ServiceFamily::Exponential => (-x / self.mean).exp(),
            ServiceFamily::Lognormal => {
                let (location, shape) = self.lognormal_params();
                let z = (x.ln() - location) / shape;
                // Standard normal survival via the complementary error function.
                0.5 * erfc(z / std::f64::consts::SQRT_2)
            }
            ServiceFamily::Gamma => {
                let (shape, rate) = self.gamma_params();
                gamma_ur(shape, rate * x)
            }
        }
    }

    /// (location, shape) of the underlying normal for the lognormal family.
    pub fn lognormal_params(&self) -> (f64, f64) {
        let m2 = self.mean * self.mean;
        let s2 = self.sd * self.sd;
        let location = (m2 / (m2 + s2).sqrt()).ln();
        let shape = (1.0 + s2 / m2).ln().sqrt();
        (location, shape)
    }

    /// (shape, rate) for the gamma family.
    pub fn gamma_params(&self) -> (f64, f64) {
        let shape = self.mean * self.mean / (self.sd * self.sd);
        let rate = self.mean / (self.sd * self.sd);
        (shape, rate)
    }

    /// Prepared sampler for repeated draws within one replication.
    pub fn sampler(&self) -> ServiceSampler {
        match self.family {
            ServiceFamily::Exponential => {
                ServiceSampler::Exponential(rand_distr::Exp::new(1.0 / self.mean).unwrap())
            }
            ServiceFamily::Lognormal => {
                let (location, shape) = self.lognormal_params();
                ServiceSampler::Lognormal(rand_distr::LogNormal::new(location, shape).unwrap())
            }
            ServiceFamily::Gamma => {
                let (shape, rate) = self.gamma_params();
                ServiceSampler::Gamma(rand_distr::Gamma::new(shape, 1.0 / rate).unwrap())
            }
        }
    }
}

/// Ready-to-draw service-time sampler.
#[derive(Debug, Clone)]
pub enum ServiceSampler {
    Exponential(rand_distr::Exp<f64>),
    Lognormal(rand_distr::LogNormal<f64>),
    Gamma(rand_distr::Gamma<f64>),
}

impl ServiceSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ServiceSampler::Exponential(d) => d.sample(rng),
            ServiceSampler::Lognormal(d) => d.sample(rng),
            ServiceSampler::Gamma(d) => d.sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_nonpositive_mean() {
        assert!(ServiceDistSpec::exponential(0.0).is_err());
        assert!(ServiceDistSpec::lognormal(-1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_reparameterization_matches_moments() {
        let s = ServiceDistSpec::gamma(1.0 / 6.0, 1.0 / 6.0).unwrap();
        let (shape, rate) = s.gamma_params();
        assert_relative_eq!(shape / rate, 1.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(shape / (rate * rate), 1.0 / 36.0, max_relative = 1e-12);
    }

    #[test]
    fn lognormal_reparameterization_matches_moments() {
        let s = ServiceDistSpec::lognormal(1.0 / 6.0, 1.0 / 6.0).unwrap();
        let (location, shape) = s.lognormal_params();
        let mean = (location + 0.5 * shape * shape).exp();
        let var = ((shape * shape).exp() - 1.0) * (2.0 * location + shape * shape).exp();
        assert_relative_eq!(mean, 1.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(var.sqrt(), 1.0 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn exponential_survival_is_exp() {
        let s = ServiceDistSpec::exponential(1.0 / 6.0).unwrap();
        assert_relative_eq!(s.survival(0.5), (-3.0f64).exp(), max_relative = 1e-12);
        assert_eq!(s.survival(-1.0), 1.0);
    }

    #[test]
    fn survival_monotone_and_bounded() {
        for s in [
            ServiceDistSpec::exponential(0.25).unwrap(),
            ServiceDistSpec::lognormal(1.0 / 6.0, 1.0 / 6.0).unwrap(),
            ServiceDistSpec::gamma(1.0 / 6.0, 0.3).unwrap(),
        ] {
            let mut last = 1.0;
            for i in 0..200 {
                let x = i as f64 * 0.05;
                let f = s.survival(x);
                assert!((0.0..=1.0).contains(&f));
                assert!(f <= last + 1e-12);
                last = f;
            }
        }
    }

    #[test]
    fn sampler_mean_matches_spec() {
        use crate::rng;
        for s in [
            ServiceDistSpec::exponential(1.0 / 6.0).unwrap(),
            ServiceDistSpec::lognormal(1.0 / 6.0, 1.0 / 6.0).unwrap(),
            ServiceDistSpec::gamma(1.0 / 6.0, 1.0 / 6.0).unwrap(),
        ] {
            let mut rng = rng::root(11);
            let sampler = s.sampler();
            let n = 200_000;
            let sum: f64 = (0..n).map(|_| sampler.draw(&mut rng)).sum();
            let mean = sum / n as f64;
            // n = 2e5 draws put the standard error near 4e-4.
            assert!((mean - s.mean).abs() < 3.5 * s.sd / (n as f64).sqrt());
        }
    }
}
