//! Arrival modeling, queue simulation, and staffing for over-dispersed
//! service systems.
//!
//! Service-system arrival counts routinely show variance growing like a
//! power of the mean (Taylor's law), which breaks the Poisson assumption
//! behind classic square-root staffing. This crate models such arrivals as
//! a doubly stochastic Poisson process whose intensity follows a
//! mean-reverting square-root diffusion
//!
//! ```text
//! dX(t) = kappa (lambda - X(t)) dt + sigma sqrt(lambda^alpha X(t)) dB(t)
//! ```
//!
//! where `alpha` in [0, 1) controls how dispersion scales with the mean
//! rate. On top of the process model the crate provides
//!
//! * exact-transition simulation of the intensity and of arrival paths
//!   under five competing arrival models ([`intensity`], [`arrivals`]),
//! * closed-form count moments, Laplace transforms, and the asymptotic
//!   variance functionals used by the staffing rules ([`analytics`]),
//! * discrete-event simulation of finite- and infinite-server FCFS queues
//!   with delay-probability estimators ([`queue`]),
//! * square-root, linear, and alpha safety staffing rules, including the
//!   refined alpha rule solved by simulation-based stochastic
//!   approximation ([`staffing`]),
//! * heavy-traffic Gaussian maximum likelihood, SIPP rate estimators, and
//!   AIC/BIC model selection ([`estimation`]),
//! * CSV readers and writers for every artifact the pipelines exchange
//!   ([`io`]).
//!
//! All stochastic entry points take an explicit `u64` seed and are
//! deterministic given it; replicated computations derive independent
//! substreams per replication index, so results do not depend on thread
//! count.

pub mod analytics;
pub mod arrivals;
pub mod error;
pub mod estimation;
pub mod intensity;
pub mod io;
pub mod queue;
pub mod rng;
pub mod service;
pub mod staffing;

pub use error::{Error, Result};
