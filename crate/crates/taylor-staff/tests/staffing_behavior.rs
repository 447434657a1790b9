//! Behavioral checks of the staffing rules: scaling exponents, grid
//! monotonicity, the refined rule's determinism and trace contract, and
//! the Erlang C evaluator against an independent recursion.

mod common;

use taylor_staff::service::ServiceDistSpec;
use taylor_staff::staffing::{
    self, AlgorithmTuning, QosTarget, StaffingRule,
};

const MU: f64 = 6.0;

/// The alpha rules' safety margins scale exactly like lambda^((alpha+1)/2):
/// quadrupling lambda multiplies the margin by 4^((alpha+1)/2) because
/// lambda enters the margin only through that power.
#[test]
fn alpha_safety_scales_by_rate_power() {
    let service = ServiceDistSpec::exponential(1.0 / MU).unwrap();
    let target = QosTarget::new(0.05).unwrap();
    for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let lo = staffing::basic_alpha_rule(150.0, &service, 0.1, 0.5, alpha, &target).unwrap();
        let hi = staffing::basic_alpha_rule(600.0, &service, 0.1, 0.5, alpha, &target).unwrap();
        let expected = 4f64.powf((alpha + 1.0) / 2.0);
        assert!(
            (hi.safety / lo.safety - expected).abs() < 1e-9,
            "basic alpha={alpha}: safety ratio {} vs {expected}",
            hi.safety / lo.safety
        );

        let lo = staffing::alpha_static_rule(150.0, MU, alpha, 0.3, &target).unwrap();
        let hi = staffing::alpha_static_rule(600.0, MU, alpha, 0.3, &target).unwrap();
        assert!(
            (hi.safety / lo.safety - expected).abs() < 1e-9,
            "static alpha={alpha}: safety ratio {} vs {expected}",
            hi.safety / lo.safety
        );
    }
}

/// Regressing log(n - lambda/mu) on log(lambda) across doubling rates
/// recovers the safety exponent (alpha+1)/2 despite integer rounding.
#[test]
fn safety_exponent_recovered_from_levels() {
    let service = ServiceDistSpec::exponential(1.0 / MU).unwrap();
    let target = QosTarget::new(0.05).unwrap();
    let alpha = 0.5;
    let lambdas: Vec<f64> = (0..7).map(|i| 600.0 * 2f64.powi(i)).collect();
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &lambda in &lambdas {
        let d = staffing::basic_alpha_rule(lambda, &service, 0.1, 0.5, alpha, &target).unwrap();
        let x = lambda.ln();
        let y = (d.n as f64 - lambda / MU).ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let n = lambdas.len() as f64;
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    assert!(
        (slope - 0.75).abs() < 0.02,
        "safety exponent {slope} should be (alpha+1)/2 = 0.75"
    );
}

/// Every closed-form rule is nondecreasing in lambda and nonincreasing
/// in epsilon over a deterministic grid.
#[test]
fn rules_monotone_over_grid() {
    let service = ServiceDistSpec::exponential(1.0 / MU).unwrap();
    let lambdas = [5.0, 20.0, 100.0, 600.0, 2400.0];
    let epsilons = [0.01, 0.05, 0.15, 0.3];
    let level = |lambda: f64, eps: f64| -> Vec<u64> {
        let target = QosTarget::new(eps).unwrap();
        vec![
            staffing::sqrt_rule(lambda, MU, &target).unwrap().n,
            staffing::linear_rule(lambda, MU, 0.2, &target).unwrap().n,
            staffing::alpha_static_rule(lambda, MU, 0.5, 0.3, &target).unwrap().n,
            staffing::sqrt_cir_rule(lambda, &service, 0.1, 0.5, &target).unwrap().n,
            staffing::basic_alpha_rule(lambda, &service, 0.1, 0.5, 0.5, &target).unwrap().n,
        ]
    };
    for &eps in &epsilons {
        for pair in lambdas.windows(2) {
            let a = level(pair[0], eps);
            let b = level(pair[1], eps);
            for (rule, (na, nb)) in a.iter().zip(&b).enumerate() {
                assert!(na <= nb, "rule {rule}: n({}) = {na} > n({}) = {nb}", pair[0], pair[1]);
            }
        }
    }
    for &lambda in &lambdas {
        for pair in epsilons.windows(2) {
            let a = level(lambda, pair[0]);
            let b = level(lambda, pair[1]);
            for (rule, (na, nb)) in a.iter().zip(&b).enumerate() {
                assert!(
                    na >= nb,
                    "rule {rule}: n(eps={}) = {na} < n(eps={}) = {nb}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }
}

/// The refined rule is a pure function of its inputs and seed, its trace
/// stops exactly when the exceedance estimate enters the tolerance band,
/// and the returned decision reapplies the calibrated coefficient.
#[test]
fn refined_rule_deterministic_with_consistent_trace() {
    let service = ServiceDistSpec::exponential(1.0 / MU).unwrap();
    let target = QosTarget::new(0.1).unwrap();
    let tuning = AlgorithmTuning {
        lambda_sim: 50.0,
        t_sim: 8.0,
        replications: 60,
        max_iterations: 80,
        stop_tolerance: 0.02,
        step_scale: 20.0,
        divergence_factor: 10.0,
    };
    let run = || {
        staffing::refined_alpha_rule(600.0, &service, 0.1, 0.5, 0.5, &target, &tuning, 4242)
            .unwrap()
    };
    let (decision, trace) = run();
    let (decision2, trace2) = run();
    assert_eq!(decision, decision2, "same seed must reproduce the decision");
    assert_eq!(trace, trace2, "same seed must reproduce the trace");

    assert!(!trace.is_empty());
    let last = trace.last().unwrap();
    assert!(
        (last.exceedance - 0.1).abs() <= tuning.stop_tolerance,
        "search stopped at |M - eps| = {} > tolerance",
        (last.exceedance - 0.1).abs()
    );
    // Every earlier iterate was still outside the band, so the trace
    // records the full search, not a truncation of it.
    for entry in &trace[..trace.len() - 1] {
        assert!((entry.exceedance - 0.1).abs() > tuning.stop_tolerance);
    }
    for (i, entry) in trace.iter().enumerate() {
        assert_eq!(entry.iteration, i);
        assert!(entry.delta >= 0.0);
        assert!(entry.staffing >= 1);
    }

    let delta_star = decision.delta_star.expect("refined decisions carry delta*");
    assert!((delta_star - last.delta).abs() < 1e-12);
    let reapplied =
        staffing::refined_decision(600.0, MU, 0.5, delta_star, &target).unwrap();
    assert_eq!(decision.n, reapplied.n);
}

/// Erlang C against an independently coded Erlang B recursion, plus the
/// saturation and tail limits.
#[test]
fn erlang_c_matches_independent_recursion() {
    // B(0, a) = 1, B(n, a) = a B(n-1, a) / (n + a B(n-1, a)),
    // C(n, a) = n B(n, a) / (n - a (1 - B(n, a))).
    let oracle = |n: u64, a: f64| -> f64 {
        let mut b = 1.0;
        for j in 1..=n {
            b = a * b / (j as f64 + a * b);
        }
        (n as f64) * b / (n as f64 - a * (1.0 - b))
    };
    for n in [2u64, 5, 10, 25, 60] {
        for frac in [0.3, 0.6, 0.9, 0.95] {
            let a = frac * n as f64;
            let ours = staffing::erlang_c(n, a).unwrap();
            let theirs = oracle(n, a);
            assert!(
                (ours - theirs).abs() < 1e-12,
                "n={n} a={a}: {ours} vs {theirs}"
            );
            assert!((0.0..=1.0).contains(&ours));
        }
    }
    // An unstable load is rejected rather than reported as certain delay.
    assert!(staffing::erlang_c(4, 4.0).is_err());
    assert!(staffing::erlang_c(4, 5.0).is_err());
    assert!(staffing::erlang_c(80, 10.0).unwrap() < 1e-12);
    // More servers at the same load can only reduce delay.
    let mut prev = 1.0;
    for n in 11..30 {
        let p = staffing::erlang_c(n, 10.0).unwrap();
        assert!(p <= prev + 1e-15);
        prev = p;
    }
}

/// The target's safety quantile matches the standard normal inverse CDF
/// from an independent implementation.
#[test]
fn qos_beta_matches_normal_quantile() {
    for eps in [0.01, 0.05, 0.1, 0.15, 0.3, 0.5] {
        let beta = QosTarget::new(eps).unwrap().beta();
        let oracle = common::std_normal_quantile(1.0 - eps);
        assert!(
            (beta - oracle).abs() < 1e-6,
            "eps={eps}: beta {beta} vs quantile {oracle}"
        );
    }
    assert!(QosTarget::new(0.0).is_err());
    assert!(QosTarget::new(1.0).is_err());
}

/// Rule names parse and print consistently.
#[test]
fn rule_names_round_trip() {
    for name in ["sqrt", "sqrt-cir", "linear", "alpha-static", "basic-alpha", "refined-alpha"] {
        let rule: StaffingRule = name.parse().unwrap();
        assert_eq!(rule.to_string(), name);
    }
    assert!("erlang".parse::<StaffingRule>().is_err());
}
