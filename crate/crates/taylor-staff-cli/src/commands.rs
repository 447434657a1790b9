//! Subcommand implementations.
//!
//! Each command validates its flags into library types, runs the
//! computation, writes the requested CSV artifacts, and prints a short
//! deterministic summary. Replication loops derive one seed per
//! replication index, then fan batches out over the rayon pool, so
//! results are identical for any thread count.

use crate::{Cli, Command, EvaluateArgs, FitArgs, ModelFlags, ReproArgs, ServiceFlags, SimulateArgs, StaffArgs};
use rayon::prelude::*;
use std::path::PathBuf;
use taylor_staff::analytics;
use taylor_staff::arrivals::{self, ArrivalModelSpec, ArrivalPath, CountMatrix, ModelVariant};
use taylor_staff::estimation::{self, FitOptions, FitResult, ModelRanking, ModelTag, SippKind, SippVariant};
use taylor_staff::intensity::{GcirParams, InitCondition};
use taylor_staff::io;
use taylor_staff::queue::{self, Capacity, CapacityProfile, DelayEstimate, ExceedanceAccumulator, QueuePath};
use taylor_staff::rng::derive_seed;
use taylor_staff::service::ServiceDistSpec;
use taylor_staff::staffing::{self, AlgorithmTuning, QosTarget, StaffingRule, TraceEntry};
use taylor_staff::{Error, Result};

/// Replications simulated per parallel batch; bounds peak memory while
/// keeping the pool busy.
const BATCH: usize = 16;

pub fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    let seed = cli.seed;
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args, seed),
        Command::Fit(args) => cmd_fit(args, seed),
        Command::Staff(args) => cmd_staff(args, seed),
        Command::Evaluate(args) => cmd_evaluate(args, seed),
        Command::Repro(args) => cmd_repro(args, seed),
    }
}

fn init_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Invalid(format!("cannot configure {threads} worker threads: {e}")))
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

/// Builds an arrival-model variant from the flag set, requiring exactly
/// the parameters the model uses: a stray flag is treated as a mistake
/// rather than ignored.
fn build_model(
    name: &str,
    lambda: f64,
    alpha: Option<f64>,
    kappa: Option<f64>,
    sigma: Option<f64>,
    sigma_y: Option<f64>,
    sigma_g: Option<f64>,
) -> Result<ModelVariant> {
    let model = name.to_ascii_lowercase();
    let need = |opt: Option<f64>, flag: &str| {
        opt.ok_or_else(|| invalid(format!("model {model} requires --{flag}")))
    };
    let forbid = |opt: Option<f64>, flag: &str| {
        if opt.is_some() {
            Err(invalid(format!("model {model} does not use --{flag}")))
        } else {
            Ok(())
        }
    };
    let variant = match model.as_str() {
        "m1" => {
            forbid(alpha, "alpha")?;
            forbid(kappa, "kappa")?;
            forbid(sigma, "sigma")?;
            forbid(sigma_y, "sigma-y")?;
            forbid(sigma_g, "sigma-g")?;
            ModelVariant::M1 { lambda }
        }
        "m2" => {
            forbid(alpha, "alpha")?;
            forbid(kappa, "kappa")?;
            forbid(sigma, "sigma")?;
            forbid(sigma_y, "sigma-y")?;
            ModelVariant::M2 { lambda, sigma_g: need(sigma_g, "sigma-g")? }
        }
        "m3" => {
            forbid(kappa, "kappa")?;
            forbid(sigma, "sigma")?;
            forbid(sigma_g, "sigma-g")?;
            ModelVariant::M3 {
                lambda,
                alpha: need(alpha, "alpha")?,
                sigma_y: need(sigma_y, "sigma-y")?,
            }
        }
        "m4" => {
            forbid(alpha, "alpha")?;
            forbid(sigma_y, "sigma-y")?;
            forbid(sigma_g, "sigma-g")?;
            ModelVariant::M4 {
                lambda,
                kappa: need(kappa, "kappa")?,
                sigma: need(sigma, "sigma")?,
            }
        }
        "m5" => {
            forbid(sigma_y, "sigma-y")?;
            forbid(sigma_g, "sigma-g")?;
            ModelVariant::M5(GcirParams::new(
                lambda,
                need(kappa, "kappa")?,
                need(sigma, "sigma")?,
                need(alpha, "alpha")?,
                InitCondition::Stationary,
            )?)
        }
        other => return Err(invalid(format!("unknown model {other:?}; expected m1..m5"))),
    };
    variant.validate()?;
    Ok(variant)
}

fn build_service(flags: &ServiceFlags) -> Result<ServiceDistSpec> {
    if !(flags.mu > 0.0) || !flags.mu.is_finite() {
        return Err(invalid(format!("service rate --mu must be positive, got {}", flags.mu)));
    }
    let mean = 1.0 / flags.mu;
    match flags.service.as_str() {
        "exp" => {
            if flags.service_sd.is_some() {
                return Err(invalid("--service exp does not use --service-sd"));
            }
            ServiceDistSpec::exponential(mean)
        }
        "lognormal" => {
            let sd = flags
                .service_sd
                .ok_or_else(|| invalid("--service lognormal requires --service-sd"))?;
            ServiceDistSpec::lognormal(mean, sd)
        }
        "gamma" => {
            let sd = flags
                .service_sd
                .ok_or_else(|| invalid("--service gamma requires --service-sd"))?;
            ServiceDistSpec::gamma(mean, sd)
        }
        other => Err(invalid(format!(
            "unknown service family {other:?}; expected exp, lognormal, or gamma"
        ))),
    }
}

fn model_variant(flags: &ModelFlags) -> Result<ModelVariant> {
    build_model(
        &flags.model,
        flags.lambda,
        flags.alpha,
        flags.kappa,
        flags.sigma,
        flags.sigma_y,
        flags.sigma_g,
    )
}

/// Runs `reps` arrival-plus-queue replications in index batches, parallel
/// within each batch, and folds every queue path into the accumulator in
/// replication order. `on_rep` also sees replications in order.
fn replicate_queue<F>(
    spec: &ArrivalModelSpec,
    service: &ServiceDistSpec,
    capacity: &Capacity,
    horizon: f64,
    reps: usize,
    seed: u64,
    acc: &mut ExceedanceAccumulator,
    mut on_rep: F,
) -> Result<()>
where
    F: FnMut(usize, &ArrivalPath) -> Result<()>,
{
    let mut start = 0;
    while start < reps {
        let end = (start + BATCH).min(reps);
        let batch: Vec<(ArrivalPath, QueuePath)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let arr = arrivals::generate(spec, horizon, derive_seed(seed, i as u64, 0))?;
                let q = queue::simulate_queue(
                    &arr,
                    service,
                    capacity.clone(),
                    derive_seed(seed, i as u64, 1),
                )?;
                Ok((arr, q))
            })
            .collect::<Result<Vec<_>>>()?;
        for (offset, (arr, q)) in batch.iter().enumerate() {
            on_rep(start + offset, arr)?;
            acc.add_path(q)?;
        }
        start = end;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, seed: u64) -> Result<()> {
    if args.reps == 0 {
        return Err(invalid("need at least one replication"));
    }
    let variant = model_variant(&args.model)?;
    let spec = ArrivalModelSpec::stationary(variant)?;
    let service = build_service(&args.service)?;
    let capacity = match args.servers {
        Some(n) => Capacity::Finite(n),
        None => Capacity::Infinite,
    };
    let threshold = args
        .threshold
        .unwrap_or_else(|| (args.model.lambda / service.mu()).ceil() as u64);
    let probes = queue::probe_grid(args.warmup, args.horizon, args.probe_step);
    let mut acc = ExceedanceAccumulator::new(threshold, args.warmup, probes)?;
    std::fs::create_dir_all(&args.out_dir)?;

    let mut count_rows: Vec<Vec<u64>> = Vec::new();
    replicate_queue(
        &spec,
        &service,
        &capacity,
        args.horizon,
        args.reps,
        seed,
        &mut acc,
        |i, arr| {
            let file = args.out_dir.join(format!("arrivals_{i:04}.csv"));
            io::write_arrivals(&file, std::slice::from_ref(arr))?;
            if let Some(delta) = args.counts_delta {
                count_rows.push(arrivals::counts_from_timestamps(arr, delta)?);
            }
            Ok(())
        },
    )?;

    let est = acc.finish();
    let delay_path = args.out_dir.join("delay.csv");
    io::write_delay_estimate(&delay_path, &est)?;
    println!("model {}", spec.variant);
    println!("wrote {} arrival path file(s) under {}", args.reps, args.out_dir.display());
    if let Some(delta) = args.counts_delta {
        let counts = CountMatrix::from_rows(count_rows, delta, None)?;
        let counts_path = args.out_dir.join("counts.csv");
        io::write_counts(&counts_path, &counts)?;
        println!(
            "wrote {} x {} count matrix to {}",
            counts.m,
            counts.k,
            counts_path.display()
        );
    }
    println!(
        "delay estimate: threshold {}, {} probe(s), pooled mean {:.6}",
        threshold,
        est.probes.len(),
        est.pooled_mean()
    );
    println!("wrote delay estimate to {}", delay_path.display());
    Ok(())
}

fn parse_sipp(kind: &str, sub_intervals: usize) -> Result<SippVariant> {
    match kind {
        "avg" => SippVariant::new(SippKind::Avg, sub_intervals),
        "min" => SippVariant::new(SippKind::Min, sub_intervals),
        "max" => SippVariant::new(SippKind::Max, sub_intervals),
        "mix" => SippVariant::mix_default(sub_intervals),
        other => Err(invalid(format!(
            "unknown SIPP variant {other:?}; expected avg, min, max, or mix"
        ))),
    }
}

fn describe_fit(f: &FitResult) -> String {
    let mut s = format!("{}: lambda = {:.6}", f.model, f.lambda);
    if let Some(v) = f.alpha {
        s.push_str(&format!(", alpha = {v:.6}"));
    }
    if let Some(v) = f.kappa {
        s.push_str(&format!(", kappa = {v:.6}"));
    }
    if let Some(v) = f.sigma {
        s.push_str(&format!(", sigma = {v:.6}"));
    }
    if let Some(v) = f.sigma_y {
        s.push_str(&format!(", sigma_y = {v:.6}"));
    }
    if let Some(v) = f.sigma_g {
        s.push_str(&format!(", sigma_g = {v:.6}"));
    }
    s.push_str(&format!(
        ", log-likelihood = {:.6}, AIC = {:.6}, BIC = {:.6}",
        f.log_likelihood, f.aic, f.bic
    ));
    s
}

fn print_ranking(ranking: &ModelRanking) {
    for (label, entries) in [("AIC", &ranking.by_aic), ("BIC", &ranking.by_bic)] {
        println!("{label} ranking:");
        for (rank, e) in entries.iter().enumerate() {
            println!(
                "  {}. {}  value {:.6}  delta {:.6}{}",
                rank + 1,
                e.model,
                e.value,
                e.delta,
                if e.strong { "  strong" } else { "" }
            );
        }
    }
}

fn cmd_fit(args: FitArgs, seed: u64) -> Result<()> {
    let data = io::read_counts(&args.input, args.delta)?;
    let mut tags: Vec<ModelTag> = Vec::new();
    for name in &args.models {
        let tag: ModelTag = name.parse()?;
        if tags.contains(&tag) {
            return Err(invalid(format!("model {tag} listed more than once")));
        }
        tags.push(tag);
    }
    if tags.is_empty() {
        return Err(invalid("need at least one model to fit"));
    }
    if args.two_step && args.joint_lambda {
        return Err(invalid("--joint-lambda applies to stationary fits only"));
    }
    let options = FitOptions {
        restarts: args.restarts,
        max_evaluations: args.max_evals,
        joint_lambda: args.joint_lambda,
        seed,
    };
    println!("data: {} cycle(s) x {} segment(s), delta {}", data.m, data.k, data.delta);

    let sipp = if args.two_step {
        let variant = parse_sipp(&args.sipp, args.sub_intervals)?;
        let rates = estimation::sipp_estimate(&data, &variant)?;
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "SIPP rates ({}, {} sub-interval(s)): k = {}, min {:.6}, mean {:.6}, max {:.6}",
            args.sipp,
            args.sub_intervals,
            rates.len(),
            min,
            mean,
            max
        );
        Some(variant)
    } else {
        None
    };

    let mut fits: Vec<FitResult> = Vec::new();
    for &tag in &tags {
        let fit = match &sipp {
            Some(variant) => estimation::two_step_fit(&data, tag, variant, &options)?,
            None => estimation::fit_mle(&data, tag, &options)?,
        };
        println!("{}", describe_fit(&fit));
        fits.push(fit);
    }
    io::write_fit_results(&args.out, &fits)?;
    println!("wrote {} fit(s) to {}", fits.len(), args.out.display());

    if fits.len() >= 2 {
        let ranking = estimation::select_model(&fits)?;
        print_ranking(&ranking);
        if let Some(path) = &args.ranking_out {
            io::write_ranking(path, &ranking)?;
            println!("wrote ranking to {}", path.display());
        }
    } else if args.ranking_out.is_some() {
        return Err(invalid("ranking needs at least two models"));
    }
    Ok(())
}

fn cmd_staff(args: StaffArgs, seed: u64) -> Result<()> {
    let rule: StaffingRule = args.rule.parse()?;
    let target = QosTarget::new(args.eps)?;
    let service = build_service(&args.service)?;
    let mu = service.mu();
    let need = |opt: Option<f64>, flag: &str| {
        opt.ok_or_else(|| invalid(format!("rule {rule} requires --{flag}")))
    };

    let mut trace: Vec<TraceEntry> = Vec::new();
    let decision = match rule {
        StaffingRule::Sqrt => staffing::sqrt_rule(args.lambda, mu, &target)?,
        StaffingRule::Linear => {
            staffing::linear_rule(args.lambda, mu, need(args.sigma_g, "sigma-g")?, &target)?
        }
        StaffingRule::AlphaStatic => staffing::alpha_static_rule(
            args.lambda,
            mu,
            need(args.alpha, "alpha")?,
            need(args.sigma_y, "sigma-y")?,
            &target,
        )?,
        StaffingRule::SqrtCir => staffing::sqrt_cir_rule(
            args.lambda,
            &service,
            need(args.kappa, "kappa")?,
            need(args.sigma, "sigma")?,
            &target,
        )?,
        StaffingRule::BasicAlpha => staffing::basic_alpha_rule(
            args.lambda,
            &service,
            need(args.kappa, "kappa")?,
            need(args.sigma, "sigma")?,
            need(args.alpha, "alpha")?,
            &target,
        )?,
        StaffingRule::RefinedAlpha => {
            let tuning = AlgorithmTuning {
                lambda_sim: args.sim_lambda,
                t_sim: args.sim_horizon,
                replications: args.sim_reps,
                max_iterations: args.max_iters,
                ..AlgorithmTuning::default()
            };
            let (decision, search_trace) = staffing::refined_alpha_rule(
                args.lambda,
                &service,
                need(args.kappa, "kappa")?,
                need(args.sigma, "sigma")?,
                need(args.alpha, "alpha")?,
                &target,
                &tuning,
                seed,
            )?;
            trace = search_trace;
            decision
        }
    };

    println!(
        "{}: n = {} (base {:.6} + safety {:.6}) at lambda {}, epsilon {}",
        decision.rule, decision.n, decision.base, decision.safety, decision.lambda, decision.epsilon
    );
    if let Some(delta_star) = decision.delta_star {
        println!("delta_star = {delta_star:.6} calibrated in {} iteration(s)", trace.len());
    }
    if let Some(out) = &args.out {
        io::write_staffing_decisions(out, std::slice::from_ref(&decision))?;
        println!("wrote decision to {}", out.display());
    }
    if let Some(trace_path) = &args.trace {
        if trace.is_empty() {
            return Err(invalid(format!(
                "rule {} has no iteration trace; --trace applies to refined-alpha",
                decision.rule
            )));
        }
        io::write_refinement_trace(trace_path, &trace)?;
        println!("wrote {} trace row(s) to {}", trace.len(), trace_path.display());
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs, seed: u64) -> Result<()> {
    if args.taylor {
        return evaluate_taylor(&args);
    }
    if args.cycles == 0 {
        return Err(invalid("need at least one cycle"));
    }
    let service = build_service(&args.service)?;
    let profile = match (&args.profile, args.servers) {
        (Some(path), None) => io::read_staffing_profile(path)?,
        (None, Some(n)) => CapacityProfile::new(24.0, vec![n])?,
        (Some(_), Some(_)) => return Err(invalid("give --profile or --servers, not both")),
        (None, None) => return Err(invalid("queue evaluation needs --profile or --servers")),
    };
    let horizon = profile.period() * args.cycles as f64;

    let streams: Vec<ArrivalPath> = match (&args.arrivals, &args.model) {
        (Some(file), None) => io::read_arrivals(file, horizon)?,
        (None, Some(name)) => {
            if args.reps == 0 {
                return Err(invalid("need at least one replication"));
            }
            let lambda =
                args.lambda.ok_or_else(|| invalid("generated streams require --lambda"))?;
            let variant = build_model(
                name,
                lambda,
                args.alpha,
                args.kappa,
                args.sigma,
                args.sigma_y,
                args.sigma_g,
            )?;
            let spec = ArrivalModelSpec::stationary(variant)?;
            (0..args.reps)
                .into_par_iter()
                .map(|i| arrivals::generate(&spec, horizon, derive_seed(seed, i as u64, 0)))
                .collect::<Result<Vec<_>>>()?
        }
        (Some(_), Some(_)) => return Err(invalid("give --arrivals or --model, not both")),
        (None, None) => return Err(invalid("queue evaluation needs --arrivals or --model")),
    };
    if streams.is_empty() {
        return Err(invalid("arrival input holds no cycles"));
    }

    let capacity = Capacity::Periodic(profile.clone());
    let qpaths: Vec<QueuePath> = streams
        .par_iter()
        .enumerate()
        .map(|(i, stream)| {
            queue::simulate_queue(stream, &service, capacity.clone(), derive_seed(seed, i as u64, 1))
        })
        .collect::<Result<Vec<_>>>()?;

    // Pool the per-stream time-of-day curves; every stream spans the same
    // cycle count, so the plain average weights cycles equally.
    let mut probes: Vec<f64> = Vec::new();
    let mut pooled: Vec<f64> = Vec::new();
    for q in &qpaths {
        let est = queue::delay_prob_timeofday(q, &profile, args.cycles, args.probe_step)?;
        if pooled.is_empty() {
            probes = est.probes;
            pooled = est.probabilities;
        } else {
            for (acc, p) in pooled.iter_mut().zip(&est.probabilities) {
                *acc += p;
            }
        }
    }
    for p in pooled.iter_mut() {
        *p /= qpaths.len() as f64;
    }
    let est = DelayEstimate {
        probes,
        probabilities: pooled,
        replications: qpaths.len() * args.cycles,
    };
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("delay.csv"));
    io::write_delay_estimate(&out, &est)?;
    let max = est.probabilities.iter().cloned().fold(0.0, f64::max);
    println!(
        "time-of-day delay curve: {} probe(s) over period {}, pooled over {} stream(s) x {} cycle(s)",
        est.probes.len(),
        profile.period(),
        qpaths.len(),
        args.cycles
    );
    println!("mean delay probability {:.6}, max {:.6}", est.pooled_mean(), max);
    println!("wrote delay curve to {}", out.display());
    Ok(())
}

fn evaluate_taylor(args: &EvaluateArgs) -> Result<()> {
    let input = args.input.as_ref().ok_or_else(|| invalid("--taylor requires --input"))?;
    let delta = args.delta.ok_or_else(|| invalid("--taylor requires --delta"))?;
    let data = io::read_counts(input, delta)?;
    let fit = analytics::taylor_regression(&data.segment_means(), &data.segment_variances())?;
    println!("alpha_hat = {:.6}", fit.alpha_hat);
    println!("intercept = {:.6}", fit.intercept_c);
    println!("r_squared = {:.6}", fit.r_squared);
    if let Some(out) = &args.out {
        io::write_taylor_fit(out, &fit)?;
        println!("wrote power-law fit to {}", out.display());
    }
    Ok(())
}

fn cmd_repro(args: ReproArgs, seed: u64) -> Result<()> {
    // Canonical system of the bundled pipelines: lognormal service with
    // mean and sd both 1/6 hour (rate 6 per hour), dynamic intensity
    // (kappa, sigma, alpha) = (0.1, 0.5, 0.5), busyness sd 0.25, static
    // noise scale 0.5.
    const MU: f64 = 6.0;
    const ALPHA: f64 = 0.5;
    const KAPPA: f64 = 0.1;
    const SIGMA: f64 = 0.5;
    const SIGMA_G: f64 = 0.25;
    const SIGMA_Y: f64 = 0.5;

    if args.reps == 0 {
        return Err(invalid("need at least one replication"));
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let service = ServiceDistSpec::lognormal(1.0 / MU, 1.0 / MU)?;

    let mut rows = Vec::new();
    for &eps in &[0.05, 0.15] {
        let target = QosTarget::new(eps)?;
        for &lambda in &[150.0, 600.0, 2400.0] {
            rows.push(staffing::sqrt_rule(lambda, MU, &target)?);
            rows.push(staffing::linear_rule(lambda, MU, SIGMA_G, &target)?);
            rows.push(staffing::alpha_static_rule(lambda, MU, ALPHA, SIGMA_Y, &target)?);
            rows.push(staffing::sqrt_cir_rule(lambda, &service, KAPPA, SIGMA, &target)?);
            rows.push(staffing::basic_alpha_rule(lambda, &service, KAPPA, SIGMA, ALPHA, &target)?);
        }
    }
    let table_path = args.out_dir.join("staffing_table.csv");
    io::write_staffing_decisions(&table_path, &rows)?;
    println!("wrote staffing table ({} rows) to {}", rows.len(), table_path.display());

    // Exceedance check of the basic alpha level over hourly probes in the
    // second day of a two-day horizon. The reference system is an
    // infinite-server queue: the level enters only as the exceedance
    // threshold, so congestion never feeds back into the occupancy.
    let target = QosTarget::new(0.05)?;
    let mut exceedance_systems = vec![150.0];
    if args.full {
        exceedance_systems.push(2400.0);
    }
    for &lambda in &exceedance_systems {
        let params = GcirParams::new(lambda, KAPPA, SIGMA, ALPHA, InitCondition::Stationary)?;
        let spec = ArrivalModelSpec::stationary(ModelVariant::M5(params))?;
        let level = staffing::basic_alpha_rule(lambda, &service, KAPPA, SIGMA, ALPHA, &target)?.n;
        let probes = queue::probe_grid(24.0, 48.0, 1.0);
        let mut acc = ExceedanceAccumulator::new(level, 24.0, probes)?;
        replicate_queue(
            &spec,
            &service,
            &Capacity::Infinite,
            48.0,
            args.reps,
            derive_seed(seed, lambda as u64, 2),
            &mut acc,
            |_, _| Ok(()),
        )?;
        let est = acc.finish();
        let path = args.out_dir.join(format!("exceedance_{}.csv", lambda as u64));
        io::write_delay_estimate(&path, &est)?;
        println!(
            "lambda {lambda}: level {level}, mean exceedance {:.6} over {} rep(s), wrote {}",
            est.pooled_mean(),
            args.reps,
            path.display()
        );
    }

    if args.full {
        let (decision, trace) = staffing::refined_alpha_rule(
            600.0,
            &service,
            KAPPA,
            SIGMA,
            ALPHA,
            &target,
            &AlgorithmTuning::default(),
            derive_seed(seed, 600, 3),
        )?;
        let decision_path = args.out_dir.join("refined_staffing.csv");
        io::write_staffing_decisions(&decision_path, std::slice::from_ref(&decision))?;
        let trace_path = args.out_dir.join("refined_trace.csv");
        io::write_refinement_trace(&trace_path, &trace)?;
        println!(
            "refined rule at lambda 600: n = {}, delta_star = {:.6}, {} iteration(s), wrote {} and {}",
            decision.n,
            decision.delta_star.unwrap_or(f64::NAN),
            trace.len(),
            decision_path.display(),
            trace_path.display()
        );
    }
    Ok(())
}
