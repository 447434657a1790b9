//! CSV serialization for arrival paths, count matrices, staffing
//! output, and delay estimates.
//!
//! Formats are plain CSV with headers. Timestamps carry nine decimal
//! places and probabilities six; other floating-point fields use the
//! shortest exact decimal representation so a read of a written file
//! recovers the value bit for bit.

use crate::analytics::TaylorFit;
use crate::arrivals::{ArrivalPath, CountMatrix, Provenance};
use crate::error::{invalid, Result};
use crate::estimation::{FitResult, ModelRanking, RankEntry};
use crate::queue::{CapacityProfile, DelayEstimate};
use crate::staffing::{StaffingDecision, TraceEntry};
use std::path::Path;

fn parse_field<T: std::str::FromStr>(s: &str, field: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| invalid!("row {line}: cannot parse {field} from {s:?}"))
}

/// Writes arrival paths as (cycle, timestamp) rows, one row per arrival,
/// cycles numbered from zero in order.
pub fn write_arrivals(path: &Path, paths: &[ArrivalPath]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cycle", "timestamp"])?;
    for (cycle, p) in paths.iter().enumerate() {
        for &t in &p.timestamps {
            w.write_record([cycle.to_string(), format!("{t:.9}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads (cycle, timestamp) rows back into one path per cycle. The
/// horizon is not stored in the file and must be supplied; every
/// timestamp must fall inside it. Cycles must appear contiguously from
/// zero, and a trailing empty cycle cannot be represented, so the number
/// of paths equals the largest cycle index plus one.
pub fn read_arrivals(path: &Path, horizon: f64) -> Result<Vec<ArrivalPath>> {
    if !(horizon > 0.0) {
        return Err(invalid!("horizon must be positive, got {horizon}"));
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut paths: Vec<Vec<f64>> = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(invalid!("row {}: expected 2 fields, got {}", i + 2, record.len()));
        }
        let cycle: usize = parse_field(&record[0], "cycle", i + 2)?;
        let t: f64 = parse_field(&record[1], "timestamp", i + 2)?;
        if cycle == paths.len() {
            paths.push(Vec::new());
        } else if cycle > paths.len() {
            return Err(invalid!("row {}: cycle {cycle} skips ahead", i + 2));
        }
        if !(0.0..=horizon).contains(&t) {
            return Err(invalid!("row {}: timestamp {t} outside [0, {horizon}]", i + 2));
        }
        let current = &mut paths[cycle];
        if current.last().is_some_and(|&prev| t < prev) {
            return Err(invalid!("row {}: timestamps not sorted within cycle {cycle}", i + 2));
        }
        current.push(t);
    }
    Ok(paths
        .into_iter()
        .map(|timestamps| ArrivalPath {
            timestamps,
            horizon,
            provenance: Provenance { model: "imported".into(), seed: 0, rate_truncated: false },
        })
        .collect())
}

/// Writes a count matrix with segment indices as the header row.
pub fn write_counts(path: &Path, data: &CountMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..data.k).map(|i| i.to_string()))?;
    for j in 0..data.m {
        w.write_record(data.row(j).iter().map(|c| c.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a count matrix written by `write_counts`. The segment length is
/// not stored in the file and must be supplied.
pub fn read_counts(path: &Path, delta: f64) -> Result<CountMatrix> {
    let mut r = csv::Reader::from_path(path)?;
    let k = r.headers()?.len();
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != k {
            return Err(invalid!("row {}: expected {k} fields, got {}", i + 2, record.len()));
        }
        let mut row = Vec::with_capacity(k);
        for field in record.iter() {
            row.push(parse_field(field, "count", i + 2)?);
        }
        rows.push(row);
    }
    CountMatrix::from_rows(rows, delta, None)
}

/// Writes a staffing profile as (segment_start, n) rows.
pub fn write_staffing_profile(path: &Path, profile: &CapacityProfile) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["segment_start", "n"])?;
    for (i, &n) in profile.levels.iter().enumerate() {
        w.write_record([format!("{:.9}", i as f64 * profile.delta), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a staffing profile, inferring the segment length from the
/// spacing of the first two rows; a single-row file is rejected because
/// its segment length is not recoverable.
pub fn read_staffing_profile(path: &Path) -> Result<CapacityProfile> {
    let mut r = csv::Reader::from_path(path)?;
    let mut starts: Vec<f64> = Vec::new();
    let mut levels: Vec<u64> = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(invalid!("row {}: expected 2 fields, got {}", i + 2, record.len()));
        }
        starts.push(parse_field(&record[0], "segment_start", i + 2)?);
        levels.push(parse_field(&record[1], "n", i + 2)?);
    }
    if starts.len() < 2 {
        return Err(invalid!(
            "staffing profile needs at least two rows to infer the segment length"
        ));
    }
    let delta = starts[1] - starts[0];
    if !(delta > 0.0) {
        return Err(invalid!("segment starts must be increasing, got spacing {delta}"));
    }
    for (i, pair) in starts.windows(2).enumerate() {
        if ((pair[1] - pair[0]) - delta).abs() > 1e-9 * delta.max(1.0) {
            return Err(invalid!("row {}: segment starts are not evenly spaced", i + 3));
        }
    }
    CapacityProfile::new(delta, levels)
}

/// Writes a delay estimate as (probe_time, probability) rows with the
/// replication count in a trailing comment-free schema: probabilities
/// are pooled across replications already.
pub fn write_delay_estimate(path: &Path, estimate: &DelayEstimate) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["probe_time", "probability"])?;
    for (t, p) in estimate.probes.iter().zip(&estimate.probabilities) {
        w.write_record([format!("{t:.9}"), format!("{p:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads (probe_time, probability) rows back into a delay estimate. The
/// replication count is not stored and is reported as one.
pub fn read_delay_estimate(path: &Path) -> Result<DelayEstimate> {
    let mut r = csv::Reader::from_path(path)?;
    let mut probes = Vec::new();
    let mut probabilities = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(invalid!("row {}: expected 2 fields, got {}", i + 2, record.len()));
        }
        probes.push(parse_field(&record[0], "probe_time", i + 2)?);
        let p: f64 = parse_field(&record[1], "probability", i + 2)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid!("row {}: probability {p} outside [0, 1]", i + 2));
        }
        probabilities.push(p);
    }
    Ok(DelayEstimate { probes, probabilities, replications: 1 })
}

/// Writes staffing decisions, one row per rule application. The
/// delta_star column is empty for rules without a refined coefficient.
pub fn write_staffing_decisions(path: &Path, rows: &[StaffingDecision]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["rule", "lambda", "epsilon", "base", "safety", "n", "delta_star"])?;
    for d in rows {
        w.write_record([
            d.rule.to_string(),
            format!("{}", d.lambda),
            format!("{}", d.epsilon),
            format!("{}", d.base),
            format!("{}", d.safety),
            d.n.to_string(),
            d.delta_star.map(|v| format!("{v}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads staffing decisions written by `write_staffing_decisions`.
pub fn read_staffing_decisions(path: &Path) -> Result<Vec<StaffingDecision>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != 7 {
            return Err(invalid!("row {}: expected 7 fields, got {}", i + 2, record.len()));
        }
        rows.push(StaffingDecision {
            rule: parse_field(&record[0], "rule", i + 2)?,
            lambda: parse_field(&record[1], "lambda", i + 2)?,
            epsilon: parse_field(&record[2], "epsilon", i + 2)?,
            base: parse_field(&record[3], "base", i + 2)?,
            safety: parse_field(&record[4], "safety", i + 2)?,
            n: parse_field(&record[5], "n", i + 2)?,
            delta_star: if record[6].trim().is_empty() {
                None
            } else {
                Some(parse_field(&record[6], "delta_star", i + 2)?)
            },
        });
    }
    Ok(rows)
}

/// Writes the iteration trace of the refined-rule search as
/// (iteration, delta, n, exceedance) rows.
pub fn write_refinement_trace(path: &Path, trace: &[TraceEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "delta", "n", "exceedance"])?;
    for e in trace {
        w.write_record([
            e.iteration.to_string(),
            format!("{}", e.delta),
            e.staffing.to_string(),
            format!("{:.6}", e.exceedance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a model ranking as (criterion, rank, model, value, delta,
/// strong) rows, AIC block first.
pub fn write_ranking(path: &Path, ranking: &ModelRanking) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["criterion", "rank", "model", "value", "delta", "strong"])?;
    for (criterion, entries) in [("aic", &ranking.by_aic), ("bic", &ranking.by_bic)] {
        for (rank, e) in entries.iter().enumerate() {
            w.write_record([
                criterion.to_string(),
                (rank + 1).to_string(),
                e.model.to_string(),
                format!("{}", e.value),
                format!("{}", e.delta),
                e.strong.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a ranking written by `write_ranking`.
pub fn read_ranking(path: &Path) -> Result<ModelRanking> {
    let mut r = csv::Reader::from_path(path)?;
    let mut by_aic = Vec::new();
    let mut by_bic = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != 6 {
            return Err(invalid!("row {}: expected 6 fields, got {}", i + 2, record.len()));
        }
        let entry = RankEntry {
            model: parse_field(&record[2], "model", i + 2)?,
            value: parse_field(&record[3], "value", i + 2)?,
            delta: parse_field(&record[4], "delta", i + 2)?,
            strong: parse_field(&record[5], "strong", i + 2)?,
        };
        match &record[0] {
            "aic" => by_aic.push(entry),
            "bic" => by_bic.push(entry),
            other => return Err(invalid!("row {}: unknown criterion {other:?}", i + 2)),
        }
    }
    Ok(ModelRanking { by_aic, by_bic })
}

/// Writes a variance-mean power-law fit as a single row.
pub fn write_taylor_fit(path: &Path, fit: &TaylorFit) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["alpha_hat", "intercept", "r_squared"])?;
    w.write_record([
        format!("{}", fit.alpha_hat),
        format!("{}", fit.intercept_c),
        format!("{}", fit.r_squared),
    ])?;
    w.flush()?;
    Ok(())
}

/// Reads a fit written by `write_taylor_fit`.
pub fn read_taylor_fit(path: &Path) -> Result<TaylorFit> {
    let mut r = csv::Reader::from_path(path)?;
    let record = r
        .records()
        .next()
        .ok_or_else(|| invalid!("power-law fit file has no data row"))??;
    if record.len() != 3 {
        return Err(invalid!("expected 3 fields, got {}", record.len()));
    }
    Ok(TaylorFit {
        alpha_hat: parse_field(&record[0], "alpha_hat", 2)?,
        intercept_c: parse_field(&record[1], "intercept", 2)?,
        r_squared: parse_field(&record[2], "r_squared", 2)?,
    })
}

/// Writes fit results, one row per model, with empty cells for
/// parameters a model does not have.
pub fn write_fit_results(path: &Path, fits: &[FitResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "model",
        "stationary",
        "lambda",
        "alpha",
        "kappa",
        "sigma",
        "sigma_y",
        "sigma_g",
        "log_likelihood",
        "aic",
        "bic",
        "q",
        "m",
        "k",
        "delta",
        "converged",
        "evaluations",
        "jittered",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for f in fits {
        w.write_record([
            f.model.to_string(),
            f.stationary.to_string(),
            format!("{}", f.lambda),
            opt(f.alpha),
            opt(f.kappa),
            opt(f.sigma),
            opt(f.sigma_y),
            opt(f.sigma_g),
            format!("{}", f.log_likelihood),
            format!("{}", f.aic),
            format!("{}", f.bic),
            f.q.to_string(),
            f.m.to_string(),
            f.k.to_string(),
            format!("{}", f.delta),
            f.converged.to_string(),
            f.evaluations.to_string(),
            f.jittered.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
