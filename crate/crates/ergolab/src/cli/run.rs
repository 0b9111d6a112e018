//! Experiment execution: drive the core modules from a resolved config and
//! persist a summary plus plot-ready CSV files.
//!
//! Every run writes, atomically and in a fixed order, the experiment CSVs,
//! a copy of the *effective* config (`config.json`, with any command-line
//! overrides folded in), and `summary.json` last, so a summary on disk
//! means the run completed. All randomness flows from the config seeds;
//! rerunning the same effective config yields byte-identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::driver::sample_path;
use crate::error::{Error, Result};
use crate::meten::{
    banach_direction, extract_functional, mean_ergodic_run, verify_met, wolff_denjoy_limit,
    WolffDenjoyOutcome,
};
use crate::oseledets::{
    lyapunov_qr, operator_functional, operator_run, verify_operator_met,
};
use crate::spaces::orbit::{CompositionOrder, Orbit, SemicontractionSystem};
use crate::spaces::Point;
use crate::subadd::cocycle::{estimate_drift, SubadditiveCocycle};
use crate::subadd::decompose::{decompose_from_report, IntervalTag};
use crate::subadd::goodtimes::{
    calibrate_delta, detect_good_times, observed_sup_schedule, CalibrationOptions,
    DeltaSchedule, GoodTimeReport, DELTA_FLOOR,
};

use super::config::{DeltaConfig, ExperimentKind, Payload, ResolvedConfig, SCHEMA_VERSION};

/// Aggregate result of a run, serialized as `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: &'static str,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    /// True iff every per-seed check and every aggregate check passed.
    pub verdict: bool,
    /// Aggregate estimates and residuals; keys are sorted for determinism.
    pub metrics: BTreeMap<String, f64>,
    /// One entry per seed, in the order of `seeds`.
    pub per_seed: Vec<BTreeMap<String, f64>>,
    pub messages: Vec<String>,
}

/// What `run` hands back to the exit-code layer.
#[derive(Debug)]
pub struct RunOutcome {
    pub verdict: bool,
    pub summary_path: PathBuf,
}

/// Write `contents` to `dir/name` via a temp file and rename, so readers
/// never observe a partially written file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents)?;
    let target = dir.join(name);
    std::fs::rename(&tmp, &target)?;
    Ok(target)
}

/// Insert a metric, skipping non-finite values (serde_json cannot encode
/// them); the caller records a message instead when that matters.
fn put(map: &mut BTreeMap<String, f64>, key: &str, value: f64) {
    if value.is_finite() {
        map.insert(key.to_string(), value);
    }
}

fn csv(header: &str, rows: &[String]) -> String {
    let mut out = String::with_capacity(header.len() + 1 + rows.len() * 24);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}

/// Geometric grid 1, 2, 4, ..., always ending exactly at `n_max`.
fn geometric_ns(n_max: usize) -> Vec<usize> {
    let mut ns = Vec::new();
    let mut n = 1usize;
    while n < n_max {
        ns.push(n);
        n = (n.saturating_mul(2)).min(n_max);
    }
    ns.push(n_max);
    ns
}

fn orbit_payload(r: &ResolvedConfig) -> Result<(Arc<SemicontractionSystem>, Point)> {
    match &r.payload {
        Payload::Orbit { system, basepoint } => Ok((system.clone(), basepoint.clone())),
        _ => Err(Error::Config("internal: experiment resolved to a non-orbit payload".into())),
    }
}

fn orbit_cocycle(r: &ResolvedConfig) -> Result<(Arc<SemicontractionSystem>, Point, SubadditiveCocycle)> {
    let (system, basepoint) = orbit_payload(r)?;
    let cocycle =
        SubadditiveCocycle::from_orbit("orbit-distance", system.clone(), basepoint.clone())?;
    Ok((system, basepoint, cocycle))
}

/// Drift estimate plus the tolerance schedule selection shared by the
/// detection-based experiments.
struct DetectionPlan {
    a_hat: f64,
    /// `None` means the per-path observed sup schedule.
    schedule: Option<DeltaSchedule>,
}

impl DetectionPlan {
    fn build(r: &ResolvedConfig, cocycle: &SubadditiveCocycle) -> Result<DetectionPlan> {
        let cfg = &r.config;
        let calibrated = matches!(cfg.delta, DeltaConfig::Calibrated);
        let drift_seeds: &[u64] =
            if calibrated { &cfg.train_seeds } else { &cfg.seeds };
        let a_hat = estimate_drift(cocycle, &r.spec, drift_seeds, cfg.horizon)?.a_hat_as;
        let schedule = match &cfg.delta {
            DeltaConfig::Zero => Some(DeltaSchedule::zero(cfg.horizon)),
            DeltaConfig::Constant { value } => Some(DeltaSchedule::constant(*value, cfg.horizon)?),
            DeltaConfig::Observed => None,
            DeltaConfig::Calibrated => Some(calibrate_delta(
                cocycle,
                &r.spec,
                &cfg.train_seeds,
                cfg.horizon,
                a_hat,
                &CalibrationOptions { rho: cfg.rho, ..CalibrationOptions::default() },
            )?),
        };
        Ok(DetectionPlan { a_hat, schedule })
    }

    fn detect(
        &self,
        r: &ResolvedConfig,
        cocycle: &SubadditiveCocycle,
        seed: u64,
    ) -> Result<GoodTimeReport> {
        let cfg = &r.config;
        let path = sample_path(&r.spec, seed, cfg.horizon);
        let schedule = match &self.schedule {
            Some(s) => s.clone(),
            None => observed_sup_schedule(cocycle, &path, cfg.horizon, self.a_hat, DELTA_FLOOR)?,
        };
        detect_good_times(cocycle, &path, self.a_hat, &schedule, cfg.horizon, cfg.mode.into())
    }
}

fn seed_orbit(r: &ResolvedConfig, system: &Arc<SemicontractionSystem>, basepoint: &Point, seed: u64) -> Result<Orbit> {
    let path = sample_path(&r.spec, seed, r.config.horizon);
    system.orbit(&path, basepoint, r.config.horizon, CompositionOrder::Forward)
}

type Files = Vec<(String, String)>;

fn run_drift(r: &ResolvedConfig) -> Result<(Summary, Files)> {
    let cfg = &r.config;
    let (_, _, cocycle) = orbit_cocycle(r)?;
    let est = estimate_drift(&cocycle, &r.spec, &cfg.seeds, cfg.horizon)?;
    let tol = cfg.tolerances;

    // Kingman consistency: the infimum characterisation must not exceed the
    // almost-sure estimate beyond sampling noise.
    let mut verdict = est.a_hat_inf <= est.a_hat_as + 2.0 * est.stderr + tol.exact;
    let mut messages = vec![format!(
        "drift estimate {} (infimum {} at n = {}, stderr {})",
        est.a_hat_as, est.a_hat_inf, est.inf_horizon, est.stderr
    )];
    let mut metrics = BTreeMap::new();
    put(&mut metrics, "a_hat_as", est.a_hat_as);
    put(&mut metrics, "a_hat_inf", est.a_hat_inf);
    put(&mut metrics, "stderr", est.stderr);
    put(&mut metrics, "inf_horizon", est.inf_horizon as f64);
    put(&mut metrics, "kingman_gap", est.a_hat_inf - est.a_hat_as);
    if let Some(target) = cfg.expected_drift {
        let residual = (est.a_hat_as - target).abs();
        put(&mut metrics, "expected_residual", residual);
        if residual > tol.drift {
            verdict = false;
            messages.push(format!(
                "estimate {} misses the expected drift {} by {} (tolerance {})",
                est.a_hat_as, target, residual, tol.drift
            ));
        }
    }

    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let path = sample_path(&r.spec, seed, cfg.horizon);
        let value = cocycle.evaluate(cfg.horizon, &path, 0)?;
        let mut row = BTreeMap::new();
        put(&mut row, "seed", seed as f64);
        put(&mut row, "final_rate", value / cfg.horizon as f64);
        per_seed.push(row);
    }

    let rows: Vec<String> =
        est.grid.iter().map(|(n, rate)| format!("{n},{rate}")).collect();
    let files = vec![("drift_grid.csv".to_string(), csv("n,rate", &rows))];
    Ok((summary(r, verdict, metrics, per_seed, messages), files))
}

fn run_goodtimes(r: &ResolvedConfig) -> Result<(Summary, Files)> {
    let cfg = &r.config;
    let (_, _, cocycle) = orbit_cocycle(r)?;
    let plan = DetectionPlan::build(r, &cocycle)?;

    let threshold = 1.0 - cfg.rho;
    let step = (cfg.horizon / 200).max(1);
    let mut rows = Vec::new();
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut passes = 0usize;
    let mut density_sum = 0.0;
    let mut density_min = f64::INFINITY;
    for &seed in &cfg.seeds {
        let report = plan.detect(r, &cocycle, seed)?;
        let density = report.density_at_horizon();
        let pass = density >= threshold;
        passes += pass as usize;
        density_sum += density;
        density_min = density_min.min(density);
        let mut row = BTreeMap::new();
        put(&mut row, "seed", seed as f64);
        put(&mut row, "density", density);
        put(&mut row, "good_count", report.good_times.len() as f64);
        put(&mut row, "last_good", report.last_positive_good_time().unwrap_or(0) as f64);
        put(&mut row, "pass", pass as u8 as f64);
        per_seed.push(row);
        let mut n = step;
        while n <= cfg.horizon {
            rows.push(format!("{seed},{n},{}", report.density_prefix[n - 1]));
            if n == cfg.horizon {
                break;
            }
            n = (n + step).min(cfg.horizon);
        }
    }

    // Pass iff at least 90% of the seeds clear the density threshold.
    let needed = (9 * cfg.seeds.len() + 9) / 10;
    let verdict = passes >= needed;
    let mut metrics = BTreeMap::new();
    put(&mut metrics, "a_hat", plan.a_hat);
    put(&mut metrics, "density_threshold", threshold);
    put(&mut metrics, "density_mean", density_sum / cfg.seeds.len() as f64);
    put(&mut metrics, "density_min", density_min);
    put(&mut metrics, "pass_fraction", passes as f64 / cfg.seeds.len() as f64);
    let messages = vec![format!(
        "{passes}/{} seeds reach good-time density >= {threshold} (needed {needed})",
        cfg.seeds.len()
    )];
    let files = vec![("density_prefix.csv".to_string(), csv("seed,n,density", &rows))];
    Ok((summary(r, verdict, metrics, per_seed, messages), files))
}

fn run_functional(r: &ResolvedConfig) -> Result<(Summary, Files)> {
    let cfg = &r.config;
    let (system, basepoint, cocycle) = orbit_cocycle(r)?;
    let plan = DetectionPlan::build(r, &cocycle)?;
    let tol = cfg.tolerances;

    let mut verdict = true;
    let mut rows = Vec::new();
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut messages = Vec::new();
    let mut estimate_sum = 0.0;
    let mut residual_max: f64 = 0.0;
    for &seed in &cfg.seeds {
        let orbit = seed_orbit(r, &system, &basepoint, seed)?;
        let report = plan.detect(r, &cocycle, seed)?;
        let probes: Vec<Point> = (1..=3.min(cfg.horizon))
            .map(|k| orbit.point(k).cloned())
            .collect::<Result<_>>()?;
        let est = extract_functional(&orbit, &report, &probes)?;
        let met = verify_met(&orbit, &est.functional, plan.a_hat, tol.functional)?;
        let seed_ok = met.verdict
            && est.chain_residual <= tol.exact
            && met.sandwich_residual <= tol.exact;
        if !seed_ok {
            messages.push(format!(
                "seed {seed}: residual {} (tolerance {}), chain {}, sandwich {}",
                met.residual, tol.functional, est.chain_residual, met.sandwich_residual
            ));
        }
        verdict &= seed_ok;
        estimate_sum += met.estimate;
        residual_max = residual_max.max(met.residual);
        let mut row = BTreeMap::new();
        put(&mut row, "seed", seed as f64);
        put(&mut row, "anchor_time", est.anchor_time as f64);
        put(&mut row, "good_count", est.good_count as f64);
        put(&mut row, "chain_residual", est.chain_residual);
        put(&mut row, "probe_stability", est.probe_stability);
        put(&mut row, "estimate", met.estimate);
        put(&mut row, "residual", met.residual);
        put(&mut row, "sandwich_residual", met.sandwich_residual);
        per_seed.push(row);
        for p in &met.series {
            rows.push(format!("{seed},{},{},{}", p.n, p.functional_rate, p.distance_rate));
        }
    }

    let estimate_mean = estimate_sum / cfg.seeds.len() as f64;
    let mut metrics = BTreeMap::new();
    put(&mut metrics, "a_hat", plan.a_hat);
    put(&mut metrics, "estimate_mean", estimate_mean);
    put(&mut metrics, "residual_max", residual_max);
    if let Some(target) = cfg.expected_drift {
        let residual = (estimate_mean - target).abs();
        put(&mut metrics, "expected_residual", residual);
        verdict &= residual <= tol.drift;
    }
    let files = vec![(
        "convergence.csv".to_string(),
        csv("seed,n,functional_rate,distance_rate", &rows),
    )];
    Ok((summary(r, verdict, metrics, per_seed, messages), files))
}

fn run_banach(r: &ResolvedConfig) -> Result<(Summary, Files)> {
    let cfg = &r.config;
    let (system, basepoint, cocycle) = orbit_cocycle(r)?;
    let plan = DetectionPlan::build(r, &cocycle)?;
    let tol = cfg.tolerances;

    let mut verdict = true;
    let mut rows = Vec::new();
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut messages = Vec::new();
    let mut estimate_sum = 0.0;
    let mut residual_max: f64 = 0.0;
    let mut margin_min = f64::INFINITY;
    for &seed in &cfg.seeds {
        let orbit = seed_orbit(r, &system, &basepoint, seed)?;
        let report = plan.detect(r, &cocycle, seed)?;
        let result = banach_direction(&orbit, &report, tol.functional)?;
        if !result.report.verdict {
            messages.push(format!(
                "seed {seed}: residual {} (tolerance {}), margin {}",
                result.report.residual, tol.functional, result.min_margin
            ));
        }
        verdict &= result.report.verdict;
        estimate_sum += result.report.estimate;
        residual_max = residual_max.max(result.report.residual);
        margin_min = margin_min.min(result.min_margin);
        let mut row = BTreeMap::new();
        put(&mut row, "seed", seed as f64);
        put(&mut row, "estimate", result.report.estimate);
        put(&mut row, "residual", result.report.residual);
        put(&mut row, "min_margin", result.min_margin);
        put(&mut row, "trivial", result.trivial as u8 as f64);
        per_seed.push(row);
        for p in &result.report.series {
            rows.push(format!("{seed},{},{},{}", p.n, p.functional_rate, p.distance_rate));
        }
    }

    let estimate_mean = estimate_sum / cfg.seeds.len() as f64;
    let mut metrics = BTreeMap::new();
    put(&mut metrics, "a_hat", plan.a_hat);
    put(&mut metrics, "estimate_mean", estimate_mean);
    put(&mut metrics, "residual_max", residual_max);
    put(&mut metrics, "min_margin", margin_min);
    if let Some(target) = cfg.expected_drift {
        let residual = (estimate_mean - target).abs();
        put(&mut metrics, "expected_residual", residual);
        verdict &= residual <= tol.drift;
    }
    let files = vec![(
        "convergence.csv".to_string(),
        csv("seed,n,functional_rate,distance_rate", &rows),
    )];
    Ok((summary(r, verdict, metrics, per_seed, messages), files))
}

fn run_meanergodic(r: &ResolvedConfig) -> Result<(Summary, Files)> {
    let cfg = &r.config;
    let (us, norm, v) = match &r.payload {
        Payload::MeanErgodic { us, norm, v } => (us, *norm, v),
        _ => return Err(Error::Config("internal: meanergodic payload mismatch".into())),
    };
    let tol = cfg.tolerances;

    let mut verdict = true;
    let mut rows = Vec::new();
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut messages = Vec::new();
    let mut estimate_sum = 0.0;
    let mut consistency_max: f64 = 0.0;
    for &seed in &cfg.seeds {
        let path = sample_path(&r.spec, seed, cfg.horizon);
        let res = mean_ergodic_run(us, norm, v, &path, cfg.horizon)?;
        if !res.report.verdict {
            messages.push(format!(
                "seed {seed}: norm rate and metric rate disagree by {}",
                res.consistency_residual
            ));
        }
        verdict &= res.report.verdict;
        estimate_sum += res.report.estimate;
        consistency_max = consistency_max.max(res.consistency_residual);
        let mut row = BTreeMap::new();
        put(&mut row, "seed", seed as f64);
        put(&mut row, "estimate", res.report.estimate);
        put(&mut row, "consistency_residual", res.consistency_residual);
        put(&mut row, "trivial", res.trivial as u8 as f64);
        per_seed.push(row);
        for p in &res.report.series {
            rows.push(format!("{seed},{},{},{}", p.n, p.functional_rate, p.distance_rate));
        }
    }

    let estimate_mean = estimate_sum / cfg.seeds.len() as f64;
    let mut metrics = BTreeMap::new();
    put(&mut metrics, "estimate_mean", estimate_mean);
    put(&mut metrics, "consistency_max", consistency_max);
    if let Some(target) = cfg.expected_drift {
        let residual = (estimate_mean - target).abs();
        put(&mut metrics, "expected_residual", residual);
        if residual > tol.drift {
            verdict = false;
            messages.push(format!(
                "mean norm rate {estimate_mean} misses the expected limit {target} \
                 by {residual} (tolerance {})",
                tol.drift
            ));
        }
    }
    let files = vec![(
        "convergence.csv".to_string(),
        csv("seed,n,functional_rate,distance_rate", &rows),
    )];
    Ok((summary(r, verdict, metrics, per_seed, messages), files))
}

fn run_wolffdenjoy(r: &ResolvedConfig) -> Result<(Summary, Files)> {
    let cfg = &r.config;
    let (system, basepoint) = orbit_payload(r)?;
    let tol = cfg.tolerances;

    let mut verdict = true;
    let mut rows = Vec::new();
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut messages = Vec::new();
    let mut a_hat_sum = 0.0;
    for &seed in &cfg.seeds {
        let orbit = seed_orbit(r, &system, &basepoint, seed)?;
        let a_hat = orbit.base_distance(cfg.horizon)? / cfg.horizon as f64;
        a_hat_sum += a_hat;
        let outcome = wolff_denjoy_limit(&orbit, a_hat, None)?;
        let mut row = BTreeMap::new();
        put(&mut row, "seed", seed as f64);
        put(&mut row, "a_hat", a_hat);
        let seed_ok = match &outcome {
            WolffDenjoyOutcome::Boundary { xi, secondary, agreement, radius } => {
                put(&mut row, "outcome", 0.0);
                put(&mut row, "xi_re", xi.re);
                put(&mut row, "xi_im", xi.im);
                put(&mut row, "agreement", *agreement);
                put(&mut row, "radius", *radius);
                messages.push(format!("seed {seed}: boundary limit {xi} (radius {radius})"));
                match cfg.expected_boundary {
                    Some([re, im]) => {
                        let err = (xi - num_complex::Complex64::new(re, im)).norm();
                        put(&mut row, "boundary_error", err);
                        err <= tol.boundary && secondary.is_some() && *agreement <= tol.boundary
                    }
                    None => !cfg.expect_no_drift,
                }
            }
            WolffDenjoyOutcome::NoDrift { last_radius } => {
                put(&mut row, "outcome", 1.0);
                put(&mut row, "radius", *last_radius);
                messages.push(format!("seed {seed}: no drift (radius {last_radius})"));
                cfg.expect_no_drift || cfg.expected_boundary.is_none()
            }
            WolffDenjoyOutcome::Inconclusive { last_radius, tail_spread } => {
                put(&mut row, "outcome", 2.0);
                put(&mut row, "radius", *last_radius);
                put(&mut row, "tail_spread", *tail_spread);
                messages.push(format!(
                    "seed {seed}: inconclusive (radius {last_radius}, tail spread {tail_spread})"
                ));
                false
            }
        };
        put(&mut row, "pass", seed_ok as u8 as f64);
        verdict &= seed_ok;
        per_seed.push(row);
        for n in geometric_ns(cfg.horizon) {
            let z = orbit.point(n)?.as_disk()?;
            rows.push(format!("{seed},{n},{},{},{}", z.re, z.im, z.norm()));
        }
    }

    let mut metrics = BTreeMap::new();
    put(&mut metrics, "a_hat_mean", a_hat_sum / cfg.seeds.len() as f64);
    let files = vec![("orbit.csv".to_string(), csv("seed,n,re,im,radius", &rows))];
    Ok((summary(r, verdict, metrics, per_seed, messages), files))
}

fn run_oseledets(r: &ResolvedConfig) -> Result<(Summary, Files)> {
    let cfg = &r.config;
    let generators = match &r.payload {
        Payload::Operators { generators } => generators,
        _ => return Err(Error::Config("internal: oseledets payload mismatch".into())),
    };
    let tol = cfg.tolerances;

    let mut verdict = true;
    let mut rows = Vec::new();
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut messages = Vec::new();
    let mut drift_sum = 0.0;
    let mut exponents: Vec<Vec<f64>> = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let path = sample_path(&r.spec, seed, cfg.horizon);
        let run = operator_run(generators, &path, cfg.horizon)?;
        let lyap = lyapunov_qr(generators, &path, cfg.horizon)?;
        let f = operator_functional(&run)?;
        let rep = verify_operator_met(&run, &lyap, &f, tol.top, tol.spectrum, tol.functional)?;
        if !rep.verdict {
            messages.push(format!(
                "seed {seed}: gaps top {} / spectrum {} / functional {} exceed tolerances",
                rep.top_gap, rep.spectrum_gap, rep.functional_gap
            ));
        }
        verdict &= rep.verdict;
        drift_sum += rep.drift_rate;
        exponents.push(lyap.exponents.clone());
        let mut row = BTreeMap::new();
        put(&mut row, "seed", seed as f64);
        put(&mut row, "drift_rate", rep.drift_rate);
        put(&mut row, "top_gap", rep.top_gap);
        put(&mut row, "spectrum_gap", rep.spectrum_gap);
        put(&mut row, "functional_gap", rep.functional_gap);
        put(&mut row, "det_residual", lyap.det_sum_residual);
        put(&mut row, "trivial", f.trivial as u8 as f64);
        for (i, lam) in lyap.exponents.iter().enumerate() {
            put(&mut row, &format!("lambda_{}", i + 1), *lam);
        }
        per_seed.push(row);
        for cp in &run.checkpoints {
            if cp.n == 0 {
                continue;
            }
            let n = cp.n as f64;
            rows.push(format!("{seed},{},{},{}", cp.n, cp.a_n / n, f.pair(&cp.log_p) / n));
        }
    }

    let drift_mean = drift_sum / cfg.seeds.len() as f64;
    let mut metrics = BTreeMap::new();
    put(&mut metrics, "drift_rate_mean", drift_mean);
    let dim = exponents.first().map(Vec::len).unwrap_or(0);
    let nseeds = cfg.seeds.len() as f64;
    let mut means = vec![0.0; dim];
    for ex in &exponents {
        for (m, lam) in means.iter_mut().zip(ex) {
            *m += lam / nseeds;
        }
    }
    for (i, m) in means.iter().enumerate() {
        put(&mut metrics, &format!("lambda_{}_mean", i + 1), *m);
        let var = exponents.iter().map(|ex| (ex[i] - m).powi(2)).sum::<f64>()
            / (nseeds - 1.0).max(1.0);
        put(&mut metrics, &format!("lambda_{}_stderr", i + 1), (var / nseeds).sqrt());
    }
    if dim > 0 {
        // The theorem's target for `a_n / n` under the max |log sigma| gauge.
        put(&mut metrics, "reference_top", means[0].max(-means[dim - 1]));
    }
    if let Some(target) = cfg.expected_drift {
        let residual = (drift_mean - target).abs();
        put(&mut metrics, "expected_residual", residual);
        verdict &= residual <= tol.drift;
    }
    let files =
        vec![("spectrum.csv".to_string(), csv("seed,n,a_rate,functional_rate", &rows))];
    Ok((summary(r, verdict, metrics, per_seed, messages), files))
}

fn run_decompose(r: &ResolvedConfig) -> Result<(Summary, Files)> {
    let cfg = &r.config;
    let (_, _, cocycle) = orbit_cocycle(r)?;
    let plan = DetectionPlan::build(r, &cocycle)?;

    let mut verdict = true;
    let mut rows = Vec::new();
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    let mut messages = Vec::new();
    let mut unit_sum = 0.0;
    let mut bad_sum = 0.0;
    for &seed in &cfg.seeds {
        let report = plan.detect(r, &cocycle, seed)?;
        let record = decompose_from_report(&report, cfg.horizon)?;
        record.verify_partition()?;
        let unit_count =
            record.intervals.iter().filter(|iv| iv.tag == IntervalTag::UnitStep).count();
        // Each positive good time must contribute exactly one unit step.
        let expected_units = report.good_times.iter().filter(|&&n| n >= 1).count();
        if unit_count != expected_units {
            verdict = false;
            messages.push(format!(
                "seed {seed}: {unit_count} unit steps but {expected_units} positive good times"
            ));
        }
        let unit_fraction = unit_count as f64 / cfg.horizon as f64;
        let bad_fraction = record.bad_mass() as f64 / cfg.horizon as f64;
        unit_sum += unit_fraction;
        bad_sum += bad_fraction;
        let mut row = BTreeMap::new();
        put(&mut row, "seed", seed as f64);
        put(&mut row, "intervals", record.intervals.len() as f64);
        put(&mut row, "unit_fraction", unit_fraction);
        put(&mut row, "bad_mass_fraction", bad_fraction);
        per_seed.push(row);
        for iv in &record.intervals {
            let tag = match iv.tag {
                IntervalTag::UnitStep => "unit",
                IntervalTag::BadJump(_) => "jump",
            };
            rows.push(format!("{seed},{},{},{},{tag}", iv.start, iv.end, iv.end - iv.start));
        }
    }

    let mut metrics = BTreeMap::new();
    put(&mut metrics, "a_hat", plan.a_hat);
    put(&mut metrics, "unit_fraction_mean", unit_sum / cfg.seeds.len() as f64);
    put(&mut metrics, "bad_mass_fraction_mean", bad_sum / cfg.seeds.len() as f64);
    let files =
        vec![("intervals.csv".to_string(), csv("seed,start,end,width,tag", &rows))];
    Ok((summary(r, verdict, metrics, per_seed, messages), files))
}

fn summary(
    r: &ResolvedConfig,
    verdict: bool,
    metrics: BTreeMap<String, f64>,
    per_seed: Vec<BTreeMap<String, f64>>,
    messages: Vec<String>,
) -> Summary {
    Summary {
        schema_version: SCHEMA_VERSION,
        experiment: r.config.experiment.name(),
        horizon: r.config.horizon,
        seeds: r.config.seeds.clone(),
        verdict,
        metrics,
        per_seed,
        messages,
    }
}

/// The CSV files a completed run of each experiment leaves behind.
pub fn expected_csvs(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Drift => &["drift_grid.csv"],
        ExperimentKind::Goodtimes => &["density_prefix.csv"],
        ExperimentKind::Functional | ExperimentKind::Banach | ExperimentKind::Meanergodic => {
            &["convergence.csv"]
        }
        ExperimentKind::Wolffdenjoy => &["orbit.csv"],
        ExperimentKind::Oseledets => &["spectrum.csv"],
        ExperimentKind::Decompose => &["intervals.csv"],
    }
}

/// Execute the experiment and persist its outputs.
pub fn run(r: &ResolvedConfig) -> Result<RunOutcome> {
    let (summary, files) = match r.config.experiment {
        ExperimentKind::Drift => run_drift(r)?,
        ExperimentKind::Goodtimes => run_goodtimes(r)?,
        ExperimentKind::Functional => run_functional(r)?,
        ExperimentKind::Banach => run_banach(r)?,
        ExperimentKind::Meanergodic => run_meanergodic(r)?,
        ExperimentKind::Wolffdenjoy => run_wolffdenjoy(r)?,
        ExperimentKind::Oseledets => run_oseledets(r)?,
        ExperimentKind::Decompose => run_decompose(r)?,
    };
    let dir = PathBuf::from(&r.config.output_dir);
    for (name, contents) in &files {
        write_atomic(&dir, name, contents)?;
    }
    let mut config_text = serde_json::to_string_pretty(&r.config)?;
    config_text.push('\n');
    write_atomic(&dir, "config.json", &config_text)?;
    let mut summary_text = serde_json::to_string_pretty(&summary)?;
    summary_text.push('\n');
    let summary_path = write_atomic(&dir, "summary.json", &summary_text)?;
    Ok(RunOutcome { verdict: summary.verdict, summary_path })
}
