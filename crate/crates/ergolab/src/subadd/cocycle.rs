//! Subadditive cocycles over a two-sided symbolic driver.
//!
//! A cocycle here is a function `a(n, omega)` with `a(0, .) = 0` satisfying
//! `a(n + m, omega) <= a(n, omega) + a(m, T^n omega)` up to a fixed numerical
//! slack. The concrete sources range from plain Birkhoff sums to distances
//! along orbits of semicontraction systems; all of them expose the same three
//! entry points: point evaluation, a full profile `n -> a(n, omega)`, and a
//! row filler `m -> a(m, T^l omega)` used by the quadratic-time scans.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::driver::{sample_path, DriverSpec, OmegaPath};
use crate::error::{Error, Result};
use crate::rng::SplitMix;
use crate::spaces::orbit::{CocycleRows, CompositionOrder, SemicontractionSystem};
use crate::spaces::Point;

/// Numerical slack allowed in the subadditivity inequality.
pub const SUBADD_TOL: f64 = 1e-9;

/// Evaluations at or above this cost (in steps) go through the memo table.
const CACHE_THRESHOLD: usize = 32;

/// Where the values of a cocycle come from.
#[derive(Clone)]
pub enum CocycleSource {
    /// `a(n, omega) = d(x0, u(n, omega) x0)` along a forward orbit of a
    /// semicontraction system, `u(n, omega) = phi_{omega_0} .. phi_{omega_{n-1}}`.
    Orbit { system: Arc<SemicontractionSystem>, basepoint: Point },
    /// Birkhoff sums `sum_{k < n} w(omega_k)`, optionally reflected through
    /// the absolute value (`|S_n|`, the one-dimensional walk distance).
    SymbolSum { weights: Arc<Vec<f64>>, reflect: bool },
    /// The exactly additive cocycle `a(n) = rate * n`, independent of omega.
    Linear { rate: f64 },
    /// Omega-independent values `a_0 = 0`, `a_n = 1 + [marks(n)]`: a
    /// `{1, 2}`-valued sequence, subadditive because `2 <= 1 + 1`.
    MarkedTimes { marks: Arc<dyn Fn(usize) -> bool + Send + Sync> },
    /// Arbitrary closed-form rule `(path, n) -> value`; the caller promises
    /// `eval(path, 0) = 0` and measurability in the first `n` symbols.
    ClosedForm { eval: Arc<dyn Fn(&OmegaPath, usize) -> f64 + Send + Sync> },
    /// Omega-independent table `a_n = t[n]`; indices beyond the table are an
    /// out-of-range error.
    Table(Arc<Vec<f64>>),
    /// Time reversal `b(n, omega) = a(n, T^{-n} omega)` of another cocycle.
    Reversed(Box<CocycleSource>),
}

/// A labelled subadditive cocycle with a memo table for repeated evaluations.
#[derive(Clone)]
pub struct SubadditiveCocycle {
    label: String,
    source: CocycleSource,
    cache: Arc<Mutex<HashMap<(u64, i64, usize), f64>>>,
}

impl std::fmt::Debug for SubadditiveCocycle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubadditiveCocycle").field("label", &self.label).finish()
    }
}

impl SubadditiveCocycle {
    pub fn new(label: impl Into<String>, source: CocycleSource) -> Result<Self> {
        if let CocycleSource::Table(t) = &source {
            if t.is_empty() || t[0] != 0.0 {
                return Err(Error::InvalidSpec(
                    "table cocycle needs t[0] = 0 as its first entry".into(),
                ));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec("table cocycle entries must be finite".into()));
            }
        }
        if let CocycleSource::SymbolSum { weights, .. } = &source {
            if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidSpec(
                    "symbol-sum cocycle needs a nonempty finite weight table".into(),
                ));
            }
        }
        Ok(SubadditiveCocycle {
            label: label.into(),
            source,
            cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    /// Distance cocycle of a forward orbit started at `basepoint`.
    pub fn from_orbit(
        label: impl Into<String>,
        system: Arc<SemicontractionSystem>,
        basepoint: Point,
    ) -> Result<Self> {
        crate::spaces::validate_point(system.kind(), &basepoint)?;
        Self::new(label, CocycleSource::Orbit { system, basepoint })
    }

    /// The additive cocycle `a(n) = rate * n` (a Birkhoff sum of a constant).
    pub fn additive(rate: f64) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::InvalidSpec("additive rate must be finite".into()));
        }
        Ok(Self::new(format!("additive(rate={rate})"), CocycleSource::Linear { rate })?)
    }

    /// Birkhoff sums of per-symbol weights.
    pub fn symbol_sum(label: impl Into<String>, weights: Vec<f64>) -> Result<Self> {
        Self::new(label, CocycleSource::SymbolSum { weights: Arc::new(weights), reflect: false })
    }

    /// `a(n) = |sum_{k<n} w(omega_k)|`: the reflected-walk distance cocycle.
    pub fn reflected_walk(label: impl Into<String>, weights: Vec<f64>) -> Result<Self> {
        Self::new(label, CocycleSource::SymbolSum { weights: Arc::new(weights), reflect: true })
    }

    /// Omega-independent table `a_n = t[n]` (must start with `0`).
    pub fn from_table(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(label, CocycleSource::Table(Arc::new(values)))
    }

    /// `{1, 2}`-valued sequence: `a_n = 2` exactly at marked times.
    pub fn marked_times(
        label: impl Into<String>,
        marks: impl Fn(usize) -> bool + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(label, CocycleSource::MarkedTimes { marks: Arc::new(marks) })
    }

    /// Arbitrary closed form; the caller is responsible for subadditivity.
    pub fn from_closed_form(
        label: impl Into<String>,
        eval: impl Fn(&OmegaPath, usize) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(label, CocycleSource::ClosedForm { eval: Arc::new(eval) })
    }

    /// The reversed cocycle `b(n, omega) = a(n, T^{-n} omega)`, again
    /// subadditive over the same driver. Reversing twice yields a cocycle
    /// equal to the original.
    pub fn reversed(&self) -> Self {
        let source = match &self.source {
            // b(n, T^{-n} omega) = a(n, omega): unwrap instead of nesting.
            CocycleSource::Reversed(inner) => (**inner).clone(),
            other => CocycleSource::Reversed(Box::new(other.clone())),
        };
        SubadditiveCocycle {
            label: format!("reversed({})", self.label),
            source,
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `a(n, T^offset omega)`. Deterministic in `(path, offset, n)`; repeated
    /// calls on expensive sources hit a memo table.
    pub fn evaluate(&self, n: usize, path: &OmegaPath, offset: i64) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        let p = if offset == 0 { path.clone() } else { path.shift(offset) };
        let cacheable = n >= CACHE_THRESHOLD && self.source_is_expensive();
        let key = {
            let (seed, total_offset) = p.id();
            (seed, total_offset, n)
        };
        if cacheable {
            if let Some(v) = self.cache.lock().unwrap().get(&key) {
                return Ok(*v);
            }
        }
        let value = eval_source(&self.source, n, &p)?;
        if cacheable {
            self.cache.lock().unwrap().insert(key, value);
        }
        Ok(value)
    }

    fn source_is_expensive(&self) -> bool {
        !matches!(
            self.source,
            CocycleSource::Table(_)
                | CocycleSource::MarkedTimes { .. }
                | CocycleSource::Linear { .. }
        )
    }

    /// The full profile `[a(0, omega), .., a(n_max, omega)]` in one sweep.
    pub fn profile(&self, path: &OmegaPath, n_max: usize) -> Result<Vec<f64>> {
        match &self.source {
            CocycleSource::Orbit { system, basepoint } => {
                let orbit = system.orbit(path, basepoint, n_max, CompositionOrder::Forward)?;
                Ok(orbit.base_distances().to_vec())
            }
            CocycleSource::SymbolSum { weights, reflect } => {
                let mut out = Vec::with_capacity(n_max + 1);
                let mut s = 0.0;
                out.push(0.0);
                for k in 0..n_max {
                    s += symbol_weight(weights, path, k as i64)?;
                    out.push(if *reflect { s.abs() } else { s });
                }
                Ok(out)
            }
            CocycleSource::Linear { rate } => {
                Ok((0..=n_max).map(|n| rate * n as f64).collect())
            }
            CocycleSource::Table(t) => {
                if n_max >= t.len() {
                    return Err(Error::OutOfRange {
                        what: "table cocycle index",
                        index: n_max,
                        max: t.len() - 1,
                    });
                }
                Ok(t[..=n_max].to_vec())
            }
            CocycleSource::MarkedTimes { marks } => {
                let mut out = Vec::with_capacity(n_max + 1);
                out.push(0.0);
                (1..=n_max).for_each(|n| out.push(1.0 + f64::from(marks(n))));
                Ok(out)
            }
            CocycleSource::ClosedForm { .. } | CocycleSource::Reversed(_) => {
                (0..=n_max).map(|n| self.evaluate(n, path, 0)).collect()
            }
        }
    }

    /// Row filler `out[m] = a(m, T^l omega)` for the quadratic scans
    /// (subadditivity checks, good-time detection, delta calibration).
    /// Rows are valid for `l + m <= n_max`.
    pub fn rows(&self, path: &OmegaPath, n_max: usize) -> Result<Box<dyn CocycleRows>> {
        match &self.source {
            CocycleSource::Orbit { system, basepoint } => {
                system.row_provider(path, basepoint, n_max)
            }
            CocycleSource::SymbolSum { weights, reflect } => {
                // Prefix sums make every row entry O(1): the shifted sum is
                // S_{l+m} - S_l, reflected or not.
                let mut prefix = Vec::with_capacity(n_max + 1);
                let mut s = 0.0;
                prefix.push(0.0);
                for k in 0..n_max {
                    s += symbol_weight(weights, path, k as i64)?;
                    prefix.push(s);
                }
                Ok(Box::new(SymbolSumRows { prefix, reflect: *reflect }))
            }
            CocycleSource::Table(t) => {
                if n_max >= t.len() {
                    return Err(Error::OutOfRange {
                        what: "table cocycle index",
                        index: n_max,
                        max: t.len() - 1,
                    });
                }
                Ok(Box::new(ShiftInvariantRows { values: t[..=n_max].to_vec() }))
            }
            CocycleSource::MarkedTimes { marks } => {
                let mut values = Vec::with_capacity(n_max + 1);
                values.push(0.0);
                (1..=n_max).for_each(|n| values.push(1.0 + f64::from(marks(n))));
                Ok(Box::new(ShiftInvariantRows { values }))
            }
            CocycleSource::Linear { rate } => {
                let rate = *rate;
                let values = (0..=n_max).map(|n| rate * n as f64).collect();
                Ok(Box::new(ShiftInvariantRows { values }))
            }
            CocycleSource::ClosedForm { .. } | CocycleSource::Reversed(_) => Ok(Box::new(
                GenericRows { cocycle: self.clone(), path: path.clone() },
            )),
        }
    }
}

fn symbol_weight(weights: &[f64], path: &OmegaPath, k: i64) -> Result<f64> {
    let sym = path.symbol(k) as usize;
    weights.get(sym).copied().ok_or(Error::OutOfRange {
        what: "symbol weight",
        index: sym,
        max: weights.len() - 1,
    })
}

fn eval_source(source: &CocycleSource, n: usize, p: &OmegaPath) -> Result<f64> {
    match source {
        CocycleSource::Orbit { system, basepoint } => {
            let orbit = system.orbit(p, basepoint, n, CompositionOrder::Forward)?;
            orbit.base_distance(n)
        }
        CocycleSource::SymbolSum { weights, reflect } => {
            let mut s = 0.0;
            for k in 0..n {
                s += symbol_weight(weights, p, k as i64)?;
            }
            Ok(if *reflect { s.abs() } else { s })
        }
        CocycleSource::Linear { rate } => Ok(rate * n as f64),
        CocycleSource::MarkedTimes { marks } => Ok(1.0 + f64::from(marks(n))),
        CocycleSource::ClosedForm { eval } => Ok(eval(p, n)),
        CocycleSource::Table(t) => t.get(n).copied().ok_or(Error::OutOfRange {
            what: "table cocycle index",
            index: n,
            max: t.len() - 1,
        }),
        CocycleSource::Reversed(inner) => eval_source(inner, n, &p.shift(-(n as i64))),
    }
}

/// Rows for omega-independent cocycles: every shift sees the same values.
struct ShiftInvariantRows {
    values: Vec<f64>,
}

impl CocycleRows for ShiftInvariantRows {
    fn fill_row(&mut self, ell: usize, out: &mut [f64]) -> Result<()> {
        if ell + out.len() > self.values.len() {
            return Err(Error::OutOfRange {
                what: "row window",
                index: ell + out.len() - 1,
                max: self.values.len() - 1,
            });
        }
        out.copy_from_slice(&self.values[..out.len()]);
        Ok(())
    }
}

/// Prefix-sum rows for Birkhoff sums: `a(m, T^l omega) = S_{l+m} - S_l`.
struct SymbolSumRows {
    prefix: Vec<f64>,
    reflect: bool,
}

impl CocycleRows for SymbolSumRows {
    fn fill_row(&mut self, ell: usize, out: &mut [f64]) -> Result<()> {
        if ell + out.len() > self.prefix.len() {
            return Err(Error::OutOfRange {
                what: "row window",
                index: ell + out.len() - 1,
                max: self.prefix.len() - 1,
            });
        }
        let s0 = self.prefix[ell];
        if self.reflect {
            for (m, slot) in out.iter_mut().enumerate() {
                *slot = (self.prefix[ell + m] - s0).abs();
            }
        } else {
            for (m, slot) in out.iter_mut().enumerate() {
                *slot = self.prefix[ell + m] - s0;
            }
        }
        Ok(())
    }
}

/// Fallback rows that re-evaluate the cocycle entry by entry. Quadratic in
/// the horizon per row; meant for closed-form and reversed sources at the
/// small horizons where they appear.
struct GenericRows {
    cocycle: SubadditiveCocycle,
    path: OmegaPath,
}

impl CocycleRows for GenericRows {
    fn fill_row(&mut self, ell: usize, out: &mut [f64]) -> Result<()> {
        for (m, slot) in out.iter_mut().enumerate() {
            *slot = self.cocycle.evaluate(m, &self.path, ell as i64)?;
        }
        Ok(())
    }
}

/// One failed instance of the subadditivity inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubadditivityViolation {
    pub n: usize,
    pub m: usize,
    /// `a(n + m) - a(n) - a(m, T^n omega)`, greater than the allowed slack.
    pub excess: f64,
}

/// Scan the cocycle inequality `a(n+m) <= a(n) + a(m, T^n omega) + tol`
/// on a fixed path. Exhaustive for horizons up to about 1.4k (a few million
/// pairs); beyond that a seeded sample of pairs is drawn so the scan stays
/// near-quadratic-free. Returns every violation found, worst excess first.
pub fn check_subadditivity(
    cocycle: &SubadditiveCocycle,
    path: &OmegaPath,
    n_max: usize,
    tol: f64,
) -> Result<Vec<SubadditivityViolation>> {
    if n_max < 2 {
        return Ok(Vec::new());
    }
    let mut rows = cocycle.rows(path, n_max)?;
    let mut base = vec![0.0; n_max + 1];
    rows.fill_row(0, &mut base)?;

    let mut violations = Vec::new();
    const EXHAUSTIVE_LIMIT: usize = 1448; // ~1e6 ordered pairs
    if n_max <= EXHAUSTIVE_LIMIT {
        let mut row = vec![0.0; n_max + 1];
        for n in 1..n_max {
            let win = n_max - n;
            rows.fill_row(n, &mut row[..=win])?;
            for m in 1..=win {
                let excess = base[n + m] - base[n] - row[m];
                if excess > tol {
                    violations.push(SubadditivityViolation { n, m, excess });
                }
            }
        }
    } else {
        // Deterministic sample: pair count capped, seeded by the path id.
        let (seed, off) = path.id();
        let mut rng = SplitMix::new(crate::rng::substream(seed ^ off as u64, 0x5AB4_DD17));
        let samples = 200_000;
        for _ in 0..samples {
            let n = 1 + rng.next_index(n_max - 1);
            let m = 1 + rng.next_index(n_max - n);
            let a_nm = cocycle.evaluate(n + m, path, 0)?;
            let a_n = base[n];
            let a_shift = cocycle.evaluate(m, path, n as i64)?;
            let excess = a_nm - a_n - a_shift;
            if excess > tol {
                violations.push(SubadditivityViolation { n, m, excess });
            }
        }
    }
    violations.sort_by(|a, b| b.excess.total_cmp(&a.excess));
    violations.dedup_by(|a, b| a.n == b.n && a.m == b.m);
    Ok(violations)
}

/// Drift estimates for `a(n)/n`.
#[derive(Debug, Clone)]
pub struct DriftEstimate {
    /// Mean of `a(n_max, omega)/n_max` over the sampled paths: the
    /// almost-sure (Kingman) estimator at the largest horizon.
    pub a_hat_as: f64,
    /// `min_n mean_omega a(n, omega)/n` over a geometric horizon grid: the
    /// infimum characterisation of the drift.
    pub a_hat_inf: f64,
    /// Bootstrap standard error of `a_hat_as` over the seed sample.
    pub stderr: f64,
    /// Largest horizon used.
    pub horizon: usize,
    /// Horizon at which the infimum was attained.
    pub inf_horizon: usize,
    /// The grid of horizons and the seed-averaged `a(n)/n` at each.
    pub grid: Vec<(usize, f64)>,
}

/// Estimate the drift `A = inf_n (1/n) E[a(n, .)]` from sampled paths.
///
/// Both estimators are returned: the almost-sure one (value at the largest
/// horizon, averaged over seeds) and the infimum over a geometric grid of
/// horizons. The standard error is a seed-level bootstrap (200 resamples,
/// deterministic) of the almost-sure estimator.
pub fn estimate_drift(
    cocycle: &SubadditiveCocycle,
    spec: &DriverSpec,
    seeds: &[u64],
    n_max: usize,
) -> Result<DriftEstimate> {
    if seeds.is_empty() {
        return Err(Error::InvalidSpec("drift estimation needs at least one seed".into()));
    }
    if n_max == 0 {
        return Err(Error::InvalidSpec("drift estimation needs a horizon of at least 1".into()));
    }
    // Geometric grid 1, 2, 4, ..., plus the horizon itself.
    let mut grid_ns = Vec::new();
    let mut n = 1;
    while n < n_max {
        grid_ns.push(n);
        n = (n * 2).min(n_max);
    }
    grid_ns.push(n_max);

    let mut per_seed_final = Vec::with_capacity(seeds.len());
    let mut grid_means = vec![0.0; grid_ns.len()];
    for &seed in seeds {
        let path = sample_path(spec, seed, n_max);
        let profile = cocycle.profile(&path, n_max)?;
        for (slot, &gn) in grid_means.iter_mut().zip(&grid_ns) {
            *slot += profile[gn] / gn as f64;
        }
        per_seed_final.push(profile[n_max] / n_max as f64);
    }
    for slot in &mut grid_means {
        *slot /= seeds.len() as f64;
    }

    let a_hat_as = per_seed_final.iter().sum::<f64>() / seeds.len() as f64;
    let (inf_idx, &min_mean) = grid_means
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");

    // Seed-level bootstrap of the almost-sure estimator.
    let mut rng = SplitMix::new(crate::rng::substream(0xD81F_7E57, seeds.len() as u64));
    let resamples = 200;
    let mut boot_means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..per_seed_final.len() {
            acc += per_seed_final[rng.next_index(per_seed_final.len())];
        }
        boot_means.push(acc / per_seed_final.len() as f64);
    }
    let boot_mean = boot_means.iter().sum::<f64>() / resamples as f64;
    let stderr = (boot_means.iter().map(|m| (m - boot_mean).powi(2)).sum::<f64>()
        / resamples as f64)
        .sqrt();

    Ok(DriftEstimate {
        a_hat_as,
        a_hat_inf: min_mean,
        stderr,
        horizon: n_max,
        inf_horizon: grid_ns[inf_idx],
        grid: grid_ns.into_iter().zip(grid_means).collect(),
    })
}
