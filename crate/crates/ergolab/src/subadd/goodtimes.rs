//! Good-time detection, density accounting, and delta-schedule calibration.
//!
//! A time `n` is *good* (two-sided mode) when the cocycle is nearly additive
//! over every suffix length `l <= n`:
//!
//! ```text
//! | a(n, omega) - a(n - l, T^l omega) - A l |  <=  l * delta_l
//! ```
//!
//! The strict mode keeps only the lower bound and drops the factor `l` from
//! the error budget; it is the variant under which the `{1, 2}`-valued
//! counterexample has good times exactly at its 2-values.

use crate::driver::{sample_path, DriverSpec, OmegaPath};
use crate::error::{Error, Result};
use crate::subadd::cocycle::SubadditiveCocycle;

/// Slack added to every margin comparison so exactly-additive cocycles with
/// a zero schedule still count their times as good.
pub const DETECT_TOL: f64 = 1e-9;

/// Additive floor for calibrated schedules.
pub const DELTA_FLOOR: f64 = 1e-9;

/// A per-lag error schedule `l -> delta_l`, `l = 1..=len`.
#[derive(Debug, Clone)]
pub struct DeltaSchedule {
    values: Vec<f64>,
}

impl DeltaSchedule {
    /// `delta == 0`: only exact additivity passes.
    pub fn zero(n_max: usize) -> Self {
        DeltaSchedule { values: vec![0.0; n_max] }
    }

    pub fn constant(c: f64, n_max: usize) -> Result<Self> {
        Self::from_values(vec![c; n_max])
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSpec("delta schedule must have length >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidSpec("delta schedule entries must be finite and >= 0".into()));
        }
        Ok(DeltaSchedule { values })
    }

    /// Build from a rule `l -> delta_l` for `l = 1..=n_max`.
    pub fn from_fn(n_max: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::from_values((1..=n_max).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `delta_l` for `l` in `1..=len`.
    pub fn delta(&self, ell: usize) -> Result<f64> {
        if ell == 0 || ell > self.values.len() {
            return Err(Error::OutOfRange { what: "delta lag", index: ell, max: self.values.len() });
        }
        Ok(self.values[ell - 1])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Monotone non-increasing envelope: `delta_l <- max_{k >= l} delta_k`.
    pub fn monotone_envelope(mut self) -> Self {
        let mut running = f64::NEG_INFINITY;
        for v in self.values.iter_mut().rev() {
            running = running.max(*v);
            *v = running;
        }
        self
    }

    /// Cap the tail: `delta_l <- min(delta_l, cap / ln(l + 1))`, forcing the
    /// schedule toward zero at rates no slower than logarithmic.
    pub fn with_log_cap(mut self, cap: f64) -> Result<Self> {
        if !cap.is_finite() || cap <= 0.0 {
            return Err(Error::InvalidSpec("log-cap must be finite and positive".into()));
        }
        for (i, v) in self.values.iter_mut().enumerate() {
            let ell = (i + 1) as f64;
            *v = v.min(cap / (ell + 1.0).ln());
        }
        Ok(self)
    }
}

/// Which side(s) of the near-additivity inequality gate a good time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMode {
    /// Two-sided with error budget `l * delta_l`.
    TwoSided,
    /// Lower bound only, with error budget `delta_l` (no factor `l`).
    Strict,
}

/// Density summary of a set of times inside `[0, horizon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityStats {
    /// `max_{1 <= k <= horizon} |times inside [0, k)| / k`: a finite-horizon
    /// stand-in for the upper asymptotic density.
    pub limsup_proxy: f64,
    /// `|times inside [0, horizon)| / horizon`.
    pub at_horizon: f64,
}

/// Everything the detector saw on one path.
#[derive(Debug, Clone)]
pub struct GoodTimeReport {
    pub horizon: usize,
    pub a_hat: f64,
    pub mode: DetectionMode,
    pub deltas: DeltaSchedule,
    /// Sorted ascending; `0` is always good (the condition is vacuous).
    pub good_times: Vec<usize>,
    /// `min_l (a(n) - a(n-l, T^l) - A l + err_l)` per time; good requires
    /// this to clear `-DETECT_TOL`. Entry `0` is infinite.
    pub lower_margin: Vec<f64>,
    /// Two-sided counterpart `min_l (A l + err_l - a(n) + a(n-l, T^l))`;
    /// infinite for every `n` in strict mode.
    pub upper_margin: Vec<f64>,
    /// `density_prefix[k - 1] = |good inside [0, k)| / k` for `k = 1..=horizon`.
    pub density_prefix: Vec<f64>,
}

impl GoodTimeReport {
    pub fn is_good(&self, n: usize) -> bool {
        self.good_times.binary_search(&n).is_ok()
    }

    pub fn density_at_horizon(&self) -> f64 {
        self.density_prefix.last().copied().unwrap_or(0.0)
    }

    /// Largest good time `>= 1`, the anchor used for functional extraction.
    pub fn last_positive_good_time(&self) -> Option<usize> {
        self.good_times.iter().rev().copied().find(|&n| n >= 1)
    }
}

/// Scan all pairs `(n, l)`, `1 <= l <= n <= n_max`, and report the times at
/// which near-additivity holds for every lag. Quadratic in the horizon with
/// an O(1) inner step whenever the cocycle exposes fast rows.
pub fn detect_good_times(
    cocycle: &SubadditiveCocycle,
    path: &OmegaPath,
    a_hat: f64,
    deltas: &DeltaSchedule,
    n_max: usize,
    mode: DetectionMode,
) -> Result<GoodTimeReport> {
    if n_max == 0 {
        return Err(Error::InvalidSpec("detection needs a horizon of at least 1".into()));
    }
    if deltas.len() < n_max {
        return Err(Error::InvalidSpec(format!(
            "delta schedule covers lags up to {}, horizon needs {}",
            deltas.len(),
            n_max
        )));
    }
    if !a_hat.is_finite() {
        return Err(Error::InvalidSpec("drift estimate must be finite".into()));
    }

    let mut rows = cocycle.rows(path, n_max)?;
    let mut base = vec![0.0; n_max + 1];
    rows.fill_row(0, &mut base)?;

    let mut lower = vec![f64::INFINITY; n_max + 1];
    let mut upper = vec![f64::INFINITY; n_max + 1];
    let mut row = vec![0.0; n_max + 1];
    for ell in 1..=n_max {
        let delta = deltas.delta(ell)?;
        let err = match mode {
            DetectionMode::TwoSided => ell as f64 * delta,
            DetectionMode::Strict => delta,
        };
        let drift_term = a_hat * ell as f64;
        let win = n_max - ell;
        rows.fill_row(ell, &mut row[..=win])?;
        match mode {
            DetectionMode::TwoSided => {
                for m in 0..=win {
                    let n = ell + m;
                    let diff = base[n] - row[m];
                    let lo = diff - drift_term + err;
                    if lo < lower[n] {
                        lower[n] = lo;
                    }
                    let up = drift_term + err - diff;
                    if up < upper[n] {
                        upper[n] = up;
                    }
                }
            }
            DetectionMode::Strict => {
                for m in 0..=win {
                    let n = ell + m;
                    let lo = base[n] - row[m] - drift_term + err;
                    if lo < lower[n] {
                        lower[n] = lo;
                    }
                }
            }
        }
    }

    let mut good_times = vec![0];
    for n in 1..=n_max {
        if lower[n] >= -DETECT_TOL && upper[n] >= -DETECT_TOL {
            good_times.push(n);
        }
    }

    let mut density_prefix = Vec::with_capacity(n_max);
    let mut count = 0usize;
    let mut next = 0usize;
    for k in 1..=n_max {
        // Count good times inside [0, k): those < k.
        while next < good_times.len() && good_times[next] < k {
            count += 1;
            next += 1;
        }
        density_prefix.push(count as f64 / k as f64);
    }

    Ok(GoodTimeReport {
        horizon: n_max,
        a_hat,
        mode,
        deltas: deltas.clone(),
        good_times,
        lower_margin: lower,
        upper_margin: upper,
        density_prefix,
    })
}

/// Finite-horizon upper-density summary of a sorted-or-not list of times.
pub fn upper_density(times: &[usize], horizon: usize) -> Result<DensityStats> {
    if horizon == 0 {
        return Err(Error::InvalidSpec("density needs a horizon of at least 1".into()));
    }
    let mut sorted: Vec<usize> = times.iter().copied().filter(|&t| t < horizon).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best = 0.0f64;
    let mut count = 0usize;
    let mut next = 0usize;
    for k in 1..=horizon {
        while next < sorted.len() && sorted[next] < k {
            count += 1;
            next += 1;
        }
        best = best.max(count as f64 / k as f64);
    }
    Ok(DensityStats { limsup_proxy: best, at_horizon: count as f64 / horizon as f64 })
}

/// The tightest two-sided schedule under which *every* time of this one
/// path is good: `delta_l = floor + max_n |a(n) - a(n-l, T^l) - a_hat l|/l`,
/// smoothed to a monotone envelope. Useful as a self-calibrated schedule
/// when the good-time structure itself is not under study.
pub fn observed_sup_schedule(
    cocycle: &SubadditiveCocycle,
    path: &OmegaPath,
    n_max: usize,
    a_hat: f64,
    floor: f64,
) -> Result<DeltaSchedule> {
    if n_max == 0 {
        return Err(Error::InvalidSpec("schedule needs a horizon of at least 1".into()));
    }
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::InvalidSpec("schedule floor must be finite and positive".into()));
    }
    let mut rows = cocycle.rows(path, n_max)?;
    let mut base = vec![0.0; n_max + 1];
    rows.fill_row(0, &mut base)?;
    let mut row = vec![0.0; n_max + 1];
    let mut values = Vec::with_capacity(n_max);
    for ell in 1..=n_max {
        let win = n_max - ell;
        rows.fill_row(ell, &mut row[..=win])?;
        let drift_term = a_hat * ell as f64;
        let mut worst = 0.0f64;
        for m in 0..=win {
            let defect = (base[ell + m] - row[m] - drift_term).abs();
            if defect > worst {
                worst = defect;
            }
        }
        values.push(floor + worst / ell as f64);
    }
    Ok(DeltaSchedule { values }.monotone_envelope())
}

/// Calibration knobs. `rho` is the target exceptional mass: the schedule is
/// sized so that roughly a `1 - rho/2` fraction of training paths would have
/// had *all* their times good under it.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationOptions {
    pub rho: f64,
    /// Tail cap constant: `delta_l <= delta_cap / ln(l + 1)`.
    pub delta_cap: f64,
    /// Additive floor keeping the schedule strictly positive.
    pub floor: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { rho: 0.1, delta_cap: 10.0, floor: DELTA_FLOOR }
    }
}

/// Calibrate a two-sided delta schedule from training paths.
///
/// Per training seed `s` and lag `l`, the scan records the worst normalised
/// additivity defect `D_l(s) = max_n |a(n) - a(n-l, T^l) - A l| / l`. The
/// lag profile `shape(l) = median_s D_l(s)` fixes the schedule's shape; a
/// single scale `q*` - the nearest-rank `1 - rho/2` quantile of the per-seed
/// sup statistics `M(s) = max_l D_l(s)/shape(l)` - stretches the profile so
/// that all lags of a typical path pass at once. The result is clamped to a
/// monotone non-increasing envelope and capped by `delta_cap / ln(l + 1)` so
/// it decays to zero.
pub fn calibrate_delta(
    cocycle: &SubadditiveCocycle,
    spec: &DriverSpec,
    train_seeds: &[u64],
    n_max: usize,
    a_hat: f64,
    opts: &CalibrationOptions,
) -> Result<DeltaSchedule> {
    if train_seeds.len() < 5 {
        return Err(Error::InvalidSpec(format!(
            "calibration needs at least 5 training seeds, got {}",
            train_seeds.len()
        )));
    }
    if !(opts.rho > 0.0 && opts.rho < 1.0) {
        return Err(Error::InvalidSpec("calibration rho must lie in (0, 1)".into()));
    }
    if n_max == 0 {
        return Err(Error::InvalidSpec("calibration needs a horizon of at least 1".into()));
    }

    let n_seeds = train_seeds.len();
    // defects[l - 1][s] = D_l(s)
    let mut defects = vec![vec![0.0f64; n_seeds]; n_max];
    let mut base = vec![0.0; n_max + 1];
    let mut row = vec![0.0; n_max + 1];
    for (s, &seed) in train_seeds.iter().enumerate() {
        let path = sample_path(spec, seed, n_max);
        let mut rows = cocycle.rows(&path, n_max)?;
        rows.fill_row(0, &mut base)?;
        for ell in 1..=n_max {
            let win = n_max - ell;
            rows.fill_row(ell, &mut row[..=win])?;
            let drift_term = a_hat * ell as f64;
            let mut worst = 0.0f64;
            for m in 0..=win {
                let defect = (base[ell + m] - row[m] - drift_term).abs();
                if defect > worst {
                    worst = defect;
                }
            }
            defects[ell - 1][s] = worst / ell as f64;
        }
    }

    // Shape: per-lag median over seeds, floored away from zero.
    let mut shape = Vec::with_capacity(n_max);
    let mut scratch = vec![0.0f64; n_seeds];
    for lag_defects in &defects {
        scratch.copy_from_slice(lag_defects);
        scratch.sort_by(f64::total_cmp);
        let median = if n_seeds % 2 == 1 {
            scratch[n_seeds / 2]
        } else {
            0.5 * (scratch[n_seeds / 2 - 1] + scratch[n_seeds / 2])
        };
        shape.push(median.max(opts.floor));
    }

    // Scale: quantile of per-seed sup statistics against the shape.
    let mut sups = vec![0.0f64; n_seeds];
    for (ell_idx, lag_defects) in defects.iter().enumerate() {
        for (s, &d) in lag_defects.iter().enumerate() {
            let ratio = d / shape[ell_idx];
            if ratio > sups[s] {
                sups[s] = ratio;
            }
        }
    }
    sups.sort_by(f64::total_cmp);
    let level = 1.0 - opts.rho / 2.0;
    let rank = ((level * n_seeds as f64).ceil() as usize).clamp(1, n_seeds);
    let scale = sups[rank - 1];

    let values: Vec<f64> = shape.iter().map(|s| opts.floor + s * scale).collect();
    DeltaSchedule::from_values(values)?
        .monotone_envelope()
        .with_log_cap(opts.delta_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::DriverKind;

    fn iid_spec() -> DriverSpec {
        DriverSpec::new(DriverKind::Iid { probs: vec![0.75, 0.25] }).unwrap()
    }

    #[test]
    fn schedule_envelope_and_cap() {
        let sched = DeltaSchedule::from_values(vec![0.1, 0.5, 0.2, 0.05])
            .unwrap()
            .monotone_envelope();
        assert_eq!(sched.values(), &[0.5, 0.5, 0.2, 0.05]);
        let capped = sched.with_log_cap(0.3).unwrap();
        // cap / ln(l + 1) for l = 1..4: 0.4328, 0.2731, 0.2164, 0.1864
        assert!((capped.delta(1).unwrap() - 0.5f64.min(0.3 / 2f64.ln())).abs() < 1e-15);
        assert!(capped.delta(2).unwrap() < 0.5);
        assert_eq!(capped.delta(4).unwrap(), 0.05);
    }

    #[test]
    fn schedule_rejects_bad_entries() {
        assert!(DeltaSchedule::from_values(vec![]).is_err());
        assert!(DeltaSchedule::from_values(vec![-0.1]).is_err());
        assert!(DeltaSchedule::from_values(vec![f64::NAN]).is_err());
        let s = DeltaSchedule::zero(3);
        assert!(s.delta(0).is_err());
        assert!(s.delta(4).is_err());
    }

    #[test]
    fn additive_cocycle_all_times_good_with_zero_schedule() {
        let c = SubadditiveCocycle::additive(0.7).unwrap();
        let path = sample_path(&iid_spec(), 7, 64);
        let report = detect_good_times(
            &c,
            &path,
            0.7,
            &DeltaSchedule::zero(64),
            64,
            DetectionMode::TwoSided,
        )
        .unwrap();
        assert_eq!(report.good_times.len(), 65);
        assert_eq!(report.density_at_horizon(), 1.0);
        assert!(report.lower_margin[10] >= -DETECT_TOL);
    }

    #[test]
    fn upper_density_fixtures() {
        let evens: Vec<usize> = (0..5000).map(|k| 2 * k).collect();
        let stats = upper_density(&evens, 10_000).unwrap();
        assert!((stats.at_horizon - 0.5).abs() < 1e-12);
        // [0, 1) already contains the time 0, so the proxy peaks at 1.
        assert_eq!(stats.limsup_proxy, 1.0);

        let squares: Vec<usize> = (0..100).map(|k| k * k).collect();
        let stats = upper_density(&squares, 10_000).unwrap();
        assert!((stats.at_horizon - 0.01).abs() < 1e-12);
        assert_eq!(stats.limsup_proxy, 1.0);

        let empty = upper_density(&[], 100).unwrap();
        assert_eq!(empty.at_horizon, 0.0);
        assert_eq!(empty.limsup_proxy, 0.0);
    }

    #[test]
    fn calibration_needs_five_seeds() {
        let c = SubadditiveCocycle::additive(1.0).unwrap();
        let err = calibrate_delta(
            &c,
            &iid_spec(),
            &[1, 2, 3, 4],
            32,
            1.0,
            &CalibrationOptions::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn calibration_on_additive_cocycle_returns_floor() {
        let c = SubadditiveCocycle::additive(0.3).unwrap();
        let sched = calibrate_delta(
            &c,
            &iid_spec(),
            &[1, 2, 3, 4, 5, 6],
            64,
            0.3,
            &CalibrationOptions::default(),
        )
        .unwrap();
        // An exactly additive cocycle has zero defect at every lag; the
        // schedule collapses to the floor.
        for ell in 1..=64 {
            let d = sched.delta(ell).unwrap();
            assert!(d <= 2.0 * DELTA_FLOOR + 1e-15, "delta_{ell} = {d}");
        }
    }
}
