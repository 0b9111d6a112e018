//! Metric functionals along semicontraction orbits.
//!
//! Once good times are in hand, the functional `h = d(., x_{n*}) - d(x0, x_{n*})`
//! anchored at the largest good time `n*` certifies the drift from below:
//! the chain inequality `h(x_l) <= -(A - delta_l) l` holds at every lag up to
//! `n*`, and `-h(x_N)/N` recovers the drift. This module extracts that
//! functional, verifies the limit, specialises it to norming functionals in
//! Banach spaces (including the mean-ergodic consequence), and classifies
//! disk orbits in the Wolff-Denjoy trichotomy.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::driver::OmegaPath;
use crate::error::{Error, Result};
use crate::spaces::banach::{norming_functional, operator_norm, DualVector, NormKind};
use crate::spaces::functional::{internal_functional, MetricFunctional};
use crate::spaces::orbit::{CompositionOrder, Orbit, SemicontractionSystem};
use crate::spaces::{MapElement, Point, SpaceKind};
use crate::subadd::cocycle::SubadditiveCocycle;
use crate::subadd::goodtimes::{
    observed_sup_schedule, DetectionMode, GoodTimeReport, DELTA_FLOOR, DETECT_TOL,
};

/// Drifts at or below this threshold are treated as zero (trivial direction,
/// no escape to the boundary).
pub const DRIFT_EPS: f64 = 0.01;

/// A boundary limit must reach at least this radius to count as escape.
pub const ESCAPE_RADIUS: f64 = 1.0 - 1e-6;

/// Agreement tolerance for the normalized tail of an escaping disk orbit.
pub const TAIL_AGREE_TOL: f64 = 1e-3;

/// Number of tail points over which radial convergence is checked.
const TAIL_WINDOW: usize = 10;

/// The extracted metric functional, with its verification diagnostics.
#[derive(Debug, Clone)]
pub struct MetricFunctionalEstimate {
    pub functional: MetricFunctional,
    /// The anchor `n*`: the largest good time of the report.
    pub anchor_time: usize,
    /// `max_{1 <= l <= n*} h(x_l) + (A - delta_l) l`; the chain inequality
    /// demands this stay below the detection slack.
    pub chain_residual: f64,
    /// Worst disagreement, over the probe points, among the functionals
    /// anchored at the last (up to) three positive good times.
    pub probe_stability: f64,
    /// Positive good times available to the extraction.
    pub good_count: usize,
}

/// Extract `h = h_{x_{n*}}` at the largest good time and verify the chain
/// inequality `h(x_l) <= -(A - delta_l) l + tol` for every `l <= n*`.
///
/// The report's own schedule and drift estimate supply `delta` and `A`.
/// Stability of the limit is probed by comparing the functionals anchored at
/// the last three positive good times on the caller's probe points.
pub fn extract_functional(
    orbit: &Orbit,
    report: &GoodTimeReport,
    probes: &[Point],
) -> Result<MetricFunctionalEstimate> {
    if orbit.horizon() < report.horizon {
        return Err(Error::InvalidSpec(format!(
            "orbit horizon {} is shorter than the report horizon {}",
            orbit.horizon(),
            report.horizon
        )));
    }
    let positive_good: Vec<usize> =
        report.good_times.iter().copied().filter(|&n| n >= 1).collect();
    let anchor = *positive_good.last().ok_or_else(|| {
        Error::NoGoodTimes(
            "no good times beyond 0; recalibrate the delta schedule (larger rho or more \
             training seeds) or extend the horizon"
                .into(),
        )
    })?;

    let kind = *orbit.system.kind();
    let h = internal_functional(kind, orbit.point(anchor)?, &orbit.basepoint)?;

    // Chain inequality along the whole orbit prefix.
    let mut chain_residual = f64::NEG_INFINITY;
    for ell in 1..=anchor {
        let delta = report.deltas.delta(ell)?;
        let value = h.eval(orbit.point(ell)?)?;
        let residual = value + (report.a_hat - delta) * ell as f64;
        if residual > chain_residual {
            chain_residual = residual;
        }
    }
    if anchor >= 1 && chain_residual > DETECT_TOL {
        return Err(Error::Numerical(format!(
            "chain inequality fails at the anchor {anchor}: residual {chain_residual:.3e} \
             exceeds {DETECT_TOL:.1e}"
        )));
    }

    // Stability of the functional across the last three positive good times.
    let tail: Vec<usize> =
        positive_good.iter().rev().take(3).copied().collect();
    let mut probe_stability = 0.0f64;
    if tail.len() >= 2 && !probes.is_empty() {
        let functionals: Vec<MetricFunctional> = tail
            .iter()
            .map(|&n| internal_functional(kind, orbit.point(n)?, &orbit.basepoint))
            .collect::<Result<_>>()?;
        for probe in probes {
            let values: Vec<f64> =
                functionals.iter().map(|f| f.eval(probe)).collect::<Result<_>>()?;
            for i in 0..values.len() {
                for j in i + 1..values.len() {
                    probe_stability = probe_stability.max((values[i] - values[j]).abs());
                }
            }
        }
    }

    Ok(MetricFunctionalEstimate {
        functional: h,
        anchor_time: anchor,
        chain_residual,
        probe_stability,
        good_count: positive_good.len(),
    })
}

/// One checkpoint of a convergence curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub n: usize,
    /// `-h(x_n)/n` (or the appropriate functional rate for the experiment).
    pub functional_rate: f64,
    /// `d(x0, x_n)/n`.
    pub distance_rate: f64,
}

/// Convergence verdict for a functional-vs-drift comparison.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub horizon: usize,
    /// The drift estimate the curve is tested against.
    pub target: f64,
    /// Final functional rate at the horizon.
    pub estimate: f64,
    /// `|estimate - target|`.
    pub residual: f64,
    pub tol: f64,
    pub verdict: bool,
    /// Geometric checkpoint grid up to the horizon.
    pub series: Vec<ConvergencePoint>,
    /// `max_n (-h(x_n) - d(x0, x_n))`: the sandwich inequality demands this
    /// stay below the detection slack at every time.
    pub sandwich_residual: f64,
}

fn geometric_grid(n_max: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut n = 1;
    while n < n_max {
        grid.push(n);
        n *= 2;
    }
    grid.push(n_max);
    grid
}

/// Verify `-h(x_N)/N ~ a_hat`: the metric-functional form of the drift.
pub fn verify_met(
    orbit: &Orbit,
    h: &MetricFunctional,
    a_hat: f64,
    tol: f64,
) -> Result<ConvergenceReport> {
    let n_max = orbit.horizon();
    if n_max == 0 {
        return Err(Error::InvalidSpec("verification needs a horizon of at least 1".into()));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidSpec("tolerance must be finite and positive".into()));
    }
    let mut sandwich_residual = f64::NEG_INFINITY;
    for n in 0..=n_max {
        let value = h.eval(orbit.point(n)?)?;
        sandwich_residual = sandwich_residual.max(-value - orbit.base_distance(n)?);
    }
    let series: Vec<ConvergencePoint> = geometric_grid(n_max)
        .into_iter()
        .map(|n| {
            let value = h.eval(orbit.point(n)?)?;
            Ok(ConvergencePoint {
                n,
                functional_rate: -value / n as f64,
                distance_rate: orbit.base_distance(n)? / n as f64,
            })
        })
        .collect::<Result<_>>()?;
    let estimate = series.last().expect("grid is nonempty").functional_rate;
    let residual = (estimate - a_hat).abs();
    Ok(ConvergenceReport {
        horizon: n_max,
        target: a_hat,
        estimate,
        residual,
        tol,
        verdict: residual < tol,
        series,
        sandwich_residual,
    })
}

/// A norm-one linear functional certifying linear escape in a Banach space.
#[derive(Debug, Clone)]
pub struct BanachDirectionResult {
    pub functional: DualVector,
    /// Set when the drift is numerically zero; the functional is then an
    /// arbitrary norm-one element and the margins are not meaningful.
    pub trivial: bool,
    /// `min_{1 <= l <= n*} f(x_l - x_0) - (A l - budget_l)` over all lags up
    /// to the last positive good time `n*`, where `budget_l` is the lower
    /// detection budget of the report's mode (`l delta_l` two-sided,
    /// `delta_l` strict). Bounded below by `-DETECT_TOL` by construction, up
    /// to floating-point noise.
    pub min_margin: f64,
    pub report: ConvergenceReport,
}

/// Build the escape direction as the norming functional of the displacement
/// `x_{n*} - x_0` at the last positive good time `n*`. Goodness of `n*`
/// turns the chain estimate
/// `f(x_l - x_0) >= a(n*) - d(x_l, x_{n*}) >= a(n*) - a(n* - l, T^l omega)`
/// into a guaranteed lower bound at *every* lag `l <= n*`, good or not.
/// (A Hahn-Banach limit averaged over several anchors only inherits the
/// bound below the earliest anchor, and genuinely violates it beyond.)
/// Reports the margins against that bound and the convergence of
/// `f(x_n - x_0)/n` to the drift.
pub fn banach_direction(
    orbit: &Orbit,
    report: &GoodTimeReport,
    tol: f64,
) -> Result<BanachDirectionResult> {
    let norm = match orbit.system.kind() {
        SpaceKind::Banach { norm, .. } => *norm,
        other => {
            return Err(Error::Domain(format!(
                "banach_direction needs a Banach space, got {}",
                other.describe()
            )))
        }
    };
    if orbit.horizon() < report.horizon {
        return Err(Error::InvalidSpec(format!(
            "orbit horizon {} is shorter than the report horizon {}",
            orbit.horizon(),
            report.horizon
        )));
    }

    let base = orbit.basepoint.as_vector()?.clone();

    if report.a_hat <= DRIFT_EPS {
        // Zero drift: every norm-one functional works vacuously.
        let mut e1 = DVector::zeros(base.len());
        e1[0] = 1.0;
        let functional = norming_functional(norm, &e1)?;
        let series = geometric_grid(orbit.horizon())
            .into_iter()
            .map(|n| {
                Ok(ConvergencePoint {
                    n,
                    functional_rate: functional.apply(&(orbit.point(n)?.as_vector()? - &base))
                        / n as f64,
                    distance_rate: orbit.base_distance(n)? / n as f64,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let estimate = series.last().map(|p| p.functional_rate).unwrap_or(0.0);
        return Ok(BanachDirectionResult {
            functional,
            trivial: true,
            min_margin: f64::INFINITY,
            report: ConvergenceReport {
                horizon: orbit.horizon(),
                target: report.a_hat,
                estimate,
                residual: (estimate - report.a_hat).abs(),
                tol,
                verdict: true,
                series,
                sandwich_residual: f64::NEG_INFINITY,
            },
        });
    }

    let positive_good: Vec<usize> =
        report.good_times.iter().copied().filter(|&n| n >= 1).collect();
    if positive_good.is_empty() {
        return Err(Error::NoGoodTimes(
            "no good times beyond 0; recalibrate the delta schedule before extracting a \
             direction"
                .into(),
        ));
    }
    let anchor = *positive_good.last().expect("nonempty");
    let reach = orbit.point(anchor)?.as_vector()? - &base;
    if crate::spaces::banach::norm(norm, &reach) <= DETECT_TOL {
        return Err(Error::NoGoodTimes(format!(
            "last good time {anchor} has not moved from the basepoint despite a drift \
             estimate of {:.6}; recalibrate the delta schedule",
            report.a_hat
        )));
    }
    let functional = norming_functional(norm, &reach)?;

    let mut min_margin = f64::INFINITY;
    for ell in 1..=anchor {
        let delta = report.deltas.delta(ell)?;
        let budget = match report.mode {
            DetectionMode::TwoSided => ell as f64 * delta,
            DetectionMode::Strict => delta,
        };
        let value = functional.apply(&(orbit.point(ell)?.as_vector()? - &base));
        let margin = value - (report.a_hat * ell as f64 - budget);
        if margin < min_margin {
            min_margin = margin;
        }
    }

    let series: Vec<ConvergencePoint> = geometric_grid(orbit.horizon())
        .into_iter()
        .map(|n| {
            Ok(ConvergencePoint {
                n,
                functional_rate: functional.apply(&(orbit.point(n)?.as_vector()? - &base))
                    / n as f64,
                distance_rate: orbit.base_distance(n)? / n as f64,
            })
        })
        .collect::<Result<_>>()?;
    let estimate = series.last().expect("grid is nonempty").functional_rate;
    let residual = (estimate - report.a_hat).abs();
    let verdict = residual < tol && min_margin >= -DETECT_TOL;

    Ok(BanachDirectionResult {
        functional,
        trivial: false,
        min_margin,
        report: ConvergenceReport {
            horizon: orbit.horizon(),
            target: report.a_hat,
            estimate,
            residual,
            tol,
            verdict,
            series,
            sandwich_residual: f64::NEG_INFINITY,
        },
    })
}

/// Result of checking `f <= h` pointwise on a sample.
#[derive(Debug, Clone)]
pub struct DominationReport {
    /// `max_y f(y) - h(y)` over the samples.
    pub max_violation: f64,
    /// First sample index violating the inequality beyond the slack, with
    /// the violation amount.
    pub counterexample: Option<(usize, f64)>,
    pub checked: usize,
}

/// Check that the linear functional `f` lies below the metric functional `h`
/// on every sample point (within the detection slack). The zero functional
/// fails at any `y` with `h(y) < 0`, e.g. `y` near the anchor of `h`.
pub fn dominate_check(
    f: &DualVector,
    h: &MetricFunctional,
    samples: &[Point],
) -> Result<DominationReport> {
    if samples.is_empty() {
        return Err(Error::InvalidSpec("domination check needs at least one sample".into()));
    }
    let mut max_violation = f64::NEG_INFINITY;
    let mut counterexample = None;
    for (i, y) in samples.iter().enumerate() {
        let violation = f.apply(y.as_vector()?) - h.eval(y)?;
        if violation > max_violation {
            max_violation = violation;
        }
        if violation > DETECT_TOL && counterexample.is_none() {
            counterexample = Some((i, violation));
        }
    }
    Ok(DominationReport { max_violation, counterexample, checked: samples.len() })
}

/// Outcome of a mean-ergodic run `S_n = sum_{k<n} U_{omega_0} .. U_{omega_{k-1}} v`.
#[derive(Debug, Clone)]
pub struct MeanErgodicResult {
    pub report: ConvergenceReport,
    pub functional: DualVector,
    pub trivial: bool,
    /// `max_n | ||S_n||/n - d(0, x_n)/n |`: the affine-orbit identity, which
    /// must hold to near machine precision.
    pub consistency_residual: f64,
}

/// Horizon cap for the internal good-time detection of a mean-ergodic run;
/// the direction functional stabilises long before the full horizon and the
/// quadratic scan would dominate the cost beyond this.
const MEAN_ERGODIC_DETECT_CAP: usize = 4096;

/// Run the mean-ergodic experiment: iterate the affine semicontractions
/// `w -> v + U_s w` from `0`, so that `x_n = S_n`, and extract the limit of
/// `||S_n||/n` together with a certifying norm-one functional.
pub fn mean_ergodic_run(
    us: &[DMatrix<f64>],
    norm: NormKind,
    v: &DVector<f64>,
    path: &OmegaPath,
    n_max: usize,
) -> Result<MeanErgodicResult> {
    if us.is_empty() {
        return Err(Error::InvalidSpec("mean-ergodic run needs at least one operator".into()));
    }
    let dim = v.len();
    if dim == 0 {
        return Err(Error::InvalidSpec("mean-ergodic vector must be nonempty".into()));
    }
    if n_max == 0 {
        return Err(Error::InvalidSpec("mean-ergodic run needs a horizon of at least 1".into()));
    }
    for (i, u) in us.iter().enumerate() {
        if u.nrows() != dim || u.ncols() != dim {
            return Err(Error::InvalidSpec(format!(
                "operator {i} is {}x{}, expected {dim}x{dim}",
                u.nrows(),
                u.ncols()
            )));
        }
        let op = operator_norm(norm, u);
        if op > 1.0 + crate::TOL_EXACT {
            return Err(Error::InvalidSpec(format!(
                "operator {i} has norm {op:.6} > 1: not a contraction"
            )));
        }
    }

    let kind = SpaceKind::Banach { dim, norm };
    let maps: Vec<MapElement> =
        us.iter().map(|u| MapElement::Affine { m: u.clone(), b: v.clone() }).collect();
    let system = std::sync::Arc::new(SemicontractionSystem::new(kind, maps)?);
    let zero = Point::vector(&vec![0.0; dim]);
    let orbit = system.orbit(path, &zero, n_max, CompositionOrder::Forward)?;

    // The affine-orbit identity ||S_n|| = d(0, x_n).
    let mut consistency_residual = 0.0f64;
    for n in 1..=n_max {
        let direct = crate::spaces::banach::norm(norm, orbit.point(n)?.as_vector()?);
        let stored = orbit.base_distance(n)?;
        consistency_residual =
            consistency_residual.max((direct - stored).abs() / n as f64);
    }

    let a_hat = orbit.base_distance(n_max)? / n_max as f64;

    // Internal detection on a capped horizon: the sup schedule marks every
    // time good, and the direction is read off the last of them.
    let detect_n = n_max.min(MEAN_ERGODIC_DETECT_CAP);
    let cocycle = SubadditiveCocycle::from_orbit("mean-ergodic", system.clone(), zero.clone())?;
    let a_hat_detect = orbit.base_distance(detect_n)? / detect_n as f64;
    let schedule = observed_sup_schedule(&cocycle, path, detect_n, a_hat_detect, DELTA_FLOOR)?;
    let detect_report = crate::subadd::goodtimes::detect_good_times(
        &cocycle,
        path,
        a_hat_detect,
        &schedule,
        detect_n,
        crate::subadd::goodtimes::DetectionMode::TwoSided,
    )?;
    let detect_orbit = if detect_n == n_max {
        None
    } else {
        Some(system.orbit(path, &zero, detect_n, CompositionOrder::Forward)?)
    };
    let direction =
        banach_direction(detect_orbit.as_ref().unwrap_or(&orbit), &detect_report, 1.0)?;

    // Report the functional's rate along the full horizon.
    let series: Vec<ConvergencePoint> = geometric_grid(n_max)
        .into_iter()
        .map(|n| {
            Ok(ConvergencePoint {
                n,
                functional_rate: direction.functional.apply(orbit.point(n)?.as_vector()?)
                    / n as f64,
                distance_rate: orbit.base_distance(n)? / n as f64,
            })
        })
        .collect::<Result<_>>()?;
    let estimate = orbit.base_distance(n_max)? / n_max as f64;
    Ok(MeanErgodicResult {
        report: ConvergenceReport {
            horizon: n_max,
            target: a_hat,
            estimate,
            residual: 0.0,
            tol: DETECT_TOL,
            verdict: consistency_residual <= 1e-12,
            series,
            sandwich_residual: f64::NEG_INFINITY,
        },
        functional: direction.functional,
        trivial: direction.trivial,
        consistency_residual,
    })
}

/// Wolff-Denjoy classification of a holomorphic-iteration orbit.
#[derive(Debug, Clone)]
pub enum WolffDenjoyOutcome {
    /// The orbit escapes radially; `xi` is the boundary limit, `secondary`
    /// the limit from an independent starting point (when it also escapes),
    /// and `agreement` the distance between the two.
    Boundary { xi: Complex64, secondary: Option<Complex64>, agreement: f64, radius: f64 },
    /// No escape and no drift: compatible with elliptic behaviour.
    NoDrift { last_radius: f64 },
    /// Positive drift but the orbit has not stabilised radially within the
    /// horizon; diagnostics carry the last radius and the angular spread of
    /// the normalized tail.
    Inconclusive { last_radius: f64, tail_spread: f64 },
}

/// Classify a disk orbit: escape to a single boundary point (checked from a
/// second starting point as well), no drift, or inconclusive.
///
/// Escape is checked first: tangential orbits (parabolic maps) reach the
/// boundary even though their drift vanishes, so the radius test must not
/// be gated behind the drift threshold.
pub fn wolff_denjoy_limit(
    orbit: &Orbit,
    a_hat: f64,
    second_start: Option<Point>,
) -> Result<WolffDenjoyOutcome> {
    if !matches!(orbit.system.kind(), SpaceKind::PoincareDisk) {
        return Err(Error::Domain(format!(
            "wolff_denjoy_limit needs the disk, got {}",
            orbit.system.kind().describe()
        )));
    }
    let n_max = orbit.horizon();
    if n_max < 2 {
        return Err(Error::InvalidSpec("classification needs a horizon of at least 2".into()));
    }

    let tail_limit = |orb: &Orbit| -> Result<(f64, f64, Complex64)> {
        let n = orb.horizon();
        let window = TAIL_WINDOW.min(n);
        let mut dirs = Vec::with_capacity(window);
        for k in (n + 1 - window)..=n {
            let z = orb.point(k)?.as_disk()?;
            let r = z.norm();
            if r > 0.0 {
                dirs.push(z / r);
            }
        }
        let last = orb.point(n)?.as_disk()?;
        let radius = last.norm();
        let mut spread = 0.0f64;
        for i in 0..dirs.len() {
            for j in i + 1..dirs.len() {
                spread = spread.max((dirs[i] - dirs[j]).norm());
            }
        }
        let xi = if radius > 0.0 { last / radius } else { last };
        Ok((radius, spread, xi))
    };

    let (radius, spread, xi) = tail_limit(orbit)?;
    if radius > ESCAPE_RADIUS && spread < TAIL_AGREE_TOL {
        // Independence of the starting point.
        let start2 = match second_start {
            Some(p) => p,
            None => {
                let z0 = orbit.basepoint.as_disk()?;
                let alt = Complex64::new(0.37, -0.21);
                if (z0 - alt).norm() < 1e-6 {
                    Point::disk(-0.29, 0.33)
                } else {
                    Point::disk(alt.re, alt.im)
                }
            }
        };
        let second_orbit =
            orbit.system.orbit(&orbit.path, &start2, n_max, orbit.order)?;
        let (radius2, spread2, xi2) = tail_limit(&second_orbit)?;
        let (secondary, agreement) = if radius2 > ESCAPE_RADIUS && spread2 < TAIL_AGREE_TOL {
            (Some(xi2), (xi - xi2).norm())
        } else {
            (None, f64::INFINITY)
        };
        return Ok(WolffDenjoyOutcome::Boundary { xi, secondary, agreement, radius });
    }
    if a_hat <= DRIFT_EPS {
        return Ok(WolffDenjoyOutcome::NoDrift { last_radius: radius });
    }
    Ok(WolffDenjoyOutcome::Inconclusive { last_radius: radius, tail_spread: spread })
}
