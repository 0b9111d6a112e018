//! JSON experiment configurations: schema, loading, line-anchored
//! validation, and resolution into core objects.
//!
//! The schema is a single JSON object; `docs/experiments.md` carries the
//! full field reference. Everything that influences a run -- driver, maps,
//! seeds, horizon, tolerances -- lives in the file, so a config plus the
//! binary pins the outputs byte for byte.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::driver::{Angle, DriverKind, DriverSpec};
use crate::spaces::banach::NormKind;
use crate::spaces::disk::{BlaschkeProduct, MobiusMap};
use crate::spaces::orbit::SemicontractionSystem;
use crate::spaces::posdef::PosdefMetric;
use crate::spaces::{validate_point, MapElement, Point, SpaceKind};
use crate::subadd::goodtimes::DetectionMode;

/// Schema version stamped into summaries and manifests.
pub const SCHEMA_VERSION: u32 = 1;

/// The eight experiments the runner knows how to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Drift,
    Goodtimes,
    Functional,
    Banach,
    Meanergodic,
    Wolffdenjoy,
    Oseledets,
    Decompose,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Drift => "drift",
            ExperimentKind::Goodtimes => "goodtimes",
            ExperimentKind::Functional => "functional",
            ExperimentKind::Banach => "banach",
            ExperimentKind::Meanergodic => "meanergodic",
            ExperimentKind::Wolffdenjoy => "wolffdenjoy",
            ExperimentKind::Oseledets => "oseledets",
            ExperimentKind::Decompose => "decompose",
        }
    }
}

/// Driver description; mirrors [`DriverKind`] in serializable form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DriverConfig {
    Iid {
        probs: Vec<f64>,
    },
    Markov {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        stationary_start: bool,
    },
    Rotation {
        angle: AngleConfig,
        breakpoints: Vec<f64>,
    },
    Deterministic {
        sequence: Vec<u32>,
    },
}

/// Either a named irrational ("golden", "silver") or a literal value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleConfig {
    Named(String),
    Literal(f64),
}

impl DriverConfig {
    pub fn to_spec(&self) -> Result<DriverSpec, String> {
        let kind = match self {
            DriverConfig::Iid { probs } => DriverKind::Iid { probs: probs.clone() },
            DriverConfig::Markov { matrix, stationary_start } => DriverKind::Markov {
                matrix: matrix.clone(),
                stationary_start: *stationary_start,
            },
            DriverConfig::Rotation { angle, breakpoints } => {
                let angle = match angle {
                    AngleConfig::Named(name) => match name.as_str() {
                        "golden" => Angle::Golden,
                        "silver" => Angle::SilverRatio,
                        other => {
                            return Err(format!(
                                "unknown angle name {other:?}; use \"golden\", \"silver\", \
                                 or a number"
                            ))
                        }
                    },
                    AngleConfig::Literal(v) => Angle::Literal(*v),
                };
                DriverKind::Rotation { angle, breakpoints: breakpoints.clone() }
            }
            DriverConfig::Deterministic { sequence } => {
                DriverKind::Deterministic { sequence: sequence.clone() }
            }
        };
        DriverSpec::new(kind).map_err(|e| e.to_string())
    }
}

/// Space description; mirrors [`SpaceKind`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpaceConfig {
    Banach { dim: usize, norm: NormName },
    Maxplus { dim: usize },
    Hilbert { dim: usize },
    Posdef {
        dim: usize,
        #[serde(default)]
        metric: MetricName,
    },
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormName {
    L1,
    L2,
    Linf,
}

impl From<NormName> for NormKind {
    fn from(n: NormName) -> NormKind {
        match n {
            NormName::L1 => NormKind::L1,
            NormName::L2 => NormKind::L2,
            NormName::Linf => NormKind::Linf,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    #[default]
    Operator,
    Frobenius,
}

impl SpaceConfig {
    pub fn to_kind(&self) -> SpaceKind {
        match *self {
            SpaceConfig::Banach { dim, norm } => SpaceKind::Banach { dim, norm: norm.into() },
            SpaceConfig::Maxplus { dim } => SpaceKind::MaxPlus { dim },
            SpaceConfig::Hilbert { dim } => SpaceKind::HilbertCone { dim },
            SpaceConfig::Posdef { dim, metric } => SpaceKind::Posdef {
                dim,
                metric: match metric {
                    MetricName::Operator => PosdefMetric::OperatorLog,
                    MetricName::Frobenius => PosdefMetric::FrobeniusLog,
                },
            },
            SpaceConfig::Disk => SpaceKind::PoincareDisk,
        }
    }
}

/// One map assignment. Complex scalars are `[re, im]` pairs; max-plus
/// entries may be `null` for minus infinity. The `matrix` kind is the
/// generator form used only by the `oseledets` experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MapConfig {
    Translation { t: Vec<f64> },
    Affine { m: Vec<Vec<f64>>, b: Vec<f64> },
    Maxplus { m: Vec<Vec<Option<f64>>> },
    Positive { m: Vec<Vec<f64>> },
    Congruence { g: Vec<Vec<f64>> },
    Mobius { a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2] },
    Parabolic { t: f64 },
    Rotation { theta: f64 },
    Automorphism { center: [f64; 2], theta: f64 },
    Blaschke { phase: f64, zeros: Vec<[f64; 2]> },
    Matrix { m: Vec<Vec<f64>> },
}

fn to_dmatrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, String> {
    if rows.is_empty() {
        return Err(format!("{what} must have at least one row"));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("{what} has ragged rows"));
    }
    if ncols == 0 {
        return Err(format!("{what} must have at least one column"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn c64(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

impl MapConfig {
    /// Convert to a space map; the `matrix` kind is rejected here and
    /// handled by [`MapConfig::to_generator`] instead.
    pub fn to_element(&self) -> Result<MapElement, String> {
        Ok(match self {
            MapConfig::Translation { t } => MapElement::translation(t),
            MapConfig::Affine { m, b } => MapElement::Affine {
                m: to_dmatrix(m, "affine matrix")?,
                b: DVector::from_column_slice(b),
            },
            MapConfig::Maxplus { m } => {
                if m.is_empty() || m.iter().any(|r| r.len() != m[0].len()) {
                    return Err("max-plus matrix must be rectangular and nonempty".into());
                }
                MapElement::MaxPlusMatrix(DMatrix::from_fn(m.len(), m[0].len(), |i, j| {
                    m[i][j].unwrap_or(f64::NEG_INFINITY)
                }))
            }
            MapConfig::Positive { m } => MapElement::Positive(to_dmatrix(m, "cone matrix")?),
            MapConfig::Congruence { g } => {
                MapElement::Congruence(to_dmatrix(g, "congruence matrix")?)
            }
            MapConfig::Mobius { a, b, c, d } => MapElement::Mobius(
                MobiusMap::new(c64(*a), c64(*b), c64(*c), c64(*d)).map_err(|e| e.to_string())?,
            ),
            MapConfig::Parabolic { t } => MapElement::Mobius(MobiusMap::parabolic(*t)),
            MapConfig::Rotation { theta } => MapElement::Mobius(MobiusMap::rotation(*theta)),
            MapConfig::Automorphism { center, theta } => MapElement::Mobius(
                MobiusMap::automorphism(c64(*center), *theta).map_err(|e| e.to_string())?,
            ),
            MapConfig::Blaschke { phase, zeros } => MapElement::Blaschke(BlaschkeProduct {
                phase: *phase,
                zeros: zeros.iter().map(|z| c64(*z)).collect(),
            }),
            MapConfig::Matrix { .. } => {
                return Err(
                    "matrix generators apply only to the oseledets experiment".into()
                )
            }
        })
    }

    /// Convert to an operator-cocycle generator (oseledets only).
    pub fn to_generator(&self) -> Result<DMatrix<f64>, String> {
        match self {
            MapConfig::Matrix { m } => to_dmatrix(m, "generator"),
            other => Err(format!(
                "the oseledets experiment needs \"matrix\" generators, found a {:?} map",
                MapKindName(other)
            )),
        }
    }
}

/// Helper rendering just the kind tag of a map for diagnostics.
struct MapKindName<'a>(&'a MapConfig);

impl std::fmt::Debug for MapKindName<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self.0 {
            MapConfig::Translation { .. } => "translation",
            MapConfig::Affine { .. } => "affine",
            MapConfig::Maxplus { .. } => "maxplus",
            MapConfig::Positive { .. } => "positive",
            MapConfig::Congruence { .. } => "congruence",
            MapConfig::Mobius { .. } => "mobius",
            MapConfig::Parabolic { .. } => "parabolic",
            MapConfig::Rotation { .. } => "rotation",
            MapConfig::Automorphism { .. } => "automorphism",
            MapConfig::Blaschke { .. } => "blaschke",
            MapConfig::Matrix { .. } => "matrix",
        };
        f.write_str(name)
    }
}

/// Starting point of the orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasepointConfig {
    Vector { coords: Vec<f64> },
    Matrix { rows: Vec<Vec<f64>> },
    Disk { z: [f64; 2] },
}

impl BasepointConfig {
    pub fn to_point(&self) -> Result<Point, String> {
        Ok(match self {
            BasepointConfig::Vector { coords } => Point::vector(coords),
            BasepointConfig::Matrix { rows } => {
                Point::Matrix(to_dmatrix(rows, "basepoint matrix")?)
            }
            BasepointConfig::Disk { z } => Point::disk(z[0], z[1]),
        })
    }
}

/// How the tolerance schedule for good-time detection is obtained.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DeltaConfig {
    /// `delta = 0`: only exactly additive times are good.
    Zero,
    /// A constant schedule.
    Constant { value: f64 },
    /// The per-path sup schedule: the tightest schedule under which every
    /// time of that path is good. Useful when the functional, not the
    /// good-time structure, is under study.
    #[default]
    Observed,
    /// Calibrated from `train_seeds` at exceptional mass `rho`.
    Calibrated,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    #[default]
    TwoSided,
    Strict,
}

impl From<ModeConfig> for DetectionMode {
    fn from(m: ModeConfig) -> DetectionMode {
        match m {
            ModeConfig::TwoSided => DetectionMode::TwoSided,
            ModeConfig::Strict => DetectionMode::Strict,
        }
    }
}

/// Pass/fail thresholds; every verdict in a summary traces back to one of
/// these fields.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Drift comparisons `|estimate - expected_drift|`.
    pub drift: f64,
    /// Slack for exact identities (chain and sandwich residuals, margins).
    pub exact: f64,
    /// Functional-vs-drift convergence residuals.
    pub functional: f64,
    /// Top-exponent gap of operator runs.
    pub top: f64,
    /// Componentwise spectrum gap against the QR oracle.
    pub spectrum: f64,
    /// Boundary-point agreement on the disk.
    pub boundary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            drift: 0.02,
            exact: 1e-9,
            functional: 0.02,
            top: 0.03,
            spectrum: 0.05,
            boundary: 1e-3,
        }
    }
}

fn default_rho() -> f64 {
    0.1
}

/// The complete experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub driver: DriverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub maps: Vec<MapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<BasepointConfig>,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    /// Seeds used only for delta calibration; disjointness from `seeds` is
    /// the caller's responsibility and is what makes reports "held out".
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub train_seeds: Vec<u64>,
    #[serde(default)]
    pub delta: DeltaConfig,
    #[serde(default)]
    pub mode: ModeConfig,
    /// Target exceptional mass for calibration and the density verdict.
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Optional external target for the drift-style experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_drift: Option<f64>,
    /// Expected boundary point `[re, im]` for `wolffdenjoy`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_boundary: Option<[f64; 2]>,
    /// Expect the `wolffdenjoy` outcome to be no drift (elliptic behaviour).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub expect_no_drift: bool,
    pub output_dir: String,
}

/// A validation failure anchored to the config line that caused it.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    /// 1-based line in the config file; 0 when no anchor is known.
    pub line: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn render(&self, path: &Path) -> String {
        format!("{}:{}: {}", path.display(), self.line, self.message)
    }
}

/// 1-based line of the first occurrence of `"key"` in the raw config text.
pub fn line_of_key(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    for (i, line) in text.lines().enumerate() {
        if line.contains(&needle) {
            return i + 1;
        }
    }
    0
}

/// Read and parse a config file, reporting JSON errors with their line.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, String), Diagnostic> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Diagnostic { line: 0, message: format!("cannot read config: {e}") })?;
    match serde_json::from_str::<ExperimentConfig>(&text) {
        Ok(config) => Ok((config, text)),
        Err(e) => Err(Diagnostic { line: e.line(), message: e.to_string() }),
    }
}

/// The experiment-specific objects a run needs.
#[derive(Debug, Clone)]
pub enum Payload {
    /// Orbit-driven cocycle experiments (drift, goodtimes, functional,
    /// banach, wolffdenjoy, decompose).
    Orbit { system: Arc<SemicontractionSystem>, basepoint: Point },
    /// Matrix generators for the oseledets experiment.
    Operators { generators: Vec<DMatrix<f64>> },
    /// Contractions plus the summand vector for the mean-ergodic experiment.
    MeanErgodic { us: Vec<DMatrix<f64>>, norm: NormKind, v: DVector<f64> },
}

/// A validated config together with its resolved core objects.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub spec: DriverSpec,
    pub payload: Payload,
}

/// Validate the config and build the core objects, accumulating every
/// failure as a line-anchored diagnostic.
pub fn resolve(
    config: ExperimentConfig,
    text: &str,
) -> Result<ResolvedConfig, Vec<Diagnostic>> {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let fail = |key: &str, message: String, diags: &mut Vec<Diagnostic>| {
        diags.push(Diagnostic { line: line_of_key(text, key), message });
    };

    if config.horizon < 1 {
        fail("horizon", "horizon must be at least 1".into(), &mut diags);
    }
    if config.seeds.is_empty() {
        fail("seeds", "the seed list must be nonempty".into(), &mut diags);
    }
    if !(config.rho > 0.0 && config.rho < 1.0) {
        fail("rho", format!("rho must lie in (0, 1), got {}", config.rho), &mut diags);
    }
    if let DeltaConfig::Constant { value } = &config.delta {
        if !(value.is_finite() && *value >= 0.0) {
            fail("delta", format!("constant delta must be finite and >= 0, got {value}"), &mut diags);
        }
    }
    if matches!(config.delta, DeltaConfig::Calibrated) && config.train_seeds.len() < 5 {
        fail(
            "train_seeds",
            format!(
                "calibration needs at least 5 training seeds, got {}",
                config.train_seeds.len()
            ),
            &mut diags,
        );
    }

    let spec = match config.driver.to_spec() {
        Ok(s) => Some(s),
        Err(msg) => {
            fail("driver", msg, &mut diags);
            None
        }
    };

    if config.expected_drift.is_some()
        && matches!(config.experiment, ExperimentKind::Wolffdenjoy | ExperimentKind::Decompose)
    {
        fail(
            "expected_drift",
            format!("expected_drift does not apply to {}", config.experiment.name()),
            &mut diags,
        );
    }
    if (config.expected_boundary.is_some() || config.expect_no_drift)
        && config.experiment != ExperimentKind::Wolffdenjoy
    {
        fail(
            "expected_boundary",
            "boundary expectations apply only to wolffdenjoy".into(),
            &mut diags,
        );
    }
    if config.expected_boundary.is_some() && config.expect_no_drift {
        fail(
            "expect_no_drift",
            "expected_boundary and expect_no_drift are mutually exclusive".into(),
            &mut diags,
        );
    }

    let alphabet = spec.as_ref().map(|s| s.alphabet_size()).unwrap_or(0);
    let payload = match config.experiment {
        ExperimentKind::Oseledets => {
            let mut generators = Vec::with_capacity(config.maps.len());
            if config.maps.is_empty() {
                fail("maps", "oseledets needs one matrix generator per symbol".into(), &mut diags);
            }
            for (i, map) in config.maps.iter().enumerate() {
                match map.to_generator() {
                    Ok(g) => generators.push(g),
                    Err(msg) => fail("maps", format!("map {i}: {msg}"), &mut diags),
                }
            }
            if let Some(d) = generators.first().map(|g| g.nrows()) {
                for (i, g) in generators.iter().enumerate() {
                    if g.nrows() != g.ncols() || g.nrows() != d {
                        fail(
                            "maps",
                            format!("generator {i} is {}x{}, expected {d}x{d}", g.nrows(), g.ncols()),
                            &mut diags,
                        );
                    }
                }
            }
            if spec.is_some() && generators.len() < alphabet {
                fail(
                    "maps",
                    format!(
                        "driver alphabet has {alphabet} symbols but only {} generators are \
                         assigned; missing generator for symbol {}",
                        generators.len(),
                        generators.len()
                    ),
                    &mut diags,
                );
            }
            Payload::Operators { generators }
        }
        ExperimentKind::Meanergodic => {
            let (dim, norm) = match config.space {
                Some(SpaceConfig::Banach { dim, norm }) => (dim, NormKind::from(norm)),
                Some(other) => {
                    fail(
                        "space",
                        format!(
                            "meanergodic needs a banach space, got {}",
                            other.to_kind().describe()
                        ),
                        &mut diags,
                    );
                    (0, NormKind::L2)
                }
                None => {
                    fail("space", "meanergodic needs a banach space".into(), &mut diags);
                    (0, NormKind::L2)
                }
            };
            let mut us = Vec::with_capacity(config.maps.len());
            let mut v: Option<DVector<f64>> = None;
            if config.maps.is_empty() {
                fail("maps", "meanergodic needs one affine map per symbol".into(), &mut diags);
            }
            for (i, map) in config.maps.iter().enumerate() {
                match map.to_element() {
                    Ok(MapElement::Affine { m, b }) => {
                        if dim > 0 && (m.nrows() != dim || b.len() != dim) {
                            fail(
                                "maps",
                                format!("map {i} does not match the space dimension {dim}"),
                                &mut diags,
                            );
                        }
                        match &v {
                            None => v = Some(b),
                            Some(prev) if prev == &b => {}
                            Some(_) => fail(
                                "maps",
                                format!(
                                    "map {i} has a different summand vector; meanergodic \
                                     needs w -> v + U w with one shared v"
                                ),
                                &mut diags,
                            ),
                        }
                        us.push(m);
                    }
                    Ok(_) => fail(
                        "maps",
                        format!("map {i}: meanergodic needs affine or translation maps"),
                        &mut diags,
                    ),
                    Err(msg) => fail("maps", format!("map {i}: {msg}"), &mut diags),
                }
            }
            if spec.is_some() && us.len() < alphabet {
                fail(
                    "maps",
                    format!(
                        "driver alphabet has {alphabet} symbols but only {} maps are \
                         assigned; missing map for symbol {}",
                        us.len(),
                        us.len()
                    ),
                    &mut diags,
                );
            }
            let v = v.unwrap_or_else(|| DVector::zeros(dim.max(1)));
            Payload::MeanErgodic { us, norm, v }
        }
        _ => {
            let kind = match config.space {
                Some(s) => {
                    let k = s.to_kind();
                    if config.experiment == ExperimentKind::Wolffdenjoy
                        && !matches!(k, SpaceKind::PoincareDisk)
                    {
                        fail(
                            "space",
                            format!("wolffdenjoy needs the disk, got {}", k.describe()),
                            &mut diags,
                        );
                    }
                    Some(k)
                }
                None => {
                    fail(
                        "space",
                        format!("{} needs a space", config.experiment.name()),
                        &mut diags,
                    );
                    None
                }
            };
            if config.experiment == ExperimentKind::Banach
                && !matches!(kind, Some(SpaceKind::Banach { .. }) | None)
            {
                fail(
                    "space",
                    "the banach experiment needs a banach space".into(),
                    &mut diags,
                );
            }
            let mut elements = Vec::with_capacity(config.maps.len());
            if config.maps.is_empty() {
                fail("maps", "the experiment needs one map per symbol".into(), &mut diags);
            }
            for (i, map) in config.maps.iter().enumerate() {
                match map.to_element() {
                    Ok(e) => elements.push(e),
                    Err(msg) => fail("maps", format!("map {i}: {msg}"), &mut diags),
                }
            }
            if spec.is_some() && elements.len() < alphabet && !config.maps.is_empty() {
                fail(
                    "maps",
                    format!(
                        "driver alphabet has {alphabet} symbols but only {} maps are \
                         assigned; missing map for symbol {}",
                        elements.len(),
                        elements.len()
                    ),
                    &mut diags,
                );
            }
            let basepoint = match &config.basepoint {
                Some(b) => match b.to_point() {
                    Ok(p) => Some(p),
                    Err(msg) => {
                        fail("basepoint", msg, &mut diags);
                        None
                    }
                },
                None => {
                    fail(
                        "basepoint",
                        format!("{} needs a basepoint", config.experiment.name()),
                        &mut diags,
                    );
                    None
                }
            };
            match (kind, basepoint) {
                (Some(kind), Some(point)) if diags.is_empty() => {
                    if let Err(e) = validate_point(&kind, &point) {
                        fail("basepoint", e.to_string(), &mut diags);
                    }
                    match SemicontractionSystem::new(kind, elements) {
                        Ok(system) if diags.is_empty() => {
                            Payload::Orbit { system: Arc::new(system), basepoint: point }
                        }
                        Ok(_) => Payload::Operators { generators: Vec::new() },
                        Err(e) => {
                            fail("maps", e.to_string(), &mut diags);
                            Payload::Operators { generators: Vec::new() }
                        }
                    }
                }
                // Placeholder payload; diagnostics are already recorded.
                _ => Payload::Operators { generators: Vec::new() },
            }
        }
    };

    if !diags.is_empty() {
        return Err(diags);
    }
    let spec = spec.expect("no diagnostics implies the driver resolved");
    Ok(ResolvedConfig { config, spec, payload })
}
