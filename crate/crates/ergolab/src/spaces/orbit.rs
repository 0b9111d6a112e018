//! Semigroups of semicontractions and their orbits.
//!
//! A `SemicontractionSystem` is a finite family `phi_0, ..., phi_{k-1}` of
//! nonexpansive self-maps of one of the supported spaces. Given a symbol
//! path `omega = (s_0, s_1, ...)` the forward orbit applies new maps on the
//! inside,
//!
//! ```text
//! u(n, omega) = phi_{s_0} o phi_{s_1} o ... o phi_{s_{n-1}},
//! ```
//!
//! which is the order for which `x_n = u(n, omega) x0` tracks a single
//! horofunction; the reverse orbit applies new maps on the outside and is
//! the order matching products of random operators. Forward orbits satisfy
//! the prefix recursion `u(n+1) = u(n) o phi_{s_n}`, so for families closed
//! under composition we compose in `O(1)` maps per step.
//!
//! The cocycle machinery needs whole shifted rows
//! `m -> d(x0, u(m, T^l omega) x0)`. Three strategies are chosen per family:
//!
//! * `Invertible` — affine isometries: with `y_k = u(k) x0` the row entry is
//!   exactly `||y_{l+m} - y_l||`, so one prefix orbit serves every shift.
//! * `Composable` — families closed under composition (general affine,
//!   max-plus and positive matrices, congruences, Moebius): re-sweep each
//!   shift with one composition per entry.
//! * `BlackBox` — topical maps and Blaschke products: re-apply the maps
//!   pointwise, quadratic per row; fine for the short horizons these
//!   nonlinear families are used at.
//!
//! Moebius products additionally track the Hermitian form `M^* J M`
//! (`J = diag(-1, 1)`) through the composition. Its corner entry gives
//! `1 - |phi(z)|^2` multiplicatively, without the catastrophic cancellation
//! the raw coefficients suffer once orbits approach the boundary circle.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::driver::OmegaPath;
use crate::error::{Error, Result};
use crate::rng::SplitMix;
use crate::spaces::banach::{norm_of_diff, operator_norm, NormKind};
use crate::spaces::disk::MobiusMap;
use crate::spaces::hilbert::{apply_projective, hilbert_distance};
use crate::spaces::maxplus::{tropical_matmul, tropical_matvec};
use crate::spaces::{dist_unchecked, MapElement, Point, SpaceKind};

/// Order in which new maps enter a product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionOrder {
    /// New maps on the inside: `u(n+1) = u(n) o phi_{s_n}`.
    Forward,
    /// New maps on the outside: `v(n+1) = phi_{s_n} o v(n)`.
    Reverse,
}

/// How shifted cocycle rows are computed for a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStrategy {
    Invertible,
    Composable,
    BlackBox,
}

const NONEXPANSIVE_TOL: f64 = 1e-9;
const SPOT_CHECK_PAIRS: usize = 8;

/// A validated family of nonexpansive maps acting on one space.
#[derive(Debug)]
pub struct SemicontractionSystem {
    kind: SpaceKind,
    maps: Vec<MapElement>,
    strategy: RowStrategy,
}

impl SemicontractionSystem {
    pub fn new(kind: SpaceKind, maps: Vec<MapElement>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidSpec("a system needs at least one map".into()));
        }
        for (i, m) in maps.iter().enumerate() {
            m.validate(&kind)
                .map_err(|e| Error::InvalidSpec(format!("map {i}: {e}")))?;
        }
        let strategy = choose_strategy(&kind, &maps);
        let system = SemicontractionSystem { kind, maps, strategy };
        system.spot_check_nonexpansive()?;
        Ok(system)
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn map(&self, sym: usize) -> Result<&MapElement> {
        self.maps
            .get(sym)
            .ok_or(Error::OutOfRange { what: "map symbol", index: sym, max: self.maps.len() - 1 })
    }

    pub fn row_strategy(&self) -> RowStrategy {
        self.strategy
    }

    /// Apply the map labelled `sym` to a point.
    pub fn apply(&self, sym: usize, x: &Point) -> Result<Point> {
        self.map(sym)?.apply(x)
    }

    /// Monte-Carlo safety net on top of the analytic per-family checks:
    /// each map must be nonexpansive on a few seeded random pairs.
    fn spot_check_nonexpansive(&self) -> Result<()> {
        let mut g = SplitMix::new(0xC0FF_EE00 ^ self.maps.len() as u64);
        for (i, map) in self.maps.iter().enumerate() {
            for _ in 0..SPOT_CHECK_PAIRS {
                let x = sample_point(&self.kind, &mut g);
                let y = sample_point(&self.kind, &mut g);
                let before = dist_unchecked(&self.kind, &x, &y)?;
                let after = dist_unchecked(&self.kind, &map.apply(&x)?, &map.apply(&y)?)?;
                if after > before + NONEXPANSIVE_TOL.max(1e-12 * before.abs()) {
                    return Err(Error::InvalidSpec(format!(
                        "map {i} expanded a sampled pair: {after} > {before}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Compute the orbit `x_k = u(k) x0` (or its reverse-order analog) for
    /// `k = 0..=n`, caching `d(x0, x_k)` with numerically stable formulas.
    pub fn orbit(
        self: &Arc<Self>,
        path: &OmegaPath,
        basepoint: &Point,
        n: usize,
        order: CompositionOrder,
    ) -> Result<Orbit> {
        crate::spaces::validate_point(&self.kind, basepoint)?;
        if path.alphabet_size() > self.maps.len() {
            return Err(Error::InvalidSpec(format!(
                "driver emits {} symbols but the system has only {} maps",
                path.alphabet_size(),
                self.maps.len()
            )));
        }
        let mut points = Vec::with_capacity(n + 1);
        let mut base_distances = Vec::with_capacity(n + 1);
        points.push(basepoint.clone());
        base_distances.push(0.0);

        match order {
            CompositionOrder::Reverse => {
                let mut x = basepoint.clone();
                for k in 0..n {
                    let sym = path.symbol(k as i64) as usize;
                    x = self.map(sym)?.apply(&x)?;
                    base_distances.push(dist_unchecked(&self.kind, basepoint, &x)?);
                    points.push(x.clone());
                }
            }
            CompositionOrder::Forward => match self.strategy {
                RowStrategy::BlackBox => {
                    for k in 1..=n {
                        // Innermost map first: phi_{s_{k-1}} is applied to x0.
                        let mut x = basepoint.clone();
                        for j in (0..k).rev() {
                            x = self.map(path.symbol(j as i64) as usize)?.apply(&x)?;
                        }
                        base_distances.push(dist_unchecked(&self.kind, basepoint, &x)?);
                        points.push(x);
                    }
                }
                _ => {
                    let mut composed = Composed::identity(&self.kind)?;
                    for k in 0..n {
                        composed.compose_right(self.map(path.symbol(k as i64) as usize)?);
                        let x = composed.apply(basepoint)?;
                        base_distances.push(composed.distance_to_image(&self.kind, basepoint)?);
                        points.push(x);
                    }
                }
            },
        }
        Ok(Orbit {
            system: Arc::clone(self),
            path: path.clone(),
            basepoint: basepoint.clone(),
            order,
            points,
            base_distances,
        })
    }

    /// Build a row filler for `m -> d(x0, u(m, T^l omega) x0)`.
    pub fn row_provider(
        self: &Arc<Self>,
        path: &OmegaPath,
        basepoint: &Point,
        n_max: usize,
    ) -> Result<Box<dyn CocycleRows>> {
        crate::spaces::validate_point(&self.kind, basepoint)?;
        let symbols: Vec<usize> = (0..n_max as i64).map(|k| path.symbol(k) as usize).collect();
        if let Some(bad) = symbols.iter().find(|s| **s >= self.maps.len()) {
            return Err(Error::OutOfRange { what: "map symbol", index: *bad, max: self.maps.len() - 1 });
        }
        match self.strategy {
            RowStrategy::Invertible => {
                // y_k = u(k) x0 for an isometric-linear-part family; rows
                // are exactly ||y_{l+m} - y_l||.
                let norm = match &self.kind {
                    SpaceKind::Banach { norm, .. } => *norm,
                    _ => unreachable!("invertible strategy is affine-only"),
                };
                let x0 = basepoint.as_vector()?.clone();
                let mut ys = Vec::with_capacity(n_max + 1);
                let mut composed = Composed::identity(&self.kind)?;
                ys.push(x0.clone());
                for &s in &symbols {
                    composed.compose_right(&self.maps[s]);
                    ys.push(composed.apply(basepoint)?.as_vector()?.clone());
                }
                if ys[0].len() == 1 {
                    let scalars = ys.iter().map(|v| v[0]).collect();
                    Ok(Box::new(ScalarWalkRows { ys: scalars }))
                } else {
                    Ok(Box::new(IsometryAffineRows { ys, norm }))
                }
            }
            RowStrategy::Composable => Ok(Box::new(ComposableRows {
                system: Arc::clone(self),
                symbols,
                basepoint: basepoint.clone(),
            })),
            RowStrategy::BlackBox => Ok(Box::new(BlackBoxRows {
                system: Arc::clone(self),
                symbols,
                basepoint: basepoint.clone(),
            })),
        }
    }
}

fn choose_strategy(kind: &SpaceKind, maps: &[MapElement]) -> RowStrategy {
    if maps
        .iter()
        .any(|m| matches!(m, MapElement::Topical(_) | MapElement::Blaschke(_)))
    {
        return RowStrategy::BlackBox;
    }
    if let SpaceKind::Banach { norm, .. } = kind {
        let all_isometric = maps.iter().all(|m| match m {
            MapElement::Affine { m, .. } => is_isometric_matrix(*norm, m),
            _ => false,
        });
        if all_isometric {
            return RowStrategy::Invertible;
        }
    }
    RowStrategy::Composable
}

/// A matrix acts isometrically for the given norm iff both it and its
/// inverse are nonexpansive.
fn is_isometric_matrix(norm: NormKind, m: &DMatrix<f64>) -> bool {
    if operator_norm(norm, m) > 1.0 + NONEXPANSIVE_TOL {
        return false;
    }
    match m.clone().lu().try_inverse() {
        Some(inv) => operator_norm(norm, &inv) <= 1.0 + NONEXPANSIVE_TOL,
        None => false,
    }
}

fn sample_point(kind: &SpaceKind, g: &mut SplitMix) -> Point {
    match kind {
        SpaceKind::Banach { dim, .. } | SpaceKind::MaxPlus { dim } => {
            Point::Vector(DVector::from_fn(*dim, |_, _| 2.0 * g.next_signed()))
        }
        SpaceKind::HilbertCone { dim } => {
            Point::Vector(DVector::from_fn(*dim, |_, _| 0.1 + 1.9 * g.next_f64()))
        }
        SpaceKind::Posdef { dim, .. } => {
            let raw = DMatrix::from_fn(*dim, *dim, |_, _| 0.7 * g.next_signed());
            Point::Matrix(crate::spaces::posdef::sym_exp(&((&raw + raw.transpose()) * 0.5)))
        }
        SpaceKind::PoincareDisk => {
            let r = 0.9 * g.next_f64().sqrt();
            let th = 2.0 * std::f64::consts::PI * g.next_f64();
            let z = Complex64::from_polar(r, th);
            Point::Disk(z)
        }
    }
}

/// An orbit with cached stable distances from the basepoint.
#[derive(Debug)]
pub struct Orbit {
    pub system: Arc<SemicontractionSystem>,
    pub path: OmegaPath,
    pub basepoint: Point,
    pub order: CompositionOrder,
    points: Vec<Point>,
    base_distances: Vec<f64>,
}

impl Orbit {
    /// Largest time index `n` with a stored point.
    pub fn horizon(&self) -> usize {
        self.points.len() - 1
    }

    pub fn point(&self, k: usize) -> Result<&Point> {
        self.points
            .get(k)
            .ok_or(Error::OutOfRange { what: "orbit index", index: k, max: self.points.len() - 1 })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// `d(x0, x_k)`, computed during generation with the stable per-family
    /// formulas (exact for Moebius products even deep into the boundary).
    pub fn base_distance(&self, k: usize) -> Result<f64> {
        self.base_distances.get(k).copied().ok_or(Error::OutOfRange {
            what: "orbit index",
            index: k,
            max: self.base_distances.len() - 1,
        })
    }

    pub fn base_distances(&self) -> &[f64] {
        &self.base_distances
    }
}

/// Fills rows `out[m] = a(m, T^l omega) = d(x0, u(m, T^l omega) x0)`,
/// `m = 0..out.len()`. Implemented by orbit-backed providers here and by
/// table/closed-form providers in the cocycle layer.
pub trait CocycleRows {
    fn fill_row(&mut self, ell: usize, out: &mut [f64]) -> Result<()>;
}

struct ScalarWalkRows {
    ys: Vec<f64>,
}

impl CocycleRows for ScalarWalkRows {
    fn fill_row(&mut self, ell: usize, out: &mut [f64]) -> Result<()> {
        let base = self.ys[ell];
        for (m, slot) in out.iter_mut().enumerate() {
            *slot = (self.ys[ell + m] - base).abs();
        }
        Ok(())
    }
}

struct IsometryAffineRows {
    ys: Vec<DVector<f64>>,
    norm: NormKind,
}

impl CocycleRows for IsometryAffineRows {
    fn fill_row(&mut self, ell: usize, out: &mut [f64]) -> Result<()> {
        let base = &self.ys[ell];
        for (m, slot) in out.iter_mut().enumerate() {
            *slot = norm_of_diff(self.norm, &self.ys[ell + m], base);
        }
        Ok(())
    }
}

struct ComposableRows {
    system: Arc<SemicontractionSystem>,
    symbols: Vec<usize>,
    basepoint: Point,
}

impl CocycleRows for ComposableRows {
    fn fill_row(&mut self, ell: usize, out: &mut [f64]) -> Result<()> {
        if out.is_empty() {
            return Ok(());
        }
        out[0] = 0.0;
        let mut composed = Composed::identity(&self.system.kind)?;
        for m in 1..out.len() {
            let sym = self.symbols[ell + m - 1];
            composed.compose_right(&self.system.maps[sym]);
            out[m] = composed.distance_to_image(&self.system.kind, &self.basepoint)?;
        }
        Ok(())
    }
}

struct BlackBoxRows {
    system: Arc<SemicontractionSystem>,
    symbols: Vec<usize>,
    basepoint: Point,
}

impl CocycleRows for BlackBoxRows {
    fn fill_row(&mut self, ell: usize, out: &mut [f64]) -> Result<()> {
        if out.is_empty() {
            return Ok(());
        }
        out[0] = 0.0;
        for (m, slot) in out.iter_mut().enumerate().skip(1) {
            let mut x = self.basepoint.clone();
            for j in (ell..ell + m).rev() {
                x = self.system.maps[self.symbols[j]].apply(&x)?;
            }
            *slot = dist_unchecked(&self.system.kind, &self.basepoint, &x)?;
        }
        Ok(())
    }
}

/// Running forward composition for families closed under composition.
pub(crate) enum Composed {
    Affine { m: DMatrix<f64>, b: DVector<f64> },
    Trop(DMatrix<f64>),
    Pos(DMatrix<f64>),
    Cong(DMatrix<f64>),
    Mob(MobiusTracker),
}

impl Composed {
    pub(crate) fn identity(kind: &SpaceKind) -> Result<Self> {
        Ok(match kind {
            SpaceKind::Banach { dim, .. } => Composed::Affine {
                m: DMatrix::identity(*dim, *dim),
                b: DVector::zeros(*dim),
            },
            SpaceKind::MaxPlus { dim } => Composed::Trop(crate::spaces::maxplus::tropical_identity(*dim)),
            SpaceKind::HilbertCone { dim } => Composed::Pos(DMatrix::identity(*dim, *dim)),
            SpaceKind::Posdef { dim, .. } => Composed::Cong(DMatrix::identity(*dim, *dim)),
            SpaceKind::PoincareDisk => Composed::Mob(MobiusTracker::identity()),
        })
    }

    /// `self <- self o phi`, i.e. the new map acts first.
    pub(crate) fn compose_right(&mut self, map: &MapElement) {
        match (self, map) {
            (Composed::Affine { m, b }, MapElement::Affine { m: fm, b: fb }) => {
                // (x -> m x + b) o (x -> fm x + fb) = x -> m fm x + (m fb + b).
                *b += &*m * fb;
                *m *= fm;
            }
            (Composed::Trop(t), MapElement::MaxPlusMatrix(f)) => {
                *t = tropical_matmul(t, f);
            }
            (Composed::Pos(p), MapElement::Positive(f)) => {
                *p *= f;
                let top = p.iter().fold(0.0_f64, |acc, t| acc.max(*t));
                if top > 0.0 {
                    *p /= top;
                }
            }
            (Composed::Cong(g), MapElement::Congruence(f)) => {
                *g *= f;
            }
            (Composed::Mob(t), MapElement::Mobius(f)) => t.compose_right(f),
            _ => unreachable!("system construction guarantees a homogeneous family"),
        }
    }

    pub(crate) fn apply(&self, x0: &Point) -> Result<Point> {
        Ok(match self {
            Composed::Affine { m, b } => Point::Vector(m * x0.as_vector()? + b),
            Composed::Trop(t) => Point::Vector(tropical_matvec(t, x0.as_vector()?)),
            Composed::Pos(p) => Point::Vector(apply_projective(p, x0.as_vector()?)?),
            Composed::Cong(g) => {
                let gp = g * x0.as_matrix()? * g.transpose();
                Point::Matrix((&gp + gp.transpose()) * 0.5)
            }
            Composed::Mob(t) => Point::Disk(t.map().apply(x0.as_disk()?)),
        })
    }

    /// `d(x0, C x0)`, with the boundary-stable route for Moebius products.
    pub(crate) fn distance_to_image(&self, kind: &SpaceKind, x0: &Point) -> Result<f64> {
        match self {
            Composed::Mob(t) => t.distance_from(x0.as_disk()?),
            Composed::Pos(p) => Ok(hilbert_distance(x0.as_vector()?, &(p * x0.as_vector()?))),
            _ => {
                let image = self.apply(x0)?;
                dist_unchecked(kind, x0, &image)
            }
        }
    }
}

/// Moebius prefix product with a stably tracked Hermitian form.
///
/// If `M` is the stored (max-magnitude-one) coefficient matrix, the form
/// `H = M^* J M` with `J = diag(-1, 1)` satisfies
/// `1 - |phi(z)|^2 = (v^* H v) / |c z + d|^2` for `v = (z, 1)`. Composition
/// updates `H` by congruence, which for products of disk automorphisms is
/// multiplicative and never cancels — unlike evaluating `|d|^2 - |b|^2`
/// from the rounded coefficients, which loses everything once the entries
/// dwarf the determinant.
#[derive(Debug, Clone)]
pub(crate) struct MobiusTracker {
    m: MobiusMap,
    tau: f64,
    sigma: f64,
    chi: Complex64,
    log_h: f64,
}

impl MobiusTracker {
    pub(crate) fn identity() -> Self {
        MobiusTracker {
            m: MobiusMap::identity(),
            tau: -1.0,
            sigma: 1.0,
            chi: Complex64::new(0.0, 0.0),
            log_h: 0.0,
        }
    }

    pub(crate) fn map(&self) -> &MobiusMap {
        &self.m
    }

    pub(crate) fn compose_right(&mut self, f: &MobiusMap) {
        let (p, q, r, s) = (f.a, f.b, f.c, f.d);
        // Raw coefficient product, then renormalize to unit max magnitude.
        let a = self.m.a * p + self.m.b * r;
        let b = self.m.a * q + self.m.b * s;
        let c = self.m.c * p + self.m.d * r;
        let d = self.m.c * q + self.m.d * s;
        let lambda = a.norm().max(b.norm()).max(c.norm()).max(d.norm());
        self.m = MobiusMap { a: a / lambda, b: b / lambda, c: c / lambda, d: d / lambda };

        // Congruence update H' = F^* H F, rescaled to the stored matrix.
        let tau = p.norm_sqr() * self.tau
            + r.norm_sqr() * self.sigma
            + 2.0 * (p.conj() * r * self.chi).re;
        let sigma = q.norm_sqr() * self.tau
            + s.norm_sqr() * self.sigma
            + 2.0 * (q.conj() * s * self.chi).re;
        let chi = p.conj() * q * self.tau
            + r.conj() * s * self.sigma
            + p.conj() * s * self.chi
            + r.conj() * q * self.chi.conj();
        let scale = tau.abs().max(sigma.abs()).max(chi.norm());
        if scale > 0.0 {
            self.tau = tau / scale;
            self.sigma = sigma / scale;
            self.chi = chi / scale;
            self.log_h += scale.ln() - 2.0 * lambda.ln();
        } else {
            self.tau = 0.0;
            self.sigma = 0.0;
            self.chi = Complex64::new(0.0, 0.0);
            self.log_h = f64::NEG_INFINITY;
        }
    }

    /// `ln(1 - |phi(z)|^2)` through the tracked form.
    fn log_one_minus_image_sq(&self, z: Complex64) -> Result<f64> {
        let v = self.tau * z.norm_sqr() + 2.0 * (self.chi * z.conj()).re + self.sigma;
        if !(v > 0.0) {
            return Err(Error::Numerical(
                "moebius orbit point left the disk numerically".into(),
            ));
        }
        let den = (self.m.c * z + self.m.d).norm();
        Ok(self.log_h + v.ln() - 2.0 * den.ln())
    }

    /// Hyperbolic `d(z, phi(z))`, stable arbitrarily close to the boundary.
    pub(crate) fn distance_from(&self, z: Complex64) -> Result<f64> {
        let w = self.m.apply(z);
        let num = (z - w).norm();
        if num == 0.0 {
            return Ok(0.0);
        }
        let den = (Complex64::new(1.0, 0.0) - z.conj() * w).norm();
        if !(den > 0.0) {
            return Err(Error::Numerical("degenerate moebius distance".into()));
        }
        let t = (num / den).min(1.0);
        // 1 - t^2 = (1 - |z|^2)(1 - |w|^2) / |1 - conj(z) w|^2.
        let log_one_minus_t2 =
            (1.0 - z.norm_sqr()).ln() + self.log_one_minus_image_sq(z)? - 2.0 * den.ln();
        Ok(2.0 * (1.0 + t).ln() - log_one_minus_t2)
    }
}
