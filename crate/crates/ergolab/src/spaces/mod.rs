//! Metric spaces, nonexpansive map families, and functionals.
//!
//! Five space kinds are supported. Each comes with a distance, a point
//! validator, and at least one family of semicontractions (maps `phi` with
//! `d(phi x, phi y) <= d(x, y)`):
//!
//! | kind           | points                  | metric                          | maps                    |
//! |----------------|-------------------------|---------------------------------|-------------------------|
//! | `Banach`       | vectors in `R^d`        | `l1`/`l2`/`linf` norm           | affine, op-norm <= 1    |
//! | `MaxPlus`      | vectors in `R^d`        | sup norm                        | max-plus matrices, topical |
//! | `HilbertCone`  | positive vectors        | Hilbert projective metric       | entrywise-positive matrices |
//! | `Posdef`       | SPD matrices            | affine-invariant log metric     | congruences `P -> g P g^T` (isometries) |
//! | `PoincareDisk` | `|z| < 1` in `C`        | hyperbolic metric, `d(0,r) = log((1+r)/(1-r))` | Moebius / Blaschke (Schwarz-Pick) |

pub mod banach;
pub mod disk;
pub mod functional;
pub mod hilbert;
pub mod maxplus;
pub mod orbit;
pub mod posdef;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use banach::{norming_functional, DualVector, NormKind};
pub use disk::{disk_busemann, disk_distance, BlaschkeProduct, MobiusMap};
pub use functional::{internal_functional, MetricFunctional, Provenance};
pub use orbit::{CompositionOrder, Orbit, RowStrategy, SemicontractionSystem};
pub use posdef::{positive_part, sym_exp, sym_log, PosdefMetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Banach { dim: usize, norm: NormKind },
    MaxPlus { dim: usize },
    HilbertCone { dim: usize },
    Posdef { dim: usize, metric: PosdefMetric },
    PoincareDisk,
}

impl SpaceKind {
    pub fn describe(&self) -> String {
        match self {
            SpaceKind::Banach { dim, norm } => format!("banach(d={dim}, {norm:?})"),
            SpaceKind::MaxPlus { dim } => format!("maxplus(d={dim})"),
            SpaceKind::HilbertCone { dim } => format!("hilbert_cone(d={dim})"),
            SpaceKind::Posdef { dim, metric } => format!("posdef(d={dim}, {metric:?})"),
            SpaceKind::PoincareDisk => "poincare_disk".into(),
        }
    }
}

/// A point in one of the supported spaces.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
    Disk(Complex64),
}

impl Point {
    pub fn vector(v: &[f64]) -> Self {
        Point::Vector(DVector::from_column_slice(v))
    }

    pub fn disk(re: f64, im: f64) -> Self {
        Point::Disk(Complex64::new(re, im))
    }

    pub fn as_vector(&self) -> Result<&DVector<f64>> {
        match self {
            Point::Vector(v) => Ok(v),
            _ => Err(Error::Domain("expected a vector point".into())),
        }
    }

    pub fn as_matrix(&self) -> Result<&DMatrix<f64>> {
        match self {
            Point::Matrix(m) => Ok(m),
            _ => Err(Error::Domain("expected a matrix point".into())),
        }
    }

    pub fn as_disk(&self) -> Result<Complex64> {
        match self {
            Point::Disk(z) => Ok(*z),
            _ => Err(Error::Domain("expected a disk point".into())),
        }
    }
}

/// Check a point against a space kind.
pub fn validate_point(kind: &SpaceKind, x: &Point) -> Result<()> {
    match (kind, x) {
        (SpaceKind::Banach { dim, .. }, Point::Vector(v))
        | (SpaceKind::MaxPlus { dim }, Point::Vector(v)) => {
            if v.len() != *dim {
                return Err(Error::Domain(format!(
                    "point dimension {} does not match space dimension {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|t| !t.is_finite()) {
                return Err(Error::Domain("point has non-finite coordinates".into()));
            }
            Ok(())
        }
        (SpaceKind::HilbertCone { dim }, Point::Vector(v)) => {
            if v.len() != *dim {
                return Err(Error::Domain(format!(
                    "point dimension {} does not match cone dimension {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|t| !t.is_finite() || *t <= 0.0) {
                return Err(Error::Domain(
                    "Hilbert-cone points must be entrywise positive".into(),
                ));
            }
            Ok(())
        }
        (SpaceKind::Posdef { dim, .. }, Point::Matrix(m)) => {
            if m.nrows() != *dim || m.ncols() != *dim {
                return Err(Error::Domain(format!(
                    "matrix point is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            posdef::validate_spd(m)
        }
        (SpaceKind::PoincareDisk, Point::Disk(z)) => {
            if !z.re.is_finite() || !z.im.is_finite() || z.norm() >= 1.0 {
                return Err(Error::Domain(format!("disk point |z| = {} not < 1", z.norm())));
            }
            Ok(())
        }
        _ => Err(Error::Domain(format!(
            "point type does not match space {}",
            kind.describe()
        ))),
    }
}

/// Distance between validated points.
pub fn distance(kind: &SpaceKind, x: &Point, y: &Point) -> Result<f64> {
    validate_point(kind, x)?;
    validate_point(kind, y)?;
    dist_unchecked(kind, x, y)
}

/// Distance without revalidation; used by orbit-derived hot loops.
pub(crate) fn dist_unchecked(kind: &SpaceKind, x: &Point, y: &Point) -> Result<f64> {
    Ok(match (kind, x, y) {
        (SpaceKind::Banach { norm, .. }, Point::Vector(a), Point::Vector(b)) => {
            banach::norm_of_diff(*norm, a, b)
        }
        (SpaceKind::MaxPlus { .. }, Point::Vector(a), Point::Vector(b)) => {
            banach::norm_of_diff(NormKind::Linf, a, b)
        }
        (SpaceKind::HilbertCone { .. }, Point::Vector(a), Point::Vector(b)) => {
            hilbert::hilbert_distance(a, b)
        }
        (SpaceKind::Posdef { metric, .. }, Point::Matrix(p), Point::Matrix(q)) => {
            posdef::posdef_distance(*metric, p, q)?
        }
        (SpaceKind::PoincareDisk, Point::Disk(z), Point::Disk(w)) => disk_distance(*z, *w),
        _ => return Err(Error::Domain("mismatched point types for distance".into())),
    })
}

/// One nonexpansive map. Families must match the space kind; see
/// [`SemicontractionSystem::new`].
#[derive(Debug, Clone)]
pub enum MapElement {
    /// `x -> M x + b` on a Banach space; `M` must have operator norm at
    /// most one in the space's norm.
    Affine { m: DMatrix<f64>, b: DVector<f64> },
    /// `(A (x))_i = max_j (A_ij + x_j)` with entries in `R u {-inf}`;
    /// every row needs a finite entry.
    MaxPlusMatrix(DMatrix<f64>),
    /// A general topical map (monotone, additively homogeneous); treated as
    /// a black box by orbit acceleration.
    Topical(maxplus::TopicalMap),
    /// Entrywise-positive matrix acting projectively on the cone.
    Positive(DMatrix<f64>),
    /// `P -> g P g^T` with `g` invertible; an isometry of the SPD cone.
    Congruence(DMatrix<f64>),
    /// Holomorphic automorphism or self-map of the disk as a 2x2 complex
    /// matrix with determinant one.
    Mobius(MobiusMap),
    /// Finite Blaschke product; holomorphic self-map, not invertible for
    /// degree above one.
    Blaschke(BlaschkeProduct),
}

impl MapElement {
    pub fn translation(t: &[f64]) -> Self {
        let d = t.len();
        MapElement::Affine {
            m: DMatrix::identity(d, d),
            b: DVector::from_column_slice(t),
        }
    }

    /// Validate the element against a space kind.
    pub fn validate(&self, kind: &SpaceKind) -> Result<()> {
        match (self, kind) {
            (MapElement::Affine { m, b }, SpaceKind::Banach { dim, norm }) => {
                if m.nrows() != *dim || m.ncols() != *dim || b.len() != *dim {
                    return Err(Error::InvalidSpec("affine map has wrong dimensions".into()));
                }
                let op = banach::operator_norm(*norm, m);
                if op > 1.0 + crate::TOL_EXACT {
                    return Err(Error::InvalidSpec(format!(
                        "affine map has operator norm {op} > 1 in {norm:?}"
                    )));
                }
                Ok(())
            }
            (MapElement::MaxPlusMatrix(a), SpaceKind::MaxPlus { dim }) => {
                maxplus::validate_matrix(a, *dim)
            }
            (MapElement::Topical(t), SpaceKind::MaxPlus { dim }) => t.validate(*dim),
            (MapElement::Positive(a), SpaceKind::HilbertCone { dim }) => {
                if a.nrows() != *dim || a.ncols() != *dim {
                    return Err(Error::InvalidSpec("cone map has wrong dimensions".into()));
                }
                if a.iter().any(|t| !t.is_finite() || *t <= 0.0) {
                    return Err(Error::InvalidSpec(
                        "cone maps must have strictly positive entries".into(),
                    ));
                }
                Ok(())
            }
            (MapElement::Congruence(g), SpaceKind::Posdef { dim, .. }) => {
                if g.nrows() != *dim || g.ncols() != *dim {
                    return Err(Error::InvalidSpec("congruence has wrong dimensions".into()));
                }
                if g.clone().lu().try_inverse().is_none() {
                    return Err(Error::InvalidSpec("congruence matrix must be invertible".into()));
                }
                Ok(())
            }
            (MapElement::Mobius(m), SpaceKind::PoincareDisk) => m.validate_self_map(),
            (MapElement::Blaschke(b), SpaceKind::PoincareDisk) => b.validate(),
            _ => Err(Error::InvalidSpec(format!(
                "map family does not act on {}",
                kind.describe()
            ))),
        }
    }

    /// Apply to a point of the matching kind.
    pub fn apply(&self, x: &Point) -> Result<Point> {
        Ok(match (self, x) {
            (MapElement::Affine { m, b }, Point::Vector(v)) => Point::Vector(m * v + b),
            (MapElement::MaxPlusMatrix(a), Point::Vector(v)) => {
                Point::Vector(maxplus::tropical_matvec(a, v))
            }
            (MapElement::Topical(t), Point::Vector(v)) => Point::Vector(t.apply(v)),
            (MapElement::Positive(a), Point::Vector(v)) => {
                Point::Vector(hilbert::apply_projective(a, v)?)
            }
            (MapElement::Congruence(g), Point::Matrix(p)) => {
                let gp = g * p * g.transpose();
                // Symmetrize to suppress rounding drift in long products.
                Point::Matrix((&gp + gp.transpose()) * 0.5)
            }
            (MapElement::Mobius(f), Point::Disk(z)) => Point::Disk(f.apply(*z)),
            (MapElement::Blaschke(f), Point::Disk(z)) => Point::Disk(f.apply(*z)),
            _ => return Err(Error::Domain("map and point families differ".into())),
        })
    }
}

/// Apply a map to a point with validation against the space kind.
pub fn apply_map(kind: &SpaceKind, map: &MapElement, x: &Point) -> Result<Point> {
    validate_point(kind, x)?;
    map.validate(kind)?;
    map.apply(x)
}
