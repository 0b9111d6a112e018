//! Metric functionals: internal points and their horofunction limits.
//!
//! For a based metric space `(X, d, x0)` every point `x` induces the
//! 1-Lipschitz functional `h_x(y) = d(y, x) - d(x0, x)` with `h_x(x0) = 0`.
//! The closure of `{h_x}` in the topology of pointwise convergence is
//! compact (a Tychonoff argument), and its elements — metric functionals —
//! play the role Hahn–Banach norming functionals play in Banach spaces.
//! Besides internal points we materialize three boundary families in closed
//! form: disk Busemann functions, linear functionals of dual norm at most
//! one on a normed space, and trace pairings `y -> -Tr(Q log y)` on the
//! positive-definite cone.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spaces::banach::DualVector;
use crate::spaces::{disk, distance, posdef, validate_point, Point, SpaceKind};

/// How a metric functional was realized.
#[derive(Debug, Clone)]
pub enum Provenance {
    /// `h_x(y) = d(y, x) - d(x0, x)` for an internal point `x`.
    Internal { x: Point },
    /// Busemann function of a boundary point of the disk.
    DiskBoundary { xi: Complex64 },
    /// `h(y) = -f(y - x0)` for a linear functional of dual norm <= 1.
    Dual { f: DualVector },
    /// `h(y) = -Tr(Q (log y - log x0))` with `Q` of trace norm <= 1.
    TracePairing { q: DMatrix<f64> },
}

/// A based 1-Lipschitz functional vanishing at the basepoint.
#[derive(Debug, Clone)]
pub struct MetricFunctional {
    pub kind: SpaceKind,
    pub basepoint: Point,
    pub provenance: Provenance,
}

/// The functional induced by an internal point.
pub fn internal_functional(kind: SpaceKind, x: &Point, basepoint: &Point) -> Result<MetricFunctional> {
    validate_point(&kind, x)?;
    validate_point(&kind, basepoint)?;
    Ok(MetricFunctional {
        kind,
        basepoint: basepoint.clone(),
        provenance: Provenance::Internal { x: x.clone() },
    })
}

impl MetricFunctional {
    pub fn disk_boundary(xi: Complex64, basepoint: &Point) -> Result<Self> {
        if (xi.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("boundary point must sit on the unit circle".into()));
        }
        let kind = SpaceKind::PoincareDisk;
        validate_point(&kind, basepoint)?;
        Ok(MetricFunctional { kind, basepoint: basepoint.clone(), provenance: Provenance::DiskBoundary { xi } })
    }

    pub fn dual(kind: SpaceKind, f: DualVector, basepoint: &Point) -> Result<Self> {
        validate_point(&kind, basepoint)?;
        if f.dual_norm() > 1.0 + 1e-9 {
            return Err(Error::Domain(format!(
                "dual functional must have norm <= 1, got {}",
                f.dual_norm()
            )));
        }
        Ok(MetricFunctional { kind, basepoint: basepoint.clone(), provenance: Provenance::Dual { f } })
    }

    pub fn trace_pairing(kind: SpaceKind, q: DMatrix<f64>, basepoint: &Point) -> Result<Self> {
        validate_point(&kind, basepoint)?;
        Ok(MetricFunctional { kind, basepoint: basepoint.clone(), provenance: Provenance::TracePairing { q } })
    }

    /// Evaluate the functional at `y`.
    pub fn eval(&self, y: &Point) -> Result<f64> {
        match &self.provenance {
            Provenance::Internal { x } => {
                let to_x = distance(&self.kind, y, x)?;
                let base = distance(&self.kind, &self.basepoint, x)?;
                Ok(to_x - base)
            }
            Provenance::DiskBoundary { xi } => {
                let z = y.as_disk()?;
                let b = disk::disk_busemann(*xi, z)?;
                let at_base = disk::disk_busemann(*xi, self.basepoint.as_disk()?)?;
                Ok(b - at_base)
            }
            Provenance::Dual { f } => {
                let v = y.as_vector()?;
                let base = self.basepoint.as_vector()?;
                Ok(f.apply(base) - f.apply(v))
            }
            Provenance::TracePairing { q } => {
                validate_point(&self.kind, y)?;
                let log_y = posdef::sym_log(y.as_matrix()?)?;
                let log_base = posdef::sym_log(self.basepoint.as_matrix()?)?;
                let diff = log_y - log_base;
                Ok(-(q * diff).trace())
            }
        }
    }
}
