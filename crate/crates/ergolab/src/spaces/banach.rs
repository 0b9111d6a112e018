//! Norms, operator norms, and norming functionals on `R^d`.
//!
//! A norming functional of `x != 0` is an `f` in the dual unit sphere with
//! `f(x) = ||x||` (Hahn-Banach guarantees one exists). For the three norms
//! here they have closed forms; ties in `linf` are broken at the lowest
//! maximal coordinate so results are deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    /// The dual norm: `l1 <-> linf`, `l2` self-dual.
    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::Linf,
            NormKind::L2 => NormKind::L2,
            NormKind::Linf => NormKind::L1,
        }
    }
}

pub fn norm(kind: NormKind, v: &DVector<f64>) -> f64 {
    match kind {
        NormKind::L1 => v.iter().map(|t| t.abs()).sum(),
        NormKind::L2 => v.norm(),
        NormKind::Linf => v.iter().fold(0.0f64, |m, t| m.max(t.abs())),
    }
}

pub(crate) fn norm_of_diff(kind: NormKind, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    match kind {
        NormKind::L1 => a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum(),
        NormKind::L2 => a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        NormKind::Linf => a
            .iter()
            .zip(b.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs())),
    }
}

/// Operator norm of `M` as a map of `(R^d, kind)` to itself.
pub fn operator_norm(kind: NormKind, m: &DMatrix<f64>) -> f64 {
    match kind {
        // Max absolute column sum.
        NormKind::L1 => (0..m.ncols())
            .map(|j| m.column(j).iter().map(|t| t.abs()).sum::<f64>())
            .fold(0.0f64, f64::max),
        NormKind::L2 => m
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0f64, |a, s| a.max(*s)),
        // Max absolute row sum.
        NormKind::Linf => (0..m.nrows())
            .map(|i| m.row(i).iter().map(|t| t.abs()).sum::<f64>())
            .fold(0.0f64, f64::max),
    }
}

/// A vector in the dual space, tagged with the primal norm it is dual to.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub coeffs: DVector<f64>,
    pub primal: NormKind,
}

impl DualVector {
    pub fn apply(&self, y: &DVector<f64>) -> f64 {
        self.coeffs.dot(y)
    }

    pub fn dual_norm(&self) -> f64 {
        norm(self.primal.dual(), &self.coeffs)
    }

    pub fn negate(&self) -> DualVector {
        DualVector {
            coeffs: -&self.coeffs,
            primal: self.primal,
        }
    }

    /// Rescale to dual norm one.
    pub fn normalized(&self) -> Result<DualVector> {
        let s = self.dual_norm();
        if s < 1e-300 {
            return Err(Error::Numerical("cannot normalize a zero dual vector".into()));
        }
        Ok(DualVector {
            coeffs: &self.coeffs / s,
            primal: self.primal,
        })
    }
}

/// Closed-form norming functional of a nonzero vector.
pub fn norming_functional(kind: NormKind, x: &DVector<f64>) -> Result<DualVector> {
    let n = norm(kind, x);
    if n == 0.0 {
        return Err(Error::Domain(
            "norming functional of the zero vector is undefined".into(),
        ));
    }
    let coeffs = match kind {
        NormKind::L2 => x / n,
        // Dual linf vector of signs: f(y) = sum sign(x_i) y_i.
        NormKind::L1 => DVector::from_iterator(
            x.len(),
            x.iter().map(|t| {
                if *t > 0.0 {
                    1.0
                } else if *t < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }),
        ),
        // Dual l1 vector supported on the first maximal coordinate.
        NormKind::Linf => {
            let mut best = 0usize;
            for i in 1..x.len() {
                if x[i].abs() > x[best].abs() {
                    best = i;
                }
            }
            let mut e = DVector::zeros(x.len());
            e[best] = x[best].signum();
            e
        }
    };
    Ok(DualVector { coeffs, primal: kind })
}
