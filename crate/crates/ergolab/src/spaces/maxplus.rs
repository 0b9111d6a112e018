//! Max-plus (tropical) matrices and topical maps.
//!
//! In the max-plus semiring, addition is `max` and multiplication is `+`;
//! `-inf` plays the role of zero. A matrix with a finite entry in every row
//! defines a map of `R^d` that is monotone and commutes with adding a
//! constant to every coordinate (additively homogeneous). Any map with those
//! two properties, called topical, is nonexpansive in the sup norm:
//! `x <= y + ||x-y|| 1` pointwise, so `F x <= F y + ||x-y|| 1` and symmetrically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) fn validate_matrix(a: &DMatrix<f64>, dim: usize) -> Result<()> {
    if a.nrows() != dim || a.ncols() != dim {
        return Err(Error::InvalidSpec("max-plus matrix has wrong dimensions".into()));
    }
    if a.iter().any(|t| t.is_nan() || *t == f64::INFINITY) {
        return Err(Error::InvalidSpec(
            "max-plus entries must be finite or -inf".into(),
        ));
    }
    for i in 0..dim {
        if a.row(i).iter().all(|t| *t == f64::NEG_INFINITY) {
            return Err(Error::InvalidSpec(format!(
                "max-plus row {i} is identically -inf; the map would leave R^d"
            )));
        }
    }
    Ok(())
}

/// `(A (x))_i = max_j (A_ij + x_j)`.
pub fn tropical_matvec(a: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        a.nrows(),
        (0..a.nrows()).map(|i| {
            (0..a.ncols())
                .map(|j| a[(i, j)] + x[j])
                .fold(f64::NEG_INFINITY, f64::max)
        }),
    )
}

/// Tropical matrix product `(A (B))_ij = max_k (A_ik + B_kj)`.
pub fn tropical_matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k, m) = (a.nrows(), a.ncols(), b.ncols());
    DMatrix::from_fn(n, m, |i, j| {
        (0..k)
            .map(|t| a[(i, t)] + b[(t, j)])
            .fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Tropical identity: 0 on the diagonal, -inf off it.
pub fn tropical_identity(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { f64::NEG_INFINITY })
}

/// A topical map built from closed operations: max-plus and min-plus
/// matrices are topical, and convex combinations of topical maps are
/// topical. These are used as black-box evaluators.
#[derive(Debug, Clone)]
pub enum TopicalMap {
    MaxPlus(DMatrix<f64>),
    MinPlus(DMatrix<f64>),
    Blend { a: Box<TopicalMap>, b: Box<TopicalMap>, t: f64 },
}

impl TopicalMap {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            TopicalMap::MaxPlus(m) => validate_matrix(m, dim),
            TopicalMap::MinPlus(m) => {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::InvalidSpec("min-plus matrix has wrong dimensions".into()));
                }
                if m.iter().any(|t| t.is_nan() || *t == f64::NEG_INFINITY) {
                    return Err(Error::InvalidSpec(
                        "min-plus entries must be finite or +inf".into(),
                    ));
                }
                for i in 0..dim {
                    if m.row(i).iter().all(|t| *t == f64::INFINITY) {
                        return Err(Error::InvalidSpec(format!("min-plus row {i} is identically +inf")));
                    }
                }
                Ok(())
            }
            TopicalMap::Blend { a, b, t } => {
                if !(0.0..=1.0).contains(t) {
                    return Err(Error::InvalidSpec("blend weight must lie in [0, 1]".into()));
                }
                a.validate(dim)?;
                b.validate(dim)
            }
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            TopicalMap::MaxPlus(m) => tropical_matvec(m, x),
            TopicalMap::MinPlus(m) => DVector::from_iterator(
                m.nrows(),
                (0..m.nrows()).map(|i| {
                    (0..m.ncols())
                        .map(|j| m[(i, j)] + x[j])
                        .fold(f64::INFINITY, f64::min)
                }),
            ),
            TopicalMap::Blend { a, b, t } => {
                let ya = a.apply(x);
                let yb = b.apply(x);
                &ya * *t + &yb * (1.0 - *t)
            }
        }
    }
}
