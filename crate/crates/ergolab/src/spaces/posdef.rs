//! Symmetric positive-definite matrices with affine-invariant log metrics.
//!
//! For `p, q` positive definite let `lambda_i` be the eigenvalues of
//! `p^{-1/2} q p^{-1/2}` (equivalently of `p^{-1} q`). Two metrics are
//! supported:
//!
//! * `OperatorLog` (Thompson): `d(p, q) = max_i |ln lambda_i|`,
//! * `FrobeniusLog`: `d(p, q) = sqrt(sum_i ln^2 lambda_i)`.
//!
//! Both are invariant under the congruence action `p -> g p g^T` of the
//! general linear group, which is how semigroups of isometries act here.
//! The matrix exponential from symmetric matrices (with the matching norm)
//! into the cone is semi-expansive — Segal's inequality in metric form —
//! which the tests exercise directly.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which length is assigned to relative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosdefMetric {
    OperatorLog,
    FrobeniusLog,
}

const SYM_TOL: f64 = 1e-9;
const MAX_RELATIVE_CONDITION: f64 = 1e24;

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn validate_spd(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidSpec("positive-definite point must be square".into()));
    }
    if m.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("matrix entries must be finite".into()));
    }
    let scale = m.iter().fold(0.0_f64, |acc, t| acc.max(t.abs())).max(1.0);
    if asymmetry(m) > SYM_TOL * scale {
        return Err(Error::Domain("matrix is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain("matrix is not positive definite".into()));
    }
    Ok(())
}

/// Spectral function applied to a symmetric matrix: `U f(diag) U^T`.
fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let u = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    symmetrize(&(u * d * u.transpose()))
}

/// Principal matrix logarithm of a positive-definite matrix.
pub fn sym_log(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain(
            "matrix logarithm requires strictly positive eigenvalues".into(),
        ));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::ln));
    Ok(symmetrize(&(&eig.eigenvectors * d * eig.eigenvectors.transpose())))
}

/// Matrix exponential of a symmetric matrix; always positive definite.
pub fn sym_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, f64::exp)
}

/// Positive part `(v^T v)^{1/2}` of an invertible matrix, i.e. the factor
/// `p` in the polar decomposition `v = u p`. Errors out when `v` is too
/// ill-conditioned for the eigenvalues of `v^T v` to be trustworthy.
pub fn positive_part(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = v.transpose() * v;
    let eig = SymmetricEigen::new(symmetrize(&s));
    let max_e = eig.eigenvalues.max();
    let min_e = eig.eigenvalues.min();
    if !(min_e > 0.0) || !max_e.is_finite() {
        return Err(Error::Numerical("positive part of a singular matrix".into()));
    }
    if max_e / min_e > MAX_RELATIVE_CONDITION {
        return Err(Error::Numerical(format!(
            "matrix too ill-conditioned for a direct positive part (cond^2 ~ {:.2e})",
            max_e / min_e
        )));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(symmetrize(&(&eig.eigenvectors * d * eig.eigenvectors.transpose())))
}

/// Eigenvalues of `p^{-1/2} q p^{-1/2}`, ascending.
fn relative_eigenvalues(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig_p = SymmetricEigen::new(symmetrize(p));
    if eig_p.eigenvalues.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Domain("base point is not positive definite".into()));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig_p.eigenvalues.map(|e| e.powf(-0.5)));
    let w = &inv_sqrt * eig_p.eigenvectors.transpose() * q * &eig_p.eigenvectors * &inv_sqrt;
    let eig_w = SymmetricEigen::new(symmetrize(&w));
    let mut vals: Vec<f64> = eig_w.eigenvalues.iter().copied().collect();
    if vals.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Domain("second point is not positive definite".into()));
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

pub(crate) fn posdef_distance(metric: PosdefMetric, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    let vals = relative_eigenvalues(p, q)?;
    Ok(match metric {
        PosdefMetric::OperatorLog => vals
            .iter()
            .map(|l| l.ln().abs())
            .fold(0.0, f64::max),
        PosdefMetric::FrobeniusLog => vals.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt(),
    })
}

/// Norm on symmetric matrices matching a cone metric: operator norm
/// (largest absolute eigenvalue) or Frobenius norm.
pub fn sym_norm(metric: PosdefMetric, m: &DMatrix<f64>) -> f64 {
    match metric {
        PosdefMetric::OperatorLog => {
            let eig = SymmetricEigen::new(symmetrize(m));
            eig.eigenvalues.iter().fold(0.0, |acc, e| acc.max(e.abs()))
        }
        PosdefMetric::FrobeniusLog => m.norm(),
    }
}
