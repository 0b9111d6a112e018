//! Hilbert projective metric on the open positive cone.
//!
//! For `x, y` with strictly positive entries,
//! `d(x, y) = ln (max_i x_i/y_i) + ln (max_j y_j/x_j)`.
//! The distance is invariant under scaling either argument, so it is a
//! genuine metric only on rays; we work with representatives normalized to
//! `max = 1`. Matrices with positive entries act as strict contractions
//! (Birkhoff), and nonnegative matrices with a finite positive row structure
//! act as nonexpansive maps.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Hilbert projective distance between positive vectors.
pub fn hilbert_distance(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut max_ratio = f64::NEG_INFINITY;
    let mut min_ratio = f64::INFINITY;
    for i in 0..x.len() {
        let r = x[i] / y[i];
        max_ratio = max_ratio.max(r);
        min_ratio = min_ratio.min(r);
    }
    (max_ratio / min_ratio).ln()
}

/// Apply a nonnegative matrix projectively: multiply, then rescale so the
/// largest coordinate is 1. Rescaling keeps long orbits inside f64 range
/// without changing the projective point.
pub fn apply_projective(m: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    let y = m * x;
    let top = y.max();
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::Numerical(
            "projective image left the open cone".into(),
        ));
    }
    Ok(y / top)
}
