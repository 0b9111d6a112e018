//! Poincare disk: hyperbolic distance, horofunctions, and holomorphic
//! self-maps.
//!
//! With `t = |z - w| / |1 - conj(z) w|` the distance is
//! `d(z, w) = ln((1 + t)/(1 - t))` (curvature -1 normalization, so
//! `d(0, r) = ln((1+r)/(1-r))`). Every holomorphic self-map of the disk is
//! nonexpansive for this metric — the Schwarz–Pick lemma — which makes
//! Moebius self-maps and Blaschke products a natural semigroup of
//! semicontractions. Horofunctions based at the origin are the Busemann
//! functions `b_xi(z) = ln(|xi - z|^2 / (1 - |z|^2))` for `|xi| = 1`.
//!
//! Moebius coefficients are kept projectively: every operation renormalizes
//! by the largest coefficient magnitude, so long products of hyperbolic
//! elements never overflow even though their matrix entries grow
//! exponentially.

use num_complex::Complex64;

use crate::error::{Error, Result};

const DET_TOL: f64 = 1e-12;
const BOUNDARY_SAMPLES: usize = 256;
const SELF_MAP_TOL: f64 = 1e-9;

/// Hyperbolic distance on the open unit disk.
pub fn disk_distance(z: Complex64, w: Complex64) -> f64 {
    let t = (z - w).norm() / (Complex64::new(1.0, 0.0) - z.conj() * w).norm();
    // Clamp away rounding overshoot for near-boundary pairs.
    let t = t.min(1.0 - 1e-16);
    ((1.0 + t) / (1.0 - t)).ln()
}

/// Busemann function at the boundary point `xi`, normalized to vanish at 0:
/// `b_xi(z) = lim_{x -> xi} d(z, x) - d(0, x) = ln(|xi - z|^2 / (1 - |z|^2))`.
pub fn disk_busemann(xi: Complex64, z: Complex64) -> Result<f64> {
    if (xi.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "busemann base must sit on the unit circle, got |xi| = {}",
            xi.norm()
        )));
    }
    let num = (xi - z).norm_sqr();
    let den = 1.0 - z.norm_sqr();
    if !(den > 0.0) {
        return Err(Error::Domain("busemann argument must lie in the open disk".into()));
    }
    Ok((num / den).ln())
}

/// A Moebius transformation `z -> (a z + b) / (c z + d)`, stored up to
/// scale with coefficients renormalized to unit max magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl MobiusMap {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let mut m = MobiusMap { a, b, c, d };
        m.renormalize();
        if (m.a * m.d - m.b * m.c).norm() < DET_TOL {
            return Err(Error::InvalidSpec("moebius map is singular".into()));
        }
        Ok(m)
    }

    fn renormalize(&mut self) {
        let scale = self
            .a
            .norm()
            .max(self.b.norm())
            .max(self.c.norm())
            .max(self.d.norm());
        if scale > 0.0 {
            self.a /= scale;
            self.b /= scale;
            self.c /= scale;
            self.d /= scale;
        }
    }

    pub fn identity() -> Self {
        MobiusMap {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    /// Rotation about the origin by `theta`.
    pub fn rotation(theta: f64) -> Self {
        MobiusMap {
            a: Complex64::from_polar(1.0, theta),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    /// Disk automorphism `z -> e^{i theta} (z - center) / (1 - conj(center) z)`.
    pub fn automorphism(center: Complex64, theta: f64) -> Result<Self> {
        if center.norm() >= 1.0 {
            return Err(Error::InvalidSpec("automorphism center must lie in the open disk".into()));
        }
        let rot = Complex64::from_polar(1.0, theta);
        MobiusMap::new(rot, -rot * center, -center.conj(), Complex64::new(1.0, 0.0))
    }

    /// Parabolic automorphism fixing the boundary point 1, conjugate under
    /// the Cayley transform to the translation `w -> w + t` of the upper
    /// half-plane.
    pub fn parabolic(t: f64) -> Self {
        let half = Complex64::new(0.0, t / 2.0);
        let one = Complex64::new(1.0, 0.0);
        let mut m = MobiusMap { a: one + half, b: -half, c: half, d: one - half };
        m.renormalize();
        m
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// `self` after `rhs`: matrix product of the coefficient matrices.
    pub fn compose(&self, rhs: &MobiusMap) -> MobiusMap {
        let mut m = MobiusMap {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        };
        m.renormalize();
        m
    }

    pub fn inverse(&self) -> MobiusMap {
        let mut m = MobiusMap { a: self.d, b: -self.b, c: -self.c, d: self.a };
        m.renormalize();
        m
    }

    /// Check that the map sends the open disk into itself (hence is
    /// nonexpansive by Schwarz–Pick): the pole must sit outside the closed
    /// disk and the image of the unit circle inside the closed disk.
    pub fn validate_self_map(&self) -> Result<()> {
        if self.c.norm() > 0.0 {
            let pole = (-self.d / self.c).norm();
            if pole < 1.0 - SELF_MAP_TOL {
                return Err(Error::InvalidSpec(
                    "moebius map has a pole inside the disk".into(),
                ));
            }
        }
        for k in 0..BOUNDARY_SAMPLES {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / (BOUNDARY_SAMPLES as f64);
            let z = Complex64::from_polar(1.0, theta);
            let w = self.apply(z);
            if !w.norm().is_finite() || w.norm() > 1.0 + SELF_MAP_TOL {
                return Err(Error::InvalidSpec(format!(
                    "moebius map sends the circle outside the disk (|image| = {})",
                    w.norm()
                )));
            }
        }
        Ok(())
    }
}

/// Finite Blaschke product `z -> e^{i phase} prod_i (z - a_i)/(1 - conj(a_i) z)`.
/// With two or more zeros these are genuinely nonlinear holomorphic
/// self-maps, still nonexpansive by Schwarz–Pick.
#[derive(Debug, Clone, PartialEq)]
pub struct BlaschkeProduct {
    pub phase: f64,
    pub zeros: Vec<Complex64>,
}

impl BlaschkeProduct {
    pub fn validate(&self) -> Result<()> {
        if !self.phase.is_finite() {
            return Err(Error::InvalidSpec("blaschke phase must be finite".into()));
        }
        for (i, a) in self.zeros.iter().enumerate() {
            if !(a.norm() <= 1.0 - 1e-9) {
                return Err(Error::InvalidSpec(format!(
                    "blaschke zero {i} must lie strictly inside the disk"
                )));
            }
        }
        Ok(())
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        let mut w = Complex64::from_polar(1.0, self.phase);
        for a in &self.zeros {
            w *= (z - a) / (Complex64::new(1.0, 0.0) - a.conj() * z);
        }
        w
    }
}
