//! ergolab: a numerical laboratory for subadditive cocycles over ergodic
//! symbol streams.
//!
//! The crate is organized around one experimental pipeline:
//!
//! 1. [`driver`] produces two-sided stationary symbol streams (iid, Markov,
//!    circle rotation, explicit sequences) with counter-based seeding, so any
//!    symbol is a pure function of `(spec, seed, index)`.
//! 2. [`spaces`] provides metric spaces acted on by nonexpansive map families
//!    (Banach norms, max-plus, Hilbert cones, positive-definite matrices, the
//!    Poincare disk) together with metric and dual functionals.
//! 3. [`subadd`] evaluates subadditive cocycles along streams, estimates the
//!    drift `A = lim a(n)/n`, calibrates tolerance schedules, and detects
//!    "good times": indices where the cocycle is nearly additive across every
//!    suffix lag simultaneously.
//! 4. [`meten`] turns good times into limit objects: metric functionals with
//!    `-h(x_n)/n -> A`, norm-one dual vectors on Banach orbits, mean ergodic
//!    averages for operator cocycles, and boundary limits on the disk.
//! 5. [`oseledets`] runs matrix cocycles in a numerically stabilized form,
//!    extracts `log` of the positive part, trace-pairing functionals, and a
//!    QR-based Lyapunov spectrum oracle.
//! 6. [`cli`] wires everything into reproducible, file-driven experiments.

pub mod cli;
pub mod driver;
pub mod error;
pub mod meten;
pub mod oseledets;
pub mod rng;
pub mod spaces;
pub mod subadd;

pub use error::{Error, Result};

/// Absolute slack used when checking exact identities in floating point.
pub const TOL_EXACT: f64 = 1e-9;
