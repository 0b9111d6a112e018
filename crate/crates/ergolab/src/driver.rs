//! Ergodic symbol streams with two-sided indexing.
//!
//! A driver models a measure-preserving system `(Omega, T, mu)` through the
//! symbol sequence it emits: `symbol(k)` is the coding of `T^k omega` for
//! `k` in `Z`. Negative indices make the stream a concrete natural extension,
//! which is what cocycle reversal needs. Four drivers are provided:
//!
//! - `Iid`: independent draws from a fixed law;
//! - `Markov`: a stationary chain extended backwards by its time reversal
//!   `P(X_{k-1} = j | X_k = i) = pi_j P_{ji} / pi_i`;
//! - `Rotation`: coding of an irrational circle rotation by a finite interval
//!   partition (uniquely ergodic, zero entropy);
//! - `Deterministic`: an explicit periodic sequence for exact fixtures.
//!
//! Every symbol is a pure function of `(spec, seed, index)`. The Markov
//! window is materialized lazily but its content never depends on the order
//! of queries, only on how far each side has been extended.

use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::rng;

/// Stochastic-matrix row sums must match 1 this tightly.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// An angle for the rotation driver. Irrational constants are stored as
/// named values so no decimal truncation sneaks in through a config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    /// `(sqrt(5) - 1) / 2`, the golden rotation.
    Golden,
    /// `sqrt(2) - 1`.
    SilverRatio,
    Literal(f64),
}

impl Angle {
    pub fn value(self) -> f64 {
        match self {
            Angle::Golden => (5f64.sqrt() - 1.0) / 2.0,
            Angle::SilverRatio => 2f64.sqrt() - 1.0,
            Angle::Literal(a) => a,
        }
    }
}

#[derive(Debug, Clone)]
pub enum DriverKind {
    Iid {
        probs: Vec<f64>,
    },
    Markov {
        matrix: Vec<Vec<f64>>,
        /// Draw `X_0` from the stationary law (true) or pin it to state 0.
        stationary_start: bool,
    },
    Rotation {
        angle: Angle,
        /// Strictly increasing breakpoints in `[0, 1)`. Cell `i` is
        /// `[b_i, b_{i+1})`; the last cell wraps around through 1.
        breakpoints: Vec<f64>,
    },
    Deterministic {
        sequence: Vec<u32>,
    },
}

/// Validated driver description.
#[derive(Debug, Clone)]
pub struct DriverSpec {
    kind: DriverKind,
    alphabet_size: usize,
}

impl DriverSpec {
    pub fn new(kind: DriverKind) -> Result<Self> {
        let alphabet_size = match &kind {
            DriverKind::Iid { probs } => {
                if probs.is_empty() {
                    return Err(Error::InvalidSpec("iid law needs at least one symbol".into()));
                }
                if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidSpec("iid probabilities must be nonnegative".into()));
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidSpec(format!(
                        "iid probabilities sum to {s}, expected 1"
                    )));
                }
                probs.len()
            }
            DriverKind::Markov { matrix, .. } => {
                let d = matrix.len();
                if d == 0 {
                    return Err(Error::InvalidSpec("markov matrix is empty".into()));
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != d {
                        return Err(Error::InvalidSpec(format!(
                            "markov row {i} has length {}, expected {d}",
                            row.len()
                        )));
                    }
                    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                        return Err(Error::InvalidSpec(format!("markov row {i} has invalid entries")));
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > ROW_SUM_TOL {
                        return Err(Error::InvalidSpec(format!(
                            "markov row {i} sums to {s}, expected 1"
                        )));
                    }
                }
                if !irreducible(matrix) {
                    return Err(Error::InvalidSpec(
                        "markov matrix is reducible: some state cannot reach some other state".into(),
                    ));
                }
                d
            }
            DriverKind::Rotation { breakpoints, angle } => {
                if breakpoints.is_empty() {
                    return Err(Error::InvalidSpec("rotation needs at least one breakpoint".into()));
                }
                let a = angle.value();
                if !a.is_finite() {
                    return Err(Error::InvalidSpec("rotation angle must be finite".into()));
                }
                for w in breakpoints.windows(2) {
                    if w[0] >= w[1] {
                        return Err(Error::InvalidSpec(
                            "rotation breakpoints must be strictly increasing".into(),
                        ));
                    }
                }
                let first = breakpoints[0];
                let last = *breakpoints.last().unwrap();
                if !(0.0..1.0).contains(&first) || !(0.0..1.0).contains(&last) {
                    return Err(Error::InvalidSpec("rotation breakpoints must lie in [0, 1)".into()));
                }
                breakpoints.len()
            }
            DriverKind::Deterministic { sequence } => {
                if sequence.is_empty() {
                    return Err(Error::InvalidSpec("deterministic sequence is empty".into()));
                }
                *sequence.iter().max().unwrap() as usize + 1
            }
        };
        Ok(Self { kind, alphabet_size })
    }

    pub fn kind(&self) -> &DriverKind {
        &self.kind
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Stable content hash used for cache keys; hashes exact bit patterns.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x100_0000_01b3);
        };
        match &self.kind {
            DriverKind::Iid { probs } => {
                eat(1);
                probs.iter().for_each(|p| eat(p.to_bits()));
            }
            DriverKind::Markov { matrix, stationary_start } => {
                eat(2);
                eat(*stationary_start as u64);
                matrix.iter().flatten().for_each(|p| eat(p.to_bits()));
            }
            DriverKind::Rotation { angle, breakpoints } => {
                eat(3);
                eat(angle.value().to_bits());
                breakpoints.iter().for_each(|b| eat(b.to_bits()));
            }
            DriverKind::Deterministic { sequence } => {
                eat(4);
                sequence.iter().for_each(|s| eat(*s as u64));
            }
        }
        h
    }
}

/// Strong connectivity of the directed graph of positive transitions.
fn irreducible(matrix: &[Vec<f64>]) -> bool {
    let d = matrix.len();
    let reach = |from: usize, transpose: bool| -> Vec<bool> {
        let mut seen = vec![false; d];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(i) = stack.pop() {
            for j in 0..d {
                let p = if transpose { matrix[j][i] } else { matrix[i][j] };
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    reach(0, false).iter().all(|&b| b) && reach(0, true).iter().all(|&b| b)
}

/// Stationary distribution by power iteration on the transpose.
fn stationary(matrix: &[Vec<f64>]) -> Vec<f64> {
    let d = matrix.len();
    let mut pi = vec![1.0 / d as f64; d];
    for _ in 0..20_000 {
        let mut next = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                next[j] += pi[i] * matrix[i][j];
            }
        }
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= s);
    pi
}

fn cdf(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(row.len());
    for p in row {
        acc += p;
        out.push(acc);
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn draw(cdf: &[f64], u: f64) -> u32 {
    cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1) as u32
}

/// Lazily realized two-sided Markov window around index 0.
#[derive(Debug)]
struct MarkovWindow {
    fwd: Vec<u32>, // states at indices 0, 1, 2, ...
    bwd: Vec<u32>, // states at indices -1, -2, ...
}

#[derive(Debug)]
enum Gen {
    Iid {
        cdf: Vec<f64>,
    },
    Markov {
        step_cdf: Vec<Vec<f64>>,
        rev_cdf: Vec<Vec<f64>>,
        init_cdf: Vec<f64>,
        stationary_start: bool,
        window: Mutex<MarkovWindow>,
    },
    Rotation {
        angle: f64,
        phase: f64,
        breakpoints: Vec<f64>,
    },
    Det {
        sequence: Vec<u32>,
    },
}

#[derive(Debug)]
struct PathEngine {
    spec: DriverSpec,
    seed: u64,
    gen: Gen,
}

const TAG_INIT: u64 = 0x11;
const TAG_FWD: u64 = 0x22;
const TAG_BWD: u64 = 0x33;
const TAG_PHASE: u64 = 0x44;

impl PathEngine {
    fn new(spec: DriverSpec, seed: u64) -> Self {
        let gen = match spec.kind() {
            DriverKind::Iid { probs } => Gen::Iid { cdf: cdf(probs) },
            DriverKind::Markov { matrix, stationary_start } => {
                let pi = stationary(matrix);
                let d = matrix.len();
                // Reversed kernel: from state i one step into the past.
                let mut rev = vec![vec![0.0; d]; d];
                for i in 0..d {
                    for j in 0..d {
                        rev[i][j] = pi[j] * matrix[j][i] / pi[i];
                    }
                }
                Gen::Markov {
                    step_cdf: matrix.iter().map(|r| cdf(r)).collect(),
                    rev_cdf: rev.iter().map(|r| cdf(r)).collect(),
                    init_cdf: cdf(&pi),
                    stationary_start: *stationary_start,
                    window: Mutex::new(MarkovWindow { fwd: Vec::new(), bwd: Vec::new() }),
                }
            }
            DriverKind::Rotation { angle, breakpoints } => Gen::Rotation {
                angle: angle.value(),
                phase: rng::uniform(rng::substream(seed, TAG_PHASE), 0),
                breakpoints: breakpoints.clone(),
            },
            DriverKind::Deterministic { sequence } => Gen::Det { sequence: sequence.clone() },
        };
        Self { spec, seed, gen }
    }

    fn symbol_at(&self, k: i64) -> u32 {
        match &self.gen {
            Gen::Iid { cdf } => draw(cdf, rng::uniform(self.seed, k)),
            Gen::Rotation { angle, phase, breakpoints } => {
                let x = (phase + k as f64 * angle).rem_euclid(1.0);
                // Last cell wraps through 1 back to breakpoints[0].
                if x < breakpoints[0] {
                    (breakpoints.len() - 1) as u32
                } else {
                    (breakpoints.iter().rposition(|b| *b <= x).unwrap()) as u32
                }
            }
            Gen::Det { sequence } => sequence[(k.rem_euclid(sequence.len() as i64)) as usize],
            Gen::Markov { step_cdf, rev_cdf, init_cdf, stationary_start, window } => {
                let mut w = window.lock().unwrap();
                if w.fwd.is_empty() {
                    let x0 = if *stationary_start {
                        draw(init_cdf, rng::uniform(rng::substream(self.seed, TAG_INIT), 0))
                    } else {
                        0
                    };
                    w.fwd.push(x0);
                }
                if k >= 0 {
                    let k = k as usize;
                    while w.fwd.len() <= k {
                        let i = w.fwd.len();
                        let prev = w.fwd[i - 1] as usize;
                        let u = rng::uniform(rng::substream(self.seed, TAG_FWD), i as i64);
                        w.fwd.push(draw(&step_cdf[prev], u));
                    }
                    w.fwd[k]
                } else {
                    let depth = (-k) as usize;
                    while w.bwd.len() < depth {
                        let i = w.bwd.len();
                        let cur = if i == 0 { w.fwd[0] } else { w.bwd[i - 1] } as usize;
                        let u = rng::uniform(rng::substream(self.seed, TAG_BWD), (i + 1) as i64);
                        w.bwd.push(draw(&rev_cdf[cur], u));
                    }
                    w.bwd[depth - 1]
                }
            }
        }
    }
}

/// A realized stream: a shared engine plus an integer shift. Shifting is
/// O(1) and shares the underlying lazy window.
#[derive(Debug, Clone)]
pub struct OmegaPath {
    engine: Arc<PathEngine>,
    offset: i64,
}

/// Sample a path for `(spec, seed)`. The `horizon` argument is a sizing
/// hint; windows extend lazily on both sides regardless.
pub fn sample_path(spec: &DriverSpec, seed: u64, _horizon: usize) -> OmegaPath {
    OmegaPath {
        engine: Arc::new(PathEngine::new(spec.clone(), seed)),
        offset: 0,
    }
}

impl OmegaPath {
    /// Symbol coding `T^(offset + i) omega`.
    pub fn symbol(&self, i: i64) -> u32 {
        self.engine.symbol_at(self.offset + i)
    }

    /// The path of `T^k omega`: same engine, shifted origin.
    pub fn shift(&self, k: i64) -> OmegaPath {
        OmegaPath {
            engine: Arc::clone(&self.engine),
            offset: self.offset + k,
        }
    }

    pub fn seed(&self) -> u64 {
        self.engine.seed
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn spec(&self) -> &DriverSpec {
        &self.engine.spec
    }

    pub fn alphabet_size(&self) -> usize {
        self.engine.spec.alphabet_size()
    }

    /// Identity of the underlying realization, offset included; two paths
    /// with equal ids produce identical symbols at every index.
    pub fn id(&self) -> (u64, i64) {
        (self.engine.spec.fingerprint() ^ self.engine.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15), self.offset)
    }

    /// `(1/n) sum_{k=0}^{n-1} f(symbol(k))`.
    pub fn birkhoff_average(&self, f: impl Fn(u32) -> f64, n: usize) -> f64 {
        assert!(n > 0, "birkhoff average needs n >= 1");
        let mut acc = 0.0;
        for k in 0..n {
            acc += f(self.symbol(k as i64));
        }
        acc / n as f64
    }
}
