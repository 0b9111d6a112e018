//! Stabilized matrix cocycles and Lyapunov spectra.
//!
//! Products of driven invertible matrices grow exponentially, so the raw
//! product `v_n = A_{w_0} A_{w_1} .. A_{w_{n-1}}` (new factors on the right)
//! overflows `f64` after a few hundred steps. The engine instead tracks the
//! adjoint product `w_n = v_n^T = A^T_{w_{n-1}} .. A^T_{w_0}` in the scaled
//! form `w = Q diag(exp(gamma)) T`, with `Q` orthogonal, the row magnitudes
//! `gamma` held in log scale, and `T` upper triangular with unit sup-norm
//! rows. Since `w_n^T w_n = v_n v_n^T`, the positive part
//! `p_n = (v_n v_n^T)^{1/2}` of the product -- the square root of the orbit
//! point of the congruence action on the identity -- is available at any
//! time through the right singular data of `w_n`, and checkpoints report
//! `log p_n`, its eigenvalues `log sigma_i`, and the subadditive observable
//! `a_n = max_i |log sigma_i| = d(I, p_n)` in the operator-log metric.
//! This gram (rather than `v^T v`) matters for the functional pairing: the
//! eigenframe of `v_n v_n^T` is the forward flag, which stabilises as `n`
//! grows, so a functional extracted at the horizon pairs coherently with
//! every earlier checkpoint.
//!
//! A QR staircase iteration over the same adjoint products gives an
//! independent oracle for the Lyapunov spectrum; the sum of its exponents
//! satisfies an exact determinant identity that serves as a cross-check.

use nalgebra::{DMatrix, DVector};

use crate::driver::{sample_path, DriverSpec, OmegaPath};
use crate::error::{Error, Result};
use crate::subadd::cocycle::SubadditiveCocycle;

/// Fold the pending raw product into the scaled form at least this often.
const FOLD_INTERVAL: usize = 20;
/// ... or as soon as its largest entry leaves this magnitude window.
const FOLD_AMAX_HIGH: f64 = 1e120;
const FOLD_AMAX_LOW: f64 = 1e-120;

/// Largest accepted singular value of a single generator; the reciprocal
/// bounds the smallest. Together these cap the condition number at `1e12`
/// and keep every 20-step window representable in `f64`.
pub const SCALE_LIMIT: f64 = 1e6;

/// Above this spread of the log row scales, the rescaled triangle is too
/// graded for a dense SVD: `2x2` products switch to a closed-form grading,
/// larger dimensions report a numerical error.
pub const GRADED_SPREAD: f64 = 30.0;

/// A final `a_N` at or below this is treated as zero drift.
pub const TRIVIAL_DRIFT_TOL: f64 = 1e-8;

/// QR with the sign convention `diag(R) > 0`, failing on collapsed pivots.
fn qr_pos(b: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (mut q, mut r) = b.clone().qr().unpack();
    let d = r.nrows();
    for i in 0..d {
        if r[(i, i)] < 0.0 {
            for j in 0..d {
                r[(i, j)] = -r[(i, j)];
                q[(j, i)] = -q[(j, i)];
            }
        }
        if !(r[(i, i)] > 1e-300) {
            return Err(Error::Numerical(format!(
                "QR pivot {i} collapsed to {:.3e}: the matrix product is numerically singular",
                r[(i, i)]
            )));
        }
    }
    Ok((q, r))
}

/// Shared validation for a generator family.
fn validate_generators(mats: &[DMatrix<f64>]) -> Result<usize> {
    if mats.is_empty() {
        return Err(Error::InvalidSpec("the cocycle needs at least one generator".into()));
    }
    let d = mats[0].nrows();
    if d == 0 {
        return Err(Error::InvalidSpec("generators must have positive dimension".into()));
    }
    for (i, a) in mats.iter().enumerate() {
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::InvalidSpec(format!(
                "generator {i} is {}x{}, expected {d}x{d}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSpec(format!("generator {i} has non-finite entries")));
        }
        let sv = a.clone().svd(false, false).singular_values;
        let smax = sv.iter().fold(0.0f64, |m, s| m.max(*s));
        let smin = sv.iter().fold(f64::INFINITY, |m, s| m.min(*s));
        if smax > SCALE_LIMIT || smin < 1.0 / SCALE_LIMIT {
            return Err(Error::InvalidSpec(format!(
                "generator {i} has singular values in [{smin:.3e}, {smax:.3e}]; the engine \
                 accepts [{:.0e}, {SCALE_LIMIT:.0e}] (condition number at most 1e12)",
                1.0 / SCALE_LIMIT
            )));
        }
    }
    Ok(d)
}

/// Snapshot of the cocycle at time `n`.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub n: usize,
    /// `log p_n`: the symmetric logarithm of the positive part
    /// `(v_n v_n^T)^{1/2}`, half the log of the congruence orbit point.
    pub log_p: DMatrix<f64>,
    /// Eigenvalues of `log p_n` (log singular values of the product), descending.
    pub log_sigma: Vec<f64>,
    /// `max_i |log sigma_i|`: the distance `d(I, p_n)` in the operator-log metric.
    pub a_n: f64,
}

/// The adjoint product `w_n` in scaled orthogonal-triangular form.
#[derive(Debug, Clone)]
pub struct ScaledProduct {
    dim: usize,
    q: DMatrix<f64>,
    gamma: Vec<f64>,
    t_hat: DMatrix<f64>,
    pending: DMatrix<f64>,
    pending_count: usize,
    steps: usize,
}

impl ScaledProduct {
    pub fn identity(dim: usize) -> Self {
        ScaledProduct {
            dim,
            q: DMatrix::identity(dim, dim),
            gamma: vec![0.0; dim],
            t_hat: DMatrix::identity(dim, dim),
            pending: DMatrix::identity(dim, dim),
            pending_count: 0,
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Spread of the log row scales; diagnostics for the checkpoint regime.
    pub fn gamma_spread(&self) -> f64 {
        let hi = self.gamma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.gamma.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }

    /// Multiply one adjoint generator onto the left: `w <- a_t w`.
    pub fn push_left(&mut self, a_t: &DMatrix<f64>) -> Result<()> {
        self.pending = a_t * &self.pending;
        self.pending_count += 1;
        self.steps += 1;
        let amax = self.pending.amax();
        if self.pending_count >= FOLD_INTERVAL || amax > FOLD_AMAX_HIGH || amax < FOLD_AMAX_LOW {
            self.fold()?;
        }
        Ok(())
    }

    /// Absorb the pending window: QR the frame, then merge the triangle into
    /// `(gamma, t_hat)` row by row in log scale.
    fn fold(&mut self) -> Result<()> {
        if self.pending_count == 0 {
            return Ok(());
        }
        let d = self.dim;
        let b = &self.pending * &self.q;
        let (q_new, r) = qr_pos(&b)?;
        let mut new_gamma = vec![0.0; d];
        let mut new_t = DMatrix::zeros(d, d);
        for i in 0..d {
            // Row i of R * diag(exp(gamma)) T: sum_{j >= i} R_ij exp(gamma_j) T_j.
            let mut m_i = f64::NEG_INFINITY;
            for j in i..d {
                let c = r[(i, j)].abs();
                if c > 0.0 {
                    m_i = m_i.max(self.gamma[j] + c.ln());
                }
            }
            if !m_i.is_finite() {
                return Err(Error::Numerical(format!("row {i} of the scaled product vanished")));
            }
            let mut acc = vec![0.0f64; d];
            for j in i..d {
                let c = r[(i, j)];
                if c != 0.0 {
                    let weight = c.signum() * (self.gamma[j] + c.abs().ln() - m_i).exp();
                    for (k, entry) in acc.iter_mut().enumerate().take(d).skip(j) {
                        *entry += weight * self.t_hat[(j, k)];
                    }
                }
            }
            let s = acc.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if s < 1e-300 {
                return Err(Error::Numerical(format!(
                    "row {i} of the scaled product cancelled below the representable range"
                )));
            }
            new_gamma[i] = m_i + s.ln();
            for k in i..d {
                new_t[(i, k)] = acc[k] / s;
            }
        }
        self.q = q_new;
        self.gamma = new_gamma;
        self.t_hat = new_t;
        self.pending = DMatrix::identity(d, d);
        self.pending_count = 0;
        Ok(())
    }

    /// Fold and report the current positive part.
    pub fn checkpoint(&mut self) -> Result<Checkpoint> {
        self.fold()?;
        let d = self.dim;
        let n = self.steps;
        let gmax = self.gamma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let spread = self.gamma_spread();

        let (log_p, log_sigma): (DMatrix<f64>, Vec<f64>);
        if spread <= GRADED_SPREAD {
            // Dense route: rescale so the largest row is O(1), then SVD. The
            // orthogonal frame `q` drops out of `w^T w`, so the eigenframe of
            // `log p` is the right singular frame of the scaled triangle.
            let mut m = DMatrix::zeros(d, d);
            for i in 0..d {
                let scale = (self.gamma[i] - gmax).exp();
                for j in i..d {
                    m[(i, j)] = scale * self.t_hat[(i, j)];
                }
            }
            let svd = m.svd(false, true);
            let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&a, &b| {
                svd.singular_values[b].partial_cmp(&svd.singular_values[a]).expect("finite")
            });
            let mut sigmas = Vec::with_capacity(d);
            let mut lp = DMatrix::zeros(d, d);
            for &k in &order {
                let s = svd.singular_values[k];
                if s < 1e-300 {
                    return Err(Error::Numerical(
                        "singular value underflow at a checkpoint".into(),
                    ));
                }
                let ls = gmax + s.ln();
                sigmas.push(ls);
                let v = v_t.row(k).transpose();
                lp += ls * &v * v.transpose();
            }
            log_p = (&lp + lp.transpose()) * 0.5;
            log_sigma = sigmas;
        } else if d == 2 {
            // Graded route: the dominant row carries the top singular value,
            // the determinant (exact for a triangle) yields the other, and
            // the normalized dominant row of the triangle approximates the
            // top eigendirection of `w^T w` with error O(exp(-spread)).
            let (ib, _) = if self.gamma[0] >= self.gamma[1] { (0, 1) } else { (1, 0) };
            let t00 = self.t_hat[(0, 0)].abs();
            let t11 = self.t_hat[(1, 1)].abs();
            if t00 < 1e-300 || t11 < 1e-300 {
                return Err(Error::Numerical("triangular diagonal underflow".into()));
            }
            let row_norm =
                (self.t_hat[(ib, 0)].powi(2) + self.t_hat[(ib, 1)].powi(2)).sqrt();
            let ls1 = self.gamma[ib] + row_norm.ln();
            let log_det = self.gamma[0] + self.gamma[1] + t00.ln() + t11.ln();
            let ls2 = log_det - ls1;
            let v1 = DVector::from_column_slice(&[
                self.t_hat[(ib, 0)] / row_norm,
                self.t_hat[(ib, 1)] / row_norm,
            ]);
            let v2 = DVector::from_column_slice(&[-v1[1], v1[0]]);
            log_p = ls1 * &v1 * v1.transpose() + ls2 * &v2 * v2.transpose();
            log_sigma = vec![ls1, ls2];
        } else {
            return Err(Error::Numerical(format!(
                "log-scale spread {spread:.1} exceeds {GRADED_SPREAD} in dimension {d}; only \
                 2x2 products support the graded fallback -- checkpoint earlier"
            )));
        }
        let a_n = log_sigma.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(Checkpoint { n, log_p, log_sigma, a_n })
    }
}

/// A full engine run with geometric checkpoints `1, 2, 4, .., horizon`.
#[derive(Debug, Clone)]
pub struct OperatorCocycleRun {
    pub dim: usize,
    pub horizon: usize,
    pub checkpoints: Vec<Checkpoint>,
}

impl OperatorCocycleRun {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("runs always checkpoint the horizon")
    }

    /// `a_N / N` at the horizon.
    pub fn drift_rate(&self) -> f64 {
        let last = self.final_checkpoint();
        last.a_n / last.n as f64
    }
}

fn checkpoint_grid(n_max: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut n = 1;
    while n < n_max {
        grid.push(n);
        n *= 2;
    }
    grid.push(n_max);
    grid
}

/// Drive the scaled engine along a symbol path.
pub fn operator_run(
    mats: &[DMatrix<f64>],
    path: &OmegaPath,
    n_max: usize,
) -> Result<OperatorCocycleRun> {
    let d = validate_generators(mats)?;
    if n_max == 0 {
        return Err(Error::InvalidSpec("the run needs a horizon of at least 1".into()));
    }
    if path.alphabet_size() > mats.len() {
        return Err(Error::InvalidSpec(format!(
            "driver emits {} symbols but only {} generators are given",
            path.alphabet_size(),
            mats.len()
        )));
    }
    let adjoints: Vec<DMatrix<f64>> = mats.iter().map(|a| a.transpose()).collect();
    let grid = checkpoint_grid(n_max);
    let mut product = ScaledProduct::identity(d);
    let mut checkpoints = Vec::with_capacity(grid.len());
    let mut next = 0;
    for k in 0..n_max {
        let s = path.symbol(k as i64) as usize;
        product.push_left(&adjoints[s])?;
        if grid[next] == k + 1 {
            checkpoints.push(product.checkpoint()?);
            next += 1;
        }
    }
    Ok(OperatorCocycleRun { dim: d, horizon: n_max, checkpoints })
}

/// Wrap a generator family as the subadditive cocycle `a(n) = d(I, p_n)`,
/// for use with the drift and good-time machinery. Every evaluation replays
/// the scaled engine from scratch, so keep horizons moderate.
pub fn operator_cocycle(
    label: impl Into<String>,
    mats: Vec<DMatrix<f64>>,
) -> Result<SubadditiveCocycle> {
    let d = validate_generators(&mats)?;
    let adjoints: Vec<DMatrix<f64>> = mats.iter().map(|a| a.transpose()).collect();
    SubadditiveCocycle::from_closed_form(label, move |path: &OmegaPath, n: usize| {
        let mut product = ScaledProduct::identity(d);
        for k in 0..n {
            let s = path.symbol(k as i64) as usize;
            product
                .push_left(&adjoints[s])
                .expect("validated generators keep the product representable");
        }
        product.checkpoint().expect("validated generators yield finite checkpoints").a_n
    })
}

/// The pairing element of the operator-space functional `F(M) = tr(Q^T M)`.
///
/// `Q` is the rank-one norming element `sign(lambda) u u^T` built from the
/// dominant eigenpair of `log p_N` at the final checkpoint, so `F` has unit
/// trace norm and `F(log p_N) = a_N` exactly.
#[derive(Debug, Clone)]
pub struct OperatorFunctional {
    pub q: DMatrix<f64>,
    /// Set when the final `a_N` is numerically zero; `Q` is then an
    /// arbitrary unit-trace-norm element.
    pub trivial: bool,
}

impl OperatorFunctional {
    pub fn pair(&self, m: &DMatrix<f64>) -> f64 {
        (self.q.transpose() * m).trace()
    }

    pub fn trace_norm(&self) -> f64 {
        self.q.clone().svd(false, false).singular_values.iter().sum()
    }
}

/// Extract the norming functional at the final checkpoint of a run.
pub fn operator_functional(run: &OperatorCocycleRun) -> Result<OperatorFunctional> {
    let last = run
        .checkpoints
        .last()
        .ok_or_else(|| Error::InvalidSpec("the run has no checkpoints".into()))?;
    let d = run.dim;
    if last.a_n <= TRIVIAL_DRIFT_TOL {
        let mut q = DMatrix::zeros(d, d);
        q[(0, 0)] = 1.0;
        return Ok(OperatorFunctional { q, trivial: true });
    }
    let eigen = last.log_p.clone().symmetric_eigen();
    let mut best = 0;
    for i in 1..d {
        if eigen.eigenvalues[i].abs() > eigen.eigenvalues[best].abs() {
            best = i;
        }
    }
    let u = eigen.eigenvectors.column(best).into_owned();
    let q = eigen.eigenvalues[best].signum() * &u * u.transpose();
    Ok(OperatorFunctional { q, trivial: false })
}

/// Lyapunov exponents from one QR staircase pass.
#[derive(Debug, Clone)]
pub struct LyapunovRun {
    /// Exponent estimates at the horizon, descending.
    pub exponents: Vec<f64>,
    pub horizon: usize,
    /// `|n sum_i exponents_i - sum_k ln|det A_{w_k}||`; exactly zero in
    /// exact arithmetic.
    pub det_sum_residual: f64,
}

/// One staircase pass: `B = A^T_{w_k} Q`, QR, accumulate `ln R_ii`.
pub fn lyapunov_qr(
    mats: &[DMatrix<f64>],
    path: &OmegaPath,
    n_max: usize,
) -> Result<LyapunovRun> {
    let d = validate_generators(mats)?;
    if n_max == 0 {
        return Err(Error::InvalidSpec("the staircase needs a horizon of at least 1".into()));
    }
    if path.alphabet_size() > mats.len() {
        return Err(Error::InvalidSpec(format!(
            "driver emits {} symbols but only {} generators are given",
            path.alphabet_size(),
            mats.len()
        )));
    }
    let adjoints: Vec<DMatrix<f64>> = mats.iter().map(|a| a.transpose()).collect();
    let log_dets: Vec<f64> = mats.iter().map(|a| a.determinant().abs().ln()).collect();
    let mut q = DMatrix::identity(d, d);
    let mut sums = vec![0.0f64; d];
    let mut det_sum = 0.0;
    for k in 0..n_max {
        let s = path.symbol(k as i64) as usize;
        let b = &adjoints[s] * &q;
        let (q_next, r) = qr_pos(&b)?;
        for i in 0..d {
            sums[i] += r[(i, i)].ln();
        }
        det_sum += log_dets[s];
        q = q_next;
    }
    let det_sum_residual = (sums.iter().sum::<f64>() - det_sum).abs();
    let mut exponents: Vec<f64> = sums.iter().map(|t| t / n_max as f64).collect();
    exponents.sort_by(|a, b| b.partial_cmp(a).expect("finite exponents"));
    Ok(LyapunovRun { exponents, horizon: n_max, det_sum_residual })
}

/// Multi-seed Lyapunov spectrum with componentwise standard errors.
#[derive(Debug, Clone)]
pub struct LyapunovSpectrum {
    /// Componentwise means, descending.
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub per_seed: Vec<Vec<f64>>,
    pub horizon: usize,
}

pub fn lyapunov_spectrum(
    mats: &[DMatrix<f64>],
    spec: &DriverSpec,
    seeds: &[u64],
    n_max: usize,
) -> Result<LyapunovSpectrum> {
    if seeds.is_empty() {
        return Err(Error::InvalidSpec("the spectrum needs at least one seed".into()));
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let path = sample_path(spec, seed, n_max);
        per_seed.push(lyapunov_qr(mats, &path, n_max)?.exponents);
    }
    let d = per_seed[0].len();
    let k = per_seed.len() as f64;
    let mean: Vec<f64> =
        (0..d).map(|i| per_seed.iter().map(|e| e[i]).sum::<f64>() / k).collect();
    let stderr: Vec<f64> = (0..d)
        .map(|i| {
            if per_seed.len() < 2 {
                0.0
            } else {
                let var = per_seed.iter().map(|e| (e[i] - mean[i]).powi(2)).sum::<f64>()
                    / (k - 1.0);
                (var / k).sqrt()
            }
        })
        .collect();
    Ok(LyapunovSpectrum { mean, stderr, per_seed, horizon: n_max })
}

/// The three comparisons between an engine run, the staircase oracle, and
/// the extracted functional.
#[derive(Debug, Clone)]
pub struct OperatorMetReport {
    /// `a_N / N` at the final checkpoint.
    pub drift_rate: f64,
    /// `|a_N/N - max(lambda_1, -lambda_d)|` against the staircase exponents.
    pub top_gap: f64,
    /// Max componentwise gap between `log_sigma / N` and the exponents.
    pub spectrum_gap: f64,
    /// Max over late checkpoints (`n >= N/4`) of `|F(log p_n)/n - a_N/N|`.
    pub functional_gap: f64,
    pub tol_top: f64,
    pub tol_spectrum: f64,
    pub tol_functional: f64,
    pub verdict: bool,
}

pub fn verify_operator_met(
    run: &OperatorCocycleRun,
    lyap: &LyapunovRun,
    functional: &OperatorFunctional,
    tol_top: f64,
    tol_spectrum: f64,
    tol_functional: f64,
) -> Result<OperatorMetReport> {
    let last = run
        .checkpoints
        .last()
        .ok_or_else(|| Error::InvalidSpec("the run has no checkpoints".into()))?;
    if lyap.exponents.len() != run.dim {
        return Err(Error::InvalidSpec(format!(
            "oracle has {} exponents, the run has dimension {}",
            lyap.exponents.len(),
            run.dim
        )));
    }
    let n = last.n as f64;
    let drift_rate = last.a_n / n;
    let lambda_top = lyap.exponents[0];
    let lambda_bot = *lyap.exponents.last().expect("nonempty");
    let top_gap = (drift_rate - lambda_top.max(-lambda_bot)).abs();
    let spectrum_gap = last
        .log_sigma
        .iter()
        .zip(&lyap.exponents)
        .map(|(ls, l)| (ls / n - l).abs())
        .fold(0.0f64, f64::max);
    let mut functional_gap = 0.0f64;
    for cp in &run.checkpoints {
        if cp.n * 4 >= run.horizon {
            let rate = functional.pair(&cp.log_p) / cp.n as f64;
            functional_gap = functional_gap.max((rate - drift_rate).abs());
        }
    }
    let verdict =
        top_gap <= tol_top && spectrum_gap <= tol_spectrum && functional_gap <= tol_functional;
    Ok(OperatorMetReport {
        drift_rate,
        top_gap,
        spectrum_gap,
        functional_gap,
        tol_top,
        tol_spectrum,
        tol_functional,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::DriverKind;
    use crate::subadd::cocycle::check_subadditivity;

    fn diag2(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&[a, b]))
    }

    fn det_path() -> OmegaPath {
        let spec = DriverSpec::new(DriverKind::Deterministic { sequence: vec![0] }).unwrap();
        sample_path(&spec, 0, 0)
    }

    fn iid_path(seed: u64) -> OmegaPath {
        let spec = DriverSpec::new(DriverKind::Iid { probs: vec![0.5, 0.5] }).unwrap();
        sample_path(&spec, seed, 0)
    }

    #[test]
    fn constant_diagonal_is_exact_in_both_regimes() {
        let mats = vec![diag2(2.0, 0.5)];
        let path = det_path();
        let ln2 = std::f64::consts::LN_2;
        // n = 16 stays under the graded threshold (spread 22), n = 400 is
        // far beyond it (spread 554): both must agree with the closed form.
        for n in [16usize, 400] {
            let run = operator_run(&mats, &path, n).unwrap();
            let last = run.final_checkpoint();
            assert_eq!(last.n, n);
            let want = n as f64 * ln2;
            assert!((last.log_sigma[0] - want).abs() < 1e-9, "n={n}");
            assert!((last.log_sigma[1] + want).abs() < 1e-9, "n={n}");
            assert!((last.a_n - want).abs() < 1e-9);
            let expected = diag2(want, -want);
            assert!((&last.log_p - &expected).amax() < 1e-9, "n={n}");
        }

        let run = operator_run(&mats, &path, 400).unwrap();
        let lyap = lyapunov_qr(&mats, &path, 400).unwrap();
        assert!((lyap.exponents[0] - ln2).abs() < 1e-12);
        assert!((lyap.exponents[1] + ln2).abs() < 1e-12);
        assert!(lyap.det_sum_residual < 1e-9);

        let f = operator_functional(&run).unwrap();
        assert!(!f.trivial);
        assert!((f.trace_norm() - 1.0).abs() < 1e-12);
        for cp in &run.checkpoints {
            assert!(
                (f.pair(&cp.log_p) - cp.a_n).abs() < 1e-9,
                "functional misses a_n at n={}",
                cp.n
            );
        }

        let report = verify_operator_met(&run, &lyap, &f, 1e-9, 1e-9, 1e-9).unwrap();
        assert!(report.verdict, "{report:?}");
        assert!((report.drift_rate - ln2).abs() < 1e-12);
    }

    #[test]
    fn rotation_products_are_trivial() {
        let (s, c) = (0.7f64.sin(), 0.7f64.cos());
        let mats = vec![DMatrix::from_row_slice(2, 2, &[c, -s, s, c])];
        let path = det_path();
        let run = operator_run(&mats, &path, 2000).unwrap();
        assert!(run.final_checkpoint().a_n <= TRIVIAL_DRIFT_TOL);
        let f = operator_functional(&run).unwrap();
        assert!(f.trivial);
        assert!((f.trace_norm() - 1.0).abs() < 1e-12);
        let lyap = lyapunov_qr(&mats, &path, 2000).unwrap();
        assert!(lyap.exponents.iter().all(|l| l.abs() < 1e-10));
    }

    #[test]
    fn commuting_diagonal_iid_matches_oracle_and_theory() {
        let mats = vec![diag2(2.0, 3.0), diag2(0.5, 0.8)];
        let path = iid_path(5);
        let n = 10_000;
        let run = operator_run(&mats, &path, n).unwrap();
        let lyap = lyapunov_qr(&mats, &path, n).unwrap();
        assert!(lyap.det_sum_residual < 1e-9);

        // Same finite product, two algorithms: the log singular values must
        // agree to rounding error.
        let last = run.final_checkpoint();
        for (ls, l) in last.log_sigma.iter().zip(&lyap.exponents) {
            assert!((ls / n as f64 - l).abs() < 1e-9, "engine {ls} vs oracle {l}");
        }

        // Theory: componentwise Birkhoff averages (0.4378.., 0.0).
        let lam_top = 0.5 * (3.0f64.ln() + 0.8f64.ln());
        assert!((lyap.exponents[0] - lam_top).abs() < 0.05);
        assert!(lyap.exponents[1].abs() < 0.05);

        let f = operator_functional(&run).unwrap();
        let report = verify_operator_met(&run, &lyap, &f, 1e-9, 1e-9, 0.02).unwrap();
        assert!(report.verdict, "{report:?}");
    }

    #[test]
    fn triangular_noncommuting_recovers_diagonal_rates() {
        let mats = vec![
            DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 0.0, 2.0]),
        ];
        let path = iid_path(7);
        let n = 10_000;
        let lyap = lyapunov_qr(&mats, &path, n).unwrap();
        assert!((lyap.exponents[0] - 3.0f64.ln()).abs() < 1e-3, "{:?}", lyap.exponents);
        assert!((lyap.exponents[1] - 2.0f64.ln()).abs() < 1e-3, "{:?}", lyap.exponents);

        let run = operator_run(&mats, &path, n).unwrap();
        assert!((run.drift_rate() - 3.0f64.ln()).abs() < 1e-3);
        let f = operator_functional(&run).unwrap();
        let report = verify_operator_met(&run, &lyap, &f, 0.01, 0.01, 0.01).unwrap();
        assert!(report.verdict, "{report:?}");
    }

    fn mixing_pair() -> Vec<DMatrix<f64>> {
        let (s, c) = (0.3f64.sin(), 0.3f64.cos());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        vec![rot * diag2(1.5, 0.4), DMatrix::from_row_slice(2, 2, &[0.9, 0.5, -0.2, 1.1])]
    }

    #[test]
    fn engine_checkpoints_match_raw_products_at_small_n() {
        let mats = mixing_pair();
        let path = iid_path(9);
        let n = 18;
        let run = operator_run(&mats, &path, n).unwrap();
        let last = run.final_checkpoint();

        // Raw right product v = A_{w_0} .. A_{w_{n-1}} is still representable.
        let mut v = DMatrix::identity(2, 2);
        for k in 0..n {
            v = v * &mats[path.symbol(k as i64) as usize];
        }
        let gram = &v * v.transpose();

        // p^2 reconstructed from log p must equal the orbit point v v^T.
        let eigen = last.log_p.clone().symmetric_eigen();
        let mut p2 = DMatrix::zeros(2, 2);
        for i in 0..2 {
            let u = eigen.eigenvectors.column(i);
            p2 += (2.0 * eigen.eigenvalues[i]).exp() * u * u.transpose();
        }
        let rel = (&p2 - &gram).amax() / gram.amax();
        assert!(rel < 1e-9, "relative gram error {rel}");

        // Log singular values against a direct SVD of the raw product.
        let mut sv: Vec<f64> =
            v.svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (ls, s) in last.log_sigma.iter().zip(&sv) {
            assert!((ls - s.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn operator_cocycle_is_subadditive() {
        let cocycle = operator_cocycle("mixing", mixing_pair()).unwrap();
        let path = iid_path(13);
        let violations = check_subadditivity(&cocycle, &path, 48, 1e-7).unwrap();
        assert!(violations.is_empty(), "worst: {:?}", violations.first());
    }

    #[test]
    fn validation_rejects_bad_generators() {
        let path = det_path();
        // Singular.
        assert!(operator_run(&[diag2(1.0, 0.0)], &path, 4).is_err());
        // Out of the accepted scale window.
        assert!(operator_run(&[diag2(1e7, 1.0)], &path, 4).is_err());
        // Shape mismatch.
        let rect = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(validate_generators(&[rect]).is_err());
        // Alphabet not covered.
        let two = iid_path(1);
        assert!(operator_run(&[diag2(2.0, 0.5)], &two, 4).is_err());
    }

    #[test]
    fn graded_regime_is_2x2_only() {
        let d3 = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 1.0, 0.5]));
        let path = det_path();
        // Short horizon, spread under the threshold: fine.
        let run = operator_run(&[d3.clone()], &path, 16).unwrap();
        let last = run.final_checkpoint();
        let ln2 = std::f64::consts::LN_2;
        assert!((last.log_sigma[0] - 16.0 * ln2).abs() < 1e-9);
        assert!(last.log_sigma[1].abs() < 1e-9);
        assert!((last.log_sigma[2] + 16.0 * ln2).abs() < 1e-9);
        // Long horizon in dimension 3: the checkpoint must refuse.
        match operator_run(&[d3], &path, 400) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("graded")),
            other => panic!("expected a numerical error, got {other:?}"),
        }
    }
}
