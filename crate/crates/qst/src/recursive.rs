//! Closed-form recursive reconstruction from the tall-setup
//! probabilities.
//!
//! One qubit is solved directly from the six Z/X/Y probabilities. For
//! more qubits, the first `2n−1` probability blocks split into the two
//! half-space subproblems (the Z-prefixed blocks are block diagonal),
//! each is solved recursively, and the relative phase between the two
//! halves is recovered from the last two blocks, first from a single
//! 2×2 linear system and then refined against all of them by a 1-D
//! quasi-Newton descent.
//!
//! The phase link is unrecoverable only when the cross vector `d_c`
//! vanishes identically, a zero-measure event surfaced via a failure
//! flag; an estimate is still returned.

use ndarray::{s, Array1, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{adjoint, CVector};
use crate::measurements::{eigenvector_matrix, MeasurementType, Axis};
use crate::states::StateVector;

/// Base-case branch threshold on `|v₁||v₂|`.
const TAU_MODULUS: f64 = 1e-12;
/// Failure-set threshold scale on `max |d_c|`.
const TAU_DC: f64 = 1e-12;
/// 1-D refinement stopping step.
const REFINE_STEP_TOL: f64 = 1e-12;
const REFINE_MAX_ITERS: usize = 200;

/// Diagnostics attached to a recursive reconstruction.
#[derive(Clone, Copy, Debug, Default)]
pub struct RecursiveDiagnostics {
    /// Number of phase-link steps that hit the degenerate `d_c ≡ 0` set.
    pub phase_link_failures: usize,
}

impl RecursiveDiagnostics {
    pub fn in_failure_set(&self) -> bool {
        self.phase_link_failures > 0
    }
}

/// Reconstructs a single-qubit state from the six tall-setup
/// probabilities ordered Z, X, Y. Negative radicands are clamped to 0.
pub fn reconstruct_1q(p6: &[f64]) -> Result<StateVector> {
    if p6.len() != 6 {
        return Err(Error::DimensionMismatch {
            expected: 6,
            actual: p6.len(),
        });
    }
    let raw = reconstruct_1q_scaled(p6);
    StateVector::normalized(raw)
}

/// Mass-preserving base case: `[|v₁|, |v₂| e^{iθ}]` with the moduli read
/// from the Z block, so the squared norm equals the Z-block sum.
fn reconstruct_1q_scaled(p6: &[f64]) -> CVector {
    let m1 = p6[0].max(0.0).sqrt();
    let m2 = p6[1].max(0.0).sqrt();
    let theta = if m1 * m2 > TAU_MODULUS {
        let denom = 2.0 * m1 * m2;
        let cos_t = (p6[2] - p6[3]) / denom;
        let sin_t = (p6[4] - p6[5]) / denom;
        sin_t.atan2(cos_t)
    } else {
        // One modulus vanishes: the relative phase is immaterial.
        0.0
    };
    ndarray::array![
        Complex64::new(m1, 0.0),
        Complex64::from_polar(m2, theta)
    ]
}

/// Splits a tall-setup probability vector for `n` qubits into the two
/// half-space subvectors plus the last two blocks used for phase linking.
///
/// Blocks `1..=2n−1` are Z-prefixed, hence block diagonal over the two
/// halves: the first half of each goes to the first child, the second
/// half to the second child. The remaining `2d` entries form `L̂`.
pub fn split_blocks(p: ArrayView1<'_, f64>, n: usize) -> Result<(Array1<f64>, Array1<f64>, Array1<f64>)> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "split_blocks needs at least two qubits".into(),
        ));
    }
    let d = 1usize << n;
    let expected = (2 * n + 1) * d;
    if p.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: p.len(),
        });
    }
    let half = d / 2;
    let child_blocks = 2 * n - 1;
    let mut p_w1 = Array1::zeros(child_blocks * half);
    let mut p_w2 = Array1::zeros(child_blocks * half);
    for k in 0..child_blocks {
        let block = p.slice(s![k * d..(k + 1) * d]);
        p_w1
            .slice_mut(s![k * half..(k + 1) * half])
            .assign(&block.slice(s![..half]));
        p_w2
            .slice_mut(s![k * half..(k + 1) * half])
            .assign(&block.slice(s![half..]));
    }
    let l_hat = p.slice(s![child_blocks * d..]).to_owned();
    Ok((p_w1, p_w2, l_hat))
}

/// The phase-link observables: the mean intensity `m`, the cross vector
/// `d_c`, and the measured last-two-blocks vector `L̂`.
#[derive(Clone, Debug)]
pub struct PhaseLinkData {
    m: Array1<f64>,
    d_c: CVector,
    l_hat: Array1<f64>,
}

impl PhaseLinkData {
    /// Builds the observables from the two (not necessarily unit-norm)
    /// half-state estimates and the measured `L̂` of length `4·len(w)`.
    pub fn new(w1: &CVector, w2: &CVector, l_hat: &Array1<f64>) -> Result<Self> {
        let half = w1.len();
        if w2.len() != half {
            return Err(Error::DimensionMismatch {
                expected: half,
                actual: w2.len(),
            });
        }
        if l_hat.len() != 4 * half {
            return Err(Error::DimensionMismatch {
                expected: 4 * half,
                actual: l_hat.len(),
            });
        }
        if !half.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(half));
        }
        // E* for the all-X measurement on the half space (real symmetric,
        // so the adjoint is a formality).
        let n_half = half.trailing_zeros() as usize;
        let (a1, a2) = if n_half == 0 {
            // Half space is one amplitude; the "transform" is identity.
            (w1.clone(), w2.clone())
        } else {
            let all_x = MeasurementType::new(vec![Axis::X; n_half]).expect("nonempty");
            let f = adjoint(&eigenvector_matrix(&all_x));
            (f.dot(w1), f.dot(w2))
        };
        let m: Array1<f64> = a1
            .iter()
            .zip(a2.iter())
            .map(|(x, y)| 0.5 * (x.norm_sqr() + y.norm_sqr()))
            .collect();
        let d_c: CVector = a1.iter().zip(a2.iter()).map(|(x, y)| x.conj() * y).collect();
        Ok(Self {
            m,
            d_c,
            l_hat: l_hat.clone(),
        })
    }

    pub fn m(&self) -> &Array1<f64> {
        &self.m
    }

    pub fn d_c(&self) -> &CVector {
        &self.d_c
    }

    /// `d(θ) = cos(θ)·Re(d_c) − sin(θ)·Im(d_c)`.
    fn d_theta(&self, theta: f64) -> Array1<f64> {
        let (sin_t, cos_t) = theta.sin_cos();
        self.d_c.mapv(|z| cos_t * z.re - sin_t * z.im)
    }

    /// Model prediction `L_m(Δ) = [m+d(Δ); m−d(Δ); m+d(Δ−π/2); m−d(Δ−π/2)]`.
    pub fn model(&self, delta: f64) -> Array1<f64> {
        let half = self.m.len();
        let d_vec = self.d_theta(delta);
        let e_vec = self.d_theta(delta - std::f64::consts::FRAC_PI_2);
        let mut out = Array1::zeros(4 * half);
        for j in 0..half {
            out[j] = self.m[j] + d_vec[j];
            out[half + j] = self.m[j] - d_vec[j];
            out[2 * half + j] = self.m[j] + e_vec[j];
            out[3 * half + j] = self.m[j] - e_vec[j];
        }
        out
    }

    /// `‖L_m(Δ) − L̂‖₂`.
    pub fn residual(&self, delta: f64) -> f64 {
        self.residual_sqr(delta).sqrt()
    }

    fn residual_sqr(&self, delta: f64) -> f64 {
        self.model(delta)
            .iter()
            .zip(self.l_hat.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Analytic derivative of the squared residual.
    fn residual_sqr_grad(&self, delta: f64) -> f64 {
        let half = self.m.len();
        let d_vec = self.d_theta(delta);
        let e_vec = self.d_theta(delta - std::f64::consts::FRAC_PI_2);
        let mut acc = 0.0;
        for j in 0..half {
            let l1 = self.l_hat[j];
            let l2 = self.l_hat[half + j];
            let l3 = self.l_hat[2 * half + j];
            let l4 = self.l_hat[3 * half + j];
            acc += e_vec[j] * (l1 - l2) - d_vec[j] * (l3 - l4);
        }
        2.0 * acc
    }

    /// Index of the largest `|d_c|` entry (lowest index on ties) and the
    /// single-pair phase estimate from the 2×2 system, unless the cross
    /// vector is degenerate.
    pub fn single_pair_estimate(&self) -> Option<(usize, f64)> {
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for (j, z) in self.d_c.iter().enumerate() {
            let mag = z.norm();
            if mag > best_mag {
                best_mag = mag;
                best = j;
            }
        }
        let scale = self.m.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
        if best_mag <= TAU_DC * scale {
            return None;
        }
        let half = self.m.len();
        let dk = self.d_c[best];
        let r1 = self.l_hat[best] - self.m[best];
        let r2 = self.l_hat[2 * half + best] - self.m[best];
        let det = dk.norm_sqr();
        let cos_d = (dk.re * r1 + dk.im * r2) / det;
        let sin_d = (-dk.im * r1 + dk.re * r2) / det;
        Some((best, sin_d.atan2(cos_d)))
    }

    /// 1-D quasi-Newton descent on the squared residual from `theta0`;
    /// only improving steps are accepted, so the result never beats the
    /// initialization in the wrong direction.
    pub fn refine(&self, theta0: f64) -> f64 {
        let mut delta = theta0;
        let mut f = self.residual_sqr(delta);
        let mut g = self.residual_sqr_grad(delta);
        let mut h = 1.0f64; // secant estimate of the inverse curvature
        for _ in 0..REFINE_MAX_ITERS {
            if g == 0.0 {
                break;
            }
            let step = -h * g;
            let mut t = 1.0f64;
            let mut accepted = None;
            for _ in 0..60 {
                let cand = delta + t * step;
                let fc = self.residual_sqr(cand);
                if fc <= f + 1e-4 * t * step * g {
                    accepted = Some((cand, fc));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, fc)) = accepted else { break };
            let s = cand - delta;
            let g_new = self.residual_sqr_grad(cand);
            let y = g_new - g;
            h = if s * y > 1e-300 { s / y } else { 1.0 };
            delta = cand;
            f = fc;
            g = g_new;
            if s.abs() < REFINE_STEP_TOL {
                break;
            }
        }
        delta
    }
}

/// Recovers the relative phase `Δ = θ₂ − θ₁` between the two half-state
/// estimates from the measured last two blocks. Returns `(Δ, failed)`;
/// on the degenerate set (`d_c ≡ 0`) the phase is unrecoverable and
/// `(0, true)` is returned.
pub fn recover_phase_link(
    w1: &CVector,
    w2: &CVector,
    l_hat: &Array1<f64>,
) -> Result<(f64, bool)> {
    let data = PhaseLinkData::new(w1, w2, l_hat)?;
    match data.single_pair_estimate() {
        Some((_, theta_d)) => Ok((data.refine(theta_d), false)),
        None => Ok((0.0, true)),
    }
}

/// Full recursive reconstruction from a tall-setup probability vector.
/// Always returns an estimate; degenerate phase links are counted in the
/// diagnostics.
pub fn reconstruct_recursive(
    p_hat: &Array1<f64>,
    n_qb: usize,
) -> Result<(StateVector, RecursiveDiagnostics)> {
    if n_qb == 0 {
        return Err(Error::InvalidArgument("need at least one qubit".into()));
    }
    let expected = (2 * n_qb + 1) * (1usize << n_qb);
    if p_hat.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: p_hat.len(),
        });
    }
    let mut diag = RecursiveDiagnostics::default();
    let raw = recon_scaled(p_hat.view(), n_qb, &mut diag)?;
    let v_hat = StateVector::normalized(raw).or_else(|_| {
        // No mass anywhere in the record; fall back to a fixed state.
        diag.phase_link_failures += 1;
        StateVector::basis_state(n_qb, 0)
    })?;
    Ok((v_hat, diag))
}

/// Mass-preserving recursion: the returned vector's squared norm equals
/// the Z-block sum of its probability vector at every level.
fn recon_scaled(
    p: ArrayView1<'_, f64>,
    n: usize,
    diag: &mut RecursiveDiagnostics,
) -> Result<CVector> {
    if n == 1 {
        return Ok(reconstruct_1q_scaled(p.as_slice().expect("contiguous")));
    }
    let (p_w1, p_w2, l_hat) = split_blocks(p, n)?;
    let w1 = recon_scaled(p_w1.view(), n - 1, diag)?;
    let w2 = recon_scaled(p_w2.view(), n - 1, diag)?;
    let (delta, failed) = recover_phase_link(&w1, &w2, &l_hat)?;
    if failed {
        diag.phase_link_failures += 1;
    }
    let phase = Complex64::from_polar(1.0, delta);
    let d = 1usize << n;
    let mut out = CVector::zeros(d);
    for (j, x) in w1.iter().enumerate() {
        out[j] = *x;
    }
    for (j, y) in w2.iter().enumerate() {
        out[d / 2 + j] = y * phase;
    }
    Ok(out)
}
