//! Maximum-likelihood refinement.
//!
//! States are parameterized by unconstrained coordinates `(x′, y′)`:
//! `v(x, y) = [√(1−‖x‖²−‖y‖²), x₁+iy₁, …]` lives on the open ball
//! `r = √(‖x‖²+‖y‖²) < 1`, and the tangent/arctangent change of
//! variables maps the ball to all of `ℝ^{2(d−1)}`. Two negative
//! log-likelihoods are minimized by BFGS with analytic gradients: the
//! exact multinomial one, `−Σ n_k log (|A v|²)_k`, and a Gaussian
//! approximation `N Σ ε_k²/p̃_k` with `ε = p̂ − p(v)` and regularized
//! probabilities `p̃`. The mixed schedule runs a fixed number of
//! Gaussian iterations before switching to the exact objective.
//!
//! Before optimizing, the basis index of largest modulus in the initial
//! state is swapped with index 0 (and the matrix columns with it) so the
//! radicand coordinate stays well away from the `r = 1` boundary.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;

use crate::bfgs::{self, BfgsOptions, StopReason};
use crate::error::{Error, Result};
use crate::linalg::{adjoint, CMatrix, CVector};
use crate::measurements::StackedMatrix;
use crate::sampling::{sample_probabilities, ShotRecord};
use crate::states::StateVector;

/// Regularization pseudo-count: every outcome is treated as observed
/// this many extra times when estimating the covariance.
pub const DEFAULT_REG_COUNT: f64 = 5.0;
/// Gaussian-stage iteration budget of the mixed schedule.
pub const DEFAULT_MIXED_GAUSS_ITERS: usize = 100;

const PROB_FLOOR: f64 = 1e-300;
const RADICAND_FLOOR: f64 = 1e-300;

/// Unconstrained optimization coordinates, `d−1` entries each.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodParams {
    pub x_prime: Array1<f64>,
    pub y_prime: Array1<f64>,
}

impl LikelihoodParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            x_prime: Array1::zeros(dim - 1),
            y_prime: Array1::zeros(dim - 1),
        }
    }

    /// State-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.x_prime.len() + 1
    }

    fn pack(&self) -> Array1<f64> {
        let k = self.x_prime.len();
        let mut out = Array1::zeros(2 * k);
        out.slice_mut(s![..k]).assign(&self.x_prime);
        out.slice_mut(s![k..]).assign(&self.y_prime);
        out
    }

    fn unpack(packed: &Array1<f64>) -> Self {
        let k = packed.len() / 2;
        Self {
            x_prime: packed.slice(s![..k]).to_owned(),
            y_prime: packed.slice(s![k..]).to_owned(),
        }
    }
}

/// `(2/π)·atan(r′)/r′`, the prime-to-ball radial factor.
fn atan_factor(r_prime: f64) -> f64 {
    const TWO_OVER_PI: f64 = std::f64::consts::FRAC_2_PI;
    if r_prime < 1e-8 {
        TWO_OVER_PI * (1.0 - r_prime * r_prime / 3.0)
    } else {
        TWO_OVER_PI * r_prime.atan() / r_prime
    }
}

/// Derivative of the radial factor divided by `r′` (finite at 0).
fn atan_factor_slope(r_prime: f64) -> f64 {
    const TWO_OVER_PI: f64 = std::f64::consts::FRAC_2_PI;
    if r_prime < 1e-4 {
        TWO_OVER_PI * (-2.0 / 3.0 + 0.8 * r_prime * r_prime)
    } else {
        let r3 = r_prime * r_prime * r_prime;
        TWO_OVER_PI * (r_prime / (1.0 + r_prime * r_prime) - r_prime.atan()) / r3
    }
}

/// `tan(πr/2)/r`, the ball-to-prime radial factor.
fn tan_factor(r: f64) -> f64 {
    const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
    if r < 1e-8 {
        HALF_PI * (1.0 + (HALF_PI * r) * (HALF_PI * r) / 3.0)
    } else {
        (HALF_PI * r).tan() / r
    }
}

/// Maps unconstrained parameters to the unit-norm state
/// `[√(1−r²), x₁+iy₁, …]`; unit norm holds by construction.
pub fn params_to_state(params: &LikelihoodParams) -> StateVector {
    let k = params.x_prime.len();
    let r_prime = (params.x_prime.dot(&params.x_prime) + params.y_prime.dot(&params.y_prime))
        .sqrt();
    let c = atan_factor(r_prime);
    let mut amplitudes = CVector::zeros(k + 1);
    let mut r_sqr = 0.0;
    for j in 0..k {
        let x = c * params.x_prime[j];
        let y = c * params.y_prime[j];
        r_sqr += x * x + y * y;
        amplitudes[j + 1] = Complex64::new(x, y);
    }
    amplitudes[0] = Complex64::new((1.0 - r_sqr).max(RADICAND_FLOOR).sqrt(), 0.0);
    StateVector::normalized(amplitudes).expect("nonzero by construction")
}

/// Inverse of [`params_to_state`]: aligns the global phase so the first
/// amplitude is real nonnegative, then applies the tangent map. The
/// caller is expected to have moved a large-modulus component to index 0.
pub fn state_to_params(v: &StateVector) -> LikelihoodParams {
    let amps = v.amplitudes();
    let d = amps.len();
    let phase = if amps[0].norm() > 0.0 {
        amps[0] / amps[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut x = Array1::zeros(d - 1);
    let mut y = Array1::zeros(d - 1);
    let mut r_sqr = 0.0;
    for j in 1..d {
        let w = amps[j] * phase.conj();
        x[j - 1] = w.re;
        y[j - 1] = w.im;
        r_sqr += w.norm_sqr();
    }
    let mut r = r_sqr.sqrt();
    // The tangent map needs r < 1 strictly; on the boundary (first
    // amplitude exactly zero) shrink radially by one ulp's worth.
    const R_MAX: f64 = 1.0 - 1e-12;
    if r > R_MAX {
        let shrink = R_MAX / r;
        x.mapv_inplace(|t| t * shrink);
        y.mapv_inplace(|t| t * shrink);
        r = R_MAX;
    }
    let t = tan_factor(r);
    LikelihoodParams {
        x_prime: x * t,
        y_prime: y * t,
    }
}

/// Transposition of basis index 0 with the largest-modulus index of the
/// initialization state, applied consistently to states and to matrix
/// columns. A swap is its own inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PermutationContext {
    partner: usize,
}

impl PermutationContext {
    pub fn identity() -> Self {
        Self { partner: 0 }
    }

    /// Pairs index 0 with the max-modulus component (lowest index wins
    /// ties).
    pub fn from_state(v: &StateVector) -> Self {
        let mut best = 0usize;
        let mut mag = 0.0f64;
        for (j, z) in v.amplitudes().iter().enumerate() {
            if z.norm() > mag {
                mag = z.norm();
                best = j;
            }
        }
        Self { partner: best }
    }

    pub fn partner(&self) -> usize {
        self.partner
    }

    pub fn apply_to_state(&self, v: &StateVector) -> StateVector {
        let mut amps = v.amplitudes().to_owned();
        amps.swap(0, self.partner);
        StateVector::normalized(amps).expect("norm preserved")
    }

    pub fn apply_to_columns(&self, a: &CMatrix) -> CMatrix {
        let mut out = a.to_owned();
        if self.partner != 0 {
            for i in 0..out.nrows() {
                let tmp = out[(i, 0)];
                out[(i, 0)] = out[(i, self.partner)];
                out[(i, self.partner)] = tmp;
            }
        }
        out
    }
}

/// Measurement counts in a form the likelihoods accept: real-valued
/// per-outcome counts with a common per-type shot count. Idealized
/// (noise-free) data uses `n = N·p` directly.
#[derive(Clone, Debug)]
pub struct CountData {
    counts: Array1<f64>,
    shots_per_type: f64,
}

impl CountData {
    pub fn from_record(rec: &ShotRecord) -> Self {
        let p_hat = sample_probabilities(rec);
        let n = rec.shots_per_type() as f64;
        Self {
            counts: p_hat * n,
            shots_per_type: n,
        }
    }

    /// Idealized real-valued counts `n_k = N·p_k`.
    pub fn from_probabilities(p: &Array1<f64>, shots_per_type: f64) -> Self {
        Self {
            counts: p * shots_per_type,
            shots_per_type,
        }
    }

    pub fn counts(&self) -> &Array1<f64> {
        &self.counts
    }

    pub fn shots_per_type(&self) -> f64 {
        self.shots_per_type
    }

    pub fn p_hat(&self) -> Array1<f64> {
        &self.counts / self.shots_per_type
    }

    pub fn n_prob(&self) -> usize {
        self.counts.len()
    }
}

/// Regularized probabilities `p̃ = (p̂ + c/N)/(1 + c·d/N)`: strictly
/// positive, block sums preserved.
#[derive(Clone, Debug)]
pub struct RegularizedProbs {
    p_tilde: Array1<f64>,
    shots_per_type: f64,
    dim: usize,
}

impl RegularizedProbs {
    pub fn new(data: &CountData, dim: usize, reg_count: f64) -> Result<Self> {
        if reg_count <= 0.0 {
            return Err(Error::InvalidArgument(
                "regularization count must be positive".into(),
            ));
        }
        if !data.n_prob().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: data.n_prob(),
            });
        }
        let n = data.shots_per_type;
        let p_hat = data.p_hat();
        let denom = 1.0 + reg_count * dim as f64 / n;
        let p_tilde = p_hat.mapv(|p| (p + reg_count / n) / denom);
        Ok(Self {
            p_tilde,
            shots_per_type: n,
            dim,
        })
    }

    pub fn p_tilde(&self) -> &Array1<f64> {
        &self.p_tilde
    }

    pub fn shots_per_type(&self) -> f64 {
        self.shots_per_type
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_types(&self) -> usize {
        self.p_tilde.len() / self.dim
    }
}

/// Closed-form inverse covariance of one measurement type's reduced
/// error vector: `Σ̃⁻¹ = (1/p̃_d)·𝟙 + diag(1/p̃̄)`, a `(d−1)×(d−1)` matrix.
pub fn covariance_inverse(p_tilde_block: &[f64]) -> Result<Array2<f64>> {
    let d = p_tilde_block.len();
    if let Some((index, &value)) = p_tilde_block.iter().enumerate().find(|(_, &x)| x <= 0.0) {
        return Err(Error::NegativeProbability { index, value });
    }
    let last = p_tilde_block[d - 1];
    let mut out = Array2::from_elem((d - 1, d - 1), 1.0 / last);
    for j in 0..d - 1 {
        out[(j, j)] += 1.0 / p_tilde_block[j];
    }
    Ok(out)
}

/// Per-type inverse covariance blocks for a multi-type record; their
/// block-diagonal assembly is the inverse covariance of the full reduced
/// error vector.
pub fn covariance_inverse_blocks(reg: &RegularizedProbs) -> Result<Vec<Array2<f64>>> {
    let d = reg.dim();
    (0..reg.n_types())
        .map(|k| covariance_inverse(&reg.p_tilde().as_slice().expect("contiguous")[k * d..(k + 1) * d]))
        .collect()
}

#[derive(Clone, Copy, Debug)]
enum NllKind {
    Exact,
    Gauss,
}

/// Shared evaluation machinery: forward model, objective value, and the
/// analytic gradient chained through the reparameterization.
struct NllEvaluator<'a> {
    a: CMatrix,
    a_adjoint: CMatrix,
    counts: &'a Array1<f64>,
    shots: f64,
    // Gaussian-only data.
    p_hat: Option<Array1<f64>>,
    p_tilde: Option<Array1<f64>>,
    kind: NllKind,
}

impl<'a> NllEvaluator<'a> {
    fn exact(a: CMatrix, data: &'a CountData) -> Self {
        let a_adjoint = adjoint(&a);
        Self {
            a,
            a_adjoint,
            counts: data.counts(),
            shots: data.shots_per_type(),
            p_hat: None,
            p_tilde: None,
            kind: NllKind::Exact,
        }
    }

    fn gauss(a: CMatrix, data: &'a CountData, reg: &RegularizedProbs) -> Self {
        let a_adjoint = adjoint(&a);
        Self {
            a,
            a_adjoint,
            counts: data.counts(),
            shots: data.shots_per_type(),
            p_hat: Some(data.p_hat()),
            p_tilde: Some(reg.p_tilde().clone()),
            kind: NllKind::Gauss,
        }
    }

    fn eval(&self, packed: &Array1<f64>) -> (f64, Array1<f64>) {
        let k = packed.len() / 2;
        let d = k + 1;

        // Prime coordinates -> ball coordinates.
        let r_prime = packed.dot(packed).sqrt();
        let c = atan_factor(r_prime);
        let mut x = Array1::zeros(k);
        let mut y = Array1::zeros(k);
        let mut r_sqr = 0.0;
        for j in 0..k {
            x[j] = c * packed[j];
            y[j] = c * packed[k + j];
            r_sqr += x[j] * x[j] + y[j] * y[j];
        }
        let v1 = (1.0 - r_sqr).max(RADICAND_FLOOR).sqrt();

        // Forward model.
        let mut v = CVector::zeros(d);
        v[0] = Complex64::new(v1, 0.0);
        for j in 0..k {
            v[j + 1] = Complex64::new(x[j], y[j]);
        }
        let z = self.a.dot(&v);
        let p = z.mapv(|w| w.norm_sqr());

        // Objective value and dL/dp.
        let n_prob = p.len();
        let mut value = 0.0;
        let mut sens = Array1::zeros(n_prob);
        match self.kind {
            NllKind::Exact => {
                for i in 0..n_prob {
                    let nk = self.counts[i];
                    if nk != 0.0 {
                        let pf = p[i].max(PROB_FLOOR);
                        value -= nk * pf.ln();
                        sens[i] = -nk / pf;
                    }
                }
            }
            NllKind::Gauss => {
                let p_hat = self.p_hat.as_ref().expect("gauss data");
                let p_tilde = self.p_tilde.as_ref().expect("gauss data");
                for i in 0..n_prob {
                    let eps = p_hat[i] - p[i];
                    value += self.shots * eps * eps / p_tilde[i];
                    sens[i] = -2.0 * self.shots * eps / p_tilde[i];
                }
            }
        }

        // Backpropagation: dL = 2 Re Σ_j g_j dv_j with
        // g = conj(A* (s ∘ z)).
        let sz: CVector = sens
            .iter()
            .zip(z.iter())
            .map(|(&s, w)| w * s)
            .collect();
        let h = self.a_adjoint.dot(&sz);
        let g0 = h[0].conj();
        let mut gx = Array1::zeros(k);
        let mut gy = Array1::zeros(k);
        for j in 0..k {
            let gj = h[j + 1].conj();
            gx[j] = 2.0 * (gj.re - g0.re * x[j] / v1);
            gy[j] = 2.0 * (-gj.im - g0.re * y[j] / v1);
        }

        // Chain through the radial reparameterization.
        let slope = atan_factor_slope(r_prime);
        let mut inner = 0.0;
        for j in 0..k {
            inner += gx[j] * packed[j] + gy[j] * packed[k + j];
        }
        let mut grad = Array1::zeros(2 * k);
        for j in 0..k {
            grad[j] = c * gx[j] + slope * inner * packed[j];
            grad[k + j] = c * gy[j] + slope * inner * packed[k + j];
        }
        (value, grad)
    }
}

/// Exact multinomial negative log-likelihood `−Σ n_k log (|A v|²)_k` and
/// its gradient with respect to `(x′, y′)` (x-block then y-block).
/// Model probabilities are floored at 1e−300 inside the logarithm, and
/// the gradient uses the floored value consistently.
pub fn nll_exact(
    params: &LikelihoodParams,
    data: &CountData,
    a: &StackedMatrix,
    ctx: &PermutationContext,
) -> Result<(f64, Array1<f64>)> {
    check_dims(params, data, a)?;
    let ev = NllEvaluator::exact(ctx.apply_to_columns(a.entries()), data);
    Ok(ev.eval(&params.pack()))
}

/// Gaussian negative log-likelihood `N Σ ε_k²/p̃_k` (ε computed from the
/// raw sample probabilities, not the regularized ones) and its gradient.
pub fn nll_gauss(
    params: &LikelihoodParams,
    data: &CountData,
    a: &StackedMatrix,
    ctx: &PermutationContext,
    reg: &RegularizedProbs,
) -> Result<(f64, Array1<f64>)> {
    check_dims(params, data, a)?;
    if reg.p_tilde().len() != data.n_prob() {
        return Err(Error::DimensionMismatch {
            expected: data.n_prob(),
            actual: reg.p_tilde().len(),
        });
    }
    let ev = NllEvaluator::gauss(ctx.apply_to_columns(a.entries()), data, reg);
    Ok(ev.eval(&params.pack()))
}

fn check_dims(params: &LikelihoodParams, data: &CountData, a: &StackedMatrix) -> Result<()> {
    if params.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: params.dim(),
        });
    }
    if data.n_prob() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows(),
            actual: data.n_prob(),
        });
    }
    Ok(())
}

/// Which likelihood the refinement minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MlObjective {
    Exact,
    Gauss,
    /// A fixed number of Gaussian iterations, then exact to convergence.
    Mixed,
}

impl std::fmt::Display for MlObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MlObjective::Exact => write!(f, "exact"),
            MlObjective::Gauss => write!(f, "gauss"),
            MlObjective::Mixed => write!(f, "mixed"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MinimizeOptions {
    pub objective: MlObjective,
    pub max_iters: usize,
    pub mixed_gauss_iters: usize,
    pub reg_count: f64,
    pub step_tol: f64,
}

impl MinimizeOptions {
    pub fn new(objective: MlObjective) -> Self {
        Self {
            objective,
            max_iters: 10_000,
            mixed_gauss_iters: DEFAULT_MIXED_GAUSS_ITERS,
            reg_count: DEFAULT_REG_COUNT,
            step_tol: 1e-12,
        }
    }
}

/// Result of a likelihood refinement.
#[derive(Clone, Debug)]
pub struct MlEstimate {
    pub v_hat: StateVector,
    /// Accepted BFGS iterations across all stages.
    pub iterations: usize,
    /// False only if the final stage ran out of its iteration budget.
    pub converged: bool,
    pub final_value: f64,
}

/// Refines an initial state against measured counts.
///
/// The initialization's largest component is swapped to index 0 (the
/// matrix columns move with it, the counts don't change), the state is
/// converted to unconstrained coordinates, BFGS runs the selected
/// objective schedule, and the swap is undone on the way out.
pub fn minimize(
    init: &StateVector,
    data: &CountData,
    a: &StackedMatrix,
    opts: &MinimizeOptions,
) -> Result<MlEstimate> {
    if init.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: init.dim(),
        });
    }
    if data.n_prob() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows(),
            actual: data.n_prob(),
        });
    }
    if init.amplitudes().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument(
            "initial state contains non-finite amplitudes".into(),
        ));
    }

    let ctx = PermutationContext::from_state(init);
    let a_perm = ctx.apply_to_columns(a.entries());
    let params0 = state_to_params(&ctx.apply_to_state(init)).pack();

    let bfgs_opts = |max_iters: usize| BfgsOptions {
        max_iters,
        step_tol: opts.step_tol,
        ..BfgsOptions::default()
    };

    let run_exact = |start: Array1<f64>, iters: usize| {
        let ev = NllEvaluator::exact(a_perm.clone(), data);
        bfgs::minimize(|p| ev.eval(p), start, &bfgs_opts(iters))
    };
    let run_gauss = |start: Array1<f64>, iters: usize| -> Result<bfgs::BfgsOutcome> {
        let reg = RegularizedProbs::new(data, a.dim(), opts.reg_count)?;
        let ev = NllEvaluator::gauss(a_perm.clone(), data, &reg);
        Ok(bfgs::minimize(|p| ev.eval(p), start, &bfgs_opts(iters)))
    };

    let (outcome, extra_iters) = match opts.objective {
        MlObjective::Exact => (run_exact(params0, opts.max_iters), 0),
        MlObjective::Gauss => (run_gauss(params0, opts.max_iters)?, 0),
        MlObjective::Mixed => {
            let stage1 = run_gauss(params0, opts.mixed_gauss_iters)?;
            let warm = stage1.iterations;
            (run_exact(stage1.x, opts.max_iters), warm)
        }
    };

    let v_perm = params_to_state(&LikelihoodParams::unpack(&outcome.x));
    Ok(MlEstimate {
        v_hat: ctx.apply_to_state(&v_perm),
        iterations: outcome.iterations + extra_iters,
        converged: outcome.stop != StopReason::MaxIterations,
        final_value: outcome.value,
    })
}
