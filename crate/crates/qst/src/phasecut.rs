//! Phase retrieval by semidefinite relaxation: minimize `tr(UM)` over
//! Hermitian PSD matrices with unit diagonal, by block-coordinate
//! descent, then read the state off the leading eigenvector.

use ndarray::linalg::general_mat_vec_mul;
use ndarray::Array1;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{adjoint, leading_eigenvector, pseudo_inverse, CMatrix, CVector};
use crate::measurements::StackedMatrix;
use crate::states::StateVector;

/// Weighting applied on the diagonal factors of `M`. The magnitude
/// reading `√p̂` is the default; `Raw` uses `p̂` itself for comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProbWeighting {
    #[default]
    Sqrt,
    Raw,
}

/// The data of one relaxed problem: the stacked measurement matrix, the
/// measured magnitudes `b = √p̂`, and `M = diag(w)(I − AA⁺)diag(w)`.
#[derive(Clone, Debug)]
pub struct PhaseCutProblem {
    a: StackedMatrix,
    a_pinv: CMatrix,
    b: Array1<f64>,
    m: CMatrix,
}

impl PhaseCutProblem {
    pub fn a(&self) -> &StackedMatrix {
        &self.a
    }

    pub fn m(&self) -> &CMatrix {
        &self.m
    }

    pub fn n_prob(&self) -> usize {
        self.b.len()
    }
}

/// Builds the relaxation for sample probabilities `p_hat`. The
/// pseudo-inverse is computed once, from a thin QR factorization.
pub fn build_problem(a: &StackedMatrix, p_hat: &Array1<f64>) -> Result<PhaseCutProblem> {
    build_problem_weighted(a, p_hat, ProbWeighting::Sqrt)
}

/// Same as [`build_problem`] with an explicit diagonal weighting.
pub fn build_problem_weighted(
    a: &StackedMatrix,
    p_hat: &Array1<f64>,
    weighting: ProbWeighting,
) -> Result<PhaseCutProblem> {
    let n = a.n_rows();
    if p_hat.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: p_hat.len(),
        });
    }
    if let Some((index, &value)) = p_hat.iter().enumerate().find(|(_, &x)| x < 0.0) {
        return Err(Error::NegativeProbability { index, value });
    }
    let b = p_hat.mapv(f64::sqrt);
    let w = match weighting {
        ProbWeighting::Sqrt => b.clone(),
        ProbWeighting::Raw => p_hat.clone(),
    };
    let a_pinv = pseudo_inverse(a.entries())?;
    let proj = a.entries().dot(&a_pinv); // A A⁺, the projector onto range(A)
    let mut m = CMatrix::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let p_ij = if i == j {
                Complex64::new(1.0, 0.0) - proj[(i, j)]
            } else {
                -proj[(i, j)]
            };
            m[(i, j)] = Complex64::new(w[i], 0.0) * p_ij * Complex64::new(w[j], 0.0);
        }
    }
    // Hermitize to remove factorization round-off.
    let mh = adjoint(&m);
    m.zip_mut_with(&mh, |x, y| *x = (*x + y) * 0.5);
    Ok(PhaseCutProblem {
        a: a.clone(),
        a_pinv,
        b,
        m,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct PhaseCutOptions {
    /// Full passes over all coordinates.
    pub sweeps: usize,
    /// Barrier parameter in (0, 1) regularizing each column update.
    pub nu: f64,
}

impl Default for PhaseCutOptions {
    fn default() -> Self {
        Self {
            sweeps: 10,
            nu: 0.01,
        }
    }
}

impl PhaseCutOptions {
    /// Sweep count whose total coordinate updates best matches a given
    /// update budget (at least one sweep).
    pub fn from_update_budget(updates: usize, n_prob: usize) -> Self {
        Self {
            sweeps: updates.div_ceil(n_prob.max(1)).max(1),
            nu: 0.01,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhaseCutResult {
    /// Unit-norm state estimate `A⁺(û ∗ √p̂)`, renormalized.
    pub v_hat: StateVector,
    /// Unit-modulus phase vector extracted from the relaxation.
    pub u_hat: CVector,
    /// `tr(UM)` before the first sweep and after each sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
    pub coordinate_updates: usize,
}

/// Runs block-coordinate descent from `U = I` and extracts the estimate.
///
/// Each coordinate update solves the column subproblem exactly up to the
/// `(1−ν)` barrier shrink: `c = U_{¬i,¬i} M_{¬i,i}`, `γ = c* M_{¬i,i}`,
/// and the new column is `−c √((1−ν)/γ)` when `γ > 0`, zero otherwise.
/// The objective trace is checked to be non-increasing per sweep.
pub fn solve<R: Rng + ?Sized>(
    problem: &PhaseCutProblem,
    options: &PhaseCutOptions,
    rng: &mut R,
) -> PhaseCutResult {
    let (u, objective_trace, coordinate_updates) =
        bcd_sweeps(&problem.m, options.sweeps, options.nu);

    let eig = leading_eigenvector(&u, 1e-10, 10_000, rng);
    let u_hat: CVector = eig
        .iter()
        .map(|z| {
            let n = z.norm();
            if n > 0.0 {
                z / n
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();

    let weighted: CVector = u_hat
        .iter()
        .zip(problem.b.iter())
        .map(|(u, &b)| u * b)
        .collect();
    let v_raw = problem.a_pinv.dot(&weighted);
    let v_hat = StateVector::normalized(v_raw).unwrap_or_else(|_| {
        // All-zero probabilities leave no information; any fixed state is
        // as good as another.
        StateVector::basis_state(problem.a.dim().trailing_zeros() as usize, 0)
            .expect("valid dimension")
    });

    PhaseCutResult {
        v_hat,
        u_hat,
        objective_trace,
        sweeps: options.sweeps,
        coordinate_updates,
    }
}

/// The BCD loop itself, exposed for inspection in tests.
pub(crate) fn bcd_sweeps(m: &CMatrix, sweeps: usize, nu: f64) -> (CMatrix, Vec<f64>, usize) {
    assert!((0.0..1.0).contains(&nu), "barrier parameter out of range");
    let n = m.nrows();
    let mut u = CMatrix::eye(n);
    let mut trace = Vec::with_capacity(sweeps + 1);
    trace.push(trace_product(&u, m));
    let mut mcol = CVector::zeros(n);
    let mut c = CVector::zeros(n);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    for _ in 0..sweeps {
        for i in 0..n {
            // M column i with the i-th entry removed, zero-padded so a
            // full matvec computes the restricted product.
            for j in 0..n {
                mcol[j] = m[(j, i)];
            }
            mcol[i] = zero;
            general_mat_vec_mul(one, &u, &mcol, zero, &mut c);
            let gamma: f64 = c
                .iter()
                .zip(mcol.iter())
                .map(|(cj, mj)| (cj.conj() * mj).re)
                .sum();
            if gamma > 0.0 {
                let scale = -((1.0 - nu) / gamma).sqrt();
                for j in 0..n {
                    if j != i {
                        let val = c[j] * scale;
                        u[(j, i)] = val;
                        u[(i, j)] = val.conj();
                    }
                }
            } else {
                for j in 0..n {
                    if j != i {
                        u[(j, i)] = zero;
                        u[(i, j)] = zero;
                    }
                }
            }
        }
        let value = trace_product(&u, m);
        let tol = 1e-9 * trace[0].abs().max(1.0);
        assert!(
            value <= trace.last().copied().unwrap_or(f64::INFINITY) + tol,
            "objective increased: {} -> {}",
            trace.last().unwrap(),
            value
        );
        trace.push(value);
    }
    (u, trace, sweeps * n)
}

/// `Re tr(UM)`; the product trace is real for Hermitian U and M.
fn trace_product(u: &CMatrix, m: &CMatrix) -> f64 {
    let n = u.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (u[(i, j)] * m[(j, i)]).re;
        }
    }
    acc
}
