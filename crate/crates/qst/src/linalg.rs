//! Dense complex linear algebra helpers: Kronecker products, a thin-QR
//! pseudo-inverse, and power iteration for the leading eigenvector.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type CMatrix = Array2<Complex64>;
pub type CVector = Array1<Complex64>;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMatrix::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Conjugate transpose.
pub fn adjoint(a: &CMatrix) -> CMatrix {
    let (r, c) = a.dim();
    let mut out = CMatrix::zeros((c, r));
    for i in 0..r {
        for j in 0..c {
            out[(j, i)] = a[(i, j)].conj();
        }
    }
    out
}

/// Thin QR factorization of an m×n matrix with m ≥ n, by modified
/// Gram-Schmidt with one reorthogonalization pass. Returns (Q, R) with
/// Q m×n (orthonormal columns) and R n×n upper triangular.
pub fn thin_qr(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let (m, n) = a.dim();
    if m < n {
        return Err(Error::InvalidArgument(format!(
            "thin_qr needs at least as many rows as columns, got {m}x{n}"
        )));
    }
    let mut q = a.clone();
    let mut r = CMatrix::zeros((n, n));
    for j in 0..n {
        // Two MGS passes against the previous columns keep Q orthonormal
        // even for moderately ill-conditioned input.
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i).to_owned();
                let proj: Complex64 = qi
                    .iter()
                    .zip(q.column(j).iter())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                r[(i, j)] += proj;
                let mut col = q.column_mut(j);
                for (c, x) in col.iter_mut().zip(qi.iter()) {
                    *c -= proj * x;
                }
            }
        }
        let norm = q.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let col_scale = a.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= 1e-12 * col_scale.max(1e-300) {
            return Err(Error::RankDeficient(j));
        }
        r[(j, j)] = Complex64::new(norm, 0.0);
        let inv = Complex64::new(1.0 / norm, 0.0);
        q.column_mut(j).mapv_inplace(|z| z * inv);
    }
    Ok((q, r))
}

/// Moore-Penrose pseudo-inverse of a full-column-rank m×n matrix (m ≥ n),
/// computed as `R⁻¹ Q*` from the thin QR factorization.
pub fn pseudo_inverse(a: &CMatrix) -> Result<CMatrix> {
    let (q, r) = thin_qr(a)?;
    let qh = adjoint(&q);
    // Back-substitution: solve R X = Q* column by column.
    let n = r.nrows();
    let m = qh.ncols();
    let mut x = qh;
    for col in 0..m {
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in i + 1..n {
                s -= r[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / r[(i, i)];
        }
    }
    Ok(x)
}

/// Leading eigenvector of a Hermitian positive semidefinite matrix by
/// power iteration with a Rayleigh-quotient stopping rule: relative
/// eigenvalue change below `tol` or `max_iters` iterations.
pub fn leading_eigenvector<R: Rng + ?Sized>(
    h: &CMatrix,
    tol: f64,
    max_iters: usize,
    rng: &mut R,
) -> CVector {
    let n = h.nrows();
    let mut v: CVector = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    normalize_in_place(&mut v);
    let mut lambda_old = f64::INFINITY;
    for _ in 0..max_iters {
        let mut w = h.dot(&v);
        let lambda: f64 = v
            .iter()
            .zip(w.iter())
            .map(|(x, y)| (x.conj() * y).re)
            .sum();
        let norm = normalize_in_place(&mut w);
        if norm == 0.0 {
            // h annihilates v; v itself spans an eigenspace of 0.
            return v;
        }
        v = w;
        if (lambda - lambda_old).abs() <= tol * lambda.abs().max(1.0) {
            break;
        }
        lambda_old = lambda;
    }
    v
}

fn normalize_in_place(v: &mut CVector) -> f64 {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        let inv = Complex64::new(1.0 / norm, 0.0);
        v.mapv_inplace(|z| z * inv);
    }
    norm
}

/// ‖a v − b‖₂ style residual helper: squared L2 norm of a complex vector.
pub fn norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
