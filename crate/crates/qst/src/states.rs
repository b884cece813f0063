//! State vectors, random state generation, and the phase-invariant error
//! metric used to compare a reconstruction against the truth.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::CVector;

/// Maximal value of the error metric, attained by orthogonal states.
pub const MU_MAX: f64 = std::f64::consts::SQRT_2;

/// A pure `n_qb`-qubit state: a unit-norm complex vector of length `2^n_qb`.
///
/// The global phase is physically meaningless and is *not* canonicalized
/// here; comparisons go through [`error_mu`], which is phase invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
    n_qb: usize,
}

impl StateVector {
    /// Builds a state from amplitudes that are already normalized within
    /// `tol`, then renormalizes exactly.
    pub fn new(amplitudes: CVector, tol: f64) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        if (norm - 1.0).abs() > tol {
            return Err(Error::NotNormalized { norm, tol });
        }
        Self::normalized(amplitudes)
    }

    /// Builds a state from any nonzero amplitude vector, normalizing it.
    pub fn normalized(mut amplitudes: CVector) -> Result<Self> {
        let d = amplitudes.len();
        if d == 0 || !d.is_power_of_two() || d < 2 {
            return Err(Error::NotPowerOfTwo(d));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let inv = Complex64::new(1.0 / norm, 0.0);
        amplitudes.mapv_inplace(|z| z * inv);
        Ok(Self {
            amplitudes,
            n_qb: d.trailing_zeros() as usize,
        })
    }

    pub fn n_qb(&self) -> usize {
        self.n_qb
    }

    /// Hilbert-space dimension `d = 2^n_qb`.
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    /// Computational basis state `e_j`.
    pub fn basis_state(n_qb: usize, j: usize) -> Result<Self> {
        let d = 1usize << n_qb;
        if j >= d {
            return Err(Error::InvalidArgument(format!(
                "basis index {j} out of range for {n_qb} qubits"
            )));
        }
        let mut amplitudes = CVector::from_elem(d, Complex64::new(0.0, 0.0));
        amplitudes[j] = Complex64::new(1.0, 0.0);
        Self::normalized(amplitudes)
    }

    /// Multiplies by `e^{iφ}` (yields the same physical state).
    pub fn with_global_phase(&self, phi: f64) -> Self {
        let ph = Complex64::from_polar(1.0, phi);
        Self {
            amplitudes: self.amplitudes.mapv(|z| z * ph),
            n_qb: self.n_qb,
        }
    }
}

/// Phase-aligned distance between two states and the associated fidelity.
#[derive(Clone, Copy, Debug)]
pub struct StateError {
    /// `μ = ‖v − v̂ e^{−iξ}‖₂` minimized over the global phase ξ.
    pub mu: f64,
    /// Overlap `|v* v̂|`; equals `1 − μ²/2`.
    pub fidelity: f64,
}

/// Haar-uniform random pure state: i.i.d. standard complex normal
/// amplitudes, normalized.
pub fn random_state<R: Rng + ?Sized>(n_qb: usize, rng: &mut R) -> StateVector {
    assert!(n_qb >= 1, "need at least one qubit");
    let d = 1usize << n_qb;
    let amplitudes: CVector = (0..d)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    // A zero draw has probability zero; retry rather than panic.
    match StateVector::normalized(amplitudes) {
        Ok(v) => v,
        Err(_) => random_state(n_qb, rng),
    }
}

/// Error metric between a reference state and an estimate.
///
/// `μ = ‖v − v̂ e^{−iξ}‖₂` with `e^{iξ} = v* v̂ / |v* v̂|`; if the overlap is
/// exactly zero, ξ is taken as 0 (μ is √2 regardless).
pub fn error_mu(v: &StateVector, v_hat: &StateVector) -> Result<StateError> {
    if v.dim() != v_hat.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            actual: v_hat.dim(),
        });
    }
    let overlap: Complex64 = v
        .amplitudes()
        .iter()
        .zip(v_hat.amplitudes().iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    let fidelity = overlap.norm();
    let phase = if fidelity > 0.0 {
        overlap / fidelity
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mu_sqr: f64 = v
        .amplitudes()
        .iter()
        .zip(v_hat.amplitudes().iter())
        .map(|(a, b)| (a - b * phase.conj()).norm_sqr())
        .sum();
    Ok(StateError {
        mu: mu_sqr.max(0.0).sqrt(),
        fidelity,
    })
}

/// Convenience accessor for just the μ value.
pub fn mu(v: &StateVector, v_hat: &StateVector) -> Result<f64> {
    Ok(error_mu(v, v_hat)?.mu)
}

/// Builds a state at a prescribed error from `v`: draws a random unit
/// vector, orthogonalizes it against `v`, and mixes
/// `v̂ = cos(a)·v + sin(a)·w` with `a = arccos(1 − μ²/2)`.
pub fn state_at_error<R: Rng + ?Sized>(
    v: &StateVector,
    mu_target: f64,
    rng: &mut R,
) -> Result<StateVector> {
    if !(0.0..=MU_MAX + 1e-12).contains(&mu_target) {
        return Err(Error::InvalidArgument(format!(
            "mu target {mu_target} outside [0, sqrt(2)]"
        )));
    }
    if mu_target == 0.0 {
        return Ok(v.clone());
    }
    let w = loop {
        let candidate = random_state(v.n_qb(), rng);
        let proj: Complex64 = v
            .amplitudes()
            .iter()
            .zip(candidate.amplitudes().iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let ortho: CVector = candidate
            .amplitudes()
            .iter()
            .zip(v.amplitudes().iter())
            .map(|(c, a)| c - proj * a)
            .collect();
        if let Ok(w) = StateVector::normalized(ortho) {
            break w;
        }
    };
    let a = (1.0 - mu_target * mu_target / 2.0).clamp(-1.0, 1.0).acos();
    let (sin_a, cos_a) = a.sin_cos();
    let mixed: CVector = v
        .amplitudes()
        .iter()
        .zip(w.amplitudes().iter())
        .map(|(x, y)| x * cos_a + y * sin_a)
        .collect();
    StateVector::normalized(mixed)
}

/// Inner product `v* w` (conjugate-linear in the first argument).
pub fn overlap(v: &StateVector, w: &StateVector) -> Complex64 {
    v.amplitudes()
        .iter()
        .zip(w.amplitudes().iter())
        .map(|(a, b)| a.conj() * b)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn random_state_is_unit_norm_and_deterministic() {
        let v = random_state(1, &mut seeded(5));
        let norm: f64 = v.amplitudes().iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);

        let a = random_state(3, &mut seeded(11));
        let b = random_state(3, &mut seeded(11));
        assert_eq!(a.amplitudes(), b.amplitudes());
    }

    #[test]
    fn haar_symmetry_monte_carlo() {
        // Over many draws each component carries 1/d of the mass.
        let mut rng = seeded(17);
        let draws = 100_000;
        let mut acc = [0.0f64; 4];
        for _ in 0..draws {
            let v = random_state(2, &mut rng);
            for (a, z) in acc.iter_mut().zip(v.amplitudes().iter()) {
                *a += z.norm_sqr();
            }
        }
        for a in acc {
            assert!((a / draws as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn mu_zero_under_global_phase() {
        let mut rng = seeded(23);
        let v = random_state(3, &mut rng);
        for k in 0..16 {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let err = error_mu(&v, &v.with_global_phase(phi)).unwrap();
            assert!(err.mu < 1e-12, "mu {} at phi {phi}", err.mu);
        }
    }

    #[test]
    fn mu_sqrt2_for_orthogonal() {
        let v = StateVector::basis_state(1, 0).unwrap();
        let w = StateVector::basis_state(1, 1).unwrap();
        let err = error_mu(&v, &w).unwrap();
        assert!((err.mu - MU_MAX).abs() < 1e-12);
        assert!(err.fidelity.abs() < 1e-12);
    }

    #[test]
    fn fidelity_matches_one_minus_half_mu_sqr() {
        let mut rng = seeded(29);
        for _ in 0..50 {
            let v = random_state(2, &mut rng);
            let w = random_state(2, &mut rng);
            let err = error_mu(&v, &w).unwrap();
            assert!((err.fidelity - (1.0 - err.mu * err.mu / 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn mu_is_symmetric() {
        let mut rng = seeded(31);
        for _ in 0..20 {
            let v = random_state(3, &mut rng);
            let w = random_state(3, &mut rng);
            let ab = error_mu(&v, &w).unwrap().mu;
            let ba = error_mu(&w, &v).unwrap().mu;
            assert!((ab - ba).abs() < 1e-12);
        }
    }

    #[test]
    fn state_at_error_hits_target() {
        let mut rng = seeded(37);
        let v = random_state(3, &mut rng);
        for k in 0..100 {
            let target = MU_MAX * k as f64 / 99.0;
            let v_hat = state_at_error(&v, target, &mut rng).unwrap();
            let got = error_mu(&v, &v_hat).unwrap().mu;
            assert!((got - target).abs() < 1e-9, "target {target} got {got}");
        }
    }

    #[test]
    fn state_at_error_extremes() {
        let mut rng = seeded(41);
        let v = random_state(2, &mut rng);
        let same = state_at_error(&v, 0.0, &mut rng).unwrap();
        assert!(error_mu(&v, &same).unwrap().mu < 1e-12);
        let orth = state_at_error(&v, MU_MAX, &mut rng).unwrap();
        assert!(overlap(&v, &orth).norm() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let v = StateVector::basis_state(1, 0).unwrap();
        let w = StateVector::basis_state(2, 0).unwrap();
        assert!(matches!(
            error_mu(&v, &w),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
