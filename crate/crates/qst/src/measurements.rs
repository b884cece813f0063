//! Measurement setups: per-qubit axis strings, tensor-product eigenvector
//! matrices, the stacked matrices they form, and theoretical outcome
//! probabilities.
//!
//! Conventions: the first character of an axis string addresses qubit 1
//! and is the most significant bit of the outcome index, so `E_{ZX} =
//! E_Z ⊗ E_X`. Only eigenvector matrices are represented; eigenvalues
//! never matter for the outcome probabilities.

use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{kron, CMatrix, CVector};
use crate::states::StateVector;

/// Measurement direction for a single qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => write!(f, "X"),
            Axis::Y => write!(f, "Y"),
            Axis::Z => write!(f, "Z"),
        }
    }
}

impl TryFrom<char> for Axis {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'X' => Ok(Axis::X),
            'Y' => Ok(Axis::Y),
            'Z' => Ok(Axis::Z),
            other => Err(Error::InvalidSetup(format!("unknown axis '{other}'"))),
        }
    }
}

/// One parallel unentangled measurement: an axis per qubit, qubit 1 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MeasurementType {
    axes: Vec<Axis>,
}

impl MeasurementType {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidSetup("empty axis list".into()));
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn n_qb(&self) -> usize {
        self.axes.len()
    }
}

impl FromStr for MeasurementType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes: Result<Vec<Axis>> = s.chars().map(Axis::try_from).collect();
        Self::new(axes?)
    }
}

impl fmt::Display for MeasurementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.axes {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Which family a setup belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetupKind {
    /// 4 measurement types: Z…Z, Y…Y, X…X and alternating XYXY….
    Small,
    /// `2·n_qb + 1` measurement types supporting the recursive estimator.
    Tall,
    /// Caller-provided axis strings.
    Custom,
}

impl fmt::Display for SetupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetupKind::Small => write!(f, "small"),
            SetupKind::Tall => write!(f, "tall"),
            SetupKind::Custom => write!(f, "custom"),
        }
    }
}

/// An ordered list of measurement types over a fixed number of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSetup {
    kind: SetupKind,
    types: Vec<MeasurementType>,
    n_qb: usize,
}

impl MeasurementSetup {
    /// The 4-type setup: `[Z…Z, Y…Y, X…X, XYXY…]` with odd-numbered
    /// qubits along X and even-numbered along Y in the last type.
    pub fn small(n_qb: usize) -> Result<Self> {
        check_n_qb(n_qb)?;
        let uniform = |axis: Axis| MeasurementType::new(vec![axis; n_qb]).expect("nonempty");
        let alternating = MeasurementType::new(
            (0..n_qb)
                .map(|q| if q % 2 == 0 { Axis::X } else { Axis::Y })
                .collect(),
        )
        .expect("nonempty");
        Ok(Self {
            kind: SetupKind::Small,
            types: vec![
                uniform(Axis::Z),
                uniform(Axis::Y),
                uniform(Axis::X),
                alternating,
            ],
            n_qb,
        })
    }

    /// The `2·n_qb + 1`-type setup: `Z…Z`, then for `i = 1..n_qb` the
    /// pairs `Z^{n_qb−i} S X^{i−1}` with `S ∈ {X, Y}`, ending with `X…X`
    /// and `YX…X`.
    pub fn tall(n_qb: usize) -> Result<Self> {
        check_n_qb(n_qb)?;
        let mut types = Vec::with_capacity(2 * n_qb + 1);
        types.push(MeasurementType::new(vec![Axis::Z; n_qb]).expect("nonempty"));
        for i in 1..=n_qb {
            for s in [Axis::X, Axis::Y] {
                let mut axes = vec![Axis::Z; n_qb - i];
                axes.push(s);
                axes.extend(std::iter::repeat_n(Axis::X, i - 1));
                types.push(MeasurementType::new(axes).expect("nonempty"));
            }
        }
        Ok(Self {
            kind: SetupKind::Tall,
            types,
            n_qb,
        })
    }

    /// Arbitrary axis-string list; all strings must share one length.
    pub fn custom(types: Vec<MeasurementType>) -> Result<Self> {
        let n_qb = match types.first() {
            Some(t) => t.n_qb(),
            None => return Err(Error::InvalidSetup("no measurement types given".into())),
        };
        if types.iter().any(|t| t.n_qb() != n_qb) {
            return Err(Error::InvalidSetup(
                "measurement types have mixed qubit counts".into(),
            ));
        }
        check_n_qb(n_qb)?;
        Ok(Self {
            kind: SetupKind::Custom,
            types,
            n_qb,
        })
    }

    pub fn kind(&self) -> SetupKind {
        self.kind
    }

    pub fn types(&self) -> &[MeasurementType] {
        &self.types
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn n_qb(&self) -> usize {
        self.n_qb
    }

    /// Hilbert-space dimension `d = 2^n_qb`.
    pub fn dim(&self) -> usize {
        1usize << self.n_qb
    }

    /// Total number of probabilities, `n_types · d`.
    pub fn n_prob(&self) -> usize {
        self.n_types() * self.dim()
    }
}

fn check_n_qb(n_qb: usize) -> Result<()> {
    if n_qb == 0 {
        return Err(Error::InvalidSetup("qubit count must be at least 1".into()));
    }
    // 2^n_qb complex amplitudes must stay addressable.
    if n_qb > 24 {
        return Err(Error::InvalidSetup(format!(
            "qubit count {n_qb} too large for dense simulation"
        )));
    }
    Ok(())
}

/// 2×2 eigenvector matrix of the single-qubit measurement along `axis`.
pub fn single_qubit_eigs(axis: Axis) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match axis {
        Axis::X => ndarray::array![[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]],
        Axis::Y => ndarray::array![[c(s, 0.0), c(s, 0.0)], [c(0.0, s), c(0.0, -s)]],
        Axis::Z => ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
    }
}

/// `d×d` eigenvector matrix of a parallel measurement: the Kronecker
/// product of the single-qubit matrices, first listed axis outermost.
pub fn eigenvector_matrix(mt: &MeasurementType) -> CMatrix {
    let mut out = single_qubit_eigs(mt.axes()[0]);
    for &axis in &mt.axes()[1..] {
        out = kron(&out, &single_qubit_eigs(axis));
    }
    out
}

/// Vertical stack of the conjugate-transposed eigenvector matrices of a
/// setup, one `d×d` unitary block per measurement type.
#[derive(Clone, Debug)]
pub struct StackedMatrix {
    entries: CMatrix,
    n_types: usize,
    dim: usize,
}

impl StackedMatrix {
    /// Wraps raw entries; rows must split evenly into `n_types` blocks.
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) fn from_parts(entries: CMatrix, n_types: usize) -> Result<Self> {
        let dim = entries.ncols();
        if n_types == 0 || entries.nrows() != n_types * dim {
            return Err(Error::DimensionMismatch {
                expected: n_types * dim,
                actual: entries.nrows(),
            });
        }
        Ok(Self {
            entries,
            n_types,
            dim,
        })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    /// Column count `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row count `n_types · d`.
    pub fn n_rows(&self) -> usize {
        self.entries.nrows()
    }

    /// View of the `k`-th `d×d` block.
    pub fn block(&self, k: usize) -> ndarray::ArrayView2<'_, Complex64> {
        self.entries
            .slice(ndarray::s![k * self.dim..(k + 1) * self.dim, ..])
    }

    /// `A v` for a raw amplitude vector.
    pub fn apply(&self, v: &CVector) -> CVector {
        self.entries.dot(v)
    }
}

/// Builds the stacked measurement matrix of a setup.
pub fn stacked_matrix(setup: &MeasurementSetup) -> StackedMatrix {
    let d = setup.dim();
    let n_types = setup.n_types();
    let mut entries = CMatrix::zeros((n_types * d, d));
    for (k, mt) in setup.types().iter().enumerate() {
        let e = eigenvector_matrix(mt);
        for i in 0..d {
            for j in 0..d {
                // Conjugate transpose of the eigenvector matrix.
                entries[(k * d + i, j)] = e[(j, i)].conj();
            }
        }
    }
    StackedMatrix {
        entries,
        n_types,
        dim: d,
    }
}

/// Theoretical outcome probabilities `|A v|²` for all types of a setup;
/// each `d`-block sums to 1.
pub fn probabilities(setup: &MeasurementSetup, v: &StateVector) -> Result<Array1<f64>> {
    if setup.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: setup.dim(),
            actual: v.dim(),
        });
    }
    let a = stacked_matrix(setup);
    Ok(probabilities_from_matrix(&a, v.amplitudes()))
}

/// `|A v|²` for an already-built stacked matrix and raw amplitudes.
pub fn probabilities_from_matrix(a: &StackedMatrix, v: &CVector) -> Array1<f64> {
    a.apply(v).mapv(|z| z.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::adjoint;
    use crate::rng::seeded;
    use crate::states::random_state;

    fn assert_matrix_close(a: &CMatrix, b: &CMatrix, tol: f64) {
        assert_eq!(a.dim(), b.dim());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < tol, "{x} vs {y}");
        }
    }

    #[test]
    fn single_qubit_matrices_match_definitions() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ez = single_qubit_eigs(Axis::Z);
        assert_matrix_close(&ez, &CMatrix::eye(2), 1e-15);

        let ex = single_qubit_eigs(Axis::X);
        assert!((ex[(0, 0)].re - s).abs() < 1e-15);
        assert!((ex[(1, 1)].re + s).abs() < 1e-15);

        let ey = single_qubit_eigs(Axis::Y);
        assert!((ey[(1, 0)] - Complex64::new(0.0, s)).norm() < 1e-15);
        assert!((ey[(1, 1)] - Complex64::new(0.0, -s)).norm() < 1e-15);
    }

    #[test]
    fn zx_tensor_product_matches_displayed_matrix() {
        let zx: MeasurementType = "ZX".parse().unwrap();
        let e = eigenvector_matrix(&zx);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expect = ndarray::array![
            [s, s, 0.0, 0.0],
            [s, -s, 0.0, 0.0],
            [0.0, 0.0, s, s],
            [0.0, 0.0, s, -s],
        ]
        .mapv(|x: f64| Complex64::new(x, 0.0));
        assert_matrix_close(&e, &expect, 1e-15);
    }

    #[test]
    fn xx_tensor_product_by_hand() {
        let xx: MeasurementType = "XX".parse().unwrap();
        let e = eigenvector_matrix(&xx);
        let h = 0.5;
        let expect = ndarray::array![
            [h, h, h, h],
            [h, -h, h, -h],
            [h, h, -h, -h],
            [h, -h, -h, h],
        ]
        .mapv(|x: f64| Complex64::new(x, 0.0));
        assert_matrix_close(&e, &expect, 1e-15);
    }

    #[test]
    fn all_z_is_identity() {
        for n_qb in 1..=4 {
            let mt = MeasurementType::new(vec![Axis::Z; n_qb]).unwrap();
            let e = eigenvector_matrix(&mt);
            assert_matrix_close(&e, &CMatrix::eye(1 << n_qb), 1e-15);
        }
    }

    #[test]
    fn small_setup_shape_and_first_block() {
        let setup = MeasurementSetup::small(1).unwrap();
        assert_eq!(setup.n_types(), 4);
        let a = stacked_matrix(&setup);
        assert_eq!(a.entries().dim(), (8, 2));
        assert_matrix_close(&a.block(0).to_owned(), &CMatrix::eye(2), 1e-15);

        let s7 = MeasurementSetup::small(7).unwrap();
        assert_eq!(s7.types()[3].to_string(), "XYXYXYX");
    }

    #[test]
    fn tall_setup_block_list() {
        let t1 = MeasurementSetup::tall(1).unwrap();
        let names: Vec<String> = t1.types().iter().map(|t| t.to_string()).collect();
        assert_eq!(names, vec!["Z", "X", "Y"]);
        assert_eq!(stacked_matrix(&t1).entries().dim(), (6, 2));

        let t3 = MeasurementSetup::tall(3).unwrap();
        let names: Vec<String> = t3.types().iter().map(|t| t.to_string()).collect();
        assert_eq!(names, vec!["ZZZ", "ZZX", "ZZY", "ZXX", "ZYX", "XXX", "YXX"]);
        assert_eq!(stacked_matrix(&t3).entries().dim(), (56, 8));
    }

    #[test]
    fn blocks_are_unitary() {
        for setup in [
            MeasurementSetup::small(3).unwrap(),
            MeasurementSetup::tall(3).unwrap(),
            MeasurementSetup::custom(vec!["XZY".parse().unwrap(), "YYZ".parse().unwrap()])
                .unwrap(),
        ] {
            let a = stacked_matrix(&setup);
            for k in 0..setup.n_types() {
                let b = a.block(k).to_owned();
                let prod = b.dot(&adjoint(&b));
                assert_matrix_close(&prod, &CMatrix::eye(setup.dim()), 1e-12);
            }
        }
    }

    #[test]
    fn probability_blocks_sum_to_one() {
        let mut rng = seeded(101);
        for n_qb in 1..=6 {
            let setups = [
                MeasurementSetup::small(n_qb).unwrap(),
                MeasurementSetup::tall(n_qb).unwrap(),
            ];
            for setup in setups {
                for _ in 0..10 {
                    let v = random_state(n_qb, &mut rng);
                    let p = probabilities(&setup, &v).unwrap();
                    assert!(p.iter().all(|&x| x >= 0.0));
                    let d = setup.dim();
                    for k in 0..setup.n_types() {
                        let block_sum: f64 = p.iter().skip(k * d).take(d).sum();
                        assert!((block_sum - 1.0).abs() < 1e-12, "block {k}: {block_sum}");
                    }
                }
            }
        }
    }

    #[test]
    fn tall_one_qubit_closed_form() {
        // |A_t(1) v|² written out in terms of moduli and relative phase.
        let mut rng = seeded(103);
        let setup = MeasurementSetup::tall(1).unwrap();
        for _ in 0..100 {
            let v = random_state(1, &mut rng);
            let p = probabilities(&setup, &v).unwrap();
            let v1 = v.amplitudes()[0];
            let v2 = v.amplitudes()[1];
            let (m1, m2) = (v1.norm(), v2.norm());
            let theta = v2.arg() - v1.arg();
            let expect = [
                m1 * m1,
                m2 * m2,
                0.5 * (m1 * m1 + m2 * m2 + 2.0 * m1 * m2 * theta.cos()),
                0.5 * (m1 * m1 + m2 * m2 - 2.0 * m1 * m2 * theta.cos()),
                0.5 * (m1 * m1 + m2 * m2 + 2.0 * m1 * m2 * theta.sin()),
                0.5 * (m1 * m1 + m2 * m2 - 2.0 * m1 * m2 * theta.sin()),
            ];
            for (got, want) in p.iter().zip(expect.iter()) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_probability_examples() {
        let tall1 = MeasurementSetup::tall(1).unwrap();
        let e0 = StateVector::basis_state(1, 0).unwrap();
        let p = probabilities(&tall1, &e0).unwrap();
        let expect = [1.0, 0.0, 0.5, 0.5, 0.5, 0.5];
        for (got, want) in p.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-15);
        }

        // |+⟩ measured along X is deterministic.
        let x_only = MeasurementSetup::custom(vec!["X".parse().unwrap()]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::new(
            ndarray::array![Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            1e-12,
        )
        .unwrap();
        let p = probabilities(&x_only, &plus).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-12);

        // (|0⟩ + i|1⟩)/√2 measured along Y is deterministic.
        let y_only = MeasurementSetup::custom(vec!["Y".parse().unwrap()]).unwrap();
        let plus_i = StateVector::new(
            ndarray::array![Complex64::new(s, 0.0), Complex64::new(0.0, s)],
            1e-12,
        )
        .unwrap();
        let p = probabilities(&y_only, &plus_i).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-12);
    }

    #[test]
    fn custom_setup_validation() {
        assert!(MeasurementSetup::custom(vec![]).is_err());
        let mixed = MeasurementSetup::custom(vec!["XZ".parse().unwrap(), "X".parse().unwrap()]);
        assert!(mixed.is_err());
        assert!("XQ".parse::<MeasurementType>().is_err());
    }
}
