//! Dense complex linear algebra for desk-scale Hilbert spaces and the quantum
//! objects built on it.
//!
//! Every matrix-valued object is a [`CMatrix`]. The newtypes ([`DensityMatrix`],
//! [`UnitaryOp`], [`MeasurementOperator`], [`Povm`], [`Observable`]) check
//! their invariants once at construction and are immutable afterwards.
//!
//! On disk, a complex number is a two-element array `[re, im]` and a matrix is
//! a row-major array of rows.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Hermiticity tolerance for states, unitaries and observables.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on the trace of a density matrix and on POVM completeness.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a positive semidefinite operator.
pub const PSD_TOL: f64 = -1e-10;
/// Maximum deviation of `U†U` from the identity.
pub const UNITARY_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

// ---------------------------------------------------------------------------
// matrix helpers

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// `|ψ⟩⟨ψ|` for a (not necessarily normalised) column vector.
pub fn outer(psi: &[Complex64]) -> CMatrix {
    let d = psi.len();
    CMatrix::from_fn(d, d, |r, c| psi[r] * psi[c].conj())
}

/// Projector onto a computational basis state.
pub fn basis_projector(d: usize, index: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(index, index)] = ONE;
    m
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let d = a.nrows();
    let mut acc = ZERO;
    for r in 0..d {
        for c in 0..a.ncols() {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    eigenvalues(m).last().copied().unwrap_or(0.0)
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// serialization

/// Row-major nested `[re, im]` representation used by every file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixRepr(pub Vec<Vec<[f64; 2]>>);

impl From<&CMatrix> for MatrixRepr {
    fn from(m: &CMatrix) -> Self {
        MatrixRepr(
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                .collect(),
        )
    }
}

impl TryFrom<MatrixRepr> for CMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<CMatrix> {
        let rows = repr.0.len();
        let cols = repr.0.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if let Some(bad) = repr.0.iter().find(|row| row.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, found: bad.len() });
        }
        let m = CMatrix::from_fn(rows, cols, |r, c| {
            let [re, im] = repr.0[r][c];
            Complex64::new(re, im)
        });
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }
}

/// `#[serde(with = "matrix_serde")]` adapter for bare [`CMatrix`] fields.
pub mod matrix_serde {
    use super::{CMatrix, MatrixRepr};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixRepr::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let repr = MatrixRepr::deserialize(d)?;
        CMatrix::try_from(repr).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// quantum objects

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::BadTrace(tr.re));
        }
        let min = min_eigenvalue(&matrix);
        if min < PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { matrix })
    }

    /// Takes the Hermitian part and rescales to unit trace. For iterates of
    /// numerical routines whose output is positive up to rounding.
    pub fn from_unnormalized(matrix: &CMatrix) -> Result<Self> {
        let h = hermitian_part(matrix);
        let tr = h.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::BadTrace(tr));
        }
        Self::new(h.unscale(tr))
    }

    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        Self::from_unnormalized(&outer(psi))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { matrix: identity(d).unscale(d as f64) }
    }

    /// `p ρ₁ + (1 − p) ρ₂`.
    pub fn mixture(&self, other: &DensityMatrix, p: f64) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Self::new(self.matrix.scale(p) + other.matrix.scale(1.0 - p))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues(&self.matrix)
    }

    /// Trace distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.matrix - &other.matrix;
        0.5 * eigenvalues(&diff).iter().map(|x| x.abs()).sum::<f64>()
    }

    /// `Tr(O ρ)`.
    pub fn expectation(&self, observable: &Observable) -> f64 {
        trace_product(observable.matrix(), &self.matrix).re
    }
}

impl TryFrom<MatrixRepr> for DensityMatrix {
    type Error = Error;
    fn try_from(repr: MatrixRepr) -> Result<Self> {
        DensityMatrix::new(CMatrix::try_from(repr)?)
    }
}

impl From<DensityMatrix> for MatrixRepr {
    fn from(rho: DensityMatrix) -> Self {
        MatrixRepr::from(&rho.matrix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LabelledMatrix", into = "LabelledMatrix")]
pub struct UnitaryOp {
    label: String,
    matrix: CMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelledMatrix {
    pub label: String,
    pub matrix: MatrixRepr,
}

impl UnitaryOp {
    pub fn new(label: impl Into<String>, matrix: CMatrix) -> Result<Self> {
        let d = check_square(&matrix)?;
        let dev = max_abs_diff(&(matrix.adjoint() * &matrix), &identity(d));
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { label: label.into(), matrix })
    }

    pub fn identity(d: usize) -> Self {
        Self { label: "identity".into(), matrix: identity(d) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `U† A U`.
    pub fn conjugate_heisenberg(&self, a: &CMatrix) -> CMatrix {
        self.matrix.adjoint() * a * &self.matrix
    }

    /// `U A U†`.
    pub fn conjugate_schrodinger(&self, a: &CMatrix) -> CMatrix {
        &self.matrix * a * self.matrix.adjoint()
    }
}

impl TryFrom<LabelledMatrix> for UnitaryOp {
    type Error = Error;
    fn try_from(lm: LabelledMatrix) -> Result<Self> {
        UnitaryOp::new(lm.label, CMatrix::try_from(lm.matrix)?)
    }
}

impl From<UnitaryOp> for LabelledMatrix {
    fn from(u: UnitaryOp) -> Self {
        LabelledMatrix { matrix: MatrixRepr::from(&u.matrix), label: u.label }
    }
}

/// Positive semidefinite measurement operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct MeasurementOperator {
    matrix: CMatrix,
}

impl MeasurementOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let min = min_eigenvalue(&matrix);
        if min < PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Numerical rank, counting eigenvalues above `1e-10`.
    pub fn rank(&self) -> usize {
        eigenvalues(&self.matrix).iter().filter(|&&x| x > 1e-10).count()
    }
}

impl TryFrom<MatrixRepr> for MeasurementOperator {
    type Error = Error;
    fn try_from(repr: MatrixRepr) -> Result<Self> {
        MeasurementOperator::new(CMatrix::try_from(repr)?)
    }
}

impl From<MeasurementOperator> for MatrixRepr {
    fn from(m: MeasurementOperator) -> Self {
        MatrixRepr::from(&m.matrix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MeasurementOperator>", into = "Vec<MeasurementOperator>")]
pub struct Povm {
    elements: Vec<MeasurementOperator>,
}

impl Povm {
    pub fn new(elements: Vec<MeasurementOperator>) -> Result<Self> {
        let d = elements.first().map(MeasurementOperator::dim).ok_or(Error::Incomplete(1.0))?;
        for e in &elements {
            check_dim(d, e.dim())?;
        }
        let sum = elements.iter().fold(CMatrix::zeros(d, d), |acc, e| acc + e.matrix());
        let dev = max_abs_diff(&sum, &identity(d));
        if dev > TRACE_TOL {
            return Err(Error::Incomplete(dev));
        }
        Ok(Self { elements })
    }

    pub fn from_matrices(ms: Vec<CMatrix>) -> Result<Self> {
        Self::new(ms.into_iter().map(MeasurementOperator::new).collect::<Result<_>>()?)
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[MeasurementOperator] {
        &self.elements
    }
}

impl TryFrom<Vec<MeasurementOperator>> for Povm {
    type Error = Error;
    fn try_from(v: Vec<MeasurementOperator>) -> Result<Self> {
        Povm::new(v)
    }
}

impl From<Povm> for Vec<MeasurementOperator> {
    fn from(p: Povm) -> Self {
        p.elements
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LabelledMatrix", into = "LabelledMatrix")]
pub struct Observable {
    label: String,
    matrix: CMatrix,
}

impl Observable {
    pub fn new(label: impl Into<String>, matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { label: label.into(), matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `(λ_min, λ_max)`.
    pub fn spectral_range(&self) -> (f64, f64) {
        let ev = eigenvalues(&self.matrix);
        (ev[0], ev[ev.len() - 1])
    }
}

impl TryFrom<LabelledMatrix> for Observable {
    type Error = Error;
    fn try_from(lm: LabelledMatrix) -> Result<Self> {
        Observable::new(lm.label, CMatrix::try_from(lm.matrix)?)
    }
}

impl From<Observable> for LabelledMatrix {
    fn from(o: Observable) -> Self {
        LabelledMatrix { matrix: MatrixRepr::from(&o.matrix), label: o.label }
    }
}

// ---------------------------------------------------------------------------
// operations

/// `U(θ, φ)^{⊗n}` with `U(θ, φ) = exp[−i θ/2 (σx cos φ + σy sin φ)]`.
///
/// Uses `exp(−i a n̂·σ) = cos a 𝟙 − i sin a n̂·σ`.
pub fn rotation_gate(theta: f64, phi: f64, num_qubits: usize) -> UnitaryOp {
    assert!(num_qubits >= 1, "rotation_gate needs at least one qubit");
    let (s, c) = (0.5 * theta).sin_cos();
    let single = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, 0.0),
            -I * s * Complex64::from_polar(1.0, -phi),
            -I * s * Complex64::from_polar(1.0, phi),
            Complex64::new(c, 0.0),
        ],
    );
    let mut u = single.clone();
    for _ in 1..num_qubits {
        u = kron(&u, &single);
    }
    UnitaryOp { label: format!("U({theta:.6},{phi:.6})^{num_qubits}"), matrix: u }
}

/// `U ρ U†`.
pub fn evolve_state(rho: &DensityMatrix, u: &UnitaryOp) -> Result<DensityMatrix> {
    check_dim(rho.dim(), u.dim())?;
    DensityMatrix::from_unnormalized(&u.conjugate_schrodinger(rho.matrix()))
}

/// Maps every element `F ↦ U† F U`.
pub fn heisenberg_povm(povm: &Povm, u: &UnitaryOp) -> Result<Povm> {
    check_dim(povm.dim(), u.dim())?;
    let ms = povm
        .elements()
        .iter()
        .map(|f| hermitian_part(&u.conjugate_heisenberg(f.matrix())))
        .collect();
    Povm::from_matrices(ms)
}

/// Born rule `Tr(F ρ)`, clamped to `[0, 1]`.
pub fn born_probability(op: &MeasurementOperator, rho: &DensityMatrix) -> Result<f64> {
    check_dim(rho.dim(), op.dim())?;
    Ok(trace_product(op.matrix(), rho.matrix()).re.clamp(0.0, 1.0))
}

/// Coordinates of a Hermitian matrix in a fixed orthonormal basis of the real
/// vector space of Hermitian matrices, so that `Tr(AB) = ⟨vec A, vec B⟩`.
///
/// Basis order: `E_jj` for each `j`; then `(E_jk + E_kj)/√2` for `j < k` in
/// row-major order; then `i(E_jk − E_kj)/√2` for `j < k` in row-major order.
pub fn hermitian_to_vector(m: &CMatrix) -> Result<DVector<f64>> {
    let d = check_square(m)?;
    let dev = hermitian_deviation(m);
    if dev > TRACE_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let pairs = d * (d - 1) / 2;
    let mut v = DVector::zeros(d * d);
    for j in 0..d {
        v[j] = m[(j, j)].re;
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    for (p, (j, k)) in upper_pairs(d).enumerate() {
        // average the two triangles so tiny asymmetries do not bias the result
        let z = 0.5 * (m[(j, k)] + m[(k, j)].conj());
        v[d + p] = sqrt2 * z.re;
        v[d + pairs + p] = sqrt2 * z.im;
    }
    Ok(v)
}

pub fn vector_to_hermitian(v: &DVector<f64>) -> Result<CMatrix> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() || d == 0 {
        return Err(Error::DimensionMismatch { expected: d * d, found: v.len() });
    }
    let pairs = d * (d - 1) / 2;
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        m[(j, j)] = Complex64::new(v[j], 0.0);
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for (p, (j, k)) in upper_pairs(d).enumerate() {
        let z = Complex64::new(v[d + p], v[d + pairs + p]) * inv_sqrt2;
        m[(j, k)] = z;
        m[(k, j)] = z.conj();
    }
    Ok(m)
}

fn upper_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |j| (j + 1..d).map(move |k| (j, k)))
}

/// Pauli matrices `(σx, σy, σz)`.
pub fn paulis() -> [CMatrix; 3] {
    [
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn up_up() -> DensityMatrix {
        DensityMatrix::new(basis_projector(4, 0)).unwrap()
    }

    #[test]
    fn zero_rotation_is_identity() {
        let u = rotation_gate(0.0, 0.0, 2);
        assert!(max_abs_diff(u.matrix(), &identity(4)) < 1e-15);
    }

    #[test]
    fn pi_rotation_about_x() {
        // direct exponential of −i(π/2)σx = cos(π/2) − i sin(π/2) σx
        let u = rotation_gate(PI, 0.0, 1);
        let expected = CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, -1.0), ZERO]);
        assert!(max_abs_diff(u.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn half_pi_rotation_about_y() {
        let u = rotation_gate(PI / 2.0, PI / 2.0, 1);
        let h = FRAC_1_SQRT_2;
        let expected = CMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(-h, 0.0), c(h, 0.0), c(h, 0.0)]);
        assert!(max_abs_diff(u.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn evolve_examples() {
        let rho0 = up_up();
        assert_eq!(evolve_state(&rho0, &UnitaryOp::identity(4)).unwrap(), rho0);

        let flipped = evolve_state(&rho0, &rotation_gate(PI, 0.0, 2)).unwrap();
        assert!(max_abs_diff(flipped.matrix(), &basis_projector(4, 3)) < 1e-15);

        let mixed = DensityMatrix::maximally_mixed(4);
        let out = evolve_state(&mixed, &rotation_gate(0.3, 1.1, 2)).unwrap();
        assert!(max_abs_diff(out.matrix(), mixed.matrix()) < 1e-15);
    }

    #[test]
    fn evolve_rejects_dimension_mismatch() {
        let err = evolve_state(&up_up(), &rotation_gate(0.1, 0.0, 1)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn heisenberg_swaps_qubit_projectors() {
        let povm = Povm::from_matrices(vec![basis_projector(2, 0), basis_projector(2, 1)]).unwrap();
        assert_eq!(heisenberg_povm(&povm, &UnitaryOp::identity(2)).unwrap(), povm);
        let out = heisenberg_povm(&povm, &rotation_gate(PI, 0.0, 1)).unwrap();
        assert!(max_abs_diff(out.elements()[0].matrix(), &basis_projector(2, 1)) < 1e-15);
        assert!(max_abs_diff(out.elements()[1].matrix(), &basis_projector(2, 0)) < 1e-15);
    }

    #[test]
    fn born_examples() {
        let rho0 = up_up();
        let id = MeasurementOperator::new(identity(4)).unwrap();
        assert!((born_probability(&id, &rho0).unwrap() - 1.0).abs() < 1e-15);
        let pi2 = MeasurementOperator::new(basis_projector(4, 0)).unwrap();
        assert!((born_probability(&pi2, &rho0).unwrap() - 1.0).abs() < 1e-15);

        let pi1 = MeasurementOperator::new(basis_projector(4, 1) + basis_projector(4, 2)).unwrap();
        let rotated = evolve_state(&rho0, &rotation_gate(PI / 2.0, 0.0, 2)).unwrap();
        assert!((born_probability(&pi1, &rotated).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn vectorization_examples() {
        let v = hermitian_to_vector(&identity(2)).unwrap();
        assert!((v.dot(&v) - 2.0).abs() < 1e-15);
        let [sx, sy, _] = paulis();
        let vx = hermitian_to_vector(&sx).unwrap();
        let vy = hermitian_to_vector(&sy).unwrap();
        assert!(vx.dot(&vy).abs() < 1e-15);
        assert!((vx.dot(&vx) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn vectorization_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(hermitian_to_vector(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(matches!(DensityMatrix::new(identity(2)), Err(Error::BadTrace(_))));
        let neg = CMatrix::from_row_slice(2, 2, &[c(1.5, 0.0), ZERO, ZERO, c(-0.5, 0.0)]);
        assert!(matches!(DensityMatrix::new(neg), Err(Error::NotPositive(_))));
        let skew = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), ZERO, c(0.5, 0.0)]);
        assert!(matches!(DensityMatrix::new(skew), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn incomplete_povm_rejected() {
        let err = Povm::from_matrices(vec![basis_projector(2, 0)]).unwrap_err();
        assert!(matches!(err, Error::Incomplete(_)));
    }

    #[test]
    fn non_unitary_rejected() {
        let m = identity(2).scale(1.1);
        assert!(matches!(UnitaryOp::new("bad", m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn density_matrix_json_round_trip() {
        let rho = evolve_state(&up_up(), &rotation_gate(0.7, 0.3, 2)).unwrap();
        let s = serde_json::to_string(&rho).unwrap();
        let back: DensityMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rho);
        assert!(s.starts_with("[[["));
    }
}
