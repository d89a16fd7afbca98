#![allow(dead_code)]

use num_complex::Complex64;
use qdt_core::iontrap::{ExperimentDesign, TransitionMatrix};
use qdt_core::qcore::{basis_projector, identity, rotation_gate, CMatrix, DensityMatrix, UnitaryOp};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `G G† / Tr(G G†)` for a complex Gaussian-ish `G` (uniform entries are
/// enough for test coverage).
pub fn random_state<R: Rng>(r: &mut R, d: usize) -> DensityMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
    DensityMatrix::from_unnormalized(&(&g * g.adjoint())).unwrap()
}

pub fn random_pure_qubit<R: Rng>(r: &mut R) -> DensityMatrix {
    let th = r.random::<f64>() * std::f64::consts::PI;
    let ph = r.random::<f64>() * 2.0 * std::f64::consts::PI;
    let psi = [Complex64::new((th / 2.0).cos(), 0.0), Complex64::from_polar((th / 2.0).sin(), ph)];
    DensityMatrix::pure(&psi).unwrap()
}

pub fn random_stochastic<R: Rng>(r: &mut R, rows: usize, cols: usize) -> TransitionMatrix {
    let m: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            let v: Vec<f64> = (0..cols).map(|_| 0.05 + r.random::<f64>()).collect();
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        })
        .collect();
    TransitionMatrix::new(m).unwrap()
}

pub fn random_hermitian<R: Rng>(r: &mut R, d: usize) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
    (&g + g.adjoint()).scale(0.5)
}

/// Qubit prepared in `|0⟩`, measured in the Z basis after each of `I`,
/// `U(π/2, 0)` and `U(π/2, π/2)`: informationally complete.
pub fn pauli_qubit_design() -> ExperimentDesign {
    ExperimentDesign::new(
        DensityMatrix::new(basis_projector(2, 0)).unwrap(),
        vec![
            UnitaryOp::identity(2),
            rotation_gate(std::f64::consts::FRAC_PI_2, 0.0, 1),
            rotation_gate(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, 1),
        ],
        vec![basis_projector(2, 0), basis_projector(2, 1)],
    )
}

pub fn z_only_qubit_design() -> ExperimentDesign {
    ExperimentDesign::new(
        DensityMatrix::new(basis_projector(2, 0)).unwrap(),
        vec![UnitaryOp::identity(2)],
        vec![basis_projector(2, 0), basis_projector(2, 1)],
    )
}

pub fn scalar(m: &CMatrix) -> f64 {
    m.trace().re / m.nrows() as f64
}

pub fn identity_matrix(d: usize) -> CMatrix {
    identity(d)
}
