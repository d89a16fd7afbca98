//! Bounds on `Tr(O ρ)` over every state that reproduces the fitted outcome
//! probabilities.
//!
//! When the engineered measurements are not informationally complete, many
//! states share the maximal likelihood. They are exactly the density matrices
//! `ρ` with `Tr(F̂_{i,c} ρ) = Tr(F̂_{i,c} σ̂)` for all `(i, c)`. Minimising and
//! maximising `Tr(O ρ)` over that set is a pair of small semidefinite
//! programs. The linear constraints are first reduced to an orthonormal basis
//! of their span by an SVD, then eliminated by parameterising the affine set
//! directly; what remains is solved by [`barrier`].

pub mod barrier;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iontrap::{ExperimentDesign, TransitionMatrix};
use crate::qcore::{
    basis_projector, hermitian_part, hermitian_to_vector, identity, min_eigenvalue, outer, trace_product, vector_to_hermitian, CMatrix,
    DensityMatrix, Observable,
};

/// Singular values above `SV_TOL · s_max` count as nonzero.
pub const SV_TOL: f64 = 1e-10;
/// `upper − lower` at or below this marks the observable identifiable.
pub const IDENTIFIABLE_TOL: f64 = 1e-6;
/// Target duality gap of each program.
pub const GAP_TOL: f64 = 1e-8;
/// Weight of `𝟙/d` mixed into a boundary starting point.
pub const START_PERTURBATION: f64 = 1e-7;

/// Hermitian constraint matrices `V'_k`.
#[derive(Debug, Clone)]
pub struct ConstraintBasis {
    rows: Vec<CMatrix>,
    /// Singular values of the stacked, vectorized measurement operators, descending.
    pub singular_values: Vec<f64>,
    /// Number of nonzero singular values of the stacked engineered projectors.
    pub projector_rank: usize,
    pub reduced: bool,
}

impl ConstraintBasis {
    /// Keeps all operators as constraints, without reduction.
    pub fn unreduced(ops: Vec<CMatrix>) -> Self {
        Self { rows: ops, singular_values: Vec::new(), projector_rank: 0, reduced: false }
    }

    /// SVD reduction: keeps the right-singular vectors of the stacked operators
    /// belonging to the `r` largest singular values, where `r` is the rank of
    /// the stacked `underlying` operators.
    pub fn reduce(ops: &[CMatrix], underlying: &[CMatrix]) -> Result<Self> {
        let stacked = stack_vectors(ops)?;
        let d2 = stacked.ncols();
        let (sv, vt) = sorted_svd(&stacked);
        let projector_rank = numerical_rank(&sorted_svd(&stack_vectors(underlying)?).0);
        let discard = d2 - projector_rank;
        let keep = (d2 - discard).min(vt.nrows());
        let rows = (0..keep)
            .map(|r| vector_to_hermitian(&vt.row(r).transpose()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows, singular_values: sv, projector_rank, reduced: true })
    }

    pub fn rows(&self) -> &[CMatrix] {
        &self.rows
    }

    pub fn retained_count(&self) -> usize {
        self.rows.len()
    }

    /// Norm of the part of `m` outside the span of the constraints and `𝟙`.
    pub fn span_residual(&self, m: &CMatrix) -> Result<f64> {
        let v = hermitian_to_vector(m)?;
        let mut ops = self.rows.clone();
        ops.push(identity(m.nrows()));
        let a = stack_vectors(&ops)?;
        let (sv, vt) = sorted_svd(&a);
        let rank = numerical_rank(&sv);
        let mut residual = v.clone();
        for r in 0..rank {
            let u = vt.row(r).transpose();
            residual -= &u * u.dot(&v);
        }
        Ok(residual.norm())
    }
}

fn stack_vectors(ops: &[CMatrix]) -> Result<DMatrix<f64>> {
    let first = ops.first().ok_or_else(|| Error::Solver("no constraint operators".into()))?;
    let d2 = first.nrows() * first.nrows();
    let mut m = DMatrix::zeros(ops.len(), d2);
    for (r, op) in ops.iter().enumerate() {
        let v = hermitian_to_vector(op)?;
        if v.len() != d2 {
            return Err(Error::DimensionMismatch { expected: d2, found: v.len() });
        }
        m.set_row(r, &v.transpose());
    }
    Ok(m)
}

/// Singular values (descending) and the matching full set of right-singular
/// vectors as rows. Short matrices are padded with zero rows so every
/// direction of the column space appears.
fn sorted_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.ncols();
    let padded = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.rows_mut(0, a.nrows()).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rows: Vec<_> = order.iter().map(|&i| vt.row(i).into_owned()).collect();
    (sv, DMatrix::from_rows(&rows))
}

fn numerical_rank(sv: &[f64]) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > SV_TOL * smax).count()
}

/// Reduced constraint basis for a fitted transition matrix: the operators
/// `F̂_{i,c} = Σ_k Q̂[k][c] U_i† Π_k U_i`, against the rank of the
/// `U_i† Π_k U_i` themselves.
pub fn build_constraint_basis(q_hat: &TransitionMatrix, design: &ExperimentDesign) -> Result<ConstraintBasis> {
    let f_hat: Vec<CMatrix> = design.engineered_povm(q_hat).into_iter().flatten().collect();
    let pis: Vec<CMatrix> = (0..design.n_settings())
        .flat_map(|i| (0..design.n_subspaces()).map(move |k| (i, k)))
        .map(|(i, k)| design.engineered(i, k).clone())
        .collect();
    ConstraintBasis::reduce(&f_hat, &pis)
}

/// All engineered operators as an unreduced constraint list.
pub fn full_constraints(q_hat: &TransitionMatrix, design: &ExperimentDesign) -> ConstraintBasis {
    ConstraintBasis::unreduced(design.engineered_povm(q_hat).into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    /// Larger of the two programs' duality gaps.
    pub duality_gap: f64,
    /// Largest `|Tr(V'_k (ρ − σ̂))|` over both optimisers.
    pub feasibility_residual: f64,
    /// Smallest eigenvalue over both optimisers.
    pub min_eigenvalue: f64,
    /// Dimension of the affine set of candidate states.
    pub free_dimension: usize,
    pub retained_constraints: usize,
    /// Dimension of the subspace the feasible states are supported on; below
    /// `d` when no feasible state has full rank.
    pub face_dimension: usize,
    /// Weight of `𝟙/d` mixed into `σ̂` to obtain an interior start (0 if none).
    pub start_perturbation: f64,
    /// Distance of the observable from the span of the constraints.
    pub span_residual: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableBounds {
    pub observable: String,
    /// `Tr(O σ̂)`.
    pub point_estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub identifiable: bool,
    /// False when either program failed to converge.
    pub valid: bool,
    pub diagnostics: SolverDiagnostics,
}

/// Minimum and maximum of `Tr(O ρ)` over `{ρ ⪰ 0, Tr ρ = 1,
/// Tr(V'_k ρ) = Tr(V'_k σ̂)}`.
pub fn solve_bounds(o: &Observable, sigma_hat: &DensityMatrix, basis: &ConstraintBasis) -> Result<ObservableBounds> {
    let d = sigma_hat.dim();
    if o.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: o.dim() });
    }
    let mut ops = basis.rows().to_vec();
    ops.push(identity(d));
    let program = solve_program(o.matrix(), &ops, sigma_hat.matrix(), 0)?;

    let residual = |rho: &CMatrix| {
        basis
            .rows()
            .iter()
            .map(|v| trace_product(v, &(rho - sigma_hat.matrix())).norm())
            .fold(0.0, f64::max)
    };
    let diagnostics = SolverDiagnostics {
        duality_gap: program.gap,
        feasibility_residual: residual(&program.rho_lo).max(residual(&program.rho_hi)),
        min_eigenvalue: min_eigenvalue(&program.rho_lo).min(min_eigenvalue(&program.rho_hi)),
        free_dimension: program.free_dimension,
        face_dimension: program.face_dimension,
        retained_constraints: basis.retained_count(),
        start_perturbation: program.perturbation,
        span_residual: basis.span_residual(o.matrix())?,
        newton_iterations: program.newton_iterations,
    };
    Ok(ObservableBounds {
        observable: o.label().to_string(),
        point_estimate: sigma_hat.expectation(o),
        lower: program.lower,
        upper: program.upper,
        identifiable: program.upper - program.lower <= IDENTIFIABLE_TOL,
        valid: program.converged,
        diagnostics,
    })
}

/// Smallest eigenvalue a starting point needs to be used as-is.
const INTERIOR_TOL: f64 = 1e-9;
/// Eigenvalues of the maximally interior point above this span the face.
const FACE_TOL: f64 = 1e-6;

struct Program {
    lower: f64,
    upper: f64,
    rho_lo: CMatrix,
    rho_hi: CMatrix,
    gap: f64,
    newton_iterations: usize,
    converged: bool,
    free_dimension: usize,
    face_dimension: usize,
    perturbation: f64,
}

/// Orthonormal basis of the Hermitian matrices orthogonal to every `op`.
fn null_space(ops: &[CMatrix]) -> Result<Vec<CMatrix>> {
    let d = ops[0].nrows();
    let (sv, vt) = sorted_svd(&stack_vectors(ops)?);
    let rank = numerical_rank(&sv);
    (rank..d * d).map(|r| vector_to_hermitian(&vt.row(r).transpose())).collect()
}

/// Finds a point of the affine set through `anchor` with the largest
/// smallest eigenvalue: maximise `s` subject to `ρ(x) − s𝟙 ⪰ 0`.
fn most_interior_point(anchor: &CMatrix, free: &[CMatrix]) -> Result<(CMatrix, f64, usize)> {
    let d = anchor.nrows();
    let s0 = min_eigenvalue(anchor) - 1.0;
    let shifted = anchor - identity(d).scale(s0);
    let mut basis = free.to_vec();
    basis.push(-identity(d));
    let mut c = DVector::zeros(basis.len());
    c[free.len()] = -1.0;
    let sol = barrier::minimize_linear(&shifted, &basis, &c)?;
    let x = sol.x.rows(0, free.len()).into_owned();
    let s = s0 + sol.x[free.len()];
    Ok((barrier::affine_point(anchor, free, &x), s, sol.newton_iterations))
}

fn solve_program(o: &CMatrix, ops: &[CMatrix], anchor: &CMatrix, depth: usize) -> Result<Program> {
    let d = anchor.nrows();
    let free = null_space(ops)?;
    if free.is_empty() {
        let v = trace_product(o, anchor).re;
        return Ok(Program {
            lower: v,
            upper: v,
            rho_lo: anchor.clone(),
            rho_hi: anchor.clone(),
            gap: 0.0,
            newton_iterations: 0,
            converged: true,
            free_dimension: 0,
            face_dimension: d,
            perturbation: 0.0,
        });
    }

    let mut phase_one_iterations = 0;
    let mut perturbation = 0.0;
    let center = if min_eigenvalue(anchor) > INTERIOR_TOL {
        anchor.clone()
    } else {
        let (rho_star, s_star, it) = most_interior_point(anchor, &free)?;
        phase_one_iterations = it;
        if s_star > INTERIOR_TOL {
            rho_star
        } else {
            // No interior point: every feasible state lives on the face
            // spanned by the range of the maximally interior point.
            let eig = hermitian_part(&rho_star).symmetric_eigen();
            let keep: Vec<usize> = (0..d).filter(|&i| eig.eigenvalues[i] > FACE_TOL).collect();
            if !keep.is_empty() && keep.len() < d && depth < d {
                let w = CMatrix::from_columns(&keep.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
                let wa = w.adjoint();
                let restrict = |m: &CMatrix| hermitian_part(&(&wa * m * &w));
                let sub_ops: Vec<CMatrix> = ops.iter().map(restrict).collect();
                let mut sub = solve_program(&restrict(o), &sub_ops, &restrict(&rho_star), depth + 1)?;
                sub.rho_lo = &w * &sub.rho_lo * &wa;
                sub.rho_hi = &w * &sub.rho_hi * &wa;
                sub.newton_iterations += phase_one_iterations;
                return Ok(sub);
            }
            perturbation = START_PERTURBATION;
            anchor.scale(1.0 - perturbation) + identity(d).scale(perturbation / d as f64)
        }
    };

    let c = DVector::from_iterator(free.len(), free.iter().map(|b| trace_product(o, b).re));
    let lo = barrier::minimize_linear(&center, &free, &c)?;
    let hi = barrier::minimize_linear(&center, &free, &(-&c))?;
    let rho_lo = barrier::affine_point(&center, &free, &lo.x);
    let rho_hi = barrier::affine_point(&center, &free, &hi.x);
    Ok(Program {
        lower: trace_product(o, &rho_lo).re,
        upper: trace_product(o, &rho_hi).re,
        rho_lo,
        rho_hi,
        gap: lo.gap.max(hi.gap),
        newton_iterations: phase_one_iterations + lo.newton_iterations + hi.newton_iterations,
        converged: lo.converged && hi.converged,
        free_dimension: free.len(),
        face_dimension: d,
        perturbation,
    })
}

/// `|Φ⁺⟩⟨Φ⁺|`, `|Φ⁺⟩ = (|↑↑⟩ + |↓↓⟩)/√2`.
pub fn bell_observable() -> Observable {
    Observable::new("bell", outer(&crate::iontrap::bell_state_vector())).expect("hermitian")
}

/// `|↓↑⟩⟨↓↑|`: the first ion dark and the second bright.
pub fn second_ion_bright_observable() -> Observable {
    Observable::new("second-ion-bright", basis_projector(4, 2)).expect("hermitian")
}

/// Bloch-ball helper for qubit fixtures: `(𝟙 + r·σ)/2`.
pub fn qubit_state(r: [f64; 3]) -> CMatrix {
    let [sx, sy, sz] = crate::qcore::paulis();
    (identity(2) + sx.scale(r[0]) + sy.scale(r[1]) + sz.scale(r[2])).scale(0.5)
}
