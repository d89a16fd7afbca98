//! Log-determinant barrier method for `min cᵀx` subject to
//! `ρ(x) = ρ_c + Σ_m x_m B_m ⪰ 0`, starting from the strictly feasible
//! `x = 0`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qcore::CMatrix;

use super::GAP_TOL;

const NEWTON_DECREMENT_TOL: f64 = 1e-10;
const MAX_NEWTON_PER_CENTERING: usize = 200;
const ARMIJO: f64 = 0.25;
const MIN_STEP: f64 = 1e-20;
const T_GROWTH: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub x: DVector<f64>,
    pub value: f64,
    /// `d/t` at the last centering, the standard gap bound for a `d × d`
    /// semidefinite cone.
    pub gap: f64,
    pub newton_iterations: usize,
    pub converged: bool,
}

pub fn affine_point(center: &CMatrix, basis: &[CMatrix], x: &DVector<f64>) -> CMatrix {
    let mut rho = center.clone();
    for (b, &xm) in basis.iter().zip(x.iter()) {
        rho += b.scale(xm);
    }
    (&rho + rho.adjoint()).scale(0.5)
}

fn log_det(rho: &CMatrix) -> Option<(f64, Cholesky<num_complex::Complex64, nalgebra::Dyn>)> {
    let chol = Cholesky::new(rho.clone())?;
    // complex square roots never fail, so an indefinite matrix shows up as
    // an imaginary pivot rather than as an error
    if chol.l_dirty().diagonal().iter().any(|z| !(z.re > 0.0 && z.im.abs() <= 1e-8 * z.re)) {
        return None;
    }
    let ld = 2.0 * chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>();
    ld.is_finite().then_some((ld, chol))
}

fn solve_newton(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = Cholesky::new(h.clone()) {
        return Some(ch.solve(g));
    }
    let scale = h.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut reg = scale * 1e-14;
    for _ in 0..12 {
        let shifted = h + DMatrix::identity(h.nrows(), h.ncols()) * reg;
        if let Some(ch) = Cholesky::new(shifted) {
            return Some(ch.solve(g));
        }
        reg *= 100.0;
    }
    None
}

pub fn minimize_linear(center: &CMatrix, basis: &[CMatrix], c: &DVector<f64>) -> Result<BarrierSolution> {
    let d = center.nrows() as f64;
    let m = basis.len();
    if c.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: c.len() });
    }
    let mut x = DVector::zeros(m);
    if log_det(&affine_point(center, basis, &x)).is_none() {
        return Err(Error::Solver("starting point is not positive definite".into()));
    }
    let mut t = 1.0;
    let mut newton_iterations = 0;
    let mut converged = true;

    loop {
        let mut centered = false;
        for _ in 0..MAX_NEWTON_PER_CENTERING {
            let rho = affine_point(center, basis, &x);
            let Some((ld, chol)) = log_det(&rho) else {
                return Err(Error::Solver("iterate left the positive definite cone".into()));
            };
            let inv = chol.inverse();
            let w: Vec<CMatrix> = basis.iter().map(|b| &inv * b).collect();
            let mut g = DVector::zeros(m);
            let mut h = DMatrix::zeros(m, m);
            for a in 0..m {
                g[a] = t * c[a] - w[a].trace().re;
                for b in 0..=a {
                    let v = (&w[a] * &w[b]).trace().re;
                    h[(a, b)] = v;
                    h[(b, a)] = v;
                }
            }
            let Some(step) = solve_newton(&h, &g) else {
                return Err(Error::Solver("singular barrier Hessian".into()));
            };
            let dx = -step;
            let slope = g.dot(&dx);
            newton_iterations += 1;
            if -slope / 2.0 <= NEWTON_DECREMENT_TOL {
                centered = true;
                break;
            }
            // compare changes rather than absolute barrier values, which are
            // of order t and would swamp the decrease near the centre
            let linear = t * c.dot(&dx);
            let mut s = 1.0;
            let mut moved = false;
            while s >= MIN_STEP {
                let trial = &x + &dx * s;
                if let Some((ld_trial, _)) = log_det(&affine_point(center, basis, &trial)) {
                    if s * linear - (ld_trial - ld) <= ARMIJO * s * slope {
                        x = trial;
                        moved = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !moved {
                // numerically at the centre for this t
                centered = true;
                break;
            }
        }
        converged &= centered;
        if d / t <= GAP_TOL {
            break;
        }
        t *= T_GROWTH;
    }
    Ok(BarrierSolution { value: c.dot(&x), x, gap: d / t, newton_iterations, converged })
}
