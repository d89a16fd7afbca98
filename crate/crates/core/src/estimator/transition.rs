use crate::error::Result;
use crate::iontrap::{ExperimentDesign, TransitionMatrix};
use crate::qcore::DensityMatrix;

use super::{population_tensor, SolverOptions, Tally};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-30;

#[derive(Debug, Clone)]
pub struct TransitionOutcome {
    pub q: TransitionMatrix,
    pub s_q: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `𝓛₂(Q) = Σ_{j,i,c} H[j][i][c] ln Σ_k Q[k][c] P[j][i][k]` with the
/// populations `P` of the current state estimates.
#[derive(Debug, Clone)]
pub struct TransitionObjective {
    /// `(c, populations over k, count)` for every positive count.
    terms: Vec<(usize, Vec<f64>, f64)>,
    n_subspaces: usize,
    n_outcomes: usize,
}

impl TransitionObjective {
    pub fn new(h: &Tally, populations: &[Vec<Vec<f64>>]) -> Self {
        let mut terms = Vec::new();
        for (fam, pops) in h.counts().iter().zip(populations) {
            for (row, pop) in fam.iter().zip(pops) {
                for (c, &count) in row.iter().enumerate() {
                    if count > 0.0 {
                        terms.push((c, pop.clone(), count));
                    }
                }
            }
        }
        let n_subspaces = populations.first().and_then(|f| f.first()).map_or(0, Vec::len);
        Self { terms, n_subspaces, n_outcomes: h.n_outcomes() }
    }

    pub fn from_states(h: &Tally, design: &ExperimentDesign, sigmas: &[DensityMatrix]) -> Self {
        let taus: Vec<DensityMatrix> = std::iter::once(design.rho0().clone()).chain(sigmas.iter().cloned()).collect();
        Self::new(h, &population_tensor(design, &taus))
    }

    fn prob(q: &[Vec<f64>], c: usize, pop: &[f64]) -> f64 {
        pop.iter().enumerate().map(|(k, p)| q[k][c] * p).sum()
    }

    pub fn value(&self, q: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (c, pop, count) in &self.terms {
            let p = Self::prob(q, *c, pop);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += count * p.ln();
        }
        total
    }

    /// `𝓛₂(to) − 𝓛₂(from)`, summed term by term as `H ln(1 + Δp/p)` so that
    /// small changes are not lost to cancellation between two large totals.
    pub fn change(&self, from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (c, pop, count) in &self.terms {
            let p0 = Self::prob(from, *c, pop);
            let p1 = Self::prob(to, *c, pop);
            if p1 <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let dp: f64 = pop.iter().enumerate().map(|(k, p)| (to[k][*c] - from[k][*c]) * p).sum();
            total += count * (dp / p0).ln_1p();
        }
        total
    }

    /// `∂𝓛₂/∂Q[k][c] = Σ_{j,i} H[j][i][c] P[j][i][k] / p[j][i][c]`.
    pub fn gradient(&self, q: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut g = vec![vec![0.0; self.n_outcomes]; self.n_subspaces];
        for (c, pop, count) in &self.terms {
            let p = Self::prob(q, *c, pop);
            let w = count / p;
            for (k, &pk) in pop.iter().enumerate() {
                g[k][*c] += w * pk;
            }
        }
        g
    }
}

/// Upper bound on `𝓛₂(Q_ML) − 𝓛₂(Q)` from concavity:
/// `max_X ⟨∇𝓛₂, X − Q⟩` over row-stochastic `X`, attained row by row at the
/// largest gradient entry.
pub fn stop_bound_q(q: &[Vec<f64>], gradient: &[Vec<f64>]) -> f64 {
    q.iter()
        .zip(gradient)
        .map(|(qr, gr)| {
            let best = gr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let current: f64 = qr.iter().zip(gr).map(|(a, b)| a * b).sum();
            best - current
        })
        .sum()
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (idx, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (idx + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn project_rows(q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    q.iter().map(|r| project_simplex(r)).collect()
}

/// The gradient with each row's mean removed. Row projection onto the simplex
/// ignores per-row constants, and dropping them keeps a large common-mode
/// gradient from amplifying rounding in the projection into spurious gains.
fn center_rows(g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    g.iter()
        .map(|r| {
            let m = r.iter().sum::<f64>() / r.len() as f64;
            r.iter().map(|x| x - m).collect()
        })
        .collect()
}

fn inner(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| x * y).sum()
}

fn diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect()).collect()
}

/// Projected gradient ascent on `𝓛₂` over row-stochastic matrices, with
/// Barzilai–Borwein trial steps and Armijo backtracking. Stops when the gap
/// bound reaches `t_q`, when a step no longer improves the objective by more
/// than the relative tolerance, or at the iteration cap.
pub fn maximize_transition(
    h: &Tally,
    design: &ExperimentDesign,
    sigmas: &[DensityMatrix],
    q_init: &TransitionMatrix,
    opts: &SolverOptions,
) -> Result<TransitionOutcome> {
    let objective = TransitionObjective::from_states(h, design, sigmas);
    let mut q: Vec<Vec<f64>> = q_init.rows().to_vec();
    let mut value = objective.value(&q);
    let mut grad = center_rows(&objective.gradient(&q));
    let gmax = grad.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut step = if gmax > 0.0 { 0.1 / gmax } else { 1.0 };
    let mut iterations = 0;
    let mut converged = false;
    let mut s_q;

    loop {
        s_q = stop_bound_q(&q, &grad);
        if s_q <= opts.t_q {
            converged = true;
            break;
        }
        if iterations >= opts.max_q_iterations {
            break;
        }
        iterations += 1;

        let mut alpha = step;
        let accepted = loop {
            let trial: Vec<Vec<f64>> =
                q.iter().zip(&grad).map(|(qr, gr)| qr.iter().zip(gr).map(|(a, g)| a + alpha * g).collect()).collect();
            let candidate = project_rows(&trial);
            let gain = inner(&grad, &diff(&candidate, &q));
            if gain > 0.0 {
                let dv = objective.change(&q, &candidate);
                if dv >= ARMIJO * gain {
                    break Some((candidate, dv));
                }
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                break None;
            }
        };
        let Some((candidate, improvement)) = accepted else { break };

        let new_grad = center_rows(&objective.gradient(&candidate));
        let s = diff(&candidate, &q);
        let curvature = inner(&s, &diff(&grad, &new_grad));
        step = if curvature > 0.0 { inner(&s, &s) / curvature } else { 2.0 * alpha };

        q = candidate;
        value += improvement;
        grad = new_grad;
        if improvement <= opts.q_relative_tolerance * value.abs() {
            s_q = stop_bound_q(&q, &grad);
            converged = s_q <= opts.t_q;
            break;
        }
    }
    Ok(TransitionOutcome { q: TransitionMatrix::new(q)?, s_q, converged, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{identity, UnitaryOp};

    #[test]
    fn simplex_projection_properties() {
        let p = project_simplex(&[0.2, 0.3, 0.5]);
        assert_eq!(p, vec![0.2, 0.3, 0.5]);
        let p = project_simplex(&[2.0, 0.0, -1.0]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn stop_bound_examples() {
        let g = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(stop_bound_q(&[vec![1.0, 0.0], vec![0.0, 1.0]], &g), 0.0);
        assert!((stop_bound_q(&[vec![0.5, 0.5], vec![0.5, 0.5]], &g) - 1.0).abs() < 1e-15);
        let flat = vec![vec![3.0, 3.0, 3.0]];
        assert_eq!(stop_bound_q(&[vec![0.2, 0.3, 0.5]], &flat), 0.0);
    }

    #[test]
    fn single_subspace_reduces_to_frequencies() {
        let rho = DensityMatrix::maximally_mixed(2);
        let design = ExperimentDesign::new(rho, vec![UnitaryOp::identity(2)], vec![identity(2)]);
        let h = Tally::new(vec![vec![vec![10.0, 30.0, 60.0]]]).unwrap();
        let opts = SolverOptions { t_q: 1e-6, ..SolverOptions::default() };
        let q0 = TransitionMatrix::new(vec![vec![1.0 / 3.0; 3]]).unwrap();
        let out = maximize_transition(&h, &design, &[], &q0, &opts).unwrap();
        for (a, b) in out.q.row(0).iter().zip([0.1, 0.3, 0.6]) {
            assert!((a - b).abs() < 1e-8, "{:?}", out.q.row(0));
        }
        assert!(out.converged);
    }
}
