use crate::error::Result;
use crate::iontrap::{ExperimentDesign, TransitionMatrix};
use crate::qcore::{hermitian_part, identity, max_eigenvalue, trace_product, CMatrix, DensityMatrix};

use super::{SolverOptions, Tally};

/// Below this a probability counts as zero for the RρR operator.
const DEGENERATE_PROB: f64 = 1e-12;
/// Weight of `𝟙/d` mixed in when an iterate hits a degenerate probability.
const DEGENERATE_MIX: f64 = 1e-9;
const MAX_DILUTION_HALVINGS: usize = 60;

#[derive(Debug, Clone)]
pub struct RrrOutcome {
    pub sigmas: Vec<DensityMatrix>,
    /// Largest per-state gap bound.
    pub s_sigma: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// One probing family: engineered operators flattened over `(i, c)` with
/// their counts, zero-count terms dropped.
struct StateProblem {
    ops: Vec<CMatrix>,
    weights: Vec<f64>,
    n_total: f64,
    d: usize,
}

impl StateProblem {
    fn new(family: &[Vec<f64>], f_hat: &[Vec<CMatrix>], d: usize) -> Self {
        let mut ops = Vec::new();
        let mut weights = Vec::new();
        for (row, fs) in family.iter().zip(f_hat) {
            for (&h, f) in row.iter().zip(fs) {
                if h > 0.0 {
                    ops.push(f.clone());
                    weights.push(h);
                }
            }
        }
        let n_total = weights.iter().sum();
        Self { ops, weights, n_total, d }
    }

    fn probs(&self, sigma: &CMatrix) -> Vec<f64> {
        self.ops.iter().map(|f| trace_product(f, sigma).re).collect()
    }

    fn loglike(&self, sigma: &CMatrix) -> f64 {
        self.probs(sigma)
            .iter()
            .zip(&self.weights)
            .map(|(&p, &h)| if p > 0.0 { h * p.ln() } else { f64::NEG_INFINITY })
            .sum()
    }

    /// `R(σ) = Σ H F / Tr(σ F)`, mixing `σ` toward `𝟙/d` first if some
    /// observed outcome has vanishing probability.
    fn r_operator(&self, sigma: &mut CMatrix) -> CMatrix {
        let mut probs = self.probs(sigma);
        if probs.iter().any(|&p| p < DEGENERATE_PROB) {
            *sigma = sigma.scale(1.0 - DEGENERATE_MIX) + identity(self.d).scale(DEGENERATE_MIX / self.d as f64);
            probs = self.probs(sigma);
        }
        let mut r = CMatrix::zeros(self.d, self.d);
        for ((f, &h), &p) in self.ops.iter().zip(&self.weights).zip(&probs) {
            r += f.scale(h / p.max(f64::MIN_POSITIVE));
        }
        r
    }

    fn gap_bound(&self, r: &CMatrix) -> f64 {
        max_eigenvalue(r) - self.n_total
    }
}

fn normalized_sandwich(a: &CMatrix, sigma: &CMatrix) -> Option<CMatrix> {
    let m = a * sigma * a.adjoint();
    let m = (&m + m.adjoint()).scale(0.5);
    let tr = m.trace().re;
    (tr.is_finite() && tr > 0.0).then(|| m.unscale(tr))
}

/// Runs RρR on one state until its gap bound `λ_max(R) − n` drops to the
/// threshold. A step that does not raise the likelihood is replaced by a
/// diluted step `(𝟙 + εR/n) σ (𝟙 + εR/n)` with `ε` halved until it does.
/// When that also stalls — typically because the top eigenvector of `R` lies
/// where `σ` has (almost) no weight, which a multiplicative update cannot
/// fill — `σ` is mixed toward that eigenvector instead.
fn maximize_one(problem: &StateProblem, init: &DensityMatrix, opts: &SolverOptions) -> (CMatrix, f64, bool, usize) {
    let mut sigma = init.matrix().clone();
    if problem.ops.is_empty() {
        return (sigma, 0.0, true, 0);
    }
    let mut iterations = 0;
    loop {
        let r = problem.r_operator(&mut sigma);
        let current = problem.loglike(&sigma);
        let gap = problem.gap_bound(&r);
        if gap <= opts.t_sigma {
            return (sigma, gap, true, iterations);
        }
        if iterations >= opts.max_rrr_iterations {
            return (sigma, gap, false, iterations);
        }
        iterations += 1;

        let mut accepted = None;
        if let Some(next) = normalized_sandwich(&r, &sigma) {
            let l = problem.loglike(&next);
            if l > current {
                accepted = Some((next, l));
            }
        }
        if accepted.is_none() {
            let scaled = r.unscale(problem.n_total);
            let id = identity(problem.d);
            let mut eps = 1.0;
            for _ in 0..MAX_DILUTION_HALVINGS {
                let a = &id + scaled.scale(eps);
                if let Some(next) = normalized_sandwich(&a, &sigma) {
                    let l = problem.loglike(&next);
                    if l > current {
                        accepted = Some((next, l));
                        break;
                    }
                }
                eps *= 0.5;
            }
        }
        if accepted.is_none() {
            accepted = mixing_step(problem, &r, &sigma, current);
        }
        match accepted {
            Some((next, _)) => sigma = next,
            // no ascent direction is numerically resolvable from here
            None => return (sigma, gap, false, iterations),
        }
    }
}

/// `(1 − ε) σ + ε |v⟩⟨v|` for the top eigenvector `v` of `R`, the first-order
/// gain being `ε (λ_max(R) − n)`; `ε` is halved from 1 until the likelihood
/// increases.
fn mixing_step(problem: &StateProblem, r: &CMatrix, sigma: &CMatrix, current: f64) -> Option<(CMatrix, f64)> {
    let eig = hermitian_part(r).symmetric_eigen();
    let top = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?.0;
    let v = eig.eigenvectors.column(top);
    let target = &v * v.adjoint();
    let mut eps = 1.0;
    for _ in 0..MAX_DILUTION_HALVINGS {
        let next = sigma.scale(1.0 - eps) + target.scale(eps);
        let l = problem.loglike(&next);
        if l > current {
            return Some((next, l));
        }
        eps *= 0.5;
    }
    None
}

/// Maximizes the state part of the likelihood for each probing family with
/// `Q` held fixed, starting from `init`.
pub fn rrr_maximize_states(
    h: &Tally,
    design: &ExperimentDesign,
    q: &TransitionMatrix,
    init: &[DensityMatrix],
    opts: &SolverOptions,
) -> Result<RrrOutcome> {
    let f_hat = design.engineered_povm(q);
    let d = design.dim();
    let mut sigmas = Vec::with_capacity(init.len());
    let mut s_sigma: f64 = 0.0;
    let mut converged = true;
    let mut iterations = 0;
    for (j, start) in init.iter().enumerate() {
        let problem = StateProblem::new(h.family(j + 1), &f_hat, d);
        let (sigma, gap, ok, it) = maximize_one(&problem, start, opts);
        sigmas.push(DensityMatrix::from_unnormalized(&sigma)?);
        s_sigma = s_sigma.max(gap);
        converged &= ok;
        iterations = iterations.max(it);
    }
    Ok(RrrOutcome { sigmas, s_sigma, converged, iterations })
}

/// Largest per-state gap bound `λ_max(R(σ̂_j)) − n_j` at the given point.
pub fn state_stop_bound(h: &Tally, design: &ExperimentDesign, q: &TransitionMatrix, sigmas: &[DensityMatrix]) -> f64 {
    let f_hat = design.engineered_povm(q);
    sigmas
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let problem = StateProblem::new(h.family(j + 1), &f_hat, design.dim());
            if problem.ops.is_empty() {
                return 0.0;
            }
            let mut m = s.matrix().clone();
            let r = problem.r_operator(&mut m);
            problem.gap_bound(&r)
        })
        .fold(0.0, f64::max)
}
