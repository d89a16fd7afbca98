//! Alternating maximum-likelihood estimation of the unknown states and the
//! transition matrix.
//!
//! The total log-likelihood
//! `𝓛 = Σ_{j,i,c} H[j][i][c] ln Σ_k Q[k][c] Tr(U_i† Π_k U_i τ_j)`
//! is concave in the states for fixed `Q` and concave in `Q` for fixed
//! states, but not jointly. [`alternate`] therefore alternates an RρR fixed
//! point iteration on the states ([`rrr_maximize_states`]) with projected
//! gradient ascent on `Q` ([`maximize_transition`]). Each subproblem carries a
//! certificate bounding how far its objective is from the subproblem optimum;
//! iteration stops once both certificates are below their thresholds.

mod rrr;
mod transition;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iontrap::{outcome_probabilities, ExperimentDesign, HistogramSet, TransitionMatrix};
use crate::qcore::DensityMatrix;
use crate::rng;

pub use rrr::{rrr_maximize_states, state_stop_bound, RrrOutcome};
pub use transition::{
    maximize_transition, project_simplex, stop_bound_q, TransitionObjective, TransitionOutcome,
};

/// Histogram entries usable as counts.
pub trait CountLike: Copy {
    fn as_f64(self) -> f64;
}

impl CountLike for u64 {
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl CountLike for f64 {
    fn as_f64(self) -> f64 {
        self
    }
}

/// Relative singular value below which the population matrix is rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Counts as reals, `[j][i][c]`. Integer histograms convert losslessly;
/// analytic fixtures may use fractional weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    counts: Vec<Vec<Vec<f64>>>,
}

impl Tally {
    pub fn new(counts: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let settings = counts.first().map_or(0, Vec::len);
        let outcomes = counts.first().and_then(|f| f.first()).map_or(0, Vec::len);
        if settings == 0 || outcomes == 0 {
            return Err(Error::ShapeMismatch("empty tally".into()));
        }
        for fam in &counts {
            if fam.len() != settings || fam.iter().any(|r| r.len() != outcomes) {
                return Err(Error::ShapeMismatch("ragged tally".into()));
            }
            if fam.iter().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::ShapeMismatch("tally entries must be finite and nonnegative".into()));
            }
        }
        Ok(Self { counts })
    }

    pub fn n_families(&self) -> usize {
        self.counts.len()
    }

    pub fn n_settings(&self) -> usize {
        self.counts[0].len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.counts[0][0].len()
    }

    pub fn family(&self, j: usize) -> &[Vec<f64>] {
        &self.counts[j]
    }

    pub fn counts(&self) -> &[Vec<Vec<f64>>] {
        &self.counts
    }

    pub fn family_total(&self, j: usize) -> f64 {
        self.counts[j].iter().flatten().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { counts: self.counts.iter().map(|f| f.iter().map(|r| r.iter().map(|x| x * factor).collect()).collect()).collect() }
    }
}

impl From<&HistogramSet> for Tally {
    fn from(h: &HistogramSet) -> Self {
        Self {
            counts: h
                .counts()
                .iter()
                .map(|f| f.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop threshold on the state-subproblem gap bound.
    pub t_sigma: f64,
    /// Stop threshold on the transition-subproblem gap bound.
    pub t_q: f64,
    pub max_outer_iterations: usize,
    pub max_rrr_iterations: usize,
    pub max_q_iterations: usize,
    /// The transition solver also stops once a step improves `𝓛₂` by less
    /// than this, relative to `|𝓛₂|`.
    pub q_relative_tolerance: f64,
    /// Extra fits from perturbed initial transition matrices; the best
    /// likelihood wins. Zero disables.
    pub multistart: usize,
    pub multistart_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            t_sigma: 0.3,
            t_q: 0.25,
            max_outer_iterations: 500,
            max_rrr_iterations: 20_000,
            max_q_iterations: 20_000,
            q_relative_tolerance: 1e-15,
            multistart: 0,
            multistart_seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_sigma > 0.0 && self.t_q > 0.0) {
            return Err(Error::InvalidConfig("stopping thresholds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub sigma_hats: Vec<DensityMatrix>,
    pub q_hat: TransitionMatrix,
    pub loglike: f64,
    pub s_sigma: f64,
    pub s_q: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `𝓛` at the start and after every subproblem call.
    pub loglike_trace: Vec<f64>,
}

impl Estimate {
    /// `(ρ₀, σ̂₁, …)`.
    pub fn taus(&self, design: &ExperimentDesign) -> Vec<DensityMatrix> {
        std::iter::once(design.rho0().clone()).chain(self.sigma_hats.iter().cloned()).collect()
    }
}

/// Populations `[j][i][k] = Tr(U_i† Π_k U_i τ_j)` for a state list.
pub(crate) fn population_tensor(design: &ExperimentDesign, taus: &[DensityMatrix]) -> Vec<Vec<Vec<f64>>> {
    taus.iter().map(|t| design.populations(t)).collect()
}

fn to_real_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c])
}

fn frequencies<T: CountLike>(rows: &[Vec<T>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let total: f64 = r.iter().map(|&x| x.as_f64()).sum();
            r.iter().map(|&x| if total > 0.0 { x.as_f64() / total } else { 0.0 }).collect()
        })
        .collect()
}

/// Left pseudo-inverse solution `(PᵀP)⁻¹ Pᵀ H` on relative frequencies,
/// before any clipping.
pub fn least_squares_transition<T: CountLike>(h_ref: &[Vec<T>], p: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let pm = to_real_matrix(p);
    let n = pm.ncols();
    if h_ref.len() != pm.nrows() {
        return Err(Error::DimensionMismatch { expected: pm.nrows(), found: h_ref.len() });
    }
    let sv = pm.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax).count();
    if rank < n || smax == 0.0 {
        return Err(Error::RankDeficient { rank, subspaces: n });
    }
    let h = to_real_matrix(&frequencies(h_ref));
    let normal = pm.transpose() * &pm;
    let chol = normal.cholesky().ok_or(Error::RankDeficient { rank, subspaces: n })?;
    let q = chol.solve(&(pm.transpose() * h));
    Ok((0..q.nrows()).map(|k| q.row(k).iter().copied().collect()).collect())
}

/// Initial transition matrix from reference data: least squares, clipped to
/// `[0, 1]` and renormalized.
pub fn init_transition<T: CountLike>(h_ref: &[Vec<T>], p: &[Vec<f64>]) -> Result<TransitionMatrix> {
    TransitionMatrix::clip_normalize(least_squares_transition(h_ref, p)?)
}

fn loglike_from_probs(counts: &[Vec<f64>], probs: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (hr, pr) in counts.iter().zip(probs) {
        for (&h, &p) in hr.iter().zip(pr) {
            if h > 0.0 {
                if p <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                total += h * p.ln();
            }
        }
    }
    total
}

/// Total log-likelihood over every family, with `τ = (ρ₀, σ̂…)`. Zero counts
/// contribute nothing; a positive count on a zero-probability outcome gives
/// `−∞`.
pub fn log_likelihood(h: &Tally, design: &ExperimentDesign, sigma_hats: &[DensityMatrix], q: &TransitionMatrix) -> f64 {
    let taus: Vec<DensityMatrix> = std::iter::once(design.rho0().clone()).chain(sigma_hats.iter().cloned()).collect();
    taus.iter()
        .enumerate()
        .map(|(j, tau)| loglike_from_probs(h.family(j), &outcome_probabilities(&design.populations(tau), q)))
        .sum()
}

/// Saturated-model log-likelihood `Σ H ln(H / n_exp)`, with each
/// experiment's counts normalized by its own total.
pub fn likelihood_frequency(h: &Tally) -> f64 {
    h.counts()
        .iter()
        .flatten()
        .map(|row| {
            let n: f64 = row.iter().sum();
            row.iter().filter(|&&x| x > 0.0).map(|&x| x * (x / n).ln()).sum::<f64>()
        })
        .sum()
}

fn check_shapes(h: &Tally, design: &ExperimentDesign, q: &TransitionMatrix) -> Result<()> {
    if h.n_settings() != design.n_settings() {
        return Err(Error::ShapeMismatch(format!("{} histogram rows for {} unitaries", h.n_settings(), design.n_settings())));
    }
    if q.n_subspaces() != design.n_subspaces() || q.n_outcomes() != h.n_outcomes() {
        return Err(Error::ShapeMismatch(format!(
            "transition matrix is {}x{}, expected {}x{}",
            q.n_subspaces(),
            q.n_outcomes(),
            design.n_subspaces(),
            h.n_outcomes()
        )));
    }
    Ok(())
}

/// Lifts empty columns of `q` that carry observed counts, so the starting
/// likelihood is finite.
fn lift_empty_columns(h: &Tally, q: &TransitionMatrix) -> Result<TransitionMatrix> {
    const FLOOR: f64 = 1e-6;
    let observed: Vec<bool> = (0..h.n_outcomes())
        .map(|c| h.counts().iter().flatten().any(|row| row[c] > 0.0))
        .collect();
    let empty: Vec<bool> = (0..q.n_outcomes())
        .map(|c| observed[c] && q.rows().iter().all(|r| r[c] <= 0.0))
        .collect();
    if !empty.contains(&true) {
        return Ok(q.clone());
    }
    TransitionMatrix::clip_normalize(
        q.rows()
            .iter()
            .map(|r| r.iter().zip(&empty).map(|(&x, &e)| if e { x + FLOOR } else { x }).collect())
            .collect(),
    )
}

/// Alternates the two subproblems from `q_init` and `𝟙/d` until both gap
/// bounds are below their thresholds.
pub fn alternate(h: &Tally, design: &ExperimentDesign, q_init: &TransitionMatrix, opts: &SolverOptions) -> Result<Estimate> {
    opts.validate()?;
    check_shapes(h, design, q_init)?;
    let best = alternate_once(h, design, q_init, opts)?;
    if opts.multistart == 0 {
        return Ok(best);
    }
    let mut best = best;
    for m in 0..opts.multistart {
        let mut r = rng::substream(opts.multistart_seed, &[rng::tags::MULTISTART, m as u64]);
        let perturbed = perturb_transition(q_init, &mut r)?;
        let candidate = alternate_once(h, design, &perturbed, opts)?;
        if candidate.loglike > best.loglike {
            best = candidate;
        }
    }
    Ok(best)
}

fn perturb_transition(q: &TransitionMatrix, r: &mut rng::StudyRng) -> Result<TransitionMatrix> {
    use rand::Rng;
    TransitionMatrix::clip_normalize(
        q.rows()
            .iter()
            .map(|row| {
                let noise: Vec<f64> = row.iter().map(|_| r.random::<f64>()).collect();
                let s: f64 = noise.iter().sum();
                row.iter().zip(&noise).map(|(x, e)| 0.8 * x + 0.2 * e / s).collect()
            })
            .collect(),
    )
}

fn alternate_once(h: &Tally, design: &ExperimentDesign, q_init: &TransitionMatrix, opts: &SolverOptions) -> Result<Estimate> {
    let d = design.dim();
    let n_states = h.n_families() - 1;
    let mut sigmas = vec![DensityMatrix::maximally_mixed(d); n_states];
    let mut q = lift_empty_columns(h, q_init)?;
    let mut trace = vec![log_likelihood(h, design, &sigmas, &q)];
    let mut s_sigma = f64::INFINITY;
    let mut s_q = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_outer_iterations {
        iterations += 1;
        let states = rrr_maximize_states(h, design, &q, &sigmas, opts)?;
        sigmas = states.sigmas;
        trace.push(log_likelihood(h, design, &sigmas, &q));

        let tq = maximize_transition(h, design, &sigmas, &q, opts)?;
        q = tq.q;
        s_q = tq.s_q;
        trace.push(log_likelihood(h, design, &sigmas, &q));

        s_sigma = state_stop_bound(h, design, &q, &sigmas);
        if s_sigma <= opts.t_sigma && s_q <= opts.t_q {
            converged = true;
            break;
        }
    }
    let loglike = *trace.last().expect("nonempty");
    Ok(Estimate { sigma_hats: sigmas, q_hat: q, loglike, s_sigma, s_q, iterations, converged, loglike_trace: trace })
}

/// Initial transition estimate from the reference family, then [`alternate`].
pub fn fit(h: &Tally, design: &ExperimentDesign, opts: &SolverOptions) -> Result<Estimate> {
    let q_init = init_transition(h.family(0), &design.population_matrix())?;
    alternate(h, design, &q_init, opts)
}
