//! Reference and probing experiments, and the two-ion fluorescence model used
//! to simulate them.
//!
//! A study prepares the known state `ρ₀` and the unknown states `σ_j`, applies
//! each trusted unitary `U_i`, and measures. Family `j = 0` holds the reference
//! experiments on `ρ₀`; families `j ≥ 1` are probing experiments on `σ_j`.
//! Outcome `c` of experiment `(j, i)` has probability
//! `Σ_k Q[k][c] Tr(U_i† Π_k U_i τ_j)`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    basis_projector, identity, max_abs_diff, rotation_gate, trace_product, CMatrix, DensityMatrix,
    MeasurementOperator, Povm, UnitaryOp, TRACE_TOL,
};
use crate::rng::{self, multinomial};

/// Tolerance on outcome distributions before sampling.
pub const PROBABILITY_SUM_TOL: f64 = 1e-8;

/// Positive rational `numerator / denominator`, serialized as `[num, den]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u64; 2]", into = "[u64; 2]")]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    /// `⌈n · num / den⌉` in exact integer arithmetic.
    pub fn scale_ceil(self, n: u64) -> u64 {
        (n * self.numerator).div_ceil(self.denominator)
    }
}

impl From<[u64; 2]> for Ratio {
    fn from([numerator, denominator]: [u64; 2]) -> Self {
        Ratio { numerator, denominator }
    }
}

impl From<Ratio> for [u64; 2] {
    fn from(r: Ratio) -> Self {
        [r.numerator, r.denominator]
    }
}

fn default_reference_factor() -> Ratio {
    Ratio { numerator: 10, denominator: 9 }
}

/// Everything needed to simulate a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub rho0: DensityMatrix,
    /// `U₀ = 𝟙` first.
    pub unitaries: Vec<UnitaryOp>,
    /// Orthogonal subspace projectors `Π_k`.
    pub underlying_povm: Povm,
    /// Ground truth for the unknown states (simulation only).
    pub true_sigma_list: Vec<DensityMatrix>,
    /// Mean photon count for each subspace.
    pub poisson_means: Vec<f64>,
    /// Number of raw outcomes `M` (photon counts `0..M-2` plus one overflow bin).
    pub max_count: usize,
    /// Trials per probing experiment.
    pub n_trials: u64,
    /// Reference experiments run `⌈factor · n⌉` trials.
    #[serde(default = "default_reference_factor")]
    pub reference_trial_factor: Ratio,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let d = self.d;
        if self.rho0.dim() != d {
            return bad(format!("rho0 has dimension {}, expected {d}", self.rho0.dim()));
        }
        if self.unitaries.is_empty() {
            return bad("unitaries must not be empty".into());
        }
        for (i, u) in self.unitaries.iter().enumerate() {
            if u.dim() != d {
                return bad(format!("unitaries[{i}] has dimension {}, expected {d}", u.dim()));
            }
        }
        if max_abs_diff(self.unitaries[0].matrix(), &identity(d)) > 1e-12 {
            return bad("unitaries[0] must be the identity".into());
        }
        if self.underlying_povm.dim() != d {
            return bad(format!("underlying_povm has dimension {}, expected {d}", self.underlying_povm.dim()));
        }
        check_orthogonal_projectors(&self.underlying_povm)?;
        for (j, s) in self.true_sigma_list.iter().enumerate() {
            if s.dim() != d {
                return bad(format!("true_sigma_list[{j}] has dimension {}, expected {d}", s.dim()));
            }
        }
        let n = self.underlying_povm.len();
        if self.poisson_means.len() != n {
            return bad(format!("poisson_means has {} entries, expected {n}", self.poisson_means.len()));
        }
        if let Some(m) = self.poisson_means.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return bad(format!("poisson_means entry {m} is not a nonnegative number"));
        }
        for a in 0..n {
            for b in a + 1..n {
                if self.poisson_means[a] == self.poisson_means[b] {
                    return bad(format!("poisson_means[{a}] and poisson_means[{b}] are equal"));
                }
            }
        }
        if self.max_count == 0 {
            return bad("max_count must be positive".into());
        }
        if self.n_trials == 0 {
            return bad("n_trials must be positive".into());
        }
        let r = self.reference_trial_factor;
        if r.numerator == 0 || r.denominator == 0 {
            return bad("reference_trial_factor must be a positive ratio".into());
        }
        Ok(())
    }

    pub fn design(&self) -> ExperimentDesign {
        ExperimentDesign::new(
            self.rho0.clone(),
            self.unitaries.clone(),
            self.underlying_povm.elements().iter().map(|e| e.matrix().clone()).collect(),
        )
    }

    pub fn reference_trials(&self) -> u64 {
        self.reference_trial_factor.scale_ceil(self.n_trials)
    }

    /// Trial count per `(j, i)`.
    pub fn trial_counts(&self) -> Vec<Vec<u64>> {
        let r = self.unitaries.len();
        std::iter::once(vec![self.reference_trials(); r])
            .chain(self.true_sigma_list.iter().map(|_| vec![self.n_trials; r]))
            .collect()
    }

    /// The state list `(ρ₀, σ₁, …, σ_s)`.
    pub fn true_taus(&self) -> Vec<DensityMatrix> {
        std::iter::once(self.rho0.clone()).chain(self.true_sigma_list.iter().cloned()).collect()
    }
}

fn check_orthogonal_projectors(povm: &Povm) -> Result<()> {
    let ms: Vec<&CMatrix> = povm.elements().iter().map(MeasurementOperator::matrix).collect();
    let d = povm.dim();
    let zero = CMatrix::zeros(d, d);
    for (a, pa) in ms.iter().enumerate() {
        for (b, pb) in ms.iter().enumerate() {
            let prod = *pa * *pb;
            let target = if a == b { *pa } else { &zero };
            if max_abs_diff(&prod, target) > TRACE_TOL {
                return Err(Error::InvalidConfig(format!(
                    "underlying_povm elements {a} and {b} are not orthogonal projectors"
                )));
            }
            if a < b && max_abs_diff(pa, pb) <= TRACE_TOL {
                return Err(Error::InvalidConfig(format!("underlying_povm elements {a} and {b} are equal")));
            }
        }
        if pa.trace().re < 0.5 {
            return Err(Error::InvalidConfig(format!("underlying_povm element {a} is zero")));
        }
    }
    Ok(())
}

/// The known part of a study: reference state, trusted unitaries and the
/// underlying projectors, with the engineered projectors `U_i† Π_k U_i`
/// precomputed.
#[derive(Debug, Clone)]
pub struct ExperimentDesign {
    rho0: DensityMatrix,
    unitaries: Vec<UnitaryOp>,
    projectors: Vec<CMatrix>,
    engineered: Vec<Vec<CMatrix>>,
}

impl ExperimentDesign {
    pub fn new(rho0: DensityMatrix, unitaries: Vec<UnitaryOp>, projectors: Vec<CMatrix>) -> Self {
        let engineered = unitaries
            .iter()
            .map(|u| projectors.iter().map(|p| u.conjugate_heisenberg(p)).collect())
            .collect();
        Self { rho0, unitaries, projectors, engineered }
    }

    pub fn dim(&self) -> usize {
        self.rho0.dim()
    }

    pub fn n_settings(&self) -> usize {
        self.unitaries.len()
    }

    pub fn n_subspaces(&self) -> usize {
        self.projectors.len()
    }

    pub fn rho0(&self) -> &DensityMatrix {
        &self.rho0
    }

    pub fn unitaries(&self) -> &[UnitaryOp] {
        &self.unitaries
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    /// `U_i† Π_k U_i`.
    pub fn engineered(&self, i: usize, k: usize) -> &CMatrix {
        &self.engineered[i][k]
    }

    /// `[i][k] = Tr(U_i† Π_k U_i τ)`.
    pub fn populations(&self, tau: &DensityMatrix) -> Vec<Vec<f64>> {
        self.engineered
            .iter()
            .map(|row| row.iter().map(|p| trace_product(p, tau.matrix()).re).collect())
            .collect()
    }

    /// Populations of the known states `ρ_i = U_i ρ₀ U_i†`.
    pub fn population_matrix(&self) -> Vec<Vec<f64>> {
        self.populations(&self.rho0)
    }

    /// Engineered measurement operators `F_{i,c} = Σ_k Q[k][c] U_i† Π_k U_i`,
    /// indexed `[i][c]`.
    pub fn engineered_povm(&self, q: &TransitionMatrix) -> Vec<Vec<CMatrix>> {
        let d = self.dim();
        self.engineered
            .iter()
            .map(|row| {
                (0..q.n_outcomes())
                    .map(|c| {
                        row.iter()
                            .enumerate()
                            .fold(CMatrix::zeros(d, d), |acc, (k, p)| acc + p.scale(q.get(k, c)))
                    })
                    .collect()
            })
            .collect()
    }
}

/// `Σ_k Q[k][c] pops[i][k]` for every `(i, c)`.
pub fn outcome_probabilities(pops: &[Vec<f64>], q: &TransitionMatrix) -> Vec<Vec<f64>> {
    pops.iter()
        .map(|row| (0..q.n_outcomes()).map(|c| row.iter().enumerate().map(|(k, p)| q.get(k, c) * p).sum()).collect())
        .collect()
}

/// Row-stochastic `P(observed c | subspace k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    rows: Vec<Vec<f64>>,
}

pub const STOCHASTIC_TOL: f64 = 1e-10;

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::ShapeMismatch("transition matrix is empty".into()));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::ShapeMismatch(format!("transition row {k} has {} entries, expected {cols}", row.len())));
            }
            let sum: f64 = row.iter().sum();
            let in_range = row.iter().all(|x| x.is_finite() && (-STOCHASTIC_TOL..=1.0 + STOCHASTIC_TOL).contains(x));
            if !in_range || (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic { row: k, sum });
            }
        }
        let rows = rows.into_iter().map(|r| r.into_iter().map(|x| x.clamp(0.0, 1.0)).collect()).collect();
        Ok(Self { rows })
    }

    /// Clips every entry to `[0, 1]` and rescales rows to sum to one. A row
    /// with no positive entry becomes uniform.
    pub fn clip_normalize(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|row| {
                let clipped: Vec<f64> = row.iter().map(|x| if x.is_finite() { x.clamp(0.0, 1.0) } else { 0.0 }).collect();
                let s: f64 = clipped.iter().sum();
                if s > 0.0 {
                    clipped.iter().map(|x| x / s).collect()
                } else {
                    vec![1.0 / clipped.len() as f64; clipped.len()]
                }
            })
            .collect();
        Self::new(rows)
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: (0..n).map(|k| (0..n).map(|c| if k == c { 1.0 } else { 0.0 }).collect()).collect() }
    }

    pub fn n_subspaces(&self) -> usize {
        self.rows.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, k: usize, c: usize) -> f64 {
        self.rows[k][c]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        TransitionMatrix::new(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(q: TransitionMatrix) -> Self {
        q.rows
    }
}

/// Integer outcome counts `counts[j][i][c]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "HistogramRepr", into = "HistogramRepr")]
pub struct HistogramSet {
    counts: Vec<Vec<Vec<u64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramRepr {
    pub counts: Vec<Vec<Vec<u64>>>,
}

impl HistogramSet {
    pub fn new(counts: Vec<Vec<Vec<u64>>>) -> Result<Self> {
        let settings = counts.first().map_or(0, Vec::len);
        let outcomes = counts.first().and_then(|f| f.first()).map_or(0, Vec::len);
        if settings == 0 || outcomes == 0 {
            return Err(Error::ShapeMismatch("histogram set is empty".into()));
        }
        for (j, fam) in counts.iter().enumerate() {
            if fam.len() != settings {
                return Err(Error::ShapeMismatch(format!("state {j} has {} rows, expected {settings}", fam.len())));
            }
            if let Some(row) = fam.iter().find(|r| r.len() != outcomes) {
                return Err(Error::ShapeMismatch(format!("state {j} has a row of {} outcomes, expected {outcomes}", row.len())));
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

    pub fn counts(&self) -> &[Vec<Vec<u64>>] {
        &self.counts
    }

    pub fn family(&self, j: usize) -> &[Vec<u64>] {
        &self.counts[j]
    }

    pub fn total(&self, j: usize, i: usize) -> u64 {
        self.counts[j][i].iter().sum()
    }

    pub fn totals(&self) -> Vec<Vec<u64>> {
        self.counts.iter().map(|f| f.iter().map(|r| r.iter().sum()).collect()).collect()
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        Self { counts: self.counts.iter().map(|f| f.iter().map(|r| r.iter().map(|x| x * factor).collect()).collect()).collect() }
    }

    /// One CSV per family: one line per unitary, one column per outcome.
    pub fn family_csv(&self, j: usize) -> String {
        let mut out = String::new();
        for row in &self.counts[j] {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

impl TryFrom<HistogramRepr> for HistogramSet {
    type Error = Error;
    fn try_from(r: HistogramRepr) -> Result<Self> {
        HistogramSet::new(r.counts)
    }
}

impl From<HistogramSet> for HistogramRepr {
    fn from(h: HistogramSet) -> Self {
        HistogramRepr { counts: h.counts }
    }
}

// ---------------------------------------------------------------------------
// two-ion model

/// `(|↑↑⟩ + |↓↓⟩)/√2` in the basis `↑↑, ↑↓, ↓↑, ↓↓`.
pub fn bell_state_vector() -> Vec<Complex64> {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    vec![h, z, z, h]
}

/// `p |Φ⁺⟩⟨Φ⁺| + (1 − p) 𝟙/4`.
pub fn noisy_bell_state(p: f64) -> DensityMatrix {
    let bell = DensityMatrix::pure(&bell_state_vector()).expect("normalised");
    bell.mixture(&DensityMatrix::maximally_mixed(4), p).expect("valid mixture")
}

/// Two ions read out by a single photon counter.
///
/// Basis order is `↑↑, ↑↓, ↓↑, ↓↓` (bright = ↑ = index 0 of each qubit).
/// `Π₀` is dark–dark, `Π₁` exactly one ion bright, `Π₂` bright–bright.
pub fn build_two_ion_model() -> ExperimentConfig {
    let rho0 = DensityMatrix::new(basis_projector(4, 0)).expect("pure state");
    let gate = |theta, phi, label: &str| {
        UnitaryOp::new(label, rotation_gate(theta, phi, 2).matrix().clone()).expect("unitary")
    };
    let unitaries = vec![
        UnitaryOp::new("U(0,0)", identity(4)).expect("unitary"),
        gate(FRAC_PI_2, 0.0, "U(pi/2,0)"),
        gate(PI, 0.0, "U(pi,0)"),
        gate(FRAC_PI_2, FRAC_PI_2, "U(pi/2,pi/2)"),
    ];
    let povm = Povm::from_matrices(vec![
        basis_projector(4, 3),
        basis_projector(4, 1) + basis_projector(4, 2),
        basis_projector(4, 0),
    ])
    .expect("complete");
    ExperimentConfig {
        d: 4,
        rho0,
        unitaries,
        underlying_povm: povm,
        true_sigma_list: vec![noisy_bell_state(0.99)],
        poisson_means: vec![2.0, 20.0, 40.0],
        max_count: 61,
        n_trials: 5000,
        reference_trial_factor: default_reference_factor(),
        seed: 7,
    }
}

/// Poisson photon-count readout: column `b < M − 1` is `P(count = b)`, the
/// last column holds the whole tail `P(count ≥ M − 1)`.
pub fn true_transition_matrix(cfg: &ExperimentConfig) -> TransitionMatrix {
    poisson_transition(&cfg.poisson_means, cfg.max_count)
}

pub fn poisson_transition(means: &[f64], outcomes: usize) -> TransitionMatrix {
    let rows = means
        .iter()
        .map(|&mean| {
            let mut row = vec![0.0; outcomes];
            let mut pmf = (-mean).exp();
            let mut head = 0.0;
            for (b, slot) in row.iter_mut().enumerate().take(outcomes - 1) {
                if b > 0 {
                    pmf *= mean / b as f64;
                }
                *slot = pmf;
                head += pmf;
            }
            row[outcomes - 1] = (1.0 - head).max(0.0);
            row
        })
        .collect();
    TransitionMatrix::new(rows).expect("poisson rows are stochastic")
}

/// `P[i][k] = Tr(Π_k U_i ρ₀ U_i†)`.
pub fn population_matrix(cfg: &ExperimentConfig) -> Vec<Vec<f64>> {
    cfg.design().population_matrix()
}

/// Draws every experiment of a study from the configured ground truth.
pub fn sample_experiments(cfg: &ExperimentConfig) -> Result<HistogramSet> {
    cfg.validate()?;
    let q = true_transition_matrix(cfg);
    sample_histograms(&cfg.design(), &cfg.true_taus(), &q, &cfg.trial_counts(), cfg.seed, rng::tags::SIMULATE)
}

/// Multinomial draws for every `(j, i)` with outcome probabilities
/// `Σ_k Q[k][c] Tr(U_i† Π_k U_i τ_j)`. Experiment `(j, i)` uses the substream
/// `(master, stage, j, i)`.
pub fn sample_histograms(
    design: &ExperimentDesign,
    taus: &[DensityMatrix],
    q: &TransitionMatrix,
    trials: &[Vec<u64>],
    master: u64,
    stage: u64,
) -> Result<HistogramSet> {
    if q.n_subspaces() != design.n_subspaces() {
        return Err(Error::DimensionMismatch { expected: design.n_subspaces(), found: q.n_subspaces() });
    }
    if trials.len() != taus.len() {
        return Err(Error::ShapeMismatch(format!("{} trial rows for {} states", trials.len(), taus.len())));
    }
    let mut counts = Vec::with_capacity(taus.len());
    for (j, tau) in taus.iter().enumerate() {
        let probs = outcome_probabilities(&design.populations(tau), q);
        let mut family = Vec::with_capacity(probs.len());
        for (i, p) in probs.iter().enumerate() {
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
                return Err(Error::ProbabilitySum { family: j, setting: i, sum });
            }
            let p: Vec<f64> = p.iter().map(|x| x.max(0.0)).collect();
            let mut rng = rng::substream(master, &[stage, j as u64, i as u64]);
            family.push(multinomial(&mut rng, trials[j][i], &p));
        }
        counts.push(family);
    }
    HistogramSet::new(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::Observable;

    #[test]
    fn two_ion_constants() {
        let cfg = build_two_ion_model();
        cfg.validate().unwrap();
        assert_eq!(cfg.poisson_means, vec![2.0, 20.0, 40.0]);
        let ranks: Vec<usize> = cfg.underlying_povm.elements().iter().map(|e| e.rank()).collect();
        assert_eq!(ranks, vec![1, 2, 1]);
        let bell = Observable::new("bell", crate::qcore::outer(&bell_state_vector())).unwrap();
        assert!((cfg.true_sigma_list[0].expectation(&bell) - 0.9925).abs() < 1e-12);
        assert_eq!(cfg.reference_trials(), 5556);
    }

    #[test]
    fn poisson_rows() {
        let q = poisson_transition(&[0.0, 2.0, 40.0], 61);
        assert_eq!(q.row(0)[0], 1.0);
        assert!(q.row(0)[1..].iter().all(|&x| x == 0.0));
        assert!((q.get(1, 0) - (-2.0f64).exp()).abs() < 1e-15);
        assert!((q.get(1, 0) - 0.13534).abs() < 1e-5);
        for row in q.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn population_rows() {
        let p = population_matrix(&build_two_ion_model());
        let expect = [[0.0, 0.0, 1.0], [0.25, 0.5, 0.25], [1.0, 0.0, 0.0], [0.25, 0.5, 0.25]];
        for (row, e) in p.iter().zip(expect) {
            for (a, b) in row.iter().zip(e) {
                assert!((a - b).abs() < 1e-14, "{row:?} vs {e:?}");
            }
        }
    }

    #[test]
    fn deterministic_outcome_concentrates() {
        let mut cfg = build_two_ion_model();
        cfg.true_sigma_list = vec![cfg.rho0.clone()];
        cfg.n_trials = 300;
        let design = cfg.design();
        let q = TransitionMatrix::identity(3);
        let h = sample_histograms(&design, &cfg.true_taus(), &q, &cfg.trial_counts(), 1, 0).unwrap();
        assert_eq!(h.family(1)[0], vec![0, 0, 300]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = build_two_ion_model();
        cfg.poisson_means = vec![2.0, 2.0, 40.0];
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));

        let mut cfg = build_two_ion_model();
        cfg.unitaries.swap(0, 1);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));

        let mut cfg = build_two_ion_model();
        cfg.poisson_means.pop();
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn non_orthogonal_povm_rejected() {
        let mut cfg = build_two_ion_model();
        let overlap = basis_projector(4, 0).scale(0.5) + basis_projector(4, 1).scale(0.5);
        cfg.underlying_povm = Povm::from_matrices(vec![
            overlap.clone(),
            overlap,
            basis_projector(4, 2) + basis_projector(4, 3),
        ])
        .unwrap();
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = build_two_ion_model();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }
}
