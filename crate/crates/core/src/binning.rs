//! Coarse graining of the raw outcome space.
//!
//! A [`BinRule`] groups contiguous raw outcomes into `G` bins. The edges are
//! chosen greedily to keep as much mutual information as possible between the
//! bin index and the hidden subspace outcome, evaluated on a transition
//! matrix estimated from a held-out training sample of the reference data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::init_transition;
use crate::iontrap::{ExperimentDesign, HistogramSet, TransitionMatrix};
use crate::rng::{self, multivariate_hypergeometric};

/// Candidate edges whose mutual information differs by less than this are
/// tied; the smallest position wins.
pub const MI_TIE_TOL: f64 = 1e-12;

/// Edges `0 = B₀ < B₁ < … < B_G = M`; raw column `b` (zero-based) falls in
/// bin `c` when `B_c ≤ b < B_{c+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BinRule {
    edges: Vec<usize>,
}

impl BinRule {
    pub fn new(edges: Vec<usize>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::BadBinRule("need at least two edges".into()));
        }
        if edges[0] != 0 {
            return Err(Error::BadBinRule(format!("first edge is {}, expected 0", edges[0])));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadBinRule(format!("edges {edges:?} are not strictly increasing")));
        }
        Ok(Self { edges })
    }

    pub fn identity(outcomes: usize) -> Self {
        Self { edges: (0..=outcomes).collect() }
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn n_outcomes(&self) -> usize {
        *self.edges.last().expect("nonempty")
    }

    /// Sums `row` over each bin.
    pub fn apply<T: Copy + std::iter::Sum<T>>(&self, row: &[T]) -> Vec<T> {
        self.edges.windows(2).map(|w| row[w[0]..w[1]].iter().copied().sum()).collect()
    }

    fn check_outcomes(&self, outcomes: usize) -> Result<()> {
        if self.n_outcomes() != outcomes {
            return Err(Error::BadBinRule(format!(
                "rule covers {} outcomes, data has {outcomes}",
                self.n_outcomes()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for BinRule {
    type Error = Error;
    fn try_from(edges: Vec<usize>) -> Result<Self> {
        BinRule::new(edges)
    }
}

impl From<BinRule> for Vec<usize> {
    fn from(r: BinRule) -> Self {
        r.edges
    }
}

/// Joint distribution `P(k, c)` of hidden outcome and bin.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    p: Vec<Vec<f64>>,
}

impl JointDistribution {
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self> {
        let total: f64 = p.iter().flatten().sum();
        if p.iter().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::ShapeMismatch(format!("joint distribution sums to {total}")));
        }
        Ok(Self { p })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.p
    }
}

/// Splits each reference experiment into a training sample of
/// `round(fraction · trials)` trials drawn without replacement and the
/// remainder. The training set holds only the reference family; the
/// remainder keeps every family, with reference rows reduced.
pub fn split_training_set(h: &HistogramSet, fraction: f64, seed: u64) -> Result<(HistogramSet, HistogramSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::EmptyTraining(fraction));
    }
    let mut training = Vec::with_capacity(h.n_settings());
    let mut remainder = h.counts().to_vec();
    for (i, row) in h.family(0).iter().enumerate() {
        let total: u64 = row.iter().sum();
        let draws = (fraction * total as f64).round() as u64;
        if draws == 0 {
            return Err(Error::EmptyTraining(fraction));
        }
        let mut rng = rng::substream(seed, &[rng::tags::TRAINING_SPLIT, i as u64]);
        let taken = multivariate_hypergeometric(&mut rng, row, draws);
        for (r, t) in remainder[0][i].iter_mut().zip(&taken) {
            *r -= t;
        }
        training.push(taken);
    }
    Ok((HistogramSet::new(vec![training])?, HistogramSet::new(remainder)?))
}

/// `I(K; C)` in bits, with `0 · log 0 = 0`.
pub fn mutual_information(p: &JointDistribution) -> f64 {
    let rows = p.rows();
    let cols = rows.first().map_or(0, Vec::len);
    let pk: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let pc: Vec<f64> = (0..cols).map(|c| rows.iter().map(|r| r[c]).sum()).collect();
    let mut mi = 0.0;
    for (k, row) in rows.iter().enumerate() {
        for (c, &pkc) in row.iter().enumerate() {
            if pkc > 0.0 {
                mi += pkc * (pkc / (pk[k] * pc[c])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// `P(k, c) = Q[k][c] / N`: the joint distribution for a state that occupies
/// every subspace with equal probability.
pub fn equalized_joint(q: &TransitionMatrix) -> JointDistribution {
    let n = q.n_subspaces() as f64;
    JointDistribution { p: q.rows().iter().map(|r| r.iter().map(|x| x / n).collect()).collect() }
}

/// Result of the greedy edge search, with the mutual information after each
/// inserted edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyBinning {
    pub rule: BinRule,
    /// `mi_trace[g]` is the information with `g + 1` bins.
    pub mi_trace: Vec<f64>,
}

pub fn greedy_bin_edges(q_train: &TransitionMatrix, target_bins: usize) -> Result<BinRule> {
    greedy_bin_edges_traced(q_train, target_bins).map(|g| g.rule)
}

/// Inserts one edge at a time, each at the position that maximises the
/// mutual information of the equalized joint distribution with all earlier
/// edges held fixed.
pub fn greedy_bin_edges_traced(q_train: &TransitionMatrix, target_bins: usize) -> Result<GreedyBinning> {
    let m = q_train.n_outcomes();
    if target_bins > m || target_bins == 0 {
        return Err(Error::TooManyBins { bins: target_bins, outcomes: m });
    }
    let mut edges = vec![0, m];
    let score = |edges: &[usize]| {
        let rule = BinRule { edges: edges.to_vec() };
        mutual_information(&equalized_joint(&apply_binning_transition(q_train, &rule).expect("same width")))
    };
    let mut trace = vec![score(&edges)];
    while edges.len() < target_bins + 1 {
        let mut best: Option<(usize, f64)> = None;
        for pos in 1..m {
            let at = match edges.binary_search(&pos) {
                Ok(_) => continue,
                Err(at) => at,
            };
            let mut candidate = edges.clone();
            candidate.insert(at, pos);
            let mi = score(&candidate);
            if best.is_none_or(|(_, b)| mi > b + MI_TIE_TOL) {
                best = Some((pos, mi));
            }
        }
        let (pos, mi) = best.expect("a free position exists while bins < outcomes");
        let at = edges.binary_search(&pos).unwrap_err();
        edges.insert(at, pos);
        trace.push(mi);
    }
    Ok(GreedyBinning { rule: BinRule::new(edges)?, mi_trace: trace })
}

/// `H'[j][i][c] = Σ_{b ∈ bin c} H[j][i][b]`.
pub fn apply_binning_histogram(h: &HistogramSet, rule: &BinRule) -> Result<HistogramSet> {
    rule.check_outcomes(h.n_outcomes())?;
    HistogramSet::new(h.counts().iter().map(|f| f.iter().map(|row| rule.apply(row)).collect()).collect())
}

/// `Q'[k][c] = Σ_{b ∈ bin c} Q[k][b]`.
pub fn apply_binning_transition(q: &TransitionMatrix, rule: &BinRule) -> Result<TransitionMatrix> {
    rule.check_outcomes(q.n_outcomes())?;
    TransitionMatrix::clip_normalize(q.rows().iter().map(|row| rule.apply(row)).collect())
}

/// Output of [`coarse_grain`].
#[derive(Debug, Clone)]
pub struct CoarseGraining {
    pub rule: BinRule,
    pub mi_trace: Vec<f64>,
    /// Unbinned transition estimate from the training sample.
    pub q_train: TransitionMatrix,
    pub training: HistogramSet,
    /// Remaining data, binned.
    pub binned: HistogramSet,
}

/// Training split, greedy edge search on the training estimate of `Q`, and
/// binning of everything that was not used for training.
pub fn coarse_grain(
    h: &HistogramSet,
    design: &ExperimentDesign,
    target_bins: usize,
    fraction: f64,
    seed: u64,
) -> Result<CoarseGraining> {
    let (training, remainder) = split_training_set(h, fraction, seed)?;
    let q_train = init_transition(training.family(0), &design.population_matrix())?;
    let greedy = greedy_bin_edges_traced(&q_train, target_bins)?;
    let binned = apply_binning_histogram(&remainder, &greedy.rule)?;
    Ok(CoarseGraining { rule: greedy.rule, mi_trace: greedy.mi_trace, q_train, training, binned })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iontrap::poisson_transition;

    fn joint(p: Vec<Vec<f64>>) -> JointDistribution {
        JointDistribution::new(p).unwrap()
    }

    #[test]
    fn mi_examples() {
        let diag = joint((0..3).map(|k| (0..3).map(|c| if k == c { 1.0 / 3.0 } else { 0.0 }).collect()).collect());
        assert!((mutual_information(&diag) - 3f64.log2()).abs() < 1e-12);

        let product = joint(vec![vec![0.12, 0.28], vec![0.18, 0.42]]);
        assert!(mutual_information(&product).abs() < 1e-12);

        // 2·0.4·log2(0.4/0.25) + 2·0.1·log2(0.1/0.25)
        let oracle = 0.8 * (1.6f64).log2() + 0.2 * (0.4f64).log2();
        let m = mutual_information(&joint(vec![vec![0.4, 0.1], vec![0.1, 0.4]]));
        assert!((m - oracle).abs() < 1e-14);
        assert!((m - 0.27807).abs() < 1e-5);
    }

    #[test]
    fn equalized_marginals() {
        let q = poisson_transition(&[2.0, 20.0, 40.0], 61);
        let j = equalized_joint(&q);
        for row in j.rows() {
            assert!((row.iter().sum::<f64>() - 1.0 / 3.0).abs() < 1e-15);
        }
        let id = equalized_joint(&TransitionMatrix::identity(3));
        assert!((mutual_information(&id) - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn greedy_small_exhaustive() {
        let q = TransitionMatrix::new(vec![vec![0.9, 0.1, 0.0, 0.0], vec![0.0, 0.0, 0.1, 0.9]]).unwrap();
        let g = greedy_bin_edges_traced(&q, 2).unwrap();
        assert_eq!(g.rule.edges(), &[0, 2, 4]);
        assert!((g.mi_trace[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_full_resolution_is_identity() {
        let q = poisson_transition(&[1.0, 4.0], 8);
        let g = greedy_bin_edges_traced(&q, 8).unwrap();
        assert_eq!(g.rule, BinRule::identity(8));
        let full = mutual_information(&equalized_joint(&q));
        assert!((g.mi_trace.last().unwrap() - full).abs() < 1e-12);
        assert!(g.mi_trace.windows(2).all(|w| w[1] >= w[0] - 1e-15));
    }

    #[test]
    fn greedy_rejects_too_many_bins() {
        let q = TransitionMatrix::identity(3);
        assert!(matches!(greedy_bin_edges(&q, 4), Err(Error::TooManyBins { .. })));
    }

    #[test]
    fn histogram_binning() {
        let h = HistogramSet::new(vec![vec![vec![1, 2, 3, 4, 5], vec![0, 0, 7, 0, 1]]]).unwrap();
        assert_eq!(apply_binning_histogram(&h, &BinRule::identity(5)).unwrap(), h);
        let one = apply_binning_histogram(&h, &BinRule::new(vec![0, 5]).unwrap()).unwrap();
        assert_eq!(one.family(0), &[vec![15], vec![8]]);
        let two = apply_binning_histogram(&h, &BinRule::new(vec![0, 2, 5]).unwrap()).unwrap();
        assert_eq!(two.family(0), &[vec![3, 12], vec![0, 8]]);
    }

    #[test]
    fn transition_binning() {
        let q = poisson_transition(&[2.0, 20.0], 61);
        assert_eq!(apply_binning_transition(&q, &BinRule::identity(61)).unwrap(), q);
        let one = apply_binning_transition(&q, &BinRule::new(vec![0, 61]).unwrap()).unwrap();
        assert!(one.rows().iter().all(|r| (r[0] - 1.0).abs() < 1e-15));

        // split after count 20: P(X ≤ 20) for Poisson(20) by direct summation
        let two = apply_binning_transition(&q, &BinRule::new(vec![0, 21, 61]).unwrap()).unwrap();
        let mut cdf = 0.0;
        let mut term = (-20f64).exp();
        for x in 0..=20 {
            if x > 0 {
                term *= 20.0 / x as f64;
            }
            cdf += term;
        }
        assert!((two.get(1, 0) - cdf).abs() < 1e-12);
        assert!((two.get(1, 0) - 0.559_093).abs() < 1e-5);
    }

    #[test]
    fn bin_rule_validation() {
        assert!(BinRule::new(vec![0, 3, 3, 5]).is_err());
        assert!(BinRule::new(vec![1, 3]).is_err());
        let h = HistogramSet::new(vec![vec![vec![1, 2, 3]]]).unwrap();
        assert!(apply_binning_histogram(&h, &BinRule::identity(4)).is_err());
    }

    #[test]
    fn training_split_counts() {
        let h = HistogramSet::new(vec![
            vec![vec![1000, 2556, 2000], vec![5556, 0, 0]],
            vec![vec![10, 20, 30], vec![1, 2, 3]],
        ])
        .unwrap();
        let (train, rest) = split_training_set(&h, 0.1, 3).unwrap();
        assert_eq!(train.n_families(), 1);
        for i in 0..2 {
            assert_eq!(train.total(0, i), 556);
            assert_eq!(rest.total(0, i), 5000);
            for b in 0..3 {
                assert_eq!(train.family(0)[i][b] + rest.family(0)[i][b], h.family(0)[i][b]);
            }
        }
        assert_eq!(rest.family(1), h.family(1));
        assert_eq!(split_training_set(&h, 0.1, 3).unwrap().0, train);
        assert!(matches!(split_training_set(&h, 1e-6, 3), Err(Error::EmptyTraining(_))));
    }
}
