mod common;

use common::*;
use proptest::prelude::*;
use qdt_core::binning::{
    apply_binning_histogram, apply_binning_transition, equalized_joint, greedy_bin_edges_traced, mutual_information,
    BinRule,
};
use qdt_core::bounds::{build_constraint_basis, solve_bounds, ConstraintBasis};
use qdt_core::estimator::{
    likelihood_frequency, log_likelihood, project_simplex, rrr_maximize_states, stop_bound_q, SolverOptions, Tally,
    TransitionObjective,
};
use qdt_core::iontrap::{
    build_two_ion_model, outcome_probabilities, poisson_transition, sample_histograms, HistogramSet,
};
use qdt_core::qcore::{
    hermitian_to_vector, identity, max_abs_diff, rotation_gate, trace_product, vector_to_hermitian, DensityMatrix,
    Observable,
};
use qdt_core::uncertainty::{ci_basic, ci_bias_corrected, quantile};
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotations_are_unitary(theta in -10.0f64..10.0, phi in -10.0f64..10.0, n in 1usize..4) {
        let u = rotation_gate(theta, phi, n);
        let d = 1 << n;
        prop_assert!(max_abs_diff(&(u.matrix().adjoint() * u.matrix()), &identity(d)) <= 1e-12);
    }

    #[test]
    fn vectorization_preserves_inner_products(seed in any::<u64>(), d in 1usize..5) {
        let mut r = rng(seed);
        let a = random_hermitian(&mut r, d);
        let b = random_hermitian(&mut r, d);
        let va = hermitian_to_vector(&a).unwrap();
        let vb = hermitian_to_vector(&b).unwrap();
        prop_assert!((va.dot(&vb) - trace_product(&a, &b).re).abs() <= 1e-12);
        prop_assert!(max_abs_diff(&vector_to_hermitian(&va).unwrap(), &a) <= 1e-14);
    }

    #[test]
    fn two_ion_outcome_rows_sum_to_one(seed in any::<u64>(), g in 1usize..12) {
        let mut r = rng(seed);
        let cfg = build_two_ion_model();
        let design = cfg.design();
        let sigma = random_state(&mut r, 4);
        let q = random_stochastic(&mut r, 3, g);
        for row in outcome_probabilities(&design.populations(&sigma), &q) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            prop_assert!(row.iter().all(|&p| p >= -1e-12));
        }
    }

    #[test]
    fn sampled_histograms_keep_trial_counts(seed in any::<u64>(), n in 1u64..3000) {
        let cfg = build_two_ion_model();
        let design = cfg.design();
        let q = poisson_transition(&cfg.poisson_means, 20);
        let trials = vec![vec![n; 4], vec![n + 1; 4]];
        let h = sample_histograms(&design, &cfg.true_taus(), &q, &trials, seed, 1).unwrap();
        for j in 0..2 {
            for i in 0..4 {
                prop_assert_eq!(h.total(j, i), trials[j][i]);
            }
        }
        let again = sample_histograms(&design, &cfg.true_taus(), &q, &trials, seed, 1).unwrap();
        prop_assert_eq!(h, again);
    }

    #[test]
    fn binning_preserves_totals_and_stochasticity(seed in any::<u64>(), g in 1usize..10) {
        let mut r = rng(seed);
        let m = 12;
        let mut cuts: Vec<usize> = (1..m).collect();
        for i in (1..cuts.len()).rev() {
            cuts.swap(i, r.random_range(0..=i));
        }
        let mut edges: Vec<usize> = cuts[..g - 1].to_vec();
        edges.push(0);
        edges.push(m);
        edges.sort_unstable();
        let rule = BinRule::new(edges).unwrap();
        let counts: Vec<Vec<Vec<u64>>> = (0..2).map(|_| (0..3).map(|_| (0..m).map(|_| r.random_range(0..50)).collect()).collect()).collect();
        let h = HistogramSet::new(counts).unwrap();
        let binned = apply_binning_histogram(&h, &rule).unwrap();
        prop_assert_eq!(binned.n_outcomes(), g);
        prop_assert_eq!(binned.totals(), h.totals());
        let q = random_stochastic(&mut r, 3, m);
        let qb = apply_binning_transition(&q, &rule).unwrap();
        for row in qb.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        // coarse graining never creates information
        prop_assert!(mutual_information(&equalized_joint(&qb)) <= mutual_information(&equalized_joint(&q)) + 1e-12);
    }

    #[test]
    fn greedy_information_is_monotone_and_bounded(seed in any::<u64>(), n in 2usize..5, g in 1usize..9) {
        let mut r = rng(seed);
        let q = random_stochastic(&mut r, n, 16);
        let traced = greedy_bin_edges_traced(&q, g).unwrap();
        prop_assert_eq!(traced.rule.n_bins(), g);
        for w in traced.mi_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        let cap = (n.min(g) as f64).log2();
        prop_assert!(traced.mi_trace.iter().all(|&m| m <= cap + 1e-12));
    }

    #[test]
    fn simplex_projection_is_nearest_point(v in prop::collection::vec(-3.0f64..3.0, 1..8), seed in any::<u64>()) {
        let p = project_simplex(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        let dist = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let mut r = rng(seed);
        for _ in 0..20 {
            let mut w: Vec<f64> = (0..v.len()).map(|_| r.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            prop_assert!(dist(&p) <= dist(&w) + 1e-12);
        }
    }

    #[test]
    fn model_likelihood_never_beats_frequencies(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = build_two_ion_model();
        let design = cfg.design();
        let q = random_stochastic(&mut r, 3, 6);
        let sigma = random_state(&mut r, 4);
        let counts: Vec<Vec<Vec<f64>>> = (0..2).map(|_| (0..4).map(|_| (0..6).map(|_| r.random_range(0..40) as f64).collect()).collect()).collect();
        let h = Tally::new(counts).unwrap();
        prop_assert!(log_likelihood(&h, &design, &[sigma], &q) <= likelihood_frequency(&h) + 1e-9);
    }

    #[test]
    fn stop_bounds_are_nonnegative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = build_two_ion_model();
        let design = cfg.design();
        let q = random_stochastic(&mut r, 3, 5);
        let sigma = random_state(&mut r, 4);
        let counts: Vec<Vec<Vec<f64>>> = (0..2).map(|_| (0..4).map(|_| (0..5).map(|_| r.random_range(1..40) as f64).collect()).collect()).collect();
        let h = Tally::new(counts).unwrap();
        let objective = TransitionObjective::from_states(&h, &design, std::slice::from_ref(&sigma));
        prop_assert!(stop_bound_q(q.rows(), &objective.gradient(q.rows())) >= -1e-9);
        let opts = SolverOptions { max_rrr_iterations: 0, ..SolverOptions::default() };
        let out = rrr_maximize_states(&h, &design, &q, &[sigma], &opts).unwrap();
        prop_assert!(out.s_sigma >= -1e-9);
    }

    #[test]
    fn bounds_sandwich_the_estimate(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = build_two_ion_model();
        let design = cfg.design();
        let q = random_stochastic(&mut r, 3, 4);
        let sigma = random_state(&mut r, 4);
        let basis = build_constraint_basis(&q, &design).unwrap();
        // constraint rows are orthonormal
        for (a, va) in basis.rows().iter().enumerate() {
            for (b, vb) in basis.rows().iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((trace_product(va, vb).re - want).abs() <= 1e-10);
            }
        }
        let o = Observable::new("random", random_hermitian(&mut r, 4)).unwrap();
        let b = solve_bounds(&o, &sigma, &basis).unwrap();
        let (lmin, lmax) = o.spectral_range();
        prop_assert!(b.valid, "{:?}", b);
        prop_assert!(b.lower <= b.point_estimate + 1e-7 && b.point_estimate <= b.upper + 1e-7, "{:?}", b);
        prop_assert!(b.lower >= lmin - 1e-8 && b.upper <= lmax + 1e-8);
        prop_assert!(b.diagnostics.feasibility_residual <= 1e-7);
        prop_assert!(b.diagnostics.duality_gap <= 1e-7);
    }

    #[test]
    fn identifiable_observables_have_equal_bounds(seed in any::<u64>()) {
        let mut r = rng(seed);
        let design = build_two_ion_model().design();
        let q = random_stochastic(&mut r, 3, 4);
        let sigma = random_state(&mut r, 4);
        let basis = build_constraint_basis(&q, &design).unwrap();
        // a random combination of constraint rows lies in the span by construction
        let mut m = identity(4).scale(r.random::<f64>());
        for v in basis.rows() {
            m += v.scale(r.random::<f64>() - 0.5);
        }
        prop_assert!(basis.span_residual(&m).unwrap() < 1e-9);
        let o = Observable::new("in-span", m.clone()).unwrap();
        let b = solve_bounds(&o, &sigma, &basis).unwrap();
        prop_assert!(b.upper - b.lower <= 1e-6, "{:?}", b);
        prop_assert!((b.lower - trace_product(&m, sigma.matrix()).re).abs() <= 1e-6);
    }

    #[test]
    fn reduced_and_full_constraints_agree_on_qubits(seed in any::<u64>()) {
        let mut r = rng(seed);
        let design = z_only_qubit_design();
        let q = random_stochastic(&mut r, 2, 3);
        let sigma = random_state(&mut r, 2);
        let reduced = build_constraint_basis(&q, &design).unwrap();
        let full = ConstraintBasis::unreduced(design.engineered_povm(&q).into_iter().flatten().collect());
        let o = Observable::new("random", random_hermitian(&mut r, 2)).unwrap();
        let a = solve_bounds(&o, &sigma, &reduced).unwrap();
        let b = solve_bounds(&o, &sigma, &full).unwrap();
        prop_assert!((a.lower - b.lower).abs() <= 1e-6 && (a.upper - b.upper).abs() <= 1e-6);
    }

    #[test]
    fn intervals_are_ordered_and_equivariant(seed in any::<u64>(), shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
        let mut r = rng(seed);
        let samples: Vec<f64> = (0..60).map(|_| r.random::<f64>() + r.random::<f64>()).collect();
        let theta = 1.0 + 0.2 * (r.random::<f64>() - 0.5);
        let mapped: Vec<f64> = samples.iter().map(|x| shift + scale * x).collect();
        for (ci, cm) in [
            (ci_basic(theta, &samples, 0.95).unwrap(), ci_basic(shift + scale * theta, &mapped, 0.95).unwrap()),
            (ci_bias_corrected(theta, &samples, 0.95).unwrap(), ci_bias_corrected(shift + scale * theta, &mapped, 0.95).unwrap()),
        ] {
            prop_assert!(ci.lower <= ci.upper);
            prop_assert!((cm.lower - (shift + scale * ci.lower)).abs() <= 1e-9 * (1.0 + scale));
            prop_assert!((cm.upper - (shift + scale * ci.upper)).abs() <= 1e-9 * (1.0 + scale));
        }
    }

    #[test]
    fn quantiles_are_monotone(mut v in prop::collection::vec(-100.0f64..100.0, 2..50), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        v.sort_by(f64::total_cmp);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantile(&v, lo) <= quantile(&v, hi));
        prop_assert!(quantile(&v, lo) >= v[0] && quantile(&v, hi) <= v[v.len() - 1]);
    }

    #[test]
    fn symmetric_samples_give_symmetric_intervals(seed in any::<u64>()) {
        let mut r = rng(seed);
        let theta = 0.3;
        let half: Vec<f64> = (0..30).map(|_| r.random::<f64>()).collect();
        let samples: Vec<f64> = half.iter().flat_map(|x| [theta + x, theta - x]).collect();
        let ci = ci_basic(theta, &samples, 0.9).unwrap();
        prop_assert!(((ci.lower + ci.upper) / 2.0 - theta).abs() <= 1e-12);
    }
}

#[test]
fn density_matrix_rejects_invalid_input() {
    let mut bad = identity(2).scale(0.5);
    bad[(0, 1)] = num_complex::Complex64::new(0.1, 0.0);
    assert!(DensityMatrix::new(bad).is_err());
    assert!(DensityMatrix::new(identity(2)).is_err());
}
