//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers or strings and returns a JSON string, so
//! the same functions run natively in tests. Failures come back as
//! `{"error": "..."}` rather than as exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use qdt_core::binning::{apply_binning_transition, coarse_grain, equalized_joint, greedy_bin_edges_traced, mutual_information};
use qdt_core::bounds::{bell_observable, qubit_state, second_ion_bright_observable, solve_bounds, ConstraintBasis};
use qdt_core::estimator::{fit, SolverOptions, Tally};
use qdt_core::iontrap::{build_two_ion_model, noisy_bell_state, poisson_transition, sample_experiments};
use qdt_core::qcore::{identity, paulis, CMatrix, DensityMatrix, MatrixRepr, Observable};
use qdt_core::uncertainty::bounds_for_estimate;

type DemoResult<T> = std::result::Result<T, String>;

fn respond<T: Serialize>(r: DemoResult<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("demo output serializes"),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Debug, Serialize)]
pub struct BinningView {
    pub edges: Vec<usize>,
    /// Bits after each inserted edge, starting from a single bin.
    pub mi_trace: Vec<f64>,
    pub unbinned_mi: f64,
    pub retained: f64,
    /// Raw Poisson rows, one per subspace.
    pub raw_rows: Vec<Vec<f64>>,
    pub binned_rows: Vec<Vec<f64>>,
}

/// Greedy binning of the Poisson readout with the given per-subspace means.
pub fn binning_view(means: &[f64], outcomes: usize, bins: usize) -> DemoResult<BinningView> {
    if means.is_empty() || means.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err("means must be nonnegative numbers".into());
    }
    if outcomes < 2 || outcomes > 400 {
        return Err("outcomes must be between 2 and 400".into());
    }
    let q = poisson_transition(means, outcomes);
    let greedy = greedy_bin_edges_traced(&q, bins).map_err(err)?;
    let binned = apply_binning_transition(&q, &greedy.rule).map_err(err)?;
    let unbinned_mi = mutual_information(&equalized_joint(&q));
    let last = *greedy.mi_trace.last().expect("at least one bin");
    Ok(BinningView {
        edges: greedy.rule.edges().to_vec(),
        mi_trace: greedy.mi_trace,
        unbinned_mi,
        retained: if unbinned_mi > 0.0 { last / unbinned_mi } else { 1.0 },
        raw_rows: q.rows().to_vec(),
        binned_rows: binned.rows().to_vec(),
    })
}

#[wasm_bindgen]
pub fn binning_explorer(means: &str, outcomes: usize, bins: usize) -> String {
    let parsed: DemoResult<Vec<f64>> = means
        .split([',', ' '])
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number")))
        .collect();
    respond(parsed.and_then(|m| binning_view(&m, outcomes, bins)))
}

#[derive(Debug, Serialize)]
pub struct BoundView {
    pub observable: String,
    pub truth: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub identifiable: bool,
}

#[derive(Debug, Serialize)]
pub struct FitView {
    pub edges: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub loglike: f64,
    pub s_sigma: f64,
    pub s_q: f64,
    pub loglike_trace: Vec<f64>,
    pub sigma: MatrixRepr,
    pub sigma_true: MatrixRepr,
    pub trace_distance: f64,
    pub q_hat: Vec<Vec<f64>>,
    pub bounds: Vec<BoundView>,
}

/// Simulates the two-ion study with `bell_weight |Φ⁺⟩⟨Φ⁺| + (1 − w) 𝟙/4` as the
/// unknown state, fits it, and bounds both built-in observables.
pub fn fit_view(n_trials: u64, bins: usize, seed: u64, bell_weight: f64) -> DemoResult<FitView> {
    if !(0.0..=1.0).contains(&bell_weight) {
        return Err("Bell weight must lie in [0, 1]".into());
    }
    if !(100..=200_000).contains(&n_trials) {
        return Err("trials must be between 100 and 200000".into());
    }
    let mut cfg = build_two_ion_model();
    cfg.n_trials = n_trials;
    cfg.seed = seed;
    cfg.true_sigma_list = vec![noisy_bell_state(bell_weight)];
    let design = cfg.design();
    let raw = sample_experiments(&cfg).map_err(err)?;
    let coarse = coarse_grain(&raw, &design, bins, 0.1, seed).map_err(err)?;
    let est = fit(&Tally::from(&coarse.binned), &design, &SolverOptions::default()).map_err(err)?;
    let observables = [bell_observable(), second_ion_bright_observable()];
    let bounds = bounds_for_estimate(&est, &design, &observables).map_err(err)?;
    let truth = &cfg.true_sigma_list[0];
    Ok(FitView {
        edges: coarse.rule.edges().to_vec(),
        converged: est.converged,
        iterations: est.iterations,
        loglike: est.loglike,
        s_sigma: est.s_sigma,
        s_q: est.s_q,
        loglike_trace: est.loglike_trace.clone(),
        sigma: est.sigma_hats[0].matrix().into(),
        sigma_true: truth.matrix().into(),
        trace_distance: est.sigma_hats[0].trace_distance(truth),
        q_hat: est.q_hat.rows().to_vec(),
        bounds: bounds[0]
            .iter()
            .zip(&observables)
            .map(|(b, o)| BoundView {
                observable: b.observable.clone(),
                truth: truth.expectation(o),
                estimate: b.point_estimate,
                lower: b.lower,
                upper: b.upper,
                identifiable: b.identifiable,
            })
            .collect(),
    })
}

#[wasm_bindgen]
pub fn two_ion_fit(n_trials: u32, bins: usize, seed: u32, bell_weight: f64) -> String {
    respond(fit_view(n_trials as u64, bins, seed as u64, bell_weight))
}

#[derive(Debug, Serialize)]
pub struct QubitView {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub identifiable: bool,
    pub constraints: usize,
}

/// Range of `Tr(Oρ)`, `O = o₀𝟙 + o·σ⃗`, over all qubit states that agree with
/// the Bloch vector `r` along the measured axes.
pub fn qubit_view(axes: &[[f64; 3]], r: [f64; 3], o: [f64; 4]) -> DemoResult<QubitView> {
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm(r) > 1.0 + 1e-12 {
        return Err("the Bloch vector must have length at most 1".into());
    }
    let [sx, sy, sz] = paulis();
    let along = |v: [f64; 3]| sx.scale(v[0]) + sy.scale(v[1]) + sz.scale(v[2]);
    let mut ops: Vec<CMatrix> = Vec::new();
    for &a in axes {
        let n = norm(a);
        if n < 1e-9 {
            return Err("measurement axes must be nonzero".into());
        }
        let unit = along([a[0] / n, a[1] / n, a[2] / n]);
        ops.push((identity(2) + &unit).scale(0.5));
        ops.push((identity(2) - &unit).scale(0.5));
    }
    if ops.is_empty() {
        ops.push(identity(2));
    }
    let sigma = DensityMatrix::new(qubit_state(r)).map_err(err)?;
    let observable = Observable::new("O", identity(2).scale(o[0]) + along([o[1], o[2], o[3]])).map_err(err)?;
    let basis = ConstraintBasis::reduce(&ops, &ops).map_err(err)?;
    let b = solve_bounds(&observable, &sigma, &basis).map_err(err)?;
    Ok(QubitView { value: b.point_estimate, lower: b.lower, upper: b.upper, identifiable: b.identifiable, constraints: basis.retained_count() })
}

/// `axes` is a JSON list of `[x, y, z]` measurement directions.
#[wasm_bindgen]
pub fn qubit_bounds(axes: &str, rx: f64, ry: f64, rz: f64, o0: f64, ox: f64, oy: f64, oz: f64) -> String {
    let parsed: DemoResult<Vec<[f64; 3]>> = serde_json::from_str(axes).map_err(|e| format!("axes: {e}"));
    respond(parsed.and_then(|a| qubit_view(&a, [rx, ry, rz], [o0, ox, oy, oz])))
}
