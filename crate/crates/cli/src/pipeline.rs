//! The study pipeline without any file handling: simulate, coarse-grain,
//! fit, bound, bootstrap.

use serde::{Deserialize, Serialize};

use qdt_core::binning::{coarse_grain, CoarseGraining};
use qdt_core::bounds::ObservableBounds;
use qdt_core::estimator::{fit, Estimate, SolverOptions, Tally};
use qdt_core::iontrap::{sample_experiments, ExperimentDesign, HistogramSet};
use qdt_core::qcore::Observable;
use qdt_core::uncertainty::{bootstrap_run, bounds_for_estimate, lr_test, summarize, BootstrapOptions, BootstrapRun, BootstrapSummary};

use crate::config::{resolve_observable, StudyConfig};
use crate::error::Result;

/// Everything the fit stage needs besides the data; written next to the
/// estimate so that later stages refit resamples the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub bins: usize,
    pub training_fraction: f64,
    pub split_seed: u64,
    pub solver: SolverOptions,
}

impl FitOptions {
    pub fn from_config(cfg: &StudyConfig) -> Self {
        Self {
            bins: cfg.analysis.bins,
            training_fraction: cfg.analysis.training_fraction,
            split_seed: cfg.seed(),
            solver: cfg.solver.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitStage {
    pub coarse: CoarseGraining,
    pub estimate: Estimate,
}

pub fn simulate(cfg: &StudyConfig) -> Result<HistogramSet> {
    Ok(sample_experiments(&cfg.experiment)?)
}

pub fn fit_stage(raw: &HistogramSet, design: &ExperimentDesign, opts: &FitOptions) -> Result<FitStage> {
    let coarse = coarse_grain(raw, design, opts.bins, opts.training_fraction, opts.split_seed)?;
    let estimate = fit(&Tally::from(&coarse.binned), design, &opts.solver)?;
    Ok(FitStage { coarse, estimate })
}

pub fn resolve_observables(names: &[String]) -> Result<Vec<Observable>> {
    names.iter().map(|n| resolve_observable(n, None)).collect()
}

pub fn bounds_stage(estimate: &Estimate, design: &ExperimentDesign, observables: &[Observable]) -> Result<Vec<Vec<ObservableBounds>>> {
    Ok(bounds_for_estimate(estimate, design, observables)?)
}

#[allow(clippy::too_many_arguments)]
pub fn bootstrap_stage(
    estimate: &Estimate,
    design: &ExperimentDesign,
    binned: &HistogramSet,
    observables: &[Observable],
    point_bounds: &[Vec<ObservableBounds>],
    solver: &SolverOptions,
    opts: &BootstrapOptions,
    seed: u64,
) -> Result<(BootstrapRun, BootstrapSummary)> {
    let run = bootstrap_run(estimate, design, &binned.totals(), observables, solver, opts, seed)?;
    let lr = lr_test(estimate, design, &Tally::from(binned), &run)?;
    let summary = summarize(&run, point_bounds, Some(lr), opts.level);
    Ok((run, summary))
}

#[derive(Debug, Clone)]
pub struct Study {
    pub raw: HistogramSet,
    pub fit: FitStage,
    pub observables: Vec<Observable>,
    pub bounds: Vec<Vec<ObservableBounds>>,
    pub run: BootstrapRun,
    pub summary: BootstrapSummary,
}

/// The whole study in memory, as `qdt run` does it on disk.
pub fn run_study(cfg: &StudyConfig) -> Result<Study> {
    let design = cfg.experiment.design();
    let raw = simulate(cfg)?;
    let fit = fit_stage(&raw, &design, &FitOptions::from_config(cfg))?;
    let observables = resolve_observables(&cfg.analysis.observables)?;
    let bounds = bounds_stage(&fit.estimate, &design, &observables)?;
    let (run, summary) = bootstrap_stage(
        &fit.estimate,
        &design,
        &fit.coarse.binned,
        &observables,
        &bounds,
        &cfg.solver,
        &cfg.analysis.bootstrap,
        cfg.seed(),
    )?;
    Ok(Study { raw, fit, observables, bounds, run, summary })
}
