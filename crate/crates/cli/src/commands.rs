//! The `qdt` subcommands. Each one reads its inputs through the manifest,
//! writes its outputs, and records them.

use std::path::Path;

use qdt_core::binning::BinRule;
use qdt_core::bounds::ObservableBounds;
use qdt_core::estimator::Estimate;
use qdt_core::iontrap::HistogramSet;
use qdt_core::qcore::Observable;
use qdt_core::uncertainty::{BootstrapRun, BootstrapSummary, ResampleRecord};

use crate::config::{resolve_observable, StudyConfig};
use crate::error::{CliError, Result};
use crate::manifest::{RunManifest, StageWriter};
use crate::pipeline::{bootstrap_stage, bounds_stage, fit_stage, simulate, FitOptions};
use crate::report;

pub mod paths {
    pub const CONFIG: &str = "config.json";
    pub const RAW: &str = "simulate/histograms.json";
    pub const BIN_RULE: &str = "fit/bin_rule.json";
    pub const MI_TRACE: &str = "fit/mi_trace.csv";
    pub const TRAINING: &str = "fit/training.json";
    pub const BINNED: &str = "fit/binned.json";
    pub const FIT_OPTIONS: &str = "fit/options.json";
    pub const ESTIMATE: &str = "fit/estimate.json";
    pub const LOGLIKE: &str = "fit/loglike_trace.csv";
    pub const OBSERVABLES: &str = "bounds/observables.json";
    pub const BOUNDS: &str = "bounds/bounds.json";
    pub const RECORDS: &str = "bootstrap/records.jsonl";
    pub const SUMMARY: &str = "bootstrap/summary.json";
    pub const TABLE_MD: &str = "report/report.md";
    pub const TABLE_CSV: &str = "report/report.csv";
    pub const PLOT_HISTOGRAMS: &str = "report/plot_histograms.csv";
    pub const PLOT_LOGLIKE: &str = "report/plot_loglike.csv";
    pub const PLOT_MI: &str = "report/plot_mi.csv";
    pub const PLOT_BOOTSTRAP: &str = "report/plot_bootstrap.csv";
}

fn load_config(m: &RunManifest, run_dir: &Path) -> Result<StudyConfig> {
    let bytes = m.read_verified(run_dir, "simulate", paths::CONFIG)?;
    StudyConfig::from_json(std::str::from_utf8(&bytes).map_err(|e| CliError::Integrity(e.to_string()))?)
}

/// Writes the resolved config (with any seed override) and the raw
/// histograms, and starts a fresh manifest.
pub fn cmd_simulate(config_path: &Path, run_dir: &Path, seed: Option<u64>) -> Result<()> {
    let (mut cfg, text) = StudyConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    let raw = simulate(&cfg)?;
    let mut manifest = RunManifest::new(config_path, &text, cfg.seed());
    let mut w = StageWriter::new(run_dir);
    w.bytes(paths::CONFIG, cfg.to_json().as_bytes())?;
    w.json(paths::RAW, &raw)?;
    for j in 0..raw.n_families() {
        let name = if j == 0 { "simulate/reference.csv".to_string() } else { format!("simulate/probing_{j}.csv") };
        w.bytes(&name, raw.family_csv(j).as_bytes())?;
    }
    manifest.record("simulate", w.finish(), Some(cfg.seed()));
    manifest.save(run_dir)
}

#[derive(Debug, Clone, Default)]
pub struct FitOverrides {
    pub bins: Option<usize>,
    pub t_sigma: Option<f64>,
    pub t_q: Option<f64>,
}

pub fn cmd_fit(run_dir: &Path, overrides: &FitOverrides) -> Result<()> {
    let mut manifest = RunManifest::load(run_dir)?;
    let cfg = load_config(&manifest, run_dir)?;
    let raw: HistogramSet = manifest.read_json(run_dir, "simulate", paths::RAW)?;
    let mut opts = FitOptions::from_config(&cfg);
    if let Some(g) = overrides.bins {
        if g == 0 || g > raw.n_outcomes() {
            return Err(CliError::Config(format!("--bins {g} must be in 1..={}", raw.n_outcomes())));
        }
        opts.bins = g;
    }
    if let Some(t) = overrides.t_sigma {
        opts.solver.t_sigma = t;
    }
    if let Some(t) = overrides.t_q {
        opts.solver.t_q = t;
    }
    opts.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let design = cfg.experiment.design();
    let stage = fit_stage(&raw, &design, &opts)?;
    let mut w = StageWriter::new(run_dir);
    w.json(paths::FIT_OPTIONS, &opts)?;
    w.json(paths::BIN_RULE, &stage.coarse.rule)?;
    w.bytes(paths::MI_TRACE, &report::mi_trace(&stage.coarse.mi_trace))?;
    w.json(paths::TRAINING, &stage.coarse.training)?;
    w.json(paths::BINNED, &stage.coarse.binned)?;
    w.json(paths::ESTIMATE, &stage.estimate)?;
    w.bytes(paths::LOGLIKE, &report::loglike_trace(&stage.estimate))?;
    manifest.record("fit", w.finish(), Some(opts.split_seed));
    manifest.save(run_dir)?;
    if !stage.estimate.converged {
        eprintln!(
            "warning: fit stopped at the iteration cap (S_sigma = {:.3e}, S_Q = {:.3e})",
            stage.estimate.s_sigma, stage.estimate.s_q
        );
    }
    Ok(())
}

/// `observables` empty means the list from the config.
pub fn cmd_bounds(run_dir: &Path, observables: &[String]) -> Result<()> {
    let mut manifest = RunManifest::load(run_dir)?;
    let cfg = load_config(&manifest, run_dir)?;
    let estimate: Estimate = manifest.read_json(run_dir, "fit", paths::ESTIMATE)?;
    let names = if observables.is_empty() { cfg.analysis.observables.clone() } else { observables.to_vec() };
    let obs: Vec<Observable> = names.iter().map(|n| resolve_observable(n, None)).collect::<Result<_>>()?;
    let d = cfg.experiment.d;
    if let Some(bad) = obs.iter().find(|o| o.dim() != d) {
        return Err(CliError::Config(format!("observable `{}` has dimension {}, the system has {d}", bad.label(), bad.dim())));
    }
    let bounds = bounds_stage(&estimate, &cfg.experiment.design(), &obs)?;
    let mut w = StageWriter::new(run_dir);
    w.json(paths::OBSERVABLES, &obs)?;
    w.json(paths::BOUNDS, &bounds)?;
    manifest.record("bounds", w.finish(), None);
    manifest.save(run_dir)?;
    for b in bounds.iter().flatten().filter(|b| !b.valid) {
        eprintln!("warning: bounds for `{}` did not reach the duality-gap target", b.observable);
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct BootstrapOverrides {
    pub t: Option<usize>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

pub fn cmd_bootstrap(run_dir: &Path, overrides: &BootstrapOverrides) -> Result<()> {
    let mut manifest = RunManifest::load(run_dir)?;
    let cfg = load_config(&manifest, run_dir)?;
    let estimate: Estimate = manifest.read_json(run_dir, "fit", paths::ESTIMATE)?;
    let binned: HistogramSet = manifest.read_json(run_dir, "fit", paths::BINNED)?;
    let fit_opts: FitOptions = manifest.read_json(run_dir, "fit", paths::FIT_OPTIONS)?;
    let obs: Vec<Observable> = manifest.read_json(run_dir, "bounds", paths::OBSERVABLES)?;
    let bounds: Vec<Vec<ObservableBounds>> = manifest.read_json(run_dir, "bounds", paths::BOUNDS)?;
    let mut opts = cfg.analysis.bootstrap.clone();
    if let Some(t) = overrides.t {
        opts.resamples = t;
    }
    if let Some(k) = overrides.workers {
        opts.workers = k;
    }
    let seed = overrides.seed.unwrap_or(cfg.seed());
    let (run, summary) =
        bootstrap_stage(&estimate, &cfg.experiment.design(), &binned, &obs, &bounds, &fit_opts.solver, &opts, seed)?;
    let mut records = String::new();
    for r in &run.records {
        records.push_str(&serde_json::to_string(r).expect("record serializes"));
        records.push('\n');
    }
    let mut w = StageWriter::new(run_dir);
    w.bytes(paths::RECORDS, records.as_bytes())?;
    w.json(paths::SUMMARY, &summary)?;
    manifest.record("bootstrap", w.finish(), Some(seed));
    manifest.save(run_dir)?;
    if summary.unreliable {
        eprintln!("warning: {} of {} resamples failed; intervals are unreliable", summary.failures, summary.t);
    }
    Ok(())
}

fn read_records(manifest: &RunManifest, run_dir: &Path, summary: &BootstrapSummary) -> Result<BootstrapRun> {
    let bytes = manifest.read_verified(run_dir, "bootstrap", paths::RECORDS)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Integrity(e.to_string()))?;
    let records = text
        .lines()
        .enumerate()
        .map(|(k, line)| {
            serde_json::from_str::<ResampleRecord>(line)
                .map_err(|e| CliError::Integrity(format!("{} line {}: {e}", paths::RECORDS, k + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapRun { t: summary.t, master_seed: summary.master_seed, records })
}

pub fn cmd_report(run_dir: &Path) -> Result<()> {
    let mut manifest = RunManifest::load(run_dir)?;
    let cfg = load_config(&manifest, run_dir)?;
    let estimate: Estimate = manifest.read_json(run_dir, "fit", paths::ESTIMATE)?;
    let binned: HistogramSet = manifest.read_json(run_dir, "fit", paths::BINNED)?;
    let rule: BinRule = manifest.read_json(run_dir, "fit", paths::BIN_RULE)?;
    let mi = manifest.read_verified(run_dir, "fit", paths::MI_TRACE)?;
    let obs: Vec<Observable> = manifest.read_json(run_dir, "bounds", paths::OBSERVABLES)?;
    let bounds: Vec<Vec<ObservableBounds>> = manifest.read_json(run_dir, "bounds", paths::BOUNDS)?;
    let summary: BootstrapSummary = manifest.read_json(run_dir, "bootstrap", paths::SUMMARY)?;
    let run = read_records(&manifest, run_dir, &summary)?;

    let table = report::build_table(&cfg.experiment, &obs, &bounds, &summary);
    let mut md = String::from("# Two-stage tomography report\n\n");
    md.push_str(&table.markdown());
    md.push_str(&format!(
        "\nBins: {} (edges {:?}); fit: {} outer iterations, converged = {}, S_sigma = {:.3e}, S_Q = {:.3e}\n",
        rule.n_bins(),
        rule.edges(),
        estimate.iterations,
        estimate.converged,
        estimate.s_sigma,
        estimate.s_q
    ));
    let design = cfg.experiment.design();
    let mut w = StageWriter::new(run_dir);
    w.bytes(paths::TABLE_MD, md.as_bytes())?;
    w.bytes(paths::TABLE_CSV, &table.csv())?;
    w.bytes(paths::PLOT_HISTOGRAMS, &report::histogram_overlay(&binned, &estimate, &design))?;
    w.bytes(paths::PLOT_LOGLIKE, &report::loglike_trace(&estimate))?;
    w.bytes(paths::PLOT_MI, &mi)?;
    w.bytes(paths::PLOT_BOOTSTRAP, &report::bootstrap_distribution(&run, &bounds))?;
    manifest.record("report", w.finish(), None);
    manifest.save(run_dir)?;
    print!("{md}");
    Ok(())
}

/// Every stage in order.
pub fn cmd_run(config_path: &Path, run_dir: &Path, seed: Option<u64>, bootstrap: &BootstrapOverrides) -> Result<()> {
    cmd_simulate(config_path, run_dir, seed)?;
    cmd_fit(run_dir, &FitOverrides::default())?;
    cmd_bounds(run_dir, &[])?;
    cmd_bootstrap(run_dir, &BootstrapOverrides { seed: None, ..bootstrap.clone() })?;
    cmd_report(run_dir)
}
