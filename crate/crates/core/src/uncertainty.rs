//! Parametric bootstrap over the whole estimation pipeline, bootstrap
//! confidence intervals, and the likelihood-ratio goodness-of-fit test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bounds::{build_constraint_basis, solve_bounds, ObservableBounds};
use crate::error::{Error, Result};
use crate::estimator::{fit, likelihood_frequency, log_likelihood, Estimate, SolverOptions, Tally};
use crate::iontrap::{sample_histograms, ExperimentDesign, HistogramSet};
use crate::qcore::Observable;
use crate::rng::{self, tags};

/// Fewer samples than this are rejected by the interval constructors.
pub const MIN_CI_SAMPLES: usize = 20;
/// A run with more than this fraction of failed resamples is unreliable.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;
/// Slack on the nonpositivity of likelihood-ratio statistics.
pub const LAMBDA_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapOptions {
    pub resamples: usize,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    pub level: f64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self { resamples: 200, workers: 0, level: 0.95 }
    }
}

/// Draws a synthetic copy of the data from the fitted model, with the same
/// number of trials per experiment as `totals`, directly in the (binned)
/// outcome space of `estimate`.
pub fn resample(estimate: &Estimate, design: &ExperimentDesign, totals: &[Vec<u64>], seed: u64) -> Result<HistogramSet> {
    sample_histograms(design, &estimate.taus(design), &estimate.q_hat, totals, seed, tags::BOOTSTRAP)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleRecord {
    pub index: usize,
    pub seed: u64,
    pub estimate: Option<Estimate>,
    /// `[state][observable]`.
    pub bounds: Vec<Vec<ObservableBounds>>,
    /// `𝓛(σ̂*, Q̂* | H*) − 𝓛_frq(H*)`.
    pub lambda: Option<f64>,
    /// Why the record is excluded from the quantiles, if it is.
    pub failure: Option<String>,
}

impl ResampleRecord {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRun {
    pub t: usize,
    pub master_seed: u64,
    pub records: Vec<ResampleRecord>,
}

impl BootstrapRun {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.ok()).count()
    }

    pub fn unreliable(&self) -> bool {
        self.failures() as f64 > MAX_FAILURE_FRACTION * self.t as f64
    }

    /// Sample of one bound over the successful resamples.
    pub fn bound_samples(&self, state: usize, observable: usize, upper: bool) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.ok())
            .map(|r| {
                let b = &r.bounds[state][observable];
                if upper {
                    b.upper
                } else {
                    b.lower
                }
            })
            .collect()
    }

    pub fn lambda_samples(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.ok()).filter_map(|r| r.lambda).collect()
    }
}

/// SDP bounds of every observable on every fitted state.
pub fn bounds_for_estimate(
    estimate: &Estimate,
    design: &ExperimentDesign,
    observables: &[Observable],
) -> Result<Vec<Vec<ObservableBounds>>> {
    let basis = build_constraint_basis(&estimate.q_hat, design)?;
    estimate
        .sigma_hats
        .iter()
        .map(|s| observables.iter().map(|o| solve_bounds(o, s, &basis)).collect())
        .collect()
}

fn one_resample(
    estimate: &Estimate,
    design: &ExperimentDesign,
    totals: &[Vec<u64>],
    observables: &[Observable],
    solver: &SolverOptions,
    master_seed: u64,
    index: usize,
) -> ResampleRecord {
    let seed = rng::substream_seed(master_seed, &[tags::BOOTSTRAP, index as u64]);
    let mut record = ResampleRecord { index, seed, estimate: None, bounds: Vec::new(), lambda: None, failure: None };
    let outcome = (|| -> Result<()> {
        let h = Tally::from(&resample(estimate, design, totals, seed)?);
        let est = fit(&h, design, solver)?;
        record.lambda = Some(est.loglike - likelihood_frequency(&h));
        record.bounds = bounds_for_estimate(&est, design, observables)?;
        let converged = est.converged;
        record.estimate = Some(est);
        if !converged {
            record.failure = Some("fit did not reach its stopping thresholds".into());
        } else if record.bounds.iter().flatten().any(|b| !b.valid) {
            record.failure = Some("bound solver did not converge".into());
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        record.failure = Some(e.to_string());
    }
    record
}

/// Refits `t` synthetic data sets drawn from `estimate`. Resample `r` is
/// seeded from `(master_seed, r)` alone, so the records do not depend on the
/// number of workers.
pub fn bootstrap_run(
    estimate: &Estimate,
    design: &ExperimentDesign,
    totals: &[Vec<u64>],
    observables: &[Observable],
    solver: &SolverOptions,
    opts: &BootstrapOptions,
    master_seed: u64,
) -> Result<BootstrapRun> {
    if opts.resamples < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: opts.resamples });
    }
    let job = |r: usize| one_resample(estimate, design, totals, observables, solver, master_seed, r);
    let records = run_jobs(opts.resamples, opts.workers, job)?;
    Ok(BootstrapRun { t: opts.resamples, master_seed, records })
}

#[cfg(feature = "parallel")]
fn run_jobs<F>(t: usize, workers: usize, job: F) -> Result<Vec<ResampleRecord>>
where
    F: Fn(usize) -> ResampleRecord + Sync + Send,
{
    use rayon::prelude::*;
    if workers == 1 {
        return Ok((0..t).map(job).collect());
    }
    if workers == 0 {
        return Ok((0..t).into_par_iter().map(job).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Solver(format!("worker pool: {e}")))?;
    Ok(pool.install(|| (0..t).into_par_iter().map(&job).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_jobs<F>(t: usize, _workers: usize, job: F) -> Result<Vec<ResampleRecord>>
where
    F: Fn(usize) -> ResampleRecord,
{
    Ok((0..t).map(job).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Basic,
    BiasCorrected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub method: CiMethod,
    pub lower: f64,
    pub upper: f64,
    /// Set when the bias correction was infinite and the sample range was
    /// returned instead.
    pub degenerate: bool,
}

/// Empirical `p`-quantile: linear interpolation between order statistics at
/// 1-based position `p(t−1) + 1`. `sorted` must be ascending and nonempty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let t = sorted.len();
    let h = p.clamp(0.0, 1.0) * (t - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(t - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn sorted_samples(samples: &[f64], level: f64) -> Result<Vec<f64>> {
    if samples.len() < MIN_CI_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_CI_SAMPLES, got: samples.len() });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence level {level} outside (0, 1)")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `[2θ̂ − q_{1−α/2}, 2θ̂ − q_{α/2}]` with `α = 1 − level`.
pub fn ci_basic(theta_hat: f64, samples: &[f64], level: f64) -> Result<ConfidenceInterval> {
    let s = sorted_samples(samples, level)?;
    let alpha = 1.0 - level;
    Ok(ConfidenceInterval {
        level,
        method: CiMethod::Basic,
        lower: 2.0 * theta_hat - quantile(&s, 1.0 - alpha / 2.0),
        upper: 2.0 * theta_hat - quantile(&s, alpha / 2.0),
        degenerate: false,
    })
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid parameters")
}

/// Bias-corrected percentile interval with `z₀ = Φ⁻¹(#{θ* < θ̂}/t)`.
pub fn ci_bias_corrected(theta_hat: f64, samples: &[f64], level: f64) -> Result<ConfidenceInterval> {
    let s = sorted_samples(samples, level)?;
    let below = s.iter().filter(|&&x| x < theta_hat).count();
    if below == 0 || below == s.len() {
        return Ok(ConfidenceInterval {
            level,
            method: CiMethod::BiasCorrected,
            lower: s[0],
            upper: s[s.len() - 1],
            degenerate: true,
        });
    }
    let phi = standard_normal();
    let z0 = phi.inverse_cdf(below as f64 / s.len() as f64);
    let alpha = 1.0 - level;
    let lo_level = phi.cdf(2.0 * z0 + phi.inverse_cdf(alpha / 2.0));
    let hi_level = phi.cdf(2.0 * z0 + phi.inverse_cdf(1.0 - alpha / 2.0));
    Ok(ConfidenceInterval {
        level,
        method: CiMethod::BiasCorrected,
        lower: quantile(&s, lo_level),
        upper: quantile(&s, hi_level),
        degenerate: false,
    })
}

pub fn confidence_interval(method: CiMethod, theta_hat: f64, samples: &[f64], level: f64) -> Result<ConfidenceInterval> {
    match method {
        CiMethod::Basic => ci_basic(theta_hat, samples, level),
        CiMethod::BiasCorrected => ci_bias_corrected(theta_hat, samples, level),
    }
}

/// Interval for a set-identified quantity: the one-sided lower limit of the
/// lower bound and the one-sided upper limit of the upper bound, each at
/// `(1 + level)/2` confidence, so the pair is labelled with `level`.
pub fn combine_one_sided(
    lower_samples: &[f64],
    upper_samples: &[f64],
    lower_hat: f64,
    upper_hat: f64,
    method: CiMethod,
    level: f64,
) -> Result<ConfidenceInterval> {
    let lo = confidence_interval(method, lower_hat, lower_samples, level)?;
    let hi = confidence_interval(method, upper_hat, upper_samples, level)?;
    Ok(ConfidenceInterval {
        level,
        method,
        lower: lo.lower.min(hi.upper),
        upper: hi.upper.max(lo.lower),
        degenerate: lo.degenerate || hi.degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodRatioReport {
    pub lambda0: f64,
    pub lambda_samples: Vec<f64>,
    /// Fraction of bootstrap statistics at or below `lambda0`; ties count.
    pub p_value: f64,
    pub ties: usize,
}

/// `Λ₀ = 𝓛(σ̂, Q̂ | H) − 𝓛_frq(H)` and its position in the bootstrap
/// distribution.
pub fn lr_test(estimate: &Estimate, design: &ExperimentDesign, h: &Tally, run: &BootstrapRun) -> Result<LikelihoodRatioReport> {
    let lambda0 = log_likelihood(h, design, &estimate.sigma_hats, &estimate.q_hat) - likelihood_frequency(h);
    let lambda_samples = run.lambda_samples();
    if lambda_samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let at_or_below = lambda_samples.iter().filter(|&&l| l <= lambda0).count();
    let ties = lambda_samples.iter().filter(|&&l| l == lambda0).count();
    Ok(LikelihoodRatioReport {
        lambda0,
        p_value: at_or_below as f64 / lambda_samples.len() as f64,
        lambda_samples,
        ties,
    })
}

/// Point bounds with both interval kinds, for one `(state, observable)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub state: usize,
    pub observable: String,
    pub point_estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub identifiable: bool,
    pub basic: Option<ConfidenceInterval>,
    pub bias_corrected: Option<ConfidenceInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub t: usize,
    pub master_seed: u64,
    pub failures: usize,
    pub unreliable: bool,
    pub level: f64,
    pub intervals: Vec<IntervalSummary>,
    pub likelihood_ratio: Option<LikelihoodRatioReport>,
}

/// Aggregates a run against the point bounds of the original fit. Interval
/// construction errors (too few successful resamples) leave the interval
/// empty rather than failing the summary.
pub fn summarize(
    run: &BootstrapRun,
    point_bounds: &[Vec<ObservableBounds>],
    lr: Option<LikelihoodRatioReport>,
    level: f64,
) -> BootstrapSummary {
    let mut intervals = Vec::new();
    for (j, row) in point_bounds.iter().enumerate() {
        for (o, b) in row.iter().enumerate() {
            let lo = run.bound_samples(j, o, false);
            let hi = run.bound_samples(j, o, true);
            let ci = |m| combine_one_sided(&lo, &hi, b.lower, b.upper, m, level).ok();
            intervals.push(IntervalSummary {
                state: j,
                observable: b.observable.clone(),
                point_estimate: b.point_estimate,
                lower: b.lower,
                upper: b.upper,
                identifiable: b.identifiable,
                basic: ci(CiMethod::Basic),
                bias_corrected: ci(CiMethod::BiasCorrected),
            });
        }
    }
    BootstrapSummary {
        t: run.t,
        master_seed: run.master_seed,
        failures: run.failures(),
        unreliable: run.unreliable(),
        level,
        intervals,
        likelihood_ratio: lr,
    }
}
