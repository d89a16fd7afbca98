//! Result tables (Markdown and CSV) and plot-data CSVs.

use std::fmt::Write as _;

use qdt_core::bounds::ObservableBounds;
use qdt_core::estimator::Estimate;
use qdt_core::iontrap::{outcome_probabilities, ExperimentConfig, ExperimentDesign, HistogramSet};
use qdt_core::qcore::Observable;
use qdt_core::uncertainty::{BootstrapRun, BootstrapSummary, ConfidenceInterval};

/// One cell of the table: a single value or an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(f64),
    Interval(f64, f64),
    Missing,
}

impl Cell {
    fn bounds(self) -> (Option<f64>, Option<f64>) {
        match self {
            Cell::Value(v) => (Some(v), Some(v)),
            Cell::Interval(a, b) => (Some(a), Some(b)),
            Cell::Missing => (None, None),
        }
    }

    fn markdown(self) -> String {
        match self {
            Cell::Value(v) => format!("{v:.4}"),
            Cell::Interval(a, b) => format!("({a:.4}, {b:.4})"),
            Cell::Missing => "–".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// `(state, observable label)` per column.
    pub columns: Vec<(usize, String)>,
    /// `(row label, cells)`; rows follow the order True, M.L., SDPs, Basic
    /// C.I., Bias corrected C.I.
    pub rows: Vec<(String, Vec<Cell>)>,
    pub lambda0: Option<f64>,
    pub p_value: Option<f64>,
    pub ties: Option<usize>,
    pub failures: usize,
    pub unreliable: bool,
    pub t: usize,
}

fn ci_cell(ci: &Option<ConfidenceInterval>) -> Cell {
    ci.as_ref().map_or(Cell::Missing, |c| Cell::Interval(c.lower, c.upper))
}

pub fn build_table(
    experiment: &ExperimentConfig,
    observables: &[Observable],
    point_bounds: &[Vec<ObservableBounds>],
    summary: &BootstrapSummary,
) -> ResultTable {
    let mut columns = Vec::new();
    let mut truth = Vec::new();
    let mut ml = Vec::new();
    let mut sdp = Vec::new();
    let mut basic = Vec::new();
    let mut bc = Vec::new();
    for (j, row) in point_bounds.iter().enumerate() {
        for (o, b) in row.iter().enumerate() {
            columns.push((j, b.observable.clone()));
            truth.push(
                experiment
                    .true_sigma_list
                    .get(j)
                    .zip(observables.get(o))
                    .filter(|(s, obs)| s.dim() == obs.dim())
                    .map_or(Cell::Missing, |(s, obs)| Cell::Value(s.expectation(obs))),
            );
            ml.push(Cell::Value(b.point_estimate));
            sdp.push(Cell::Interval(b.lower, b.upper));
            let iv = summary.intervals.iter().find(|iv| iv.state == j && iv.observable == b.observable);
            basic.push(iv.map_or(Cell::Missing, |iv| ci_cell(&iv.basic)));
            bc.push(iv.map_or(Cell::Missing, |iv| ci_cell(&iv.bias_corrected)));
        }
    }
    let mut rows = Vec::new();
    if truth.iter().any(|c| *c != Cell::Missing) {
        rows.push(("True".to_string(), truth));
    }
    rows.push(("M.L.".to_string(), ml));
    rows.push(("SDPs".to_string(), sdp));
    rows.push(("Basic C.I.".to_string(), basic));
    rows.push(("Bias corrected C.I.".to_string(), bc));
    let lr = summary.likelihood_ratio.as_ref();
    ResultTable {
        columns,
        rows,
        lambda0: lr.map(|l| l.lambda0),
        p_value: lr.map(|l| l.p_value),
        ties: lr.map(|l| l.ties),
        failures: summary.failures,
        unreliable: summary.unreliable,
        t: summary.t,
    }
}

impl ResultTable {
    pub fn markdown(&self) -> String {
        let mut s = String::from("| |");
        for (j, label) in &self.columns {
            let _ = write!(s, " {label} (state {}) |", j + 1);
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(self.columns.len()));
        s.push('\n');
        for (label, cells) in &self.rows {
            let _ = write!(s, "| {label} |");
            for c in cells {
                let _ = write!(s, " {} |", c.markdown());
            }
            s.push('\n');
        }
        s.push('\n');
        if let (Some(l), Some(p)) = (self.lambda0, self.p_value) {
            let _ = writeln!(s, "Λ₀ = {l:.4}, p = {p:.3} ({} ties, counted as ≤)", self.ties.unwrap_or(0));
        }
        let _ = writeln!(s, "{} resamples, {} failed{}", self.t, self.failures, if self.unreliable { " — UNRELIABLE" } else { "" });
        s
    }

    pub fn csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["row", "state", "observable", "lower", "upper"]).expect("in-memory write");
        let fmt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        for (label, cells) in &self.rows {
            for ((j, obs), c) in self.columns.iter().zip(cells) {
                let (lo, hi) = c.bounds();
                w.write_record([label.as_str(), &(j + 1).to_string(), obs, &fmt(lo), &fmt(hi)]).expect("in-memory write");
            }
        }
        w.write_record(["lambda0", "", "", &fmt(self.lambda0), &fmt(self.lambda0)]).expect("in-memory write");
        w.write_record(["p_value", "", "", &fmt(self.p_value), &fmt(self.p_value)]).expect("in-memory write");
        w.into_inner().expect("in-memory flush")
    }
}

/// Observed counts next to the counts the fit predicts.
pub fn histogram_overlay(binned: &HistogramSet, estimate: &Estimate, design: &ExperimentDesign) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["family", "setting", "bin", "observed", "expected"]).expect("in-memory write");
    for (j, tau) in estimate.taus(design).iter().enumerate() {
        let p = outcome_probabilities(&design.populations(tau), &estimate.q_hat);
        for (i, row) in binned.family(j).iter().enumerate() {
            let total = binned.total(j, i) as f64;
            for (c, &n) in row.iter().enumerate() {
                w.write_record([j.to_string(), i.to_string(), c.to_string(), n.to_string(), (total * p[i][c]).to_string()])
                    .expect("in-memory write");
            }
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn loglike_trace(estimate: &Estimate) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "loglike"]).expect("in-memory write");
    for (k, l) in estimate.loglike_trace.iter().enumerate() {
        w.write_record([k.to_string(), l.to_string()]).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn mi_trace(trace: &[f64]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bins", "mutual_information_bits"]).expect("in-memory write");
    for (g, mi) in trace.iter().enumerate() {
        w.write_record([(g + 1).to_string(), mi.to_string()]).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// One line per resample: Λ* and every bound.
pub fn bootstrap_distribution(run: &BootstrapRun, point_bounds: &[Vec<ObservableBounds>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string(), "ok".to_string(), "lambda".to_string()];
    for (j, row) in point_bounds.iter().enumerate() {
        for b in row {
            header.push(format!("{}_{}_lower", b.observable, j + 1));
            header.push(format!("{}_{}_upper", b.observable, j + 1));
        }
    }
    w.write_record(&header).expect("in-memory write");
    for r in &run.records {
        let mut line = vec![r.index.to_string(), r.ok().to_string(), r.lambda.map_or(String::new(), |l| l.to_string())];
        for row in &r.bounds {
            for b in row {
                line.push(b.lower.to_string());
                line.push(b.upper.to_string());
            }
        }
        line.resize(header.len(), String::new());
        w.write_record(&line).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}
