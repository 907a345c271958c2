//! Human tables, CSV and JSON emission.

use adjseq_core::inference::InferenceReport;
use adjseq_core::sim::SimulationSummary;
use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::commands::{BoundsReport, CorrelationReport, WeightTable};

/// Machine output wrapper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_digest: String,
    pub mvn_seed: u64,
    pub result: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(command: &str, config_digest: &str, mvn_seed: u64, result: T) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_digest: config_digest.to_string(),
            mvn_seed,
            result,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn p4(x: f64) -> String {
    format!("{x:.4}")
}

/// Left-aligned first column, right-aligned rest.
fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = vec![0; cols];
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |r: &[String]| {
        let mut s = String::new();
        for (i, c) in r.iter().enumerate() {
            let pad = width[i] - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

fn csv(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn opt(x: Option<f64>, f: impl Fn(f64) -> String, none: &str) -> String {
    x.map_or_else(|| none.to_string(), f)
}

pub fn weights_table(t: &WeightTable) -> String {
    let header: Vec<String> = std::iter::once("Intersection".to_string())
        .chain(t.hypotheses.iter().cloned())
        .collect();
    let rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| {
            std::iter::once(r.name.clone())
                .chain(r.weights.iter().map(|w| opt(*w, p4, "-")))
                .collect()
        })
        .collect();
    table(&header, &rows)
}

pub fn weights_csv(t: &WeightTable) -> Result<String> {
    let header: Vec<String> = std::iter::once("intersection".to_string())
        .chain(t.hypotheses.iter().cloned())
        .collect();
    let rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| {
            std::iter::once(r.name.clone())
                .chain(r.weights.iter().map(|w| opt(*w, |x| x.to_string(), "")))
                .collect()
        })
        .collect();
    csv(&header, &rows)
}

fn corr_rows(c: &CorrelationReport, f: impl Fn(f64) -> String) -> (Vec<String>, Vec<Vec<String>>) {
    let header = std::iter::once(String::new())
        .chain(c.statistics.iter().cloned())
        .collect();
    let rows = c
        .statistics
        .iter()
        .zip(&c.matrix)
        .map(|(name, row)| {
            std::iter::once(name.clone())
                .chain(row.iter().map(|&x| f(x)))
                .collect()
        })
        .collect();
    (header, rows)
}

pub fn corr_table(c: &CorrelationReport) -> String {
    let (header, rows) = corr_rows(c, |x| format!("{x:.2}"));
    table(&header, &rows)
}

pub fn corr_csv(c: &CorrelationReport) -> Result<String> {
    let (mut header, rows) = corr_rows(c, |x| x.to_string());
    header[0] = "statistic".into();
    csv(&header, &rows)
}

fn bound_rows(
    b: &BoundsReport,
    f: impl Fn(f64) -> String,
    none: &str,
) -> (Vec<String>, Vec<Vec<String>>) {
    let k = b.rows.first().map_or(0, |r| r.bounds.len());
    let mut header = strings(&["intersection", "hypothesis", "weight"]);
    header.extend((1..=k).map(|a| format!("z{a}")));
    header.extend((1..=k).map(|a| format!("p{a}")));
    let rows = b
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.name.clone(), r.hypothesis.clone(), f(r.weight)];
            row.extend(r.bounds.iter().map(|z| opt(*z, &f, none)));
            row.extend(r.nominal.iter().map(|&p| f(p)));
            row
        })
        .collect();
    (header, rows)
}

pub fn bounds_table(b: &BoundsReport) -> String {
    let (header, rows) = bound_rows(b, p4, "inf");
    format!(
        "{} bounds at level {}\n{}max integration error {:.1e}\n",
        b.method,
        b.level,
        table(&header, &rows),
        b.max_error
    )
}

pub fn bounds_csv(b: &BoundsReport) -> Result<String> {
    let (header, rows) = bound_rows(b, |x| x.to_string(), "inf");
    csv(&header, &rows)
}

pub fn analyze_table(reports: &[InferenceReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&format!(
            "Analysis {} ({}, alpha = {})\n",
            r.analysis, r.method, r.alpha
        ));
        let rows: Vec<Vec<String>> = r
            .intersections
            .iter()
            .map(|i| vec![i.name.clone(), p4(i.sequential_p)])
            .collect();
        out.push_str(&table(&strings(&["Intersection", "Sequential p"]), &rows));
        out.push('\n');
        let rows: Vec<Vec<String>> = r
            .hypotheses
            .iter()
            .map(|h| {
                let status = if r.rejected_earlier.contains(&h.index) {
                    "yes (earlier)"
                } else if h.rejected {
                    "yes"
                } else {
                    "no"
                };
                vec![
                    h.label.clone(),
                    p4(h.sequential_p),
                    p4(h.adjusted_p),
                    p4(h.repeated_p),
                    status.to_string(),
                ]
            })
            .collect();
        out.push_str(&table(
            &strings(&[
                "Hypothesis",
                "Sequential p",
                "Adjusted p",
                "Repeated p",
                "Rejected",
            ]),
            &rows,
        ));
        out.push_str(&format!(
            "integrations {}, max error {:.1e}\n\n",
            r.diagnostics.evaluations, r.diagnostics.max_error
        ));
    }
    out
}

pub fn analyze_csv(reports: &[InferenceReport]) -> Result<String> {
    let header = strings(&[
        "analysis",
        "kind",
        "name",
        "sequential_p",
        "adjusted_p",
        "repeated_p",
        "rejected",
    ]);
    let mut rows = Vec::new();
    for r in reports {
        for i in &r.intersections {
            rows.push(vec![
                r.analysis.to_string(),
                "intersection".into(),
                i.name.clone(),
                i.sequential_p.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
        for h in &r.hypotheses {
            rows.push(vec![
                r.analysis.to_string(),
                "hypothesis".into(),
                h.label.clone(),
                h.sequential_p.to_string(),
                h.adjusted_p.to_string(),
                h.repeated_p.to_string(),
                (h.rejected || r.rejected_earlier.contains(&h.index)).to_string(),
            ]);
        }
    }
    csv(&header, &rows)
}

fn sim_rows(
    s: &SimulationSummary,
    labels: &[String],
    f: impl Fn(f64) -> String,
) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    if let Some(e) = s.fwer {
        rows.push(vec!["FWER".into(), f(e.value), f(e.standard_error)]);
    }
    for (label, e) in labels.iter().zip(&s.rejection_rates) {
        rows.push(vec![
            format!("reject {label}"),
            f(e.value),
            f(e.standard_error),
        ]);
    }
    rows
}

pub fn simulate_table(s: &SimulationSummary, labels: &[String]) -> String {
    format!(
        "{} at alpha = {}, {} replications, seed {}\n{}",
        s.method,
        s.alpha,
        s.n_reps,
        s.seed,
        table(
            &strings(&["Quantity", "Estimate", "SE"]),
            &sim_rows(s, labels, p4)
        )
    )
}

pub fn simulate_csv(s: &SimulationSummary, labels: &[String]) -> Result<String> {
    let mut rows = sim_rows(s, labels, |x| x.to_string());
    for r in &mut rows {
        r.extend([
            s.n_reps.to_string(),
            s.seed.to_string(),
            s.method.to_string(),
        ]);
    }
    csv(
        &strings(&["quantity", "estimate", "se", "reps", "seed", "method"]),
        &rows,
    )
}
