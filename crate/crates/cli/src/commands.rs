use adjseq_core::boundary::{bonferroni_bounds, wpgsd_bounds, Method};
use adjseq_core::graph::{enumerate_closure, SubsetIndex};
use adjseq_core::inference::{closed_test_sequence, Design, InferenceReport};
use adjseq_core::sim::{simulate, SimulationPlan, SimulationSummary};
use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Loaded;

pub const DEFAULT_REPS: usize = 100_000;
pub const DEFAULT_SIM_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub subset: SubsetIndex,
    pub name: String,
    /// One entry per hypothesis; `None` outside the subset.
    pub weights: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub hypotheses: Vec<String>,
    pub rows: Vec<WeightRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// `label@analysis` for each statistic, analysis by analysis.
    pub statistics: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    /// `fractions[j][k]`.
    pub fractions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub subset: SubsetIndex,
    pub name: String,
    pub hypothesis: String,
    pub weight: f64,
    /// Critical z values per analysis; `None` where nothing is spent.
    pub bounds: Vec<Option<f64>>,
    pub nominal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub method: Method,
    pub level: f64,
    pub rows: Vec<BoundRow>,
    pub max_error: f64,
}

pub fn subset_name(design: &Design, s: &SubsetIndex) -> String {
    s.labelled(&design.hypotheses).join(",")
}

pub fn weights(loaded: &Loaded) -> Result<WeightTable> {
    let design = &loaded.design;
    let m = design.hypotheses.len();
    let rows = enumerate_closure(&design.hypotheses)?
        .into_iter()
        .map(|s| {
            let w = design.strategy.subset_weights(&s)?;
            let mut full = vec![None; m];
            for (&j, &x) in s.members().iter().zip(&w) {
                full[j] = Some(x);
            }
            Ok(WeightRow {
                name: subset_name(design, &s),
                subset: s,
                weights: full,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightTable {
        hypotheses: design.hypotheses.labels().to_vec(),
        rows,
    })
}

pub fn correlation(loaded: &Loaded) -> Result<CorrelationReport> {
    let design = &loaded.design;
    let ccs = &design.correlation;
    let m = ccs.hypotheses();
    let k = ccs.analyses();
    let statistics = (0..k)
        .flat_map(|a| (0..m).map(move |j| (j, a)))
        .map(|(j, a)| format!("{}@{}", design.hypotheses.label(j), a + 1))
        .collect();
    Ok(CorrelationReport {
        statistics,
        matrix: ccs.matrix().rows(),
        fractions: (0..m)
            .map(|j| design.schedule.fractions(j).to_vec())
            .collect(),
    })
}

pub fn bounds(loaded: &Loaded, method: Method, level: f64) -> Result<BoundsReport> {
    let design = &loaded.design;
    let closure = enumerate_closure(&design.hypotheses)?;
    let sets = closure
        .par_iter()
        .map(|s| {
            let w = design.strategy.subset_weights(s)?;
            let set = match method {
                Method::Bonferroni => bonferroni_bounds(
                    s,
                    level,
                    &w,
                    &design.schedule,
                    &design.spending,
                    &design.mvn,
                ),
                Method::Wpgsd => wpgsd_bounds(
                    s,
                    level,
                    &w,
                    &design.schedule,
                    &design.spending,
                    &design.correlation,
                    &design.mvn,
                ),
            };
            set.with_context(|| format!("bounds of {}", subset_name(design, s)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut max_error: f64 = 0.0;
    for set in sets {
        max_error = max_error.max(set.max_error);
        for (p, &j) in set.subset.members().iter().enumerate() {
            rows.push(BoundRow {
                subset: set.subset.clone(),
                name: subset_name(design, &set.subset),
                hypothesis: design.hypotheses.label(j).to_string(),
                weight: set.weights[p],
                bounds: set.bounds[p]
                    .iter()
                    .map(|&b| b.is_finite().then_some(b))
                    .collect(),
                nominal: set.nominal[p].clone(),
            });
        }
    }
    Ok(BoundsReport {
        method,
        level,
        rows,
        max_error,
    })
}

/// Closed tests at analyses `1..=analysis`, rejections carried forward.
pub fn analyze(
    loaded: &Loaded,
    method: Method,
    alpha: f64,
    analysis: Option<usize>,
) -> Result<Vec<InferenceReport>> {
    let k = match analysis {
        Some(k) => k,
        None if loaded.observed_analyses > 0 => loaded.observed_analyses,
        None => bail!("observed: no statistics to analyze"),
    };
    if k == 0 || k > loaded.design.analyses() {
        bail!("--analysis {k} is outside 1..={}", loaded.design.analyses());
    }
    Ok(closed_test_sequence(
        &loaded.design,
        &loaded.data,
        k,
        alpha,
        method,
    )?)
}

pub fn simulation(
    loaded: &Loaded,
    method: Method,
    alpha: f64,
    reps: Option<usize>,
    seed: Option<u64>,
) -> Result<SimulationSummary> {
    let cfg = loaded.config.simulation.clone().unwrap_or_default();
    let reps = reps.or(cfg.reps).unwrap_or(DEFAULT_REPS);
    if reps == 0 {
        bail!("simulation.reps: need at least one replication");
    }
    let seed = seed.or(cfg.seed).unwrap_or(DEFAULT_SIM_SEED);
    let mut plan = SimulationPlan::global_null(&loaded.design, reps, seed, method, alpha);
    if let Some(effects) = cfg.effects {
        plan.effects = effects;
    }
    simulate(&loaded.design, &plan).context("simulation")
}
