//! Sequential and adjusted p-values and the closed testing decision.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{Diagnostics, Group, Method, Observed};
use crate::correlation::{CompleteCorrelation, DesignSchedule};
use crate::error::{Error, Result};
use crate::graph::{enumerate_closure, HypothesisSet, SubsetIndex, WeightingStrategy};
use crate::mvn::MvnSettings;
use crate::normal::{normal_sf, upper_critical_value};
use crate::spending::SpendingSpec;

/// Search interval and resolution for the level at which a rejection first occurs.
pub const LEVEL_FLOOR: f64 = 1e-10;
pub const LEVEL_CEILING: f64 = 1.0 - 1e-10;
pub const LEVEL_RESOLUTION: f64 = 1e-6;

/// Everything fixed before data arrive.
#[derive(Debug, Clone)]
pub struct Design {
    pub hypotheses: HypothesisSet,
    pub strategy: WeightingStrategy,
    pub schedule: DesignSchedule,
    pub correlation: CompleteCorrelation,
    pub spending: SpendingSpec,
    pub mvn: MvnSettings,
}

impl Design {
    pub fn new(
        hypotheses: HypothesisSet,
        strategy: WeightingStrategy,
        schedule: DesignSchedule,
        correlation: CompleteCorrelation,
        spending: SpendingSpec,
        mvn: MvnSettings,
    ) -> Result<Self> {
        let m = hypotheses.len();
        for (what, found) in [
            ("weighting strategy", strategy.family_size()),
            ("information fractions", schedule.hypotheses()),
            ("complete correlation", correlation.hypotheses()),
        ] {
            if found != m {
                return Err(Error::DimensionMismatch {
                    what: format!("hypotheses in {what}"),
                    expected: m,
                    found,
                });
            }
        }
        if correlation.analyses() != schedule.analyses() {
            return Err(Error::DimensionMismatch {
                what: "analyses in complete correlation".into(),
                expected: schedule.analyses(),
                found: correlation.analyses(),
            });
        }
        spending.validate()?;
        Ok(Self {
            hypotheses,
            strategy,
            schedule,
            correlation,
            spending,
            mvn,
        })
    }

    pub fn analyses(&self) -> usize {
        self.schedule.analyses()
    }

    fn check_analysis(&self, analysis: usize) -> Result<()> {
        if analysis == 0 || analysis > self.analyses() {
            return Err(Error::IndexOutOfRange {
                what: "analyses".into(),
                index: analysis,
                size: self.analyses(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub z: f64,
    pub p: f64,
}

/// Observed statistics indexed by analysis then hypothesis; `None` where a
/// hypothesis was not analysed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedStatistics {
    cells: Vec<Vec<Option<Statistic>>>,
}

impl ObservedStatistics {
    pub fn empty(hypotheses: usize, analyses: usize) -> Self {
        Self {
            cells: vec![vec![None; hypotheses]; analyses],
        }
    }

    pub fn from_z(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        Self::from_rows(rows, Self::cell_from_z)
    }

    pub fn from_p(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        Self::from_rows(rows, Self::cell_from_p)
    }

    fn from_rows(
        rows: Vec<Vec<Option<f64>>>,
        cell: impl Fn(usize, usize, f64) -> Result<Statistic>,
    ) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let mut cells = Vec::with_capacity(rows.len());
        for (k, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    what: format!("statistics at analysis {}", k + 1),
                    expected: m,
                    found: row.len(),
                });
            }
            cells.push(
                row.into_iter()
                    .enumerate()
                    .map(|(j, v)| v.map(|v| cell(j, k, v)).transpose())
                    .collect::<Result<_>>()?,
            );
        }
        Ok(Self { cells })
    }

    fn cell_from_z(j: usize, k: usize, z: f64) -> Result<Statistic> {
        if !z.is_finite() {
            return Err(Error::OutOfRange {
                what: format!("z statistic of hypothesis {} at analysis {}", j + 1, k + 1),
                range: "finite values",
                value: z,
            });
        }
        Ok(Statistic { z, p: normal_sf(z) })
    }

    fn cell_from_p(j: usize, k: usize, p: f64) -> Result<Statistic> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::OutOfRange {
                what: format!("p-value of hypothesis {} at analysis {}", j + 1, k + 1),
                range: "(0, 1)",
                value: p,
            });
        }
        Ok(Statistic {
            z: upper_critical_value(p),
            p,
        })
    }

    pub fn set_z(&mut self, hypothesis: usize, analysis: usize, z: f64) -> Result<()> {
        let cell = Self::cell_from_z(hypothesis, analysis.saturating_sub(1), z)?;
        *self.slot(hypothesis, analysis)? = Some(cell);
        Ok(())
    }

    pub fn set_p(&mut self, hypothesis: usize, analysis: usize, p: f64) -> Result<()> {
        let cell = Self::cell_from_p(hypothesis, analysis.saturating_sub(1), p)?;
        *self.slot(hypothesis, analysis)? = Some(cell);
        Ok(())
    }

    fn slot(&mut self, hypothesis: usize, analysis: usize) -> Result<&mut Option<Statistic>> {
        let size = self.cells.len();
        let row = self
            .cells
            .get_mut(analysis.wrapping_sub(1))
            .ok_or(Error::IndexOutOfRange {
                what: "analyses".into(),
                index: analysis,
                size,
            })?;
        let size = row.len();
        row.get_mut(hypothesis).ok_or(Error::IndexOutOfRange {
            what: "hypotheses".into(),
            index: hypothesis,
            size,
        })
    }

    pub fn analyses(&self) -> usize {
        self.cells.len()
    }

    /// Statistic of `hypothesis` (zero-based) at `analysis` (one-based).
    pub fn get(&self, hypothesis: usize, analysis: usize) -> Option<Statistic> {
        self.cells
            .get(analysis.wrapping_sub(1))
            .and_then(|row| row.get(hypothesis))
            .copied()
            .flatten()
    }

    /// `p[k][member]` for analyses `1..=analysis`.
    fn p_matrix(&self, members: &[usize], analysis: usize) -> Result<Vec<Vec<f64>>> {
        (1..=analysis)
            .map(|k| {
                members
                    .iter()
                    .map(|&j| {
                        self.get(j, k).map(|s| s.p).ok_or(Error::MissingStatistic {
                            hypothesis: j + 1,
                            analysis: k,
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialP {
    pub value: f64,
    pub bisection_steps: usize,
    pub diagnostics: Diagnostics,
}

/// Whether some group crosses a bound at level `mu`.
fn rejects(
    groups: &[(Group, Vec<Vec<f64>>)],
    from: usize,
    design: &Design,
    mu: f64,
    diag: &mut Diagnostics,
) -> Result<bool> {
    for (group, p) in groups {
        let observed = Observed { p, from };
        if group
            .solve(&design.spending, mu, &design.mvn, Some(&observed), diag)?
            .is_none()
        {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Smallest level in the search interval at which the groups reject.
fn smallest_rejecting_level(
    groups: &[(Group, Vec<Vec<f64>>)],
    from: usize,
    design: &Design,
) -> Result<SequentialP> {
    let mut diag = Diagnostics::default();
    let mut steps = 0;
    let (mut lo, mut hi) = (LEVEL_FLOOR, LEVEL_CEILING);
    let value = if !rejects(groups, from, design, hi, &mut diag)? {
        1.0
    } else if rejects(groups, from, design, lo, &mut diag)? {
        lo
    } else {
        while hi - lo > LEVEL_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            steps += 1;
            if rejects(groups, from, design, mid, &mut diag)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(SequentialP {
        value,
        bisection_steps: steps,
        diagnostics: diag,
    })
}

fn weighted_sequential_p(
    design: &Design,
    data: &ObservedStatistics,
    subset: &SubsetIndex,
    weights: &[f64],
    analysis: usize,
    method: Method,
    from: usize,
) -> Result<SequentialP> {
    design.check_analysis(analysis)?;
    // every member must be observed even if its weight is zero
    data.p_matrix(subset.members(), analysis)?;
    let groups = Group::for_subset(
        method,
        subset,
        weights,
        &design.schedule,
        Some(&design.correlation),
        analysis,
    )?
    .into_iter()
    .map(|g| {
        let p = data.p_matrix(&g.members, analysis)?;
        Ok((g, p))
    })
    .collect::<Result<Vec<_>>>()?;
    smallest_rejecting_level(&groups, from, design)
}

/// Smallest level at which the intersection hypothesis `subset` is rejected
/// by analysis `analysis` (one-based); 1 if not rejected at any level.
pub fn sequential_p_intersection(
    design: &Design,
    data: &ObservedStatistics,
    subset: &SubsetIndex,
    analysis: usize,
    method: Method,
) -> Result<SequentialP> {
    let weights = design.strategy.subset_weights(subset)?;
    weighted_sequential_p(design, data, subset, &weights, analysis, method, 0)
}

/// Sequential p-value of a single hypothesis tested with its full weight.
pub fn sequential_p_elementary(
    design: &Design,
    data: &ObservedStatistics,
    hypothesis: usize,
    analysis: usize,
    method: Method,
) -> Result<SequentialP> {
    let subset = singleton(design, hypothesis)?;
    weighted_sequential_p(design, data, &subset, &[1.0], analysis, method, 0)
}

/// Smallest level at which the hypothesis crosses at exactly `analysis`,
/// ignoring earlier crossings.
pub fn repeated_p_value(
    design: &Design,
    data: &ObservedStatistics,
    hypothesis: usize,
    analysis: usize,
) -> Result<SequentialP> {
    let subset = singleton(design, hypothesis)?;
    weighted_sequential_p(
        design,
        data,
        &subset,
        &[1.0],
        analysis,
        Method::Bonferroni,
        analysis.saturating_sub(1),
    )
}

fn singleton(design: &Design, hypothesis: usize) -> Result<SubsetIndex> {
    if hypothesis >= design.hypotheses.len() {
        return Err(Error::IndexOutOfRange {
            what: "hypotheses".into(),
            index: hypothesis,
            size: design.hypotheses.len(),
        });
    }
    Ok(SubsetIndex::singleton(hypothesis))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedP {
    pub value: f64,
    /// Intersection attaining the maximum; the largest one on ties.
    pub attained_by: SubsetIndex,
}

/// Maximum of the sequential p-values over intersections containing `hypothesis`.
pub fn adjusted_sequential_p(
    design: &Design,
    data: &ObservedStatistics,
    hypothesis: usize,
    analysis: usize,
    method: Method,
) -> Result<AdjustedP> {
    singleton(design, hypothesis)?;
    let closure = enumerate_closure(&design.hypotheses)?;
    let results = closure
        .into_iter()
        .filter(|s| s.contains(hypothesis))
        .map(|s| {
            let p = sequential_p_intersection(design, data, &s, analysis, method)?;
            Ok((s, p.value))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(adjust(&results, hypothesis))
}

/// `results` must be ordered by non-increasing subset size.
fn adjust(results: &[(SubsetIndex, f64)], hypothesis: usize) -> AdjustedP {
    let mut best: Option<(&SubsetIndex, f64)> = None;
    for (s, p) in results.iter().filter(|(s, _)| s.contains(hypothesis)) {
        if best.is_none_or(|(_, b)| *p > b) {
            best = Some((s, *p));
        }
    }
    let (s, value) = best.expect("the singleton is always in the closure");
    AdjustedP {
        value,
        attained_by: s.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionResult {
    pub subset: SubsetIndex,
    pub name: String,
    pub weights: Vec<f64>,
    pub sequential_p: f64,
    pub bisection_steps: usize,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub index: usize,
    pub label: String,
    pub sequential_p: f64,
    pub adjusted_p: f64,
    pub attained_by: SubsetIndex,
    pub repeated_p: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub analysis: usize,
    pub method: Method,
    pub alpha: f64,
    pub intersections: Vec<IntersectionResult>,
    pub hypotheses: Vec<HypothesisResult>,
    /// Hypotheses with adjusted p-value at most `alpha` at this analysis.
    pub rejected: Vec<usize>,
    /// Hypotheses already rejected at an earlier analysis, which stay rejected.
    pub rejected_earlier: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl InferenceReport {
    /// Rejections at this analysis together with those carried forward.
    pub fn cumulative_rejections(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .rejected
            .iter()
            .chain(&self.rejected_earlier)
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "alpha".into(),
            range: "(0, 1)",
            value: alpha,
        })
    }
}

/// Full closed test at `analysis`: every intersection, then adjusted
/// p-values and decisions.
pub fn closed_test_report(
    design: &Design,
    data: &ObservedStatistics,
    analysis: usize,
    alpha: f64,
    method: Method,
) -> Result<InferenceReport> {
    check_alpha(alpha)?;
    design.check_analysis(analysis)?;
    let closure = enumerate_closure(&design.hypotheses)?;
    let intersections = closure
        .par_iter()
        .map(|s| {
            let weights = design.strategy.subset_weights(s)?;
            let p = weighted_sequential_p(design, data, s, &weights, analysis, method, 0)?;
            Ok(IntersectionResult {
                subset: s.clone(),
                name: s.labelled(&design.hypotheses).join(","),
                weights,
                sequential_p: p.value,
                bisection_steps: p.bisection_steps,
                diagnostics: p.diagnostics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(SubsetIndex, f64)> = intersections
        .iter()
        .map(|r| (r.subset.clone(), r.sequential_p))
        .collect();
    let mut diagnostics = Diagnostics::default();
    for r in &intersections {
        diagnostics.merge(&r.diagnostics);
    }
    let hypotheses = (0..design.hypotheses.len())
        .map(|j| {
            let adjusted = adjust(&pairs, j);
            let single = pairs
                .iter()
                .find(|(s, _)| s.len() == 1 && s.contains(j))
                .map(|(_, p)| *p)
                .expect("singleton in closure");
            let repeated = repeated_p_value(design, data, j, analysis)?;
            diagnostics.merge(&repeated.diagnostics);
            Ok(HypothesisResult {
                index: j,
                label: design.hypotheses.label(j).to_string(),
                sequential_p: single,
                adjusted_p: adjusted.value,
                attained_by: adjusted.attained_by,
                repeated_p: repeated.value,
                rejected: adjusted.value <= alpha,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rejected = hypotheses
        .iter()
        .filter(|h| h.rejected)
        .map(|h| h.index)
        .collect();
    Ok(InferenceReport {
        analysis,
        method,
        alpha,
        intersections,
        hypotheses,
        rejected,
        rejected_earlier: Vec::new(),
        diagnostics,
    })
}

/// Reports for analyses `1..=analysis`, carrying rejections forward.
pub fn closed_test_sequence(
    design: &Design,
    data: &ObservedStatistics,
    analysis: usize,
    alpha: f64,
    method: Method,
) -> Result<Vec<InferenceReport>> {
    let mut reports: Vec<InferenceReport> = Vec::with_capacity(analysis);
    for k in 1..=analysis {
        let mut report = closed_test_report(design, data, k, alpha, method)?;
        if let Some(prev) = reports.last() {
            report.rejected_earlier = prev.cumulative_rejections();
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Sequentially rejective graph procedure for Bonferroni bounds: reject any
/// hypothesis whose sequential p-value at its current weight is at most
/// `alpha`, pass its weight along the graph, and repeat.
pub fn bonferroni_shortcut(
    design: &Design,
    data: &ObservedStatistics,
    analysis: usize,
    alpha: f64,
) -> Result<Vec<usize>> {
    check_alpha(alpha)?;
    design.check_analysis(analysis)?;
    if design.strategy.has_explicit_weights() {
        return Err(Error::InvalidWeights(
            "the shortcut needs weights derived from the graph, not an explicit table".into(),
        ));
    }
    let mut strategy = design.strategy.clone();
    let mut rejected = Vec::new();
    loop {
        let mut next = None;
        for &j in strategy.active() {
            let w = strategy.weight(j);
            if w <= 0.0 {
                continue;
            }
            let subset = SubsetIndex::singleton(j);
            let p = weighted_sequential_p(
                design,
                data,
                &subset,
                &[w.min(1.0)],
                analysis,
                Method::Bonferroni,
                0,
            )?;
            if p.value <= alpha {
                next = Some(j);
                break;
            }
        }
        let Some(j) = next else { break };
        rejected.push(j);
        if strategy.active().len() == 1 {
            break;
        }
        strategy = strategy.update_after_rejection(j)?;
    }
    rejected.sort_unstable();
    Ok(rejected)
}
