//! Group sequential crossing bounds for an intersection hypothesis.
//!
//! Both methods reduce to one solver over a *group* of statistics sharing a
//! cumulative crossing target. At each analysis the nominal levels of the
//! group's members are `xi * w_j * delta_k`, where `delta_k` is the increment
//! of the target, and `xi` is chosen so the probability of crossing any bound
//! so far equals the target.
//!
//! * Bonferroni: one group per hypothesis with weight 1 and target
//!   `f(t_{j,k}; w_j mu)`, correlated only across analyses.
//! * WPGSD: a single group over all of `J` with target `f(t^min_k; mu)` under
//!   the complete correlation structure.

use serde::{Deserialize, Serialize};

use crate::correlation::{CompleteCorrelation, DesignSchedule};
use crate::error::{Error, Result};
use crate::graph::SubsetIndex;
use crate::mvn::{
    union_crossing_probability, union_crossing_versus, CorrelationMatrix, MvnSettings,
    TailProbability, SETTLE_MARGIN,
};
use crate::normal::upper_critical_value;
use crate::spending::{cumulative_spend, SpendingSpec};

const MAX_ROOT_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bonferroni,
    Wpgsd,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Bonferroni => "bonferroni",
            Method::Wpgsd => "wpgsd",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bonferroni" => Ok(Method::Bonferroni),
            "wpgsd" => Ok(Method::Wpgsd),
            other => Err(Error::InvalidSpending(format!("unknown method {other:?}"))),
        }
    }
}

/// Bounds for every member of a subset at every analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySet {
    pub method: Method,
    pub subset: SubsetIndex,
    pub level: f64,
    pub weights: Vec<f64>,
    /// `bounds[p][k]` for the `p`-th member of the subset; `inf` when the
    /// member spends nothing at that analysis.
    pub bounds: Vec<Vec<f64>>,
    pub nominal: Vec<Vec<f64>>,
    /// Cumulative crossing probability each member's group is held to.
    pub cumulative_spend: Vec<Vec<f64>>,
    /// Largest integration error bound met while solving.
    pub max_error: f64,
}

/// Running totals from the numerical work behind a result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub evaluations: usize,
    pub max_error: f64,
}

impl Diagnostics {
    fn record(&mut self, p: &TailProbability) {
        self.evaluations += 1;
        self.max_error = self.max_error.max(p.error_bound);
    }

    /// Comparisons settled well clear of their threshold do not count towards
    /// the error.
    fn record_comparison(&mut self, p: &TailProbability, threshold: f64) {
        self.evaluations += 1;
        if (p.value - threshold).abs() <= SETTLE_MARGIN * p.error_bound {
            self.max_error = self.max_error.max(p.error_bound);
        }
    }

    pub fn merge(&mut self, other: &Diagnostics) {
        self.evaluations += other.evaluations;
        self.max_error = self.max_error.max(other.max_error);
    }
}

/// Statistics sharing one crossing target, fixed apart from the level.
#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub members: Vec<usize>,
    pub weights: Vec<f64>,
    /// Information fraction driving the target at each analysis.
    fractions: Vec<f64>,
    /// Target level is `scale * mu`.
    scale: f64,
    /// Correlation of the first `k + 1` analyses, analysis-major.
    prefix: Vec<CorrelationMatrix>,
}

/// Observed p-values of a group's members, `[analysis][member]`, and the first
/// analysis at which a crossing counts.
pub(crate) struct Observed<'a> {
    pub p: &'a [Vec<f64>],
    pub from: usize,
}

pub(crate) struct Solved {
    pub bounds: Vec<Vec<f64>>,
    pub nominal: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Group {
    fn new(
        members: Vec<usize>,
        weights: Vec<f64>,
        fractions: Vec<f64>,
        scale: f64,
        corr: &CorrelationMatrix,
    ) -> Result<Self> {
        let n = members.len();
        let prefix = (1..=fractions.len())
            .map(|k| corr.principal(&(0..k * n).collect::<Vec<_>>()))
            .collect::<Result<_>>()?;
        Ok(Self {
            members,
            weights,
            fractions,
            scale,
            prefix,
        })
    }

    /// Groups for `method` on `subset` through analysis `through` (one-based).
    pub fn for_subset(
        method: Method,
        subset: &SubsetIndex,
        weights: &[f64],
        schedule: &DesignSchedule,
        ccs: Option<&CompleteCorrelation>,
        through: usize,
    ) -> Result<Vec<Group>> {
        check_layout(subset, weights, schedule, through)?;
        match method {
            Method::Bonferroni => subset
                .members()
                .iter()
                .zip(weights)
                .filter(|(_, &w)| w > 0.0)
                .map(|(&j, &w)| {
                    let corr = schedule.within_correlation(j, through)?;
                    Group::new(
                        vec![j],
                        vec![1.0],
                        schedule.fractions(j)[..through].to_vec(),
                        w,
                        &corr,
                    )
                })
                .collect(),
            Method::Wpgsd => {
                let ccs = ccs.ok_or_else(|| {
                    Error::InvalidCorrelation(
                        "weighted parametric bounds need the complete correlation".into(),
                    )
                })?;
                if ccs.hypotheses() != schedule.hypotheses()
                    || ccs.analyses() != schedule.analyses()
                {
                    return Err(Error::DimensionMismatch {
                        what: "complete correlation layout".into(),
                        expected: schedule.hypotheses() * schedule.analyses(),
                        found: ccs.hypotheses() * ccs.analyses(),
                    });
                }
                if weights.iter().all(|&w| w == 0.0) {
                    return Ok(Vec::new());
                }
                let corr = ccs.subset(subset, through)?;
                let fractions = (0..through)
                    .map(|k| schedule.min_fraction(subset, k))
                    .collect();
                Ok(vec![Group::new(
                    subset.members().to_vec(),
                    weights.to_vec(),
                    fractions,
                    1.0,
                    &corr,
                )?])
            }
        }
    }

    pub fn targets(&self, spec: &SpendingSpec, mu: f64) -> Result<Vec<f64>> {
        let level = (self.scale * mu).min(1.0);
        self.fractions
            .iter()
            .map(|&t| cumulative_spend(spec, t, level))
            .collect()
    }

    fn crossing(
        &self,
        k: usize,
        earlier: &[f64],
        current: &[f64],
        target: f64,
        settings: &MvnSettings,
        diag: &mut Diagnostics,
    ) -> Result<f64> {
        let mut bounds = earlier.to_vec();
        bounds.extend_from_slice(current);
        let p = union_crossing_versus(&bounds, &self.prefix[k], settings, target)?;
        diag.record_comparison(&p, target);
        Ok(p.value)
    }

    fn bounds_at(&self, xi: f64, delta: f64) -> Vec<f64> {
        self.weights
            .iter()
            .map(|&w| {
                if w > 0.0 {
                    upper_critical_value(xi * w * delta)
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    /// Solves bounds analysis by analysis. With `observed`, returns `None` as
    /// soon as a member crosses its bound at an analysis `>= observed.from`.
    pub fn solve(
        &self,
        spec: &SpendingSpec,
        mu: f64,
        settings: &MvnSettings,
        observed: Option<&Observed<'_>>,
        diag: &mut Diagnostics,
    ) -> Result<Option<Solved>> {
        let n = self.members.len();
        let through = match observed {
            Some(o) => o.p.len(),
            None => self.fractions.len(),
        };
        let targets = self.targets(spec, mu)?;
        let w_max = self.weights.iter().copied().fold(0.0, f64::max);
        let mut flat: Vec<f64> = Vec::with_capacity(n * through);
        let mut nominal = Vec::with_capacity(through);
        let mut prev_target = 0.0;
        for k in 0..through {
            let delta = targets[k] - prev_target;
            prev_target = targets[k];
            if !(delta > 0.0) || w_max == 0.0 {
                flat.extend(std::iter::repeat_n(f64::INFINITY, n));
                nominal.push(vec![0.0; n]);
                continue;
            }
            let xi_max = 1.0 / (w_max * delta);
            if let Some(o) = observed.filter(|o| k >= o.from) {
                let needed = self
                    .weights
                    .iter()
                    .zip(&o.p[k])
                    .filter(|(&w, _)| w > 0.0)
                    .map(|(&w, &p)| p / (w * delta))
                    .fold(f64::INFINITY, f64::min);
                if needed <= xi_max {
                    let reached = self.crossing(
                        k,
                        &flat,
                        &self.bounds_at(needed, delta),
                        targets[k],
                        settings,
                        diag,
                    )?;
                    if reached <= targets[k] {
                        return Ok(None);
                    }
                }
                if k + 1 == through {
                    break;
                }
            }
            let xi = self.solve_inflation(k, &flat, delta, xi_max, targets[k], settings, diag)?;
            flat.extend(self.bounds_at(xi, delta));
            nominal.push(
                self.weights
                    .iter()
                    .map(|&w| (xi * w * delta).min(1.0))
                    .collect(),
            );
        }
        let rows = nominal.len();
        let bounds = (0..n)
            .map(|p| (0..rows).map(|k| flat[k * n + p]).collect())
            .collect();
        let nominal = (0..n)
            .map(|p| (0..rows).map(|k| nominal[k][p]).collect())
            .collect();
        Ok(Some(Solved {
            bounds,
            nominal,
            targets,
        }))
    }

    /// Illinois iteration on `P(cross by k | xi) = target` over `[0, xi_max]`.
    #[allow(clippy::too_many_arguments)]
    fn solve_inflation(
        &self,
        k: usize,
        earlier: &[f64],
        delta: f64,
        xi_max: f64,
        target: f64,
        settings: &MvnSettings,
        diag: &mut Diagnostics,
    ) -> Result<f64> {
        let eval = |xi: f64, diag: &mut Diagnostics| -> Result<(f64, f64)> {
            let mut bounds = earlier.to_vec();
            bounds.extend(self.bounds_at(xi, delta));
            let p = union_crossing_probability(&bounds, &self.prefix[k], settings)?;
            diag.record(&p);
            Ok((p.value - target, p.error_bound.max(1e-13)))
        };
        let (mut a, mut b) = (0.0, xi_max);
        let (mut fa, _) = eval(a, diag)?;
        if fa >= 0.0 {
            return Ok(0.0);
        }
        let (mut fb, _) = eval(b, diag)?;
        if fb < 0.0 {
            return Err(Error::Infeasible {
                target,
                detail: format!(
                    "crossing probability with every nominal level at its maximum is {}",
                    fb + target
                ),
            });
        }
        let mut side = 0i8;
        for _ in 0..MAX_ROOT_ITERATIONS {
            let c = if fb - fa > 0.0 {
                b - fb * (b - a) / (fb - fa)
            } else {
                0.5 * (a + b)
            };
            let c = if c > a && c < b { c } else { 0.5 * (a + b) };
            let (fc, tol) = eval(c, diag)?;
            if fc.abs() <= tol || (b - a) <= 1e-14 * b {
                return Ok(c);
            }
            if fc < 0.0 {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        Err(Error::NonConvergence {
            what: format!("nominal level inflation at analysis {}", k + 1),
            iterations: MAX_ROOT_ITERATIONS,
        })
    }
}

fn check_layout(
    subset: &SubsetIndex,
    weights: &[f64],
    schedule: &DesignSchedule,
    through: usize,
) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if weights.len() != subset.len() {
        return Err(Error::DimensionMismatch {
            what: "subset weights".into(),
            expected: subset.len(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !(0.0..=1.0 + 1e-12).contains(w)) {
        return Err(Error::InvalidWeights(format!("{weights:?}")));
    }
    if let Some(&bad) = subset
        .members()
        .iter()
        .find(|&&j| j >= schedule.hypotheses())
    {
        return Err(Error::IndexOutOfRange {
            what: "hypotheses".into(),
            index: bad,
            size: schedule.hypotheses(),
        });
    }
    if through == 0 || through > schedule.analyses() {
        return Err(Error::IndexOutOfRange {
            what: "analyses".into(),
            index: through,
            size: schedule.analyses(),
        });
    }
    Ok(())
}

fn assemble(
    method: Method,
    subset: &SubsetIndex,
    mu: f64,
    weights: &[f64],
    groups: &[Group],
    spec: &SpendingSpec,
    settings: &MvnSettings,
    analyses: usize,
) -> Result<BoundarySet> {
    let n = subset.len();
    let mut set = BoundarySet {
        method,
        subset: subset.clone(),
        level: mu,
        weights: weights.to_vec(),
        bounds: vec![vec![f64::INFINITY; analyses]; n],
        nominal: vec![vec![0.0; analyses]; n],
        cumulative_spend: vec![vec![0.0; analyses]; n],
        max_error: 0.0,
    };
    let mut diag = Diagnostics::default();
    for group in groups {
        let solved = group
            .solve(spec, mu, settings, None, &mut diag)?
            .expect("no observations given");
        for (g, &j) in group.members.iter().enumerate() {
            let p = subset
                .position(j)
                .expect("group member belongs to the subset");
            set.bounds[p] = solved.bounds[g].clone();
            set.nominal[p] = solved.nominal[g].clone();
            set.cumulative_spend[p] = solved.targets.clone();
        }
    }
    set.max_error = diag.max_error;
    Ok(set)
}

/// Each member runs its own group sequential design at level `w_j mu`.
pub fn bonferroni_bounds(
    subset: &SubsetIndex,
    mu: f64,
    weights: &[f64],
    schedule: &DesignSchedule,
    spec: &SpendingSpec,
    settings: &MvnSettings,
) -> Result<BoundarySet> {
    check_level(mu)?;
    let k = schedule.analyses();
    let groups = Group::for_subset(Method::Bonferroni, subset, weights, schedule, None, k)?;
    assemble(
        Method::Bonferroni,
        subset,
        mu,
        weights,
        &groups,
        spec,
        settings,
        k,
    )
}

/// Joint bounds exploiting the complete correlation among members of `subset`.
pub fn wpgsd_bounds(
    subset: &SubsetIndex,
    mu: f64,
    weights: &[f64],
    schedule: &DesignSchedule,
    spec: &SpendingSpec,
    ccs: &CompleteCorrelation,
    settings: &MvnSettings,
) -> Result<BoundarySet> {
    check_level(mu)?;
    let k = schedule.analyses();
    let groups = Group::for_subset(Method::Wpgsd, subset, weights, schedule, Some(ccs), k)?;
    assemble(
        Method::Wpgsd,
        subset,
        mu,
        weights,
        &groups,
        spec,
        settings,
        k,
    )
}

fn check_level(mu: f64) -> Result<()> {
    if mu > 0.0 && mu < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "significance level".into(),
            range: "(0, 1)",
            value: mu,
        })
    }
}

/// Probability under the intersection null of crossing any bound of `set`
/// by analysis `through` (one-based).
pub fn crossing_probability(
    set: &BoundarySet,
    ccs: &CompleteCorrelation,
    through: usize,
    settings: &MvnSettings,
) -> Result<TailProbability> {
    let corr = ccs.subset(&set.subset, through)?;
    let bounds: Vec<f64> = (0..through)
        .flat_map(|k| set.bounds.iter().map(move |row| row[k]))
        .collect();
    union_crossing_probability(&bounds, &corr, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{build_ccs, info_fractions, EventTable};
    use crate::normal::normal_sf;

    const HSD4: SpendingSpec = SpendingSpec::Hsd { gamma: -4.0 };

    fn example() -> (DesignSchedule, CompleteCorrelation) {
        let events = EventTable::new(
            vec![vec![100, 200], vec![110, 220], vec![225, 450]],
            &[
                (0, 1, vec![80, 160]),
                (0, 2, vec![100, 200]),
                (1, 2, vec![110, 220]),
            ],
        )
        .unwrap();
        (
            info_fractions(&events).unwrap(),
            build_ccs(&events).unwrap(),
        )
    }

    #[test]
    fn bonferroni_first_analysis_is_closed_form() {
        let (schedule, _) = example();
        let s = SubsetIndex::new([0, 1, 2]).unwrap();
        let set = bonferroni_bounds(
            &s,
            0.025,
            &[0.3, 0.3, 0.4],
            &schedule,
            &HSD4,
            &MvnSettings::default(),
        )
        .unwrap();
        for (p, w) in [0.3, 0.3, 0.4].iter().enumerate() {
            let spent = cumulative_spend(&HSD4, 0.5, w * 0.025).unwrap();
            assert!((normal_sf(set.bounds[p][0]) - spent).abs() < 1e-15);
            assert!((set.nominal[p][0] - spent).abs() < 1e-15);
        }
    }

    #[test]
    fn wpgsd_spends_exactly() {
        let (schedule, ccs) = example();
        let settings = MvnSettings::default();
        let s = SubsetIndex::new([0, 1, 2]).unwrap();
        let set = wpgsd_bounds(
            &s,
            0.025,
            &[0.3, 0.3, 0.4],
            &schedule,
            &HSD4,
            &ccs,
            &settings,
        )
        .unwrap();
        for k in 1..=2 {
            let p = crossing_probability(&set, &ccs, k, &settings).unwrap();
            let target = cumulative_spend(&HSD4, if k == 1 { 0.5 } else { 1.0 }, 0.025).unwrap();
            assert!(
                (p.value - target).abs() < 5e-7,
                "analysis {k}: {} vs {target}",
                p.value
            );
        }
        let bonf =
            bonferroni_bounds(&s, 0.025, &[0.3, 0.3, 0.4], &schedule, &HSD4, &settings).unwrap();
        for p in 0..3 {
            for k in 0..2 {
                assert!(set.bounds[p][k] <= bonf.bounds[p][k] + 1e-9);
            }
        }
    }

    #[test]
    fn zero_weight_member_never_rejects() {
        let (schedule, ccs) = example();
        let s = SubsetIndex::new([0, 1]).unwrap();
        let settings = MvnSettings::default();
        let set = wpgsd_bounds(&s, 0.025, &[1.0, 0.0], &schedule, &HSD4, &ccs, &settings).unwrap();
        assert!(set.bounds[1].iter().all(|b| b.is_infinite()));
        let single = SubsetIndex::new([0]).unwrap();
        let alone = bonferroni_bounds(&single, 0.025, &[1.0], &schedule, &HSD4, &settings).unwrap();
        for k in 0..2 {
            assert!((set.bounds[0][k] - alone.bounds[0][k]).abs() < 1e-6);
        }
    }

    #[test]
    fn argument_errors() {
        let (schedule, ccs) = example();
        let settings = MvnSettings::default();
        let s = SubsetIndex::new([0, 1]).unwrap();
        assert!(bonferroni_bounds(&s, 0.025, &[0.5], &schedule, &HSD4, &settings).is_err());
        assert!(bonferroni_bounds(&s, 0.0, &[0.5, 0.5], &schedule, &HSD4, &settings).is_err());
        let bad = SubsetIndex::new([0, 5]).unwrap();
        assert!(wpgsd_bounds(&bad, 0.025, &[0.5, 0.5], &schedule, &HSD4, &ccs, &settings).is_err());
    }
}
