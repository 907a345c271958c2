//! Hypothesis families and graphical weighting strategies.
//!
//! A strategy is an initial weight vector `w(I)` plus a transition matrix `G`,
//! where `g[i][j]` is the fraction of the level of `H_i` handed to `H_j` once
//! `H_i` is rejected. Weights for an intersection `H_J` come from deleting every
//! hypothesis outside `J` from the graph, one at a time:
//!
//! ```text
//! w_l <- w_l + w_i * g[i][l]
//! g[l][k] <- (g[l][k] + g[l][i] * g[i][k]) / (1 - g[l][i] * g[i][l])
//! ```
//!
//! The result does not depend on the deletion order. Users may also bypass the
//! graph entirely and supply a weight vector for every intersection.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CLOSURE_CAP: usize = 16;

/// Absolute tolerance used when checking weight and row sums.
pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypothesisSet {
    labels: Vec<String>,
    cap: usize,
}

impl HypothesisSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::with_cap(labels, DEFAULT_CLOSURE_CAP)
    }

    pub fn with_cap<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        cap: usize,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidHypotheses(
                "at least one hypothesis is required".into(),
            ));
        }
        if labels.len() > cap {
            return Err(Error::ClosureTooLarge {
                m: labels.len(),
                cap,
            });
        }
        for (i, label) in labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(Error::InvalidHypotheses(format!(
                    "label {} is empty",
                    i + 1
                )));
            }
            if labels[..i].contains(label) {
                return Err(Error::InvalidHypotheses(format!(
                    "duplicate label {label:?}"
                )));
            }
        }
        Ok(Self { labels, cap })
    }

    /// Labels `H1..Hm`.
    pub fn numbered(m: usize) -> Result<Self> {
        Self::new((1..=m).map(|i| format!("H{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn full(&self) -> SubsetIndex {
        SubsetIndex((0..self.len()).collect())
    }
}

/// A non-empty set of zero-based hypothesis indices, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SubsetIndex(Vec<usize>);

impl SubsetIndex {
    pub fn new(members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::EmptySubset);
        }
        Ok(Self(members))
    }

    pub fn singleton(index: usize) -> Self {
        Self(vec![index])
    }

    pub fn from_mask(mask: u64) -> Result<Self> {
        Self::new((0..64).filter(|b| mask >> b & 1 == 1))
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// Position of a hypothesis within the subset's member list.
    pub fn position(&self, index: usize) -> Option<usize> {
        self.0.binary_search(&index).ok()
    }

    pub fn is_subset_of(&self, other: &SubsetIndex) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |acc, &i| acc | 1 << i)
    }

    /// `H_{1,2,3}`-style name from one-based indices.
    pub fn display_name(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|i| (i + 1).to_string()).collect();
        format!("H{}", parts.join(","))
    }

    pub fn labelled(&self, hyps: &HypothesisSet) -> Vec<String> {
        self.0.iter().map(|&i| hyps.label(i).to_string()).collect()
    }
}

impl TryFrom<Vec<usize>> for SubsetIndex {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SubsetIndex> for Vec<usize> {
    fn from(s: SubsetIndex) -> Self {
        s.0
    }
}

impl fmt::Display for SubsetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_name())
    }
}

/// All `2^m - 1` intersections, largest first, lexicographic within a size.
pub fn enumerate_closure(hyps: &HypothesisSet) -> Result<Vec<SubsetIndex>> {
    let m = hyps.len();
    if m > hyps.cap() || m >= 64 {
        return Err(Error::ClosureTooLarge { m, cap: hyps.cap() });
    }
    let mut all: Vec<SubsetIndex> = (1..(1u64 << m))
        .map(|mask| SubsetIndex::from_mask(mask).expect("non-zero mask"))
        .collect();
    all.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    Ok(all)
}

/// Unvalidated strategy as read from configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StrategySpec {
    pub initial_weights: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    /// Explicit `w(J)` entries: members (zero-based, any order) and weights aligned to them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset_weights: Option<Vec<(Vec<usize>, Vec<f64>)>>,
}

#[derive(Debug, Clone)]
pub struct WeightingStrategy {
    m: usize,
    active: Vec<usize>,
    weights: Vec<f64>,
    transition: Vec<Vec<f64>>,
    explicit: Option<BTreeMap<SubsetIndex, Vec<f64>>>,
    consonant: OnceLock<bool>,
}

pub fn validate_strategy(spec: &StrategySpec, hyps: &HypothesisSet) -> Result<WeightingStrategy> {
    let m = hyps.len();
    if spec.initial_weights.len() != m {
        return Err(Error::DimensionMismatch {
            what: "initial weights".into(),
            expected: m,
            found: spec.initial_weights.len(),
        });
    }
    if spec.transition.len() != m {
        return Err(Error::DimensionMismatch {
            what: "transition matrix rows".into(),
            expected: m,
            found: spec.transition.len(),
        });
    }
    check_weight_vector("initial weights", &spec.initial_weights)?;

    for (i, row) in spec.transition.iter().enumerate() {
        if row.len() != m {
            return Err(Error::DimensionMismatch {
                what: format!("transition matrix row {}", i + 1),
                expected: m,
                found: row.len(),
            });
        }
        for (j, &g) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidTransition(format!(
                    "g[{}][{}] = {g} is outside [0, 1]",
                    i + 1,
                    j + 1
                )));
            }
        }
        if row[i] != 0.0 {
            return Err(Error::InvalidTransition(format!(
                "diagonal entry g[{0}][{0}] = {1} must be zero",
                i + 1,
                row[i]
            )));
        }
        let sum: f64 = row.iter().sum();
        if sum > 1.0 + WEIGHT_TOL {
            return Err(Error::InvalidTransition(format!(
                "row {} sums to {sum} > 1",
                i + 1
            )));
        }
    }

    let explicit = match &spec.subset_weights {
        None => None,
        Some(entries) => Some(validate_explicit(entries, m)?),
    };

    Ok(WeightingStrategy {
        m,
        active: (0..m).collect(),
        weights: spec.initial_weights.clone(),
        transition: spec.transition.clone(),
        explicit,
        consonant: OnceLock::new(),
    })
}

fn check_weight_vector(what: &str, w: &[f64]) -> Result<()> {
    for (j, &x) in w.iter().enumerate() {
        if !x.is_finite() || !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidWeights(format!(
                "{what}: entry {} = {x} is outside [0, 1]",
                j + 1
            )));
        }
    }
    let sum: f64 = w.iter().sum();
    if sum > 1.0 + WEIGHT_TOL {
        return Err(Error::InvalidWeights(format!(
            "{what}: weights sum to {sum} > 1"
        )));
    }
    Ok(())
}

fn validate_explicit(
    entries: &[(Vec<usize>, Vec<f64>)],
    m: usize,
) -> Result<BTreeMap<SubsetIndex, Vec<f64>>> {
    let mut map = BTreeMap::new();
    for (members, weights) in entries {
        if members.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                what: "explicit subset weights".into(),
                expected: members.len(),
                found: weights.len(),
            });
        }
        if let Some(&bad) = members.iter().find(|&&i| i >= m) {
            return Err(Error::IndexOutOfRange {
                what: "explicit subset".into(),
                index: bad,
                size: m,
            });
        }
        let mut pairs: Vec<(usize, f64)> = members
            .iter()
            .copied()
            .zip(weights.iter().copied())
            .collect();
        pairs.sort_by_key(|p| p.0);
        let key = SubsetIndex::new(pairs.iter().map(|p| p.0))?;
        if key.len() != pairs.len() {
            return Err(Error::InvalidWeights(format!(
                "subset {key} lists a hypothesis twice"
            )));
        }
        let w: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        check_weight_vector(&format!("weights of {key}"), &w)?;
        if map.insert(key.clone(), w).is_some() {
            return Err(Error::InvalidWeights(format!("subset {key} listed twice")));
        }
    }
    let expected = (1usize << m) - 1;
    if map.len() != expected {
        let missing = (1u64..(1u64 << m))
            .map(|mask| SubsetIndex::from_mask(mask).expect("non-zero mask"))
            .find(|s| !map.contains_key(s))
            .expect("fewer entries than subsets");
        return Err(Error::InvalidWeights(format!(
            "explicit subset weights must cover all {expected} intersections; {missing} is missing"
        )));
    }
    Ok(map)
}

/// Delete hypothesis `i` from the graph in place; `remaining` excludes `i`.
fn remove_node(weights: &mut [f64], g: &mut [Vec<f64>], remaining: &[usize], i: usize) {
    let wi = weights[i];
    for &l in remaining {
        weights[l] += wi * g[i][l];
        // a hypothesis holding all the level should hold exactly 1
        if (weights[l] - 1.0).abs() <= 4.0 * f64::EPSILON {
            weights[l] = 1.0;
        }
    }
    let m = weights.len();
    let mut next = vec![vec![0.0; m]; m];
    for &l in remaining {
        let back = g[l][i] * g[i][l];
        if back < 1.0 - WEIGHT_TOL {
            for &k in remaining {
                if k != l {
                    next[l][k] = (g[l][k] + g[l][i] * g[i][k]) / (1.0 - back);
                }
            }
        }
    }
    weights[i] = 0.0;
    for (row, new_row) in g.iter_mut().zip(next) {
        *row = new_row;
    }
}

impl WeightingStrategy {
    /// Size of the original family.
    pub fn family_size(&self) -> usize {
        self.m
    }

    /// Hypotheses still in the graph, ascending.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn active_subset(&self) -> SubsetIndex {
        SubsetIndex(self.active.clone())
    }

    /// Current weights aligned with [`Self::active`].
    pub fn weights(&self) -> Vec<f64> {
        self.active.iter().map(|&j| self.weights[j]).collect()
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn has_explicit_weights(&self) -> bool {
        self.explicit.is_some()
    }

    fn check_in_graph(&self, subset: &SubsetIndex) -> Result<()> {
        for &j in subset.members() {
            if j >= self.m {
                return Err(Error::IndexOutOfRange {
                    what: "hypothesis family".into(),
                    index: j,
                    size: self.m,
                });
            }
            if self.active.binary_search(&j).is_err() {
                return Err(Error::InvalidHypotheses(format!(
                    "hypothesis {} is no longer in the graph",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    /// `w_j(J)` for every `j` in `J`, aligned with `J`'s members.
    pub fn subset_weights(&self, subset: &SubsetIndex) -> Result<Vec<f64>> {
        self.check_in_graph(subset)?;
        if let Some(table) = &self.explicit {
            if let Some(w) = table.get(subset) {
                return Ok(w.clone());
            }
        }
        let drop: Vec<usize> = self
            .active
            .iter()
            .copied()
            .filter(|&i| !subset.contains(i))
            .collect();
        Ok(self.weights_after_removing(&drop, subset))
    }

    /// Same as [`Self::subset_weights`] with an explicit deletion order.
    pub fn subset_weights_in_order(
        &self,
        subset: &SubsetIndex,
        order: &[usize],
    ) -> Result<Vec<f64>> {
        self.check_in_graph(subset)?;
        Ok(self.weights_after_removing(order, subset))
    }

    fn weights_after_removing(&self, order: &[usize], subset: &SubsetIndex) -> Vec<f64> {
        let mut w = self.weights.clone();
        let mut g = self.transition.clone();
        let mut remaining = self.active.clone();
        for &i in order {
            remaining.retain(|&x| x != i);
            remove_node(&mut w, &mut g, &remaining, i);
        }
        subset.members().iter().map(|&j| w[j]).collect()
    }

    /// Graph after rejecting `j`: weights and edges redistributed, `j` removed.
    pub fn update_after_rejection(&self, j: usize) -> Result<WeightingStrategy> {
        self.check_in_graph(&SubsetIndex::singleton(j))?;
        if self.active.len() < 2 {
            return Err(Error::LastHypothesis);
        }
        let mut weights = self.weights.clone();
        let mut transition = self.transition.clone();
        let active: Vec<usize> = self.active.iter().copied().filter(|&x| x != j).collect();
        remove_node(&mut weights, &mut transition, &active, j);
        let explicit = self.explicit.as_ref().map(|t| {
            t.iter()
                .filter(|(k, _)| !k.contains(j))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect()
        });
        Ok(WeightingStrategy {
            m: self.m,
            active,
            weights,
            transition,
            explicit,
            consonant: OnceLock::new(),
        })
    }

    /// Whether `w_j(J1) <= w_j(J2)` for all `j in J2 ⊆ J1` over the active set.
    ///
    /// Checked on immediate parents only; the general case follows by chaining.
    pub fn is_consonant(&self) -> bool {
        *self.consonant.get_or_init(|| {
            let full = self.active_subset();
            let n = full.len();
            let subsets: Vec<SubsetIndex> = (1u64..(1u64 << n))
                .map(|mask| {
                    SubsetIndex::new(
                        (0..n)
                            .filter(|b| mask >> b & 1 == 1)
                            .map(|b| self.active[b]),
                    )
                    .expect("non-zero mask")
                })
                .collect();
            let table: BTreeMap<&SubsetIndex, Vec<f64>> = subsets
                .iter()
                .map(|s| (s, self.subset_weights(s).expect("subset of active set")))
                .collect();
            subsets.iter().filter(|s| s.len() >= 2).all(|parent| {
                let pw = &table[parent];
                parent.members().iter().all(|&dropped| {
                    let child = SubsetIndex::new(
                        parent.members().iter().copied().filter(|&x| x != dropped),
                    )
                    .expect("parent has two or more members");
                    let cw = &table[&child];
                    child.members().iter().enumerate().all(|(ci, &j)| {
                        let pi = parent.position(j).expect("child within parent");
                        pw[pi] <= cw[ci] + WEIGHT_TOL
                    })
                })
            })
        })
    }
}
