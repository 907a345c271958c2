//! Complete correlation structure of all hypothesis-by-analysis statistics.
//!
//! Statistics are ordered analysis-major, hypothesis-minor: index `k * m + j`
//! holds `Z_{j,k}` (both zero-based). With cumulative event counts `n[i][k]`
//! and shared counts `n[i1 ∧ i2][k]`,
//!
//! ```text
//! Corr(Z_{i1,k1}, Z_{i2,k2}) = n[i1 ∧ i2][min(k1,k2)] / sqrt(n[i1][k1] * n[i2][k2])
//! ```

use crate::error::{Error, Result};
use crate::graph::SubsetIndex;
use crate::mvn::CorrelationMatrix;
use crate::spending::check_fractions;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTable {
    counts: Vec<Vec<u64>>,
    overlap: Vec<Vec<Vec<u64>>>,
}

impl EventTable {
    /// `counts[i][k]` are cumulative events; `overlaps` lists every unordered
    /// pair `(i1, i2)` with its per-analysis shared counts.
    pub fn new(counts: Vec<Vec<u64>>, overlaps: &[(usize, usize, Vec<u64>)]) -> Result<Self> {
        let m = counts.len();
        if m == 0 {
            return Err(Error::InvalidEvents("no hypotheses".into()));
        }
        let k = counts[0].len();
        if k == 0 {
            return Err(Error::InvalidEvents("no analyses".into()));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    what: format!("event counts of hypothesis {}", i + 1),
                    expected: k,
                    found: row.len(),
                });
            }
            if row[0] == 0 {
                return Err(Error::InvalidEvents(format!(
                    "hypothesis {} has zero events",
                    i + 1
                )));
            }
            if row.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidEvents(format!(
                    "counts of hypothesis {} are not strictly increasing: {row:?}",
                    i + 1
                )));
            }
        }
        let mut overlap = vec![vec![None::<Vec<u64>>; m]; m];
        for (i, row) in counts.iter().enumerate() {
            overlap[i][i] = Some(row.clone());
        }
        for (i1, i2, shared) in overlaps {
            let (i1, i2) = (*i1, *i2);
            for i in [i1, i2] {
                if i >= m {
                    return Err(Error::IndexOutOfRange {
                        what: "event overlap".into(),
                        index: i,
                        size: m,
                    });
                }
            }
            if i1 == i2 {
                return Err(Error::InvalidEvents(format!(
                    "overlap of hypothesis {} with itself is implied by its counts",
                    i1 + 1
                )));
            }
            if shared.len() != k {
                return Err(Error::DimensionMismatch {
                    what: format!("overlap of hypotheses {} and {}", i1 + 1, i2 + 1),
                    expected: k,
                    found: shared.len(),
                });
            }
            for (a, &c) in shared.iter().enumerate() {
                let cap = counts[i1][a].min(counts[i2][a]);
                if c > cap {
                    return Err(Error::InvalidEvents(format!(
                        "overlap of hypotheses {} and {} at analysis {} is {c}, more than {cap}",
                        i1 + 1,
                        i2 + 1,
                        a + 1
                    )));
                }
            }
            if overlap[i1][i2].is_some() {
                return Err(Error::InvalidEvents(format!(
                    "overlap of hypotheses {} and {} given twice",
                    i1 + 1,
                    i2 + 1
                )));
            }
            overlap[i1][i2] = Some(shared.clone());
            overlap[i2][i1] = Some(shared.clone());
        }
        let mut full = Vec::with_capacity(m);
        for (i1, row) in overlap.into_iter().enumerate() {
            let mut out = Vec::with_capacity(m);
            for (i2, cell) in row.into_iter().enumerate() {
                out.push(cell.ok_or_else(|| {
                    Error::InvalidEvents(format!(
                        "overlap of hypotheses {} and {} is missing",
                        i1 + 1,
                        i2 + 1
                    ))
                })?);
            }
            full.push(out);
        }
        Ok(Self {
            counts,
            overlap: full,
        })
    }

    pub fn hypotheses(&self) -> usize {
        self.counts.len()
    }

    pub fn analyses(&self) -> usize {
        self.counts[0].len()
    }

    pub fn count(&self, i: usize, k: usize) -> u64 {
        self.counts[i][k]
    }

    /// Events shared by `Z_{i1,k1}` and `Z_{i2,k2}`.
    pub fn shared(&self, i1: usize, k1: usize, i2: usize, k2: usize) -> u64 {
        self.overlap[i1][i2][k1.min(k2)]
    }

    /// Every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        let s = |v: &Vec<u64>| v.iter().map(|c| c * factor).collect::<Vec<_>>();
        Self {
            counts: self.counts.iter().map(s).collect(),
            overlap: self
                .overlap
                .iter()
                .map(|r| r.iter().map(s).collect())
                .collect(),
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `shared / sqrt(n1 * n2)` computed from the reduced fraction
/// `shared^2 / (n1 n2)`, so common factors in the counts cancel exactly.
fn count_ratio(shared: u64, n1: u64, n2: u64) -> f64 {
    if shared == 0 {
        return 0.0;
    }
    let num = shared as u128 * shared as u128;
    let den = n1 as u128 * n2 as u128;
    let g = gcd(num, den);
    ((num / g) as f64 / (den / g) as f64).sqrt()
}

/// The `m K x m K` correlation matrix together with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteCorrelation {
    matrix: CorrelationMatrix,
    hypotheses: usize,
    analyses: usize,
}

impl CompleteCorrelation {
    /// Wraps an explicitly supplied matrix in analysis-major order.
    pub fn from_matrix(
        matrix: CorrelationMatrix,
        hypotheses: usize,
        analyses: usize,
    ) -> Result<Self> {
        if matrix.dim() != hypotheses * analyses {
            return Err(Error::DimensionMismatch {
                what: "complete correlation matrix".into(),
                expected: hypotheses * analyses,
                found: matrix.dim(),
            });
        }
        Ok(Self {
            matrix,
            hypotheses,
            analyses,
        })
    }

    pub fn matrix(&self) -> &CorrelationMatrix {
        &self.matrix
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    pub fn analyses(&self) -> usize {
        self.analyses
    }

    #[inline]
    pub fn index(&self, hypothesis: usize, analysis: usize) -> usize {
        analysis * self.hypotheses + hypothesis
    }

    pub fn corr(&self, i1: usize, k1: usize, i2: usize, k2: usize) -> f64 {
        self.matrix.get(self.index(i1, k1), self.index(i2, k2))
    }

    /// Statistics of `subset` through analysis `through` (one-based), ordered
    /// analysis-major then by subset member.
    pub fn subset(&self, subset: &SubsetIndex, through: usize) -> Result<CorrelationMatrix> {
        if through == 0 || through > self.analyses {
            return Err(Error::IndexOutOfRange {
                what: "analyses".into(),
                index: through,
                size: self.analyses,
            });
        }
        if let Some(&bad) = subset.members().iter().find(|&&j| j >= self.hypotheses) {
            return Err(Error::IndexOutOfRange {
                what: "hypotheses".into(),
                index: bad,
                size: self.hypotheses,
            });
        }
        let idx: Vec<usize> = (0..through)
            .flat_map(|k| subset.members().iter().map(move |&j| (j, k)))
            .map(|(j, k)| self.index(j, k))
            .collect();
        self.matrix.principal(&idx)
    }
}

pub fn build_ccs(events: &EventTable) -> Result<CompleteCorrelation> {
    let m = events.hypotheses();
    let k = events.analyses();
    let dim = m * k;
    let mut rows = vec![vec![0.0; dim]; dim];
    for k1 in 0..k {
        for i1 in 0..m {
            for k2 in 0..k {
                for i2 in 0..m {
                    let r = k1 * m + i1;
                    let c = k2 * m + i2;
                    rows[r][c] = if r == c {
                        1.0
                    } else {
                        count_ratio(
                            events.shared(i1, k1, i2, k2),
                            events.count(i1, k1),
                            events.count(i2, k2),
                        )
                    };
                }
            }
        }
    }
    CompleteCorrelation::from_matrix(CorrelationMatrix::new(rows)?, m, k)
}

/// Information fractions `t[j][k]` per hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSchedule {
    fractions: Vec<Vec<f64>>,
}

impl DesignSchedule {
    pub fn new(fractions: Vec<Vec<f64>>) -> Result<Self> {
        if fractions.is_empty() {
            return Err(Error::InvalidFractions("no hypotheses".into()));
        }
        let k = fractions[0].len();
        for (j, row) in fractions.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    what: format!("information fractions of hypothesis {}", j + 1),
                    expected: k,
                    found: row.len(),
                });
            }
            check_fractions(row)?;
        }
        Ok(Self { fractions })
    }

    /// Fractions implied by the within-hypothesis correlations,
    /// `Corr(Z_{j,k}, Z_{j,K})^2 = t[j][k]`.
    pub fn from_correlation(ccs: &CompleteCorrelation) -> Result<Self> {
        let last = ccs.analyses() - 1;
        let fractions = (0..ccs.hypotheses())
            .map(|j| {
                (0..=last)
                    .map(|k| {
                        if k == last {
                            1.0
                        } else {
                            ccs.corr(j, k, j, last).powi(2)
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(fractions)
    }

    pub fn hypotheses(&self) -> usize {
        self.fractions.len()
    }

    pub fn analyses(&self) -> usize {
        self.fractions[0].len()
    }

    pub fn fraction(&self, j: usize, k: usize) -> f64 {
        self.fractions[j][k]
    }

    pub fn fractions(&self, j: usize) -> &[f64] {
        &self.fractions[j]
    }

    /// Smallest fraction at analysis `k` (zero-based) across `subset`.
    pub fn min_fraction(&self, subset: &SubsetIndex, k: usize) -> f64 {
        subset
            .members()
            .iter()
            .map(|&j| self.fractions[j][k])
            .fold(f64::INFINITY, f64::min)
    }

    /// Within-hypothesis correlation `sqrt(t[j][k1] / t[j][k2])`, `k1 <= k2`.
    pub fn within_correlation(&self, j: usize, through: usize) -> Result<CorrelationMatrix> {
        let t = &self.fractions[j][..through];
        let rows = (0..through)
            .map(|a| {
                (0..through)
                    .map(|b| {
                        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                        (t[lo] / t[hi]).sqrt()
                    })
                    .collect()
            })
            .collect();
        CorrelationMatrix::new(rows)
    }
}

pub fn info_fractions(events: &EventTable) -> Result<DesignSchedule> {
    let last = events.analyses() - 1;
    let fractions = (0..events.hypotheses())
        .map(|j| {
            let total = events.count(j, last) as f64;
            (0..=last)
                .map(|k| events.count(j, k) as f64 / total)
                .collect()
        })
        .collect();
    DesignSchedule::new(fractions)
}
