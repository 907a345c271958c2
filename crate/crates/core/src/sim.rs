//! Monte Carlo operating characteristics of the closed procedure.
//!
//! Bounds of every intersection are solved once at level `alpha`; an
//! intersection is rejected by analysis `k` exactly when some member has
//! crossed its bound at an analysis up to `k`, which is the event
//! `p^seq_J <= alpha`. Each replication draws the `m K` statistics directly on
//! the z scale.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{bonferroni_bounds, wpgsd_bounds, BoundarySet, Method};
use crate::error::{Error, Result};
use crate::graph::enumerate_closure;
use crate::inference::Design;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub n_reps: usize,
    pub seed: u64,
    /// Mean of each statistic, `[analysis][hypothesis]`; all zero under the
    /// global null.
    pub effects: Vec<Vec<f64>>,
    pub method: Method,
    pub alpha: f64,
}

impl SimulationPlan {
    pub fn global_null(
        design: &Design,
        n_reps: usize,
        seed: u64,
        method: Method,
        alpha: f64,
    ) -> Self {
        Self {
            n_reps,
            seed,
            effects: vec![vec![0.0; design.hypotheses.len()]; design.analyses()],
            method,
            alpha,
        }
    }

    fn validate(&self, design: &Design) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::InvalidPlan(
                "at least one replication is needed".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidPlan(format!(
                "alpha {} is outside (0, 1)",
                self.alpha
            )));
        }
        if self.effects.len() != design.analyses() {
            return Err(Error::DimensionMismatch {
                what: "effect rows (analyses)".into(),
                expected: design.analyses(),
                found: self.effects.len(),
            });
        }
        for row in &self.effects {
            if row.len() != design.hypotheses.len() {
                return Err(Error::DimensionMismatch {
                    what: "effects per analysis".into(),
                    expected: design.hypotheses.len(),
                    found: row.len(),
                });
            }
            if row.iter().any(|e| !e.is_finite()) {
                return Err(Error::InvalidPlan(format!(
                    "effects must be finite: {row:?}"
                )));
            }
        }
        Ok(())
    }

    /// Hypotheses whose statistics have zero mean at every analysis.
    pub fn true_nulls(&self) -> Vec<usize> {
        let m = self.effects.first().map_or(0, Vec::len);
        (0..m)
            .filter(|&j| self.effects.iter().all(|row| row[j] == 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
}

impl Estimate {
    fn from_count(count: usize, n: usize) -> Self {
        let p = count as f64 / n as f64;
        Self {
            value: p,
            standard_error: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub n_reps: usize,
    pub seed: u64,
    pub method: Method,
    pub alpha: f64,
    pub true_nulls: Vec<usize>,
    /// Probability of rejecting at least one true null; `None` if there is none.
    pub fwer: Option<Estimate>,
    /// Rejection rate of each hypothesis by the last analysis.
    pub rejection_rates: Vec<Estimate>,
    /// Largest integration error bound met while solving bounds.
    pub max_error: f64,
}

/// Closed-test decisions from bounds solved at a fixed level.
#[derive(Debug, Clone)]
pub struct Decider {
    m: usize,
    sets: Vec<BoundarySet>,
}

impl Decider {
    pub fn new(design: &Design, method: Method, alpha: f64) -> Result<Self> {
        let closure = enumerate_closure(&design.hypotheses)?;
        let sets = closure
            .par_iter()
            .map(|s| {
                let w = design.strategy.subset_weights(s)?;
                match method {
                    Method::Bonferroni => bonferroni_bounds(
                        s,
                        alpha,
                        &w,
                        &design.schedule,
                        &design.spending,
                        &design.mvn,
                    ),
                    Method::Wpgsd => wpgsd_bounds(
                        s,
                        alpha,
                        &w,
                        &design.schedule,
                        &design.spending,
                        &design.correlation,
                        &design.mvn,
                    ),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            m: design.hypotheses.len(),
            sets,
        })
    }

    pub fn boundary_sets(&self) -> &[BoundarySet] {
        &self.sets
    }

    pub fn max_error(&self) -> f64 {
        self.sets.iter().map(|s| s.max_error).fold(0.0, f64::max)
    }

    /// Bit mask of hypotheses rejected by analysis `analysis` (one-based)
    /// given `z[k][j]`.
    pub fn rejections(&self, z: &[Vec<f64>], analysis: usize) -> u64 {
        let mut survivors = 0u64;
        for set in &self.sets {
            let crossed = set
                .subset
                .members()
                .iter()
                .enumerate()
                .any(|(p, &j)| (0..analysis).any(|k| z[k][j] >= set.bounds[p][k]));
            if !crossed {
                survivors |= set.subset.mask();
            }
        }
        ((1u64 << self.m) - 1) & !survivors
    }
}

/// Draws the statistics of one replication.
struct Sampler {
    chol: Vec<Vec<f64>>,
    m: usize,
    k: usize,
}

impl Sampler {
    fn draw(&self, rng: &mut ChaCha8Rng, effects: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let dim = self.m * self.k;
        let e: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let mut z = effects.to_vec();
        for (i, row) in self.chol.iter().enumerate() {
            let x: f64 = row[..=i].iter().zip(&e).map(|(a, b)| a * b).sum();
            z[i / self.m][i % self.m] += x;
        }
        z
    }
}

fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

pub fn simulate(design: &Design, plan: &SimulationPlan) -> Result<SimulationSummary> {
    plan.validate(design)?;
    let decider = Decider::new(design, plan.method, plan.alpha)?;
    let m = design.hypotheses.len();
    let k = design.analyses();
    let sampler = Sampler {
        chol: design.correlation.matrix().cholesky(),
        m,
        k,
    };
    let nulls = plan.true_nulls();
    let null_mask = nulls.iter().fold(0u64, |acc, &j| acc | 1 << j);
    let (false_rejections, per_hypothesis) = (0..plan.n_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(plan.seed, rep);
            let z = sampler.draw(&mut rng, &plan.effects);
            let rejected = decider.rejections(&z, k);
            let counts: Vec<usize> = (0..m).map(|j| (rejected >> j & 1) as usize).collect();
            (usize::from(rejected & null_mask != 0), counts)
        })
        .reduce(
            || (0, vec![0; m]),
            |(a, mut ca), (b, cb)| {
                for (x, y) in ca.iter_mut().zip(cb) {
                    *x += y;
                }
                (a + b, ca)
            },
        );
    Ok(SimulationSummary {
        n_reps: plan.n_reps,
        seed: plan.seed,
        method: plan.method,
        alpha: plan.alpha,
        fwer: (!nulls.is_empty()).then(|| Estimate::from_count(false_rejections, plan.n_reps)),
        true_nulls: nulls,
        rejection_rates: per_hypothesis
            .into_iter()
            .map(|c| Estimate::from_count(c, plan.n_reps))
            .collect(),
        max_error: decider.max_error(),
    })
}

/// Statistics of replication `rep` under `plan`, as drawn by [`simulate`].
pub fn replication_statistics(
    design: &Design,
    plan: &SimulationPlan,
    rep: usize,
) -> Result<Vec<Vec<f64>>> {
    plan.validate(design)?;
    let sampler = Sampler {
        chol: design.correlation.matrix().cholesky(),
        m: design.hypotheses.len(),
        k: design.analyses(),
    };
    Ok(sampler.draw(&mut replication_rng(plan.seed, rep), &plan.effects))
}
