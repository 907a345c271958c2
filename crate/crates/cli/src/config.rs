//! Run configuration: a JSON document (TOML also accepted) describing the
//! design, the observed statistics and numerical settings.

use std::path::Path;

use adjseq_core::boundary::Method;
use adjseq_core::correlation::{
    build_ccs, info_fractions, CompleteCorrelation, DesignSchedule, EventTable,
};
use adjseq_core::graph::{validate_strategy, HypothesisSet, StrategySpec};
use adjseq_core::inference::{Design, ObservedStatistics};
use adjseq_core::mvn::{CorrelationMatrix, MvnSettings};
use adjseq_core::spending::SpendingSpec;
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    pub hypotheses: Vec<String>,
    pub weighting: WeightingConfig,
    pub spending: SpendingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<EventsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationConfig>,
    /// One entry per analysis held so far, in order.
    #[serde(default)]
    pub observed: Vec<AnalysisData>,
    #[serde(default)]
    pub mvn: MvnSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn default_method() -> Method {
    Method::Wpgsd
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// A probability written as a decimal or as a ratio such as `"3/7"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Text(String),
}

impl Number {
    pub fn value(&self) -> Result<f64> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Text(s) => {
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| anyhow!("cannot read {s:?} as a number"))
                };
                match s.split_once('/') {
                    Some((a, b)) => {
                        let d = parse(b)?;
                        if d == 0.0 {
                            bail!("zero denominator in {s:?}");
                        }
                        Ok(parse(a)? / d)
                    }
                    None => parse(s),
                }
            }
        }
    }
}

fn values(xs: &[Number], path: &str) -> Result<Vec<f64>> {
    xs.iter()
        .enumerate()
        .map(|(i, x)| x.value().with_context(|| format!("{path}[{i}]")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_weights: Option<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<Vec<Number>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset_weights: Option<Vec<SubsetWeights>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetWeights {
    /// Hypothesis labels.
    pub subset: Vec<String>,
    pub weights: Vec<Number>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsConfig {
    /// `counts[j][k]`: events of hypothesis `j` by analysis `k`.
    pub counts: Vec<Vec<u64>>,
    pub overlaps: Vec<Overlap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overlap {
    pub pair: [String; 2],
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    /// Row-major over statistics ordered analysis by analysis.
    pub matrix: Vec<Vec<f64>>,
    /// `fractions[j][k]`; taken from the matrix when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<Vec<Number>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisData {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Mean of each statistic, `[analysis][hypothesis]`; global null if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effects: Option<Vec<Vec<f64>>>,
}

/// A parsed configuration and the hex SHA-256 of the bytes it came from.
#[derive(Debug, Clone)]
pub struct Source {
    pub config: RunConfig,
    pub digest: String,
}

impl Source {
    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        Self::parse(&text, is_toml).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str, is_toml: bool) -> Result<Self> {
        let config: RunConfig = if is_toml {
            toml::from_str(text)?
        } else {
            serde_json::from_str(text)?
        };
        Ok(Self {
            config,
            digest: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }
}

/// Everything the commands need, validated.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub design: Design,
    pub events: Option<EventTable>,
    pub data: ObservedStatistics,
    /// Number of analyses with at least one statistic.
    pub observed_analyses: usize,
}

impl RunConfig {
    pub fn load(self) -> Result<Loaded> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha: {} is outside (0, 1)", self.alpha);
        }
        if !(self.mvn.tol > 0.0) {
            bail!("mvn.tol: must be positive, got {}", self.mvn.tol);
        }
        let hyps = HypothesisSet::new(self.hypotheses.iter().cloned()).context("hypotheses")?;
        let m = hyps.len();
        let strategy = self.strategy(&hyps).context("weighting")?;
        let strategy = validate_strategy(&strategy, &hyps).context("weighting")?;
        self.spending.validate().context("spending")?;

        let (events, correlation, schedule) = match (&self.events, &self.correlation) {
            (Some(ev), None) => {
                let table = self.event_table(ev, &hyps)?;
                let ccs = build_ccs(&table).context("events")?;
                let schedule = info_fractions(&table).context("events")?;
                (Some(table), ccs, schedule)
            }
            (None, Some(c)) => {
                let (ccs, schedule) = correlation_input(c, m).context("correlation")?;
                (None, ccs, schedule)
            }
            _ => bail!("give exactly one of `events` and `correlation`"),
        };
        let k = schedule.analyses();
        let design = Design::new(
            hyps,
            strategy,
            schedule,
            correlation,
            self.spending,
            self.mvn,
        )?;
        let (data, observed_analyses) = self.statistics(m, k)?;
        Ok(Loaded {
            config: self,
            design,
            events,
            data,
            observed_analyses,
        })
    }

    fn strategy(&self, hyps: &HypothesisSet) -> Result<StrategySpec> {
        let m = hyps.len();
        let w = &self.weighting;
        let subset_weights = match &w.subset_weights {
            None => None,
            Some(entries) => Some(
                entries
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        let path = format!("subset_weights[{i}]");
                        let members = e
                            .subset
                            .iter()
                            .map(|l| {
                                hyps.index_of(l).ok_or_else(|| {
                                    anyhow!("{path}.subset: unknown hypothesis {l:?}")
                                })
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok((members, values(&e.weights, &format!("{path}.weights"))?))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let initial = match (&w.initial_weights, &subset_weights) {
            (Some(x), _) => values(x, "initial_weights")?,
            (None, Some(entries)) => {
                let full: Vec<usize> = (0..m).collect();
                let (members, weights) = entries
                    .iter()
                    .find(|(s, _)| {
                        let mut s = s.clone();
                        s.sort_unstable();
                        s == full
                    })
                    .ok_or_else(|| anyhow!("subset_weights: no entry for the full intersection"))?;
                let mut out = vec![0.0; m];
                for (&j, &x) in members.iter().zip(weights) {
                    out[j] = x;
                }
                out
            }
            (None, None) => bail!("initial_weights: required unless subset_weights is given"),
        };
        let transition = match &w.transition {
            Some(rows) => rows
                .iter()
                .enumerate()
                .map(|(i, r)| values(r, &format!("transition[{i}]")))
                .collect::<Result<Vec<_>>>()?,
            None if subset_weights.is_some() => vec![vec![0.0; m]; m],
            None => bail!("transition: required unless subset_weights is given"),
        };
        Ok(StrategySpec {
            initial_weights: initial,
            transition,
            subset_weights,
        })
    }

    fn event_table(&self, ev: &EventsConfig, hyps: &HypothesisSet) -> Result<EventTable> {
        let m = hyps.len();
        if ev.counts.len() != m {
            bail!(
                "events.counts: expected {m} rows, one per hypothesis, found {}",
                ev.counts.len()
            );
        }
        let mut overlaps = Vec::with_capacity(ev.overlaps.len());
        for (i, o) in ev.overlaps.iter().enumerate() {
            let path = format!("events.overlaps[{i}]");
            let idx = |l: &String| {
                hyps.index_of(l)
                    .ok_or_else(|| anyhow!("{path}.pair: unknown hypothesis {l:?}"))
            };
            let (a, b) = (idx(&o.pair[0])?, idx(&o.pair[1])?);
            for (k, &c) in o.counts.iter().enumerate() {
                for h in [a, b] {
                    if let Some(&n) = ev.counts[h].get(k) {
                        if c > n {
                            bail!(
                                "{path}.counts[{k}]: {c} shared events exceed the {n} events of {}",
                                hyps.label(h)
                            );
                        }
                    }
                }
            }
            overlaps.push((a, b, o.counts.clone()));
        }
        EventTable::new(ev.counts.clone(), &overlaps).context("events")
    }

    fn statistics(&self, m: usize, k: usize) -> Result<(ObservedStatistics, usize)> {
        if self.observed.len() > k {
            bail!(
                "observed: {} analyses given but the design has {k}",
                self.observed.len()
            );
        }
        let mut data = ObservedStatistics::empty(m, k);
        let mut seen = 0;
        for (a, entry) in self.observed.iter().enumerate() {
            let path = format!("observed[{a}]");
            let (row, is_p) = match (&entry.p, &entry.z) {
                (Some(p), None) => (p, true),
                (None, Some(z)) => (z, false),
                _ => bail!("{path}: give exactly one of `p` and `z`"),
            };
            if row.len() != m {
                bail!("{path}: expected {m} values, found {}", row.len());
            }
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = *v {
                    let set = if is_p {
                        data.set_p(j, a + 1, v)
                    } else {
                        data.set_z(j, a + 1, v)
                    };
                    set.with_context(|| format!("{path}.{}[{j}]", if is_p { "p" } else { "z" }))?;
                    seen = a + 1;
                }
            }
        }
        Ok((data, seen))
    }
}

fn correlation_input(
    c: &CorrelationConfig,
    m: usize,
) -> Result<(CompleteCorrelation, DesignSchedule)> {
    let dim = c.matrix.len();
    if dim == 0 || !dim.is_multiple_of(m) {
        bail!("matrix: {dim} rows is not a multiple of {m} hypotheses");
    }
    let matrix = CorrelationMatrix::new(c.matrix.clone()).context("matrix")?;
    let ccs = CompleteCorrelation::from_matrix(matrix, m, dim / m).context("matrix")?;
    let schedule = match &c.fractions {
        Some(rows) => DesignSchedule::new(
            rows.iter()
                .enumerate()
                .map(|(j, r)| values(r, &format!("fractions[{j}]")))
                .collect::<Result<Vec<_>>>()?,
        )
        .context("fractions")?,
        None => {
            DesignSchedule::from_correlation(&ccs).context("fractions implied by the matrix")?
        }
    };
    Ok((ccs, schedule))
}
