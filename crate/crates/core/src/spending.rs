//! Cumulative alpha-spending over information fractions.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// A cumulative spending function `f(t; level)` with `f(1; level) = level`.
pub trait SpendingFunction {
    /// Cumulative spend at information fraction `t` without argument checks.
    fn spend_unchecked(&self, t: f64, level: f64) -> f64;
}

/// Supported spending families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SpendingSpec {
    /// Hwang-Shih-DeCani: `level * (1 - exp(-gamma t)) / (1 - exp(-gamma))`.
    Hsd { gamma: f64 },
}

impl SpendingSpec {
    pub fn hsd(gamma: f64) -> Result<Self> {
        let spec = SpendingSpec::Hsd { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpendingSpec::Hsd { gamma } => {
                if !gamma.is_finite() || gamma == 0.0 {
                    return Err(Error::InvalidSpending(format!(
                        "HSD gamma must be finite and non-zero, got {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl SpendingFunction for SpendingSpec {
    fn spend_unchecked(&self, t: f64, level: f64) -> f64 {
        match *self {
            SpendingSpec::Hsd { gamma } => {
                if t >= 1.0 {
                    return level;
                }
                level * ((-gamma * t).exp_m1() / (-gamma).exp_m1())
            }
        }
    }
}

/// Level spent by information fraction `t`.
pub fn cumulative_spend(spec: &SpendingSpec, t: f64, level: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::OutOfRange {
            what: "information fraction".into(),
            range: "(0, 1]",
            value: t,
        });
    }
    check_probability("spending level", level)?;
    spec.validate()?;
    Ok(spec.spend_unchecked(t, level).clamp(0.0, level))
}

/// Strictly increasing, ending at exactly 1.
pub fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::InvalidFractions("no analyses".into()));
    }
    let mut prev = 0.0;
    for &t in fractions {
        if !(t > prev && t <= 1.0) {
            return Err(Error::InvalidFractions(format!("{fractions:?}")));
        }
        prev = t;
    }
    if *fractions.last().expect("non-empty") != 1.0 {
        return Err(Error::InvalidFractions(format!(
            "{fractions:?} does not end at 1"
        )));
    }
    Ok(())
}

/// Per-analysis increments of the cumulative spend. The last increment closes
/// the gap to `level` so the increments sum to it exactly.
pub fn spend_increments(spec: &SpendingSpec, fractions: &[f64], level: f64) -> Result<Vec<f64>> {
    check_fractions(fractions)?;
    check_probability("spending level", level)?;
    spec.validate()?;
    let cumulative: Vec<f64> = fractions
        .iter()
        .map(|&t| spec.spend_unchecked(t, level).clamp(0.0, level))
        .collect();
    Ok(increments_from_cumulative(&cumulative, level))
}

pub(crate) fn increments_from_cumulative(cumulative: &[f64], level: f64) -> Vec<f64> {
    let k = cumulative.len();
    let mut out = Vec::with_capacity(k);
    let mut prev = 0.0;
    for (i, &c) in cumulative.iter().enumerate() {
        let c = if i + 1 == k { level } else { c };
        out.push((c - prev).max(0.0));
        prev = c;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HSD4: SpendingSpec = SpendingSpec::Hsd { gamma: -4.0 };

    #[test]
    fn hsd_half_information() {
        // (1 - e^2) / (1 - e^4) = 1 / (1 + e^2)
        let expected = 1.0 / (1.0 + 2f64.exp());
        let got = cumulative_spend(&HSD4, 0.5, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.1192029).abs() < 1e-7);
        assert!((0.01 / got - 0.0839).abs() < 5e-5);
    }

    #[test]
    fn full_spend_and_zero_level() {
        assert_eq!(cumulative_spend(&HSD4, 1.0, 0.025).unwrap(), 0.025);
        for t in [0.1, 0.5, 0.9, 1.0] {
            assert_eq!(cumulative_spend(&HSD4, t, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn argument_errors() {
        assert!(cumulative_spend(&HSD4, 0.0, 0.025).is_err());
        assert!(cumulative_spend(&HSD4, 1.01, 0.025).is_err());
        assert!(cumulative_spend(&HSD4, 0.5, 1.5).is_err());
        assert!(SpendingSpec::hsd(0.0).is_err());
        assert!(SpendingSpec::hsd(f64::NAN).is_err());
        assert!(spend_increments(&HSD4, &[0.5, 0.5, 1.0], 0.025).is_err());
        assert!(spend_increments(&HSD4, &[0.5, 0.9], 0.025).is_err());
    }

    #[test]
    fn increments() {
        let inc = spend_increments(&HSD4, &[0.5, 1.0], 0.3).unwrap();
        let first = 0.3 / (1.0 + 2f64.exp());
        assert!((inc[0] - first).abs() < 1e-16);
        assert!((inc[0] + inc[1] - 0.3).abs() <= f64::EPSILON * 0.3);
        assert_eq!(spend_increments(&HSD4, &[1.0], 0.025).unwrap(), vec![0.025]);
        let inc = spend_increments(&HSD4, &[0.25, 0.5, 1.0], 0.025).unwrap();
        assert!(inc.iter().all(|&x| x > 0.0));
        assert!((inc.iter().sum::<f64>() - 0.025).abs() < 1e-17);
    }

    #[test]
    fn positive_gamma_is_increasing_too() {
        let s = SpendingSpec::hsd(2.0).unwrap();
        let a = cumulative_spend(&s, 0.3, 0.05).unwrap();
        let b = cumulative_spend(&s, 0.6, 0.05).unwrap();
        assert!(0.0 < a && a < b && b < 0.05);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_and_linear(gamma in -8.0f64..8.0, t1 in 0.01f64..1.0, dt in 0.001f64..0.5,
                                   level in 0.001f64..1.0, c in 0.0f64..1.0) {
                prop_assume!(gamma.abs() > 1e-3);
                let s = SpendingSpec::hsd(gamma).unwrap();
                let t2 = (t1 + dt).min(1.0);
                prop_assume!(t2 > t1);
                let a = cumulative_spend(&s, t1, level).unwrap();
                let b = cumulative_spend(&s, t2, level).unwrap();
                prop_assert!(a < b);
                prop_assert!(a >= 0.0 && b <= level);
                let scaled = cumulative_spend(&s, t1, c * level).unwrap();
                prop_assert!((scaled - c * a).abs() <= 1e-15 * level.max(1.0));
            }
        }
    }
}
