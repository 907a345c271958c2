mod common;

use adjseq_core::boundary::{bonferroni_bounds, crossing_probability, wpgsd_bounds};
use adjseq_core::correlation::{build_ccs, info_fractions, DesignSchedule};
use adjseq_core::graph::SubsetIndex;
use adjseq_core::mvn::MvnSettings;
use adjseq_core::normal::{normal_cdf, normal_pdf, normal_quantile, normal_sf};
use adjseq_core::spending::{cumulative_spend, SpendingSpec};

const HSD4: SpendingSpec = SpendingSpec::Hsd { gamma: -4.0 };

fn example() -> (
    DesignSchedule,
    adjseq_core::correlation::CompleteCorrelation,
) {
    let events = common::three_arm_events();
    (
        info_fractions(&events).unwrap(),
        build_ccs(&events).unwrap(),
    )
}

/// `P(Z1 < b1, Z2 >= b2)` for standard normals with correlation `r`, by
/// Simpson's rule over `Z1`.
fn below_then_above(b1: f64, b2: f64, r: f64) -> f64 {
    let lo = -9.0;
    let n = 4000;
    let h = (b1 - lo) / n as f64;
    let s = (1.0 - r * r).sqrt();
    let f = |x: f64| normal_pdf(x) * normal_sf((b2 - r * x) / s);
    let mut acc = f(lo) + f(b1);
    for i in 1..n {
        acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn first_bound_matches_table_nominal_level() {
    let (schedule, _) = example();
    let set = bonferroni_bounds(
        &SubsetIndex::singleton(1),
        0.0839,
        &[1.0],
        &schedule,
        &HSD4,
        &MvnSettings::default(),
    )
    .unwrap();
    let want = normal_quantile(1.0 - 0.0839 * 0.119202922).unwrap();
    assert!((set.bounds[0][0] - want).abs() < 1e-9);
    assert!((set.bounds[0][0] - normal_quantile(0.99).unwrap()).abs() < 5e-4);
}

#[test]
fn second_bound_against_quadrature() {
    let (schedule, _) = example();
    for (w, mu) in [(1.0, 0.025), (0.3, 0.1), (0.5, 0.6)] {
        let set = bonferroni_bounds(
            &SubsetIndex::singleton(0),
            mu,
            &[w],
            &schedule,
            &HSD4,
            &MvnSettings::default(),
        )
        .unwrap();
        let level = w * mu;
        let first = cumulative_spend(&HSD4, 0.5, level).unwrap();
        let (b1, b2) = (set.bounds[0][0], set.bounds[0][1]);
        assert!((normal_sf(b1) - first).abs() < 1e-14);
        let spent = below_then_above(b1, b2, 0.5f64.sqrt());
        assert!(
            (spent - (level - first)).abs() < 1e-9,
            "{spent} vs {}",
            level - first
        );
    }
}

#[test]
fn single_analysis_is_fixed_design() {
    let schedule = DesignSchedule::new(vec![vec![1.0], vec![1.0]]).unwrap();
    let subset = SubsetIndex::new([0, 1]).unwrap();
    let set = bonferroni_bounds(
        &subset,
        0.05,
        &[0.4, 0.6],
        &schedule,
        &HSD4,
        &MvnSettings::default(),
    )
    .unwrap();
    assert!((normal_cdf(-set.bounds[0][0]) - 0.02).abs() < 1e-15);
    assert!((normal_cdf(-set.bounds[1][0]) - 0.03).abs() < 1e-15);
}

#[test]
fn singleton_methods_agree() {
    let (schedule, ccs) = example();
    let s = MvnSettings::default();
    for j in 0..3 {
        let subset = SubsetIndex::singleton(j);
        let b = bonferroni_bounds(&subset, 0.025, &[1.0], &schedule, &HSD4, &s).unwrap();
        let w = wpgsd_bounds(&subset, 0.025, &[1.0], &schedule, &HSD4, &ccs, &s).unwrap();
        for k in 0..2 {
            assert!((b.bounds[0][k] - w.bounds[0][k]).abs() < 1e-7);
        }
    }
}

#[test]
fn correlated_bounds_are_lower_and_spend_exactly() {
    let (schedule, ccs) = example();
    let s = MvnSettings::default();
    let full = SubsetIndex::new(0..3).unwrap();
    let w = [0.3, 0.3, 0.4];
    let b = bonferroni_bounds(&full, 0.025, &w, &schedule, &HSD4, &s).unwrap();
    let p = wpgsd_bounds(&full, 0.025, &w, &schedule, &HSD4, &ccs, &s).unwrap();
    for j in 0..3 {
        for k in 0..2 {
            assert!(p.bounds[j][k] < b.bounds[j][k]);
        }
        // inflation above one at the first analysis
        assert!(p.nominal[j][0] > w[j] * cumulative_spend(&HSD4, 0.5, 0.025).unwrap());
    }
    for k in 1..=2 {
        let target = cumulative_spend(&HSD4, schedule.min_fraction(&full, k - 1), 0.025).unwrap();
        let got = crossing_probability(&p, &ccs, k, &s).unwrap();
        assert!(
            (got.value - target).abs() <= 5e-7 + got.error_bound,
            "analysis {k}: {} vs {target}",
            got.value
        );
    }
}

#[test]
fn bounds_fall_as_level_rises() {
    let (schedule, ccs) = example();
    let s = MvnSettings::default();
    let pair = SubsetIndex::new([0, 2]).unwrap();
    let w = [3.0 / 7.0, 4.0 / 7.0];
    for mu in [0.01, 0.05, 0.2] {
        let a = wpgsd_bounds(&pair, mu, &w, &schedule, &HSD4, &ccs, &s).unwrap();
        let b = wpgsd_bounds(&pair, 2.0 * mu, &w, &schedule, &HSD4, &ccs, &s).unwrap();
        let c = bonferroni_bounds(&pair, mu, &w, &schedule, &HSD4, &s).unwrap();
        let d = bonferroni_bounds(&pair, 2.0 * mu, &w, &schedule, &HSD4, &s).unwrap();
        for p in 0..2 {
            for k in 0..2 {
                assert!(b.bounds[p][k] < a.bounds[p][k]);
                assert!(d.bounds[p][k] < c.bounds[p][k]);
            }
        }
    }
}
