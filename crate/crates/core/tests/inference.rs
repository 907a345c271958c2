mod common;

use adjseq_core::boundary::Method;
use adjseq_core::correlation::{build_ccs, info_fractions, EventTable};
use adjseq_core::graph::{validate_strategy, HypothesisSet, StrategySpec, SubsetIndex};
use adjseq_core::inference::{
    adjusted_sequential_p, bonferroni_shortcut, closed_test_report, closed_test_sequence,
    repeated_p_value, sequential_p_elementary, sequential_p_intersection, Design,
    ObservedStatistics,
};
use adjseq_core::mvn::MvnSettings;
use adjseq_core::spending::{cumulative_spend, SpendingSpec};
use adjseq_core::Error;
use common::{three_arm_data, three_arm_design};

const ALPHA: f64 = 0.025;
const HSD4: SpendingSpec = SpendingSpec::Hsd { gamma: -4.0 };

fn first_look() -> f64 {
    cumulative_spend(&HSD4, 0.5, 1.0).unwrap()
}

#[test]
fn interim_closed_forms() {
    let design = three_arm_design();
    let data = ObservedStatistics::from_p(vec![
        vec![Some(0.02), Some(0.01), Some(0.012)],
        vec![None, None, None],
    ])
    .unwrap();
    let pair = SubsetIndex::new([0, 1]).unwrap();
    let p = sequential_p_intersection(&design, &data, &pair, 1, Method::Bonferroni)
        .unwrap()
        .value;
    let want = 0.01 / (0.5 * first_look());
    assert!((p - want).abs() < 2e-6, "{p} vs {want}");
    assert!((p - 0.1678).abs() < 5e-5);
    let single = sequential_p_elementary(&design, &data, 1, 1, Method::Bonferroni)
        .unwrap()
        .value;
    assert!((single - 0.01 / first_look()).abs() < 2e-6);
    assert!((single - 0.0839).abs() < 5e-5);
    let repeated = repeated_p_value(&design, &data, 1, 1).unwrap().value;
    assert!((repeated - single).abs() < 2e-6);
}

#[test]
fn interim_column() {
    let design = three_arm_design();
    let data = three_arm_data();
    let full = SubsetIndex::new(0..3).unwrap();
    let b = sequential_p_intersection(&design, &data, &full, 1, Method::Bonferroni)
        .unwrap()
        .value;
    assert!((b - 0.01 / (0.4 * first_look())).abs() < 2e-6);
    let w = sequential_p_intersection(&design, &data, &full, 1, Method::Wpgsd)
        .unwrap()
        .value;
    assert!((w - 0.1636).abs() < 5e-4);
    let r = closed_test_report(&design, &data, 1, ALPHA, Method::Wpgsd).unwrap();
    assert!(r.rejected.is_empty());
}

#[test]
fn final_column() {
    let design = three_arm_design();
    let data = three_arm_data();
    let h3 = sequential_p_elementary(&design, &data, 2, 2, Method::Bonferroni)
        .unwrap()
        .value;
    assert!((h3 - 0.0106).abs() < 5e-4);
    let a = adjusted_sequential_p(&design, &data, 0, 2, Method::Bonferroni).unwrap();
    assert!((a.value - 0.0266).abs() < 5e-5);
    assert_eq!(a.attained_by, SubsetIndex::new(0..3).unwrap());
    let a = adjusted_sequential_p(&design, &data, 2, 2, Method::Wpgsd).unwrap();
    assert!((a.value - 0.0206).abs() < 1e-3);
    assert_eq!(a.attained_by, SubsetIndex::new(0..3).unwrap());
    assert!(bonferroni_shortcut(&design, &data, 2, ALPHA)
        .unwrap()
        .is_empty());
}

#[test]
fn rejections_carry_forward() {
    let design = three_arm_design();
    // H3 crosses at the interim and then drifts back
    let data = ObservedStatistics::from_p(vec![
        vec![Some(0.3), Some(0.3), Some(0.0001)],
        vec![Some(0.4), Some(0.4), Some(0.2)],
    ])
    .unwrap();
    let reports = closed_test_sequence(&design, &data, 2, ALPHA, Method::Bonferroni).unwrap();
    assert_eq!(reports[0].rejected, vec![2]);
    assert_eq!(reports[1].rejected_earlier, vec![2]);
    assert_eq!(reports[1].cumulative_rejections(), vec![2]);
    // the sequential p-value keeps the interim crossing
    assert!(reports[1].hypotheses[2].adjusted_p <= ALPHA);
    let repeated = repeated_p_value(&design, &data, 2, 2).unwrap().value;
    assert!(repeated > 0.1);
}

fn one_hypothesis(k_fractions: &[u64]) -> Design {
    let hyps = HypothesisSet::numbered(1).unwrap();
    let spec = StrategySpec {
        initial_weights: vec![1.0],
        transition: vec![vec![0.0]],
        subset_weights: None,
    };
    let events = EventTable::new(vec![k_fractions.to_vec()], &[]).unwrap();
    Design::new(
        hyps.clone(),
        validate_strategy(&spec, &hyps).unwrap(),
        info_fractions(&events).unwrap(),
        build_ccs(&events).unwrap(),
        HSD4,
        MvnSettings::default(),
    )
    .unwrap()
}

#[test]
fn single_hypothesis_fixed_design() {
    let design = one_hypothesis(&[300]);
    for p in [0.001, 0.024, 0.025, 0.3] {
        let data = ObservedStatistics::from_p(vec![vec![Some(p)]]).unwrap();
        let seq = sequential_p_elementary(&design, &data, 0, 1, Method::Bonferroni)
            .unwrap()
            .value;
        assert!((seq - p).abs() < 2e-6);
        let rep = repeated_p_value(&design, &data, 0, 1).unwrap().value;
        assert!((rep - p).abs() < 2e-6);
        let adj = adjusted_sequential_p(&design, &data, 0, 1, Method::Wpgsd).unwrap();
        assert!((adj.value - seq).abs() < 2e-6);
        let short = bonferroni_shortcut(&design, &data, 1, ALPHA).unwrap();
        assert_eq!(short.is_empty(), seq > ALPHA);
    }
}

#[test]
fn never_rejectable_is_one() {
    // the bound at level 1 - 1e-10 is about -6.4
    let design = one_hypothesis(&[200]);
    let data = ObservedStatistics::from_z(vec![vec![Some(-8.0)]]).unwrap();
    assert_eq!(
        sequential_p_elementary(&design, &data, 0, 1, Method::Wpgsd)
            .unwrap()
            .value,
        1.0
    );
    let data = ObservedStatistics::from_z(vec![vec![Some(-6.0)]]).unwrap();
    assert!(
        sequential_p_elementary(&design, &data, 0, 1, Method::Wpgsd)
            .unwrap()
            .value
            < 1.0
    );
}

#[test]
fn argument_errors() {
    let design = three_arm_design();
    let data = three_arm_data();
    assert!(closed_test_report(&design, &data, 0, ALPHA, Method::Bonferroni).is_err());
    assert!(closed_test_report(&design, &data, 3, ALPHA, Method::Bonferroni).is_err());
    assert!(closed_test_report(&design, &data, 1, 1.0, Method::Bonferroni).is_err());
    let partial = ObservedStatistics::from_p(vec![
        vec![Some(0.01), None, Some(0.01)],
        vec![None, None, None],
    ])
    .unwrap();
    let err = closed_test_report(&design, &partial, 1, ALPHA, Method::Bonferroni).unwrap_err();
    assert!(matches!(err, Error::MissingStatistic { .. }), "{err}");
    assert!(ObservedStatistics::from_p(vec![vec![Some(1.5), None, None]]).is_err());

    let hyps = HypothesisSet::numbered(2).unwrap();
    let spec = StrategySpec {
        initial_weights: vec![0.5, 0.5],
        transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        subset_weights: Some(vec![
            (vec![0, 1], vec![0.5, 0.5]),
            (vec![0], vec![1.0]),
            (vec![1], vec![1.0]),
        ]),
    };
    let events = EventTable::new(vec![vec![50], vec![60]], &[(0, 1, vec![30])]).unwrap();
    let design = Design::new(
        hyps.clone(),
        validate_strategy(&spec, &hyps).unwrap(),
        info_fractions(&events).unwrap(),
        build_ccs(&events).unwrap(),
        HSD4,
        MvnSettings::default(),
    )
    .unwrap();
    let data = ObservedStatistics::from_p(vec![vec![Some(0.01), Some(0.01)]]).unwrap();
    assert!(bonferroni_shortcut(&design, &data, 1, ALPHA).is_err());
}
