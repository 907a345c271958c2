mod common;

use adjseq_core::correlation::{build_ccs, info_fractions, DesignSchedule, EventTable};
use adjseq_core::graph::SubsetIndex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn example_entries_and_fractions() {
    let events = common::three_arm_events();
    let ccs = build_ccs(&events).unwrap();
    assert!((ccs.corr(0, 0, 1, 0) - 80.0 / (100.0f64 * 110.0).sqrt()).abs() < 1e-15);
    assert!((ccs.corr(0, 0, 0, 1) - 0.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(ccs.corr(2, 0, 2, 0), 1.0);
    let schedule = info_fractions(&events).unwrap();
    for j in 0..3 {
        assert_eq!(schedule.fractions(j), &[0.5, 1.0]);
    }
}

#[test]
fn subset_blocks() {
    let ccs = build_ccs(&common::three_arm_events()).unwrap();
    let top = ccs.subset(&SubsetIndex::new(0..3).unwrap(), 1).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            assert_eq!(top.get(a, b), ccs.corr(a, 0, b, 0));
        }
    }
    let within = ccs.subset(&SubsetIndex::singleton(1), 2).unwrap();
    assert!((within.get(0, 1) - 0.5f64.sqrt()).abs() < 1e-15);
    let one = ccs.subset(&SubsetIndex::singleton(0), 1).unwrap();
    assert_eq!(one.dim(), 1);
    assert_eq!(one.get(0, 0), 1.0);
}

#[test]
fn single_analysis_and_simple_ratio() {
    let single = EventTable::new(vec![vec![40], vec![60]], &[(0, 1, vec![40])]).unwrap();
    assert_eq!(info_fractions(&single).unwrap().fractions(0), &[1.0]);
    let two = EventTable::new(vec![vec![80, 160]], &[]).unwrap();
    assert_eq!(info_fractions(&two).unwrap().fractions(0), &[0.5, 1.0]);
}

#[test]
fn fractions_recovered_from_correlation() {
    let ccs = build_ccs(&common::three_arm_events()).unwrap();
    let schedule = DesignSchedule::from_correlation(&ccs).unwrap();
    for j in 0..3 {
        assert!((schedule.fraction(j, 0) - 0.5).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn scale_invariant_and_well_formed(seed in any::<u64>(), m in 1usize..=4, k in 1usize..=3, factor in 2u64..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let events = common::random::events(&mut rng, m, k);
        let ccs = build_ccs(&events).unwrap();
        let scaled = build_ccs(&events.scaled(factor)).unwrap();
        prop_assert_eq!(ccs.matrix().rows(), scaled.matrix().rows());
        let schedule = info_fractions(&events).unwrap();
        for i1 in 0..m {
            for k1 in 0..k {
                for i2 in 0..m {
                    for k2 in 0..k {
                        let c = ccs.corr(i1, k1, i2, k2);
                        prop_assert!(c > 0.0 || events.shared(i1, k1, i2, k2) == 0);
                        prop_assert!(c <= 1.0);
                        if i1 == i2 {
                            let (lo, hi) = (k1.min(k2), k1.max(k2));
                            let ratio = (schedule.fraction(i1, lo) / schedule.fraction(i1, hi)).sqrt();
                            prop_assert!((c - ratio).abs() <= 1e-12);
                        }
                    }
                }
            }
        }
        prop_assert!(ccs.matrix().min_eigenvalue() > -1e-9);
    }
}
