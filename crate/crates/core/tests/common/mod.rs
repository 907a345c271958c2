#![allow(dead_code)]

use adjseq_core::correlation::{build_ccs, info_fractions, EventTable};
use adjseq_core::graph::{validate_strategy, HypothesisSet, StrategySpec};
use adjseq_core::inference::{Design, ObservedStatistics};
use adjseq_core::mvn::MvnSettings;
use adjseq_core::spending::SpendingSpec;

pub fn three_arm_events() -> EventTable {
    EventTable::new(
        vec![vec![100, 200], vec![110, 220], vec![225, 450]],
        &[
            (0, 1, vec![80, 160]),
            (0, 2, vec![100, 200]),
            (1, 2, vec![110, 220]),
        ],
    )
    .unwrap()
}

pub fn three_arm_strategy() -> StrategySpec {
    StrategySpec {
        initial_weights: vec![0.3, 0.3, 0.4],
        transition: vec![
            vec![0.0, 3.0 / 7.0, 4.0 / 7.0],
            vec![3.0 / 7.0, 0.0, 4.0 / 7.0],
            vec![0.5, 0.5, 0.0],
        ],
        subset_weights: None,
    }
}

pub fn three_arm_design() -> Design {
    let hyps = HypothesisSet::numbered(3).unwrap();
    let strategy = validate_strategy(&three_arm_strategy(), &hyps).unwrap();
    let events = three_arm_events();
    Design::new(
        hyps,
        strategy,
        info_fractions(&events).unwrap(),
        build_ccs(&events).unwrap(),
        SpendingSpec::Hsd { gamma: -4.0 },
        MvnSettings::default(),
    )
    .unwrap()
}

pub fn three_arm_data() -> ObservedStatistics {
    ObservedStatistics::from_p(vec![
        vec![Some(0.015), Some(0.010), Some(0.010)],
        vec![Some(0.015), Some(0.012), Some(0.010)],
    ])
    .unwrap()
}

pub mod random {
    use adjseq_core::correlation::{build_ccs, info_fractions, EventTable};
    use adjseq_core::graph::{validate_strategy, HypothesisSet, StrategySpec};
    use adjseq_core::inference::{Design, ObservedStatistics};
    use adjseq_core::mvn::MvnSettings;
    use adjseq_core::spending::SpendingSpec;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Events from `cells` disjoint patient groups; each hypothesis covers a
    /// distinct non-empty union of cells, so the overlaps are consistent.
    pub fn events<R: Rng>(rng: &mut R, m: usize, k: usize) -> EventTable {
        let cells = 3.max(m);
        let mut counts = vec![vec![0u64; k]; cells];
        for row in &mut counts {
            let mut total = 0;
            for c in row.iter_mut() {
                total += rng.random_range(10..60);
                *c = total;
            }
        }
        let mut masks: Vec<u32> = (1..(1u32 << cells)).collect();
        masks.shuffle(rng);
        masks.truncate(m);
        let sum = |mask: u32, a: usize| -> u64 {
            (0..cells)
                .filter(|c| mask >> c & 1 == 1)
                .map(|c| counts[c][a])
                .sum()
        };
        let table: Vec<Vec<u64>> = masks
            .iter()
            .map(|&s| (0..k).map(|a| sum(s, a)).collect())
            .collect();
        let mut overlaps = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                overlaps.push((i, j, (0..k).map(|a| sum(masks[i] & masks[j], a)).collect()));
            }
        }
        EventTable::new(table, &overlaps).unwrap()
    }

    pub fn strategy<R: Rng>(rng: &mut R, m: usize) -> StrategySpec {
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let transition = (0..m)
            .map(|i| {
                if m == 1 {
                    return vec![0.0];
                }
                let row: Vec<f64> = (0..m)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            rng.random_range(0.0..1.0)
                        }
                    })
                    .collect();
                let s: f64 = row.iter().sum();
                row.iter()
                    .map(|x| if s > 0.0 { x / s } else { 0.0 })
                    .collect()
            })
            .collect();
        StrategySpec {
            initial_weights: raw.iter().map(|x| x / total).collect(),
            transition,
            subset_weights: None,
        }
    }

    pub fn design<R: Rng>(rng: &mut R, m: usize, k: usize) -> Design {
        let hyps = HypothesisSet::numbered(m).unwrap();
        let strategy = validate_strategy(&strategy(rng, m), &hyps).unwrap();
        let events = events(rng, m, k);
        let gamma = if rng.random_bool(0.5) {
            rng.random_range(-5.0..-0.5)
        } else {
            rng.random_range(0.5..2.0)
        };
        Design::new(
            hyps,
            strategy,
            info_fractions(&events).unwrap(),
            build_ccs(&events).unwrap(),
            SpendingSpec::Hsd { gamma },
            MvnSettings::default(),
        )
        .unwrap()
    }

    /// Statistics around `mean` with unit noise; not drawn from the design's
    /// correlation, which the engines never assume of the data.
    pub fn data<R: Rng>(rng: &mut R, m: usize, k: usize, mean: f64) -> ObservedStatistics {
        ObservedStatistics::from_z(
            (0..k)
                .map(|_| {
                    (0..m)
                        .map(|_| Some(mean + rng.sample::<f64, _>(StandardNormal)))
                        .collect()
                })
                .collect(),
        )
        .unwrap()
    }
}
