mod common;

use common::{random_rows, random_table, rng, synthetic_library_table};
use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use semdisc::capacity::{
    binomial, capacity_batch, capacity_statistics, capacity_with_statistics, enumerate_subsets,
    exhaustive_pair_semantics, max_capacity, CapacityMethod, DEFAULT_THRESHOLD,
};
use semdisc::model::AssociationTable;
use semdisc::stochastic::MonteCarloConfig;

fn numerator(t: &AssociationTable, f1: usize, f2: usize) -> f64 {
    (t.get(f1, 0) + t.get(f2, 1)) - (t.get(f1, 1) + t.get(f2, 0))
}

#[test]
fn balanced_merit_pair_maximizes_the_numerator() {
    let mut r = rng(41);
    let cfg = MonteCarloConfig::default();
    let mut distance_disagreements = 0;
    for _ in 0..500 {
        let features = r.gen_range(2..=12);
        let table = random_table(&mut r, features, 2);
        let report = max_capacity(&table, &[0, 1], &cfg).unwrap();
        let chosen = numerator(&table, report.chosen_indices[0], report.chosen_indices[1]);
        let best = (0..features)
            .permutations(2)
            .map(|p| numerator(&table, p[0], p[1]))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (chosen - best).abs() <= 1e-12,
            "chosen {chosen} best {best}"
        );

        let exhaustive = exhaustive_pair_semantics(&table, &[0, 1]).unwrap();
        let top = exhaustive.iter().map(|p| p.delta_s).fold(0.0, f64::max);
        assert!(top >= report.max_capacity - 1e-9);
        if top - report.max_capacity > 1e-9 {
            distance_disagreements += 1;
        }
    }
    println!("semantic distance argmax differed from numerator argmax in {distance_disagreements}/500 tables");
}

#[test]
fn pair_counts() {
    let mut r = rng(42);
    let small = random_table(&mut r, 3, 2);
    assert_eq!(exhaustive_pair_semantics(&small, &[0, 1]).unwrap().len(), 3);
    let library = synthetic_library_table(1, 2);
    assert_eq!(
        exhaustive_pair_semantics(&library, &[0, 1]).unwrap().len(),
        2485
    );
    assert!(exhaustive_pair_semantics(&random_table(&mut r, 5, 3), &[0, 1, 2]).is_err());
}

#[test]
fn extending_the_library_never_lowers_the_exhaustive_max() {
    let mut r = rng(43);
    for _ in 0..100 {
        let len = r.gen_range(2..10);
        let rows = random_rows(&mut r, len, 2);
        let mut extended = rows.clone();
        let extra = r.gen_range(1..5);
        extended.extend(random_rows(&mut r, extra, 2));
        let max_of = |rows: &[Vec<f64>]| {
            let t = AssociationTable::from_rows(rows).unwrap();
            exhaustive_pair_semantics(&t, &[0, 1])
                .unwrap()
                .iter()
                .map(|p| p.delta_s)
                .fold(0.0, f64::max)
        };
        assert!(max_of(&extended) >= max_of(&rows));
    }
}

#[test]
fn row_order_does_not_change_capacity() {
    let mut r = rng(44);
    let cfg = MonteCarloConfig::new(500, 6).unwrap();
    for n in 2..=4 {
        for _ in 0..10 {
            let len = r.gen_range(n..12);
            let rows = random_rows(&mut r, len, n);
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut r);
            let subset: Vec<usize> = (0..n).collect();
            let a =
                max_capacity(&AssociationTable::from_rows(&rows).unwrap(), &subset, &cfg).unwrap();
            let b = max_capacity(
                &AssociationTable::from_rows(&shuffled).unwrap(),
                &subset,
                &cfg,
            )
            .unwrap();
            assert!((a.max_capacity - b.max_capacity).abs() <= 1e-12);
            assert!((a.distribution_difference - b.distribution_difference).abs() <= 1e-12);
            assert!((a.mean_entropy - b.mean_entropy).abs() <= 1e-12);
        }
    }
}

#[test]
fn report_invariants() {
    let mut r = rng(45);
    let cfg = MonteCarloConfig::new(400, 2).unwrap();
    for n in 2..=4 {
        let table = random_table(&mut r, 9, 5);
        let subset: Vec<usize> = (0..n).collect();
        let report = max_capacity(&table, &subset, &cfg).unwrap();
        assert_eq!(report.chosen_features.len(), n);
        assert!((0.0..=1.0).contains(&report.max_capacity));
        let expected = if n == 2 {
            CapacityMethod::Analytic
        } else {
            CapacityMethod::MonteCarlo
        };
        assert_eq!(report.method, expected);
    }
}

#[test]
fn identical_columns_have_no_capacity() {
    let rows = vec![vec![0.3, 0.3], vec![0.7, 0.7], vec![0.5, 0.5]];
    let table = AssociationTable::from_rows(&rows).unwrap();
    let report = max_capacity(&table, &[0, 1], &MonteCarloConfig::default()).unwrap();
    assert_eq!(report.max_capacity, 0.0);
}

#[test]
fn subset_enumeration_counts() {
    assert_eq!(enumerate_subsets(20, 2).unwrap().count(), 190);
    assert_eq!(enumerate_subsets(20, 4).unwrap().count(), 4845);
    assert_eq!(binomial(20, 4), 4845);
    let first: Vec<Vec<usize>> = enumerate_subsets(4, 2).unwrap().take(3).collect();
    assert_eq!(first, vec![vec![0, 1], vec![0, 2], vec![0, 3]]);
    assert!(enumerate_subsets(3, 4).is_err());
}

#[test]
fn batch_emits_every_subset_in_order() {
    let table = synthetic_library_table(2, 6);
    let cfg = MonteCarloConfig::new(200, 13).unwrap();
    let mut indices = Vec::new();
    let count = capacity_batch(&table, 3, &cfg, DEFAULT_THRESHOLD, |record| {
        indices.push(record.index);
        assert_eq!(record.report.concepts.len(), 3);
        Ok(())
    })
    .unwrap();
    assert_eq!(count, 20);
    assert_eq!(indices, (0..20).collect::<Vec<u64>>());
}

#[test]
fn two_concept_reports_carry_statistics_and_audit() {
    let table = synthetic_library_table(3, 3);
    let report =
        capacity_with_statistics(&table, &[0, 2], &MonteCarloConfig::default(), 0.5).unwrap();
    let stats = report.statistics.unwrap();
    let audit = report.audit.unwrap();
    assert!(stats.max >= report.max_capacity - 1e-9);
    assert!(stats.median <= stats.max && stats.mean <= stats.max);
    assert_eq!(audit.exhaustive_max, stats.max);
    assert_eq!(audit.differs, audit.gap.abs() > 1e-9);

    let flat = capacity_statistics(&[0.5; 4], 0.4).unwrap();
    assert_eq!((flat.max, flat.mean, flat.median), (0.5, 0.5, 0.5));
    assert_eq!(flat.threshold_proportion, 1.0);
    assert!(capacity_statistics(&[], 0.4).is_err());
}
