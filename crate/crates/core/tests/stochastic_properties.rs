mod common;

use common::{random_table, rng};
use rand::Rng;
use semdisc::model::AssociationTable;
use semdisc::stochastic::{
    delta_s_from_modal, factorial, semantic_distance_analytic, simulate, MonteCarloConfig,
    MonteCarloResult,
};

fn run_with_threads(
    threads: usize,
    table: &AssociationTable,
    cfg: &MonteCarloConfig,
) -> MonteCarloResult {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| simulate(table, cfg).unwrap())
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut r = rng(31);
    for n in 2..=4 {
        let table = random_table(&mut r, n, n);
        let cfg = MonteCarloConfig::new(3001, 99).unwrap();
        let serial = run_with_threads(1, &table, &cfg);
        let parallel = run_with_threads(8, &table, &cfg);
        assert_eq!(serial, parallel);
        assert_eq!(
            serde_json::to_string(&serial).unwrap(),
            serde_json::to_string(&parallel).unwrap()
        );
    }
}

#[test]
fn tallies_are_consistent() {
    let mut r = rng(32);
    for n in 2..=4 {
        let table = random_table(&mut r, n, n);
        let result = simulate(&table, &MonteCarloConfig::new(2000, 5).unwrap()).unwrap();
        let total: u64 = result.assignment_frequencies.iter().map(|a| a.count).sum();
        assert_eq!(total, 2000);
        let top = result
            .assignment_frequencies
            .iter()
            .map(|a| a.count)
            .max()
            .unwrap();
        assert_eq!(result.modal_proportion, top as f64 / 2000.0);
        let recomputed = delta_s_from_modal(result.modal_proportion, n);
        assert!((recomputed - result.delta_s).abs() <= 1e-12);
        assert!(result.contrast.iter().all(|c| (0.0..=1.0).contains(c)));
    }
}

#[test]
fn monte_carlo_tracks_the_closed_form() {
    let mut r = rng(33);
    let cfg = MonteCarloConfig::new(10_000, 2024).unwrap();
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let table = random_table(&mut r, 2, 2);
        let analytic = semantic_distance_analytic(&table).unwrap();
        let mc = simulate(&table, &cfg).unwrap().delta_s;
        let gap = (mc - analytic).abs();
        total += gap;
        worst = worst.max(gap);
    }
    assert!(total / 50.0 <= 0.02, "mean gap {}", total / 50.0);
    assert!(worst <= 0.05, "max gap {worst}");
}

#[test]
fn noiseless_diagonal_reaches_full_distance() {
    for n in 2..=4 {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let table = AssociationTable::from_rows(&rows).unwrap();
        let result = simulate(&table, &MonteCarloConfig::new(500, 1).unwrap()).unwrap();
        assert_eq!(result.modal_proportion, 1.0);
        assert_eq!(result.delta_s, 1.0);
        assert!(result.contrast.iter().all(|&c| c == 1.0));
    }
}

#[test]
fn identical_columns_sit_at_chance() {
    let samples = 20_000usize;
    for n in 2..=4 {
        let rows = vec![vec![0.5; n]; n];
        let table = AssociationTable::from_rows(&rows).unwrap();
        let result = simulate(&table, &MonteCarloConfig::new(samples, 3).unwrap()).unwrap();
        let chance = 1.0 / factorial(n);
        let se = (chance * (1.0 - chance) / samples as f64).sqrt();
        assert!(
            (result.modal_proportion - chance).abs() <= 3.0 * se,
            "n={n}: p={} chance={chance}",
            result.modal_proportion
        );
        let per_feature = 1.0 / n as f64;
        let se = (per_feature * (1.0 - per_feature) / samples as f64).sqrt();
        for c in &result.contrast {
            assert!((c - per_feature).abs() <= 3.0 * se, "n={n}: contrast {c}");
        }
    }
}

#[test]
fn contrast_is_at_least_the_modal_proportion() {
    let mut r = rng(34);
    for _ in 0..40 {
        let n = r.gen_range(2..=4);
        let table = random_table(&mut r, n, n);
        let result = simulate(&table, &MonteCarloConfig::new(1000, 8).unwrap()).unwrap();
        if result.modal_assignment != result.optimal.features {
            continue;
        }
        for c in &result.contrast {
            assert!(*c >= result.modal_proportion - 1e-12);
        }
    }
}

#[test]
fn doubling_samples_is_stable() {
    let mut r = rng(35);
    let samples = 1000usize;
    let bound = 4.0 / (samples as f64).sqrt();
    for _ in 0..20 {
        let n = r.gen_range(2..=4);
        let table = random_table(&mut r, n, n);
        let a = simulate(&table, &MonteCarloConfig::new(samples, 17).unwrap()).unwrap();
        let b = simulate(&table, &MonteCarloConfig::new(2 * samples, 18).unwrap()).unwrap();
        assert!((a.delta_s - b.delta_s).abs() <= bound);
    }
}

#[test]
fn prediction_is_doubly_stochastic() {
    let mut r = rng(36);
    for _ in 0..20 {
        let n = r.gen_range(2..=4);
        let table = random_table(&mut r, n, n);
        let result = simulate(&table, &MonteCarloConfig::new(777, 4).unwrap()).unwrap();
        let p = &result.prediction;
        for i in 0..n {
            let row: f64 = p.row(i).iter().sum();
            let col: f64 = p.column(i).iter().sum();
            assert!((row - 1.0).abs() <= 1e-9);
            assert!((col - 1.0).abs() <= 1e-9);
        }
        for (concept, &feature) in result.optimal.features.iter().enumerate() {
            assert_eq!(p.get(feature, concept), result.contrast[feature]);
        }
    }
}

#[test]
fn rejects_rectangular_tables() {
    let mut r = rng(37);
    let table = random_table(&mut r, 4, 3);
    assert!(simulate(&table, &MonteCarloConfig::default()).is_err());
    assert!(MonteCarloConfig::new(0, 1).is_err());
}
