//! Association noise, semantic distance and the Monte Carlo estimators.
//!
//! Ratings are modeled as independent normals with mean `a_ij` and standard
//! deviation `σ_ij = 1.4 · a_ij · (1 − a_ij)`. One Monte Carlo iteration
//! perturbs every cell of a square sub-table, recomputes balanced merit from
//! the perturbed ratings and solves the assignment. The same iterations feed
//! the generalized semantic distance, the semantic contrasts and the response
//! prediction matrix.

pub mod normal;
pub mod rng;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{
    balanced_merit, balanced_merit_row, min_cost_assignment, solve_assignment, Assignment,
};
use crate::error::{Error, Result};
use crate::model::{AssociationTable, Matrix};

pub use normal::{standard_normal_cdf, standard_normal_quantile};
pub use rng::{derive_seed, NoiseStream, StreamKey};

/// Scale of the rating noise model.
pub const NOISE_SCALE: f64 = 1.4;

/// Default number of Monte Carlo iterations.
pub const DEFAULT_SAMPLES: usize = 1000;

/// Iterations handled by one parallel work unit.
const BLOCK: usize = 256;

/// Per-cell standard deviations of the rating noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    sigma: Matrix,
}

impl NoiseModel {
    pub fn from_table(table: &AssociationTable) -> Self {
        let values = table.values();
        let mut sigma = Matrix::zeros(values.rows(), values.cols());
        for (s, &a) in sigma.as_mut_slice().iter_mut().zip(values.as_slice()) {
            *s = rating_sigma(a);
        }
        Self { sigma }
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    #[inline]
    pub fn get(&self, feature: usize, concept: usize) -> f64 {
        self.sigma.get(feature, concept)
    }
}

/// `1.4 · a · (1 − a)`; at most 0.35, zero at 0 and 1.
#[inline]
pub fn rating_sigma(mean: f64) -> f64 {
    NOISE_SCALE * mean * (1.0 - mean)
}

/// Which quantity receives the noise in each iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbTarget {
    /// Perturb the ratings, then recompute balanced merit.
    #[default]
    Ratings,
    /// Perturb the balanced merit of the mean ratings directly, using the
    /// rating σ of each cell.
    Merit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub seed: u64,
    /// Clamp perturbed ratings to `[0, 1]`. Off by default.
    #[serde(default)]
    pub clamp: bool,
    #[serde(default)]
    pub target: PerturbTarget,
}

impl MonteCarloConfig {
    pub fn new(samples: usize, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Argument("samples must be at least 1".into()));
        }
        Ok(Self {
            samples,
            seed,
            clamp: false,
            target: PerturbTarget::Ratings,
        })
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn with_target(mut self, target: PerturbTarget) -> Self {
        self.target = target;
        self
    }
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            clamp: false,
            target: PerturbTarget::Ratings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentCount {
    /// Feature index per concept position.
    pub features: Vec<usize>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    /// Distinct assignments seen, in lexicographic order of their key.
    pub assignment_frequencies: Vec<AssignmentCount>,
    /// Most frequent assignment (the lexicographically first on ties).
    pub modal_assignment: Vec<usize>,
    pub modal_proportion: f64,
    /// Generalized semantic distance `(n!·p − 1)/(n! − 1)`.
    pub delta_s: f64,
    /// Per-feature proportion of iterations matching the optimal concept.
    pub contrast: Vec<f64>,
    /// Balanced-merit assignment of the unperturbed ratings.
    pub optimal: Assignment,
    /// `prediction[i][j]`: proportion of iterations assigning feature `i` to
    /// concept `j`.
    pub prediction: Matrix,
    pub samples: usize,
    pub seed: u64,
}

/// `n!` as a float (exact up to `n = 22`).
pub fn factorial(n: usize) -> f64 {
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Rescales the modal proportion `p ∈ [1/n!, 1]` onto `[0, 1]`.
pub fn delta_s_from_modal(modal_proportion: f64, n: usize) -> f64 {
    let perms = factorial(n);
    (perms * modal_proportion - 1.0) / (perms - 1.0)
}

/// Numerator of the 2×2 semantic distance:
/// `(a₁₁ + a₂₂) − (a₁₂ + a₂₁)`, rows = features, columns = concepts.
pub fn pair_numerator(values: &Matrix) -> f64 {
    (values.get(0, 0) + values.get(1, 1)) - (values.get(0, 1) + values.get(1, 0))
}

/// Closed-form semantic distance of a 2 features × 2 concepts table.
///
/// `ΔS = |2Φ(d/s) − 1|` with `d` the [`pair_numerator`] and `s² = Σσ²`. When
/// every σ vanishes the outcome is certain unless `d = 0`.
pub fn semantic_distance_analytic(table: &AssociationTable) -> Result<f64> {
    if table.n_features() != 2 || table.n_concepts() != 2 {
        return Err(Error::Shape(format!(
            "analytic semantic distance needs a 2x2 table, got {}x{}",
            table.n_features(),
            table.n_concepts()
        )));
    }
    Ok(semantic_distance_of_values(table.values()))
}

pub(crate) fn semantic_distance_of_values(values: &Matrix) -> f64 {
    let numerator = pair_numerator(values);
    let variance: f64 = values
        .as_slice()
        .iter()
        .map(|&a| rating_sigma(a).powi(2))
        .sum();
    if variance == 0.0 {
        return if numerator == 0.0 { 0.0 } else { 1.0 };
    }
    normal::two_sided_margin(numerator / variance.sqrt())
}

/// Draws one perturbed copy of the ratings, cell by cell in row-major order.
pub fn sample_perturbed_table(
    table: &AssociationTable,
    noise: &NoiseModel,
    stream: &mut NoiseStream,
) -> Result<Matrix> {
    if noise.sigma().rows() != table.n_features() || noise.sigma().cols() != table.n_concepts() {
        return Err(Error::Shape("noise model does not match the table".into()));
    }
    let mut out = table.values().clone();
    perturb_in_place(out.as_mut_slice(), noise.sigma().as_slice(), stream, false);
    Ok(out)
}

fn perturb_in_place(values: &mut [f64], sigma: &[f64], stream: &mut NoiseStream, clamp: bool) {
    for (x, &s) in values.iter_mut().zip(sigma) {
        let z = stream.next_standard_normal();
        *x += s * z;
        if clamp {
            *x = x.clamp(0.0, 1.0);
        }
    }
}

pub fn generalized_semantic_distance(
    table: &AssociationTable,
    config: &MonteCarloConfig,
) -> Result<MonteCarloResult> {
    simulate(table, config)
}

/// Per-feature semantic contrast together with the optimal assignment.
pub fn semantic_contrast(
    table: &AssociationTable,
    config: &MonteCarloConfig,
) -> Result<(Vec<f64>, Assignment)> {
    let result = simulate(table, config)?;
    Ok((result.contrast, result.optimal))
}

pub fn predict_response_distribution(
    table: &AssociationTable,
    config: &MonteCarloConfig,
) -> Result<Matrix> {
    Ok(simulate(table, config)?.prediction)
}

#[derive(Debug, Clone)]
struct Tally {
    counts: BTreeMap<Vec<usize>, u64>,
    /// Row-major feature × concept placement counts.
    placement: Vec<u64>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            counts: BTreeMap::new(),
            placement: vec![0; n * n],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (key, count) in other.counts {
            *self.counts.entry(key).or_insert(0) += count;
        }
        for (a, b) in self.placement.iter_mut().zip(other.placement) {
            *a += b;
        }
        self
    }
}

/// Runs the perturb-and-solve iterations over a square table.
///
/// Iteration `t` draws its noise from stream `t` of the seed, and counts are
/// merged by integer addition, so the result does not depend on how rayon
/// schedules the blocks.
pub fn simulate(table: &AssociationTable, config: &MonteCarloConfig) -> Result<MonteCarloResult> {
    let n = table.n_concepts();
    if table.n_features() != n {
        return Err(Error::Shape(format!(
            "Monte Carlo needs a square table, got {} features x {n} concepts",
            table.n_features()
        )));
    }
    if config.samples == 0 {
        return Err(Error::Argument("samples must be at least 1".into()));
    }

    let noise = NoiseModel::from_table(table);
    let mean_merit = balanced_merit(table)?;
    let optimal = solve_assignment(&mean_merit)?;
    let key = StreamKey::new(config.seed);
    let means = table.values().as_slice();
    let sigma = noise.sigma().as_slice();

    let blocks = config.samples.div_ceil(BLOCK);
    let tally = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let start = block * BLOCK;
            let end = (start + BLOCK).min(config.samples);
            let mut tally = Tally::new(n);
            let mut cells = vec![0.0; n * n];
            let mut merit = vec![0.0; n * n];
            for iteration in start..end {
                let mut stream = key.stream(iteration as u64);
                match config.target {
                    PerturbTarget::Ratings => {
                        cells.copy_from_slice(means);
                        perturb_in_place(&mut cells, sigma, &mut stream, config.clamp);
                        for i in 0..n {
                            balanced_merit_row(
                                &cells[i * n..(i + 1) * n],
                                &mut merit[i * n..(i + 1) * n],
                            );
                        }
                    }
                    PerturbTarget::Merit => {
                        merit.copy_from_slice(mean_merit.values().as_slice());
                        perturb_in_place(&mut merit, sigma, &mut stream, false);
                    }
                }
                let features =
                    min_cost_assignment(n, n, |concept, feature| -merit[feature * n + concept]);
                for (concept, &feature) in features.iter().enumerate() {
                    tally.placement[feature * n + concept] += 1;
                }
                *tally.counts.entry(features).or_insert(0) += 1;
            }
            tally
        })
        .reduce(|| Tally::new(n), Tally::merge);

    let samples = config.samples as f64;
    let (modal_assignment, modal_count) =
        tally
            .counts
            .iter()
            .fold((Vec::new(), 0u64), |(best, best_count), (key, &count)| {
                if count > best_count {
                    (key.clone(), count)
                } else {
                    (best, best_count)
                }
            });
    let modal_proportion = modal_count as f64 / samples;

    let mut contrast = vec![0.0; n];
    for (concept, &feature) in optimal.features.iter().enumerate() {
        contrast[feature] = tally.placement[feature * n + concept] as f64 / samples;
    }
    let prediction = Matrix::new(
        n,
        n,
        tally
            .placement
            .iter()
            .map(|&c| c as f64 / samples)
            .collect(),
    )?;

    Ok(MonteCarloResult {
        assignment_frequencies: tally
            .counts
            .into_iter()
            .map(|(features, count)| AssignmentCount { features, count })
            .collect(),
        modal_assignment,
        modal_proportion,
        delta_s: delta_s_from_modal(modal_proportion, n),
        contrast,
        optimal,
        prediction,
        samples: config.samples,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table(rows: &[&[f64]]) -> AssociationTable {
        AssociationTable::from_rows(rows).unwrap()
    }

    fn identity(n: usize) -> AssociationTable {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        AssociationTable::from_rows(&rows).unwrap()
    }

    #[test]
    fn noise_model_bounds() {
        assert_eq!(rating_sigma(0.0), 0.0);
        assert_eq!(rating_sigma(1.0), 0.0);
        assert_abs_diff_eq!(rating_sigma(0.5), 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(rating_sigma(0.8), 0.224, epsilon = 1e-15);
        let model = NoiseModel::from_table(&table(&[&[0.2, 0.5], &[0.0, 1.0]]));
        assert_eq!(model.get(1, 0), 0.0);
        assert!(model
            .sigma()
            .as_slice()
            .iter()
            .all(|&s| (0.0..=0.35).contains(&s)));
    }

    #[test]
    fn analytic_reference_table() {
        let t = table(&[&[0.8, 0.2], &[0.2, 0.8]]);
        let ds = semantic_distance_analytic(&t).unwrap();
        // erf(1.2 / 0.448 / √2) to 40 digits: 0.99260630395008414775...
        assert_abs_diff_eq!(ds, 0.992_606_303_950_084_1, epsilon = 1e-12);
    }

    #[test]
    fn analytic_symmetry_and_degenerate() {
        let t = table(&[&[0.4, 0.4], &[0.4, 0.4]]);
        assert_eq!(semantic_distance_analytic(&t).unwrap(), 0.0);

        let t = table(&[&[0.7, 0.1], &[0.3, 0.6]]);
        let swapped = table(&[&[0.3, 0.6], &[0.7, 0.1]]);
        assert_eq!(
            semantic_distance_analytic(&t).unwrap(),
            semantic_distance_analytic(&swapped).unwrap()
        );

        assert_eq!(semantic_distance_analytic(&identity(2)).unwrap(), 1.0);
        let flat = table(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(semantic_distance_analytic(&flat).unwrap(), 0.0);

        let wide = table(&[&[0.1, 0.2, 0.3], &[0.3, 0.2, 0.1]]);
        assert!(matches!(
            semantic_distance_analytic(&wide),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_noise_sample_is_identity() {
        let t = identity(3);
        let noise = NoiseModel::from_table(&t);
        let mut stream = NoiseStream::new(5, 0);
        assert_eq!(
            &sample_perturbed_table(&t, &noise, &mut stream).unwrap(),
            t.values()
        );
    }

    #[test]
    fn sample_is_deterministic() {
        let t = table(&[&[0.3, 0.6], &[0.5, 0.9]]);
        let noise = NoiseModel::from_table(&t);
        let a = sample_perturbed_table(&t, &noise, &mut NoiseStream::new(9, 3)).unwrap();
        let b = sample_perturbed_table(&t, &noise, &mut NoiseStream::new(9, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_standard_deviation_at_half() {
        let t = table(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let noise = NoiseModel::from_table(&t);
        let key = StreamKey::new(11);
        let draws: Vec<f64> = (0..100_000u64)
            .map(|k| {
                sample_perturbed_table(&t, &noise, &mut key.stream(k))
                    .unwrap()
                    .get(0, 0)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!(
            (var.sqrt() - 0.35).abs() / 0.35 < 0.02,
            "sd = {}",
            var.sqrt()
        );
    }

    #[test]
    fn eq8_endpoints() {
        assert_eq!(delta_s_from_modal(1.0, 2), 1.0);
        assert_eq!(delta_s_from_modal(0.5, 2), 0.0);
        assert_abs_diff_eq!(delta_s_from_modal(1.0 / 24.0, 4), 0.0, epsilon = 1e-15);
        assert_eq!(delta_s_from_modal(1.0, 4), 1.0);
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(4), 24.0);
    }

    #[test]
    fn identity_table_is_certain() {
        let t = identity(4);
        let r = generalized_semantic_distance(&t, &MonteCarloConfig::new(500, 3).unwrap()).unwrap();
        assert_eq!(r.modal_proportion, 1.0);
        assert_eq!(r.delta_s, 1.0);
        assert_eq!(r.contrast, vec![1.0; 4]);
        assert_eq!(r.optimal.features, vec![0, 1, 2, 3]);
        assert_eq!(r.assignment_frequencies.len(), 1);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(r.prediction.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn non_square_rejected() {
        let t = table(&[&[0.1, 0.2], &[0.3, 0.4], &[0.5, 0.6]]);
        assert!(matches!(
            generalized_semantic_distance(&t, &MonteCarloConfig::default()),
            Err(Error::Shape(_))
        ));
        assert!(MonteCarloConfig::new(0, 1).is_err());
    }

    #[test]
    fn result_invariants() {
        let t = table(&[&[0.9, 0.4, 0.2], &[0.3, 0.7, 0.5], &[0.2, 0.6, 0.8]]);
        let r = simulate(&t, &MonteCarloConfig::new(2000, 17).unwrap()).unwrap();
        let total: u64 = r.assignment_frequencies.iter().map(|a| a.count).sum();
        assert_eq!(total, 2000);
        let max = r
            .assignment_frequencies
            .iter()
            .map(|a| a.count)
            .max()
            .unwrap();
        assert_eq!(r.modal_proportion, max as f64 / 2000.0);
        assert_abs_diff_eq!(
            r.delta_s,
            (6.0 * r.modal_proportion - 1.0) / 5.0,
            epsilon = 1e-12
        );
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| r.prediction.get(i, j)).sum();
            let col: f64 = (0..3).map(|j| r.prediction.get(j, i)).sum();
            assert_abs_diff_eq!(row, 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(col, 1.0, epsilon = 1e-9);
        }
        for (concept, &feature) in r.optimal.features.iter().enumerate() {
            assert_eq!(r.prediction.get(feature, concept), r.contrast[feature]);
        }
    }

    #[test]
    fn merit_target_runs() {
        let t = table(&[&[0.9, 0.4], &[0.3, 0.7]]);
        let cfg = MonteCarloConfig::new(1000, 1)
            .unwrap()
            .with_target(PerturbTarget::Merit);
        let r = simulate(&t, &cfg).unwrap();
        assert!((0.0..=1.0).contains(&r.delta_s));
    }
}
