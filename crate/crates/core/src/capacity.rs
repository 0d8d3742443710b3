//! Capacity of concept sets over a feature library.
//!
//! Max capacity assigns the concepts to features with balanced merit over the
//! whole library, then measures the semantic distance of the chosen feature
//! set: in closed form for two concepts, by Monte Carlo beyond that.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{balanced_merit, solve_assignment};
use crate::error::{Error, Result};
use crate::model::Matrix;
use crate::model::{
    entropy, generalized_total_variation, normalize_all, total_variation, AssociationTable,
};
use crate::stochastic::{
    derive_seed, generalized_semantic_distance, semantic_distance_of_values, MonteCarloConfig,
};

/// Threshold used for threshold capacity when the caller gives none.
pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// Gap between exhaustive and balanced-merit ΔS above which a two-concept
/// subset is reported as a discrepancy.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMethod {
    Analytic,
    MonteCarlo,
}

impl CapacityMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CapacityMethod::Analytic => "analytic",
            CapacityMethod::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityStatistics {
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub threshold: f64,
    pub threshold_proportion: f64,
}

/// Comparison of the balanced-merit pair with the exhaustive ΔS maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAudit {
    pub exhaustive_max: f64,
    pub exhaustive_features: Vec<String>,
    pub gap: f64,
    pub differs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub concepts: Vec<String>,
    pub max_capacity: f64,
    /// Chosen feature ids, one per concept in concept order.
    pub chosen_features: Vec<String>,
    #[serde(skip)]
    pub chosen_indices: Vec<usize>,
    /// TV for two concepts, GTV otherwise.
    pub distribution_difference: f64,
    pub mean_entropy: f64,
    pub method: CapacityMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistics: Option<CapacityStatistics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<PairAudit>,
}

pub fn max_capacity(
    table: &AssociationTable,
    subset: &[usize],
    config: &MonteCarloConfig,
) -> Result<CapacityReport> {
    let n = subset.len();
    if n < 2 {
        return Err(Error::Argument(format!(
            "a concept subset needs at least 2 concepts, got {n}"
        )));
    }
    if table.n_features() < n {
        return Err(Error::Infeasible {
            features: table.n_features(),
            concepts: n,
        });
    }
    let sub = table.restrict_concepts(subset)?;
    let assignment = solve_assignment(&balanced_merit(&sub)?)?;
    let all_concepts: Vec<usize> = (0..n).collect();
    let feature_set = sub.values().select(&assignment.features, &all_concepts);

    let (max_capacity, method, samples, seed) = if n == 2 {
        (
            semantic_distance_of_values(&feature_set),
            CapacityMethod::Analytic,
            None,
            None,
        )
    } else {
        let restricted = sub.restrict(&assignment.features, &all_concepts)?;
        let result = generalized_semantic_distance(&restricted, config)?;
        (
            result.delta_s,
            CapacityMethod::MonteCarlo,
            Some(config.samples),
            Some(config.seed),
        )
    };

    let dists = normalize_all(&sub)?;
    let distribution_difference = if n == 2 {
        total_variation(&dists[0], &dists[1])?
    } else {
        generalized_total_variation(&dists)?
    };
    let mean_entropy = dists.iter().map(entropy).sum::<f64>() / n as f64;

    Ok(CapacityReport {
        concepts: sub.concepts().ids().to_vec(),
        max_capacity,
        chosen_features: assignment
            .features
            .iter()
            .map(|&i| table.library().get(i).id.clone())
            .collect(),
        chosen_indices: assignment.features,
        distribution_difference,
        mean_entropy,
        method,
        samples,
        seed,
        statistics: None,
        audit: None,
    })
}

/// Semantic distance of one unordered feature pair for a two-concept subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSemantics {
    pub features: (usize, usize),
    pub delta_s: f64,
}

/// Closed-form ΔS of every unordered feature pair, `C(N, 2)` entries in
/// lexicographic order.
///
/// ΔS is an absolute value, so both orientations of a pair score the same.
pub fn exhaustive_pair_semantics(
    table: &AssociationTable,
    subset: &[usize],
) -> Result<Vec<PairSemantics>> {
    if subset.len() != 2 {
        return Err(Error::Argument(format!(
            "exhaustive pair semantics only supports 2 concepts, got {}",
            subset.len()
        )));
    }
    let (c0, c1) = (subset[0], subset[1]);
    if c0 >= table.n_concepts() || c1 >= table.n_concepts() {
        return Err(Error::Argument("concept index out of range".into()));
    }
    let n = table.n_features();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    let mut values = Matrix::zeros(2, 2);
    for i in 0..n {
        for k in (i + 1)..n {
            values.set(0, 0, table.get(i, c0));
            values.set(0, 1, table.get(i, c1));
            values.set(1, 0, table.get(k, c0));
            values.set(1, 1, table.get(k, c1));
            out.push(PairSemantics {
                features: (i, k),
                delta_s: semantic_distance_of_values(&values),
            });
        }
    }
    Ok(out)
}

/// Max, mean, median and the fraction strictly above `threshold`.
pub fn capacity_statistics(delta_s: &[f64], threshold: f64) -> Result<CapacityStatistics> {
    if delta_s.is_empty() {
        return Err(Error::Argument("no semantic distances to summarize".into()));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Argument(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    let mut sorted = delta_s.to_vec();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len();
    let median = if len % 2 == 1 {
        sorted[len / 2]
    } else {
        0.5 * (sorted[len / 2 - 1] + sorted[len / 2])
    };
    let above = sorted.iter().filter(|&&d| d > threshold).count();
    Ok(CapacityStatistics {
        max: sorted[len - 1],
        mean: sorted.iter().sum::<f64>() / len as f64,
        median,
        threshold,
        threshold_proportion: above as f64 / len as f64,
    })
}

/// All `k`-subsets of `m` concept positions in lexicographic order.
pub fn enumerate_subsets(m: usize, k: usize) -> Result<impl Iterator<Item = Vec<usize>>> {
    if k < 2 || k > m {
        return Err(Error::Argument(format!(
            "subset size {k} must lie in [2, {m}]"
        )));
    }
    Ok((0..m).combinations(k))
}

pub fn binomial(m: usize, k: usize) -> u64 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    (0..k).fold(1u64, |acc, i| acc * (m - i) as u64 / (i + 1) as u64)
}

/// Max capacity plus, for two concepts, the exhaustive statistics and the
/// balanced-merit audit.
pub fn capacity_with_statistics(
    table: &AssociationTable,
    subset: &[usize],
    config: &MonteCarloConfig,
    threshold: f64,
) -> Result<CapacityReport> {
    let mut report = max_capacity(table, subset, config)?;
    if subset.len() == 2 {
        let pairs = exhaustive_pair_semantics(table, subset)?;
        let values: Vec<f64> = pairs.iter().map(|p| p.delta_s).collect();
        let stats = capacity_statistics(&values, threshold)?;
        let best = pairs.iter().fold(
            &pairs[0],
            |best, p| if p.delta_s > best.delta_s { p } else { best },
        );
        let gap = stats.max - report.max_capacity;
        let differs = gap.abs() > AUDIT_TOLERANCE;
        if differs {
            log::debug!(
                "concepts {:?}: exhaustive max ΔS {:.6} exceeds balanced-merit ΔS {:.6}",
                report.concepts,
                stats.max,
                report.max_capacity
            );
        }
        report.audit = Some(PairAudit {
            exhaustive_max: stats.max,
            exhaustive_features: vec![
                table.library().get(best.features.0).id.clone(),
                table.library().get(best.features.1).id.clone(),
            ],
            gap,
            differs,
        });
        report.statistics = Some(stats);
    }
    Ok(report)
}

/// One line of batch output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub index: u64,
    #[serde(flatten)]
    pub report: CapacityReport,
}

/// Subsets evaluated per parallel round before their records are emitted.
const BATCH_CHUNK: usize = 64;

/// Evaluates every `k`-subset of the table's concepts.
///
/// Subset `t` runs its Monte Carlo with seed `derive_seed(config.seed, t)`.
/// Records reach `sink` in enumeration order whatever the thread count.
pub fn capacity_batch<F>(
    table: &AssociationTable,
    k: usize,
    config: &MonteCarloConfig,
    threshold: f64,
    mut sink: F,
) -> Result<u64>
where
    F: FnMut(BatchRecord) -> Result<()>,
{
    let mut subsets = enumerate_subsets(table.n_concepts(), k)?
        .enumerate()
        .peekable();
    let mut emitted = 0u64;
    while subsets.peek().is_some() {
        let chunk: Vec<(usize, Vec<usize>)> = subsets.by_ref().take(BATCH_CHUNK).collect();
        let records: Vec<Result<BatchRecord>> = chunk
            .into_par_iter()
            .map(|(index, subset)| {
                let mut cfg = *config;
                cfg.seed = derive_seed(config.seed, index as u64);
                capacity_with_statistics(table, &subset, &cfg, threshold).map(|report| {
                    BatchRecord {
                        index: index as u64,
                        report,
                    }
                })
            })
            .collect();
        for record in records {
            sink(record?)?;
            emitted += 1;
        }
    }
    Ok(emitted)
}
