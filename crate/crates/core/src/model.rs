//! Data model and the deterministic distribution mathematics.
//!
//! Raw associations `a[i][j]` live in an [`AssociationTable`] with one row per
//! feature and one column per concept. Normalizing a column yields a
//! [`ConceptDistribution`] over the feature library, from which entropy, total
//! variation (TV) and generalized total variation (GTV) are computed.
//!
//! All logarithms are natural (nats) and `0 · log 0` is taken to be `0`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a distribution sums to one.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Dense row-major matrix of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from nested rows, which must all have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Sub-matrix made of the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                data.push(self.get(i, j));
            }
        }
        Matrix {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }
}

/// CIELAB coordinates (D65 white point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Lab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub lab: Option<Lab>,
    pub sorted_position: Option<u32>,
}

impl FeatureRecord {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            lab: None,
            sorted_position: None,
        }
    }
}

/// Ordered pool of candidate features (colors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLibrary {
    features: Vec<FeatureRecord>,
}

impl FeatureLibrary {
    pub fn new(features: Vec<FeatureRecord>) -> Result<Self> {
        if features.len() < 2 {
            return Err(Error::Argument(format!(
                "a feature library needs at least 2 features, got {}",
                features.len()
            )));
        }
        let mut seen = HashSet::with_capacity(features.len());
        for (row, f) in features.iter().enumerate() {
            if f.id.trim().is_empty() {
                return Err(Error::Validation {
                    row: row + 1,
                    column: "feature_id".into(),
                    message: "empty feature id".into(),
                });
            }
            if !seen.insert(f.id.as_str()) {
                return Err(Error::Validation {
                    row: row + 1,
                    column: "feature_id".into(),
                    message: format!("duplicate feature id `{}`", f.id),
                });
            }
            if let Some(lab) = f.lab {
                if !(0.0..=100.0).contains(&lab.l) {
                    return Err(Error::Validation {
                        row: row + 1,
                        column: "L".into(),
                        message: format!("L* = {} outside [0, 100]", lab.l),
                    });
                }
            }
        }
        Ok(Self { features })
    }

    /// Library of bare ids without color coordinates.
    pub fn from_ids<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(ids.into_iter().map(FeatureRecord::new).collect())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureRecord] {
        &self.features
    }

    pub fn get(&self, index: usize) -> &FeatureRecord {
        &self.features[index]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f.id == id)
            .ok_or_else(|| Error::UnknownFeature(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSet {
    concepts: Vec<String>,
}

impl ConceptSet {
    pub fn new<S: Into<String>>(concepts: impl IntoIterator<Item = S>) -> Result<Self> {
        let concepts: Vec<String> = concepts.into_iter().map(Into::into).collect();
        if concepts.len() < 2 {
            return Err(Error::Argument(format!(
                "a concept set needs at least 2 concepts, got {}",
                concepts.len()
            )));
        }
        let mut seen = HashSet::with_capacity(concepts.len());
        for c in &concepts {
            if c.trim().is_empty() {
                return Err(Error::Argument("empty concept id".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(Error::Argument(format!("duplicate concept id `{c}`")));
            }
        }
        Ok(Self { concepts })
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.concepts
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.concepts
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| Error::UnknownConcept(id.to_string()))
    }
}

/// Raw feature–concept associations, `N` features by `n` concepts.
///
/// Every value lies in `[0, 1]`. A zero column is accepted here (sub-tables
/// restricted to a few features routinely have one) and reported by
/// [`normalize`] and [`AssociationTable::zero_columns`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationTable {
    library: FeatureLibrary,
    concepts: ConceptSet,
    values: Matrix,
}

impl AssociationTable {
    pub fn new(library: FeatureLibrary, concepts: ConceptSet, values: Matrix) -> Result<Self> {
        if values.rows() != library.len() || values.cols() != concepts.len() {
            return Err(Error::Shape(format!(
                "values are {}x{} but the table is {} features x {} concepts",
                values.rows(),
                values.cols(),
                library.len(),
                concepts.len()
            )));
        }
        for i in 0..values.rows() {
            for j in 0..values.cols() {
                let a = values.get(i, j);
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::Validation {
                        row: i + 1,
                        column: concepts.ids()[j].clone(),
                        message: format!("association {a} outside [0, 1]"),
                    });
                }
            }
        }
        Ok(Self {
            library,
            concepts,
            values,
        })
    }

    /// Convenience constructor with generated ids `f1..fN` and `c1..cn`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let values = Matrix::from_rows(rows)?;
        let library = FeatureLibrary::from_ids((1..=values.rows()).map(|i| format!("f{i}")))?;
        let concepts = ConceptSet::new((1..=values.cols()).map(|j| format!("c{j}")))?;
        Self::new(library, concepts, values)
    }

    pub fn library(&self) -> &FeatureLibrary {
        &self.library
    }

    pub fn concepts(&self) -> &ConceptSet {
        &self.concepts
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n_features(&self) -> usize {
        self.values.rows()
    }

    pub fn n_concepts(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn get(&self, feature: usize, concept: usize) -> f64 {
        self.values.get(feature, concept)
    }

    pub fn column_sum(&self, concept: usize) -> f64 {
        (0..self.n_features()).map(|i| self.get(i, concept)).sum()
    }

    /// Ids of concepts whose column sums to zero.
    pub fn zero_columns(&self) -> Vec<&str> {
        (0..self.n_concepts())
            .filter(|&j| self.column_sum(j) <= 0.0)
            .map(|j| self.concepts.ids()[j].as_str())
            .collect()
    }

    /// Resolves concept ids to column positions.
    pub fn concept_indices<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| self.concepts.index_of(id.as_ref()))
            .collect()
    }

    pub fn feature_indices<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| self.library.index_of(id.as_ref()))
            .collect()
    }

    /// Sub-table over the given feature rows and concept columns, in order.
    pub fn restrict(&self, features: &[usize], concepts: &[usize]) -> Result<AssociationTable> {
        for &i in features {
            if i >= self.n_features() {
                return Err(Error::Argument(format!("feature index {i} out of range")));
            }
        }
        for &j in concepts {
            if j >= self.n_concepts() {
                return Err(Error::Argument(format!("concept index {j} out of range")));
            }
        }
        let library = FeatureLibrary::new(
            features
                .iter()
                .map(|&i| self.library.get(i).clone())
                .collect(),
        )?;
        let concept_set =
            ConceptSet::new(concepts.iter().map(|&j| self.concepts.ids()[j].clone()))?;
        Ok(AssociationTable {
            library,
            concepts: concept_set,
            values: self.values.select(features, concepts),
        })
    }

    /// Sub-table keeping every feature but only the given concepts.
    pub fn restrict_concepts(&self, concepts: &[usize]) -> Result<AssociationTable> {
        let all: Vec<usize> = (0..self.n_features()).collect();
        self.restrict(&all, concepts)
    }
}

/// Normalized association distribution of one concept over the library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDistribution {
    concept: String,
    probabilities: Vec<f64>,
}

impl ConceptDistribution {
    pub fn new(concept: impl Into<String>, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities
            .iter()
            .any(|&p| p.is_nan() || p < 0.0 || !p.is_finite())
        {
            return Err(Error::Argument(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Argument(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            concept: concept.into(),
            probabilities,
        })
    }

    pub fn concept(&self) -> &str {
        &self.concept
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

pub fn normalize(table: &AssociationTable, concept: &str) -> Result<ConceptDistribution> {
    let j = table.concepts().index_of(concept)?;
    normalize_column(table, j)
}

/// Like [`normalize`] but addressed by column position.
pub fn normalize_column(table: &AssociationTable, concept: usize) -> Result<ConceptDistribution> {
    let id = table
        .concepts()
        .ids()
        .get(concept)
        .ok_or_else(|| Error::Argument(format!("concept index {concept} out of range")))?;
    let column = table.values().column(concept);
    let total: f64 = column.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate(format!(
            "concept `{id}` has zero total association"
        )));
    }
    let probabilities = column.into_iter().map(|a| a / total).collect();
    ConceptDistribution::new(id.clone(), probabilities)
}

/// Normalizes every concept column of the table.
pub fn normalize_all(table: &AssociationTable) -> Result<Vec<ConceptDistribution>> {
    (0..table.n_concepts())
        .map(|j| normalize_column(table, j))
        .collect()
}

/// Shannon entropy in nats.
pub fn entropy(dist: &ConceptDistribution) -> f64 {
    -dist
        .probabilities()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

pub fn mean_entropy(dists: &[ConceptDistribution]) -> Result<f64> {
    if dists.is_empty() {
        return Err(Error::Argument("mean entropy of an empty list".into()));
    }
    check_same_length(dists)?;
    Ok(dists.iter().map(entropy).sum::<f64>() / dists.len() as f64)
}

/// Half the L1 distance between two distributions.
pub fn total_variation(d1: &ConceptDistribution, d2: &ConceptDistribution) -> Result<f64> {
    if d1.len() != d2.len() {
        return Err(Error::Shape(format!(
            "distributions of length {} and {}",
            d1.len(),
            d2.len()
        )));
    }
    Ok(0.5
        * d1.probabilities()
            .iter()
            .zip(d2.probabilities())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>())
}

/// `−1 + Σ_i max_j p_j(i)`. Equals [`total_variation`] for two distributions.
///
/// The per-feature maximum needs no tie-breaking.
pub fn generalized_total_variation(dists: &[ConceptDistribution]) -> Result<f64> {
    if dists.len() < 2 {
        return Err(Error::Argument(format!(
            "GTV needs at least 2 distributions, got {}",
            dists.len()
        )));
    }
    check_same_length(dists)?;
    let n = dists[0].len();
    let sum_of_max: f64 = (0..n)
        .map(|i| {
            dists
                .iter()
                .map(|d| d.probabilities()[i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    Ok(sum_of_max - 1.0)
}

/// Average error of the maximum-likelihood guess of which of `k` equally
/// likely distributions produced a single observed feature.
pub fn ml_error_probability(dists: &[ConceptDistribution]) -> Result<f64> {
    let gtv = generalized_total_variation(dists)?;
    let k = dists.len() as f64;
    Ok((1.0 - 1.0 / k) - gtv / k)
}

/// Maps entropies to `[0, 1]` specificity: `1 − (H − H_min)/(H_max − H_min)`.
///
/// The min and max are taken over the supplied collection.
pub fn specificity_scores(entropies: &[f64]) -> Result<Vec<f64>> {
    if entropies.iter().any(|h| !h.is_finite()) {
        return Err(Error::Argument("entropies must be finite".into()));
    }
    let min = entropies.iter().copied().fold(f64::INFINITY, f64::min);
    let max = entropies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if entropies.len() < 2 || max <= min {
        return Err(Error::Degenerate(
            "min-max normalization needs at least two distinct values".into(),
        ));
    }
    let range = max - min;
    Ok(entropies.iter().map(|h| 1.0 - (h - min) / range).collect())
}

fn check_same_length(dists: &[ConceptDistribution]) -> Result<()> {
    let n = dists[0].len();
    if let Some(d) = dists.iter().find(|d| d.len() != n) {
        return Err(Error::Shape(format!(
            "distribution `{}` has length {}, expected {n}",
            d.concept(),
            d.len()
        )));
    }
    Ok(())
}
