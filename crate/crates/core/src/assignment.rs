//! Merit functions and exact linear assignment.
//!
//! Merit matrices are laid out like association tables: one row per feature,
//! one column per concept, with at least as many features as concepts. The
//! solver maximizes total merit over injective concept → feature mappings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AssociationTable, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeritKind {
    /// `m_ij = a_ij`
    Isolated,
    /// `m_ij = a_ij − max_{k≠j} a_ik`
    Balanced,
    /// Anything else, e.g. a hand-written merit table.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeritMatrix {
    values: Matrix,
    kind: MeritKind,
}

impl MeritMatrix {
    pub fn new(values: Matrix, kind: MeritKind) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::Shape("merit matrix has no concept columns".into()));
        }
        if values.rows() < values.cols() {
            return Err(Error::Infeasible {
                features: values.rows(),
                concepts: values.cols(),
            });
        }
        if values.as_slice().iter().any(|m| !m.is_finite()) {
            return Err(Error::Argument("merit values must be finite".into()));
        }
        Ok(Self { values, kind })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, MeritKind::Custom)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn kind(&self) -> MeritKind {
        self.kind
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

    /// Total merit of a mapping given as one feature index per concept.
    pub fn total(&self, features: &[usize]) -> f64 {
        features
            .iter()
            .enumerate()
            .map(|(j, &i)| self.get(i, j))
            .sum()
    }
}

/// Injective concept → feature mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `features[j]` is the feature index assigned to concept `j`.
    pub features: Vec<usize>,
    pub total_merit: f64,
}

impl Assignment {
    pub fn n_concepts(&self) -> usize {
        self.features.len()
    }

    /// Inverse mapping over `n_features` features: the concept each feature
    /// is assigned to, if any.
    pub fn concept_of_feature(&self, n_features: usize) -> Vec<Option<usize>> {
        let mut inverse = vec![None; n_features];
        for (j, &i) in self.features.iter().enumerate() {
            inverse[i] = Some(j);
        }
        inverse
    }

    /// `(concept id, feature id)` pairs in concept order.
    pub fn labeled<'a>(&self, table: &'a AssociationTable) -> Vec<(&'a str, &'a str)> {
        self.features
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                (
                    table.concepts().ids()[j].as_str(),
                    table.library().get(i).id.as_str(),
                )
            })
            .collect()
    }
}

pub fn isolated_merit(table: &AssociationTable) -> MeritMatrix {
    MeritMatrix {
        values: table.values().clone(),
        kind: MeritKind::Isolated,
    }
}

pub fn balanced_merit(table: &AssociationTable) -> Result<MeritMatrix> {
    Ok(MeritMatrix {
        values: balanced_merit_values(table.values())?,
        kind: MeritKind::Balanced,
    })
}

/// Balanced merit of an arbitrary real matrix (rows = features).
///
/// Works on perturbed ratings that have left `[0, 1]`.
pub fn balanced_merit_values(values: &Matrix) -> Result<Matrix> {
    let n = values.cols();
    if n < 2 {
        return Err(Error::Argument(format!(
            "balanced merit needs at least 2 concepts, got {n}"
        )));
    }
    let mut out = Matrix::zeros(values.rows(), n);
    for i in 0..values.rows() {
        balanced_merit_row(values.row(i), &mut out.as_mut_slice()[i * n..(i + 1) * n]);
    }
    Ok(out)
}

/// Writes the balanced merit of one feature row into `out`.
///
/// Only the largest and second-largest entries are needed: every concept
/// competes against the row maximum except the one holding it.
pub(crate) fn balanced_merit_row(row: &[f64], out: &mut [f64]) {
    let mut best = 0usize;
    for (j, &a) in row.iter().enumerate().skip(1) {
        if a > row[best] {
            best = j;
        }
    }
    let runner_up = row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != best)
        .map(|(_, &a)| a)
        .fold(f64::NEG_INFINITY, f64::max);
    for (j, &a) in row.iter().enumerate() {
        let competitor = if j == best { runner_up } else { row[best] };
        out[j] = a - competitor;
    }
}

/// Maximum-merit injective assignment of every concept to a distinct feature.
///
/// Shortest augmenting paths with dual potentials over the negated merits,
/// `O(n²N)` for `n` concepts and `N` features. Among equal optima the result
/// follows the scan order (concepts in set order, features in library order).
pub fn solve_assignment(merit: &MeritMatrix) -> Result<Assignment> {
    let n = merit.n_concepts();
    let m = merit.n_features();
    if m < n {
        return Err(Error::Infeasible {
            features: m,
            concepts: n,
        });
    }
    let features = min_cost_assignment(n, m, |concept, feature| -merit.get(feature, concept));
    let total_merit = merit.total(&features);
    Ok(Assignment {
        features,
        total_merit,
    })
}

/// Rectangular minimum-cost assignment of `rows ≤ cols` rows.
///
/// Returns the column assigned to each row.
pub(crate) fn min_cost_assignment<F>(rows: usize, cols: usize, cost: F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    debug_assert!(rows <= cols);
    // 1-based with index 0 as the virtual source column.
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut min_slack = vec![0.0f64; cols + 1];
    let mut used = vec![false; cols + 1];

    for row in 1..=rows {
        owner[0] = row;
        let mut col0 = 0usize;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=cols {
                if used[col] {
                    continue;
                }
                let reduced = cost(r0 - 1, col - 1) - u[r0] - v[col];
                if reduced < min_slack[col] {
                    min_slack[col] = reduced;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for col in 0..=cols {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assigned = vec![usize::MAX; rows];
    for col in 1..=cols {
        if owner[col] != 0 {
            assigned[owner[col] - 1] = col - 1;
        }
    }
    assigned
}

/// Largest instance [`brute_force_assignment`] accepts.
pub const BRUTE_FORCE_MAX_CONCEPTS: usize = 8;
pub const BRUTE_FORCE_MAX_FEATURES: usize = 12;

/// Exhaustive search over all injective mappings. Test oracle only.
///
/// Mappings are visited in lexicographic order of feature indices and only a
/// strictly better total replaces the incumbent, so ties keep the first.
pub fn brute_force_assignment(merit: &MeritMatrix) -> Result<Assignment> {
    let n = merit.n_concepts();
    let m = merit.n_features();
    if n > BRUTE_FORCE_MAX_CONCEPTS || m > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::Argument(format!(
            "brute force limited to {BRUTE_FORCE_MAX_CONCEPTS} concepts and \
             {BRUTE_FORCE_MAX_FEATURES} features, got {n}x{m}"
        )));
    }
    if m < n {
        return Err(Error::Infeasible {
            features: m,
            concepts: n,
        });
    }

    struct Search<'a> {
        merit: &'a MeritMatrix,
        used: Vec<bool>,
        current: Vec<usize>,
        best: Vec<usize>,
        best_total: f64,
    }

    impl Search<'_> {
        fn visit(&mut self, concept: usize, total: f64) {
            if concept == self.merit.n_concepts() {
                if total > self.best_total {
                    self.best_total = total;
                    self.best.clone_from(&self.current);
                }
                return;
            }
            for feature in 0..self.merit.n_features() {
                if self.used[feature] {
                    continue;
                }
                self.used[feature] = true;
                self.current.push(feature);
                self.visit(concept + 1, total + self.merit.get(feature, concept));
                self.current.pop();
                self.used[feature] = false;
            }
        }
    }

    let mut search = Search {
        merit,
        used: vec![false; m],
        current: Vec::with_capacity(n),
        best: Vec::new(),
        best_total: f64::NEG_INFINITY,
    };
    search.visit(0, 0.0);
    let total_merit = merit.total(&search.best);
    Ok(Assignment {
        features: search.best,
        total_merit,
    })
}
