//! Statistics relating capacity to distribution difference and specificity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::capacity::{capacity_batch, CapacityReport, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::AssociationTable;
use crate::stochastic::MonteCarloConfig;

/// One concept subset of the analysis frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub concepts: Vec<String>,
    pub capacity: f64,
    /// Raw TV (two concepts) or GTV.
    pub distribution_difference: f64,
    /// Distribution difference divided by its maximum over the frame.
    pub normalized_difference: f64,
    pub mean_entropy: f64,
    /// `1 −` min-max normalized mean entropy.
    pub specificity: f64,
    /// `ln(normalized_difference)`; absent when the difference is zero.
    pub log_distribution_difference: Option<f64>,
    /// `ln(1 − H_μ / ln N)`; absent when every concept is uniform.
    pub log_specificity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisFrame {
    pub k: usize,
    pub rows: Vec<AnalysisRow>,
    /// Indices of rows left out of log-scale statistics.
    pub flagged: Vec<usize>,
}

impl AnalysisFrame {
    /// Assembles the frame from capacity reports over a library of
    /// `n_features` features.
    pub fn from_reports(k: usize, n_features: usize, reports: &[CapacityReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::Argument("no capacity reports".into()));
        }
        let max_difference = reports
            .iter()
            .map(|r| r.distribution_difference)
            .fold(0.0, f64::max);
        if max_difference <= 0.0 {
            return Err(Error::Degenerate(
                "every subset has zero distribution difference".into(),
            ));
        }
        let entropies: Vec<f64> = reports.iter().map(|r| r.mean_entropy).collect();
        let specificity = crate::model::specificity_scores(&entropies)?;
        let max_entropy = (n_features as f64).ln();

        let mut rows = Vec::with_capacity(reports.len());
        let mut flagged = Vec::new();
        for (index, (report, specificity)) in reports.iter().zip(specificity).enumerate() {
            let normalized_difference = report.distribution_difference / max_difference;
            let log_distribution_difference =
                (normalized_difference > 0.0).then(|| normalized_difference.ln());
            let peak = 1.0 - report.mean_entropy / max_entropy;
            let log_specificity = (peak > 0.0).then(|| peak.ln());
            if log_distribution_difference.is_none() || log_specificity.is_none() {
                log::warn!(
                    "subset {:?} excluded from log-scale statistics",
                    report.concepts
                );
                flagged.push(index);
            }
            rows.push(AnalysisRow {
                concepts: report.concepts.clone(),
                capacity: report.max_capacity,
                distribution_difference: report.distribution_difference,
                normalized_difference,
                mean_entropy: report.mean_entropy,
                specificity,
                log_distribution_difference,
                log_specificity,
            });
        }
        Ok(Self { k, rows, flagged })
    }

    /// Capacity, log distribution difference and log specificity over the
    /// unflagged rows.
    pub fn log_columns(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut capacity = Vec::new();
        let mut difference = Vec::new();
        let mut specificity = Vec::new();
        for row in &self.rows {
            if let (Some(d), Some(s)) = (row.log_distribution_difference, row.log_specificity) {
                capacity.push(row.capacity);
                difference.push(d);
                specificity.push(s);
            }
        }
        (capacity, difference, specificity)
    }
}

/// Capacity, distribution difference and specificity for every `k`-subset.
pub fn build_frame(
    table: &AssociationTable,
    k: usize,
    config: &MonteCarloConfig,
) -> Result<AnalysisFrame> {
    let mut reports = Vec::new();
    capacity_batch(table, k, config, DEFAULT_THRESHOLD, |record| {
        reports.push(record.report);
        Ok(())
    })?;
    AnalysisFrame::from_reports(k, table.n_features(), &reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub df: usize,
    /// Two-sided.
    pub p: f64,
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Argument(
            "correlation needs at least 3 points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = x.len() - 2;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df as f64 / (1.0 - r * r)).sqrt();
        two_sided_t(t, df as f64)
    };
    Ok(Correlation { r, df, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherComparison {
    pub z: f64,
    /// Two-sided.
    pub p: f64,
}

fn fisher_z(r: f64) -> Result<f64> {
    if r.is_nan() || r.abs() >= 1.0 {
        return Err(Error::TransformUndefined(r));
    }
    Ok(r.atanh())
}

/// Compares two correlations from independent samples of size `df + 2`:
/// `z = (atanh r₁ − atanh r₂) / √(2/(n − 3))`.
pub fn fisher_r_to_z_compare(r1: f64, r2: f64, df: usize) -> Result<FisherComparison> {
    let (z1, z2) = (fisher_z(r1)?, fisher_z(r2)?);
    let n = df as f64 + 2.0;
    if n <= 3.0 {
        return Err(Error::Argument(
            "sample too small for the Fisher test".into(),
        ));
    }
    let z = (z1 - z2) / (2.0 / (n - 3.0)).sqrt();
    Ok(FisherComparison {
        z,
        p: two_sided_normal(z),
    })
}

/// Meng–Rosenthal–Rubin test for two correlations sharing one variable,
/// with `r12` the correlation between the two other variables.
pub fn fisher_r_to_z_compare_dependent(
    r1: f64,
    r2: f64,
    r12: f64,
    df: usize,
) -> Result<FisherComparison> {
    let (z1, z2) = (fisher_z(r1)?, fisher_z(r2)?);
    fisher_z(r12)?;
    let n = df as f64 + 2.0;
    if n <= 3.0 {
        return Err(Error::Argument(
            "sample too small for the Fisher test".into(),
        ));
    }
    let mean_sq = 0.5 * (r1 * r1 + r2 * r2);
    let f = ((1.0 - r12) / (2.0 * (1.0 - mean_sq))).min(1.0);
    let h = (1.0 - f * mean_sq) / (1.0 - mean_sq);
    let z = (z1 - z2) * ((n - 3.0) / (2.0 * (1.0 - r12) * h)).sqrt();
    Ok(FisherComparison {
        z,
        p: two_sided_normal(z),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    /// Intercept first, then one entry per predictor.
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub residual_df: usize,
}

/// Centers and scales to unit sample variance.
pub fn z_score(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Argument("z-scoring needs at least 2 values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(Error::Degenerate("cannot z-score a constant column".into()));
    }
    let sd = var.sqrt();
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// Ordinary least squares with an intercept, solved by Householder QR.
pub fn ols_regression(
    y: &[f64],
    predictors: &[(&str, &[f64])],
    z_score_predictors: bool,
) -> Result<Regression> {
    let rows = y.len();
    let p = predictors.len() + 1;
    if rows < p + 2 {
        return Err(Error::Argument(format!(
            "{rows} observations cannot support {p} coefficients"
        )));
    }
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(predictors.len());
    for (name, x) in predictors {
        if x.len() != rows {
            return Err(Error::Shape(format!(
                "predictor `{name}` has {} values, expected {rows}",
                x.len()
            )));
        }
        columns.push(if z_score_predictors {
            z_score(x)?
        } else {
            x.to_vec()
        });
    }
    let design = DMatrix::from_fn(rows, p, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let response = DVector::from_column_slice(y);

    let qr = design.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..p).any(|j| r[(j, j)].abs() <= 1e-10 * scale.max(1.0)) {
        return Err(Error::SingularDesign(
            "predictors are linearly dependent".into(),
        ));
    }
    let qty = qr.q().transpose() * &response;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign("triangular solve failed".into()))?;

    let residuals = &response - &design * &beta;
    let rss = residuals.norm_squared();
    let residual_df = rows - p;
    let sigma2 = rss / residual_df as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::SingularDesign("triangular inverse failed".into()))?;

    let mean_y = y.iter().sum::<f64>() / rows as f64;
    let tss: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    let names = std::iter::once("intercept").chain(predictors.iter().map(|(n, _)| *n));
    let coefficients = names
        .enumerate()
        .map(|(j, name)| {
            let se = (sigma2 * r_inv.row(j).norm_squared()).sqrt();
            let b = beta[j];
            let (t, p) = if se > 0.0 {
                let t = b / se;
                (t, two_sided_t(t, residual_df as f64))
            } else if b == 0.0 {
                (0.0, 1.0)
            } else {
                (f64::INFINITY.copysign(b), 0.0)
            };
            Coefficient {
                name: name.to_string(),
                beta: b,
                se,
                t,
                p,
            }
        })
        .collect();
    Ok(Regression {
        coefficients,
        r_squared,
        residual_df,
    })
}

fn two_sided_t(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.cdf(-t.abs())).min(1.0)
}

fn two_sided_normal(z: f64) -> f64 {
    let dist = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * dist.cdf(-z.abs())).min(1.0)
}

/// Correlations, their comparison and the two-predictor regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub k: usize,
    pub rows: usize,
    pub rows_used: usize,
    pub capacity_vs_difference: Correlation,
    pub capacity_vs_specificity: Correlation,
    pub difference_vs_specificity: Correlation,
    pub fisher_independent: FisherComparison,
    pub fisher_dependent: FisherComparison,
    pub regression: Regression,
}

pub fn summarize(frame: &AnalysisFrame) -> Result<AnalysisSummary> {
    let (capacity, difference, specificity) = frame.log_columns();
    let cd = pearson_r(&capacity, &difference)?;
    let cs = pearson_r(&capacity, &specificity)?;
    let ds = pearson_r(&difference, &specificity)?;
    let fisher_independent = fisher_r_to_z_compare(cd.r.abs(), cs.r.abs(), cd.df)?;
    let fisher_dependent = fisher_r_to_z_compare_dependent(cd.r, cs.r, ds.r, cd.df)?;

    let y: Vec<f64> = frame.rows.iter().map(|r| r.capacity).collect();
    let dd: Vec<f64> = frame.rows.iter().map(|r| r.normalized_difference).collect();
    let sp: Vec<f64> = frame.rows.iter().map(|r| r.specificity).collect();
    let regression = ols_regression(
        &y,
        &[("distribution_difference", &dd), ("specificity", &sp)],
        true,
    )?;
    Ok(AnalysisSummary {
        k: frame.k,
        rows: frame.rows.len(),
        rows_used: capacity.len(),
        capacity_vs_difference: cd,
        capacity_vs_specificity: cs,
        difference_vs_specificity: ds,
        fisher_independent,
        fisher_dependent,
        regression,
    })
}
