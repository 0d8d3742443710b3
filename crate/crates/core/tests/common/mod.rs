#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semdisc::model::{AssociationTable, ConceptDistribution};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random ratings in [0, 1], rows = features.
pub fn random_rows(rng: &mut ChaCha8Rng, features: usize, concepts: usize) -> Vec<Vec<f64>> {
    (0..features)
        .map(|_| (0..concepts).map(|_| rng.gen::<f64>()).collect())
        .collect()
}

pub fn random_table(rng: &mut ChaCha8Rng, features: usize, concepts: usize) -> AssociationTable {
    AssociationTable::from_rows(&random_rows(rng, features, concepts)).unwrap()
}

/// A probability vector with some exact zeros mixed in.
pub fn random_distribution(rng: &mut ChaCha8Rng, len: usize) -> ConceptDistribution {
    let mut raw: Vec<f64> = (0..len)
        .map(|_| {
            if rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen::<f64>()
            }
        })
        .collect();
    if raw.iter().all(|&v| v == 0.0) {
        raw[0] = 1.0;
    }
    let sum: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|v| v / sum).collect();
    ConceptDistribution::new("c", probs).unwrap()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Maximum-likelihood error by enumerating every (concept, feature) outcome.
pub fn enumerated_ml_error(dists: &[ConceptDistribution]) -> f64 {
    let k = dists.len();
    let n = dists[0].len();
    let mut error = 0.0;
    for truth in 0..k {
        for feature in 0..n {
            let likelihood = dists[truth].probabilities()[feature];
            if likelihood == 0.0 {
                continue;
            }
            // The guess is the first concept with the highest likelihood.
            let mut guess = 0;
            for c in 1..k {
                if dists[c].probabilities()[feature] > dists[guess].probabilities()[feature] {
                    guess = c;
                }
            }
            if guess != truth {
                error += likelihood / k as f64;
            }
        }
    }
    error
}

/// Dense random 71 x `concepts` table with smooth structure, ids "1".."71".
pub fn synthetic_library_table(seed: u64, concepts: usize) -> AssociationTable {
    use semdisc::model::{ConceptSet, FeatureLibrary, Matrix};
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(71 * concepts);
    let centers: Vec<f64> = (0..concepts).map(|_| r.gen_range(0.0..71.0)).collect();
    let widths: Vec<f64> = (0..concepts).map(|_| r.gen_range(4.0..20.0)).collect();
    for i in 0..71 {
        for j in 0..concepts {
            let d = (i as f64 - centers[j]) / widths[j];
            let v = 0.1 + 0.8 * (-0.5 * d * d).exp() + r.gen_range(-0.05..0.05);
            data.push((v.clamp(0.0, 1.0) * 1e4).round() / 1e4);
        }
    }
    AssociationTable::new(
        FeatureLibrary::from_ids((1..=71).map(|i| i.to_string())).unwrap(),
        ConceptSet::new((0..concepts).map(|j| format!("concept{}", j + 1))).unwrap(),
        Matrix::new(71, concepts, data).unwrap(),
    )
    .unwrap()
}

/// Least squares through the normal equations, solved by Gauss-Jordan
/// elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn normal_equations(y: &[f64], columns: &[Vec<f64>]) -> Vec<f64> {
    let p = columns.len() + 1;
    let x = |i: usize, j: usize| if j == 0 { 1.0 } else { columns[j - 1][i] };
    let mut a = vec![vec![0.0; p + 1]; p];
    for r in 0..p {
        for c in 0..p {
            a[r][c] = (0..y.len()).map(|i| x(i, r) * x(i, c)).sum();
        }
        a[r][p] = (0..y.len()).map(|i| x(i, r) * y[i]).sum();
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..p {
            if row != col {
                let factor = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}
