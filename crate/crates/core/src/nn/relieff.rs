//! ReliefF feature weighting (Kononenko's multi-class variant).
//!
//! Every row is used as a reference instance. For each, the `k` nearest
//! hits lower a feature's weight by their per-feature difference and the
//! `k` nearest misses of every other class raise it, weighted by that
//! class's prior relative to the non-reference classes. Differences are
//! range-normalized per feature and distances are Manhattan.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ReliefRanking {
    /// Weight per feature, in input column order.
    pub weights: Vec<f64>,
    /// Feature indices sorted by descending weight (ties by index).
    pub order: Vec<usize>,
}

impl ReliefRanking {
    /// The `n` best features, in column order.
    pub fn top(&self, n: usize) -> Vec<usize> {
        let mut keep: Vec<usize> = self.order.iter().take(n).copied().collect();
        keep.sort_unstable();
        keep
    }
}

pub fn relieff_rank(x: &Matrix, labels: &[usize], k: usize) -> Result<ReliefRanking> {
    if labels.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: labels.len(),
        });
    }
    let n = x.rows();
    let p = x.cols();
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    for (&class, rows) in &by_class {
        if rows.len() < k + 1 {
            return Err(Error::TooFewRowsPerClass {
                class,
                got: rows.len(),
                need: k + 1,
            });
        }
    }

    let range: Vec<f64> = (0..p)
        .map(|j| {
            let col = x.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .collect();
    let diff = |a: usize, b: usize, j: usize| -> f64 {
        if range[j] > 0.0 {
            (x.get(a, j) - x.get(b, j)).abs() / range[j]
        } else {
            0.0
        }
    };
    let distance = |a: usize, b: usize| -> f64 { (0..p).map(|j| diff(a, b, j)).sum() };
    let prior: BTreeMap<usize, f64> = by_class
        .iter()
        .map(|(&c, rows)| (c, rows.len() as f64 / n as f64))
        .collect();

    let nearest = |r: usize, pool: &[usize]| -> Vec<usize> {
        let mut cand: Vec<(f64, usize)> = pool
            .iter()
            .filter(|&&i| i != r)
            .map(|&i| (distance(r, i), i))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.into_iter().take(k).map(|(_, i)| i).collect()
    };

    let mut weights = vec![0.0; p];
    let norm = (n * k) as f64;
    for (r, &own) in labels.iter().enumerate() {
        for h in nearest(r, &by_class[&own]) {
            for (j, w) in weights.iter_mut().enumerate() {
                *w -= diff(r, h, j) / norm;
            }
        }
        for (&class, rows) in &by_class {
            if class == own {
                continue;
            }
            let factor = prior[&class] / (1.0 - prior[&own]);
            for m in nearest(r, rows) {
                for (j, w) in weights.iter_mut().enumerate() {
                    *w += factor * diff(r, m, j) / norm;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    Ok(ReliefRanking { weights, order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|&y| {
                let mut r = vec![y as f64 * 4.0 + rng.random_range(-1.0..1.0)];
                r.extend((1..10).map(|_| rng.random_range(-5.0..5.0)));
                r
            })
            .collect();
        (Matrix::from_rows(&rows, 10).unwrap(), labels)
    }

    #[test]
    fn informative_feature_ranks_first() {
        let (x, y) = noisy(80, 1);
        let r = relieff_rank(&x, &y, 5).unwrap();
        assert_eq!(r.order[0], 0);
        assert!(r.weights[0] > 0.0);
    }

    #[test]
    fn six_point_hand_trace() {
        // positions 0..5 on one axis, classes [0,0,0,1,1,1], k = 1.
        // contributions (miss − hit)/range: 2/5, 1/5, 0, 0, 1/5, 2/5 → mean 0.2
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]], 1).unwrap();
        let r = relieff_rank(&x, &[0, 0, 0, 1, 1, 1], 1).unwrap();
        assert!((r.weights[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn duplicated_columns_get_equal_weights() {
        let (x, y) = noisy(40, 2);
        let cols: Vec<usize> = vec![0, 1, 2, 0, 1, 2];
        let dup = x.select_cols(&cols);
        let r = relieff_rank(&dup, &y, 3).unwrap();
        for j in 0..3 {
            assert!((r.weights[j] - r.weights[j + 3]).abs() < 1e-9);
        }
    }

    #[test]
    fn permutation_invariant() {
        let (x, y) = noisy(50, 3);
        let perm: Vec<usize> = vec![7, 2, 9, 0, 4, 1, 8, 3, 6, 5];
        let a = relieff_rank(&x, &y, 4).unwrap();
        let b = relieff_rank(&x.select_cols(&perm), &y, 4).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert!((b.weights[new] - a.weights[old]).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_rows_per_class() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]], 1).unwrap();
        assert!(matches!(
            relieff_rank(&x, &[0, 0, 0, 1], 1),
            Err(Error::TooFewRowsPerClass { class: 1, .. })
        ));
    }
}
