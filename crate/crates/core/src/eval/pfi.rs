//! Permutation feature importance: the drop in accuracy when one feature
//! column is shuffled across the evaluation rows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const PFI_REPEATS: usize = 5;
pub const MIN_EVENTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct PfiReport {
    pub feature_names: Vec<String>,
    pub baseline_accuracy: f64,
    /// `drops[feature][repeat]`
    pub drops: Vec<Vec<f64>>,
    pub mean_drop: Vec<f64>,
    pub std_drop: Vec<f64>,
    pub seed: u64,
}

impl PfiReport {
    pub fn repeats(&self) -> usize {
        self.drops.first().map_or(0, Vec::len)
    }

    /// `(feature name, mean drop)`, largest drop first; ties by column order.
    pub fn top(&self, n: usize) -> Vec<(String, f64)> {
        let mut idx: Vec<usize> = (0..self.mean_drop.len()).collect();
        idx.sort_by(|&a, &b| self.mean_drop[b].total_cmp(&self.mean_drop[a]).then(a.cmp(&b)));
        idx.into_iter()
            .take(n)
            .map(|j| (self.feature_names[j].clone(), self.mean_drop[j]))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,mean_drop,std_drop\n");
        for ((name, m), s) in self.feature_names.iter().zip(&self.mean_drop).zip(&self.std_drop) {
            out.push_str(&format!("{name},{m},{s}\n"));
        }
        out
    }
}

fn accuracy(pred: &[usize], actual: &[usize]) -> f64 {
    pred.iter().zip(actual).filter(|(p, a)| p == a).count() as f64 / actual.len() as f64
}

/// `predict` maps raw (unscaled) rows to class indices. Each feature gets
/// its own RNG stream derived from `(seed, feature index)`, so the report
/// does not depend on evaluation order or thread count.
pub fn permutation_importance<F>(
    predict: F,
    x: &Matrix,
    actuals: &[usize],
    feature_names: &[String],
    seed: u64,
    repeats: usize,
) -> Result<PfiReport>
where
    F: Fn(&Matrix) -> Result<Vec<usize>> + Sync,
{
    if x.rows() < MIN_EVENTS {
        return Err(Error::TooFewEvents {
            got: x.rows(),
            need: MIN_EVENTS,
        });
    }
    if actuals.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), actuals.len()));
    }
    if feature_names.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            actual: feature_names.len(),
        });
    }
    let baseline = accuracy(&predict(x)?, actuals);
    let drops: Vec<Vec<f64>> = (0..x.cols())
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let column = x.column(j);
            let mut permuted = x.clone();
            (0..repeats)
                .map(|_| {
                    let mut col = column.clone();
                    col.shuffle(&mut rng);
                    for (i, v) in col.into_iter().enumerate() {
                        permuted.set(i, j, v);
                    }
                    Ok(baseline - accuracy(&predict(&permuted)?, actuals))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mean_drop: Vec<f64> = drops.iter().map(|d| d.iter().sum::<f64>() / d.len().max(1) as f64).collect();
    let std_drop = drops
        .iter()
        .zip(&mean_drop)
        .map(|(d, m)| (d.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / d.len().max(1) as f64).sqrt())
        .collect();
    Ok(PfiReport {
        feature_names: feature_names.to_vec(),
        baseline_accuracy: baseline,
        drops,
        mean_drop,
        std_drop,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize) -> (Matrix, Vec<usize>, Vec<String>) {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 2) as f64, (i % 7) as f64, i as f64]).collect();
        let y = (0..n).map(|i| i % 2).collect();
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        (Matrix::from_rows(&rows, 3).unwrap(), y, names)
    }

    #[test]
    fn unused_feature_has_zero_drop() {
        let (x, y, names) = data(40);
        let predict = |m: &Matrix| Ok(m.iter_rows().map(|r| usize::from(r[0] > 0.5)).collect());
        let r = permutation_importance(predict, &x, &y, &names, 1, PFI_REPEATS).unwrap();
        assert_eq!(r.baseline_accuracy, 1.0);
        assert_eq!(r.mean_drop[1], 0.0);
        assert_eq!(r.mean_drop[2], 0.0);
        assert!(r.mean_drop[0] > 0.2);
        assert_eq!(r.top(1)[0].0, "a");
        assert_eq!(r.repeats(), 5);
    }

    #[test]
    fn deterministic_and_guarded() {
        let (x, y, names) = data(30);
        let predict = |m: &Matrix| Ok(m.iter_rows().map(|r| usize::from(r[0] + r[1] > 3.0)).collect());
        let a = permutation_importance(predict, &x, &y, &names, 9, 5).unwrap();
        let b = permutation_importance(predict, &x, &y, &names, 9, 5).unwrap();
        assert_eq!(a, b);
        let (small, ys, _) = data(9);
        assert!(matches!(
            permutation_importance(predict, &small, &ys, &names, 9, 5),
            Err(Error::TooFewEvents { got: 9, .. })
        ));
    }
}
