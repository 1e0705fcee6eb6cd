//! Optional k-fold cross-validated grid over learning rate and hidden
//! layer widths. Folds are stratified by label and seeded.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{train, Matrix, MlpModel, StageTag, TrainConfig};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: GridPoint,
    /// Mean validation accuracy of every grid point, in grid order.
    pub scores: Vec<(GridPoint, f64)>,
}

/// Stratified fold assignment: fold index per row.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for rows in by_class.values_mut() {
        rows.shuffle(&mut rng);
        for &i in rows.iter() {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

pub fn kfold_grid_search(
    x: &Matrix,
    labels: &[usize],
    n_classes: usize,
    grid: &[GridPoint],
    k: usize,
    base: &TrainConfig,
) -> Result<GridResult> {
    if grid.is_empty() || k < 2 {
        return Err(Error::Config("grid search needs a non-empty grid and k ≥ 2".into()));
    }
    if x.rows() < 2 * k {
        return Err(Error::TooFewRows { got: x.rows(), need: 2 * k });
    }
    let folds = stratified_folds(labels, k, base.seed);
    let mut scores = Vec::with_capacity(grid.len());
    for point in grid {
        let cfg = TrainConfig {
            learning_rate: point.learning_rate,
            ..base.clone()
        };
        let mut dims = vec![x.cols()];
        dims.extend(&point.hidden);
        dims.push(n_classes);
        let mut acc_sum = 0.0;
        for f in 0..k {
            let train_idx: Vec<usize> = (0..x.rows()).filter(|&i| folds[i] != f).collect();
            let val_idx: Vec<usize> = (0..x.rows()).filter(|&i| folds[i] == f).collect();
            let y_train: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let model = MlpModel::new(&dims, StageTag::Generic, base.seed);
            let (model, _) = train(&model, &x.select_rows(&train_idx), &y_train, &cfg)?;
            let pred = model.predict(&x.select_rows(&val_idx))?;
            let correct = pred.iter().zip(&val_idx).filter(|(p, &i)| **p == labels[i]).count();
            acc_sum += correct as f64 / val_idx.len().max(1) as f64;
        }
        scores.push((point.clone(), acc_sum / k as f64));
    }
    // first best wins ties
    let mut best = 0;
    for (i, (_, s)) in scores.iter().enumerate() {
        if *s > scores[best].1 {
            best = i;
        }
    }
    Ok(GridResult {
        best: scores[best].0.clone(),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_and_deterministic() {
        let labels: Vec<usize> = (0..50).map(|i| usize::from(i % 5 == 0)).collect();
        let f = stratified_folds(&labels, 5, 3);
        for k in 0..5 {
            let n = f.iter().filter(|&&x| x == k).count();
            assert_eq!(n, 10);
            let pos = f.iter().zip(&labels).filter(|(&x, &y)| x == k && y == 1).count();
            assert_eq!(pos, 2);
        }
        assert_eq!(f, stratified_folds(&labels, 5, 3));
    }

    #[test]
    fn grid_prefers_a_learning_rate_that_learns() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 2) as f64 * 3.0 + (i as f64 * 0.01), (i % 7) as f64]).collect();
        let labels: Vec<usize> = (0..60).map(|i| i % 2).collect();
        let x = Matrix::from_rows(&rows, 2).unwrap();
        let grid = vec![
            GridPoint { learning_rate: 1e-9, hidden: vec![8] },
            GridPoint { learning_rate: 1e-2, hidden: vec![8] },
        ];
        let base = TrainConfig { epochs: 20, batch_size: 16, seed: 1, ..TrainConfig::default() };
        let r = kfold_grid_search(&x, &labels, 2, &grid, 3, &base).unwrap();
        assert_eq!(r.best, grid[1]);
        assert_eq!(r.scores.len(), 2);
    }
}
