use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Per-column z-score statistics fit on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn identity(cols: usize) -> Self {
        Self {
            mean: vec![0.0; cols],
            std: vec![1.0; cols],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Population standard deviation; zero-variance columns get std 1.
    pub fn fit(train: &Matrix) -> Result<Self> {
        if train.rows() < 2 {
            return Err(Error::TooFewRows {
                got: train.rows(),
                need: 2,
            });
        }
        let n = train.rows() as f64;
        let mut mean = vec![0.0; train.cols()];
        for r in train.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; train.cols()];
        for r in train.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.std) {
            *o = (v - m) / s;
        }
    }

    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        if m.is_scaled() {
            return Err(Error::AlreadyScaled);
        }
        if m.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: m.cols(),
            });
        }
        let mut out = m.clone();
        for i in 0..m.rows() {
            self.transform_row(m.row(i), out.row_mut(i));
        }
        Ok(out.mark_scaled())
    }
}
