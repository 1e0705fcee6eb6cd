use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called positive; the first point uses +inf.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC by sweeping every distinct score as a threshold, highest first.
/// AUC is the trapezoid area, accumulated in integer counts so that it
/// equals the Mann–Whitney pair statistic (ties count one half) exactly.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<RocCurve> {
    if scores.len() != positive.len() {
        return Err(Error::LengthMismatch(scores.len(), positive.len()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateClasses);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area, in units of one (positive, negative) pair
    let mut area2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (tp_prev, fp_prev) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp_prev) * (tp + tp_prev);
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold,
        });
    }
    Ok(RocCurve {
        points,
        auc: area2 as f64 / (2 * n_pos as u64 * n_neg as u64) as f64,
    })
}

/// Unweighted mean of one-vs-rest AUCs over classes that have both
/// positives and negatives.
pub fn macro_auc(probabilities: &[Vec<f64>], actuals: &[usize], n_classes: usize) -> Result<f64> {
    let mut sum = 0.0;
    let mut used = 0;
    for c in 0..n_classes {
        let scores: Vec<f64> = probabilities.iter().map(|p| p[c]).collect();
        let positive: Vec<bool> = actuals.iter().map(|&a| a == c).collect();
        match roc_curve(&scores, &positive) {
            Ok(curve) => {
                sum += curve.auc;
                used += 1;
            }
            Err(Error::DegenerateClasses) => {}
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::DegenerateClasses);
    }
    Ok(sum / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive pair count: P(score_pos > score_neg) + ½·P(tie).
    fn mann_whitney(scores: &[f64], positive: &[bool]) -> f64 {
        let mut num2 = 0u64;
        let mut pairs = 0u64;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if positive[i] && !positive[j] {
                    pairs += 1;
                    num2 += if scores[i] > scores[j] {
                        2
                    } else if scores[i] == scores[j] {
                        1
                    } else {
                        0
                    };
                }
            }
        }
        num2 as f64 / (2 * pairs) as f64
    }

    #[test]
    fn perfect_and_chance() {
        let pos = [true, true, false, false];
        assert_eq!(roc_curve(&[0.9, 0.8, 0.2, 0.1], &pos).unwrap().auc, 1.0);
        assert_eq!(roc_curve(&[0.5; 4], &pos).unwrap().auc, 0.5);
        assert_eq!(roc_curve(&[0.1, 0.2, 0.8, 0.9], &pos).unwrap().auc, 0.0);
    }

    #[test]
    fn six_samples_match_pair_count() {
        let scores = [0.9, 0.4, 0.4, 0.7, 0.1, 0.4];
        let pos = [true, true, false, false, false, true];
        let c = roc_curve(&scores, &pos).unwrap();
        assert_eq!(c.auc, mann_whitney(&scores, &pos));
        // 9 pairs: wins 0.9>{0.4,0.7,0.1}=3, 0.4>0.1 twice=2, ties 0.4=0.4 twice=1 → 6/9
        assert!((c.auc - 6.0 / 9.0).abs() < 1e-15);
        let last = c.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(c.points.len(), 5);
    }

    #[test]
    fn degenerate() {
        assert!(matches!(roc_curve(&[0.1, 0.2], &[true, true]), Err(Error::DegenerateClasses)));
    }

    #[test]
    fn macro_average() {
        let probs = vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8]];
        assert_eq!(macro_auc(&probs, &[0, 1, 2], 3).unwrap(), 1.0);
    }
}
