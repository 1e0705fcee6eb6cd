use crate::error::{Error, Result};
use crate::eval::roc::RocCurve;

/// One-vs-rest metrics for one class, as fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub class_names: Vec<String>,
    /// `confusion[actual][predicted]`
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub overall_accuracy: f64,
    pub f1_macro: f64,
    /// Binary: AUC of the positive class; multi-class: macro one-vs-rest.
    pub auc: Option<f64>,
    /// One curve per class (one-vs-rest), when scores were supplied.
    /// `(class index, curve)` for every class with both positives and negatives.
    pub roc: Vec<(usize, RocCurve)>,
}

/// Round to nearest integer, ties to even. Display values in the result
/// tables follow this rule (a balanced accuracy of exactly 84.5 shows as 84).
pub fn round_half_even(x: f64) -> i64 {
    let r = x.round();
    if (x - x.trunc()).abs() == 0.5 {
        let down = x.trunc();
        let up = down + x.signum();
        return if down as i64 % 2 == 0 { down as i64 } else { up as i64 };
    }
    r as i64
}

/// Display percentage (integer) of a fraction.
pub fn percent(fraction: f64) -> i64 {
    round_half_even(fraction * 100.0)
}

pub fn balanced_accuracy(sensitivity: f64, specificity: f64) -> f64 {
    (sensitivity + specificity) / 2.0
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion matrix and per-class one-vs-rest metrics. Labels are class
/// indices into `class_names`. Undefined ratios (empty denominators) are 0.
pub fn evaluate(predictions: &[usize], actuals: &[usize], class_names: &[&str]) -> Result<EvaluationReport> {
    if predictions.len() != actuals.len() {
        return Err(Error::LengthMismatch(predictions.len(), actuals.len()));
    }
    let k = class_names.len();
    if let Some(&bad) = predictions.iter().chain(actuals).find(|&&c| c >= k) {
        return Err(Error::UnknownLabel(bad));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &a) in predictions.iter().zip(actuals) {
        confusion[a][p] += 1;
    }
    let total = predictions.len();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let fn_ = confusion[c].iter().sum::<usize>() - tp;
            let fp = (0..k).map(|a| confusion[a][c]).sum::<usize>() - tp;
            let tn = total - tp - fn_ - fp;
            let sensitivity = ratio(tp, tp + fn_);
            let specificity = ratio(tn, tn + fp);
            ClassMetrics {
                sensitivity,
                specificity,
                balanced_accuracy: balanced_accuracy(sensitivity, specificity),
                precision: ratio(tp, tp + fp),
                f1: ratio(2 * tp, 2 * tp + fp + fn_),
            }
        })
        .collect();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let f1_macro = per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64;
    Ok(EvaluationReport {
        class_names: class_names.iter().map(|s| s.to_string()).collect(),
        confusion,
        per_class,
        overall_accuracy: ratio(correct, total),
        f1_macro,
        auc: None,
        roc: Vec::new(),
    })
}

impl EvaluationReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Attaches ROC curves from per-row class probabilities.
    pub fn with_scores(mut self, probabilities: &[Vec<f64>], actuals: &[usize]) -> Result<Self> {
        let k = self.class_names.len();
        let mut curves = Vec::with_capacity(k);
        for c in 0..k {
            let scores: Vec<f64> = probabilities.iter().map(|p| p[c]).collect();
            let positive: Vec<bool> = actuals.iter().map(|&a| a == c).collect();
            match crate::eval::roc::roc_curve(&scores, &positive) {
                Ok(curve) => curves.push((c, curve)),
                Err(Error::DegenerateClasses) => {}
                Err(e) => return Err(e),
            }
        }
        let auc = if k == 2 {
            let scores: Vec<f64> = probabilities.iter().map(|p| p[1]).collect();
            let positive: Vec<bool> = actuals.iter().map(|&a| a == 1).collect();
            crate::eval::roc::roc_curve(&scores, &positive).map(|c| c.auc)
        } else {
            crate::eval::roc::macro_auc(probabilities, actuals, k)
        };
        self.auc = match auc {
            Ok(a) => Some(a),
            Err(Error::DegenerateClasses) => None,
            Err(e) => return Err(e),
        };
        self.roc = curves;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(84.5), 84);
        assert_eq!(round_half_even(85.5), 86);
        assert_eq!(round_half_even(82.5), 82);
        assert_eq!(round_half_even(84.49), 84);
        assert_eq!(round_half_even(84.51), 85);
        assert_eq!(round_half_even(100.0), 100);
        assert_eq!(round_half_even(0.5), 0);
    }

    #[test]
    fn stage1_void_column() {
        let ba = balanced_accuracy(90.0, 79.0);
        assert_eq!(ba, 84.5);
        assert_eq!(round_half_even(ba), 84);
        assert_eq!(percent(balanced_accuracy(0.90, 0.79)), 84);
    }

    #[test]
    fn perfect_three_class() {
        let y = [0, 1, 2, 2, 1, 0, 0];
        let r = evaluate(&y, &y, &["ABD", "DO", "VOID"]).unwrap();
        assert_eq!(r.overall_accuracy, 1.0);
        assert_eq!(r.f1_macro, 1.0);
        for m in &r.per_class {
            assert_eq!((m.sensitivity, m.specificity, m.balanced_accuracy), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn hand_computed_binary() {
        // TP=1, FN=1, FP=1, TN=1 for class 1
        let pred = [1, 0, 1, 0];
        let act = [1, 1, 0, 0];
        let r = evaluate(&pred, &act, &["neg", "pos"]).unwrap();
        let m = &r.per_class[1];
        assert_eq!((percent(m.sensitivity), percent(m.specificity)), (50, 50));
        assert_eq!(percent(r.overall_accuracy), 50);
        assert_eq!(format!("{:.2}", r.f1_macro), "0.50");
        assert_eq!(r.confusion, vec![vec![1, 1], vec![1, 1]]);
    }

    #[test]
    fn errors() {
        assert!(matches!(evaluate(&[0], &[0, 1], &["a", "b"]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(evaluate(&[0, 3], &[0, 1], &["a", "b"]), Err(Error::UnknownLabel(3))));
    }
}
