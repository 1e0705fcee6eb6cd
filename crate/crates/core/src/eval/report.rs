//! CSV writers for metrics tables, confusion matrices and ROC points.

use std::fmt::Write as _;

use crate::eval::metrics::{percent, EvaluationReport};

/// Metrics laid out like the published result tables: one column per
/// (configuration, class), one row per metric. Overall accuracy, F1-macro
/// and AUC appear once per configuration, in its first column.
pub fn metrics_table_csv(sections: &[(&str, &EvaluationReport)]) -> String {
    let mut out = String::from("metric");
    for (name, r) in sections {
        for c in &r.class_names {
            let _ = write!(out, ",{name}:{c}");
        }
    }
    out.push('\n');

    type PerClass = fn(&crate::eval::ClassMetrics) -> f64;
    let rows: [(&str, PerClass); 3] = [
        ("Balanced Accuracy (%)", |m| m.balanced_accuracy),
        ("Sensitivity (%)", |m| m.sensitivity),
        ("Specificity (%)", |m| m.specificity),
    ];
    for (label, get) in rows {
        out.push_str(label);
        for (_, r) in sections {
            for m in &r.per_class {
                let _ = write!(out, ",{}", percent(get(m)));
            }
        }
        out.push('\n');
    }
    type Overall = fn(&EvaluationReport) -> String;
    let overall: [(&str, Overall); 3] = [
        ("Overall Accuracy (%)", |r| percent(r.overall_accuracy).to_string()),
        ("F1-macro", |r| format!("{:.2}", r.f1_macro)),
        ("AUC", |r| r.auc.map(|a| format!("{a:.2}")).unwrap_or_default()),
    ];
    for (label, get) in overall {
        out.push_str(label);
        for (_, r) in sections {
            let _ = write!(out, ",{}", get(r));
            for _ in 1..r.class_names.len() {
                out.push(',');
            }
        }
        out.push('\n');
    }
    out
}

/// `configuration,actual,<predicted class names...>`
pub fn confusion_csv(sections: &[(&str, &EvaluationReport)]) -> String {
    let mut out = String::from("configuration,actual,predicted,count\n");
    for (name, r) in sections {
        for (a, row) in r.confusion.iter().enumerate() {
            for (p, n) in row.iter().enumerate() {
                let _ = writeln!(out, "{name},{},{},{n}", r.class_names[a], r.class_names[p]);
            }
        }
    }
    out
}

/// `class,fpr,tpr,threshold` with the class qualified by configuration.
pub fn roc_csv(sections: &[(&str, &EvaluationReport)]) -> String {
    let mut out = String::from("class,fpr,tpr,threshold\n");
    for (name, r) in sections {
        for (class, curve) in &r.roc {
            for p in &curve.points {
                let _ = writeln!(out, "{name}:{},{},{},{}", r.class_names[*class], p.fpr, p.tpr, p.threshold);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::evaluate;

    #[test]
    fn table_layout() {
        let s1 = evaluate(&[1, 0, 1, 0], &[1, 1, 0, 0], &["Non-VOID", "VOID"]).unwrap();
        let s2 = evaluate(&[0, 1, 2], &[0, 1, 2], &["ABD", "DO", "VOID"]).unwrap();
        let csv = metrics_table_csv(&[("Stage 1", &s1), ("Cascaded", &s2)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "metric,Stage 1:Non-VOID,Stage 1:VOID,Cascaded:ABD,Cascaded:DO,Cascaded:VOID"
        );
        assert_eq!(lines[1], "Balanced Accuracy (%),50,50,100,100,100");
        assert_eq!(lines[4], "Overall Accuracy (%),50,,100,,");
        assert_eq!(lines[5], "F1-macro,0.50,,1.00,,");
        assert_eq!(lines.len(), 7);
    }
}
