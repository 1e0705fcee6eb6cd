//! Classification metrics, ROC/AUC, permutation feature importance, and
//! plot-ready report files.

pub mod metrics;
pub mod pfi;
pub mod report;
pub mod roc;

pub use metrics::{balanced_accuracy, evaluate, percent, round_half_even, ClassMetrics, EvaluationReport};
pub use pfi::{permutation_importance, PfiReport, PFI_REPEATS};
pub use roc::{macro_auc, roc_curve, RocCurve, RocPoint};
