//! Datasets, metrics and batch evaluation.

pub mod dataset;
pub mod harness;
pub mod metrics;

pub use dataset::{stratified_sample, Dataset, DatasetError, EvalRecord, GoldObject, ImageRef, LoadedDataset, Task};
pub use harness::{answer_text, run_eval, tagged_objects, EvalError, EvalOptions, EvalReport, EvalSummary, PrecisionRecall, RecordRow, RunSummary};
pub use metrics::{accuracy, aggregate_f1, iou, match_tagging, F1Summary, MatchMode, MatchResult, MetricError};
