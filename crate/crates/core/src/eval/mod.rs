//! Metrics, reports and the experiment harnesses.

mod experiments;
mod metrics;
mod report;

pub use experiments::{
    comparison_experiment, drop_order, evaluate_embedding, evaluate_pa, hash_candidates, latency_experiment, prepare,
    rolling_window_experiment, run_method, runtime_experiment, runtime_report, synthetic_data, train_method,
    ComparisonRow, LatencyRow, Method, PipelineConfig, Prepared, RollingConfig, RollingResult, RollingStep,
    RuntimeRow, StageTimings, SyntheticData,
};
pub use metrics::{roc_and_metrics, roc_with_targets, Metrics, OperatingPoint, FPR_TARGETS};
pub use report::{fpr_key, write_json, write_roc_csv, write_rolling_csv, EvalReport, Summary, SCHEMA_VERSION};
