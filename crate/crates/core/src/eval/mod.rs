//! Forecast and anomaly metrics, and the evaluation loop that simulates a
//! deployed model being retrained on a schedule.

pub mod harness;
pub mod metrics;
pub mod report;

pub use harness::{
    evaluate_detector, evaluate_forecaster, optimize_threshold, optimize_threshold_pooled, AnomalyEvalOutput,
    Cadence, ForecastEvalOutput, InferenceMode, RetrainSchedule, ThresholdMode, TrainWindow,
};
pub use metrics::{tsad_metrics, ForecastMetric, PointMetrics, TsadMetrics};
pub use report::{Aggregate, EvalReport, SeriesResult};
