use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::harness::{InferenceMode, RetrainSchedule, Timings};
use crate::stats;

/// One model evaluated on one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub series: String,
    pub model: String,
    pub metrics: BTreeMap<String, Option<f64>>,
    pub n_trains: usize,
    pub retrain_failures: usize,
    /// Set when the series could not be evaluated at all.
    pub error: Option<String>,
    pub timings: Timings,
}

impl SeriesResult {
    pub fn failed(series: impl Into<String>, model: impl Into<String>, error: impl ToString) -> Self {
        Self {
            series: series.into(),
            model: model.into(),
            metrics: BTreeMap::new(),
            n_trains: 0,
            retrain_failures: 0,
            error: Some(error.to_string()),
            timings: Timings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: String,
    pub metric: String,
    /// Series contributing a value.
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub schedule: RetrainSchedule,
    pub inference: InferenceMode,
    pub rows: Vec<SeriesResult>,
    pub aggregates: Vec<Aggregate>,
}

impl EvalReport {
    pub fn new(task: impl Into<String>, schedule: RetrainSchedule, inference: InferenceMode, rows: Vec<SeriesResult>) -> Self {
        let aggregates = aggregate(&rows);
        Self {
            task: task.into(),
            schedule,
            inference,
            rows,
            aggregates,
        }
    }

    pub fn metric_names(&self) -> Vec<String> {
        let names: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.metrics.keys()).collect();
        names.into_iter().cloned().collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// One row per series and model, then `mean` and `median` rows per model.
    /// Wall-clock timings are left out so that reruns compare equal.
    pub fn to_csv(&self) -> Result<String> {
        let names = self.metric_names();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["series".to_string(), "model".into(), "n_trains".into(), "retrain_failures".into(), "error".into()];
        header.extend(names.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![
                r.series.clone(),
                r.model.clone(),
                r.n_trains.to_string(),
                r.retrain_failures.to_string(),
                r.error.clone().unwrap_or_default(),
            ];
            rec.extend(names.iter().map(|n| fmt(r.metrics.get(n).copied().flatten())));
            w.write_record(&rec).map_err(csv_err)?;
        }
        let models: BTreeSet<&String> = self.aggregates.iter().map(|a| &a.model).collect();
        for model in models {
            for (label, pick) in [("mean", true), ("median", false)] {
                let mut rec = vec![label.to_string(), model.clone(), String::new(), String::new(), String::new()];
                rec.extend(names.iter().map(|n| {
                    let a = self.aggregates.iter().find(|a| &a.model == model && &a.metric == n);
                    fmt(a.and_then(|a| if pick { a.mean } else { a.median }))
                }));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(e.to_string())
}

/// Mean and median of every metric per model, over the series that have it.
pub fn aggregate(rows: &[SeriesResult]) -> Vec<Aggregate> {
    let mut values: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in rows {
        for (name, v) in &r.metrics {
            let slot = values.entry((r.model.as_str(), name.as_str())).or_default();
            if let Some(v) = v.filter(|v| v.is_finite()) {
                slot.push(v);
            }
        }
    }
    values
        .into_iter()
        .map(|((model, metric), v)| Aggregate {
            model: model.into(),
            metric: metric.into(),
            count: v.len(),
            mean: (!v.is_empty()).then(|| stats::mean(&v)),
            median: (!v.is_empty()).then(|| stats::median(&v)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(series: &str, model: &str, smape: Option<f64>) -> SeriesResult {
        SeriesResult {
            series: series.into(),
            model: model.into(),
            metrics: [("smape".to_string(), smape)].into_iter().collect(),
            n_trains: 1,
            retrain_failures: 0,
            error: None,
            timings: Timings::default(),
        }
    }

    #[test]
    fn aggregates_skip_missing_values() {
        let rows = vec![row("a", "m", Some(1.0)), row("b", "m", Some(4.0)), row("c", "m", None), row("d", "m", Some(2.0))];
        let r = EvalReport::new("forecast", RetrainSchedule::default(), InferenceMode::Batch, rows);
        let a = &r.aggregates[0];
        assert_eq!((a.count, a.mean, a.median), (3, Some(7.0 / 3.0), Some(2.0)));
        let csv = r.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "series,model,n_trains,retrain_failures,error,smape");
        assert_eq!(lines[3], "c,m,1,0,,");
        assert_eq!(lines[5], format!("mean,m,,,,{}", 7.0f64 / 3.0));
        assert_eq!(lines[6], "median,m,,,,2");
    }

    #[test]
    fn json_round_trip() {
        let r = EvalReport::new("anomaly", RetrainSchedule::default(), InferenceMode::Window(3), vec![row("a", "m", Some(0.5))]);
        let back: EvalReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
