//! Runs every model over every series and writes the results.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use tslab_core::data::split_at;
use tslab_core::eval::{evaluate_detector, evaluate_forecaster, EvalReport, SeriesResult};

use crate::config::{Models, Resolved, RunConfig, Task};
use crate::dataset::{load_dataset, LoadedSeries};
use crate::plot;

pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_CSV: &str = "results.csv";

#[derive(Debug, Clone, Serialize)]
pub struct RunOutput<'a> {
    pub config: &'a RunConfig,
    pub primary_metric: &'static str,
    pub report: &'a EvalReport,
}

/// Per-series seed: stable under reordering of models and thread count.
fn series_seed(base: u64, series: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(series as u64)
}

struct Outcome {
    row: SeriesResult,
    plot: Option<String>,
}

fn run_forecast(
    r: &Resolved,
    s: &LoadedSeries,
    idx: usize,
    model: &tslab_core::forecast::ForecasterConfig,
) -> anyhow::Result<Outcome> {
    let (train, test) = split_at(&s.ts, r.manifest.train_fraction)?;
    let seed = series_seed(r.config.seed, idx);
    let out = evaluate_forecaster(|| model.build(seed), &train, &test, &r.config.schedule, r.config.inference)?;
    let plot = (!r.config.no_plots).then(|| plot::forecast_svg(&out.forecast.timestamps, &out.truth, &out.forecast.values));
    Ok(Outcome {
        row: SeriesResult {
            series: s.name.clone(),
            model: model.label(),
            metrics: out.metric_map(),
            n_trains: out.n_trains,
            retrain_failures: out.retrain_failures.len(),
            error: None,
            timings: out.timings,
        },
        plot,
    })
}

fn run_anomaly(r: &Resolved, s: &LoadedSeries, idx: usize, entry: &crate::config::DetectorEntry) -> anyhow::Result<Outcome> {
    let labels = s.labels.as_ref().context("series has no labels")?;
    let (train, test) = split_at(&s.ts, r.manifest.train_fraction)?;
    let seed = series_seed(r.config.seed, idx);
    let out = evaluate_detector(
        || entry.spec.build(seed),
        &train,
        &test,
        labels,
        &r.config.schedule,
        r.config.inference,
        &r.config.threshold,
        r.config.threshold_mode,
    )?;
    let plot = (!r.config.no_plots).then(|| plot::anomaly_svg(&out.scores, &out.alerts, &out.truth, out.threshold));
    Ok(Outcome {
        row: SeriesResult {
            series: s.name.clone(),
            model: entry.label(),
            metrics: out.metric_map(),
            n_trains: out.n_trains,
            retrain_failures: out.retrain_failures.len(),
            error: None,
            timings: out.timings,
        },
        plot,
    })
}

/// Evaluates all pairs on a pool of `jobs` threads. Rows come back in
/// series-major, model-minor order whatever the thread count.
pub fn evaluate(r: &Resolved, series: &[LoadedSeries], jobs: usize) -> anyhow::Result<(EvalReport, Vec<(String, String)>)> {
    let labels = r.models.labels();
    let pairs: Vec<(usize, usize)> = (0..series.len()).flat_map(|s| (0..labels.len()).map(move |m| (s, m))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(si, mi)| {
                let s = &series[si];
                let res = match &r.models {
                    Models::Forecast(v) => run_forecast(r, s, si, &v[mi]),
                    Models::Anomaly(v) => run_anomaly(r, s, si, &v[mi]),
                };
                res.unwrap_or_else(|e| Outcome {
                    row: SeriesResult::failed(&s.name, &labels[mi], format!("{e:#}")),
                    plot: None,
                })
            })
            .collect()
    });
    let mut plots = Vec::new();
    let mut rows = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        if let Some(svg) = o.plot {
            plots.push((format!("{}__{}.svg", o.row.series, o.row.model), svg));
        }
        rows.push(o.row);
    }
    let task = match r.config.task {
        Task::Forecast => "forecast",
        Task::Anomaly => "anomaly",
    };
    Ok((EvalReport::new(task, r.config.schedule, r.config.inference, rows), plots))
}

/// Loads the data, evaluates and writes results under `out`.
pub fn run(r: &Resolved, jobs: usize, out: &Path) -> anyhow::Result<EvalReport> {
    let series = load_dataset(&r.manifest, &r.base)?;
    let (report, plots) = evaluate(r, &series, jobs)?;
    write_outputs(r, &report, &plots, out)?;
    Ok(report)
}

pub fn write_outputs(r: &Resolved, report: &EvalReport, plots: &[(String, String)], out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let doc = RunOutput {
        config: &r.config,
        primary_metric: r.config.task.primary_metric(),
        report,
    };
    std::fs::write(out.join(RESULTS_JSON), serde_json::to_string_pretty(&doc)?)?;
    std::fs::write(out.join(RESULTS_CSV), report.to_csv()?)?;
    if !plots.is_empty() {
        let dir = out.join("plots");
        std::fs::create_dir_all(&dir)?;
        for (name, svg) in plots {
            std::fs::write(dir.join(sanitize(name)), svg)?;
        }
    }
    Ok(())
}

fn sanitize(name: &str) -> PathBuf {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect::<String>()
        .into()
}
