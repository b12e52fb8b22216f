//! Deployment simulation: train on history, predict unseen data segment by
//! segment, retrain at each cadence boundary, score at the end.

use std::collections::BTreeMap;
use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::anomaly::{AnomalyDetector, AnomalyScoreSeries, CalibratedDetector};
use crate::data::{AnomalyLabelSeries, TimeSeries, Timestamp};
use crate::error::{Error, Result};
use crate::eval::metrics::{smape, tsad_metrics, ForecastMetric, PointMetrics, TsadMetrics};
use crate::forecast::{ForecastResult, Forecaster};
use crate::post::ThresholdRule;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cadence {
    #[default]
    None,
    Hourly,
    Daily,
    Weekly,
}

impl Cadence {
    pub fn period(&self) -> Option<i64> {
        match self {
            Self::None => None,
            Self::Hourly => Some(3600),
            Self::Daily => Some(86_400),
            Self::Weekly => Some(604_800),
        }
    }
}

/// Data used at each (re)training: everything so far, or the trailing
/// `Fixed(seconds)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainWindow {
    #[default]
    Full,
    Fixed(i64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrainSchedule {
    #[serde(default)]
    pub cadence: Cadence,
    #[serde(default)]
    pub window: TrainWindow,
}

impl RetrainSchedule {
    pub fn validate(&self) -> Result<()> {
        match self.window {
            TrainWindow::Fixed(d) if d <= 0 => Err(Error::Spec(format!("fixed training window must be positive, got {d}"))),
            _ => Ok(()),
        }
    }

    /// Training data for a model deployed at `at`.
    fn training_data(&self, full: &TimeSeries, at: Timestamp) -> TimeSeries {
        let start = match self.window {
            TrainWindow::Full => Timestamp::MIN,
            TrainWindow::Fixed(d) => at - d,
        };
        full.filter_time(move |t| t >= start && t < at)
    }
}

/// How predictions are produced between retrains.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    /// The whole segment at once, from the history before it.
    #[default]
    Batch,
    /// One point at a time with the true history up to it.
    Streaming,
    /// Consecutive blocks of `h` points, each from the true history before it.
    Window(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    #[default]
    Fixed,
    OptimizeOnTrain,
    OptimizeOnTest,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub train_seconds: f64,
    pub inference_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainFailure {
    pub at: Timestamp,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ForecastEvalOutput {
    pub forecast: ForecastResult,
    pub truth: Vec<f64>,
    pub metrics: BTreeMap<ForecastMetric, Option<f64>>,
    /// sMAPE terms dropped for a zero denominator.
    pub smape_skipped: usize,
    pub n_trains: usize,
    pub retrain_failures: Vec<RetrainFailure>,
    pub timings: Timings,
}

impl ForecastEvalOutput {
    pub fn metric_map(&self) -> BTreeMap<String, Option<f64>> {
        self.metrics.iter().map(|(k, v)| (k.name().to_string(), *v)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct AnomalyEvalOutput {
    /// Calibrated test scores.
    pub scores: AnomalyScoreSeries,
    pub train_scores: AnomalyScoreSeries,
    pub alerts: AnomalyLabelSeries,
    pub truth: AnomalyLabelSeries,
    pub threshold: f64,
    pub metrics: TsadMetrics,
    pub n_trains: usize,
    pub retrain_failures: Vec<RetrainFailure>,
    pub timings: Timings,
}

impl AnomalyEvalOutput {
    pub fn metric_map(&self) -> BTreeMap<String, Option<f64>> {
        let mut m = BTreeMap::new();
        for (name, c) in [("pw", self.metrics.pw), ("pa", self.metrics.pa), ("rpa", self.metrics.rpa)] {
            m.insert(format!("{name}_precision"), Some(c.precision()));
            m.insert(format!("{name}_recall"), Some(c.recall()));
            m.insert(format!("{name}_f1"), Some(c.f1()));
        }
        m.insert("mttd".into(), self.metrics.mttd);
        m.insert("threshold".into(), Some(self.threshold));
        m
    }
}

/// Test index ranges separated at `t0 + k * period`; empty segments are
/// dropped.
fn segments(stamps: &[Timestamp], period: Option<i64>) -> Vec<Range<usize>> {
    let Some(p) = period else {
        return vec![0..stamps.len()];
    };
    let t0 = stamps[0];
    let mut out: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    for i in 1..=stamps.len() {
        if i == stamps.len() || (stamps[i] - t0) / p != (stamps[start] - t0) / p {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Splits `range` into the units predicted from one history.
fn chunks(range: Range<usize>, mode: InferenceMode) -> Result<Vec<Range<usize>>> {
    let h = match mode {
        InferenceMode::Batch => return Ok(vec![range]),
        InferenceMode::Streaming => 1,
        InferenceMode::Window(0) => return Err(Error::Spec("inference window must be at least 1".into())),
        InferenceMode::Window(h) => h,
    };
    Ok(range.clone().step_by(h).map(|s| s..(s + h).min(range.end)).collect())
}

struct Prepared {
    full: TimeSeries,
    stamps: Vec<Timestamp>,
    offset: usize,
}

fn prepare(train: &TimeSeries, test: &TimeSeries, schedule: &RetrainSchedule) -> Result<Prepared> {
    schedule.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split("evaluation needs non-empty train and test".into()));
    }
    let full = train.concat(test)?;
    let stamps = full.timestamps()?.to_vec();
    let offset = stamps.len() - test.len();
    Ok(Prepared { full, stamps, offset })
}

/// Rolls a forecaster over `test` after training on `train`.
pub fn evaluate_forecaster<F>(
    factory: F,
    train: &TimeSeries,
    test: &TimeSeries,
    schedule: &RetrainSchedule,
    mode: InferenceMode,
) -> Result<ForecastEvalOutput>
where
    F: Fn() -> Result<Box<dyn Forecaster>>,
{
    let Prepared { full, stamps, offset } = prepare(train, test, schedule)?;
    let mut timings = Timings::default();
    let clock = Instant::now();
    let mut model = factory()?;
    model.train(&schedule.training_data(&full, stamps[offset]))?;
    timings.train_seconds += clock.elapsed().as_secs_f64();
    let target = model.target_index();

    let mut n_trains = 1;
    let mut failures = Vec::new();
    let (mut out_t, mut out_v, mut out_se) = (Vec::new(), Vec::new(), Vec::new());
    let mut have_se = true;
    for (k, seg) in segments(&stamps[offset..], schedule.cadence.period()).into_iter().enumerate() {
        let seg = offset + seg.start..offset + seg.end;
        if k > 0 {
            let clock = Instant::now();
            let at = stamps[seg.start];
            let data = schedule.training_data(&full, at);
            match factory().and_then(|mut m| m.train(&data).map(|_| m)) {
                Ok(m) => {
                    model = m;
                    n_trains += 1;
                }
                Err(e) => failures.push(RetrainFailure { at, message: e.to_string() }),
            }
            timings.train_seconds += clock.elapsed().as_secs_f64();
        }
        let clock = Instant::now();
        let preds: Vec<ForecastResult> = match mode {
            InferenceMode::Streaming => {
                vec![model.one_step_ahead(&full.slice(seg.clone()), Some(&full.slice(0..seg.start)))?]
            }
            _ => chunks(seg, mode)?
                .into_iter()
                .map(|c| model.forecast(&stamps[c.clone()], Some(&full.slice(0..c.start))))
                .collect::<Result<_>>()?,
        };
        for f in preds {
            out_t.extend_from_slice(&f.timestamps);
            out_v.extend_from_slice(&f.values);
            match f.stderr {
                Some(se) => out_se.extend(se),
                None => have_se = false,
            }
        }
        timings.inference_seconds += clock.elapsed().as_secs_f64();
    }
    if out_t.is_empty() {
        return Err(Error::InsufficientHistory {
            needed: model.min_history(),
            got: stamps.len(),
        });
    }
    let forecast = ForecastResult::new(out_t, out_v, have_se.then_some(out_se))?;
    let target_series = full
        .univariate(target)
        .ok_or_else(|| Error::Spec(format!("target index {target} out of range")))?;
    let truth: Vec<f64> = forecast
        .timestamps
        .iter()
        .map(|t| {
            let i = target_series.timestamps().binary_search(t).expect("forecast stamps come from the series");
            target_series.values()[i]
        })
        .collect();
    let metrics = ForecastMetric::ALL
        .into_iter()
        .map(|m| (m, m.compute(&truth, &forecast.values).ok()))
        .collect();
    let smape_skipped = smape(&truth, &forecast.values).1;
    Ok(ForecastEvalOutput {
        forecast,
        truth,
        metrics,
        smape_skipped,
        n_trains,
        retrain_failures: failures,
        timings,
    })
}

/// Runs a detector over `test` after training on `train`. The calibrator is
/// fitted on the initial training scores only and kept across retrains.
pub fn evaluate_detector<F>(
    factory: F,
    train: &TimeSeries,
    test: &TimeSeries,
    labels: &AnomalyLabelSeries,
    schedule: &RetrainSchedule,
    mode: InferenceMode,
    rule: &ThresholdRule,
    threshold_mode: ThresholdMode,
) -> Result<AnomalyEvalOutput>
where
    F: Fn() -> Result<Box<dyn AnomalyDetector>>,
{
    rule.validate()?;
    let Prepared { full, stamps, offset } = prepare(train, test, schedule)?;
    let t0 = stamps[offset];
    let mut timings = Timings::default();
    let clock = Instant::now();
    let mut det = CalibratedDetector::new(factory()?);
    let train_scores = det.train(&schedule.training_data(&full, t0))?;
    timings.train_seconds += clock.elapsed().as_secs_f64();

    let mut n_trains = 1;
    let mut failures = Vec::new();
    let mut scores = AnomalyScoreSeries::raw(Vec::new(), Vec::new());
    scores.calibrated = true;
    for (k, seg) in segments(&stamps[offset..], schedule.cadence.period()).into_iter().enumerate() {
        let seg = offset + seg.start..offset + seg.end;
        if k > 0 {
            let clock = Instant::now();
            let at = stamps[seg.start];
            let data = schedule.training_data(&full, at);
            let fresh = factory().and_then(|inner| {
                let mut d = CalibratedDetector::with_calibrator(inner, det.calibrator().cloned());
                d.retrain(&data).map(|_| d)
            });
            match fresh {
                Ok(d) => {
                    det = d;
                    n_trains += 1;
                }
                Err(e) => failures.push(RetrainFailure { at, message: e.to_string() }),
            }
            timings.train_seconds += clock.elapsed().as_secs_f64();
        }
        let clock = Instant::now();
        for c in chunks(seg, mode)? {
            let s = det.score(&full.slice(c.clone()), Some(&full.slice(0..c.start)))?;
            scores.concat(&s);
        }
        timings.inference_seconds += clock.elapsed().as_secs_f64();
    }

    let train_truth = labels.window(None, Some(t0));
    let truth = labels.window(Some(t0), None);
    let threshold = match threshold_mode {
        ThresholdMode::Fixed => rule.threshold,
        ThresholdMode::OptimizeOnTrain => optimize_threshold(&train_scores, &train_truth, rule)?,
        ThresholdMode::OptimizeOnTest => optimize_threshold(&scores, &truth, rule)?,
    };
    let applied = ThresholdRule { threshold, ..*rule };
    let alerts = applied.apply(&scores)?;
    let metrics = tsad_metrics(&truth, &alerts);
    Ok(AnomalyEvalOutput {
        scores,
        train_scores,
        alerts,
        truth,
        threshold,
        metrics,
        n_trains,
        retrain_failures: failures,
        timings,
    })
}

/// Where each score point falls relative to the truth.
#[derive(Clone, Copy)]
enum Cell {
    OffGrid,
    Normal,
    Window(usize),
}

/// RPA counting specialised to one score trace, reused across thresholds.
struct RpaCounter<'a> {
    scores: &'a AnomalyScoreSeries,
    cells: Vec<Cell>,
    n_windows: usize,
}

impl<'a> RpaCounter<'a> {
    fn new(scores: &'a AnomalyScoreSeries, truth: &AnomalyLabelSeries) -> Self {
        let mut window_of = vec![None; truth.len()];
        for (w, win) in truth.windows().iter().enumerate() {
            for slot in &mut window_of[win.start_index..=win.end_index] {
                *slot = Some(w);
            }
        }
        let cells = scores
            .timestamps
            .iter()
            .map(|t| match truth.timestamps().binary_search(t) {
                Err(_) => Cell::OffGrid,
                Ok(i) => window_of[i].map_or(Cell::Normal, Cell::Window),
            })
            .collect();
        Self {
            scores,
            cells,
            n_windows: truth.windows().len(),
        }
    }

    fn counts(&self, rule: &ThresholdRule) -> PointMetrics {
        let alerts = rule.fire(&self.scores.timestamps, &self.scores.scores);
        let mut hit = vec![false; self.n_windows];
        let mut fp = 0;
        for t in alerts {
            let i = self.scores.timestamps.binary_search(&t).expect("alerts are score stamps");
            match self.cells[i] {
                Cell::OffGrid => {}
                Cell::Normal => fp += 1,
                Cell::Window(w) => hit[w] = true,
            }
        }
        let tp = hit.iter().filter(|&&h| h).count();
        PointMetrics {
            tp,
            fp,
            fn_: self.n_windows - tp,
        }
    }
}

fn candidate_thresholds<'a>(traces: impl Iterator<Item = &'a AnomalyScoreSeries>) -> Vec<f64> {
    let mut taus: Vec<f64> = traces.flat_map(|s| s.scores.iter().map(|v| v.abs())).filter(|v| v.is_finite()).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    taus
}

/// Threshold maximising RPA F1 under `rule`, scanning the unique `|z|` values
/// and preferring the largest on ties.
pub fn optimize_threshold(scores: &AnomalyScoreSeries, truth: &AnomalyLabelSeries, rule: &ThresholdRule) -> Result<f64> {
    optimize_threshold_pooled(&[(scores.clone(), truth.clone())], rule)
}

/// As [`optimize_threshold`], with counts summed over several traces.
pub fn optimize_threshold_pooled(
    traces: &[(AnomalyScoreSeries, AnomalyLabelSeries)],
    rule: &ThresholdRule,
) -> Result<f64> {
    if traces.iter().all(|(_, t)| t.windows().is_empty()) {
        return Err(Error::InvalidInput("threshold optimisation needs at least one anomaly window".into()));
    }
    let taus = candidate_thresholds(traces.iter().map(|(s, _)| s));
    if taus.is_empty() {
        return Err(Error::InvalidInput("no finite scores to threshold".into()));
    }
    let counters: Vec<RpaCounter> = traces.iter().map(|(s, t)| RpaCounter::new(s, t)).collect();
    let mut best = (f64::NEG_INFINITY, taus[0]);
    for tau in taus {
        let r = ThresholdRule { threshold: tau, ..*rule };
        let total = counters.iter().map(|c| c.counts(&r)).fold(PointMetrics::default(), |a, b| a + b);
        let f1 = total.f1();
        if f1 >= best.0 {
            best = (f1, tau);
        }
    }
    Ok(best.1)
}
