//! Anomaly detectors emitting raw scores, and the calibrated wrapper that
//! turns them into z-scores and alerts.

pub mod iforest;
pub mod residual;
pub mod spectral;
pub mod windstats;
pub mod zms;

use serde::{Deserialize, Serialize};

use crate::data::{AnomalyLabelSeries, TimeSeries, Timestamp};
use crate::ensemble::DetectorEnsemble;
use crate::error::{Error, Result};
use crate::post::{Calibrator, ThresholdRule};

pub use iforest::{IsolationForest, IsolationForestConfig};
pub use residual::{ForecastResidual, ForecastResidualConfig};
pub use spectral::{SpectralResidual, SpectralResidualConfig};
pub use windstats::{WindStats, WindStatsConfig};
pub use zms::{Zms, ZmsConfig};

/// Anomaly scores; larger magnitude means more anomalous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScoreSeries {
    pub timestamps: Vec<Timestamp>,
    pub scores: Vec<f64>,
    pub calibrated: bool,
}

impl AnomalyScoreSeries {
    pub fn raw(timestamps: Vec<Timestamp>, scores: Vec<f64>) -> Self {
        debug_assert_eq!(timestamps.len(), scores.len());
        Self {
            timestamps,
            scores,
            calibrated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Points with `start <= t < end`.
    pub fn window(&self, start: Timestamp, end: Timestamp) -> Self {
        let lo = self.timestamps.partition_point(|&t| t < start);
        let hi = self.timestamps.partition_point(|&t| t < end);
        Self {
            timestamps: self.timestamps[lo..hi].to_vec(),
            scores: self.scores[lo..hi].to_vec(),
            calibrated: self.calibrated,
        }
    }

    pub fn concat(&mut self, other: &Self) {
        let last = self.timestamps.last().copied();
        for (t, s) in other.timestamps.iter().zip(&other.scores) {
            if last.is_none_or(|l| *t > l) {
                self.timestamps.push(*t);
                self.scores.push(*s);
            }
        }
    }
}

/// Common interface of anomaly detectors.
pub trait AnomalyDetector: Send + Sync {
    fn name(&self) -> String;

    /// Fits the detector and returns its scores on the training data.
    fn train(&mut self, ts: &TimeSeries) -> Result<AnomalyScoreSeries>;

    /// Scores `ts`, treating `prev` (or the training data) as the history
    /// immediately before it.
    fn score(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<AnomalyScoreSeries>;

    /// Whether `score` already returns calibrated z-scores.
    fn emits_calibrated(&self) -> bool {
        false
    }

    /// Refits on new data. Calibrated detectors keep their calibration.
    fn retrain(&mut self, ts: &TimeSeries) -> Result<()> {
        self.train(ts).map(|_| ())
    }
}

/// A detector whose raw scores pass through a [`Calibrator`] fitted on its
/// training scores.
pub struct CalibratedDetector {
    inner: Box<dyn AnomalyDetector>,
    calibrator: Option<Calibrator>,
}

impl CalibratedDetector {
    pub fn new(inner: Box<dyn AnomalyDetector>) -> Self {
        Self {
            inner,
            calibrator: None,
        }
    }

    /// Wraps `inner` with an already fitted calibrator.
    pub fn with_calibrator(inner: Box<dyn AnomalyDetector>, calibrator: Option<Calibrator>) -> Self {
        Self { inner, calibrator }
    }

    pub fn calibrator(&self) -> Option<&Calibrator> {
        self.calibrator.as_ref()
    }

    /// Calibrated scores followed by the alert rule.
    pub fn alarms(&self, ts: &TimeSeries, prev: Option<&TimeSeries>, rule: &ThresholdRule) -> Result<AnomalyLabelSeries> {
        rule.apply(&self.score(ts, prev)?)
    }
}

impl AnomalyDetector for CalibratedDetector {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<AnomalyScoreSeries> {
        let raw = self.inner.train(ts)?;
        if self.inner.emits_calibrated() {
            return Ok(raw);
        }
        let cal = Calibrator::fit(&raw.scores)?;
        let out = cal.apply(&raw);
        self.calibrator = Some(cal);
        Ok(out)
    }

    fn score(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<AnomalyScoreSeries> {
        let raw = self.inner.score(ts, prev)?;
        if self.inner.emits_calibrated() {
            return Ok(raw);
        }
        let cal = self.calibrator.as_ref().ok_or(Error::NotTrained)?;
        Ok(cal.apply(&raw))
    }

    fn emits_calibrated(&self) -> bool {
        true
    }

    fn retrain(&mut self, ts: &TimeSeries) -> Result<()> {
        if self.calibrator.is_none() && !self.inner.emits_calibrated() {
            return self.train(ts).map(|_| ());
        }
        self.inner.retrain(ts)
    }
}

/// Detector kind and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DetectorSpec {
    Windstats(WindStatsConfig),
    Zms(ZmsConfig),
    Sr(SpectralResidualConfig),
    Iforest(IsolationForestConfig),
    ForecastResidual(ForecastResidualConfig),
    Ensemble { members: Vec<DetectorSpec> },
}

impl DetectorSpec {
    pub fn label(&self) -> String {
        match self {
            DetectorSpec::Windstats(_) => "windstats",
            DetectorSpec::Zms(_) => "zms",
            DetectorSpec::Sr(_) => "sr",
            DetectorSpec::Iforest(_) => "iforest",
            DetectorSpec::ForecastResidual(_) => "forecast-residual",
            DetectorSpec::Ensemble { .. } => "ensemble",
        }
        .to_string()
    }

    /// Builds an untrained detector; `seed` is mixed into randomised members.
    pub fn build(&self, seed: u64) -> Result<Box<dyn AnomalyDetector>> {
        Ok(match self {
            DetectorSpec::Windstats(c) => Box::new(WindStats::new(c.clone())),
            DetectorSpec::Zms(c) => Box::new(Zms::new(c.clone())),
            DetectorSpec::Sr(c) => Box::new(SpectralResidual::new(c.clone())?),
            DetectorSpec::Iforest(c) => Box::new(IsolationForest::new(IsolationForestConfig {
                seed: c.seed.wrapping_add(seed),
                ..c.clone()
            })),
            DetectorSpec::ForecastResidual(c) => Box::new(ForecastResidual::new(c.clone(), seed)?),
            DetectorSpec::Ensemble { members } => {
                if members.is_empty() {
                    return Err(Error::Spec("ensemble needs at least one member".into()));
                }
                let built = members
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m.build(seed.wrapping_add(i as u64)))
                    .collect::<Result<Vec<_>>>()?;
                Box::new(DetectorEnsemble::new(built))
            }
        })
    }
}

/// Picks one univariate of `ts` as a single-column series.
pub(crate) fn pick(ts: &TimeSeries, index: usize) -> Result<&crate::data::UnivariateTimeSeries> {
    ts.univariate(index)
        .ok_or_else(|| Error::Spec(format!("univariate index {index} out of range for dimension {}", ts.dim())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_shapes() {
        let specs: Vec<DetectorSpec> = serde_json::from_str(
            r#"[{"kind":"windstats"},{"kind":"zms"},{"kind":"sr"},{"kind":"iforest","seed":3},
                {"kind":"forecast-residual"},{"kind":"ensemble","members":[{"kind":"zms"},{"kind":"sr"}]}]"#,
        )
        .unwrap();
        assert_eq!(specs.len(), 6);
        for s in &specs {
            let back: DetectorSpec = serde_json::from_str(&serde_json::to_string(s).unwrap()).unwrap();
            assert_eq!(&back, s);
            assert!(s.build(0).is_ok());
        }
        assert!(DetectorSpec::Ensemble { members: vec![] }.build(0).is_err());
    }

    #[test]
    fn score_series_window_and_concat() {
        let mut a = AnomalyScoreSeries::raw(vec![1, 2, 3], vec![0.1, 0.2, 0.3]);
        assert_eq!(a.window(2, 3).timestamps, vec![2]);
        a.concat(&AnomalyScoreSeries::raw(vec![3, 4], vec![9.0, 0.4]));
        assert_eq!(a.timestamps, vec![1, 2, 3, 4]);
        assert_eq!(a.scores[2], 0.3);
    }
}
