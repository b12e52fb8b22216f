//! Forecast residual detector: `s_t = (y_t − ŷ_t) / se_t` from one-step
//! predictions conditioned on the true history.

use serde::{Deserialize, Serialize};

use crate::anomaly::{AnomalyDetector, AnomalyScoreSeries};
use crate::automl::AutoEtsConfig;
use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::forecast::{target_of, ForecastResult, Forecaster, ForecasterConfig, ForecasterSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResidualConfig {
    #[serde(default = "default_forecaster")]
    pub forecaster: ForecasterConfig,
    /// Divide by the forecaster's standard error when it provides one.
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn default_forecaster() -> ForecasterConfig {
    ForecasterConfig::new(ForecasterSpec::AutoEts(AutoEtsConfig::default()))
}

fn yes() -> bool {
    true
}

impl Default for ForecastResidualConfig {
    fn default() -> Self {
        Self {
            forecaster: default_forecaster(),
            normalize: true,
        }
    }
}

pub struct ForecastResidual {
    cfg: ForecastResidualConfig,
    model: Box<dyn Forecaster>,
    train_data: Option<TimeSeries>,
}

impl ForecastResidual {
    pub fn new(cfg: ForecastResidualConfig, seed: u64) -> Result<Self> {
        let model = cfg.forecaster.build(seed)?;
        Ok(Self {
            cfg,
            model,
            train_data: None,
        })
    }

    /// Wraps an existing forecaster.
    pub fn with_model(model: Box<dyn Forecaster>, normalize: bool) -> Self {
        Self {
            cfg: ForecastResidualConfig {
                normalize,
                ..Default::default()
            },
            model,
            train_data: None,
        }
    }

    fn residuals(&self, ts: &TimeSeries, pred: &ForecastResult) -> Result<AnomalyScoreSeries> {
        let truth = target_of(ts, self.model.target_index())?;
        let mut scores = Vec::with_capacity(pred.len());
        let mut j = 0;
        for (i, &t) in pred.timestamps.iter().enumerate() {
            while truth.timestamps()[j] < t {
                j += 1;
            }
            let mut s = truth.values()[j] - pred.values[i];
            if self.cfg.normalize {
                if let Some(se) = &pred.stderr {
                    s /= se[i];
                }
            }
            scores.push(s);
        }
        Ok(AnomalyScoreSeries::raw(pred.timestamps.clone(), scores))
    }
}

impl AnomalyDetector for ForecastResidual {
    fn name(&self) -> String {
        format!("forecast-residual({})", self.cfg.forecaster.label())
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<AnomalyScoreSeries> {
        self.model.train(ts)?;
        self.train_data = Some(ts.clone());
        let pred = self.model.one_step_ahead(ts, None)?;
        self.residuals(ts, &pred)
    }

    fn score(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<AnomalyScoreSeries> {
        let history = prev.or(self.train_data.as_ref()).ok_or(Error::NotTrained)?;
        let pred = self.model.one_step_ahead(ts, Some(history))?;
        self.residuals(ts, &pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Timestamp, UnivariateTimeSeries};

    /// Predicts a fixed value with a fixed standard error.
    struct Fixed {
        value: f64,
        se: f64,
    }

    impl Forecaster for Fixed {
        fn name(&self) -> String {
            "fixed".into()
        }
        fn target_index(&self) -> usize {
            0
        }
        fn train(&mut self, _: &TimeSeries) -> Result<()> {
            Ok(())
        }
        fn forecast(&self, timestamps: &[Timestamp], _: Option<&TimeSeries>) -> Result<ForecastResult> {
            ForecastResult::new(
                timestamps.to_vec(),
                vec![self.value; timestamps.len()],
                Some(vec![self.se; timestamps.len()]),
            )
        }
    }

    fn ts(v: Vec<f64>) -> TimeSeries {
        ts_at(0, v)
    }

    fn ts_at(start: Timestamp, v: Vec<f64>) -> TimeSeries {
        UnivariateTimeSeries::from_values("y", start, 60, v).unwrap().into()
    }

    #[test]
    fn standardised_residual() {
        let mut d = ForecastResidual::with_model(Box::new(Fixed { value: 10.0, se: 2.0 }), true);
        d.train(&ts(vec![10.0; 5])).unwrap();
        let s = d.score(&ts_at(300, vec![16.0, 4.0, 10.0]), None).unwrap();
        assert_eq!(s.scores, vec![3.0, -3.0, 0.0]);
    }

    #[test]
    fn perfect_forecaster_scores_zero() {
        let mut d = ForecastResidual::with_model(Box::new(Fixed { value: 7.0, se: 1.0 }), true);
        let s = d.train(&ts(vec![7.0; 10])).unwrap();
        assert!(s.scores.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn raw_residual_without_normalisation() {
        let mut d = ForecastResidual::with_model(Box::new(Fixed { value: 10.0, se: 2.0 }), false);
        d.train(&ts(vec![10.0; 5])).unwrap();
        let s = d.score(&ts_at(300, vec![16.0]), None).unwrap();
        assert_eq!(s.scores, vec![6.0]);
    }
}
