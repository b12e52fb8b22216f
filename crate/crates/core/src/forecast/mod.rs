//! Forecasting models behind a single [`Forecaster`] interface.
//!
//! Every forecaster is trained on a [`TimeSeries`] and predicts one target
//! univariate. Forecasts may be conditioned on a history other than the
//! training data by passing `prev`; the model state is rebuilt from that
//! history but parameters are not refit.

pub mod ets;
pub mod sarima;
pub mod spec;
pub mod tree;
pub mod var;

use crate::data::{TimeSeries, Timestamp, UnivariateTimeSeries};
use crate::error::{Error, Result};
use crate::transform::TransformChain;

pub use spec::{ForecasterConfig, ForecasterSpec};

/// Predictions for the target univariate.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub timestamps: Vec<Timestamp>,
    pub values: Vec<f64>,
    /// Standard errors, strictly positive when present.
    pub stderr: Option<Vec<f64>>,
}

impl ForecastResult {
    pub fn new(timestamps: Vec<Timestamp>, values: Vec<f64>, stderr: Option<Vec<f64>>) -> Result<Self> {
        if timestamps.len() != values.len() || stderr.as_ref().is_some_and(|s| s.len() != values.len()) {
            return Err(Error::InvalidInput("forecast sequences differ in length".into()));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("forecast timestamps not strictly increasing".into()));
        }
        let stderr = stderr.map(|s| s.into_iter().map(|v| v.max(MIN_STDERR)).collect());
        Ok(Self {
            timestamps,
            values,
            stderr,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_univariate(&self, name: &str) -> Result<UnivariateTimeSeries> {
        UnivariateTimeSeries::new(name, self.timestamps.clone(), self.values.clone())
    }
}

/// Floor applied to reported standard errors.
pub const MIN_STDERR: f64 = 1e-12;

/// Common interface of all forecasting models.
pub trait Forecaster: Send + Sync {
    fn name(&self) -> String;

    /// Index of the univariate being predicted.
    fn target_index(&self) -> usize;

    fn train(&mut self, ts: &TimeSeries) -> Result<()>;

    /// Forecasts the target at `timestamps`, which are taken to be the steps
    /// immediately following the history (`prev`, or the training data).
    fn forecast(&self, timestamps: &[Timestamp], prev: Option<&TimeSeries>) -> Result<ForecastResult>;

    /// Smallest history the model can condition on.
    fn min_history(&self) -> usize {
        1
    }

    /// One-step-ahead predictions for every point of `ts`, each conditioned on
    /// `prev` followed by the points of `ts` before it. Points without enough
    /// history are skipped.
    fn one_step_ahead(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        let full = match prev {
            Some(p) => p.concat(ts)?,
            None => ts.clone(),
        };
        let stamps = full.timestamps()?.to_vec();
        let offset = stamps.len() - ts.len();
        let mut out_t = Vec::new();
        let mut out_v = Vec::new();
        let mut out_se = Vec::new();
        let mut have_se = true;
        for i in offset.max(self.min_history())..stamps.len() {
            let hist = full.slice(0..i);
            let f = self.forecast(&stamps[i..=i], Some(&hist))?;
            out_t.push(stamps[i]);
            out_v.push(f.values[0]);
            match f.stderr {
                Some(se) => out_se.push(se[0]),
                None => have_se = false,
            }
        }
        ForecastResult::new(out_t, out_v, have_se.then_some(out_se))
    }
}

/// The target univariate of `ts`, or an error naming the bad index.
pub(crate) fn target_of(ts: &TimeSeries, k: usize) -> Result<&UnivariateTimeSeries> {
    ts.univariate(k)
        .ok_or_else(|| Error::Spec(format!("target index {k} out of range for dimension {}", ts.dim())))
}

/// `h` future stamps continuing `last` with the given step.
pub fn future_timestamps(last: Timestamp, step: i64, h: usize) -> Vec<Timestamp> {
    (1..=h as i64).map(|i| last + i * step).collect()
}

/// Applies a [`TransformChain`] before an inner forecaster and inverts its
/// forecasts back to the original scale.
pub struct Transformed {
    inner: Box<dyn Forecaster>,
    chain: TransformChain,
    train_data: Option<TimeSeries>,
}

impl Transformed {
    pub fn new(inner: Box<dyn Forecaster>, chain: TransformChain) -> Self {
        Self {
            inner,
            chain,
            train_data: None,
        }
    }
}

impl Forecaster for Transformed {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn target_index(&self) -> usize {
        self.inner.target_index()
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<()> {
        if !self.chain.is_invertible() {
            return Err(Error::NotInvertible(
                "forecaster transforms must be invertible so forecasts can be mapped back".into(),
            ));
        }
        let transformed = self.chain.fit_apply(ts)?;
        self.inner.train(&transformed)?;
        self.train_data = Some(ts.clone());
        Ok(())
    }

    fn forecast(&self, timestamps: &[Timestamp], prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        let history = prev.or(self.train_data.as_ref()).ok_or(Error::NotTrained)?;
        let transformed = self.chain.apply(history)?;
        let raw = self.inner.forecast(timestamps, Some(&transformed))?;
        let k = self.target_index();
        let values = self.chain.invert_continuation(k, &raw.values, target_of(history, k)?)?;
        let stderr = raw.stderr.map(|se| self.chain.invert_stderr(k, &se)).transpose()?;
        ForecastResult::new(raw.timestamps, values, stderr)
    }

    fn min_history(&self) -> usize {
        let lost: usize = self
            .chain
            .kinds()
            .iter()
            .map(|k| match k {
                crate::transform::TransformKind::Difference { order } => *order,
                _ => 0,
            })
            .sum();
        self.inner.min_history() + lost
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::sarima::{Sarima, SarimaOrders};
    use crate::transform::TransformKind;

    #[test]
    fn result_validates_lengths() {
        assert!(ForecastResult::new(vec![1, 2], vec![1.0], None).is_err());
        assert!(ForecastResult::new(vec![2, 1], vec![1.0, 2.0], None).is_err());
        let r = ForecastResult::new(vec![1], vec![1.0], Some(vec![0.0])).unwrap();
        assert!(r.stderr.unwrap()[0] > 0.0);
    }

    #[test]
    fn transformed_random_walk_continues_ramp() {
        let values: Vec<f64> = (0..40).map(|t| 100.0 + 3.0 * t as f64).collect();
        let ts: TimeSeries = UnivariateTimeSeries::from_values("y", 0, 60, values).unwrap().into();
        let inner = Box::new(Sarima::new(SarimaOrders::arima(0, 0, 0), 0));
        let mut model = Transformed::new(
            inner,
            TransformChain::new([TransformKind::Normalize, TransformKind::Difference { order: 1 }]),
        );
        model.train(&ts).unwrap();
        let f = model.forecast(&future_timestamps(39 * 60, 60, 2), None).unwrap();
        assert!((f.values[0] - 220.0).abs() < 1e-9);
        assert!((f.values[1] - 223.0).abs() < 1e-9);
        assert_eq!(f.timestamps, vec![40 * 60, 41 * 60]);
    }
}
