//! Time series forecasting and anomaly detection.
//!
//! The crate is organised in layers:
//!
//! - [`data`]: the [`TimeSeries`] container, alignment, resampling and splits.
//! - [`transform`]: invertible pre-processing chains.
//! - [`forecast`]: SARIMA, ETS, VAR and autoregressive tree ensembles.
//! - [`anomaly`]: statistical detectors and the forecast-residual detector.
//! - [`post`]: score calibration and alert thresholding.
//! - [`ensemble`]: forecast combination, model selection and detector ensembles.
//! - [`automl`]: seasonality detection, differencing order selection and
//!   stepwise AIC search.
//! - [`eval`]: metrics and the retraining evaluation loop.

#![forbid(unsafe_code)]

pub mod anomaly;
pub mod automl;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod optim;
pub mod post;
pub mod stats;
pub mod transform;

pub use data::{AnomalyLabelSeries, TimeSeries, Timestamp, UnivariateTimeSeries};
pub use error::{Error, Result};
