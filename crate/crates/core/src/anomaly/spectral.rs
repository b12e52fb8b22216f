//! Spectral residual saliency: the log-amplitude spectrum minus its local
//! average, transformed back with the original phase.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::anomaly::{pick, AnomalyDetector, AnomalyScoreSeries};
use crate::data::TimeSeries;
use crate::error::{Error, Result};

fn default_q() -> usize {
    3
}
fn default_lookahead() -> usize {
    5
}
fn default_context() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResidualConfig {
    /// Width of the moving average over the log spectrum.
    #[serde(default = "default_q")]
    pub avg_window: usize,
    /// Estimated points appended before the transform.
    #[serde(default = "default_lookahead")]
    pub lookahead: usize,
    /// History points prepended when scoring new data.
    #[serde(default = "default_context")]
    pub context: usize,
    #[serde(default)]
    pub index: usize,
}

impl Default for SpectralResidualConfig {
    fn default() -> Self {
        Self {
            avg_window: default_q(),
            lookahead: default_lookahead(),
            context: default_context(),
            index: 0,
        }
    }
}

const EPS: f64 = 1e-8;
/// Minimum window length.
pub const MIN_WINDOW: usize = 8;

/// Next-point estimate from the average slope to the last `m` points.
fn estimate_next(x: &[f64], m: usize) -> f64 {
    let n = x.len();
    let m = m.min(n - 1).max(1);
    let g: f64 = (1..=m).map(|i| (x[n - 1] - x[n - 1 - i]) / i as f64).sum::<f64>() / m as f64;
    x[n - m] + g * m as f64
}

/// Saliency magnitude for every point of `x`.
pub fn saliency(x: &[f64], avg_window: usize, lookahead: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n < MIN_WINDOW {
        return Err(Error::InsufficientHistory {
            needed: MIN_WINDOW,
            got: n,
        });
    }
    let mut ext = x.to_vec();
    if lookahead > 0 {
        let next = estimate_next(x, lookahead);
        ext.extend(std::iter::repeat_n(next, lookahead));
    }
    let len = ext.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = ext.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(len).process(&mut buf);

    let amp: Vec<f64> = buf.iter().map(|c| c.norm()).collect();
    let log_amp: Vec<f64> = amp.iter().map(|a| a.max(EPS).ln()).collect();
    let q = avg_window.max(1);
    let mut spec = vec![Complex::new(0.0, 0.0); len];
    for k in 1..len {
        if amp[k] <= EPS {
            continue;
        }
        let lo = k.saturating_sub(q - 1);
        let avg = log_amp[lo..=k].iter().sum::<f64>() / (k - lo + 1) as f64;
        let residual = log_amp[k] - avg;
        spec[k] = buf[k] / amp[k] * residual.exp();
    }
    planner.plan_fft_inverse(len).process(&mut spec);
    Ok(spec[..n].iter().map(|c| c.norm() / len as f64).collect())
}

#[derive(Debug, Clone)]
pub struct SpectralResidual {
    cfg: SpectralResidualConfig,
    tail: Option<Vec<f64>>,
}

impl SpectralResidual {
    pub fn new(cfg: SpectralResidualConfig) -> Result<Self> {
        if cfg.avg_window == 0 {
            return Err(Error::Spec("avg_window must be positive".into()));
        }
        Ok(Self { cfg, tail: None })
    }
}

impl AnomalyDetector for SpectralResidual {
    fn name(&self) -> String {
        "sr".into()
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<AnomalyScoreSeries> {
        let u = pick(ts, self.cfg.index)?;
        let s = saliency(u.values(), self.cfg.avg_window, self.cfg.lookahead)?;
        let x = u.values();
        self.tail = Some(x[x.len().saturating_sub(self.cfg.context)..].to_vec());
        Ok(AnomalyScoreSeries::raw(u.timestamps().to_vec(), s))
    }

    fn score(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<AnomalyScoreSeries> {
        let u = pick(ts, self.cfg.index)?;
        let history = match prev {
            Some(p) => pick(p, self.cfg.index)?.values(),
            None => self.tail.as_deref().ok_or(Error::NotTrained)?,
        };
        let hist = &history[history.len().saturating_sub(self.cfg.context)..];
        let x: Vec<f64> = hist.iter().chain(u.values()).copied().collect();
        let s = saliency(&x, self.cfg.avg_window, self.cfg.lookahead)?;
        Ok(AnomalyScoreSeries::raw(u.timestamps().to_vec(), s[hist.len()..].to_vec()))
    }
}
