//! Multi-lag z-scores: `s_t = max_k (Δ⁽ᵏ⁾_t − μ⁽ᵏ⁾) / σ⁽ᵏ⁾` with
//! `Δ⁽ᵏ⁾_t = x_t − x_{t−k}` over lags `k = 1, 2, 4, …`.

use serde::{Deserialize, Serialize};

use crate::anomaly::{pick, AnomalyDetector, AnomalyScoreSeries};
use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZmsConfig {
    /// Number of lags; by default every power of two up to `n / 8`.
    #[serde(default)]
    pub n_lags: Option<usize>,
    #[serde(default)]
    pub index: usize,
}

/// Powers of two not exceeding `n / 8`, at least lag 1.
pub fn auto_lags(n: usize) -> Vec<usize> {
    let cap = (n / 8).max(1);
    std::iter::successors(Some(1usize), |k| Some(k * 2)).take_while(|&k| k <= cap).collect()
}

#[derive(Debug, Clone)]
pub struct Zms {
    cfg: ZmsConfig,
    /// `(k, μ, σ)` for lags with a non-zero deviation.
    lags: Vec<(usize, f64, f64)>,
    tail: Vec<f64>,
    trained: bool,
}

impl Zms {
    pub fn new(cfg: ZmsConfig) -> Self {
        Self {
            cfg,
            lags: Vec::new(),
            tail: Vec::new(),
            trained: false,
        }
    }

    pub fn lags(&self) -> Vec<usize> {
        self.lags.iter().map(|l| l.0).collect()
    }

    /// Scores `x[offset..]` using `x[..offset]` as history.
    fn score_values(&self, x: &[f64], offset: usize) -> Vec<f64> {
        (offset..x.len())
            .map(|t| {
                self.lags
                    .iter()
                    .filter(|(k, _, _)| t >= *k)
                    .map(|&(k, mu, sd)| (x[t] - x[t - k] - mu) / sd)
                    .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
                    .unwrap_or(0.0)
            })
            .collect()
    }
}

impl AnomalyDetector for Zms {
    fn name(&self) -> String {
        "zms".into()
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<AnomalyScoreSeries> {
        let u = pick(ts, self.cfg.index)?;
        let x = u.values();
        let mut ks = auto_lags(x.len());
        if let Some(n) = self.cfg.n_lags {
            ks.truncate(n.max(1));
        }
        let max_lag = *ks.last().unwrap_or(&1);
        if x.len() < 2 * max_lag {
            return Err(Error::InsufficientHistory {
                needed: 2 * max_lag,
                got: x.len(),
            });
        }
        self.lags = ks
            .into_iter()
            .filter_map(|k| {
                let d: Vec<f64> = (k..x.len()).map(|t| x[t] - x[t - k]).collect();
                let sd = stats::std_dev(&d);
                (sd > 0.0).then(|| (k, stats::mean(&d), sd))
            })
            .collect();
        self.tail = x[x.len().saturating_sub(max_lag)..].to_vec();
        self.trained = true;
        Ok(AnomalyScoreSeries::raw(u.timestamps().to_vec(), self.score_values(x, 0)))
    }

    fn score(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<AnomalyScoreSeries> {
        if !self.trained {
            return Err(Error::NotTrained);
        }
        let u = pick(ts, self.cfg.index)?;
        let history = match prev {
            Some(p) => pick(p, self.cfg.index)?.values(),
            None => &self.tail,
        };
        let max_lag = self.lags.iter().map(|l| l.0).max().unwrap_or(0);
        let hist = &history[history.len().saturating_sub(max_lag)..];
        let x: Vec<f64> = hist.iter().chain(u.values()).copied().collect();
        Ok(AnomalyScoreSeries::raw(u.timestamps().to_vec(), self.score_values(&x, hist.len())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnivariateTimeSeries;

    fn ts(v: Vec<f64>) -> TimeSeries {
        UnivariateTimeSeries::from_values("x", 0, 60, v).unwrap().into()
    }

    #[test]
    fn lag_set_caps_at_n_over_8() {
        assert_eq!(auto_lags(64), vec![1, 2, 4, 8]);
        assert_eq!(auto_lags(63), vec![1, 2, 4]);
        assert_eq!(auto_lags(5), vec![1]);
    }

    #[test]
    fn constant_series_scores_zero() {
        let mut z = Zms::new(ZmsConfig::default());
        let s = z.train(&ts(vec![3.0; 64])).unwrap();
        assert!(z.lags().is_empty());
        assert!(s.scores.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn level_shift_scores_high_at_lag_one() {
        let mut x: Vec<f64> = (0..128).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        for v in x.iter_mut().skip(100) {
            *v += 20.0;
        }
        let mut z = Zms::new(ZmsConfig::default());
        let s = z.train(&ts(x.clone())).unwrap();
        // hand computation for lag 1
        let d: Vec<f64> = (1..128).map(|t| x[t] - x[t - 1]).collect();
        let s1 = (d[99] - stats::mean(&d)) / stats::std_dev(&d);
        assert!(s.scores[100] >= s1 - 1e-12);
        assert!(s1 > 5.0);
        assert!(s.scores.iter().all(|&v| v <= s.scores[100]));
        assert!(s.scores[..100].iter().all(|&v| v < s.scores[100]));
    }

    #[test]
    fn history_feeds_lags() {
        let x: Vec<f64> = (0..80).map(|i| ((i * 7) % 5) as f64).collect();
        let full = ts(x);
        let mut z = Zms::new(ZmsConfig::default());
        let train = full.slice(0..64);
        let s_all = z.train(&full).unwrap();
        let test = full.slice(64..80);
        let s = z.score(&test, Some(&train)).unwrap();
        for i in 0..16 {
            assert!((s.scores[i] - s_all.scores[64 + i]).abs() < 1e-12);
        }
    }

    #[test]
    fn offset_invariance() {
        let x: Vec<f64> = (0..100).map(|i| ((i * 31) % 11) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v - 55.5).collect();
        let a = Zms::new(ZmsConfig::default()).train(&ts(x)).unwrap();
        let b = Zms::new(ZmsConfig::default()).train(&ts(y)).unwrap();
        for (p, q) in a.scores.iter().zip(&b.scores) {
            assert!((p - q).abs() < 1e-9);
        }
    }
}
