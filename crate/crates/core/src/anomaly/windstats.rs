//! Weekly windowed statistics: each timestamp falls into a (weekday, window)
//! bucket and is scored against that bucket's training mean and deviation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::anomaly::{pick, AnomalyDetector, AnomalyScoreSeries};
use crate::data::{TimeSeries, Timestamp};
use crate::error::{Error, Result};
use crate::stats;

const WEEK: i64 = 7 * 86_400;

fn default_window() -> i64 {
    360
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindStatsConfig {
    #[serde(default = "default_window")]
    pub window_minutes: i64,
    #[serde(default)]
    pub index: usize,
}

impl Default for WindStatsConfig {
    fn default() -> Self {
        Self {
            window_minutes: default_window(),
            index: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Moments {
    mean: f64,
    sd: f64,
}

#[derive(Debug, Clone)]
pub struct WindStats {
    cfg: WindStatsConfig,
    global: Option<Moments>,
    buckets: HashMap<i64, Moments>,
    /// Training data spanned less than two weeks; only global stats are used.
    pub global_fallback: bool,
}

impl WindStats {
    pub fn new(cfg: WindStatsConfig) -> Self {
        Self {
            cfg,
            global: None,
            buckets: HashMap::new(),
            global_fallback: false,
        }
    }

    pub fn bucket(&self, t: Timestamp) -> i64 {
        t.rem_euclid(WEEK) / (self.cfg.window_minutes * 60)
    }

    fn moments(&self, t: Timestamp) -> Option<Moments> {
        let g = self.global?;
        let m = self.buckets.get(&self.bucket(t)).copied().unwrap_or(g);
        Some(if m.sd > 0.0 { m } else { Moments { mean: m.mean, sd: g.sd } })
    }

    fn score_one(&self, t: Timestamp, x: f64) -> Option<f64> {
        let m = self.moments(t)?;
        Some(if m.sd > 0.0 { (x - m.mean) / m.sd } else { 0.0 })
    }
}

impl AnomalyDetector for WindStats {
    fn name(&self) -> String {
        "windstats".into()
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<AnomalyScoreSeries> {
        if self.cfg.window_minutes <= 0 {
            return Err(Error::Spec("window_minutes must be positive".into()));
        }
        let u = pick(ts, self.cfg.index)?;
        if u.is_empty() {
            return Err(Error::InvalidSeries("empty training series".into()));
        }
        self.global = Some(Moments {
            mean: stats::mean(u.values()),
            sd: stats::std_dev(u.values()),
        });
        self.buckets.clear();
        let span = u.timestamps()[u.len() - 1] - u.timestamps()[0];
        self.global_fallback = span < 2 * WEEK;
        if !self.global_fallback {
            let mut groups: HashMap<i64, Vec<f64>> = HashMap::new();
            for (t, x) in u.points() {
                groups.entry(self.bucket(t)).or_default().push(x);
            }
            for (b, xs) in groups {
                if xs.len() >= 2 {
                    self.buckets.insert(
                        b,
                        Moments {
                            mean: stats::mean(&xs),
                            sd: stats::std_dev(&xs),
                        },
                    );
                }
            }
        }
        self.score(ts, None)
    }

    fn score(&self, ts: &TimeSeries, _prev: Option<&TimeSeries>) -> Result<AnomalyScoreSeries> {
        let u = pick(ts, self.cfg.index)?;
        let scores = u
            .points()
            .map(|(t, x)| self.score_one(t, x).ok_or(Error::NotTrained))
            .collect::<Result<Vec<_>>>()?;
        Ok(AnomalyScoreSeries::raw(u.timestamps().to_vec(), scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnivariateTimeSeries;

    fn hourly(values: Vec<f64>, start: i64) -> TimeSeries {
        UnivariateTimeSeries::from_values("x", start, 3600, values).unwrap().into()
    }

    #[test]
    fn bucket_formula() {
        let mut w = WindStats::new(WindStatsConfig::default());
        // 3 weeks of hourly data, 6-hour buckets: each bucket holds 18 points.
        let values: Vec<f64> = (0..504).map(|i| ((i / 6) % 28) as f64 * 2.0 + (i % 2) as f64).collect();
        w.train(&hourly(values, 0)).unwrap();
        assert!(!w.global_fallback);
        assert_eq!(w.bucket(6 * 3600), 1);
        assert_eq!(w.bucket(WEEK + 6 * 3600), 1);
        let m = w.buckets[&1];
        // bucket values alternate 2, 3
        assert!((m.mean - 2.5).abs() < 1e-12);
        let s = w.score_one(6 * 3600, m.mean).unwrap();
        assert_eq!(s, 0.0);
        let s = w.score_one(6 * 3600, m.mean + 3.0 * m.sd).unwrap();
        assert!((s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn direct_formula() {
        let mut w = WindStats::new(WindStatsConfig::default());
        w.global = Some(Moments { mean: 0.0, sd: 1.0 });
        w.buckets.insert(0, Moments { mean: 10.0, sd: 2.0 });
        assert_eq!(w.score_one(60, 16.0), Some(3.0));
    }

    #[test]
    fn short_history_falls_back_to_global() {
        let mut w = WindStats::new(WindStatsConfig::default());
        let values: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let s = w.train(&hourly(values.clone(), 0)).unwrap();
        assert!(w.global_fallback);
        let mu = stats::mean(&values);
        let sd = stats::std_dev(&values);
        assert!((s.scores[3] - (3.0 - mu) / sd).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_invariance() {
        let values: Vec<f64> = (0..400).map(|i| ((i * 13) % 17) as f64).collect();
        let shifted: Vec<f64> = values.iter().map(|v| v + 1000.0).collect();
        let mut a = WindStats::new(WindStatsConfig::default());
        let mut b = WindStats::new(WindStatsConfig::default());
        let sa = a.train(&hourly(values, 0)).unwrap();
        let sb = b.train(&hourly(shifted, 0)).unwrap();
        for (x, y) in sa.scores.iter().zip(&sb.scores) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
