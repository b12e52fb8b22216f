//! Score calibration to z-score units and alert thresholding.

use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyScoreSeries;
use crate::data::{AnomalyLabelSeries, Timestamp};
use crate::error::{Error, Result};
use crate::stats;

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` must be strictly increasing with at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("interpolation knots must be strictly increasing".into()));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    /// Evaluates inside the knot range; clamps to the end knots outside it.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        // Written around y[k] so flat segments evaluate exactly flat.
        self.y[k] + h01 * (self.y[k + 1] - self.y[k]) + h10 * h * self.d[k] + h11 * h * self.d[k + 1]
    }
}

/// Three-point end slope, adjusted to preserve shape.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Largest calibrated magnitude.
pub const MAX_Z: f64 = 8.0;

/// Quantile levels at which the empirical CDF of `|s|` is sampled.
fn anchor_levels() -> Vec<f64> {
    let mut q: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
    q.extend([0.995, 0.999, 1.0]);
    q
}

/// Monotone map from raw scores to z-scores:
/// `C(s) = sign(s) Φ⁻¹((1 + F(|s|)) / 2)` with `F` the empirical CDF of
/// training `|s|`, interpolated between anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    interp: Option<Pchip>,
    tail_slope: f64,
    /// All training scores were identical; every input maps to 0.
    pub degenerate: bool,
}

impl Calibrator {
    /// Fits on training scores; needs at least 20 finite values.
    pub fn fit(scores: &[f64]) -> Result<Self> {
        let mut abs: Vec<f64> = scores.iter().filter(|v| v.is_finite()).map(|v| v.abs()).collect();
        if abs.len() < 20 {
            return Err(Error::InvalidInput(format!(
                "calibration needs at least 20 finite scores, got {}",
                abs.len()
            )));
        }
        abs.sort_by(f64::total_cmp);
        if abs[0] == abs[abs.len() - 1] {
            return Ok(Self {
                interp: None,
                tail_slope: 0.0,
                degenerate: true,
            });
        }
        let n = abs.len() as f64;
        let mut xs: Vec<f64> = anchor_levels().into_iter().map(|q| stats::quantile_sorted(&abs, q)).collect();
        xs.dedup();
        // Each anchor sits at the midpoint of its empirical CDF jump, which
        // also keeps the top anchor finite.
        let mut ax = Vec::with_capacity(xs.len() + 1);
        let mut az = Vec::with_capacity(xs.len() + 1);
        if xs[0] > 0.0 {
            ax.push(0.0);
            az.push(0.0);
        }
        for x in xs {
            let below = abs.partition_point(|&v| v < x) as f64;
            let at_or_below = abs.partition_point(|&v| v <= x) as f64;
            let q = (below + at_or_below) / (2.0 * n);
            ax.push(x);
            az.push(if x == 0.0 { 0.0 } else { stats::normal_quantile((1.0 + q) / 2.0).min(MAX_Z) });
        }
        let k = ax.len();
        let tail_slope = (az[k - 1] - az[k - 2]) / (ax[k - 1] - ax[k - 2]);
        Ok(Self {
            interp: Some(Pchip::new(ax, az)?),
            tail_slope,
            degenerate: false,
        })
    }

    /// Anchor pairs `(|s|, z)`.
    pub fn anchors(&self) -> Option<(&[f64], &[f64])> {
        self.interp.as_ref().map(Pchip::knots)
    }

    pub fn apply_one(&self, s: f64) -> f64 {
        let Some(p) = &self.interp else { return 0.0 };
        if s.is_nan() {
            return 0.0;
        }
        let a = s.abs();
        let (x, y) = p.knots();
        let last = x.len() - 1;
        let z = if a > x[last] {
            y[last] + self.tail_slope * (a - x[last])
        } else {
            p.eval(a)
        };
        if a == 0.0 {
            0.0
        } else {
            z.min(MAX_Z).copysign(s)
        }
    }

    pub fn apply(&self, scores: &AnomalyScoreSeries) -> AnomalyScoreSeries {
        AnomalyScoreSeries {
            timestamps: scores.timestamps.clone(),
            scores: scores.scores.iter().map(|&s| self.apply_one(s)).collect(),
            calibrated: true,
        }
    }
}

fn default_min_alerts() -> usize {
    2
}
fn default_window() -> i64 {
    3600
}
fn default_suppress() -> i64 {
    7200
}

/// Alert rule on calibrated scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub threshold: f64,
    #[serde(default = "default_min_alerts")]
    pub min_alerts: usize,
    /// Candidates `t'` with `t - t' < alert_window` count towards `min_alerts`.
    #[serde(default = "default_window")]
    pub alert_window: i64,
    /// Dead time after a fired alert.
    #[serde(default = "default_suppress")]
    pub suppress: i64,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        Self {
            threshold: 3.0,
            min_alerts: default_min_alerts(),
            alert_window: default_window(),
            suppress: default_suppress(),
        }
    }
}

impl ThresholdRule {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0) || self.alert_window <= 0 || self.suppress < 0 || self.min_alerts == 0 {
            return Err(Error::Spec(
                "threshold rule needs threshold >= 0, min_alerts >= 1 and positive windows".into(),
            ));
        }
        Ok(())
    }

    /// Timestamps at which alerts fire.
    pub fn fire(&self, timestamps: &[Timestamp], z: &[f64]) -> Vec<Timestamp> {
        let candidates: Vec<Timestamp> = timestamps
            .iter()
            .zip(z)
            .filter(|(_, v)| v.abs() > self.threshold)
            .map(|(t, _)| *t)
            .collect();
        let mut alerts = Vec::new();
        let mut last: Option<Timestamp> = None;
        let mut lo = 0;
        for (i, &t) in candidates.iter().enumerate() {
            while t - candidates[lo] >= self.alert_window {
                lo += 1;
            }
            if i + 1 - lo < self.min_alerts {
                continue;
            }
            if last.is_some_and(|l| t - l < self.suppress) {
                continue;
            }
            alerts.push(t);
            last = Some(t);
        }
        alerts
    }

    /// Fired alerts as labels over the score timestamps.
    pub fn apply(&self, scores: &AnomalyScoreSeries) -> Result<AnomalyLabelSeries> {
        let alerts = self.fire(&scores.timestamps, &scores.scores);
        AnomalyLabelSeries::from_anomalous(scores.timestamps.clone(), &alerts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pchip_reproduces_knots_and_is_monotone() {
        let p = Pchip::new(vec![0.0, 1.0, 2.0, 5.0], vec![0.0, 0.5, 3.0, 3.2]).unwrap();
        assert_eq!(p.eval(2.0), 3.0);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=500 {
            let v = p.eval(i as f64 / 100.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        assert!(Pchip::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn pchip_matches_linear_on_lines() {
        let p = Pchip::new(vec![0.0, 1.0, 3.0, 4.0], vec![1.0, 3.0, 7.0, 9.0]).unwrap();
        for t in [0.3, 1.7, 2.2, 3.9] {
            assert!((p.eval(t) - (1.0 + 2.0 * t)).abs() < 1e-12);
        }
    }

    fn uniform_scores(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn tenth_upper_quantile_maps_to_1645() {
        let s = uniform_scores(1000);
        let c = Calibrator::fit(&s).unwrap();
        let mut a = s.clone();
        a.sort_by(f64::total_cmp);
        let q90 = stats::quantile_sorted(&a, 0.9);
        assert!((c.apply_one(q90) - 1.6448536269514722).abs() < 5e-3);
        assert_eq!(c.apply_one(0.0), 0.0);
        let frac = s.iter().filter(|&&v| c.apply_one(v).abs() > 1.6449).count() as f64 / 1000.0;
        assert!((frac - 0.10).abs() <= 0.03);
    }

    #[test]
    fn degenerate_scores_map_to_zero() {
        let c = Calibrator::fit(&[2.0; 30]).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.apply_one(100.0), 0.0);
        assert!(Calibrator::fit(&[1.0; 5]).is_err());
    }

    #[test]
    fn tail_is_linear_and_clamped() {
        let c = Calibrator::fit(&uniform_scores(200)).unwrap();
        assert!(c.apply_one(1.5) > c.apply_one(1.0));
        assert_eq!(c.apply_one(1e9), MAX_Z);
        assert_eq!(c.apply_one(-1e9), -MAX_Z);
    }

    fn rule(min_alerts: usize) -> ThresholdRule {
        ThresholdRule {
            threshold: 3.0,
            min_alerts,
            alert_window: 3600,
            suppress: 7200,
        }
    }

    #[test]
    fn single_spike_single_alert() {
        let t: Vec<i64> = (0..10).map(|i| i * 600).collect();
        let mut z = vec![0.0; 10];
        z[4] = 5.0;
        assert_eq!(rule(1).fire(&t, &z), vec![2400]);
        assert!(rule(2).fire(&t, &z).is_empty());
    }

    #[test]
    fn second_spike_in_window_fires_third_is_suppressed() {
        let t: Vec<i64> = (0..20).map(|i| i * 1800).collect();
        let mut z = vec![0.0; 20];
        z[2] = 4.0;
        z[3] = 4.0;
        z[4] = 4.0;
        assert_eq!(rule(2).fire(&t, &z), vec![3 * 1800]);
    }

    #[test]
    fn window_boundary_is_exclusive() {
        let t = vec![0, 3600];
        assert!(rule(2).fire(&t, &[4.0, 4.0]).is_empty());
        assert_eq!(rule(2).fire(&[0, 3599], &[4.0, -4.0]), vec![3599]);
    }

    proptest! {
        #[test]
        fn calibration_is_odd_and_monotone(
            train in proptest::collection::vec(-50.0f64..50.0, 20..200),
            a in 0.0f64..100.0,
            b in 0.0f64..100.0,
        ) {
            let c = Calibrator::fit(&train).unwrap();
            prop_assert_eq!(c.apply_one(-a), -c.apply_one(a));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c.apply_one(lo) <= c.apply_one(hi));
        }

        #[test]
        fn raising_threshold_never_adds_alerts(
            z in proptest::collection::vec(-6.0f64..6.0, 1..150),
            t1 in 0.0f64..6.0,
            dt in 0.0f64..3.0,
        ) {
            let stamps: Vec<i64> = (0..z.len() as i64).map(|i| i * 300).collect();
            let lo = ThresholdRule { threshold: t1, ..ThresholdRule::default() };
            let hi = ThresholdRule { threshold: t1 + dt, ..ThresholdRule::default() };
            prop_assert!(hi.fire(&stamps, &z).len() <= lo.fire(&stamps, &z).len());
        }
    }
}
