use serde::{Deserialize, Serialize};

use crate::data::{AnomalyLabelSeries, Timestamp};
use crate::error::{Error, Result};

/// Forecast accuracy metric; lower is better for all of them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastMetric {
    Mae,
    Rmse,
    #[default]
    Smape,
    Marre,
}

impl ForecastMetric {
    pub const ALL: [ForecastMetric; 4] = [Self::Mae, Self::Rmse, Self::Smape, Self::Marre];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mae => "mae",
            Self::Rmse => "rmse",
            Self::Smape => "smape",
            Self::Marre => "marre",
        }
    }

    pub fn compute(&self, y: &[f64], yhat: &[f64]) -> Result<f64> {
        if y.len() != yhat.len() || y.is_empty() {
            return Err(Error::Metric(format!(
                "metric needs equal non-empty inputs, got {} and {}",
                y.len(),
                yhat.len()
            )));
        }
        let n = y.len() as f64;
        let abs_err = || y.iter().zip(yhat).map(|(a, b)| (a - b).abs());
        Ok(match self {
            Self::Mae => abs_err().sum::<f64>() / n,
            Self::Rmse => (abs_err().map(|e| e * e).sum::<f64>() / n).sqrt(),
            Self::Smape => smape(y, yhat).0,
            Self::Marre => {
                let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = y.iter().copied().fold(f64::INFINITY, f64::min);
                if max == min {
                    return Err(Error::Metric("MARRE undefined for constant truth".into()));
                }
                abs_err().sum::<f64>() / n / (max - min)
            }
        })
    }
}

impl std::str::FromStr for ForecastMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Spec(format!("unknown forecast metric '{s}'")))
    }
}

/// sMAPE in percent and the number of terms skipped because `|y| + |ŷ| = 0`.
pub fn smape(y: &[f64], yhat: &[f64]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut used = 0usize;
    for (a, b) in y.iter().zip(yhat) {
        let d = a.abs() + b.abs();
        if d == 0.0 {
            continue;
        }
        sum += (a - b).abs() / d;
        used += 1;
    }
    let value = if used == 0 { 0.0 } else { 200.0 * sum / used as f64 };
    (value, y.len() - used)
}

/// Confusion counts with derived precision, recall and F1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl PointMetrics {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

impl std::ops::Add for PointMetrics {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Point-wise, point-adjusted and revised point-adjusted counts plus the
/// mean time to detect (seconds, over detected windows only).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TsadMetrics {
    pub pw: PointMetrics,
    pub pa: PointMetrics,
    pub rpa: PointMetrics,
    pub mttd: Option<f64>,
}

/// Compares predicted alerts against truth on the truth's timestamp grid.
pub fn tsad_metrics(truth: &AnomalyLabelSeries, predicted: &AnomalyLabelSeries) -> TsadMetrics {
    let pred = predicted.reindex(truth.timestamps());
    let (t, p) = (truth.labels(), pred.labels());
    let stamps = truth.timestamps();

    let mut pw = PointMetrics::default();
    for (a, b) in t.iter().zip(p) {
        match (a, b) {
            (true, true) => pw.tp += 1,
            (false, true) => pw.fp += 1,
            (true, false) => pw.fn_ += 1,
            _ => {}
        }
    }
    // FPs are the same for PA and RPA: predictions outside every window.
    let outside_fp = pw.fp;
    let mut pa = PointMetrics {
        fp: outside_fp,
        ..Default::default()
    };
    let mut rpa = pa;
    let mut delays: Vec<Timestamp> = Vec::new();
    for w in truth.windows() {
        let first = (w.start_index..=w.end_index).find(|&i| p[i]);
        match first {
            Some(i) => {
                pa.tp += w.len();
                rpa.tp += 1;
                delays.push(stamps[i] - w.start);
            }
            None => {
                pa.fn_ += w.len();
                rpa.fn_ += 1;
            }
        }
    }
    let mttd = (!delays.is_empty()).then(|| delays.iter().sum::<i64>() as f64 / delays.len() as f64);
    TsadMetrics { pw, pa, rpa, mttd }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_error_gives_zero_metrics() {
        let y = [1.0, 5.0, -2.0];
        for m in ForecastMetric::ALL {
            assert_eq!(m.compute(&y, &y).unwrap(), 0.0);
        }
    }

    #[test]
    fn hand_values() {
        let s = ForecastMetric::Smape.compute(&[100.0, 200.0], &[110.0, 180.0]).unwrap();
        assert!((s - 10.025_062_656_641_6).abs() < 1e-9);
        let m = ForecastMetric::Marre.compute(&[0.0, 10.0], &[1.0, 9.0]).unwrap();
        assert!((m - 0.1).abs() < 1e-15);
        assert!(ForecastMetric::Marre.compute(&[3.0, 3.0], &[1.0, 9.0]).is_err());
        assert!(ForecastMetric::Mae.compute(&[], &[]).is_err());
        assert_eq!(smape(&[0.0, 1.0], &[0.0, 3.0]), (100.0, 1));
    }

    fn labels(n: usize, on: &[usize]) -> AnomalyLabelSeries {
        let t: Vec<i64> = (0..n as i64).map(|i| i * 60).collect();
        let mut l = vec![false; n];
        for &i in on {
            l[i] = true;
        }
        AnomalyLabelSeries::new(t, l).unwrap()
    }

    #[test]
    fn single_interior_hit() {
        let truth = labels(60, &(10..=20).collect::<Vec<_>>());
        let pred = labels(60, &[15]);
        let m = tsad_metrics(&truth, &pred);
        assert_eq!(m.rpa, PointMetrics { tp: 1, fp: 0, fn_: 0 });
        assert_eq!(m.rpa.f1(), 1.0);
        assert_eq!(m.pa.tp, 11);
        assert_eq!(m.pa.f1(), 1.0);
        assert_eq!(m.mttd, Some(5.0 * 60.0));
    }

    #[test]
    fn miss_outside_window() {
        let truth = labels(60, &(10..=20).collect::<Vec<_>>());
        let m = tsad_metrics(&truth, &labels(60, &[50]));
        assert_eq!(m.rpa, PointMetrics { tp: 0, fp: 1, fn_: 1 });
        assert_eq!((m.rpa.recall(), m.rpa.f1()), (0.0, 0.0));
        assert_eq!(m.mttd, None);
    }

    #[test]
    fn metrics_are_nonnegative_and_ordered() {
        let y = [1.0, -4.0, 9.0, 0.0];
        let yh = [2.0, -1.0, 0.0, 0.0];
        let mae = ForecastMetric::Mae.compute(&y, &yh).unwrap();
        let rmse = ForecastMetric::Rmse.compute(&y, &yh).unwrap();
        assert!(rmse >= mae && mae >= 0.0);
    }

    proptest! {
        #[test]
        fn smape_in_range(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (y, yh): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let s = ForecastMetric::Smape.compute(&y, &yh).unwrap();
            prop_assert!((0.0..=200.0 + 1e-9).contains(&s));
            let mae = ForecastMetric::Mae.compute(&y, &yh).unwrap();
            let rmse = ForecastMetric::Rmse.compute(&y, &yh).unwrap();
            prop_assert!(rmse >= mae - 1e-9);
        }

        #[test]
        fn rpa_counts_every_window_and_matches_pa_for_unit_windows(
            truth in proptest::collection::vec(any::<bool>(), 1..80),
            pred in proptest::collection::vec(any::<bool>(), 80),
        ) {
            let n = truth.len();
            let t: Vec<i64> = (0..n as i64).collect();
            let truth = AnomalyLabelSeries::new(t.clone(), truth).unwrap();
            let pred = AnomalyLabelSeries::new(t, pred[..n].to_vec()).unwrap();
            let m = tsad_metrics(&truth, &pred);
            prop_assert_eq!(m.rpa.tp + m.rpa.fn_, truth.windows().len());
            if truth.windows().iter().all(|w| w.len() == 1) {
                prop_assert_eq!(m.pa, m.rpa);
            }
        }
    }
}
