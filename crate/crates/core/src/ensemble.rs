//! Combining forecasters and detectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::anomaly::{AnomalyDetector, AnomalyScoreSeries, CalibratedDetector};
use crate::data::{TimeSeries, Timestamp};
use crate::error::{Error, Result};
use crate::eval::ForecastMetric;
use crate::forecast::{ForecastResult, Forecaster};
use crate::stats;

fn default_fraction() -> f64 {
    0.2
}

/// How member forecasts are combined.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Combiner {
    #[default]
    Mean,
    Median,
    /// Keep the member with the lowest metric on a trailing validation split.
    MetricSelect {
        #[serde(default)]
        metric: ForecastMetric,
        #[serde(default = "default_fraction")]
        validation_fraction: f64,
    },
}

impl Combiner {
    pub fn validate(&self) -> Result<()> {
        if let Combiner::MetricSelect {
            validation_fraction: f, ..
        } = self
        {
            if !(*f > 0.0 && *f <= 0.5) {
                return Err(Error::Spec(format!("validation_fraction {f} outside (0, 0.5]")));
            }
        }
        Ok(())
    }
}

/// Forecaster averaging (or selecting among) its members.
pub struct ForecasterEnsemble {
    members: Vec<(String, Box<dyn Forecaster>)>,
    active: Vec<bool>,
    combiner: Combiner,
    target: usize,
    selected: Option<usize>,
    /// Members that failed to train in the last `train` call.
    pub dropped: Vec<String>,
}

impl ForecasterEnsemble {
    pub fn new(members: Vec<(String, Box<dyn Forecaster>)>, combiner: Combiner, target: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Ensemble("ensemble needs at least one member".into()));
        }
        combiner.validate()?;
        let n = members.len();
        Ok(Self {
            members,
            active: vec![false; n],
            combiner,
            target,
            selected: None,
            dropped: Vec::new(),
        })
    }

    /// Name of the member chosen by metric selection.
    pub fn selected(&self) -> Option<&str> {
        self.selected.map(|i| self.members[i].0.as_str())
    }
}

/// Splits off the trailing `fraction` of `ts` (at least one point) for validation.
pub fn validation_split(ts: &TimeSeries, fraction: f64) -> Result<(TimeSeries, TimeSeries)> {
    let n = ts.len();
    let n_val = ((fraction * n as f64).round() as usize).max(1);
    if n_val >= n {
        return Err(Error::Split(format!("series of length {n} too short for a validation split")));
    }
    Ok((ts.slice(0..n - n_val), ts.slice(n - n_val..n)))
}

/// Trains every candidate on the leading part, scores it on the trailing
/// validation part and returns per-candidate scores (`None` on failure) and
/// the index of the winner. Ties go to the earliest candidate.
fn select(
    members: &mut [(String, Box<dyn Forecaster>)],
    ts: &TimeSeries,
    metric: ForecastMetric,
    fraction: f64,
) -> Result<(usize, Vec<Option<f64>>)> {
    let (train, val) = validation_split(ts, fraction)?;
    let mut scores = Vec::with_capacity(members.len());
    for (_, m) in members.iter_mut() {
        let score = (|| {
            m.train(&train)?;
            let truth = crate::forecast::target_of(&val, m.target_index())?;
            let pred = m.forecast(truth.timestamps(), None)?;
            metric.compute(truth.values(), &pred.values)
        })();
        scores.push(score.ok().filter(|s| s.is_finite()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
    }
    let (winner, _) = best.ok_or_else(|| Error::Ensemble("every candidate failed validation".into()))?;
    Ok((winner, scores))
}

/// Picks the candidate with the lowest validation metric and retrains it on
/// all of `ts`. Returns the winner's index, the trained model and the
/// validation scores.
pub fn model_select(
    mut candidates: Vec<Box<dyn Forecaster>>,
    ts: &TimeSeries,
    metric: ForecastMetric,
    validation_fraction: f64,
) -> Result<(usize, Box<dyn Forecaster>, Vec<Option<f64>>)> {
    if candidates.len() < 2 {
        return Err(Error::Ensemble("model selection needs at least two candidates".into()));
    }
    Combiner::MetricSelect {
        metric,
        validation_fraction,
    }
    .validate()?;
    let mut named: Vec<(String, Box<dyn Forecaster>)> = candidates.drain(..).map(|m| (m.name(), m)).collect();
    let (winner, scores) = select(&mut named, ts, metric, validation_fraction)?;
    let (_, mut model) = named.swap_remove(winner);
    model.train(ts)?;
    Ok((winner, model, scores))
}

/// Per-timestamp combination of member values.
fn combine(values: &mut [f64], median: bool) -> f64 {
    if median {
        values.sort_by(f64::total_cmp);
        stats::quantile_sorted(values, 0.5)
    } else {
        stats::mean(values)
    }
}

impl Forecaster for ForecasterEnsemble {
    fn name(&self) -> String {
        "ensemble".into()
    }

    fn target_index(&self) -> usize {
        self.target
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<()> {
        self.dropped.clear();
        self.selected = None;
        if let Combiner::MetricSelect {
            metric,
            validation_fraction,
        } = self.combiner
        {
            let (winner, scores) = select(&mut self.members, ts, metric, validation_fraction)?;
            for (i, s) in scores.iter().enumerate() {
                if s.is_none() {
                    self.dropped.push(self.members[i].0.clone());
                }
            }
            self.members[winner].1.train(ts)?;
            self.active = (0..self.members.len()).map(|i| i == winner).collect();
            self.selected = Some(winner);
            return Ok(());
        }
        for (i, (name, m)) in self.members.iter_mut().enumerate() {
            self.active[i] = m.train(ts).is_ok();
            if !self.active[i] {
                self.dropped.push(name.clone());
            }
        }
        if !self.active.iter().any(|&a| a) {
            return Err(Error::Ensemble("every member failed to train".into()));
        }
        Ok(())
    }

    fn forecast(&self, timestamps: &[Timestamp], prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        if let Some(i) = self.selected {
            return self.members[i].1.forecast(timestamps, prev);
        }
        let results: Vec<ForecastResult> = self
            .members
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .filter_map(|((_, m), _)| m.forecast(timestamps, prev).ok())
            .collect();
        if results.is_empty() {
            return Err(Error::Ensemble("no member produced a forecast".into()));
        }
        let median = matches!(self.combiner, Combiner::Median);
        let values = (0..timestamps.len())
            .map(|h| combine(&mut results.iter().map(|r| r.values[h]).collect::<Vec<_>>(), median))
            .collect();
        let stderr = results.iter().all(|r| r.stderr.is_some()).then(|| {
            (0..timestamps.len())
                .map(|h| combine(&mut results.iter().map(|r| r.stderr.as_ref().unwrap()[h]).collect::<Vec<_>>(), median))
                .collect()
        });
        ForecastResult::new(timestamps.to_vec(), values, stderr)
    }

    fn min_history(&self) -> usize {
        self.members
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .map(|((_, m), _)| m.min_history())
            .max()
            .unwrap_or(1)
    }
}

/// Mean of calibrated score series on the intersection of their timestamps.
pub fn mean_calibrated(series: &[AnomalyScoreSeries]) -> Result<AnomalyScoreSeries> {
    if series.is_empty() {
        return Err(Error::Ensemble("no member scores to combine".into()));
    }
    let mut acc: BTreeMap<Timestamp, (f64, usize)> = BTreeMap::new();
    for s in series {
        for (t, v) in s.timestamps.iter().zip(&s.scores) {
            let e = acc.entry(*t).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let m = series.len();
    let (timestamps, scores): (Vec<_>, Vec<_>) = acc
        .into_iter()
        .filter(|(_, (_, c))| *c == m)
        .map(|(t, (sum, _))| (t, sum / m as f64))
        .unzip();
    if timestamps.is_empty() {
        return Err(Error::Ensemble("member score grids do not intersect".into()));
    }
    Ok(AnomalyScoreSeries {
        timestamps,
        scores,
        calibrated: true,
    })
}

/// Detector reporting the mean calibrated score of its members.
pub struct DetectorEnsemble {
    members: Vec<CalibratedDetector>,
    active: Vec<bool>,
    /// Members that failed in the last `train` call.
    pub dropped: Vec<String>,
}

impl DetectorEnsemble {
    pub fn new(members: Vec<Box<dyn AnomalyDetector>>) -> Self {
        let n = members.len();
        Self {
            members: members.into_iter().map(CalibratedDetector::new).collect(),
            active: vec![false; n],
            dropped: Vec::new(),
        }
    }
}

impl AnomalyDetector for DetectorEnsemble {
    fn name(&self) -> String {
        let names: Vec<String> = self.members.iter().map(|m| m.name()).collect();
        format!("ensemble({})", names.join("+"))
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<AnomalyScoreSeries> {
        self.dropped.clear();
        let mut outs = Vec::new();
        for (i, m) in self.members.iter_mut().enumerate() {
            match m.train(ts) {
                Ok(s) => {
                    self.active[i] = true;
                    outs.push(s);
                }
                Err(_) => {
                    self.active[i] = false;
                    self.dropped.push(m.name());
                }
            }
        }
        if outs.is_empty() {
            return Err(Error::Ensemble("every member failed to train".into()));
        }
        mean_calibrated(&outs)
    }

    fn score(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<AnomalyScoreSeries> {
        let outs = self
            .members
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .map(|(m, _)| m.score(ts, prev))
            .collect::<Result<Vec<_>>>()?;
        mean_calibrated(&outs)
    }

    fn emits_calibrated(&self) -> bool {
        true
    }

    /// A never-trained ensemble is trained from scratch, member calibrators
    /// included.
    fn retrain(&mut self, ts: &TimeSeries) -> Result<()> {
        if !self.active.iter().any(|a| *a) {
            return self.train(ts).map(|_| ());
        }
        for (m, a) in self.members.iter_mut().zip(&self.active) {
            if *a {
                m.retrain(ts)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnivariateTimeSeries;

    struct Constant(f64, bool);

    impl Forecaster for Constant {
        fn name(&self) -> String {
            format!("const{}", self.0)
        }
        fn target_index(&self) -> usize {
            0
        }
        fn train(&mut self, _: &TimeSeries) -> Result<()> {
            if self.1 {
                Err(Error::InvalidInput("boom".into()))
            } else {
                Ok(())
            }
        }
        fn forecast(&self, timestamps: &[Timestamp], _: Option<&TimeSeries>) -> Result<ForecastResult> {
            ForecastResult::new(timestamps.to_vec(), vec![self.0; timestamps.len()], None)
        }
    }

    /// Repeats the last observed value.
    struct Naive(f64);

    impl Forecaster for Naive {
        fn name(&self) -> String {
            "naive".into()
        }
        fn target_index(&self) -> usize {
            0
        }
        fn train(&mut self, ts: &TimeSeries) -> Result<()> {
            self.0 = *ts.univariate(0).unwrap().values().last().unwrap();
            Ok(())
        }
        fn forecast(&self, timestamps: &[Timestamp], _: Option<&TimeSeries>) -> Result<ForecastResult> {
            ForecastResult::new(timestamps.to_vec(), vec![self.0; timestamps.len()], None)
        }
    }

    fn ts(v: Vec<f64>) -> TimeSeries {
        UnivariateTimeSeries::from_values("y", 0, 60, v).unwrap().into()
    }

    fn members(vals: &[f64]) -> Vec<(String, Box<dyn Forecaster>)> {
        vals.iter()
            .map(|&v| (format!("c{v}"), Box::new(Constant(v, false)) as Box<dyn Forecaster>))
            .collect()
    }

    #[test]
    fn mean_and_median() {
        let mut e = ForecasterEnsemble::new(members(&[10.0, 14.0]), Combiner::Mean, 0).unwrap();
        e.train(&ts(vec![0.0; 10])).unwrap();
        assert_eq!(e.forecast(&[600], None).unwrap().values, vec![12.0]);
        let mut e = ForecasterEnsemble::new(members(&[1.0, 2.0, 100.0]), Combiner::Median, 0).unwrap();
        e.train(&ts(vec![0.0; 10])).unwrap();
        assert_eq!(e.forecast(&[600], None).unwrap().values, vec![2.0]);
    }

    #[test]
    fn failed_member_is_dropped() {
        let mut m = members(&[3.0]);
        m.push(("bad".into(), Box::new(Constant(99.0, true))));
        let mut e = ForecasterEnsemble::new(m, Combiner::Mean, 0).unwrap();
        e.train(&ts(vec![0.0; 10])).unwrap();
        assert_eq!(e.dropped, vec!["bad".to_string()]);
        assert_eq!(e.forecast(&[600], None).unwrap().values, vec![3.0]);
        let mut all_bad = ForecasterEnsemble::new(
            vec![("bad".into(), Box::new(Constant(1.0, true)) as Box<dyn Forecaster>)],
            Combiner::Mean,
            0,
        )
        .unwrap();
        assert!(matches!(all_bad.train(&ts(vec![0.0; 10])), Err(Error::Ensemble(_))));
    }

    #[test]
    fn selection_prefers_accurate_model_and_first_on_ties() {
        let data = ts((0..50).map(|t| if t < 40 { 0.0 } else { 5.0 }).collect());
        let cands: Vec<Box<dyn Forecaster>> = vec![Box::new(Constant(0.0, false)), Box::new(Constant(5.0, false))];
        let (i, _, scores) = model_select(cands, &data, ForecastMetric::Mae, 0.2).unwrap();
        assert_eq!(i, 1);
        assert_eq!(scores, vec![Some(5.0), Some(0.0)]);

        let cands: Vec<Box<dyn Forecaster>> = vec![Box::new(Constant(2.0, false)), Box::new(Constant(2.0, false))];
        let (i, _, _) = model_select(cands, &data, ForecastMetric::Mae, 0.2).unwrap();
        assert_eq!(i, 0);
    }

    #[test]
    fn winner_is_retrained_on_full_data() {
        let data = ts((0..50).map(f64::from).collect());
        let cands: Vec<Box<dyn Forecaster>> = vec![Box::new(Constant(-100.0, false)), Box::new(Naive(0.0))];
        let (i, m, _) = model_select(cands, &data, ForecastMetric::Smape, 0.2).unwrap();
        assert_eq!(i, 1);
        assert_eq!(m.forecast(&[3000], None).unwrap().values, vec![49.0]);
    }

    #[test]
    fn combiner_json_and_bounds() {
        let c: Combiner = serde_json::from_str(r#"{"mode":"metric-select"}"#).unwrap();
        assert_eq!(
            c,
            Combiner::MetricSelect {
                metric: ForecastMetric::Smape,
                validation_fraction: 0.2
            }
        );
        let bad = Combiner::MetricSelect {
            metric: ForecastMetric::Mae,
            validation_fraction: 0.7,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn calibrated_mean_on_intersection() {
        let a = AnomalyScoreSeries {
            timestamps: vec![1, 2, 3],
            scores: vec![2.0, 2.0, 2.0],
            calibrated: true,
        };
        let b = AnomalyScoreSeries {
            timestamps: vec![2, 3, 4],
            scores: vec![4.0, -1.0, 0.0],
            calibrated: true,
        };
        let m = mean_calibrated(&[a.clone(), b]).unwrap();
        assert_eq!(m.timestamps, vec![2, 3]);
        assert_eq!(m.scores, vec![3.0, 0.5]);
        let same = mean_calibrated(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(same.scores, a.scores);
        let disjoint = AnomalyScoreSeries {
            timestamps: vec![9],
            scores: vec![1.0],
            calibrated: true,
        };
        assert!(mean_calibrated(&[a, disjoint]).is_err());
    }

    #[test]
    fn fresh_ensemble_retrain_trains_members() {
        use crate::anomaly::{Zms, ZmsConfig};
        let v: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64).collect();
        let ts: TimeSeries = UnivariateTimeSeries::from_values("y", 0, 60, v).unwrap().into();
        let mut e = DetectorEnsemble::new(vec![Box::new(Zms::new(ZmsConfig::default()))]);
        e.retrain(&ts).unwrap();
        assert_eq!(e.score(&ts.slice(150..200), Some(&ts.slice(0..150))).unwrap().scores.len(), 50);
    }
}
