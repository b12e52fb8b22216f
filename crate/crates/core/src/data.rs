//! Time series containers and alignment primitives.
//!
//! A [`TimeSeries`] is a collection of [`UnivariateTimeSeries`] that may be
//! sampled on different grids. Missing data is represented by the absence of
//! a point; values are always finite.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer seconds since the Unix epoch.
pub type Timestamp = i64;

/// A named sequence of `(timestamp, value)` points with strictly increasing
/// timestamps and finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateTimeSeries {
    name: String,
    timestamps: Vec<Timestamp>,
    values: Vec<f64>,
}

impl UnivariateTimeSeries {
    pub fn new(
        name: impl Into<String>,
        timestamps: Vec<Timestamp>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if timestamps.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{name}: {} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries(format!(
                "{name}: timestamps not strictly increasing at index {}",
                w + 1
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "{name}: non-finite value at index {i}"
            )));
        }
        Ok(Self {
            name,
            timestamps,
            values,
        })
    }

    /// Builds a series on a regular grid `start, start + step, ...`.
    pub fn from_values(
        name: impl Into<String>,
        start: Timestamp,
        step: i64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if step <= 0 {
            return Err(Error::InvalidInput("step must be positive".into()));
        }
        let timestamps = (0..values.len() as i64).map(|i| start + i * step).collect();
        Self::new(name, timestamps, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (Timestamp, f64)> + '_ {
        self.timestamps.iter().copied().zip(self.values.iter().copied())
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Points whose timestamps satisfy `keep`.
    pub fn filter_time(&self, keep: impl Fn(Timestamp) -> bool) -> Self {
        let (timestamps, values) = self.points().filter(|(t, _)| keep(*t)).unzip();
        Self {
            name: self.name.clone(),
            timestamps,
            values,
        }
    }

    /// Index-based slice.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            name: self.name.clone(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
        }
    }

    /// Appends `other`, which must start strictly after this series ends.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if let (Some(&a), Some(&b)) = (self.timestamps.last(), other.timestamps.first()) {
            if b <= a {
                return Err(Error::InvalidSeries(format!(
                    "{}: cannot append series starting at {b} after {a}",
                    self.name
                )));
            }
        }
        let mut out = self.clone();
        out.timestamps.extend_from_slice(&other.timestamps);
        out.values.extend_from_slice(&other.values);
        Ok(out)
    }

    /// Median gap between consecutive timestamps, if there are at least two points.
    pub fn median_step(&self) -> Option<i64> {
        let mut gaps: Vec<i64> = self.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
        if gaps.is_empty() {
            return None;
        }
        gaps.sort_unstable();
        Some(gaps[gaps.len() / 2])
    }
}

/// An ordered collection of univariate series with unique names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    univariates: Vec<UnivariateTimeSeries>,
}

impl TimeSeries {
    pub fn new(univariates: Vec<UnivariateTimeSeries>) -> Result<Self> {
        if univariates.is_empty() {
            return Err(Error::InvalidSeries("time series needs at least one univariate".into()));
        }
        let mut seen = HashSet::new();
        for u in &univariates {
            if !seen.insert(u.name()) {
                return Err(Error::InvalidSeries(format!("duplicate univariate name {}", u.name())));
            }
        }
        Ok(Self { univariates })
    }

    /// Builds an aligned series from row-major values.
    pub fn from_rows(
        names: &[String],
        timestamps: &[Timestamp],
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        if rows.len() != timestamps.len() {
            return Err(Error::InvalidInput("rows and timestamps differ in length".into()));
        }
        let univariates = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let values = rows
                    .iter()
                    .map(|r| {
                        r.get(j)
                            .copied()
                            .ok_or_else(|| Error::InvalidInput("ragged rows".into()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                UnivariateTimeSeries::new(name.clone(), timestamps.to_vec(), values)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(univariates)
    }

    pub fn dim(&self) -> usize {
        self.univariates.len()
    }

    pub fn univariates(&self) -> &[UnivariateTimeSeries] {
        &self.univariates
    }

    pub fn univariate(&self, index: usize) -> Option<&UnivariateTimeSeries> {
        self.univariates.get(index)
    }

    pub fn names(&self) -> Vec<String> {
        self.univariates.iter().map(|u| u.name().to_string()).collect()
    }

    /// Whether every univariate shares the same timestamps.
    pub fn is_aligned(&self) -> bool {
        let first = self.univariates[0].timestamps();
        self.univariates.iter().all(|u| u.timestamps() == first)
    }

    /// Sorted union of all timestamps.
    pub fn union_timestamps(&self) -> Vec<Timestamp> {
        let set: BTreeSet<Timestamp> = self
            .univariates
            .iter()
            .flat_map(|u| u.timestamps().iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// Number of distinct timestamps.
    pub fn len(&self) -> usize {
        if self.is_aligned() {
            self.univariates[0].len()
        } else {
            self.union_timestamps().len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.univariates.iter().all(|u| u.is_empty())
    }

    /// Timestamps of an aligned series.
    pub fn timestamps(&self) -> Result<&[Timestamp]> {
        if !self.is_aligned() {
            return Err(Error::Alignment("univariates are not aligned".into()));
        }
        Ok(self.univariates[0].timestamps())
    }

    /// Row-major values of an aligned series.
    pub fn rows(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.timestamps()?.len();
        Ok((0..n)
            .map(|i| self.univariates.iter().map(|u| u.values()[i]).collect())
            .collect())
    }

    pub fn filter_time(&self, keep: impl Fn(Timestamp) -> bool + Copy) -> Self {
        Self {
            univariates: self.univariates.iter().map(|u| u.filter_time(keep)).collect(),
        }
    }

    /// Points with `start <= t < end`; `None` bounds are open.
    pub fn window(&self, start: Option<Timestamp>, end: Option<Timestamp>) -> Self {
        self.filter_time(|t| start.is_none_or(|s| t >= s) && end.is_none_or(|e| t < e))
    }

    /// Index-based slice of an aligned series.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            univariates: self.univariates.iter().map(|u| u.slice(range.clone())).collect(),
        }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::InvalidInput("cannot concatenate series of different dimension".into()));
        }
        let univariates = self
            .univariates
            .iter()
            .zip(&other.univariates)
            .map(|(a, b)| a.concat(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { univariates })
    }

    pub fn map_univariates(
        &self,
        mut f: impl FnMut(usize, &UnivariateTimeSeries) -> Result<UnivariateTimeSeries>,
    ) -> Result<Self> {
        let univariates = self
            .univariates
            .iter()
            .enumerate()
            .map(|(i, u)| f(i, u))
            .collect::<Result<Vec<_>>>()?;
        Self::new(univariates)
    }
}

impl From<UnivariateTimeSeries> for TimeSeries {
    fn from(u: UnivariateTimeSeries) -> Self {
        Self { univariates: vec![u] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JoinPolicy {
    OuterJoin,
    InnerJoin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    ForwardFill,
    Linear,
    None,
}

/// Puts every univariate on a shared timestamp grid.
///
/// Grid points where some univariate is still missing after filling are dropped.
/// Linear filling never extrapolates past a univariate's span.
pub fn align(ts: &TimeSeries, join: JoinPolicy, fill: FillPolicy) -> Result<TimeSeries> {
    if ts.is_empty() {
        return Err(Error::Alignment("cannot align an empty time series".into()));
    }
    let grid: Vec<Timestamp> = match join {
        JoinPolicy::OuterJoin => ts.union_timestamps(),
        JoinPolicy::InnerJoin => {
            let mut acc: BTreeSet<Timestamp> = ts.univariates[0].timestamps().iter().copied().collect();
            for u in &ts.univariates[1..] {
                let other: BTreeSet<Timestamp> = u.timestamps().iter().copied().collect();
                acc = acc.intersection(&other).copied().collect();
            }
            acc.into_iter().collect()
        }
    };

    let columns: Vec<Vec<Option<f64>>> = ts
        .univariates
        .iter()
        .map(|u| grid.iter().map(|&g| value_at(u, g, fill)).collect())
        .collect();

    let keep: Vec<usize> = (0..grid.len())
        .filter(|&i| columns.iter().all(|c| c[i].is_some()))
        .collect();
    if keep.is_empty() {
        return Err(Error::Alignment("no timestamps remain after alignment".into()));
    }
    let timestamps: Vec<Timestamp> = keep.iter().map(|&i| grid[i]).collect();
    let univariates = ts
        .univariates
        .iter()
        .zip(&columns)
        .map(|(u, c)| {
            let values = keep.iter().map(|&i| c[i].unwrap_or_default()).collect();
            UnivariateTimeSeries::new(u.name(), timestamps.clone(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new(univariates)
}

fn value_at(u: &UnivariateTimeSeries, t: Timestamp, fill: FillPolicy) -> Option<f64> {
    let ts = u.timestamps();
    let idx = ts.partition_point(|&x| x < t);
    if idx < ts.len() && ts[idx] == t {
        return Some(u.values()[idx]);
    }
    match fill {
        FillPolicy::None => None,
        FillPolicy::ForwardFill => idx.checked_sub(1).map(|p| u.values()[p]),
        FillPolicy::Linear => {
            let prev = idx.checked_sub(1)?;
            if idx >= ts.len() {
                return None;
            }
            let (t0, t1) = (ts[prev] as f64, ts[idx] as f64);
            let (v0, v1) = (u.values()[prev], u.values()[idx]);
            Some(v0 + (v1 - v0) * (t as f64 - t0) / (t1 - t0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Mean,
    Last,
}

/// Buckets points onto multiples of `granularity` seconds; empty buckets are omitted.
pub fn resample(
    u: &UnivariateTimeSeries,
    granularity: i64,
    agg: Aggregation,
) -> Result<UnivariateTimeSeries> {
    if granularity <= 0 {
        return Err(Error::InvalidInput("granularity must be positive".into()));
    }
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut i = 0;
    let (ts, vs) = (u.timestamps(), u.values());
    while i < ts.len() {
        let bucket = ts[i].div_euclid(granularity) * granularity;
        let mut j = i;
        let mut sum = 0.0;
        while j < ts.len() && ts[j].div_euclid(granularity) * granularity == bucket {
            sum += vs[j];
            j += 1;
        }
        let v = match agg {
            Aggregation::Mean => sum / (j - i) as f64,
            Aggregation::Last => vs[j - 1],
        };
        timestamps.push(bucket);
        values.push(v);
        i = j;
    }
    UnivariateTimeSeries::new(u.name(), timestamps, values)
}

/// Splits at the timestamp found `fraction` of the way through the union of all
/// timestamps. Train receives timestamps at or before the split point.
pub fn split_at(ts: &TimeSeries, fraction: f64) -> Result<(TimeSeries, TimeSeries)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Split(format!("fraction {fraction} outside (0, 1)")));
    }
    if let Some(u) = ts.univariates().iter().find(|u| u.len() < 2) {
        return Err(Error::Split(format!("{} has fewer than 2 points", u.name())));
    }
    let all = ts.union_timestamps();
    let k = ((fraction * all.len() as f64).round() as usize).clamp(1, all.len());
    split_at_timestamp(ts, all[k - 1])
}

/// Splits into `t <= cut` and `t > cut`.
pub fn split_at_timestamp(ts: &TimeSeries, cut: Timestamp) -> Result<(TimeSeries, TimeSeries)> {
    let train = ts.filter_time(|t| t <= cut);
    let test = ts.filter_time(|t| t > cut);
    for (side, part) in [("train", &train), ("test", &test)] {
        if let Some(u) = part.univariates().iter().find(|u| u.is_empty()) {
            return Err(Error::Split(format!("{side} side of {} is empty", u.name())));
        }
    }
    Ok((train, test))
}

/// A maximal run of consecutive anomalous points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelWindow {
    pub start_index: usize,
    /// Inclusive.
    pub end_index: usize,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl LabelWindow {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        t >= self.start && t <= self.end
    }
}

/// Binary anomaly labels over a timestamp grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyLabelSeries {
    timestamps: Vec<Timestamp>,
    labels: Vec<bool>,
    windows: Vec<LabelWindow>,
}

impl AnomalyLabelSeries {
    pub fn new(timestamps: Vec<Timestamp>, labels: Vec<bool>) -> Result<Self> {
        if timestamps.len() != labels.len() {
            return Err(Error::InvalidInput("labels and timestamps differ in length".into()));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("label timestamps not strictly increasing".into()));
        }
        let windows = derive_windows(&timestamps, &labels);
        Ok(Self {
            timestamps,
            labels,
            windows,
        })
    }

    /// Labels over `timestamps` with the given anomalous stamps marked.
    pub fn from_anomalous(timestamps: Vec<Timestamp>, anomalous: &[Timestamp]) -> Result<Self> {
        let set: HashSet<Timestamp> = anomalous.iter().copied().collect();
        let labels = timestamps.iter().map(|t| set.contains(t)).collect();
        Self::new(timestamps, labels)
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn windows(&self) -> &[LabelWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn anomalous_timestamps(&self) -> Vec<Timestamp> {
        self.points().filter(|(_, l)| *l).map(|(t, _)| t).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = (Timestamp, bool)> + '_ {
        self.timestamps.iter().copied().zip(self.labels.iter().copied())
    }

    /// Labels restricted to `start <= t < end`.
    pub fn window(&self, start: Option<Timestamp>, end: Option<Timestamp>) -> Self {
        let (timestamps, labels): (Vec<_>, Vec<_>) = self
            .points()
            .filter(|(t, _)| start.is_none_or(|s| *t >= s) && end.is_none_or(|e| *t < e))
            .unzip();
        let windows = derive_windows(&timestamps, &labels);
        Self {
            timestamps,
            labels,
            windows,
        }
    }

    /// Projects onto a new grid; grid stamps absent here are labelled normal.
    pub fn reindex(&self, grid: &[Timestamp]) -> Self {
        let anomalous = self.anomalous_timestamps();
        Self::from_anomalous(grid.to_vec(), &anomalous).expect("grid is strictly increasing")
    }
}

fn derive_windows(timestamps: &[Timestamp], labels: &[bool]) -> Vec<LabelWindow> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        if labels[i] {
            let s = i;
            while i + 1 < labels.len() && labels[i + 1] {
                i += 1;
            }
            out.push(LabelWindow {
                start_index: s,
                end_index: i,
                start: timestamps[s],
                end: timestamps[i],
            });
        }
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uni(name: &str, ts: &[i64], vs: &[f64]) -> UnivariateTimeSeries {
        UnivariateTimeSeries::new(name, ts.to_vec(), vs.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_series() {
        assert!(UnivariateTimeSeries::new("x", vec![0, 0], vec![1.0, 2.0]).is_err());
        assert!(UnivariateTimeSeries::new("x", vec![0, 1], vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::new(vec![]).is_err());
        let a = uni("a", &[0], &[1.0]);
        assert!(TimeSeries::new(vec![a.clone(), a]).is_err());
    }

    #[test]
    fn align_identical_is_identity() {
        let ts = TimeSeries::new(vec![
            uni("a", &[0, 60, 120], &[1.0, 2.0, 3.0]),
            uni("b", &[0, 60, 120], &[4.0, 5.0, 6.0]),
        ])
        .unwrap();
        assert_eq!(align(&ts, JoinPolicy::InnerJoin, FillPolicy::None).unwrap(), ts);
    }

    #[test]
    fn align_inner_intersects() {
        let ts = TimeSeries::new(vec![
            uni("a", &[0, 60, 120], &[1.0, 2.0, 3.0]),
            uni("b", &[60, 120, 180], &[4.0, 5.0, 6.0]),
        ])
        .unwrap();
        let out = align(&ts, JoinPolicy::InnerJoin, FillPolicy::None).unwrap();
        assert_eq!(out.timestamps().unwrap(), &[60, 120]);
        assert_eq!(out.univariate(0).unwrap().values(), &[2.0, 3.0]);
    }

    #[test]
    fn align_empty_intersection_fails() {
        let ts = TimeSeries::new(vec![uni("a", &[0], &[1.0]), uni("b", &[60], &[1.0])]).unwrap();
        assert!(matches!(
            align(&ts, JoinPolicy::InnerJoin, FillPolicy::None),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn align_outer_forward_fill() {
        let ts = TimeSeries::new(vec![
            uni("a", &[0, 120], &[7.0, 9.0]),
            uni("b", &[0, 60, 120], &[1.0, 2.0, 3.0]),
        ])
        .unwrap();
        let out = align(&ts, JoinPolicy::OuterJoin, FillPolicy::ForwardFill).unwrap();
        assert_eq!(out.timestamps().unwrap(), &[0, 60, 120]);
        assert_eq!(out.univariate(0).unwrap().values(), &[7.0, 7.0, 9.0]);
    }

    #[test]
    fn align_linear_does_not_extrapolate() {
        let ts = TimeSeries::new(vec![
            uni("a", &[60, 180], &[1.0, 3.0]),
            uni("b", &[0, 60, 120, 180, 240], &[0.0; 5]),
        ])
        .unwrap();
        let out = align(&ts, JoinPolicy::OuterJoin, FillPolicy::Linear).unwrap();
        assert_eq!(out.timestamps().unwrap(), &[60, 120, 180]);
        assert_eq!(out.univariate(0).unwrap().values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn resample_mean_and_identity() {
        let u = uni("a", &[0, 10, 3600, 7200], &[1.0, 3.0, 5.0, 6.0]);
        let r = resample(&u, 3600, Aggregation::Mean).unwrap();
        assert_eq!(r.timestamps(), &[0, 3600, 7200]);
        assert_eq!(r.values(), &[2.0, 5.0, 6.0]);
        assert_eq!(resample(&r, 3600, Aggregation::Mean).unwrap(), r);
        let last = resample(&u, 3600, Aggregation::Last).unwrap();
        assert_eq!(last.values(), &[3.0, 5.0, 6.0]);
        assert!(resample(&u, 0, Aggregation::Mean).is_err());
    }

    #[test]
    fn split_half() {
        let u = UnivariateTimeSeries::from_values("a", 0, 60, (0..10).map(f64::from).collect()).unwrap();
        let (train, test) = split_at(&TimeSeries::from(u), 0.5).unwrap();
        assert_eq!(train.len(), 5);
        assert_eq!(test.len(), 5);
    }

    #[test]
    fn split_degenerate_fails() {
        let u = UnivariateTimeSeries::from_values("a", 0, 60, vec![1.0, 2.0]).unwrap();
        let ts = TimeSeries::from(u);
        assert!(matches!(split_at(&ts, 0.99), Err(Error::Split(_))));
        assert!(split_at(&ts, 1.0).is_err());
    }

    #[test]
    fn label_windows() {
        let l = AnomalyLabelSeries::new(
            vec![0, 1, 2, 3, 4, 5, 6],
            vec![false, true, true, false, true, false, true],
        )
        .unwrap();
        let w = l.windows();
        assert_eq!(w.len(), 3);
        assert_eq!((w[0].start, w[0].end, w[0].len()), (1, 2, 2));
        assert_eq!((w[2].start_index, w[2].end_index), (6, 6));
        let none = AnomalyLabelSeries::new(vec![0, 1], vec![false, false]).unwrap();
        assert!(none.windows().is_empty());
    }

    fn arb_ts() -> impl Strategy<Value = TimeSeries> {
        prop::collection::vec(prop::collection::btree_set(0i64..200, 1..30), 1..4).prop_map(|sets| {
            let us = sets
                .into_iter()
                .enumerate()
                .map(|(i, s)| {
                    let ts: Vec<i64> = s.into_iter().map(|t| t * 10).collect();
                    let vs = ts.iter().map(|&t| (t as f64).sin()).collect();
                    UnivariateTimeSeries::new(format!("u{i}"), ts, vs).unwrap()
                })
                .collect();
            TimeSeries::new(us).unwrap()
        })
    }

    proptest! {
        #[test]
        fn align_is_idempotent(ts in arb_ts(), outer in any::<bool>(), fill in 0usize..3) {
            let join = if outer { JoinPolicy::OuterJoin } else { JoinPolicy::InnerJoin };
            let fill = [FillPolicy::ForwardFill, FillPolicy::Linear, FillPolicy::None][fill];
            if let Ok(a) = align(&ts, join, fill) {
                prop_assert!(a.is_aligned());
                prop_assert_eq!(align(&a, join, fill).unwrap(), a);
            }
        }

        #[test]
        fn resample_is_idempotent(ts in arb_ts(), g in 1i64..500) {
            let u = ts.univariate(0).unwrap();
            let once = resample(u, g, Aggregation::Mean).unwrap();
            prop_assert!(once.timestamps().iter().all(|t| t % g == 0));
            prop_assert_eq!(resample(&once, g, Aggregation::Mean).unwrap(), once);
        }

        #[test]
        fn split_partitions_timestamps(ts in arb_ts(), f in 0.05f64..0.95) {
            if let Ok((train, test)) = split_at(&ts, f) {
                for i in 0..ts.dim() {
                    let (a, b) = (train.univariate(i).unwrap(), test.univariate(i).unwrap());
                    prop_assert!(a.timestamps().last() < b.timestamps().first());
                    let mut joined = a.timestamps().to_vec();
                    joined.extend_from_slice(b.timestamps());
                    prop_assert_eq!(joined.as_slice(), ts.univariate(i).unwrap().timestamps());
                }
            }
        }
    }
}
