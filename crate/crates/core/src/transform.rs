//! Invertible pre-processing pipelines.
//!
//! A [`TransformChain`] fits each element on the output of its predecessor.
//! Normalisation and differencing are exactly invertible; moving averages and
//! resampling are not.

use serde::{Deserialize, Serialize};

use crate::data::{resample, Aggregation, TimeSeries, Timestamp, UnivariateTimeSeries};
use crate::error::{Error, Result};
use crate::stats;

/// The kind of a transform together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum TransformKind {
    /// `(x - mean) / std`, with `std := 1` for constant input.
    Normalize,
    /// Repeated first differences of the given order.
    Difference { order: usize },
    /// Trailing moving average; the first points average whatever is available.
    MovingAverage { window: usize },
    /// Mean-aggregated resampling onto a grid of `granularity` seconds.
    Resample { granularity: i64 },
}

impl TransformKind {
    pub fn is_invertible(&self) -> bool {
        matches!(self, TransformKind::Normalize | TransformKind::Difference { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    Normalize {
        mean: f64,
        std: f64,
        /// Set when the training data had zero spread and `std` was forced to 1.
        degenerate: bool,
    },
    /// First `order` original points, kept to rebuild the series.
    Difference { heads: Vec<(Timestamp, f64)> },
    Stateless,
}

/// A transform plus the per-univariate state learned by [`Transform::fit_apply`].
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    kind: TransformKind,
    state: Option<Vec<State>>,
}

impl Transform {
    pub fn new(kind: TransformKind) -> Self {
        Self { kind, state: None }
    }

    pub fn kind(&self) -> &TransformKind {
        &self.kind
    }

    pub fn is_fitted(&self) -> bool {
        self.state.is_some()
    }

    /// Whether normalisation hit a constant univariate (and used `std = 1`).
    pub fn degenerate_scale(&self) -> bool {
        self.state.iter().flatten().any(|s| matches!(s, State::Normalize { degenerate: true, .. }))
    }

    pub fn fit_apply(&mut self, ts: &TimeSeries) -> Result<TimeSeries> {
        let states = ts
            .univariates()
            .iter()
            .map(|u| self.fit_one(u))
            .collect::<Result<Vec<_>>>()?;
        self.state = Some(states);
        self.apply(ts)
    }

    fn fit_one(&self, u: &UnivariateTimeSeries) -> Result<State> {
        if u.is_empty() {
            return Err(Error::InvalidSeries(format!("{} is empty", u.name())));
        }
        Ok(match &self.kind {
            TransformKind::Normalize => {
                let mean = stats::mean(u.values());
                let std = stats::std_dev(u.values());
                let degenerate = !(std > 0.0);
                State::Normalize {
                    mean,
                    std: if degenerate { 1.0 } else { std },
                    degenerate,
                }
            }
            TransformKind::Difference { order } => {
                if u.len() <= *order {
                    return Err(Error::InvalidSeries(format!(
                        "{}: {} points cannot be differenced {order} times",
                        u.name(),
                        u.len()
                    )));
                }
                State::Difference {
                    heads: u.points().take(*order).collect(),
                }
            }
            TransformKind::MovingAverage { window } if *window == 0 => {
                return Err(Error::Spec("moving average window must be positive".into()))
            }
            TransformKind::Resample { granularity } if *granularity <= 0 => {
                return Err(Error::Spec("resample granularity must be positive".into()))
            }
            _ => State::Stateless,
        })
    }

    /// Applies the fitted transform without refitting.
    pub fn apply(&self, ts: &TimeSeries) -> Result<TimeSeries> {
        let states = self.state.as_ref().ok_or(Error::NotFitted)?;
        if states.len() != ts.dim() {
            return Err(Error::InvalidInput(format!(
                "transform fitted on {} univariates, got {}",
                states.len(),
                ts.dim()
            )));
        }
        ts.map_univariates(|i, u| self.apply_one(&states[i], u))
    }

    fn apply_one(&self, state: &State, u: &UnivariateTimeSeries) -> Result<UnivariateTimeSeries> {
        match (&self.kind, state) {
            (TransformKind::Normalize, State::Normalize { mean, std, .. }) => {
                let values = u.values().iter().map(|v| (v - mean) / std).collect();
                UnivariateTimeSeries::new(u.name(), u.timestamps().to_vec(), values)
            }
            (TransformKind::Difference { order }, _) => {
                if u.len() <= *order {
                    return Err(Error::InvalidSeries(format!("{}: too short to difference", u.name())));
                }
                let values = difference(u.values(), *order);
                UnivariateTimeSeries::new(u.name(), u.timestamps()[*order..].to_vec(), values)
            }
            (TransformKind::MovingAverage { window }, _) => {
                let v = u.values();
                let mut sum = 0.0;
                let values = (0..v.len())
                    .map(|i| {
                        sum += v[i];
                        if i >= *window {
                            sum -= v[i - window];
                        }
                        sum / (i + 1).min(*window) as f64
                    })
                    .collect();
                UnivariateTimeSeries::new(u.name(), u.timestamps().to_vec(), values)
            }
            (TransformKind::Resample { granularity }, _) => resample(u, *granularity, Aggregation::Mean),
            _ => Err(Error::NotFitted),
        }
    }

    /// Inverts data produced by [`Transform::fit_apply`] on the fitted series.
    pub fn invert(&self, ts: &TimeSeries) -> Result<TimeSeries> {
        let states = self.state.as_ref().ok_or(Error::NotFitted)?;
        if !self.kind.is_invertible() {
            return Err(Error::NotInvertible(format!("{:?}", self.kind)));
        }
        ts.map_univariates(|i, u| match &states[i] {
            State::Normalize { mean, std, .. } => {
                let values = u.values().iter().map(|v| v * std + mean).collect();
                UnivariateTimeSeries::new(u.name(), u.timestamps().to_vec(), values)
            }
            State::Difference { heads } => {
                let head_values: Vec<f64> = heads.iter().map(|h| h.1).collect();
                let values = undifference(&head_values, u.values());
                let mut timestamps: Vec<Timestamp> = heads.iter().map(|h| h.0).collect();
                timestamps.extend_from_slice(u.timestamps());
                UnivariateTimeSeries::new(u.name(), timestamps, values)
            }
            State::Stateless => Err(Error::NotInvertible(format!("{:?}", self.kind))),
        })
    }

    /// Inverts a continuation (e.g. a forecast) of univariate `index`, given
    /// the untransformed history it continues.
    pub fn invert_continuation(&self, index: usize, values: &[f64], history: &[f64]) -> Result<Vec<f64>> {
        let states = self.state.as_ref().ok_or(Error::NotFitted)?;
        match states.get(index) {
            Some(State::Normalize { mean, std, .. }) => Ok(values.iter().map(|v| v * std + mean).collect()),
            Some(State::Difference { heads }) => {
                let order = heads.len();
                if history.len() < order {
                    return Err(Error::InsufficientHistory {
                        needed: order,
                        got: history.len(),
                    });
                }
                // Last value of each differencing level, from level 0 upwards.
                let mut level = history.to_vec();
                let mut tails = Vec::with_capacity(order);
                for _ in 0..order {
                    tails.push(*level.last().expect("non-empty level"));
                    level = difference(&level, 1);
                }
                let mut out = values.to_vec();
                for tail in tails.into_iter().rev() {
                    let mut acc = tail;
                    for v in out.iter_mut() {
                        acc += *v;
                        *v = acc;
                    }
                }
                Ok(out)
            }
            Some(State::Stateless) => Err(Error::NotInvertible(format!("{:?}", self.kind))),
            None => Err(Error::InvalidInput(format!("no univariate {index}"))),
        }
    }

    /// Maps forecast standard errors through the inverse. Differencing treats
    /// step errors as independent, so they accumulate in quadrature.
    pub fn invert_stderr(&self, index: usize, se: &[f64]) -> Result<Vec<f64>> {
        let states = self.state.as_ref().ok_or(Error::NotFitted)?;
        match states.get(index) {
            Some(State::Normalize { std, .. }) => Ok(se.iter().map(|s| s * std).collect()),
            Some(State::Difference { heads }) => {
                let mut out = se.to_vec();
                for _ in 0..heads.len() {
                    let mut acc = 0.0;
                    for s in out.iter_mut() {
                        acc += *s * *s;
                        *s = acc.sqrt();
                    }
                }
                Ok(out)
            }
            _ => Err(Error::NotInvertible(format!("{:?}", self.kind))),
        }
    }
}

/// Applies first differences `order` times.
pub fn difference(values: &[f64], order: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    for _ in 0..order {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

/// Inverse of [`difference`] given the first `order` original values.
fn undifference(heads: &[f64], diffs: &[f64]) -> Vec<f64> {
    let order = heads.len();
    // First value of each differencing level j = 0..order-1.
    let mut firsts = Vec::with_capacity(order);
    let mut level = heads.to_vec();
    for _ in 0..order {
        firsts.push(level[0]);
        level = difference(&level, 1);
    }
    let mut cur = diffs.to_vec();
    for j in (0..order).rev() {
        let mut next = Vec::with_capacity(cur.len() + 1);
        let mut acc = firsts[j];
        next.push(acc);
        for v in &cur {
            acc += v;
            next.push(acc);
        }
        cur = next;
    }
    cur
}

/// An ordered list of transforms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransformChain {
    transforms: Vec<Transform>,
}

impl TransformChain {
    pub fn new(kinds: impl IntoIterator<Item = TransformKind>) -> Self {
        Self {
            transforms: kinds.into_iter().map(Transform::new).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn kinds(&self) -> Vec<TransformKind> {
        self.transforms.iter().map(|t| t.kind.clone()).collect()
    }

    pub fn is_invertible(&self) -> bool {
        self.transforms.iter().all(|t| t.kind.is_invertible())
    }

    pub fn is_fitted(&self) -> bool {
        self.transforms.iter().all(Transform::is_fitted)
    }

    /// Fits each transform on its predecessor's output and returns the result.
    pub fn fit_apply(&mut self, ts: &TimeSeries) -> Result<TimeSeries> {
        if ts.is_empty() {
            return Err(Error::InvalidSeries("cannot fit transforms on an empty series".into()));
        }
        let mut cur = ts.clone();
        for t in &mut self.transforms {
            cur = t.fit_apply(&cur)?;
        }
        Ok(cur)
    }

    pub fn apply(&self, ts: &TimeSeries) -> Result<TimeSeries> {
        let mut cur = ts.clone();
        for t in &self.transforms {
            cur = t.apply(&cur)?;
        }
        Ok(cur)
    }

    /// Applies inverses in reverse fit order.
    pub fn invert(&self, ts: &TimeSeries) -> Result<TimeSeries> {
        self.check_invertible()?;
        let mut cur = ts.clone();
        for t in self.transforms.iter().rev() {
            cur = t.invert(&cur)?;
        }
        Ok(cur)
    }

    /// Inverts a continuation of univariate `index` whose untransformed
    /// history is `history`.
    pub fn invert_continuation(&self, index: usize, values: &[f64], history: &UnivariateTimeSeries) -> Result<Vec<f64>> {
        self.check_invertible()?;
        let stages = self.stage_histories(index, history)?;
        let mut cur = values.to_vec();
        for (t, h) in self.transforms.iter().zip(&stages).rev() {
            cur = t.invert_continuation(index, &cur, h)?;
        }
        Ok(cur)
    }

    pub fn invert_stderr(&self, index: usize, se: &[f64]) -> Result<Vec<f64>> {
        self.check_invertible()?;
        let mut cur = se.to_vec();
        for t in self.transforms.iter().rev() {
            cur = t.invert_stderr(index, &cur)?;
        }
        Ok(cur)
    }

    // Input of each stage for a single univariate.
    fn stage_histories(&self, index: usize, history: &UnivariateTimeSeries) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.transforms.len());
        let mut cur = history.clone();
        for t in &self.transforms {
            out.push(cur.values().to_vec());
            let state = t
                .state
                .as_ref()
                .ok_or(Error::NotFitted)?
                .get(index)
                .ok_or_else(|| Error::InvalidInput(format!("no univariate {index}")))?;
            cur = t.apply_one(state, &cur)?;
        }
        Ok(out)
    }

    fn check_invertible(&self) -> Result<()> {
        if !self.is_fitted() {
            return Err(Error::NotFitted);
        }
        match self.transforms.iter().find(|t| !t.kind.is_invertible()) {
            Some(t) => Err(Error::NotInvertible(format!("{:?}", t.kind))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(values: &[f64]) -> TimeSeries {
        UnivariateTimeSeries::from_values("x", 0, 60, values.to_vec()).unwrap().into()
    }

    fn vals(ts: &TimeSeries) -> Vec<f64> {
        ts.univariate(0).unwrap().values().to_vec()
    }

    #[test]
    fn empty_chain_is_identity() {
        let ts = series(&[1.0, 2.0]);
        let mut chain = TransformChain::default();
        assert_eq!(chain.fit_apply(&ts).unwrap(), ts);
        assert_eq!(chain.invert(&ts).unwrap(), ts);
    }

    #[test]
    fn normalize_hand_values() {
        let mut chain = TransformChain::new([TransformKind::Normalize]);
        let out = chain.fit_apply(&series(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(vals(&out), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn normalize_constant_uses_unit_scale() {
        let mut chain = TransformChain::new([TransformKind::Normalize]);
        let ts = series(&[4.0, 4.0, 4.0]);
        let out = chain.fit_apply(&ts).unwrap();
        assert_eq!(vals(&out), vec![0.0; 3]);
        assert!(chain.transforms()[0].degenerate_scale());
        assert_eq!(chain.invert(&out).unwrap(), ts);
    }

    #[test]
    fn difference_hand_values() {
        let mut chain = TransformChain::new([TransformKind::Difference { order: 1 }]);
        let out = chain.fit_apply(&series(&[5.0, 7.0, 4.0])).unwrap();
        assert_eq!(vals(&out), vec![2.0, -3.0]);
        assert_eq!(out.univariate(0).unwrap().timestamps(), &[60, 120]);
        assert_eq!(vals(&chain.invert(&out).unwrap()), vec![5.0, 7.0, 4.0]);
    }

    #[test]
    fn normalize_then_difference_by_hand() {
        // x = [1, 3, 2, 6]: mean 3, sample std sqrt(14/3).
        let x = [1.0, 3.0, 2.0, 6.0];
        let s = (14.0f64 / 3.0).sqrt();
        let z: Vec<f64> = x.iter().map(|v| (v - 3.0) / s).collect();
        let expected_diff = [z[1] - z[0], z[2] - z[1], z[3] - z[2]];
        let mut chain = TransformChain::new([TransformKind::Normalize, TransformKind::Difference { order: 1 }]);
        let out = chain.fit_apply(&series(&x)).unwrap();
        for (a, b) in vals(&out).iter().zip(expected_diff) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = vals(&chain.invert(&out).unwrap());
        for (a, b) in back.iter().zip(x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_invertible_chain_errors() {
        let mut chain = TransformChain::new([TransformKind::MovingAverage { window: 2 }]);
        let out = chain.fit_apply(&series(&[1.0, 3.0, 5.0])).unwrap();
        assert_eq!(vals(&out), vec![1.0, 2.0, 4.0]);
        assert!(matches!(chain.invert(&out), Err(Error::NotInvertible(_))));
        let unfitted = TransformChain::new([TransformKind::Normalize]);
        assert!(matches!(unfitted.invert(&out), Err(Error::NotFitted)));
    }

    #[test]
    fn continuation_of_second_difference() {
        // Quadratic history; the second difference is the constant 2.
        let hist: Vec<f64> = (0..6).map(|t| (t * t) as f64).collect();
        let u = UnivariateTimeSeries::from_values("x", 0, 1, hist.clone()).unwrap();
        let mut chain = TransformChain::new([TransformKind::Difference { order: 2 }]);
        chain.fit_apply(&u.clone().into()).unwrap();
        let cont = chain.invert_continuation(0, &[2.0, 2.0], &u).unwrap();
        assert_eq!(cont, vec![36.0, 49.0]);
    }

    #[test]
    fn continuation_through_normalize_and_difference() {
        let hist = [10.0, 12.0, 14.0, 16.0];
        let u = UnivariateTimeSeries::from_values("x", 0, 1, hist.to_vec()).unwrap();
        let mut chain = TransformChain::new([TransformKind::Normalize, TransformKind::Difference { order: 1 }]);
        let out = chain.fit_apply(&u.clone().into()).unwrap();
        let step = vals(&out)[0];
        let cont = chain.invert_continuation(0, &[step, step], &u).unwrap();
        assert!((cont[0] - 18.0).abs() < 1e-12 && (cont[1] - 20.0).abs() < 1e-12);
        let se = chain.invert_stderr(0, &[1.0, 1.0]).unwrap();
        assert!(se[1] > se[0]);
    }

    #[test]
    fn config_json_shape() {
        let kinds = vec![TransformKind::Normalize, TransformKind::Difference { order: 1 }];
        let json = serde_json::to_string(&kinds).unwrap();
        assert_eq!(json, r#"[{"kind":"normalize"},{"kind":"difference","params":{"order":1}}]"#);
        let back: Vec<TransformKind> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, kinds);
    }

    proptest! {
        #[test]
        fn invertible_chains_round_trip(
            values in prop::collection::vec(-1e3f64..1e3, 4..40),
            kinds in prop::collection::vec(0usize..3, 0..4),
        ) {
            let kinds: Vec<TransformKind> = kinds.into_iter().map(|k| match k {
                0 => TransformKind::Normalize,
                o => TransformKind::Difference { order: o },
            }).collect();
            let ts = series(&values);
            let mut chain = TransformChain::new(kinds);
            if let Ok(out) = chain.fit_apply(&ts) {
                let back = chain.invert(&out).unwrap();
                let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for (a, b) in vals(&back).iter().zip(&values) {
                    prop_assert!((a - b).abs() <= 1e-9 * scale);
                }
                prop_assert_eq!(back.univariate(0).unwrap().timestamps(), ts.univariate(0).unwrap().timestamps());
            }
        }
    }
}
