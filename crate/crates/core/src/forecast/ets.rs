//! Additive exponential smoothing (ETS with additive error, optional
//! additive trend and optional additive season).
//!
//! Smoothing weights are found with Nelder-Mead. For fixed weights the
//! one-step errors are affine in the initial states, so the states are solved
//! exactly by least squares inside every objective evaluation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{TimeSeries, Timestamp, UnivariateTimeSeries};
use crate::error::{Error, Result};
use crate::forecast::sarima::{css_aic, one_step_from};
use crate::forecast::{target_of, ForecastResult, Forecaster};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::stats;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    #[default]
    None,
    Additive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    #[default]
    None,
    Additive(usize),
}

impl Season {
    pub fn period(&self) -> usize {
        match self {
            Season::None => 1,
            Season::Additive(m) => *m,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EtsSpec {
    #[serde(default)]
    pub trend: Trend,
    #[serde(default)]
    pub season: Season,
}

impl EtsSpec {
    pub fn new(trend: Trend, season: Season) -> Self {
        Self { trend, season }
    }

    fn has_trend(&self) -> bool {
        self.trend == Trend::Additive
    }

    fn m(&self) -> usize {
        self.season.period()
    }

    fn seasonal(&self) -> bool {
        matches!(self.season, Season::Additive(m) if m > 1)
    }

    /// Smoothing weights plus free initial states.
    pub fn n_parameters(&self) -> usize {
        let smoothing = 1 + usize::from(self.has_trend()) + usize::from(self.seasonal());
        smoothing + self.n_states()
    }

    fn n_states(&self) -> usize {
        1 + usize::from(self.has_trend()) + if self.seasonal() { self.m() - 1 } else { 0 }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if let Season::Additive(m) = self.season {
            if m == 0 {
                return Err(Error::Spec("season period must be positive".into()));
            }
            if m >= n {
                return Err(Error::Spec(format!("season period {m} not shorter than series length {n}")));
            }
        }
        if n < self.n_parameters() + 2 {
            return Err(Error::InsufficientHistory {
                needed: self.n_parameters() + 2,
                got: n,
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for EtsSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t = if self.has_trend() { "A" } else { "N" };
        match self.season {
            Season::Additive(m) if m > 1 => write!(f, "ets(A,{t},A{m})"),
            _ => write!(f, "ets(A,{t},N)"),
        }
    }
}

/// Level, trend and a seasonal ring indexed by `t mod m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsState {
    pub level: f64,
    pub trend: f64,
    pub season: Vec<f64>,
}

/// Fitted smoothing weights and initial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsParams {
    pub spec: EtsSpec,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub initial: EtsState,
    pub sigma2: f64,
    pub sse: f64,
    pub n: usize,
    pub aic: f64,
}

/// Seasonal periods above this use a fixed moving-average initialisation of
/// the seasonal states; only level and trend are solved exactly.
pub const MAX_PROFILED_SEASON: usize = 24;

#[derive(Clone, Copy)]
struct Weights {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

/// Runs the filter from `state` (index `t0` is the first time index), writing
/// one-step predictions into `preds` when given. Returns the SSE.
fn run_filter(y: &[f64], w: Weights, state: &mut EtsState, t0: usize, mut preds: Option<&mut Vec<f64>>) -> f64 {
    let m = state.season.len();
    let mut sse = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let slot = (t0 + i) % m;
        let pred = state.level + state.trend + state.season[slot];
        let e = v - pred;
        if let Some(p) = preds.as_deref_mut() {
            p.push(pred);
        }
        state.level += state.trend + w.alpha * e;
        state.trend += w.beta * e;
        state.season[slot] += w.gamma * e;
        sse += e * e;
    }
    sse
}

fn residuals(y: &[f64], w: Weights, mut state: EtsState) -> Vec<f64> {
    let mut preds = Vec::with_capacity(y.len());
    run_filter(y, w, &mut state, 0, Some(&mut preds));
    y.iter().zip(preds).map(|(v, p)| v - p).collect()
}

/// Seasonal states from per-phase means of detrended complete periods.
fn heuristic_season(y: &[f64], m: usize) -> Vec<f64> {
    let periods = (y.len() / m).clamp(1, 4);
    let mut s = vec![0.0; m];
    for p in 0..periods {
        let chunk = &y[p * m..(p + 1) * m];
        let mu = stats::mean(chunk);
        for (j, v) in chunk.iter().enumerate() {
            s[j] += (v - mu) / periods as f64;
        }
    }
    let mu = stats::mean(&s);
    s.iter().map(|v| v - mu).collect()
}

struct Profiler<'a> {
    spec: EtsSpec,
    y: &'a [f64],
    base_season: Vec<f64>,
    profile_season: bool,
}

impl<'a> Profiler<'a> {
    fn new(spec: EtsSpec, y: &'a [f64]) -> Self {
        let m = spec.m();
        let profile_season = spec.seasonal() && m <= MAX_PROFILED_SEASON;
        let base_season = if spec.seasonal() && !profile_season {
            heuristic_season(y, m)
        } else {
            vec![0.0; m]
        };
        Self {
            spec,
            y,
            base_season,
            profile_season,
        }
    }

    fn n_free(&self) -> usize {
        1 + usize::from(self.spec.has_trend()) + if self.profile_season { self.spec.m() - 1 } else { 0 }
    }

    fn state_from(&self, theta: &[f64]) -> EtsState {
        let mut season = self.base_season.clone();
        let mut i = 1;
        let trend = if self.spec.has_trend() {
            i = 2;
            theta[1]
        } else {
            0.0
        };
        if self.profile_season {
            let m = self.spec.m();
            let free = &theta[i..i + m - 1];
            season[..m - 1].copy_from_slice(free);
            season[m - 1] = -free.iter().sum::<f64>();
        }
        EtsState {
            level: theta[0],
            trend,
            season,
        }
    }

    /// Initial states minimising the SSE for the given weights.
    fn solve(&self, w: Weights) -> (EtsState, f64) {
        let k = self.n_free();
        let zero = vec![0.0; k];
        let e0 = residuals(self.y, w, self.state_from(&zero));
        let n = self.y.len();
        let mut c = DMatrix::zeros(n, k);
        let mut unit = zero.clone();
        for j in 0..k {
            unit[j] = 1.0;
            let ej = residuals(self.y, w, self.state_from(&unit));
            unit[j] = 0.0;
            for t in 0..n {
                c[(t, j)] = ej[t] - e0[t];
            }
        }
        let rhs = DMatrix::from_iterator(n, 1, e0.iter().map(|v| -v));
        let (theta, _) = stats::least_squares(&c, &rhs);
        let theta: Vec<f64> = theta.iter().copied().collect();
        let state = self.state_from(&theta);
        let sse = residuals(self.y, w, state.clone()).iter().map(|v| v * v).sum();
        (state, sse)
    }
}

fn logistic(x: f64) -> f64 {
    (1.0 / (1.0 + (-x).exp())).clamp(1e-4, 1.0 - 1e-4)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Fits smoothing weights and initial states by minimising the one-step SSE.
pub fn fit_ets(y: &[f64], spec: EtsSpec) -> Result<EtsParams> {
    spec.validate(y.len())?;
    let profiler = Profiler::new(spec, y);
    let has_b = spec.has_trend();
    let has_g = spec.seasonal();
    let weights = |x: &[f64]| Weights {
        alpha: logistic(x[0]),
        beta: if has_b { logistic(x[1]) } else { 0.0 },
        gamma: if has_g { logistic(x[1 + usize::from(has_b)]) } else { 0.0 },
    };
    let objective = |x: &[f64]| profiler.solve(weights(x)).1;

    let mut best: Option<(Vec<f64>, f64)> = None;
    for &a in &[0.1, 0.3, 0.5, 0.8] {
        for &b in if has_b { &[0.01, 0.1][..] } else { &[0.0][..] } {
            for &g in if has_g { &[0.01, 0.1][..] } else { &[0.0][..] } {
                let mut x = vec![logit(a)];
                if has_b {
                    x.push(logit(b));
                }
                if has_g {
                    x.push(logit(g));
                }
                let f = objective(&x);
                if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                    best = Some((x, f));
                }
            }
        }
    }
    let (x0, _) = best.expect("grid is never empty");
    let opts = NelderMeadOptions {
        max_iter: 300,
        f_tol: 1e-10,
        x_tol: 1e-6,
        initial_step: 0.5,
    };
    let min = nelder_mead(objective, &x0, opts);
    let w = weights(&min.x);
    let (initial, sse) = profiler.solve(w);
    let n = y.len();
    Ok(EtsParams {
        spec,
        alpha: w.alpha,
        beta: has_b.then_some(w.beta),
        gamma: has_g.then_some(w.gamma),
        initial,
        sigma2: sse / n as f64,
        sse,
        n,
        aic: css_aic(sse, n, spec.n_parameters()),
    })
}

impl EtsParams {
    fn weights(&self) -> Weights {
        Weights {
            alpha: self.alpha,
            beta: self.beta.unwrap_or(0.0),
            gamma: self.gamma.unwrap_or(0.0),
        }
    }

    /// Filters `y` from `state` starting at time index `t0`; returns one-step
    /// predictions and leaves `state` at the end of `y`.
    pub fn filter(&self, y: &[f64], state: &mut EtsState, t0: usize) -> Vec<f64> {
        let mut preds = Vec::with_capacity(y.len());
        run_filter(y, self.weights(), state, t0, Some(&mut preds));
        preds
    }

    /// Initial states re-solved for a new history with the fitted weights.
    pub fn initial_for(&self, y: &[f64]) -> Result<EtsState> {
        self.spec.validate(y.len())?;
        Ok(Profiler::new(self.spec, y).solve(self.weights()).0)
    }

    /// `h`-step forecasts from the state at time index `t`.
    pub fn extrapolate(&self, state: &EtsState, t: usize, horizon: usize) -> Vec<f64> {
        let m = state.season.len();
        (1..=horizon)
            .map(|h| state.level + h as f64 * state.trend + state.season[(t + h - 1) % m])
            .collect()
    }
}

/// ETS forecaster with a fixed specification.
#[derive(Debug, Clone)]
pub struct Ets {
    spec: EtsSpec,
    target: usize,
    fitted: Option<Fitted>,
}

#[derive(Debug, Clone)]
struct Fitted {
    params: EtsParams,
    train_start: Timestamp,
    train_values: Vec<f64>,
    final_state: EtsState,
}

impl Ets {
    pub fn new(spec: EtsSpec, target: usize) -> Self {
        Self {
            spec,
            target,
            fitted: None,
        }
    }

    pub fn params(&self) -> Option<&EtsParams> {
        self.fitted.as_ref().map(|f| &f.params)
    }

    pub(crate) fn set_fitted(&mut self, params: EtsParams, u: &UnivariateTimeSeries) {
        let mut state = params.initial.clone();
        params.filter(u.values(), &mut state, 0);
        self.spec = params.spec;
        self.fitted = Some(Fitted {
            params,
            train_start: u.timestamps()[0],
            train_values: u.values().to_vec(),
            final_state: state,
        });
    }

    /// Predictions for every point of `y` plus the state after it. Histories
    /// extending the training data continue from the stored state.
    fn run(&self, y: &[f64], start: Option<Timestamp>) -> Result<(Vec<f64>, EtsState)> {
        let f = self.fitted.as_ref().ok_or(Error::NotTrained)?;
        let n_train = f.train_values.len();
        let extends = start == Some(f.train_start) && y.len() >= n_train && y[..n_train] == f.train_values[..];
        if extends {
            let mut preds = {
                let mut s = f.params.initial.clone();
                f.params.filter(&y[..n_train], &mut s, 0)
            };
            let mut state = f.final_state.clone();
            preds.extend(f.params.filter(&y[n_train..], &mut state, n_train));
            return Ok((preds, state));
        }
        let mut state = f.params.initial_for(y)?;
        let preds = f.params.filter(y, &mut state, 0);
        Ok((preds, state))
    }
}

impl Forecaster for Ets {
    fn name(&self) -> String {
        self.spec.to_string()
    }

    fn target_index(&self) -> usize {
        self.target
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<()> {
        let u = target_of(ts, self.target)?;
        let params = fit_ets(u.values(), self.spec)?;
        self.set_fitted(params, u);
        Ok(())
    }

    fn forecast(&self, timestamps: &[Timestamp], prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        let f = self.fitted.as_ref().ok_or(Error::NotTrained)?;
        let (state, t) = match prev {
            None => (f.final_state.clone(), f.train_values.len()),
            Some(p) => {
                let u = target_of(p, self.target)?;
                let (_, state) = self.extended_state(u)?;
                (state, u.len())
            }
        };
        let values = f.params.extrapolate(&state, t, timestamps.len());
        let se = vec![f.params.sigma2.sqrt(); values.len()];
        ForecastResult::new(timestamps.to_vec(), values, Some(se))
    }

    fn min_history(&self) -> usize {
        self.spec.n_parameters() + 2
    }

    fn one_step_ahead(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        let f = self.fitted.as_ref().ok_or(Error::NotTrained)?;
        let u = target_of(ts, self.target)?;
        let p = prev.map(|p| target_of(p, self.target)).transpose()?;
        let start = p.unwrap_or(u).timestamps().first().copied();
        let full: Vec<f64> = p.map_or(&[][..], |p| p.values()).iter().chain(u.values()).copied().collect();
        let (preds, _) = self.run(&full, start)?;
        one_step_from(u, p, f.params.sigma2.sqrt(), |h| preds[..h.len()].iter().map(|v| Some(*v)).collect())
    }
}

impl Ets {
    fn extended_state(&self, u: &UnivariateTimeSeries) -> Result<(Vec<f64>, EtsState)> {
        self.run(u.values(), u.timestamps().first().copied())
    }
}
