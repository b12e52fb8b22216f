//! Automatic model configuration: seasonality detection, differencing order
//! selection and stepwise AIC search, packaged as forecasters that tune
//! themselves on every `train`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{TimeSeries, Timestamp, UnivariateTimeSeries};
use crate::error::{Error, Result};
use crate::forecast::ets::{fit_ets, Ets, EtsParams, EtsSpec, Season, Trend};
use crate::forecast::sarima::{fit_sarima, seasonal_difference, FitOptions, Sarima, SarimaOrders, SarimaParams};
use crate::forecast::{target_of, ForecastResult, Forecaster};
use crate::stats;

/// Default significance level of the seasonality test.
pub const SIGNIFICANCE: f64 = 0.05;
/// Periods tried when the caller gives none.
pub const DEFAULT_PERIODS: [usize; 6] = [4, 7, 12, 24, 52, 168];
/// Seasonal differencing continues while the strength stays at or above this.
pub const STRENGTH_THRESHOLD: f64 = 0.64;
/// 5% critical value of the KPSS level-stationarity statistic.
pub const KPSS_CRITICAL: f64 = 0.463;
pub const MAX_D: usize = 2;
pub const MAX_SEASONAL_D: usize = 1;
/// Shortest series on which another differencing round is tested.
const MIN_TEST_LENGTH: usize = 10;

/// Hyperparameter tuning on top of a base model: propose candidates, score
/// them on the training data, and install the winner.
pub trait Layer {
    type Theta;
    type Model;

    fn generate_theta(&self, u: &UnivariateTimeSeries) -> Result<Vec<Self::Theta>>;

    /// Best candidate with its quality, lower is better.
    fn evaluate_theta(&self, u: &UnivariateTimeSeries, thetas: Vec<Self::Theta>) -> Result<(Self::Theta, f64)>;

    fn set_theta(&self, model: &mut Self::Model, theta: Self::Theta, u: &UnivariateTimeSeries) -> Result<()>;
}

/// Candidate periods: the defaults plus the daily and weekly cycles implied by
/// the sampling step.
pub fn candidate_periods(step: Option<i64>) -> Vec<usize> {
    let mut out: BTreeSet<usize> = DEFAULT_PERIODS.into_iter().collect();
    if let Some(s) = step.filter(|&s| s > 0) {
        for span in [86_400, 604_800] {
            if span % s == 0 && span / s >= 2 {
                out.insert((span / s) as usize);
            }
        }
    }
    out.into_iter().collect()
}

/// Whether lag `m` passes the autocorrelation significance bound.
fn passes(r: &[f64], m: usize, n: usize, z: f64) -> bool {
    let rm = r[m - 1];
    let acc: f64 = r[..m - 1].iter().map(|v| v * v).sum();
    let bound = z * ((1.0 + 2.0 * acc) / n as f64).sqrt();
    let peak = r[m - 2] <= rm && r.get(m).is_none_or(|&next| next <= rm);
    rm > 0.0 && rm.abs() > bound && peak
}

/// The candidate period whose positive autocorrelation peak clears the
/// significance bound by the most, or 1. Periods needing more than a third of
/// the series are skipped.
pub fn detect_seasonality(y: &[f64], a: f64, candidates: &[usize]) -> usize {
    let n = y.len();
    let usable: Vec<usize> = candidates.iter().copied().filter(|&m| m >= 2 && 3 * m <= n).collect();
    let Some(&max_m) = usable.iter().max() else {
        return 1;
    };
    let r = stats::autocorrelations(y, (max_m + 1).min(n - 1));
    let z = stats::normal_quantile(1.0 - a / 2.0);
    usable
        .into_iter()
        .filter(|&m| passes(&r, m, n, z))
        .map(|m| (m, r[m - 1]))
        .fold(None, |best: Option<(usize, f64)>, (m, rm)| match best {
            Some((_, br)) if br >= rm => best,
            _ => Some((m, rm)),
        })
        .map_or(1, |(m, _)| m)
}

/// Centred moving average of length `m` (a 2×m average for even `m`); `None`
/// where the window does not fit.
pub fn moving_average_trend(y: &[f64], m: usize) -> Vec<Option<f64>> {
    let n = y.len();
    let half = m / 2;
    (0..n)
        .map(|t| {
            if t < half || t + half >= n {
                return None;
            }
            Some(if m % 2 == 1 {
                y[t - half..=t + half].iter().sum::<f64>() / m as f64
            } else {
                let inner: f64 = y[t + 1 - half..t + half].iter().sum();
                (0.5 * y[t - half] + inner + 0.5 * y[t + half]) / m as f64
            })
        })
        .collect()
}

/// Classical additive decomposition `y = T + S + R` over the indices where the
/// trend is defined. Returns the seasonal and remainder parts there.
pub fn decompose(y: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    let trend = moving_average_trend(y, m);
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for (t, tr) in trend.iter().enumerate() {
        if let Some(tr) = tr {
            sums[t % m] += y[t] - tr;
            counts[t % m] += 1;
        }
    }
    let mut phase: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let centre = stats::mean(&phase);
    phase.iter_mut().for_each(|v| *v -= centre);
    let (mut s, mut r) = (Vec::new(), Vec::new());
    for (t, tr) in trend.iter().enumerate() {
        if let Some(tr) = tr {
            s.push(phase[t % m]);
            r.push(y[t] - tr - phase[t % m]);
        }
    }
    (s, r)
}

/// `F_S = max(0, 1 - Var(R) / Var(S + R))`; zero for `m = 1` or when `S + R`
/// has no variance.
pub fn seasonal_strength(y: &[f64], m: usize) -> Result<f64> {
    if m <= 1 {
        return Ok(0.0);
    }
    if y.len() < 2 * m {
        return Err(Error::InsufficientHistory {
            needed: 2 * m,
            got: y.len(),
        });
    }
    let (s, r) = decompose(y, m);
    let sr: Vec<f64> = s.iter().zip(&r).map(|(a, b)| a + b).collect();
    let v_sr = stats::population_variance(&sr);
    if v_sr <= 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - stats::population_variance(&r) / v_sr).clamp(0.0, 1.0))
}

/// Bandwidth `floor(4 (n / 100)^(1/4))` of the Bartlett window.
pub fn kpss_lags(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// KPSS statistic for level stationarity.
pub fn kpss_statistic(y: &[f64]) -> f64 {
    let n = y.len();
    let mean = stats::mean(y);
    let e: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let mut partial = 0.0;
    let eta: f64 = e
        .iter()
        .map(|v| {
            partial += v;
            partial * partial
        })
        .sum::<f64>()
        / (n * n) as f64;
    let lags = kpss_lags(n).min(n.saturating_sub(1));
    let mut lrv = e.iter().map(|v| v * v).sum::<f64>() / n as f64;
    for l in 1..=lags {
        let w = 1.0 - l as f64 / (lags + 1) as f64;
        let cov: f64 = (l..n).map(|t| e[t] * e[t - l]).sum::<f64>() / n as f64;
        lrv += 2.0 * w * cov;
    }
    if lrv <= 0.0 {
        return 0.0;
    }
    eta / lrv
}

/// Outcome of seasonality and differencing-order selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalityReport {
    pub m: usize,
    pub significance: f64,
    /// `r_1..=r_m` of the raw series.
    pub autocorrelations: Vec<f64>,
    /// Seasonal strength before each seasonal differencing round, and after
    /// the last one.
    pub strengths: Vec<f64>,
    pub seasonal_d: usize,
    pub d: usize,
    /// KPSS statistics before each regular differencing round and after the last.
    pub kpss: Vec<f64>,
    pub flags: Vec<String>,
}

/// Chooses `(m, D, d)`. `m` is detected unless `fixed_m` is given.
pub fn select_orders(y: &[f64], fixed_m: Option<usize>, candidates: &[usize], a: f64) -> SeasonalityReport {
    let m = fixed_m.unwrap_or_else(|| detect_seasonality(y, a, candidates)).max(1);
    let mut flags = Vec::new();
    let mut strengths = Vec::new();
    let mut current = y.to_vec();
    let mut seasonal_d = 0;
    if m > 1 {
        loop {
            match seasonal_strength(&current, m) {
                Ok(fs) => strengths.push(fs),
                Err(_) => {
                    flags.push(format!("series too short to measure seasonal strength at m = {m}"));
                    break;
                }
            }
            if seasonal_d == MAX_SEASONAL_D || strengths.last().is_none_or(|&fs| fs < STRENGTH_THRESHOLD) {
                break;
            }
            if current.len() < 3 * m + MIN_TEST_LENGTH {
                flags.push("series too short for seasonal differencing".into());
                break;
            }
            current = seasonal_difference(&current, 0, 1, m);
            seasonal_d += 1;
        }
    }
    let mut kpss = Vec::new();
    let mut d = 0;
    loop {
        if current.len() < MIN_TEST_LENGTH {
            flags.push("series too short for a stationarity test".into());
            break;
        }
        let stat = kpss_statistic(&current);
        kpss.push(stat);
        if stat <= KPSS_CRITICAL || d == MAX_D {
            break;
        }
        current = seasonal_difference(&current, 1, 0, 1);
        d += 1;
    }
    let autocorrelations = if m > 1 && y.len() > m {
        stats::autocorrelations(y, m)
    } else {
        Vec::new()
    };
    SeasonalityReport {
        m,
        significance: a,
        autocorrelations,
        strengths,
        seasonal_d,
        d,
        kpss,
        flags,
    }
}

/// Orders searched over by [`stepwise_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderBounds {
    pub max_p: usize,
    pub max_q: usize,
    pub max_seasonal_p: usize,
    pub max_seasonal_q: usize,
}

impl OrderBounds {
    /// Every `(p, q, P, Q, intercept)` tuple within bounds, in a fixed order.
    pub fn grid(&self, m: usize, d: usize, seasonal_d: usize) -> Vec<SarimaOrders> {
        let (sp, sq) = if m > 1 { (self.max_seasonal_p, self.max_seasonal_q) } else { (0, 0) };
        let mut out = Vec::new();
        for p in 0..=self.max_p {
            for q in 0..=self.max_q {
                for sp_ in 0..=sp {
                    for sq_ in 0..=sq {
                        for c in intercept_choices(d, seasonal_d) {
                            out.push(
                                SarimaOrders::arima(p, d, q)
                                    .seasonal(sp_, if m > 1 { seasonal_d } else { 0 }, sq_, m)
                                    .with_intercept(c),
                            );
                        }
                    }
                }
            }
        }
        out
    }

    /// Tightened so that the largest model still leaves data to fit on.
    fn feasible(mut self, n_diffed: usize, m: usize) -> Self {
        let fits = |b: &Self| {
            let start = b.max_p + m * b.max_seasonal_p;
            let k = b.max_p + b.max_q + b.max_seasonal_p + b.max_seasonal_q + 1;
            n_diffed > start + m * b.max_seasonal_q + 2 * k + MIN_TEST_LENGTH
        };
        while !fits(&self) {
            if self.max_seasonal_p > 0 {
                self.max_seasonal_p -= 1;
            } else if self.max_seasonal_q > 0 {
                self.max_seasonal_q -= 1;
            } else if self.max_p > 0 || self.max_q > 0 {
                self.max_p = self.max_p.saturating_sub(1);
                self.max_q = self.max_q.saturating_sub(1);
            } else {
                break;
            }
        }
        self
    }

    /// Index of the differenced series at which every model in bounds starts
    /// summing squared innovations.
    pub fn condition_start(&self, m: usize) -> usize {
        self.max_p + if m > 1 { m * self.max_seasonal_p } else { 0 }
    }
}

/// An intercept is only estimated when at most one difference is taken.
fn intercept_choices(d: usize, seasonal_d: usize) -> Vec<bool> {
    if d + seasonal_d <= 1 {
        vec![true, false]
    } else {
        vec![false]
    }
}

/// Candidates with an AR or MA root closer to the unit circle are rejected.
pub const MIN_ROOT_MODULUS: f64 = 1.01;

/// One evaluated order tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCandidate {
    pub orders: SarimaOrders,
    pub aic: f64,
    pub converged: bool,
    #[serde(skip)]
    pub params: Option<SarimaParams>,
}

/// Result of a stepwise walk.
#[derive(Debug, Clone)]
pub struct StepwiseResult {
    pub best: ThetaCandidate,
    /// Every candidate fitted, in evaluation order.
    pub evaluated: Vec<ThetaCandidate>,
}

/// Fits `orders` on the common conditioning sample; non-convergence keeps
/// the best iterate and marks it.
fn fit_candidate(y: &[f64], orders: SarimaOrders, opts: &FitOptions) -> Result<ThetaCandidate> {
    let opts = FitOptions {
        allow_unconverged: true,
        ..*opts
    };
    let p = fit_sarima(y, orders, &opts)?;
    if !p.aic.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite AIC for {orders}")));
    }
    if !p.roots_outside(MIN_ROOT_MODULUS) {
        return Err(Error::InvalidInput(format!("{orders} has a root near the unit circle")));
    }
    Ok(ThetaCandidate {
        orders,
        aic: p.aic,
        converged: p.converged,
        params: Some(p),
    })
}

/// Greedy walk over neighbouring orders starting from four standard models.
/// Neighbours change one of `p, q, P, Q` by one, move `p, q` or `P, Q`
/// together by one, or toggle the intercept. Each order tuple is fitted at
/// most once.
pub fn stepwise_search(
    y: &[f64],
    m: usize,
    seasonal_d: usize,
    d: usize,
    bounds: OrderBounds,
    opts: &FitOptions,
) -> Result<StepwiseResult> {
    let seasonal = m > 1;
    let seasonal_d = if seasonal { seasonal_d } else { 0 };
    let sd = if seasonal { 1 } else { 0 };
    let intercepts = intercept_choices(d, seasonal_d);
    let clamp = |p: usize, q: usize, sp: usize, sq: usize| {
        SarimaOrders::arima(p.min(bounds.max_p), d, q.min(bounds.max_q))
            .seasonal(
                (sp * sd).min(bounds.max_seasonal_p),
                seasonal_d,
                (sq * sd).min(bounds.max_seasonal_q),
                m,
            )
            .with_intercept(intercepts[0])
    };
    let starts = [clamp(2, 2, 1, 1), clamp(0, 0, 0, 0), clamp(1, 0, 1, 0), clamp(0, 1, 0, 1)];

    let mut visited: BTreeSet<SarimaOrders> = BTreeSet::new();
    let mut evaluated: Vec<ThetaCandidate> = Vec::new();
    let mut best: Option<ThetaCandidate> = None;
    let mut try_fit = |o: SarimaOrders, visited: &mut BTreeSet<SarimaOrders>| -> Option<ThetaCandidate> {
        if !visited.insert(o) {
            return None;
        }
        let c = fit_candidate(y, o, opts).ok()?;
        evaluated.push(c.clone());
        Some(c)
    };
    for o in starts {
        if let Some(c) = try_fit(o, &mut visited) {
            if best.as_ref().is_none_or(|b| c.aic < b.aic) {
                best = Some(c);
            }
        }
    }
    while let Some(current) = best.clone() {
        let o = current.orders;
        let mut neighbours = Vec::new();
        let mut push = |p: isize, q: isize, sp: isize, sq: isize| {
            let np = o.p as isize + p;
            let nq = o.q as isize + q;
            let nsp = o.seasonal_p as isize + sp;
            let nsq = o.seasonal_q as isize + sq;
            if np < 0 || nq < 0 || nsp < 0 || nsq < 0 {
                return;
            }
            let (np, nq, nsp, nsq) = (np as usize, nq as usize, nsp as usize, nsq as usize);
            if np > bounds.max_p || nq > bounds.max_q || nsp > bounds.max_seasonal_p || nsq > bounds.max_seasonal_q {
                return;
            }
            neighbours.push(SarimaOrders { p: np, q: nq, seasonal_p: nsp, seasonal_q: nsq, ..o });
        };
        for delta in [-1, 1] {
            push(delta, 0, 0, 0);
            push(0, delta, 0, 0);
            if seasonal {
                push(0, 0, delta, 0);
                push(0, 0, 0, delta);
            }
        }
        for delta in [-1, 1] {
            push(delta, delta, 0, 0);
            if seasonal {
                push(0, 0, delta, delta);
            }
        }
        if intercepts.len() > 1 {
            neighbours.push(o.with_intercept(!o.intercept));
        }
        let mut moved = false;
        for nb in neighbours {
            if let Some(c) = try_fit(nb, &mut visited) {
                if c.aic < current.aic {
                    best = Some(c);
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            break;
        }
    }
    match best {
        Some(best) => Ok(StepwiseResult { best, evaluated }),
        None => {
            let fallback = SarimaOrders::arima(0, d, 0)
                .seasonal(0, seasonal_d, 0, m)
                .with_intercept(intercepts[0]);
            let best = fit_candidate(y, fallback, opts)?;
            evaluated.push(best.clone());
            Ok(StepwiseResult { best, evaluated })
        }
    }
}

/// Refits the `top_k` candidates with the lowest cheap AIC to convergence and
/// returns the best; converged fits win over unconverged ones.
pub fn approx_refine(y: &[f64], candidates: &[ThetaCandidate], top_k: usize, opts: &FitOptions) -> Result<ThetaCandidate> {
    if top_k == 0 {
        return Err(Error::Spec("top_k must be at least 1".into()));
    }
    let mut ranked: Vec<&ThetaCandidate> = candidates.iter().collect();
    ranked.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    let mut refit: Vec<ThetaCandidate> = ranked
        .iter()
        .take(top_k)
        .filter_map(|c| fit_candidate(y, c.orders, opts).ok())
        .collect();
    if refit.is_empty() {
        // Every leading refit was rejected; take the next one that survives.
        refit.extend(ranked.iter().skip(top_k).find_map(|c| fit_candidate(y, c.orders, opts).ok()));
    }
    refit
        .into_iter()
        .min_by(|a, b| b.converged.cmp(&a.converged).then(a.aic.total_cmp(&b.aic)))
        .ok_or_else(|| Error::InvalidInput("every refit failed".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoSarimaConfig {
    pub max_p: usize,
    pub max_q: usize,
    pub max_seasonal_p: usize,
    pub max_seasonal_q: usize,
    /// Candidate periods; defaults plus frequency-implied ones when unset.
    pub periods: Option<Vec<usize>>,
    /// Skips detection and uses this period.
    pub seasonality: Option<usize>,
    /// Rank candidates with cheap fits, then refit the best `top_k`.
    pub approximate: bool,
    pub top_k: usize,
    pub significance: f64,
}

impl Default for AutoSarimaConfig {
    fn default() -> Self {
        Self {
            max_p: 5,
            max_q: 5,
            max_seasonal_p: 2,
            max_seasonal_q: 2,
            periods: None,
            seasonality: None,
            approximate: true,
            top_k: 5,
            significance: SIGNIFICANCE,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoEtsConfig {
    pub periods: Option<Vec<usize>>,
    pub seasonality: Option<usize>,
}

/// What the last tuning run found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaSearchReport {
    pub seasonality: SeasonalityReport,
    pub bounds_used: [usize; 4],
    /// Candidates visited by the walk, without their parameters.
    pub evaluated: Vec<ThetaCandidate>,
    pub best: ThetaCandidate,
}

/// [`Layer`] choosing SARIMA orders.
#[derive(Debug, Clone)]
pub struct SarimaLayer {
    pub cfg: AutoSarimaConfig,
}

impl SarimaLayer {
    /// Full tuning run on `y`.
    pub fn search(&self, y: &[f64], step: Option<i64>) -> Result<SarimaSearchReport> {
        let periods = self.cfg.periods.clone().unwrap_or_else(|| candidate_periods(step));
        let rep = select_orders(y, self.cfg.seasonality, &periods, self.cfg.significance);
        let m = rep.m;
        let n_diffed = y.len().saturating_sub(rep.d + m * rep.seasonal_d);
        let bounds = OrderBounds {
            max_p: self.cfg.max_p,
            max_q: self.cfg.max_q,
            max_seasonal_p: if m > 1 { self.cfg.max_seasonal_p } else { 0 },
            max_seasonal_q: if m > 1 { self.cfg.max_seasonal_q } else { 0 },
        }
        .feasible(n_diffed, m);
        let start = bounds.condition_start(m);
        let (walk_opts, final_opts) = if self.cfg.approximate {
            (FitOptions::cheap(), FitOptions::full())
        } else {
            (FitOptions::full(), FitOptions::full())
        };
        let walk = stepwise_search(y, m, rep.seasonal_d, rep.d, bounds, &walk_opts.condition_start(start))?;
        let best = if self.cfg.approximate {
            approx_refine(y, &walk.evaluated, self.cfg.top_k, &final_opts.condition_start(start))
                .unwrap_or_else(|_| walk.best.clone())
        } else {
            walk.best.clone()
        };
        let mut evaluated = walk.evaluated;
        evaluated.iter_mut().for_each(|c| c.params = None);
        Ok(SarimaSearchReport {
            seasonality: rep,
            bounds_used: [bounds.max_p, bounds.max_q, bounds.max_seasonal_p, bounds.max_seasonal_q],
            evaluated,
            best,
        })
    }
}

impl Layer for SarimaLayer {
    type Theta = ThetaCandidate;
    type Model = Sarima;

    fn generate_theta(&self, u: &UnivariateTimeSeries) -> Result<Vec<ThetaCandidate>> {
        let mut rep = self.search(u.values(), u.median_step())?;
        rep.evaluated.push(rep.best);
        Ok(rep.evaluated)
    }

    fn evaluate_theta(&self, _: &UnivariateTimeSeries, thetas: Vec<ThetaCandidate>) -> Result<(ThetaCandidate, f64)> {
        thetas
            .into_iter()
            .filter(|c| c.params.is_some())
            .min_by(|a, b| a.aic.total_cmp(&b.aic))
            .map(|c| {
                let aic = c.aic;
                (c, aic)
            })
            .ok_or_else(|| Error::InvalidInput("no fitted candidate".into()))
    }

    fn set_theta(&self, model: &mut Sarima, theta: ThetaCandidate, u: &UnivariateTimeSeries) -> Result<()> {
        let params = theta.params.ok_or(Error::NotTrained)?;
        model.set_fitted(params, u.clone());
        Ok(())
    }
}

/// SARIMA whose orders are chosen on every `train`.
#[derive(Debug, Clone)]
pub struct AutoSarima {
    layer: SarimaLayer,
    model: Sarima,
    report: Option<SarimaSearchReport>,
}

impl AutoSarima {
    pub fn new(cfg: AutoSarimaConfig, target: usize) -> Self {
        Self {
            layer: SarimaLayer { cfg },
            model: Sarima::new(SarimaOrders::arima(0, 0, 0), target),
            report: None,
        }
    }

    pub fn report(&self) -> Option<&SarimaSearchReport> {
        self.report.as_ref()
    }

    pub fn params(&self) -> Option<&SarimaParams> {
        self.model.params()
    }
}

impl Forecaster for AutoSarima {
    fn name(&self) -> String {
        match &self.report {
            Some(r) => format!("auto-sarima{}", r.best.orders),
            None => "auto-sarima".into(),
        }
    }

    fn target_index(&self) -> usize {
        self.model.target_index()
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<()> {
        let u = target_of(ts, self.target_index())?;
        let rep = self.layer.search(u.values(), u.median_step())?;
        self.layer.set_theta(&mut self.model, rep.best.clone(), u)?;
        self.report = Some(rep);
        Ok(())
    }

    fn forecast(&self, timestamps: &[Timestamp], prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        self.model.forecast(timestamps, prev)
    }

    fn min_history(&self) -> usize {
        self.model.min_history()
    }

    fn one_step_ahead(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        self.model.one_step_ahead(ts, prev)
    }
}

/// ETS candidates for period `m`, fewest parameters first.
pub fn ets_candidates(m: usize) -> Vec<EtsSpec> {
    let mut out = vec![EtsSpec::new(Trend::None, Season::None), EtsSpec::new(Trend::Additive, Season::None)];
    if m > 1 {
        out.push(EtsSpec::new(Trend::None, Season::Additive(m)));
        out.push(EtsSpec::new(Trend::Additive, Season::Additive(m)));
    }
    out.sort_by_key(|s| s.n_parameters());
    out
}

/// Lowest-AIC ETS model; ties go to the model with fewer parameters.
pub fn auto_ets(y: &[f64], m: usize) -> Result<EtsParams> {
    let mut best: Option<EtsParams> = None;
    let mut last_err = None;
    for spec in ets_candidates(m) {
        match fit_ets(y, spec) {
            Ok(p) => {
                if best.as_ref().is_none_or(|b| p.aic < b.aic) {
                    best = Some(p);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::NotTrained))
}

/// [`Layer`] choosing the ETS specification.
#[derive(Debug, Clone)]
pub struct EtsLayer {
    pub cfg: AutoEtsConfig,
}

impl EtsLayer {
    pub fn period(&self, u: &UnivariateTimeSeries) -> usize {
        self.cfg.seasonality.unwrap_or_else(|| {
            let periods = self.cfg.periods.clone().unwrap_or_else(|| candidate_periods(u.median_step()));
            detect_seasonality(u.values(), SIGNIFICANCE, &periods)
        })
    }
}

impl Layer for EtsLayer {
    type Theta = EtsSpec;
    type Model = Ets;

    fn generate_theta(&self, u: &UnivariateTimeSeries) -> Result<Vec<EtsSpec>> {
        Ok(ets_candidates(self.period(u)))
    }

    fn evaluate_theta(&self, u: &UnivariateTimeSeries, thetas: Vec<EtsSpec>) -> Result<(EtsSpec, f64)> {
        let mut best: Option<(EtsSpec, f64, usize)> = None;
        let mut last_err = None;
        for spec in thetas {
            match fit_ets(u.values(), spec) {
                Ok(p) => {
                    let better = best
                        .as_ref()
                        .is_none_or(|&(_, aic, k)| p.aic < aic || (p.aic == aic && spec.n_parameters() < k));
                    if better {
                        best = Some((spec, p.aic, spec.n_parameters()));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        best.map(|(s, a, _)| (s, a)).ok_or_else(|| last_err.unwrap_or(Error::NotTrained))
    }

    fn set_theta(&self, model: &mut Ets, theta: EtsSpec, u: &UnivariateTimeSeries) -> Result<()> {
        let params = fit_ets(u.values(), theta)?;
        model.set_fitted(params, u);
        Ok(())
    }
}

/// ETS whose trend and season are chosen on every `train`.
#[derive(Debug, Clone)]
pub struct AutoEts {
    layer: EtsLayer,
    model: Ets,
    chosen: Option<(EtsSpec, usize)>,
}

impl AutoEts {
    pub fn new(cfg: AutoEtsConfig, target: usize) -> Self {
        Self {
            layer: EtsLayer { cfg },
            model: Ets::new(EtsSpec::default(), target),
            chosen: None,
        }
    }

    /// Chosen specification and the detected period.
    pub fn chosen(&self) -> Option<(EtsSpec, usize)> {
        self.chosen
    }

    pub fn params(&self) -> Option<&EtsParams> {
        self.model.params()
    }
}

impl Forecaster for AutoEts {
    fn name(&self) -> String {
        match self.chosen {
            Some((s, _)) => format!("auto-{s}"),
            None => "auto-ets".into(),
        }
    }

    fn target_index(&self) -> usize {
        self.model.target_index()
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<()> {
        let u = target_of(ts, self.target_index())?;
        let m = self.layer.period(u);
        let thetas = ets_candidates(m);
        let (spec, _) = self.layer.evaluate_theta(u, thetas)?;
        self.layer.set_theta(&mut self.model, spec, u)?;
        self.chosen = Some((spec, m));
        Ok(())
    }

    fn forecast(&self, timestamps: &[Timestamp], prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        self.model.forecast(timestamps, prev)
    }

    fn min_history(&self) -> usize {
        self.model.min_history()
    }

    fn one_step_ahead(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        self.model.one_step_ahead(ts, prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn sine(n: usize, m: usize) -> Vec<f64> {
        (0..n).map(|t| (2.0 * std::f64::consts::PI * t as f64 / m as f64).sin()).collect()
    }

    fn ar2(n: usize, seed: u64) -> Vec<f64> {
        let e = noise(n + 100, seed);
        let mut y = vec![0.0; n + 100];
        for t in 2..y.len() {
            y[t] = 0.5 * y[t - 1] - 0.3 * y[t - 2] + e[t];
        }
        y[100..].to_vec()
    }

    #[test]
    fn sine_period_detected() {
        assert_eq!(detect_seasonality(&sine(480, 24), SIGNIFICANCE, &DEFAULT_PERIODS), 24);
        assert_eq!(detect_seasonality(&[3.0; 200], SIGNIFICANCE, &DEFAULT_PERIODS), 1);
    }

    #[test]
    fn detection_is_affine_invariant() {
        for seed in 0..10 {
            let y: Vec<f64> = sine(300, 12).iter().zip(noise(300, seed)).map(|(s, e)| s + 0.5 * e).collect();
            let z: Vec<f64> = y.iter().map(|v| 3.0 * v - 7.0).collect();
            let p = candidate_periods(Some(3600));
            assert_eq!(detect_seasonality(&y, 0.05, &p), detect_seasonality(&z, 0.05, &p));
        }
    }

    #[test]
    fn frequency_implied_periods() {
        let p = candidate_periods(Some(300));
        assert!(p.contains(&288) && p.contains(&2016));
        assert_eq!(candidate_periods(None), DEFAULT_PERIODS.to_vec());
    }

    #[test]
    fn strength_examples() {
        let y: Vec<f64> = (0..96).map(|t| [1.0, 4.0, -2.0, 0.5][t % 4]).collect();
        assert_eq!(seasonal_strength(&y, 4).unwrap(), 1.0);
        assert_eq!(seasonal_strength(&sine(240, 24), 24).unwrap(), 1.0);
        assert_eq!(seasonal_strength(&y, 1).unwrap(), 0.0);
        assert!(seasonal_strength(&y[..7], 4).is_err());
        let low = (0..100).filter(|&s| seasonal_strength(&noise(240, s), 24).unwrap() <= 0.2).count();
        assert!(low >= 95, "{low}");
    }

    #[test]
    fn strength_matches_hand_decomposition() {
        // odd period: plain 3-point moving average
        let y = [1.0, 5.0, 2.0, 2.0, 6.0, 3.0, 3.0, 7.0, 5.0];
        let (s, r) = decompose(&y, 3);
        assert_eq!(s.len(), 7);
        let t: Vec<f64> = (1..8).map(|i| (y[i - 1] + y[i] + y[i + 1]) / 3.0).collect();
        for i in 0..7 {
            assert!((y[i + 1] - t[i] - s[i] - r[i]).abs() < 1e-12);
        }
        let phase_sum: f64 = s[..3].iter().sum();
        assert!(phase_sum.abs() < 1e-12);
    }

    #[test]
    fn kpss_bandwidth_and_decisions() {
        assert_eq!(kpss_lags(100), 4);
        assert_eq!(kpss_lags(500), 5);
        let pass = (0..100).filter(|&s| kpss_statistic(&noise(300, s)) <= KPSS_CRITICAL).count();
        assert!(pass >= 90, "{pass}");
        let mut walks = 0;
        for seed in 0..20 {
            let mut acc = 0.0;
            let w: Vec<f64> = noise(500, seed)
                .into_iter()
                .map(|e| {
                    acc += e;
                    acc
                })
                .collect();
            walks += usize::from(select_orders(&w, Some(1), &[], 0.05).d == 1);
        }
        assert!(walks >= 18, "{walks}");
    }

    #[test]
    fn order_selection_examples() {
        let r = select_orders(&noise(400, 1), None, &DEFAULT_PERIODS, 0.05);
        assert_eq!((r.m, r.seasonal_d, r.d), (1, 0, 0));
        let y: Vec<f64> = sine(480, 24).iter().zip(noise(480, 2)).map(|(s, e)| 5.0 * s + 0.2 * e).collect();
        let r = select_orders(&y, None, &DEFAULT_PERIODS, 0.05);
        assert_eq!((r.m, r.seasonal_d), (24, 1));
        assert!(r.strengths[0] >= STRENGTH_THRESHOLD && r.strengths[1] < STRENGTH_THRESHOLD);
    }

    fn small() -> OrderBounds {
        OrderBounds {
            max_p: 2,
            max_q: 2,
            max_seasonal_p: 0,
            max_seasonal_q: 0,
        }
    }

    #[test]
    fn white_noise_search_picks_mean_model() {
        let y: Vec<f64> = noise(300, 5).iter().map(|v| v + 10.0).collect();
        let opts = FitOptions::full().condition_start(small().condition_start(1));
        let res = stepwise_search(&y, 1, 0, 0, small(), &opts).unwrap();
        assert_eq!(res.best.orders, SarimaOrders::arima(0, 0, 0));
        let unique: BTreeSet<SarimaOrders> = res.evaluated.iter().map(|c| c.orders).collect();
        assert_eq!(unique.len(), res.evaluated.len());
    }

    #[test]
    fn stepwise_matches_exhaustive_on_ar2() {
        let b = OrderBounds {
            max_p: 3,
            max_q: 3,
            max_seasonal_p: 0,
            max_seasonal_q: 0,
        };
        let opts = FitOptions::full().condition_start(b.condition_start(1));
        let mut oracle_p2 = 0;
        for seed in 0..6 {
            let y = ar2(1000, seed);
            let oracle = b
                .grid(1, 0, 0)
                .into_iter()
                .filter_map(|o| fit_candidate(&y, o, &opts).ok())
                .min_by(|a, c| a.aic.total_cmp(&c.aic))
                .unwrap();
            oracle_p2 += usize::from(oracle.orders.p == 2);
            let walk = stepwise_search(&y, 1, 0, 0, b, &FitOptions::cheap().condition_start(b.condition_start(1))).unwrap();
            let best = approx_refine(&y, &walk.evaluated, 5, &opts).unwrap();
            assert!(best.aic <= oracle.aic + 2.0, "seed {seed}: {} vs {}", best.aic, oracle.aic);
            assert!(best.aic >= oracle.aic - 1e-6);
        }
        assert!(oracle_p2 >= 4, "{oracle_p2}");
    }

    #[test]
    fn refit_never_worse_than_cheap() {
        let y = ar2(400, 3);
        let cheap = fit_candidate(&y, SarimaOrders::arima(2, 0, 1), &FitOptions::cheap().condition_start(3)).unwrap();
        let best = approx_refine(&y, std::slice::from_ref(&cheap), 1, &FitOptions::full().condition_start(3)).unwrap();
        assert_eq!(best.orders, cheap.orders);
        assert!(best.aic <= cheap.aic + 1e-9);
        assert!(approx_refine(&y, &[cheap], 0, &FitOptions::full()).is_err());
    }

    #[test]
    fn auto_sarima_trains_and_forecasts() {
        let y: Vec<f64> = sine(240, 12).iter().zip(noise(240, 4)).map(|(s, e)| 3.0 * s + 0.1 * e + 20.0).collect();
        let ts: TimeSeries = UnivariateTimeSeries::from_values("y", 0, 3600, y).unwrap().into();
        let mut m = AutoSarima::new(AutoSarimaConfig::default(), 0);
        m.train(&ts).unwrap();
        let r = m.report().unwrap();
        assert_eq!(r.seasonality.m, 12);
        assert!(r.best.params.is_some());
        let f = m.forecast(&[240 * 3600, 241 * 3600], None).unwrap();
        let want = 3.0 * (2.0 * std::f64::consts::PI * 240.0 / 12.0).sin() + 20.0;
        assert!((f.values[0] - want).abs() < 0.5, "{}", f.values[0]);
    }

    #[test]
    fn auto_ets_choices() {
        assert_eq!(auto_ets(&sine(240, 24), 24).unwrap().spec.season, Season::Additive(24));
        let n = auto_ets(&noise(200, 9).iter().map(|v| v + 5.0).collect::<Vec<_>>(), 1).unwrap();
        assert_eq!(n.spec, EtsSpec::new(Trend::None, Season::None));
        let ramp: Vec<f64> = (0..100).map(|t| 2.0 * t as f64 + 0.01 * ((t * 7) % 3) as f64).collect();
        assert_eq!(auto_ets(&ramp, 1).unwrap().spec, EtsSpec::new(Trend::Additive, Season::None));
    }

    #[test]
    fn config_defaults_from_json() {
        let c: AutoSarimaConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, AutoSarimaConfig::default());
        assert_eq!((c.max_p, c.max_seasonal_q, c.top_k), (5, 2, 5));
        let e: AutoEtsConfig = serde_json::from_str(r#"{"seasonality":7}"#).unwrap();
        assert_eq!(e.seasonality, Some(7));
    }
}
