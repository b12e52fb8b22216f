//! Seasonal ARIMA estimated by conditional sum of squares (CSS).
//!
//! The differenced series `w` follows
//! `w_t = c + Σ a_k w_{t-k} + e_t + Σ b_k e_{t-k}`, where `a` and `b` are the
//! expanded products of the non-seasonal and seasonal polynomials.
//! Innovations before the first usable index are taken as zero.

use serde::{Deserialize, Serialize};

use crate::data::{TimeSeries, Timestamp, UnivariateTimeSeries};
use crate::error::{Error, Result};
use crate::forecast::{target_of, ForecastResult, Forecaster};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::stats;

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// Model orders `(p, d, q) × (P, D, Q)_m` plus whether an intercept is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SarimaOrders {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(default)]
    pub seasonal_p: usize,
    #[serde(default)]
    pub seasonal_d: usize,
    #[serde(default)]
    pub seasonal_q: usize,
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default = "yes")]
    pub intercept: bool,
}

impl SarimaOrders {
    pub fn arima(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p: 0,
            seasonal_d: 0,
            seasonal_q: 0,
            m: 1,
            intercept: true,
        }
    }

    pub fn seasonal(self, seasonal_p: usize, seasonal_d: usize, seasonal_q: usize, m: usize) -> Self {
        Self {
            seasonal_p,
            seasonal_d,
            seasonal_q,
            m,
            ..self
        }
    }

    pub fn with_intercept(self, intercept: bool) -> Self {
        Self { intercept, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Spec("seasonality m must be at least 1".into()));
        }
        if self.m == 1 && (self.seasonal_p + self.seasonal_d + self.seasonal_q) > 0 {
            return Err(Error::Spec("seasonal orders require m > 1".into()));
        }
        Ok(())
    }

    /// Largest lag of the expanded autoregressive polynomial.
    pub fn ar_len(&self) -> usize {
        self.p + self.m * self.seasonal_p
    }

    pub fn ma_len(&self) -> usize {
        self.q + self.m * self.seasonal_q
    }

    /// Points consumed by differencing.
    pub fn diff_len(&self) -> usize {
        self.d + self.m * self.seasonal_d
    }

    /// Estimated coefficients, intercept included.
    pub fn n_coefficients(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q + usize::from(self.intercept)
    }

    /// Minimum series length accepted by [`fit_sarima`].
    pub fn min_length(&self) -> usize {
        self.p + self.d + self.q + self.m * (self.seasonal_p + self.seasonal_d + self.seasonal_q) + 2
    }
}

impl std::fmt::Display for SarimaOrders {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)?;
        if self.m > 1 {
            write!(f, "({},{},{})[{}]", self.seasonal_p, self.seasonal_d, self.seasonal_q, self.m)?;
        }
        if self.intercept {
            write!(f, "+c")?;
        }
        Ok(())
    }
}

/// Fitted SARIMA coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaParams {
    pub orders: SarimaOrders,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
    pub intercept: f64,
    /// Innovation variance `SSE / n_eff`.
    pub sigma2: f64,
    pub sse: f64,
    pub n_eff: usize,
    pub aic: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Optimizer settings for [`fit_sarima`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Return the best iterate instead of [`Error::NotConverged`] when the
    /// iteration budget runs out.
    pub allow_unconverged: bool,
    /// Index of the differenced series from which squared innovations are
    /// summed. Sharing it across candidates keeps their AICs on one sample.
    pub condition_start: Option<usize>,
}

impl FitOptions {
    /// Up to 2000 iterations or a relative tolerance of 1e-8.
    pub fn full() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-8,
            allow_unconverged: false,
            condition_start: None,
        }
    }

    /// At most 50 iterations; used to rank candidates cheaply.
    pub fn cheap() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-8,
            allow_unconverged: true,
            condition_start: None,
        }
    }

    pub fn condition_start(self, start: usize) -> Self {
        Self {
            condition_start: Some(start),
            ..self
        }
    }
}

impl Default for FitOptions {
    fn default() -> Self {
        Self::full()
    }
}

/// `AIC = n ln(SSE / n) + 2 (k + 1)`; `k` counts estimated coefficients.
pub fn css_aic(sse: f64, n: usize, k: usize) -> f64 {
    let n_f = n as f64;
    n_f * (sse / n_f).max(1e-300).ln() + 2.0 * (k as f64 + 1.0)
}

/// Applies `d` regular and `seasonal_d` lag-`m` differences.
pub fn seasonal_difference(values: &[f64], d: usize, seasonal_d: usize, m: usize) -> Vec<f64> {
    let mut out = values.to_vec();
    for _ in 0..seasonal_d {
        out = (m..out.len()).map(|t| out[t] - out[t - m]).collect();
    }
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `1 - Σ φ_i B^i` times `1 - Σ Φ_j B^{jm}`, returned as lag coefficients `a_k` (k ≥ 1).
fn expand_ar(ar: &[f64], seasonal_ar: &[f64], m: usize) -> Vec<f64> {
    let mut a = vec![1.0];
    a.extend(ar.iter().map(|v| -v));
    let mut s = vec![0.0; seasonal_ar.len() * m + 1];
    s[0] = 1.0;
    for (j, v) in seasonal_ar.iter().enumerate() {
        s[(j + 1) * m] = -v;
    }
    poly_mul(&a, &s)[1..].iter().map(|v| -v).collect()
}

/// `1 + Σ θ_i B^i` times `1 + Σ Θ_j B^{jm}`, returned as lag coefficients.
fn expand_ma(ma: &[f64], seasonal_ma: &[f64], m: usize) -> Vec<f64> {
    let mut a = vec![1.0];
    a.extend_from_slice(ma);
    let mut s = vec![0.0; seasonal_ma.len() * m + 1];
    s[0] = 1.0;
    for (j, v) in seasonal_ma.iter().enumerate() {
        s[(j + 1) * m] = *v;
    }
    poly_mul(&a, &s)[1..].to_vec()
}

/// Coefficients of the differencing operator `(1 - B)^d (1 - B^m)^D`, lag 0 first.
fn differencing_poly(orders: &SarimaOrders) -> Vec<f64> {
    let mut poly = vec![1.0];
    for _ in 0..orders.d {
        poly = poly_mul(&poly, &[1.0, -1.0]);
    }
    for _ in 0..orders.seasonal_d {
        let mut s = vec![0.0; orders.m + 1];
        s[0] = 1.0;
        s[orders.m] = -1.0;
        poly = poly_mul(&poly, &s);
    }
    poly
}

/// Innovations of the CSS recursion; zero before `start`.
fn css_residuals(w: &[f64], c: f64, ar: &[f64], ma: &[f64], start: usize) -> Vec<f64> {
    let mut e = vec![0.0; w.len()];
    for t in start..w.len() {
        let mut pred = c;
        for (k, a) in ar.iter().enumerate() {
            pred += a * w[t - k - 1];
        }
        for (k, b) in ma.iter().enumerate() {
            if t > k {
                pred += b * e[t - k - 1];
            }
        }
        e[t] = w[t] - pred;
        if !e[t].is_finite() || e[t].abs() > 1e150 {
            e[t] = f64::INFINITY;
            break;
        }
    }
    e
}

/// True when every root of `1 - Σ c_i z^i` lies outside the unit circle,
/// checked by stepping the coefficients down to partial autocorrelations.
pub fn is_stationary(coefs: &[f64]) -> bool {
    let mut a = coefs.to_vec();
    while let Some(&r) = a.last() {
        if !r.is_finite() || r.abs() >= 1.0 {
            return false;
        }
        let k = a.len();
        let denom = 1.0 - r * r;
        a = (0..k - 1).map(|j| (a[j] + r * a[k - 2 - j]) / denom).collect();
    }
    true
}

/// MA polynomial `1 + Σ θ_i z^i` has all roots outside the unit circle.
pub fn is_invertible(coefs: &[f64]) -> bool {
    let neg: Vec<f64> = coefs.iter().map(|v| -v).collect();
    is_stationary(&neg)
}

struct Layout {
    orders: SarimaOrders,
}

impl Layout {
    fn unpack<'a>(&self, x: &'a [f64]) -> (f64, &'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let o = &self.orders;
        let mut i = 0;
        let c = if o.intercept {
            i = 1;
            x[0]
        } else {
            0.0
        };
        let ar = &x[i..i + o.p];
        i += o.p;
        let ma = &x[i..i + o.q];
        i += o.q;
        let sar = &x[i..i + o.seasonal_p];
        i += o.seasonal_p;
        let sma = &x[i..i + o.seasonal_q];
        (c, ar, ma, sar, sma)
    }

    fn sse(&self, w: &[f64], x: &[f64], sum_start: usize) -> f64 {
        let (c, ar, ma, sar, sma) = self.unpack(x);
        // Outside the stationary and invertible region CSS rewards degenerate
        // fits (unit-root AR absorbing the level, exploding MA filters).
        if !(is_stationary(ar) && is_stationary(sar) && is_invertible(ma) && is_invertible(sma)) {
            return f64::INFINITY;
        }
        let a = expand_ar(ar, sar, self.orders.m);
        let b = expand_ma(ma, sma, self.orders.m);
        let e = css_residuals(w, c, &a, &b, self.orders.ar_len());
        e[sum_start..].iter().map(|v| v * v).sum()
    }
}

/// Estimates SARIMA coefficients by minimising the conditional sum of squares
/// with Nelder-Mead.
pub fn fit_sarima(values: &[f64], orders: SarimaOrders, opts: &FitOptions) -> Result<SarimaParams> {
    orders.validate()?;
    if values.len() < orders.min_length() {
        return Err(Error::InsufficientHistory {
            needed: orders.min_length(),
            got: values.len(),
        });
    }
    let w = seasonal_difference(values, orders.d, orders.seasonal_d, orders.m);
    let sum_start = orders.ar_len().max(opts.condition_start.unwrap_or(0));
    let k = orders.n_coefficients();
    if w.len() <= sum_start + k + 1 {
        return Err(Error::InsufficientHistory {
            needed: sum_start + k + 2 + orders.diff_len(),
            got: values.len(),
        });
    }
    let n_eff = w.len() - sum_start;
    let layout = Layout { orders };

    let only_intercept = orders.p + orders.q + orders.seasonal_p + orders.seasonal_q == 0;
    let (x, iterations, converged) = if only_intercept {
        let x = if orders.intercept {
            vec![stats::mean(&w[sum_start..])]
        } else {
            vec![]
        };
        (x, 0, true)
    } else {
        let objective = |x: &[f64]| layout.sse(&w, x, sum_start);
        let x0 = [hannan_rissanen(&w, &orders), Some(initial_guess(&w, &orders))]
            .into_iter()
            .flatten()
            .min_by(|a, b| objective(a).total_cmp(&objective(b)))
            .expect("fallback guess always present");
        let nm = NelderMeadOptions {
            max_iter: opts.max_iter,
            f_tol: opts.tol,
            x_tol: opts.tol.sqrt(),
            initial_step: 0.1,
        };
        let min = nelder_mead(|x| layout.sse(&w, x, sum_start), &x0, nm);
        (min.x, min.iterations, min.converged)
    };

    let sse = layout.sse(&w, &x, sum_start);
    let (c, ar, ma, sar, sma) = layout.unpack(&x);
    let params = SarimaParams {
        orders,
        ar: ar.to_vec(),
        ma: ma.to_vec(),
        seasonal_ar: sar.to_vec(),
        seasonal_ma: sma.to_vec(),
        intercept: c,
        sigma2: sse / n_eff as f64,
        sse,
        n_eff,
        aic: css_aic(sse, n_eff, k),
        iterations,
        converged,
    };
    if !converged && !opts.allow_unconverged {
        return Err(Error::NotConverged {
            iterations,
            best: Box::new(params),
        });
    }
    Ok(params)
}

/// Scales coefficients towards zero until `ok` accepts them.
fn shrink_into(coefs: &mut [f64], ok: fn(&[f64]) -> bool) {
    while !ok(coefs) {
        coefs.iter_mut().for_each(|v| *v *= 0.9);
    }
}

/// Two-stage regression start: residuals of a long autoregression stand in
/// for the innovations, then the series is regressed on its own lags and on
/// lagged residuals. Seasonal cross terms are ignored.
fn hannan_rissanen(w: &[f64], orders: &SarimaOrders) -> Option<Vec<f64>> {
    let o = orders;
    let m = if o.seasonal_p + o.seasonal_q > 0 { o.m } else { 0 };
    let has_ma = o.q + o.seasonal_q > 0;
    let long = if has_ma {
        (o.p.max(o.q) + m * o.seasonal_p.max(o.seasonal_q) + 2).max(8)
    } else {
        0
    };
    let n = w.len();
    let mut resid = vec![0.0; n];
    if has_ma {
        if n < 4 * long + 10 {
            return None;
        }
        let rows = n - long;
        let mut x = nalgebra::DMatrix::zeros(rows, long + 1);
        let mut y = nalgebra::DMatrix::zeros(rows, 1);
        for r in 0..rows {
            let t = r + long;
            x[(r, 0)] = 1.0;
            for k in 0..long {
                x[(r, k + 1)] = w[t - k - 1];
            }
            y[(r, 0)] = w[t];
        }
        let (b, _) = stats::least_squares(&x, &y);
        for r in 0..rows {
            let fit: f64 = (0..=long).map(|k| x[(r, k)] * b[(k, 0)]).sum();
            resid[r + long] = w[r + long] - fit;
        }
    }
    let w_lags: Vec<usize> = (1..=o.p).chain((1..=o.seasonal_p).map(|j| j * m)).collect();
    let e_lags: Vec<usize> = (1..=o.q).chain((1..=o.seasonal_q).map(|j| j * m)).collect();
    let start = long + w_lags.iter().chain(&e_lags).copied().max().unwrap_or(0);
    let cols = 1 + w_lags.len() + e_lags.len();
    if n < start + 2 * cols + 10 {
        return None;
    }
    let rows = n - start;
    let mut x = nalgebra::DMatrix::zeros(rows, cols);
    let mut y = nalgebra::DMatrix::zeros(rows, 1);
    for r in 0..rows {
        let t = r + start;
        x[(r, 0)] = 1.0;
        for (c, &l) in w_lags.iter().enumerate() {
            x[(r, 1 + c)] = w[t - l];
        }
        for (c, &l) in e_lags.iter().enumerate() {
            x[(r, 1 + w_lags.len() + c)] = resid[t - l];
        }
        y[(r, 0)] = w[t];
    }
    let (b, _) = stats::least_squares(&x, &y);
    let b: Vec<f64> = b.iter().copied().collect();
    if b.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let (mut ar, rest) = (b[1..1 + o.p].to_vec(), &b[1 + o.p..]);
    let (mut sar, rest) = (rest[..o.seasonal_p].to_vec(), &rest[o.seasonal_p..]);
    let (mut ma, rest) = (rest[..o.q].to_vec(), &rest[o.q..]);
    let mut sma = rest[..o.seasonal_q].to_vec();
    shrink_into(&mut ar, is_stationary);
    shrink_into(&mut sar, is_stationary);
    shrink_into(&mut ma, is_invertible);
    shrink_into(&mut sma, is_invertible);
    let mut x0 = Vec::with_capacity(o.n_coefficients());
    if o.intercept {
        x0.push(b[0]);
    }
    x0.extend(ar);
    x0.extend(ma);
    x0.extend(sar);
    x0.extend(sma);
    Some(x0)
}

/// Starting point: AR terms from a least-squares regression on lags, the rest zero.
fn initial_guess(w: &[f64], orders: &SarimaOrders) -> Vec<f64> {
    let mut phi = vec![0.0; orders.p];
    if orders.p > 0 && w.len() > 2 * orders.p + 2 {
        let rows = w.len() - orders.p;
        let mut x = nalgebra::DMatrix::zeros(rows, orders.p + 1);
        let mut y = nalgebra::DMatrix::zeros(rows, 1);
        for r in 0..rows {
            let t = r + orders.p;
            x[(r, 0)] = 1.0;
            for k in 0..orders.p {
                x[(r, k + 1)] = w[t - k - 1];
            }
            y[(r, 0)] = w[t];
        }
        let (b, _) = stats::least_squares(&x, &y);
        for k in 0..orders.p {
            phi[k] = b[(k + 1, 0)].clamp(-0.99, 0.99);
        }
        shrink_into(&mut phi, is_stationary);
    }
    let mut x0 = Vec::with_capacity(orders.n_coefficients());
    if orders.intercept {
        x0.push(stats::mean(w) * (1.0 - phi.iter().sum::<f64>()));
    }
    x0.extend(phi);
    x0.extend(std::iter::repeat_n(0.0, orders.q + orders.seasonal_p + orders.seasonal_q));
    x0
}

impl SarimaParams {
    fn expanded(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.orders.m;
        (
            expand_ar(&self.ar, &self.seasonal_ar, m),
            expand_ma(&self.ma, &self.seasonal_ma, m),
        )
    }

    /// True when every root of the expanded AR and MA polynomials has
    /// modulus of at least `radius`.
    pub fn roots_outside(&self, radius: f64) -> bool {
        let (a, b) = self.expanded();
        let scaled = |c: &[f64], sign: f64| -> Vec<f64> {
            c.iter().enumerate().map(|(i, v)| sign * v * radius.powi(i as i32 + 1)).collect()
        };
        is_stationary(&scaled(&a, 1.0)) && is_stationary(&scaled(&b, -1.0))
    }

    /// History length needed to forecast.
    pub fn min_history(&self) -> usize {
        (self.orders.diff_len() + self.orders.ar_len()).max(1)
    }

    /// Forecasts `horizon` steps past `history` with future innovations set to
    /// zero. Returns point forecasts and standard errors from ψ-weights.
    pub fn forecast(&self, history: &[f64], horizon: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let needed = self.min_history();
        if history.len() < needed {
            return Err(Error::InsufficientHistory {
                needed,
                got: history.len(),
            });
        }
        let o = &self.orders;
        let (a, b) = self.expanded();
        let mut w = seasonal_difference(history, o.d, o.seasonal_d, o.m);
        let mut e = css_residuals(&w, self.intercept, &a, &b, o.ar_len().min(w.len()));
        if e.iter().any(|v| !v.is_finite()) {
            return Err(Error::Spec("model residual recursion diverged on history".into()));
        }
        for _ in 0..horizon {
            let t = w.len();
            let mut pred = self.intercept;
            for (k, ak) in a.iter().enumerate() {
                pred += ak * w[t - k - 1];
            }
            for (k, bk) in b.iter().enumerate() {
                if t > k {
                    pred += bk * e[t - k - 1];
                }
            }
            w.push(pred);
            e.push(0.0);
        }

        let delta = differencing_poly(o);
        let mut y = history.to_vec();
        let n_w = w.len() - horizon;
        for h in 0..horizon {
            let t = y.len();
            let mut v = w[n_w + h];
            for (k, dk) in delta.iter().enumerate().skip(1) {
                v -= dk * y[t - k];
            }
            y.push(v);
        }

        // ψ-weights of θ*(B) / (φ*(B) δ(B)).
        let mut phi_star = vec![1.0];
        phi_star.extend(a.iter().map(|v| -v));
        let phi_star = poly_mul(&phi_star, &delta);
        let mut theta_star = vec![1.0];
        theta_star.extend_from_slice(&b);
        let mut psi = vec![0.0; horizon];
        let mut se = Vec::with_capacity(horizon);
        let mut acc = 0.0;
        for j in 0..horizon {
            let mut v = theta_star.get(j).copied().unwrap_or(0.0);
            for i in 1..=j.min(phi_star.len() - 1) {
                v -= phi_star[i] * psi[j - i];
            }
            psi[j] = v;
            acc += v * v;
            se.push((self.sigma2 * acc).sqrt());
        }
        Ok((y[history.len()..].to_vec(), se))
    }

    /// In-sample one-step predictions; entry `i` predicts `history[i]`, `None`
    /// where the recursion has not started.
    pub fn one_step(&self, history: &[f64]) -> Vec<Option<f64>> {
        let o = &self.orders;
        let mut out = vec![None; history.len()];
        let dl = o.diff_len();
        if history.len() <= dl + o.ar_len() {
            return out;
        }
        let (a, b) = self.expanded();
        let w = seasonal_difference(history, o.d, o.seasonal_d, o.m);
        let e = css_residuals(&w, self.intercept, &a, &b, o.ar_len());
        let delta = differencing_poly(o);
        for t in o.ar_len()..w.len() {
            if !e[t].is_finite() {
                break;
            }
            let idx = t + dl;
            let mut v = w[t] - e[t];
            for (k, dk) in delta.iter().enumerate().skip(1) {
                v -= dk * history[idx - k];
            }
            out[idx] = Some(v);
        }
        out
    }
}

/// SARIMA forecaster with fixed orders.
#[derive(Debug, Clone)]
pub struct Sarima {
    orders: SarimaOrders,
    target: usize,
    opts: FitOptions,
    params: Option<SarimaParams>,
    history: Option<UnivariateTimeSeries>,
}

impl Sarima {
    pub fn new(orders: SarimaOrders, target: usize) -> Self {
        Self {
            orders,
            target,
            opts: FitOptions::full(),
            params: None,
            history: None,
        }
    }

    /// Wraps already estimated parameters.
    pub fn from_params(params: SarimaParams, target: usize) -> Self {
        Self {
            orders: params.orders,
            target,
            opts: FitOptions::full(),
            params: Some(params),
            history: None,
        }
    }

    pub fn params(&self) -> Option<&SarimaParams> {
        self.params.as_ref()
    }

    pub(crate) fn set_fitted(&mut self, params: SarimaParams, history: UnivariateTimeSeries) {
        self.orders = params.orders;
        self.params = Some(params);
        self.history = Some(history);
    }
}

impl Forecaster for Sarima {
    fn name(&self) -> String {
        format!("sarima{}", self.orders)
    }

    fn target_index(&self) -> usize {
        self.target
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<()> {
        let u = target_of(ts, self.target)?;
        let params = match fit_sarima(u.values(), self.orders, &self.opts) {
            Ok(p) => p,
            Err(Error::NotConverged { best, .. }) => *best,
            Err(e) => return Err(e),
        };
        self.set_fitted(params, u.clone());
        Ok(())
    }

    fn forecast(&self, timestamps: &[Timestamp], prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        let params = self.params.as_ref().ok_or(Error::NotTrained)?;
        let history = match prev {
            Some(p) => target_of(p, self.target)?.values(),
            None => self.history.as_ref().ok_or(Error::NotTrained)?.values(),
        };
        let (values, se) = params.forecast(history, timestamps.len())?;
        ForecastResult::new(timestamps.to_vec(), values, Some(se))
    }

    fn min_history(&self) -> usize {
        self.params.as_ref().map_or(1, SarimaParams::min_history)
    }

    fn one_step_ahead(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        let params = self.params.as_ref().ok_or(Error::NotTrained)?;
        let u = target_of(ts, self.target)?;
        one_step_from(u, prev.map(|p| target_of(p, self.target)).transpose()?, params.sigma2.sqrt(), |h| {
            params.one_step(h)
        })
    }
}

/// Shared helper for models that compute all one-step predictions in one pass.
pub(crate) fn one_step_from(
    u: &UnivariateTimeSeries,
    prev: Option<&UnivariateTimeSeries>,
    sigma: f64,
    predict: impl Fn(&[f64]) -> Vec<Option<f64>>,
) -> Result<ForecastResult> {
    let full = match prev {
        Some(p) => p.concat(u)?,
        None => u.clone(),
    };
    let offset = full.len() - u.len();
    let preds = predict(full.values());
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (i, p) in preds.into_iter().enumerate().skip(offset) {
        if let Some(p) = p {
            t.push(full.timestamps()[i]);
            v.push(p);
        }
    }
    let se = vec![sigma; v.len()];
    ForecastResult::new(t, v, Some(se))
}
