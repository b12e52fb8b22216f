//! Vector autoregression fitted equation by equation with least squares.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{TimeSeries, Timestamp};
use crate::error::{Error, Result};
use crate::forecast::{ForecastResult, Forecaster};

/// Fitted VAR(p). `coef[i]` holds the intercept followed by lag blocks
/// `[y_{t-1}, …, y_{t-p}]`, each block of width `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarParams {
    pub order: usize,
    pub dim: usize,
    pub coef: Vec<Vec<f64>>,
    /// Residual standard deviation per equation.
    pub sigma: Vec<f64>,
    pub aic: f64,
    /// True when the ridge fallback was needed for a singular design.
    pub ridged: bool,
}

fn design(rows: &[Vec<f64>], p: usize, start: usize) -> DMatrix<f64> {
    let d = rows[0].len();
    let t_len = rows.len() - start;
    DMatrix::from_fn(t_len, 1 + d * p, |r, c| {
        if c == 0 {
            return 1.0;
        }
        let lag = (c - 1) / d + 1;
        rows[start + r - lag][(c - 1) % d]
    })
}

fn fit_order(rows: &[Vec<f64>], p: usize, start: usize) -> (VarParams, f64) {
    let d = rows[0].len();
    let t_len = rows.len() - start;
    let x = design(rows, p, start);
    let y = DMatrix::from_fn(t_len, d, |r, c| rows[start + r][c]);
    let (b, ridged) = crate::stats::least_squares(&x, &y);
    let resid = &y - &x * &b;
    let sigma_mat = resid.transpose() * &resid / t_len as f64;
    let det = sigma_mat.determinant().max(1e-300);
    let aic = t_len as f64 * det.ln() + 2.0 * (d * (1 + d * p)) as f64;
    let coef = (0..d).map(|i| b.column(i).iter().copied().collect()).collect();
    let sigma = (0..d).map(|i| sigma_mat[(i, i)].max(0.0).sqrt()).collect();
    (
        VarParams {
            order: p,
            dim: d,
            coef,
            sigma,
            aic,
            ridged,
        },
        aic,
    )
}

/// Fits orders `0..=max_order` on a common sample and keeps the lowest AIC;
/// ties go to the smaller order.
pub fn fit_var(rows: &[Vec<f64>], max_order: usize) -> Result<VarParams> {
    let d = rows.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::InvalidSeries("empty series".into()));
    }
    if rows.len() <= d * max_order + 1 || rows.len() <= max_order + 1 {
        return Err(Error::InsufficientHistory {
            needed: d * max_order + 2,
            got: rows.len(),
        });
    }
    let mut best: Option<VarParams> = None;
    for p in 0..=max_order {
        let (params, aic) = fit_order(rows, p, max_order);
        if best.as_ref().is_none_or(|b| aic < b.aic) {
            best = Some(params);
        }
    }
    Ok(best.expect("at least order 0 is fitted"))
}

impl VarParams {
    /// One-step prediction of all variables given the history so far.
    pub fn step(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let n = rows.len();
        (0..self.dim)
            .map(|i| {
                let c = &self.coef[i];
                let mut v = c[0];
                for lag in 1..=self.order {
                    let row = &rows[n - lag];
                    for j in 0..self.dim {
                        v += c[1 + (lag - 1) * self.dim + j] * row[j];
                    }
                }
                v
            })
            .collect()
    }

    /// Iterates the fitted system `horizon` steps past `rows`.
    pub fn forecast(&self, rows: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
        if rows.len() < self.order.max(1) {
            return Err(Error::InsufficientHistory {
                needed: self.order.max(1),
                got: rows.len(),
            });
        }
        let mut hist = rows[rows.len() - self.order..].to_vec();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let next = self.step(&hist);
            hist.push(next.clone());
            out.push(next);
        }
        Ok(out)
    }
}

fn default_max_order() -> usize {
    5
}

/// VAR forecaster projecting onto one target variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Var {
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(skip)]
    target: usize,
    #[serde(skip)]
    params: Option<VarParams>,
    #[serde(skip)]
    history: Vec<Vec<f64>>,
}

impl Var {
    pub fn new(max_order: usize, target: usize) -> Self {
        Self {
            max_order,
            target,
            params: None,
            history: Vec::new(),
        }
    }

    pub fn params(&self) -> Option<&VarParams> {
        self.params.as_ref()
    }
}

impl Forecaster for Var {
    fn name(&self) -> String {
        match &self.params {
            Some(p) => format!("var({})", p.order),
            None => "var".into(),
        }
    }

    fn target_index(&self) -> usize {
        self.target
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<()> {
        if self.target >= ts.dim() {
            return Err(Error::Spec(format!("target index {} out of range", self.target)));
        }
        let rows = ts.rows()?;
        let params = fit_var(&rows, self.max_order)?;
        let keep = params.order.max(1);
        self.history = rows[rows.len() - keep..].to_vec();
        self.params = Some(params);
        Ok(())
    }

    fn forecast(&self, timestamps: &[Timestamp], prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        let params = self.params.as_ref().ok_or(Error::NotTrained)?;
        let owned;
        let rows = match prev {
            Some(p) => {
                owned = p.rows()?;
                &owned
            }
            None => &self.history,
        };
        let path = params.forecast(rows, timestamps.len())?;
        let values = path.iter().map(|r| r[self.target]).collect();
        let se = vec![params.sigma[self.target]; timestamps.len()];
        ForecastResult::new(timestamps.to_vec(), values, Some(se))
    }

    fn min_history(&self) -> usize {
        self.params.as_ref().map_or(1, |p| p.order.max(1))
    }
}
