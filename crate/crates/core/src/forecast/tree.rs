//! Regression trees, gradient boosting and random forests, used as
//! autoregressive forecasters over lag windows.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{TimeSeries, Timestamp};
use crate::error::{Error, Result};
use crate::forecast::{ForecastResult, Forecaster};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART regression tree with squared-error splits.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Grow<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    max_depth: Option<usize>,
    max_features: Option<usize>,
}

impl RegressionTree {
    /// Fits on the rows of `x` selected by `idx`. With `max_features` set,
    /// each split considers a random subset of that many features.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        idx: &mut [usize],
        max_depth: Option<usize>,
        max_features: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        let g = Grow {
            x,
            y,
            max_depth,
            max_features,
        };
        tree.grow(&g, idx, 0, rng);
        tree
    }

    fn grow(&mut self, g: &Grow, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let mean = idx.iter().map(|&i| g.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        if idx.len() < 2 || g.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some((feature, threshold)) = best_split(g, idx, rng) else {
            return id;
        };
        let mut k = 0;
        for j in 0..idx.len() {
            if g.x[idx[j]][feature] <= threshold {
                idx.swap(j, k);
                k += 1;
            }
        }
        let (l, r) = idx.split_at_mut(k);
        let left = self.grow(g, l, depth + 1, rng);
        let right = self.grow(g, r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// Split maximising the reduction in squared error; midpoints between
/// distinct sorted values are the candidate thresholds.
fn best_split(g: &Grow, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
    let n_feat = g.x[idx[0]].len();
    let features: Vec<usize> = match g.max_features {
        Some(k) if k < n_feat => sample(rng, n_feat, k).into_vec(),
        _ => (0..n_feat).collect(),
    };
    let n = idx.len() as f64;
    let total: f64 = idx.iter().map(|&i| g.y[i]).sum();
    let base = total * total / n;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.to_vec();
    for &f in &features {
        order.sort_by(|&a, &b| g.x[a][f].total_cmp(&g.x[b][f]));
        let mut left = 0.0;
        for k in 1..order.len() {
            left += g.y[order[k - 1]];
            let (lo, hi) = (g.x[order[k - 1]][f], g.x[order[k]][f]);
            if lo >= hi {
                continue;
            }
            let right = total - left;
            let kl = k as f64;
            let score = left * left / kl + right * right / (n - kl);
            let gain = score - base;
            if gain > 1e-12 * (1.0 + base.abs()) && best.is_none_or(|(b, _, _)| gain > b) {
                best = Some((gain, f, lo + (hi - lo) / 2.0));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    GradientBoosting,
    RandomForest,
}

fn default_lags() -> usize {
    21
}
fn default_trees() -> usize {
    100
}
fn default_depth() -> Option<usize> {
    Some(7)
}
fn default_rate() -> f64 {
    0.1
}

/// Hyperparameters of the tree forecasters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    #[serde(default = "default_lags")]
    pub max_lags: usize,
    #[serde(default = "default_trees")]
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    #[serde(default = "default_depth")]
    pub max_depth: Option<usize>,
    #[serde(default = "default_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_lags: default_lags(),
            n_trees: default_trees(),
            max_depth: default_depth(),
            learning_rate: default_rate(),
            seed: 0,
        }
    }
}

/// A fitted regression ensemble for one output.
#[derive(Debug, Clone)]
pub struct TreeEnsemble {
    kind: EnsembleKind,
    init: f64,
    rate: f64,
    trees: Vec<RegressionTree>,
}

impl TreeEnsemble {
    pub fn fit(kind: EnsembleKind, cfg: &TreeConfig, x: &[Vec<f64>], y: &[f64], rng: &mut ChaCha8Rng) -> Self {
        let n = y.len();
        let mut trees = Vec::with_capacity(cfg.n_trees);
        match kind {
            EnsembleKind::GradientBoosting => {
                let init = stats::mean(y);
                let mut fitted = vec![init; n];
                for _ in 0..cfg.n_trees {
                    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
                    let mut idx: Vec<usize> = (0..n).collect();
                    let tree = RegressionTree::fit(x, &resid, &mut idx, cfg.max_depth, None, rng);
                    for (f, row) in fitted.iter_mut().zip(x) {
                        *f += cfg.learning_rate * tree.predict(row);
                    }
                    trees.push(tree);
                }
                Self {
                    kind,
                    init,
                    rate: cfg.learning_rate,
                    trees,
                }
            }
            EnsembleKind::RandomForest => {
                let max_features = (x[0].len() / 3).max(1);
                for _ in 0..cfg.n_trees {
                    let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    trees.push(RegressionTree::fit(x, y, &mut idx, cfg.max_depth, Some(max_features), rng));
                }
                Self {
                    kind,
                    init: 0.0,
                    rate: 1.0,
                    trees,
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.kind {
            EnsembleKind::GradientBoosting => {
                self.init + self.rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
            }
            EnsembleKind::RandomForest => {
                self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len().max(1) as f64
            }
        }
    }
}

/// Flattened window `[row_{t-1}, …, row_{t-L}]` ending just before `t`.
fn lag_features(rows: &[Vec<f64>], t: usize, lags: usize) -> Vec<f64> {
    let mut f = Vec::with_capacity(lags * rows[0].len());
    for k in 1..=lags {
        f.extend_from_slice(&rows[t - k]);
    }
    f
}

/// Autoregressive tree-ensemble forecaster, one ensemble per variable.
#[derive(Debug, Clone)]
pub struct TreeForecaster {
    kind: EnsembleKind,
    cfg: TreeConfig,
    target: usize,
    models: Vec<TreeEnsemble>,
    sigma: f64,
    history: Vec<Vec<f64>>,
}

impl TreeForecaster {
    pub fn new(kind: EnsembleKind, cfg: TreeConfig, target: usize) -> Self {
        Self {
            kind,
            cfg,
            target,
            models: Vec::new(),
            sigma: 0.0,
            history: Vec::new(),
        }
    }

    /// Predicts the next row from the last `max_lags` rows.
    pub fn predict_next(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let feats = lag_features(rows, rows.len(), self.cfg.max_lags);
        self.models.iter().map(|m| m.predict(&feats)).collect()
    }

    /// Rolls the one-step model forward `horizon` steps.
    pub fn rollout(&self, rows: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
        if self.models.is_empty() {
            return Err(Error::NotTrained);
        }
        let lags = self.cfg.max_lags;
        if rows.len() < lags {
            return Err(Error::InsufficientHistory {
                needed: lags,
                got: rows.len(),
            });
        }
        if rows[0].len() != self.models.len() {
            return Err(Error::Alignment("history dimension differs from training data".into()));
        }
        let mut window = rows[rows.len() - lags..].to_vec();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let next = self.predict_next(&window);
            window.remove(0);
            window.push(next.clone());
            out.push(next);
        }
        Ok(out)
    }
}

impl Forecaster for TreeForecaster {
    fn name(&self) -> String {
        match self.kind {
            EnsembleKind::GradientBoosting => "gb".into(),
            EnsembleKind::RandomForest => "rf".into(),
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
        let lags = self.cfg.max_lags;
        if lags == 0 || rows.len() <= lags + 1 {
            return Err(Error::InsufficientHistory {
                needed: lags + 2,
                got: rows.len(),
            });
        }
        let x: Vec<Vec<f64>> = (lags..rows.len()).map(|t| lag_features(&rows, t, lags)).collect();
        self.models = (0..ts.dim())
            .map(|i| {
                let y: Vec<f64> = rows[lags..].iter().map(|r| r[i]).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_add(i as u64));
                TreeEnsemble::fit(self.kind, &self.cfg, &x, &y, &mut rng)
            })
            .collect();
        let resid: Vec<f64> = x
            .iter()
            .zip(&rows[lags..])
            .map(|(f, r)| r[self.target] - self.models[self.target].predict(f))
            .collect();
        self.sigma = (resid.iter().map(|e| e * e).sum::<f64>() / resid.len() as f64).sqrt();
        self.history = rows[rows.len() - lags..].to_vec();
        Ok(())
    }

    fn forecast(&self, timestamps: &[Timestamp], prev: Option<&TimeSeries>) -> Result<ForecastResult> {
        let owned;
        let rows = match prev {
            Some(p) => {
                owned = p.rows()?;
                &owned
            }
            None => &self.history,
        };
        let path = self.rollout(rows, timestamps.len())?;
        let values = path.iter().map(|r| r[self.target]).collect();
        ForecastResult::new(timestamps.to_vec(), values, Some(vec![self.sigma; timestamps.len()]))
    }

    fn min_history(&self) -> usize {
        self.cfg.max_lags
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnivariateTimeSeries;

    fn series(v: Vec<f64>) -> TimeSeries {
        UnivariateTimeSeries::from_values("y", 0, 60, v).unwrap().into()
    }

    #[test]
    fn constant_series_forecasts_constant() {
        for kind in [EnsembleKind::GradientBoosting, EnsembleKind::RandomForest] {
            let cfg = TreeConfig {
                n_trees: 10,
                max_lags: 3,
                ..Default::default()
            };
            let mut m = TreeForecaster::new(kind, cfg, 0);
            m.train(&series(vec![4.5; 30])).unwrap();
            let f = m.forecast(&[1800, 1860, 1920], None).unwrap();
            assert!(f.values.iter().all(|v| (v - 4.5).abs() < 1e-12));
        }
    }

    #[test]
    fn unlimited_depth_memorises_increment_map() {
        let y: Vec<f64> = (0..60).map(|t| t as f64).collect();
        let cfg = TreeConfig {
            max_lags: 1,
            n_trees: 1,
            max_depth: None,
            learning_rate: 1.0,
            seed: 0,
        };
        let mut m = TreeForecaster::new(EnsembleKind::GradientBoosting, cfg, 0);
        let ts = series(y);
        m.train(&ts).unwrap();
        assert!(m.sigma < 1e-12);
        let rows = ts.rows().unwrap();
        for t in 1..60 {
            assert!((m.predict_next(&rows[..t])[0] - t as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn rollout_chains_one_step_predictions() {
        let y: Vec<f64> = (0..120).map(|t| ((t as f64) * 0.4).sin() * 3.0).collect();
        let cfg = TreeConfig {
            max_lags: 5,
            n_trees: 20,
            ..Default::default()
        };
        let mut m = TreeForecaster::new(EnsembleKind::GradientBoosting, cfg, 0);
        let ts = series(y);
        m.train(&ts).unwrap();
        let mut rows = ts.rows().unwrap();
        let three = m.rollout(&rows, 3).unwrap();
        for step in three.iter() {
            let next = m.predict_next(&rows);
            assert_eq!(next, *step);
            rows.push(next);
        }
        let four = m.rollout(&ts.rows().unwrap(), 4).unwrap();
        assert_eq!(&four[..3], &three[..]);
    }

    #[test]
    fn forest_is_deterministic_per_seed() {
        let y: Vec<f64> = (0..80).map(|t| ((t * 37) % 11) as f64).collect();
        let cfg = TreeConfig {
            max_lags: 4,
            n_trees: 15,
            seed: 42,
            ..Default::default()
        };
        let ts = series(y);
        let mut a = TreeForecaster::new(EnsembleKind::RandomForest, cfg, 0);
        let mut b = TreeForecaster::new(EnsembleKind::RandomForest, cfg, 0);
        a.train(&ts).unwrap();
        b.train(&ts).unwrap();
        let stamps = [4800, 4860];
        assert_eq!(a.forecast(&stamps, None).unwrap(), b.forecast(&stamps, None).unwrap());
    }

    #[test]
    fn short_history_is_rejected() {
        let mut m = TreeForecaster::new(EnsembleKind::GradientBoosting, TreeConfig::default(), 0);
        assert!(m.train(&series(vec![1.0; 22])).is_err());
    }

    #[test]
    fn config_defaults() {
        let c: TreeConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, TreeConfig::default());
        assert_eq!((c.max_lags, c.n_trees, c.max_depth, c.learning_rate), (21, 100, Some(7), 0.1));
    }
}
