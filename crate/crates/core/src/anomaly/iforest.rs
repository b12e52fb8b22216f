//! Isolation forest over windows of the trailing `w` rows.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anomaly::{AnomalyDetector, AnomalyScoreSeries};
use crate::data::TimeSeries;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful search in a binary search tree of `n` points.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

fn default_trees() -> usize {
    100
}
fn default_subsample() -> usize {
    256
}
fn default_window() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestConfig {
    #[serde(default = "default_trees")]
    pub n_trees: usize,
    #[serde(default = "default_subsample")]
    pub subsample: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for IsolationForestConfig {
    fn default() -> Self {
        Self {
            n_trees: default_trees(),
            subsample: default_subsample(),
            window: default_window(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum INode {
    External(usize),
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// One isolation tree.
#[derive(Debug, Clone)]
pub struct ITree {
    nodes: Vec<INode>,
}

impl ITree {
    pub fn fit(data: &[Vec<f64>], idx: &mut [usize], height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut t = Self { nodes: Vec::new() };
        t.grow(data, idx, 0, height_limit, rng);
        t
    }

    fn grow(&mut self, data: &[Vec<f64>], idx: &mut [usize], depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(INode::External(idx.len()));
        if depth >= limit || idx.len() <= 1 {
            return id;
        }
        let dim = data[idx[0]].len();
        let ranges: Vec<(usize, f64, f64)> = (0..dim)
            .filter_map(|f| {
                let (lo, hi) = idx
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(data[i][f]), hi.max(data[i][f])));
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let u: f64 = rng.random();
        let threshold = lo + u * (hi - lo);
        let mut k = 0;
        for j in 0..idx.len() {
            if data[idx[j]][feature] < threshold {
                idx.swap(j, k);
                k += 1;
            }
        }
        if k == 0 || k == idx.len() {
            return id;
        }
        let (l, r) = idx.split_at_mut(k);
        let left = self.grow(data, l, depth + 1, limit, rng);
        let right = self.grow(data, r, depth + 1, limit, rng);
        self.nodes[id] = INode::Internal {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Edges to the external node plus the expected remaining depth there.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[i] {
                INode::External(size) => return depth + c_factor(size),
                INode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] < threshold { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

/// Fitted forest over feature vectors.
#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<ITree>,
    psi: usize,
}

impl Forest {
    pub fn fit(data: &[Vec<f64>], n_trees: usize, subsample: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = subsample.min(data.len()).max(1);
        let limit = (psi as f64).log2().ceil() as usize;
        let trees = (0..n_trees)
            .map(|_| {
                let mut idx = sample(&mut rng, data.len(), psi).into_vec();
                ITree::fit(data, &mut idx, limit, &mut rng)
            })
            .collect();
        Self { trees, psi }
    }

    /// `2^(−E[h(x)] / c(ψ))`, or 0.5 when `c(ψ) = 0`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let c = c_factor(self.psi);
        if c == 0.0 || self.trees.is_empty() {
            return 0.5;
        }
        let mean = self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64;
        2f64.powf(-mean / c)
    }
}

/// Flattened windows of the trailing `w` rows for every row from index
/// `w - 1` onward.
pub fn windows(rows: &[Vec<f64>], w: usize) -> Vec<Vec<f64>> {
    if rows.len() < w {
        return Vec::new();
    }
    (w - 1..rows.len())
        .map(|i| rows[i + 1 - w..=i].iter().flatten().copied().collect())
        .collect()
}

#[derive(Debug, Clone)]
pub struct IsolationForest {
    cfg: IsolationForestConfig,
    forest: Option<Forest>,
    tail: Vec<Vec<f64>>,
}

impl IsolationForest {
    pub fn new(cfg: IsolationForestConfig) -> Self {
        Self {
            cfg,
            forest: None,
            tail: Vec::new(),
        }
    }
}

impl AnomalyDetector for IsolationForest {
    fn name(&self) -> String {
        "iforest".into()
    }

    fn train(&mut self, ts: &TimeSeries) -> Result<AnomalyScoreSeries> {
        let w = self.cfg.window.max(1);
        let rows = ts.rows()?;
        if rows.len() < w {
            return Err(Error::InsufficientHistory {
                needed: w,
                got: rows.len(),
            });
        }
        let feats = windows(&rows, w);
        let forest = Forest::fit(&feats, self.cfg.n_trees, self.cfg.subsample, self.cfg.seed);
        let scores = feats.iter().map(|f| forest.score(f)).collect();
        self.forest = Some(forest);
        self.tail = rows[rows.len() + 1 - w..].to_vec();
        Ok(AnomalyScoreSeries::raw(ts.timestamps()?[w - 1..].to_vec(), scores))
    }

    fn score(&self, ts: &TimeSeries, prev: Option<&TimeSeries>) -> Result<AnomalyScoreSeries> {
        let forest = self.forest.as_ref().ok_or(Error::NotTrained)?;
        let w = self.cfg.window.max(1);
        let rows = ts.rows()?;
        let history = match prev {
            Some(p) => p.rows()?,
            None => self.tail.clone(),
        };
        let keep = history.len().min(w - 1);
        let mut all = history[history.len() - keep..].to_vec();
        all.extend(rows);
        let feats = windows(&all, w);
        let stamps = ts.timestamps()?;
        let skip = stamps.len() - feats.len();
        let scores = feats.iter().map(|f| forest.score(f)).collect();
        Ok(AnomalyScoreSeries::raw(stamps[skip..].to_vec(), scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnivariateTimeSeries;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};
    use rand::Rng;

    #[test]
    fn c_factor_values() {
        assert_eq!(c_factor(1), 0.0);
        assert_eq!(c_factor(2), 1.0);
        // 2 H(255) - 2 * 255 / 256 with H(i) ≈ ln i + γ
        assert!((c_factor(256) - 10.244_770_920_119_917).abs() < 1e-9);
    }

    #[test]
    fn single_window_scores_half() {
        let ts: TimeSeries = UnivariateTimeSeries::from_values("x", 0, 60, (0..10).map(f64::from).collect())
            .unwrap()
            .into();
        let s = IsolationForest::new(IsolationForestConfig::default()).train(&ts).unwrap();
        assert_eq!(s.scores, vec![0.5]);
        assert_eq!(s.timestamps, vec![540]);
    }

    #[test]
    fn far_outlier_has_max_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut data: Vec<Vec<f64>> = (0..500).map(|_| vec![normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
        data[250] = vec![12.0, -11.0];
        let f = Forest::fit(&data, 100, 256, 5);
        let scores: Vec<f64> = data.iter().map(|x| f.score(x)).collect();
        let argmax = (0..500).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        assert_eq!(argmax, 250);
        assert!(scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }

    #[test]
    fn scoring_with_history_matches_training_windows() {
        let x: Vec<f64> = (0..120).map(|i| ((i * 13) % 7) as f64).collect();
        let ts: TimeSeries = UnivariateTimeSeries::from_values("x", 0, 60, x).unwrap().into();
        let mut d = IsolationForest::new(IsolationForestConfig {
            n_trees: 20,
            ..Default::default()
        });
        let train = d.train(&ts).unwrap();
        let again = d.score(&ts.slice(60..120), Some(&ts.slice(0..60))).unwrap();
        assert_eq!(again.len(), 60);
        assert_eq!(&train.scores[51..], &again.scores[..]);
        let cold = d.score(&ts.slice(60..120), Some(&ts.slice(0..0))).unwrap();
        assert_eq!(cold.len(), 51);
    }

    /// Plain recursive construction drawing randomness in the same order as
    /// the production tree; writes each point's path length into `out`.
    fn brute(data: &[Vec<f64>], idx: Vec<usize>, depth: usize, limit: usize, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let leaf = |out: &mut [f64]| {
            for &i in &idx {
                out[i] = depth as f64 + c_factor(idx.len());
            }
        };
        if depth >= limit || idx.len() <= 1 {
            return leaf(out);
        }
        let dims: Vec<usize> = (0..data[0].len())
            .filter(|&f| idx.iter().any(|&i| data[i][f] != data[idx[0]][f]))
            .collect();
        if dims.is_empty() {
            return leaf(out);
        }
        let f = dims[rng.random_range(0..dims.len())];
        let lo = idx.iter().map(|&i| data[i][f]).fold(f64::INFINITY, f64::min);
        let hi = idx.iter().map(|&i| data[i][f]).fold(f64::NEG_INFINITY, f64::max);
        let u: f64 = rng.random();
        let thr = lo + u * (hi - lo);
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| data[i][f] < thr);
        if l.is_empty() || r.is_empty() {
            return leaf(out);
        }
        brute(data, l, depth + 1, limit, rng, out);
        brute(data, r, depth + 1, limit, rng, out);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_brute_force_and_is_scale_invariant(
            data in proptest::collection::vec(proptest::collection::vec(-100i32..100, 2), 2..16),
            seed in 0u64..1000,
        ) {
            let data: Vec<Vec<f64>> = data.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
            let n = data.len();
            let limit = (n as f64).log2().ceil() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx: Vec<usize> = (0..n).collect();
            let tree = ITree::fit(&data, &mut idx, limit, &mut rng);
            let mut expected = vec![0.0; n];
            brute(&data, (0..n).collect(), 0, limit, &mut ChaCha8Rng::seed_from_u64(seed), &mut expected);
            for (x, e) in data.iter().zip(&expected) {
                prop_assert_eq!(tree.path_length(x), *e);
            }

            // positive rescaling of every feature leaves all paths unchanged
            let scaled: Vec<Vec<f64>> = data.iter().map(|r| vec![r[0] * 4.0, r[1] * 0.5]).collect();
            let a = Forest::fit(&data, 3, 16, seed);
            let b = Forest::fit(&scaled, 3, 16, seed);
            for (x, y) in data.iter().zip(&scaled) {
                prop_assert_eq!(a.score(x), b.score(y));
            }
        }
    }
}
