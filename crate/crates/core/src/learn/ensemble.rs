//! Tree ensembles: bagged forests, extremely randomised trees and gradient boosting.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, weighted_mean, SplitMode, Tree, TreeData, TreeParams};
use super::ClassWeights;
use crate::analysis::sigmoid;

/// Features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    #[default]
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, k: usize) -> usize {
        match self {
            MaxFeatures::All => k,
            MaxFeatures::Sqrt => ((k as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::Count(n) => n.clamp(1, k.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtraTreesParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    /// Random thresholds drawn per candidate feature.
    pub thresholds: usize,
    pub seed: u64,
}

impl Default for ExtraTreesParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            thresholds: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostingParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Fraction of rows drawn without replacement per stage.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

/// Averaged leaf probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn proba(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        (sum / self.trees.len() as f64).clamp(0.0, 1.0)
    }
}

/// Additive log-odds model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Weighted mean training deviance before the first and after each stage.
    pub train_deviance: Vec<f64>,
}

impl Boosted {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }
}

/// Generator for tree `index` of an ensemble seeded with `seed`.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn targets(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&y| f64::from(u8::from(y))).collect()
}

fn class_weight_vec(labels: &[bool], weights: &ClassWeights) -> Vec<f64> {
    labels.iter().map(|&y| weights.of(y)).collect()
}

fn bag(
    rows: &[Vec<f64>],
    labels: &[bool],
    weights: &ClassWeights,
    n_trees: usize,
    seed: u64,
    bootstrap: bool,
    params: TreeParams,
) -> Forest {
    let y = targets(labels);
    let base = class_weight_vec(labels, weights);
    let n = rows.len();
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let (weight, idx) = if bootstrap {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                let w: Vec<f64> = base
                    .iter()
                    .zip(&counts)
                    .map(|(b, &c)| b * c as f64)
                    .collect();
                let idx = (0..n).filter(|&i| counts[i] > 0).collect();
                (w, idx)
            } else {
                (base.clone(), (0..n).collect())
            };
            let data = TreeData {
                rows,
                target: &y,
                weight: &weight,
            };
            grow(&data, idx, &params, &mut rng, &|leaf| {
                weighted_mean(&data, leaf)
            })
        })
        .collect();
    Forest { trees }
}

/// One classification tree on every row; leaves hold the weighted positive fraction.
pub fn fit_tree(
    rows: &[Vec<f64>],
    labels: &[bool],
    weights: &ClassWeights,
    params: &TreeParams,
    seed: u64,
) -> Tree {
    let y = targets(labels);
    let w = class_weight_vec(labels, weights);
    let data = TreeData {
        rows,
        target: &y,
        weight: &w,
    };
    let mut rng = tree_rng(seed, 0);
    grow(
        &data,
        (0..rows.len()).collect(),
        params,
        &mut rng,
        &|leaf| weighted_mean(&data, leaf),
    )
}

pub fn fit_random_forest(
    rows: &[Vec<f64>],
    labels: &[bool],
    weights: &ClassWeights,
    p: &ForestParams,
) -> Forest {
    let k = rows.first().map_or(0, Vec::len);
    let params = TreeParams {
        max_depth: p.max_depth,
        min_samples_leaf: p.min_samples_leaf,
        max_features: Some(p.max_features.resolve(k)),
        mode: SplitMode::Best,
    };
    bag(rows, labels, weights, p.n_trees, p.seed, true, params)
}

pub fn fit_extra_trees(
    rows: &[Vec<f64>],
    labels: &[bool],
    weights: &ClassWeights,
    p: &ExtraTreesParams,
) -> Forest {
    let k = rows.first().map_or(0, Vec::len);
    let params = TreeParams {
        max_depth: p.max_depth,
        min_samples_leaf: p.min_samples_leaf,
        max_features: Some(p.max_features.resolve(k)),
        mode: SplitMode::Random {
            k: p.thresholds.max(1),
        },
    };
    bag(rows, labels, weights, p.n_trees, p.seed, false, params)
}

/// Weighted mean binomial deviance of log-odds `f` against labels.
pub fn deviance(f: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut wsum = 0.0;
    for ((&fi, &yi), &wi) in f.iter().zip(y).zip(w) {
        // -2 log-likelihood: 2 (log(1 + e^f) - y f)
        let sp = fi.max(0.0) + (-fi.abs()).exp().ln_1p();
        total += wi * 2.0 * (sp - yi * fi);
        wsum += wi;
    }
    total / wsum
}

pub fn fit_gradient_boosting(
    rows: &[Vec<f64>],
    labels: &[bool],
    weights: &ClassWeights,
    p: &BoostingParams,
) -> Boosted {
    let y = targets(labels);
    let w = class_weight_vec(labels, weights);
    let n = rows.len();
    let wp: f64 = w.iter().zip(&y).map(|(w, y)| w * y).sum();
    let wn: f64 = w.iter().sum::<f64>() - wp;
    let init = (wp / wn).ln();
    let mut f = vec![init; n];
    let mut train_deviance = vec![deviance(&f, &y, &w)];
    let params = TreeParams {
        max_depth: Some(p.max_depth),
        min_samples_leaf: p.min_samples_leaf,
        max_features: None,
        mode: SplitMode::Best,
    };
    let take = ((p.subsample.clamp(0.0, 1.0) * n as f64).round() as usize).clamp(1, n);
    let mut trees = Vec::with_capacity(p.n_trees);
    for stage in 0..p.n_trees {
        let mut rng = tree_rng(p.seed, stage);
        let prob: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        let residual: Vec<f64> = y.iter().zip(&prob).map(|(y, p)| y - p).collect();
        let idx: Vec<usize> = if take < n {
            let mut s = sample(&mut rng, n, take).into_vec();
            s.sort_unstable();
            s
        } else {
            (0..n).collect()
        };
        let data = TreeData {
            rows,
            target: &residual,
            weight: &w,
        };
        let newton_leaf = |leaf: &[usize]| {
            let (mut num, mut den) = (0.0, 0.0);
            for &i in leaf {
                num += w[i] * residual[i];
                den += w[i] * prob[i] * (1.0 - prob[i]);
            }
            if den.abs() < 1e-150 {
                0.0
            } else {
                num / den
            }
        };
        let tree = grow(&data, idx, &params, &mut rng, &newton_leaf);
        for (fi, x) in f.iter_mut().zip(rows) {
            *fi += p.learning_rate * tree.predict(x);
        }
        train_deviance.push(deviance(&f, &y, &w));
        trees.push(tree);
    }
    Boosted {
        init,
        learning_rate: p.learning_rate,
        trees,
        train_deviance,
    }
}
