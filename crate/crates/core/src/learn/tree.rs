//! Binary decision trees grown by greedy weighted-impurity splits.
//!
//! One builder serves both classification (Gini on 0/1 targets) and the
//! regression trees inside boosting (squared error on residuals): for a node
//! with weight sum `W` and weighted target sum `S`, both criteria choose the
//! split maximising `S_L²/W_L + S_R²/W_R`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// How candidate thresholds are proposed at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// Midpoints between consecutive distinct values.
    Best,
    /// `k` uniform draws between the node's min and max of each feature.
    Random { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
    pub mode: SplitMode,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
            mode: SplitMode::Best,
        }
    }
}

/// Training view for tree growth. `target` is 0/1 for classification or the
/// residual for boosting; `weight` are non-negative sample weights.
pub(crate) struct TreeData<'a> {
    pub rows: &'a [Vec<f64>],
    pub target: &'a [f64],
    pub weight: &'a [f64],
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Grow a tree; `leaf_value` maps the rows reaching a leaf to its output.
pub(crate) fn grow(
    data: &TreeData<'_>,
    indices: Vec<usize>,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
    leaf_value: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    let k = data.rows.first().map_or(0, Vec::len);
    let mut nodes = Vec::new();
    let mut features: Vec<usize> = (0..k).collect();
    // Explicit stack of (node slot, rows, depth).
    nodes.push(Node::Leaf { value: 0.0 });
    let mut stack = vec![(0usize, indices, 0usize)];
    while let Some((slot, idx, depth)) = stack.pop() {
        let split = if params.max_depth.is_some_and(|d| depth >= d)
            || idx.len() < 2 * params.min_samples_leaf.max(1)
            || is_pure(data, &idx)
        {
            None
        } else {
            best_split(data, &idx, params, &mut features, rng)
        };
        let Some(c) = split else {
            nodes[slot] = Node::Leaf {
                value: leaf_value(&idx),
            };
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| data.rows[i][c.feature] <= c.threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        let right = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[slot] = Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left,
            right,
        };
        stack.push((right, r, depth + 1));
        stack.push((left, l, depth + 1));
    }
    Tree { nodes }
}

fn is_pure(data: &TreeData<'_>, idx: &[usize]) -> bool {
    let first = data.target[idx[0]];
    idx.iter().all(|&i| data.target[i] == first)
}

fn best_split(
    data: &TreeData<'_>,
    idx: &[usize],
    params: &TreeParams,
    features: &mut [usize],
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let k = features.len();
    let wanted = params.max_features.map_or(k, |m| m.clamp(1, k));
    if wanted < k {
        features.shuffle(rng);
    } else {
        features.sort_unstable();
    }
    let mut best: Option<Candidate> = None;
    let mut order = idx.to_vec();
    for (examined, &f) in features.iter().enumerate() {
        // Keep looking past the quota only while nothing splittable was found.
        if examined >= wanted && best.is_some() {
            break;
        }
        let cand = match params.mode {
            SplitMode::Best => best_threshold(data, &mut order, f, params.min_samples_leaf),
            SplitMode::Random { k } => random_threshold(data, idx, f, k.max(1), params, rng),
        };
        if let Some(c) = cand {
            if best.as_ref().is_none_or(|b| c.score > b.score) {
                best = Some(c);
            }
        }
    }
    best
}

fn best_threshold(
    data: &TreeData<'_>,
    order: &mut [usize],
    f: usize,
    min_leaf: usize,
) -> Option<Candidate> {
    let x = |i: usize| data.rows[i][f];
    order.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
    let (w_tot, s_tot) = sums(data, order);
    let n = order.len();
    let min_leaf = min_leaf.max(1);
    let (mut wl, mut sl) = (0.0, 0.0);
    let mut best: Option<Candidate> = None;
    for pos in 0..n - 1 {
        let i = order[pos];
        wl += data.weight[i];
        sl += data.weight[i] * data.target[i];
        let (a, b) = (x(i), x(order[pos + 1]));
        if a == b || pos + 1 < min_leaf || n - pos - 1 < min_leaf {
            continue;
        }
        let score = split_score(wl, sl, w_tot - wl, s_tot - sl);
        if best.as_ref().is_none_or(|c| score > c.score) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(Candidate {
                feature: f,
                threshold,
                score,
            });
        }
    }
    best
}

fn random_threshold(
    data: &TreeData<'_>,
    idx: &[usize],
    f: usize,
    draws: usize,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let (lo, hi) = idx
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = data.rows[i][f];
            (lo.min(v), hi.max(v))
        });
    if !(lo < hi) {
        return None;
    }
    let min_leaf = params.min_samples_leaf.max(1);
    let mut best: Option<Candidate> = None;
    for _ in 0..draws {
        let mut threshold = rng.random_range(lo..hi);
        if threshold >= hi {
            threshold = lo;
        }
        let (mut wl, mut sl, mut nl) = (0.0, 0.0, 0usize);
        let (mut wr, mut sr) = (0.0, 0.0);
        for &i in idx {
            let w = data.weight[i];
            if data.rows[i][f] <= threshold {
                wl += w;
                sl += w * data.target[i];
                nl += 1;
            } else {
                wr += w;
                sr += w * data.target[i];
            }
        }
        if nl < min_leaf || idx.len() - nl < min_leaf {
            continue;
        }
        let score = split_score(wl, sl, wr, sr);
        if best.as_ref().is_none_or(|c| score > c.score) {
            best = Some(Candidate {
                feature: f,
                threshold,
                score,
            });
        }
    }
    best
}

fn sums(data: &TreeData<'_>, idx: &[usize]) -> (f64, f64) {
    idx.iter().fold((0.0, 0.0), |(w, s), &i| {
        (w + data.weight[i], s + data.weight[i] * data.target[i])
    })
}

fn split_score(wl: f64, sl: f64, wr: f64, sr: f64) -> f64 {
    let part = |w: f64, s: f64| if w > 0.0 { s * s / w } else { 0.0 };
    part(wl, sl) + part(wr, sr)
}

/// Weighted mean target of the rows; 0 if they carry no weight.
pub(crate) fn weighted_mean(data: &TreeData<'_>, idx: &[usize]) -> f64 {
    let (w, s) = sums(data, idx);
    if w > 0.0 {
        (s / w).clamp(0.0, 1.0)
    } else {
        0.0
    }
}
