//! Binary gradient-boosted regression trees with logistic loss.
//!
//! Trees grow leaf-wise (best gain first) under `num_leaves`/`max_depth`
//! limits. Splits are found by an exact scan over presorted feature values,
//! and leaves take Newton values `-G / (H + λ)` with a fixed `λ`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hyper::HyperPoint;
use crate::error::{Error, Result};
use crate::features::PairFeatureVector;

/// L2 regularization on leaf values.
pub const LAMBDA: f64 = 1.0;
const MIN_GAIN: f64 = 1e-12;
/// Margins are clamped so probabilities stay strictly inside (0, 1).
const MAX_MARGIN: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub x: PairFeatureVector,
    pub y: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    /// Depth in edges; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub hyper: HyperPoint,
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
    pub split_counts: Vec<usize>,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl GbdtModel {
    /// A model with no trees; predicts `sigmoid(base_score)` everywhere.
    pub fn constant(base_score: f64, dim: usize) -> Self {
        GbdtModel {
            hyper: HyperPoint::default(),
            base_score,
            trees: Vec::new(),
            split_counts: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.split_counts.len()
    }

    pub fn margin_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok((self.base_score + self.hyper.learning_rate * sum).clamp(-MAX_MARGIN, MAX_MARGIN))
    }

    pub fn predict_proba_raw(&self, x: &[f64]) -> Result<f64> {
        self.margin_raw(x).map(sigmoid)
    }

    pub fn predict_proba(&self, x: &PairFeatureVector) -> Result<f64> {
        self.predict_proba_raw(x.as_slice())
    }

    pub fn total_internal_nodes(&self) -> usize {
        self.trees.iter().map(RegressionTree::internal_count).sum()
    }
}

/// Mean binary cross-entropy of the model over `data`.
pub fn cross_entropy(data: &[LabeledPair], m: &GbdtModel) -> Result<f64> {
    let margins = data.iter().map(|p| m.margin_raw(p.x.as_slice())).collect::<Result<Vec<_>>>()?;
    let labels: Vec<u8> = data.iter().map(|p| p.y).collect();
    Ok(cross_entropy_from_margins(&labels, &margins))
}

/// `-(1/n) Σ [y ln p + (1-y) ln(1-p)]` with `p = sigmoid(margin)`, using
/// `ln p = -softplus(-z)` and `ln(1-p) = -softplus(z)`.
pub fn cross_entropy_from_margins(labels: &[u8], margins: &[f64]) -> f64 {
    let total: f64 = labels
        .iter()
        .zip(margins)
        .map(|(&y, &z)| if y == 1 { softplus(-z) } else { softplus(z) })
        .sum();
    total / labels.len() as f64
}

/// Training outcome with the training loss after every round.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub model: GbdtModel,
    /// `round_losses[0]` is the loss of the base score alone.
    pub round_losses: Vec<f64>,
}

pub fn train(data: &[LabeledPair], hyper: &HyperPoint, seed: u64) -> Result<GbdtModel> {
    Ok(train_traced(data, hyper, seed)?.model)
}

pub fn train_traced(data: &[LabeledPair], hyper: &HyperPoint, seed: u64) -> Result<TrainTrace> {
    let rows: Vec<&[f64]> = data.iter().map(|p| p.x.as_slice()).collect();
    let labels: Vec<u8> = data.iter().map(|p| p.y).collect();
    train_matrix(&rows, &labels, hyper, seed)
}

/// Train on an arbitrary row-major design matrix.
pub fn train_matrix(
    rows: &[&[f64]],
    labels: &[u8],
    hyper: &HyperPoint,
    seed: u64,
) -> Result<TrainTrace> {
    hyper.validate()?;
    let n = rows.len();
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if n == 0 || positives == 0 || positives == n {
        return Err(Error::DegenerateData);
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
    }

    let p = positives as f64 / n as f64;
    let base_score = (p / (1.0 - p)).ln();
    let mut model = GbdtModel {
        hyper: *hyper,
        base_score,
        trees: Vec::with_capacity(hyper.num_rounds),
        split_counts: vec![0; dim],
    };

    // Presorted row order per feature, ties broken by row index.
    let sorted: Vec<Vec<u32>> = (0..dim)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| rows[a as usize][f].total_cmp(&rows[b as usize][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margins = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut in_bag = vec![false; n];
    let mut round_losses = Vec::with_capacity(hyper.num_rounds + 1);
    round_losses.push(cross_entropy_from_margins(labels, &margins));

    let bag_size = ((hyper.bagging_fraction * n as f64).ceil() as usize).clamp(1, n);
    let feat_count = ((hyper.feature_fraction * dim as f64).round() as usize).clamp(1, dim);

    for _ in 0..hyper.num_rounds {
        for i in 0..n {
            let q = sigmoid(margins[i]);
            grad[i] = q - labels[i] as f64;
            hess[i] = q * (1.0 - q);
        }
        if bag_size < n {
            in_bag.iter_mut().for_each(|b| *b = false);
            for i in sample(&mut rng, n, bag_size).iter() {
                in_bag[i] = true;
            }
        } else {
            in_bag.iter_mut().for_each(|b| *b = true);
        }
        let mut features: Vec<usize> = if feat_count < dim {
            sample(&mut rng, dim, feat_count).into_vec()
        } else {
            (0..dim).collect()
        };
        features.sort_unstable();

        let grower = TreeGrower { rows, grad: &grad, hess: &hess, hyper, features: &features };
        let root_lists: Vec<Vec<u32>> = features
            .iter()
            .map(|&f| sorted[f].iter().copied().filter(|&r| in_bag[r as usize]).collect())
            .collect();
        let tree = grower.grow(root_lists, &mut model.split_counts);

        for i in 0..n {
            margins[i] = (margins[i] + hyper.learning_rate * tree.predict(rows[i]))
                .clamp(-MAX_MARGIN, MAX_MARGIN);
        }
        model.trees.push(tree);
        round_losses.push(cross_entropy_from_margins(labels, &margins));
    }

    Ok(TrainTrace { model, round_losses })
}

struct SplitChoice {
    /// Position within `features` / the leaf's lists.
    slot: usize,
    threshold: f64,
    gain: f64,
}

struct Leaf {
    node: usize,
    depth: usize,
    /// One row list per selected feature, each sorted by that feature.
    lists: Vec<Vec<u32>>,
    best: Option<SplitChoice>,
}

struct TreeGrower<'a> {
    rows: &'a [&'a [f64]],
    grad: &'a [f64],
    hess: &'a [f64],
    hyper: &'a HyperPoint,
    features: &'a [usize],
}

fn score(g: f64, h: f64) -> f64 {
    g * g / (h + LAMBDA)
}

impl TreeGrower<'_> {
    fn grow(&self, root_lists: Vec<Vec<u32>>, split_counts: &mut [usize]) -> RegressionTree {
        let mut nodes = vec![TreeNode::Leaf { value: self.leaf_value(&root_lists[0]) }];
        let mut leaves = vec![self.make_leaf(0, 0, root_lists)];

        while leaves.len() < self.hyper.num_leaves {
            // Highest gain first; ties go to the earliest-created leaf.
            let pick = leaves
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.best.as_ref().map(|b| (i, b.gain)))
                .fold(None, |acc: Option<(usize, f64)>, (i, g)| match acc {
                    Some((_, best)) if best >= g => acc,
                    _ => Some((i, g)),
                });
            let Some((which, _)) = pick else { break };
            let leaf = leaves.swap_remove(which);
            let choice = leaf.best.expect("picked leaf has a split");
            let feature = self.features[choice.slot];

            let (left_lists, right_lists): (Vec<_>, Vec<_>) = leaf
                .lists
                .into_iter()
                .map(|list| {
                    list.into_iter()
                        .partition::<Vec<u32>, _>(|&r| self.rows[r as usize][feature] <= choice.threshold)
                })
                .unzip();

            let left = nodes.len();
            let right = left + 1;
            nodes.push(TreeNode::Leaf { value: self.leaf_value(&left_lists[0]) });
            nodes.push(TreeNode::Leaf { value: self.leaf_value(&right_lists[0]) });
            nodes[leaf.node] = TreeNode::Split { feature, threshold: choice.threshold, left, right };
            split_counts[feature] += 1;

            leaves.push(self.make_leaf(left, leaf.depth + 1, left_lists));
            leaves.push(self.make_leaf(right, leaf.depth + 1, right_lists));
            // keep creation order stable for tie-breaking
            leaves.sort_by_key(|l| l.node);
        }
        RegressionTree { nodes }
    }

    fn leaf_value(&self, rows: &[u32]) -> f64 {
        let (g, h) = self.sums(rows);
        -g / (h + LAMBDA)
    }

    fn sums(&self, rows: &[u32]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g, h), &r| (g + self.grad[r as usize], h + self.hess[r as usize]))
    }

    fn make_leaf(&self, node: usize, depth: usize, lists: Vec<Vec<u32>>) -> Leaf {
        let best = if depth < self.hyper.max_depth { self.best_split(&lists) } else { None };
        Leaf { node, depth, lists, best }
    }

    /// Exact greedy scan. Ties resolve to the lowest feature index, then the
    /// lowest threshold, because only strictly better gains replace the best.
    fn best_split(&self, lists: &[Vec<u32>]) -> Option<SplitChoice> {
        let count = lists[0].len();
        let min_leaf = self.hyper.min_samples_leaf;
        if count < 2 * min_leaf {
            return None;
        }
        let (g_total, h_total) = self.sums(&lists[0]);
        let parent = score(g_total, h_total);
        let mut best: Option<SplitChoice> = None;

        for (slot, list) in lists.iter().enumerate() {
            let f = self.features[slot];
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..count - 1 {
                let r = list[k] as usize;
                gl += self.grad[r];
                hl += self.hess[r];
                let left_n = k + 1;
                if left_n < min_leaf {
                    continue;
                }
                if count - left_n < min_leaf {
                    break;
                }
                let a = self.rows[r][f];
                let b = self.rows[list[k + 1] as usize][f];
                if a >= b {
                    continue;
                }
                let gain = score(gl, hl) + score(g_total - gl, h_total - hl) - parent;
                if gain > MIN_GAIN && best.as_ref().is_none_or(|s| gain > s.gain) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(SplitChoice { slot, threshold, gain });
                }
            }
        }
        best
    }
}
