//! Randomized decision forest backend.
//!
//! Each appliance gets its own forest of binary decision trees. Every tree
//! trains on a bootstrap resample of the day and, at every node, considers
//! only a random ⌈√d⌉ subset of the feature dimensions, choosing the
//! threshold that minimizes class-weighted Gini impurity. Prediction is a
//! majority vote over trees; a tie counts as OFF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_weights, stream_seed, TrainConfig};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Tree {
    /// Root is node 0.
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "k", rename_all = "lowercase")]
pub(crate) enum Node {
    Leaf {
        on: bool,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

impl Tree {
    fn predict(&self, row: &[f64]) -> bool {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { on } => return *on,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    #[cfg(test)]
    fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Majority vote: ON only when strictly more than half the trees vote ON.
    pub fn predict_row(&self, row: &[f64]) -> bool {
        let on = self.trees.iter().filter(|t| t.predict(row)).count();
        2 * on > self.trees.len()
    }
}

/// Gini impurity of a node holding class weight masses `w_off` and `w_on`.
pub(crate) fn gini(w_off: f64, w_on: f64) -> f64 {
    let total = w_off + w_on;
    if total <= 0.0 {
        return 0.0;
    }
    let p_off = w_off / total;
    let p_on = w_on / total;
    1.0 - p_off * p_off - p_on * p_on
}

struct SplitChoice {
    feature: u32,
    threshold: f64,
    /// Weighted mean of child impurities.
    impurity: f64,
}

/// Scan ⌈√d⌉ randomly chosen features for the impurity-minimizing threshold.
/// Returns `None` when no threshold leaves `min_leaf` samples on both sides.
fn best_split(
    features: &FeatureMatrix,
    labels: &[bool],
    weights: (f64, f64),
    indices: &[u32],
    min_leaf: usize,
    rng: &mut ChaCha8Rng,
) -> Option<SplitChoice> {
    let dim = features.dim();
    let mtry = ((dim as f64).sqrt().ceil() as usize).clamp(1, dim);
    // Partial Fisher-Yates draw of mtry distinct feature indices.
    let mut pool: Vec<u32> = (0..dim as u32).collect();
    for k in 0..mtry {
        let j = rng.gen_range(k..dim);
        pool.swap(k, j);
    }

    let n = indices.len();
    let (w_off, w_on) = weights;
    let mut best: Option<SplitChoice> = None;
    let mut scratch: Vec<(f64, bool)> = Vec::with_capacity(n);
    for &f in &pool[..mtry] {
        scratch.clear();
        scratch.extend(indices.iter().map(|&i| {
            let i = i as usize;
            (features.row(i)[f as usize], labels[i])
        }));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let total_on: f64 = scratch.iter().filter(|(_, l)| *l).count() as f64 * w_on;
        let total_off: f64 = scratch.iter().filter(|(_, l)| !*l).count() as f64 * w_off;
        let mut left_on = 0.0;
        let mut left_off = 0.0;
        for i in 0..n - 1 {
            let (value, label) = scratch[i];
            if label {
                left_on += w_on;
            } else {
                left_off += w_off;
            }
            let next = scratch[i + 1].0;
            if value == next {
                continue; // threshold must fall between distinct values
            }
            if i + 1 < min_leaf || n - i - 1 < min_leaf {
                continue;
            }
            let right_on = total_on - left_on;
            let right_off = total_off - left_off;
            let wl = left_on + left_off;
            let wr = right_on + right_off;
            let impurity =
                (wl * gini(left_off, left_on) + wr * gini(right_off, right_on)) / (wl + wr);
            if best.as_ref().map_or(true, |b| impurity < b.impurity) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: (value + next) / 2.0,
                    impurity,
                });
            }
        }
    }
    best
}

fn weighted_counts(indices: &[u32], labels: &[bool], weights: (f64, f64)) -> (f64, f64) {
    let on = indices.iter().filter(|&&i| labels[i as usize]).count();
    let off = indices.len() - on;
    (off as f64 * weights.0, on as f64 * weights.1)
}

fn build_node(
    features: &FeatureMatrix,
    labels: &[bool],
    weights: (f64, f64),
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    indices: Vec<u32>,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let (w_off, w_on) = weighted_counts(&indices, labels, weights);
    let majority = w_on > w_off;
    let leaf = |nodes: &mut Vec<Node>| {
        nodes.push(Node::Leaf { on: majority });
        (nodes.len() - 1) as u32
    };
    if depth >= config.max_depth
        || indices.len() < 2 * config.min_leaf
        || w_off == 0.0
        || w_on == 0.0
    {
        return leaf(nodes);
    }
    let Some(split) = best_split(features, labels, weights, &indices, config.min_leaf, rng)
    else {
        return leaf(nodes);
    };
    // Only split when impurity strictly improves.
    if split.impurity >= gini(w_off, w_on) - 1e-12 {
        return leaf(nodes);
    }
    let (left_idx, right_idx): (Vec<u32>, Vec<u32>) = indices
        .into_iter()
        .partition(|&i| features.row(i as usize)[split.feature as usize] <= split.threshold);
    let my = nodes.len() as u32;
    nodes.push(Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let l = build_node(features, labels, weights, config, rng, left_idx, depth + 1, nodes);
    let r = build_node(features, labels, weights, config, rng, right_idx, depth + 1, nodes);
    if let Node::Split { left, right, .. } = &mut nodes[my as usize] {
        *left = l;
        *right = r;
    }
    my
}

fn train_tree(
    features: &FeatureMatrix,
    labels: &[bool],
    weights: (f64, f64),
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let n = labels.len();
    let indices: Vec<u32> = (0..n).map(|_| rng.gen_range(0..n) as u32).collect();
    let mut nodes = Vec::new();
    build_node(features, labels, weights, config, rng, indices, 0, &mut nodes);
    Tree { nodes }
}

/// Train one forest. `scope` keys the per-tree random streams so two
/// appliances trained from the same seed still draw independent randomness.
pub(crate) fn train_forest(
    features: &FeatureMatrix,
    labels: &[bool],
    config: &TrainConfig,
    seed: u64,
    scope: &str,
) -> ForestModel {
    let weights = class_weights(labels, config.balance_classes);
    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, scope, j as u64));
            train_tree(features, labels, weights, config, &mut rng)
        })
        .collect();
    ForestModel { trees }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMatrix;

    fn matrix_1d(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(1, values.to_vec())
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn test_config() -> TrainConfig {
        TrainConfig {
            n_trees: 15,
            max_depth: 8,
            min_leaf: 1,
            window_w: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn gini_matches_hand_computed_values() {
        assert_eq!(gini(2.0, 2.0), 0.5);
        assert_eq!(gini(4.0, 0.0), 0.0);
        assert_eq!(gini(0.0, 4.0), 0.0);
        // 1 on, 3 off: 1 - 0.75^2 - 0.25^2 = 0.375.
        assert!((gini(3.0, 1.0) - 0.375).abs() < 1e-15);
        assert_eq!(gini(0.0, 0.0), 0.0);
    }

    #[test]
    fn best_split_finds_clean_boundary() {
        let m = matrix_1d(&[1.0, 2.0, 3.0, 4.0]);
        let labels = [false, false, true, true];
        let split = best_split(&m, &labels, (1.0, 1.0), &[0, 1, 2, 3], 1, &mut rng(0)).unwrap();
        assert_eq!(split.feature, 0);
        assert_eq!(split.threshold, 2.5);
        assert_eq!(split.impurity, 0.0);
    }

    #[test]
    fn best_split_respects_min_leaf() {
        // Perfect boundary sits at 1|3, but min_leaf 2 forbids it; the best
        // legal split is the 2|2 cut.
        let m = matrix_1d(&[1.0, 2.0, 3.0, 4.0]);
        let labels = [false, true, true, true];
        let split = best_split(&m, &labels, (1.0, 1.0), &[0, 1, 2, 3], 2, &mut rng(0)).unwrap();
        assert_eq!(split.threshold, 2.5);
        // And with min_leaf 3 on 4 samples, no cut is legal at all.
        assert!(best_split(&m, &labels, (1.0, 1.0), &[0, 1, 2, 3], 3, &mut rng(0)).is_none());
    }

    #[test]
    fn best_split_never_cuts_between_equal_values() {
        let m = matrix_1d(&[5.0, 5.0, 5.0, 5.0]);
        let labels = [false, true, false, true];
        assert!(best_split(&m, &labels, (1.0, 1.0), &[0, 1, 2, 3], 1, &mut rng(0)).is_none());
    }

    #[test]
    fn split_impurity_matches_prefix_oracle() {
        // Brute-force oracle: enumerate every cut position directly.
        use rand::Rng as _;
        let mut r = rng(42);
        let values: Vec<f64> = (0..40).map(|_| r.gen_range(0.0..10.0f64).round()).collect();
        let labels: Vec<bool> = (0..40).map(|_| r.gen_bool(0.4)).collect();
        let m = matrix_1d(&values);
        let indices: Vec<u32> = (0..40).collect();
        let split = best_split(&m, &labels, (1.0, 1.0), &indices, 1, &mut rng(1));

        let mut pairs: Vec<(f64, bool)> =
            values.iter().copied().zip(labels.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best_oracle = f64::INFINITY;
        for cut in 1..pairs.len() {
            if pairs[cut - 1].0 == pairs[cut].0 {
                continue;
            }
            let (l, r_) = pairs.split_at(cut);
            let score = |side: &[(f64, bool)]| {
                let on = side.iter().filter(|(_, b)| *b).count() as f64;
                let off = side.len() as f64 - on;
                side.len() as f64 * gini(off, on)
            };
            let imp = (score(l) + score(r_)) / pairs.len() as f64;
            best_oracle = best_oracle.min(imp);
        }
        match split {
            Some(s) => assert!((s.impurity - best_oracle).abs() < 1e-12),
            None => assert!(best_oracle.is_infinite()),
        }
    }

    #[test]
    fn forest_fits_widely_separated_levels() {
        let values: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 0.0 } else { 1000.0 }).collect();
        let labels: Vec<bool> = values.iter().map(|&v| v > 500.0).collect();
        let m = matrix_1d(&values);
        let forest = train_forest(&m, &labels, &test_config(), 9, "A:x");
        for (i, &want) in labels.iter().enumerate() {
            assert_eq!(forest.predict_row(m.row(i)), want, "sample {i}");
        }
    }

    #[test]
    fn max_depth_is_respected() {
        use rand::Rng as _;
        let mut r = rng(7);
        // Random labels over random values force trees to grow as deep as
        // they are allowed to.
        let values: Vec<f64> = (0..500).map(|_| r.gen_range(0.0..1.0)).collect();
        let labels: Vec<bool> = (0..500).map(|_| r.gen_bool(0.5)).collect();
        let m = matrix_1d(&values);
        let config = TrainConfig {
            n_trees: 4,
            max_depth: 5,
            min_leaf: 1,
            ..TrainConfig::default()
        };
        let weights = (1.0, 1.0);
        for t in 0..4u64 {
            let mut tree_rng = rng(t);
            let tree = train_tree(&m, &labels, weights, &config, &mut tree_rng);
            assert!(tree.depth() <= 5, "tree depth {}", tree.depth());
            assert!(tree.depth() >= 3, "expected substantial growth");
        }
    }

    #[test]
    fn huge_min_leaf_forces_single_majority_leaf() {
        let values: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let labels: Vec<bool> = (0..30).map(|i| i < 10).collect();
        let m = matrix_1d(&values);
        let config = TrainConfig {
            n_trees: 1,
            min_leaf: 30,
            balance_classes: false,
            window_w: 1,
            ..TrainConfig::default()
        };
        let forest = train_forest(&m, &labels, &config, 1, "A:x");
        // Majority of every bootstrap is overwhelmingly OFF.
        for i in 0..30 {
            assert!(!forest.predict_row(m.row(i)));
        }
    }

    #[test]
    fn vote_tie_counts_as_off() {
        let leaf = |on| Tree {
            nodes: vec![Node::Leaf { on }],
        };
        let forest = ForestModel {
            trees: vec![leaf(true), leaf(false)],
        };
        assert!(!forest.predict_row(&[0.0]));
        let forest = ForestModel {
            trees: vec![leaf(true), leaf(true), leaf(false)],
        };
        assert!(forest.predict_row(&[0.0]));
        let forest = ForestModel {
            trees: vec![leaf(true), leaf(false), leaf(false)],
        };
        assert!(!forest.predict_row(&[0.0]));
    }

    #[test]
    fn same_stream_reproduces_tree_different_stream_varies() {
        use rand::Rng as _;
        let mut r = rng(3);
        let values: Vec<f64> = (0..300).map(|_| r.gen_range(0.0..100.0)).collect();
        let labels: Vec<bool> = values.iter().map(|&v| v > 50.0).collect();
        let m = matrix_1d(&values);
        let config = test_config();
        let weights = (1.0, 1.0);
        let tree_a = train_tree(&m, &labels, weights, &config, &mut rng(5));
        let tree_b = train_tree(&m, &labels, weights, &config, &mut rng(5));
        let tree_c = train_tree(&m, &labels, weights, &config, &mut rng(6));
        assert_eq!(tree_a, tree_b);
        assert_ne!(tree_a, tree_c, "different bootstrap must give a different tree");
    }
}
