//! Bagged CART trees with Gini impurity.
//!
//! Each tree draws a bootstrap sample and considers sqrt(d) features per
//! split; per-tree seeds are derived from the master seed via a counter
//! so parallel and serial training produce identical forests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            n_trees: 100,
            max_depth: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        prob_abnormal: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone)]
pub struct DecisionTree {
    root: Node,
}

impl DecisionTree {
    /// Grow a CART tree on the given sample indices.
    fn grow(
        ds: &Dataset,
        indices: &[usize],
        max_depth: Option<usize>,
        features_per_split: usize,
        rng: &mut ChaCha8Rng,
    ) -> DecisionTree {
        DecisionTree {
            root: build_node(ds, indices, 0, max_depth, features_per_split, rng),
        }
    }

    pub fn prob_abnormal(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { prob_abnormal } => return *prob_abnormal,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

fn gini(counts: (usize, usize)) -> f64 {
    let total = (counts.0 + counts.1) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let p0 = counts.0 as f64 / total;
    let p1 = counts.1 as f64 / total;
    1.0 - p0 * p0 - p1 * p1
}

fn build_node(
    ds: &Dataset,
    indices: &[usize],
    depth: usize,
    max_depth: Option<usize>,
    features_per_split: usize,
    rng: &mut ChaCha8Rng,
) -> Node {
    let n = indices.len();
    let ones = indices.iter().filter(|&&i| ds.y[i] == 1).count();
    let prob = ones as f64 / n as f64;
    let pure = ones == 0 || ones == n;
    let depth_capped = max_depth.is_some_and(|d| depth >= d);
    if pure || depth_capped || n < 2 {
        return Node::Leaf { prob_abnormal: prob };
    }

    // Random feature subset without replacement.
    let d = ds.dims();
    let mut features: Vec<usize> = (0..d).collect();
    for i in 0..features_per_split.min(d) {
        let j = rng.gen_range(i..d);
        features.swap(i, j);
    }
    features.truncate(features_per_split.min(d));

    let parent_impurity = gini((n - ones, ones));
    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    for &f in &features {
        let mut vals: Vec<(f64, u8)> = indices.iter().map(|&i| (ds.x[(i, f)], ds.y[i])).collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total_ones = ones;
        let mut left_n = 0usize;
        let mut left_ones = 0usize;
        for w in 0..(n - 1) {
            left_n += 1;
            left_ones += vals[w].1 as usize;
            if vals[w].0 == vals[w + 1].0 {
                continue;
            }
            let right_n = n - left_n;
            let right_ones = total_ones - left_ones;
            let weighted = (left_n as f64 / n as f64) * gini((left_n - left_ones, left_ones))
                + (right_n as f64 / n as f64) * gini((right_n - right_ones, right_ones));
            let gain = parent_impurity - weighted;
            let threshold = 0.5 * (vals[w].0 + vals[w + 1].0);
            if best.map_or(gain > 1e-15, |(bg, _, _)| gain > bg + 1e-15) {
                best = Some((gain, f, threshold));
            }
        }
    }

    match best {
        None => Node::Leaf { prob_abnormal: prob },
        Some((_, feature, threshold)) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                .iter()
                .partition(|&&i| ds.x[(i, feature)] <= threshold);
            if left_idx.is_empty() || right_idx.is_empty() {
                return Node::Leaf { prob_abnormal: prob };
            }
            let left = build_node(ds, &left_idx, depth + 1, max_depth, features_per_split, rng);
            let right = build_node(ds, &right_idx, depth + 1, max_depth, features_per_split, rng);
            Node::Split {
                feature,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Fraction of trees voting abnormal; this is the model's
    /// class-probability score.
    pub fn vote_fraction(&self, row: &[f64]) -> f64 {
        let votes = self
            .trees
            .iter()
            .filter(|t| t.prob_abnormal(row) >= 0.5)
            .count();
        votes as f64 / self.trees.len() as f64
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        u8::from(self.vote_fraction(row) >= 0.5)
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

pub fn train_random_forest(ds: &Dataset, cfg: &RfConfig) -> Result<RandomForest> {
    if cfg.n_trees == 0 {
        return Err(Error::ClassifierConfig("n_trees must be >= 1".into()));
    }
    let n = ds.len();
    let d = ds.dims();
    let features_per_split = ((d as f64).sqrt().floor() as usize).max(1);

    let mut trees = Vec::with_capacity(cfg.n_trees);
    for tree_idx in 0..cfg.n_trees {
        // Counter-derived per-tree seed.
        let tree_seed = cfg
            .seed
            .wrapping_add((tree_idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
        let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        trees.push(DecisionTree::grow(
            ds,
            &indices,
            cfg.max_depth,
            features_per_split,
            &mut rng,
        ));
    }
    Ok(RandomForest { trees })
}
