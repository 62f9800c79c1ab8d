//! CART regression tree grown by exhaustive variance-reduction search.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Node of a regression tree, stored in a flat arena with the root at
/// index 0. Child links are arena indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Variance reduction of this split weighted by the node's sample
        /// fraction: (sse_parent - sse_left - sse_right) / n_training.
        impurity_decrease: f64,
    },
    Leaf {
        /// Mean of the training targets reaching this leaf.
        value: f64,
        n_samples: usize,
    },
}

/// A fitted regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
}

// Node impurity below this is treated as pure; it absorbs the float noise
// of the sum-of-squares formula on constant targets.
const PURITY_EPS: f64 = 1e-12;

impl RegressionTree {
    /// Grow a tree on the rows selected by `sample_indices` (duplicates
    /// allowed, as produced by bootstrap resampling).
    ///
    /// Splits maximize variance reduction over the considered features and
    /// all candidate thresholds (midpoints between consecutive distinct
    /// values). Ties go to the lowest feature index, then the lowest
    /// threshold, which makes growth fully deterministic. A node becomes a
    /// leaf when it is pure, has fewer than 2 samples, reaches `max_depth`,
    /// or no split reduces variance.
    ///
    /// `features_per_split < dim` samples a fresh feature subset per node
    /// from `rng`; with all features considered the RNG is never touched.
    pub fn fit(
        features: &[Vec<f64>],
        targets: &[f64],
        sample_indices: &[usize],
        dim: usize,
        max_depth: Option<usize>,
        features_per_split: usize,
        rng: &mut ChaCha8Rng,
    ) -> RegressionTree {
        let mut builder = TreeBuilder {
            features,
            targets,
            dim,
            n_training: sample_indices.len(),
            max_depth,
            features_per_split,
            rng,
            nodes: Vec::new(),
        };
        let root = sample_indices.to_vec();
        builder.grow(root, 0);
        RegressionTree {
            nodes: builder.nodes,
        }
    }

    /// Value of the leaf the input falls into.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Per-feature sums of weighted impurity decreases over all split nodes.
    pub fn importance_sums(&self, dim: usize) -> Vec<f64> {
        let mut sums = vec![0.0; dim];
        for node in &self.nodes {
            if let TreeNode::Split {
                feature,
                impurity_decrease,
                ..
            } = node
            {
                sums[*feature] += impurity_decrease;
            }
        }
        sums
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    targets: &'a [f64],
    dim: usize,
    n_training: usize,
    max_depth: Option<usize>,
    features_per_split: usize,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse_reduction: f64,
}

impl TreeBuilder<'_> {
    /// Returns the arena index of the subtree grown for `indices`.
    fn grow(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let n = indices.len();
        let sum: f64 = indices.iter().map(|&i| self.targets[i]).sum();
        let sum_sq: f64 = indices.iter().map(|&i| self.targets[i] * self.targets[i]).sum();
        let sse = (sum_sq - sum * sum / n as f64).max(0.0);
        let mean = sum / n as f64;

        let depth_reached = self.max_depth.is_some_and(|d| depth >= d);
        if n < 2 || sse <= PURITY_EPS || depth_reached {
            return self.push_leaf(mean, n);
        }

        let best = match self.best_split(&indices, sum, sum_sq, sse) {
            Some(b) => b,
            None => return self.push_leaf(mean, n),
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.features[i][best.feature] <= best.threshold);

        // reserve the split slot so children land after their parent
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: mean,
            n_samples: n,
        });
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            n_samples: n,
            impurity_decrease: best.sse_reduction / self.n_training as f64,
        };
        at
    }

    fn push_leaf(&mut self, value: f64, n_samples: usize) -> usize {
        self.nodes.push(TreeNode::Leaf { value, n_samples });
        self.nodes.len() - 1
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        if self.features_per_split >= self.dim {
            return (0..self.dim).collect();
        }
        // partial Fisher-Yates, then ascending order so the lowest-index
        // tie-break rule applies within the subset too
        let mut pool: Vec<usize> = (0..self.dim).collect();
        for i in 0..self.features_per_split {
            let j = self.rng.random_range(i..pool.len());
            pool.swap(i, j);
        }
        let mut chosen = pool[..self.features_per_split].to_vec();
        chosen.sort_unstable();
        chosen
    }

    fn best_split(
        &mut self,
        indices: &[usize],
        sum: f64,
        sum_sq: f64,
        sse: f64,
    ) -> Option<BestSplit> {
        let n = indices.len();
        let mut best: Option<BestSplit> = None;
        let mut column: Vec<(f64, f64)> = Vec::with_capacity(n);

        for feature in self.candidate_features() {
            column.clear();
            column.extend(
                indices
                    .iter()
                    .map(|&i| (self.features[i][feature], self.targets[i])),
            );
            column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if column[0].0 == column[n - 1].0 {
                continue; // constant feature in this node
            }

            let mut left_sum = 0.0;
            let mut left_sum_sq = 0.0;
            for i in 0..n - 1 {
                let (value, target) = column[i];
                left_sum += target;
                left_sum_sq += target * target;
                if value == column[i + 1].0 {
                    continue;
                }
                let n_left = (i + 1) as f64;
                let n_right = (n - i - 1) as f64;
                let right_sum = sum - left_sum;
                let right_sum_sq = sum_sq - left_sum_sq;
                let sse_left = (left_sum_sq - left_sum * left_sum / n_left).max(0.0);
                let sse_right = (right_sum_sq - right_sum * right_sum / n_right).max(0.0);
                let reduction = sse - sse_left - sse_right;
                if reduction > 0.0
                    && best.as_ref().is_none_or(|b| reduction > b.sse_reduction)
                {
                    best = Some(BestSplit {
                        feature,
                        threshold: (value + column[i + 1].0) / 2.0,
                        sse_reduction: reduction,
                    });
                }
            }
        }
        best
    }
}
