//! CART-style regression tree with variance-reduction splitting.
//!
//! Splits greedily on the (feature, threshold) pair with the largest
//! sum-of-squared-error reduction; candidate thresholds are midpoints
//! between consecutive distinct sorted feature values. Leaves predict the
//! mean of their training targets.

use serde::{Deserialize, Serialize};

use super::RecommenderError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Minimum per-node variance reduction (SSE gain divided by node size)
    /// required to keep a split.
    pub min_variance_reduction: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_samples_leaf: 3,
            min_variance_reduction: 1e-7,
        }
    }
}

impl Hyperparameters {
    fn validate(&self) -> Result<(), RecommenderError> {
        if self.max_depth < 1 || self.min_samples_leaf < 1 || self.min_variance_reduction < 0.0 {
            return Err(RecommenderError::InvalidHyperparameters(format!(
                "max_depth >= 1, min_samples_leaf >= 1, min_variance_reduction >= 0 required, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    n_features: usize,
    nodes: Vec<TreeNode>,
    hyperparameters: Hyperparameters,
}

impl RegressionTree {
    /// Fits a tree on `rows` (n x l) against `targets` (length n).
    ///
    /// Deterministic for identical inputs: equal-gain split candidates are
    /// broken by lowest feature index, then lowest threshold. The seed is
    /// stored for provenance and reserved for sampling extensions; the
    /// exhaustive splitter does not consume it.
    pub fn train(
        rows: &[Vec<f64>],
        targets: &[f64],
        hyperparameters: Hyperparameters,
        _seed: u64,
    ) -> Result<Self, RecommenderError> {
        hyperparameters.validate()?;
        if rows.is_empty() {
            return Err(RecommenderError::EmptyTrainingSet);
        }
        let n_features = rows[0].len();
        if targets.len() != rows.len() {
            return Err(RecommenderError::InvalidHyperparameters(format!(
                "targets length {} does not match row count {}",
                targets.len(),
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(RecommenderError::DimensionMismatch {
                    expected: n_features,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) || !targets[i].is_finite() {
                return Err(RecommenderError::InvalidHyperparameters(format!(
                    "row {i} contains a non-finite value"
                )));
            }
        }

        let mut tree = Self {
            n_features,
            nodes: Vec::new(),
            hyperparameters,
        };
        let indices: Vec<usize> = (0..rows.len()).collect();
        tree.grow(rows, targets, indices, 0);
        Ok(tree)
    }

    fn grow(&mut self, rows: &[Vec<f64>], targets: &[f64], indices: Vec<usize>, depth: usize) -> usize {
        let mean = indices.iter().map(|&i| targets[i]).sum::<f64>() / indices.len() as f64;

        let can_split = depth < self.hyperparameters.max_depth
            && indices.len() >= 2 * self.hyperparameters.min_samples_leaf;
        let split = if can_split {
            self.best_split(rows, targets, &indices)
        } else {
            None
        };

        match split {
            Some((feature, threshold)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                    indices.iter().partition(|&&i| rows[i][feature] <= threshold);
                let slot = self.nodes.len();
                self.nodes.push(TreeNode::Leaf { value: mean, samples: indices.len() }); // placeholder
                let left = self.grow(rows, targets, left_idx, depth + 1);
                let right = self.grow(rows, targets, right_idx, depth + 1);
                self.nodes[slot] = TreeNode::Split { feature, threshold, left, right };
                slot
            }
            None => {
                self.nodes.push(TreeNode::Leaf { value: mean, samples: indices.len() });
                self.nodes.len() - 1
            }
        }
    }

    /// Best (feature, threshold) by SSE reduction, or None when every split
    /// is degenerate or the variance reduction falls below the floor.
    fn best_split(&self, rows: &[Vec<f64>], targets: &[f64], indices: &[usize]) -> Option<(usize, f64)> {
        let n = indices.len() as f64;
        let total_sum: f64 = indices.iter().map(|&i| targets[i]).sum();
        let total_sq: f64 = indices.iter().map(|&i| targets[i] * targets[i]).sum();
        let total_sse = total_sq - total_sum * total_sum / n;

        let min_leaf = self.hyperparameters.min_samples_leaf;
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)

        for feature in 0..self.n_features {
            let mut sorted: Vec<usize> = indices.to_vec();
            sorted.sort_by(|&a, &b| rows[a][feature].partial_cmp(&rows[b][feature]).unwrap());

            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for pos in 0..sorted.len() - 1 {
                let y = targets[sorted[pos]];
                left_sum += y;
                left_sq += y * y;

                let here = rows[sorted[pos]][feature];
                let next = rows[sorted[pos + 1]][feature];
                if here == next {
                    continue;
                }
                let left_n = (pos + 1) as f64;
                let right_n = n - left_n;
                if (pos + 1) < min_leaf || (sorted.len() - pos - 1) < min_leaf {
                    continue;
                }
                let threshold = here + (next - here) / 2.0;
                if threshold <= here || threshold > next {
                    continue; // midpoint collapsed by rounding
                }
                let right_sum = total_sum - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / left_n)
                    + (right_sq - right_sum * right_sum / right_n);
                let gain = total_sse - sse;
                let better = match best {
                    None => true,
                    Some((bg, bf, bt)) => {
                        gain > bg || (gain == bg && (feature, threshold) < (bf, bt))
                    }
                };
                if better {
                    best = Some((gain, feature, threshold));
                }
            }
        }

        best.and_then(|(gain, feature, threshold)| {
            if gain / n >= self.hyperparameters.min_variance_reduction && gain > 0.0 {
                Some((feature, threshold))
            } else {
                None
            }
        })
    }

    /// Value of the unique leaf the vector reaches.
    pub fn predict(&self, features: &[f64]) -> Result<f64, RecommenderError> {
        if features.len() != self.n_features {
            return Err(RecommenderError::DimensionMismatch {
                expected: self.n_features,
                actual: features.len(),
            });
        }
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { value, .. } => return Ok(*value),
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if features[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyperparameters
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn depth_of(nodes: &[TreeNode], idx: usize) -> usize {
            match &nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + depth_of(nodes, *left).max(depth_of(nodes, *right))
                }
            }
        }
        depth_of(&self.nodes, 0)
    }

    /// Mean squared prediction error over a dataset.
    pub fn mse(&self, rows: &[Vec<f64>], targets: &[f64]) -> Result<f64, RecommenderError> {
        let mut sum = 0.0;
        for (row, &y) in rows.iter().zip(targets) {
            let err = self.predict(row)? - y;
            sum += err * err;
        }
        Ok(sum / rows.len() as f64)
    }

}
