//! Variance-reduction regression tree.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Tree parameters resolved against a concrete dataset.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
}

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
        n_samples: usize,
    },
}

/// Binary tree stored as a flat node arena; node 0 is the root.
/// Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Grows a tree on the rows listed in `sample` (duplicates allowed).
    pub(crate) fn fit<R: Rng>(
        features: &[Vec<f64>],
        target: &[f64],
        sample: Vec<usize>,
        params: TreeParams,
        rng: &mut R,
    ) -> Self {
        let n_features = features.first().map_or(0, Vec::len);
        let mut builder = Builder {
            features,
            target,
            params,
            n_features,
            nodes: Vec::new(),
        };
        builder.grow(sample, 0, rng);
        RegressionTree {
            nodes: builder.nodes,
            n_features,
        }
    }
}

struct Builder<'a> {
    features: &'a [Vec<f64>],
    target: &'a [f64],
    params: TreeParams,
    n_features: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse: f64,
}

fn sse(sum: f64, sum_sq: f64, n: usize) -> f64 {
    (sum_sq - sum * sum / n as f64).max(0.0)
}

impl Builder<'_> {
    fn grow<R: Rng>(&mut self, rows: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.target[r]).sum();
        let mean = sum / n as f64;
        self.nodes.push(Node::Leaf {
            value: mean,
            n_samples: n,
        });

        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf {
            return id;
        }
        let parent_sse: f64 = rows.iter().map(|&r| (self.target[r] - mean).powi(2)).sum();
        if parent_sse <= 0.0 {
            return id;
        }

        let Some(best) = self.best_split(&rows, rng) else {
            return id;
        };
        // Only accept splits that reduce squared error beyond rounding noise.
        if best.sse >= parent_sse * (1.0 - 1e-10) {
            return id;
        }

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.features[r][best.feature] <= best.threshold);
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Exhaustive search over midpoints of distinct sorted values of a random
    /// feature subset. Ties go to the lower feature index, then lower threshold.
    fn best_split<R: Rng>(&self, rows: &[usize], rng: &mut R) -> Option<BestSplit> {
        let k = self.params.features_per_split.min(self.n_features);
        let mut candidates = index::sample(rng, self.n_features, k).into_vec();
        candidates.sort_unstable();

        let min_leaf = self.params.min_samples_leaf;
        let n = rows.len();
        let total_sum: f64 = rows.iter().map(|&r| self.target[r]).sum();
        let total_sq: f64 = rows.iter().map(|&r| self.target[r].powi(2)).sum();

        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
        for feature in candidates {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.features[r][feature], self.target[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

            let (mut left_sum, mut left_sq) = (0.0, 0.0);
            for i in 0..n - 1 {
                let (x, y) = sorted[i];
                left_sum += y;
                left_sq += y * y;
                let next = sorted[i + 1].0;
                let n_left = i + 1;
                if x == next || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let candidate = sse(left_sum, left_sq, n_left)
                    + sse(total_sum - left_sum, total_sq - left_sq, n - n_left);
                let better = best.as_ref().is_none_or(|b| candidate < b.sse);
                if better {
                    let mut threshold = 0.5 * (x + next);
                    if threshold >= next {
                        threshold = x;
                    }
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        sse: candidate,
                    });
                }
            }
        }
        best
    }
}
