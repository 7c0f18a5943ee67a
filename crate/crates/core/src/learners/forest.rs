//! Bagged CART regression forest.
//!
//! Each tree is grown on a bootstrap resample with variance-reduction
//! splits over a random subset of `mtry` features per node. Tree `t`
//! draws from its own ChaCha stream `(seed, t)`, so a forest is a pure
//! function of its training rows and seed.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    #[serde(default = "ForestConfig::default_trees")]
    pub trees: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "ForestConfig::default_min_leaf")]
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(p / 3)`.
    #[serde(default)]
    pub mtry: Option<usize>,
}

impl ForestConfig {
    fn default_trees() -> usize {
        1000
    }
    fn default_min_leaf() -> usize {
        5
    }
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { trees: Self::default_trees(), max_depth: None, min_leaf: Self::default_min_leaf(), mtry: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    min_leaf: usize,
    max_depth: usize,
    mtry: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        self.nodes.len() - 1
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = idx.len();
        let first = self.y[idx[0]];
        let pure = idx.iter().all(|&i| self.y[i] == first);
        if pure || n < 2 * self.min_leaf || depth >= self.max_depth {
            return self.leaf(idx);
        }

        let p = self.x.cols();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let parent_score = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for feature in sample(rng, p, self.mtry.min(p)).into_iter() {
            order.sort_by(|&a, &b| self.x.get(a, feature).total_cmp(&self.x.get(b, feature)).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.y[order[k]];
                let nl = k + 1;
                let nr = n - nl;
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let (lo, hi) = (self.x.get(order[k], feature), self.x.get(order[k + 1], feature));
                if lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64;
                if score > parent_score + 1e-12 * parent_score.abs().max(1e-300) && best.is_none_or(|b| score > b.0) {
                    best = Some((score, feature, 0.5 * (lo + hi)));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return self.leaf(idx);
        };
        let mut split = 0;
        for k in 0..n {
            if self.x.get(idx[k], feature) <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(f64::NAN));
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }
}

pub fn fit_forest(x: &Matrix, y: &[f64], config: &ForestConfig, seed: u64) -> Forest {
    assert_eq!(x.rows(), y.len());
    assert!(y.len() >= 2, "forest needs at least two rows");
    let n = y.len();
    let mtry = config.mtry.unwrap_or_else(|| x.cols().div_ceil(3)).max(1);
    let trees = (0..config.trees.max(1))
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut g = Grower {
                x,
                y,
                min_leaf: config.min_leaf.max(1),
                max_depth: config.max_depth.unwrap_or(usize::MAX),
                mtry,
                nodes: Vec::new(),
            };
            g.grow(&mut idx, 0, &mut rng);
            Tree { nodes: g.nodes }
        })
        .collect();
    Forest { trees }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn toy(seed: u64, n: usize) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = rows.iter().map(|r| r[0] * r[1] + r[2].sin() + rng.random_range(-0.1..0.1)).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn constant_target() {
        let (x, _) = toy(1, 40);
        let f = fit_forest(&x, &[1.75; 40], &ForestConfig { trees: 20, ..Default::default() }, 3);
        for i in 0..40 {
            assert_eq!(f.predict(x.row(i)), 1.75);
        }
    }

    #[test]
    fn single_stump_recovers_group_means() {
        // each bootstrap leaf holds a single target level, so predictions equal the group means
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(i >= 10)]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i >= 10 { 3.0 } else { -1.0 }).collect();
        let cfg = ForestConfig { trees: 1, max_depth: Some(1), min_leaf: 1, mtry: Some(1) };
        let f = fit_forest(&Matrix::from_rows(&rows), &y, &cfg, 0);
        assert_eq!(f.trees()[0].n_leaves(), 2);
        assert_eq!(f.predict(&[0.0]), -1.0);
        assert_eq!(f.predict(&[1.0]), 3.0);
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = toy(2, 60);
        let cfg = ForestConfig { trees: 30, ..Default::default() };
        assert_eq!(fit_forest(&x, &y, &cfg, 5), fit_forest(&x, &y, &cfg, 5));
        assert_ne!(fit_forest(&x, &y, &cfg, 5), fit_forest(&x, &y, &cfg, 6));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn predictions_within_target_range(seed in any::<u64>(), probe in proptest::collection::vec(-2.0f64..2.0, 3)) {
            let (x, y) = toy(seed, 50);
            let f = fit_forest(&x, &y, &ForestConfig { trees: 25, ..Default::default() }, seed);
            let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pred = f.predict(&probe);
            prop_assert!(pred >= lo - 1e-12 && pred <= hi + 1e-12);
        }
    }
}
