use rand::seq::index;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::{par, seed};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub instance_fraction: f64,
    pub feature_fraction: f64,
    pub min_leaf_size: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 50,
            instance_fraction: 0.30,
            feature_fraction: 0.50,
            min_leaf_size: 2,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if self.n_trees == 0 || self.min_leaf_size == 0 {
            return Err(Error::Config("n_trees and min_leaf_size must be >= 1".into()));
        }
        if !frac_ok(self.instance_fraction) || !frac_ok(self.feature_fraction) {
            return Err(Error::Config("forest fractions must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// `⌈fraction · n⌉`, at least 1 and at most `n`.
fn fraction_of(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf(f64),
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    /// Features this tree was allowed to split on.
    pub features: Vec<usize>,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf(v) => return v,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Split { feature, .. } => Some(*feature),
            TreeNode::Leaf(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    pub n_features: usize,
}

impl ForestModel {
    pub fn from_trees(trees: Vec<RegressionTree>, n_features: usize) -> Self {
        ForestModel { trees, n_features }
    }
}

/// A candidate split and the summed squared error of its two children.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub sse: f64,
}

/// Best variance-reducing split of `rows` over `features`.
///
/// Thresholds are midpoints between consecutive distinct values; both children
/// must keep at least `min_leaf` rows. Ties keep the earliest feature (in
/// `features` order) and the lowest threshold.
pub fn best_split(data: &Dataset, rows: &[usize], features: &[usize], min_leaf: usize) -> Option<Split> {
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let ys = data.targets();
    let mean = rows.iter().map(|&i| ys[i]).sum::<f64>() / n as f64;
    let mut best: Option<Split> = None;
    let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in features {
        order.clear();
        order.extend(rows.iter().map(|&i| (data.row(i)[f], ys[i] - mean)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = order.iter().map(|o| o.1).sum();
        let total_sq: f64 = order.iter().map(|o| o.1 * o.1).sum();
        let (mut sum_l, mut sq_l) = (0.0, 0.0);
        for k in 1..n {
            let y = order[k - 1].1;
            sum_l += y;
            sq_l += y * y;
            if k < min_leaf || n - k < min_leaf || order[k - 1].0 == order[k].0 {
                continue;
            }
            let (nl, nr) = (k as f64, (n - k) as f64);
            let sum_r = total - sum_l;
            let sse = (sq_l - sum_l * sum_l / nl) + ((total_sq - sq_l) - sum_r * sum_r / nr);
            if best.map_or(true, |b| sse < b.sse) {
                best = Some(Split {
                    feature: f,
                    threshold: 0.5 * (order[k - 1].0 + order[k].0),
                    sse,
                });
            }
        }
    }
    best
}

/// Grow one tree on `rows`, splitting only on `features`, until nodes are
/// pure or too small to split.
pub fn fit_tree(data: &Dataset, rows: &[usize], features: &[usize], min_leaf: usize) -> RegressionTree {
    let ys = data.targets();
    let mut nodes = vec![TreeNode::Leaf(0.0)];
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, rows.to_vec())];
    while let Some((id, members)) = stack.pop() {
        let mean = members.iter().map(|&i| ys[i]).sum::<f64>() / members.len() as f64;
        let pure = members.iter().all(|&i| ys[i] == ys[members[0]]);
        let split = if pure {
            None
        } else {
            best_split(data, &members, features, min_leaf)
        };
        match split {
            None => nodes[id] = TreeNode::Leaf(mean),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    members.iter().partition(|&&i| data.row(i)[s.feature] <= s.threshold);
                let left = nodes.len();
                nodes.push(TreeNode::Leaf(0.0));
                nodes.push(TreeNode::Leaf(0.0));
                nodes[id] = TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right: left + 1,
                };
                stack.push((left + 1, r));
                stack.push((left, l));
            }
        }
    }
    RegressionTree {
        nodes,
        features: features.to_vec(),
    }
}

/// Train `n_trees` trees, each on its own sample of rows and features
/// (both without replacement). Tree `t` draws from a seed derived from
/// `(config.seed, t)`, so the forest does not depend on thread count.
pub fn fit_forest(train: &Dataset, config: &ForestConfig) -> Result<ForestModel> {
    config.validate()?;
    let n = train.n_rows();
    let p = train.n_features();
    let n_rows = fraction_of(config.instance_fraction, n);
    let n_feats = if p == 0 { 0 } else { fraction_of(config.feature_fraction, p) };
    let trees = par::map_range(config.n_trees, |t| {
        let mut rng = seed::rng(seed::derive(config.seed, &[t as u64]));
        let rows = index::sample(&mut rng, n, n_rows).into_vec();
        let mut feats = if p == 0 {
            Vec::new()
        } else {
            index::sample(&mut rng, p, n_feats).into_vec()
        };
        feats.sort_unstable();
        fit_tree(train, &rows, &feats, config.min_leaf_size)
    });
    Ok(ForestModel::from_trees(trees, p))
}

/// Mean of the tree outputs for every row.
pub fn predict_forest(model: &ForestModel, data: &Dataset) -> Result<Vec<f64>> {
    if data.n_features() != model.n_features {
        return Err(Error::ShapeMismatch {
            expected: model.n_features,
            found: data.n_features(),
        });
    }
    let k = model.trees.len() as f64;
    Ok(data
        .rows()
        .map(|r| model.trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / k)
        .collect())
}
