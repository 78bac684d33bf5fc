//! Gradient-boosted regression trees with leaf-wise growth under squared loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::seeded_prefix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    /// Maximum leaves per tree.
    pub num_leaves: usize,
    /// `None` for unlimited depth.
    pub max_depth: Option<usize>,
    pub min_child_samples: usize,
    /// Minimum hessian sum per leaf; equals the row count under squared loss.
    pub min_child_weight: f64,
    /// Fraction of rows drawn per tree.
    pub subsample: f64,
    /// Fraction of features drawn per tree.
    pub colsample_bytree: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_estimators: 100,
            learning_rate: 0.1,
            num_leaves: 31,
            max_depth: None,
            min_child_samples: 20,
            min_child_weight: 1e-3,
            subsample: 1.0,
            colsample_bytree: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Configuration(format!("{name} must be in (0,1], got {v}")))
            }
        };
        frac("subsample", self.subsample)?;
        frac("colsample_bytree", self.colsample_bytree)?;
        if !(self.learning_rate > 0.0) {
            return Err(Error::Configuration(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.num_leaves < 2 || self.min_child_samples == 0 || self.max_depth == Some(0) {
            return Err(Error::Configuration(
                "num_leaves must be >= 2, min_child_samples >= 1 and max_depth >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub base: f64,
    pub trees: Vec<Tree>,
    pub params: GbtParams,
}

impl GbtModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

struct Leaf {
    node: usize,
    depth: usize,
    best: Option<Candidate>,
}

fn best_split<R: AsRef<[f64]>>(x: &[R], g: &[f64], rows: &[usize], features: &[usize], p: &GbtParams) -> Option<Candidate> {
    let n = rows.len();
    let min_child = p.min_child_samples.max(p.min_child_weight.ceil() as usize).max(1);
    if n < 2 * min_child {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| g[r]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x[a].as_ref()[f].total_cmp(&x[b].as_ref()[f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for k in 1..n {
            left_sum += g[sorted[k - 1]];
            if k < min_child || n - k < min_child {
                continue;
            }
            let (lo, hi) = (x[sorted[k - 1]].as_ref()[f], x[sorted[k]].as_ref()[f]);
            if lo >= hi {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64 - parent;
            if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                let mid = lo + (hi - lo) / 2.0;
                best = Some((gain, f, if mid < hi { mid } else { lo }));
            }
        }
    }
    best.map(|(gain, feature, threshold)| {
        let (left, right) = rows.iter().partition(|&&r| x[r].as_ref()[feature] <= threshold);
        Candidate {
            gain,
            feature,
            threshold,
            left,
            right,
        }
    })
}

fn grow_tree<R: AsRef<[f64]>>(
    x: &[R],
    g: &[f64],
    rows: Vec<usize>,
    features: &[usize],
    p: &GbtParams,
) -> Tree {
    let leaf_value = |rows: &[usize]| p.learning_rate * rows.iter().map(|&r| g[r]).sum::<f64>() / rows.len() as f64;
    let mut nodes = vec![TreeNode::Leaf { value: leaf_value(&rows) }];
    let best = best_split(x, g, &rows, features, p);
    let mut leaves = vec![Leaf {
        node: 0,
        depth: 0,
        best,
    }];
    let mut n_leaves = 1;
    while n_leaves < p.num_leaves {
        let pick = leaves
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.best.as_ref().map(|c| (i, c.gain)))
            .fold(None, |acc: Option<(usize, f64)>, (i, gain)| match acc {
                Some((_, g0)) if g0 >= gain => acc,
                _ => Some((i, gain)),
            });
        let Some((i, _)) = pick else { break };
        let leaf = leaves.swap_remove(i);
        let c = leaf.best.expect("picked leaf has a split");
        let depth = leaf.depth + 1;
        let (li, ri) = (nodes.len(), nodes.len() + 1);
        nodes.push(TreeNode::Leaf { value: leaf_value(&c.left) });
        nodes.push(TreeNode::Leaf { value: leaf_value(&c.right) });
        nodes[leaf.node] = TreeNode::Split {
            feature: c.feature,
            threshold: c.threshold,
            left: li,
            right: ri,
        };
        let can_split = p.max_depth.is_none_or(|d| depth < d);
        for (node, rows) in [(li, c.left), (ri, c.right)] {
            let best = if can_split { best_split(x, g, &rows, features, p) } else { None };
            leaves.push(Leaf { node, depth, best });
        }
        n_leaves += 1;
    }
    Tree { nodes }
}

fn draw(len: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let k = ((len as f64 * fraction).round() as usize).clamp(1, len);
    let mut v = seeded_prefix(len, k, seed);
    v.sort_unstable();
    v
}

pub fn fit_gbt<R: AsRef<[f64]>>(x: &[R], y: &[f64], params: &GbtParams, seed: u64) -> Result<GbtModel> {
    params.validate()?;
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidArgument(format!("{} rows but {} targets", x.len(), y.len())));
    }
    let p = x[0].as_ref().len();
    let base = y.iter().sum::<f64>() / y.len() as f64;
    let mut pred = vec![base; y.len()];
    let mut trees = Vec::with_capacity(params.n_estimators);
    for t in 0..params.n_estimators as u64 {
        let g: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let rows = draw(y.len(), params.subsample, seed.wrapping_add(t.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let features = draw(p, params.colsample_bytree, seed ^ t.wrapping_mul(0xBF58_476D_1CE4_E5B9).wrapping_add(1));
        let tree = grow_tree(x, &g, rows, &features, params);
        for (pr, row) in pred.iter_mut().zip(x) {
            *pr += tree.predict(row.as_ref());
        }
        trees.push(tree);
    }
    Ok(GbtModel {
        base,
        trees,
        params: params.clone(),
    })
}

/// Candidate values per hyperparameter; an empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtGrid {
    pub num_leaves: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_child_samples: Vec<usize>,
    pub min_child_weight: Vec<f64>,
    pub subsample: Vec<f64>,
    pub colsample_bytree: Vec<f64>,
}

impl GbtGrid {
    /// Every combination, in lexicographic order of the fields above.
    pub fn candidates(&self, base: &GbtParams) -> Vec<GbtParams> {
        fn or<T: Clone>(v: &[T], d: T) -> Vec<T> {
            if v.is_empty() {
                vec![d]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for nl in or(&self.num_leaves, base.num_leaves) {
            for md in or(&self.max_depth, base.max_depth) {
                for mcs in or(&self.min_child_samples, base.min_child_samples) {
                    for mcw in or(&self.min_child_weight, base.min_child_weight) {
                        for ss in or(&self.subsample, base.subsample) {
                            for cs in or(&self.colsample_bytree, base.colsample_bytree) {
                                out.push(GbtParams {
                                    num_leaves: nl,
                                    max_depth: md,
                                    min_child_samples: mcs,
                                    min_child_weight: mcw,
                                    subsample: ss,
                                    colsample_bytree: cs,
                                    ..base.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// K-fold cross-validated grid search; returns the candidate with the lowest
/// mean validation MSE (earliest on ties) and that score.
pub fn cross_validate<R: AsRef<[f64]>>(
    x: &[R],
    y: &[f64],
    base: &GbtParams,
    grid: &GbtGrid,
    folds: usize,
    seed: u64,
) -> Result<(GbtParams, f64)> {
    let n = y.len();
    let k = folds.min(n);
    if k < 2 {
        return Err(Error::InvalidArgument(format!("cross-validation needs at least 2 rows and folds, got {n} rows")));
    }
    let order = seeded_prefix(n, n, seed);
    let mut fold_of = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_of[row] = pos % k;
    }
    let mut best: Option<(GbtParams, f64)> = None;
    for cand in grid.candidates(base) {
        cand.validate()?;
        let mut sse = 0.0;
        for f in 0..k {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] != f);
            let xt: Vec<&[f64]> = train.iter().map(|&i| x[i].as_ref()).collect();
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let m = fit_gbt(&xt, &yt, &cand, seed)?;
            sse += test.iter().map(|&i| (m.predict(x[i].as_ref()) - y[i]).powi(2)).sum::<f64>();
        }
        let mse = sse / n as f64;
        if best.as_ref().is_none_or(|b| mse < b.1) {
            best = Some((cand, mse));
        }
    }
    Ok(best.expect("grid yields at least one candidate"))
}
