//! Bagged CART regression trees.

use nalgebra::DMatrix;
use rand::Rng;

use crate::rng::{stream_rng, DOMAIN_TREES};

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// Grows a tree on the rows in `order[f]`, which lists the node's samples
/// sorted by feature `f` for every feature.
fn grow(x: &DMatrix<f64>, y: &[f64], order: Vec<Vec<usize>>, depth: usize, p: TreeParams) -> Node {
    let idx = &order[0];
    let m = idx.len();
    let n = m as f64;
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let leaf = Node::Leaf(total / n);
    if depth >= p.max_depth || m < 2 * p.min_samples_leaf {
        return leaf;
    }
    let total_sq: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
    let parent_sse = total_sq - total * total / n;
    if parent_sse <= 1e-12 * total_sq.max(1.0) {
        return leaf;
    }

    let mut best: Option<(f64, usize, f64)> = None;
    for (f, sorted) in order.iter().enumerate() {
        let col = x.column(f);
        let (mut ls, mut lsq) = (0.0, 0.0);
        for k in 0..m - 1 {
            let v = y[sorted[k]];
            ls += v;
            lsq += v * v;
            if k + 1 < p.min_samples_leaf || m - k - 1 < p.min_samples_leaf {
                continue;
            }
            let (xa, xb) = (col[sorted[k]], col[sorted[k + 1]]);
            if xa == xb {
                continue;
            }
            let nl = (k + 1) as f64;
            let rs = total - ls;
            let rsq = total_sq - lsq;
            let sse = (lsq - ls * ls / nl) + (rsq - rs * rs / (n - nl));
            if best.is_none_or(|(b, _, _)| sse < b) {
                best = Some((sse, f, 0.5 * (xa + xb)));
            }
        }
    }
    match best {
        Some((sse, feature, threshold)) if sse < parent_sse => {
            let col = x.column(feature);
            let (l, r): (Vec<Vec<usize>>, Vec<Vec<usize>>) = order
                .into_iter()
                .map(|o| o.into_iter().partition(|&i| col[i] <= threshold))
                .unzip();
            Node::Split {
                feature,
                threshold,
                left: Box::new(grow(x, y, l, depth + 1, p)),
                right: Box::new(grow(x, y, r, depth + 1, p)),
            }
        }
        _ => leaf,
    }
}

fn presorted(x: &DMatrix<f64>, y: &[f64], idx: &[usize]) -> Vec<Vec<usize>> {
    (0..x.ncols())
        .map(|f| {
            let col = x.column(f);
            let mut o = idx.to_vec();
            o.sort_unstable_by(|&a, &b| col[a].total_cmp(&col[b]).then(y[a].total_cmp(&y[b])));
            o
        })
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct BaggedTrees {
    trees: Vec<Node>,
}

impl BaggedTrees {
    /// Tree `t` draws its bootstrap sample from its own stream of `seed`.
    pub fn fit(x: &DMatrix<f64>, y: &[f64], n_trees: usize, p: TreeParams, seed: u64) -> Self {
        let n = y.len();
        let trees = (0..n_trees)
            .map(|t| {
                let mut rng = stream_rng(seed, DOMAIN_TREES, t as u64);
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                grow(x, y, presorted(x, y, &idx), 0, p)
            })
            .collect();
        Self { trees }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}
