//! Least-squares regression trees.
//!
//! Rows are presorted once per feature; every tree in an ensemble reuses the
//! orderings and keeps them partitioned as it splits, so a split search is a
//! single linear scan per candidate feature. Row weights are integer
//! multiplicities (bootstrap counts); a weight of zero removes the row.

use rand_pcg::Pcg64;

use super::rng::sample_without_replacement;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    /// Minimum total weight on each side of a split.
    pub min_samples_leaf: usize,
    /// Features drawn per split; `None` or a count at least the feature
    /// count means every feature, in index order, with no random draws.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
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
    nodes: Vec<Node>,
    n_features: usize,
}

impl RegressionTree {
    /// Builds a tree from a node list, checking that it is a proper binary
    /// tree rooted at node 0 with every node reachable exactly once.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self, String> {
        if nodes.is_empty() {
            return Err("tree has no nodes".to_string());
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(format!("node {i} reached twice"));
            }
            seen[i] = true;
            match nodes[i] {
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(format!("leaf {i} has non-finite value"));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features {
                        return Err(format!("node {i} splits on unknown feature {feature}"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i} has non-finite threshold"));
                    }
                    if left >= nodes.len() || right >= nodes.len() {
                        return Err(format!("node {i} has a child out of range"));
                    }
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(format!("node {i} is unreachable"));
        }
        Ok(RegressionTree { nodes, n_features })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Same shape and split features, ignoring thresholds and leaf values.
    pub fn same_topology(&self, other: &RegressionTree) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| match (a, b) {
                (Node::Leaf { .. }, Node::Leaf { .. }) => true,
                (
                    Node::Split {
                        feature: fa,
                        left: la,
                        right: ra,
                        ..
                    },
                    Node::Split {
                        feature: fb,
                        left: lb,
                        right: rb,
                        ..
                    },
                ) => fa == fb && la == lb && ra == rb,
                _ => false,
            })
    }
}

/// Column-major copy of a feature matrix with each column's row order.
#[derive(Debug, Clone)]
pub struct Presorted {
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
    n_rows: usize,
}

impl Presorted {
    pub fn new(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let columns: Vec<Vec<f64>> = (0..p).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted {
            columns,
            order,
            n_rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }
}

/// A grown tree plus the weighted squared-error reduction credited to each
/// feature.
#[derive(Debug, Clone)]
pub struct TreeFit {
    pub tree: RegressionTree,
    pub gains: Vec<f64>,
}

struct Grower<'a> {
    data: &'a Presorted,
    y: &'a [f64],
    w: &'a [f64],
    params: TreeParams,
    idx: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<Node>,
    gains: Vec<f64>,
}

struct Candidate {
    feature: usize,
    pos: usize,
    gain: f64,
    threshold: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

impl<'a> Grower<'a> {
    fn build(&mut self, lo: usize, hi: usize, depth: usize, rng: &mut Pcg64) -> usize {
        let here = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });

        let (mut wsum, mut ysum) = (0.0, 0.0);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in &self.idx[0][lo..hi] {
            let r = r as usize;
            wsum += self.w[r];
            ysum += self.w[r] * self.y[r];
            ymin = ymin.min(self.y[r]);
            ymax = ymax.max(self.y[r]);
        }
        let value = ysum / wsum;
        self.nodes[here] = Node::Leaf { value };

        let min_leaf = self.params.min_samples_leaf.max(1) as f64;
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || ymin == ymax || wsum < 2.0 * min_leaf || hi - lo < 2 {
            return here;
        }

        let Some(best) = self.best_split(lo, hi, value, wsum, min_leaf, rng) else {
            return here;
        };

        let n_left = best.pos + 1 - lo;
        for &r in &self.idx[best.feature][lo..hi] {
            self.goes_left[r as usize] = false;
        }
        for &r in &self.idx[best.feature][lo..=best.pos] {
            self.goes_left[r as usize] = true;
        }
        for f in 0..self.idx.len() {
            if f == best.feature {
                continue;
            }
            let seg = &mut self.idx[f][lo..hi];
            self.scratch.clear();
            let mut k = 0;
            for i in 0..seg.len() {
                let r = seg[i];
                if self.goes_left[r as usize] {
                    seg[k] = r;
                    k += 1;
                } else {
                    self.scratch.push(r);
                }
            }
            debug_assert_eq!(k, n_left);
            seg[k..].copy_from_slice(&self.scratch);
        }

        self.gains[best.feature] += best.gain;
        let left = self.build(lo, lo + n_left, depth + 1, rng);
        let right = self.build(lo + n_left, hi, depth + 1, rng);
        self.nodes[here] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        here
    }

    fn best_split(
        &self,
        lo: usize,
        hi: usize,
        mean: f64,
        wsum: f64,
        min_leaf: f64,
        rng: &mut Pcg64,
    ) -> Option<Candidate> {
        let p = self.idx.len();
        let features: Vec<usize> = match self.params.max_features {
            Some(k) if k < p => sample_without_replacement(rng, p, k.max(1)),
            _ => (0..p).collect(),
        };

        let mut total = 0.0;
        for &r in &self.idx[0][lo..hi] {
            let r = r as usize;
            total += self.w[r] * (self.y[r] - mean);
        }
        let parent = total * total / wsum;

        let mut best: Option<Candidate> = None;
        for &f in &features {
            let col = &self.data.columns[f];
            let seg = &self.idx[f][lo..hi];
            let (mut wl, mut sl) = (0.0, 0.0);
            for j in 0..seg.len() - 1 {
                let r = seg[j] as usize;
                wl += self.w[r];
                sl += self.w[r] * (self.y[r] - mean);
                let a = col[r];
                let b = col[seg[j + 1] as usize];
                if a == b {
                    continue;
                }
                let wr = wsum - wl;
                if wl < min_leaf || wr < min_leaf {
                    continue;
                }
                let sr = total - sl;
                let gain = sl * sl / wl + sr * sr / wr - parent;
                if gain > 0.0 && best.as_ref().is_none_or(|c| gain > c.gain) {
                    best = Some(Candidate {
                        feature: f,
                        pos: lo + j,
                        gain,
                        threshold: midpoint(a, b),
                    });
                }
            }
        }
        best
    }
}

/// Grows one tree on the rows with positive weight.
pub fn grow_tree(
    data: &Presorted,
    y: &[f64],
    weights: &[f64],
    params: TreeParams,
    rng: &mut Pcg64,
) -> TreeFit {
    assert_eq!(y.len(), data.n_rows());
    assert_eq!(weights.len(), data.n_rows());
    let p = data.n_features();
    let idx: Vec<Vec<u32>> = data
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&r| weights[r as usize] > 0.0).collect())
        .collect();
    let m = idx.first().map_or(0, Vec::len);
    assert!(m > 0, "tree needs at least one row with positive weight");
    let mut g = Grower {
        data,
        y,
        w: weights,
        params,
        idx,
        goes_left: vec![false; data.n_rows()],
        scratch: Vec::with_capacity(m),
        nodes: Vec::new(),
        gains: vec![0.0; p],
    };
    g.build(0, m, 0, rng);
    TreeFit {
        tree: RegressionTree {
            nodes: g.nodes,
            n_features: p,
        },
        gains: g.gains,
    }
}

/// Fits a tree on row-major features with unit weights.
pub fn fit_tree(rows: &[Vec<f64>], targets: &[f64], params: TreeParams, rng: &mut Pcg64) -> RegressionTree {
    let data = Presorted::new(rows);
    grow_tree(&data, targets, &vec![1.0; targets.len()], params, rng).tree
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::rng::SeedPath;

    fn rng() -> Pcg64 {
        SeedPath::new(3).rng()
    }

    #[test]
    fn constant_targets_give_one_leaf() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i), 1.0]).collect();
        let t = fit_tree(&rows, &[2.5; 10], TreeParams::default(), &mut rng());
        assert_eq!(t.nodes(), &[Node::Leaf { value: 2.5 }]);
    }

    #[test]
    fn two_points_split_perfectly() {
        let rows = vec![vec![0.0], vec![1.0]];
        let t = fit_tree(&rows, &[0.0, 1.0], TreeParams::default(), &mut rng());
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.predict(&[0.0]), 0.0);
        assert_eq!(t.predict(&[1.0]), 1.0);
        match t.nodes()[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn depth_zero_predicts_mean() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![f64::from(i)]).collect();
        let params = TreeParams {
            max_depth: Some(0),
            ..TreeParams::default()
        };
        let t = fit_tree(&rows, &[1.0, 2.0, 3.0, 6.0], params, &mut rng());
        assert_eq!(t.nodes(), &[Node::Leaf { value: 3.0 }]);
    }

    #[test]
    fn leaf_size_is_respected() {
        let rows: Vec<Vec<f64>> = (0..9).map(|i| vec![f64::from(i)]).collect();
        let y: Vec<f64> = (0..9).map(|i| f64::from(i * i)).collect();
        let params = TreeParams {
            min_samples_leaf: 4,
            ..TreeParams::default()
        };
        let t = fit_tree(&rows, &y, params, &mut rng());
        assert_eq!(t.n_leaves(), 2);
    }

    #[test]
    fn weights_act_as_multiplicities() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = [0.0, 10.0, 20.0];
        let data = Presorted::new(&rows);
        let params = TreeParams {
            max_depth: Some(0),
            ..TreeParams::default()
        };
        let fit = grow_tree(&data, &y, &[2.0, 0.0, 1.0], params, &mut rng());
        assert!((fit.tree.predict(&[0.0]) - 20.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn adjacent_floats_use_lower_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
        assert_eq!(midpoint(-1.0, 3.0), 1.0);
    }

    #[test]
    fn node_list_validation() {
        let bad = vec![Node::Split {
            feature: 0,
            threshold: 0.0,
            left: 0,
            right: 0,
        }];
        assert!(RegressionTree::from_nodes(bad, 1).is_err());
        let orphan = vec![Node::Leaf { value: 1.0 }, Node::Leaf { value: 2.0 }];
        assert!(RegressionTree::from_nodes(orphan, 1).is_err());
        let ok = vec![
            Node::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2,
            },
            Node::Leaf { value: 1.0 },
            Node::Leaf { value: 2.0 },
        ];
        assert_eq!(RegressionTree::from_nodes(ok, 1).unwrap().depth(), 1);
    }
}
