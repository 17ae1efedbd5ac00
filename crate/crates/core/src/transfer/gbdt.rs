//! Gradient-boosted regression trees with squared loss.
//!
//! Splits come from an exact scan over presorted feature columns; ties
//! between candidate splits go to the lower feature index and then the lower
//! threshold, so fitting is fully deterministic.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams { trees: 100, max_depth: 4, learning_rate: 0.1, min_leaf: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Nodes in creation order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    pub params: GbdtParams,
    pub n_features: usize,
    pub base: f64,
    pub trees: Vec<Tree>,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Gbdt {
    /// Fits the ensemble. Panics if `x` is empty or ragged; callers validate.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: GbdtParams) -> Self {
        assert!(!x.is_empty() && x.len() == y.len(), "training set must be non-empty and aligned");
        let n = x.len();
        let f = x[0].len();
        assert!(x.iter().all(|r| r.len() == f), "ragged training rows");

        let base = y.iter().sum::<f64>() / n as f64;
        let sorted: Vec<Vec<usize>> = (0..f)
            .map(|j| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x[a][j].total_cmp(&x[b][j]).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut residual: Vec<f64> = y.iter().map(|v| v - base).collect();
        let mut trees = Vec::with_capacity(params.trees);
        for _ in 0..params.trees {
            let tree = grow(x, &residual, &sorted, &params);
            for (i, r) in residual.iter_mut().enumerate() {
                *r -= params.learning_rate * tree.predict(&x[i]);
            }
            trees.push(tree);
        }
        Gbdt { params, n_features: f, base, trees }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.params.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

fn grow(x: &[Vec<f64>], residual: &[f64], sorted: &[Vec<usize>], params: &GbdtParams) -> Tree {
    let n = residual.len();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut node_of = vec![0usize; n];
    let mut frontier = vec![0usize];

    for _ in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        // per-node totals over the frontier
        let mut slot = vec![usize::MAX; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            slot[id] = s;
        }
        let m = frontier.len();
        let mut total_sum = vec![0.0; m];
        let mut total_n = vec![0usize; m];
        for i in 0..n {
            let s = slot[node_of[i]];
            if s != usize::MAX {
                total_sum[s] += residual[i];
                total_n[s] += 1;
            }
        }
        let mut best: Vec<Option<Best>> = vec![None; m];
        for (feature, order) in sorted.iter().enumerate() {
            let mut left_sum = vec![0.0; m];
            let mut left_n = vec![0usize; m];
            let mut prev = vec![f64::NAN; m];
            for &i in order {
                let s = slot[node_of[i]];
                if s == usize::MAX {
                    continue;
                }
                let v = x[i][feature];
                if left_n[s] >= params.min_leaf && total_n[s] - left_n[s] >= params.min_leaf && v > prev[s] {
                    let (ls, ln) = (left_sum[s], left_n[s] as f64);
                    let (rs, rn) = (total_sum[s] - ls, (total_n[s] - left_n[s]) as f64);
                    let gain = ls * ls / ln + rs * rs / rn - total_sum[s] * total_sum[s] / total_n[s] as f64;
                    if gain > 1e-12 && best[s].map_or(true, |b| gain > b.gain) {
                        best[s] = Some(Best { gain, feature, threshold: 0.5 * (prev[s] + v) });
                    }
                }
                left_sum[s] += residual[i];
                left_n[s] += 1;
                prev[s] = v;
            }
        }

        let mut next = Vec::new();
        let mut children = vec![None; m];
        for (s, &id) in frontier.iter().enumerate() {
            if let Some(b) = best[s] {
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[id] = Node::Split { feature: b.feature, threshold: b.threshold, left, right: left + 1 };
                children[s] = Some((b, left));
                next.push(left);
                next.push(left + 1);
            }
        }
        for i in 0..n {
            let s = slot[node_of[i]];
            if s != usize::MAX {
                if let Some((b, left)) = children[s] {
                    node_of[i] = if x[i][b.feature] <= b.threshold { left } else { left + 1 };
                }
            }
        }
        frontier = next;
    }

    let mut sum = vec![0.0; nodes.len()];
    let mut count = vec![0usize; nodes.len()];
    for i in 0..n {
        sum[node_of[i]] += residual[i];
        count[node_of[i]] += 1;
    }
    for (id, node) in nodes.iter_mut().enumerate() {
        if let Node::Leaf { value } = node {
            *value = if count[id] > 0 { sum[id] / count[id] as f64 } else { 0.0 };
        }
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mse(model: &Gbdt, x: &[Vec<f64>], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(r, t)| (model.predict(r) - t).powi(2)).sum::<f64>() / y.len() as f64
    }

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let y = vec![0.37; 20];
        let m = Gbdt::fit(&x, &y, GbdtParams::default());
        for r in &x {
            assert!((m.predict(r) - 0.37).abs() < 1e-6);
        }
        assert!((m.predict(&[100.0, -3.0]) - 0.37).abs() < 1e-6);
    }

    #[test]
    fn single_stump_matches_hand_split() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|v| vec![*v]).collect();
        let y = [0.0, 0.0, 1.0, 1.0];
        let p = GbdtParams { trees: 1, max_depth: 1, learning_rate: 1.0, min_leaf: 1 };
        let m = Gbdt::fit(&x, &y, p);
        assert_eq!(
            m.trees[0].nodes[0],
            Node::Split { feature: 0, threshold: 2.5, left: 1, right: 2 }
        );
        for (r, t) in x.iter().zip(y) {
            assert!((m.predict(r) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn tie_goes_to_lower_feature() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|v| vec![*v, *v]).collect();
        let y = [0.0, 0.0, 1.0, 1.0];
        let p = GbdtParams { trees: 1, max_depth: 1, learning_rate: 1.0, min_leaf: 1 };
        let m = Gbdt::fit(&x, &y, p);
        assert!(matches!(m.trees[0].nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn depth_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| rng.gen()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[1] + r[2]).collect();
        let m = Gbdt::fit(&x, &y, GbdtParams::default());
        for t in &m.trees {
            assert!(t.nodes.len() <= 31);
        }
    }

    #[test]
    fn boosting_fits_a_smooth_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..500).map(|_| (0..2).map(|_| rng.gen()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| (3.0 * r[0]).sin() + r[1] * r[1]).collect();
        let (train_x, test_x) = x.split_at(400);
        let (train_y, test_y) = y.split_at(400);
        let m = Gbdt::fit(train_x, train_y, GbdtParams::default());
        let var = test_y.iter().map(|v| v * v).sum::<f64>() / 100.0 - (test_y.iter().sum::<f64>() / 100.0).powi(2);
        let train = mse(&m, train_x, train_y);
        let test = mse(&m, test_x, test_y);
        assert!(train <= test);
        assert!(test < 0.1 * var, "{test} vs {var}");
    }

    #[test]
    fn deterministic_and_serializable() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<Vec<f64>> = (0..100).map(|_| (0..4).map(|_| rng.gen_range(0..5) as f64).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r.iter().sum()).collect();
        let a = Gbdt::fit(&x, &y, GbdtParams::default());
        let b = Gbdt::fit(&x, &y, GbdtParams::default());
        assert_eq!(a, b);
        let back: Gbdt = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
