//! Gradient-boosted regression trees for multiclass softmax cross-entropy.
//!
//! Each round fits one tree per class to the gradient `p − 1[y = k]` and
//! hessian `p (1 − p)` of the current scores. Leaves take the Newton weight
//! `−G / (H + λ)` scaled by the learning rate; splits need a gain above `γ`.
//! A round is halved until the regularized training loss does not increase,
//! and discarded if halving never helps.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svm::check_features;
use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 30;
/// Gains below this fraction of the parent score are rounding noise.
const MIN_RELATIVE_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Penalty per leaf, required gain for a split.
    pub gamma: f64,
    pub n_classes: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 4,
            min_child_weight: 1.0,
            lambda: 1.0,
            gamma: 0.0,
            n_classes: 2,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate <= 1.0
            && self.max_depth <= 30
            && self.min_child_weight >= 0.0
            && self.lambda >= 0.0
            && self.gamma >= 0.0
            && self.n_classes >= 2;
        if !ok {
            return Err(Error::Config(format!("invalid boosting configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        weight: f64,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { weight } => return weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { weight } => Some(*weight),
            Node::Split { .. } => None,
        })
    }

    fn penalty(&self, cfg: &GbtConfig) -> f64 {
        self.leaf_weights().map(|w| cfg.gamma + 0.5 * cfg.lambda * w * w).sum()
    }

    fn scale(&mut self, f: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { weight } = n {
                *weight *= f;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub config: GbtConfig,
    pub n_features: usize,
    pub base_score: Vec<f64>,
    /// `rounds[r][k]` is the tree of class `k` in round `r`.
    pub rounds: Vec<Vec<Tree>>,
    /// Regularized training loss before the first round and after each kept round.
    pub training_loss: Vec<f64>,
}

fn softmax_in_place(s: &mut [f64]) {
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in s.iter_mut() {
        *v = (*v - m).exp();
        z += *v;
    }
    s.iter_mut().for_each(|v| *v /= z);
}

/// `Σ −log softmax(scores)[y]`, computed stably.
fn cross_entropy(scores: &Array2<f64>, y: &[usize]) -> f64 {
    scores
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &c)| {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - row[c]
        })
        .sum()
}

struct Presorted {
    /// Row order per feature, ascending by value then row index.
    order: Vec<Vec<usize>>,
}

impl Presorted {
    fn new(x: &Array2<f64>) -> Self {
        let order = (0..x.ncols())
            .into_par_iter()
            .map(|f| {
                let mut idx: Vec<usize> = (0..x.nrows()).collect();
                idx.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { order }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let t = a + (b - a) * 0.5;
    if t > a {
        t
    } else {
        b
    }
}

/// Level-wise exact greedy growth on fixed gradient statistics.
fn grow_tree(x: &Array2<f64>, sorted: &Presorted, g: &[f64], h: &[f64], cfg: &GbtConfig) -> Tree {
    let n = x.nrows();
    let lambda = cfg.lambda;
    let score = |gs: f64, hs: f64| if hs + lambda > 0.0 { gs * gs / (hs + lambda) } else { 0.0 };
    let mut nodes: Vec<Node> = vec![Node::Leaf { weight: 0.0 }];
    // open node of each row at the current level, usize::MAX once settled
    let mut node_of = vec![0usize; n];
    let mut open: Vec<usize> = vec![0];
    let mut sums: Vec<(f64, f64)> = vec![(g.iter().sum(), h.iter().sum())];
    let mut settled: Vec<(usize, f64, f64)> = Vec::new();

    for _depth in 0..cfg.max_depth {
        if open.is_empty() {
            break;
        }
        let mut slot_table = vec![usize::MAX; nodes.len()];
        for (s, &node) in open.iter().enumerate() {
            slot_table[node] = s;
        }
        let slot_of = |r: usize| match node_of[r] {
            usize::MAX => None,
            node => Some(slot_table[node]),
        };
        let n_open = open.len();
        let per_feature: Vec<Vec<Option<Candidate>>> = (0..x.ncols())
            .into_par_iter()
            .map(|f| {
                let mut best: Vec<Option<Candidate>> = vec![None; n_open];
                let mut left = vec![(0.0f64, 0.0f64); n_open];
                let mut last = vec![f64::NAN; n_open];
                for &r in &sorted.order[f] {
                    let Some(s) = slot_of(r) else { continue };
                    let v = x[[r, f]];
                    if !last[s].is_nan() && v > last[s] {
                        let (gl, hl) = left[s];
                        let (gt, ht) = sums[s];
                        let (gr, hr) = (gt - gl, ht - hl);
                        if hl >= cfg.min_child_weight && hr >= cfg.min_child_weight {
                            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(gt, ht)) - cfg.gamma;
                            if best[s].is_none_or(|b| gain > b.gain) {
                                best[s] = Some(Candidate {
                                    gain,
                                    feature: f,
                                    threshold: midpoint(last[s], v),
                                });
                            }
                        }
                    }
                    left[s].0 += g[r];
                    left[s].1 += h[r];
                    last[s] = v;
                }
                best
            })
            .collect();

        let mut next_open = Vec::new();
        let mut next_sums = Vec::new();
        let mut splits: Vec<Option<(Candidate, usize, usize)>> = vec![None; n_open];
        for s in 0..n_open {
            let mut best: Option<Candidate> = None;
            for cands in &per_feature {
                if let Some(c) = cands[s] {
                    if best.is_none_or(|b| c.gain > b.gain) {
                        best = Some(c);
                    }
                }
            }
            let floor = MIN_RELATIVE_GAIN * score(sums[s].0, sums[s].1);
            match best.filter(|c| c.gain > floor && c.gain > 0.0) {
                Some(c) => {
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf { weight: 0.0 });
                    nodes.push(Node::Leaf { weight: 0.0 });
                    nodes[open[s]] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: l,
                        right: r,
                    };
                    splits[s] = Some((c, l, r));
                }
                None => settled.push((open[s], sums[s].0, sums[s].1)),
            }
        }
        let mut child_sums: std::collections::BTreeMap<usize, (f64, f64)> = Default::default();
        for r in 0..n {
            let s = match node_of[r] {
                usize::MAX => continue,
                node => slot_table[node],
            };
            match splits[s] {
                Some((c, l, rt)) => {
                    let child = if x[[r, c.feature]] < c.threshold { l } else { rt };
                    node_of[r] = child;
                    let e = child_sums.entry(child).or_insert((0.0, 0.0));
                    e.0 += g[r];
                    e.1 += h[r];
                }
                None => node_of[r] = usize::MAX,
            }
        }
        for (child, gh) in child_sums {
            next_open.push(child);
            next_sums.push(gh);
        }
        open = next_open;
        sums = next_sums;
    }
    settled.extend(open.iter().zip(&sums).map(|(&node, &(gs, hs))| (node, gs, hs)));
    for (node, gs, hs) in settled {
        let w = if hs + lambda > 0.0 { -gs / (hs + lambda) } else { 0.0 };
        nodes[node] = Node::Leaf {
            weight: cfg.learning_rate * w,
        };
    }
    Tree { nodes }
}

pub fn gbt_train(x: &Array2<f64>, y: &[usize], cfg: &GbtConfig) -> Result<GbtModel> {
    cfg.validate()?;
    check_features(x.view())?;
    if y.len() != x.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let k = cfg.n_classes;
    if let Some(&c) = y.iter().find(|&&c| c >= k) {
        return Err(Error::Invariant(format!("class {c} outside 0..{k}")));
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::SingleClass);
    }
    let n = x.nrows();
    let sorted = Presorted::new(x);
    let base_score = vec![0.0; k];
    let mut scores = Array2::<f64>::zeros((n, k));
    let mut penalty = 0.0;
    let mut loss = cross_entropy(&scores, y);
    let mut training_loss = vec![loss];
    let mut rounds = Vec::new();

    'rounds: for round in 0..cfg.n_rounds {
        let mut g = Array2::<f64>::zeros((k, n));
        let mut h = Array2::<f64>::zeros((k, n));
        for i in 0..n {
            let mut p = scores.row(i).to_vec();
            softmax_in_place(&mut p);
            for c in 0..k {
                g[[c, i]] = p[c] - if y[i] == c { 1.0 } else { 0.0 };
                h[[c, i]] = (p[c] * (1.0 - p[c])).max(1e-16);
            }
        }
        let mut trees: Vec<Tree> = (0..k)
            .into_par_iter()
            .map(|c| grow_tree(x, &sorted, g.row(c).as_slice().unwrap(), h.row(c).as_slice().unwrap(), cfg))
            .collect();
        let outputs: Vec<Vec<f64>> = trees
            .iter()
            .map(|t| (0..n).map(|i| t.predict(x.row(i).as_slice().unwrap())).collect())
            .collect();
        let mut step = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = scores.clone();
            for (c, out) in outputs.iter().enumerate() {
                for i in 0..n {
                    trial[[i, c]] += step * out[i];
                }
            }
            let round_penalty: f64 = trees
                .iter()
                .map(|t| {
                    let mut s = t.clone();
                    s.scale(step);
                    s.penalty(cfg)
                })
                .sum();
            let candidate = cross_entropy(&trial, y) + penalty + round_penalty;
            if candidate <= loss {
                trees.iter_mut().for_each(|t| t.scale(step));
                scores = trial;
                penalty += round_penalty;
                loss = candidate;
                training_loss.push(loss);
                rounds.push(trees);
                continue 'rounds;
            }
            step *= 0.5;
        }
        log::info!("boosting stopped after {round} rounds: no step lowers the training loss");
        break;
    }
    Ok(GbtModel {
        config: *cfg,
        n_features: x.ncols(),
        base_score,
        rounds,
        training_loss,
    })
}

impl GbtModel {
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut s = self.base_score.clone();
        for round in &self.rounds {
            for (c, t) in round.iter().enumerate() {
                s[c] += t.predict(x);
            }
        }
        Ok(s)
    }

    /// Most probable class (lowest id on ties) and the softmax probabilities.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let mut p = self.scores(x)?;
        softmax_in_place(&mut p);
        let mut best = 0;
        for c in 1..p.len() {
            if p[c] > p[best] {
                best = c;
            }
        }
        Ok((best, p))
    }

    pub fn predict_batch(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        (0..x.nrows())
            .into_par_iter()
            .map(|i| Ok(self.predict(x.row(i).as_slice().unwrap_or(&x.row(i).to_vec()))?.0))
            .collect()
    }

    pub fn loss_is_monotone(&self) -> bool {
        self.training_loss.windows(2).all(|w| w[1] <= w[0])
    }
}
