//! Gradient-boosted regression trees with a pairwise logistic objective.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AdvisorError, FeatureVector, LabelKind, RankingGroup, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Minimum number of samples in each child of a split.
    pub min_leaf: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Fraction of rows drawn (without replacement) per round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rounds: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_leaf: 2,
            lambda: 1.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf { value: f64 },
}

impl Node {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] < *threshold { left } else { right },
            }
        }
    }

    fn scale(&mut self, k: f64) {
        match self {
            Node::Leaf { value } => *value *= k,
            Node::Split { left, right, .. } => {
                left.scale(k);
                right.scale(k);
            }
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            Node::Leaf { .. } => None,
            Node::Split {
                feature, left, right, ..
            } => [Some(*feature), left.max_feature(), right.max_feature()]
                .into_iter()
                .flatten()
                .max(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankerModel {
    pub feature_schema: Vec<String>,
    pub learning_rate: f64,
    pub trees: Vec<Node>,
    pub config: TrainConfig,
    pub label_kind: LabelKind,
    /// Datasets whose groups were used for training.
    pub train_groups: Vec<String>,
    /// Pairwise training loss before the first tree and after each tree.
    pub loss_history: Vec<f64>,
}

impl RankerModel {
    /// A model with no trees; scores every row 0.
    pub fn empty(label_kind: LabelKind) -> RankerModel {
        RankerModel {
            feature_schema: FeatureVector::schema(),
            learning_rate: TrainConfig::default().learning_rate,
            trees: Vec::new(),
            config: TrainConfig::default(),
            label_kind,
            train_groups: Vec::new(),
            loss_history: Vec::new(),
        }
    }

    /// Checks that every split index fits the schema.
    pub fn validate(&self) -> Result<()> {
        let d = self.feature_schema.len();
        for t in &self.trees {
            if let Some(f) = t.max_feature() {
                if f >= d {
                    return Err(AdvisorError::SchemaMismatch(format!(
                        "split on feature {f} but schema has {d}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<RankerModel> {
        let m: RankerModel =
            serde_json::from_slice(bytes).map_err(|e| AdvisorError::Parse(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| self.learning_rate * t.eval(x)).sum()
    }
}

/// Scores feature rows; each score depends only on its own row.
pub fn predict(model: &RankerModel, features: &[FeatureVector]) -> Result<Vec<f64>> {
    let d = model.feature_schema.len();
    features
        .iter()
        .map(|f| {
            if f.0.len() != d {
                Err(AdvisorError::SchemaMismatch(format!(
                    "feature row has {} values, schema has {d}",
                    f.0.len()
                )))
            } else {
                Ok(model.score(&f.0))
            }
        })
        .collect()
}

/// Index pairs `(better, worse)` within each group.
fn ordered_pairs(groups: &[RankingGroup]) -> (Vec<&[f64]>, Vec<(usize, usize)>) {
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for g in groups {
        let base = rows.len();
        for it in &g.items {
            rows.push(it.features.0.as_slice());
        }
        for (i, a) in g.items.iter().enumerate() {
            for (j, b) in g.items.iter().enumerate() {
                if a.relevance > b.relevance {
                    pairs.push((base + i, base + j));
                }
            }
        }
    }
    (rows, pairs)
}

/// `Σ ln(1 + e^{−(s_i − s_j)})` over ordered pairs.
fn pairwise_loss(scores: &[f64], pairs: &[(usize, usize)]) -> f64 {
    pairs
        .iter()
        .map(|&(i, j)| {
            let m = scores[i] - scores[j];
            // ln(1 + e^{-m}) without overflow
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        })
        .sum()
}

fn gradients(scores: &[f64], pairs: &[(usize, usize)]) -> (Vec<f64>, Vec<f64>) {
    let mut g = vec![0.0; scores.len()];
    let mut h = vec![0.0; scores.len()];
    for &(i, j) in pairs {
        let m = scores[i] - scores[j];
        let rho = 1.0 / (1.0 + m.exp());
        let w = (rho * (1.0 - rho)).max(1e-16);
        g[i] -= rho;
        g[j] += rho;
        h[i] += w;
        h[j] += w;
    }
    (g, h)
}

struct Builder<'a> {
    rows: &'a [&'a [f64]],
    g: &'a [f64],
    h: &'a [f64],
    cfg: &'a TrainConfig,
    dims: usize,
}

impl Builder<'_> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let (gs, hs) = idx.iter().fold((0.0, 0.0), |(a, b), &i| (a + self.g[i], b + self.h[i]));
        Node::Leaf {
            value: -gs / (hs + self.cfg.lambda),
        }
    }

    /// Best `(gain, feature, threshold)` over exact midpoints.
    fn best_split(&self, idx: &[usize]) -> Option<(f64, usize, f64)> {
        let lambda = self.cfg.lambda;
        let (gt, ht) = idx.iter().fold((0.0, 0.0), |(a, b), &i| (a + self.g[i], b + self.h[i]));
        let parent = gt * gt / (ht + lambda);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.dims {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                gl += self.g[order[k]];
                hl += self.h[order[k]];
                let (x0, x1) = (self.rows[order[k]][f], self.rows[order[k + 1]][f]);
                let n_left = k + 1;
                if x0 == x1 || n_left < self.cfg.min_leaf || order.len() - n_left < self.cfg.min_leaf {
                    continue;
                }
                let (gr, hr) = (gt - gl, ht - hl);
                let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, 0.5 * (x0 + x1)));
                }
            }
        }
        best
    }

    fn build(&self, idx: &[usize], depth: usize) -> Node {
        if depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf.max(1) {
            return self.leaf(idx);
        }
        let Some((_, feature, threshold)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.rows[i][feature] < threshold);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.build(&l, depth + 1)),
            right: Box::new(self.build(&r, depth + 1)),
        }
    }
}

/// Fits a boosted ensemble to the pairwise logistic loss of `groups`.
///
/// Each round fits one Newton tree to the current gradients. If adding it
/// would raise the training loss its leaves are halved until it does not;
/// training stops early when no split improves the objective.
pub fn train_ranker(
    groups: &[RankingGroup],
    label_kind: LabelKind,
    cfg: &TrainConfig,
) -> Result<RankerModel> {
    let schema = FeatureVector::schema();
    let dims = schema.len();
    for g in groups {
        for it in &g.items {
            if it.features.0.len() != dims {
                return Err(AdvisorError::SchemaMismatch(format!(
                    "{}/{}: {} features, expected {dims}",
                    g.dataset,
                    it.model,
                    it.features.0.len()
                )));
            }
        }
    }
    let (rows, pairs) = ordered_pairs(groups);
    if pairs.is_empty() {
        return Err(AdvisorError::NoPairs);
    }
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scores = vec![0.0; n];
    let mut loss = pairwise_loss(&scores, &pairs);
    let mut history = vec![loss];
    let mut trees = Vec::new();
    for _ in 0..cfg.rounds {
        let (g, h) = gradients(&scores, &pairs);
        let idx: Vec<usize> = if cfg.subsample < 1.0 {
            let m = ((n as f64 * cfg.subsample).round() as usize).clamp(1, n);
            let mut s = sample(&mut rng, n, m).into_vec();
            s.sort_unstable();
            s
        } else {
            (0..n).collect()
        };
        let builder = Builder {
            rows: &rows,
            g: &g,
            h: &h,
            cfg,
            dims,
        };
        let mut tree = builder.build(&idx, 0);
        if matches!(tree, Node::Leaf { .. }) {
            break;
        }
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = scores
                .iter()
                .zip(&rows)
                .map(|(s, x)| s + cfg.learning_rate * tree.eval(x))
                .collect();
            let trial_loss = pairwise_loss(&trial, &pairs);
            if trial_loss <= loss {
                accepted = Some((trial, trial_loss));
                break;
            }
            tree.scale(0.5);
        }
        let Some((next, next_loss)) = accepted else {
            break;
        };
        scores = next;
        loss = next_loss;
        history.push(loss);
        trees.push(tree);
    }
    let mut train_groups: Vec<String> = groups.iter().map(|g| g.dataset.clone()).collect();
    train_groups.sort();
    train_groups.dedup();
    Ok(RankerModel {
        feature_schema: schema,
        learning_rate: cfg.learning_rate,
        trees,
        config: cfg.clone(),
        label_kind,
        train_groups,
        loss_history: history,
    })
}
