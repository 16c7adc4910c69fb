use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{predict, AdvisorError, RankerModel, RankingGroup, Result};

/// Relevance at or above this value counts as relevant for MAP.
pub const DEFAULT_RELEVANT_AT: f64 = 0.75;

fn dcg(rels: &[f64], k: usize) -> f64 {
    rels.iter()
        .take(k)
        .enumerate()
        .map(|(i, r)| r / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k with linear gain over relevances given in presented order.
/// Zero when the ideal DCG is zero.
pub fn ndcg_at_k(presented: &[f64], k: usize) -> f64 {
    let mut ideal = presented.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg <= 0.0 {
        return 0.0;
    }
    dcg(presented, k) / idcg
}

/// Average precision of a ranked list of relevance flags; 0 when nothing is
/// relevant.
pub fn average_precision(ranked: &[bool]) -> f64 {
    let total = ranked.iter().filter(|&&r| r).count();
    if total == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in ranked.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total as f64
}

pub fn mean_average_precision(groups: &[Vec<bool>]) -> f64 {
    if groups.is_empty() {
        return 0.0;
    }
    groups.iter().map(|g| average_precision(g)).sum::<f64>() / groups.len() as f64
}

/// 1-based ranks with ties given the mean of the positions they span.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's ρ by `1 − 6Σd²/(n(n²−1))` on mid-ranks of the inputs.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(AdvisorError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(AdvisorError::TooFewItems(n));
    }
    let (rx, ry) = (mid_ranks(x), mid_ranks(y));
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    let n = n as f64;
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEval {
    pub ndcg_at: BTreeMap<usize, f64>,
    pub map_score: f64,
    pub spearman: f64,
    pub groups: usize,
}

/// Items of a group in predicted order (score descending, ties by model
/// name), paired with their scores.
pub fn presented_order(group: &RankingGroup, scores: &[f64]) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    order.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| group.items[a.0].model.cmp(&group.items[b.0].model))
    });
    order
}

/// Mean NDCG@k, MAP and mean Spearman over held-out groups, none of which
/// may have been used for training.
pub fn evaluate(model: &RankerModel, held_out: &[RankingGroup], ks: &[usize]) -> Result<RankEval> {
    evaluate_with(model, held_out, ks, DEFAULT_RELEVANT_AT)
}

pub fn evaluate_with(
    model: &RankerModel,
    held_out: &[RankingGroup],
    ks: &[usize],
    relevant_at: f64,
) -> Result<RankEval> {
    if let Some(g) = held_out
        .iter()
        .find(|g| model.train_groups.iter().any(|t| t == &g.dataset))
    {
        return Err(AdvisorError::Overlap(g.dataset.clone()));
    }
    if held_out.is_empty() {
        return Err(AdvisorError::NoGroups);
    }
    let mut ndcg: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    let mut flags = Vec::new();
    let mut rho_sum = 0.0;
    let mut rho_n = 0usize;
    for g in held_out {
        let feats: Vec<_> = g.items.iter().map(|i| i.features.clone()).collect();
        let scores = predict(model, &feats)?;
        let order = presented_order(g, &scores);
        let rels: Vec<f64> = order.iter().map(|&(i, _)| g.items[i].relevance).collect();
        for (&k, acc) in ndcg.iter_mut() {
            *acc += ndcg_at_k(&rels, k);
        }
        flags.push(rels.iter().map(|&r| r >= relevant_at).collect::<Vec<_>>());
        if g.items.len() >= 2 {
            let truth: Vec<f64> = g.items.iter().map(|i| i.relevance).collect();
            rho_sum += spearman(&scores, &truth)?;
            rho_n += 1;
        }
    }
    let n = held_out.len() as f64;
    for v in ndcg.values_mut() {
        *v /= n;
    }
    Ok(RankEval {
        ndcg_at: ndcg,
        map_score: mean_average_precision(&flags),
        spearman: if rho_n == 0 { 0.0 } else { rho_sum / rho_n as f64 },
        groups: held_out.len(),
    })
}
