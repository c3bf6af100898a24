//! Per-cluster softmax entropy, feature diversity, and reciprocal-rank fusion.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{FeatureMatrix, PredictionMatrix};
use crate::partition::{ClusterUid, PartitionId};

/// Mean Shannon entropy (nats) of the predicted distributions of the given points.
/// Each row is rescaled to sum 1 in f64 first, so f32 storage rounding does
/// not leak into the result (a uniform row gives `ln C` to working precision).
pub fn cluster_entropy(preds: &PredictionMatrix, points: &[u32]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let total: f64 = points
        .iter()
        .map(|&i| row_entropy(preds.row(i as usize)))
        .sum();
    total / points.len() as f64
}

fn row_entropy(row: &[f32]) -> f64 {
    let sum: f64 = row.iter().map(|&p| p as f64).sum();
    row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p as f64 / sum;
            -q * q.ln()
        })
        .sum()
}

pub fn cluster_mean_feature(feats: &FeatureMatrix, points: &[u32]) -> Vec<f64> {
    let mut mean = vec![0.0; feats.dim()];
    for &i in points {
        for (m, &v) in mean.iter_mut().zip(feats.row(i as usize)) {
            *m += v as f64;
        }
    }
    let n = points.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Summed Euclidean distance from `f` to every labeled mean feature; 0 if none.
pub fn diversity(f: &[f64], labeled: &[Vec<f64>]) -> Result<f64> {
    let mut sum = 0.0;
    for (i, g) in labeled.iter().enumerate() {
        if g.len() != f.len() {
            return Err(Error::Validation(format!(
                "feature dimension mismatch: cluster has {}, labeled cluster {i} has {}",
                f.len(),
                g.len()
            )));
        }
        sum += f
            .iter()
            .zip(g)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    }
    Ok(sum)
}

/// Input to the ranking of one partition.
#[derive(Clone, Debug, PartialEq)]
pub struct RankInput {
    pub uid: ClusterUid,
    pub entropy: f64,
    pub diversity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCluster {
    pub uid: ClusterUid,
    pub rank_entropy: usize,
    pub rank_diversity: usize,
    pub fused_score: f64,
}

/// Unlabeled clusters of one partition, most informative first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub partition: PartitionId,
    pub order: Vec<RankedCluster>,
}

/// `1/ra + 1/rb` compared exactly as rationals.
pub fn cmp_fused(a: (usize, usize), b: (usize, usize)) -> Ordering {
    let (a1, a2) = (a.0 as u128, a.1 as u128);
    let (b1, b2) = (b.0 as u128, b.1 as u128);
    ((a1 + a2) * b1 * b2).cmp(&((b1 + b2) * a1 * a2))
}

/// Rank 1 = largest value; equal values are ranked by ascending uid.
fn descending_ranks(items: &[RankInput], key: impl Fn(&RankInput) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        key(&items[b])
            .total_cmp(&key(&items[a]))
            .then_with(|| items[a].uid.cmp(&items[b].uid))
    });
    let mut ranks = vec![0; items.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

pub fn fuse_and_rank(partition: PartitionId, items: &[RankInput]) -> RankTable {
    let re = descending_ranks(items, |x| x.entropy);
    let rd = descending_ranks(items, |x| x.diversity);
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        cmp_fused((re[b], rd[b]), (re[a], rd[a])).then_with(|| items[a].uid.cmp(&items[b].uid))
    });
    RankTable {
        partition,
        order: order
            .into_iter()
            .map(|i| RankedCluster {
                uid: items[i].uid.clone(),
                rank_entropy: re[i],
                rank_diversity: rd[i],
                fused_score: 1.0 / re[i] as f64 + 1.0 / rd[i] as f64,
            })
            .collect(),
    }
}

/// Everything computed for one unlabeled cluster in one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    #[serde(flatten)]
    pub uid: ClusterUid,
    pub partition: PartitionId,
    pub entropy: f64,
    pub diversity: f64,
    pub rank_entropy: usize,
    pub rank_diversity: usize,
    pub fused_score: f64,
    pub mean_feature: Vec<f64>,
}
