//! HDBSCAN over the non-ground points of a frame.
//!
//! Core distances exclude the query point itself: `min_samples = k` means
//! the distance to the k-th *other* point.

mod condense;
mod kdtree;
mod mst;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use condense::{condense, single_linkage, ClusterTree, CondensedRow, LinkageRow};
pub use mst::{mutual_reachability, mutual_reachability_mst, MstEdge};

pub const NOISE: i32 = -1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub cluster_selection_epsilon: f64,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        HdbscanParams {
            min_cluster_size: 20,
            min_samples: 10,
            cluster_selection_epsilon: 0.5,
        }
    }
}

impl HdbscanParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::Config("min_cluster_size must be at least 2".into()));
        }
        if self.min_samples < 1 {
            return Err(Error::Config("min_samples must be at least 1".into()));
        }
        if !(self.cluster_selection_epsilon >= 0.0) {
            return Err(Error::Config(
                "cluster_selection_epsilon must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-point cluster ids `0..n_clusters`, numbered by first occurrence; `-1` is noise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub cluster_id: Vec<i32>,
    pub n_clusters: usize,
}

impl ClusterAssignment {
    pub fn all_noise(n: usize) -> Self {
        ClusterAssignment {
            cluster_id: vec![NOISE; n],
            n_clusters: 0,
        }
    }

    /// Renumber arbitrary labels (negative = noise) by order of first occurrence.
    pub fn from_raw_labels(raw: &[i64]) -> Self {
        let mut map = std::collections::HashMap::new();
        let cluster_id = raw
            .iter()
            .map(|&l| {
                if l < 0 {
                    NOISE
                } else {
                    let next = map.len() as i32;
                    *map.entry(l).or_insert(next)
                }
            })
            .collect();
        ClusterAssignment {
            cluster_id,
            n_clusters: map.len(),
        }
    }

    pub fn n_noise(&self) -> usize {
        self.cluster_id.iter().filter(|&&c| c == NOISE).count()
    }

    /// Point indices of each cluster, in cluster id order.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &c) in self.cluster_id.iter().enumerate() {
            if c >= 0 {
                out[c as usize].push(i as u32);
            }
        }
        out
    }
}

/// Distance from each point to its `k`-th nearest other point (Euclidean, xyz).
pub fn core_distances(points: &[[f64; 3]], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Config("core distance needs k >= 1".into()));
    }
    if points.len() <= k {
        return Err(Error::Config(format!(
            "{} points cannot provide a {k}-th nearest neighbour",
            points.len()
        )));
    }
    let tree = kdtree::KdTree::build(points);
    Ok((0..points.len())
        .map(|i| tree.kth_neighbor_distance(i, k))
        .collect())
}

/// Build the hierarchy from an MST and extract a flat clustering.
pub fn condense_and_select(
    n_points: usize,
    edges: &[MstEdge],
    min_cluster_size: usize,
    epsilon: f64,
) -> ClusterAssignment {
    if n_points < min_cluster_size || n_points < 2 {
        return ClusterAssignment::all_noise(n_points);
    }
    let rows = single_linkage(n_points, edges);
    let tree = condense(&rows, n_points, min_cluster_size);
    let clusters = ClusterTree::from_condensed(&tree, n_points);
    let selected = clusters.select(epsilon);
    let raw = condense::label_points(&tree, n_points, &clusters, &selected);
    ClusterAssignment::from_raw_labels(&raw)
}

pub fn hdbscan(points: &[[f64; 3]], params: &HdbscanParams) -> Result<ClusterAssignment> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::Validation(
            "cannot cluster an empty point set".into(),
        ));
    }
    if points.len() < params.min_cluster_size {
        return Ok(ClusterAssignment::all_noise(points.len()));
    }
    let core = core_distances(points, params.min_samples)?;
    let edges = mutual_reachability_mst(points, &core);
    Ok(condense_and_select(
        points.len(),
        &edges,
        params.min_cluster_size,
        params.cluster_selection_epsilon,
    ))
}
