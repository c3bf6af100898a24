use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{
    load_feature_matrix, load_prediction_matrix, DatasetIndex, FeatureMatrix, PredictionMatrix,
};
use crate::measures::{
    cluster_entropy, cluster_mean_feature, diversity, fuse_and_rank, ClusterScore, RankInput,
    RankTable,
};
use crate::partition::{ClusterRecord, PartitionId};

use super::LabeledSet;

/// Per-point predictions and features of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutputs {
    pub preds: PredictionMatrix,
    pub feats: FeatureMatrix,
}

/// Supplies model outputs between iterations.
pub trait ModelInterface: Sync {
    /// Called before iteration `iteration` is scored, with the labels acquired so far.
    fn refresh(&mut self, iteration: usize, labeled: &LabeledSet) -> Result<()>;

    /// Outputs for the frame at `frame` (dataset order); `None` when they are not available.
    fn outputs(&self, frame: usize) -> Result<Option<ModelOutputs>>;
}

/// Reads `.pred` / `.feat` files written by an external trainer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileModel {
    paths: Vec<(Option<PathBuf>, Option<PathBuf>)>,
}

impl FileModel {
    /// Uses the prediction and feature paths listed in the manifest.
    pub fn from_index(index: &DatasetIndex) -> Self {
        FileModel {
            paths: index
                .frames
                .iter()
                .map(|f| (f.preds_path.clone(), f.feats_path.clone()))
                .collect(),
        }
    }

    /// Expects `<dir>/<frame_id>.pred` and `<dir>/<frame_id>.feat`.
    pub fn in_dir(dir: &Path, frame_ids: &[String]) -> Self {
        FileModel {
            paths: frame_ids
                .iter()
                .map(|id| {
                    (
                        Some(dir.join(format!("{id}.pred"))),
                        Some(dir.join(format!("{id}.feat"))),
                    )
                })
                .collect(),
        }
    }
}

impl ModelInterface for FileModel {
    fn refresh(&mut self, _iteration: usize, _labeled: &LabeledSet) -> Result<()> {
        Ok(())
    }

    fn outputs(&self, frame: usize) -> Result<Option<ModelOutputs>> {
        let Some((Some(p), Some(f))) = self.paths.get(frame) else {
            return Ok(None);
        };
        if !p.is_file() || !f.is_file() {
            return Ok(None);
        }
        Ok(Some(ModelOutputs {
            preds: load_prediction_matrix(p)?,
            feats: load_feature_matrix(f)?,
        }))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationScores {
    /// One table per partition that still has unlabeled clusters.
    pub tables: Vec<RankTable>,
    /// Unlabeled clusters in rank order, partition by partition.
    pub scores: Vec<ClusterScore>,
}

struct Measured {
    record: usize,
    entropy: f64,
    mean_feature: Vec<f64>,
}

fn measure_frame(
    frame_id: &str,
    outputs: &ModelOutputs,
    records: &[ClusterRecord],
    members: &[usize],
    labeled: &LabeledSet,
) -> Result<Vec<Measured>> {
    let n = outputs.preds.n_points();
    if outputs.feats.n_points() != n {
        return Err(Error::Validation(format!(
            "frame {frame_id}: {n} prediction rows but {} feature rows",
            outputs.feats.n_points()
        )));
    }
    members
        .iter()
        .map(|&i| {
            let r = &records[i];
            if let Some(&bad) = r.point_indices.iter().find(|&&p| p as usize >= n) {
                return Err(Error::Validation(format!(
                    "frame {frame_id}: cluster {} references point {bad} but the model outputs have {n} rows",
                    r.uid
                )));
            }
            let entropy = if labeled.contains(&r.uid) {
                0.0
            } else {
                cluster_entropy(&outputs.preds, &r.point_indices)
            };
            Ok(Measured {
                record: i,
                entropy,
                mean_feature: cluster_mean_feature(&outputs.feats, &r.point_indices),
            })
        })
        .collect()
}

/// Entropy, diversity and fused rank of every unlabeled selectable cluster.
pub fn score_iteration(
    records: &[ClusterRecord],
    frame_ids: &[String],
    labeled: &LabeledSet,
    model: &dyn ModelInterface,
) -> Result<IterationScores> {
    let frame_of: BTreeMap<&str, usize> = frame_ids
        .iter()
        .enumerate()
        .map(|(i, f)| (f.as_str(), i))
        .collect();
    let mut by_frame: Vec<Vec<usize>> = vec![Vec::new(); frame_ids.len()];
    for (i, r) in records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_selectable())
    {
        let &f = frame_of.get(r.uid.frame_id.as_str()).ok_or_else(|| {
            Error::Contract(format!("cluster {} belongs to an unknown frame", r.uid))
        })?;
        by_frame[f].push(i);
    }

    let per_frame: Vec<Result<Option<Vec<Measured>>>> = by_frame
        .par_iter()
        .enumerate()
        .map(|(f, members)| {
            if members.is_empty() {
                return Ok(Some(Vec::new()));
            }
            match model.outputs(f)? {
                None => Ok(None),
                Some(out) => {
                    measure_frame(&frame_ids[f], &out, records, members, labeled).map(Some)
                }
            }
        })
        .collect();

    let mut measured = Vec::new();
    let mut missing = Vec::new();
    for (f, res) in per_frame.into_iter().enumerate() {
        match res? {
            Some(m) => measured.extend(m),
            None => missing.push(frame_ids[f].clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingModelFiles(missing));
    }

    let mut labeled_feats: BTreeMap<PartitionId, Vec<Vec<f64>>> = BTreeMap::new();
    let mut unlabeled: BTreeMap<PartitionId, Vec<Measured>> = BTreeMap::new();
    for m in measured {
        let r = &records[m.record];
        let p = r.partition.expect("selectable records carry a partition");
        if labeled.contains(&r.uid) {
            labeled_feats.entry(p).or_default().push(m.mean_feature);
        } else {
            unlabeled.entry(p).or_default().push(m);
        }
    }

    let mut tables = Vec::new();
    let mut scores = Vec::new();
    for (p, mut pool) in unlabeled {
        pool.sort_by(|a, b| records[a.record].uid.cmp(&records[b.record].uid));
        let reference = labeled_feats.get(&p).map(Vec::as_slice).unwrap_or(&[]);
        let div: Vec<f64> = pool
            .par_iter()
            .map(|m| diversity(&m.mean_feature, reference))
            .collect::<Result<_>>()?;
        let inputs: Vec<RankInput> = pool
            .iter()
            .zip(&div)
            .map(|(m, &d)| RankInput {
                uid: records[m.record].uid.clone(),
                entropy: m.entropy,
                diversity: d,
            })
            .collect();
        let table = fuse_and_rank(p, &inputs);
        let pos: BTreeMap<_, usize> = inputs
            .iter()
            .enumerate()
            .map(|(i, x)| (&x.uid, i))
            .collect();
        for entry in &table.order {
            let i = pos[&entry.uid];
            scores.push(ClusterScore {
                uid: entry.uid.clone(),
                partition: p,
                entropy: inputs[i].entropy,
                diversity: inputs[i].diversity,
                rank_entropy: entry.rank_entropy,
                rank_diversity: entry.rank_diversity,
                fused_score: entry.fused_score,
                mean_feature: pool[i].mean_feature.clone(),
            });
        }
        tables.push(table);
    }
    Ok(IterationScores { tables, scores })
}
