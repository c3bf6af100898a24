//! Frame-level preprocessing: ground split, clustering, sizing and partitioning.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{hdbscan, ClusterAssignment, HdbscanParams};
use crate::error::{Error, Result};
use crate::ground::{grid_ground, GroundMask, GroundParams, GroundSegmenter, RansacGround};
use crate::io::{write_cluster_ids, write_ground_mask, DatasetIndex, PointCloudFrame};
use crate::partition::{
    adaptive_bins, assign_partitions, cluster_size, size_statistics, ClusterRecord, ClusterUid,
    PartitionId, PartitionTable, SizeStatistics, UnitKind, DEFAULT_SIZE_CAP,
};
use crate::seed::derive_seed;

/// Cluster id sidecar value of ground points.
pub const GROUND_ID: i32 = -2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessParams {
    pub ground: GroundParams,
    pub hdbscan: HdbscanParams,
    pub n_bins: usize,
    pub size_cap: u32,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            ground: GroundParams::default(),
            hdbscan: HdbscanParams::default(),
            n_bins: 3,
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        self.ground.validate()?;
        self.hdbscan.validate()?;
        if self.n_bins == 0 {
            return Err(Error::Config("n_bins must be at least 1".into()));
        }
        Ok(())
    }
}

/// Units of one frame before partitioning.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameUnits {
    pub frame_id: String,
    pub n_points: usize,
    pub mask: GroundMask,
    /// Per point: object cluster id, `NOISE`, or `GROUND_ID`.
    pub cluster_ids: Vec<i32>,
    /// Object clusters (local ids `0..`) then ground cells.
    pub records: Vec<ClusterRecord>,
}

/// Non-ground points are clustered; too few of them are all noise.
fn cluster_non_ground(points: &[[f64; 3]], params: &HdbscanParams) -> Result<ClusterAssignment> {
    if points.len() < params.min_cluster_size.max(2) || points.len() <= params.min_samples {
        return Ok(ClusterAssignment::all_noise(points.len()));
    }
    hdbscan(points, params)
}

pub fn process_frame(
    frame: &PointCloudFrame,
    segmenter: &dyn GroundSegmenter,
    params: &PreprocessParams,
    seed: u64,
) -> Result<FrameUnits> {
    let frame_seed = derive_seed(seed, &format!("ground/{}", frame.frame_id));
    let mask = if frame.n_points() < 3 {
        log::warn!(
            "frame {} has {} points; treated as having no ground",
            frame.frame_id,
            frame.n_points()
        );
        GroundMask {
            is_ground: vec![false; frame.n_points()],
            status: crate::ground::GroundStatus::NoPlane,
        }
    } else {
        segmenter.segment(frame, frame_seed)?
    };

    let non_ground: Vec<u32> = (0..frame.n_points() as u32)
        .filter(|&i| !mask.is_ground[i as usize])
        .collect();
    let positions: Vec<[f64; 3]> = non_ground
        .iter()
        .map(|&i| frame.points[i as usize].xyz())
        .collect();
    let assignment = cluster_non_ground(&positions, &params.hdbscan)?;

    let mut cluster_ids = vec![GROUND_ID; frame.n_points()];
    for (&i, &c) in non_ground.iter().zip(&assignment.cluster_id) {
        cluster_ids[i as usize] = c;
    }

    let mut records = Vec::new();
    for (local, members) in assignment.members().into_iter().enumerate() {
        let point_indices: Vec<u32> = members.iter().map(|&m| non_ground[m as usize]).collect();
        let size = cluster_size(
            point_indices
                .iter()
                .map(|&i| frame.points[i as usize].xyz()),
        );
        records.push(ClusterRecord {
            uid: ClusterUid::new(frame.frame_id.clone(), local as u32),
            kind: UnitKind::Object,
            n_points: point_indices.len(),
            size,
            partition: None,
            point_indices,
        });
    }
    let first_cell = records.len() as u32;
    for (j, cell) in grid_ground(frame, &mask, params.ground.cell_size)
        .into_iter()
        .enumerate()
    {
        let size = cluster_size(
            cell.point_indices
                .iter()
                .map(|&i| frame.points[i as usize].xyz()),
        );
        records.push(ClusterRecord {
            uid: ClusterUid::new(frame.frame_id.clone(), first_cell + j as u32),
            kind: UnitKind::Ground {
                cell: cell.cell_coords,
            },
            n_points: cell.point_indices.len(),
            size,
            partition: Some(PartitionId::Ground),
            point_indices: cell.point_indices,
        });
    }
    Ok(FrameUnits {
        frame_id: frame.frame_id.clone(),
        n_points: frame.n_points(),
        mask,
        cluster_ids,
        records,
    })
}

/// The partitioned pool of a whole dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed {
    pub frame_ids: Vec<String>,
    pub total_points: u64,
    pub records: Vec<ClusterRecord>,
    pub stats: SizeStatistics,
    pub table: PartitionTable,
}

impl Preprocessed {
    pub fn partitions(&self) -> Vec<PartitionId> {
        self.table.selectable_partitions()
    }
}

/// Size statistics, binning and partition assignment over all frames.
pub fn finalize(frames: Vec<FrameUnits>, params: &PreprocessParams) -> Result<Preprocessed> {
    let frame_ids = frames.iter().map(|f| f.frame_id.clone()).collect();
    let total_points = frames.iter().map(|f| f.n_points as u64).sum();
    let mut records: Vec<ClusterRecord> = frames.into_iter().flat_map(|f| f.records).collect();
    let stats = size_statistics(&records, params.size_cap)?;
    let table = adaptive_bins(&stats.groups, params.n_bins, params.size_cap)?;
    assign_partitions(&mut records, &table);
    Ok(Preprocessed {
        frame_ids,
        total_points,
        records,
        stats,
        table,
    })
}

pub fn preprocess_frames(
    frames: &[PointCloudFrame],
    params: &PreprocessParams,
    seed: u64,
) -> Result<Preprocessed> {
    params.validate()?;
    let segmenter = RansacGround {
        params: params.ground.clone(),
    };
    let units = frames
        .par_iter()
        .map(|f| process_frame(f, &segmenter, params, seed))
        .collect::<Result<Vec<_>>>()?;
    finalize(units, params)
}

/// Loads and processes every frame of the index in parallel; writes
/// `<frame>.gmask` / `<frame>.clu` into `sidecar_dir` when given.
pub fn preprocess_dataset(
    index: &DatasetIndex,
    params: &PreprocessParams,
    seed: u64,
    sidecar_dir: Option<&Path>,
) -> Result<Preprocessed> {
    params.validate()?;
    let segmenter = RansacGround {
        params: params.ground.clone(),
    };
    let units = index
        .frames
        .par_iter()
        .map(|entry| {
            let frame = entry.load_frame()?;
            let units = process_frame(&frame, &segmenter, params, seed)?;
            if let Some(dir) = sidecar_dir {
                write_ground_mask(
                    &dir.join(format!("{}.gmask", frame.frame_id)),
                    &units.mask.is_ground,
                )?;
                write_cluster_ids(
                    &dir.join(format!("{}.clu", frame.frame_id)),
                    &units.cluster_ids,
                )?;
            }
            Ok(units)
        })
        .collect::<Result<Vec<_>>>()?;
    finalize(units, params)
}
