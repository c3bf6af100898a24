//! Ground / non-ground split and tiling of ground points into square cells.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::PointCloudFrame;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundParams {
    pub ransac_iters: usize,
    /// Point-to-plane distance (m) below which a point is a plane inlier.
    pub inlier_threshold: f64,
    /// Maximum angle (degrees) between the plane normal and the z axis.
    pub max_plane_tilt: f64,
    /// Minimum share of points a plane must explain to count as ground.
    pub min_inlier_fraction: f64,
    /// Edge length (m) of a ground cell.
    pub cell_size: f64,
}

impl Default for GroundParams {
    fn default() -> Self {
        GroundParams {
            ransac_iters: 200,
            inlier_threshold: 0.25,
            max_plane_tilt: 20.0,
            min_inlier_fraction: 0.01,
            cell_size: 10.0,
        }
    }
}

impl GroundParams {
    pub fn validate(&self) -> Result<()> {
        if self.ransac_iters == 0 {
            return Err(Error::Config("ransac_iters must be positive".into()));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::Config("inlier_threshold must be positive".into()));
        }
        if !(0.0..=90.0).contains(&self.max_plane_tilt) {
            return Err(Error::Config("max_plane_tilt must lie in [0, 90]".into()));
        }
        if !(self.cell_size > 0.0) {
            return Err(Error::Config("cell_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundStatus {
    Found,
    /// No admissible plane explained enough points; the frame may lack ground.
    NoPlane,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundMask {
    pub is_ground: Vec<bool>,
    pub status: GroundStatus,
}

impl GroundMask {
    pub fn n_ground(&self) -> usize {
        self.is_ground.iter().filter(|&&g| g).count()
    }
}

/// Anything that can split a frame into ground and non-ground points.
pub trait GroundSegmenter: Sync {
    fn segment(&self, frame: &PointCloudFrame, seed: u64) -> Result<GroundMask>;
}

/// Single-plane RANSAC restricted to near-horizontal planes.
#[derive(Clone, Debug, Default)]
pub struct RansacGround {
    pub params: GroundParams,
}

impl GroundSegmenter for RansacGround {
    fn segment(&self, frame: &PointCloudFrame, seed: u64) -> Result<GroundMask> {
        segment_ground(frame, &self.params, seed)
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn segment_ground(
    frame: &PointCloudFrame,
    params: &GroundParams,
    seed: u64,
) -> Result<GroundMask> {
    let n = frame.n_points();
    if n < 3 {
        return Err(Error::Validation(format!(
            "frame {} has {n} points; ground segmentation needs at least 3",
            frame.frame_id
        )));
    }
    let pts = frame.positions();
    let min_cos = params.max_plane_tilt.to_radians().cos();
    let mut rng = seed::rng_from(seed);

    // (normal, offset, inlier count)
    let mut best: Option<([f64; 3], f64, usize)> = None;
    for _ in 0..params.ransac_iters {
        let idx = sample(&mut rng, n, 3);
        let (a, b, c) = (pts[idx.index(0)], pts[idx.index(1)], pts[idx.index(2)]);
        let normal = cross(sub(b, a), sub(c, a));
        let len = dot(normal, normal).sqrt();
        if len < 1e-12 {
            continue;
        }
        let normal = [normal[0] / len, normal[1] / len, normal[2] / len];
        if normal[2].abs() < min_cos {
            continue;
        }
        let offset = dot(normal, a);
        let count = pts
            .iter()
            .filter(|p| (dot(normal, **p) - offset).abs() <= params.inlier_threshold)
            .count();
        if best.is_none_or(|(_, _, c)| count > c) {
            best = Some((normal, offset, count));
        }
    }

    let needed = (params.min_inlier_fraction * n as f64).ceil() as usize;
    match best {
        Some((normal, offset, count)) if count >= needed.max(3) => Ok(GroundMask {
            is_ground: pts
                .iter()
                .map(|p| (dot(normal, *p) - offset).abs() <= params.inlier_threshold)
                .collect(),
            status: GroundStatus::Found,
        }),
        _ => {
            log::warn!("frame {}: no ground plane found", frame.frame_id);
            Ok(GroundMask {
                is_ground: vec![false; n],
                status: GroundStatus::NoPlane,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundCell {
    pub frame_id: String,
    pub cell_coords: (i64, i64),
    pub point_indices: Vec<u32>,
}

/// Tile ground points into half-open `cell_size` squares anchored at the origin.
/// Cells come out sorted by `(i, j)`; empty cells are omitted.
pub fn grid_ground(frame: &PointCloudFrame, mask: &GroundMask, cell_size: f64) -> Vec<GroundCell> {
    let mut cells: BTreeMap<(i64, i64), Vec<u32>> = BTreeMap::new();
    for (i, (p, &g)) in frame.points.iter().zip(&mask.is_ground).enumerate() {
        if g {
            let key = (
                (p.x as f64 / cell_size).floor() as i64,
                (p.y as f64 / cell_size).floor() as i64,
            );
            cells.entry(key).or_default().push(i as u32);
        }
    }
    cells
        .into_iter()
        .map(|(cell_coords, point_indices)| GroundCell {
            frame_id: frame.frame_id.clone(),
            cell_coords,
            point_indices,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Point;
    use rand::Rng;

    fn frame(points: Vec<[f32; 3]>) -> PointCloudFrame {
        PointCloudFrame::new(
            "t",
            points
                .into_iter()
                .map(|p| Point::new(p[0], p[1], p[2], 0.0))
                .collect(),
        )
    }

    #[test]
    fn plane_with_clutter() {
        let mut rng = seed::rng_from(3);
        let mut pts = Vec::new();
        for _ in 0..1000 {
            pts.push([
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                0.0,
            ]);
        }
        for _ in 0..100 {
            pts.push([
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(1.0..3.0),
            ]);
        }
        let f = frame(pts);
        let mask = segment_ground(&f, &GroundParams::default(), 11).unwrap();
        let hits = mask.is_ground[..1000].iter().filter(|&&g| g).count();
        assert!(hits as f64 / 1000.0 >= 0.99, "recall {hits}");
        assert!(mask.is_ground[1000..].iter().all(|&g| !g));
        assert_eq!(
            mask,
            segment_ground(&f, &GroundParams::default(), 11).unwrap()
        );
    }

    #[test]
    fn three_points_fit_exactly() {
        let f = frame(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let mask = segment_ground(&f, &GroundParams::default(), 0).unwrap();
        assert_eq!(mask.is_ground, vec![true; 3]);
    }

    #[test]
    fn vertical_wall_is_rejected() {
        let mut rng = seed::rng_from(5);
        let pts = (0..500)
            .map(|_| {
                [
                    5.0,
                    rng.random_range(-10.0..10.0),
                    rng.random_range(0.0..4.0),
                ]
            })
            .collect();
        let mask = segment_ground(&frame(pts), &GroundParams::default(), 1).unwrap();
        assert_eq!(mask.status, GroundStatus::NoPlane);
        assert!(mask.is_ground.iter().all(|&g| !g));
    }

    #[test]
    fn too_few_points() {
        let f = frame(vec![[0.0; 3], [1.0, 0.0, 0.0]]);
        assert!(segment_ground(&f, &GroundParams::default(), 0).is_err());
    }

    #[test]
    fn grid_floor_arithmetic() {
        let f = frame(vec![
            [1.0, 1.0, 0.0],
            [9.0, 9.0, 0.0],
            [11.0, 1.0, 0.0],
            [10.0, 0.0, 0.0],
        ]);
        let mask = GroundMask {
            is_ground: vec![true, true, true, false],
            status: GroundStatus::Found,
        };
        let cells = grid_ground(&f, &mask, 10.0);
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].cell_coords, (0, 0));
        assert_eq!(cells[0].point_indices, vec![0, 1]);
        assert_eq!(cells[1].cell_coords, (1, 0));
        assert_eq!(cells[1].point_indices, vec![2]);

        let boundary = GroundMask {
            is_ground: vec![false, false, false, true],
            status: GroundStatus::Found,
        };
        assert_eq!(grid_ground(&f, &boundary, 10.0)[0].cell_coords, (1, 0));

        let none = GroundMask {
            is_ground: vec![false; 4],
            status: GroundStatus::NoPlane,
        };
        assert!(grid_ground(&f, &none, 10.0).is_empty());
    }

    #[test]
    fn negative_coordinates_floor_down() {
        let f = frame(vec![[-0.5, -10.0, 0.0], [-10.5, 3.0, 0.0]]);
        let mask = GroundMask {
            is_ground: vec![true, true],
            status: GroundStatus::Found,
        };
        let cells = grid_ground(&f, &mask, 10.0);
        let coords: Vec<_> = cells.iter().map(|c| c.cell_coords).collect();
        assert_eq!(coords, vec![(-2, 0), (-1, -1)]);
    }
}
