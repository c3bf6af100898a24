//! On-disk formats for frames, labels, model outputs and the dataset manifest.
//!
//! Frames follow the SemanticKITTI velodyne layout (`N x 4` little-endian
//! `f32`: x, y, z, intensity) and labels the matching `.label` layout
//! (`N` little-endian `u32`, semantic class in the low 16 bits). Model
//! outputs use an explicit `(rows, cols)` header so truncation is detected
//! without guessing the shape.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const POINT_BYTES: usize = 16;
const HEADER_BYTES: usize = 8;

/// Row-sum deviation that is accepted and corrected by renormalization.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;
/// Rows closer to 1 than this are kept bit-for-bit.
const ROW_SUM_EXACT: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

impl Point {
    pub fn new(x: f32, y: f32, z: f32, intensity: f32) -> Self {
        Point { x, y, z, intensity }
    }

    /// Spatial coordinates widened to `f64`; intensity is not part of any geometry.
    #[inline]
    pub fn xyz(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudFrame {
    pub frame_id: String,
    pub points: Vec<Point>,
}

impl PointCloudFrame {
    pub fn new(frame_id: impl Into<String>, points: Vec<Point>) -> Self {
        PointCloudFrame {
            frame_id: frame_id.into(),
            points,
        }
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(Point::xyz).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.points.len() * POINT_BYTES);
        for p in &self.points {
            for v in [p.x, p.y, p.z, p.intensity] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// Decode a frame from raw velodyne bytes. `origin` is only used in error messages.
pub fn decode_frame(frame_id: &str, bytes: &[u8], origin: &Path) -> Result<PointCloudFrame> {
    if bytes.len() % POINT_BYTES != 0 {
        return Err(Error::format(
            origin,
            format!(
                "{} bytes is not a multiple of {POINT_BYTES}; file is truncated",
                bytes.len()
            ),
        ));
    }
    let mut points = Vec::with_capacity(bytes.len() / POINT_BYTES);
    for (i, chunk) in bytes.chunks_exact(POINT_BYTES).enumerate() {
        let f = |k: usize| f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().unwrap());
        let p = Point::new(f(0), f(1), f(2), f(3));
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::Validation(format!(
                "{}: point {i} has a non-finite coordinate ({}, {}, {})",
                origin.display(),
                p.x,
                p.y,
                p.z
            )));
        }
        points.push(p);
    }
    Ok(PointCloudFrame::new(frame_id, points))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Load a frame; its id is the file stem.
pub fn load_frame(path: &Path) -> Result<PointCloudFrame> {
    let bytes = read(path)?;
    decode_frame(&stem(path), &bytes, path)
}

pub fn write_frame(path: &Path, frame: &PointCloudFrame) -> Result<()> {
    write_bytes(path, &frame.to_bytes())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelVector(pub Vec<u16>);

impl LabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.0
    }
}

pub fn decode_labels(bytes: &[u8], n_points: usize, origin: &Path) -> Result<LabelVector> {
    if bytes.len() != n_points * 4 {
        return Err(Error::format(
            origin,
            format!(
                "expected {n_points} label words ({} bytes), found {} bytes",
                n_points * 4,
                bytes.len()
            ),
        ));
    }
    Ok(LabelVector(
        bytes
            .chunks_exact(4)
            .map(|w| (u32::from_le_bytes(w.try_into().unwrap()) & 0xFFFF) as u16)
            .collect(),
    ))
}

/// Load semantic labels; the instance id in the upper 16 bits is dropped.
pub fn load_labels(path: &Path, n_points: usize) -> Result<LabelVector> {
    let bytes = read(path)?;
    decode_labels(&bytes, n_points, path)
}

pub fn write_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    let mut out = Vec::with_capacity(labels.len() * 4);
    for &l in labels.as_slice() {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    write_bytes(path, &out)
}

/// Row-major `f32` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Contract(format!(
                "matrix shape {rows}x{cols} does not match {} values",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + 4 * self.data.len());
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::format(origin, "missing 8-byte (rows, cols) header"));
        }
        let rows = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_BYTES))
            .ok_or_else(|| Error::format(origin, "header shape overflows"))?;
        if bytes.len() != expected {
            return Err(Error::format(
                origin,
                format!(
                    "header says {rows}x{cols} ({expected} bytes), file has {} bytes",
                    bytes.len()
                ),
            ));
        }
        let data = bytes[HEADER_BYTES..]
            .chunks_exact(4)
            .map(|w| f32::from_le_bytes(w.try_into().unwrap()))
            .collect();
        Ok(DenseMatrix { rows, cols, data })
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.cols, i % self.cols))
    }
}

/// Per-point class probabilities, one row per point.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionMatrix(DenseMatrix);

impl PredictionMatrix {
    /// Validates entries and row sums, renormalizing rows that are off by at
    /// most [`ROW_SUM_TOLERANCE`].
    pub fn new(mut m: DenseMatrix) -> Result<Self> {
        if let Some((r, c)) = m.first_non_finite() {
            return Err(Error::Validation(format!(
                "prediction entry ({r}, {c}) is not finite"
            )));
        }
        for r in 0..m.rows {
            let row = m.row_mut(r);
            if let Some(c) = row.iter().position(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Validation(format!(
                    "prediction entry ({r}, {c}) = {} outside [0, 1]",
                    row[c]
                )));
            }
            let sum: f64 = row.iter().map(|&p| p as f64).sum();
            let dev = (sum - 1.0).abs();
            if dev > ROW_SUM_TOLERANCE {
                return Err(Error::Validation(format!(
                    "prediction row {r} sums to {sum}, outside 1 +/- {ROW_SUM_TOLERANCE}"
                )));
            }
            if dev > ROW_SUM_EXACT {
                for p in row.iter_mut() {
                    *p = (*p as f64 / sum) as f32;
                }
            }
        }
        Ok(PredictionMatrix(m))
    }

    pub fn n_points(&self) -> usize {
        self.0.rows
    }

    pub fn n_classes(&self) -> usize {
        self.0.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }
}

/// Per-point embedding from the segmentation network's last layer.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(DenseMatrix);

impl FeatureMatrix {
    pub fn new(m: DenseMatrix) -> Result<Self> {
        if let Some((r, c)) = m.first_non_finite() {
            return Err(Error::Validation(format!(
                "feature entry at row {r}, col {c} is not finite"
            )));
        }
        Ok(FeatureMatrix(m))
    }

    pub fn n_points(&self) -> usize {
        self.0.rows
    }

    pub fn dim(&self) -> usize {
        self.0.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }
}

pub fn load_prediction_matrix(path: &Path) -> Result<PredictionMatrix> {
    let m = DenseMatrix::decode(&read(path)?, path)?;
    PredictionMatrix::new(m).map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn load_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    let m = DenseMatrix::decode(&read(path)?, path)?;
    FeatureMatrix::new(m).map_err(|e| match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_bytes(path, &m.to_bytes())
}

/// One entry of `manifest.json`. Relative paths resolve against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub frame_id: String,
    pub points_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preds_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feats_path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// Seed the dataset was generated with, if synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub frames: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        text.push('\n');
        write_bytes(path, text.as_bytes())
    }
}

/// A manifest entry with resolved paths and its point count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameEntry {
    pub frame_id: String,
    pub points_path: PathBuf,
    pub labels_path: Option<PathBuf>,
    pub preds_path: Option<PathBuf>,
    pub feats_path: Option<PathBuf>,
    pub n_points: usize,
}

impl FrameEntry {
    pub fn load_frame(&self) -> Result<PointCloudFrame> {
        let bytes = read(&self.points_path)?;
        decode_frame(&self.frame_id, &bytes, &self.points_path)
    }

    pub fn load_labels(&self) -> Result<Option<LabelVector>> {
        self.labels_path
            .as_deref()
            .map(|p| load_labels(p, self.n_points))
            .transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetIndex {
    pub frames: Vec<FrameEntry>,
    pub total_points: u64,
}

impl DatasetIndex {
    pub fn has_labels(&self) -> bool {
        !self.frames.is_empty() && self.frames.iter().all(|f| f.labels_path.is_some())
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Read a manifest and size every frame from its file length. Frame order is manifest order.
pub fn scan_dataset(manifest_path: &Path) -> Result<DatasetIndex> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    let mut frames = Vec::with_capacity(manifest.frames.len());
    let mut total_points = 0u64;
    for entry in manifest.frames {
        if !seen.insert(entry.frame_id.clone()) {
            return Err(Error::format(
                manifest_path,
                format!("duplicate frame_id {:?}", entry.frame_id),
            ));
        }
        let points_path = resolve(base, &entry.points_path);
        let len = fs::metadata(&points_path)
            .map_err(|e| Error::io(&points_path, e))?
            .len();
        if len % POINT_BYTES as u64 != 0 {
            return Err(Error::format(
                &points_path,
                format!("{len} bytes is not a multiple of {POINT_BYTES}"),
            ));
        }
        let n_points = (len / POINT_BYTES as u64) as usize;
        total_points += n_points as u64;
        frames.push(FrameEntry {
            frame_id: entry.frame_id,
            points_path,
            labels_path: entry.labels_path.map(|p| resolve(base, &p)),
            preds_path: entry.preds_path.map(|p| resolve(base, &p)),
            feats_path: entry.feats_path.map(|p| resolve(base, &p)),
            n_points,
        });
    }
    Ok(DatasetIndex {
        frames,
        total_points,
    })
}

/// `<frame>.gmask`: one byte per point, 1 = ground.
pub fn write_ground_mask(path: &Path, is_ground: &[bool]) -> Result<()> {
    let bytes: Vec<u8> = is_ground.iter().map(|&g| g as u8).collect();
    write_bytes(path, &bytes)
}

pub fn load_ground_mask(path: &Path, n_points: usize) -> Result<Vec<bool>> {
    let bytes = read(path)?;
    if bytes.len() != n_points {
        return Err(Error::format(
            path,
            format!("expected {n_points} mask bytes, found {}", bytes.len()),
        ));
    }
    bytes
        .iter()
        .enumerate()
        .map(|(i, &b)| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::format(path, format!("mask byte {i} is {other}"))),
        })
        .collect()
}

/// `<frame>.clu`: one little-endian `i32` id per point (-1 noise, -2 ground).
pub fn write_cluster_ids(path: &Path, ids: &[i32]) -> Result<()> {
    let mut out = Vec::with_capacity(ids.len() * 4);
    for id in ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
    write_bytes(path, &out)
}

pub fn load_cluster_ids(path: &Path, n_points: usize) -> Result<Vec<i32>> {
    let bytes = read(path)?;
    if bytes.len() != n_points * 4 {
        return Err(Error::format(
            path,
            format!(
                "expected {n_points} cluster ids, found {} bytes",
                bytes.len()
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|w| i32::from_le_bytes(w.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad(v: [f32; 4]) -> Vec<u8> {
        v.iter().flat_map(|f| f.to_le_bytes()).collect()
    }

    #[test]
    fn two_quadruples_decode() {
        let mut bytes = quad([1.0, 2.0, 3.0, 0.5]);
        bytes.extend(quad([-1.0, 0.0, 4.0, 0.0]));
        assert_eq!(bytes.len(), 32);
        let f = decode_frame("f", &bytes, Path::new("f.bin")).unwrap();
        assert_eq!(f.n_points(), 2);
        assert_eq!(f.points[1], Point::new(-1.0, 0.0, 4.0, 0.0));
    }

    #[test]
    fn empty_frame_is_valid() {
        let f = decode_frame("f", &[], Path::new("f.bin")).unwrap();
        assert_eq!(f.n_points(), 0);
    }

    #[test]
    fn truncated_frame_is_format_error() {
        let err = decode_frame("f", &[0u8; 20], Path::new("f.bin")).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
    }

    #[test]
    fn nan_coordinate_names_point() {
        let mut bytes = quad([0.0; 4]);
        bytes.extend(quad([0.0, f32::NAN, 0.0, 0.0]));
        let err = decode_frame("f", &bytes, Path::new("f.bin")).unwrap_err();
        match err {
            Error::Validation(msg) => assert!(msg.contains("point 1"), "{msg}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn label_low_bits_kept() {
        let bytes = 0x0001_0009u32.to_le_bytes();
        let l = decode_labels(&bytes, 1, Path::new("x")).unwrap();
        assert_eq!(l.0, vec![9]);
        let zeros = decode_labels(&[0u8; 12], 3, Path::new("x")).unwrap();
        assert_eq!(zeros.0, vec![0, 0, 0]);
        assert!(decode_labels(&[0u8; 8], 3, Path::new("x")).is_err());
    }

    fn matrix_bytes(rows: u32, cols: u32, data: &[f32]) -> Vec<u8> {
        let mut b = rows.to_le_bytes().to_vec();
        b.extend(cols.to_le_bytes());
        for v in data {
            b.extend(v.to_le_bytes());
        }
        b
    }

    #[test]
    fn prediction_rows_validated() {
        let ok = DenseMatrix::decode(&matrix_bytes(2, 2, &[1.0, 0.0, 0.5, 0.5]), Path::new("p"))
            .unwrap();
        let p = PredictionMatrix::new(ok).unwrap();
        assert_eq!(p.row(1), &[0.5, 0.5]);

        let bad = DenseMatrix::new(1, 2, vec![0.6, 0.6]).unwrap();
        assert!(matches!(
            PredictionMatrix::new(bad),
            Err(Error::Validation(_))
        ));

        let near = DenseMatrix::new(1, 2, vec![0.4995, 0.4995]).unwrap();
        let p = PredictionMatrix::new(near).unwrap();
        assert!((p.row(0)[0] - 0.5).abs() < 1e-7);
        assert!((p.row(0)[1] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn matrix_size_mismatch_is_format_error() {
        let mut b = matrix_bytes(2, 2, &[1.0, 0.0, 0.5, 0.5]);
        b.pop();
        assert!(matches!(
            DenseMatrix::decode(&b, Path::new("p")),
            Err(Error::Format { .. })
        ));
        assert!(DenseMatrix::decode(&[0u8; 4], Path::new("p")).is_err());
    }

    #[test]
    fn feature_matrix_cases() {
        let data: Vec<f32> = (0..12).map(|i| i as f32).collect();
        let m = DenseMatrix::decode(&matrix_bytes(3, 4, &data), Path::new("f")).unwrap();
        let f = FeatureMatrix::new(m).unwrap();
        assert_eq!((f.n_points(), f.dim()), (3, 4));

        let mut data = data;
        data[6] = f32::NAN;
        let m = DenseMatrix::new(3, 4, data).unwrap();
        match FeatureMatrix::new(m) {
            Err(Error::Validation(msg)) => assert!(msg.contains("row 1, col 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }

        let empty = DenseMatrix::decode(&matrix_bytes(0, 4, &[]), Path::new("f")).unwrap();
        assert_eq!(FeatureMatrix::new(empty).unwrap().n_points(), 0);
    }

    #[test]
    fn manifest_scan() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        write_bytes(&d.join("b.bin"), &vec![0u8; 100 * 16]).unwrap();
        write_bytes(&d.join("a.bin"), &vec![0u8; 50 * 16]).unwrap();
        let entry = |id: &str, p: &str| ManifestEntry {
            frame_id: id.into(),
            points_path: p.into(),
            labels_path: None,
            preds_path: None,
            feats_path: None,
        };
        let m = Manifest {
            seed: None,
            frames: vec![entry("B", "b.bin"), entry("A", "a.bin")],
        };
        m.write(&d.join("manifest.json")).unwrap();
        let idx = scan_dataset(&d.join("manifest.json")).unwrap();
        assert_eq!(idx.total_points, 150);
        let ids: Vec<_> = idx.frames.iter().map(|f| f.frame_id.as_str()).collect();
        assert_eq!(ids, ["B", "A"]);

        let reordered = Manifest {
            seed: None,
            frames: vec![entry("A", "a.bin"), entry("B", "b.bin")],
        };
        reordered.write(&d.join("m2.json")).unwrap();
        assert_eq!(scan_dataset(&d.join("m2.json")).unwrap().total_points, 150);

        let dup = Manifest {
            seed: None,
            frames: vec![entry("A", "a.bin"), entry("A", "b.bin")],
        };
        dup.write(&d.join("dup.json")).unwrap();
        assert!(scan_dataset(&d.join("dup.json")).is_err());

        let missing = Manifest {
            seed: None,
            frames: vec![entry("C", "c.bin")],
        };
        missing.write(&d.join("missing.json")).unwrap();
        let err = scan_dataset(&d.join("missing.json")).unwrap_err();
        assert!(err.to_string().contains("c.bin"), "{err}");
    }

    proptest! {
        #[test]
        fn feature_round_trip_is_bit_exact(
            rows in 0usize..6,
            cols in 1usize..5,
            seed in any::<u64>(),
        ) {
            use rand::Rng as _;
            let mut rng = crate::seed::rng_from(seed);
            let data: Vec<f32> = (0..rows * cols).map(|_| rng.random_range(-1e6f32..1e6)).collect();
            let m = DenseMatrix::new(rows, cols, data).unwrap();
            let back = DenseMatrix::decode(&m.to_bytes(), Path::new("m")).unwrap();
            prop_assert_eq!(
                m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            prop_assert_eq!((back.rows(), back.cols()), (rows, cols));
        }

        #[test]
        fn frame_round_trip_is_bit_exact(coords in proptest::collection::vec(-1e4f32..1e4, 0..64)) {
            let points: Vec<Point> = coords
                .chunks_exact(4)
                .map(|c| Point::new(c[0], c[1], c[2], c[3]))
                .collect();
            let f = PointCloudFrame::new("x", points);
            let back = decode_frame("x", &f.to_bytes(), Path::new("x")).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
