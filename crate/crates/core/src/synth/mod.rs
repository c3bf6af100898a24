//! Synthetic labeled scenes, a mock segmentation model, and brute-force reference oracles.

pub mod oracle;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::{Exp1, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::al_loop::{LabeledSet, ModelInterface, ModelOutputs};
use crate::cluster::{ClusterAssignment, NOISE};
use crate::error::{Error, Result};
use crate::io::{
    load_feature_matrix, load_prediction_matrix, write_frame, write_labels, write_matrix,
    DenseMatrix, FeatureMatrix, LabelVector, Manifest, ManifestEntry, Point, PointCloudFrame,
    PredictionMatrix,
};
use crate::seed::{self, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub class_id: u16,
    #[serde(default)]
    pub name: String,
    /// Mean of length + width + height (m).
    pub size_mean: f64,
    pub size_sd: f64,
    /// Relative box proportions (length, width, height).
    pub aspect: [f64; 3],
    /// Points per meter of size.
    pub density: f64,
    /// Share of objects drawn from this class.
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub n_frames: usize,
    pub objects_per_frame: usize,
    pub classes: Vec<ClassSpec>,
    /// Ground spans `[-extent, extent]` in x and y (m).
    pub ground_extent: f64,
    /// Ground points per square meter.
    pub ground_density: f64,
    pub ground_class: u16,
    /// Stray points per object or ground point.
    pub noise_rate: f64,
    pub noise_class: u16,
    /// Minimum horizontal clearance between object footprints (m).
    pub min_gap: f64,
    /// Height of every box's base above the ground plane (m).
    pub object_lift: f64,
    pub min_object_points: usize,
    pub seed: u64,
}

fn class(
    id: u16,
    name: &str,
    size_mean: f64,
    size_sd: f64,
    aspect: [f64; 3],
    density: f64,
    frequency: f64,
) -> ClassSpec {
    ClassSpec {
        class_id: id,
        name: name.into(),
        size_mean,
        size_sd,
        aspect,
        density,
        frequency,
    }
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            n_frames: 200,
            objects_per_frame: 30,
            classes: vec![
                class(2, "car", 7.5, 0.5, [4.2, 1.8, 1.5], 65.0, 0.40),
                class(3, "bush", 6.5, 0.4, [1.8, 1.6, 1.1], 50.0, 0.17),
                class(4, "pole", 3.4, 0.3, [0.25, 0.25, 3.0], 10.0, 0.22),
                class(5, "truck", 15.0, 1.5, [8.5, 2.5, 3.5], 60.0, 0.07),
                class(6, "person", 2.8, 0.2, [0.6, 0.5, 1.7], 10.0, 0.08),
                class(7, "bicycle", 2.2, 0.15, [1.3, 0.3, 0.6], 10.0, 0.06),
            ],
            ground_extent: 25.0,
            ground_density: 2.0,
            ground_class: 1,
            noise_rate: 0.005,
            noise_class: 0,
            min_gap: 1.0,
            object_lift: 0.6,
            min_object_points: 40,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.objects_per_frame > 0 && self.classes.is_empty() {
            return err("objects requested but no classes defined".into());
        }
        if !self.classes.is_empty() {
            let sum: f64 = self.classes.iter().map(|c| c.frequency).sum();
            if (sum - 1.0).abs() > 1e-6 {
                return err(format!("class frequencies sum to {sum}, expected 1"));
            }
        }
        for c in &self.classes {
            if !(c.size_mean > 0.0) || c.size_sd < 0.0 || c.frequency < 0.0 || c.density < 0.0 {
                return err(format!(
                    "class {} has invalid size, density or frequency",
                    c.class_id
                ));
            }
            if c.aspect.iter().any(|&a| !(a > 0.0)) {
                return err(format!("class {} aspect must be positive", c.class_id));
            }
            if c.class_id == self.ground_class || c.class_id == self.noise_class {
                return err(format!(
                    "class {} collides with the ground or noise class",
                    c.class_id
                ));
            }
        }
        if !(self.ground_extent > 0.0)
            || self.ground_density < 0.0
            || !(0.0..=1.0).contains(&self.noise_rate)
        {
            return err("ground extent, ground density or noise rate out of range".into());
        }
        if self.min_gap < 0.0 || self.object_lift < 0.0 {
            return err("min_gap and object_lift must be non-negative".into());
        }
        Ok(())
    }

    pub fn frame_id(index: usize) -> String {
        format!("{index:06}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedObject {
    pub class_id: u16,
    pub size_draw: f64,
    pub dims: [f64; 3],
    /// Footprint center; the box base sits at `object_lift`.
    pub center: [f64; 2],
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub frame: PointCloudFrame,
    pub labels: LabelVector,
    /// Object index per point; ground and stray points are `NOISE`.
    pub planted: ClusterAssignment,
    pub objects: Vec<PlantedObject>,
}

const PLACEMENT_TRIES: usize = 500;

fn place(
    rng: &mut Rng,
    extent: f64,
    dims: [f64; 3],
    gap: f64,
    placed: &[PlantedObject],
) -> Option<[f64; 2]> {
    let (hx, hy) = (dims[0] / 2.0, dims[1] / 2.0);
    if hx >= extent || hy >= extent {
        return None;
    }
    for _ in 0..PLACEMENT_TRIES {
        let c = [
            rng.random_range(-extent + hx..extent - hx),
            rng.random_range(-extent + hy..extent - hy),
        ];
        let clear = placed.iter().all(|o| {
            let dx = (c[0] - o.center[0]).abs() - hx - o.dims[0] / 2.0;
            let dy = (c[1] - o.center[1]).abs() - hy - o.dims[1] / 2.0;
            dx >= gap || dy >= gap
        });
        if clear {
            return Some(c);
        }
    }
    None
}

pub fn generate_scene(spec: &SceneSpec, frame_id: &str, rng: &mut Rng) -> Result<SyntheticScene> {
    spec.validate()?;
    let e = spec.ground_extent;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut planted = Vec::new();

    let n_ground = (spec.ground_density * 4.0 * e * e).round() as usize;
    let jitter = Normal::new(0.0, 0.02).expect("valid sd");
    for _ in 0..n_ground {
        let z: f64 = jitter.sample(rng);
        points.push(Point::new(
            rng.random_range(-e..e) as f32,
            rng.random_range(-e..e) as f32,
            z as f32,
            0.0,
        ));
        labels.push(spec.ground_class);
        planted.push(NOISE);
    }

    let mut objects: Vec<PlantedObject> = Vec::new();
    if spec.objects_per_frame > 0 {
        let picker = WeightedIndex::new(spec.classes.iter().map(|c| c.frequency))
            .map_err(|err| Error::Config(format!("class frequencies: {err}")))?;
        for k in 0..spec.objects_per_frame {
            let c = &spec.classes[picker.sample(rng)];
            let draw = Normal::new(c.size_mean, c.size_sd)
                .expect("validated sd")
                .sample(rng)
                .max(0.25 * c.size_mean);
            let a: f64 = c.aspect.iter().sum();
            let mut dims = c.aspect.map(|x| x * draw / a);
            if rng.random_bool(0.5) {
                dims.swap(0, 1);
            }
            let center = place(rng, e, dims, spec.min_gap, &objects).ok_or_else(|| {
                Error::Config(format!(
                    "cannot place object {k} of class {} in frame {frame_id}: scene is too crowded",
                    c.class_id
                ))
            })?;
            let n = ((c.density * draw).round() as usize).max(spec.min_object_points);
            for _ in 0..n {
                let x = center[0] + rng.random_range(-0.5..0.5) * dims[0];
                let y = center[1] + rng.random_range(-0.5..0.5) * dims[1];
                let z = spec.object_lift + rng.random_range(0.0..1.0) * dims[2];
                points.push(Point::new(x as f32, y as f32, z as f32, 0.0));
                labels.push(c.class_id);
                planted.push(k as i32);
            }
            objects.push(PlantedObject {
                class_id: c.class_id,
                size_draw: draw,
                dims,
                center,
                n_points: n,
            });
        }
    }

    let n_noise = (spec.noise_rate * points.len() as f64).round() as usize;
    for _ in 0..n_noise {
        let p = Point::new(
            rng.random_range(-e..e) as f32,
            rng.random_range(-e..e) as f32,
            rng.random_range(0.5..6.0) as f32,
            0.0,
        );
        points.push(p);
        labels.push(spec.noise_class);
        planted.push(NOISE);
    }

    Ok(SyntheticScene {
        frame: PointCloudFrame::new(frame_id, points),
        labels: LabelVector(labels),
        planted: ClusterAssignment {
            cluster_id: planted,
            n_clusters: objects.len(),
        },
        objects,
    })
}

/// Frame `index` of the spec, drawn from its own seed stream.
pub fn generate_frame(spec: &SceneSpec, index: usize) -> Result<SyntheticScene> {
    let id = SceneSpec::frame_id(index);
    generate_scene(
        spec,
        &id,
        &mut seed::stream(spec.seed, &format!("scene/{id}")),
    )
}

pub fn generate_dataset(spec: &SceneSpec) -> Result<Vec<SyntheticScene>> {
    (0..spec.n_frames)
        .into_par_iter()
        .map(|i| generate_frame(spec, i))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockModelParams {
    pub n_classes: usize,
    pub label_flip_rate: f64,
    /// Sharpness exponent applied to a flat Dirichlet draw; larger is more confident.
    pub concentration: f64,
    /// Per-class overrides of `concentration`, keyed by the true class.
    pub class_concentration: BTreeMap<u16, f64>,
    pub feature_dim: usize,
    /// One vector per class; generated from `seed` when empty.
    pub prototypes: Vec<Vec<f32>>,
    pub prototype_scale: f64,
    pub feature_noise_sd: f64,
    pub seed: u64,
}

impl Default for MockModelParams {
    fn default() -> Self {
        MockModelParams {
            n_classes: 8,
            label_flip_rate: 0.1,
            concentration: 3.0,
            class_concentration: BTreeMap::new(),
            feature_dim: 8,
            prototypes: Vec::new(),
            prototype_scale: 1.0,
            feature_noise_sd: 0.3,
            seed: 0,
        }
    }
}

impl MockModelParams {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..=1.0).contains(&self.label_flip_rate) {
            return err("label_flip_rate must lie in [0, 1]");
        }
        if self.n_classes < 2 {
            return err("mock model needs at least 2 classes");
        }
        if self.feature_dim < 2 {
            return err("feature_dim must be at least 2");
        }
        if !(self.concentration > 0.0) || self.class_concentration.values().any(|&k| !(k > 0.0)) {
            return err("concentration must be positive");
        }
        if !(self.feature_noise_sd >= 0.0) {
            return err("feature_noise_sd must be non-negative");
        }
        if !self.prototypes.is_empty()
            && (self.prototypes.len() != self.n_classes
                || self.prototypes.iter().any(|p| p.len() != self.feature_dim))
        {
            return err("prototypes must hold n_classes vectors of feature_dim entries");
        }
        Ok(())
    }

    pub fn resolved_prototypes(&self) -> Vec<Vec<f32>> {
        if !self.prototypes.is_empty() {
            return self.prototypes.clone();
        }
        let mut rng = seed::stream(self.seed, "prototypes");
        let normal = Normal::new(0.0, self.prototype_scale).expect("valid scale");
        (0..self.n_classes)
            .map(|_| {
                (0..self.feature_dim)
                    .map(|_| normal.sample(&mut rng) as f32)
                    .collect()
            })
            .collect()
    }
}

fn check_labels(labels: &LabelVector, n_classes: usize) -> Result<()> {
    match labels.as_slice().iter().find(|&&c| c as usize >= n_classes) {
        Some(c) => Err(Error::Validation(format!(
            "label {c} exceeds the mock model's {n_classes} classes"
        ))),
        None => Ok(()),
    }
}

/// Softmax-like rows: the target class (true, or a flipped one) carries the
/// largest mass; `p ∝ w^κ` for `w` uniform on the simplex.
pub fn mock_predict(
    labels: &LabelVector,
    params: &MockModelParams,
    rng: &mut Rng,
) -> Result<PredictionMatrix> {
    params.validate()?;
    check_labels(labels, params.n_classes)?;
    let c = params.n_classes;
    let mut data = Vec::with_capacity(labels.len() * c);
    let mut w = vec![0.0f64; c];
    let mut exps = vec![0.0f64; c];
    for &truth in labels.as_slice() {
        let truth = truth as usize;
        let target = if rng.random_bool(params.label_flip_rate) {
            let other = rng.random_range(0..c - 1);
            if other >= truth {
                other + 1
            } else {
                other
            }
        } else {
            truth
        };
        let kappa = params
            .class_concentration
            .get(&(truth as u16))
            .copied()
            .unwrap_or(params.concentration);
        for x in w.iter_mut() {
            let e: f64 = Exp1.sample(rng);
            *x = e.max(f64::MIN_POSITIVE).ln();
        }
        let top = (0..c)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]))
            .expect("at least two classes");
        w.swap(top, target);
        let max = w[target];
        if kappa.is_infinite() {
            data.extend((0..c).map(|k| if k == target { 1.0f32 } else { 0.0 }));
            continue;
        }
        for (e, &l) in exps.iter_mut().zip(&w) {
            *e = (kappa * (l - max)).exp();
        }
        let z: f64 = exps.iter().sum();
        data.extend(exps.iter().map(|&v| (v / z) as f32));
    }
    PredictionMatrix::new(DenseMatrix::new(labels.len(), c, data)?)
}

pub fn mock_features(
    labels: &LabelVector,
    params: &MockModelParams,
    rng: &mut Rng,
) -> Result<FeatureMatrix> {
    params.validate()?;
    check_labels(labels, params.n_classes)?;
    let protos = params.resolved_prototypes();
    let normal = Normal::new(0.0, params.feature_noise_sd).expect("validated sd");
    let f = params.feature_dim;
    let mut data = Vec::with_capacity(labels.len() * f);
    for &c in labels.as_slice() {
        for &v in &protos[c as usize] {
            let noise: f64 = if params.feature_noise_sd > 0.0 {
                normal.sample(rng)
            } else {
                0.0
            };
            data.push(v + noise as f32);
        }
    }
    FeatureMatrix::new(DenseMatrix::new(labels.len(), f, data)?)
}

/// Outputs for one frame after `iteration` rounds of pretend retraining.
pub fn mock_outputs(
    params: &MockModelParams,
    frame_id: &str,
    labels: &LabelVector,
    iteration: usize,
) -> Result<ModelOutputs> {
    let mut rng = seed::stream(params.seed, &format!("mock/{iteration}/{frame_id}"));
    Ok(ModelOutputs {
        preds: mock_predict(labels, params, &mut rng)?,
        feats: mock_features(labels, params, &mut rng)?,
    })
}

/// A model that derives its outputs from the ground truth. With an output
/// directory, every refresh writes `<frame>.pred` / `<frame>.feat` there and
/// outputs are read back from those files.
#[derive(Clone, Debug)]
pub struct MockModel {
    params: MockModelParams,
    frame_ids: Vec<String>,
    labels: Vec<LabelVector>,
    iteration: usize,
    output_dir: Option<PathBuf>,
}

impl MockModel {
    pub fn new(
        params: MockModelParams,
        frame_ids: Vec<String>,
        labels: Vec<LabelVector>,
    ) -> Result<Self> {
        params.validate()?;
        if frame_ids.len() != labels.len() {
            return Err(Error::Validation(
                "one label vector per frame is required".into(),
            ));
        }
        Ok(MockModel {
            params,
            frame_ids,
            labels,
            iteration: 0,
            output_dir: None,
        })
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = Some(dir.into());
        self
    }

    pub fn pred_path(dir: &Path, frame_id: &str) -> PathBuf {
        dir.join(format!("{frame_id}.pred"))
    }

    pub fn feat_path(dir: &Path, frame_id: &str) -> PathBuf {
        dir.join(format!("{frame_id}.feat"))
    }

    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        (0..self.frame_ids.len()).into_par_iter().try_for_each(|f| {
            let id = &self.frame_ids[f];
            let out = mock_outputs(&self.params, id, &self.labels[f], self.iteration)?;
            write_matrix(&Self::pred_path(dir, id), out.preds.matrix())?;
            write_matrix(&Self::feat_path(dir, id), out.feats.matrix())
        })
    }
}

impl ModelInterface for MockModel {
    fn refresh(&mut self, iteration: usize, _labeled: &LabeledSet) -> Result<()> {
        self.iteration = iteration;
        if let Some(dir) = self.output_dir.clone() {
            self.write_outputs(&dir)?;
        }
        Ok(())
    }

    fn outputs(&self, frame: usize) -> Result<Option<ModelOutputs>> {
        let Some(id) = self.frame_ids.get(frame) else {
            return Ok(None);
        };
        match &self.output_dir {
            None => mock_outputs(&self.params, id, &self.labels[frame], self.iteration).map(Some),
            Some(dir) => {
                let (p, f) = (Self::pred_path(dir, id), Self::feat_path(dir, id));
                if !p.is_file() || !f.is_file() {
                    return Ok(None);
                }
                Ok(Some(ModelOutputs {
                    preds: load_prediction_matrix(&p)?,
                    feats: load_feature_matrix(&f)?,
                }))
            }
        }
    }
}

/// Writes `manifest.json`, `velodyne/*.bin` and `labels/*.label` under `dir`;
/// with mock parameters also `predictions/*.pred` and `features/*.feat`.
pub fn write_dataset(
    spec: &SceneSpec,
    dir: &Path,
    mock: Option<&MockModelParams>,
) -> Result<Manifest> {
    spec.validate()?;
    if let Some(m) = mock {
        m.validate()?;
    }
    let frames = (0..spec.n_frames)
        .into_par_iter()
        .map(|i| {
            let scene = generate_frame(spec, i)?;
            let id = scene.frame.frame_id.clone();
            let points_path = PathBuf::from("velodyne").join(format!("{id}.bin"));
            let labels_path = PathBuf::from("labels").join(format!("{id}.label"));
            write_frame(&dir.join(&points_path), &scene.frame)?;
            write_labels(&dir.join(&labels_path), &scene.labels)?;
            let (mut preds_path, mut feats_path) = (None, None);
            if let Some(m) = mock {
                let out = mock_outputs(m, &id, &scene.labels, 0)?;
                let p = PathBuf::from("predictions").join(format!("{id}.pred"));
                let f = PathBuf::from("features").join(format!("{id}.feat"));
                write_matrix(&dir.join(&p), out.preds.matrix())?;
                write_matrix(&dir.join(&f), out.feats.matrix())?;
                preds_path = Some(p);
                feats_path = Some(f);
            }
            Ok(ManifestEntry {
                frame_id: id,
                points_path,
                labels_path: Some(labels_path),
                preds_path,
                feats_path,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        seed: Some(spec.seed),
        frames,
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(manifest)
}
