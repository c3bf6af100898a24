use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sizebal_core::al_loop::LoopConfig;
use sizebal_core::cluster::HdbscanParams;
use sizebal_core::ground::GroundParams;
use sizebal_core::pipeline::PreprocessParams;
use sizebal_core::synth::{MockModelParams, SceneSpec};
use sizebal_core::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub ground: GroundParams,
    pub hdbscan: HdbscanParams,
}

/// Everything one run needs. Relative paths resolve against the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drives ground RANSAC, warm-start draws and the mock model. Overrides `loop.seed`.
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    /// Dataset manifest; defaults to `<out>/dataset/manifest.json`.
    pub manifest: Option<PathBuf>,
    /// Directory holding `<frame>.pred` / `<frame>.feat` for `select`; defaults to manifest paths.
    pub model_dir: Option<PathBuf>,
    /// Synthetic scene spec used by `generate` and `simulate`.
    pub synth: Option<SceneSpec>,
    /// Alternatively, a path to a synth spec JSON file.
    pub synth_spec: Option<PathBuf>,
    pub mock: MockModelParams,
    pub preprocess: PreprocessSection,
    #[serde(rename = "loop")]
    pub al: LoopConfig,
    /// Classes left out of class reports.
    pub ignore_classes: Vec<u16>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: 1,
            out: PathBuf::from("out"),
            manifest: None,
            model_dir: None,
            synth: None,
            synth_spec: None,
            mock: MockModelParams::default(),
            preprocess: PreprocessSection::default(),
            al: LoopConfig::default(),
            ignore_classes: vec![0],
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        resolve(base, &mut cfg.out);
        for p in [&mut cfg.manifest, &mut cfg.model_dir, &mut cfg.synth_spec]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        Ok(cfg)
    }

    /// Fold command-line overrides and the shared seed into the config, then validate.
    pub fn finish(
        mut self,
        seed: Option<u64>,
        jobs: Option<usize>,
        out: Option<PathBuf>,
    ) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(j) = jobs {
            self.jobs = j;
        }
        if let Some(o) = out {
            self.out = o;
        }
        self.al.seed = self.seed;
        self.mock.seed = self.seed;
        if let Some(path) = self.synth_spec.take() {
            if self.synth.is_some() {
                return Err(Error::Config(
                    "give either synth or synth_spec, not both".into(),
                ));
            }
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Error::Config(format!("cannot read synth spec {}: {e}", path.display()))
            })?;
            self.synth = Some(serde_json::from_str(&text).map_err(|e| {
                Error::Config(format!("invalid synth spec {}: {e}", path.display()))
            })?);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        self.al.validate()?;
        self.preprocess_params().validate()?;
        self.mock.validate()?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        if let Some(m) = &self.manifest {
            if !m.is_file() {
                return Err(Error::Config(format!(
                    "manifest {} does not exist",
                    m.display()
                )));
            }
        }
        if let Some(d) = &self.model_dir {
            if !d.is_dir() {
                return Err(Error::Config(format!(
                    "model_dir {} does not exist",
                    d.display()
                )));
            }
        }
        Ok(())
    }

    pub fn preprocess_params(&self) -> PreprocessParams {
        PreprocessParams {
            ground: self.preprocess.ground.clone(),
            hdbscan: self.preprocess.hdbscan.clone(),
            n_bins: self.al.n_bins,
            size_cap: self.al.size_cap,
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out.join("dataset")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .clone()
            .unwrap_or_else(|| self.dataset_dir().join("manifest.json"))
    }

    pub fn sidecar_dir(&self) -> PathBuf {
        self.out.join("sidecars")
    }

    pub fn mock_dir(&self) -> PathBuf {
        self.out.join("model")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_seed_sharing() {
        let cfg = RunConfig::default()
            .finish(Some(11), Some(4), None)
            .unwrap();
        assert_eq!(
            (cfg.seed, cfg.al.seed, cfg.mock.seed, cfg.jobs),
            (11, 11, 11, 4)
        );
        assert_eq!(cfg.preprocess_params().n_bins, 3);
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(
            RunConfig::default().finish(None, Some(0), None),
            Err(Error::Config(_))
        ));
        let cfg = RunConfig {
            manifest: Some("/nonexistent/manifest.json".into()),
            ..Default::default()
        };
        assert!(matches!(
            cfg.finish(None, None, None),
            Err(Error::Config(_))
        ));
        assert!(serde_json::from_str::<RunConfig>("{\"sed\": 1}").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, "{\"out\": \"o\", \"loop\": {\"iterations\": 2}}").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.out, dir.path().join("o"));
        assert_eq!(cfg.al.iterations, 2);
    }
}
