use std::path::Path;

use sizebal_core::al_loop::{
    class_report, run_iteration, run_warm_start, ClassHistograms, ClassReport, FileModel,
    IterationRecord, LabeledSet, LoopData, ModelInterface,
};
use sizebal_core::artifacts::{
    labeled_path, read_labeled, read_preprocessed, scores_path, stats_path, write_json,
    write_labeled, write_preprocessed, write_scores, ClustersHeader, LabeledHeader, StatsFile,
    CLUSTERS_FILE,
};
use sizebal_core::io::{scan_dataset, DatasetIndex, LabelVector, Manifest};
use sizebal_core::partition::{ClusterRecord, PartitionId};
use sizebal_core::pipeline::{preprocess_dataset, Preprocessed};
use sizebal_core::synth::{write_dataset, MockModel, SceneSpec};
use sizebal_core::{Error, Result};

use crate::config::RunConfig;

/// Writes a synthetic dataset under `<out>/dataset`.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Manifest> {
    let mut spec = cfg.synth.clone().unwrap_or_default();
    spec.seed = cfg.seed;
    let manifest = write_dataset(&spec, &cfg.dataset_dir(), Some(&cfg.mock))?;
    let points: usize = manifest.frames.len();
    println!(
        "generated {points} frames in {}",
        cfg.dataset_dir().display()
    );
    Ok(manifest)
}

pub fn cmd_preprocess(cfg: &RunConfig) -> Result<Preprocessed> {
    let index = scan_dataset(&cfg.manifest_path())?;
    let pre = preprocess_dataset(
        &index,
        &cfg.preprocess_params(),
        cfg.seed,
        Some(&cfg.sidecar_dir()),
    )?;
    write_preprocessed(&cfg.out, &pre, cfg.seed)?;
    println!(
        "{} frames, {} points, {} units",
        pre.frame_ids.len(),
        pre.total_points,
        pre.records.len()
    );
    for b in &pre.table.bins {
        println!(
            "partition {}: sizes {}..={} api {:.6}",
            b.id, b.min_size, b.max_size, b.api_sum
        );
    }
    let count = |p: PartitionId| {
        pre.records
            .iter()
            .filter(|r| r.partition == Some(p))
            .count()
    };
    println!("partition ground: {} cells", count(PartitionId::Ground));
    println!("filtered: {} clusters", count(PartitionId::Filtered));
    Ok(pre)
}

/// Preprocessing output as read back from disk.
struct Pool {
    header: ClustersHeader,
    records: Vec<ClusterRecord>,
    partitions: Vec<PartitionId>,
}

impl Pool {
    fn load(cfg: &RunConfig) -> Result<Self> {
        if !cfg.out.join(CLUSTERS_FILE).is_file() {
            return Err(Error::Config(format!(
                "{} has no {CLUSTERS_FILE}; run preprocess first",
                cfg.out.display()
            )));
        }
        let (header, records, parts) = read_preprocessed(&cfg.out)?;
        Ok(Pool {
            header,
            records,
            partitions: parts.table.selectable_partitions(),
        })
    }

    fn data(&self) -> LoopData<'_> {
        LoopData {
            records: &self.records,
            frame_ids: &self.header.frame_ids,
            partitions: &self.partitions,
            total_points: self.header.total_points,
        }
    }
}

fn load_index(cfg: &RunConfig, pool: &Pool) -> Result<DatasetIndex> {
    let index = scan_dataset(&cfg.manifest_path())?;
    let ids: Vec<&String> = index.frames.iter().map(|f| &f.frame_id).collect();
    if ids != pool.header.frame_ids.iter().collect::<Vec<_>>() {
        return Err(Error::Contract(
            "manifest frames differ from the preprocessed frames; rerun preprocess".into(),
        ));
    }
    Ok(index)
}

fn load_all_labels(index: &DatasetIndex) -> Result<Option<Vec<LabelVector>>> {
    if !index.has_labels() {
        return Ok(None);
    }
    index
        .frames
        .iter()
        .map(|f| f.load_labels().map(|l| l.expect("checked by has_labels")))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn record_iteration(cfg: &RunConfig, pool: &Pool, rec: &IterationRecord) -> Result<()> {
    let header = LabeledHeader {
        seed: cfg.seed,
        iteration: rec.iteration,
        labeled_points: rec.labeled.total_points(),
        total_points: pool.header.total_points,
        ledger: rec.ledger.clone(),
        warnings: rec.warnings.clone(),
    };
    write_labeled(
        &labeled_path(&cfg.out, rec.iteration),
        &header,
        &rec.labeled,
    )?;
    if rec.iteration > 0 {
        write_scores(
            &scores_path(&cfg.out, rec.iteration),
            cfg.seed,
            rec.iteration,
            &rec.scores,
        )?;
    }
    println!(
        "iteration {}: {} clusters, {} points ({:.4}% of {})",
        rec.iteration,
        rec.labeled.len(),
        rec.labeled.total_points(),
        100.0 * rec.labeled.total_points() as f64 / pool.header.total_points as f64,
        pool.header.total_points
    );
    Ok(())
}

fn write_stats(
    cfg: &RunConfig,
    pool: &Pool,
    truth: &ClassHistograms,
    iteration: usize,
    labeled: &LabeledSet,
) -> Result<ClassReport> {
    let report = class_report(
        labeled,
        &pool.records,
        truth,
        &pool.partitions,
        &cfg.ignore_classes,
    );
    write_json(
        &stats_path(&cfg.out, iteration),
        &StatsFile {
            seed: cfg.seed,
            iteration,
            ignore_classes: cfg.ignore_classes.clone(),
            report: report.clone(),
        },
    )?;
    Ok(report)
}

fn truth_for(pool: &Pool, labels: &[LabelVector]) -> Result<ClassHistograms> {
    ClassHistograms::build(&pool.records, &pool.header.frame_ids, labels)
}

pub fn cmd_warmstart(cfg: &RunConfig) -> Result<IterationRecord> {
    let pool = Pool::load(cfg)?;
    let rec = run_warm_start(&cfg.al, &pool.data())?;
    record_iteration(cfg, &pool, &rec)?;
    if let Some(labels) = load_all_labels(&load_index(cfg, &pool)?)? {
        write_stats(cfg, &pool, &truth_for(&pool, &labels)?, 0, &rec.labeled)?;
    }
    Ok(rec)
}

fn previous_labeled(cfg: &RunConfig, iteration: usize) -> Result<LabeledSet> {
    if iteration == 0 {
        return Err(Error::Config(
            "iteration 0 is the warm start; use the warmstart command".into(),
        ));
    }
    let prev = labeled_path(&cfg.out, iteration - 1);
    if !prev.is_file() {
        return Err(Error::Config(format!(
            "iteration {iteration} needs {}; run iteration {} first",
            prev.display(),
            iteration - 1
        )));
    }
    let (header, labeled) = read_labeled(&prev)?;
    if header.iteration != iteration - 1 {
        return Err(Error::Config(format!(
            "{} holds iteration {}, expected {}",
            prev.display(),
            header.iteration,
            iteration - 1
        )));
    }
    Ok(labeled)
}

/// One active iteration against model files written by an external trainer.
pub fn cmd_select(cfg: &RunConfig, iteration: usize) -> Result<IterationRecord> {
    let labeled = previous_labeled(cfg, iteration)?;
    let pool = Pool::load(cfg)?;
    let index = load_index(cfg, &pool)?;
    let model = match &cfg.model_dir {
        Some(dir) => FileModel::in_dir(dir, &pool.header.frame_ids),
        None => FileModel::from_index(&index),
    };
    let rec = run_iteration(&cfg.al, &pool.data(), iteration, labeled, &model)?;
    record_iteration(cfg, &pool, &rec)?;
    if let Some(labels) = load_all_labels(&index)? {
        write_stats(
            cfg,
            &pool,
            &truth_for(&pool, &labels)?,
            iteration,
            &rec.labeled,
        )?;
    }
    Ok(rec)
}

fn latest_iteration(out: &Path) -> Option<usize> {
    (0..).take_while(|&k| labeled_path(out, k).is_file()).last()
}

pub fn cmd_stats(cfg: &RunConfig, iteration: Option<usize>) -> Result<ClassReport> {
    let k = match iteration.or_else(|| latest_iteration(&cfg.out)) {
        Some(k) => k,
        None => {
            return Err(Error::Config(
                "no labeled set found; run warmstart first".into(),
            ))
        }
    };
    let path = labeled_path(&cfg.out, k);
    if !path.is_file() {
        return Err(Error::Config(format!("{} does not exist", path.display())));
    }
    let (_, labeled) = read_labeled(&path)?;
    let pool = Pool::load(cfg)?;
    let labels = load_all_labels(&load_index(cfg, &pool)?)?.ok_or_else(|| {
        Error::Config("class statistics need ground-truth labels in the manifest".into())
    })?;
    let report = write_stats(cfg, &pool, &truth_for(&pool, &labels)?, k, &labeled)?;
    println!("iteration {k}");
    print!("{}", report.render());
    Ok(report)
}

/// Generate (unless a manifest is configured), preprocess, warm start, then
/// every active iteration against the mock model, rewriting its files each time.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<IterationRecord>> {
    if cfg.manifest.is_none() {
        cmd_generate(cfg)?;
    }
    cmd_preprocess(cfg)?;
    let pool = Pool::load(cfg)?;
    let index = load_index(cfg, &pool)?;
    let labels = load_all_labels(&index)?.ok_or_else(|| {
        Error::Config("simulate needs ground-truth labels for the mock model".into())
    })?;
    let truth = truth_for(&pool, &labels)?;
    let data = pool.data();

    let mut history = vec![run_warm_start(&cfg.al, &data)?];
    record_iteration(cfg, &pool, &history[0])?;
    write_stats(cfg, &pool, &truth, 0, &history[0].labeled)?;

    let mut model = MockModel::new(cfg.mock.clone(), pool.header.frame_ids.clone(), labels)?
        .with_output_dir(cfg.mock_dir());
    for k in 1..=cfg.al.iterations {
        let labeled = history.last().expect("warm start").labeled.clone();
        model.refresh(k, &labeled)?;
        let rec = run_iteration(&cfg.al, &data, k, labeled, &model)?;
        record_iteration(cfg, &pool, &rec)?;
        write_stats(cfg, &pool, &truth, k, &rec.labeled)?;
        history.push(rec);
    }
    Ok(history)
}

/// Default synthetic spec, for `generate --print-spec`.
pub fn default_spec_json() -> String {
    serde_json::to_string_pretty(&SceneSpec::default()).expect("spec serializes")
}
