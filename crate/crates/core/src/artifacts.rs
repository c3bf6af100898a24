//! JSON / JSON-lines artifacts. The first line of every `.jsonl` file is a header object.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::al_loop::{Acquisition, BudgetLedger, ClassReport, ExhaustionWarning, LabeledSet};
use crate::error::{Error, Result};
use crate::io::write_bytes;
use crate::measures::ClusterScore;
use crate::partition::{ClusterRecord, PartitionId, PartitionTable, SizeGroupStats};
use crate::pipeline::Preprocessed;

pub const CLUSTERS_FILE: &str = "clusters.jsonl";
pub const PARTITIONS_FILE: &str = "partitions.json";

pub fn labeled_path(out: &Path, iteration: usize) -> PathBuf {
    out.join(format!("labeled_iter{iteration}.jsonl"))
}

pub fn scores_path(out: &Path, iteration: usize) -> PathBuf {
    out.join(format!("scores_iter{iteration}.jsonl"))
}

pub fn stats_path(out: &Path, iteration: usize) -> PathBuf {
    out.join(format!("stats_iter{iteration}.json"))
}

fn to_line<T: Serialize>(path: &Path, v: &T, out: &mut String) -> Result<()> {
    out.push_str(&serde_json::to_string(v).map_err(|e| Error::json(path, e))?);
    out.push('\n');
    Ok(())
}

pub fn write_jsonl<'a, H, T, I>(path: &Path, header: &H, items: I) -> Result<()>
where
    H: Serialize,
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut text = String::new();
    to_line(path, header, &mut text)?;
    for item in items {
        to_line(path, item, &mut text)?;
    }
    write_bytes(path, text.as_bytes())
}

pub fn read_jsonl<H: DeserializeOwned, T: DeserializeOwned>(path: &Path) -> Result<(H, Vec<T>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(line) => serde_json::from_str(&line.map_err(|e| Error::io(path, e))?)
            .map_err(|e| Error::json(path, e))?,
        None => return Err(Error::format(path, "empty file, expected a header line")),
    };
    let mut items = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            items.push(serde_json::from_str(&line).map_err(|e| Error::json(path, e))?);
        }
    }
    Ok((header, items))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClustersHeader {
    pub seed: u64,
    pub frame_ids: Vec<String>,
    pub total_points: u64,
    pub n_records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub partition: PartitionId,
    pub min_size: Option<u32>,
    pub max_size: Option<u32>,
    pub api_sum: Option<f64>,
    pub n_clusters: u64,
    pub n_points: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionsFile {
    pub seed: u64,
    pub size_cap: u32,
    pub boundaries: Vec<u32>,
    pub partitions: Vec<PartitionSummary>,
    pub filtered: PartitionSummary,
    pub size_groups: Vec<SizeGroupStats>,
    pub excluded_sizes: Vec<u32>,
    pub table: PartitionTable,
}

pub fn partition_summaries(pre: &Preprocessed) -> (Vec<PartitionSummary>, PartitionSummary) {
    let count = |p: PartitionId| {
        pre.records
            .iter()
            .filter(|r| r.partition == Some(p))
            .fold((0u64, 0u64), |(c, n), r| (c + 1, n + r.n_points as u64))
    };
    let parts = pre
        .partitions()
        .into_iter()
        .map(|p| {
            let bin = match p {
                PartitionId::Bin(b) => pre.table.bins.iter().find(|x| x.id == b),
                _ => None,
            };
            let (n_clusters, n_points) = count(p);
            PartitionSummary {
                partition: p,
                min_size: bin.map(|b| b.min_size),
                max_size: bin.map(|b| b.max_size),
                api_sum: bin.map(|b| b.api_sum),
                n_clusters,
                n_points,
            }
        })
        .collect();
    let (n_clusters, n_points) = count(PartitionId::Filtered);
    let filtered = PartitionSummary {
        partition: PartitionId::Filtered,
        min_size: Some(pre.table.size_cap + 1),
        max_size: None,
        api_sum: None,
        n_clusters,
        n_points,
    };
    (parts, filtered)
}

/// Writes `clusters.jsonl` and `partitions.json` into `out`.
pub fn write_preprocessed(out: &Path, pre: &Preprocessed, seed: u64) -> Result<()> {
    let header = ClustersHeader {
        seed,
        frame_ids: pre.frame_ids.clone(),
        total_points: pre.total_points,
        n_records: pre.records.len(),
    };
    write_jsonl(&out.join(CLUSTERS_FILE), &header, &pre.records)?;
    let (partitions, filtered) = partition_summaries(pre);
    write_json(
        &out.join(PARTITIONS_FILE),
        &PartitionsFile {
            seed,
            size_cap: pre.table.size_cap,
            boundaries: pre.table.boundaries(),
            partitions,
            filtered,
            size_groups: pre.stats.groups.clone(),
            excluded_sizes: pre.stats.excluded_sizes.clone(),
            table: pre.table.clone(),
        },
    )
}

/// Reads back what [`write_preprocessed`] wrote.
pub fn read_preprocessed(
    out: &Path,
) -> Result<(ClustersHeader, Vec<ClusterRecord>, PartitionsFile)> {
    let path = out.join(CLUSTERS_FILE);
    let (header, records): (ClustersHeader, Vec<ClusterRecord>) = read_jsonl(&path)?;
    if records.len() != header.n_records {
        return Err(Error::format(
            &path,
            format!(
                "header announces {} records, found {}",
                header.n_records,
                records.len()
            ),
        ));
    }
    let parts = read_json(&out.join(PARTITIONS_FILE))?;
    Ok((header, records, parts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledHeader {
    pub seed: u64,
    pub iteration: usize,
    pub labeled_points: u64,
    pub total_points: u64,
    pub ledger: BudgetLedger,
    pub warnings: Vec<ExhaustionWarning>,
}

pub fn write_labeled(path: &Path, header: &LabeledHeader, labeled: &LabeledSet) -> Result<()> {
    write_jsonl(path, header, labeled.acquired())
}

pub fn read_labeled(path: &Path) -> Result<(LabeledHeader, LabeledSet)> {
    let (header, items): (LabeledHeader, Vec<Acquisition>) = read_jsonl(path)?;
    Ok((header, LabeledSet::from_acquisitions(items)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoresHeader {
    pub seed: u64,
    pub iteration: usize,
    pub n_scored: usize,
}

pub fn write_scores(
    path: &Path,
    seed: u64,
    iteration: usize,
    scores: &[ClusterScore],
) -> Result<()> {
    let header = ScoresHeader {
        seed,
        iteration,
        n_scored: scores.len(),
    };
    write_jsonl(path, &header, scores)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub seed: u64,
    pub iteration: usize,
    pub ignore_classes: Vec<u16>,
    pub report: ClassReport,
}
