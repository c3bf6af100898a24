use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::LabelVector;
use crate::partition::{ClusterRecord, ClusterUid, PartitionId};

use super::LabeledSet;

/// Ground-truth class counts of every unit and of the whole dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassHistograms {
    pub per_record: Vec<BTreeMap<u16, u64>>,
    /// Over all points, including noise and filtered clusters.
    pub dataset: BTreeMap<u16, u64>,
    index: HashMap<ClusterUid, usize>,
}

impl ClassHistograms {
    /// `labels[f]` holds the labels of `frame_ids[f]`.
    pub fn build(
        records: &[ClusterRecord],
        frame_ids: &[String],
        labels: &[LabelVector],
    ) -> Result<Self> {
        if labels.len() != frame_ids.len() {
            return Err(Error::Validation(format!(
                "{} label vectors for {} frames",
                labels.len(),
                frame_ids.len()
            )));
        }
        let frame_of: HashMap<&str, usize> = frame_ids
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();
        let mut dataset = BTreeMap::new();
        for l in labels {
            for &c in l.as_slice() {
                *dataset.entry(c).or_default() += 1;
            }
        }
        let mut per_record = Vec::with_capacity(records.len());
        for r in records {
            let f = *frame_of.get(r.uid.frame_id.as_str()).ok_or_else(|| {
                Error::Contract(format!("cluster {} belongs to an unknown frame", r.uid))
            })?;
            let l = labels[f].as_slice();
            let mut h = BTreeMap::new();
            for &p in &r.point_indices {
                let c = *l.get(p as usize).ok_or_else(|| {
                    Error::Validation(format!(
                        "cluster {} references point {p} beyond the label vector",
                        r.uid
                    ))
                })?;
                *h.entry(c).or_default() += 1;
            }
            per_record.push(h);
        }
        let index = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.uid.clone(), i))
            .collect();
        Ok(ClassHistograms {
            per_record,
            dataset,
            index,
        })
    }

    pub fn of(&self, uid: &ClusterUid) -> Option<&BTreeMap<u16, u64>> {
        self.index.get(uid).map(|&i| &self.per_record[i])
    }

    /// Most frequent class of a unit; ties go to the smaller class id.
    pub fn majority(&self, uid: &ClusterUid) -> Option<u16> {
        let h = self.of(uid)?;
        let mut best: Option<(u16, u64)> = None;
        for (&c, &n) in h {
            if best.is_none_or(|(_, m)| n > m) {
                best = Some((c, n));
            }
        }
        best.map(|(c, _)| c)
    }
}

/// Per-class distribution over partitions; each class column sums to 1 (or 0 if absent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionClassMatrix {
    pub partitions: Vec<PartitionId>,
    pub classes: Vec<u16>,
    /// `fractions[p][c]`.
    pub fractions: Vec<Vec<f64>>,
}

pub fn partition_class_matrix<'a, I>(
    units: I,
    partitions: &[PartitionId],
    classes: &[u16],
) -> PartitionClassMatrix
where
    I: IntoIterator<Item = (PartitionId, &'a BTreeMap<u16, u64>)>,
{
    let mut counts = vec![vec![0u64; classes.len()]; partitions.len()];
    for (p, h) in units {
        let Some(pi) = partitions.iter().position(|&q| q == p) else {
            continue;
        };
        for (ci, c) in classes.iter().enumerate() {
            counts[pi][ci] += h.get(c).copied().unwrap_or(0);
        }
    }
    let col_totals: Vec<u64> = (0..classes.len())
        .map(|c| counts.iter().map(|row| row[c]).sum())
        .collect();
    let fractions = counts
        .iter()
        .map(|row| {
            row.iter()
                .zip(&col_totals)
                .map(|(&n, &t)| if t == 0 { 0.0 } else { n as f64 / t as f64 })
                .collect()
        })
        .collect();
    PartitionClassMatrix {
        partitions: partitions.to_vec(),
        classes: classes.to_vec(),
        fractions,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: Vec<u16>,
    pub labeled_points: Vec<u64>,
    pub labeled_fraction: Vec<f64>,
    pub dataset_points: Vec<u64>,
    pub dataset_fraction: Vec<f64>,
    /// Where each class's labeled points came from.
    pub labeled_by_partition: PartitionClassMatrix,
    /// Where each class's points sit across the whole selectable pool.
    pub pool_by_partition: PartitionClassMatrix,
    /// Entropy of the labeled class distribution over `ln(classes.len())`.
    pub balance: f64,
}

fn fractions(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .map(|&n| {
            if total == 0 {
                0.0
            } else {
                n as f64 / total as f64
            }
        })
        .collect()
}

/// Normalized entropy of a count vector; 0 for fewer than two classes or no counts.
pub fn balance_score(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if counts.len() < 2 || total == 0 {
        return 0.0;
    }
    let h: f64 = counts
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let q = n as f64 / total as f64;
            -q * q.ln()
        })
        .sum();
    h / (counts.len() as f64).ln()
}

/// Classes in `ignore` (e.g. unlabeled) are left out of every column and of the balance score.
pub fn class_report(
    labeled: &LabeledSet,
    records: &[ClusterRecord],
    truth: &ClassHistograms,
    partitions: &[PartitionId],
    ignore: &[u16],
) -> ClassReport {
    let classes: Vec<u16> = truth
        .dataset
        .keys()
        .copied()
        .filter(|c| !ignore.contains(c))
        .collect();
    let empty = BTreeMap::new();
    let labeled_units: Vec<(PartitionId, &BTreeMap<u16, u64>)> = labeled
        .acquired()
        .iter()
        .map(|a| (a.partition, truth.of(&a.uid).unwrap_or(&empty)))
        .collect();
    let mut labeled_points = vec![0u64; classes.len()];
    for (_, h) in &labeled_units {
        for (ci, c) in classes.iter().enumerate() {
            labeled_points[ci] += h.get(c).copied().unwrap_or(0);
        }
    }
    let dataset_points: Vec<u64> = classes.iter().map(|c| truth.dataset[c]).collect();
    let pool = records
        .iter()
        .zip(&truth.per_record)
        .filter(|(r, _)| r.is_selectable())
        .map(|(r, h)| (r.partition.expect("selectable"), h));
    let present: BTreeSet<u16> = classes.iter().copied().collect();
    debug_assert_eq!(present.len(), classes.len());
    ClassReport {
        labeled_fraction: fractions(&labeled_points),
        dataset_fraction: fractions(&dataset_points),
        balance: balance_score(&labeled_points),
        labeled_by_partition: partition_class_matrix(
            labeled_units.iter().copied(),
            partitions,
            &classes,
        ),
        pool_by_partition: partition_class_matrix(pool, partitions, &classes),
        classes,
        labeled_points,
        dataset_points,
    }
}

impl ClassReport {
    /// Plain-text table: class fractions, then the labeled partition-by-class matrix, in percent.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<14}", "class");
        for c in &self.classes {
            let _ = write!(s, "{c:>8}");
        }
        s.push('\n');
        let mut row = |name: &str, vals: &[f64]| {
            let _ = write!(s, "{name:<14}");
            for v in vals {
                let _ = write!(s, "{:>8.2}", 100.0 * v);
            }
            s.push('\n');
        };
        row("dataset", &self.dataset_fraction);
        row("labeled", &self.labeled_fraction);
        for (p, vals) in self
            .labeled_by_partition
            .partitions
            .iter()
            .zip(&self.labeled_by_partition.fractions)
        {
            let name = match p {
                PartitionId::Bin(b) => format!("partition {b}"),
                other => format!("partition {other}"),
            };
            row(&name, vals);
        }
        let _ = writeln!(s, "balance {:.4}", self.balance);
        s
    }
}
