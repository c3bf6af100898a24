//! Cluster sizes, per-size Average Point Information, and size binning.
//!
//! For an integer size `s` with `C_s` clusters holding `P_s` points in total,
//! `API_s = C_s / ln(P_s)`. Sizes are binned in ascending order into `B`
//! contiguous partitions of roughly equal accumulated API; ground cells form
//! an extra partition of their own.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_SIZE_CAP: u32 = 25;

/// Serialized as its display form: `"1"`, `"2"`, ..., `"ground"`, `"filtered"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartitionId {
    /// Size bin, numbered from 1 in ascending size order.
    Bin(u32),
    Ground,
    /// Larger than the size cap; never selectable.
    Filtered,
}

impl fmt::Display for PartitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionId::Bin(b) => write!(f, "{b}"),
            PartitionId::Ground => f.write_str("ground"),
            PartitionId::Filtered => f.write_str("filtered"),
        }
    }
}

impl std::str::FromStr for PartitionId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ground" => Ok(PartitionId::Ground),
            "filtered" => Ok(PartitionId::Filtered),
            _ => s
                .parse::<u32>()
                .ok()
                .filter(|&b| b > 0)
                .map(PartitionId::Bin)
                .ok_or_else(|| format!("unknown partition {s:?}")),
        }
    }
}

impl Serialize for PartitionId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PartitionId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Identifies a selectable unit. Orders by frame id, then local id.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClusterUid {
    pub frame_id: String,
    pub local_id: u32,
}

impl ClusterUid {
    pub fn new(frame_id: impl Into<String>, local_id: u32) -> Self {
        ClusterUid {
            frame_id: frame_id.into(),
            local_id,
        }
    }
}

impl fmt::Display for ClusterUid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.frame_id, self.local_id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UnitKind {
    Object,
    Ground { cell: (i64, i64) },
}

/// An object cluster or a ground cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterRecord {
    #[serde(flatten)]
    pub uid: ClusterUid,
    #[serde(flatten)]
    pub kind: UnitKind,
    pub n_points: usize,
    pub size: u32,
    pub partition: Option<PartitionId>,
    #[serde(rename = "point_ranges", with = "ranges")]
    pub point_indices: Vec<u32>,
}

impl ClusterRecord {
    pub fn is_object(&self) -> bool {
        matches!(self.kind, UnitKind::Object)
    }

    pub fn is_selectable(&self) -> bool {
        matches!(
            self.partition,
            Some(PartitionId::Bin(_)) | Some(PartitionId::Ground)
        )
    }
}

/// Point indices serialized as half-open `[start, end)` runs.
mod ranges {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(idx: &[u32], s: S) -> Result<S::Ok, S::Error> {
        let mut runs: Vec<[u32; 2]> = Vec::new();
        for &i in idx {
            match runs.last_mut() {
                Some(r) if r[1] == i => r[1] = i + 1,
                _ => runs.push([i, i + 1]),
            }
        }
        runs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u32>, D::Error> {
        let runs: Vec<[u32; 2]> = Vec::deserialize(d)?;
        Ok(runs.into_iter().flat_map(|[a, b]| a..b).collect())
    }
}

/// `round((max_x - min_x) + (max_y - min_y) + (max_z - min_z))`, ties away from zero.
pub fn cluster_size<I>(points: I) -> u32
where
    I: IntoIterator<Item = [f64; 3]>,
{
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut any = false;
    for p in points {
        any = true;
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !any {
        return 0;
    }
    let extent: f64 = (0..3).map(|k| hi[k] - lo[k]).sum();
    extent.round() as u32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeGroupStats {
    pub size: u32,
    pub n_clusters: u64,
    pub n_points: u64,
    pub api: f64,
}

/// `C_s / ln(P_s)`; undefined (None) when `P_s <= 1`.
pub fn api(n_clusters: u64, n_points: u64) -> Option<f64> {
    api_with_log(n_clusters, n_points, f64::ln)
}

pub fn api_with_log(n_clusters: u64, n_points: u64, log: impl Fn(f64) -> f64) -> Option<f64> {
    (n_points > 1).then(|| n_clusters as f64 / log(n_points as f64))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SizeStatistics {
    /// Groups with a defined API, ascending by size.
    pub groups: Vec<SizeGroupStats>,
    /// Sizes dropped because `P_s <= 1`.
    pub excluded_sizes: Vec<u32>,
}

/// Per-size counts over object clusters that are not filtered.
pub fn size_statistics(records: &[ClusterRecord], size_cap: u32) -> Result<SizeStatistics> {
    let mut acc: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.is_object() && r.size <= size_cap)
    {
        let e = acc.entry(r.size).or_default();
        e.0 += 1;
        e.1 += r.n_points as u64;
    }
    if acc.is_empty() {
        return Err(Error::Validation(
            "no object clusters to compute size statistics from".into(),
        ));
    }
    let mut out = SizeStatistics::default();
    for (size, (c, p)) in acc {
        match api(c, p) {
            Some(api) => out.groups.push(SizeGroupStats {
                size,
                n_clusters: c,
                n_points: p,
                api,
            }),
            None => {
                log::warn!("size group {size} has {p} point(s); API undefined, group excluded");
                out.excluded_sizes.push(size);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeBin {
    pub id: u32,
    pub min_size: u32,
    pub max_size: u32,
    pub api_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionTable {
    pub bins: Vec<SizeBin>,
    pub size_cap: u32,
}

impl PartitionTable {
    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    /// Upper size of every bin but the last.
    pub fn boundaries(&self) -> Vec<u32> {
        self.bins[..self.bins.len() - 1]
            .iter()
            .map(|b| b.max_size)
            .collect()
    }

    /// Bin ids in order, followed by the ground partition.
    pub fn selectable_partitions(&self) -> Vec<PartitionId> {
        self.bins
            .iter()
            .map(|b| PartitionId::Bin(b.id))
            .chain(std::iter::once(PartitionId::Ground))
            .collect()
    }

    /// Partition of an object cluster of the given size. The flag is set
    /// when the size lies outside the observed range and was clamped.
    pub fn partition_for_size(&self, size: u32) -> (PartitionId, bool) {
        if size > self.size_cap {
            return (PartitionId::Filtered, false);
        }
        let first = &self.bins[0];
        let last = &self.bins[self.bins.len() - 1];
        if size < first.min_size {
            return (PartitionId::Bin(first.id), true);
        }
        if size > last.max_size {
            return (PartitionId::Bin(last.id), true);
        }
        let bin = self
            .bins
            .iter()
            .find(|b| size <= b.max_size)
            .unwrap_or(last);
        (PartitionId::Bin(bin.id), false)
    }
}

/// Greedy ascending sweep: bin `k` closes at the first size where the
/// running API total reaches `k * total / B`, at most one bin per size,
/// and early whenever exactly enough sizes remain for the remaining bins.
/// Every bin's API then lies within `max_s API_s` of `total / B`.
pub fn adaptive_bins(
    groups: &[SizeGroupStats],
    n_bins: usize,
    size_cap: u32,
) -> Result<PartitionTable> {
    if n_bins == 0 {
        return Err(Error::Config(
            "number of partitions must be positive".into(),
        ));
    }
    if groups.len() < n_bins {
        return Err(Error::Config(format!(
            "{} size groups cannot fill {n_bins} partitions",
            groups.len()
        )));
    }
    if groups.windows(2).any(|w| w[0].size >= w[1].size) {
        return Err(Error::Contract(
            "size groups must be strictly ascending".into(),
        ));
    }
    let total: f64 = groups.iter().map(|g| g.api).sum();
    let target = total / n_bins as f64;
    let slack = 1e-12 * total;

    let mut bins = Vec::with_capacity(n_bins);
    let mut cum = 0.0;
    let mut start = 0usize;
    let mut bin_api = 0.0;
    for (i, g) in groups.iter().enumerate() {
        cum += g.api;
        bin_api += g.api;
        let closed = bins.len();
        if closed + 1 == n_bins {
            continue;
        }
        let k = (closed + 1) as f64;
        let remaining_sizes = groups.len() - i - 1;
        let remaining_bins = n_bins - closed - 1;
        if cum >= k * target - slack || remaining_sizes == remaining_bins {
            bins.push(SizeBin {
                id: closed as u32 + 1,
                min_size: groups[start].size,
                max_size: g.size,
                api_sum: bin_api,
            });
            start = i + 1;
            bin_api = 0.0;
        }
    }
    bins.push(SizeBin {
        id: n_bins as u32,
        min_size: groups[start].size,
        max_size: groups[groups.len() - 1].size,
        api_sum: bin_api,
    });
    Ok(PartitionTable { bins, size_cap })
}

/// Set the partition of every record: ground cells to Ground, objects by size.
pub fn assign_partitions(records: &mut [ClusterRecord], table: &PartitionTable) {
    for r in records.iter_mut() {
        r.partition = Some(match r.kind {
            UnitKind::Ground { .. } => PartitionId::Ground,
            UnitKind::Object => {
                let (p, clamped) = table.partition_for_size(r.size);
                if clamped {
                    log::warn!(
                        "cluster {} of size {} lies outside the binned size range; clamped into partition {p}",
                        r.uid,
                        r.size
                    );
                }
                p
            }
        });
    }
}
