//! Budgeted warm start and rank-driven cluster acquisition.

mod model;
mod stats;

pub use model::{score_iteration, FileModel, IterationScores, ModelInterface, ModelOutputs};
pub use stats::{
    balance_score, class_report, partition_class_matrix, ClassHistograms, ClassReport,
    PartitionClassMatrix,
};

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{ClusterScore, RankTable};
use crate::partition::{ClusterRecord, ClusterUid, PartitionId, DEFAULT_SIZE_CAP};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    /// Warm-start budget, percent of all dataset points.
    pub x_init: f64,
    /// Budget added per active iteration, percent of all dataset points.
    pub x_active: f64,
    pub iterations: usize,
    pub n_bins: usize,
    pub seed: u64,
    pub size_cap: u32,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            x_init: 1.0,
            x_active: 1.0,
            iterations: 4,
            n_bins: 3,
            seed: 0,
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("x_init", self.x_init), ("x_active", self.x_active)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be a positive percentage, got {v}"
                )));
            }
        }
        if self.n_bins == 0 {
            return Err(Error::Config("n_bins must be at least 1".into()));
        }
        if self.size_cap == 0 {
            return Err(Error::Config("size_cap must be positive".into()));
        }
        Ok(())
    }
}

/// Per-partition point allocation and consumption for one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub total_points: u64,
    pub percent: f64,
    pub allocation: BTreeMap<PartitionId, u64>,
    pub consumption: BTreeMap<PartitionId, u64>,
}

impl BudgetLedger {
    pub fn allocation_of(&self, p: PartitionId) -> u64 {
        self.allocation.get(&p).copied().unwrap_or(0)
    }

    pub fn consumption_of(&self, p: PartitionId) -> u64 {
        self.consumption.get(&p).copied().unwrap_or(0)
    }

    pub fn total_consumption(&self) -> u64 {
        self.consumption.values().sum()
    }
}

pub fn allocate_budget(
    total_points: u64,
    percent: f64,
    partitions: &[PartitionId],
) -> Result<BudgetLedger> {
    if total_points == 0 {
        return Err(Error::Config("dataset has no points".into()));
    }
    if partitions.is_empty() {
        return Err(Error::Config("no partitions to allocate budget to".into()));
    }
    if !(percent.is_finite() && percent > 0.0) {
        return Err(Error::Config(format!(
            "budget percent must be positive, got {percent}"
        )));
    }
    let share = (percent * total_points as f64 / (100.0 * partitions.len() as f64)).floor() as u64;
    if share == 0 {
        return Err(Error::Config(format!(
            "{percent}% of {total_points} points over {} partitions rounds to 0 points per partition",
            partitions.len()
        )));
    }
    Ok(BudgetLedger {
        total_points,
        percent,
        allocation: partitions.iter().map(|&p| (p, share)).collect(),
        consumption: partitions.iter().map(|&p| (p, 0)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acquisition {
    #[serde(flatten)]
    pub uid: ClusterUid,
    pub partition: PartitionId,
    pub iteration: usize,
    pub n_points: u64,
}

/// Clusters acquired so far, in acquisition order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledSet {
    acquired: Vec<Acquisition>,
    totals: BTreeMap<PartitionId, u64>,
    members: HashSet<ClusterUid>,
}

impl LabeledSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_acquisitions(items: Vec<Acquisition>) -> Result<Self> {
        let mut set = Self::new();
        for a in items {
            if let Some(last) = set.acquired.last() {
                if a.iteration < last.iteration {
                    return Err(Error::Contract(format!(
                        "acquisition of {} has iteration {} after iteration {}",
                        a.uid, a.iteration, last.iteration
                    )));
                }
            }
            set.push(a)?;
        }
        Ok(set)
    }

    fn push(&mut self, a: Acquisition) -> Result<()> {
        if !self.members.insert(a.uid.clone()) {
            return Err(Error::Contract(format!(
                "cluster {} is already labeled",
                a.uid
            )));
        }
        *self.totals.entry(a.partition).or_default() += a.n_points;
        self.acquired.push(a);
        Ok(())
    }

    pub fn contains(&self, uid: &ClusterUid) -> bool {
        self.members.contains(uid)
    }

    pub fn acquired(&self) -> &[Acquisition] {
        &self.acquired
    }

    pub fn len(&self) -> usize {
        self.acquired.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acquired.is_empty()
    }

    pub fn totals(&self) -> &BTreeMap<PartitionId, u64> {
        &self.totals
    }

    pub fn total_points(&self) -> u64 {
        self.totals.values().sum()
    }
}

/// A partition whose pool ran dry before its allocation was met.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustionWarning {
    pub partition: PartitionId,
    pub iteration: usize,
    pub allocation: u64,
    pub consumption: u64,
}

/// A candidate: uid and point count.
pub type Candidate = (ClusterUid, u64);

/// Adds candidates in order while the partition's consumption is below its allocation.
pub fn fill_partition<I>(
    partition: PartitionId,
    candidates: I,
    ledger: &mut BudgetLedger,
    labeled: &mut LabeledSet,
    iteration: usize,
) -> Result<Option<ExhaustionWarning>>
where
    I: IntoIterator<Item = Candidate>,
{
    let allocation = ledger.allocation_of(partition);
    let mut consumed = ledger.consumption_of(partition);
    let mut candidates = candidates.into_iter();
    let mut warning = None;
    while consumed < allocation {
        let Some((uid, n_points)) = candidates.next() else {
            log::warn!(
                "partition {partition} exhausted at iteration {iteration}: {consumed} of {allocation} points"
            );
            warning = Some(ExhaustionWarning {
                partition,
                iteration,
                allocation,
                consumption: consumed,
            });
            break;
        };
        labeled.push(Acquisition {
            uid,
            partition,
            iteration,
            n_points,
        })?;
        consumed += n_points;
    }
    ledger.consumption.insert(partition, consumed);
    Ok(warning)
}

/// Unlabeled selectable records of each partition, sorted by uid.
pub fn partition_pools(
    records: &[ClusterRecord],
    labeled: &LabeledSet,
) -> BTreeMap<PartitionId, Vec<usize>> {
    let mut pools: BTreeMap<PartitionId, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if let (true, Some(p)) = (r.is_selectable(), r.partition) {
            if !labeled.contains(&r.uid) {
                pools.entry(p).or_default().push(i);
            }
        }
    }
    for pool in pools.values_mut() {
        pool.sort_by(|&a, &b| records[a].uid.cmp(&records[b].uid));
    }
    pools
}

fn candidate(r: &ClusterRecord) -> Candidate {
    (r.uid.clone(), r.n_points as u64)
}

/// Result of one acquisition phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseOutcome {
    pub ledger: BudgetLedger,
    pub warnings: Vec<ExhaustionWarning>,
}

/// Uniform draws without replacement from every partition of `ledger`.
pub fn warm_start_select(
    records: &[ClusterRecord],
    mut ledger: BudgetLedger,
    seed: u64,
) -> Result<(LabeledSet, PhaseOutcome)> {
    let mut labeled = LabeledSet::new();
    let pools = partition_pools(records, &labeled);
    let mut warnings = Vec::new();
    let partitions: Vec<PartitionId> = ledger.allocation.keys().copied().collect();
    for p in partitions {
        let mut pool = pools.get(&p).cloned().unwrap_or_default();
        let mut rng = seed::stream(seed, &format!("warm-start/{p}"));
        pool.shuffle(&mut rng);
        let order = pool.iter().map(|&i| candidate(&records[i]));
        warnings.extend(fill_partition(p, order, &mut ledger, &mut labeled, 0)?);
    }
    Ok((labeled, PhaseOutcome { ledger, warnings }))
}

/// Walks each partition's rank table under the same stopping rule as the warm start.
pub fn active_select(
    tables: &[RankTable],
    records: &[ClusterRecord],
    mut ledger: BudgetLedger,
    labeled: &mut LabeledSet,
    iteration: usize,
) -> Result<PhaseOutcome> {
    let by_uid: HashMap<&ClusterUid, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (&r.uid, i))
        .collect();
    let mut warnings = Vec::new();
    for table in tables {
        if !ledger.allocation.contains_key(&table.partition) {
            return Err(Error::Contract(format!(
                "rank table for unknown partition {}",
                table.partition
            )));
        }
        let mut order = Vec::with_capacity(table.order.len());
        for entry in &table.order {
            if labeled.contains(&entry.uid) {
                return Err(Error::Contract(format!(
                    "ranked cluster {} is already labeled",
                    entry.uid
                )));
            }
            let &i = by_uid.get(&entry.uid).ok_or_else(|| {
                Error::Contract(format!("ranked cluster {} is not in the pool", entry.uid))
            })?;
            order.push(candidate(&records[i]));
        }
        warnings.extend(fill_partition(
            table.partition,
            order,
            &mut ledger,
            labeled,
            iteration,
        )?);
    }
    // Partitions without a table have an empty pool.
    let ranked: HashSet<PartitionId> = tables.iter().map(|t| t.partition).collect();
    let missing: Vec<PartitionId> = ledger
        .allocation
        .keys()
        .filter(|p| !ranked.contains(p))
        .copied()
        .collect();
    for p in missing {
        warnings.extend(fill_partition(
            p,
            std::iter::empty(),
            &mut ledger,
            labeled,
            iteration,
        )?);
    }
    Ok(PhaseOutcome { ledger, warnings })
}

/// Baseline: uniform cluster sampling over the whole selectable pool, ignoring partitions.
pub fn random_select(
    records: &[ClusterRecord],
    total_points: u64,
    percent: f64,
    seed: u64,
) -> Result<LabeledSet> {
    let budget = (percent * total_points as f64 / 100.0).floor() as u64;
    let mut pool: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].is_selectable())
        .collect();
    pool.sort_by(|&a, &b| records[a].uid.cmp(&records[b].uid));
    pool.shuffle(&mut seed::stream(seed, "random-baseline"));
    let mut labeled = LabeledSet::new();
    let mut consumed = 0;
    for i in pool {
        if consumed >= budget {
            break;
        }
        let r = &records[i];
        let partition = r.partition.expect("selectable records carry a partition");
        labeled.push(Acquisition {
            uid: r.uid.clone(),
            partition,
            iteration: 0,
            n_points: r.n_points as u64,
        })?;
        consumed += r.n_points as u64;
    }
    Ok(labeled)
}

/// Everything produced by one phase of the loop.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub ledger: BudgetLedger,
    pub warnings: Vec<ExhaustionWarning>,
    pub labeled: LabeledSet,
    /// Empty for the warm start.
    pub scores: Vec<ClusterScore>,
}

/// Preprocessed pool the loop selects from.
#[derive(Clone, Copy, Debug)]
pub struct LoopData<'a> {
    pub records: &'a [ClusterRecord],
    pub frame_ids: &'a [String],
    pub partitions: &'a [PartitionId],
    pub total_points: u64,
}

pub fn run_warm_start(config: &LoopConfig, data: &LoopData) -> Result<IterationRecord> {
    config.validate()?;
    let ledger = allocate_budget(data.total_points, config.x_init, data.partitions)?;
    let (labeled, out) = warm_start_select(data.records, ledger, config.seed)?;
    Ok(IterationRecord {
        iteration: 0,
        ledger: out.ledger,
        warnings: out.warnings,
        labeled,
        scores: Vec::new(),
    })
}

/// Scores the pool with the model's current outputs and acquires the next batch.
pub fn run_iteration(
    config: &LoopConfig,
    data: &LoopData,
    iteration: usize,
    mut labeled: LabeledSet,
    model: &dyn ModelInterface,
) -> Result<IterationRecord> {
    if iteration == 0 {
        return Err(Error::Config("active iterations start at 1".into()));
    }
    let ledger = allocate_budget(data.total_points, config.x_active, data.partitions)?;
    let scored = score_iteration(data.records, data.frame_ids, &labeled, model)?;
    let out = active_select(
        &scored.tables,
        data.records,
        ledger,
        &mut labeled,
        iteration,
    )?;
    Ok(IterationRecord {
        iteration,
        ledger: out.ledger,
        warnings: out.warnings,
        labeled,
        scores: scored.scores,
    })
}

/// Warm start plus `config.iterations` active iterations, refreshing the model before each.
pub fn run_loop(
    config: &LoopConfig,
    data: &LoopData,
    model: &mut dyn ModelInterface,
) -> Result<Vec<IterationRecord>> {
    let mut history = vec![run_warm_start(config, data)?];
    for k in 1..=config.iterations {
        let labeled = history.last().expect("warm start recorded").labeled.clone();
        model.refresh(k, &labeled)?;
        history.push(run_iteration(config, data, k, labeled, model)?);
    }
    Ok(history)
}
