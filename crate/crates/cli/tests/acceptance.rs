//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::Parser;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use sizebal_cli::{run, Cli};
use sizebal_core::al_loop::{
    class_report, random_select, run_loop, run_warm_start, Acquisition, ClassHistograms,
    IterationRecord, LoopConfig, LoopData,
};
use sizebal_core::cluster::{hdbscan, ClusterAssignment, HdbscanParams};
use sizebal_core::ground::{segment_ground, GroundParams};
use sizebal_core::io::{
    DenseMatrix, FeatureMatrix, LabelVector, PointCloudFrame, PredictionMatrix,
};
use sizebal_core::measures::{
    cluster_entropy, cluster_mean_feature, diversity, fuse_and_rank, RankInput,
};
use sizebal_core::partition::{
    adaptive_bins, api, api_with_log, ClusterUid, PartitionId, SizeGroupStats,
};
use sizebal_core::pipeline::{preprocess_frames, PreprocessParams, Preprocessed};
use sizebal_core::seed::{stream, Rng as SeededRng};
use sizebal_core::synth::oracle::{
    adjusted_rand_index, oracle_diversity, oracle_entropy, oracle_mean, oracle_rank,
};
use sizebal_core::synth::{generate_dataset, MockModel, MockModelParams, SceneSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn c1_api() -> Outcome {
    let t = Instant::now();
    let mut rng = stream(1, "acceptance/api");
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c: u64 = rng.random_range(1..10_000);
        let p: u64 = rng.random_range(2..10_000_000);
        let oracle = c as f64 / (p as f64).ln();
        worst = worst.max(rel_err(api(c, p).unwrap(), oracle));
    }
    let example = api(5, 1000).unwrap();
    let elapsed = t.elapsed();
    let pass =
        worst <= 1e-9 && (example - 0.723824).abs() <= 1e-6 && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "max rel err {worst:.2e}, API(5, 1000) = {example:.6}, {}",
            secs(elapsed)
        ),
    )
}

fn random_distribution(rng: &mut SeededRng, c: usize) -> Vec<f32> {
    let mut row: Vec<f64> = (0..c)
        .map(|_| {
            if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    if row.iter().all(|&v| v == 0.0) {
        row[0] = 1.0;
    }
    let s: f64 = row.iter().sum();
    row.iter().map(|v| (v / s) as f32).collect()
}

fn c2_entropy() -> Outcome {
    let t = Instant::now();
    let mut rng = stream(2, "acceptance/entropy");
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=1000usize);
        let c = rng.random_range(2..=20usize);
        let data: Vec<f32> = (0..n)
            .flat_map(|_| random_distribution(&mut rng, c))
            .collect();
        let preds = PredictionMatrix::new(DenseMatrix::new(n, c, data).unwrap()).unwrap();
        let members: Vec<u32> = (0..n as u32).filter(|_| rng.random_bool(0.7)).collect();
        let members = if members.is_empty() { vec![0] } else { members };
        let rows: Vec<Vec<f64>> = members
            .iter()
            .map(|&i| preds.row(i as usize).iter().map(|&p| p as f64).collect())
            .collect();
        worst = worst.max(rel_err(
            cluster_entropy(&preds, &members),
            oracle_entropy(&rows),
        ));
    }
    let mut uniform_err = 0.0f64;
    for c in 2..=20usize {
        let data = vec![1.0 / c as f32; 50 * c];
        let preds = PredictionMatrix::new(DenseMatrix::new(50, c, data).unwrap()).unwrap();
        let all: Vec<u32> = (0..50).collect();
        uniform_err = uniform_err.max((cluster_entropy(&preds, &all) - (c as f64).ln()).abs());
    }
    let elapsed = t.elapsed();
    let pass = worst <= 1e-9 && uniform_err <= 1e-12 && elapsed < Duration::from_secs(5);
    outcome(
        pass,
        format!(
            "max rel err {worst:.2e}, uniform |H - ln C| <= {uniform_err:.1e}, {}",
            secs(elapsed)
        ),
    )
}

fn c3_diversity() -> Outcome {
    let mut rng = stream(3, "acceptance/diversity");
    let mut worst = 0.0f64;
    let normal = Normal::new(0.0, 2.0).unwrap();
    for _ in 0..100 {
        let dim = rng.random_range(1..=64usize);
        let n_pts = rng.random_range(1..=200usize);
        let data: Vec<f32> = (0..n_pts * dim)
            .map(|_| normal.sample(&mut rng) as f32)
            .collect();
        let feats = FeatureMatrix::new(DenseMatrix::new(n_pts, dim, data).unwrap()).unwrap();
        let all: Vec<u32> = (0..n_pts as u32).collect();
        let f = cluster_mean_feature(&feats, &all);
        let rows: Vec<Vec<f64>> = (0..n_pts)
            .map(|i| feats.row(i).iter().map(|&v| v as f64).collect())
            .collect();
        let mean_err = f
            .iter()
            .zip(oracle_mean(&rows))
            .map(|(a, b)| rel_err(*a, b))
            .fold(0.0, f64::max);
        let labeled: Vec<Vec<f64>> = (0..rng.random_range(0..=100usize))
            .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let d = diversity(&f, &labeled).unwrap();
        worst = worst
            .max(mean_err)
            .max(rel_err(d, oracle_diversity(&f, &labeled)));
    }
    let fixture = diversity(&[0.0, 0.0], &[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
    let pass = worst <= 1e-9 && fixture == 5.0;
    outcome(
        pass,
        format!("max rel err {worst:.2e}, 3-4-5 fixture = {fixture}"),
    )
}

fn c4_rank() -> Outcome {
    let mut rng = stream(4, "acceptance/rank");
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=1000usize);
        // Coarse value grids make ties common.
        let levels_e = rng.random_range(1..=n.max(2));
        let levels_d = rng.random_range(1..=n.max(2));
        let items: Vec<RankInput> = (0..n)
            .map(|i| RankInput {
                uid: ClusterUid::new(format!("{:03}", rng.random_range(0..50)), i as u32),
                entropy: rng.random_range(0..levels_e) as f64 * 0.1,
                diversity: rng.random_range(0..levels_d) as f64 * 0.7,
            })
            .collect();
        let table = fuse_and_rank(PartitionId::Bin(1), &items);
        let ours: Vec<ClusterUid> = table.order.into_iter().map(|r| r.uid).collect();
        let triples: Vec<(ClusterUid, f64, f64)> = items
            .iter()
            .map(|x| (x.uid.clone(), x.entropy, x.diversity))
            .collect();
        if ours != oracle_rank(&triples) {
            mismatches += 1;
        }
    }
    let uid = |s: &str| ClusterUid::new(s, 0);
    let fixture: Vec<RankInput> = [("a", 3.0, 1.0), ("b", 2.0, 2.0), ("c", 1.0, 3.0)]
        .iter()
        .map(|&(u, e, d)| RankInput {
            uid: uid(u),
            entropy: e,
            diversity: d,
        })
        .collect();
    let order: Vec<String> = fuse_and_rank(PartitionId::Bin(1), &fixture)
        .order
        .iter()
        .map(|r| r.uid.frame_id.clone())
        .collect();
    let pass = mismatches == 0 && order == ["a", "c", "b"];
    outcome(
        pass,
        format!("{mismatches}/200 sequences differ, worked example {order:?}"),
    )
}

fn c5_binning() -> Outcome {
    let mut rng = stream(5, "acceptance/binning");
    let mut bound_violations = 0;
    let mut base_mismatches = 0;
    let mut worst_ratio = 0.0f64;
    for t in 0..500 {
        let b = [2usize, 3, 6][t % 3];
        let sizes: Vec<u32> = (0..=25u32).filter(|_| rng.random_bool(0.7)).collect();
        if sizes.len() < b {
            continue;
        }
        let counts: Vec<(u64, u64)> = sizes
            .iter()
            .map(|_| {
                let c = rng.random_range(1..2000u64);
                (c, c * rng.random_range(2..400u64))
            })
            .collect();
        let groups = |log: fn(f64) -> f64| -> Vec<SizeGroupStats> {
            sizes
                .iter()
                .zip(&counts)
                .map(|(&size, &(c, p))| SizeGroupStats {
                    size,
                    n_clusters: c,
                    n_points: p,
                    api: api_with_log(c, p, log).unwrap(),
                })
                .collect()
        };
        let ln = groups(f64::ln);
        let table = adaptive_bins(&ln, b, 25).unwrap();
        let total: f64 = ln.iter().map(|g| g.api).sum();
        let max_api = ln.iter().map(|g| g.api).fold(0.0, f64::max);
        for bin in &table.bins {
            let dev = (bin.api_sum - total / b as f64).abs();
            worst_ratio = worst_ratio.max(dev / max_api);
            if dev > max_api * (1.0 + 1e-12) {
                bound_violations += 1;
            }
        }
        let log10 = adaptive_bins(&groups(f64::log10), b, 25).unwrap();
        if log10.boundaries() != table.boundaries() {
            base_mismatches += 1;
        }
    }
    let pass = bound_violations == 0 && base_mismatches == 0;
    outcome(
        pass,
        format!(
            "{bound_violations} bins over the bound (max deviation {worst_ratio:.3} x max API), \
             {base_mismatches} ln/log10 boundary mismatches"
        ),
    )
}

#[derive(Deserialize)]
struct ReferenceFixture {
    name: String,
    min_cluster_size: usize,
    k: usize,
    epsilon: f64,
    points: Vec<[f64; 3]>,
    labels: Vec<i64>,
}

fn c6_clustering() -> Outcome {
    let t = Instant::now();
    let params = HdbscanParams {
        min_cluster_size: 20,
        min_samples: 10,
        cluster_selection_epsilon: 0.5,
    };
    let mut rng = stream(6, "acceptance/blobs");
    let mut worst_ari = 1.0f64;
    for _ in 0..20 {
        let n_blobs = rng.random_range(2..=8usize);
        // Spread is the RMS distance of a blob's points from its centre.
        let sigma = rng.random_range(0.2..0.5);
        let sep = 5.0 * sigma * 3f64.sqrt();
        let mut centers: Vec<[f64; 3]> = Vec::new();
        while centers.len() < n_blobs {
            let c = [
                rng.random_range(0.0..6.0 * sep),
                rng.random_range(0.0..6.0 * sep),
                rng.random_range(0.0..3.0 * sep),
            ];
            let far = centers
                .iter()
                .all(|o| ((0..3).map(|k| (o[k] - c[k]).powi(2)).sum::<f64>()).sqrt() >= sep);
            if far {
                centers.push(c);
            }
        }
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut points = Vec::new();
        let mut truth = Vec::new();
        for (b, c) in centers.iter().enumerate() {
            for _ in 0..rng.random_range(50..=500usize) {
                points.push([0, 1, 2].map(|k| c[k] + normal.sample(&mut rng)));
                truth.push(b as i64);
            }
        }
        let got = hdbscan(&points, &params).unwrap();
        let labels: Vec<i64> = got.cluster_id.iter().map(|&c| c as i64).collect();
        worst_ari = worst_ari.min(adjusted_rand_index(&labels, &truth));
    }

    let raw = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/hdbscan_reference.json"),
    )
    .expect("reference fixtures present");
    let refs: Vec<ReferenceFixture> = serde_json::from_str(&raw).unwrap();
    let mut exact = Vec::new();
    for f in &refs {
        let p = HdbscanParams {
            min_cluster_size: f.min_cluster_size,
            min_samples: f.k,
            cluster_selection_epsilon: f.epsilon,
        };
        let ours = hdbscan(&f.points, &p).unwrap();
        exact.push((
            f.name.as_str(),
            ours == ClusterAssignment::from_raw_labels(&f.labels),
            f.points.len(),
        ));
    }
    let n_exact = exact.iter().filter(|e| e.1 && e.2 <= 500).count();
    let elapsed = t.elapsed();
    let pass = worst_ari >= 0.9 && n_exact >= 3 && elapsed < Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "min ARI {worst_ari:.4} over 20 fixtures, {n_exact}/{} reference fixtures exact, {}",
            refs.len(),
            secs(elapsed)
        ),
    )
}

fn c7_ground() -> Outcome {
    let spec = SceneSpec {
        n_frames: 5,
        objects_per_frame: 20,
        seed: 7,
        ..SceneSpec::default()
    };
    let mut worst_recall = 1.0f64;
    let mut worst_precision = 1.0f64;
    for (i, scene) in generate_dataset(&spec).unwrap().iter().enumerate() {
        let is_plane: Vec<bool> = scene
            .labels
            .as_slice()
            .iter()
            .map(|&c| c == spec.ground_class)
            .collect();
        let mask = segment_ground(&scene.frame, &GroundParams::default(), i as u64).unwrap();
        let tp = mask
            .is_ground
            .iter()
            .zip(&is_plane)
            .filter(|(&g, &p)| g && p)
            .count() as f64;
        let predicted = mask.n_ground() as f64;
        let actual = is_plane.iter().filter(|&&p| p).count() as f64;
        worst_recall = worst_recall.min(tp / actual);
        worst_precision = worst_precision.min(if predicted > 0.0 { tp / predicted } else { 0.0 });
    }
    let pass = worst_recall >= 0.99 && worst_precision >= 0.95;
    outcome(
        pass,
        format!("min recall {worst_recall:.4}, min precision {worst_precision:.4} over 5 scenes"),
    )
}

/// The default synthetic scene set, preprocessed once for criteria 8 to 10.
struct Scenario {
    pre: Preprocessed,
    labels: Vec<LabelVector>,
    truth: ClassHistograms,
    partitions: Vec<PartitionId>,
    build_time: Duration,
}

impl Scenario {
    fn build() -> Self {
        let t = Instant::now();
        let spec = SceneSpec::default();
        let scenes = generate_dataset(&spec).unwrap();
        let frames: Vec<PointCloudFrame> = scenes.iter().map(|s| s.frame.clone()).collect();
        let labels: Vec<LabelVector> = scenes.into_iter().map(|s| s.labels).collect();
        let pre = preprocess_frames(&frames, &PreprocessParams::default(), spec.seed).unwrap();
        let truth = ClassHistograms::build(&pre.records, &pre.frame_ids, &labels).unwrap();
        let partitions = pre.partitions();
        Scenario {
            pre,
            labels,
            truth,
            partitions,
            build_time: t.elapsed(),
        }
    }

    fn data(&self) -> LoopData<'_> {
        LoopData {
            records: &self.pre.records,
            frame_ids: &self.pre.frame_ids,
            partitions: &self.partitions,
            total_points: self.pre.total_points,
        }
    }

    fn run(&self, seed: u64, mock: MockModelParams) -> Vec<IterationRecord> {
        let cfg = LoopConfig {
            seed,
            ..LoopConfig::default()
        };
        let mut model =
            MockModel::new(mock, self.pre.frame_ids.clone(), self.labels.clone()).unwrap();
        run_loop(&cfg, &self.data(), &mut model).unwrap()
    }
}

fn c8_budget(s: &Scenario) -> Outcome {
    let mut violations = 0;
    let mut fractions = Vec::new();
    for seed in 0..50u64 {
        let seed = 1000 + seed * 7919;
        let history = s.run(
            seed,
            MockModelParams {
                seed,
                ..MockModelParams::default()
            },
        );
        let final_set = &history.last().unwrap().labeled;
        for rec in &history {
            for (&p, &alloc) in &rec.ledger.allocation {
                let last = final_set
                    .acquired()
                    .iter()
                    .filter(|a| a.iteration == rec.iteration && a.partition == p)
                    .last()
                    .map_or(0, |a| a.n_points);
                if rec.ledger.consumption_of(p) >= alloc + last.max(1) {
                    violations += 1;
                }
            }
        }
        fractions.push(100.0 * final_set.total_points() as f64 / s.pre.total_points as f64);
    }
    let lo = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fractions.iter().copied().fold(0.0, f64::max);
    let pass = violations == 0 && lo >= 4.8 && hi <= 5.3;
    outcome(
        pass,
        format!("{violations} ledger violations, final fraction {lo:.3}%..{hi:.3}% over 50 runs"),
    )
}

fn c9_balance(s: &Scenario) -> Outcome {
    let t = Instant::now();
    let ignore = [0u16];
    let data = s.data();
    let reference = class_report(
        &sizebal_core::al_loop::LabeledSet::new(),
        &s.pre.records,
        &s.truth,
        &s.partitions,
        &ignore,
    );
    let (rare_idx, rare_share) = reference
        .dataset_fraction
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let rare = reference.classes[rare_idx];
    let object_shares: Vec<f64> = reference
        .classes
        .iter()
        .zip(&reference.dataset_fraction)
        .filter(|(&c, _)| c != SceneSpec::default().ground_class)
        .map(|(_, &f)| f)
        .collect();
    let span_ok =
        object_shares.len() == 6 && object_shares.iter().all(|&f| (0.005..=0.5).contains(&f));

    let mut balance_wins = 0;
    let mut rare_wins = 0;
    for seed in 0..10u64 {
        let cfg = LoopConfig {
            seed,
            ..LoopConfig::default()
        };
        let warm = run_warm_start(&cfg, &data).unwrap();
        let random = random_select(&s.pre.records, s.pre.total_points, cfg.x_init, seed).unwrap();
        let w = class_report(
            &warm.labeled,
            &s.pre.records,
            &s.truth,
            &s.partitions,
            &ignore,
        );
        let r = class_report(&random, &s.pre.records, &s.truth, &s.partitions, &ignore);
        if w.balance > r.balance {
            balance_wins += 1;
        }
        if w.labeled_points[rare_idx] >= 2 * r.labeled_points[rare_idx] {
            rare_wins += 1;
        }
    }
    let elapsed = s.build_time + t.elapsed();
    let pass = span_ok && balance_wins >= 9 && rare_wins >= 8 && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "object class shares {:.2}%..{:.2}%, balance wins {balance_wins}/10, \
             rare class {rare} ({:.2}%) >= 2x in {rare_wins}/10, {}",
            100.0 * object_shares.iter().copied().fold(f64::INFINITY, f64::min),
            100.0 * object_shares.iter().copied().fold(0.0, f64::max),
            100.0 * rare_share,
            secs(elapsed)
        ),
    )
}

fn c10_closed_loop(s: &Scenario) -> Outcome {
    const TARGET: u16 = 6;
    let share = |acq: &[&Acquisition]| {
        let hits = acq
            .iter()
            .filter(|a| s.truth.majority(&a.uid) == Some(TARGET))
            .count();
        hits as f64 / acq.len().max(1) as f64
    };
    let mut wins = 0;
    let mut shown = Vec::new();
    for seed in 0..10u64 {
        let mut mock = MockModelParams {
            seed,
            ..MockModelParams::default()
        };
        mock.class_concentration = BTreeMap::from([(TARGET, 0.2)]);
        let history = s.run(seed, mock);
        let acquired = history.last().unwrap().labeled.acquired();
        let warm: Vec<&Acquisition> = acquired.iter().filter(|a| a.iteration == 0).collect();
        let active: Vec<&Acquisition> = acquired.iter().filter(|a| a.iteration > 0).collect();
        let (w, a) = (share(&warm), share(&active));
        if a > w {
            wins += 1;
        }
        shown.push(format!("{:.2}->{:.2}", w, a));
    }
    outcome(
        wins >= 8,
        format!(
            "class {TARGET} cluster share rose in {wins}/10 seeds ({})",
            shown.join(" ")
        ),
    )
}

fn tree_snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.json");
    std::fs::write(&config, r#"{"seed": 11, "synth": {"n_frames": 30}}"#).unwrap();
    let simulate = |name: &str, jobs: &str| {
        let out = tmp.path().join(name);
        let cli = Cli::parse_from([
            "sizebal",
            "--config",
            config.to_str().unwrap(),
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
            "simulate",
        ]);
        run(cli).map(|()| tree_snapshot(&out))
    };
    let runs = (simulate("a", "1"), simulate("b", "1"), simulate("c", "8"));
    match runs {
        (Ok(a), Ok(b), Ok(c)) => {
            let diff = |x: &BTreeMap<PathBuf, Vec<u8>>| {
                let mut names: Vec<&PathBuf> = a.keys().chain(x.keys()).collect();
                names.dedup();
                names.into_iter().filter(|k| a.get(*k) != x.get(*k)).count()
            };
            let (rerun, threads) = (diff(&b), diff(&c));
            outcome(
                rerun == 0 && threads == 0 && !a.is_empty(),
                format!(
                    "{} files; {rerun} differ on rerun, {threads} differ with --jobs 8",
                    a.len()
                ),
            )
        }
        (a, b, c) => outcome(
            false,
            format!(
                "simulate failed: {:?}",
                [a.err(), b.err(), c.err()]
                    .into_iter()
                    .flatten()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
            ),
        ),
    }
}

fn report(n: usize, name: &str, o: Outcome) -> bool {
    println!(
        "criterion {n:>2} {}: {name}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    o.pass
}

fn main() {
    let mut passed = vec![
        report(1, "size-group API oracle", c1_api()),
        report(2, "cluster entropy oracle", c2_entropy()),
        report(3, "feature diversity oracle", c3_diversity()),
        report(4, "fused rank oracle", c4_rank()),
        report(5, "greedy binning bound", c5_binning()),
        report(6, "clustering recovery", c6_clustering()),
        report(7, "ground segmentation", c7_ground()),
    ];
    let scenario = Scenario::build();
    passed.push(report(8, "budget invariants", c8_budget(&scenario)));
    passed.push(report(
        9,
        "class balance at warm start",
        c9_balance(&scenario),
    ));
    passed.push(report(
        10,
        "entropy-steered closed loop",
        c10_closed_loop(&scenario),
    ));
    passed.push(report(11, "determinism", c11_determinism()));

    let n_pass = passed.iter().filter(|&&p| p).count();
    println!("{n_pass} of {} criteria passed", passed.len());
    if n_pass < passed.len() {
        std::process::exit(1);
    }
}
