//! Slow, direct transcriptions of each formula, for cross-checking the fast paths.

use std::collections::HashMap;

use crate::partition::ClusterUid;

/// Mean over rows of `-sum p ln p`, each row first divided by its sum.
pub fn oracle_entropy(rows: &[Vec<f64>]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for row in rows {
        let mut s = 0.0;
        for &p in row {
            s += p;
        }
        let mut h = 0.0;
        for &p in row {
            if p > 0.0 {
                h -= (p / s) * (p / s).ln();
            }
        }
        total += h;
    }
    total / rows.len() as f64
}

pub fn oracle_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut m = vec![0.0; dim];
    for row in rows {
        for d in 0..dim {
            m[d] += row[d];
        }
    }
    for v in &mut m {
        *v /= rows.len() as f64;
    }
    m
}

pub fn oracle_diversity(f: &[f64], labeled: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    for g in labeled {
        let mut sq = 0.0;
        for d in 0..f.len() {
            sq += (f[d] - g[d]).powi(2);
        }
        sum += sq.sqrt();
    }
    sum
}

fn beats(a: (f64, &ClusterUid), b: (f64, &ClusterUid)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Fused rank order from pairwise comparisons: rank = 1 + number of items that beat it.
pub fn oracle_rank(items: &[(ClusterUid, f64, f64)]) -> Vec<ClusterUid> {
    let n = items.len();
    let rank = |key: fn(&(ClusterUid, f64, f64)) -> f64, j: usize| {
        1 + (0..n)
            .filter(|&i| {
                i != j && beats((key(&items[i]), &items[i].0), (key(&items[j]), &items[j].0))
            })
            .count()
    };
    let re: Vec<usize> = (0..n).map(|j| rank(|x| x.1, j)).collect();
    let rd: Vec<usize> = (0..n).map(|j| rank(|x| x.2, j)).collect();
    // (1/a + 1/b) > (1/c + 1/d)  <=>  (a+b)cd > (c+d)ab
    let fused_beats = |i: usize, j: usize| {
        let (a, b, c, d) = (re[i] as u128, rd[i] as u128, re[j] as u128, rd[j] as u128);
        let lhs = (a + b) * c * d;
        let rhs = (c + d) * a * b;
        lhs > rhs || (lhs == rhs && items[i].0 < items[j].0)
    };
    let mut slots: Vec<Option<ClusterUid>> = vec![None; n];
    for j in 0..n {
        let pos = (0..n).filter(|&i| i != j && fused_beats(i, j)).count();
        slots[pos] = Some(items[j].0.clone());
    }
    slots
        .into_iter()
        .map(|s| s.expect("positions form a permutation"))
        .collect()
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Distance to the `k`-th nearest other point, by sorting all distances.
pub fn oracle_core_distances(points: &[[f64; 3]], k: usize) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &q)| dist(p, q))
                .collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

/// Total weight of a minimum spanning tree over mutual reachability, by Kruskal on all pairs.
pub fn oracle_mst_weight(points: &[[f64; 3]], core: &[f64]) -> f64 {
    let n = points.len();
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let w = dist(points[i], points[j]).max(core[i]).max(core[j]);
            edges.push((w, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut total = 0.0;
    for (w, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            total += w;
        }
    }
    total
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand Index between two labelings of the same points. Every
/// distinct value, noise included, is its own group.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len() as u64;
    let mut table: HashMap<(i64, i64), u64> = HashMap::new();
    let mut rows: HashMap<i64, u64> = HashMap::new();
    let mut cols: HashMap<i64, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sa: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sb: f64 = cols.values().map(|&v| choose2(v)).sum();
    let expected = sa * sb / choose2(n);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
