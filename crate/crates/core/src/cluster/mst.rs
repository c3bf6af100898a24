//! Exact minimum spanning tree of the mutual-reachability graph.
//!
//! Boruvka rounds over a k-d tree: every point searches for its cheapest
//! edge into a different component, pruning subtrees whose bounding box,
//! minimum core distance or single-component membership rule them out.
//! Edges are totally ordered by `(weight, low index, high index)`, which
//! keeps Boruvka cycle-free under weight ties and makes the result
//! independent of evaluation order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::kdtree::{dist2, KdTree};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub a: u32,
    pub b: u32,
    pub weight: f64,
}

impl MstEdge {
    pub fn new(a: u32, b: u32, weight: f64) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        MstEdge { a, b, weight }
    }

    /// Total order used for sorting and tie-breaking.
    pub fn key_cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

#[inline]
pub fn mutual_reachability(core_a: f64, core_b: f64, dist: f64) -> f64 {
    core_a.max(core_b).max(dist)
}

struct Dsu {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            Ordering::Less => self.parent[ra as usize] = rb,
            Ordering::Greater => self.parent[rb as usize] = ra,
            Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
        true
    }
}

const MIXED: u32 = u32::MAX;

/// MST (n - 1 edges, unsorted) of the complete graph weighted by
/// `max(core[a], core[b], |a - b|)`.
pub fn mutual_reachability_mst(points: &[[f64; 3]], core: &[f64]) -> Vec<MstEdge> {
    assert_eq!(points.len(), core.len(), "core distances must match points");
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let tree = KdTree::build(points);
    let n_nodes = tree.nodes.len();

    // Minimum core distance below each node, fixed for the whole run.
    let mut node_min_core = vec![f64::INFINITY; n_nodes];
    for id in (0..n_nodes).rev() {
        let node = &tree.nodes[id];
        node_min_core[id] = if node.is_leaf() {
            tree.members(node)
                .iter()
                .map(|&i| core[i as usize])
                .fold(f64::INFINITY, f64::min)
        } else {
            node_min_core[node.left as usize].min(node_min_core[node.right as usize])
        };
    }

    let mut dsu = Dsu::new(n);
    let mut comp: Vec<u32> = (0..n as u32).collect();
    let mut node_comp = vec![MIXED; n_nodes];
    let mut edges = Vec::with_capacity(n - 1);
    let mut n_components = n;

    while n_components > 1 {
        for id in (0..n_nodes).rev() {
            let node = &tree.nodes[id];
            node_comp[id] = if node.is_leaf() {
                let members = tree.members(node);
                let first = comp[members[0] as usize];
                if members.iter().all(|&i| comp[i as usize] == first) {
                    first
                } else {
                    MIXED
                }
            } else {
                let (l, r) = (
                    node_comp[node.left as usize],
                    node_comp[node.right as usize],
                );
                if l == r {
                    l
                } else {
                    MIXED
                }
            };
        }

        // Cheapest outgoing edge per component, indexed by component root.
        let mut best: Vec<Option<MstEdge>> = vec![None; n];
        let mut stack = Vec::new();
        for i in 0..n {
            let c = comp[i];
            let q = &points[i];
            let core_i = core[i];
            let mut cand: Option<MstEdge> = best[c as usize];
            stack.clear();
            stack.push(0u32);
            while let Some(id) = stack.pop() {
                let id = id as usize;
                if node_comp[id] == c {
                    continue;
                }
                let node = &tree.nodes[id];
                let lower = core_i.max(node.min_dist2(q).sqrt()).max(node_min_core[id]);
                if let Some(e) = cand {
                    if lower > e.weight {
                        continue;
                    }
                }
                if node.is_leaf() {
                    for &j in tree.members(node) {
                        if comp[j as usize] == c {
                            continue;
                        }
                        let w = mutual_reachability(
                            core_i,
                            core[j as usize],
                            dist2(q, &points[j as usize]).sqrt(),
                        );
                        let e = MstEdge::new(i as u32, j, w);
                        if cand.is_none_or(|best| e.key_cmp(&best) == Ordering::Less) {
                            cand = Some(e);
                        }
                    }
                } else {
                    let (l, r) = (node.left, node.right);
                    let dl = tree.nodes[l as usize].min_dist2(q);
                    let dr = tree.nodes[r as usize].min_dist2(q);
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
            }
            best[c as usize] = cand;
        }

        let mut chosen: Vec<MstEdge> = best.into_iter().flatten().collect();
        chosen.sort_by(MstEdge::key_cmp);
        for e in chosen {
            if dsu.union(e.a, e.b) {
                edges.push(e);
                n_components -= 1;
            }
        }
        for i in 0..n as u32 {
            comp[i as usize] = dsu.find(i);
        }
    }
    edges
}
