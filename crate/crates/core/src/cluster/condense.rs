//! Single-linkage hierarchy, condensed tree, and excess-of-mass selection.
//!
//! Node numbering follows the usual HDBSCAN layout: points are `0..n`, the
//! condensed root is `n`, and clusters born later get larger ids, so
//! descending id order is a valid bottom-up traversal.

use std::collections::VecDeque;

use super::mst::MstEdge;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkageRow {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

/// Merge MST edges in ascending `(weight, a, b)` order. Row `i` creates node `n + i`.
pub fn single_linkage(n: usize, edges: &[MstEdge]) -> Vec<LinkageRow> {
    let mut sorted = edges.to_vec();
    sorted.sort_by(MstEdge::key_cmp);

    let total = 2 * n.max(1) - 1;
    let mut parent: Vec<usize> = (0..total).collect();
    let mut size = vec![1usize; total];
    let find = |parent: &mut Vec<usize>, mut x: usize| {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        while parent[x] != root {
            let next = parent[x];
            parent[x] = root;
            x = next;
        }
        root
    };

    let mut rows = Vec::with_capacity(sorted.len());
    for (i, e) in sorted.iter().enumerate() {
        let l = find(&mut parent, e.a as usize);
        let r = find(&mut parent, e.b as usize);
        let node = n + i;
        size[node] = size[l] + size[r];
        parent[l] = node;
        parent[r] = node;
        rows.push(LinkageRow {
            left: l,
            right: r,
            distance: e.weight,
            size: size[node],
        });
    }
    rows
}

fn bfs_hierarchy(rows: &[LinkageRow], n: usize, root: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([root]);
    while let Some(node) = queue.pop_front() {
        out.push(node);
        if node >= n {
            let row = &rows[node - n];
            queue.push_back(row.left);
            queue.push_back(row.right);
        }
    }
    out
}

/// One edge of the condensed tree: `child` (a point or cluster) leaves
/// `parent` at density `lambda = 1 / distance`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CondensedRow {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

pub fn condense(rows: &[LinkageRow], n: usize, min_cluster_size: usize) -> Vec<CondensedRow> {
    if rows.is_empty() {
        return Vec::new();
    }
    let root = 2 * rows.len();
    let order = bfs_hierarchy(rows, n, root);
    let mut relabel = vec![0usize; root + 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut ignore = vec![false; root + 1];
    let mut out = Vec::with_capacity(n);

    let count = |node: usize| if node >= n { rows[node - n].size } else { 1 };

    for node in order {
        if ignore[node] || node < n {
            continue;
        }
        let row = rows[node - n];
        let lambda = lambda_of(row.distance);
        let (lc, rc) = (count(row.left), count(row.right));
        let parent = relabel[node];

        let fall_out = |sub_root: usize, ignore: &mut Vec<bool>, out: &mut Vec<CondensedRow>| {
            for sub in bfs_hierarchy(rows, n, sub_root) {
                if sub < n {
                    out.push(CondensedRow {
                        parent,
                        child: sub,
                        lambda,
                        size: 1,
                    });
                }
                ignore[sub] = true;
            }
        };

        match (lc >= min_cluster_size, rc >= min_cluster_size) {
            (true, true) => {
                for (child, c) in [(row.left, lc), (row.right, rc)] {
                    relabel[child] = next_label;
                    next_label += 1;
                    out.push(CondensedRow {
                        parent,
                        child: relabel[child],
                        lambda,
                        size: c,
                    });
                }
            }
            (false, false) => {
                fall_out(row.left, &mut ignore, &mut out);
                fall_out(row.right, &mut ignore, &mut out);
            }
            (false, true) => {
                relabel[row.right] = parent;
                fall_out(row.left, &mut ignore, &mut out);
            }
            (true, false) => {
                relabel[row.left] = parent;
                fall_out(row.right, &mut ignore, &mut out);
            }
        }
    }
    out
}

/// Cluster-level view of a condensed tree.
pub struct ClusterTree {
    pub n_points: usize,
    /// Indexed by `cluster - n_points`.
    pub parent: Vec<Option<usize>>,
    pub birth: Vec<f64>,
    pub children: Vec<Vec<usize>>,
    pub stability: Vec<f64>,
}

impl ClusterTree {
    pub fn from_condensed(tree: &[CondensedRow], n: usize) -> Self {
        let n_clusters = tree
            .iter()
            .map(|r| r.parent.max(if r.size > 1 { r.child } else { 0 }))
            .max()
            .map_or(1, |m| m - n + 1);
        let mut parent = vec![None; n_clusters];
        let mut birth = vec![0.0; n_clusters];
        let mut children = vec![Vec::new(); n_clusters];
        for r in tree.iter().filter(|r| r.size > 1) {
            parent[r.child - n] = Some(r.parent);
            birth[r.child - n] = r.lambda;
            children[r.parent - n].push(r.child);
        }
        let mut stability = vec![0.0; n_clusters];
        for r in tree {
            stability[r.parent - n] += (r.lambda - birth[r.parent - n]) * r.size as f64;
        }
        ClusterTree {
            n_points: n,
            parent,
            birth,
            children,
            stability,
        }
    }

    pub fn root(&self) -> usize {
        self.n_points
    }

    fn idx(&self, c: usize) -> usize {
        c - self.n_points
    }

    fn descendants(&self, c: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([c]);
        while let Some(x) = queue.pop_front() {
            out.push(x);
            queue.extend(self.children[self.idx(x)].iter().copied());
        }
        out
    }

    /// Distance at which cluster `c` was born.
    fn birth_distance(&self, c: usize) -> f64 {
        1.0 / self.birth[self.idx(c)]
    }

    /// Excess-of-mass selection; the root is never selected.
    fn select_eom(&self) -> Vec<bool> {
        let n_clusters = self.parent.len();
        let mut selected = vec![true; n_clusters];
        selected[0] = false;
        let mut stability = self.stability.clone();
        for idx in (1..n_clusters).rev() {
            let subtree: f64 = self.children[idx]
                .iter()
                .map(|&c| stability[self.idx(c)])
                .sum();
            if subtree > stability[idx] {
                selected[idx] = false;
                stability[idx] = subtree;
            } else {
                for d in self.descendants(idx + self.n_points).into_iter().skip(1) {
                    let i = self.idx(d);
                    selected[i] = false;
                }
            }
        }
        selected
    }

    fn climb_to_epsilon(&self, leaf: usize, epsilon: f64) -> usize {
        let parent = self.parent[self.idx(leaf)].expect("non-root cluster has a parent");
        if parent == self.root() {
            return leaf;
        }
        if self.birth_distance(parent) > epsilon {
            parent
        } else {
            self.climb_to_epsilon(parent, epsilon)
        }
    }

    /// Replace selected clusters born below `epsilon` by their nearest
    /// ancestor born above it (never the root).
    fn apply_epsilon(&self, selected: &[bool], epsilon: f64) -> Vec<bool> {
        let mut processed = vec![false; selected.len()];
        let mut out = vec![false; selected.len()];
        for idx in (0..selected.len()).filter(|&i| selected[i]) {
            let leaf = idx + self.n_points;
            if self.birth_distance(leaf) < epsilon {
                if !processed[idx] {
                    let keep = self.climb_to_epsilon(leaf, epsilon);
                    out[self.idx(keep)] = true;
                    for d in self.descendants(keep).into_iter().skip(1) {
                        let i = self.idx(d);
                        processed[i] = true;
                    }
                }
            } else {
                out[idx] = true;
            }
        }
        out
    }

    pub fn select(&self, epsilon: f64) -> Vec<bool> {
        let eom = self.select_eom();
        if epsilon != 0.0 && self.parent.len() > 1 {
            self.apply_epsilon(&eom, epsilon)
        } else {
            eom
        }
    }
}

/// Flat labels from a condensed tree: each point belongs to the nearest
/// selected ancestor of the cluster it fell out of, or is noise (-1).
pub fn label_points(
    tree: &[CondensedRow],
    n: usize,
    clusters: &ClusterTree,
    selected: &[bool],
) -> Vec<i64> {
    let mut labels = vec![-1i64; n];
    for r in tree.iter().filter(|r| r.size == 1) {
        let mut c = r.parent;
        loop {
            let idx = c - n;
            if selected[idx] {
                labels[r.child] = c as i64;
                break;
            }
            match clusters.parent[idx] {
                Some(p) => c = p,
                None => break,
            }
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize, w: impl Fn(usize) -> f64) -> Vec<MstEdge> {
        (0..n - 1)
            .map(|i| MstEdge::new(i as u32, i as u32 + 1, w(i)))
            .collect()
    }

    #[test]
    fn linkage_sizes_accumulate() {
        let rows = single_linkage(4, &chain(4, |i| i as f64 + 1.0));
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].size, 4);
        assert_eq!((rows[1].left, rows[1].right), (4, 2));
    }

    #[test]
    fn small_pieces_fall_out() {
        let rows = single_linkage(5, &chain(5, |i| i as f64 + 1.0));
        let tree = condense(&rows, 5, 10);
        assert_eq!(tree.len(), 5);
        assert!(tree.iter().all(|r| r.parent == 5 && r.size == 1));
    }

    #[test]
    fn two_groups_split() {
        // Points 0..10 tightly chained, 10..20 tightly chained, bridge of weight 10.
        let mut edges = Vec::new();
        for i in 0..9u32 {
            edges.push(MstEdge::new(i, i + 1, 0.1));
            edges.push(MstEdge::new(i + 10, i + 11, 0.1));
        }
        edges.push(MstEdge::new(9, 10, 10.0));
        let rows = single_linkage(20, &edges);
        let tree = condense(&rows, 20, 5);
        let ct = ClusterTree::from_condensed(&tree, 20);
        assert_eq!(ct.parent.len(), 3);
        let sel = ct.select(0.0);
        assert_eq!(sel, vec![false, true, true]);
        let labels = label_points(&tree, 20, &ct, &sel);
        assert!(labels[..10].iter().all(|&l| l == labels[0]));
        assert!(labels[10..].iter().all(|&l| l == labels[10]));
        assert_ne!(labels[0], labels[10]);
        // With a larger epsilon the children are kept because the parent is the root.
        assert_eq!(ct.select(20.0), vec![false, true, true]);
    }
}
