//! Static 3-D k-d tree used for core distances and the Boruvka MST search.

const LEAF_SIZE: usize = 16;
const NO_CHILD: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub start: u32,
    pub end: u32,
    pub left: u32,
    pub right: u32,
}

impl Node {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.left == NO_CHILD
    }

    /// Squared distance from `q` to this node's bounding box.
    #[inline]
    pub fn min_dist2(&self, q: &[f64; 3]) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if q[k] < self.lo[k] {
                self.lo[k] - q[k]
            } else if q[k] > self.hi[k] {
                q[k] - self.hi[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

/// Nodes are stored in pre-order: a parent always precedes its children.
pub(crate) struct KdTree<'a> {
    pub points: &'a [[f64; 3]],
    pub perm: Vec<u32>,
    pub nodes: Vec<Node>,
}

#[inline]
pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [[f64; 3]]) -> Self {
        let mut tree = KdTree {
            points,
            perm: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.perm[start..end] {
            let p = &self.points[i as usize];
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            lo,
            hi,
            start: start as u32,
            end: end as u32,
            left: NO_CHILD,
            right: NO_CHILD,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis]
                .total_cmp(&points[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        let node = &mut self.nodes[id as usize];
        node.left = left;
        node.right = right;
        id
    }

    #[inline]
    pub fn members(&self, node: &Node) -> &[u32] {
        &self.perm[node.start as usize..node.end as usize]
    }

    /// Distance from point `i` to its `k`-th nearest other point.
    /// Requires `1 <= k < points.len()`.
    pub fn kth_neighbor_distance(&self, i: usize, k: usize) -> f64 {
        let q = &self.points[i];
        // Ascending squared distances of the best k found so far.
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            let bound = node.min_dist2(q);
            if best.len() == k && bound > best[k - 1] {
                continue;
            }
            if node.is_leaf() {
                for &j in self.members(node) {
                    if j as usize == i {
                        continue;
                    }
                    let d = dist2(q, &self.points[j as usize]);
                    if best.len() < k || d < best[k - 1] {
                        let pos = best.partition_point(|&b| b <= d);
                        best.insert(pos, d);
                        best.truncate(k);
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = self.nodes[l as usize].min_dist2(q);
                let dr = self.nodes[r as usize].min_dist2(q);
                // Visit the nearer child first.
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best[k - 1].sqrt()
    }
}
