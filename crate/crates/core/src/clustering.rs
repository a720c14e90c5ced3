//! HDBSCAN density clustering.

use rayon::prelude::*;
use serde::Serialize;

use crate::conditioning::NeighborIndex;
use crate::error::{Error, Result};
use crate::geometry::Point3;

pub const NOISE: i32 = -1;

/// Smallest merge distance used when converting to density (λ = 1/d).
const MIN_DISTANCE: f64 = 1e-12;

/// Distance from every point to its `k`-th nearest other point.
pub fn core_distances(points: &[Point3], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("min_samples must be at least 1".into()));
    }
    if points.len() <= k {
        return Err(Error::TooFewPoints { needed: k, got: points.len() });
    }
    let index = NeighborIndex::new(points);
    Ok((0..points.len())
        .into_par_iter()
        .map(|i| index.knn_excluding(i, k).last().map_or(0.0, |n| n.distance()))
        .collect())
}

/// `max(core(a), core(b), |a − b|)`.
pub fn mutual_reachability(points: &[Point3], core: &[f64], a: usize, b: usize) -> f64 {
    let d = (points[a] - points[b]).norm();
    d.max(core[a]).max(core[b])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Canonical rank of every point: lexicographic on coordinates, index last.
fn canonical_ranks(points: &[Point3]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (&points[a], &points[b]);
        p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)).then(p.z.total_cmp(&q.z)).then(a.cmp(&b))
    });
    let mut rank = vec![0; points.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

/// Total order on edges: weight, then the canonical ranks of the endpoints.
fn edge_key(rank: &[usize], a: usize, b: usize, w: f64) -> (f64, usize, usize) {
    let (ra, rb) = (rank[a], rank[b]);
    (w, ra.min(rb), ra.max(rb))
}

fn key_lt(x: &(f64, usize, usize), y: &(f64, usize, usize)) -> bool {
    x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)).is_lt()
}

/// Prim's algorithm on the complete mutual-reachability graph.
///
/// Equal weights are ordered by the endpoints' lexicographic position, so
/// the tree is unique and does not depend on the input order.
pub fn minimum_spanning_tree(points: &[Point3], core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let rank = canonical_ranks(points);
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, usize::MAX, usize::MAX); n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let key = edge_key(&rank, current, v, mutual_reachability(points, core, current, v));
            if key_lt(&key, &best[v]) {
                best[v] = key;
                from[v] = current;
            }
            if next == usize::MAX || key_lt(&best[v], &best[next]) {
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge { a: from[next], b: next, weight: best[next].0 });
        current = next;
    }
    let mut keyed: Vec<((f64, usize, usize), MstEdge)> = edges.into_iter().map(|e| (edge_key(&rank, e.a, e.b, e.weight), e)).collect();
    keyed.sort_by(|x, y| x.0 .0.total_cmp(&y.0 .0).then(x.0 .1.cmp(&y.0 .1)).then(x.0 .2.cmp(&y.0 .2)));
    keyed.into_iter().map(|(_, e)| e).collect()
}

/// One row of the condensed tree: `child` (a point index below
/// `n_points`, or a cluster id at or above it) leaves `parent` at density
/// `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CondensedRow {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

/// Cluster hierarchy after pruning splits smaller than the minimum size.
#[derive(Debug, Clone, Serialize)]
pub struct CondensedTree {
    pub n_points: usize,
    /// Density at which all points first form one component.
    pub root_birth: f64,
    pub rows: Vec<CondensedRow>,
}

impl CondensedTree {
    /// Cluster ids, root (`n_points`) first.
    pub fn clusters(&self) -> Vec<usize> {
        let mut ids = vec![self.n_points];
        ids.extend(self.rows.iter().filter(|r| r.child >= self.n_points).map(|r| r.child));
        ids
    }

    /// Density at which a cluster appears. The root appears once the whole
    /// set is connected.
    pub fn birth(&self, cluster: usize) -> f64 {
        self.rows.iter().find(|r| r.child == cluster).map_or(self.root_birth, |r| r.lambda)
    }

    pub fn parent(&self, cluster: usize) -> Option<usize> {
        self.rows.iter().find(|r| r.child == cluster).map(|r| r.parent)
    }

    /// `Σ (λ_leave − λ_birth) · size` over everything leaving the cluster.
    pub fn stability(&self, cluster: usize) -> f64 {
        let birth = self.birth(cluster);
        self.rows
            .iter()
            .filter(|r| r.parent == cluster)
            .map(|r| (r.lambda - birth) * r.size as f64)
            .sum()
    }

    /// Excess-of-mass selection: a cluster is kept when its own stability
    /// beats the best selection among its descendants.
    pub fn select_clusters(&self) -> Vec<usize> {
        let ids = self.clusters();
        let mut score: std::collections::HashMap<usize, f64> = ids.iter().map(|&c| (c, self.stability(c))).collect();
        let mut selected: std::collections::HashMap<usize, bool> = ids.iter().map(|&c| (c, true)).collect();
        // children always carry larger ids than their parents
        let mut order = ids.clone();
        order.sort_unstable_by(|a, b| b.cmp(a));
        for &c in &order {
            let kids: Vec<usize> = self.rows.iter().filter(|r| r.parent == c && r.child >= self.n_points).map(|r| r.child).collect();
            let kid_sum: f64 = kids.iter().map(|k| score[k]).sum();
            if !kids.is_empty() && kid_sum > score[&c] {
                score.insert(c, kid_sum);
                selected.insert(c, false);
            } else {
                for d in self.descendants(c) {
                    selected.insert(d, false);
                }
            }
        }
        let mut out: Vec<usize> = ids.into_iter().filter(|c| selected[c]).collect();
        out.sort_unstable();
        out
    }

    fn descendants(&self, cluster: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![cluster];
        while let Some(c) = stack.pop() {
            for r in self.rows.iter().filter(|r| r.parent == c && r.child >= self.n_points) {
                out.push(r.child);
                stack.push(r.child);
            }
        }
        out
    }
}

/// Single-linkage merge tree: node `n + i` joins `left` and `right` at `distance`.
struct Linkage {
    n: usize,
    left: Vec<usize>,
    right: Vec<usize>,
    distance: Vec<f64>,
    size: Vec<usize>,
}

impl Linkage {
    fn from_mst(n: usize, mst: &[MstEdge]) -> Self {
        // edges arrive in merge order
        let edges = mst.to_vec();
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut link = Linkage { n, left: Vec::new(), right: Vec::new(), distance: Vec::new(), size: Vec::new() };
        for e in edges {
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            let node = n + link.left.len();
            let size = link.node_size(ra) + link.node_size(rb);
            link.left.push(ra);
            link.right.push(rb);
            link.distance.push(e.weight);
            link.size.push(size);
            parent[ra] = node;
            parent[rb] = node;
        }
        link
    }

    fn node_size(&self, node: usize) -> usize {
        if node < self.n {
            1
        } else {
            self.size[node - self.n]
        }
    }

    fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n {
                out.push(x);
            } else {
                stack.push(self.right[x - self.n]);
                stack.push(self.left[x - self.n]);
            }
        }
        out
    }

    fn condense(&self, min_cluster_size: usize) -> CondensedTree {
        let n = self.n;
        let mut rows = Vec::new();
        let root = 2 * n - 2;
        let mut next_label = n + 1;
        let mut queue = std::collections::VecDeque::from([(root, n)]);
        while let Some((node, label)) = queue.pop_front() {
            let i = node - n;
            let lambda = 1.0 / self.distance[i].max(MIN_DISTANCE);
            let (l, r) = (self.left[i], self.right[i]);
            let (lc, rc) = (self.node_size(l), self.node_size(r));
            let big_l = lc >= min_cluster_size;
            let big_r = rc >= min_cluster_size;
            for (child, count, big, other_big) in [(l, lc, big_l, big_r), (r, rc, big_r, big_l)] {
                if big && other_big {
                    rows.push(CondensedRow { parent: label, child: next_label, lambda, size: count });
                    queue.push_back((child, next_label));
                    next_label += 1;
                } else if big {
                    // the cluster carries on under its current label
                    if child >= n {
                        queue.push_back((child, label));
                    } else {
                        rows.push(CondensedRow { parent: label, child, lambda, size: 1 });
                    }
                } else {
                    for p in self.leaves(child) {
                        rows.push(CondensedRow { parent: label, child: p, lambda, size: 1 });
                    }
                }
            }
        }
        let root_birth = 1.0 / self.distance[root - n].max(MIN_DISTANCE);
        CondensedTree { n_points: n, root_birth, rows }
    }
}

/// Per-point cluster labels, `NOISE` for unclustered points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterLabels {
    pub labels: Vec<i32>,
    pub n_clusters: usize,
}

impl ClusterLabels {
    fn all_noise(n: usize) -> Self {
        ClusterLabels { labels: vec![NOISE; n], n_clusters: 0 }
    }

    /// Member indices per label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

/// Full HDBSCAN chain with the condensed tree exposed for inspection.
pub fn hdbscan_tree(points: &[Point3], min_cluster_size: usize, min_samples: usize) -> Result<Option<CondensedTree>> {
    if min_cluster_size < 2 {
        return Err(Error::InvalidParameter(format!("min_cluster_size must be at least 2, got {min_cluster_size}")));
    }
    let n = points.len();
    if n < min_cluster_size || n < 2 {
        return Ok(None);
    }
    let core = core_distances(points, min_samples.clamp(1, n - 1))?;
    let mst = minimum_spanning_tree(points, &core);
    Ok(Some(Linkage::from_mst(n, &mst).condense(min_cluster_size)))
}

/// Clusters `points`; fewer points than `min_cluster_size` yields all noise.
pub fn hdbscan(points: &[Point3], min_cluster_size: usize, min_samples: usize) -> Result<ClusterLabels> {
    let Some(tree) = hdbscan_tree(points, min_cluster_size, min_samples)? else {
        return Ok(ClusterLabels::all_noise(points.len()));
    };
    let n = points.len();
    let selected = tree.select_clusters();
    let mut owner: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for (k, &c) in selected.iter().enumerate() {
        owner.insert(c, k);
    }
    let parent_of: std::collections::HashMap<usize, usize> =
        tree.rows.iter().filter(|r| r.child >= n).map(|r| (r.child, r.parent)).collect();
    let mut raw = vec![None; n];
    for r in tree.rows.iter().filter(|r| r.child < n) {
        let mut c = Some(r.parent);
        while let Some(id) = c {
            if let Some(&k) = owner.get(&id) {
                raw[r.child] = Some(k);
                break;
            }
            c = parent_of.get(&id).copied();
        }
    }
    // renumber by first occurrence
    let mut map = vec![None; selected.len()];
    let mut next = 0;
    let labels = raw
        .into_iter()
        .map(|l| match l {
            None => NOISE,
            Some(k) => *map[k].get_or_insert_with(|| {
                next += 1;
                next - 1
            }),
        })
        .collect();
    Ok(ClusterLabels { labels, n_clusters: next as usize })
}
