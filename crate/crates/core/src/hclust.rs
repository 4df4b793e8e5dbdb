//! Agglomerative clustering and flat cuts of the resulting dendrogram.
//!
//! Leaves carry ids `0..N`; the cluster created by merge step `s` (0-based)
//! gets id `N + s`. Among pairs at equal minimal distance the pair with the
//! lexicographically smallest `(min id, max id)` merges first.

use serde::{Deserialize, Serialize};

use crate::cooccur::DistanceMatrix;
use crate::error::{Error, Result};
use crate::ingest::LabelId;
use crate::linkage::Linkage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    /// Validates the merge list: N−1 merges, each child used once, ids created
    /// before use, sizes consistent, finite non-negative heights.
    pub fn new(n_leaves: usize, merges: Vec<Merge>) -> Result<Self> {
        if n_leaves < 2 {
            return Err(Error::Validation(format!("dendrogram needs at least 2 leaves, got {n_leaves}")));
        }
        if merges.len() != n_leaves - 1 {
            return Err(Error::Validation(format!(
                "dendrogram over {n_leaves} leaves needs {} merges, got {}",
                n_leaves - 1,
                merges.len()
            )));
        }
        let total = 2 * n_leaves - 1;
        let mut size = vec![0usize; total];
        let mut used = vec![false; total];
        size[..n_leaves].fill(1);
        for (step, m) in merges.iter().enumerate() {
            let id = n_leaves + step;
            for child in [m.left, m.right] {
                if child >= id {
                    return Err(Error::Validation(format!("merge {step} references cluster {child} before it exists")));
                }
                if used[child] {
                    return Err(Error::Validation(format!("cluster {child} merged twice")));
                }
                used[child] = true;
            }
            if m.left == m.right {
                return Err(Error::Validation(format!("merge {step} joins cluster {} with itself", m.left)));
            }
            if !(m.height.is_finite() && m.height >= 0.0) {
                return Err(Error::Validation(format!("merge {step} has invalid height {}", m.height)));
            }
            if m.size != size[m.left] + size[m.right] {
                return Err(Error::Validation(format!(
                    "merge {step} size {} != {} + {}",
                    m.size, size[m.left], size[m.right]
                )));
            }
            size[id] = m.size;
        }
        Ok(Dendrogram { n_leaves, merges })
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn root(&self) -> usize {
        2 * self.n_leaves - 2
    }

    pub fn is_monotone(&self) -> bool {
        self.merges.windows(2).all(|w| w[0].height <= w[1].height)
    }

    /// Height of cluster `id`; leaves sit at 0.
    pub fn height_of(&self, id: usize) -> f64 {
        if id < self.n_leaves {
            0.0
        } else {
            self.merges[id - self.n_leaves].height
        }
    }

    /// Children of internal node `id`.
    pub fn children(&self, id: usize) -> Option<(usize, usize)> {
        (id >= self.n_leaves).then(|| {
            let m = &self.merges[id - self.n_leaves];
            (m.left, m.right)
        })
    }

    /// Leaf ids under cluster `id`, in ascending order.
    pub fn leaves_of(&self, id: usize) -> Vec<LabelId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(c) = stack.pop() {
            match self.children(c) {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => out.push(c),
            }
        }
        out.sort_unstable();
        out
    }

    /// Keeps the first N−k merges; connected components become clusters.
    pub fn cut(&self, k: usize) -> Result<CutAssignment> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return Err(Error::KOutOfRange { k, n });
        }
        let mut uf = UnionFind::new(n);
        for m in &self.merges[..n - k] {
            uf.union(self.representative(m.left), self.representative(m.right));
        }
        let mut index = vec![usize::MAX; n];
        let mut member = Vec::with_capacity(n);
        let mut next = 0;
        for leaf in 0..n {
            let root = uf.find(leaf);
            if index[root] == usize::MAX {
                index[root] = next;
                next += 1;
            }
            member.push(index[root]);
        }
        debug_assert_eq!(next, k);
        Ok(CutAssignment { k, member })
    }

    /// Any leaf below cluster `id`.
    pub(crate) fn representative(&self, mut id: usize) -> usize {
        while let Some((l, _)) = self.children(id) {
            id = l;
        }
        id
    }
}

/// Flat partition of the leaves into `k` clusters. Cluster indices follow the
/// order of each cluster's smallest leaf id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutAssignment {
    pub k: usize,
    pub member: Vec<usize>,
}

impl CutAssignment {
    pub fn cluster_of(&self, label: LabelId) -> usize {
        self.member[label]
    }

    pub fn same_cluster(&self, a: LabelId, b: LabelId) -> bool {
        self.member[a] == self.member[b]
    }

    pub fn clusters(&self) -> Vec<Vec<LabelId>> {
        let mut out = vec![Vec::new(); self.k];
        for (label, &c) in self.member.iter().enumerate() {
            out[c].push(label);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for &c in &self.member {
            out[c] += 1;
        }
        out
    }

    /// True when every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &CutAssignment) -> bool {
        let mut image = vec![usize::MAX; self.k];
        for (label, &c) in self.member.iter().enumerate() {
            let target = coarser.member[label];
            if image[c] == usize::MAX {
                image[c] = target;
            } else if image[c] != target {
                return false;
            }
        }
        true
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        lo
    }
}

#[inline]
fn pair_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[inline]
fn precedes(d1: f64, k1: (usize, usize), d2: f64, k2: (usize, usize)) -> bool {
    d1 < d2 || (d1 == d2 && k1 < k2)
}

/// Clusters the labels of `dist` bottom-up under `linkage`.
///
/// Each active cluster caches its nearest active neighbour; after a merge
/// only rows whose cached neighbour disappeared are rescanned. The result is
/// identical to exhaustively scanning all pairs at every step.
pub fn agglomerate(dist: &DistanceMatrix, linkage: &dyn Linkage) -> Result<Dendrogram> {
    let n = dist.n();
    if n < 2 {
        return Err(Error::Validation("need at least 2 labels to cluster".into()));
    }
    let mut d = dist.values().to_vec();
    for (idx, v) in d.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row: idx / n, col: idx % n });
        }
    }

    let mut active = vec![true; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut nn = vec![usize::MAX; n];
    let mut nn_dist = vec![f64::INFINITY; n];

    let rescan = |slot: usize, d: &[f64], active: &[bool], id: &[usize], nn: &mut [usize], nn_dist: &mut [f64]| {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        let mut best_k = (usize::MAX, usize::MAX);
        for other in 0..n {
            if other == slot || !active[other] {
                continue;
            }
            let dv = d[slot * n + other];
            let key = pair_key(id[slot], id[other]);
            if best == usize::MAX || precedes(dv, key, best_d, best_k) {
                best = other;
                best_d = dv;
                best_k = key;
            }
        }
        nn[slot] = best;
        nn_dist[slot] = best_d;
    };

    for slot in 0..n {
        rescan(slot, &d, &active, &id, &mut nn, &mut nn_dist);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut a = usize::MAX;
        let mut best_d = f64::INFINITY;
        let mut best_k = (usize::MAX, usize::MAX);
        for slot in 0..n {
            if !active[slot] {
                continue;
            }
            let key = pair_key(id[slot], id[nn[slot]]);
            if a == usize::MAX || precedes(nn_dist[slot], key, best_d, best_k) {
                a = slot;
                best_d = nn_dist[slot];
                best_k = key;
            }
        }
        let b = nn[a];
        let height = best_d;
        let (size_a, size_b) = (size[a], size[b]);
        merges.push(Merge { left: best_k.0, right: best_k.1, height, size: size_a + size_b });

        // the merged cluster takes slot `a`
        active[b] = false;
        for v in 0..n {
            if !active[v] || v == a {
                continue;
            }
            let nd = linkage.update(d[a * n + v], d[b * n + v], height, size_a, size_b, size[v]);
            d[a * n + v] = nd;
            d[v * n + a] = nd;
        }
        id[a] = n + step;
        size[a] = size_a + size_b;

        if step == n - 2 {
            break;
        }
        rescan(a, &d, &active, &id, &mut nn, &mut nn_dist);
        for v in 0..n {
            if !active[v] || v == a {
                continue;
            }
            if nn[v] == a || nn[v] == b {
                rescan(v, &d, &active, &id, &mut nn, &mut nn_dist);
            } else {
                let dv = d[v * n + a];
                let key = pair_key(id[v], id[a]);
                if precedes(dv, key, nn_dist[v], pair_key(id[v], id[nn[v]])) {
                    nn[v] = a;
                    nn_dist[v] = dv;
                }
            }
        }
    }

    Dendrogram::new(n, merges)
}
