//! Outlier diagnostics: which labels fail to join meaningful clusters until
//! late in the agglomeration, and how much data backs them.

use serde::Serialize;

use crate::cooccur::CooccurrenceStats;
use crate::error::{Error, Result};
use crate::hclust::Dendrogram;
use crate::ingest::LabelRegistry;
use crate::VERSION;

pub const DEFAULT_MIN_CLUSTER: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelDiagnostics {
    pub label: String,
    /// Sets whose top-k contains the label.
    pub appearances: u64,
    /// Sets whose top-1 is the label.
    pub top1: u64,
    /// 1-based merge step at which the label first sits in a cluster of size >= m.
    pub merge_step: usize,
    pub merge_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub labels: Vec<String>,
    pub median_appearances: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub hiertree_version: String,
    pub min_cluster_size: usize,
    pub group_size: usize,
    pub overall_median_appearances: f64,
    /// The `q` labels that reach a meaningful cluster first.
    pub early: GroupSummary,
    /// The `q` labels that reach one last, most outlier-like first.
    pub late: GroupSummary,
    /// Every label, ordered from best placed to most outlier-like.
    pub ranked: Vec<LabelDiagnostics>,
}

impl DiagnosticsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn median(values: &[u64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid] as f64
    } else {
        (v[mid - 1] as f64 + v[mid] as f64) / 2.0
    }
}

/// For every leaf, the id of its lowest ancestor holding at least `m` leaves.
fn first_meaningful_ancestor(tree: &Dendrogram, m: usize) -> Vec<usize> {
    let n = tree.n_leaves();
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut size = vec![1usize; 2 * n - 1];
    for (step, mg) in tree.merges().iter().enumerate() {
        parent[mg.left] = n + step;
        parent[mg.right] = n + step;
        size[n + step] = mg.size;
    }
    (0..n)
        .map(|leaf| {
            let mut x = parent[leaf];
            while size[x] < m {
                x = parent[x];
            }
            x
        })
        .collect()
}

/// Ranks labels by the merge step at which they first join a cluster of at
/// least `m` labels. Labels that never appear in any prediction set rank as
/// the most outlier-like regardless of merge step.
pub fn late_merger_report(
    tree: &Dendrogram,
    tree_labels: &LabelRegistry,
    stats: &CooccurrenceStats,
    m: usize,
    q: usize,
) -> Result<DiagnosticsReport> {
    let n = tree.n_leaves();
    if tree_labels.len() != n {
        return Err(Error::Validation(format!("{} label names for a {n}-leaf tree", tree_labels.len())));
    }
    if m < 2 || m > n {
        return Err(Error::Validation(format!("meaningful cluster size m = {m} outside 2..={n}")));
    }
    if q > n {
        return Err(Error::Validation(format!("group size q = {q} exceeds {n} labels")));
    }
    let anc = first_meaningful_ancestor(tree, m);
    let mut rows = Vec::with_capacity(n);
    for (leaf, &node) in anc.iter().enumerate() {
        let name = tree_labels.name(leaf);
        let sid = stats
            .labels()
            .id(name)
            .ok_or_else(|| Error::Validation(format!("tree label '{name}' missing from co-occurrence stats")))?;
        rows.push(LabelDiagnostics {
            label: name.to_owned(),
            appearances: stats.count(sid),
            top1: stats.top1_count(sid),
            merge_step: node - n + 1,
            merge_height: tree.height_of(node),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (rows[i].appearances == 0, rows[i].merge_step, i));
    let ranked: Vec<LabelDiagnostics> = order.iter().map(|&i| rows[i].clone()).collect();

    let summarize = |group: Vec<&LabelDiagnostics>| GroupSummary {
        median_appearances: median(&group.iter().map(|r| r.appearances).collect::<Vec<_>>()),
        labels: group.iter().map(|r| r.label.clone()).collect(),
    };
    let early = summarize(ranked.iter().take(q).collect());
    let late = summarize(ranked.iter().rev().take(q).collect());
    let all: Vec<u64> = rows.iter().map(|r| r.appearances).collect();

    Ok(DiagnosticsReport {
        hiertree_version: VERSION.to_owned(),
        min_cluster_size: m,
        group_size: q,
        overall_median_appearances: median(&all),
        early,
        late,
        ranked,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterInfo {
    pub index: usize,
    pub size: usize,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterProfile {
    pub hiertree_version: String,
    pub k: usize,
    pub clusters: Vec<ClusterInfo>,
    /// Shannon entropy of the cluster-size distribution divided by ln k;
    /// 1 for equal sizes. A single cluster counts as balanced.
    pub balance: f64,
}

impl ClusterProfile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("profile serializes");
        s.push('\n');
        s
    }
}

pub fn balance_entropy(sizes: &[usize]) -> f64 {
    let k = sizes.len();
    if k <= 1 {
        return 1.0;
    }
    let total: usize = sizes.iter().sum();
    let h: f64 = sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    (h / (k as f64).ln()).clamp(0.0, 1.0)
}

pub fn cluster_profile(tree: &Dendrogram, k: usize, labels: &LabelRegistry) -> Result<ClusterProfile> {
    let cut = tree.cut(k)?;
    let clusters: Vec<ClusterInfo> = cut
        .clusters()
        .into_iter()
        .enumerate()
        .map(|(index, members)| ClusterInfo {
            index,
            size: members.len(),
            members: members.iter().map(|&l| labels.name(l).to_owned()).collect(),
        })
        .collect();
    let sizes: Vec<usize> = clusters.iter().map(|c| c.size).collect();
    Ok(ClusterProfile { hiertree_version: VERSION.to_owned(), k, balance: balance_entropy(&sizes), clusters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccur::{compute_distance, fixtures::f1, ConfidenceDistance, DistanceMatrix, DistanceOptions};
    use crate::hclust::agglomerate;
    use crate::ingest::LabelId;
    use crate::linkage::Single;

    #[test]
    fn entropy_values() {
        assert_eq!(balance_entropy(&[2, 2]), 1.0);
        assert_eq!(balance_entropy(&[5]), 1.0);
        assert!(balance_entropy(&[99, 1]) < 0.1);
        assert_eq!(balance_entropy(&[1, 2, 3]), balance_entropy(&[3, 1, 2]));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3, 1, 2]), 2.0);
        assert_eq!(median(&[4, 1, 2, 3]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }

    #[test]
    fn f1_profile() {
        let d = compute_distance(&ConfidenceDistance, &f1(), &DistanceOptions::default()).unwrap();
        let t = agglomerate(&d, &Single).unwrap();
        let p = cluster_profile(&t, 2, d.labels()).unwrap();
        let sizes: Vec<_> = p.clusters.iter().map(|c| c.size).collect();
        assert_eq!(sizes, [2, 1]);
        assert_eq!(p.clusters[0].members, ["a", "b"]);
    }

    #[test]
    fn chain_tree_is_unbalanced() {
        // label i sits at position 2^i on a line: single linkage chains
        let n = 8;
        let reg = LabelRegistry::from_names((0..n).map(|i| format!("l{i}"))).unwrap();
        let pos: Vec<f64> = (0..n).map(|i| (1u64 << i) as f64).collect();
        let d = DistanceMatrix::from_fn(reg.clone(), "t", |i, j| (pos[i] - pos[j]).abs()).unwrap();
        let t = agglomerate(&d, &Single).unwrap();
        let p = cluster_profile(&t, 2, &reg).unwrap();
        let mut sizes: Vec<_> = p.clusters.iter().map(|c| c.size).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [1, n - 1]);
        assert!(p.balance < 0.6);
    }

    #[test]
    fn isolated_label_merges_last() {
        let reg = LabelRegistry::from_names(["a", "b", "c", "d", "e"]).unwrap();
        let sets: [&[LabelId]; 4] = [&[0, 1, 2], &[0, 1, 3], &[1, 2, 3], &[0, 2, 3]];
        let stats = CooccurrenceStats::from_sets(reg.clone(), sets);
        let opts = DistanceOptions { uncovered: crate::cooccur::UncoveredPolicy::Isolate, ..Default::default() };
        let d = compute_distance(&ConfidenceDistance, &stats, &opts).unwrap();
        let t = agglomerate(&d, &Single).unwrap();
        let r = late_merger_report(&t, &reg, &stats, 3, 1).unwrap();
        assert_eq!(r.late.labels, ["e"]);
        assert_eq!(r.ranked.last().unwrap().merge_step, 4);
        assert_eq!(r.ranked.last().unwrap().appearances, 0);
        assert!(r.ranked.iter().all(|x| (1..=4).contains(&x.merge_step)));
    }

    #[test]
    fn argument_checks() {
        let d = compute_distance(&ConfidenceDistance, &f1(), &DistanceOptions::default()).unwrap();
        let t = agglomerate(&d, &Single).unwrap();
        assert!(late_merger_report(&t, d.labels(), &f1(), 1, 1).is_err());
        assert!(late_merger_report(&t, d.labels(), &f1(), 2, 4).is_err());
        let r = late_merger_report(&t, d.labels(), &f1(), 2, 1).unwrap();
        assert_eq!(r.early.labels, ["a"]);
        assert_eq!(r.late.labels, ["c"]);
        assert_eq!(r.overall_median_appearances, 3.0);
    }
}
