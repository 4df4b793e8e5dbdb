//! Accuracy of a classifier measured against every level of a label hierarchy.
//!
//! A record counts as correct at level `k` when its predicted label and its
//! ground-truth label fall in the same cluster of the `k`-cut.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hclust::Dendrogram;
use crate::ingest::{LabelId, LabelRegistry, PredictionDataset};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalRecord {
    pub video_id: String,
    pub truth: LabelId,
    /// Ranked predictions; the first entry is the top-1.
    pub predicted: Vec<LabelId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSet {
    records: Vec<EvalRecord>,
}

impl EvalSet {
    pub fn new(records: Vec<EvalRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyEvalSet);
        }
        if records.iter().any(|r| r.predicted.is_empty()) {
            return Err(Error::Validation("evaluation record without a prediction".into()));
        }
        Ok(EvalSet { records })
    }

    /// Convenience constructor from (truth, top-1) pairs.
    pub fn from_pairs(pairs: &[(LabelId, LabelId)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .enumerate()
                .map(|(i, &(truth, pred))| EvalRecord { video_id: i.to_string(), truth, predicted: vec![pred] })
                .collect(),
        )
    }

    /// Maps a parsed dataset onto the label ids of a hierarchy. Truth and
    /// top-1 must exist in `labels`; lower-ranked predictions unknown to the
    /// hierarchy are dropped.
    pub fn from_dataset(ds: &PredictionDataset, labels: &LabelRegistry) -> Result<Self> {
        let lookup = |id: LabelId, what: &str, video: &str| {
            let name = ds.registry.name(id);
            labels
                .id(name)
                .ok_or_else(|| Error::Validation(format!("{what} label '{name}' of '{video}' is not in the hierarchy")))
        };
        let mut records = Vec::with_capacity(ds.records.len());
        for rec in &ds.records {
            let truth =
                rec.truth.ok_or_else(|| Error::Validation(format!("record '{}' has no ground truth", rec.video_id)))?;
            let truth = lookup(truth, "truth", &rec.video_id)?;
            let mut predicted = vec![lookup(rec.top1(), "predicted", &rec.video_id)?];
            predicted.extend(rec.labels().skip(1).filter_map(|l| labels.id(ds.registry.name(l))));
            records.push(EvalRecord { video_id: rec.video_id.clone(), truth, predicted });
        }
        Self::new(records)
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn check_labels(&self, n: usize) -> Result<()> {
        for r in &self.records {
            if r.truth >= n || r.predicted.iter().any(|&p| p >= n) {
                return Err(Error::Validation(format!(
                    "evaluation record '{}' references a label outside the {n}-leaf hierarchy",
                    r.video_id
                )));
            }
        }
        Ok(())
    }

    /// Plain top-1 accuracy: truth equals prediction.
    pub fn top1_accuracy(&self) -> f64 {
        let hits = self.records.iter().filter(|r| r.truth == r.predicted[0]).count();
        hits as f64 / self.records.len() as f64
    }
}

/// Fraction of records whose truth and top-1 prediction share a cluster of `cut(k)`.
pub fn level_accuracy(tree: &Dendrogram, eval: &EvalSet, k: usize) -> Result<f64> {
    level_accuracy_topm(tree, eval, k, 1)
}

/// Extension: a record is correct when any of its top-`m` predictions
/// shares a cluster with the truth. `m = 1` is the standard protocol.
pub fn level_accuracy_topm(tree: &Dendrogram, eval: &EvalSet, k: usize, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Validation("top-m requires m >= 1".into()));
    }
    eval.check_labels(tree.n_leaves())?;
    let cut = tree.cut(k)?;
    let hits =
        eval.records.iter().filter(|r| r.predicted.iter().take(m).any(|&p| cut.same_cluster(r.truth, p))).count();
    Ok(hits as f64 / eval.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyCurve {
    pub n_leaves: usize,
    pub points: Vec<(usize, f64)>,
}

impl AccuracyCurve {
    pub fn ks(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn accuracy_at(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == k).map(|p| p.1)
    }

    /// Trapezoidal area over the k grid, normalized by the k span. A single
    /// point reports its own accuracy.
    pub fn area(&self) -> f64 {
        let mut pts = self.points.clone();
        pts.sort_by_key(|p| p.0);
        if pts.len() < 2 {
            return pts.first().map_or(0.0, |p| p.1);
        }
        let span = (pts[pts.len() - 1].0 - pts[0].0) as f64;
        let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) as f64 * (w[0].1 + w[1].1) / 2.0).sum();
        area / span
    }

    /// CSV columns `k,accuracy,n_clusters_avg_size`; the last is N / k.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "accuracy", "n_clusters_avg_size"])?;
        for &(k, acc) in &self.points {
            let avg = self.n_leaves as f64 / k as f64;
            w.write_record([k.to_string(), acc.to_string(), avg.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of leading merges after which `a` and `b` share a cluster.
fn join_steps(tree: &Dendrogram) -> impl Fn(LabelId, LabelId, &mut Vec<u32>, u32) -> usize + '_ {
    let n = tree.n_leaves();
    let mut parent = vec![usize::MAX; 2 * n - 1];
    for (step, m) in tree.merges().iter().enumerate() {
        parent[m.left] = n + step;
        parent[m.right] = n + step;
    }
    move |a, b, mark, stamp| {
        if a == b {
            return 0;
        }
        let mut x = a;
        while x != usize::MAX {
            mark[x] = stamp;
            x = parent[x];
        }
        let mut y = b;
        while mark[y] != stamp {
            y = parent[y];
        }
        y - n + 1
    }
}

/// Accuracy at every `k` in `ks`, in the given order.
pub fn accuracy_curve(tree: &Dendrogram, eval: &EvalSet, ks: &[usize]) -> Result<AccuracyCurve> {
    accuracy_curve_topm(tree, eval, ks, 1)
}

/// Single pass over the records: each record's earliest co-clustering merge
/// step decides its correctness at every level at once.
pub fn accuracy_curve_topm(tree: &Dendrogram, eval: &EvalSet, ks: &[usize], m: usize) -> Result<AccuracyCurve> {
    if m == 0 {
        return Err(Error::Validation("top-m requires m >= 1".into()));
    }
    let n = tree.n_leaves();
    eval.check_labels(n)?;
    for &k in ks {
        if k == 0 || k > n {
            return Err(Error::KOutOfRange { k, n });
        }
    }
    let join = join_steps(tree);
    let mut mark = vec![0u32; 2 * n - 1];
    let mut stamp = 0u32;
    // hist[s] = records that first become correct after s merges
    let mut hist = vec![0usize; n];
    for r in &eval.records {
        let mut best = usize::MAX;
        for &p in r.predicted.iter().take(m) {
            stamp += 1;
            best = best.min(join(r.truth, p, &mut mark, stamp));
        }
        hist[best] += 1;
    }
    let mut cumulative = vec![0usize; n];
    let mut acc = 0;
    for (s, h) in hist.iter().enumerate() {
        acc += h;
        cumulative[s] = acc;
    }
    let total = eval.len() as f64;
    let points = ks.iter().map(|&k| (k, cumulative[n - k] as f64 / total)).collect();
    Ok(AccuracyCurve { n_leaves: n, points })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelWinner {
    pub k: usize,
    pub accuracy: f64,
    /// All methods attaining the best accuracy at this level.
    pub best: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedMethod {
    pub rank: usize,
    pub method: String,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub ks: Vec<usize>,
    pub per_k: Vec<LevelWinner>,
    pub ranking: Vec<RankedMethod>,
    #[serde(skip)]
    curves: BTreeMap<String, AccuracyCurve>,
}

impl ComparisonReport {
    /// Plot-ready CSV: one row per k, one column per method, then the winners.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_owned()];
        header.extend(self.curves.keys().cloned());
        header.push("best".into());
        w.write_record(&header)?;
        for (i, win) in self.per_k.iter().enumerate() {
            let mut row = vec![win.k.to_string()];
            row.extend(self.curves.values().map(|c| c.points[i].1.to_string()));
            row.push(win.best.join(";"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ranks methods by curve area and reports the winner(s) at every level.
pub fn compare_methods(curves: &BTreeMap<String, AccuracyCurve>) -> Result<ComparisonReport> {
    let mut iter = curves.iter();
    let (first_name, first) = iter.next().ok_or_else(|| Error::Validation("no accuracy curves to compare".into()))?;
    let ks = first.ks();
    for (name, c) in iter {
        if c.ks() != ks {
            return Err(Error::MismatchedGrid(format!("'{name}' differs from '{first_name}'")));
        }
    }

    let per_k = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let accuracy = curves.values().map(|c| c.points[i].1).fold(f64::NEG_INFINITY, f64::max);
            let best = curves.iter().filter(|(_, c)| c.points[i].1 == accuracy).map(|(name, _)| name.clone()).collect();
            LevelWinner { k, accuracy, best }
        })
        .collect();

    let mut scored: Vec<(String, f64)> = curves.iter().map(|(n, c)| (n.clone(), c.area())).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut ranking: Vec<RankedMethod> = Vec::with_capacity(scored.len());
    for (i, (method, area)) in scored.into_iter().enumerate() {
        let rank = match ranking.last() {
            Some(prev) if prev.area == area => prev.rank,
            _ => i + 1,
        };
        ranking.push(RankedMethod { rank, method, area });
    }

    Ok(ComparisonReport { ks, per_k, ranking, curves: curves.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccur::{compute_distance, fixtures::f1, ConfidenceDistance, DistanceOptions};
    use crate::hclust::agglomerate;
    use crate::linkage::Single;

    fn f1_tree() -> Dendrogram {
        let d = compute_distance(&ConfidenceDistance, &f1(), &DistanceOptions::default()).unwrap();
        agglomerate(&d, &Single).unwrap()
    }

    fn f1_eval() -> EvalSet {
        EvalSet::from_pairs(&[(0, 1), (0, 2), (2, 2)]).unwrap()
    }

    #[test]
    fn f1_levels() {
        let t = f1_tree();
        let e = f1_eval();
        assert_eq!(level_accuracy(&t, &e, 3).unwrap(), 1.0 / 3.0);
        assert_eq!(level_accuracy(&t, &e, 2).unwrap(), 2.0 / 3.0);
        assert_eq!(level_accuracy(&t, &e, 1).unwrap(), 1.0);
        assert_eq!(level_accuracy(&t, &e, 3).unwrap(), e.top1_accuracy());
    }

    #[test]
    fn f1_curve() {
        let c = accuracy_curve(&f1_tree(), &f1_eval(), &[1, 2, 3]).unwrap();
        assert_eq!(c.points, vec![(1, 1.0), (2, 2.0 / 3.0), (3, 1.0 / 3.0)]);
        let one = accuracy_curve(&f1_tree(), &f1_eval(), &[1]).unwrap();
        assert_eq!(one.points, vec![(1, 1.0)]);
    }

    #[test]
    fn topm_credits_lower_ranks() {
        let t = f1_tree();
        let e = EvalSet::new(vec![EvalRecord { video_id: "v".into(), truth: 2, predicted: vec![0, 2] }]).unwrap();
        assert_eq!(level_accuracy(&t, &e, 3).unwrap(), 0.0);
        assert_eq!(level_accuracy_topm(&t, &e, 3, 2).unwrap(), 1.0);
        let c = accuracy_curve_topm(&t, &e, &[1, 2, 3], 2).unwrap();
        assert_eq!(c.points, vec![(1, 1.0), (2, 1.0), (3, 1.0)]);
    }

    #[test]
    fn errors() {
        assert!(matches!(EvalSet::from_pairs(&[]), Err(Error::EmptyEvalSet)));
        let t = f1_tree();
        let e = EvalSet::from_pairs(&[(0, 7)]).unwrap();
        assert!(level_accuracy(&t, &e, 2).is_err());
        assert!(matches!(accuracy_curve(&t, &f1_eval(), &[0]), Err(Error::KOutOfRange { .. })));
    }

    #[test]
    fn compare_ties_and_dominance() {
        let a = AccuracyCurve { n_leaves: 3, points: vec![(1, 1.0), (2, 0.8), (3, 0.5)] };
        let b = AccuracyCurve { n_leaves: 3, points: vec![(1, 1.0), (2, 0.6), (3, 0.4)] };
        let mut curves = BTreeMap::new();
        curves.insert("b".to_owned(), b.clone());
        curves.insert("a".to_owned(), a.clone());
        let r = compare_methods(&curves).unwrap();
        assert_eq!(r.ranking[0].method, "a");
        assert_eq!(r.per_k[1].best, ["a"]);
        assert_eq!(r.per_k[0].best, ["a", "b"]);

        let mut same = BTreeMap::new();
        same.insert("x".to_owned(), a.clone());
        same.insert("y".to_owned(), a.clone());
        let r = compare_methods(&same).unwrap();
        assert!(r.per_k.iter().all(|w| w.best.len() == 2));
        assert_eq!(r.ranking[0].rank, r.ranking[1].rank);

        let c = AccuracyCurve { n_leaves: 3, points: vec![(1, 1.0), (3, 0.4)] };
        curves.insert("c".to_owned(), c);
        assert!(matches!(compare_methods(&curves), Err(Error::MismatchedGrid(_))));
    }

    #[test]
    fn curve_csv() {
        let c = accuracy_curve(&f1_tree(), &f1_eval(), &[1, 3]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "k,accuracy,n_clusters_avg_size\n1,1,3\n3,0.3333333333333333,1\n");
    }
}
