//! Independent reference implementations used by the integration and
//! acceptance suites. Nothing here calls into the library's algorithms.

#![allow(dead_code)]

use hiertree::cooccur::DistanceMatrix;
use hiertree::ingest::LabelRegistry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn registry(n: usize) -> LabelRegistry {
    LabelRegistry::from_names((0..n).map(|i| format!("l{i}"))).unwrap()
}

/// Random collection of label sets: up to `max_sets` sets of up to `max_k`
/// distinct labels drawn from `n_labels`.
pub fn random_sets(rng: &mut ChaCha8Rng, max_sets: usize, max_labels: usize, max_k: usize) -> (usize, Vec<Vec<usize>>) {
    let n_labels = rng.random_range(2..=max_labels);
    let n_sets = rng.random_range(1..=max_sets);
    let sets = (0..n_sets)
        .map(|_| {
            let k = rng.random_range(1..=max_k.min(n_labels));
            let mut set: Vec<usize> = Vec::with_capacity(k);
            while set.len() < k {
                let l = rng.random_range(0..n_labels);
                if !set.contains(&l) {
                    set.push(l);
                }
            }
            set
        })
        .collect();
    (n_labels, sets)
}

/// Brute-force association measures: count by scanning every set.
pub struct BruteForce<'a> {
    pub sets: &'a [Vec<usize>],
}

impl BruteForce<'_> {
    fn has(&self, i: usize) -> u64 {
        self.sets.iter().filter(|s| s.contains(&i)).count() as u64
    }

    fn both(&self, i: usize, j: usize) -> u64 {
        self.sets.iter().filter(|s| s.contains(&i) && s.contains(&j)).count() as u64
    }

    pub fn confidence(&self, i: usize, j: usize) -> Option<f64> {
        let cj = self.has(j);
        (cj > 0).then(|| self.both(i, j) as f64 / cj as f64)
    }

    pub fn lift(&self, i: usize, j: usize) -> Option<f64> {
        let (ci, cj) = (self.has(i), self.has(j));
        let n = self.sets.len() as f64;
        (ci > 0 && cj > 0).then(|| (self.both(i, j) as f64 / n) / ((ci as f64 / n) * (cj as f64 / n)))
    }

    pub fn cosine(&self, i: usize, j: usize) -> Option<f64> {
        Some((self.confidence(i, j)? * self.confidence(j, i)?).sqrt())
    }

    pub fn kulczynski(&self, i: usize, j: usize) -> Option<f64> {
        Some((self.confidence(i, j)? + self.confidence(j, i)?) / 2.0)
    }
}

/// Symmetric matrix with distinct off-diagonal entries in (0, 1).
pub fn random_distinct_matrix(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
    let mut used = std::collections::BTreeSet::new();
    let mut vals = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = loop {
                let v: f64 = rng.random_range(0.001..1.0);
                if used.insert(v.to_bits()) {
                    break v;
                }
            };
            vals[i * n + j] = v;
            vals[j * n + i] = v;
        }
    }
    DistanceMatrix::new(registry(n), "random", vals).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Single,
    Complete,
    Average,
    Weighted,
    Ward,
}

pub const RULES: [(Rule, &str); 5] = [
    (Rule::Single, "single"),
    (Rule::Complete, "complete"),
    (Rule::Average, "average"),
    (Rule::Weighted, "weighted"),
    (Rule::Ward, "ward"),
];

/// One naive merge: the two children's leaf sets and the height.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveMerge {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub height: f64,
}

struct Node {
    leaves: Vec<usize>,
    children: Option<(usize, usize)>,
    height: f64,
}

/// O(n³) reference clustering. Every step recomputes every inter-cluster
/// distance from scratch: from leaf pairs for single, complete and average;
/// by recursive expansion of the later-formed cluster for weighted and Ward.
/// Ties go to the smallest (min id, max id) pair.
pub fn naive_agglomerate(d: &DistanceMatrix, rule: Rule) -> Vec<NaiveMerge> {
    let n = d.n();
    let mut nodes: Vec<Node> = (0..n).map(|i| Node { leaves: vec![i], children: None, height: 0.0 }).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();

    fn recursive(nodes: &[Node], d: &DistanceMatrix, rule: Rule, a: usize, b: usize) -> f64 {
        let (late, other) = if a > b { (a, b) } else { (b, a) };
        match nodes[late].children {
            None => d.get(a, b),
            Some((s, t)) => {
                let dsv = recursive(nodes, d, rule, s, other);
                let dtv = recursive(nodes, d, rule, t, other);
                let dst = nodes[late].height;
                match rule {
                    Rule::Weighted => (dsv + dtv) / 2.0,
                    Rule::Ward => {
                        let (ns, nt, nv) = (
                            nodes[s].leaves.len() as f64,
                            nodes[t].leaves.len() as f64,
                            nodes[other].leaves.len() as f64,
                        );
                        (((nv + ns) * dsv * dsv + (nv + nt) * dtv * dtv - nv * dst * dst) / (ns + nt + nv)).sqrt()
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    let cluster_distance = |nodes: &[Node], a: usize, b: usize| -> f64 {
        let pairs = || nodes[a].leaves.iter().flat_map(|&x| nodes[b].leaves.iter().map(move |&y| d.get(x, y)));
        match rule {
            Rule::Single => pairs().fold(f64::INFINITY, f64::min),
            Rule::Complete => pairs().fold(f64::NEG_INFINITY, f64::max),
            Rule::Average => pairs().sum::<f64>() / (nodes[a].leaves.len() * nodes[b].leaves.len()) as f64,
            Rule::Weighted | Rule::Ward => recursive(nodes, d, rule, a, b),
        }
    };

    while active.len() > 1 {
        let mut best: Option<(f64, (usize, usize))> = None;
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let dist = cluster_distance(&nodes, a, b);
                let key = (a.min(b), a.max(b));
                let better = match best {
                    None => true,
                    Some((bd, bk)) => dist < bd || (dist == bd && key < bk),
                };
                if better {
                    best = Some((dist, key));
                }
            }
        }
        let (height, (a, b)) = best.unwrap();
        let mut leaves = nodes[a].leaves.clone();
        leaves.extend(&nodes[b].leaves);
        leaves.sort_unstable();
        out.push(NaiveMerge { left: nodes[a].leaves.clone(), right: nodes[b].leaves.clone(), height });
        nodes.push(Node { leaves, children: Some((a, b)), height });
        active.retain(|&c| c != a && c != b);
        active.push(nodes.len() - 1);
    }
    out
}

/// Leaf-set view of a library dendrogram, for comparison with the oracle.
pub fn leaf_merges(tree: &hiertree::hclust::Dendrogram) -> Vec<NaiveMerge> {
    tree.merges()
        .iter()
        .map(|m| NaiveMerge { left: tree.leaves_of(m.left), right: tree.leaves_of(m.right), height: m.height })
        .collect()
}

/// Same merge partitions at every step and heights within `tol`.
pub fn same_merges(a: &[NaiveMerge], b: &[NaiveMerge], tol: f64) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("{} vs {} merges", a.len(), b.len()));
    }
    for (step, (x, y)) in a.iter().zip(b).enumerate() {
        let same_pair = (x.left == y.left && x.right == y.right) || (x.left == y.right && x.right == y.left);
        if !same_pair {
            return Err(format!("step {step}: {:?}+{:?} vs {:?}+{:?}", x.left, x.right, y.left, y.right));
        }
        if (x.height - y.height).abs() > tol {
            return Err(format!("step {step}: height {} vs {}", x.height, y.height));
        }
    }
    Ok(())
}

/// Co-cluster test by explicit membership: are `a` and `b` in the same
/// component after the first `steps` merges?
pub fn co_clustered(merges: &[NaiveMerge], steps: usize, a: usize, b: usize) -> bool {
    a == b
        || merges[..steps].iter().any(|m| {
            let has = |x: usize| m.left.contains(&x) || m.right.contains(&x);
            has(a) && has(b)
        })
}
