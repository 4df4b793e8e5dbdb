//! Synthetic prediction logs with a planted label hierarchy, and the
//! adjusted Rand index for scoring how well a cut recovers it.
//!
//! Randomness comes from ChaCha8 streams: the generator for label `i` is
//! seeded with the config seed and uses stream `i`, so output is identical
//! across platforms and independent of thread scheduling.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooccur::DistanceMatrix;
use crate::error::{Error, Result};
use crate::ingest::{LabelId, LabelRegistry, Prediction, PredictionDataset, PredictionRecord};
use crate::VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedConfig {
    pub groups: usize,
    pub labels_per_group: usize,
    pub videos_per_label: usize,
    pub k: usize,
    /// Probability that a distractor is drawn from the truth label's group.
    pub p_in: f64,
    /// Probability that the truth label is ranked first.
    pub p_truth_top1: f64,
    pub seed: u64,
    /// Per-label video counts replacing `videos_per_label`.
    pub video_overrides: BTreeMap<LabelId, usize>,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            groups: 4,
            labels_per_group: 5,
            videos_per_label: 50,
            k: 5,
            p_in: 0.9,
            p_truth_top1: 0.7,
            seed: 42,
            video_overrides: BTreeMap::new(),
        }
    }
}

impl PlantedConfig {
    pub fn n_labels(&self) -> usize {
        self.groups * self.labels_per_group
    }

    pub fn group_of(&self, label: LabelId) -> usize {
        label / self.labels_per_group
    }

    pub fn videos_for(&self, label: LabelId) -> usize {
        self.video_overrides.get(&label).copied().unwrap_or(self.videos_per_label)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if !(self.p_in > 0.5 && self.p_in <= 1.0) {
            return bad(format!("p_in = {} outside (0.5, 1]", self.p_in));
        }
        if !(0.0..=1.0).contains(&self.p_truth_top1) {
            return bad(format!("p_truth_top1 = {} outside [0, 1]", self.p_truth_top1));
        }
        if self.groups == 0 || self.n_labels() < 2 {
            return bad("need at least 2 labels".into());
        }
        if self.videos_per_label == 0 {
            return bad("videos_per_label must be at least 1".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.k > self.n_labels() {
            return bad(format!("k = {} exceeds the {} available labels", self.k, self.n_labels()));
        }
        let in_group_only = self.p_in == 1.0 || self.groups == 1;
        if in_group_only && self.k > self.labels_per_group {
            return bad(format!(
                "k = {} exceeds the {} labels available within a group",
                self.k, self.labels_per_group
            ));
        }
        for (&label, &count) in &self.video_overrides {
            if label >= self.n_labels() {
                return bad(format!("video override for unknown label {label}"));
            }
            if count == 0 {
                return bad(format!("video override for label {label} must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn label_name(&self, label: LabelId) -> String {
        format!("g{}-l{}", self.group_of(label), label % self.labels_per_group)
    }

    pub fn registry(&self) -> LabelRegistry {
        LabelRegistry::from_names((0..self.n_labels()).map(|l| self.label_name(l))).expect("generated names are unique")
    }

    pub fn partition(&self) -> Vec<usize> {
        (0..self.n_labels()).map(|l| self.group_of(l)).collect()
    }
}

/// Planted ground truth, written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub hiertree_version: String,
    pub labels: Vec<String>,
    pub group: Vec<usize>,
}

impl PlantedPartition {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("partition serializes");
        s.push('\n');
        s
    }
}

/// Sorted flat-Dirichlet sample of length `k`.
fn dirichlet_scores(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    let mut scores: Vec<f64> = draws.iter().map(|d| (d / total).clamp(0.0, 1.0)).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    scores
}

fn label_records(cfg: &PlantedConfig, truth: LabelId) -> Vec<PredictionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(truth as u64);
    let n = cfg.n_labels();
    let group = cfg.group_of(truth);
    let weight = |l: &LabelId| cfg.videos_for(*l) as f64;

    (0..cfg.videos_for(truth))
        .map(|video| {
            let mut chosen = vec![truth];
            while chosen.len() < cfg.k {
                let want_in = rng.random_bool(cfg.p_in);
                let inside: Vec<LabelId> =
                    (0..n).filter(|&l| cfg.group_of(l) == group && !chosen.contains(&l)).collect();
                let outside: Vec<LabelId> =
                    (0..n).filter(|&l| cfg.group_of(l) != group && !chosen.contains(&l)).collect();
                let pool = match (want_in, inside.is_empty(), outside.is_empty()) {
                    (true, false, _) | (false, false, true) => &inside,
                    _ => &outside,
                };
                let pick = *pool.choose_weighted(&mut rng, weight).expect("validated config leaves a candidate");
                chosen.push(pick);
            }
            // distractors keep their draw order; truth is slotted by rank
            let truth_rank =
                if cfg.k > 1 && !rng.random_bool(cfg.p_truth_top1) { rng.random_range(1..cfg.k) } else { 0 };
            let mut ranked: Vec<LabelId> = chosen[1..].to_vec();
            ranked.insert(truth_rank, truth);
            let scores = dirichlet_scores(&mut rng, cfg.k);
            PredictionRecord {
                video_id: format!("s{}-{}-{video}", cfg.seed, cfg.label_name(truth)),
                truth: Some(truth),
                top: ranked
                    .into_iter()
                    .zip(scores)
                    .map(|(label, score)| Prediction { label, score: Some(score) })
                    .collect(),
            }
        })
        .collect()
}

/// Generates one record per (label, video), label-major, plus the planted
/// group of every label.
pub fn generate_planted(cfg: &PlantedConfig) -> Result<(PredictionDataset, Vec<usize>)> {
    cfg.validate()?;
    let per_label: Vec<Vec<PredictionRecord>> =
        (0..cfg.n_labels()).into_par_iter().map(|label| label_records(cfg, label)).collect();
    let ds =
        PredictionDataset { registry: cfg.registry(), records: per_label.into_iter().flatten().collect(), k: cfg.k };
    ds.validate(false)?;
    Ok((ds, cfg.partition()))
}

pub fn planted_partition_file(cfg: &PlantedConfig) -> PlantedPartition {
    PlantedPartition {
        hiertree_version: VERSION.to_owned(),
        labels: cfg.registry().names().to_vec(),
        group: cfg.partition(),
    }
}

/// Block-structured distances over `groups × labels_per_group` labels plus
/// `outliers` extra labels that sit far from everything. The outliers join
/// the tree one after another near the top under single linkage. Returns the
/// matrix and the planted groups (outliers get their own group ids).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainedOutlierConfig {
    pub groups: usize,
    pub labels_per_group: usize,
    pub outliers: usize,
    pub within: f64,
    pub between: f64,
    pub outlier_base: f64,
    pub outlier_step: f64,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for ChainedOutlierConfig {
    fn default() -> Self {
        ChainedOutlierConfig {
            groups: 4,
            labels_per_group: 5,
            outliers: 3,
            within: 0.2,
            between: 0.7,
            outlier_base: 0.8,
            outlier_step: 0.04,
            jitter: 0.02,
            seed: 7,
        }
    }
}

pub fn chained_outlier_distances(cfg: &ChainedOutlierConfig) -> Result<(DistanceMatrix, Vec<usize>)> {
    let core = cfg.groups * cfg.labels_per_group;
    let n = core + cfg.outliers;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let group: Vec<usize> =
        (0..n).map(|i| if i < core { i / cfg.labels_per_group } else { cfg.groups + i - core }).collect();
    let names = (0..n).map(|i| {
        if i < core {
            format!("g{}-l{}", group[i], i % cfg.labels_per_group)
        } else {
            format!("outlier-{}", i - core)
        }
    });
    let reg = LabelRegistry::from_names(names)?;
    let mut base = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = if j >= core {
                cfg.outlier_base + cfg.outlier_step * (j - core) as f64
            } else if group[i] == group[j] {
                cfg.within
            } else {
                cfg.between
            };
            base[i * n + j] = d + cfg.jitter * rng.random::<f64>();
        }
    }
    let d = DistanceMatrix::from_fn(reg, "planted", |i, j| base[i * n + j])?;
    Ok((d, group))
}

/// Adjusted Rand index between two partitions given as per-item cluster ids.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::UniverseMismatch(a.len(), b.len()));
    }
    let n = a.len();
    let choose2 = |x: u64| (x * x.saturating_sub(1) / 2) as f64;
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let trivial = |k: usize| k == n || k <= 1;
    if rows.len() == cols.len() && trivial(rows.len()) {
        return Ok(1.0);
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n as u64);
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
