//! Co-occurrence counting over top-k prediction sets and the association
//! measures derived from it.
//!
//! Only set membership matters here; prediction scores are ignored. All
//! probabilities are formed as ratios of integer counts at the last step so
//! that results do not depend on summation order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{LabelId, LabelRegistry, PredictionDataset};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceStats {
    labels: LabelRegistry,
    n_sets: u64,
    single: Vec<u64>,
    top1: Vec<u64>,
    /// Dense symmetric N×N table; the diagonal mirrors `single`.
    pair: Vec<u64>,
}

impl CooccurrenceStats {
    /// Builds stats from an explicit list of label sets. Used by tests and by
    /// [`count_cooccurrences`]; the first element of each set counts as its top-1.
    pub fn from_sets<'a, I>(labels: LabelRegistry, sets: I) -> Self
    where
        I: IntoIterator<Item = &'a [LabelId]>,
    {
        let n = labels.len();
        let mut stats =
            CooccurrenceStats { labels, n_sets: 0, single: vec![0; n], top1: vec![0; n], pair: vec![0; n * n] };
        for set in sets {
            stats.add_set(set);
        }
        stats
    }

    fn add_set(&mut self, set: &[LabelId]) {
        let n = self.single.len();
        self.n_sets += 1;
        if let Some(&first) = set.first() {
            self.top1[first] += 1;
        }
        for (a, &i) in set.iter().enumerate() {
            self.single[i] += 1;
            self.pair[i * n + i] += 1;
            for &j in &set[a + 1..] {
                self.pair[i * n + j] += 1;
                self.pair[j * n + i] += 1;
            }
        }
    }

    pub fn labels(&self) -> &LabelRegistry {
        &self.labels
    }

    pub fn n_labels(&self) -> usize {
        self.single.len()
    }

    pub fn n_sets(&self) -> u64 {
        self.n_sets
    }

    pub fn count(&self, i: LabelId) -> u64 {
        self.single[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.single
    }

    /// Number of sets whose highest-ranked label is `i`.
    pub fn top1_count(&self, i: LabelId) -> u64 {
        self.top1[i]
    }

    pub fn pair_count(&self, i: LabelId, j: LabelId) -> u64 {
        self.pair[i * self.n_labels() + j]
    }

    pub fn uncovered(&self) -> Vec<LabelId> {
        (0..self.n_labels()).filter(|&i| self.single[i] == 0).collect()
    }

    /// Stats restricted to `keep`, re-indexed in the given order.
    pub fn restrict(&self, keep: &[LabelId]) -> Result<Self> {
        let labels = LabelRegistry::from_names(keep.iter().map(|&i| self.labels.name(i)))?;
        let n = self.n_labels();
        let m = keep.len();
        let mut pair = vec![0; m * m];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                pair[a * m + b] = self.pair[i * n + j];
            }
        }
        Ok(CooccurrenceStats {
            labels,
            n_sets: self.n_sets,
            single: keep.iter().map(|&i| self.single[i]).collect(),
            top1: keep.iter().map(|&i| self.top1[i]).collect(),
            pair,
        })
    }

    /// Confidence C_ij = P(i | j) = c_ij / c_j.
    pub fn confidence(&self, i: LabelId, j: LabelId) -> Result<f64> {
        let cj = self.single[j];
        if cj == 0 {
            return Err(Error::UndefinedConditional(j));
        }
        Ok(self.pair_count(i, j) as f64 / cj as f64)
    }

    /// Lift L_ij = P({i,j}) / (P(i) P(j)) = c_ij n / (c_i c_j).
    pub fn lift(&self, i: LabelId, j: LabelId) -> Result<f64> {
        let (ci, cj) = (self.single[i], self.single[j]);
        if ci == 0 {
            return Err(Error::UndefinedLift(i));
        }
        if cj == 0 {
            return Err(Error::UndefinedLift(j));
        }
        let num = self.pair_count(i, j) as f64 * self.n_sets as f64;
        Ok(num / (ci as f64 * cj as f64))
    }

    /// Geometric mean of the two confidences, c_ij / sqrt(c_i c_j).
    pub fn cosine(&self, i: LabelId, j: LabelId) -> Result<f64> {
        let (ci, cj) = (self.single[i], self.single[j]);
        if ci == 0 {
            return Err(Error::UndefinedConditional(i));
        }
        if cj == 0 {
            return Err(Error::UndefinedConditional(j));
        }
        Ok(self.pair_count(i, j) as f64 / (ci as f64 * cj as f64).sqrt())
    }

    /// Arithmetic mean of the two confidences.
    pub fn kulczynski(&self, i: LabelId, j: LabelId) -> Result<f64> {
        Ok(0.5 * (self.confidence(i, j)? + self.confidence(j, i)?))
    }
}

pub fn count_cooccurrences(ds: &PredictionDataset) -> CooccurrenceStats {
    let sets: Vec<Vec<LabelId>> = ds.records.iter().map(|r| r.labels().collect()).collect();
    CooccurrenceStats::from_sets(ds.registry.clone(), sets.iter().map(Vec::as_slice))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMeasure {
    Confidence,
    Lift,
    Cosine,
    Kulczynski,
}

impl SimilarityMeasure {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, SimilarityMeasure::Confidence)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub measure: SimilarityMeasure,
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: LabelId, j: LabelId) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Full N×N matrix of one association measure. Entry (i, j) of the
/// confidence matrix is C_ij = P(i | j).
pub fn similarity_matrix(stats: &CooccurrenceStats, measure: SimilarityMeasure) -> Result<SimilarityMatrix> {
    let n = stats.n_labels();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = match measure {
                SimilarityMeasure::Confidence => stats.confidence(i, j)?,
                SimilarityMeasure::Lift => stats.lift(i, j)?,
                SimilarityMeasure::Cosine => stats.cosine(i, j)?,
                SimilarityMeasure::Kulczynski => stats.kulczynski(i, j)?,
            };
            values.push(v);
        }
    }
    Ok(SimilarityMatrix { measure, n, values })
}

/// Symmetric label-to-label distance matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: LabelRegistry,
    source: String,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates squareness, finiteness, non-negativity, symmetry and a zero diagonal.
    pub fn new(labels: LabelRegistry, source: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if n < 2 {
            return Err(Error::Validation(format!("distance matrix needs at least 2 labels, got {n}")));
        }
        if values.len() != n * n {
            return Err(Error::Validation(format!("distance matrix has {} entries, expected {n}x{n}", values.len())));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(Error::Validation(format!("negative distance at ({i}, {j})")));
                }
                if v != values[j * n + i] {
                    return Err(Error::Validation(format!("asymmetric distance at ({i}, {j})")));
                }
            }
            if values[i * n + i] != 0.0 {
                return Err(Error::Validation(format!("non-zero diagonal at {i}")));
            }
        }
        Ok(DistanceMatrix { labels, source: source.into(), values })
    }

    /// Builds a matrix from a symmetric function of the upper triangle.
    pub fn from_fn(
        labels: LabelRegistry,
        source: impl Into<String>,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let n = labels.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::new(labels, source, values)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &LabelRegistry {
        &self.labels
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same distances with labels reordered so that new label `p` is old `perm[p]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let labels = LabelRegistry::from_names(perm.iter().map(|&p| self.labels.name(p)))?;
        let mut values = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                values[a * n + b] = self.get(perm[a], perm[b]);
            }
        }
        Self::new(labels, self.source.clone(), values)
    }

    /// CSV with a header row and a header column of label names, 12 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.n();
        let mut header = Vec::with_capacity(n + 1);
        header.push(String::new());
        header.extend(self.labels.names().iter().cloned());
        w.write_record(&header)?;
        for i in 0..n {
            let mut row = Vec::with_capacity(n + 1);
            row.push(self.labels.name(i).to_owned());
            row.extend((0..n).map(|j| format_significant(self.get(i, j), 12)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = r.headers()?.clone();
        let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let labels = LabelRegistry::from_names(names)?;
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in r.records().enumerate() {
            let row = row?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(i + 2);
            if row.len() != n + 1 {
                return Err(Error::Malformed { line, msg: format!("expected {} fields, got {}", n + 1, row.len()) });
            }
            if i >= n || &row[0] != labels.name(i) {
                return Err(Error::Malformed {
                    line,
                    msg: format!("row label '{}' does not match header order", &row[0]),
                });
            }
            for field in row.iter().skip(1) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Malformed { line, msg: format!("invalid distance '{field}'") })?;
                values.push(v);
            }
        }
        if values.len() != n * n {
            return Err(Error::Validation(format!("distance CSV has {} rows, expected {n}", values.len() / n.max(1))));
        }
        Self::new(labels, "csv", values)
    }
}

/// Formats `x` rounded to `digits` significant digits, in shortest form.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{:.*e}", digits - 1, x).parse().expect("scientific formatting parses");
    format!("{rounded}")
}

/// Range over which lift values are min-max normalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftNorm {
    #[default]
    OffDiagonal,
    IncludeDiagonal,
}

impl FromStr for LiftNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off-diagonal" => Ok(LiftNorm::OffDiagonal),
            "include-diagonal" => Ok(LiftNorm::IncludeDiagonal),
            other => Err(Error::Validation(format!("unknown lift normalization '{other}'"))),
        }
    }
}

/// What to do with labels that appear in no prediction set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncoveredPolicy {
    /// Fail, listing the labels.
    #[default]
    Error,
    /// Remove them from the matrix.
    Drop,
    /// Keep them at distance 1 from every other label.
    Isolate,
}

impl FromStr for UncoveredPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(UncoveredPolicy::Error),
            "drop" => Ok(UncoveredPolicy::Drop),
            "isolate" => Ok(UncoveredPolicy::Isolate),
            other => Err(Error::Validation(format!("unknown uncovered-label policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct DistanceOptions {
    pub lift_norm: LiftNorm,
    /// Pseudo-count added to every pair count, marginal count and the set count.
    pub laplace: f64,
    pub uncovered: UncoveredPolicy,
}

/// A rule turning co-occurrence statistics into a label distance matrix.
pub trait DistanceMeasure: Send + Sync {
    fn name(&self) -> &'static str;

    /// Computes distances over every label in `stats`. Labels with a zero
    /// count are handled according to `opts.uncovered`; `Drop` is resolved by
    /// [`compute_distance`] before this is called.
    fn distances(&self, stats: &CooccurrenceStats, opts: &DistanceOptions) -> Result<DistanceMatrix>;
}

impl fmt::Debug for dyn DistanceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DistanceMeasure({})", self.name())
    }
}

/// Applies the uncovered-label policy, then the measure.
pub fn compute_distance(
    measure: &dyn DistanceMeasure,
    stats: &CooccurrenceStats,
    opts: &DistanceOptions,
) -> Result<DistanceMatrix> {
    let uncovered = stats.uncovered();
    if uncovered.is_empty() || opts.uncovered == UncoveredPolicy::Isolate {
        return measure.distances(stats, opts);
    }
    match opts.uncovered {
        UncoveredPolicy::Error => Err(uncovered_error(stats, &uncovered)),
        UncoveredPolicy::Drop => {
            let keep: Vec<_> = (0..stats.n_labels()).filter(|&i| stats.count(i) > 0).collect();
            measure.distances(&stats.restrict(&keep)?, opts)
        }
        UncoveredPolicy::Isolate => unreachable!(),
    }
}

fn uncovered_error(stats: &CooccurrenceStats, uncovered: &[LabelId]) -> Error {
    Error::UncoveredLabels(uncovered.iter().map(|&i| stats.labels().name(i).to_owned()).collect())
}

/// Smoothed counts; with a zero pseudo-count these are the raw integers.
struct Counts<'a> {
    stats: &'a CooccurrenceStats,
    eps: f64,
}

impl Counts<'_> {
    fn single(&self, i: usize) -> f64 {
        self.stats.count(i) as f64 + self.eps
    }

    fn pair(&self, i: usize, j: usize) -> f64 {
        self.stats.pair_count(i, j) as f64 + self.eps
    }

    fn n(&self) -> f64 {
        self.stats.n_sets() as f64 + self.eps
    }
}

fn check_options(stats: &CooccurrenceStats, opts: &DistanceOptions) -> Result<Vec<bool>> {
    if !(opts.laplace >= 0.0 && opts.laplace.is_finite()) {
        return Err(Error::Validation(format!("laplace pseudo-count must be finite and >= 0, got {}", opts.laplace)));
    }
    let covered: Vec<bool> = stats.counts().iter().map(|&c| c > 0).collect();
    if opts.uncovered != UncoveredPolicy::Isolate && covered.iter().any(|c| !c) {
        return Err(uncovered_error(stats, &stats.uncovered()));
    }
    Ok(covered)
}

/// D_ij = 1 − sqrt(C_ij C_ji), one minus the cosine measure.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConfidenceDistance;

impl DistanceMeasure for ConfidenceDistance {
    fn name(&self) -> &'static str {
        "confidence"
    }

    fn distances(&self, stats: &CooccurrenceStats, opts: &DistanceOptions) -> Result<DistanceMatrix> {
        let covered = check_options(stats, opts)?;
        let c = Counts { stats, eps: opts.laplace };
        DistanceMatrix::from_fn(stats.labels().clone(), self.name(), |i, j| {
            if !covered[i] || !covered[j] {
                return 1.0;
            }
            let cos = c.pair(i, j) / (c.single(i) * c.single(j)).sqrt();
            (1.0 - cos).clamp(0.0, 1.0)
        })
    }
}

/// D_ij = 1 − (L_ij − min L) / (max L − min L).
#[derive(Debug, Clone, Copy, Default)]
pub struct LiftDistance;

impl DistanceMeasure for LiftDistance {
    fn name(&self) -> &'static str {
        "lift"
    }

    fn distances(&self, stats: &CooccurrenceStats, opts: &DistanceOptions) -> Result<DistanceMatrix> {
        let covered = check_options(stats, opts)?;
        let c = Counts { stats, eps: opts.laplace };
        let n = stats.n_labels();
        let lift = |i: usize, j: usize| c.pair(i, j) * c.n() / (c.single(i) * c.single(j));

        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in (0..n).filter(|&i| covered[i]) {
            let start = match opts.lift_norm {
                LiftNorm::OffDiagonal => i + 1,
                LiftNorm::IncludeDiagonal => i,
            };
            for j in (start..n).filter(|&j| covered[j]) {
                let l = lift(i, j);
                lo = lo.min(l);
                hi = hi.max(l);
            }
        }
        if !lo.is_finite() || hi <= lo {
            return Err(Error::DegenerateNormalization(lo));
        }
        let span = hi - lo;
        DistanceMatrix::from_fn(stats.labels().clone(), self.name(), |i, j| {
            if !covered[i] || !covered[j] {
                return 1.0;
            }
            (1.0 - (lift(i, j) - lo) / span).clamp(0.0, 1.0)
        })
    }
}
