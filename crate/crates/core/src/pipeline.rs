//! The measure × linkage experiment grid: ingest once, build one distance
//! matrix per measure, one tree per (measure, linkage), then curves,
//! diagnostics and a combined comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooccur::{compute_distance, count_cooccurrences, CooccurrenceStats, DistanceMatrix, DistanceOptions};
use crate::diagnose::{late_merger_report, DEFAULT_MIN_CLUSTER};
use crate::error::{Error, Result};
use crate::evaluate::{accuracy_curve_topm, compare_methods, AccuracyCurve, EvalSet};
use crate::export::{to_newick, TreeFile};
use crate::hclust::{agglomerate, Dendrogram};
use crate::ingest::{parse_predictions, InputFormat, ParseOptions, PredictionDataset};
use crate::linkage::Linkage;
use crate::registry::{distance_measures, linkages};

/// Parses a k grid: `all`, `1..N`, `a..b` (inclusive; `N` is the leaf
/// count), or a comma-separated list.
pub fn parse_ks(text: &str, n: usize) -> Result<Vec<usize>> {
    let text = text.trim();
    let bound = |s: &str| -> Result<usize> {
        match s.trim() {
            "N" | "n" => Ok(n),
            t => t.parse().map_err(|_| Error::Validation(format!("invalid k '{t}' in grid '{text}'"))),
        }
    };
    let ks: Vec<usize> = if text == "all" {
        (1..=n).collect()
    } else if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi) = (bound(lo)?, bound(hi)?);
        if lo > hi {
            return Err(Error::Validation(format!("empty k range '{text}'")));
        }
        (lo..=hi).collect()
    } else {
        text.split(',').map(bound).collect::<Result<_>>()?
    };
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::KOutOfRange { k, n });
    }
    Ok(ks)
}

fn default_measures() -> Vec<String> {
    distance_measures().names().to_vec()
}

fn default_linkages() -> Vec<String> {
    linkages().names().to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PipelineConfig {
    /// Prediction log used for similarity mining.
    pub input: PathBuf,
    pub format: String,
    pub k: usize,
    /// Labeled prediction log used for accuracy curves.
    pub eval: PathBuf,
    pub out_dir: PathBuf,
    pub measures: Vec<String>,
    pub linkages: Vec<String>,
    pub ks: String,
    pub pad_short: bool,
    #[serde(flatten)]
    pub distance: DistanceOptions,
    pub topm: usize,
    pub diagnose_m: usize,
    pub diagnose_q: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            format: "jsonl".into(),
            k: 5,
            eval: PathBuf::new(),
            out_dir: PathBuf::from("hiertree-out"),
            measures: default_measures(),
            linkages: default_linkages(),
            ks: "all".into(),
            pad_short: false,
            distance: DistanceOptions::default(),
            topm: 1,
            diagnose_m: DEFAULT_MIN_CLUSTER,
            diagnose_q: 50,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    /// Checks names, numbers and input paths without doing any work.
    pub fn validate(&self) -> Result<()> {
        let (ms, ls) = (distance_measures(), linkages());
        for m in &self.measures {
            ms.get(m)?;
        }
        for l in &self.linkages {
            ls.get(l)?;
        }
        if self.measures.is_empty() || self.linkages.is_empty() {
            return Err(Error::Validation("grid needs at least one measure and one linkage".into()));
        }
        self.format.parse::<InputFormat>()?;
        if self.k == 0 || self.topm == 0 {
            return Err(Error::Validation("k and topm must be at least 1".into()));
        }
        if self.diagnose_m < 2 {
            return Err(Error::Validation("diagnose_m must be at least 2".into()));
        }
        for (what, p) in [("input", &self.input), ("eval", &self.eval)] {
            if !p.is_file() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{what} file '{}' not found", p.display()),
                )));
            }
        }
        Ok(())
    }
}

/// Writes `bytes` to `path` via a `.partial` sibling renamed on success.
pub fn write_artifact(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    fs::write(&partial, bytes)?;
    fs::rename(&partial, path)?;
    Ok(())
}

fn read_log(path: &Path, format: InputFormat, k: usize, pad_short: bool) -> Result<PredictionDataset> {
    let file = fs::File::open(path)?;
    parse_predictions(BufReader::new(file), format, k, ParseOptions { pad_short })
}

/// Video ids present in both datasets.
pub fn overlapping_ids(a: &PredictionDataset, b: &PredictionDataset) -> Vec<String> {
    let ids: BTreeSet<&str> = a.records.iter().map(|r| r.video_id.as_str()).collect();
    let mut out: Vec<String> =
        b.records.iter().filter(|r| ids.contains(r.video_id.as_str())).map(|r| r.video_id.clone()).collect();
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub hiertree_version: String,
    pub trees: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Cell {
    measure: String,
    linkage: Arc<dyn Linkage>,
}

impl Cell {
    fn key(&self) -> String {
        format!("{}-{}", self.measure, self.linkage.name())
    }
}

/// Runs the whole grid from files on disk.
pub fn run_grid(cfg: &PipelineConfig) -> Result<GridSummary> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let format: InputFormat = cfg.format.parse()?;
    let mining = read_log(&cfg.input, format, cfg.k, cfg.pad_short).map_err(|e| e.in_stage("ingest"))?;
    let eval_ds = read_log(&cfg.eval, format, cfg.k, true).map_err(|e| e.in_stage("ingest"))?;
    let mut warnings = Vec::new();
    let overlap = overlapping_ids(&mining, &eval_ds);
    if !overlap.is_empty() {
        warnings.push(format!(
            "{} evaluation video id(s) also appear in the mining set (first: {})",
            overlap.len(),
            overlap[0]
        ));
    }
    run_grid_on(cfg, &mining, &eval_ds, warnings)
}

/// Runs the grid on already-parsed datasets, writing into `cfg.out_dir`.
pub fn run_grid_on(
    cfg: &PipelineConfig,
    mining: &PredictionDataset,
    eval_ds: &PredictionDataset,
    warnings: Vec<String>,
) -> Result<GridSummary> {
    let (ms, ls) = (distance_measures(), linkages());
    let measures: Vec<_> =
        cfg.measures.iter().map(|m| ms.get(m)).collect::<Result<_>>().map_err(|e| e.in_stage("config"))?;
    let cells: Vec<Cell> = measures
        .iter()
        .flat_map(|m| cfg.linkages.iter().map(|l| Ok(Cell { measure: m.name().to_owned(), linkage: ls.get(l)? })))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("config"))?;

    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::from(e).in_stage("output"))?;
    let out = |name: String| cfg.out_dir.join(name);

    let stats: CooccurrenceStats = count_cooccurrences(mining);
    let distances: BTreeMap<String, DistanceMatrix> = measures
        .par_iter()
        .map(|m| {
            let d = compute_distance(m.as_ref(), &stats, &cfg.distance)?;
            Ok((m.name().to_owned(), d))
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("distance"))?;

    let mut artifacts = Vec::new();
    for (name, d) in &distances {
        let path = out(format!("distance-{name}.csv"));
        let mut buf = Vec::new();
        d.write_csv(&mut buf)?;
        write_artifact(&path, &buf).map_err(|e| e.in_stage("distance"))?;
        artifacts.push(path);
    }

    // all measures share one label set after the uncovered-label policy
    let labels = distances.values().next().expect("at least one measure").labels().clone();
    let eval = EvalSet::from_dataset(eval_ds, &labels).map_err(|e| e.in_stage("accuracy"))?;
    let ks = parse_ks(&cfg.ks, labels.len()).map_err(|e| e.in_stage("accuracy"))?;
    let q = cfg.diagnose_q.min(labels.len());
    let m = cfg.diagnose_m.min(labels.len());

    let results: Vec<(String, AccuracyCurve, Vec<PathBuf>)> = cells
        .par_iter()
        .map(|cell| -> Result<_> {
            let key = cell.key();
            let d = &distances[&cell.measure];
            let tree: Dendrogram = agglomerate(d, cell.linkage.as_ref()).map_err(|e| e.in_stage("cluster"))?;
            let tree_json = TreeFile::new(&tree, d.labels(), &cell.measure, cell.linkage.name()).to_json();
            let nwk = to_newick(&tree, d.labels());
            let curve = accuracy_curve_topm(&tree, &eval, &ks, cfg.topm).map_err(|e| e.in_stage("accuracy"))?;
            let mut curve_csv = Vec::new();
            curve.write_csv(&mut curve_csv)?;
            let report = late_merger_report(&tree, d.labels(), &stats, m, q).map_err(|e| e.in_stage("diagnose"))?;

            let files = [
                (format!("{key}.tree.json"), tree_json.into_bytes()),
                (format!("{key}.nwk"), nwk.into_bytes()),
                (format!("{key}.curve.csv"), curve_csv),
                (format!("{key}.diagnostics.json"), report.to_json().into_bytes()),
            ];
            let mut written = Vec::new();
            for (name, bytes) in files {
                let path = out(name);
                write_artifact(&path, &bytes).map_err(|e| e.in_stage("output"))?;
                written.push(path);
            }
            Ok((key, curve, written))
        })
        .collect::<Result<_>>()?;

    let mut curves = BTreeMap::new();
    let mut trees = Vec::new();
    for (key, curve, written) in results {
        artifacts.extend(written);
        trees.push(key.clone());
        curves.insert(key, curve);
    }

    let report = compare_methods(&curves).map_err(|e| e.in_stage("compare"))?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let csv_path = out("comparison.csv".into());
    write_artifact(&csv_path, &csv).map_err(|e| e.in_stage("compare"))?;
    let json_path = out("comparison.json".into());
    let mut json = serde_json::to_string_pretty(&serde_json::json!({
        "hiertree_version": crate::VERSION,
        "report": report,
    }))?;
    json.push('\n');
    write_artifact(&json_path, json.as_bytes()).map_err(|e| e.in_stage("compare"))?;
    artifacts.push(csv_path);
    artifacts.push(json_path);

    Ok(GridSummary { hiertree_version: crate::VERSION.to_owned(), trees, artifacts, warnings })
}
