//! Prediction-log ingestion.
//!
//! Each input record is one classified item: an optional ground-truth label
//! plus the classifier's ranked predictions. Records are truncated to their
//! `k` highest-scoring entries and label names are interned into a
//! [`LabelRegistry`] whose ids follow first appearance in the stream.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type LabelId = usize;

/// Bidirectional map between label names and contiguous ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelRegistry {
    names: Vec<String>,
    index: HashMap<String, LabelId>,
}

impl LabelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a registry from an ordered list of names, assigning ids by position.
    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut reg = Self::new();
        for name in names {
            let name = name.into();
            if name.is_empty() {
                return Err(Error::Validation("empty label name".into()));
            }
            if reg.index.contains_key(&name) {
                return Err(Error::Validation(format!("duplicate label name '{name}'")));
            }
            reg.intern(&name);
        }
        Ok(reg)
    }

    /// Returns the id of `name`, registering it if unseen.
    pub fn intern(&mut self, name: &str) -> LabelId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<LabelId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl TryFrom<Vec<String>> for LabelRegistry {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        Self::from_names(names)
    }
}

impl From<LabelRegistry> for Vec<String> {
    fn from(reg: LabelRegistry) -> Self {
        reg.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: LabelId,
    pub score: Option<f64>,
}

/// One classified item with its ranked top predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub video_id: String,
    pub truth: Option<LabelId>,
    pub top: Vec<Prediction>,
}

impl PredictionRecord {
    pub fn labels(&self) -> impl Iterator<Item = LabelId> + '_ {
        self.top.iter().map(|p| p.label)
    }

    pub fn top1(&self) -> LabelId {
        self.top[0].label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDataset {
    pub registry: LabelRegistry,
    pub records: Vec<PredictionRecord>,
    pub k: usize,
}

impl PredictionDataset {
    pub fn n_labels(&self) -> usize {
        self.registry.len()
    }

    /// Checks every dataset and record invariant.
    pub fn validate(&self, allow_short: bool) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::NoRecords);
        }
        if self.registry.len() < 2 {
            return Err(Error::Validation(format!(
                "label registry has {} label(s); at least 2 required",
                self.registry.len()
            )));
        }
        let n = self.registry.len();
        for (i, rec) in self.records.iter().enumerate() {
            let line = i + 1;
            check_record(rec, n, self.k, allow_short).map_err(|msg| Error::Malformed { line, msg })?;
        }
        Ok(())
    }

    /// Writes the dataset as JSONL, one record per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in &self.records {
            let raw = RawRecord {
                video_id: rec.video_id.clone(),
                truth: rec.truth.map(|t| self.registry.name(t).to_owned()),
                top: rec
                    .top
                    .iter()
                    .map(|p| RawPrediction { label: self.registry.name(p.label).to_owned(), score: p.score })
                    .collect(),
            };
            serde_json::to_writer(&mut out, &raw)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("JSON output is UTF-8")
    }
}

fn check_record(rec: &PredictionRecord, n: usize, k: usize, allow_short: bool) -> std::result::Result<(), String> {
    if rec.top.is_empty() {
        return Err("record has no predictions".into());
    }
    if rec.top.len() > k || (!allow_short && rec.top.len() < k) {
        return Err(format!("record has {} predictions, expected {k}", rec.top.len()));
    }
    if let Some(t) = rec.truth {
        if t >= n {
            return Err(format!("truth id {t} outside registry"));
        }
    }
    let mut seen = Vec::with_capacity(rec.top.len());
    let mut prev = f64::INFINITY;
    for p in &rec.top {
        if p.label >= n {
            return Err(format!("label id {} outside registry", p.label));
        }
        if seen.contains(&p.label) {
            return Err(format!("duplicate label id {} in top list", p.label));
        }
        seen.push(p.label);
        if let Some(s) = p.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(format!("score {s} outside [0, 1]"));
            }
            if s > prev {
                return Err("scores are not non-increasing".into());
            }
            prev = s;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::Validation(format!("unknown input format '{other}'"))),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Jsonl => "jsonl",
            InputFormat::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept records with fewer than `k` predictions as smaller sets.
    pub pad_short: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    video_id: String,
    #[serde(default)]
    truth: Option<String>,
    top: Vec<RawPrediction>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPrediction {
    label: String,
    #[serde(default)]
    score: Option<f64>,
}

/// Parses a prediction log and truncates every record to its top `k`.
pub fn parse_predictions<R: BufRead>(
    input: R,
    format: InputFormat,
    k: usize,
    opts: ParseOptions,
) -> Result<PredictionDataset> {
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    let raws = match format {
        InputFormat::Jsonl => read_jsonl(input)?,
        InputFormat::Csv => read_csv(input)?,
    };
    if raws.is_empty() {
        return Err(Error::NoRecords);
    }

    let mut registry = LabelRegistry::new();
    let mut records = Vec::with_capacity(raws.len());
    for (line, raw) in raws {
        let rec = build_record(raw, k, opts, &mut registry).map_err(|msg| Error::Malformed { line, msg })?;
        records.push(rec);
    }

    let ds = PredictionDataset { registry, records, k };
    ds.validate(opts.pad_short)?;
    Ok(ds)
}

fn build_record(
    mut raw: RawRecord,
    k: usize,
    opts: ParseOptions,
    registry: &mut LabelRegistry,
) -> std::result::Result<PredictionRecord, String> {
    if raw.video_id.is_empty() {
        return Err("empty video_id".into());
    }
    if raw.top.is_empty() {
        return Err("record has no predictions".into());
    }
    for (i, p) in raw.top.iter().enumerate() {
        if p.label.is_empty() {
            return Err("empty label name".into());
        }
        if raw.top[..i].iter().any(|q| q.label == p.label) {
            return Err(format!("duplicate label '{}' in top list", p.label));
        }
        if let Some(s) = p.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(format!("score {s} for '{}' outside [0, 1]", p.label));
            }
        }
    }
    let scored = raw.top.iter().filter(|p| p.score.is_some()).count();
    if scored != 0 && scored != raw.top.len() {
        return Err("either all or no predictions must carry a score".into());
    }
    if raw.top.len() < k && !opts.pad_short {
        return Err(format!(
            "record has {} predictions, fewer than k = {k} (use --pad-short to accept)",
            raw.top.len()
        ));
    }
    if scored != 0 {
        // stable: equal scores keep their listed order
        raw.top.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("scores validated finite"));
    }
    raw.top.truncate(k);

    if let Some(t) = raw.truth.as_deref() {
        if t.is_empty() {
            raw.truth = None;
        }
    }
    let truth = raw.truth.as_deref().map(|t| registry.intern(t));
    let top = raw.top.iter().map(|p| Prediction { label: registry.intern(&p.label), score: p.score }).collect();
    Ok(PredictionRecord { video_id: raw.video_id, truth, top })
}

fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<(usize, RawRecord)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::Malformed { line: line_no, msg: e.to_string() })?;
        out.push((line_no, raw));
    }
    Ok(out)
}

fn read_csv<R: BufRead>(input: R) -> Result<Vec<(usize, RawRecord)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Malformed { line, msg: e.to_string() }
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let malformed = |msg: String| Error::Malformed { line, msg };
        if row.len() < 4 {
            return Err(malformed(format!(
                "expected video_id,truth and at least one label,score pair; got {} fields",
                row.len()
            )));
        }
        if (row.len() - 2) % 2 != 0 {
            return Err(malformed("unpaired label/score column".into()));
        }
        let truth = match row[1].trim() {
            "" => None,
            t => Some(t.to_owned()),
        };
        let mut top = Vec::new();
        for pair in 0..(row.len() - 2) / 2 {
            let label = row[2 + 2 * pair].trim();
            let score = row[3 + 2 * pair].trim();
            if label.is_empty() {
                if !score.is_empty() {
                    return Err(malformed(format!("score without label in pair {}", pair + 1)));
                }
                continue;
            }
            let score = if score.is_empty() {
                None
            } else {
                let s: f64 = score.parse().map_err(|_| malformed(format!("invalid score '{score}'")))?;
                Some(s)
            };
            top.push(RawPrediction { label: label.to_owned(), score });
        }
        out.push((line, RawRecord { video_id: row[0].trim().to_owned(), truth, top }));
    }
    Ok(out)
}

/// Per-label count of records whose top-k contains the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub counts: Vec<u64>,
}

impl CoverageReport {
    /// Labels that never appear in any top-k set.
    pub fn uncovered(&self) -> Vec<LabelId> {
        self.counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.counts.iter().all(|&c| c > 0)
    }
}

pub fn coverage_report(ds: &PredictionDataset) -> CoverageReport {
    let mut counts = vec![0u64; ds.n_labels()];
    for rec in &ds.records {
        for l in rec.labels() {
            counts[l] += 1;
        }
    }
    CoverageReport { counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, k: usize) -> Result<PredictionDataset> {
        parse_predictions(s.as_bytes(), InputFormat::Jsonl, k, ParseOptions::default())
    }

    const SOCCER: &str = r#"{"video_id":"v1","truth":"shooting goal (soccer)","top":[{"label":"shooting goal (soccer)","score":0.58},{"label":"passing soccer ball","score":0.18},{"label":"playing field hockey","score":0.06},{"label":"kicking soccer ball","score":0.06},{"label":"juggling soccer ball","score":0.04}]}
{"video_id":"v2","truth":null,"top":[{"label":"passing soccer ball","score":0.5},{"label":"juggling soccer ball","score":0.2},{"label":"kicking soccer ball","score":0.1},{"label":"shooting goal (soccer)","score":0.1},{"label":"playing field hockey","score":0.05}]}
"#;

    #[test]
    fn sample_video_keeps_score_order() {
        let ds = parse(SOCCER, 5).unwrap();
        assert_eq!(ds.k, 5);
        let rec = &ds.records[0];
        let names: Vec<_> = rec.labels().map(|l| ds.registry.name(l)).collect();
        assert_eq!(
            names,
            [
                "shooting goal (soccer)",
                "passing soccer ball",
                "playing field hockey",
                "kicking soccer ball",
                "juggling soccer ball"
            ]
        );
        let scores: Vec<_> = rec.top.iter().map(|p| p.score.unwrap()).collect();
        assert_eq!(scores, [0.58, 0.18, 0.06, 0.06, 0.04]);
        assert_eq!(rec.truth, Some(0));
        assert_eq!(ds.records[1].truth, None);
    }

    #[test]
    fn empty_stream_is_rejected() {
        assert!(matches!(parse("", 5), Err(Error::NoRecords)));
        assert!(matches!(parse("\n\n", 5), Err(Error::NoRecords)));
    }

    #[test]
    fn seven_predictions_truncate_to_top_five() {
        let line = r#"{"video_id":"v","truth":"a","top":[{"label":"g","score":0.01},{"label":"a","score":0.3},{"label":"b","score":0.2},{"label":"c","score":0.15},{"label":"d","score":0.12},{"label":"e","score":0.1},{"label":"f","score":0.02}]}"#;
        let ds = parse(line, 5).unwrap();
        let names: Vec<_> = ds.records[0].labels().map(|l| ds.registry.name(l)).collect();
        assert_eq!(names, ["a", "b", "c", "d", "e"]);
    }

    #[test]
    fn rejects_bad_records_with_line_number() {
        let dup = r#"{"video_id":"a","top":[{"label":"x","score":0.5},{"label":"y","score":0.5}]}
{"video_id":"b","top":[{"label":"x","score":0.5},{"label":"x","score":0.2}]}"#;
        match parse(dup, 2) {
            Err(Error::Malformed { line: 2, msg }) => assert!(msg.contains("duplicate")),
            other => panic!("unexpected {other:?}"),
        }
        let bad_score = r#"{"video_id":"a","top":[{"label":"x","score":1.5},{"label":"y","score":0.5}]}"#;
        assert!(matches!(parse(bad_score, 2), Err(Error::Malformed { line: 1, .. })));
        let garbage =
            "{\"video_id\":\"a\",\"top\":[{\"label\":\"x\",\"score\":0.5},{\"label\":\"y\",\"score\":0.4}]}\nnot json";
        assert!(matches!(parse(garbage, 2), Err(Error::Malformed { line: 2, .. })));
    }

    #[test]
    fn short_records_need_pad_flag() {
        let s = r#"{"video_id":"a","top":[{"label":"x","score":0.5},{"label":"y","score":0.3}]}
{"video_id":"b","top":[{"label":"x","score":0.9}]}"#;
        assert!(matches!(parse(s, 2), Err(Error::Malformed { line: 2, .. })));
        let ds = parse_predictions(s.as_bytes(), InputFormat::Jsonl, 2, ParseOptions { pad_short: true }).unwrap();
        assert_eq!(ds.records[1].top.len(), 1);
        assert_eq!(coverage_report(&ds).counts, vec![2, 1]);
    }

    #[test]
    fn csv_matches_jsonl() {
        let csv = "video_id,truth,label1,score1,label2,score2\n\
                   v1,a,a,0.6,b,0.3\n\
                   v2,,c,0.7,a,0.2\n";
        let ds = parse_predictions(csv.as_bytes(), InputFormat::Csv, 2, ParseOptions::default()).unwrap();
        let jsonl = ds.to_jsonl_string();
        let again = parse(&jsonl, 2).unwrap();
        assert_eq!(ds, again);
        assert_eq!(ds.registry.names(), ["a", "b", "c"]);
        assert_eq!(ds.records[1].truth, None);
    }

    #[test]
    fn csv_errors_report_line() {
        let csv = "video_id,truth,label1,score1\nv1,a,a,0.5\nv2,a,b,oops\n";
        match parse_predictions(csv.as_bytes(), InputFormat::Csv, 1, ParseOptions::default()) {
            Err(Error::Malformed { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coverage_flags_absent_labels() {
        let reg = LabelRegistry::from_names(["a", "b", "x"]).unwrap();
        let ds = PredictionDataset {
            registry: reg,
            records: vec![PredictionRecord {
                video_id: "v".into(),
                truth: Some(2),
                top: vec![Prediction { label: 0, score: None }, Prediction { label: 1, score: None }],
            }],
            k: 2,
        };
        let cov = coverage_report(&ds);
        assert_eq!(cov.counts, vec![1, 1, 0]);
        assert_eq!(cov.uncovered(), vec![2]);
    }

    #[test]
    fn registry_rejects_duplicates() {
        assert!(LabelRegistry::from_names(["a", "a"]).is_err());
        assert!(LabelRegistry::from_names(["a", ""]).is_err());
    }
}
