use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hiertree::cache;
use hiertree::cooccur::{
    compute_distance, count_cooccurrences, DistanceMatrix, DistanceOptions, LiftNorm, UncoveredPolicy,
};
use hiertree::diagnose::{cluster_profile, late_merger_report, DEFAULT_MIN_CLUSTER};
use hiertree::evaluate::{accuracy_curve_topm, EvalSet};
use hiertree::export::{export_tree, TreeFile, TreeFormat};
use hiertree::hclust::agglomerate;
use hiertree::ingest::{coverage_report, parse_predictions, InputFormat, ParseOptions, PredictionDataset};
use hiertree::pipeline::{overlapping_ids, parse_ks, run_grid, write_artifact, PipelineConfig};
use hiertree::registry::{distance_measures, linkages};
use hiertree::synth::{generate_planted, planted_partition_file, PlantedConfig};
use hiertree::{Error, Result};

#[derive(Parser)]
#[command(name = "hiertree", version, about = "Build label hierarchies from top-k prediction co-occurrence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a prediction log into a binary dataset cache.
    Ingest(IngestArgs),
    /// Compute a label distance matrix from a dataset cache.
    Distance(DistanceArgs),
    /// Build a dendrogram from a distance matrix.
    Cluster(ClusterArgs),
    /// Cut a tree into k clusters and report their members.
    Cut(CutArgs),
    /// Level-wise accuracy curve of a tree on a labeled prediction log.
    Accuracy(AccuracyArgs),
    /// Rank labels by how late they join a meaningful cluster.
    Diagnose(DiagnoseArgs),
    /// Write a tree as Newick, DOT or JSON.
    Export(ExportArgs),
    /// Generate a synthetic prediction log with a planted hierarchy.
    Synth(SynthArgs),
    /// Run every (measure, linkage) combination end to end.
    Grid(GridArgs),
}

#[derive(Args)]
struct LogArgs {
    /// Input format: jsonl or csv.
    #[arg(long, default_value = "jsonl")]
    format: String,
    /// Set size; longer prediction lists are truncated.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Accept records with fewer than k predictions.
    #[arg(long)]
    pad_short: bool,
}

#[derive(Args)]
struct IngestArgs {
    /// Prediction log; `-` reads stdin.
    #[arg(long = "in", default_value = "-")]
    input: PathBuf,
    #[command(flatten)]
    log: LogArgs,
    /// Dataset cache to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write co-occurrence statistics for `diagnose`.
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Args)]
struct DistanceFlags {
    /// Lift normalization: off-diagonal or include-diagonal.
    #[arg(long)]
    lift_norm: Option<String>,
    /// Pseudo-count added to all counts.
    #[arg(long)]
    laplace: Option<f64>,
    /// Labels with no appearances: error, drop or isolate.
    #[arg(long)]
    uncovered: Option<String>,
}

impl DistanceFlags {
    fn apply(&self, opts: &mut DistanceOptions) -> Result<()> {
        if let Some(n) = &self.lift_norm {
            opts.lift_norm = n.parse::<LiftNorm>()?;
        }
        if let Some(l) = self.laplace {
            opts.laplace = l;
        }
        if let Some(u) = &self.uncovered {
            opts.uncovered = u.parse::<UncoveredPolicy>()?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct DistanceArgs {
    /// confidence or lift.
    #[arg(long)]
    measure: String,
    /// Dataset cache from `ingest`.
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    flags: DistanceFlags,
    /// Distance CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// single, complete, average, weighted or ward.
    #[arg(long)]
    linkage: String,
    /// Distance CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Tree JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CutArgs {
    #[arg(long)]
    tree: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AccuracyArgs {
    #[arg(long)]
    tree: PathBuf,
    /// Labeled prediction log.
    #[arg(long)]
    eval: PathBuf,
    #[command(flatten)]
    log: LogArgs,
    /// Levels to evaluate: `all`, `a..b` (N allowed) or a comma list.
    #[arg(long, default_value = "all")]
    ks: String,
    /// Count a hit when the truth shares a cluster with any of the top m.
    #[arg(long, default_value_t = 1)]
    topm: usize,
    /// Dataset cache used for mining; warns about shared video ids.
    #[arg(long)]
    mining: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    tree: PathBuf,
    /// Statistics cache from `ingest --stats-out`.
    #[arg(long)]
    stats: PathBuf,
    /// Smallest meaningful cluster size.
    #[arg(long, default_value_t = DEFAULT_MIN_CLUSTER)]
    m: usize,
    /// Labels per reported group; defaults to min(50, N).
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// newick, dot or json.
    #[arg(long, default_value = "newick")]
    format: String,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    groups: usize,
    #[arg(long, default_value_t = 5)]
    labels_per_group: usize,
    /// Videos per label.
    #[arg(long, default_value_t = 50)]
    videos: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.9)]
    p_in: f64,
    /// Probability that the truth label is ranked first.
    #[arg(long, default_value_t = 0.7)]
    p_truth_top1: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Per-label video count as LABEL_ID=COUNT; repeatable.
    #[arg(long = "override", value_parser = parse_override)]
    overrides: Vec<(usize, usize)>,
    /// JSONL log; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Planted partition JSON.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

fn parse_override(s: &str) -> std::result::Result<(usize, usize), String> {
    let (l, c) = s.split_once('=').ok_or("expected LABEL_ID=COUNT")?;
    let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("'{x}': {e}"));
    Ok((num(l)?, num(c)?))
}

#[derive(Args)]
struct GridArgs {
    /// TOML config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated distance measures.
    #[arg(long, value_delimiter = ',')]
    measures: Option<Vec<String>>,
    /// Comma-separated linkages.
    #[arg(long, value_delimiter = ',')]
    linkages: Option<Vec<String>>,
    #[arg(long)]
    ks: Option<String>,
    #[arg(long)]
    pad_short: bool,
    #[arg(long)]
    topm: Option<usize>,
    #[arg(long)]
    diagnose_m: Option<usize>,
    #[arg(long)]
    diagnose_q: Option<usize>,
    #[command(flatten)]
    flags: DistanceFlags,
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(fs::File::open(path).map_err(|e| with_path(e, path))?)))
    }
}

fn with_path(e: io::Error, path: &Path) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    open_input(path)?.read_to_string(&mut s)?;
    Ok(s)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_artifact(p, bytes),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn read_log(path: &Path, log: &LogArgs, pad_short: bool) -> Result<PredictionDataset> {
    let format: InputFormat = log.format.parse()?;
    parse_predictions(open_input(path)?, format, log.k, ParseOptions { pad_short })
}

fn load_tree(path: &Path) -> Result<TreeFile> {
    TreeFile::from_json(&read_text(path)?)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let ds = read_log(&a.input, &a.log, a.log.pad_short)?;
    let cov = coverage_report(&ds);
    eprintln!("ingested {} records over {} labels (k = {})", ds.records.len(), ds.n_labels(), ds.k);
    for l in cov.uncovered() {
        eprintln!("warning: label '{}' appears in no prediction set", ds.registry.name(l));
    }
    let mut buf = Vec::new();
    cache::write_dataset(&ds, &mut buf)?;
    write_artifact(&a.out, &buf)?;
    if let Some(p) = a.stats_out {
        let mut buf = Vec::new();
        cache::write_stats(&count_cooccurrences(&ds), &mut buf)?;
        write_artifact(&p, &buf)?;
    }
    Ok(())
}

fn distance(a: DistanceArgs) -> Result<()> {
    let measure = distance_measures().get(&a.measure)?;
    let mut opts = DistanceOptions::default();
    a.flags.apply(&mut opts)?;
    let ds = cache::load_dataset(&a.input).map_err(|e| e.in_stage("ingest"))?;
    let d = compute_distance(measure.as_ref(), &count_cooccurrences(&ds), &opts)?;
    let mut buf = Vec::new();
    d.write_csv(&mut buf)?;
    emit(a.out.as_deref(), &buf)
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let linkage = linkages().get(&a.linkage)?;
    let d = DistanceMatrix::read_csv(open_input(&a.input)?)?;
    let tree = agglomerate(&d, linkage.as_ref())?;
    let tf = TreeFile::new(&tree, d.labels(), d.source(), linkage.name());
    emit(a.out.as_deref(), tf.to_json().as_bytes())
}

fn cut(a: CutArgs) -> Result<()> {
    let tf = load_tree(&a.tree)?;
    let profile = cluster_profile(&tf.dendrogram()?, a.k, &tf.registry()?)?;
    emit(a.out.as_deref(), profile.to_json().as_bytes())
}

fn accuracy(a: AccuracyArgs) -> Result<()> {
    let tf = load_tree(&a.tree)?;
    let (tree, labels) = (tf.dendrogram()?, tf.registry()?);
    let eval_ds = read_log(&a.eval, &a.log, true)?;
    if let Some(p) = &a.mining {
        let mining = cache::load_dataset(p)?;
        let shared = overlapping_ids(&mining, &eval_ds);
        if !shared.is_empty() {
            eprintln!(
                "warning: {} evaluation video id(s) also appear in the mining set (first: {})",
                shared.len(),
                shared[0]
            );
        }
    }
    let eval = EvalSet::from_dataset(&eval_ds, &labels)?;
    let ks = parse_ks(&a.ks, tree.n_leaves())?;
    let curve = accuracy_curve_topm(&tree, &eval, &ks, a.topm)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    emit(a.out.as_deref(), &buf)
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let tf = load_tree(&a.tree)?;
    let stats = cache::load_stats(&a.stats)?;
    let q = a.q.unwrap_or(50.min(tf.n_leaves));
    let report = late_merger_report(&tf.dendrogram()?, &tf.registry()?, &stats, a.m, q)?;
    emit(a.out.as_deref(), report.to_json().as_bytes())
}

fn export(a: ExportArgs) -> Result<()> {
    let format: TreeFormat = a.format.parse()?;
    let tf = load_tree(&a.input)?;
    let text = export_tree(&tf.dendrogram()?, &tf.registry()?, format);
    emit(a.out.as_deref(), text.as_bytes())
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = PlantedConfig {
        groups: a.groups,
        labels_per_group: a.labels_per_group,
        videos_per_label: a.videos,
        k: a.k,
        p_in: a.p_in,
        p_truth_top1: a.p_truth_top1,
        seed: a.seed,
        video_overrides: a.overrides.into_iter().collect(),
    };
    let (ds, _) = generate_planted(&cfg)?;
    emit(a.out.as_deref(), ds.to_jsonl_string().as_bytes())?;
    if let Some(p) = a.truth_out {
        write_artifact(&p, planted_partition_file(&cfg).to_json().as_bytes())?;
    }
    Ok(())
}

fn grid(a: GridArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::from_toml(&read_text(p)?)?,
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = a.$field { cfg.$field = v; })*
        };
    }
    set!(eval, out_dir, format, k, measures, linkages, ks, topm, diagnose_m, diagnose_q);
    if let Some(v) = a.input {
        cfg.input = v;
    }
    cfg.pad_short |= a.pad_short;
    a.flags.apply(&mut cfg.distance)?;
    let summary = run_grid(&cfg)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "wrote {} trees and {} artifacts to {}",
        summary.trees.len(),
        summary.artifacts.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Distance(a) => distance(a),
        Command::Cluster(a) => cluster(a),
        Command::Cut(a) => cut(a),
        Command::Accuracy(a) => accuracy(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Export(a) => export(a),
        Command::Synth(a) => synth(a),
        Command::Grid(a) => grid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hiertree: error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
