//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::time::{Duration, Instant};

use common::*;
use hiertree::cooccur::{compute_distance, count_cooccurrences, CooccurrenceStats, DistanceMatrix, DistanceOptions};
use hiertree::diagnose::{cluster_profile, late_merger_report};
use hiertree::evaluate::{accuracy_curve, EvalSet};
use hiertree::hclust::{agglomerate, Dendrogram};
use hiertree::ingest::{LabelId, LabelRegistry};
use hiertree::pipeline::{run_grid, PipelineConfig};
use hiertree::registry::{distance_measures, linkages};
use hiertree::synth::{
    adjusted_rand_index, chained_outlier_distances, generate_planted, ChainedOutlierConfig, PlantedConfig,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn tree(d: &DistanceMatrix, linkage: &str) -> Dendrogram {
    agglomerate(d, linkages().get(linkage).unwrap().as_ref()).unwrap()
}

fn confidence(stats: &CooccurrenceStats) -> DistanceMatrix {
    compute_distance(distance_measures().get("confidence").unwrap().as_ref(), stats, &DistanceOptions::default())
        .unwrap()
}

fn f1_sets() -> Vec<Vec<LabelId>> {
    vec![vec![0, 1], vec![0, 1], vec![0, 2], vec![1, 2]]
}

fn f1(extra: usize) -> CooccurrenceStats {
    let names = ["a", "b", "c", "d"];
    let n = if extra > 0 { 4 } else { 3 };
    let mut sets = f1_sets();
    sets.extend(std::iter::repeat_n(vec![3], extra));
    CooccurrenceStats::from_sets(
        LabelRegistry::from_names(names[..n].iter().copied()).unwrap(),
        sets.iter().map(Vec::as_slice),
    )
}

fn similarity_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut compared = 0usize;
    for round in 0..500 {
        let (n, sets) = random_sets(&mut r, 100, 10, 4);
        let stats = CooccurrenceStats::from_sets(registry(n), sets.iter().map(Vec::as_slice));
        let bf = BruteForce { sets: &sets };
        for i in 0..n {
            for j in 0..n {
                let cases = [
                    ("confidence", stats.confidence(i, j).ok(), bf.confidence(i, j)),
                    ("lift", stats.lift(i, j).ok(), bf.lift(i, j)),
                    ("cosine", stats.cosine(i, j).ok(), bf.cosine(i, j)),
                    ("kulczynski", stats.kulczynski(i, j).ok(), bf.kulczynski(i, j)),
                ];
                for (what, got, want) in cases {
                    match (got, want) {
                        (Some(g), Some(w)) => check((g - w).abs() <= 1e-12, || {
                            format!("dataset {round}: {what}({i},{j}) = {g}, brute force {w}")
                        })?,
                        (None, None) => {}
                        _ => return Err(format!("dataset {round}: {what}({i},{j}) definedness differs")),
                    }
                    compared += 1;
                }
            }
        }
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("{compared} values over 500 datasets in {:.2}s", start.elapsed().as_secs_f64()))
}

fn reference_values() -> Outcome {
    // shooting basketball row: C_ij 0.76, C_ji 0.87, cosine 0.81
    let g = (0.76f64 * 0.87).sqrt();
    check((g - 0.81).abs() <= 0.005, || format!("sqrt(0.76*0.87) = {g}"))?;
    let s = f1(0);
    let c_ab = s.confidence(0, 1).map_err(|e| e.to_string())?;
    let l_ab = s.lift(0, 1).map_err(|e| e.to_string())?;
    check(c_ab == 2.0 / 3.0, || format!("C_ab = {c_ab}"))?;
    check(l_ab == 8.0 / 9.0, || format!("L_ab = {l_ab}"))?;
    let dc = confidence(&s).get(0, 1);
    check(dc == 1.0 - 2.0 / 3.0, || format!("D^C_ab = {dc}"))?;
    let dl = compute_distance(distance_measures().get("lift").unwrap().as_ref(), &s, &DistanceOptions::default())
        .map_err(|e| e.to_string())?
        .get(0, 1);
    check(dl == 0.0, || format!("D^L_ab = {dl}"))?;
    Ok(format!("geometric mean {g:.4}; C_ab=2/3 L_ab=8/9 D^C_ab=1/3 D^L_ab=0"))
}

fn clustering_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(103);
    for round in 0..200 {
        let n = r.random_range(2..=12);
        let d = random_distinct_matrix(&mut r, n);
        for (rule, name) in RULES {
            same_merges(&leaf_merges(&tree(&d, name)), &naive_agglomerate(&d, rule), 1e-9)
                .map_err(|e| format!("matrix {round} (n={n}) {name}: {e}"))?;
        }
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!("200 matrices x 5 linkages in {:.2}s", start.elapsed().as_secs_f64()))
}

/// Random symmetric matrix; coarse values produce many ties.
fn random_matrix(r: &mut rand_chacha::ChaCha8Rng) -> DistanceMatrix {
    let n = r.random_range(2..=30);
    let coarse = r.random_bool(0.5);
    let mut vals = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = if coarse { r.random_range(0..5) as f64 / 4.0 } else { r.random() };
            vals[i * n + j] = v;
            vals[j * n + i] = v;
        }
    }
    DistanceMatrix::new(registry(n), "random", vals).unwrap()
}

fn monotone_heights() -> Outcome {
    let mut r = rng(104);
    for round in 0..1000 {
        let d = random_matrix(&mut r);
        for name in linkages().names() {
            let t = tree(&d, name);
            check(t.is_monotone(), || format!("input {round} {name}: heights decrease"))?;
        }
    }
    Ok("1000 inputs x 5 linkages".into())
}

fn cut_semantics() -> Outcome {
    let mut r = rng(105);
    let mut trees = 0;
    for round in 0..100 {
        let d = random_matrix(&mut r);
        let n = d.n();
        for name in linkages().names() {
            let t = tree(&d, name);
            let cuts: Vec<_> = (1..=n).map(|k| t.cut(k).unwrap()).collect();
            for (i, c) in cuts.iter().enumerate() {
                let k = i + 1;
                let distinct: std::collections::BTreeSet<_> = c.member.iter().collect();
                check(distinct.len() == k, || format!("tree {round} {name}: cut {k} gave {}", distinct.len()))?;
            }
            for fine in 0..n {
                for coarse in 0..fine {
                    // independent refinement test: same fine cluster implies same coarse cluster
                    let (f, c) = (&cuts[fine].member, &cuts[coarse].member);
                    for a in 0..n {
                        for b in a + 1..n {
                            check(f[a] != f[b] || c[a] == c[b], || {
                                format!("tree {round} {name}: cut {} does not refine cut {}", fine + 1, coarse + 1)
                            })?;
                        }
                    }
                }
            }
            trees += 1;
        }
    }
    Ok(format!("{trees} trees, every k and every pair of levels"))
}

fn accuracy_endpoints() -> Outcome {
    let mut r = rng(106);
    for round in 0..100 {
        let d = random_matrix(&mut r);
        let n = d.n();
        let name = linkages().names()[round % 5].clone();
        let t = tree(&d, &name);
        let m = r.random_range(1..=60);
        let pairs: Vec<(usize, usize)> = (0..m).map(|_| (r.random_range(0..n), r.random_range(0..n))).collect();
        let eval = EvalSet::from_pairs(&pairs).unwrap();
        let ks: Vec<usize> = (1..=n).collect();
        let curve = accuracy_curve(&t, &eval, &ks).map_err(|e| e.to_string())?;
        let top1 = pairs.iter().filter(|(a, b)| a == b).count() as f64 / m as f64;
        let at = |k| curve.accuracy_at(k).unwrap();
        check(at(1) == 1.0, || format!("pair {round}: accuracy(1) = {}", at(1)))?;
        check(at(n) == top1, || format!("pair {round}: accuracy(N) = {} vs top-1 {top1}", at(n)))?;
        for k in 1..n {
            check(at(k) >= at(k + 1), || format!("pair {round}: accuracy rises from k={k} to {}", k + 1))?;
        }
    }
    Ok("100 (tree, eval set) pairs".into())
}

fn recovery_ari(cfg: &PlantedConfig, linkage: &str) -> f64 {
    let (ds, truth) = generate_planted(cfg).unwrap();
    let d = confidence(&count_cooccurrences(&ds));
    let cut = tree(&d, linkage).cut(cfg.groups).unwrap();
    adjusted_rand_index(&cut.member, &truth).unwrap()
}

fn planted_recovery() -> Outcome {
    let start = Instant::now();
    let seeds: Vec<u64> = (1..=20).collect();
    let good = seeds
        .iter()
        .filter(|&&seed| recovery_ari(&PlantedConfig { seed, ..Default::default() }, "ward") >= 0.9)
        .count();
    check(good >= 18, || format!("ARI >= 0.9 on only {good}/20 seeds"))?;
    for &seed in &seeds {
        let cfg = PlantedConfig { seed, p_in: 1.0, ..Default::default() };
        for name in linkages().names() {
            let ari = recovery_ari(&cfg, name);
            check(ari == 1.0, || format!("p_in=1 seed {seed} {name}: ARI {ari}"))?;
        }
    }
    within(start.elapsed(), 20.0)?;
    Ok(format!(
        "p_in=0.9 Ward: {good}/20 seeds ARI>=0.9; p_in=1: ARI=1 on 20 seeds x 5 linkages; {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn null_invariance() -> Outcome {
    let base = f1(0);
    let dc0 = confidence(&base).get(0, 1);
    let l0 = base.lift(0, 1).unwrap();
    for extra in [1, 4, 100] {
        let padded = f1(extra);
        let dc = confidence(&padded).get(0, 1);
        let l = padded.lift(0, 1).unwrap();
        check(dc.to_bits() == dc0.to_bits(), || format!("{extra} null sets: D^C_ab {dc} vs {dc0}"))?;
        check(l > l0, || format!("{extra} null sets: L_ab {l} not above {l0}"))?;
    }
    Ok(format!("D^C_ab stays {dc0}; L_ab rises from {l0:.4}"))
}

fn diagnostics_direction() -> Outcome {
    let scarce = 7;
    let mut flagged = 0;
    for seed in 1..=10 {
        let mut cfg = PlantedConfig { seed, ..Default::default() };
        cfg.video_overrides.insert(scarce, cfg.videos_per_label / 10);
        let (ds, _) = generate_planted(&cfg).unwrap();
        let stats = count_cooccurrences(&ds);
        let d = confidence(&stats);
        let report = late_merger_report(&tree(&d, "ward"), d.labels(), &stats, 3, cfg.labels_per_group)
            .map_err(|e| e.to_string())?;
        let name = cfg.label_name(scarce);
        check(report.late.labels.contains(&name), || {
            format!("seed {seed}: {name} not in bottom group {:?}", report.late.labels)
        })?;
        flagged += 1;
    }
    let (d, _) = chained_outlier_distances(&ChainedOutlierConfig::default()).unwrap();
    let k = ChainedOutlierConfig::default().groups;
    let balance = |name| cluster_profile(&tree(&d, name), k, d.labels()).unwrap().balance;
    let (ward, single) = (balance("ward"), balance("single"));
    check(ward > single, || format!("balance at k={k}: ward {ward} vs single {single}"))?;
    Ok(format!(
        "scarce label in bottom group on {flagged}/10 seeds; balance at k={k}: ward {ward:.3} > single {single:.3}"
    ))
}

fn scale() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    // 338 labels at 27 videos and 262 at 26 give 15,938 sets
    let mut mining =
        PlantedConfig { groups: 30, labels_per_group: 20, videos_per_label: 26, seed: 1, ..Default::default() };
    mining.video_overrides = (0..338).map(|l| (l, 27)).collect::<BTreeMap<_, _>>();
    let mut held_out = PlantedConfig { videos_per_label: 4, seed: 2, ..mining.clone() };
    held_out.video_overrides = (0..270).map(|l| (l, 5)).collect();
    let (mds, _) = generate_planted(&mining).unwrap();
    let (eds, _) = generate_planted(&held_out).unwrap();
    let (input, eval) = (dir.path().join("mining.jsonl"), dir.path().join("eval.jsonl"));
    mds.write_jsonl(fs::File::create(&input).unwrap()).unwrap();
    eds.write_jsonl(fs::File::create(&eval).unwrap()).unwrap();

    let cfg = PipelineConfig { input, eval, out_dir: dir.path().join("out"), diagnose_q: 50, ..Default::default() };
    let start = Instant::now();
    let summary = run_grid(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(summary.trees.len() == 10, || format!("{} trees", summary.trees.len()))?;
    let curves = fs::read_dir(&cfg.out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".curve.csv"))
        .count();
    check(curves == 10, || format!("{curves} curves"))?;
    within(elapsed, 60.0)?;
    Ok(format!(
        "{} sets x {} labels, {} eval records, 10 trees in {:.2}s",
        mds.records.len(),
        mds.registry.len(),
        eds.records.len(),
        elapsed.as_secs_f64()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("similarity oracle", similarity_oracle),
        ("reference values", reference_values),
        ("clustering oracle", clustering_oracle),
        ("monotone heights", monotone_heights),
        ("cut semantics", cut_semantics),
        ("accuracy endpoints and monotonicity", accuracy_endpoints),
        ("planted-hierarchy recovery", planted_recovery),
        ("null-invariance contrast", null_invariance),
        ("diagnostics directionality", diagnostics_direction),
        ("scale", scale),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {:>2} {name}: panicked", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
