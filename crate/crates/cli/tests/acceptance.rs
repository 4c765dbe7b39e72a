//! Acceptance suite. Runs every criterion at its pinned tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any criterion fails.
//!
//! Criterion 10 needs a real CDNET-2014 tree and is skipped unless
//! `CDNET_ROOT`, `CDNET_METHOD` (a results directory for one method) and
//! `CDNET_REFERENCE` (CSV `category,video,recall,specificity,fpr,fnr,pwc,
//! precision,fmeasure` from the official evaluation) are set.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cdfuse_cli::report::{self, Scope};
use cdfuse_core::detectors;
use cdfuse_core::engine::{evolve, GpConfig};
use cdfuse_core::fitness::{self, EvaluationContext, Granularity, ProducerMeasures};
use cdfuse_core::metrics::{cdnet_rank, measures, rank_values, ConfusionCounts, Measure, MetricVector, Orientation};
use cdfuse_core::morph;
use cdfuse_core::synth::{corrupt_detector, demo_task, CorruptionProfile, DemoOptions, DemoTask};
use cdfuse_core::{BinaryMask, Node, Op, SolutionTree};

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass: Some(pass),
            detail: detail.into(),
        }
    }
}

fn random_mask(rng: &mut impl Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(density)).unwrap()
}

/// Window count of foreground pixels around (x, y), zero outside.
fn window_count(m: &BinaryMask, x: usize, y: usize) -> usize {
    let (w, h) = m.dims();
    let mut n = 0;
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && m.get(nx as usize, ny as usize) {
                n += 1;
            }
        }
    }
    n
}

fn median5_oracle(m: &BinaryMask, x: usize, y: usize) -> bool {
    let (w, h) = m.dims();
    let mut n = 0;
    for dy in -2i64..=2 {
        for dx in -2i64..=2 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && m.get(nx as usize, ny as usize) {
                n += 1;
            }
        }
    }
    n >= 13
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut mismatches = 0usize;
    for _ in 0..500 {
        let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let density = rng.gen_range(0.05..0.95);
        let m = random_mask(&mut rng, w, h, density);
        let (e, d, md) = (morph::erode(&m), morph::dilate(&m), morph::median5(&m));
        for y in 0..h {
            for x in 0..w {
                let c = window_count(&m, x, y);
                mismatches += usize::from(e.get(x, y) != (c == 9));
                mismatches += usize::from(d.get(x, y) != (c > 0));
                mismatches += usize::from(md.get(x, y) != median5_oracle(&m, x, y));
            }
        }
    }
    let t = start.elapsed();
    Outcome::check(
        mismatches == 0 && t < Duration::from_secs(10),
        format!("500 masks <= 32x32, {mismatches} pixel mismatches, {:.2}s", t.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut mv_bad, mut dual_bad) = (0usize, 0usize);
    for _ in 0..500 {
        let (w, h) = (rng.gen_range(1..=40), rng.gen_range(1..=40));
        let a = random_mask(&mut rng, w, h, 0.5);
        let b = random_mask(&mut rng, w, h, 0.5);
        let c = random_mask(&mut rng, w, h, 0.5);
        let mv = morph::majority(&[&a, &b, &c]).unwrap();
        let ab = morph::and(&a, &b).unwrap();
        let ac = morph::and(&a, &c).unwrap();
        let bc = morph::and(&b, &c).unwrap();
        let expected = morph::or(&morph::or(&ab, &ac).unwrap(), &bc).unwrap();
        mv_bad += usize::from(mv != expected);

        let lhs = morph::dilate(&a.not());
        let rhs = morph::erode(&a).not();
        for y in 1..h.saturating_sub(1) {
            for x in 1..w.saturating_sub(1) {
                dual_bad += usize::from(lhs.get(x, y) != rhs.get(x, y));
            }
        }
    }
    Outcome::check(
        mv_bad == 0 && dual_bad == 0,
        format!("500 triples: {mv_bad} majority mismatches, {dual_bad} interior duality mismatches"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut violations = Vec::new();
    for i in 0..1000 {
        let pick = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.1) { 0 } else { rng.gen_range(0..2000u64) };
        let c = ConfusionCounts::new(pick(&mut rng), pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let v = measures(&c);
        let eps = 1e-12;
        if c.tp + c.fn_ > 0 && (v.recall + v.fnr - 1.0).abs() > eps {
            violations.push(format!("#{i} recall+fnr"));
        }
        if c.tn + c.fp > 0 && (v.specificity + v.fpr - 1.0).abs() > eps {
            violations.push(format!("#{i} specificity+fpr"));
        }
        if !(0.0..=100.0).contains(&v.pwc) {
            violations.push(format!("#{i} pwc"));
        }
        let (lo, hi) = (v.precision.min(v.recall), v.precision.max(v.recall));
        if v.precision + v.recall > 0.0 && !(v.fmeasure >= lo - eps && v.fmeasure <= hi + eps) {
            violations.push(format!("#{i} f-measure bounds"));
        }
    }
    let w = measures(&ConfusionCounts::new(50, 10, 915, 25));
    let expected = [0.6667, 0.9892, 0.0108, 0.3333, 3.5, 0.8333, 0.7407];
    let round4 = |x: f64| (x * 1e4).round() / 1e4;
    let worked_ok = w.to_array().iter().zip(expected).all(|(&got, want)| round4(got) == want);
    if !worked_ok {
        violations.push(format!("worked example {:?}", w.to_array()));
    }
    Outcome::check(
        violations.is_empty(),
        format!(
            "1000 random counts, worked example {}; violations: {}",
            if worked_ok { "matches" } else { "differs" },
            if violations.is_empty() { "none".to_string() } else { violations.join(", ") }
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut changed, mut bad_sums) = (0usize, 0usize);
    let rescale = |v: f64| 3.0 * v + v.powi(3) + 7.0;
    for _ in 0..100 {
        let k = rng.gen_range(2..=8);
        let cats = rng.gen_range(1..=5);
        let table: Vec<Vec<MetricVector>> = (0..k)
            .map(|_| {
                (0..cats)
                    .map(|_| MetricVector::from_array(std::array::from_fn(|_| f64::from(rng.gen_range(0..12u8)) / 11.0)))
                    .collect()
            })
            .collect();
        let scaled: Vec<Vec<MetricVector>> = table
            .iter()
            .map(|row| row.iter().map(|v| MetricVector::from_array(v.to_array().map(rescale))).collect())
            .collect();
        if cdnet_rank(&table).unwrap() != cdnet_rank(&scaled).unwrap() {
            changed += 1;
        }
        for c in 0..cats {
            for m in Measure::ALL {
                let values: Vec<f64> = table.iter().map(|row| row[c].get(m)).collect();
                let sum: f64 = rank_values(&values, m.orientation()).iter().sum();
                bad_sums += usize::from(sum != (k * (k + 1)) as f64 / 2.0);
            }
        }
    }
    Outcome::check(
        changed == 0 && bad_sums == 0,
        format!("100 tables: {changed} rankings changed by rescaling, {bad_sums} cells with wrong rank sums"),
    )
}

/// Independent reading of the fitness formula: per cell, rank = 1 + (#pool
/// strictly better) + (#pool tied) / 2, plus w1 times the signed distance to
/// the best pool value and w2 times the used-terminal fraction.
fn fitness_oracle(
    candidate: &ProducerMeasures,
    pool: &[ProducerMeasures],
    terminals_used: usize,
    w1: f64,
    w2: f64,
    granularity: Granularity,
) -> f64 {
    let cells: Vec<(Vec<f64>, f64, Measure)> = match granularity {
        Granularity::PerVideo => (0..candidate.per_video.len())
            .flat_map(|v| {
                Measure::ALL.into_iter().map(move |m| {
                    (
                        pool.iter().map(|p| p.per_video[v].get(m)).collect(),
                        candidate.per_video[v].get(m),
                        m,
                    )
                })
            })
            .collect(),
        Granularity::Aggregate => Measure::ALL
            .into_iter()
            .map(|m| (pool.iter().map(|p| p.aggregate.get(m)).collect(), candidate.aggregate.get(m), m))
            .collect(),
    };
    let p2 = terminals_used as f64 / pool.len() as f64;
    let mut total = 0.0;
    for (values, x, m) in &cells {
        let higher = m.orientation() == Orientation::HigherBetter;
        let better = values.iter().filter(|&&v| if higher { v > *x } else { v < *x }).count();
        let ties = values.iter().filter(|&&v| v == *x).count();
        let rank = 1.0 + better as f64 + ties as f64 / 2.0;
        let best = if higher {
            values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        } else {
            values.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let p1 = if higher { best - x } else { x - best };
        total += rank + w1 * p1 + w2 * p2;
    }
    total / cells.len() as f64
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=5);
        let videos = rng.gen_range(1..=4);
        let counts = |rng: &mut ChaCha8Rng| -> Vec<ConfusionCounts> {
            (0..videos)
                .map(|_| {
                    // coarse values so that ties occur
                    let mut g = || 10 * rng.gen_range(0..8u64);
                    ConfusionCounts::new(g(), g(), 500 + g(), g())
                })
                .collect()
        };
        let pool: Vec<ProducerMeasures> = (0..n).map(|_| ProducerMeasures::from_counts(&counts(&mut rng))).collect();
        let cand = ProducerMeasures::from_counts(&counts(&mut rng));
        let used = rng.gen_range(1..=n);
        let mut terms: Vec<usize> = (0..n).collect();
        for i in 0..n {
            terms.swap(i, rng.gen_range(i..n));
        }
        let mut node = Node::Terminal(terms[0]);
        for &t in &terms[1..used] {
            node = Node::apply(Op::Or, vec![node, Node::Terminal(t)]).unwrap();
        }
        let tree = SolutionTree::new(node).unwrap();
        let names: Vec<String> = (0..n).map(|i| format!("alg{i}")).collect();
        let vnames: Vec<String> = (0..videos).map(|i| format!("v{i}")).collect();
        for g in [Granularity::PerVideo, Granularity::Aggregate] {
            let ctx = EvaluationContext::new(names.clone(), vnames.clone(), pool.clone())
                .unwrap()
                .with_weights(0.01, 0.01)
                .unwrap()
                .with_granularity(g);
            let got = fitness::fitness(&cand, &tree, &ctx).unwrap().f;
            let want = fitness_oracle(&cand, &pool, used, 0.01, 0.01, g);
            worst = worst.max(((got - want) / want).abs());
        }
    }
    Outcome::check(
        worst <= 1e-12,
        format!("100 pools x 2 granularities, worst relative error {worst:.2e}"),
    )
}

fn demo(seed: u64, noise: usize) -> DemoTask {
    let opts = DemoOptions::default().with_noise_detectors(noise);
    demo_task(&opts, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn run_config(seed: u64) -> GpConfig {
    GpConfig {
        population_size: 50,
        max_generations: 100,
        tournament_size: 5,
        elitism: true,
        w1: 0.01,
        w2: 0.01,
        seed,
        ..GpConfig::default()
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (mut increases, mut wrong_sizes, mut mismatched, mut too_deep) = (0, 0, 0, 0);
    for seed in 0..20 {
        let task = demo(1000 + seed, 0);
        let data = task.training_set(&task.train_keys()).unwrap();
        let ctx = data.context().unwrap();
        let cfg = run_config(seed);
        let a = evolve(&cfg, &ctx, &data, 1).unwrap();
        let b = evolve(&cfg, &ctx, &data, 4).unwrap();
        mismatched += usize::from(a.history != b.history || a.best != b.best);
        increases += a.history.records.windows(2).filter(|w| w[1].best_f > w[0].best_f).count();
        wrong_sizes += a.history.records.iter().filter(|r| r.population != 50).count();
        too_deep += a.history.records.iter().filter(|r| r.best_tree.depth() > r.depth_limit).count();
    }
    Outcome::check(
        increases + wrong_sizes + mismatched + too_deep == 0,
        format!(
            "20 runs: {increases} best-fitness increases, {wrong_sizes} wrong population sizes, \
             {mismatched} runs differing between 1 and 4 workers, {too_deep} over-deep bests, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Mean over the test videos of the per-video F-measure.
fn test_fmeasure(task: &DemoTask, tree: &SolutionTree) -> f64 {
    let data = task.training_set(&task.test_keys()).unwrap();
    let counts = data.counts(tree).unwrap();
    counts.iter().map(|c| measures(c).fmeasure).sum::<f64>() / counts.len() as f64
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let task = demo(seed, 0);
        let data = task.training_set(&task.train_keys()).unwrap();
        let ctx = data.context().unwrap();
        let out = evolve(&run_config(seed), &ctx, &data, 0).unwrap();
        let evolved = test_fmeasure(&task, &out.best);
        let best_single = (0..3)
            .map(|k| test_fmeasure(&task, &SolutionTree::terminal(k)))
            .fold(f64::NEG_INFINITY, f64::max);
        let mv3 = test_fmeasure(&task, &"(MV A0 A1 A2)".parse().unwrap());
        if evolved >= best_single && evolved >= mv3 - 0.01 {
            wins += 1;
        } else {
            failures.push(format!("seed {seed}: F {evolved:.4} vs single {best_single:.4}, MV-3 {mv3:.4}"));
        }
    }
    let t = start.elapsed();
    Outcome::check(
        wins >= 18 && t < Duration::from_secs(600),
        format!(
            "{wins}/20 seeds beat the best single detector and MV-3 - 0.01, {:.1}s{}",
            t.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut clean = 0;
    let mut used_noise = Vec::new();
    for seed in 0..20u64 {
        let task = demo(seed, 2);
        let data = task.training_set(&task.train_keys()).unwrap();
        let ctx = data.context().unwrap();
        let out = evolve(&run_config(seed), &ctx, &data, 0).unwrap();
        let terms = out.best.terminals();
        if !terms.contains(&3) && !terms.contains(&4) {
            clean += 1;
        } else {
            used_noise.push(format!("seed {seed}: {}", out.best));
        }
    }
    Outcome::check(
        clean >= 15,
        format!(
            "{clean}/20 evolved programs exclude both noise detectors{}",
            if used_noise.is_empty() { String::new() } else { format!("; {}", used_noise.join("; ")) }
        ),
    )
}

fn cdfuse(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cdfuse")).args(args).output().expect("spawn cdfuse");
    (
        out.status.code().unwrap_or(-1),
        format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr)),
    )
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let ds = root.join("ds");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let mut notes = Vec::new();
    let mut ok = true;

    let (code, log) = cdfuse(&["synth", "--demo", "--out", &s(&ds), "--seed", "9"]);
    ok &= code == 0;
    if code != 0 {
        notes.push(format!("synth failed: {log}"));
    }

    fs::write(root.join("a0.sexpr"), "A0\n").unwrap();
    fs::write(root.join("mv.sexpr"), "(MV A0 A1 A2)\n").unwrap();
    let pool = "noisy,over,under";
    let (c1, l1) = cdfuse(&["apply", "--tree", &s(&root.join("a0.sexpr")), "--dataset", &s(&ds), "--pool", pool, "--out", &s(&root.join("a0"))]);
    let (c2, l2) = cdfuse(&["apply", "--tree", &s(&root.join("mv.sexpr")), "--dataset", &s(&ds), "--pool", pool, "--out", &s(&root.join("mv"))]);
    let (c3, l3) = cdfuse(&["baseline", "mv", "-k", "3", "--dataset", &s(&ds), "--pool", pool, "--out", &s(&root.join("base"))]);
    for (c, l) in [(c1, l1), (c2, l2), (c3, l3)] {
        if c != 0 {
            ok = false;
            notes.push(format!("command failed: {l}"));
        }
    }

    // A0 passthrough is byte-identical to the first pool member
    let pool0 = ds.join("results").join("noisy");
    let src = files_under(&pool0);
    let dst = files_under(&root.join("a0"));
    let identical = src.len() == dst.len()
        && src.iter().zip(&dst).all(|(a, b)| {
            a.strip_prefix(&pool0).unwrap() == b.strip_prefix(root.join("a0")).unwrap() && fs::read(a).unwrap() == fs::read(b).unwrap()
        });
    ok &= identical && !src.is_empty();
    notes.push(format!("A0 passthrough {} over {} files", if identical { "identical" } else { "differs" }, src.len()));

    // the MV program equals fuse_mv over the same masks, and the baseline command
    let idx = cdfuse_core::dataset::scan_dataset(&ds).unwrap();
    let mut mv_mismatch = 0;
    for v in idx.videos() {
        let streams: Vec<Vec<BinaryMask>> = ["noisy", "over", "under"]
            .iter()
            .map(|a| v.roi_frames().map(|t| cdfuse_core::io::read_mask(&v.pool[*a][&t]).unwrap()).collect())
            .collect();
        let fused = detectors::fuse_mv(&streams).unwrap();
        for (i, t) in v.roi_frames().enumerate() {
            let name = cdfuse_core::dataset::frame_name("bin", t, "pgm");
            let applied = cdfuse_core::io::read_mask(root.join("mv").join(&v.category).join(&v.name).join(&name)).unwrap();
            let base = fs::read(root.join("base").join(&v.category).join(&v.name).join(&name)).unwrap();
            let applied_bytes = fs::read(root.join("mv").join(&v.category).join(&v.name).join(&name)).unwrap();
            mv_mismatch += usize::from(applied != fused[i] || base != applied_bytes);
        }
    }
    ok &= mv_mismatch == 0;
    notes.push(format!("MV program vs fuse_mv/baseline: {mv_mismatch} frame mismatches"));

    // MV-3 error rate over independently corrupted copies
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let gt: Vec<BinaryMask> = (0..5).map(|_| random_mask(&mut rng, 200, 200, 0.3)).collect();
    let pixels = (5 * 200 * 200) as f64;
    for eps in [0.05, 0.1, 0.2] {
        let profile = CorruptionProfile {
            flip_rate_fg: eps,
            flip_rate_bg: eps,
            ..CorruptionProfile::default()
        };
        let copies: Vec<Vec<BinaryMask>> = (0..3).map(|_| corrupt_detector(&gt, &profile, &mut rng).unwrap()).collect();
        let fused = detectors::fuse_mv(&copies).unwrap();
        let errors: usize = fused
            .iter()
            .zip(&gt)
            .map(|(f, g)| {
                let (w, h) = g.dims();
                (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| f.get(x, y) != g.get(x, y)).count()
            })
            .sum();
        let p = 3.0 * eps * eps - 2.0 * eps.powi(3);
        let sigma = (p * (1.0 - p) / pixels).sqrt();
        let rate = errors as f64 / pixels;
        let within = (rate - p).abs() <= 3.0 * sigma;
        ok &= within;
        notes.push(format!("eps {eps}: rate {rate:.5} vs {p:.5} ({:.1} sigma)", (rate - p).abs() / sigma));
    }
    Outcome::check(ok, notes.join(", "))
}

/// Minimal independent reader for the P5 files this suite writes.
fn raw_pgm(path: &Path) -> (usize, usize, Vec<u8>) {
    let bytes = fs::read(path).unwrap();
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8(bytes[start..pos].to_vec()).unwrap());
    }
    let (w, h): (usize, usize) = (fields[1].parse().unwrap(), fields[2].parse().unwrap());
    (w, h, bytes[pos + 1..pos + 1 + w * h].to_vec())
}

fn synthetic_score_check() -> std::result::Result<String, String> {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (code, log) = cdfuse(&["synth", "--demo", "--out", &s(&ds), "--seed", "10"]);
    if code != 0 {
        return Err(format!("synth failed: {log}"));
    }
    let method = ds.join("results").join("under");
    let csv = tmp.path().join("score.csv");
    let (code, log) = cdfuse(&["score", "--dataset", &s(&ds), "--pred", &format!("under={}", s(&method)), "--report", &s(&csv)]);
    if code != 0 {
        return Err(format!("score failed: {log}"));
    }
    let rows = report::parse_csv(&fs::read_to_string(&csv).unwrap()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut videos = 0;
    for r in rows.iter().filter(|r| r.scope == Scope::Video) {
        let vdir = ds.join(&r.category).join(&r.video);
        let roi = fs::read_to_string(vdir.join("temporalROI.txt")).unwrap();
        let b: Vec<usize> = roi.split_whitespace().map(|x| x.parse().unwrap()).collect();
        let (mut tp, mut fp, mut tn, mut fn_) = (0f64, 0f64, 0f64, 0f64);
        for t in b[0]..=b[1] {
            let (_, _, gt) = raw_pgm(&vdir.join("groundtruth").join(format!("gt{t:06}.pgm")));
            let (_, _, pr) = raw_pgm(&method.join(&r.category).join(&r.video).join(format!("bin{t:06}.pgm")));
            for (g, p) in gt.iter().zip(&pr) {
                let fg = *p >= 128;
                match (*g, fg) {
                    (255, true) => tp += 1.0,
                    (255, false) => fn_ += 1.0,
                    (0 | 50, true) => fp += 1.0,
                    (0 | 50, false) => tn += 1.0,
                    _ => {}
                }
            }
        }
        let recall = tp / (tp + fn_);
        let precision = tp / (tp + fp);
        let expected = [
            recall,
            tn / (tn + fp),
            fp / (fp + tn),
            fn_ / (tp + fn_),
            100.0 * (fn_ + fp) / (tp + fn_ + fp + tn),
            precision,
            2.0 * precision * recall / (precision + recall),
        ];
        for (got, want) in r.values.to_array().iter().zip(expected) {
            worst = worst.max((got - want).abs());
        }
        videos += 1;
    }
    if videos == 4 && worst <= 1e-12 {
        Ok(format!("synthetic cross-check of {videos} videos, max deviation {worst:.1e}"))
    } else {
        Err(format!("synthetic cross-check: {videos} videos, max deviation {worst:.3e}"))
    }
}

fn cdnet_check(root: &str, method: &str, reference: &str) -> std::result::Result<String, String> {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("cdnet.csv");
    let (code, log) = cdfuse(&["score", "--dataset", root, "--pred", &format!("method={method}"), "--report", csv.to_str().unwrap()]);
    if code != 0 {
        return Err(format!("score failed: {log}"));
    }
    let rows = report::parse_csv(&fs::read_to_string(&csv).unwrap()).map_err(|e| e.to_string())?;
    let ours: HashMap<(String, String), MetricVector> = rows
        .iter()
        .filter(|r| r.scope == Scope::Video)
        .map(|r| ((r.category.clone(), r.video.clone()), r.values))
        .collect();
    let text = fs::read_to_string(reference).map_err(|e| format!("{reference}: {e}"))?;
    let mut worst = 0.0f64;
    let mut compared = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with("category")) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 9 {
            return Err(format!("bad reference line {line:?}"));
        }
        let got = ours
            .get(&(f[0].to_string(), f[1].to_string()))
            .ok_or_else(|| format!("no score for {}/{}", f[0], f[1]))?;
        for (k, g) in got.to_array().iter().enumerate() {
            let want: f64 = f[2 + k].parse().map_err(|_| format!("bad number in {line:?}"))?;
            worst = worst.max((g - want).abs());
        }
        compared += 1;
    }
    if compared > 0 && worst <= 1e-4 {
        Ok(format!("{compared} CDNET videos, max deviation {worst:.2e}"))
    } else {
        Err(format!("{compared} CDNET videos, max deviation {worst:.2e}"))
    }
}

fn criterion_10() -> Outcome {
    let synthetic = synthetic_score_check();
    let vars = (std::env::var("CDNET_ROOT"), std::env::var("CDNET_METHOD"), std::env::var("CDNET_REFERENCE"));
    match (vars, synthetic) {
        (_, Err(e)) => Outcome::check(false, e),
        ((Ok(root), Ok(method), Ok(reference)), Ok(syn)) => match cdnet_check(&root, &method, &reference) {
            Ok(d) => Outcome::check(true, format!("{d}; {syn}")),
            Err(d) => Outcome::check(false, format!("{d}; {syn}")),
        },
        (_, Ok(syn)) => Outcome {
            pass: None,
            detail: format!("CDNET_ROOT/CDNET_METHOD/CDNET_REFERENCE not set; {syn}"),
        },
    }
}

fn main() {
    // libtest-style filtering is not supported; `--list` support keeps
    // `cargo test -- --list` working.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "morphology oracle equivalence", criterion_1),
        (2, "majority identity and interior duality", criterion_2),
        (3, "metric identities and worked example", criterion_3),
        (4, "rank invariance under monotone rescaling", criterion_4),
        (5, "fitness oracle agreement", criterion_5),
        (6, "engine invariants and determinism", criterion_6),
        (7, "evolved fusion beats single detectors", criterion_7),
        (8, "noise detectors left out", criterion_8),
        (9, "passthrough and baseline equivalences", criterion_9),
        (10, "scoring matches reference evaluation", criterion_10),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let status = match o.pass {
            Some(true) => "PASS",
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        println!(
            "criterion {n:>2} {status} {name}: {} [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
