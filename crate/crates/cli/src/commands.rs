use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use cdfuse_core::dataset::{self, DatasetIndex, FrameFiles, Split, VideoEntry};
use cdfuse_core::detectors::{self, FrameSequence, GaussianParams};
use cdfuse_core::engine::{self, GpConfig};
use cdfuse_core::evaluate;
use cdfuse_core::fitness::{self, EvaluationContext};
use cdfuse_core::metrics::measures;
use cdfuse_core::synth::{self, DemoOptions, SceneSpec};
use cdfuse_core::{io, BinaryMask, Error, SolutionTree, TrainingSet};

use crate::report::{self, ReportRow, Scope, VideoScore};
use crate::{
    ApplyArgs, BaselineArgs, BaselineKind, Cli, CliError, Command, DetectArgs, DetectorKind, EvolveArgs, RankArgs,
    ScoreArgs, Subset, SynthArgs, VideoSelection,
};

type CliResult<T = ()> = std::result::Result<T, CliError>;

pub fn execute(cli: Cli) -> CliResult {
    match cli.command {
        Command::Evolve(a) => evolve(a),
        Command::Apply(a) => apply(a),
        Command::Score(a) => score(a),
        Command::Rank(a) => rank(a),
        Command::Detect(a) => detect(a),
        Command::Baseline(a) => baseline(a),
        Command::Synth(a) => synth(a),
    }
}

fn workers_pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("--workers: {e}")))
}

fn read_text(path: &Path) -> CliResult<String> {
    Ok(fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?)
}

fn write_text(path: &Path, text: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn resolve_pool(index: &DatasetIndex, pool: &[String]) -> CliResult<Vec<String>> {
    if pool.is_empty() {
        if index.algorithms.is_empty() {
            return Err(Error::Dataset(format!("{}: no algorithms under results/", index.root.display())).into());
        }
        return Ok(index.algorithms.clone());
    }
    if let Some(a) = pool.iter().find(|a| !index.algorithms.contains(a)) {
        return Err(Error::Dataset(format!("pool algorithm {a} not found under results/")).into());
    }
    Ok(pool.to_vec())
}

fn load_split(index: &DatasetIndex, split: &str) -> CliResult<Split> {
    if split == "auto" {
        return Ok(dataset::training_split(index, None)?);
    }
    let list = dataset::parse_split_list(&read_text(Path::new(split))?);
    Ok(dataset::training_split(index, Some(&list))?)
}

fn select_videos<'a>(index: &'a DatasetIndex, sel: &VideoSelection) -> CliResult<Vec<&'a VideoEntry>> {
    let keys: Option<Vec<String>> = match sel.subset {
        Subset::All => None,
        Subset::Train => Some(load_split(index, &sel.train_split)?.train),
        Subset::Test => Some(load_split(index, &sel.train_split)?.test),
    };
    Ok(index
        .videos()
        .filter(|v| keys.as_ref().map_or(true, |k| k.contains(&v.key())))
        .collect())
}

fn print_provenance(cfg: &GpConfig) {
    for (k, v) in cfg.entries() {
        println!("# {k} = {v}");
    }
}

fn evolve(a: EvolveArgs) -> CliResult {
    let mut cfg = match &a.config {
        Some(p) => GpConfig::parse(&read_text(p)?)?,
        None => GpConfig::default(),
    };
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| CliError::Usage(format!("--set {kv}: {e}")))?;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    print_provenance(&cfg);

    let index = dataset::scan_dataset(&a.dataset)?;
    let pool = resolve_pool(&index, &a.pool)?;
    let split = load_split(&index, &a.train_split)?;
    println!("# pool = {}", pool.join(","));
    println!("# train = {}", split.train.join(","));
    let data = TrainingSet::from_dataset(&index, &split.train, &pool, cfg.frame_stride)?;

    let base = match a.cache.as_deref().filter(|p| p.exists()) {
        Some(p) => {
            let ctx = EvaluationContext::read_cache(p)?;
            if ctx.pool_names() != pool.as_slice() || ctx.video_names() != split.train.as_slice() {
                return Err(Error::Config(format!(
                    "cache {} was built for a different pool or training split",
                    p.display()
                ))
                .into());
            }
            ctx
        }
        None => {
            let ctx = data.context()?;
            if let Some(p) = &a.cache {
                ctx.write_cache(p)?;
            }
            ctx
        }
    };
    let ctx = base.with_weights(cfg.w1, cfg.w2)?.with_granularity(cfg.granularity);

    let out = engine::evolve(&cfg, &ctx, &data, a.workers)?;
    let mapping: String = pool.iter().enumerate().map(|(i, n)| format!("# A{i} = {n}\n")).collect();
    write_text(&a.out, &format!("{mapping}{}\n", out.best))?;
    if let Some(dir) = &a.history {
        out.history.write(dir)?;
    }
    let r = &out.report;
    println!("best = {}", out.best);
    println!(
        "f = {}  mean_rank = {}  p1_mean = {}  p2 = {}  size = {}  depth = {}",
        r.f,
        r.mean_rank,
        r.p1_mean,
        r.p2,
        out.best.size(),
        out.best.depth()
    );
    for m in &r.per_measure {
        println!("  {:<12} rank {:.4}  p1 {:+.6}", m.measure.name(), m.mean_rank, m.mean_p1);
    }
    let pool_ranks = fitness::rank_pool(&ctx)?;
    for (name, rank) in pool.iter().zip(&pool_ranks.average_ranks) {
        println!("pool {name}: average rank {rank:.4}");
    }
    Ok(())
}

fn write_stream(dir: &Path, masks: impl IntoIterator<Item = cdfuse_core::Result<(usize, BinaryMask)>>) -> CliResult<usize> {
    create_dir(dir)?;
    let mut n = 0;
    for item in masks {
        let (t, m) = item?;
        io::write_mask(&m, dir.join(dataset::frame_name("bin", t, "pgm")))?;
        n += 1;
    }
    Ok(n)
}

fn video_out(root: &Path, v: &VideoEntry) -> PathBuf {
    root.join(&v.category).join(&v.name)
}

fn apply(a: ApplyArgs) -> CliResult {
    let tree = SolutionTree::parse(&read_text(&a.tree)?)?;
    let index = dataset::scan_dataset(&a.dataset)?;
    let pool = resolve_pool(&index, &a.pool)?;
    tree.validate_terminals(pool.len())?;
    let videos = select_videos(&index, &a.videos)?;
    for v in &videos {
        for alg in &pool {
            if !v.pool.contains_key(alg) {
                return Err(Error::Dataset(format!("{}: no masks for pool algorithm {alg}", v.key())).into());
            }
        }
    }
    let counts: Vec<usize> = workers_pool(a.workers)?.install(|| {
        videos
            .par_iter()
            .map(|v| write_stream(&video_out(&a.out, v), evaluate::apply_tree(&tree, v, &pool)?))
            .collect::<CliResult<_>>()
    })?;
    println!("applied {tree} to {} videos, {} frames", videos.len(), counts.iter().sum::<usize>());
    Ok(())
}

fn parse_pred(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, dir)) if !name.is_empty() => (name.to_string(), PathBuf::from(dir)),
        _ => {
            let dir = PathBuf::from(spec);
            let name = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            (name, dir)
        }
    }
}

/// Per-video measures of each named prediction tree over `videos`.
fn score_trees(
    videos: &[&VideoEntry],
    methods: &[(String, PathBuf)],
    workers: usize,
) -> CliResult<Vec<(String, Vec<VideoScore>)>> {
    let mut files: Vec<Vec<FrameFiles>> = Vec::with_capacity(videos.len());
    for v in videos {
        let mut per_method = Vec::with_capacity(methods.len());
        for (name, dir) in methods {
            let f = dataset::prediction_files(dir, v)?;
            evaluate::check_coverage(v, &f, &format!("method {name}"))?;
            per_method.push(f);
        }
        files.push(per_method);
    }
    let counts: Vec<Vec<_>> = workers_pool(workers)?.install(|| {
        videos
            .par_iter()
            .zip(&files)
            .map(|(v, f)| evaluate::video_counts(v, &f.iter().collect::<Vec<_>>()))
            .collect::<cdfuse_core::Result<_>>()
    })?;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(m, (name, _))| {
            let scores = videos
                .iter()
                .zip(&counts)
                .map(|(v, c)| VideoScore {
                    category: v.category.clone(),
                    video: v.name.clone(),
                    values: measures(&c[m]),
                })
                .collect();
            (name.clone(), scores)
        })
        .collect())
}

fn print_summary(rows: &[ReportRow]) {
    for r in rows.iter().filter(|r| r.scope == Scope::Overall) {
        println!(
            "{:<16} F {:.4}  precision {:.4}  recall {:.4}  pwc {:.4}  average rank {:.4}",
            r.method,
            r.values.fmeasure,
            r.values.precision,
            r.values.recall,
            r.values.pwc,
            r.average_rank.unwrap_or(f64::NAN)
        );
    }
}

fn score(a: ScoreArgs) -> CliResult {
    let index = dataset::scan_dataset(&a.dataset)?;
    let videos = select_videos(&index, &a.videos)?;
    if videos.is_empty() {
        return Err(Error::Dataset("no videos selected".into()).into());
    }
    let methods: Vec<(String, PathBuf)> = a.pred.iter().map(|p| parse_pred(p)).collect();
    let scores = score_trees(&videos, &methods, a.workers)?;
    let rows = report::build_report(&scores)?;
    write_text(&a.report, &report::to_csv(&rows)?)?;
    print_summary(&rows);
    Ok(())
}

fn rank(a: RankArgs) -> CliResult {
    let index = dataset::scan_dataset(&a.dataset)?;
    let pool = resolve_pool(&index, &a.pool)?;
    let videos = select_videos(&index, &a.videos)?;
    let results = index.root.join(dataset::RESULTS_DIR);
    let methods: Vec<(String, PathBuf)> = pool.iter().map(|p| (p.clone(), results.join(p))).collect();
    let scores = score_trees(&videos, &methods, a.workers)?;
    let rows = report::build_report(&scores)?;
    if let Some(p) = &a.report {
        write_text(p, &report::to_csv(&rows)?)?;
    }
    let mut overall: Vec<&ReportRow> = rows.iter().filter(|r| r.scope == Scope::Overall).collect();
    overall.sort_by(|x, y| x.average_rank.partial_cmp(&y.average_rank).expect("finite ranks"));
    for (i, r) in overall.iter().enumerate() {
        println!(
            "{:>2}. {:<16} average rank {:.4}  F {:.4}",
            i + 1,
            r.method,
            r.average_rank.unwrap_or(f64::NAN),
            r.values.fmeasure
        );
    }
    Ok(())
}

fn read_sequence(v: &VideoEntry) -> CliResult<FrameSequence> {
    let frames = (1..=v.frame_count)
        .map(|t| {
            let path = v
                .inputs
                .get(&t)
                .ok_or_else(|| Error::Dataset(format!("{}: missing input frame {t}", v.key())))?;
            io::read_frame(path)
        })
        .collect::<cdfuse_core::Result<_>>()?;
    Ok(FrameSequence::new(frames)?)
}

fn detect(a: DetectArgs) -> CliResult {
    let index = dataset::scan_dataset(&a.dataset)?;
    let videos: Vec<&VideoEntry> = index.videos().collect();
    let params = GaussianParams {
        alpha: a.alpha,
        k: a.k,
        initial_var: a.initial_var,
        ..GaussianParams::default()
    };
    let total: Vec<usize> = workers_pool(a.workers)?.install(|| {
        videos
            .par_iter()
            .map(|v| {
                let seq = read_sequence(v)?;
                let masks = match a.method {
                    DetectorKind::Framediff => detectors::frame_difference(&seq, a.threshold),
                    DetectorKind::Median => detectors::median_background(&seq, a.window, a.threshold)?,
                    DetectorKind::Gaussian => detectors::running_gaussian(&seq, params)?,
                };
                write_stream(&video_out(&a.out, v), masks.into_iter().enumerate().map(|(i, m)| Ok((i + 1, m))))
            })
            .collect::<CliResult<_>>()
    })?;
    println!("{:?}: {} videos, {} masks", a.method, videos.len(), total.iter().sum::<usize>());
    Ok(())
}

fn baseline(a: BaselineArgs) -> CliResult {
    let BaselineKind::Mv = a.kind;
    let index = dataset::scan_dataset(&a.dataset)?;
    let pool = resolve_pool(&index, &a.pool)?;
    let k = a.k.unwrap_or(pool.len());
    if k < 3 || k % 2 == 0 || k > pool.len() {
        return Err(CliError::Usage(format!(
            "-k must be odd, >= 3 and at most the pool size {}, got {k}",
            pool.len()
        )));
    }
    let voters = &pool[..k];
    let videos = select_videos(&index, &a.videos)?;
    workers_pool(a.workers)?.install(|| {
        videos
            .par_iter()
            .map(|v| {
                let streams: Vec<Vec<BinaryMask>> = voters
                    .iter()
                    .map(|alg| {
                        let files = v.pool.get(alg).ok_or_else(|| {
                            Error::Dataset(format!("{}: no masks for pool algorithm {alg}", v.key()))
                        })?;
                        v.roi_frames().map(|t| io::read_mask(&files[&t])).collect()
                    })
                    .collect::<cdfuse_core::Result<_>>()?;
                let fused = detectors::fuse_mv(&streams)?;
                let first = v.temporal_roi.0;
                write_stream(&video_out(&a.out, v), fused.into_iter().enumerate().map(|(i, m)| Ok((first + i, m))))
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    println!("MV-{k} over {} on {} videos", voters.join(","), videos.len());
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    if a.demo {
        let opts = DemoOptions::default().with_noise_detectors(a.noise_detectors);
        let task = synth::demo_task(&opts, &mut rng)?;
        task.write(&a.out)?;
        println!(
            "demo dataset: {} videos, pool {} (seed {})",
            task.videos.len(),
            task.pool_names.join(","),
            a.seed
        );
    } else {
        let path = a.scene.as_ref().expect("clap enforces scene or demo");
        let spec = SceneSpec::parse(&read_text(path)?)?;
        synth::synth_generate(&spec, &mut rng, &a.out)?;
        println!("{} frames of {}x{} (seed {})", spec.frames, spec.width, spec.height, a.seed);
    }
    Ok(())
}
