//! Rank-based fitness of a candidate fusion program against a pool of
//! reference algorithms.
//!
//! For every evaluation cell (a video/measure pair, or a measure alone in
//! aggregate mode) the candidate is ranked among the `n` pool values plus
//! itself, and two penalties are added:
//!
//! * `p1`: signed distance to the best pool value for that measure,
//!   negative when the candidate beats the whole pool;
//! * `p2`: fraction of pool algorithms the program references.
//!
//! `f` is the mean over cells of `rank + w1 * p1 + w2 * p2`. Lower is fitter.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{self, ConfusionCounts, Measure, MetricVector, Orientation};
use crate::tree::SolutionTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Granularity {
    /// Rank within each training video, then average.
    #[default]
    PerVideo,
    /// Rank once per measure on counts pooled over all training videos.
    Aggregate,
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-video" | "per_video" | "video" => Ok(Granularity::PerVideo),
            "aggregate" => Ok(Granularity::Aggregate),
            other => Err(Error::Config(format!(
                "granularity must be per-video or aggregate, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Granularity::PerVideo => "per-video",
            Granularity::Aggregate => "aggregate",
        })
    }
}

/// Measures of one mask producer on the training videos.
#[derive(Clone, Debug, PartialEq)]
pub struct ProducerMeasures {
    pub per_video: Vec<MetricVector>,
    pub aggregate: MetricVector,
}

impl ProducerMeasures {
    /// Per-video measures from each video's accumulated counts, plus the
    /// measures of the counts pooled over all videos.
    pub fn from_counts(per_video: &[ConfusionCounts]) -> Self {
        Self {
            per_video: per_video.iter().map(metrics::measures).collect(),
            aggregate: metrics::measures(&per_video.iter().copied().sum()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvaluationContext {
    pool_names: Vec<String>,
    video_names: Vec<String>,
    pool: Vec<ProducerMeasures>,
    measure_set: Vec<Measure>,
    pub w1: f64,
    pub w2: f64,
    pub granularity: Granularity,
}

pub const DEFAULT_W1: f64 = 0.01;
pub const DEFAULT_W2: f64 = 0.01;

impl EvaluationContext {
    pub fn new(
        pool_names: Vec<String>,
        video_names: Vec<String>,
        pool: Vec<ProducerMeasures>,
    ) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::Config("the algorithm pool is empty".into()));
        }
        if pool_names.len() != pool.len() {
            return Err(Error::Config(format!(
                "{} pool names for {} pool entries",
                pool_names.len(),
                pool.len()
            )));
        }
        if video_names.is_empty() {
            return Err(Error::Config("no training videos".into()));
        }
        if let Some((i, _)) = pool
            .iter()
            .enumerate()
            .find(|(_, p)| p.per_video.len() != video_names.len())
        {
            return Err(Error::Config(format!(
                "pool algorithm {} is missing cells: {} of {} videos",
                pool_names[i],
                pool[i].per_video.len(),
                video_names.len()
            )));
        }
        Ok(Self {
            pool_names,
            video_names,
            pool,
            measure_set: Measure::ALL.to_vec(),
            w1: DEFAULT_W1,
            w2: DEFAULT_W2,
            granularity: Granularity::default(),
        })
    }

    pub fn with_weights(mut self, w1: f64, w2: f64) -> Result<Self> {
        if !(w1 >= 0.0 && w2 >= 0.0) {
            return Err(Error::Config(format!(
                "fitness weights must be non-negative, got w1={w1} w2={w2}"
            )));
        }
        self.w1 = w1;
        self.w2 = w2;
        Ok(self)
    }

    pub fn with_granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = granularity;
        self
    }

    /// Restricts ranking to a subset of the seven measures.
    pub fn with_measures(mut self, measures: &[Measure]) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::Config("measure set is empty".into()));
        }
        self.measure_set = measures.to_vec();
        Ok(self)
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measure_set
    }

    /// Pool size `n`.
    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    pub fn pool_names(&self) -> &[String] {
        &self.pool_names
    }

    pub fn video_names(&self) -> &[String] {
        &self.video_names
    }

    pub fn pool(&self) -> &[ProducerMeasures] {
        &self.pool
    }

    /// Pool rows of the measure table used for ranking: one "cell group"
    /// per video, or a single group in aggregate mode.
    fn cell_groups<'a>(&self, producer: &'a ProducerMeasures) -> Vec<&'a MetricVector> {
        match self.granularity {
            Granularity::PerVideo => producer.per_video.iter().collect(),
            Granularity::Aggregate => vec![&producer.aggregate],
        }
    }

    /// Writes the pool measures as `algorithm,video,measure,value` rows;
    /// aggregate measures use the video name `*`.
    pub fn write_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("algorithm,video,measure,value\n");
        for (name, p) in self.pool_names.iter().zip(&self.pool) {
            let rows = self
                .video_names
                .iter()
                .map(String::as_str)
                .zip(&p.per_video)
                .chain(std::iter::once(("*", &p.aggregate)));
            for (video, mv) in rows {
                for m in Measure::ALL {
                    writeln!(out, "{name},{video},{m},{}", mv.get(m)).expect("string write");
                }
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a cache written by [`write_cache`](Self::write_cache). Pool and
    /// video order follow first appearance in the file.
    pub fn read_cache(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |line: usize, why: &str| {
            Error::Config(format!("{}:{}: {why}", path.display(), line + 1))
        };
        let mut pool_names: Vec<String> = Vec::new();
        let mut video_names: Vec<String> = Vec::new();
        let mut cells: HashMap<(usize, Option<usize>), [Option<f64>; 7]> = HashMap::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let [algo, video, measure, value] = fields[..] else {
                return Err(bad(ln, "expected 4 fields"));
            };
            let a = position_or_push(&mut pool_names, algo);
            let v = (video != "*").then(|| position_or_push(&mut video_names, video));
            let m: Measure = measure.parse().map_err(|_| bad(ln, "unknown measure"))?;
            let x: f64 = value.parse().map_err(|_| bad(ln, "bad value"))?;
            cells.entry((a, v)).or_default()[m.index()] = Some(x);
        }
        let take = |a: usize, v: Option<usize>| -> Result<MetricVector> {
            let raw = cells.get(&(a, v)).copied().unwrap_or_default();
            let mut vals = [0.0; 7];
            for (i, x) in raw.iter().enumerate() {
                vals[i] = x.ok_or_else(|| {
                    Error::Config(format!(
                        "{}: missing cell {} / {} / {}",
                        path.display(),
                        pool_names[a],
                        v.map_or("*", |v| video_names[v].as_str()),
                        Measure::ALL[i]
                    ))
                })?;
            }
            Ok(MetricVector::from_array(vals))
        };
        let mut pool = Vec::with_capacity(pool_names.len());
        for a in 0..pool_names.len() {
            let per_video = (0..video_names.len())
                .map(|v| take(a, Some(v)))
                .collect::<Result<Vec<_>>>()?;
            pool.push(ProducerMeasures {
                per_video,
                aggregate: take(a, None)?,
            });
        }
        Self::new(pool_names, video_names, pool)
    }
}

fn position_or_push(names: &mut Vec<String>, name: &str) -> usize {
    names.iter().position(|n| n == name).unwrap_or_else(|| {
        names.push(name.to_string());
        names.len() - 1
    })
}

/// Signed distance from the candidate to the best pool value.
pub fn p1(candidate: f64, pool: &[f64], orientation: Orientation) -> f64 {
    match orientation {
        Orientation::HigherBetter => pool.iter().copied().fold(f64::NEG_INFINITY, f64::max) - candidate,
        Orientation::LowerBetter => candidate - pool.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Fraction of the `n` pool algorithms the tree references.
pub fn p2(tree: &SolutionTree, n: usize) -> f64 {
    tree.stats().distinct_terminals as f64 / n as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureBreakdown {
    pub measure: Measure,
    pub mean_rank: f64,
    pub mean_p1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitnessReport {
    /// Lower is fitter.
    pub f: f64,
    pub mean_rank: f64,
    pub p1_mean: f64,
    pub p2: f64,
    pub w1: f64,
    pub w2: f64,
    pub per_measure: Vec<MeasureBreakdown>,
}

impl FitnessReport {
    /// `mean_rank + w1 * p1_mean + w2 * p2`, which equals `f` up to rounding.
    pub fn reconstruct(&self) -> f64 {
        self.mean_rank + self.w1 * self.p1_mean + self.w2 * self.p2
    }
}

pub fn fitness(
    candidate: &ProducerMeasures,
    tree: &SolutionTree,
    ctx: &EvaluationContext,
) -> Result<FitnessReport> {
    let ours = ctx.cell_groups(candidate);
    let expected = match ctx.granularity {
        Granularity::PerVideo => ctx.video_names.len(),
        Granularity::Aggregate => 1,
    };
    if ours.len() != expected {
        return Err(Error::Config(format!(
            "candidate measured on {} videos, pool on {expected}",
            ours.len()
        )));
    }
    let pool_groups: Vec<Vec<&MetricVector>> = ctx.pool.iter().map(|p| ctx.cell_groups(p)).collect();
    let n = ctx.pool_size();
    let penalty2 = p2(tree, n);

    let mut total = 0.0;
    let mut rank_sum = 0.0;
    let mut p1_sum = 0.0;
    let mut per_measure: Vec<MeasureBreakdown> = ctx
        .measure_set
        .iter()
        .map(|&measure| MeasureBreakdown {
            measure,
            mean_rank: 0.0,
            mean_p1: 0.0,
        })
        .collect();
    let mut contenders = Vec::with_capacity(n + 1);
    for (g, cand) in ours.iter().enumerate() {
        for (k, &m) in ctx.measure_set.iter().enumerate() {
            contenders.clear();
            contenders.push(cand.get(m));
            contenders.extend(pool_groups.iter().map(|p| p[g].get(m)));
            let rank = metrics::rank_values(&contenders, m.orientation())[0];
            let distance = p1(contenders[0], &contenders[1..], m.orientation());
            total += rank + ctx.w1 * distance + ctx.w2 * penalty2;
            rank_sum += rank;
            p1_sum += distance;
            per_measure[k].mean_rank += rank;
            per_measure[k].mean_p1 += distance;
        }
    }
    let cells = (ours.len() * ctx.measure_set.len()) as f64;
    for b in &mut per_measure {
        b.mean_rank /= ours.len() as f64;
        b.mean_p1 /= ours.len() as f64;
    }
    Ok(FitnessReport {
        f: total / cells,
        mean_rank: rank_sum / cells,
        p1_mean: p1_sum / cells,
        p2: penalty2,
        w1: ctx.w1,
        w2: ctx.w2,
        per_measure,
    })
}

/// Ranks the pool members among themselves, treating each training video
/// (or the pooled aggregate) as a category.
pub fn rank_pool(ctx: &EvaluationContext) -> Result<metrics::CdnetRanking> {
    let table: Vec<Vec<MetricVector>> = ctx
        .pool
        .iter()
        .map(|p| ctx.cell_groups(p).into_iter().copied().collect())
        .collect();
    metrics::cdnet_rank(&table)
}
