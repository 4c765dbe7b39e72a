//! The evolutionary loop: ramped half-and-half initialization, tournament
//! selection, subtree crossover, per-node point mutation, elitism, adaptive
//! operator rates and a dynamic depth limit.
//!
//! Selection and variation run sequentially on one seeded RNG. Fitness of a
//! generation's new programs is evaluated in parallel and gathered by index,
//! so a run depends only on the config, the training data and the seed.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fitness::{self, EvaluationContext, FitnessReport, Granularity};
use crate::training::TrainingSet;
use crate::tree::{Node, Op, SolutionTree};

#[derive(Clone, Debug, PartialEq)]
pub struct GpConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub tournament_size: usize,
    pub elitism: bool,
    pub elite_count: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub crossover_min: f64,
    pub crossover_max: f64,
    pub mutation_min: f64,
    pub mutation_max: f64,
    /// Generations of operator credit considered when adapting rates.
    pub adaptation_window: usize,
    /// Fraction of the gap to the initial rates closed per generation when
    /// no operator earned credit.
    pub rate_decay: f64,
    pub init_depth_min: usize,
    pub init_depth_max: usize,
    /// Starting depth limit; raised when an over-deep offspring is the best
    /// program seen so far.
    pub depth_limit: usize,
    /// Largest MV arity drawn when building random programs.
    pub max_mv_arity: usize,
    pub seed: u64,
    pub w1: f64,
    pub w2: f64,
    pub granularity: Granularity,
    /// Use every k-th temporal-ROI frame of the training videos.
    pub frame_stride: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            max_generations: 100,
            tournament_size: 5,
            elitism: true,
            elite_count: 1,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            crossover_min: 0.6,
            crossover_max: 0.95,
            mutation_min: 0.05,
            mutation_max: 0.4,
            adaptation_window: 10,
            rate_decay: 0.5,
            init_depth_min: 2,
            init_depth_max: 4,
            depth_limit: 7,
            max_mv_arity: 5,
            seed: 0,
            w1: fitness::DEFAULT_W1,
            w2: fitness::DEFAULT_W2,
            granularity: Granularity::PerVideo,
            frame_stride: 1,
        }
    }
}

fn parse_flag(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let n = self.population_size;
        if n < 2 || n % 2 != 0 {
            return bad(format!("population_size must be even and >= 2, got {n}"));
        }
        if self.tournament_size == 0 || self.tournament_size > n {
            return bad(format!(
                "tournament_size must be in 1..={n}, got {}",
                self.tournament_size
            ));
        }
        if self.elitism && (self.elite_count == 0 || self.elite_count > n) {
            return bad(format!("elite_count must be in 1..={n}, got {}", self.elite_count));
        }
        for (name, p) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
            ("crossover_min", self.crossover_min),
            ("crossover_max", self.crossover_max),
            ("mutation_min", self.mutation_min),
            ("mutation_max", self.mutation_max),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.crossover_min > self.crossover_max || self.mutation_min > self.mutation_max {
            return bad("rate bounds must satisfy min <= max".into());
        }
        if self.adaptation_window == 0 {
            return bad("adaptation_window must be >= 1".into());
        }
        if !(self.rate_decay > 0.0 && self.rate_decay <= 1.0) {
            return bad(format!("rate_decay must be in (0, 1], got {}", self.rate_decay));
        }
        if self.init_depth_min == 0
            || self.init_depth_min > self.init_depth_max
            || self.init_depth_max > self.depth_limit
        {
            return bad(format!(
                "need 1 <= init_depth_min <= init_depth_max <= depth_limit, got {} {} {}",
                self.init_depth_min, self.init_depth_max, self.depth_limit
            ));
        }
        if self.max_mv_arity < 3 || self.max_mv_arity % 2 == 0 {
            return bad(format!("max_mv_arity must be odd and >= 3, got {}", self.max_mv_arity));
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) {
            return bad(format!("weights must be >= 0, got w1={} w2={}", self.w1, self.w2));
        }
        if self.frame_stride == 0 {
            return bad("frame_stride must be >= 1".into());
        }
        Ok(())
    }

    /// Parses a flat `key = value` file; unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = GpConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key = value", lineno + 1))
            })?;
            c.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("config line {}: {e}", lineno + 1)))?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("bad value {v:?}"))
        }
        match key {
            "population_size" => self.population_size = num(value)?,
            "max_generations" => self.max_generations = num(value)?,
            "tournament_size" => self.tournament_size = num(value)?,
            "elitism" => self.elitism = parse_flag(value).ok_or(format!("bad flag {value:?}"))?,
            "elite_count" => self.elite_count = num(value)?,
            "crossover_rate" => self.crossover_rate = num(value)?,
            "mutation_rate" => self.mutation_rate = num(value)?,
            "crossover_min" => self.crossover_min = num(value)?,
            "crossover_max" => self.crossover_max = num(value)?,
            "mutation_min" => self.mutation_min = num(value)?,
            "mutation_max" => self.mutation_max = num(value)?,
            "adaptation_window" => self.adaptation_window = num(value)?,
            "rate_decay" => self.rate_decay = num(value)?,
            "init_depth_min" => self.init_depth_min = num(value)?,
            "init_depth_max" => self.init_depth_max = num(value)?,
            "depth_limit" => self.depth_limit = num(value)?,
            "max_mv_arity" => self.max_mv_arity = num(value)?,
            "seed" => self.seed = num(value)?,
            "w1" => self.w1 = num(value)?,
            "w2" => self.w2 = num(value)?,
            "granularity" => self.granularity = value.parse().map_err(|e: Error| e.to_string())?,
            "frame_stride" => self.frame_stride = num(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("population_size", self.population_size.to_string()),
            ("max_generations", self.max_generations.to_string()),
            ("tournament_size", self.tournament_size.to_string()),
            ("elitism", self.elitism.to_string()),
            ("elite_count", self.elite_count.to_string()),
            ("crossover_rate", self.crossover_rate.to_string()),
            ("mutation_rate", self.mutation_rate.to_string()),
            ("crossover_min", self.crossover_min.to_string()),
            ("crossover_max", self.crossover_max.to_string()),
            ("mutation_min", self.mutation_min.to_string()),
            ("mutation_max", self.mutation_max.to_string()),
            ("adaptation_window", self.adaptation_window.to_string()),
            ("rate_decay", self.rate_decay.to_string()),
            ("init_depth_min", self.init_depth_min.to_string()),
            ("init_depth_max", self.init_depth_max.to_string()),
            ("depth_limit", self.depth_limit.to_string()),
            ("max_mv_arity", self.max_mv_arity.to_string()),
            ("seed", self.seed.to_string()),
            ("w1", self.w1.to_string()),
            ("w2", self.w2.to_string()),
            ("granularity", self.granularity.to_string()),
            ("frame_stride", self.frame_stride.to_string()),
        ]
    }
}

fn random_function(cfg: &GpConfig, rng: &mut impl Rng) -> (Op, usize) {
    let op = *Op::ALL.choose(rng).expect("nonempty");
    let arity = match op {
        Op::Ero | Op::Dil | Op::Mf => 1,
        Op::Or | Op::And => 2,
        Op::Mv => 3 + 2 * rng.gen_range(0..=(cfg.max_mv_arity - 3) / 2),
    };
    (op, arity)
}

fn build(cfg: &GpConfig, n: usize, depth: usize, full: bool, at: usize, rng: &mut impl Rng) -> Node {
    let use_terminal = at == depth
        || (!full && at > 0 && rng.gen_bool(n as f64 / (n + Op::ALL.len()) as f64));
    if use_terminal {
        return Node::Terminal(rng.gen_range(0..n));
    }
    let (op, arity) = random_function(cfg, rng);
    let children = (0..arity).map(|_| build(cfg, n, depth, full, at + 1, rng)).collect();
    Node::Apply { op, children }
}

/// Ramped half-and-half: individual `i` gets depth
/// `init_depth_min + (i / 2) mod range`, built "full" for even `i` and
/// "grow" for odd `i`. Grow trees always have a function at the root.
pub fn init_population(cfg: &GpConfig, n_terminals: usize, rng: &mut impl Rng) -> Result<Vec<SolutionTree>> {
    cfg.validate()?;
    if n_terminals == 0 {
        return Err(Error::Config("need at least one terminal".into()));
    }
    let range = cfg.init_depth_max - cfg.init_depth_min + 1;
    Ok((0..cfg.population_size)
        .map(|i| {
            let depth = cfg.init_depth_min + (i / 2) % range;
            SolutionTree::new(build(cfg, n_terminals, depth, i % 2 == 0, 0, rng)).expect("arity-valid by construction")
        })
        .collect())
}

/// Index of the tournament winner: `k` uniform draws with replacement, the
/// lowest fitness wins, ties go to the smaller tree, then the earlier draw.
pub fn tournament_select(population: &[SolutionTree], fitnesses: &[f64], k: usize, rng: &mut impl Rng) -> usize {
    assert!(!population.is_empty() && population.len() == fitnesses.len());
    let mut best = rng.gen_range(0..population.len());
    for _ in 1..k {
        let c = rng.gen_range(0..population.len());
        let better = fitnesses[c] < fitnesses[best]
            || (fitnesses[c] == fitnesses[best] && population[c].size() < population[best].size());
        if better {
            best = c;
        }
    }
    best
}

/// Exchanges one uniformly chosen subtree of `a` with one of `b`.
pub fn swap_subtrees(a: &SolutionTree, b: &SolutionTree, rng: &mut impl Rng) -> (SolutionTree, SolutionTree) {
    let i = rng.gen_range(0..a.size());
    let j = rng.gen_range(0..b.size());
    let (mut x, mut y) = (a.clone(), b.clone());
    let sa = a.node(i).expect("index in range").clone();
    let sb = b.node(j).expect("index in range").clone();
    *x.node_mut(i).expect("index in range") = sb;
    *y.node_mut(j).expect("index in range") = sa;
    (x, y)
}

/// Subtree crossover under a fixed depth limit: an offspring deeper than
/// `depth_limit` is replaced by its own parent.
pub fn crossover(a: &SolutionTree, b: &SolutionTree, rng: &mut impl Rng, depth_limit: usize) -> (SolutionTree, SolutionTree) {
    let (x, y) = swap_subtrees(a, b, rng);
    (
        if x.depth() > depth_limit { a.clone() } else { x },
        if y.depth() > depth_limit { b.clone() } else { y },
    )
}

/// Per-node point mutation. Each node, with probability `p_m`, takes a
/// different symbol of the same arity: another terminal, another unary or
/// binary operator. MV has no same-arity alternative and is kept. Returns
/// the mutant and the number of symbols changed.
pub fn mutate(t: &SolutionTree, p_m: f64, n_terminals: usize, rng: &mut impl Rng) -> (SolutionTree, usize) {
    let mut out = t.clone();
    let mut changed = 0;
    for i in 0..t.size() {
        if !rng.gen_bool(p_m) {
            continue;
        }
        let node = out.node_mut(i).expect("structure is unchanged");
        match node {
            Node::Terminal(k) => {
                if n_terminals > 1 {
                    let r = rng.gen_range(0..n_terminals - 1);
                    *k = if r >= *k { r + 1 } else { r };
                    changed += 1;
                }
            }
            Node::Apply { op, .. } => {
                let group: &[Op] = match op {
                    Op::Ero | Op::Dil | Op::Mf => &Op::UNARY,
                    Op::Or | Op::And => &Op::BINARY,
                    Op::Mv => &[Op::Mv],
                };
                let others: Vec<Op> = group.iter().copied().filter(|o| o != op).collect();
                if let Some(&o) = others.choose(rng) {
                    *op = o;
                    changed += 1;
                }
            }
        }
    }
    (out, changed)
}

/// Fitness improvement credited to each operator in one generation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OperatorCredit {
    pub crossover: f64,
    pub mutation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub crossover: f64,
    pub mutation: f64,
}

/// New operator rates from the credit earned over the last window. With
/// credit `c` and `m`, `p_c = min_c + c/(c+m) (max_c - min_c)` and likewise
/// for `p_m`. With no credit both rates move `rate_decay` of the way back
/// to their initial values.
pub fn adapt_rates(window: &[OperatorCredit], current: Rates, cfg: &GpConfig) -> Rates {
    let c: f64 = window.iter().map(|w| w.crossover).sum();
    let m: f64 = window.iter().map(|w| w.mutation).sum();
    let total = c + m;
    if total > 0.0 {
        Rates {
            crossover: cfg.crossover_min + c / total * (cfg.crossover_max - cfg.crossover_min),
            mutation: cfg.mutation_min + m / total * (cfg.mutation_max - cfg.mutation_min),
        }
    } else {
        Rates {
            crossover: current.crossover + cfg.rate_decay * (cfg.crossover_rate - current.crossover),
            mutation: current.mutation + cfg.rate_decay * (cfg.mutation_rate - current.mutation),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub population: usize,
    /// Best fitness in this generation's population.
    pub best_f: f64,
    pub mean_f: f64,
    pub best_tree: SolutionTree,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub depth_limit: usize,
    /// Programs evaluated for the first time in this generation.
    pub new_evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunHistory {
    pub config: GpConfig,
    pub records: Vec<GenerationRecord>,
}

impl RunHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.config.entries() {
            writeln!(s, "# {k}={v}").expect("string write");
        }
        s.push_str("generation,population,best_f,mean_f,crossover_rate,mutation_rate,depth_limit,new_evaluations,best_tree\n");
        for r in &self.records {
            writeln!(
                s,
                "{},{},{:?},{:?},{:?},{:?},{},{},\"{}\"",
                r.generation,
                r.population,
                r.best_f,
                r.mean_f,
                r.crossover_rate,
                r.mutation_rate,
                r.depth_limit,
                r.new_evaluations,
                r.best_tree
            )
            .expect("string write");
        }
        s
    }

    /// Writes `history.csv` and `trees/gen_NNNN.sexpr` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let trees = dir.join("trees");
        fs::create_dir_all(&trees).map_err(|e| Error::io(&trees, e))?;
        let csv = dir.join("history.csv");
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        for r in &self.records {
            let p = trees.join(format!("gen_{:04}.sexpr", r.generation));
            fs::write(&p, format!("{}\n", r.best_tree)).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOutcome {
    /// Best program seen over the whole run.
    pub best: SolutionTree,
    pub report: FitnessReport,
    pub history: RunHistory,
}

struct Evaluator<'a> {
    ctx: &'a EvaluationContext,
    data: &'a TrainingSet,
    cache: HashMap<String, FitnessReport>,
    pool: rayon::ThreadPool,
}

impl Evaluator<'_> {
    /// Fitness of every tree, evaluating unseen programs in parallel.
    fn evaluate(&mut self, trees: &[SolutionTree], generation: usize) -> Result<(Vec<f64>, usize)> {
        let keys: Vec<String> = trees.iter().map(SolutionTree::serialize).collect();
        let mut todo: Vec<usize> = Vec::new();
        let mut queued = std::collections::HashSet::new();
        for (i, k) in keys.iter().enumerate() {
            if !self.cache.contains_key(k) && queued.insert(k.as_str()) {
                todo.push(i);
            }
        }
        let (ctx, data) = (self.ctx, self.data);
        let results: Vec<Result<FitnessReport>> = self.pool.install(|| {
            todo.par_iter()
                .map(|&i| {
                    let tree = &trees[i];
                    fitness::fitness(&data.measure(tree)?, tree, ctx)
                })
                .collect()
        });
        for (&i, r) in todo.iter().zip(results) {
            let report = r.map_err(|e| Error::Evaluation {
                generation,
                individual: i,
                source: Box::new(e),
            })?;
            self.cache.insert(keys[i].clone(), report);
        }
        Ok((keys.iter().map(|k| self.cache[k].f).collect(), todo.len()))
    }

    fn report(&self, tree: &SolutionTree) -> &FitnessReport {
        &self.cache[&tree.serialize()]
    }
}

fn best_index(pop: &[SolutionTree], f: &[f64]) -> usize {
    (0..pop.len())
        .min_by(|&a, &b| f[a].total_cmp(&f[b]).then(pop[a].size().cmp(&pop[b].size())))
        .expect("nonempty population")
}

/// Indices of the `k` fittest individuals, best first.
fn elite_indices(pop: &[SolutionTree], f: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(pop[a].size().cmp(&pop[b].size())).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

struct Offspring {
    tree: SolutionTree,
    parent: usize,
    crossed: bool,
    mutated: bool,
}

/// Runs the GP loop for `cfg.max_generations` generations. `workers` bounds
/// the evaluation threads (0 lets the runtime choose); it never changes the
/// result.
pub fn evolve(cfg: &GpConfig, ctx: &EvaluationContext, data: &TrainingSet, workers: usize) -> Result<EvolveOutcome> {
    cfg.validate()?;
    if ctx.pool_size() != data.pool_size() {
        return Err(Error::Config(format!(
            "context has {} pool algorithms, training data {}",
            ctx.pool_size(),
            data.pool_size()
        )));
    }
    let n_terms = data.pool_size();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut eval = Evaluator {
        ctx,
        data,
        cache: HashMap::new(),
        pool,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.population_size;

    let mut population = init_population(cfg, n_terms, &mut rng)?;
    let (mut fits, fresh) = eval.evaluate(&population, 0)?;
    let mut rates = Rates {
        crossover: cfg.crossover_rate,
        mutation: cfg.mutation_rate,
    };
    let mut depth_limit = cfg.depth_limit;
    let mut credits: Vec<OperatorCredit> = Vec::new();

    let b = best_index(&population, &fits);
    let mut best = population[b].clone();
    let mut best_f = fits[b];
    let record = |g: usize, pop: &[SolutionTree], f: &[f64], rates: Rates, limit: usize, fresh: usize| {
        let b = best_index(pop, f);
        GenerationRecord {
            generation: g,
            population: pop.len(),
            best_f: f[b],
            mean_f: f.iter().sum::<f64>() / f.len() as f64,
            best_tree: pop[b].clone(),
            crossover_rate: rates.crossover,
            mutation_rate: rates.mutation,
            depth_limit: limit,
            new_evaluations: fresh,
        }
    };
    let mut records = vec![record(0, &population, &fits, rates, depth_limit, fresh)];

    for g in 1..=cfg.max_generations {
        let mut offspring: Vec<Offspring> = Vec::with_capacity(n);
        while offspring.len() < n {
            let i = tournament_select(&population, &fits, cfg.tournament_size, &mut rng);
            let j = tournament_select(&population, &fits, cfg.tournament_size, &mut rng);
            let crossed = rng.gen_bool(rates.crossover);
            let (x, y) = if crossed {
                swap_subtrees(&population[i], &population[j], &mut rng)
            } else {
                (population[i].clone(), population[j].clone())
            };
            for (child, parent) in [(x, i), (y, j)] {
                let (tree, changes) = mutate(&child, rates.mutation, n_terms, &mut rng);
                offspring.push(Offspring {
                    tree,
                    parent,
                    crossed,
                    mutated: changes > 0,
                });
            }
        }

        let trees: Vec<SolutionTree> = offspring.iter().map(|o| o.tree.clone()).collect();
        let (child_f, fresh) = eval.evaluate(&trees, g)?;

        // dynamic depth limit, resolved in offspring order
        let mut next: Vec<SolutionTree> = Vec::with_capacity(n);
        let mut next_f: Vec<f64> = Vec::with_capacity(n);
        let mut credit = OperatorCredit::default();
        for (o, &f) in offspring.into_iter().zip(&child_f) {
            let depth = o.tree.depth();
            if depth > depth_limit {
                if f < best_f {
                    depth_limit = depth;
                } else {
                    next.push(population[o.parent].clone());
                    next_f.push(fits[o.parent]);
                    continue;
                }
            }
            let gain = (fits[o.parent] - f).max(0.0);
            match (o.crossed, o.mutated) {
                (true, true) => {
                    credit.crossover += gain / 2.0;
                    credit.mutation += gain / 2.0;
                }
                (true, false) => credit.crossover += gain,
                (false, true) => credit.mutation += gain,
                (false, false) => {}
            }
            if f < best_f {
                best_f = f;
                best = o.tree.clone();
            }
            next.push(o.tree);
            next_f.push(f);
        }

        if cfg.elitism {
            for (slot, e) in elite_indices(&population, &fits, cfg.elite_count).into_iter().enumerate() {
                next[slot] = population[e].clone();
                next_f[slot] = fits[e];
            }
        }
        population = next;
        fits = next_f;

        credits.push(credit);
        let lo = credits.len().saturating_sub(cfg.adaptation_window);
        rates = adapt_rates(&credits[lo..], rates, cfg);
        records.push(record(g, &population, &fits, rates, depth_limit, fresh));
    }

    let report = eval.report(&best).clone();
    Ok(EvolveOutcome {
        best,
        report,
        history: RunHistory {
            config: cfg.clone(),
            records,
        },
    })
}
