//! Generational evolutionary search over program trees, optionally
//! interleaved with SGD tuning of the fittest individuals.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::Sample;
use crate::gp_program::{
    classify, generate, random_subtree, GenMethod, Individual, ProgramTree, ValueType, DEPTH_MAX,
    DEPTH_MIN,
};
use crate::local_search::{self, elite_indices, should_run_ls, LocalSearchConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Evolution only.
    Base,
    /// Periodic SGD on the fittest individuals.
    Ls,
    /// As `Ls`, plus an extended polish of the final best individual.
    Lse,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Base, Mode::Ls, Mode::Lse];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Base => "base",
            Mode::Ls => "ls",
            Mode::Lse => "lse",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ConfigError(format!("unknown mode '{s}' (expected base, ls or lse)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub reproduction_rate: f64,
    pub tournament_size: usize,
    pub depth_min: usize,
    pub depth_max: usize,
    /// Upper depth of the ramped half-and-half initial population.
    pub init_depth_max: usize,
    /// Maximum depth of subtrees grown by mutation.
    pub mutation_depth: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Copy the best individual unchanged into the next generation.
    pub elitism: bool,
    pub local_search: LocalSearchConfig,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 200,
            generations: 50,
            crossover_rate: 0.75,
            mutation_rate: 0.20,
            reproduction_rate: 0.05,
            tournament_size: 7,
            depth_min: DEPTH_MIN,
            depth_max: DEPTH_MAX,
            init_depth_max: 6,
            mutation_depth: 4,
            mode: Mode::Base,
            seed: 0,
            elitism: true,
            local_search: LocalSearchConfig::default(),
        }
    }
}

impl EvolutionConfig {
    /// Population of 1024 evolved for 50 generations.
    pub fn full_scale() -> Self {
        Self {
            population_size: 1024,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        let rates = [
            self.crossover_rate,
            self.mutation_rate,
            self.reproduction_rate,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return err("operator rates must lie in [0, 1]".into());
        }
        let total: f64 = rates.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return err(format!("operator rates sum to {total}, expected 1"));
        }
        if self.population_size == 0 {
            return err("population size must be positive".into());
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return err(format!(
                "tournament size {} must be in 1..={}",
                self.tournament_size, self.population_size
            ));
        }
        if self.depth_min < DEPTH_MIN
            || self.depth_min > self.depth_max
            || self.init_depth_max < self.depth_min
            || self.init_depth_max > self.depth_max
        {
            return err(format!(
                "inconsistent depth bounds {}..={} (initial up to {})",
                self.depth_min, self.depth_max, self.init_depth_max
            ));
        }
        if self.mutation_depth == 0 {
            return err("mutation depth must be positive".into());
        }
        if self.mode != Mode::Base {
            self.local_search
                .validate(self.population_size)
                .map_err(ConfigError)?;
        }
        Ok(())
    }

    pub fn breed_params(&self) -> BreedParams {
        BreedParams {
            depth_min: self.depth_min,
            depth_max: self.depth_max,
            mutation_depth_min: 1,
            mutation_depth_max: self.mutation_depth,
            max_retries: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub generation: usize,
}

impl Population {
    pub fn random<R: Rng + ?Sized>(cfg: &EvolutionConfig, rng: &mut R) -> Self {
        let individuals = (0..cfg.population_size)
            .map(|_| Individual::new(generate(rng, cfg.depth_min, cfg.init_depth_max)))
            .collect();
        Self {
            individuals,
            generation: 0,
        }
    }

    /// Fills in every missing fitness value (in parallel).
    pub fn evaluate(&mut self, data: &[Sample]) {
        self.individuals
            .par_iter_mut()
            .filter(|ind| ind.fitness.is_none())
            .for_each(|ind| ind.fitness = Some(fitness(&ind.tree, data)));
    }

    /// Index of the fittest individual (fewer nodes, then earlier, on ties).
    pub fn best_index(&self) -> usize {
        elite_indices(&self.individuals, 1)[0]
    }

    pub fn best(&self) -> &Individual {
        &self.individuals[self.best_index()]
    }

    pub fn mean_fitness(&self) -> f64 {
        self.individuals
            .iter()
            .map(Individual::fitness_or_zero)
            .sum::<f64>()
            / self.individuals.len() as f64
    }

    pub fn mean_size(&self) -> f64 {
        self.individuals
            .iter()
            .map(|i| i.tree.node_count() as f64)
            .sum::<f64>()
            / self.individuals.len() as f64
    }
}

/// Binary confusion counts with class 0 as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[u8], actual: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p == 0, a == 0) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `(TP + TN) / (TP + TN + FP + FN)`.
    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

/// Classification accuracy on `data`. A program that fails to evaluate on
/// any image scores 0.
pub fn fitness(tree: &ProgramTree, data: &[Sample]) -> f64 {
    let mut predicted = Vec::with_capacity(data.len());
    for s in data {
        match classify(tree, &s.image) {
            Ok(label) => predicted.push(label),
            Err(_) => return 0.0,
        }
    }
    let actual: Vec<u8> = data.iter().map(|s| s.label).collect();
    Confusion::from_predictions(&predicted, &actual).accuracy()
}

/// Tournament with replacement; returns the index of the winner. Ties on
/// fitness go to the smaller tree, then to the earliest draw.
pub fn tournament_index<R: Rng + ?Sized>(
    individuals: &[Individual],
    k: usize,
    rng: &mut R,
) -> usize {
    let mut best = rng.gen_range(0..individuals.len());
    for _ in 1..k {
        let i = rng.gen_range(0..individuals.len());
        let (c, b) = (&individuals[i], &individuals[best]);
        let (fc, fb) = (c.fitness_or_zero(), b.fitness_or_zero());
        if fc > fb || (fc == fb && c.tree.node_count() < b.tree.node_count()) {
            best = i;
        }
    }
    best
}

pub fn tournament<'a, R: Rng + ?Sized>(
    pop: &'a Population,
    k: usize,
    rng: &mut R,
) -> &'a Individual {
    &pop.individuals[tournament_index(&pop.individuals, k, rng)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BreedParams {
    pub depth_min: usize,
    pub depth_max: usize,
    pub mutation_depth_min: usize,
    pub mutation_depth_max: usize,
    pub max_retries: usize,
}

impl Default for BreedParams {
    fn default() -> Self {
        EvolutionConfig::default().breed_params()
    }
}

fn acceptable(tree: &ProgramTree, p: &BreedParams) -> bool {
    tree.validate(p.depth_min, p.depth_max).is_ok()
}

/// Subtree crossover between nodes of the same output type. Returns `None`
/// when every attempt produced an invalid offspring.
pub fn try_crossover<R: Rng + ?Sized>(
    a: &ProgramTree,
    b: &ProgramTree,
    rng: &mut R,
    p: &BreedParams,
) -> Option<(ProgramTree, ProgramTree)> {
    let na = a.nodes();
    let nb = b.nodes();
    for _ in 0..p.max_retries {
        let pa = na[rng.gen_range(0..na.len())];
        let candidates: Vec<usize> = nb
            .iter()
            .filter(|n| n.ty == pa.ty)
            .map(|n| n.index)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let pb = candidates[rng.gen_range(0..candidates.len())];
        let sa = a.subtree(pa.index).expect("index from traversal").clone();
        let sb = b.subtree(pb).expect("index from traversal").clone();
        let mut ca = a.clone();
        let mut cb = b.clone();
        ca.replace_subtree(pa.index, sb);
        cb.replace_subtree(pb, sa);
        if acceptable(&ca, p) && acceptable(&cb, p) {
            return Some((ca, cb));
        }
    }
    None
}

pub fn crossover<R: Rng + ?Sized>(
    a: &ProgramTree,
    b: &ProgramTree,
    rng: &mut R,
    p: &BreedParams,
) -> (ProgramTree, ProgramTree) {
    try_crossover(a, b, rng, p).unwrap_or_else(|| (a.clone(), b.clone()))
}

/// Replaces the subtree at `index` with a freshly grown one of the same
/// type; `None` if the result violates the depth bounds or typing.
pub fn mutate_at<R: Rng + ?Sized>(
    a: &ProgramTree,
    index: usize,
    rng: &mut R,
    p: &BreedParams,
) -> Option<ProgramTree> {
    let ty: ValueType = a.subtree(index)?.output_type();
    let depth =
        rng.gen_range(p.mutation_depth_min..=p.mutation_depth_max.max(p.mutation_depth_min));
    let method = if rng.gen_bool(0.5) {
        GenMethod::Full
    } else {
        GenMethod::Grow
    };
    let mut child = a.clone();
    child.replace_subtree(index, random_subtree(rng, ty, depth, method));
    acceptable(&child, p).then_some(child)
}

pub fn try_mutate<R: Rng + ?Sized>(
    a: &ProgramTree,
    rng: &mut R,
    p: &BreedParams,
) -> Option<ProgramTree> {
    let n = a.node_count();
    (0..p.max_retries).find_map(|_| {
        let idx = rng.gen_range(0..n);
        mutate_at(a, idx, rng, p)
    })
}

pub fn mutate<R: Rng + ?Sized>(a: &ProgramTree, rng: &mut R, p: &BreedParams) -> ProgramTree {
    try_mutate(a, rng, p).unwrap_or_else(|| a.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreedOp {
    Crossover,
    Mutation,
    Reproduction,
}

pub fn choose_operator<R: Rng + ?Sized>(cfg: &EvolutionConfig, rng: &mut R) -> BreedOp {
    let x: f64 = rng.gen();
    if x < cfg.crossover_rate {
        BreedOp::Crossover
    } else if x < cfg.crossover_rate + cfg.mutation_rate {
        BreedOp::Mutation
    } else {
        BreedOp::Reproduction
    }
}

/// Counts of breeding events; the elitist copy is tallied separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BreedStats {
    pub crossover: usize,
    pub mutation: usize,
    pub reproduction: usize,
    pub elite: usize,
}

impl BreedStats {
    pub fn events(&self) -> usize {
        self.crossover + self.mutation + self.reproduction
    }

    pub fn add(&mut self, other: &BreedStats) {
        self.crossover += other.crossover;
        self.mutation += other.mutation;
        self.reproduction += other.reproduction;
        self.elite += other.elite;
    }
}

/// Produces the next generation. Offspring carry no fitness unless they are
/// unchanged copies of a parent.
pub fn breed<R: Rng + ?Sized>(
    pop: &Population,
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> (Population, BreedStats) {
    let n = cfg.population_size;
    let params = cfg.breed_params();
    let parents = &pop.individuals;
    let mut next: Vec<Individual> = Vec::with_capacity(n);
    let mut stats = BreedStats::default();

    if cfg.elitism {
        next.push(pop.best().clone());
        stats.elite += 1;
    }
    while next.len() < n {
        match choose_operator(cfg, rng) {
            BreedOp::Crossover => {
                stats.crossover += 1;
                let ia = tournament_index(parents, cfg.tournament_size, rng);
                let ib = tournament_index(parents, cfg.tournament_size, rng);
                match try_crossover(&parents[ia].tree, &parents[ib].tree, rng, &params) {
                    Some((a, b)) => {
                        next.push(Individual::new(a));
                        if next.len() < n {
                            next.push(Individual::new(b));
                        }
                    }
                    None => {
                        next.push(parents[ia].clone());
                        if next.len() < n {
                            next.push(parents[ib].clone());
                        }
                    }
                }
            }
            BreedOp::Mutation => {
                stats.mutation += 1;
                let i = tournament_index(parents, cfg.tournament_size, rng);
                next.push(match try_mutate(&parents[i].tree, rng, &params) {
                    Some(t) => Individual::new(t),
                    None => parents[i].clone(),
                });
            }
            BreedOp::Reproduction => {
                stats.reproduction += 1;
                let i = tournament_index(parents, cfg.tournament_size, rng);
                next.push(parents[i].clone());
            }
        }
    }
    (
        Population {
            individuals: next,
            generation: pop.generation + 1,
        },
        stats,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub mean_size: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsKind {
    Elite,
    Polish,
}

impl LsKind {
    pub fn name(self) -> &'static str {
        match self {
            LsKind::Elite => "elite",
            LsKind::Polish => "polish",
        }
    }
}

/// One application of local search during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct LsEvent {
    pub generation: usize,
    pub kind: LsKind,
    pub individuals: usize,
    pub epochs: usize,
    pub best_before: f64,
    pub best_after: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub generations: Vec<GenerationRecord>,
    pub ls_events: Vec<LsEvent>,
    pub breed_stats: BreedStats,
    pub early_stopped: bool,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_time: Duration,
    /// Mean wall time to classify one test image.
    pub test_time_per_image: Duration,
}

/// Runs one evolutionary experiment seeded by `cfg.seed`.
///
/// Generation 0 is the random initial population. Each generation is
/// evaluated, tuned when local search is due, logged, and then bred, unless
/// an individual has reached perfect training accuracy. In `Lse` mode the
/// best individual of the last generation is polished before reporting;
/// otherwise the best individual seen in any generation is returned.
pub fn run(
    cfg: &EvolutionConfig,
    train: &[Sample],
    test: &[Sample],
) -> Result<(Individual, RunLog), ConfigError> {
    cfg.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(ConfigError(
            "training and test sets must be non-empty".into(),
        ));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = RunLog::default();

    let mut pop = Population::random(cfg, &mut rng);
    pop.evaluate(train);
    let mut best_of_run = pop.best().clone();

    for g in 0..cfg.generations {
        pop.generation = g;
        if cfg.mode != Mode::Base && should_run_ls(g, &cfg.local_search) {
            let before = pop.best().fitness_or_zero();
            pop = local_search::apply_ls_to_elite(pop, train, &cfg.local_search, &mut rng);
            let after = pop.best().fitness_or_zero();
            log.ls_events.push(LsEvent {
                generation: g,
                kind: LsKind::Elite,
                individuals: cfg.local_search.top_k.min(pop.individuals.len()),
                epochs: cfg.local_search.epochs,
                best_before: before,
                best_after: after,
            });
            debug!("generation {g}: local search best {before:.4} -> {after:.4}");
        }

        let best = pop.best();
        if best.fitness_or_zero() > best_of_run.fitness_or_zero() {
            best_of_run = best.clone();
        }
        let record = GenerationRecord {
            generation: g,
            best_fitness: best.fitness_or_zero(),
            mean_fitness: pop.mean_fitness(),
            mean_size: pop.mean_size(),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        info!(
            "gen {:>3} best {:.4} mean {:.4} size {:.2}",
            g, record.best_fitness, record.mean_fitness, record.mean_size
        );
        let perfect = record.best_fitness >= 1.0;
        log.generations.push(record);
        if perfect {
            log.early_stopped = true;
            break;
        }
        if g + 1 < cfg.generations {
            let (next, stats) = breed(&pop, cfg, &mut rng);
            log.breed_stats.add(&stats);
            pop = next;
            pop.evaluate(train);
        }
    }

    let result = if cfg.mode == Mode::Lse {
        let final_best = pop.best().clone();
        let polished = local_search::final_polish(&final_best, train, &cfg.local_search, &mut rng);
        log.ls_events.push(LsEvent {
            generation: pop.generation,
            kind: LsKind::Polish,
            individuals: 1,
            epochs: cfg.local_search.final_epochs,
            best_before: final_best.fitness_or_zero(),
            best_after: polished.fitness_or_zero(),
        });
        polished
    } else {
        best_of_run
    };
    log.train_time = start.elapsed();
    log.train_accuracy = result.fitness_or_zero();

    let t0 = Instant::now();
    log.test_accuracy = fitness(&result.tree, test);
    log.test_time_per_image = t0.elapsed() / test.len() as u32;
    Ok((result, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp_program::{Node, ProgramTree};
    use crate::image_ops::{AggStat, Filter, WindowSpec};

    fn ind(f: f64, extra_nodes: usize) -> Individual {
        let mut root = Node::agg(AggStat::Mean, Node::Input, WindowSpec::full());
        for _ in 0..extra_nodes {
            root = Node::arith(crate::gp_program::ArithOp::Add, root, Node::Const(0.0));
        }
        Individual {
            tree: ProgramTree::new(root),
            fitness: Some(f),
        }
    }

    #[test]
    fn confusion_accuracy() {
        let c = Confusion {
            tp: 3,
            tn: 2,
            fp: 1,
            fn_: 0,
        };
        assert!((c.accuracy() - 5.0 / 6.0).abs() < 1e-15);
        let c = Confusion::from_predictions(&[0, 0, 1, 1, 0], &[0, 1, 1, 0, 0]);
        assert_eq!(
            c,
            Confusion {
                tp: 2,
                tn: 1,
                fp: 1,
                fn_: 1
            }
        );
    }

    #[test]
    fn tournament_ties_prefer_smaller() {
        let inds = vec![ind(0.5, 2), ind(0.5, 0)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut wins = [0; 2];
        for _ in 0..1000 {
            wins[tournament_index(&inds, 7, &mut rng)] += 1;
        }
        // index 0 wins only when it is drawn all seven times
        assert!(wins[0] < 30, "{wins:?}");
    }

    #[test]
    fn tournament_k1_is_uniform() {
        let inds: Vec<_> = (0..4).map(|i| ind(i as f64 / 4.0, 0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[tournament_index(&inds, 1, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 1.0).abs() < 0.05, "{counts:?}");
        }
    }

    #[test]
    fn crossover_falls_back_to_parents() {
        // With depth pinned to 3, every swap between this depth-3 and
        // depth-2 pair leaves one offspring at depth 2, so all retries fail.
        let a = ProgramTree::new(Node::agg(
            AggStat::Mean,
            Node::convolve(Node::Input, Filter::filled(0.1)),
            WindowSpec::full(),
        ));
        let b = ProgramTree::new(Node::agg(AggStat::Max, Node::Input, WindowSpec::full()));
        let p = BreedParams {
            depth_min: 3,
            depth_max: 3,
            ..BreedParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert!(try_crossover(&a, &b, &mut rng, &p).is_none());
            assert_eq!(crossover(&a, &b, &mut rng, &p), (a.clone(), b.clone()));
        }
    }

    #[test]
    fn root_swap_keeps_double_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = generate(&mut rng, 2, 6);
            let b = generate(&mut rng, 2, 6);
            let (x, y) = crossover(&a, &b, &mut rng, &BreedParams::default());
            assert_eq!(x.root().output_type(), ValueType::Double);
            assert_eq!(y.root().output_type(), ValueType::Double);
        }
    }

    #[test]
    fn mutation_exceeding_cap_returns_parent() {
        let mut img = Node::Input;
        for _ in 0..8 {
            img = Node::pool(img);
        }
        let deep = ProgramTree::new(Node::agg(AggStat::Min, img, WindowSpec::full()));
        assert_eq!(deep.depth(), 10);
        let p = BreedParams {
            mutation_depth_min: 11,
            mutation_depth_max: 11,
            ..BreedParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // full-method subtrees of depth 11 at the deepest leaf never fit
        let mut rejected = 0;
        for _ in 0..100 {
            match mutate_at(&deep, 9, &mut rng, &p) {
                None => rejected += 1,
                Some(t) => assert!(t.depth() <= 10),
            }
        }
        assert!(rejected > 20);
        for _ in 0..100 {
            assert!(mutate(&deep, &mut rng, &p).validate(2, 10).is_ok());
        }
    }

    #[test]
    fn window_leaf_mutation_only_touches_window() {
        let t = ProgramTree::new(Node::agg(
            AggStat::Mean,
            Node::convolve(Node::Input, Filter::filled(0.1)),
            WindowSpec::full(),
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = mutate_at(&t, 4, &mut rng, &BreedParams::default()).unwrap();
        assert_ne!(out.subtree(4), t.subtree(4));
        assert!(matches!(out.subtree(4), Some(Node::Window(_))));
        assert_eq!(out.subtree(1), t.subtree(1));
    }

    #[test]
    fn operators_keep_trees_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = BreedParams::default();
        for _ in 0..1000 {
            let a = generate(&mut rng, 2, 8);
            let b = generate(&mut rng, 2, 8);
            let (x, y) = crossover(&a, &b, &mut rng, &p);
            x.validate(2, 10).unwrap();
            y.validate(2, 10).unwrap();
            mutate(&a, &mut rng, &p).validate(2, 10).unwrap();
        }
    }

    #[test]
    fn config_validation() {
        assert!(EvolutionConfig::default().validate().is_ok());
        let bad = EvolutionConfig {
            mutation_rate: 0.3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvolutionConfig {
            population_size: 5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EvolutionConfig {
            population_size: 20,
            mode: Mode::Ls,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("lse".parse::<Mode>().unwrap(), Mode::Lse);
        assert!("fast".parse::<Mode>().is_err());
    }
}
