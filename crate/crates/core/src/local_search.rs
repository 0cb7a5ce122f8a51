//! Mini-batch SGD over convolution filters, and the policies deciding
//! which individuals get tuned and when.
//!
//! Tuning is Lamarckian: the learned coefficients are written back into the
//! tree and inherited by offspring.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Sample;
use crate::evolution::{fitness, Population};
use crate::gp_program::{evaluate, sigmoid, Individual, ProgramTree};
use crate::grad_engine::{self, ce_loss, target_for_label, AggGradMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSearchConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Batch size as a fraction of the training set.
    pub batch_fraction: f64,
    /// Number of fittest individuals tuned at each application.
    pub top_k: usize,
    /// Generations between applications; generation 0 always qualifies.
    pub period: usize,
    /// Epochs of the final polish of the best individual.
    pub final_epochs: usize,
    pub agg_grad: AggGradMode,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 0.5,
            batch_fraction: 0.10,
            top_k: 25,
            period: 10,
            final_epochs: 100,
            agg_grad: AggGradMode::PassThrough,
        }
    }
}

impl LocalSearchConfig {
    pub fn validate(&self, population_size: usize) -> Result<(), String> {
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(format!(
                "batch fraction {} outside (0, 1]",
                self.batch_fraction
            ));
        }
        if self.epochs == 0 || self.final_epochs == 0 {
            return Err("epoch counts must be positive".into());
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        if self.period == 0 {
            return Err("local search period must be positive".into());
        }
        if self.top_k > population_size {
            return Err(format!(
                "top-k {} exceeds population size {population_size}",
                self.top_k
            ));
        }
        Ok(())
    }
}

pub fn batch_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction + 0.5).floor() as usize).clamp(1, n.max(1))
}

/// Mean clamped cross-entropy of the tree over `data`. Images the tree
/// cannot evaluate are skipped; `None` if none can be evaluated.
pub fn mean_loss(tree: &ProgramTree, data: &[Sample]) -> Option<f64> {
    let losses: Vec<f64> = data
        .iter()
        .filter_map(|s| {
            evaluate(tree, &s.image)
                .ok()
                .map(|x| ce_loss(sigmoid(x), target_for_label(s.label)))
        })
        .collect();
    if losses.is_empty() {
        None
    } else {
        Some(losses.iter().sum::<f64>() / losses.len() as f64)
    }
}

/// Runs `cfg.epochs` epochs of mini-batch SGD and returns the tuned copy.
pub fn sgd<R: Rng + ?Sized>(
    tree: &ProgramTree,
    train: &[Sample],
    cfg: &LocalSearchConfig,
    rng: &mut R,
) -> ProgramTree {
    sgd_epochs(tree, train, cfg, cfg.epochs, rng)
}

pub fn sgd_epochs<R: Rng + ?Sized>(
    tree: &ProgramTree,
    train: &[Sample],
    cfg: &LocalSearchConfig,
    epochs: usize,
    rng: &mut R,
) -> ProgramTree {
    let mut tuned = tree.clone();
    let n_filters = tuned.count_convolutions();
    if n_filters == 0 || train.is_empty() {
        return tuned;
    }
    let bs = batch_size(train.len(), cfg.batch_fraction);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for _ in 0..epochs {
        order.shuffle(rng);
        for batch in order.chunks(bs) {
            let mut sum = vec![[[0.0f64; 3]; 3]; n_filters];
            let mut used = 0usize;
            for &i in batch {
                let s = &train[i];
                let Ok(g) = grad_engine::gradients(
                    &tuned,
                    &s.image,
                    target_for_label(s.label),
                    cfg.agg_grad,
                ) else {
                    continue;
                };
                if !g.is_finite() {
                    continue;
                }
                for (acc, e) in sum.iter_mut().zip(&g.entries) {
                    for (ar, gr) in acc.iter_mut().zip(&e.grad) {
                        for (a, v) in ar.iter_mut().zip(gr) {
                            *a += v;
                        }
                    }
                }
                used += 1;
            }
            if used == 0 {
                continue;
            }
            let step = cfg.learning_rate / used as f64;
            for (f, g) in tuned.filters_mut().into_iter().zip(&sum) {
                for (fr, gr) in f.0.iter_mut().zip(g) {
                    for (w, v) in fr.iter_mut().zip(gr) {
                        *w -= step * v;
                    }
                }
            }
        }
    }
    tuned
}

pub fn should_run_ls(generation: usize, cfg: &LocalSearchConfig) -> bool {
    generation.is_multiple_of(cfg.period)
}

/// Indices of the `k` fittest individuals: fitness descending, then fewer
/// nodes, then population order.
pub fn elite_indices(individuals: &[Individual], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..individuals.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ia, ib) = (&individuals[a], &individuals[b]);
        ib.fitness_or_zero()
            .partial_cmp(&ia.fitness_or_zero())
            .unwrap_or(Ordering::Equal)
            .then(ia.tree.node_count().cmp(&ib.tree.node_count()))
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Tunes the `top_k` fittest individuals and refreshes their fitness.
/// Individuals are chosen once up front and tuned independently.
pub fn apply_ls_to_elite<R: Rng + ?Sized>(
    mut pop: Population,
    train: &[Sample],
    cfg: &LocalSearchConfig,
    rng: &mut R,
) -> Population {
    let elite = elite_indices(&pop.individuals, cfg.top_k.min(pop.individuals.len()));
    let jobs: Vec<(usize, u64)> = elite.into_iter().map(|i| (i, rng.gen())).collect();
    let tuned: Vec<(usize, Individual)> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let mut local = ChaCha8Rng::seed_from_u64(seed);
            let ind = &pop.individuals[i];
            if ind.tree.count_convolutions() == 0 {
                return (i, ind.clone());
            }
            let tree = sgd(&ind.tree, train, cfg, &mut local);
            let f = fitness(&tree, train);
            (
                i,
                Individual {
                    tree,
                    fitness: Some(f),
                },
            )
        })
        .collect();
    for (i, ind) in tuned {
        pop.individuals[i] = ind;
    }
    pop
}

/// Extended tuning of the final best individual, using `final_epochs`.
pub fn final_polish<R: Rng + ?Sized>(
    best: &Individual,
    train: &[Sample],
    cfg: &LocalSearchConfig,
    rng: &mut R,
) -> Individual {
    if best.tree.count_convolutions() == 0 {
        return best.clone();
    }
    let tree = sgd_epochs(&best.tree, train, cfg, cfg.final_epochs, rng);
    let f = fitness(&tree, train);
    Individual {
        tree,
        fitness: Some(f),
    }
}
