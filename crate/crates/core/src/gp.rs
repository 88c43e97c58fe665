//! Genetic programming with strict offspring selection.
//!
//! Each offspring slot is filled by pairing a fitness-proportional parent
//! with a uniformly random one, applying subtree crossover, optional
//! mutation and constant refinement. A child enters the next generation
//! only if it beats the comparison threshold of its parents; every child,
//! accepted or not, counts toward the generation's selection pressure
//! `produced / (population_size - elites)`. The run stops at the end of the
//! first generation whose pressure reaches `max_selection_pressure`.
//!
//! Children are produced in fixed-size batches, each with its own seed
//! derived from `(seed, generation, child index)`, and accepted in index
//! order. Results therefore do not depend on the number of worker threads.

use std::time::Instant;

use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exprtree::{
    evaluate, linear_scale, mutate_rng, ramped, refine_constants, subtree_crossover_rng, Columns,
    ExpressionTree, Grammar, Limits, MutationOp, ScaledModel,
};
use crate::metrics::r2_unchecked;
use crate::{par, seed};

/// Smallest number of children produced per batch.
const MIN_BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    pub population_size: usize,
    pub mutation_rate: f64,
    pub max_selection_pressure: f64,
    pub max_tree_size: usize,
    pub max_tree_depth: usize,
    pub elites: usize,
    pub seed: u64,
    /// Threshold position between the worse (0) and better (1) parent.
    pub comparison_factor: f64,
    pub constant_opt_iterations: usize,
    /// Hard stop independent of selection pressure.
    pub max_generations: usize,
    /// Wall-clock budget, checked after each generation. Runs that stop on
    /// it are not reproducible across machines.
    pub max_seconds: Option<f64>,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population_size: 300,
            mutation_rate: 0.20,
            max_selection_pressure: 100.0,
            max_tree_size: 50,
            max_tree_depth: 30,
            elites: 1,
            seed: 0,
            comparison_factor: 1.0,
            constant_opt_iterations: 10,
            max_generations: 1000,
            max_seconds: None,
        }
    }
}

impl GpConfig {
    pub fn limits(&self) -> Limits {
        Limits {
            max_size: self.max_tree_size,
            max_depth: self.max_tree_depth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.population_size < 2 {
            return bad("population_size must be >= 2");
        }
        if self.elites >= self.population_size {
            return bad("elites must be < population_size");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("mutation_rate must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.comparison_factor) {
            return bad("comparison_factor must be in [0, 1]");
        }
        if !(self.max_selection_pressure >= 1.0) {
            return bad("max_selection_pressure must be >= 1");
        }
        if self.max_tree_size < 1 || self.max_tree_depth < 1 || self.max_generations < 1 {
            return bad("tree limits and max_generations must be >= 1");
        }
        if self.max_seconds.is_some_and(|s| !(s > 0.0)) {
            return bad("max_seconds must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub tree: ExpressionTree,
    pub fitness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    SelectionPressure,
    MaxGenerations,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct GpRunStats {
    pub generations: usize,
    pub selection_pressure: Vec<f64>,
    pub best_fitness: Vec<f64>,
    /// Initial population plus every child produced, accepted or not.
    pub evaluations: usize,
    pub wall_clock_secs: f64,
    pub termination: Termination,
}

/// Pearson R² between the tree's output and the targets (0 for constant output).
///
/// R² is invariant to the affine scaling applied afterwards, so this is also
/// the fitness of the linearly scaled model.
pub fn fitness(tree: &ExpressionTree, train: &Dataset) -> f64 {
    r2_unchecked(&evaluate(tree, train), train.targets())
}

struct Evaluator<'a> {
    cols: Columns,
    targets: &'a [f64],
    iterations: usize,
}

impl Evaluator<'_> {
    fn individual(&self, tree: ExpressionTree) -> Individual {
        let refined = refine_constants(&tree, &self.cols, self.targets, self.iterations);
        let fitness = r2_unchecked(&refined.predictions, self.targets);
        Individual {
            tree: refined.tree,
            fitness,
        }
    }
}

/// Fitness-proportional pick; uniform when every fitness is zero.
fn roulette<R: Rng>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().unwrap();
    if !(total > 0.0) {
        return rng.gen_range(0..cumulative.len());
    }
    let x = rng.gen_range(0.0..total);
    cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1)
}

fn best_index(pop: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.fitness > pop[best].fitness {
            best = i;
        }
    }
    best
}

/// Indices sorted by descending fitness, ties by position.
fn ranking(pop: &[Individual]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| pop[b].fitness.total_cmp(&pop[a].fitness).then(a.cmp(&b)));
    idx
}

/// Evolve a linearly scaled model on `train`.
pub fn run_gp(train: &Dataset, config: &GpConfig) -> Result<(ScaledModel, GpRunStats)> {
    config.validate()?;
    let started = Instant::now();
    let grammar = Grammar::full(train.n_features());
    let limits = config.limits();
    let eval = Evaluator {
        cols: Columns::from_dataset(train),
        targets: train.targets(),
        iterations: config.constant_opt_iterations,
    };

    let pop_size = config.population_size;
    let mut population: Vec<Individual> = par::map_range(pop_size, |i| {
        let mut rng = seed::rng(seed::derive(config.seed, &[0, i as u64]));
        eval.individual(ramped(&grammar, limits, &mut rng))
    });
    let mut evaluations = pop_size;
    let mut pressures = Vec::new();
    let mut best_history = vec![population[best_index(&population)].fitness];

    let slots = pop_size - config.elites;
    let cap = (config.max_selection_pressure * slots as f64).ceil() as usize;
    let mut termination = Termination::MaxGenerations;

    for gen in 1..=config.max_generations {
        let mut cumulative = Vec::with_capacity(pop_size);
        let mut acc = 0.0;
        for ind in &population {
            acc += ind.fitness.max(0.0);
            cumulative.push(acc);
        }

        let order = ranking(&population);
        let mut next: Vec<Individual> = order[..config.elites]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        let mut rejected: Vec<Individual> = Vec::new();
        let mut produced = 0usize;
        let mut child_index = 0u64;

        while next.len() < pop_size && produced < cap {
            let remaining = pop_size - next.len();
            let batch = remaining.max(MIN_BATCH).min(cap - produced);
            let pop_ref = &population;
            let cum_ref = &cumulative;
            let base = child_index;
            let children = par::map_range(batch, |k| {
                let mut rng = seed::rng(seed::derive(config.seed, &[gen as u64, base + k as u64]));
                let a = roulette(cum_ref, &mut rng);
                let b = rng.gen_range(0..pop_size);
                let (pa, pb) = (&pop_ref[a], &pop_ref[b]);
                let mut tree = subtree_crossover_rng(&pa.tree, &pb.tree, limits, &mut rng);
                if rng.gen_bool(config.mutation_rate) {
                    let op = MutationOp::ALL[rng.gen_range(0..MutationOp::ALL.len())];
                    tree = mutate_rng(&tree, op, &grammar, limits, &mut rng);
                }
                let child = eval.individual(tree);
                let (lo, hi) = if pa.fitness < pb.fitness {
                    (pa.fitness, pb.fitness)
                } else {
                    (pb.fitness, pa.fitness)
                };
                let threshold = lo + config.comparison_factor * (hi - lo);
                let accepted = child.fitness > threshold;
                (child, accepted)
            });
            child_index += batch as u64;
            for (child, accepted) in children {
                produced += 1;
                if accepted {
                    next.push(child);
                    if next.len() == pop_size {
                        break;
                    }
                } else {
                    rejected.push(child);
                }
            }
        }
        evaluations += produced;
        let pressure = produced as f64 / slots as f64;
        pressures.push(pressure);

        if next.len() < pop_size {
            // fill with the best rejected children, then the old population
            let rank = ranking(&rejected);
            let need = pop_size - next.len();
            let fill: Vec<Individual> = rank.iter().take(need).map(|&i| rejected[i].clone()).collect();
            next.extend(fill);
            let mut k = 0;
            while next.len() < pop_size {
                next.push(population[order[k % pop_size]].clone());
                k += 1;
            }
        }
        population = next;
        best_history.push(population[best_index(&population)].fitness);

        if pressure >= config.max_selection_pressure {
            termination = Termination::SelectionPressure;
            break;
        }
        if config
            .max_seconds
            .is_some_and(|limit| started.elapsed().as_secs_f64() >= limit)
        {
            termination = Termination::TimeLimit;
            break;
        }
    }

    let best = population.swap_remove(best_index(&population));
    let pred = evaluate(&best.tree, train);
    let (offset, slope) = linear_scale(&pred, train.targets());
    let stats = GpRunStats {
        generations: pressures.len(),
        selection_pressure: pressures,
        best_fitness: best_history,
        evaluations,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        termination,
    };
    Ok((
        ScaledModel {
            tree: best.tree,
            offset,
            slope,
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_data(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64 * 2.0 - 1.0]).collect();
        let ys = rows.iter().map(|r| 3.0 * r[0] + 2.0).collect();
        Dataset::from_rows(&rows, ys).unwrap()
    }

    #[test]
    fn fitness_rules() {
        let d = linear_data(20);
        assert!((fitness(&"x0".parse().unwrap(), &d) - 1.0).abs() < 1e-12);
        assert_eq!(fitness(&"4.0".parse().unwrap(), &d), 0.0);
        assert!((fitness(&"(+ (* 2.0 x0) 6.0)".parse().unwrap(), &d) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(GpConfig::default().validate().is_ok());
        let bad = GpConfig {
            mutation_rate: 1.5,
            ..GpConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GpConfig {
            max_selection_pressure: 0.5,
            ..GpConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn roulette_is_proportional() {
        let cum = [0.0, 1.0, 1.0, 4.0];
        let mut rng = seed::rng(1);
        let mut hits = [0usize; 4];
        for _ in 0..40_000 {
            hits[roulette(&cum, &mut rng)] += 1;
        }
        assert_eq!(hits[0], 0);
        assert_eq!(hits[2], 0);
        assert!((hits[3] as f64 / 40_000.0 - 0.75).abs() < 0.02);
    }

    #[test]
    fn pressure_one_stops_after_one_generation() {
        let d = linear_data(50);
        let cfg = GpConfig {
            population_size: 40,
            max_selection_pressure: 1.0,
            seed: 3,
            ..GpConfig::default()
        };
        let (_, stats) = run_gp(&d, &cfg).unwrap();
        assert_eq!(stats.generations, 1);
        assert_eq!(stats.termination, Termination::SelectionPressure);
        assert!(stats.evaluations <= 40 + 39);
    }

    #[test]
    fn small_run_invariants() {
        let d = linear_data(60);
        let cfg = GpConfig {
            population_size: 50,
            max_selection_pressure: 10.0,
            seed: 11,
            ..GpConfig::default()
        };
        let (model, stats) = run_gp(&d, &cfg).unwrap();
        assert!(model.tree.within(cfg.limits()));
        assert!(stats.best_fitness.windows(2).all(|w| w[1] >= w[0]));
        assert!(stats.selection_pressure.iter().all(|&p| p >= 1.0));
        let produced: f64 = stats.selection_pressure.iter().map(|p| p * 49.0).sum();
        assert_eq!(stats.evaluations, 50 + produced.round() as usize);
        let r2 = crate::metrics::pearson_r2(&model.predict(&d), d.targets()).unwrap();
        assert!(r2 > 0.999);
    }
}
