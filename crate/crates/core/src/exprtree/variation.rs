//! Subtree crossover and the five mutation operators.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::generate::{grow, random_terminal, Grammar};
use super::{ExpressionTree, Limits, Symbol};
use crate::seed;

/// Attempts at finding a limit-respecting crossover before copying parent 1.
pub const CROSSOVER_RETRIES: usize = 10;
/// Probability of picking a function node as crossover point when one exists.
const INTERNAL_POINT_PROB: f64 = 0.9;

const POINT_SIGMA: f64 = 1.0;
const SHAKE_SIGMA: f64 = 0.5;

/// Replace the subtree of `p1` at `i` with the subtree of `p2` at `j`.
pub fn crossover_at(p1: &ExpressionTree, i: usize, p2: &ExpressionTree, j: usize) -> ExpressionTree {
    p1.replace_subtree(i, p2.subtree(j))
}

fn pick_point<R: Rng>(tree: &ExpressionTree, rng: &mut R) -> usize {
    let nodes = tree.nodes();
    let n_internal = nodes.iter().filter(|s| !s.is_terminal()).count();
    if n_internal > 0 && rng.gen_bool(INTERNAL_POINT_PROB) {
        let k = rng.gen_range(0..n_internal);
        nodes.iter().enumerate().filter(|(_, s)| !s.is_terminal()).nth(k).unwrap().0
    } else {
        let n_leaves = nodes.len() - n_internal;
        let k = rng.gen_range(0..n_leaves);
        nodes.iter().enumerate().filter(|(_, s)| s.is_terminal()).nth(k).unwrap().0
    }
}

/// Subtree-swapping crossover with bounded retries.
pub fn subtree_crossover_rng<R: Rng>(
    p1: &ExpressionTree,
    p2: &ExpressionTree,
    limits: Limits,
    rng: &mut R,
) -> ExpressionTree {
    let levels = p1.levels();
    for _ in 0..CROSSOVER_RETRIES {
        let i = pick_point(p1, rng);
        let j = pick_point(p2, rng);
        let removed = p1.subtree_end(i) - i;
        let inserted = p2.subtree_end(j) - j;
        if p1.size() - removed + inserted > limits.max_size {
            continue;
        }
        if levels[i] - 1 + p2.subtree_depth(j) > limits.max_depth {
            continue;
        }
        return crossover_at(p1, i, p2, j);
    }
    p1.clone()
}

pub fn subtree_crossover(p1: &ExpressionTree, p2: &ExpressionTree, limits: Limits, seed: u64) -> ExpressionTree {
    subtree_crossover_rng(p1, p2, limits, &mut seed::rng(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationOp {
    /// Gaussian nudge of one constant.
    Point,
    /// Gaussian nudge of every constant.
    Shake,
    /// Swap one operator for another of the same arity, or one variable for another.
    ChangeSymbol,
    /// Regrow a random subtree.
    ReplaceBranch,
    /// Collapse a random non-root subtree to a terminal.
    RemoveBranch,
}

impl MutationOp {
    pub const ALL: [MutationOp; 5] = [
        MutationOp::Point,
        MutationOp::Shake,
        MutationOp::ChangeSymbol,
        MutationOp::ReplaceBranch,
        MutationOp::RemoveBranch,
    ];
}

pub(crate) fn mutate_rng<R: Rng>(
    tree: &ExpressionTree,
    op: MutationOp,
    grammar: &Grammar,
    limits: Limits,
    rng: &mut R,
) -> ExpressionTree {
    match op {
        MutationOp::Point => {
            let pos = tree.constant_positions();
            if pos.is_empty() {
                return tree.clone();
            }
            let p = pos[rng.gen_range(0..pos.len())];
            let mut nodes = tree.nodes().to_vec();
            if let Symbol::Const(c) = nodes[p] {
                nodes[p] = Symbol::Const(c + POINT_SIGMA * standard_normal(rng));
            }
            ExpressionTree::from_nodes_unchecked(nodes)
        }
        MutationOp::Shake => {
            let nodes = tree
                .nodes()
                .iter()
                .map(|&s| match s {
                    Symbol::Const(c) => Symbol::Const(c + SHAKE_SIGMA * standard_normal(rng)),
                    other => other,
                })
                .collect();
            ExpressionTree::from_nodes_unchecked(nodes)
        }
        MutationOp::ChangeSymbol => {
            let alternatives = |s: Symbol| -> Vec<Symbol> {
                match s {
                    Symbol::Var(v) => (0..grammar.n_features as u32)
                        .filter(|&w| w != v)
                        .map(Symbol::Var)
                        .collect(),
                    Symbol::Const(_) => Vec::new(),
                    op if op.arity() == 2 => grammar.binary.iter().copied().filter(|&o| o != op).collect(),
                    op => grammar.unary.iter().copied().filter(|&o| o != op).collect(),
                }
            };
            let candidates: Vec<usize> = (0..tree.size())
                .filter(|&i| !alternatives(tree.nodes()[i]).is_empty())
                .collect();
            if candidates.is_empty() {
                return tree.clone();
            }
            let i = candidates[rng.gen_range(0..candidates.len())];
            let alts = alternatives(tree.nodes()[i]);
            let mut nodes = tree.nodes().to_vec();
            nodes[i] = alts[rng.gen_range(0..alts.len())];
            ExpressionTree::from_nodes_unchecked(nodes)
        }
        MutationOp::ReplaceBranch => {
            let i = rng.gen_range(0..tree.size());
            let removed = tree.subtree_end(i) - i;
            let level = tree.levels()[i];
            let budget = limits.max_size - (tree.size() - removed);
            let depth = (limits.max_depth + 1 - level).min(rng.gen_range(1..=8));
            let fresh = grow(grammar, budget, depth, rng);
            tree.replace_subtree(i, fresh.nodes())
        }
        MutationOp::RemoveBranch => {
            if tree.size() == 1 {
                return tree.clone();
            }
            let i = rng.gen_range(1..tree.size());
            tree.replace_subtree(i, &[random_terminal(grammar, rng)])
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(rng)
}

/// Apply `op` to `tree`; the result always respects `limits` when `tree` does.
pub fn mutate(tree: &ExpressionTree, op: MutationOp, grammar: &Grammar, limits: Limits, seed: u64) -> ExpressionTree {
    mutate_rng(tree, op, grammar, limits, &mut seed::rng(seed))
}
