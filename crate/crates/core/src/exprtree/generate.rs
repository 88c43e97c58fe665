use rand::Rng;

use super::{ExpressionTree, Limits, Symbol};
use crate::seed;

/// Symbols available to the search.
#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    pub n_features: usize,
    pub binary: Vec<Symbol>,
    pub unary: Vec<Symbol>,
    /// Ephemeral random constants are drawn uniformly from this range.
    pub const_range: (f64, f64),
    /// Probability that a terminal is a variable rather than a constant.
    pub variable_prob: f64,
    /// Probability of stopping at a terminal before the depth bound.
    pub terminal_prob: f64,
}

impl Grammar {
    /// Arithmetic, trigonometric, `exp` and `log` over `n_features` inputs.
    pub fn full(n_features: usize) -> Self {
        Grammar {
            n_features,
            binary: Symbol::BINARY.to_vec(),
            unary: Symbol::UNARY.to_vec(),
            const_range: (-20.0, 20.0),
            variable_prob: 0.5,
            terminal_prob: 0.35,
        }
    }
}

pub fn random_terminal<R: Rng>(grammar: &Grammar, rng: &mut R) -> Symbol {
    if grammar.n_features > 0 && rng.gen_bool(grammar.variable_prob) {
        Symbol::Var(rng.gen_range(0..grammar.n_features) as u32)
    } else {
        let (lo, hi) = grammar.const_range;
        Symbol::Const(rng.gen_range(lo..hi))
    }
}

/// Grow a random tree of at most `max_size` nodes and `max_depth` levels.
///
/// Below the depth bound each node is a terminal with probability
/// `terminal_prob`, otherwise a random function that still fits the node
/// budget.
pub fn grow<R: Rng>(grammar: &Grammar, max_size: usize, max_depth: usize, rng: &mut R) -> ExpressionTree {
    let mut nodes = Vec::new();
    grow_into(grammar, max_size.max(1), max_depth.max(1), rng, &mut nodes);
    ExpressionTree::from_nodes_unchecked(nodes)
}

fn grow_into<R: Rng>(
    grammar: &Grammar,
    budget: usize,
    depth_left: usize,
    rng: &mut R,
    out: &mut Vec<Symbol>,
) -> usize {
    let can_unary = budget >= 2 && !grammar.unary.is_empty();
    let can_binary = budget >= 3 && !grammar.binary.is_empty();
    if depth_left <= 1 || !(can_unary || can_binary) || rng.gen_bool(grammar.terminal_prob) {
        out.push(random_terminal(grammar, rng));
        return 1;
    }
    let n_bin = if can_binary { grammar.binary.len() } else { 0 };
    let n_un = if can_unary { grammar.unary.len() } else { 0 };
    let pick = rng.gen_range(0..n_bin + n_un);
    if pick < n_bin {
        out.push(grammar.binary[pick]);
        let left = grow_into(grammar, budget - 2, depth_left - 1, rng, out);
        let right = grow_into(grammar, budget - 1 - left, depth_left - 1, rng, out);
        1 + left + right
    } else {
        out.push(grammar.unary[pick - n_bin]);
        1 + grow_into(grammar, budget - 1, depth_left - 1, rng, out)
    }
}

/// Seeded [`grow`].
pub fn random_tree(grammar: &Grammar, max_size: usize, max_depth: usize, seed: u64) -> ExpressionTree {
    grow(grammar, max_size, max_depth, &mut seed::rng(seed))
}

/// Ramped initialization: depth bound uniform in `[2, 8]` (capped by the limits).
pub(crate) fn ramped<R: Rng>(grammar: &Grammar, limits: Limits, rng: &mut R) -> ExpressionTree {
    let hi = limits.max_depth.min(8);
    let depth = if hi <= 2 { hi } else { rng.gen_range(2..=hi) };
    grow(grammar, limits.max_size, depth, rng)
}
