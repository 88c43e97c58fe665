//! Symbolic-regression expression trees.
//!
//! A tree is stored as its nodes in prefix order. A node's first child sits
//! right after it; the second child starts where the first child's subtree
//! ends. All structural edits are slice splices on that vector.

mod constopt;
mod eval;
mod generate;
mod text;
mod variation;

use std::fmt;

pub use constopt::{linear_scale, optimize_constants, refine_constants, scaled_mse, Refined};
pub use eval::{evaluate, evaluate_columns, jacobian, Columns, Program, MAX_ABS};
pub use generate::{grow, random_terminal, random_tree, Grammar};
pub(crate) use generate::ramped;
pub(crate) use variation::{mutate_rng, subtree_crossover_rng};
pub use variation::{crossover_at, mutate, subtree_crossover, MutationOp};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// One grammar symbol. Operators carry no payload; terminals carry a
/// feature index or a constant value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symbol {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Var(u32),
    Const(f64),
}

impl Symbol {
    pub const BINARY: [Symbol; 4] = [Symbol::Add, Symbol::Sub, Symbol::Mul, Symbol::Div];
    pub const UNARY: [Symbol; 5] = [Symbol::Sin, Symbol::Cos, Symbol::Tan, Symbol::Exp, Symbol::Log];

    pub fn arity(self) -> usize {
        match self {
            Symbol::Add | Symbol::Sub | Symbol::Mul | Symbol::Div => 2,
            Symbol::Sin | Symbol::Cos | Symbol::Tan | Symbol::Exp | Symbol::Log => 1,
            Symbol::Var(_) | Symbol::Const(_) => 0,
        }
    }

    pub fn is_terminal(self) -> bool {
        self.arity() == 0
    }

    pub fn is_const(self) -> bool {
        matches!(self, Symbol::Const(_))
    }

    /// Operator name in the prefix text form.
    pub fn op_name(self) -> Option<&'static str> {
        Some(match self {
            Symbol::Add => "+",
            Symbol::Sub => "-",
            Symbol::Mul => "*",
            Symbol::Div => "/",
            Symbol::Sin => "sin",
            Symbol::Cos => "cos",
            Symbol::Tan => "tan",
            Symbol::Exp => "exp",
            Symbol::Log => "log",
            Symbol::Var(_) | Symbol::Const(_) => return None,
        })
    }

    /// Same symbol kind, ignoring constant values.
    pub fn same_kind(self, other: Symbol) -> bool {
        match (self, other) {
            (Symbol::Const(_), Symbol::Const(_)) => true,
            (a, b) => a == b,
        }
    }
}

/// Size and depth bounds. Depth counts the root as 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_size: usize,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_size: 50,
            max_depth: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionTree {
    nodes: Vec<Symbol>,
}

impl ExpressionTree {
    /// Validate arity and wrap a prefix-ordered node list.
    pub fn from_prefix(nodes: Vec<Symbol>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Parse("empty tree".into()));
        }
        let mut need = 1usize;
        for (i, s) in nodes.iter().enumerate() {
            if need == 0 {
                return Err(Error::Parse(format!("trailing nodes after position {i}")));
            }
            need = need - 1 + s.arity();
        }
        if need != 0 {
            return Err(Error::Parse(format!("{need} missing operand(s)")));
        }
        Ok(Self { nodes })
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<Symbol>) -> Self {
        debug_assert!(Self::from_prefix(nodes.clone()).is_ok());
        Self { nodes }
    }

    pub fn leaf(s: Symbol) -> Self {
        assert!(s.is_terminal());
        Self { nodes: vec![s] }
    }

    pub fn nodes(&self) -> &[Symbol] {
        &self.nodes
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// Longest root-to-leaf path, in nodes.
    pub fn depth(&self) -> usize {
        self.levels().into_iter().max().unwrap_or(0)
    }

    /// Depth of every node (root = 1), in prefix order.
    pub fn levels(&self) -> Vec<usize> {
        let mut levels = Vec::with_capacity(self.nodes.len());
        // remaining children of each open ancestor, with its level
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for s in &self.nodes {
            let level = stack.last().map_or(1, |&(_, l)| l + 1);
            levels.push(level);
            if let Some(top) = stack.last_mut() {
                top.0 -= 1;
            }
            while matches!(stack.last(), Some(&(0, _))) {
                stack.pop();
            }
            if s.arity() > 0 {
                stack.push((s.arity(), level));
            }
        }
        levels
    }

    /// One past the last node of the subtree rooted at `i`.
    pub fn subtree_end(&self, i: usize) -> usize {
        let mut need = 1usize;
        let mut j = i;
        while need > 0 {
            need = need - 1 + self.nodes[j].arity();
            j += 1;
        }
        j
    }

    pub fn subtree(&self, i: usize) -> &[Symbol] {
        &self.nodes[i..self.subtree_end(i)]
    }

    /// Depth of the subtree rooted at `i`.
    pub fn subtree_depth(&self, i: usize) -> usize {
        ExpressionTree::from_nodes_unchecked(self.subtree(i).to_vec()).depth()
    }

    /// Copy with the subtree at `i` replaced by `replacement`.
    pub fn replace_subtree(&self, i: usize, replacement: &[Symbol]) -> ExpressionTree {
        let end = self.subtree_end(i);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - i) + replacement.len());
        nodes.extend_from_slice(&self.nodes[..i]);
        nodes.extend_from_slice(replacement);
        nodes.extend_from_slice(&self.nodes[end..]);
        ExpressionTree::from_nodes_unchecked(nodes)
    }

    pub fn within(&self, limits: Limits) -> bool {
        self.size() <= limits.max_size && self.depth() <= limits.max_depth
    }

    /// Positions of constant leaves, in prefix order.
    pub fn constant_positions(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_const())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn constants(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|s| match s {
                Symbol::Const(c) => Some(*c),
                _ => None,
            })
            .collect()
    }

    /// Copy with constant leaves overwritten in prefix order.
    pub fn with_constants(&self, values: &[f64]) -> ExpressionTree {
        let mut it = values.iter();
        let nodes = self
            .nodes
            .iter()
            .map(|&s| match s {
                Symbol::Const(_) => Symbol::Const(*it.next().expect("too few constants")),
                other => other,
            })
            .collect();
        ExpressionTree { nodes }
    }

    pub fn max_variable(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|s| match s {
                Symbol::Var(v) => Some(*v as usize),
                _ => None,
            })
            .max()
    }

    /// Check every variable index against `n_features`.
    pub fn check_variables(&self, n_features: usize) -> Result<()> {
        match self.max_variable() {
            Some(v) if v >= n_features => Err(Error::OutOfRange {
                what: "variable index",
                value: v,
                range: format!("0..{n_features}"),
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ExpressionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&text::to_prefix(self))
    }
}

impl std::str::FromStr for ExpressionTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        text::parse_prefix(s)
    }
}

/// A tree with explicit linear scaling: `offset + slope * tree(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledModel {
    pub tree: ExpressionTree,
    pub offset: f64,
    pub slope: f64,
}

impl ScaledModel {
    /// Fit offset and slope to `data` by least squares.
    pub fn fit(tree: ExpressionTree, data: &Dataset) -> ScaledModel {
        let pred = evaluate(&tree, data);
        let (offset, slope) = linear_scale(&pred, data.targets());
        ScaledModel { tree, offset, slope }
    }

    pub fn predict(&self, data: &Dataset) -> Vec<f64> {
        evaluate(&self.tree, data)
            .into_iter()
            .map(|v| self.offset + self.slope * v)
            .collect()
    }
}

impl fmt::Display for ScaledModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.tree)?;
        writeln!(f, "a = {:?}", self.offset)?;
        write!(f, "b = {:?}", self.slope)
    }
}
