//! Protected, chunked tree evaluation and reverse-mode constant gradients.
//!
//! Protection rules, applied at every node:
//! - `a / 0 = 0`
//! - `log(a) = ln(|a| + 1e-12)`
//! - `tan` is clamped to `±1e12`
//! - `exp` clamps its argument to `±700`
//! - every node output is clamped to `±MAX_ABS` (NaN becomes 0)
//!
//! With finite inputs, outputs are therefore always finite.

use super::{ExpressionTree, Symbol};
use crate::dataset::Dataset;

/// Magnitude bound applied to every node output.
pub const MAX_ABS: f64 = 1e150;
const LOG_EPS: f64 = 1e-12;
const TAN_MAX: f64 = 1e12;
const EXP_MAX_ARG: f64 = 700.0;
const CHUNK: usize = 64;

#[inline(always)]
fn guard(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-MAX_ABS, MAX_ABS)
    }
}

#[inline(always)]
fn pdiv(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

#[inline(always)]
fn plog(a: f64) -> f64 {
    (a.abs() + LOG_EPS).ln()
}

#[inline(always)]
fn ptan(a: f64) -> f64 {
    a.tan().clamp(-TAN_MAX, TAN_MAX)
}

#[inline(always)]
fn pexp(a: f64) -> f64 {
    a.clamp(-EXP_MAX_ARG, EXP_MAX_ARG).exp()
}

/// Column-major view of a feature matrix.
#[derive(Debug, Clone)]
pub struct Columns {
    cols: Vec<Vec<f64>>,
    n_rows: usize,
}

impl Columns {
    pub fn from_dataset(data: &Dataset) -> Self {
        Columns {
            cols: data.columns(),
            n_rows: data.n_rows(),
        }
    }

    pub fn from_columns(cols: Vec<Vec<f64>>) -> Self {
        let n_rows = cols.first().map_or(0, Vec::len);
        assert!(cols.iter().all(|c| c.len() == n_rows));
        Columns { cols, n_rows }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }
}

/// Scalar forward rule, shared by constant folding.
#[inline(always)]
fn apply(op: Symbol, a: f64, b: f64) -> f64 {
    match op {
        Symbol::Add => guard(a + b),
        Symbol::Sub => guard(a - b),
        Symbol::Mul => guard(a * b),
        Symbol::Div => guard(pdiv(a, b)),
        Symbol::Sin => a.sin(),
        Symbol::Cos => a.cos(),
        Symbol::Tan => ptan(a),
        Symbol::Exp => guard(pexp(a)),
        Symbol::Log => plog(a),
        Symbol::Const(c) => c,
        Symbol::Var(_) => unreachable!(),
    }
}

/// Local partial derivatives `(∂v/∂a, ∂v/∂b)` of node output `v = op(a, b)`.
#[inline(always)]
fn local_grad(op: Symbol, v: f64, a: f64, b: f64) -> (f64, f64) {
    if v.abs() >= MAX_ABS {
        return (0.0, 0.0);
    }
    match op {
        Symbol::Add => (1.0, 1.0),
        Symbol::Sub => (1.0, -1.0),
        Symbol::Mul => (b, a),
        Symbol::Div => {
            if b == 0.0 {
                (0.0, 0.0)
            } else {
                (1.0 / b, -v / b)
            }
        }
        Symbol::Sin => (a.cos(), 0.0),
        Symbol::Cos => (-a.sin(), 0.0),
        Symbol::Tan => {
            if v.abs() >= TAN_MAX {
                (0.0, 0.0)
            } else {
                (1.0 + v * v, 0.0)
            }
        }
        Symbol::Exp => {
            if a.abs() > EXP_MAX_ARG {
                (0.0, 0.0)
            } else {
                (v, 0.0)
            }
        }
        Symbol::Log => {
            if a == 0.0 {
                (0.0, 0.0)
            } else {
                (a.signum() / (a.abs() + LOG_EPS), 0.0)
            }
        }
        Symbol::Var(_) | Symbol::Const(_) => (0.0, 0.0),
    }
}

// Called with a literal `op` so the match in `local_grad` folds away.
#[inline(always)]
fn unary_adjoint(op: Symbol, up: &[f64], v: &[f64], a: &[f64], d0: &mut [f64]) {
    for k in 0..d0.len() {
        d0[k] = up[k] * local_grad(op, v[k], a[k], 0.0).0;
    }
}

#[inline(always)]
fn binary_adjoint(op: Symbol, up: &[f64], v: &[f64], a: &[f64], b: &[f64], d0: &mut [f64], d1: &mut [f64]) {
    for k in 0..d0.len() {
        let (l0, l1) = local_grad(op, v[k], a[k], b[k]);
        d0[k] = up[k] * l0;
        d1[k] = up[k] * l1;
    }
}

/// A tree prepared for repeated evaluation.
///
/// Subtrees without variables are folded to a scalar once per call instead
/// of once per row; their constants' gradients are scaled through the
/// folded root.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Symbol>,
    second: Vec<u32>,
    const_pos: Vec<usize>,
    /// Node's subtree has no variables.
    folded: Vec<bool>,
    /// Node is the root of a maximal variable-free subtree.
    fold_root: Vec<bool>,
    /// For each constant leaf, the maximal folded root above it.
    const_root: Vec<usize>,
}

impl Program {
    pub fn new(tree: &ExpressionTree) -> Self {
        let ops = tree.nodes().to_vec();
        let second: Vec<u32> = (0..ops.len())
            .map(|i| {
                if ops[i].arity() == 2 {
                    tree.subtree_end(i + 1) as u32
                } else {
                    0
                }
            })
            .collect();
        let n = ops.len();
        let mut folded = vec![false; n];
        for i in (0..n).rev() {
            folded[i] = match ops[i] {
                Symbol::Var(_) => false,
                Symbol::Const(_) => true,
                op if op.arity() == 1 => folded[i + 1],
                _ => folded[i + 1] && folded[second[i] as usize],
            };
        }
        let mut fold_root = vec![false; n];
        let mut root_of = vec![usize::MAX; n];
        for i in 0..n {
            if folded[i] && root_of[i] == usize::MAX {
                fold_root[i] = true;
                root_of[i] = i;
            }
            if folded[i] {
                let end = tree.subtree_end(i);
                let root = root_of[i];
                for r in &mut root_of[i + 1..end] {
                    if *r == usize::MAX {
                        *r = root;
                    }
                }
            }
        }
        let const_pos = tree.constant_positions();
        let const_root = const_pos.iter().map(|&p| root_of[p]).collect();
        Program {
            ops,
            second,
            const_pos,
            folded,
            fold_root,
            const_root,
        }
    }

    /// Scalar values of every variable-free node.
    fn fold(&self) -> Vec<f64> {
        let n = self.ops.len();
        let mut sval = vec![0.0; n];
        for i in (0..n).rev() {
            if !self.folded[i] {
                continue;
            }
            let op = self.ops[i];
            let a = if op.arity() >= 1 { sval[i + 1] } else { 0.0 };
            let b = if op.arity() == 2 { sval[self.second[i] as usize] } else { 0.0 };
            sval[i] = apply(op, a, b);
        }
        sval
    }

    /// `∂(folded root)/∂node` for every node inside a folded subtree.
    fn fold_gradients(&self, sval: &[f64]) -> Vec<f64> {
        let n = self.ops.len();
        let mut sadj = vec![0.0; n];
        for i in 0..n {
            if !self.folded[i] {
                continue;
            }
            if self.fold_root[i] {
                sadj[i] = 1.0;
            }
            let op = self.ops[i];
            if op.is_terminal() {
                continue;
            }
            let a = sval[i + 1];
            let s = self.second[i] as usize;
            let b = if op.arity() == 2 { sval[s] } else { 0.0 };
            let (g0, g1) = local_grad(op, sval[i], a, b);
            sadj[i + 1] = sadj[i] * g0;
            if op.arity() == 2 {
                sadj[s] = sadj[i] * g1;
            }
        }
        sadj
    }

    pub fn n_constants(&self) -> usize {
        self.const_pos.len()
    }

    /// Overwrite constant values in place (prefix order).
    pub fn set_constants(&mut self, values: &[f64]) {
        for (&p, &v) in self.const_pos.iter().zip(values) {
            self.ops[p] = Symbol::Const(v);
        }
    }

    fn forward_chunk(&self, cols: &Columns, sval: &[f64], start: usize, len: usize, buf: &mut [f64]) {
        let n = self.ops.len();
        for i in (0..n).rev() {
            if self.folded[i] {
                if self.fold_root[i] {
                    buf[i * CHUNK..i * CHUNK + len].fill(sval[i]);
                }
                continue;
            }
            let (lo, hi) = buf.split_at_mut((i + 1) * CHUNK);
            let out = &mut lo[i * CHUNK..i * CHUNK + len];
            let a = &hi[..len.min(hi.len())];
            match self.ops[i] {
                Symbol::Var(v) => out.copy_from_slice(&cols.cols[v as usize][start..start + len]),
                Symbol::Const(c) => out.fill(c),
                Symbol::Sin => out.iter_mut().zip(a).for_each(|(o, &x)| *o = x.sin()),
                Symbol::Cos => out.iter_mut().zip(a).for_each(|(o, &x)| *o = x.cos()),
                Symbol::Tan => out.iter_mut().zip(a).for_each(|(o, &x)| *o = ptan(x)),
                Symbol::Exp => out.iter_mut().zip(a).for_each(|(o, &x)| *o = guard(pexp(x))),
                Symbol::Log => out.iter_mut().zip(a).for_each(|(o, &x)| *o = plog(x)),
                op => {
                    let off = (self.second[i] as usize - i - 1) * CHUNK;
                    let b = &hi[off..off + len];
                    let it = out.iter_mut().zip(a.iter().zip(b));
                    match op {
                        Symbol::Add => it.for_each(|(o, (&x, &y))| *o = guard(x + y)),
                        Symbol::Sub => it.for_each(|(o, (&x, &y))| *o = guard(x - y)),
                        Symbol::Mul => it.for_each(|(o, (&x, &y))| *o = guard(x * y)),
                        Symbol::Div => it.for_each(|(o, (&x, &y))| *o = guard(pdiv(x, y))),
                        _ => unreachable!(),
                    }
                }
            }
        }
    }

    /// Adjoint of every non-folded node and folded root w.r.t. the tree
    /// root, given forward values `val`.
    fn backward_chunk(&self, len: usize, val: &[f64], adj: &mut [f64]) {
        adj[..len].fill(1.0);
        for i in 0..self.ops.len() {
            let op = self.ops[i];
            if op.is_terminal() || self.folded[i] {
                continue;
            }
            let c0 = i + 1;
            let (lo, hi) = adj.split_at_mut(c0 * CHUNK);
            let up = &lo[i * CHUNK..i * CHUNK + len];
            let v = &val[i * CHUNK..i * CHUNK + len];
            let a = &val[c0 * CHUNK..c0 * CHUNK + len];
            if op.arity() == 1 {
                let d0 = &mut hi[..len];
                match op {
                    Symbol::Sin => unary_adjoint(Symbol::Sin, up, v, a, d0),
                    Symbol::Cos => unary_adjoint(Symbol::Cos, up, v, a, d0),
                    Symbol::Tan => unary_adjoint(Symbol::Tan, up, v, a, d0),
                    Symbol::Exp => unary_adjoint(Symbol::Exp, up, v, a, d0),
                    _ => unary_adjoint(Symbol::Log, up, v, a, d0),
                }
            } else {
                let s = self.second[i] as usize;
                let b = &val[s * CHUNK..s * CHUNK + len];
                let (d0, rest) = hi.split_at_mut((s - c0) * CHUNK);
                let (d0, d1) = (&mut d0[..len], &mut rest[..len]);
                match op {
                    Symbol::Add => binary_adjoint(Symbol::Add, up, v, a, b, d0, d1),
                    Symbol::Sub => binary_adjoint(Symbol::Sub, up, v, a, b, d0, d1),
                    Symbol::Mul => binary_adjoint(Symbol::Mul, up, v, a, b, d0, d1),
                    _ => binary_adjoint(Symbol::Div, up, v, a, b, d0, d1),
                }
            }
        }
    }

    fn scratch(&self) -> Vec<f64> {
        vec![0.0; self.ops.len() * CHUNK]
    }

    /// Root values for every row.
    pub fn eval(&self, cols: &Columns) -> Vec<f64> {
        let mut out = Vec::with_capacity(cols.n_rows);
        let mut buf = self.scratch();
        let sval = self.fold();
        let mut start = 0;
        while start < cols.n_rows {
            let len = CHUNK.min(cols.n_rows - start);
            self.forward_chunk(cols, &sval, start, len, &mut buf);
            out.extend_from_slice(&buf[..len]);
            start += len;
        }
        out
    }

    /// Visit every chunk with its row offset, root values and, per constant,
    /// the derivative of the root w.r.t. that constant.
    pub fn for_each_gradient_chunk<F>(&self, cols: &Columns, mut visit: F)
    where
        F: FnMut(usize, &[f64], &[&[f64]]),
    {
        let mut val = self.scratch();
        let mut adj = self.scratch();
        let sval = self.fold();
        let sadj = self.fold_gradients(&sval);
        let k = self.const_pos.len();
        let mut grads = vec![0.0; k * CHUNK];
        let mut start = 0;
        while start < cols.n_rows {
            let len = CHUNK.min(cols.n_rows - start);
            self.forward_chunk(cols, &sval, start, len, &mut val);
            self.backward_chunk(len, &val, &mut adj);
            for (j, (&p, &r)) in self.const_pos.iter().zip(&self.const_root).enumerate() {
                let scale = sadj[p];
                let src = &adj[r * CHUNK..r * CHUNK + len];
                for (g, &u) in grads[j * CHUNK..j * CHUNK + len].iter_mut().zip(src) {
                    let x = u * scale;
                    *g = if x.is_finite() { x } else { 0.0 };
                }
            }
            let views: Vec<&[f64]> = (0..k).map(|j| &grads[j * CHUNK..j * CHUNK + len]).collect();
            visit(start, &val[..len], &views);
            start += len;
        }
    }
}

/// Evaluate `tree` on every row of `data`.
pub fn evaluate(tree: &ExpressionTree, data: &Dataset) -> Vec<f64> {
    evaluate_columns(tree, &Columns::from_dataset(data))
}

pub fn evaluate_columns(tree: &ExpressionTree, cols: &Columns) -> Vec<f64> {
    Program::new(tree).eval(cols)
}

/// Root values and `∂root/∂constant` for each constant leaf (prefix order),
/// one column of length `n_rows` per constant.
pub fn jacobian(tree: &ExpressionTree, cols: &Columns) -> (Vec<f64>, Vec<Vec<f64>>) {
    let prog = Program::new(tree);
    let mut values = Vec::with_capacity(cols.n_rows);
    let mut jac = vec![Vec::with_capacity(cols.n_rows); prog.n_constants()];
    prog.for_each_gradient_chunk(cols, |_, v, g| {
        values.extend_from_slice(v);
        for (col, gc) in jac.iter_mut().zip(g) {
            col.extend_from_slice(gc);
        }
    });
    (values, jac)
}
