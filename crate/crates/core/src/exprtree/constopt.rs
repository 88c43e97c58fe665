//! Linear scaling and numeric refinement of constant leaves.

use nalgebra::{DMatrix, DVector};

use super::eval::{Columns, Program};
use super::ExpressionTree;
use crate::dataset::Dataset;

/// Least-squares `(offset, slope)` so that `offset + slope * pred` best fits
/// `targets`. Zero-variance predictions give `(mean(targets), 0)`.
pub fn linear_scale(pred: &[f64], targets: &[f64]) -> (f64, f64) {
    let n = pred.len().min(targets.len()).max(1) as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = targets.iter().sum::<f64>() / n;
    let (mut cov, mut var) = (0.0, 0.0);
    for (&p, &t) in pred.iter().zip(targets) {
        let d = p - mp;
        cov += d * (t - mt);
        var += d * d;
    }
    let slope = cov / var;
    if var > 0.0 && slope.is_finite() && mp.is_finite() {
        (mt - slope * mp, slope)
    } else {
        (mt, 0.0)
    }
}

/// Mean squared error after optimal linear scaling.
pub fn scaled_mse(pred: &[f64], targets: &[f64]) -> f64 {
    let (a, b) = linear_scale(pred, targets);
    let n = targets.len().max(1) as f64;
    pred.iter()
        .zip(targets)
        .map(|(&p, &t)| {
            let r = t - a - b * p;
            r * r
        })
        .sum::<f64>()
        / n
}

/// Outcome of constant refinement.
#[derive(Debug, Clone)]
pub struct Refined {
    pub tree: ExpressionTree,
    /// Raw tree output on the training rows (before scaling).
    pub predictions: Vec<f64>,
    /// Scaled training MSE of `tree`.
    pub mse: f64,
    pub accepted_steps: usize,
}

/// Refine constant leaves by damped Gauss-Newton on the scaled residual
/// `y - a - b·f(x; c)`, jointly in `(a, b, c)`.
///
/// Each step solves `(JᵀJ + λ·diag(JᵀJ)) δ = Jᵀr` and is kept only if the
/// scaled MSE drops; λ shrinks after a kept step and grows after a rejected
/// one. Structure never changes and the returned MSE never exceeds the input's.
pub fn refine_constants(
    tree: &ExpressionTree,
    cols: &Columns,
    targets: &[f64],
    iterations: usize,
) -> Refined {
    let mut prog = Program::new(tree);
    let predictions = prog.eval(cols);
    let mse = scaled_mse(&predictions, targets);
    let mut best = Refined {
        tree: tree.clone(),
        predictions,
        mse,
        accepted_steps: 0,
    };
    let k = prog.n_constants();
    if k == 0 || iterations == 0 || !best.mse.is_finite() || best.mse == 0.0 {
        return best;
    }

    let m = k + 2;
    let mut consts = tree.constants();
    let mut lambda = 1e-3;
    let mut normal: Option<(DMatrix<f64>, DVector<f64>)> = None;

    for _ in 0..iterations {
        if normal.is_none() {
            normal = Some(normal_equations(&prog, cols, targets, &best.predictions));
        }
        let (jtj, jtr) = normal.as_ref().unwrap();
        let mut lhs = jtj.clone();
        for d in 0..m {
            lhs[(d, d)] += lambda * jtj[(d, d)] + 1e-12;
        }
        let Some(chol) = lhs.cholesky() else {
            lambda *= 10.0;
            continue;
        };
        let step = chol.solve(jtr);
        let trial: Vec<f64> = consts
            .iter()
            .zip(step.iter().skip(2))
            .map(|(c, d)| c + d)
            .collect();
        if trial.iter().any(|c| !c.is_finite()) {
            lambda *= 10.0;
            continue;
        }
        prog.set_constants(&trial);
        let pred = prog.eval(cols);
        let mse = scaled_mse(&pred, targets);
        if mse < best.mse {
            let rel = (best.mse - mse) / best.mse;
            consts = trial;
            best.predictions = pred;
            best.mse = mse;
            best.accepted_steps += 1;
            normal = None;
            lambda = (lambda * 0.1).max(1e-12);
            if rel < 1e-10 || mse == 0.0 {
                break;
            }
        } else {
            prog.set_constants(&consts);
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    if best.accepted_steps > 0 {
        best.tree = tree.with_constants(&consts);
    }
    best
}

/// Dot product with four independent accumulators.
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut s = [0.0; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for i in 0..4 {
            s[i] += a[i] * b[i];
        }
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

/// `JᵀJ` and `Jᵀr` for parameters `(a, b, c_1..c_k)`, where the Jacobian row
/// is `(1, f, b·∂f/∂c_j)` and `(a, b)` is the current optimal scaling.
fn normal_equations(
    prog: &Program,
    cols: &Columns,
    targets: &[f64],
    predictions: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let (a, b) = linear_scale(predictions, targets);
    let m = prog.n_constants() + 2;
    // Accumulate over raw columns (1, f, ∂f/∂c_j), then apply the factor b.
    let mut acc = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    let mut ones = Vec::new();
    let mut resid = Vec::new();
    prog.for_each_gradient_chunk(cols, |start, f, grads| {
        let n = f.len();
        ones.resize(n, 1.0);
        resid.clear();
        resid.extend(f.iter().zip(&targets[start..start + n]).map(|(fk, t)| t - a - b * fk));
        let col = |p: usize| -> &[f64] {
            match p {
                0 => &ones[..n],
                1 => f,
                _ => grads[p - 2],
            }
        };
        for p in 0..m {
            let cp = col(p);
            rhs[p] += dot(cp, &resid);
            for q in p..m {
                acc[p * m + q] += dot(cp, col(q));
            }
        }
    });
    let factor = |p: usize| if p < 2 { 1.0 } else { b };
    let jtj = DMatrix::from_fn(m, m, |p, q| {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        acc[lo * m + hi] * factor(p) * factor(q)
    });
    let jtr = DVector::from_fn(m, |p, _| rhs[p] * factor(p));
    (jtj, jtr)
}

/// Refine the constants of `tree` against `data` for up to `iterations`
/// Gauss-Newton steps.
pub fn optimize_constants(tree: &ExpressionTree, data: &Dataset, iterations: usize) -> ExpressionTree {
    refine_constants(tree, &Columns::from_dataset(data), data.targets(), iterations).tree
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprtree::evaluate;
    use proptest::prelude::*;

    #[test]
    fn scale_examples() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(linear_scale(&y, &y), (0.0, 1.0));
        let p: Vec<f64> = y.iter().map(|t| 2.0 * t + 6.0).collect();
        let (a, b) = linear_scale(&p, &y);
        assert!((b - 0.5).abs() < 1e-15 && (a + 3.0).abs() < 1e-14);
        assert_eq!(linear_scale(&[4.0, 4.0, 4.0], &y), (2.0, 0.0));
    }

    #[test]
    fn product_constant_reaches_exact_fit() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0 - 1.0]).collect();
        let d = Dataset::from_rows(&rows, rows.iter().map(|r| 3.0 * r[0]).collect()).unwrap();
        let t: ExpressionTree = "(* 0.7 x0)".parse().unwrap();
        let r = refine_constants(&t, &Columns::from_dataset(&d), d.targets(), 10);
        assert!(r.mse < 1e-6);
    }

    #[test]
    fn nonlinear_constant_is_recovered() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 / 20.0 - 1.5]).collect();
        let ys: Vec<f64> = rows.iter().map(|r| 4.0 * (1.3 * r[0]).sin() - 2.0).collect();
        let d = Dataset::from_rows(&rows, ys).unwrap();
        let t: ExpressionTree = "(sin (* 1.0 x0))".parse().unwrap();
        let before = scaled_mse(&evaluate(&t, &d), d.targets());
        let refined = optimize_constants(&t, &d, 10);
        let after = scaled_mse(&evaluate(&refined, &d), d.targets());
        assert!(after < before * 1e-6, "{before} -> {after}");
        assert!((refined.constants()[0].abs() - 1.3).abs() < 1e-4);
    }

    #[test]
    fn constant_free_tree_unchanged() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let d = Dataset::from_rows(&rows, (0..10).map(|i| (i as f64).sin()).collect()).unwrap();
        let t: ExpressionTree = "(+ x0 x1)".parse().unwrap();
        assert_eq!(optimize_constants(&t, &d, 10), t);
    }

    proptest! {
        #[test]
        fn scaling_never_increases_mse(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..50)
        ) {
            let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (a, b) = linear_scale(&p, &y);
            let scaled: Vec<f64> = p.iter().map(|v| a + b * v).collect();
            let raw = crate::metrics::mse(&p, &y);
            let fit = crate::metrics::mse(&scaled, &y);
            prop_assert!(fit <= raw * (1.0 + 1e-12) + 1e-12);
        }
    }
}
