use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Least-squares fit with intercept. Rank-deficient systems (duplicated
/// columns, fewer rows than features) get the minimum-norm solution.
pub fn fit_linear(train: &Dataset) -> LinearModel {
    let n = train.n_rows();
    let p = train.n_features();
    let x = DMatrix::from_fn(n, p + 1, |i, j| if j == p { 1.0 } else { train.row(i)[j] });
    let y = DVector::from_column_slice(train.targets());
    let svd = x.svd(true, true);
    let tol = svd.singular_values.max() * (n.max(p + 1) as f64) * f64::EPSILON;
    let beta = svd
        .solve(&y, tol)
        .unwrap_or_else(|_| DVector::zeros(p + 1));
    let mut weights: Vec<f64> = beta.iter().copied().collect();
    let intercept = weights.pop().unwrap_or(0.0);
    if weights.iter().chain([&intercept]).any(|w| !w.is_finite()) {
        return LinearModel {
            weights: vec![0.0; p],
            intercept: train.targets().iter().sum::<f64>() / n as f64,
        };
    }
    LinearModel { weights, intercept }
}

pub fn predict_linear(model: &LinearModel, data: &Dataset) -> Result<Vec<f64>> {
    if data.n_features() != model.weights.len() {
        return Err(Error::ShapeMismatch {
            expected: model.weights.len(),
            found: data.n_features(),
        });
    }
    Ok(data
        .rows()
        .map(|r| model.intercept + r.iter().zip(&model.weights).map(|(x, w)| x * w).sum::<f64>())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{mse, pearson_r2};
    use crate::seed;
    use rand::Rng;

    fn plane() -> Dataset {
        let mut rng = seed::rng(4);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let ys = rows.iter().map(|r| 2.0 * r[0] - r[1] + 3.0).collect();
        Dataset::from_rows(&rows, ys).unwrap()
    }

    #[test]
    fn exact_recovery() {
        let m = fit_linear(&plane());
        assert!((m.weights[0] - 2.0).abs() < 1e-8);
        assert!((m.weights[1] + 1.0).abs() < 1e-8);
        assert!((m.intercept - 3.0).abs() < 1e-8);
    }

    #[test]
    fn duplicated_column_min_norm() {
        let d = plane();
        let rows: Vec<Vec<f64>> = d.rows().map(|r| vec![r[0], r[0], r[1]]).collect();
        let dup = Dataset::from_rows(&rows, d.targets().to_vec()).unwrap();
        let m = fit_linear(&dup);
        assert!(m.weights.iter().all(|w| w.is_finite()));
        assert!((m.weights[0] - 1.0).abs() < 1e-8 && (m.weights[1] - 1.0).abs() < 1e-8);
        let pred = predict_linear(&m, &dup).unwrap();
        assert!(mse(&pred, dup.targets()) < 1e-16);
    }

    #[test]
    fn fewer_rows_than_features() {
        let rows = vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.0, 1.0, 0.0, 1.0]];
        let d = Dataset::from_rows(&rows, vec![1.0, -1.0]).unwrap();
        let m = fit_linear(&d);
        let pred = predict_linear(&m, &d).unwrap();
        assert!(mse(&pred, d.targets()) < 1e-20);
    }

    #[test]
    fn symmetric_square_is_invisible() {
        let rows: Vec<Vec<f64>> = (0..=100).map(|i| vec![i as f64 / 50.0 - 1.0]).collect();
        let d = Dataset::from_rows(&rows, rows.iter().map(|r| r[0] * r[0]).collect()).unwrap();
        let m = fit_linear(&d);
        assert!(m.weights[0].abs() < 1e-10);
        let r2 = pearson_r2(&predict_linear(&m, &d).unwrap(), d.targets()).unwrap();
        assert!(r2 < 1e-10);
    }

    #[test]
    fn zero_weights_and_shape_check() {
        let m = LinearModel {
            weights: vec![0.0, 0.0],
            intercept: 1.5,
        };
        assert_eq!(predict_linear(&m, &plane()).unwrap(), vec![1.5; 40]);
        let one = Dataset::from_rows(&[vec![1.0]], vec![1.0]).unwrap();
        assert!(predict_linear(&m, &one).is_err());
    }

    #[test]
    fn local_optimality_probe() {
        let mut rng = seed::rng(10);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let ys = rows.iter().map(|r| (3.0 * r[0]).sin() + r[1] * r[2]).collect();
        let d = Dataset::from_rows(&rows, ys).unwrap();
        let m = fit_linear(&d);
        let base = mse(&predict_linear(&m, &d).unwrap(), d.targets());
        for k in 0..4 {
            for delta in [-1e-3, 1e-3] {
                let mut q = m.clone();
                if k < 3 {
                    q.weights[k] += delta;
                } else {
                    q.intercept += delta;
                }
                assert!(mse(&predict_linear(&q, &d).unwrap(), d.targets()) >= base);
            }
        }
    }
}
