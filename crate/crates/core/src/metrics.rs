//! Scores and score summaries.

use crate::error::{Error, Result};

/// Squared Pearson correlation, clamped to `[0, 1]`.
///
/// Zero variance in either argument yields 0.
pub fn pearson_r2(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch(pred.len(), actual.len()));
    }
    Ok(r2_unchecked(pred, actual))
}

pub(crate) fn r2_unchecked(pred: &[f64], actual: &[f64]) -> f64 {
    let n = pred.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mp = pred.iter().sum::<f64>() / nf;
    let ma = actual.iter().sum::<f64>() / nf;
    let (mut cov, mut vp, mut va) = (0.0, 0.0, 0.0);
    for (&p, &a) in pred.iter().zip(actual) {
        let dp = p - mp;
        let da = a - ma;
        cov += dp * da;
        vp += dp * dp;
        va += da * da;
    }
    if !(vp > 0.0 && va > 0.0) || !vp.is_finite() || !cov.is_finite() {
        return 0.0;
    }
    let r2 = (cov / vp) * (cov / va);
    if r2.is_finite() {
        r2.clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn mse(pred: &[f64], actual: &[f64]) -> f64 {
    let n = pred.len().max(1) as f64;
    pred.iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / n
}

/// Median and interquartile range of a group of runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSummary {
    pub median: f64,
    pub iqr: f64,
    pub n_runs: usize,
}

/// Quantile by linear interpolation between order statistics: for sorted
/// `x[0..n]` and `h = (n - 1) * q`, returns `x[⌊h⌋] + (h - ⌊h⌋) * (x[⌊h⌋+1] - x[⌊h⌋])`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median (mean of the middle two for even `n`) and `Q3 - Q1` under
/// [`quantile_sorted`].
pub fn summarize(scores: &[f64]) -> Result<ScoreSummary> {
    if scores.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(ScoreSummary {
        median: quantile_sorted(&s, 0.5),
        iqr: quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25),
        n_runs: s.len(),
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    summarize(values).ok().map(|s| s.median)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r2_identities() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson_r2(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson_r2(&neg, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(pearson_r2(&[4.0, 4.0, 4.0, 4.0], &a).unwrap(), 0.0);
        assert!(pearson_r2(&a, &a[..3]).is_err());
    }

    #[test]
    fn r2_hand_computed() {
        // cov = 4.5, var_p = 5, var_a = 4.75 (sums of squares)
        let r2 = pearson_r2(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!((r2 - 4.5 * 4.5 / (5.0 * 4.75)).abs() < 1e-15);
        assert!((r2 - 0.852_631_578_9).abs() < 1e-9);
    }

    #[test]
    fn summaries() {
        let s = summarize(&[0.1, 0.2, 0.3]).unwrap();
        assert!((s.median - 0.2).abs() < 1e-15);
        assert_eq!(summarize(&[0.7; 5]).unwrap().iqr, 0.0);
        let one_to_ten: Vec<f64> = (1..=10).map(f64::from).collect();
        let s = summarize(&one_to_ten).unwrap();
        assert_eq!(s.median, 5.5);
        // Q1 at h = 2.25 -> 3.25, Q3 at h = 6.75 -> 7.75
        assert_eq!(s.iqr, 4.5);
        assert_eq!(s.n_runs, 10);
        assert!(summarize(&[]).is_err());
    }

    proptest! {
        #[test]
        fn r2_affine_invariant(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            alpha in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
            beta in -100.0f64..100.0,
        ) {
            let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = pearson_r2(&p, &y).unwrap();
            let moved: Vec<f64> = p.iter().map(|v| alpha * v + beta).collect();
            let r = pearson_r2(&moved, &y).unwrap();
            prop_assert!((r - base).abs() < 1e-8, "{} vs {}", r, base);
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn summarize_permutation_invariant(mut v in prop::collection::vec(-1.0f64..1.0, 1..30), seed in 0u64..1000) {
            let a = summarize(&v).unwrap();
            let k = (seed as usize) % v.len();
            v.rotate_left(k);
            v.reverse();
            let b = summarize(&v).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a.iqr >= 0.0);
        }
    }
}
