//! Mini-batch k-means and the batch Lloyd iteration used to check it.

use rand::seq::index;
use rand::Rng;

use super::{check_count, ReductionSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::{par, seed};

/// Centroids (row-major, `k × dim`) and how many points each one owns.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    pub centroids: Vec<f64>,
    pub dim: usize,
    pub counts: Vec<usize>,
}

impl CentroidSet {
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }
}

/// Result of [`lloyd_kmeans`]: the clustering plus the inertia after each
/// assignment step.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub set: CentroidSet,
    pub inertia_history: Vec<f64>,
    pub converged: bool,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid (lowest index on ties) and its squared distance.
pub fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign_all(points: &[f64], centroids: &[f64], dim: usize) -> Vec<(usize, f64)> {
    let n = points.len() / dim;
    par::map_range(n, |i| nearest(&points[i * dim..(i + 1) * dim], centroids, dim))
}

/// Sum of squared distances from every point to its nearest centroid.
pub fn inertia(points: &[f64], dim: usize, centroids: &[f64]) -> f64 {
    assign_all(points, centroids, dim).iter().map(|a| a.1).sum()
}

fn validate(points: &[f64], dim: usize, k: usize) -> Result<usize> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::ShapeMismatch {
            expected: dim,
            found: points.len(),
        });
    }
    let n = points.len() / dim;
    if k == 0 || k > n {
        return Err(Error::out_of_range("k", k, format!("1..={n}")));
    }
    Ok(n)
}

fn init_centroids<R: Rng>(points: &[f64], dim: usize, n: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(k * dim);
    for i in index::sample(rng, n, k).into_iter() {
        out.extend_from_slice(&points[i * dim..(i + 1) * dim]);
    }
    out
}

/// Default mini-batch iteration count: `100·k`, capped at twenty passes
/// over the data (`⌈20·n / batch⌉`), and never below one.
pub fn default_iterations(k: usize, n: usize, batch_size: usize) -> usize {
    let epoch_cap = (20 * n).div_ceil(batch_size.max(1));
    (100 * k).min(epoch_cap).max(1)
}

/// Mini-batch k-means with per-centroid learning rate `1 / count`.
///
/// Centroids start at `k` distinct random points. Each iteration draws
/// `batch_size` points with replacement, assigns the whole batch against the
/// current centroids, then applies the updates in batch order.
pub fn minibatch_kmeans(
    points: &[f64],
    dim: usize,
    k: usize,
    batch_size: usize,
    iterations: usize,
    seed: u64,
) -> Result<CentroidSet> {
    let n = validate(points, dim, k)?;
    if batch_size == 0 || iterations == 0 {
        return Err(Error::Config("batch_size and iterations must be >= 1".into()));
    }
    let mut rng = seed::rng(seed);
    let mut centroids = init_centroids(points, dim, n, k, &mut rng);
    let mut seen = vec![0u64; k];
    let mut batch = vec![0usize; batch_size];

    for _ in 0..iterations {
        for b in batch.iter_mut() {
            *b = rng.gen_range(0..n);
        }
        let cents = &centroids;
        let assigned = par::map_slice(&batch, |&i| {
            nearest(&points[i * dim..(i + 1) * dim], cents, dim).0
        });
        for (&i, &c) in batch.iter().zip(&assigned) {
            seen[c] += 1;
            let eta = 1.0 / seen[c] as f64;
            let x = &points[i * dim..(i + 1) * dim];
            for (cv, &xv) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                *cv = (1.0 - eta) * *cv + eta * xv;
            }
        }
    }

    let mut counts = vec![0usize; k];
    for (c, _) in assign_all(points, &centroids, dim) {
        counts[c] += 1;
    }
    Ok(CentroidSet {
        centroids,
        dim,
        counts,
    })
}

/// Batch Lloyd iteration: assign every point, move each centroid to its
/// members' mean, repeat until assignments stop changing or `max_iters`.
///
/// An empty cluster is re-seeded at the point farthest from its centroid.
pub fn lloyd_kmeans(
    points: &[f64],
    dim: usize,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<LloydRun> {
    let n = validate(points, dim, k)?;
    let mut rng = seed::rng(seed);
    let mut centroids = init_centroids(points, dim, n, k, &mut rng);
    let mut labels: Vec<usize> = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut converged = false;

    for _ in 0..max_iters.max(1) {
        let assigned = assign_all(points, &centroids, dim);
        history.push(assigned.iter().map(|a| a.1).sum());
        let changed = assigned
            .iter()
            .zip(&labels)
            .any(|(a, &l)| a.0 != l);
        for (l, a) in labels.iter_mut().zip(&assigned) {
            *l = a.0;
        }
        if !changed {
            converged = true;
            break;
        }

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, &x) in sums[c * dim..(c + 1) * dim]
                .iter_mut()
                .zip(&points[i * dim..(i + 1) * dim])
            {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    centroids[c * dim + d] = sums[c * dim + d] / counts[c] as f64;
                }
            }
        }
        let mut taken = vec![false; n];
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let far = (0..n)
                .filter(|&i| !taken[i])
                .map(|i| {
                    let l = labels[i];
                    (i, sq_dist(&points[i * dim..(i + 1) * dim], &centroids[l * dim..(l + 1) * dim]))
                })
                .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if far.0 != usize::MAX {
                taken[far.0] = true;
                centroids[c * dim..(c + 1) * dim]
                    .copy_from_slice(&points[far.0 * dim..(far.0 + 1) * dim]);
            }
        }
    }

    let mut counts = vec![0usize; k];
    for (c, _) in assign_all(points, &centroids, dim) {
        counts[c] += 1;
    }
    Ok(LloydRun {
        set: CentroidSet {
            centroids,
            dim,
            counts,
        },
        inertia_history: history,
        converged,
    })
}

/// Replace `train` by `m` mini-batch k-means centroids of its joined
/// feature/target rows. Expects normalized input.
pub fn kmeans_reduce(train: &Dataset, m: usize, spec: &ReductionSpec) -> Result<Dataset> {
    check_count(m, train.n_rows())?;
    let dim = train.n_features() + 1;
    let joint = train.joint_matrix();
    let iterations = spec
        .kmeans_iterations
        .unwrap_or_else(|| default_iterations(m, train.n_rows(), spec.kmeans_batch_size));
    let set = minibatch_kmeans(&joint, dim, m, spec.kmeans_batch_size, iterations, spec.seed)?;
    let p = train.n_features();
    let mut features = Vec::with_capacity(m * p);
    let mut targets = Vec::with_capacity(m);
    for c in 0..set.k() {
        let row = set.centroid(c);
        features.extend_from_slice(&row[..p]);
        targets.push(row[p]);
    }
    train.with_values(features, targets)
}
