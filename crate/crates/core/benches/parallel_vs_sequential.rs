use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

use symreduce::baselines::{fit_forest, ForestConfig};
use symreduce::exprtree::{random_tree, refine_constants, Columns, Grammar};
use symreduce::reduction::minibatch_kmeans;
use symreduce::{par, seed, Dataset};

fn synthetic(n: usize, p: usize) -> Dataset {
    let mut rng = seed::rng(11);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let y = rows.iter().map(|r| r[0] * r[1] + r[2].sin()).collect();
    Dataset::from_rows(&rows, y).unwrap()
}

/// Offspring evaluation with constant refinement, as done once per GP batch.
fn offspring_batch(c: &mut Criterion) {
    let data = synthetic(1000, 3);
    let cols = Columns::from_dataset(&data);
    let grammar = Grammar::full(3);
    let trees: Vec<_> = (0..64).map(|s| random_tree(&grammar, 40, 10, s)).collect();
    let score = |t: &_| refine_constants(t, &cols, data.targets(), 10).mse;

    let mut g = c.benchmark_group("offspring_batch");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| par::sequential::map_slice(&trees, score)));
    g.bench_function("parallel", |b| b.iter(|| par::map_slice(&trees, score)));
    g.finish();
}

fn kmeans_and_forest(c: &mut Criterion) {
    let data = synthetic(4000, 5);
    let points = data.joint_matrix();
    let dim = data.n_features() + 1;
    let forest = ForestConfig::default();

    let mut g = c.benchmark_group("library");
    g.sample_size(10);
    for jobs in [1, 0] {
        let label = if jobs == 1 { "one_thread" } else { "all_threads" };
        g.bench_with_input(BenchmarkId::new("minibatch_kmeans", label), &jobs, |b, &jobs| {
            b.iter(|| par::with_jobs(jobs, || minibatch_kmeans(&points, dim, 400, 1000, 40, 3).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("fit_forest", label), &jobs, |b, &jobs| {
            b.iter(|| par::with_jobs(jobs, || fit_forest(&data, &forest).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, offspring_batch, kmeans_and_forest);
criterion_main!(benches);
