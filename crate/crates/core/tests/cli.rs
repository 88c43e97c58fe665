use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use symreduce::harness::{load_results, RunResult};
use symreduce::ExpressionTree;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symreduce"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn symreduce");
    assert!(
        out.status.success(),
        "symreduce {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Rows `x0,y,x1` with the target in the middle column.
fn write_csv(path: &Path, n: usize, offset: usize) {
    let mut s = String::from("x0,y,x1\n");
    for i in offset..offset + n {
        let x0 = (i as f64 * 0.37).sin() * 3.0;
        let x1 = (i as f64 * 0.11).cos();
        s.push_str(&format!("{x0},{},{x1}\n", 2.0 * x0 - x1 + 0.5));
    }
    fs::write(path, s).unwrap();
}

fn read_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn reduce_keeps_header_and_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    write_csv(&input, 120, 0);
    let (_, original) = read_rows(&input);

    for method in ["sampling", "binning", "kmeans"] {
        let out = dir.path().join(format!("{method}.csv"));
        run(&[
            "reduce", "--method", method, "--count", "30", "--seed", "4", "--target", "y",
            "--in", input.to_str().unwrap(), "--out", out.to_str().unwrap(),
        ]);
        let (header, rows) = read_rows(&out);
        assert_eq!(header, "x0,y,x1");
        match method {
            "binning" => assert!(!rows.is_empty() && rows.len() <= 30),
            _ => assert_eq!(rows.len(), 30),
        }
        if method == "sampling" {
            for r in &rows {
                assert!(original.contains(r), "{r:?} not in input");
            }
        }
    }
}

#[test]
fn reduce_defaults_target_to_last_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    fs::write(&input, "a,b\n1,10\n2,10\n3,20\n4,20\n").unwrap();
    let out = dir.path().join("out.csv");
    run(&[
        "reduce", "--method", "binning", "--count", "2", "--in", input.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    let (header, rows) = read_rows(&out);
    assert_eq!(header, "a,b");
    assert_eq!(rows, vec![vec![1.5, 10.0], vec![3.5, 20.0]]);
}

#[test]
fn reduce_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    write_csv(&input, 10, 0);
    let out = dir.path().join("out.csv");
    let p = |p: &Path| p.to_str().unwrap().to_owned();
    for args in [
        vec!["reduce", "--method", "sampling", "--count", "11", "--in", &p(&input), "--out", &p(&out)],
        vec!["reduce", "--method", "median", "--count", "3", "--in", &p(&input), "--out", &p(&out)],
        vec!["reduce", "--method", "sampling", "--count", "3", "--in", "/nonexistent.csv", "--out", &p(&out)],
    ] {
        let status = bin().args(&args).output().unwrap().status;
        assert!(!status.success(), "{args:?}");
    }
}

#[test]
fn train_commands_append_results() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (dir.path().join("train.csv"), dir.path().join("test.csv"));
    write_csv(&train, 80, 0);
    write_csv(&test, 40, 500);
    let results = dir.path().join("results.csv");
    let norm = dir.path().join("norm.csv");
    let cfg = dir.path().join("gp.cfg");
    fs::write(&cfg, "gp.population_size = 20\ngp.max_generations = 3\nrf.n_trees = 5\n").unwrap();
    let common = |seed: &str| {
        vec![
            "--config".to_owned(), cfg.to_str().unwrap().to_owned(),
            "--train".to_owned(), train.to_str().unwrap().to_owned(),
            "--test".to_owned(), test.to_str().unwrap().to_owned(),
            "--target".to_owned(), "y".to_owned(),
            "--seed".to_owned(), seed.to_owned(),
            "--results".to_owned(), results.to_str().unwrap().to_owned(),
        ]
    };

    let mut lr = vec!["train-lr".to_owned()];
    lr.extend(common("1"));
    lr.extend(["--normalizer".to_owned(), norm.to_str().unwrap().to_owned()]);
    let lr: Vec<&str> = lr.iter().map(String::as_str).collect();
    let out = String::from_utf8(run(&lr).stdout).unwrap();
    assert!(out.contains("test_r2 = 1.000000") || out.contains("test_r2 = 0.99999"), "{out}");

    let mut rf = vec!["train-rf".to_owned()];
    rf.extend(common("2"));
    let rf: Vec<&str> = rf.iter().map(String::as_str).collect();
    run(&rf);

    let mut gp = vec!["train-gp".to_owned()];
    gp.extend(common("3"));
    let gp: Vec<&str> = gp.iter().map(String::as_str).collect();
    let out = String::from_utf8(run(&gp).stdout).unwrap();
    let mut lines = out.lines();
    let tree: ExpressionTree = lines.next().unwrap().parse().expect("model line is a prefix tree");
    assert!(tree.size() <= 50);
    assert!(lines.next().unwrap().starts_with("a = "));
    assert!(lines.next().unwrap().starts_with("b = "));
    assert!(out.contains("generations = 3"), "{out}");
    assert!(out.contains("evaluations = "));

    let text = fs::read_to_string(&results).unwrap();
    assert_eq!(text.matches("dataset,method").count(), 1, "header written once");
    let rows: Vec<RunResult> = load_results(&results).unwrap();
    let learners: Vec<&str> = rows.iter().map(|r| r.learner.as_str()).collect();
    assert_eq!(learners, ["lr", "rf", "gp"]);
    for r in &rows {
        assert_eq!((r.dataset.as_str(), r.method.as_str(), r.rate, r.reduced_rows), ("train", "original", 1.0, 80));
        assert!(r.is_ok() && r.train_seconds >= 0.0);
    }
    assert_eq!(rows[2].seed, 3);

    let norm = fs::read_to_string(&norm).unwrap();
    let mut lines = norm.lines();
    assert_eq!(lines.next(), Some("column,mean,std"));
    let names: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["x0", "x1", "y"]);
}

#[test]
fn experiment_and_report_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    write_csv(&dir.path().join("data.csv"), 200, 0);
    let cfg = dir.path().join("sweep.cfg");
    fs::write(
        &cfg,
        "# small sweep\ndataset = data.csv\ntarget = y\ntrain_rows = 150\nrates = 0.2, 0.5, 1.0\n\
         repeats = 2\nlearners = lr, rf\nrf.n_trees = 4\nseed = 9\n",
    )
    .unwrap();
    let results = dir.path().join("results.csv");
    run(&["experiment", "--config", cfg.to_str().unwrap(), "--out", results.to_str().unwrap()]);
    let rows = load_results(&results).unwrap();
    // 3 methods x 2 reduced rates x 2 repeats x 2 learners + 2 learners x 2 repeats at rate 1.0
    assert_eq!(rows.len(), 3 * 2 * 2 * 2 + 2 * 2);
    assert!(rows.iter().all(|r| r.dataset == "data" && r.is_ok()));

    let again = dir.path().join("again.csv");
    run(&["experiment", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap(), "--jobs", "1"]);
    let strip = |v: Vec<RunResult>| v.iter().map(RunResult::without_timing).collect::<Vec<_>>();
    assert_eq!(strip(rows), strip(load_results(&again).unwrap()));

    let table = dir.path().join("table.csv");
    run(&["report", "--in", results.to_str().unwrap(), "--out", table.to_str().unwrap()]);
    let text = fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("dataset,learner,method,rate,runs,failed,test_r2_median,test_r2_iqr"));
    assert_eq!(lines.count(), 2 * (3 * 2 + 1));
    let runtime = fs::read_to_string(dir.path().join("table_runtime.csv")).unwrap();
    assert!(runtime.starts_with("dataset,learner,method,rate,train_seconds_median,speedup"));
}
