//! End-to-end tests of the binary: pipeline smoke, error classes and exit
//! codes, and manifest-driven reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graph-dna"))
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let out = bin().args(args).current_dir(dir).output().unwrap();
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest_value(path: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            if k == key {
                return v.to_string();
            }
        }
    }
    panic!("key {key} missing from {}", path.display());
}

fn simulate(dir: &Path, prefix: &str, seed: u64) {
    run_ok(
        &[
            "simulate",
            "--out",
            prefix,
            "--n",
            "250",
            "--m",
            "60",
            "--rank",
            "4",
            "--edge-prob",
            "0.03",
            "--train-frac",
            "0.08",
            "--val-frac",
            "0.02",
            "--test-frac",
            "0.03",
            "--seed",
            &seed.to_string(),
        ],
        dir,
    );
}

#[test]
fn full_pipeline_produces_rmse_and_rgg() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "run", 11);

    run_ok(
        &[
            "encode", "--graph", "run.graph", "--out", "run.dna", "--capacity", "80", "--fpr",
            "0.2", "--d", "3", "--seed", "3",
        ],
        d,
    );
    // encoded file loads and covers the 1-hop neighborhoods
    let b = graph_dna::dna::DnaMatrix::load(d.join("run.dna")).unwrap();
    let g = graph_dna::graph::SparseGraph::load_edges(d.join("run.graph"), None).unwrap();
    for i in 0..g.n() {
        assert!(b.contains(i, i as u64));
        for &(j, _) in g.neighbors(i) {
            assert!(b.contains(i, j as u64), "row {i} misses neighbor {j}");
        }
    }

    let common = [
        "--ratings",
        "run.ratings",
        "--split-train",
        "run.train",
        "--split-validation",
        "run.validation",
        "--split-test",
        "run.test",
        "--rank",
        "4",
        "--epochs",
        "15",
    ];
    for (method, model, extra) in [
        ("mf", "mf.model", vec![]),
        ("grmf", "g.model", vec!["--graph", "run.graph"]),
        (
            "grmf_dna",
            "dna.model",
            vec!["--graph", "run.graph", "--dna", "run.dna"],
        ),
    ] {
        let mut args = vec!["train", "--method", method];
        args.extend_from_slice(&common);
        args.extend_from_slice(&extra);
        args.extend_from_slice(&["--out", model]);
        run_ok(&args, d);
    }

    let rmse_of = |model: &str, report: &str, extra: &[&str]| -> f64 {
        let mut args = vec![
            "eval",
            "--model",
            model,
            "--ratings",
            "run.ratings",
            "--split-train",
            "run.train",
            "--split-validation",
            "run.validation",
            "--split-test",
            "run.test",
            "--out",
            report,
        ];
        args.extend_from_slice(extra);
        run_ok(&args, d);
        let text = std::fs::read_to_string(d.join(report)).unwrap();
        text.lines()
            .find_map(|l| l.strip_prefix("rmse="))
            .unwrap()
            .parse()
            .unwrap()
    };
    let mf = rmse_of("mf.model", "mf.report", &[]);
    let g = rmse_of("g.model", "g.report", &[]);
    let _ = rmse_of(
        "dna.model",
        "dna.report",
        &[
            "--rgg-baseline",
            &mf.to_string(),
            "--rgg-graph",
            &g.to_string(),
        ],
    );
    let report = std::fs::read_to_string(d.join("dna.report")).unwrap();
    assert!(report.contains("rmse="), "report lacks rmse line: {report}");
    assert!(report.contains("rgg="), "report lacks rgg line: {report}");
}

#[test]
fn power_cap_exits_5_with_no_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "run", 5);
    let out = bin()
        .args([
            "power", "--graph", "run.graph", "--out", "run.g3", "--weights", "0,0,1", "--nnz-cap",
            "50",
        ])
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error[nnz-cap]"), "stderr: {stderr}");
    assert!(!d.join("run.g3").exists(), "partial output written");
}

#[test]
fn usage_and_input_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "run", 6);

    // missing file: input class, exit 3
    let out = bin()
        .args(["encode", "--graph", "nope.graph", "--out", "x.dna", "--c", "64"])
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[input]"));

    // invalid parameter: usage class, exit 2
    let out = bin()
        .args([
            "train",
            "--method",
            "mf",
            "--ratings",
            "run.ratings",
            "--rank",
            "0",
            "--out",
            "x.model",
        ])
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[usage]"));

    // clap-level usage error also exits 2
    let out = bin().args(["train", "--method", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manifests_reproduce_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // identical simulate parameters give identical artifacts
    simulate(d, "a", 17);
    simulate(d, "b", 17);
    for ext in ["ratings", "graph", "train", "validation", "test"] {
        let a = std::fs::read(d.join(format!("a.{ext}"))).unwrap();
        let b = std::fs::read(d.join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext} differs between identical runs");
    }

    // identical encode parameters give identical signature files
    for name in ["a.dna", "b.dna"] {
        run_ok(
            &[
                "encode", "--graph", "a.graph", "--out", name, "--c", "128", "--k", "3", "--d",
                "2", "--seed", "9",
            ],
            d,
        );
    }
    assert_eq!(
        std::fs::read(d.join("a.dna")).unwrap(),
        std::fs::read(d.join("b.dna")).unwrap()
    );

    // identical training parameters give identical objective trajectories
    for model in ["a.model", "b.model"] {
        run_ok(
            &[
                "train",
                "--method",
                "grmf",
                "--ratings",
                "a.ratings",
                "--split-test",
                "a.test",
                "--graph",
                "a.graph",
                "--rank",
                "3",
                "--epochs",
                "10",
                "--seed",
                "21",
                "--out",
                model,
            ],
            d,
        );
    }
    let trace_a = manifest_value(&d.join("a.model.manifest"), "objective_trace");
    let trace_b = manifest_value(&d.join("b.model.manifest"), "objective_trace");
    assert_eq!(trace_a, trace_b);
    assert_eq!(
        std::fs::read(d.join("a.model")).unwrap(),
        std::fs::read(d.join("b.model")).unwrap()
    );

    // the manifest records the effective parameters
    let manifest: PathBuf = d.join("a.model.manifest");
    assert_eq!(manifest_value(&manifest, "method"), "grmf");
    assert_eq!(manifest_value(&manifest, "seed"), "21");
    assert_eq!(manifest_value(&manifest, "lambda_l"), "0.01");
}

#[test]
fn bench_and_bounds_emit_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run_ok(
        &[
            "bench", "--n", "500", "--p", "0.01", "--c", "128", "--k", "3", "--depths", "1,2,3,4",
            "--repeat", "3", "--out", "bench.txt",
        ],
        d,
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 7, "4 depth rows + header x2 + ratio");
    assert!(text.contains("time ratio d=4 vs d=1"));
    let saved = std::fs::read_to_string(d.join("bench.txt")).unwrap();
    assert!(saved.contains("nnz_b"));
    // signature growth is monotone in depth
    let nnz: Vec<u64> = saved
        .lines()
        .skip(2)
        .take(4)
        .map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(nnz.windows(2).all(|w| w[0] <= w[1]), "nnz not monotone: {nnz:?}");

    let out = run_ok(
        &[
            "bounds", "--trials", "400", "--seed", "2", "--c-list", "256", "--k-list", "2,4",
            "--out", "bounds.txt",
        ],
        d,
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 7, "header + 6 grid rows");
    assert!(std::fs::read_to_string(d.join("bounds.txt"))
        .unwrap()
        .contains("gamma0"));
}

#[test]
fn sweep_selects_on_validation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "run", 31);
    run_ok(
        &[
            "sweep",
            "--method",
            "grmf",
            "--ratings",
            "run.ratings",
            "--split-train",
            "run.train",
            "--split-validation",
            "run.validation",
            "--split-test",
            "run.test",
            "--graph",
            "run.graph",
            "--rank",
            "3",
            "--epochs",
            "8",
            "--lambda-l-grid",
            "0.01,1",
            "--lambda-g-grid",
            "0.1,10",
            "--out",
            "best.model",
        ],
        d,
    );
    let report = std::fs::read_to_string(d.join("best.sweep")).unwrap();
    assert_eq!(report.lines().count(), 5, "4 combos + best line");
    assert!(report.lines().last().unwrap().starts_with("best:"));
    assert!(d.join("best.model").exists());

    // sweeping without a validation split is an input error
    let out = bin()
        .args([
            "sweep",
            "--method",
            "mf",
            "--ratings",
            "run.ratings",
            "--out",
            "x.model",
        ])
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "run", 8);
    std::fs::write(
        d.join("exp.conf"),
        "method = mf\nratings = run.ratings\nrank = 6\nepochs = 5\nout = conf.model\n",
    )
    .unwrap();
    run_ok(&["train", "--config", "exp.conf"], d);
    let manifest = d.join("conf.model.manifest");
    assert_eq!(manifest_value(&manifest, "rank"), "6");

    // a flag beats the config value
    run_ok(&["train", "--config", "exp.conf", "--rank", "2", "--out", "conf2.model"], d);
    assert_eq!(
        manifest_value(&d.join("conf2.model.manifest"), "rank"),
        "2"
    );
    let model = graph_dna::factorize::FactorModel::load(d.join("conf2.model")).unwrap();
    assert_eq!(model.rank(), 2);
}
