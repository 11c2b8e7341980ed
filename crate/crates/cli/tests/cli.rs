use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

use alecton_cli::truth_file::parse_truth;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("alecton").chain(args.iter().copied());
    let code = alecton_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &TempDir, name: &str, n: usize, eigenvalues: &str, seed: u64) -> PathBuf {
    let out = path(dir, name);
    let rank = eigenvalues.split(',').count().to_string();
    let (code, _, err) = cli(&[
        "synth",
        "--n",
        &n.to_string(),
        "--rank",
        &rank,
        "--eigenvalues",
        eigenvalues,
        "--seed",
        &seed.to_string(),
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    out
}

fn without_wall_ms(csv: &str) -> String {
    csv.lines()
        .map(|l| if l.starts_with('#') { l.to_string() } else { l.rsplit_once(',').unwrap().0.to_string() })
        .collect::<Vec<_>>()
        .join("\n")
}

fn field<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {summary}"))
}

#[test]
fn synth_writes_orthonormal_truth() {
    let dir = TempDir::new().unwrap();
    let f = synth(&dir, "t.txt", 100, "10,9,8,7,6,5,4,3,2,1", 7);
    let truth = parse_truth(fs::read_to_string(&f).unwrap().as_bytes()).unwrap();
    let u = truth.eigenvectors();
    assert_eq!((u.nrows(), u.ncols()), (100, 10));
    for a in 0..10 {
        for b in 0..10 {
            let d: f64 = (0..100).map(|i| u.get(i, a) * u.get(i, b)).sum();
            assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
    assert_eq!(truth.eigenvalues()[0], 10.0);
}

#[test]
fn synth_shapes_and_errors() {
    let dir = TempDir::new().unwrap();
    let f = synth(&dir, "two.txt", 2, "2,1", 1);
    let text = fs::read_to_string(&f).unwrap();
    assert!(text.starts_with("2 2\n"));
    assert_eq!(text.lines().count(), 4);
    let bad = path(&dir, "bad.txt");
    let (code, _, err) = cli(&["synth", "--n", "2", "--rank", "3", "--out", s(&bad)]);
    assert_eq!(code, 1, "{err}");
    assert!(!bad.exists());
    let (code, _, _) = cli(&["synth", "--n", "3", "--rank", "2", "--eigenvalues", "1,2", "--out", s(&bad)]);
    assert_eq!(code, 1);
    let (code, _, _) = cli(&["synth", "--n", "4", "--rank", "2", "--coherence", "basis-aligned", "--out", s(&bad)]);
    assert_eq!(code, 0);
    let truth = parse_truth(fs::read_to_string(&bad).unwrap().as_bytes()).unwrap();
    assert_eq!(truth.eigenvectors().get(0, 0), 1.0);
}

#[test]
fn run_seeds_give_distinct_reproducible_traces() {
    let dir = TempDir::new().unwrap();
    let t = synth(&dir, "t.txt", 16, "2,1", 3);
    let common = ["--truth", s(&t), "--k-steps", "3000", "--l-steps", "200", "--trace-every", "100"];
    let mut traces = Vec::new();
    for seed in 0..5 {
        let out = path(&dir, &format!("trace{seed}.csv"));
        let mut args = vec!["run", "--seed", &*Box::leak(seed.to_string().into_boxed_str()), "--out", s(&out)];
        args.extend(common);
        let (code, summary, err) = cli(&args);
        assert_eq!(code, 0, "{err}");
        assert!(summary.starts_with("converged="));
        field(&summary, "clipped");
        traces.push(fs::read_to_string(&out).unwrap());
    }
    for i in 0..5 {
        for j in i + 1..5 {
            assert_ne!(without_wall_ms(&traces[i]), without_wall_ms(&traces[j]));
        }
    }
    let again = path(&dir, "again.csv");
    let mut args = vec!["run", "--seed", "2", "--out", s(&again)];
    args.extend(common);
    assert_eq!(cli(&args).0, 0);
    assert_eq!(without_wall_ms(&fs::read_to_string(&again).unwrap()), without_wall_ms(&traces[2]));

    let csv = &traces[0];
    for key in ["# command=run", "# sampler=entrywise", "# n=16", "# k_steps=3000", "# seed=0", "# eta="] {
        assert!(csv.contains(key), "missing {key}");
    }
    assert!(csv.contains("\nstep,rho,tau,wall_ms\n0,"));
}

#[test]
fn run_flag_validation() {
    let dir = TempDir::new().unwrap();
    let t = synth(&dir, "t.txt", 8, "2,1", 3);
    let out = path(&dir, "o.csv");
    let base = ["run", "--truth", s(&t), "--out", s(&out), "--k-steps", "10"];
    let with = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        cli(&a)
    };
    assert_eq!(with(&["--eta", "0"]).0, 1);
    assert_eq!(with(&["--eta", "-1"]).0, 1);
    let (code, _, err) = with(&["--eta", "10"]);
    assert_eq!(code, 1);
    assert!(err.contains("gamma"), "{err}");
    assert!(!out.exists());
    assert_eq!(with(&["--eta", "10", "--force", "--l-steps", "5"]).0, 0);
    assert_eq!(with(&["--sampler", "exact"]).0, 1);
    assert_eq!(with(&["--sampler", "rect"]).0, 1);
    assert_eq!(with(&["--p", "9"]).0, 1);
    assert_eq!(with(&["--epsilon", "1.5"]).0, 1);
    assert_eq!(with(&["--noise-add", "-0.1"]).0, 1);
    let missing = ["run", "--truth", "/nonexistent/t.txt", "--out", s(&out)];
    assert_eq!(cli(&missing).0, 1);
    let nodir = path(&dir, "no/such/dir.csv");
    assert_eq!(cli(&["run", "--truth", s(&t), "--out", s(&nodir)]).0, 1);
    assert_eq!(cli(&["run", "--out", s(&out)]).0, 1);
    fs::write(path(&dir, "broken.txt"), "2 1\n1\n0.5\n").unwrap();
    let broken = path(&dir, "broken.txt");
    assert_eq!(cli(&["run", "--truth", s(&broken), "--out", s(&out)]).0, 2);
}

#[test]
fn angular_only_drops_radial_fields() {
    let dir = TempDir::new().unwrap();
    let t = synth(&dir, "t.txt", 8, "2,1", 3);
    let out = path(&dir, "o.csv");
    let factor = path(&dir, "y.txt");
    let (code, summary, _) = cli(&[
        "run",
        "--truth",
        s(&t),
        "--out",
        s(&out),
        "--k-steps",
        "500",
        "--angular-only",
        "--factor-out",
        s(&factor),
    ]);
    assert_eq!(code, 0);
    assert!(!summary.contains("clipped") && !summary.contains("r_bar"));
    let rows: Vec<f64> = fs::read_to_string(&factor).unwrap().lines().map(|l| l.trim().parse().unwrap()).collect();
    assert_eq!(rows.len(), 8);
    assert!((rows.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn exact_sampler_with_explicit_eta_converges() {
    let dir = TempDir::new().unwrap();
    let t = synth(&dir, "t.txt", 10, "3,2,1", 5);
    let out = path(&dir, "o.csv");
    let (code, summary, err) = cli(&[
        "run", "--truth", s(&t), "--out", s(&out), "--sampler", "exact", "--eta", "0.05", "--k-steps", "2000",
        "--l-steps", "1", "--p", "2", "--renorm-every", "10",
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(field(&summary, "converged"), "true");
    let trace: f64 = field(&summary, "r_bar_trace").parse().unwrap();
    assert!((trace - 5.0).abs() < 1e-3, "{summary}");
}

#[test]
fn oaat_residuals_fall_per_component() {
    let dir = TempDir::new().unwrap();
    let t = synth(&dir, "t.txt", 12, "3,2,1", 9);
    let out = path(&dir, "oaat.csv");
    let (code, summary, err) = cli(&[
        "oaat", "--truth", s(&t), "--out", s(&out), "--sampler", "exact", "--eta", "0.05", "--k-steps", "3000",
        "--l-steps", "1", "--p", "3",
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(summary.lines().count(), 3);
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.contains("\ncomponent,steps,residual_fro,wall_ms\n"));
    let residuals: Vec<f64> =
        csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(residuals.len(), 3);
    assert!(residuals.windows(2).all(|w| w[1] < w[0]), "{residuals:?}");
    assert!(residuals[2] < 1e-6);
    // two components of diag-like (3, 2, 1): ‖A − A₂‖/‖A‖ = 1/√14
    assert!((residuals[1] - 1.0 / 14f64.sqrt()).abs() < 1e-4);
}

#[test]
fn oaat_single_component_matches_run() {
    let dir = TempDir::new().unwrap();
    let t = synth(&dir, "t.txt", 16, "2,1", 4);
    let common = ["--truth", s(&t), "--k-steps", "2000", "--l-steps", "300", "--seed", "5"];
    let o1 = path(&dir, "run.csv");
    let o2 = path(&dir, "oaat.csv");
    let mut a = vec!["run", "--out", s(&o1)];
    a.extend(common);
    let (_, run, _) = cli(&a);
    let mut b = vec!["oaat", "--out", s(&o2)];
    b.extend(common);
    let (code, oaat, err) = cli(&b);
    assert_eq!(code, 0, "{err}");
    for key in ["converged", "steps", "rho_final", "clipped", "r_bar_trace"] {
        assert_eq!(field(&run, key), field(&oaat, key), "{key}");
    }
}

#[test]
fn oaat_on_triplets_reports_training_rmse() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "m.csv");
    // rank one: M = a bᵀ with a = (1, 2), b = (1, -1, 0.5), only some cells stored
    fs::write(&f, "# header\n0,0,1\n0,1,-1\n1,1,-2\n1,2,1\n").unwrap();
    let out = path(&dir, "o.csv");
    let (code, _, err) = cli(&[
        "oaat", "--triplets", s(&f), "--out", s(&out), "--sampler", "exact", "--eta", "0.1", "--k-steps", "3000",
        "--l-steps", "1",
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.contains("# rows=2") && csv.contains("# cols=3"));
    let rmse: f64 = csv.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    // the stored matrix has zeros in the unstored cells, so it is not rank one;
    // its best rank-one fit leaves σ₂²/2 per stored cell on average at most
    assert!(rmse > 0.0 && rmse < 1.0, "{rmse}");
}

#[test]
fn zp_table_has_closed_form_column() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "zp.csv");
    let (code, _, err) =
        cli(&["zp", "--p", "1,3", "--gamma", "0,0.02,0.1", "--samples", "20000", "--seed", "3", "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().filter(|l| !l.starts_with('#')).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["gamma", "p", "n_samples", "value", "std_err", "closed_form"]);
    assert_eq!(rows.len(), 7);
    for r in &rows[1..] {
        if r[1] == "1" {
            let (v, se, c): (f64, f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap(), r[5].parse().unwrap());
            assert!((v - c).abs() <= 3.0 * se + 1e-15, "{r:?}");
        } else {
            assert_eq!(r[5], "");
        }
    }
    let (code, stdout, _) = cli(&["zp", "--p", "1", "--samples", "100"]);
    assert_eq!(code, 0);
    let gammas: Vec<&str> =
        stdout.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(gammas.len(), 11);
    assert_eq!(gammas.first().unwrap().parse::<f64>().unwrap(), 0.0);
    assert_eq!(gammas.last().unwrap().parse::<f64>().unwrap(), 0.1);
    assert_eq!(cli(&["zp", "--p", "0"]).0, 1);
    assert_eq!(cli(&["zp", "--gamma=-1"]).0, 1);
}

#[test]
fn demos_pass_with_defaults() {
    let (code, out, _) = cli(&["demo", "diverge"]);
    assert_eq!(code, 0);
    assert!(out.contains("x1=-6e0") && out.contains("overflow_step=") && out.ends_with("PASS\n"), "{out}");
    let (code, out, _) = cli(&["demo", "stuck"]);
    assert_eq!(code, 0);
    assert!(out.contains("max_abs_e1=0e0") && out.ends_with("PASS\n"), "{out}");
    let (code, out, _) = cli(&["demo", "lowerbound", "--n", "8", "--k-steps", "300", "--trials", "60"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("schedule=")).count(), 3);
    assert_eq!(cli(&["demo", "diverge", "--x0", "0"]).0, 1);
    let (code, out, _) = cli(&["demo", "stuck", "--y2", "0.5", "--eta", "0.6", "--steps", "50"]);
    assert_eq!(code, 2, "{out}");
    assert!(out.ends_with("FAIL\n"));
}

#[test]
fn ingest_reports_statistics() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "one.csv");
    fs::write(&f, "#comment\n0,0,3\n").unwrap();
    let (code, out, _) = cli(&["ingest", s(&f), "--rows", "1", "--cols", "1"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "m=1 n=1 count=1 xi=1.000000 fro=3.000000");
    let empty = path(&dir, "empty.csv");
    fs::write(&empty, "# nothing\n").unwrap();
    let (code, out, _) = cli(&["ingest", s(&empty)]);
    assert_eq!((code, out.trim()), (2, "count=0"));
    let bad = path(&dir, "bad.csv");
    fs::write(&bad, "0,0,1\n0,x,2\n").unwrap();
    let (code, _, err) = cli(&["ingest", s(&bad)]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");
    fs::write(&bad, "0,0,1\n5,0,2\n").unwrap();
    let (code, _, err) = cli(&["ingest", s(&bad), "--rows", "2", "--cols", "2"]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");
    assert_eq!(cli(&["ingest", s(&bad), "--rows", "2"]).0, 1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_alecton");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    assert_eq!(status(&["--help"]).status.code(), Some(0));
    assert_eq!(status(&["run", "--help"]).status.code(), Some(0));
    assert_eq!(status(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(status(&["demo", "stuck", "--threads", "0"]).status.code(), Some(1));
    let ok = status(&["demo", "diverge"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));
    assert_eq!(status(&["ingest", "/nonexistent"]).status.code(), Some(1));
}
