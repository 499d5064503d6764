use std::path::Path;
use std::process::{Command, Output};

fn tilegen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tilegen")).args(args).output().expect("run tilegen")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn build_table(dir: &Path, density: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join("t.tile");
    let mut args = vec!["build", "--density", density, "--out", p(&out)];
    args.extend_from_slice(extra);
    let o = tilegen(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn assert_error_line(o: &Output, code: i32, prefix: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("E_")).collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("{prefix}: ")), "{err}");
}

#[test]
fn build_writes_table_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.csv");
    let table = build_table(dir.path(), "builtin:gaussian", &["--target-r", "0.02", "--stats", p(&stats)]);
    let csv = std::fs::read_to_string(&stats).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("level,N,R,E,bytes"));
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(last[2] <= 0.02);
    assert_eq!(std::fs::metadata(&table).unwrap().len(), 50 + 8 * last[1] as u64 + 4);
}

#[test]
fn uniform_density_gives_a_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.csv");
    build_table(dir.path(), "builtin:uniform:a=-1,b=2,h=0.5", &["--stats", p(&stats)]);
    let csv = std::fs::read_to_string(&stats).unwrap();
    assert_eq!(csv.lines().collect::<Vec<_>>(), ["level,N,R,E,bytes", "1,1,0.000000,0.000000,8"]);
}

#[test]
fn stats_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (s1, s2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    build_table(dir.path(), "builtin:cauchy", &["--stats", p(&s1)]);
    build_table(dir.path(), "builtin:cauchy", &["--stats", p(&s2)]);
    assert_eq!(std::fs::read(&s1).unwrap(), std::fs::read(&s2).unwrap());
}

#[test]
fn impossible_target_fails_with_partial_stats() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.csv");
    let out = dir.path().join("t.tile");
    let o = tilegen(&[
        "build", "--density", "builtin:gaussian", "--target-r", "1e-9", "--memory-budget", "1M", "--out", p(&out), "--stats",
        p(&stats),
    ]);
    assert_error_line(&o, 3, "E_MEMORY");
    let csv = std::fs::read_to_string(&stats).unwrap();
    assert!(csv.lines().count() > 2);
    assert!(!out.exists());
}

#[test]
fn sample_is_reproducible_and_counts_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let table = build_table(dir.path(), "builtin:gaussian", &[]);
    let args = ["--seed", "7", "sample", "--table", p(&table), "--density", "builtin:gaussian", "--n", "1000"];
    let (a, b) = (tilegen(&args), tilegen(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 1000);
    let err = stderr(&a);
    assert!(err.contains("accepts=1000") && err.contains("density_evals="), "{err}");

    let other = tilegen(&["--seed", "8", "sample", "--table", p(&table), "--density", "builtin:gaussian", "--n", "1000"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn sample_zero_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let table = build_table(dir.path(), "builtin:gaussian", &[]);
    let o = tilegen(&["sample", "--table", p(&table), "--density", "builtin:gaussian", "--n", "0"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
}

#[test]
fn binary_and_text_formats_agree() {
    let dir = tempfile::tempdir().unwrap();
    let table = build_table(dir.path(), "builtin:exponential", &[]);
    let base = ["sample", "--table", p(&table), "--density", "builtin:exponential", "--n", "500"];
    let text = tilegen(&base);
    let bin = tilegen(&[&base[..], &["--format", "f64le"]].concat());
    let from_text: Vec<f64> = stdout(&text).lines().map(|l| l.parse().unwrap()).collect();
    let from_bin: Vec<f64> = bin.stdout.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(from_text, from_bin);
}

#[test]
fn threaded_sampling_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let table = build_table(dir.path(), "builtin:gaussian", &[]);
    let args = ["--threads", "3", "sample", "--table", p(&table), "--density", "builtin:gaussian", "--n", "1001"];
    let (a, b) = (tilegen(&args), tilegen(&args));
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 1001);
}

#[test]
fn gof_accepts_right_and_rejects_shifted_cdf() {
    let dir = tempfile::tempdir().unwrap();
    let table = build_table(dir.path(), "builtin:gaussian", &[]);
    let samples = dir.path().join("x.bin");
    let o = tilegen(&[
        "sample", "--table", p(&table), "--density", "builtin:gaussian", "--n", "1000000", "--format", "f64le", "--out",
        p(&samples),
    ]);
    assert!(o.status.success());
    let report = |extra: &[&str]| -> serde_json::Value {
        let o = tilegen(&[&["--json", "gof", "--input", p(&samples), "--input-format", "f64le"], extra].concat());
        assert!(o.status.success(), "{}", stderr(&o));
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let ks = report(&["--cdf", "normal:mu=0,sigma=1"]);
    assert_eq!(ks["test"], "kolmogorov_smirnov");
    assert!(ks["p_value"].as_f64().unwrap() > 0.001);
    let chi = report(&["--density", "builtin:gaussian"]);
    assert_eq!(chi["test"], "chi_square");
    assert!(chi["p_value"].as_f64().unwrap() > 0.001);
    assert!(chi["n_bins"].as_u64().unwrap() <= 64);
    let shifted = report(&["--cdf", "normal:mu=1,sigma=1"]);
    assert!(shifted["p_value"].as_f64().unwrap() < 1e-6);
}

#[test]
fn gof_needs_enough_samples() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    std::fs::write(&input, "0.1\n0.2\n").unwrap();
    let o = tilegen(&["gof", "--input", p(&input), "--cdf", "uniform"]);
    assert_error_line(&o, 2, "E_SAMPLES");
}

#[test]
fn stats_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let table = build_table(dir.path(), "builtin:gaussian", &["--level", "6"]);
    let o = tilegen(&["--json", "stats", "--table", p(&table)]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["level"], 6);
    assert_eq!(v["n_tiles"].as_u64().unwrap(), v["n_interior"].as_u64().unwrap() + v["n_border"].as_u64().unwrap());
}

#[test]
fn bench_reports_with_and_without_interleave() {
    let dir = tempfile::tempdir().unwrap();
    let table = build_table(dir.path(), "builtin:gaussian", &[]);
    for extra in [&[][..], &["--interleave", "1M", "--setup"][..]] {
        let o = tilegen(
            &[&["--json", "bench", "--table", p(&table), "--density", "builtin:gaussian", "--n", "200000"], extra].concat(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(v["variates_per_second"].as_f64().unwrap() > 0.0);
        assert_eq!(v["interleaved"], !extra.is_empty());
        assert_eq!(v["setup_seconds"].is_null(), extra.is_empty());
    }
}

#[test]
fn error_paths_have_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_error_line(&tilegen(&["frobnicate"]), 2, "E_USAGE");
    assert_error_line(&tilegen(&["sample", "--n", "5"]), 2, "E_USAGE");
    assert_error_line(&tilegen(&["build", "--density", "builtin:nope", "--out", "x"]), 2, "E_PARAMETER");

    let missing = dir.path().join("missing.tile");
    assert_error_line(&tilegen(&["stats", "--table", p(&missing)]), 4, "E_FORMAT");

    let bad = dir.path().join("bad.tile");
    std::fs::write(&bad, b"TILE garbage").unwrap();
    assert_error_line(&tilegen(&["stats", "--table", p(&bad)]), 4, "E_FORMAT");

    let table = build_table(dir.path(), "builtin:gaussian", &[]);
    let mut bytes = std::fs::read(&table).unwrap();
    bytes[60] ^= 1;
    std::fs::write(&table, &bytes).unwrap();
    assert_error_line(&tilegen(&["stats", "--table", p(&table)]), 4, "E_FORMAT");

    let csv = dir.path().join("pole.csv");
    std::fs::write(&csv, "0,1\n0.5,inf\n1,1\n").unwrap();
    let o = tilegen(&["build", "--density", &format!("table:{}", p(&csv)), "--out", p(&dir.path().join("o.tile"))]);
    assert!(matches!(o.status.code(), Some(2..=4)), "{}", stderr(&o));
}
