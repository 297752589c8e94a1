use std::path::PathBuf;
use std::process::{Command, Output};

fn funceq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funceq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn spec(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "specs", name].iter().collect();
    p.display().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn check_exit_codes() {
    let out = funceq(&["check", &spec("sec5.eq")]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("C = 0.8\n"));

    let out = funceq(&["check", &spec("ex3_7.eq")]);
    assert_eq!(code(&out), 2);
    let text = stdout(&out);
    let row = text.lines().find(|l| l.trim_start().starts_with("2 ")).unwrap();
    assert!(row.contains("0.666666666") && row.ends_with("true"), "{row}");

    assert_eq!(code(&funceq(&["check", &spec("ex3_3.eq")])), 3);
}

#[test]
fn check_json_mirrors_report() {
    let out = funceq(&["check", &spec("ex4_3.eq"), "--format", "json", "--resolution", "1024"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["k"], 1);
    assert_eq!(v["l"], 2);
    assert!((v["c_est"].as_f64().unwrap() - 0.8).abs() < 1e-9);
}

#[test]
fn solve_exit_codes() {
    let out = funceq(&["solve", &spec("sec5.eq")]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("Converged"));

    let out = funceq(&["solve", &spec("ex1_5.eq")]);
    assert_eq!(code(&out), 4);
    assert!(stdout(&out).contains("DivergentOscillating"));

    assert_eq!(code(&funceq(&["solve", &spec("dyadic_fp.eq")])), 4);
    assert_eq!(code(&funceq(&["solve", &spec("sec5.eq"), "--max-iter", "3"])), 5);
    assert_eq!(code(&funceq(&["solve", &spec("sec5.eq"), "--tol", "0"])), 64);
    assert_eq!(code(&funceq(&["solve", &spec("sec5.eq"), "--max-iter", "0"])), 64);
}

#[test]
fn solve_writes_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let solution = dir.path().join("solution.csv");
    let out = funceq(&[
        "solve",
        &spec("sec5.eq"),
        "--resolution",
        "64",
        "--trace",
        trace.to_str().unwrap(),
        "--solution",
        solution.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let trace = std::fs::read_to_string(trace).unwrap();
    assert!(trace.starts_with("k,term_norm,partial_norm,apriori_bound\n0,1,1,"));
    let solution = std::fs::read_to_string(solution).unwrap();
    assert_eq!(solution.lines().count(), 66);
    for line in solution.lines().skip(1) {
        let value: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((value - 5.0).abs() < 1e-5);
    }
}

#[test]
fn output_is_deterministic() {
    let args = ["solve", &spec("ex3_7.eq"), "--format", "json", "--resolution", "256"];
    let a = funceq(&args);
    let b = funceq(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn verify_exit_codes() {
    assert_eq!(
        code(&funceq(&["verify", &spec("ex3_7.eq"), "--reference", "6/(6-5*x)"])),
        0
    );
    assert_eq!(code(&funceq(&["verify", &spec("ex1_5.eq"), "--reference", "0.5"])), 0);
    let out = funceq(&["verify", &spec("sec5.eq"), "--reference", "1"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("residual       8.000000e-1"));
    assert_eq!(code(&funceq(&["verify", &spec("sec5.eq"), "--reference", "1 +"])), 64);
}

#[test]
fn cov_exit_codes() {
    let out = funceq(&["cov", "--f", "mod1(2*x)", "--h", "x^2"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("lhs            0.666666666667"));
    assert_eq!(code(&funceq(&["cov", "--f", "x", "--h", "1"])), 0);
    assert_eq!(code(&funceq(&["cov", "--f", "x", "--h", "x-1"])), 65);
    assert_eq!(
        code(&funceq(&[
            "cov",
            "--f",
            "mod1(2*x)",
            "--h",
            "x",
            "--breakpoints",
            "0,0.5,1",
            "--interval",
            "0.1,0.8"
        ])),
        0
    );
    assert_eq!(
        code(&funceq(&["cov", "--f", "x", "--h", "1", "--interval", "0.5,0.2"])),
        64
    );
}

#[test]
fn corpus_commands() {
    let out = funceq(&["corpus", "--list"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).lines().any(|l| l.starts_with("ex4_2 (")));

    let out = funceq(&["corpus", "--run", "--resolution", "1024"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("7/7 entries passed"));

    let out = funceq(&["corpus", "--run", "--resolution", "1024", "--oracle", "ex4_2=3"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&funceq(&["corpus", "--run", "--oracle", "nope=1"])), 64);
    assert_eq!(code(&funceq(&["corpus"])), 64);
}

#[test]
fn spec_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.eq");
    std::fs::write(&bad, "[equation]\nN = 1\nf1 = x/\ng1 = 1\ng = 1\n").unwrap();
    let out = funceq(&["check", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 64);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.eq:3:8"), "{err}");

    assert_eq!(code(&funceq(&["check", "/nonexistent/file.eq"])), 64);
    assert_eq!(code(&funceq(&["--version"])), 0);
    assert_eq!(code(&funceq(&["frobnicate"])), 64);
}
