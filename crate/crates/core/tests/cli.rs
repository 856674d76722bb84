use std::path::Path;
use std::process::{Command, Output};

use crcalc::config::parse_complex;
use crcalc::linalg::C64;
use crcalc::problems::{example1_closed_form, Example1Problem};

fn crcalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crcalc"))
        .args(args)
        .env_remove("CRCALC_THREADS")
        .output()
        .expect("run crcalc")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(key).filter(|r| r.starts_with(' ')).map(str::trim))
        .unwrap_or_else(|| panic!("no '{key}' line in:\n{out}"))
}

fn default_zopt() -> C64 {
    let p = Example1Problem::synthetic(C64::new(1.0, 1.0), C64::new(0.3, 0.0), C64::new(0.5, -0.25), 0.1, 200, 1).unwrap();
    example1_closed_form(&p).unwrap()
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn newton_on_example1_takes_one_step() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let o = crcalc(&["optimize", "--problem", "example1", "--algorithm", "newton", "--out", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "iterations"), "1");
    assert_eq!(field(&out, "hessian"), "local_min");
    let z = parse_complex(field(&out, "z[0]")).unwrap();
    assert!((z - default_zopt()).norm() <= 1e-9);
    let (_, rows) = read_rows(&trace);
    assert_eq!(rows.len(), 2);
}

#[test]
fn identity_with_small_step_reaches_same_optimum() {
    let o = crcalc(&["optimize", "--problem", "example1", "--algorithm", "identity", "--step", "0.05"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let iters: usize = field(&out, "iterations").parse().unwrap();
    assert!(iters > 1);
    let z = parse_complex(field(&out, "z[0]")).unwrap();
    // |∂ℓ/∂z| ≥ ½(|α| − |β|)²|z − ẑ| for this quadratic loss.
    let grad: f64 = field(&out, "grad_norm").parse().unwrap();
    assert!(grad <= 1e-8);
    let curvature = 0.5 * (2f64.sqrt() - 0.3).powi(2);
    assert!((z - default_zopt()).norm() <= 1e-8 / curvature);
}

#[test]
fn unidentifiable_model_exits_3() {
    let o = crcalc(&["optimize", "--problem", "example1", "--alpha", "1+0j", "--beta", "1+0j"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("Unidentifiable"), "{}", stderr(&o));
}

#[test]
fn iteration_limit_exits_2() {
    let o = crcalc(&["optimize", "--algorithm", "identity", "--step", "0.05", "--max-iters", "5"]);
    assert_eq!(code(&o), 2);
    assert_eq!(field(&stdout(&o), "status"), "max_iters reached");
}

#[test]
fn gauss_newton_runs_on_least_squares_form_only() {
    let o = crcalc(&["optimize", "--problem", "example2", "--algorithm", "quasi-gauss-newton"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = crcalc(&["optimize", "--problem", "example1", "--algorithm", "gauss_newton"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("UnsupportedStrategy"));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "problem = \"example1\"\n[optimizer]\nstep = 1.0\nlearning_rate = 2.0\n").unwrap();
    let o = crcalc(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));

    std::fs::write(&cfg, "[optimizer]\nmax_iters = -3\n").unwrap();
    assert_eq!(code(&crcalc(&["optimize", "--config", cfg.to_str().unwrap()])), 1);
    std::fs::write(&cfg, "[example]\nalpha = \"1+xj\"\n").unwrap();
    let o = crcalc(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("example.alpha"));

    assert_eq!(code(&crcalc(&["optimize", "--step", "-1"])), 1);
    assert_eq!(code(&crcalc(&["optimize", "--config", "/nonexistent/x.toml"])), 1);
    assert_eq!(code(&crcalc(&["frobnicate"])), 1);
    assert_eq!(code(&crcalc(&["--help"])), 0);
}

#[test]
fn config_file_drives_custom_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        r#"
problem = "custom-polynomial"
algorithm = "gauss_newton"

[optimizer]
z0 = ["1+0.5j"]
max_iters = 200
backtracking = "armijo"

[custom]
n = 1
data = ["1+2j", "0.5-1j"]
[[custom.components]]
terms = [{ coef = "1", z = [1] }, { coef = "0.2j", zbar = [1] }]
[[custom.components]]
terms = [{ coef = "0.3", z = [2] }]
"#,
    )
    .unwrap();
    let o = crcalc(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
    let o = crcalc(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("classified nonholomorphic, expected nonholomorphic"));
}

#[test]
fn check_passes_and_reports_holomorphy() {
    let o = crcalc(&["check", "--problem", "example1"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    assert!(!out.contains("FAIL"));
    assert!(out.contains("classified nonholomorphic"));

    let o = crcalc(&["check", "--problem", "example1", "--beta", "0"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("classified holomorphic, expected holomorphic"));

    let o = crcalc(&["check", "--problem", "example2"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn corrupted_gradient_fails_check() {
    let o = crcalc(&["check", "--problem", "example1", "--corrupt-gradient"]);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("ConjugationMismatch"));
}

#[test]
fn lms_reaches_wiener_solution() {
    let o = crcalc(&["lms", "--n", "4", "--step", "0.05", "--steps", "5000", "--noise", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mis: f64 = field(&stdout(&o), "misalignment").parse().unwrap();
    assert!(mis <= 1e-3, "{mis}");
}

#[test]
fn lms_with_oversized_step_diverges() {
    // λ_max(I) = 1, so 2/λ_max·1.5 = 3.
    for seed in ["1", "2", "3"] {
        let o = crcalc(&["lms", "--step", "3.5", "--steps", "5000", "--seed", seed]);
        assert_eq!(code(&o), 3, "seed {seed}");
        assert!(stderr(&o).contains("Diverged"));
    }
}

#[test]
fn lms_zero_steps_writes_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("lms.csv");
    let o = crcalc(&["lms", "--steps", "0", "--out", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let (header, rows) = read_rows(&trace);
    assert_eq!(header, ["step", "smoothed_e2", "misalignment"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "0");
}

#[test]
fn traces_are_byte_identical_and_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 2] = [
        &["optimize", "--algorithm", "quasi_newton", "--step", "0.5", "--seed", "7"],
        &["lms", "--steps", "300", "--seed", "7"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("a{i}.csv"));
        let b = dir.path().join(format!("b{i}.csv"));
        for p in [&a, &b] {
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--out", p.to_str().unwrap()]);
            assert_eq!(code(&crcalc(&full)), 0);
        }
        let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert!(!ba.is_empty());
        assert_eq!(ba, bb);

        let (header, rows) = read_rows(&a);
        for row in rows {
            assert_eq!(row.len(), header.len());
            for (h, v) in header.iter().zip(&row) {
                if v.is_empty() {
                    continue;
                }
                match h.as_str() {
                    "iter" | "step" => {
                        v.parse::<usize>().unwrap();
                    }
                    "q_positive_definite" => {
                        v.parse::<bool>().unwrap();
                    }
                    _ => {
                        let x: f64 = v.parse().unwrap();
                        assert_eq!(crcalc::trace::fmt_f64(x), *v);
                    }
                }
            }
        }
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for t in ["1", "4"] {
        let p = dir.path().join(format!("t{t}.csv"));
        let o = Command::new(env!("CARGO_BIN_EXE_crcalc"))
            .args(["optimize", "--problem", "example2", "--out", p.to_str().unwrap()])
            .env("CRCALC_THREADS", t)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        files.push(std::fs::read(p).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let o = Command::new(env!("CARGO_BIN_EXE_crcalc")).arg("check").env("CRCALC_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 1);
}
