use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlivp"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Scratch {
    dir: TempDir,
}

impl Scratch {
    fn new() -> Self {
        Scratch {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn config(&self, name: &str, doc: &Value) -> String {
        let p = self.path(name);
        std::fs::write(&p, serde_json::to_string_pretty(doc).unwrap()).unwrap();
        p
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }
}

fn example35(k: f64, n: usize, count: usize) -> Value {
    json!({
        "version": 1,
        "problem": {
            "t0": 1.0,
            "t_max": 2.0,
            "grid": {"h": 1e-3},
            "truncation": {"N": n},
            "rhs": {"kind": "builtin", "name": "example35", "params": {"k": k}},
            "seminorms": {"P": count}
        }
    })
}

fn scalar(source: &str, masses: Value, h: f64) -> Value {
    json!({
        "version": 1,
        "problem": {
            "t0": 1.0,
            "t_max": 2.0,
            "grid": {"h": h},
            "truncation": {"N": 1},
            "rhs": {"kind": "dsl", "source": source},
            "functionals": [{"masses": masses}],
            "envelopes": {"A": "0", "B": "1", "C": "1"},
            "seminorms": {"P": 1}
        }
    })
}

/// `(t, values)` rows of a trajectory CSV.
fn csv_rows(text: &str) -> Vec<(f64, Vec<f64>)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let mut cells = l.split(',').map(|c| c.parse::<f64>().unwrap());
            let t = cells.next().unwrap();
            (t, cells.collect())
        })
        .collect()
}

#[test]
fn check_example35_passes_and_fails() {
    let s = Scratch::new();
    let cfg = s.config("pass.json", &example35(0.5, 4, 3));
    let json_out = s.path("report.json");
    let out = run(&["check", &cfg, "--json", &json_out]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&s.read("report.json")).unwrap();
    let records = report["records"].as_array().unwrap();
    assert_eq!(records.len(), 3);
    for r in records {
        assert!((r["lhs"].as_f64().unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert_eq!(r["pass"], true);
    }
    assert_eq!(report["envelope_sampling"]["seed"], 42);
    assert_eq!(report["envelope_sampling"]["violations"].as_array().unwrap().len(), 0);

    let cfg = s.config("fail.json", &example35(0.7, 4, 3));
    let out = run(&["check", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("overall: fail"));
}

#[test]
fn check_p_max_overrides() {
    let s = Scratch::new();
    let cfg = s.config("c.json", &example35(0.5, 8, 3));
    let json_out = s.path("r.json");
    let out = run(&["check", &cfg, "--p-max", "6", "--json", &json_out, "--samples", "0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&s.read("r.json")).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 6);
    assert!(report["envelope_sampling"].is_null());
}

#[test]
fn unit_functional_is_a_hypothesis_failure() {
    let s = Scratch::new();
    let cfg = s.config("u.json", &scalar("1", json!([{"t": 0.3, "w": 1.0}]), 1e-2));
    let out = run(&["check", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("hypothesis violated"));
    let out = run(&["solve", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("alpha"));
}

#[test]
fn solve_constant_oracle() {
    let s = Scratch::new();
    let csv = s.path("x.csv");
    let report = s.path("r.json");
    for method in ["picard", "shoot"] {
        let out = run(&[
            "solve",
            shipped("constant_oracle.json").to_str().unwrap(),
            "--method",
            method,
            "--out",
            &csv,
            "--report",
            &report,
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let text = s.read("x.csv");
        assert!(text.starts_with("t,x_1\n"));
        let rows = csv_rows(&text);
        let (_, at_one) = rows.iter().find(|(t, _)| *t == 1.0).unwrap();
        assert!((at_one[0] - 1.5).abs() <= 1e-9);
        let r: Value = serde_json::from_str(&s.read("r.json")).unwrap();
        assert_eq!(r["method"], method);
        for key in ["iterations", "final_residual", "nonlocal_residuals", "seminorms"] {
            assert!(!r[key].is_null(), "{key}");
        }
        let sn = &r["seminorms"][0];
        for key in ["p", "P", "Q", "R", "rho"] {
            assert!(sn[key].is_number(), "{key}");
        }
    }
}

#[test]
fn solve_zero_rhs() {
    let s = Scratch::new();
    let cfg = s.config("z.json", &scalar("0", json!([{"t": 0.5, "w": 0.5}]), 1e-2));
    let report = s.path("r.json");
    let csv = s.path("x.csv");
    let out = run(&["solve", &cfg, "--out", &csv, "--report", &report]);
    assert_eq!(code(&out), 0);
    assert!(csv_rows(&s.read("x.csv")).iter().all(|(_, v)| v[0] == 0.0));
    let r: Value = serde_json::from_str(&s.read("r.json")).unwrap();
    let it = r["iterations"].as_u64().unwrap();
    assert!((1..=2).contains(&it));
}

#[test]
fn picard_and_shoot_csvs_agree() {
    let s = Scratch::new();
    let cfg = s.config("e.json", &example35(0.5, 16, 1));
    let (a, b) = (s.path("a.csv"), s.path("b.csv"));
    assert_eq!(code(&run(&["solve", &cfg, "--method", "picard", "--out", &a])), 0);
    assert_eq!(code(&run(&["solve", &cfg, "--method", "shoot", "--out", &b])), 0);
    let (ra, rb) = (csv_rows(&s.read("a.csv")), csv_rows(&s.read("b.csv")));
    assert_eq!(ra.len(), rb.len());
    for ((ta, va), (tb, vb)) in ra.iter().zip(&rb) {
        assert_eq!(ta, tb);
        assert_eq!(va.len(), 16);
        for (x, y) in va.iter().zip(vb) {
            assert!((x - y).abs() <= 1e-6);
        }
    }
}

#[test]
fn outputs_are_deterministic() {
    let s = Scratch::new();
    let cfg = shipped("example35_dsl.json");
    let cfg = cfg.to_str().unwrap();
    let mut seen = Vec::new();
    for i in 0..2 {
        let (csv, rep, chk) = (s.path(&format!("x{i}.csv")), s.path(&format!("r{i}.json")), s.path(&format!("c{i}.json")));
        assert_eq!(code(&run(&["solve", cfg, "--out", &csv, "--report", &rep])), 0);
        assert_eq!(code(&run(&["check", cfg, "--json", &chk])), 0);
        seen.push((s.read(&format!("x{i}.csv")), s.read(&format!("r{i}.json")), s.read(&format!("c{i}.json"))));
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn csv_values_round_trip() {
    let s = Scratch::new();
    let csv = s.path("x.csv");
    assert_eq!(code(&run(&["solve", shipped("example35.json").to_str().unwrap(), "--out", &csv])), 0);
    let text = s.read("x.csv");
    let cell = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    let v: f64 = cell.parse().unwrap();
    assert_eq!(format!("{v:.16e}"), cell);
}

#[test]
fn study_example35() {
    let s = Scratch::new();
    let out_csv = s.path("s.csv");
    let cfg = s.config("e.json", &example35(0.5, 4, 4));
    let out = run(&["study", &cfg, "--truncations", "4,8,16,32", "--out", &out_csv]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = s.read("s.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,d,iterations,status"));
    let d: Vec<f64> = lines.filter_map(|l| l.split(',').nth(1).and_then(|c| c.parse().ok())).collect();
    assert_eq!(d.len(), 3);
    assert!(d.windows(2).all(|w| w[1] <= w[0]));
    assert!(d[2] <= 1e-6);
}

#[test]
fn study_uncoupled_and_single_level() {
    let s = Scratch::new();
    let mut doc = example35(0.5, 2, 2);
    doc["problem"]["rhs"] = json!({"kind": "builtin", "name": "uncoupled_exp"});
    let cfg = s.config("u.json", &doc);
    let out = run(&["study", &cfg, "--truncations", "2,4,8", "--method", "shoot"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(stdout.contains("\n2,0.0000000000000000e0,"));
    assert!(stdout.contains("\n4,0.0000000000000000e0,"));

    let out = run(&["study", &cfg, "--truncations", "4"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("\n4,,"));
}

#[test]
fn study_rejects_finite_systems() {
    let out = run(&["study", shipped("affine3.json").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn numerical_failures_exit_2() {
    let s = Scratch::new();
    let cfg = s.config("e.json", &example35(0.5, 4, 2));
    let out = run(&["solve", &cfg, "--max-iter", "2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("2 iterations"), "{}", stderr(&out));

    let cfg = s.config("pole.json", &scalar("1/(t - 0.5)", json!([]), 0.25));
    let out = run(&["solve", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("t = 0.5"), "{}", stderr(&out));
}

fn assert_config_error(doc: &Value, needle: &str) {
    let s = Scratch::new();
    let cfg = s.config("bad.json", doc);
    for cmd in ["check", "solve"] {
        let out = run(&[cmd, &cfg]);
        assert_eq!(code(&out), 3, "{cmd}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "{cmd}: expected `{needle}` in {}", stderr(&out));
    }
}

#[test]
fn strict_schema() {
    let base = example35(0.5, 4, 2);

    let mut doc = base.clone();
    doc["problem"]["grid"]["hh"] = json!(0.1);
    assert_config_error(&doc, "hh");

    let mut doc = base.clone();
    doc["extra"] = json!(1);
    assert_config_error(&doc, "extra");

    let mut doc = base.clone();
    doc["problem"]["truncation"]["closur"] = json!("zero");
    assert_config_error(&doc, "closur");

    let mut doc = base.clone();
    doc["problem"]["truncation"]["closure"] = json!("clamp");
    assert_config_error(&doc, "problem.truncation.closure");

    let mut doc = base.clone();
    doc["version"] = json!(2);
    assert_config_error(&doc, "version");

    let mut doc = base.clone();
    doc["problem"]["grid"]["h"] = json!(-1.0);
    assert_config_error(&doc, "problem.grid.h");

    let mut doc = base.clone();
    doc["problem"]["t0"] = json!(3.0);
    assert_config_error(&doc, "problem.t0");

    let mut doc = base.clone();
    doc["problem"]["rhs"]["params"]["kk"] = json!(1);
    assert_config_error(&doc, "problem.rhs.params.kk");

    let mut doc = base.clone();
    doc["problem"]["rhs"]["name"] = json!("example36");
    assert_config_error(&doc, "example36");

    let mut doc = scalar("1", json!([{"t": 0.5, "weight": 0.5}]), 1e-2);
    assert_config_error(&doc, "weight");
    doc["problem"]["functionals"] = json!([{"masses": [{"t": 0.5, "w": 0.5}]}]);
    doc["problem"]["rhs"]["source"] = json!("sin(t");
    assert_config_error(&doc, "problem.rhs.source");
    doc["problem"]["rhs"]["source"] = json!("foo(t)");
    assert_config_error(&doc, "foo");
    doc["problem"]["rhs"]["source"] = json!("1");
    doc["problem"]["envelopes"]["D"] = json!(1);
    assert_config_error(&doc, "D");
}

#[test]
fn config_and_usage_errors_exit_3() {
    let out = run(&["check", "/nonexistent/config.json"]);
    assert_eq!(code(&out), 3);
    let out = run(&["solve", shipped("example35.json").to_str().unwrap(), "--method", "euler"]);
    assert_eq!(code(&out), 3);
    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 3);
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn shipped_configs_check() {
    for name in ["example35.json", "constant_oracle.json", "example35_dsl.json", "affine3.json"] {
        let out = run(&["check", shipped(name).to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        assert!(!stderr(&out).contains("envelope exceeded"), "{name}");
    }
}
