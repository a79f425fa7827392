use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn posidyn(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posidyn"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("POSIDYN_OUT")
        .output()
        .expect("binary runs")
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

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn vector(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn system_file(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const EXAMPLE4_FILE: &str = r#"
dim = 2
f = ["-2*x1 + x2/(x2 + 2)", "-2*x2 + x1/(x1 + 2)"]
g = ["x1", "x2"]

[domain]
lo = [-1.99, -1.99]
hi = [1e6, 1e6]
"#;

#[test]
fn simulate_example4_converges() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["simulate", "--system", "example4", "--history", "0.5", "--t-end", "80"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let x = vector(&report(d.path())["terminal_state"]);
    assert!(x.iter().all(|v| v.abs() < 1e-4), "{x:?}");
    let svg = std::fs::read_to_string(d.path().join("trajectory.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn simulate_example2_stays_above_w() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["simulate", "--system", "example2", "--history", "1", "--t-end", "60"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(&d.path().join("trajectory.csv"));
    assert_eq!(header, "t,x1,x2");
    assert!(rows.last().unwrap()[0] == 60.0);
    for r in &rows {
        assert!(r[1] >= 1.0 - 1e-7 && r[2] >= 1.0 - 1e-7, "{r:?}");
    }
}

#[test]
fn simulate_example1_converges_to_lower_equilibrium() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["simulate", "--system", "example1", "--history", "(-2,-4)", "--t-end", "60"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let x = vector(&report(d.path())["terminal_state"]);
    assert!((x[0] + 1.0).abs() < 1e-3 && (x[1] + 3.0).abs() < 1e-3, "{x:?}");
    let (_, rows) = csv_rows(&d.path().join("trajectory.csv"));
    // History interval [-5, 0) is part of the output.
    assert_eq!(rows[0][0], -5.0);
}

#[test]
fn simulate_decay_file_and_time_varying_history() {
    let d = TempDir::new().unwrap();
    let f = system_file(&d, "decay.toml", "dim = 1\nf = [\"-x1\"]\ng = [\"0.5*x1\"]\ndelay = 1\n");
    let o = posidyn(
        d.path(),
        &["simulate", "--system", f.to_str().unwrap(), "--history", "1 + 0.5*sin(t)", "--t-end", "2", "--step", "1e-3"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = csv_rows(&d.path().join("trajectory.csv"));
    let first = &rows[0];
    assert_eq!(first[0], -1.0);
    assert!((first[1] - (1.0 + 0.5 * (-1.0_f64).sin())).abs() < 1e-15);
    // On [0, 1] the delayed term is 0.5 + 0.25 sin(t - 1); integrate it exactly.
    let at_one = rows.iter().find(|r| (r[0] - 1.0).abs() < 1e-12).unwrap();
    let exact = {
        // x' = -x + 0.5 + 0.25 sin(t - 1), x(0) = 1.
        let e = (-1.0_f64).exp();
        let a = 0.25 / 2.0;
        // Particular solution a (sin(t-1) - cos(t-1)).
        let part = |t: f64| a * ((t - 1.0).sin() - (t - 1.0).cos());
        0.5 + part(1.0) + (1.0 - 0.5 - part(0.0)) * e
    };
    assert!((at_one[1] - exact).abs() < 1e-9, "{} vs {exact}", at_one[1]);
}

#[test]
fn constant_delays_flag_changes_the_system() {
    let d = TempDir::new().unwrap();
    let a = posidyn(d.path(), &["simulate", "--system", "example2", "--t-end", "5"]);
    let x = vector(&report(d.path())["terminal_state"]);
    let b = posidyn(d.path(), &["simulate", "--system", "example2", "--t-end", "5", "--constant-delays"]);
    let y = vector(&report(d.path())["terminal_state"]);
    assert_eq!((code(&a), code(&b)), (0, 0));
    assert_ne!(x, y);
    // From the super-equilibrium (1, 1) the comparison run stays below.
    assert!(y.iter().zip(&x).all(|(a, b)| a <= &(b + 1e-6)), "{y:?} vs {x:?}");
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["simulate", "--system", "example3", "--history", "(2,1)", "--t-end", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    assert!(!text.contains('\r'));
    for line in text.lines().skip(1) {
        for field in line.split(',') {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), field);
        }
    }
}

#[test]
fn outputs_are_deterministic() {
    let d = TempDir::new().unwrap();
    let args = ["simulate", "--system", "example1", "--history", "(0,1)", "--t-end", "20"];
    assert_eq!(code(&posidyn(d.path(), &args)), 0);
    let csv1 = std::fs::read(d.path().join("trajectory.csv")).unwrap();
    let rep1 = std::fs::read(d.path().join("report.json")).unwrap();
    assert_eq!(code(&posidyn(d.path(), &args)), 0);
    assert_eq!(csv1, std::fs::read(d.path().join("trajectory.csv")).unwrap());
    assert_eq!(rep1, std::fs::read(d.path().join("report.json")).unwrap());

    let args = ["certify", "--system", "example2", "--mode", "disprove", "--grid", "0", "--seed", "7"];
    assert_eq!(code(&posidyn(d.path(), &args)), 0);
    let c1 = std::fs::read(d.path().join("certificate.json")).unwrap();
    assert_eq!(code(&posidyn(d.path(), &args)), 0);
    assert_eq!(c1, std::fs::read(d.path().join("certificate.json")).unwrap());
    let cert: Value = serde_json::from_slice(&c1).unwrap();
    assert_eq!(cert["seed"], 7);
}

#[test]
fn env_var_sets_output_directory() {
    let d = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_posidyn"))
        .args(["simulate", "--system", "example4", "--t-end", "1"])
        .env("POSIDYN_OUT", d.path().join("via_env"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(d.path().join("via_env/trajectory.csv").exists());
}

#[test]
fn check_example4_passes() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["check", "--system", "example4", "--box", "0:3", "--alpha", "1"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r = report(d.path());
    let names: Vec<&str> = r["verdicts"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for want in ["cooperative_f", "order_preserving_g", "sub_homogeneous_f", "sub_homogeneous_g", "positivity"] {
        assert!(names.contains(&want), "{names:?}");
    }
    assert!(r["verdicts"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn check_example1_not_positive() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["check", "--system", "example1", "--checks", "positivity"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL"));
    assert_eq!(report(d.path())["verdicts"][0]["passed"], false);
}

#[test]
fn check_identity_g_is_order_preserving() {
    let d = TempDir::new().unwrap();
    let f = system_file(&d, "id.toml", "dim = 3\nf = [\"-x1\", \"-x2*x3\", \"sin(x1)\"]\ng = [\"x1\", \"x2\", \"x3\"]\n");
    let o = posidyn(
        d.path(),
        &["check", "--system", f.to_str().unwrap(), "--box", "(-5,-1,0):(5,2,9)", "--checks", "order-preserving"],
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn check_homogeneous_is_opt_in() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["check", "--system", "example4", "--checks", "homogeneous"]);
    // x2/(x2 + 2) is not homogeneous.
    assert_eq!(code(&o), 1);
    let o = posidyn(d.path(), &["check", "--system", "linear_demo", "--checks", "homogeneous"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn certify_box_example1() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["certify", "--system", "example1", "--mode", "box", "--w", "(-3,-5)", "--v", "(1,-1)"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("verified      true"));
    let cert: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("certificate.json")).unwrap()).unwrap();
    let mut keys: Vec<&str> = cert.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        ["box", "equilibrium", "kind", "residual_v", "residual_w", "seed", "v", "verified", "w"]
    );
    assert_eq!(cert["kind"], "box_stability");
    let x = vector(&cert["equilibrium"]);
    assert!((x[0] + 1.0).abs() < 1e-9 && (x[1] + 3.0).abs() < 1e-9);
    assert_eq!(vector(&cert["residual_w"]), vec![2.0, 76.0]);
    assert_eq!(vector(&cert["residual_v"]), vec![-2.0, -4.0]);
}

#[test]
fn certify_box_rejects_wrong_corners() {
    let d = TempDir::new().unwrap();
    // [(-3,-5),(1,5)] holds all three equilibria.
    let o = posidyn(d.path(), &["certify", "--system", "example1", "--mode", "box", "--w", "(-3,-5)", "--v", "(1,5)"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("verified      false"));
}

#[test]
fn certify_box_names_failed_hypothesis() {
    let d = TempDir::new().unwrap();
    let f = system_file(&d, "nc.toml", "dim = 2\nf = [\"-x1 - x2\", \"-x2\"]\ng = [0, 0]\n");
    let o = posidyn(
        d.path(),
        &["certify", "--system", f.to_str().unwrap(), "--mode", "box", "--w", "-1", "--v", "1"],
    );
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("cooperative"), "{}", stderr(&o));
}

#[test]
fn certify_gas_example4() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["certify", "--system", "example4", "--mode", "gas"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cert: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["kind"], "gas");
    assert_eq!(cert["verified"], true);
    assert!(vector(&cert["v"]).iter().all(|v| *v > 0.0));
    assert!(vector(&cert["residual_v"]).iter().all(|v| *v < 0.0));
}

#[test]
fn certify_gas_example3_refuses() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["certify", "--system", "example3", "--mode", "gas"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("sub_homogeneous_f"), "{}", stderr(&o));
}

#[test]
fn certify_disprove_example2_and_example3() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["certify", "--system", "example2", "--mode", "disprove", "--search-box", "0:2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = posidyn(d.path(), &["certify", "--system", "example3", "--mode", "disprove", "--x-star", "0"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("no certificate"));
}

#[test]
fn certify_linear_scalar_infeasible() {
    let d = TempDir::new().unwrap();
    let o = posidyn(d.path(), &["certify", "--mode", "linear", "--a", "[[-1]]", "--b", "[[2]]"]);
    assert_ne!(code(&o), 0);
    assert!(stdout(&o).contains("verified      false"));
    let o = posidyn(d.path(), &["certify", "--mode", "linear", "--a", "[[-2]]", "--b", "[[1]]"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = posidyn(d.path(), &["certify", "--system", "linear_demo", "--mode", "linear"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = posidyn(d.path(), &["certify", "--mode", "linear", "--a", "[[-1]]", "--b", "[[-2]]"]);
    assert_eq!(code(&o), 64);
}

#[test]
fn reproduce_examples() {
    let d = TempDir::new().unwrap();
    for id in ["example1", "example2", "example3", "example4", "linear_demo"] {
        let o = posidyn(d.path(), &["reproduce", id]);
        assert_eq!(code(&o), 0, "{id}: {}{}", stdout(&o), stderr(&o));
        let dir = d.path().join(id);
        let r = report(&dir);
        assert_eq!(r["success"], true);
        for f in r["files"].as_array().unwrap() {
            assert!(dir.join(f.as_str().unwrap()).exists(), "{id}: {f}");
        }
    }
    let files = report(&d.path().join("example1"))["files"].clone();
    let files: Vec<&str> = files.as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(files.contains(&"certificate_box1.json") && files.contains(&"certificate_box2.json"));
    assert!(files.contains(&"trajectory_box1.csv") && files.contains(&"trajectory_box2.svg"));
    let ex3 = report(&d.path().join("example3"));
    let claim = ex3["verdicts"].as_array().unwrap().iter().find(|c| c["name"] == "trajectory_nonconvergent").unwrap();
    assert_eq!(claim["passed"], true);
}

#[test]
fn usage_errors() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&posidyn(d.path(), &["reproduce", "example9"])), 64);
    assert_eq!(code(&posidyn(d.path(), &["simulate"])), 64);
    assert_eq!(code(&posidyn(d.path(), &["simulate", "--system", "example1", "--history", "(1,2,3)"])), 64);
    assert_eq!(code(&posidyn(d.path(), &["certify", "--system", "example1", "--mode", "box"])), 64);
    assert_eq!(code(&posidyn(d.path(), &["--help"])), 0);
}

#[test]
fn system_file_errors() {
    let d = TempDir::new().unwrap();
    let f = system_file(&d, "bad.toml", "dim = 2\nf = [\"x1\", \"x3 + 1\"]\ng = [0, 0]\n");
    let o = posidyn(d.path(), &["simulate", "--system", f.to_str().unwrap()]);
    assert_eq!(code(&o), 64);
    let err = stderr(&o);
    assert!(err.contains("x3") && err.contains("line 2, column 13"), "{err}");

    let f = system_file(&d, "short.toml", "dim = 2\nf = [\"-x1\"]\ng = [0, 0]\n");
    let o = posidyn(d.path(), &["simulate", "--system", f.to_str().unwrap()]);
    assert_eq!(code(&o), 64);
    assert!(stderr(&o).contains("expected 2"), "{}", stderr(&o));

    let o = posidyn(d.path(), &["simulate", "--system", "missing/file.toml"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn example4_file_matches_builtin() {
    let d = TempDir::new().unwrap();
    let f = system_file(&d, "ex4.toml", EXAMPLE4_FILE);
    let path = f.to_str().unwrap();
    let o = posidyn(d.path(), &["simulate", "--system", path, "--history", "(0.3,2.5)", "--t-end", "10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let from_file = std::fs::read(d.path().join("trajectory.csv")).unwrap();
    let o = posidyn(d.path(), &["simulate", "--system", "example4", "--history", "(0.3,2.5)", "--t-end", "10"]);
    assert_eq!(code(&o), 0);
    let builtin = std::fs::read(d.path().join("trajectory.csv")).unwrap();
    // Same arithmetic in a different order: compare values, not bytes.
    let parse = |b: &[u8]| -> Vec<f64> {
        String::from_utf8_lossy(b)
            .lines()
            .skip(1)
            .flat_map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .collect()
    };
    let (a, b) = (parse(&from_file), parse(&builtin));
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + y.abs())));
    let o = posidyn(d.path(), &["certify", "--system", path, "--mode", "gas"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn integration_failure_exit_code() {
    let d = TempDir::new().unwrap();
    let f = system_file(&d, "blowup.toml", "dim = 1\nf = [\"x1^2\"]\ng = [0]\n");
    let o = posidyn(d.path(), &["simulate", "--system", f.to_str().unwrap(), "--history", "2", "--t-end", "5"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}
