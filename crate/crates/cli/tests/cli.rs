use std::path::Path;
use std::process::{Command, Output};

fn trinelhv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trinelhv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn hollow_triangle_report() {
    let o = trinelhv(&["jm", "--trine", "--eta", "0.67"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert_eq!(s.matches("compatible yes").count(), 3, "{s}");
    assert!(s.contains("triple {0 1 2}: compatible no"));
    assert!(s.contains("hollow triangle: yes"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&trinelhv(&[])), 2);
    assert_eq!(code(&trinelhv(&["frobnicate"])), 2);
    assert_eq!(code(&trinelhv(&["lp"])), 2);
    assert_eq!(code(&trinelhv(&["lp", "--theta", "1.2"])), 2);
    assert_eq!(code(&trinelhv(&["lp", "--theta", "x"])), 2);
    assert_eq!(code(&trinelhv(&["simulate", "--eta", "1.5"])), 2);
    assert_eq!(code(&trinelhv(&["chain", "--alpha", "0.4"])), 2);
    assert_eq!(code(&trinelhv(&["--help"])), 0);
}

#[test]
fn simulate_threshold_exit_codes() {
    let ok = trinelhv(&["simulate", "--eta", "0.7"]);
    assert_eq!(code(&ok), 0);
    assert!(stdout(&ok).contains("setting 0: X 0.700000, Z 0, coin 0.300000"));
    assert_eq!(code(&trinelhv(&["simulate", "--eta", "0.74"])), 1);
}

#[test]
fn six_significant_digits_in_lp() {
    let o = trinelhv(&["lp", "--theta", "0.7853981633974483", "--phi", "0.1192", "--alpha", "0"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let value = s.trim().rsplit(' ').next().unwrap();
    assert_eq!(value.len(), "0.680869".len(), "{s}");
    assert!((value.parse::<f64>().unwrap() - 0.6808).abs() <= 2e-3);
}

#[test]
fn shrink_factor_alpha_zero() {
    let o = trinelhv(&["etab", "--alpha", "0"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    let first = s.lines().next().unwrap();
    let v: f64 = first.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((v - 0.9268).abs() <= 2e-3, "{first}");
}

#[test]
fn raised_target_certificate_fails() {
    let o = trinelhv(&["certify", "--target", "0.70"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL: uncovered"));
}

fn chain_to(path: &Path) -> Output {
    trinelhv(&[
        "chain",
        "--alpha",
        "5/6",
        "--theta0",
        "0.3",
        "--delta-phi",
        "1",
        "--max-points",
        "3",
        "--out",
        path.to_str().unwrap(),
    ])
}

#[test]
fn identical_flags_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(code(&chain_to(&a)), 0);
    assert_eq!(code(&chain_to(&b)), 0);
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().next().unwrap(), "i,theta_i,eta,phi_min");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn json_mirrors_csv_fields() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("c.csv");
    let json_path = dir.path().join("c.json");
    assert_eq!(code(&chain_to(&csv_path)), 0);
    assert_eq!(code(&chain_to(&json_path)), 0);
    let csv_text = std::fs::read_to_string(&csv_path).unwrap();
    let header: Vec<&str> = csv_text.lines().next().unwrap().split(',').collect();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let rows = json.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let mut keys: Vec<&str> = rows[0].as_object().unwrap().keys().map(String::as_str).collect();
    let mut want = header.clone();
    keys.sort_unstable();
    want.sort_unstable();
    assert_eq!(keys, want);
}

#[test]
fn resumed_chain_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let p = path.to_str().unwrap();
    let base = [
        "chain",
        "--alpha",
        "5/6",
        "--theta0",
        "0.3",
        "--delta-phi",
        "1",
        "--resume",
        p,
    ];
    assert_eq!(code(&trinelhv(&[&base[..], &["--max-points", "2"]].concat())), 0);
    assert_eq!(code(&trinelhv(&[&base[..], &["--max-points", "3"]].concat())), 0);
    let reference = dir.path().join("ref.csv");
    chain_to(&reference);
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&reference).unwrap());
}

#[test]
fn steer_roundtrip_passes() {
    let o = trinelhv(&["steer-roundtrip", "--theta", "0.3", "--phi", "0.7"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.contains("recovered θ = 0.300000, φ = 0.700000"), "{s}");
    assert!(s.trim_end().ends_with("PASS"));
}

#[test]
fn i3322_witness() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.csv");
    let o = trinelhv(&["innn22", "--n", "3", "--witness", w.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("FOUND"));
    let dump = std::fs::read_to_string(&w).unwrap();
    assert_eq!(dump.lines().next().unwrap(), "part,index,row,col,value");
    // state (9) + 3 Alice and 3 Bob 3×3 matrices
    assert_eq!(dump.lines().count(), 1 + 9 + 6 * 9);
}

#[test]
fn chsh_at_maximal_entanglement() {
    let o = trinelhv(&[
        "chsh",
        "--theta",
        "0.7853981633974483",
        "--out",
        "/dev/null",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("Horodecki 2.82843"));
}
