use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pluriclosed"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn line<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

#[test]
fn validate_example1_is_skt_but_not_two_step() {
    let o = run(&["validate", "catalog:example1"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(line(&s, "SKT:").starts_with("SKT: true"));
    assert!(line(&s, "two_step:").starts_with("two_step: false"));
}

#[test]
fn validate_example2_is_not_skt() {
    let o = run(&["validate", "catalog:example2"]);
    let s = stdout(&o);
    assert!(line(&s, "SKT:").starts_with("SKT: false"));
    assert!(line(&s, "two_step:").starts_with("two_step: true"));
}

#[test]
fn round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("kt4.txt");
    let o = run(&["catalog", "kt4", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("SKT: true"));
}

#[test]
fn malformed_input_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.txt");
    std::fs::write(&p, "name x\ndim 4\nbracket\n1 2 4 -1\nJ\n0 -1 0 0\n").unwrap();
    let o = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":7:"));
    let o = run(&["validate", dir.path().join("missing.txt").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_hermitian_metric_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("skew.txt");
    let text = String::from_utf8(run(&["catalog", "kt4"]).stdout)
        .unwrap()
        .replace("g\n1.0 0.0 0.0 0.0\n0.0 1.0", "g\n1.0 0.0 0.0 0.0\n0.0 2.0");
    std::fs::write(&p, text).unwrap();
    let o = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("hermitian: false"));
}

#[test]
fn rho_two_step_formula_refuses_example1() {
    let o = run(&["rho", "catalog:example1", "--formula", "two-step"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["rho", "catalog:example1", "--formula", "general"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn rho_is_frame_independent() {
    let a = stdout(&run(&["rho", "catalog:example2", "--output", "csv"]));
    let b = stdout(&run(&["rho", "catalog:example2", "--output", "csv", "--frame-seed", "11"]));
    assert!(a.starts_with("i,j,rho,rho11\n"));
    let parse = |s: &str| -> Vec<f64> {
        s.lines()
            .skip(1)
            .flat_map(|l| l.split(',').skip(2).map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .collect()
    };
    let (a, b) = (parse(&a), parse(&b));
    assert_eq!(a.len(), 2 * 15);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
}

#[test]
fn kt4_pcf_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("kt4.csv");
    let o = run(&["flow", "catalog:kt4", "--kind", "pcf", "--t-end", "10", "--rtol", "1e-10", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let last: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    assert_eq!(last[col("t")], 10.0);
    assert!((last[col("g_1_1")] - 21f64.sqrt()).abs() < 1e-5);
    assert!((last[col("g_3_3")] - 1.0).abs() < 1e-12);
}

#[test]
fn both_kinds_agree_and_write_two_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let o = run(&["flow", "catalog:kt4", "--kind", "both", "--t-end", "3", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(line(&stdout(&o), "equivalence:").starts_with("equivalence: pass"));
    assert!(dir.path().join("run.pcf.csv").exists());
    assert!(dir.path().join("run.bracket.csv").exists());
}

#[test]
fn bracket_flow_needs_two_step() {
    let o = run(&["flow", "catalog:example1", "--kind", "bracket"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(run(&["flow", "catalog:kt4", "--t-end", "-1"]).status.code(), Some(3));
    assert_eq!(run(&["search", "--dims", "4", "--out", "x"]).status.code(), Some(3));
    assert_eq!(run(&["rho", "catalog:kt4", "--formula", "other"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

fn files(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn search_is_deterministic_and_valid() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["search", "--dims", "4", "2", "--count", "4", "--seed", "9", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.len(), 4);
    assert_eq!(fa, fb);
    for (name, _) in &fa {
        let o = run(&["validate", a.path().join(name).to_str().unwrap()]);
        let s = stdout(&o);
        assert!(line(&s, "SKT:").starts_with("SKT: true"), "{name}\n{s}");
        assert!(line(&s, "two_step:").starts_with("two_step: true"));
    }
}
