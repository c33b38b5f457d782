use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const Y: &str = r#"{"dimension": 2, "q": 2.0,
 "sources": [{"position": [-1.0, 2.0], "mass": 1.0}, {"position": [1.0, 2.0], "mass": 1.0}],
 "sinks": [{"position": [0.0, 0.0], "mass": 2.0}]}"#;

const EDGE: &str = r#"{"dimension": 2, "q": 2.0,
 "sources": [{"position": [0.0, 0.0], "mass": 1.0}],
 "sinks": [{"position": [1.0, 0.0], "mass": 1.0}]}"#;

fn branched(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_branched"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn problem(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn validate_accepts_good_and_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let good = problem(tmp.path(), "y.json", Y);
    assert_eq!(branched(tmp.path(), &["validate", &good]).status.code(), Some(0));
    let unbalanced = problem(tmp.path(), "bad.json", &EDGE.replace("\"mass\": 1.0}]}", "\"mass\": 3.0}]}"));
    assert_eq!(branched(tmp.path(), &["validate", &unbalanced]).status.code(), Some(2));
    let garbage = problem(tmp.path(), "junk.json", "{not json");
    assert_eq!(branched(tmp.path(), &["solve", &garbage, "-n", "2"]).status.code(), Some(2));
    assert_eq!(branched(tmp.path(), &["--q", "0.5", "validate", &good]).status.code(), Some(2));
}

#[test]
fn solve_writes_report_graph_and_image() {
    let tmp = tempfile::tempdir().unwrap();
    let p = problem(tmp.path(), "edge.json", EDGE);
    let out = branched(tmp.path(), &["--seed", "3", "solve", &p, "-n", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("solve_n4.json")).unwrap()).unwrap();
    let rescaled = report["rescaled"].as_f64().unwrap();
    assert!((rescaled - 0.8f64.sqrt()).abs() < 1e-8);
    assert_eq!(report["structure_passed"], serde_json::Value::Bool(true));
    let svg = fs::read_to_string(tmp.path().join("solve_n4.svg")).unwrap();
    assert_eq!(svg.matches("class=\"edge\"").count(), 1);
}

#[test]
fn sweep_writes_csv_and_one_image_per_n() {
    let tmp = tempfile::tempdir().unwrap();
    let p = problem(tmp.path(), "y.json", Y);
    let out = branched(tmp.path(), &["sweep", &p, "-n", "6,12"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,wbar,rescaled,upper,lower,hausdorff,seconds"));
    assert_eq!(lines.count(), 2);
    for n in [6, 12] {
        assert!(tmp.path().join(format!("solve_n{n}.svg")).exists());
    }
    let oracle = fs::read_to_string(tmp.path().join("oracle.svg")).unwrap();
    assert_eq!(oracle.matches("class=\"edge\"").count(), 3);
}

#[test]
fn sweeps_are_deterministic_given_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let p = problem(tmp.path(), "y.json", Y);
    let read = |sub: &str| {
        let dir = tmp.path().join(sub);
        branched(&dir, &["--seed", "11", "--restarts", "3", "sweep", &p, "-n", "8"]);
        let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
        // drop the wall-time column
        csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn compare_and_render_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let p = problem(tmp.path(), "y.json", Y);
    assert_eq!(branched(tmp.path(), &["oracle", &p]).status.code(), Some(0));
    let g = tmp.path().join("oracle.graph.json");
    let g = g.to_str().unwrap();
    let out = branched(tmp.path(), &["compare", g, g]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("hausdorff = 0"));
    let svg = tmp.path().join("copy.svg");
    assert_eq!(branched(tmp.path(), &["render", g, "-o", svg.to_str().unwrap()]).status.code(), Some(0));
    assert!(fs::read_to_string(svg).unwrap().starts_with("<svg"));

    let flat = r#"{"dimension": 3, "vertices": [], "edges": []}"#;
    let f = problem(tmp.path(), "flat.json", flat);
    assert_eq!(branched(tmp.path(), &["render", &f]).status.code(), Some(2));
}
