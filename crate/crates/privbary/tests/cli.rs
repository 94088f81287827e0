use std::path::Path;
use std::process::Command;

fn privbary(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_privbary"))
        .args(args)
        .current_dir(dir)
        .env_remove("PRIVBARY_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn write_cloud(path: &Path, n: usize, offset: f64) {
    let mut s = String::from("x1,x2\n");
    for i in 0..n {
        let t = i as f64 * 0.37;
        s.push_str(&format!("{},{}\n", 0.3 * t.cos() + offset, 0.3 * t.sin()));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn barycenter_report_and_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    write_cloud(&dir.path().join("a.csv"), 60, 0.0);
    write_cloud(&dir.path().join("b.csv"), 60, 0.1);
    std::fs::write(dir.path().join("run.toml"), "inputs = [\"a.csv\", \"b.csv\"]\npipeline = \"coreset\"\nepsilon = 0.5\nm = 3\nseed = 2\n")
        .unwrap();
    let out = privbary(dir.path(), &["barycenter", "--config", "run.toml", "--epsilon", "2", "--report", "rep.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("privbary-out/barycenter.csv")).unwrap();
    assert!(csv.starts_with("# privbary ") && csv.contains("seed 2"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["report"]["privacy_charged"]["epsilon"], 2.0);
    assert_eq!(rep["report"]["strictness"], "strict");
    for field in ["pipeline", "seed", "d", "d_prime", "projection_used", "k", "noise_multiplier", "reg", "coreset_sizes", "warnings"] {
        assert!(!rep["report"]["provenance"][field].is_null(), "{field}");
    }
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    write_cloud(&dir.path().join("a.csv"), 40, 0.0);
    let out = Command::new(env!("CARGO_BIN_EXE_privbary"))
        .args(["coreset", "--input", "a.csv", "--heuristic-noise", "--counts", "counts.json"])
        .current_dir(dir.path())
        .env("PRIVBARY_OUTPUT_DIR", "envdir")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("envdir/coreset.csv")).unwrap();
    assert!(csv.contains("strictness Heuristic"));
    assert!(dir.path().join("counts.json").exists());
}

#[test]
fn split_and_evaluate_verbs() {
    let dir = tempfile::tempdir().unwrap();
    write_cloud(&dir.path().join("a.csv"), 10, 0.0);
    let out = privbary(dir.path(), &["split", "--input", "a.csv", "--k-prime", "3", "--output", "parts"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dropped 1 atoms"));
    let parts: Vec<_> = std::fs::read_dir(dir.path().join("parts")).unwrap().collect();
    assert_eq!(parts.len(), 3);

    std::fs::write(dir.path().join("p.csv"), "x1,x2\n0,0\n").unwrap();
    std::fs::write(dir.path().join("q.csv"), "x1,x2\n0.3,0.4\n").unwrap();
    let out = privbary(dir.path(), &["evaluate", "--private", "p.csv", "--nonprivate", "q.csv", "--data", "a.csv"]);
    assert!(out.status.success());
    let eval: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((eval["w_p_between"].as_f64().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn failed_experiment_exits_nonzero_with_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "pipeline = \"subsampled\"\ntrials = 1\nm = 2\n[scenario]\nkind = \"counterexample_1d\"\nn = 20\n[sweep]\nparam = \"k_prime\"\nvalues = [2, 50]\n",
    )
    .unwrap();
    let out = privbary(dir.path(), &["experiment", "--config", "exp.toml", "--output", "res"]);
    assert!(!out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "partial");
    let results = std::fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 3);
}

#[test]
fn malformed_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "0,0\n1\n").unwrap();
    let out = privbary(dir.path(), &["barycenter", "--input", "bad.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected 2 fields"));
}
