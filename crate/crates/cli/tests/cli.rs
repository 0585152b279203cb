use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::io::Write;

use serde_json::Value;

fn blockmt(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_blockmt"))
        .args(args)
        .env_remove("BLOCKMT_THREADS")
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary starts");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn adjust_rejects_first_line_only() {
    let out = blockmt(&["adjust", "--method", "bonferroni", "--alpha", "0.05"], "0.001\n0.9\n");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        text(&out.stdout),
        "line,p,adjusted,rejected\n1,0.001,0.002,true\n2,0.9,1,false\n"
    );
}

#[test]
fn adjust_errors_are_usage_errors() {
    let empty = blockmt(&["adjust"], "");
    assert_eq!(empty.status.code(), Some(2));
    let bad = blockmt(&["adjust"], "0.2\n0.3\nzero\n");
    assert_eq!(bad.status.code(), Some(2));
    assert!(text(&bad.stderr).contains("line 3"), "{}", text(&bad.stderr));
    let method = blockmt(&["adjust", "--method", "fisher"], "0.1\n");
    assert_eq!(method.status.code(), Some(2));
    let flag = blockmt(&["adjust", "--nope"], "0.1\n");
    assert_eq!(flag.status.code(), Some(2));
}

#[test]
fn adjust_z_scores_of_the_worked_example() {
    let values = blockmt(&["example2"], "");
    assert_eq!(values.status.code(), Some(0));
    // the 64 observed values are z scores; feed them through the z scale
    let dir = tempfile::tempdir().unwrap();
    let z: Vec<String> = blockmt::simulator::example2_fixture()
        .region
        .values()
        .iter()
        .map(|v| v.to_string())
        .collect();
    let input = dir.path().join("z.txt");
    fs::write(&input, z.join("\n")).unwrap();
    let out = blockmt(
        &["adjust", "--scale", "z", "--input", input.to_str().unwrap()],
        "",
    );
    assert_eq!(out.status.code(), Some(0));
    let rejected = text(&out.stdout).lines().filter(|l| l.ends_with(",true")).count();
    assert_eq!(rejected, 8);
}

#[test]
fn example2_report() {
    let out = blockmt(&["example2"], "");
    assert_eq!(out.status.code(), Some(0));
    let report = text(&out.stdout);
    assert!(report.contains("typeI = 3/52, typeII = 7/12"), "{report}");
    let sections: Vec<&str> = report.split("-BWA:").collect();
    assert_eq!(sections.len(), 4);
    assert!(sections[1].contains("typeI = 1/5, typeII = 0"));
    assert!(sections[2].contains("typeI = 0, typeII = 0"));
    assert!(sections[3].contains("typeI = 0, typeII = 0"));
    assert!(sections[1].contains("rejected blocks: top-left, top-right"));
}

#[test]
fn sweep_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("s");
    let out = blockmt(
        &[
            "sweep", "--figure", "1d", "--nsim", "200", "--deltas", "0,3", "--seed", "7",
            "--out", out_dir.to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["timestamp"], 1_700_000_000u64);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs[0]["path"], "sweep.csv");
    assert_eq!(outputs[0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn sweep_invalid_grid_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = blockmt(
        &["sweep", "--block-sizes", "3", "--nsim", "10", "--out", dir.path().to_str().unwrap()],
        "",
    );
    assert_eq!(out.status.code(), Some(2));
    let out = blockmt(&["sweep", "--figure", "7", "--out", dir.path().to_str().unwrap()], "");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"figure": "1a", "nsim": 50, "deltas": [1, 2], "seed": 3}"#).unwrap();
    let out_dir = dir.path().join("o");
    let out = blockmt(
        &[
            "sweep", "--config", cfg.to_str().unwrap(), "--nsim", "20",
            "--out", out_dir.to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["parameters"]["n_sim"], 20);
    assert_eq!(manifest["parameters"]["seed"], 3);
    assert_eq!(manifest["parameters"]["deltas"], serde_json::json!([1.0, 2.0]));
    assert_eq!(manifest["inputs"][0]["path"], cfg.to_str().unwrap());
}

#[test]
fn connectome_synthetic_power_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let out = blockmt(
        &[
            "connectome", "--synthesize", "--delta", "1.5", "--strategy", "all",
            "--method", "bonferroni", "--out", dir.path().to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let power: Vec<f64> = text(&out.stdout)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    // srw, mean, truncated, bivariate
    assert_eq!(power.len(), 4);
    assert!(power[3] >= power[2] && power[2] >= power[1] && power[1] >= power[0], "{power:?}");
}

#[test]
fn connectome_reports_fallbacks() {
    let dir = tempfile::tempdir().unwrap();
    let out = blockmt(
        &[
            "connectome", "--synthesize", "--strategy", "bivariate",
            "--method", "bonferroni", "--out", dir.path().to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let doc = read_json(&dir.path().join("results.json"));
    let outcomes = doc["outcomes"][0]["analysis"]["outcomes"].as_array().unwrap();
    let flagged: Vec<&str> = outcomes
        .iter()
        .filter_map(|o| o["fallback"].as_str())
        .collect();
    assert!(!flagged.is_empty());
    assert!(flagged.iter().all(|f| f.contains("zero pooled variance") || f.contains("collinear")));
}

#[test]
fn generated_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let out = blockmt(&["generate", "--seed", "4", "--out", gen.to_str().unwrap()], "");
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));

    let synth = blockmt(
        &["connectome", "--synthesize", "--seed", "4", "--out", dir.path().join("a").to_str().unwrap()],
        "",
    );
    let files = blockmt(
        &[
            "connectome",
            "--controls", gen.join("controls").to_str().unwrap(),
            "--treatments", gen.join("treatments").to_str().unwrap(),
            "--hierarchy", gen.join("hierarchy.csv").to_str().unwrap(),
            "--truth", gen.join("truth.json").to_str().unwrap(),
            "--out", dir.path().join("b").to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(files.status.code(), Some(0), "{}", text(&files.stderr));
    assert_eq!(synth.stdout, files.stdout);
    let digests = read_json(&dir.path().join("b/manifest.json"))["inputs"]
        .as_array()
        .unwrap()
        .len();
    // 15 + 15 matrices, hierarchy, truth
    assert_eq!(digests, 32);
}

#[test]
fn connectome_generated_treatments_from_affected_file() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    assert_eq!(blockmt(&["generate", "--out", gen.to_str().unwrap()], "").status.code(), Some(0));
    let out_dir = dir.path().join("o");
    let out = blockmt(
        &[
            "connectome",
            "--controls", gen.join("controls").to_str().unwrap(),
            "--hierarchy", gen.join("hierarchy.csv").to_str().unwrap(),
            "--affected", gen.join("affected.txt").to_str().unwrap(),
            "--delta", "2",
            "--out", out_dir.to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(
        fs::read_to_string(out_dir.join("affected.txt")).unwrap(),
        fs::read_to_string(gen.join("affected.txt")).unwrap()
    );
}

#[test]
fn mismatched_matrix_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    assert_eq!(blockmt(&["generate", "--out", gen.to_str().unwrap()], "").status.code(), Some(0));
    let bad = gen.join("treatments/treatment_007.csv");
    let rows: Vec<String> = fs::read_to_string(&bad)
        .unwrap()
        .lines()
        .take(59)
        .map(|r| r.rsplit_once(',').unwrap().0.to_string())
        .collect();
    fs::write(&bad, rows.join("\n")).unwrap();
    let out = blockmt(
        &[
            "connectome",
            "--controls", gen.join("controls").to_str().unwrap(),
            "--treatments", gen.join("treatments").to_str().unwrap(),
            "--hierarchy", gen.join("hierarchy.csv").to_str().unwrap(),
            "--out", dir.path().join("o").to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("treatment_007.csv"), "{}", text(&out.stderr));
}

#[test]
fn asymmetric_matrix_names_cell() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    assert_eq!(blockmt(&["generate", "--out", gen.to_str().unwrap()], "").status.code(), Some(0));
    let bad = gen.join("controls/control_002.csv");
    let mut rows: Vec<Vec<String>> = fs::read_to_string(&bad)
        .unwrap()
        .lines()
        .map(|r| r.split(',').map(str::to_string).collect())
        .collect();
    rows[2][3] = "123.5".to_string();
    let body: Vec<String> = rows.iter().map(|r| r.join(",")).collect();
    fs::write(&bad, body.join("\n")).unwrap();
    let out = blockmt(
        &[
            "connectome",
            "--controls", gen.join("controls").to_str().unwrap(),
            "--hierarchy", gen.join("hierarchy.csv").to_str().unwrap(),
            "--out", dir.path().join("o").to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(out.status.code(), Some(3));
    let err = text(&out.stderr);
    assert!(err.contains("control_002.csv") && err.contains("(2, 3)"), "{err}");
}

#[test]
fn thread_count_from_environment_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_blockmt"))
        .args(["example2"])
        .env("BLOCKMT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = Command::new(env!("CARGO_BIN_EXE_blockmt"))
        .args(["example2"])
        .env("BLOCKMT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn repeated_runs_are_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out_dir = dir.path().join(name);
        let out = blockmt(
            &[
                "connectome", "--synthesize", "--seed", "11", "--threads", threads,
                "--out", out_dir.to_str().unwrap(),
            ],
            "",
        );
        assert_eq!(out.status.code(), Some(0));
        out_dir
    };
    let a = run("a", "1");
    let b = run("b", "3");
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}
