use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ris_sense_cli::{RecipeManifest, MANIFEST_NAME};

fn ris(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-sense")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn manifest(dir: &Path) -> RecipeManifest {
    serde_json::from_slice(&std::fs::read(dir.join(MANIFEST_NAME)).unwrap()).unwrap()
}

fn write_recipe(dir: &Path, body: &str) -> PathBuf {
    let f = dir.join("recipe.json");
    std::fs::write(&f, body).unwrap();
    f
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&ris(&[])), 2);
    assert_eq!(code(&ris(&["no-such-command"])), 2);
    assert_eq!(code(&ris(&["sequence", "--mode", "sideways", "--out", "x.json"])), 2);
    assert_eq!(code(&ris(&["geometry", "sweep", "--h", "1:0:0.1"])), 2);
    assert_eq!(code(&ris(&["--help"])), 0);
}

#[test]
fn missing_or_malformed_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&ris(&["pattern", "--state", p(&missing)])), 3);
    let bad = dir.path().join("state.json");
    std::fs::write(&bad, "[0, 1, 2]").unwrap();
    assert_eq!(code(&ris(&["pattern", "--state", p(&bad)])), 3);
    let csv = dir.path().join("not-a-pattern.csv");
    std::fs::write(&csv, "a,b\n1,2\n").unwrap();
    let out = dir.path().join("x.svg");
    assert_eq!(code(&ris(&["plot", "--kind", "pattern", "--input", p(&csv), "--out", p(&out)])), 3);
}

#[test]
fn codebook_pattern_and_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let o = ris(&["codebook", "--steer-theta", "-20", "--out", p(&state)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bits: Vec<u8> = serde_json::from_slice(&std::fs::read(&state).unwrap()).unwrap();
    assert_eq!(bits.len(), 64);
    assert!(bits.iter().all(|&b| b <= 1));

    let csv = dir.path().join("pattern.csv");
    let svg = dir.path().join("pattern.svg");
    let o = ris(&["pattern", "--state", p(&state), "--cells", "ideal", "--freq-ghz", "5.91", "--csv", p(&csv), "--svg", p(&svg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 62);
    assert!(String::from_utf8_lossy(&o.stderr).contains("peak at -20 deg"));

    let replot = dir.path().join("replot.svg");
    assert!(ris(&["plot", "--kind", "pattern", "--input", p(&csv), "--out", p(&replot)]).status.success());
    assert_eq!(std::fs::read(&replot).unwrap(), std::fs::read(&svg).unwrap());
    assert_eq!(std::fs::read_to_string(replot.with_extension("csv")).unwrap(), text);
}

#[test]
fn seed_controls_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let f = dir.path().join(name);
        assert!(ris(&["sequence", "--mode", "random", "--seed", seed, "--out", p(&f)]).status.success());
        std::fs::read(f).unwrap()
    };
    let a = run("7", "a.json");
    assert_eq!(a, run("7", "b.json"));
    assert_ne!(a, run("8", "c.json"));

    let f = dir.path().join("a.json");
    let o = ris(&["coherence", "--seq", p(&f)]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["provenance"], "random");
    assert!(v["avg"].as_f64().unwrap() <= v["max"].as_f64().unwrap());
}

#[test]
fn empty_recipe_succeeds_with_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_recipe(dir.path(), r#"{"master_seed": 1, "steps": []}"#);
    let out = dir.path().join("out");
    let o = ris(&["recipe", p(&f), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert!(m.completed);
    assert!(m.steps.is_empty());
}

#[test]
fn failing_step_truncates_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_recipe(
        dir.path(),
        r#"{"master_seed": 3, "steps": [
            {"id": "state", "command": "codebook", "args": ["--steer-theta", "0", "--out", "{out}/state.json"]},
            {"id": "broken", "command": "pattern", "args": ["--state", "{out}/absent.json"]},
            {"id": "never", "command": "codebook", "args": ["--steer-theta", "10", "--out", "{out}/never.json"]}
        ]}"#,
    );
    let out = dir.path().join("out");
    let o = ris(&["recipe", p(&f), "--out", p(&out)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 1 (broken)"));
    let m = manifest(&out);
    assert!(!m.completed);
    assert_eq!(m.steps.len(), 2);
    assert!(m.steps[0].ok && !m.steps[1].ok);
    assert_eq!(m.steps[0].outputs.len(), 1);
    assert!(!out.join("never.json").exists());
}

#[test]
fn malformed_recipes_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for body in [
        r#"{"master_seed": 1, "steps": [{"id": "x", "command": "launch"}]}"#,
        r#"{"master_seed": 1, "steps": [{"id": "x", "command": "recipe"}]}"#,
        r#"{"master_seed": 1, "steps": [{"id": "x", "command": "codebook"}, {"id": "x", "command": "codebook"}]}"#,
        r#"{"steps": []}"#,
        r#"{"master_seed": 1, "steps": [], "extra": true}"#,
    ] {
        let f = write_recipe(dir.path(), body);
        assert_eq!(code(&ris(&["recipe", p(&f), "--out", p(&out)])), 2, "{body}");
    }
}

const SMALL: &str = r#"{"master_seed": 11, "steps": [
    {"id": "seq", "command": "sequence", "args": ["--mode", "random", "--out", "{out}/seq.json"]},
    {"id": "data", "command": "dataset", "args": ["build", "--seq", "{out}/seq.json", "--out", "{out}/data", "--replicas", "4"]},
    {"id": "train", "command": "train", "args": ["--model", "m1", "--data", "{out}/data", "--provenance", "random",
        "--epochs", "5", "--out", "{out}/m1.bin", "--report", "{out}/m1.json"]},
    {"id": "eval", "command": "evaluate", "args": ["--model", "{out}/m1.bin", "--data", "{out}/data", "--provenance", "random", "--out", "{out}/eval.json"]},
    {"id": "heat", "command": "plot", "args": ["--kind", "s21-heatmap", "--input", "{out}/data", "--sample", "random-closed_hand-o0-r001", "--out", "{out}/heat.svg"]},
    {"id": "conf", "command": "plot", "args": ["--kind", "confusion", "--input", "{out}/eval.json", "--out", "{out}/conf.svg"]},
    {"id": "table", "command": "report", "args": ["--input", "train={out}/m1.json", "--input", "all={out}/eval.json", "--out", "{out}/table.md"]}
]}"#;

#[test]
fn recipe_reruns_reproduce_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_recipe(dir.path(), SMALL);
    let run = |name: &str, seed: Option<&str>| {
        let out = dir.path().join(name);
        let mut args = vec!["recipe", p(&f), "--out", p(&out)];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        let o = ris(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        manifest(&out)
    };
    let a = run("a", None);
    let b = run("b", None);
    assert!(a.completed);
    assert_eq!(a, b);
    let c = run("c", Some("12"));
    assert_ne!(a.steps[2].outputs, c.steps[2].outputs);

    let table = std::fs::read_to_string(dir.path().join("a/table.md")).unwrap();
    assert_eq!(table.lines().count(), 4);
    let heat = std::fs::read_to_string(dir.path().join("a/heat.svg")).unwrap();
    assert_eq!(heat.matches("data:image/png;base64,").count(), 2);
    assert_eq!(std::fs::read_to_string(dir.path().join("a/heat.csv")).unwrap().lines().count(), 1 + 201 * 390);
}

#[test]
fn diverging_training_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq.json");
    let data = dir.path().join("data");
    assert!(ris(&["sequence", "--mode", "random", "--out", p(&seq)]).status.success());
    assert!(ris(&["dataset", "build", "--seq", p(&seq), "--out", p(&data), "--replicas", "2"]).status.success());
    let model = dir.path().join("m.bin");
    let o = ris(&["train", "--model", "m1", "--data", p(&data), "--provenance", "random", "--epochs", "3", "--learning-rate", "1e300", "--out", p(&model)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    let o = ris(&["train", "--model", "m1", "--data", p(&data), "--provenance", "fcao", "--out", p(&model)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn dataset_export_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq.json");
    let data = dir.path().join("data");
    let csv = dir.path().join("csv");
    let back = dir.path().join("back");
    assert!(ris(&["sequence", "--mode", "random", "--seed", "2", "--out", p(&seq)]).status.success());
    assert!(ris(&["dataset", "build", "--provenance", "random", "--seq", p(&seq), "--out", p(&data), "--replicas", "1"]).status.success());
    assert_eq!(code(&ris(&["dataset", "build", "--provenance", "fcao", "--seq", p(&seq), "--out", p(&data)])), 2);
    assert!(ris(&["dataset", "export", "--data", p(&data), "--out", p(&csv)]).status.success());
    let o = ris(&["dataset", "import", "--path", p(&csv), "--out", p(&back)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("random: 27 samples"));
}

#[test]
fn bundled_recipe_emits_comparison_table() {
    let recipe = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../recipes/full-comparison.json");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("repro");
    let o = ris(&["recipe", p(&recipe), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert!(m.completed && m.steps.iter().all(|s| s.ok));
    let table = std::fs::read_to_string(out.join("comparison.md")).unwrap();
    let rows: Vec<&str> = table.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("| random | m1 |") && rows[1].starts_with("| fcao | m1 |"));
    let geometry: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("geometry.json")).unwrap()).unwrap();
    assert!(geometry["best"]["h_m"].as_f64().unwrap() >= 0.33 - 1e-9);
}
