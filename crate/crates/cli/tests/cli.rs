use std::path::Path;
use std::process::{Command, Output};

fn spp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spp"))
        .args(args)
        .output()
        .expect("spawn spp")
}

fn ok(args: &[&str]) -> String {
    let out = spp(args);
    assert!(
        out.status.success(),
        "spp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path) -> String {
    let cfg = serde_json::json!({
        "synth": {"spec": "drift-split", "n_per_year": 150},
        "schema": dir.join("schema.json"),
        "data": dir.join("data.csv"),
        "model": dir.join("model.json"),
        "cvae": {"hidden_layers": [16], "latent_dim": 2, "beta": 1.0, "epochs": 3},
        "evaluation": {"subsets": [["mode"], ["mode", "car"]]},
        "panel": {"reference_year": "2006", "r": 20, "max_individuals": 30},
        "movers": {"t_start": "2006", "t_end": "2010", "r": 100},
        "out": dir,
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

const PIPELINE: [&str; 6] = ["synth", "train", "generate", "evaluate", "build-panel", "classify-movers"];

#[test]
fn pipeline_writes_every_output_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    for cmd in PIPELINE {
        ok(&[cmd, "--config", &cfg, "--seed", "3"]);
        assert!(dir.path().join(format!("{cmd}.manifest.json")).exists(), "{cmd}");
    }
    for f in [
        "data.csv",
        "model.json",
        "history.csv",
        "synthetic.csv",
        "comparison.csv",
        "scatter.csv",
        "overlap.csv",
        "marginals.csv",
        "panel.csv",
        "trends.csv",
        "movers.csv",
        "group_marginals.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let comparison = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let names: Vec<&str> = comparison.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        names,
        ["train-vs-val", "model-vs-val", "model-vs-whole"].repeat(2),
        "{comparison}"
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("train.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config"]["cvae"]["epochs"], 3);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn rerunning_from_a_manifest_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    ok(&["synth", "--config", &cfg, "--seed", "5"]);
    ok(&["train", "--config", &cfg, "--seed", "5"]);
    let first = std::fs::read(dir.path().join("model.json")).unwrap();
    let manifest = dir.path().join("train.manifest.json");
    ok(&["train", "--config", manifest.to_str().unwrap()]);
    assert_eq!(first, std::fs::read(dir.path().join("model.json")).unwrap());
}

#[test]
fn grid_plan_lists_every_cell() {
    let out = ok(&["train", "--grid", "--plan-only", "--seed", "1"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "grid plan: 180 cells");
    assert_eq!(lines.len(), 2 + 180);
    let small = ok(&[
        "train",
        "--grid",
        "--plan-only",
        "--seed",
        "1",
        "--set",
        "grid.n_neurons=[8]",
        "--set",
        "grid.betas=[1.0]",
    ]);
    assert!(small.starts_with("grid plan: 9 cells"), "{small}");
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let cases: [(&[&str], &str); 4] = [
        (&["train", "--out", out_dir], "seed is required"),
        (&["train", "--seed", "1", "--out", out_dir], "`schema` is required"),
        (
            &["train", "--seed", "1", "--out", out_dir, "--set", "schema=/nonexistent.json"],
            "does not exist",
        ),
        (&["synth", "--seed", "1", "--out", out_dir, "--set", "cvae.bogus=1"], "unknown field"),
    ];
    for (args, needle) in cases {
        let out = spp(args);
        assert!(!out.status.success(), "{args:?} succeeded");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
    }
}

#[test]
fn synth_accepts_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&["synth", "--seed", "2", "--out", d, "--set", "synth.n_per_year=10"]);
    let spec = dir.path().join("spec.json");
    let other = dir.path().join("again");
    ok(&[
        "synth",
        "--seed",
        "2",
        "--out",
        other.to_str().unwrap(),
        "--set",
        "synth.n_per_year=10",
        "--set",
        &format!("synth.spec={}", spec.display()),
    ]);
    assert_eq!(
        std::fs::read(dir.path().join("data.csv")).unwrap(),
        std::fs::read(other.join("data.csv")).unwrap()
    );
}

#[test]
fn grid_training_keeps_selection_model_and_refits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    ok(&["synth", "--config", &cfg, "--seed", "4"]);
    ok(&[
        "train",
        "--grid",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--set",
        "grid.n_layers=[1]",
        "--set",
        "grid.n_neurons=[8]",
        "--set",
        "grid.latent_dims=[2]",
        "--set",
        "grid.betas=[0.5,1.0]",
    ]);
    for f in ["leaderboard.csv", "selection_model.json", "model.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let board = std::fs::read_to_string(dir.path().join("leaderboard.csv")).unwrap();
    assert_eq!(board.lines().count(), 3, "{board}");
    let sel = dir.path().join("selection_model.json");
    ok(&[
        "evaluate",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--set",
        &format!("selection_model={}", sel.display()),
    ]);
}
