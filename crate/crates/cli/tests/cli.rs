//! Subcommand outputs and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

use cfstab_core::nn::load_model;

fn cfstab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfstab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CFSTAB_SEED_OFFSET")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FAST_TRAIN: [&str; 4] = ["--override", "train.epochs=15", "--override", "dataset.n=200"];

#[test]
fn train_is_byte_deterministic_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut args = vec!["train"];
    args.extend(FAST_TRAIN);
    assert_eq!(cfstab(&args, &a).status.code(), Some(0));
    args.extend(["--threads", "2"]);
    assert_eq!(cfstab(&args, &b).status.code(), Some(0));
    for f in ["model.json", "train_log.csv", "effective_config.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let model = load_model(&a.join("model.json")).unwrap();
    let again = load_model(&b.join("model.json")).unwrap();
    for x in [[0.0, 0.0], [1.5, -2.0], [-0.3, 0.7]] {
        assert_eq!(model.logits(&x), again.logits(&x));
    }
    let effective: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("effective_config.json")).unwrap()).unwrap();
    assert_eq!(effective["train"]["epochs"], 15);
}

#[test]
fn missing_dataset_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let schema = dir.path().join("schema.json");
    std::fs::write(
        &schema,
        r#"{"columns":[{"name":"a","kind":"numeric","transform":"standardize"}],"label":"y"}"#,
    )
    .unwrap();
    let missing = dir.path().join("no_such_table.csv");
    let o = cfstab(
        &[
            "train",
            "--override",
            "dataset.source=csv",
            "--override",
            &format!("dataset.path={}", missing.display()),
            "--override",
            &format!("dataset.schema={}", schema.display()),
            "--override",
            "dataset.label=y",
        ],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no_such_table.csv"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases: [&[&str]; 4] = [
        &["verify", "--override", "verify.prop1.trials=0"],
        &["train", "--override", "train.no_such_key=1"],
        &["train", "--config", "/definitely/missing.toml"],
        &["train", "--override", "train.epochs"],
    ];
    for args in cases {
        let o = cfstab(args, &out);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_cfstab"))
        .args(["train", "--out"])
        .arg(&out)
        .env("CFSTAB_SEED_OFFSET", "minus one")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_offset_changes_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train"];
    args.extend(FAST_TRAIN);
    let plain = dir.path().join("plain");
    assert!(cfstab(&args, &plain).status.success());
    let shifted = dir.path().join("shifted");
    let o = Command::new(env!("CARGO_BIN_EXE_cfstab"))
        .args(&args)
        .arg("--out")
        .arg(&shifted)
        .env("CFSTAB_SEED_OFFSET", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_ne!(
        std::fs::read(plain.join("model.json")).unwrap(),
        std::fs::read(shifted.join("model.json")).unwrap()
    );
}

#[test]
fn verify_default_sweeps_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = cfstab(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["prop1", "theorem1_orthogonal", "theorem1_oblique", "theorem2"] {
        assert!(dir.path().join(format!("verify_{name}.json")).exists(), "{name}");
    }
}

#[test]
fn injected_gradient_fault_exits_five_with_the_counterexample_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = cfstab(
        &[
            "verify",
            "--override",
            "verify.checks=[\"prop1\"]",
            "--override",
            "verify.prop1.pairs=20",
            "--override",
            "verify.prop1.gradient=flipped_relu_mask",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(5));
    let path = dir.path().join("verify_prop1.json");
    assert!(stderr(&o).contains(&path.display().to_string()), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    assert!(!report["counterexamples"].as_array().unwrap().is_empty());
}

#[test]
fn plot_writes_rasters_and_rejects_non_2d_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plot");
    let mut args = vec!["plot", "--override", "plot.resolution=40"];
    args.extend(FAST_TRAIN);
    let o = cfstab(&args, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for stem in ["class_base", "class_rs_1", "agree_base_rs_1", "class_loo_1", "agree_base_loo_1"] {
        let pgm = std::fs::read_to_string(out.join(format!("{stem}.pgm"))).unwrap();
        assert!(pgm.starts_with("P2\n40 40\n"), "{stem}");
        assert!(out.join(format!("{stem}.json")).exists());
    }
    assert!(out.join("overlay.json").exists());

    let table = dir.path().join("three.csv");
    let mut csv = String::from("a,b,c,y\n");
    for i in 0..60 {
        let v = i as f64 / 10.0;
        csv.push_str(&format!("{v},{},{},{}\n", v * 0.5, 1.0 - v, (i % 2)));
    }
    std::fs::write(&table, csv).unwrap();
    let schema = dir.path().join("schema.json");
    std::fs::write(
        &schema,
        r#"{"columns":[{"name":"a","kind":"numeric","transform":"standardize"},{"name":"b","kind":"numeric","transform":"standardize"},{"name":"c","kind":"numeric","transform":"standardize"}],"label":"y"}"#,
    )
    .unwrap();
    let o = cfstab(
        &[
            "plot",
            "--override",
            "dataset.source=csv",
            "--override",
            &format!("dataset.path={}", table.display()),
            "--override",
            &format!("dataset.schema={}", schema.display()),
            "--override",
            "dataset.label=y",
        ],
        &dir.path().join("plot3"),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn pipeline_subcommands_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut common: Vec<&str> = FAST_TRAIN.to_vec();
    common.extend([
        "--override",
        "ensembles.rs.count=2",
        "--override",
        "ensembles.loo.count=2",
        "--override",
        "origins.max_origins=6",
    ]);
    let run = |cmd: &str, out: &Path| {
        let mut args = vec![cmd];
        args.extend(&common);
        let o = cfstab(&args, out);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    };
    let ens = dir.path().join("ensemble");
    run("ensemble", &ens);
    for f in ["model.json", "ensembles/manifest.json", "ensembles/rs_001.json", "ensembles/loo_002.json"] {
        assert!(ens.join(f).exists(), "{f}");
    }
    let gen = dir.path().join("generate");
    run("generate", &gen);
    assert!(std::fs::read_to_string(gen.join("records.jsonl")).unwrap().lines().count() > 0);
    let eval = dir.path().join("evaluate");
    run("evaluate", &eval);
    for f in ["report.json", "records.jsonl", "evaluations.jsonl", "effective_config.json"] {
        assert!(eval.join(f).exists(), "{f}");
    }
    let rep = dir.path().join("report");
    run("report", &rep);
    for f in ["report.json", "report.csv", "report.txt"] {
        assert!(rep.join(f).exists(), "{f}");
    }
    assert_eq!(
        std::fs::read(eval.join("report.json")).unwrap(),
        std::fs::read(rep.join("report.json")).unwrap()
    );
}
