//! End-to-end CLI flow: generate-data, pretrain, finetune, evaluate,
//! analyze-fn, compare, plus exit-code behavior.

use std::path::Path;
use std::process::Command;

fn pcl_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pcl"))
}

fn run_ok(args: &[&str]) -> String {
    let out = pcl_bin().args(args).output().expect("spawn pcl");
    assert!(
        out.status.success(),
        "pcl {args:?} failed with {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn full_cli_pipeline() {
    let dir = std::env::temp_dir().join("pcl-cli-test");
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    let data = dir.join("data");
    let manifest = data.join("manifest.json");

    run_ok(&[
        "generate-data",
        "--family",
        "a",
        "--volumes",
        "8",
        "--seed",
        "0",
        "--out",
        &path_str(&data),
    ]);
    assert!(manifest.exists());
    assert_eq!(std::fs::read_dir(&data).unwrap().count(), 9); // 8 volumes + manifest

    let ckpt = dir.join("encoder.ckpt");
    run_ok(&[
        "pretrain",
        "--manifest",
        &path_str(&manifest),
        "--strategy",
        "pcl",
        "--t",
        "0.1",
        "--epochs",
        "2",
        "--batch",
        "8",
        "--seed",
        "1",
        "--out",
        &path_str(&ckpt),
    ]);
    assert!(ckpt.exists());

    let model = dir.join("model.ckpt");
    run_ok(&[
        "finetune",
        "--manifest",
        &path_str(&manifest),
        "--init",
        &path_str(&ckpt),
        "--m",
        "2",
        "--epochs",
        "2",
        "--seed",
        "1",
        "--out",
        &path_str(&model),
    ]);
    assert!(model.exists());

    let eval_report = dir.join("eval.json");
    let stdout = run_ok(&[
        "evaluate",
        "--model",
        &path_str(&model),
        "--manifest",
        &path_str(&manifest),
        "--out",
        &path_str(&eval_report),
    ]);
    assert!(stdout.contains("mean dice"));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&eval_report).unwrap()).unwrap();
    assert!(parsed["mean"]["mean"].is_number());

    let fn_report = dir.join("fn.json");
    let stdout = run_ok(&[
        "analyze-fn",
        "--manifest",
        &path_str(&manifest),
        "--t-true",
        "0.1",
        "--strategies",
        "simclr,gcl,pcl",
        "--out",
        &path_str(&fn_report),
    ]);
    assert!(stdout.contains("pcl"));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fn_report).unwrap()).unwrap();
    let per_strategy = parsed["per_strategy"].as_array().unwrap();
    assert_eq!(per_strategy.len(), 3);

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn compare_writes_json_and_csv() {
    let dir = std::env::temp_dir().join("pcl-cli-compare");
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    let data = dir.join("data");
    run_ok(&[
        "generate-data",
        "--family",
        "a",
        "--volumes",
        "8",
        "--out",
        &path_str(&data),
    ]);
    let report = dir.join("report.json");
    run_ok(&[
        "compare",
        "--manifest",
        &path_str(&data.join("manifest.json")),
        "--strategies",
        "random,pcl",
        "--m-list",
        "2",
        "--folds",
        "2",
        "--seeds",
        "0",
        "--pretrain-epochs",
        "2",
        "--finetune-epochs",
        "2",
        "--out",
        &path_str(&report),
    ]);
    assert!(report.exists());
    let csv = dir.join("report.csv");
    assert!(csv.exists());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("strategy,m,fold,seed,class,dice\n"));
    // strategies x folds x (2 classes + overall)
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_errors_exit_with_code_2() {
    let out = pcl_bin()
        .args(["generate-data", "--family", "nope", "--out", "/tmp/pcl-cli-none"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown phantom family"), "{stderr}");

    // clap usage errors also use exit code 2
    let out = pcl_bin().args(["no-such-command"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // bad strategy in pretrain
    let dir = std::env::temp_dir().join("pcl-cli-badstrategy");
    std::fs::create_dir_all(&dir).unwrap();
    let data = dir.join("data");
    run_ok(&[
        "generate-data",
        "--family",
        "a",
        "--volumes",
        "4",
        "--out",
        &path_str(&data),
    ]);
    let out = pcl_bin()
        .args([
            "pretrain",
            "--manifest",
            &path_str(&data.join("manifest.json")),
            "--strategy",
            "rotation",
            "--out",
            &path_str(&dir.join("x.ckpt")),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}
