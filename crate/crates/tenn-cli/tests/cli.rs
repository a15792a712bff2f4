//! End-to-end checks of the command-line surface: config handling, the
//! train/eval/export artifact formats, and determinism of the emitted CSVs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tenn"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tenn-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.conf");
    std::fs::write(
        &path,
        "model = tenn\n\
         re = 100\n\
         epochs = 8\n\
         interior_points = 32\n\
         ic_points = 16\n\
         eps_div = 0.3\n\
         seed = 3\n\
         [network]\n\
         hidden = 8,8\n\
         activation = tanh\n",
    )
    .unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn tenn binary")
}

#[test]
fn missing_config_file_is_a_clear_error() {
    let out = run(bin().args(["train", "--config", "/nonexistent/path.conf"]));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cannot read config"), "stderr: {err}");
}

#[test]
fn unknown_config_keys_are_listed() {
    let dir = tmp_dir("badkeys");
    let path = dir.join("bad.conf");
    std::fs::write(&path, "model = tenn\nturbo = yes\n[network]\nwhat = 1\n").unwrap();
    let out = run(bin().args(["train", "--config", path.to_str().unwrap()]));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("turbo") && err.contains("network.what"), "stderr: {err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn train_eval_export_pipeline() {
    let dir = tmp_dir("pipeline");
    let config = write_tiny_config(&dir);
    let out_dir = dir.join("out");

    // train with a --re override; the manifest must echo it
    let out = run(bin().args([
        "train",
        "--config",
        config.to_str().unwrap(),
        "--re",
        "10",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "train failed: {}", String::from_utf8_lossy(&out.stderr));

    let history = std::fs::read_to_string(out_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 8, "one row per epoch plus header");
    assert!(history.starts_with("epoch,pde,curl,incmp,ic_vanilla,ic_tenn,flux,total"));

    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("\"re\": 10.0"), "manifest: {manifest}");
    assert!(manifest.contains("seed = 3"));

    let ckpt = out_dir.join("checkpoint.bin");
    assert!(ckpt.exists());

    // eval produces the summary with one row per time plus overall rows
    let out = run(bin().args([
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--grid",
        "8x8",
        "--times",
        "0,0.5",
        "--eps-div",
        "0.3",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "eval failed: {}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("eval_summary.csv")).unwrap();
    assert!(summary.starts_with("time,rel_l2_omega,rel_l2_velocity"));
    assert_eq!(summary.lines().count(), 1 + 2 + 3);

    // csv export: header + nx*ny*nt rows
    let out = run(bin().args([
        "export",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--grid",
        "8x8",
        "--times",
        "0,0.5,1.0",
        "--format",
        "csv",
        "--eps-div",
        "0.3",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "export failed: {}", String::from_utf8_lossy(&out.stderr));
    let heatmap = std::fs::read_to_string(out_dir.join("heatmap.csv")).unwrap();
    assert_eq!(heatmap.lines().count(), 1 + 8 * 8 * 3);
    assert!(heatmap.starts_with("x,y,t,pred,true,abs_err"));

    // pgm export: P5 header with the grid dimensions
    let out = run(bin().args([
        "export",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--grid",
        "8x8",
        "--times",
        "0",
        "--format",
        "pgm",
        "--eps-div",
        "0.3",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "pgm export failed: {}", String::from_utf8_lossy(&out.stderr));
    let pgm = std::fs::read(out_dir.join("omega_pred_t00.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n8 8\n255\n"));
    assert!(out_dir.join("omega_scales.txt").exists());

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn identical_runs_write_identical_history() {
    let dir = tmp_dir("determinism");
    let config = write_tiny_config(&dir);
    let (a, b) = (dir.join("a"), dir.join("b"));
    for out in [&a, &b] {
        let res = run(bin().args([
            "train",
            "--config",
            config.to_str().unwrap(),
            "--deterministic",
            "--out",
            out.to_str().unwrap(),
        ]));
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let ha = std::fs::read(a.join("history.csv")).unwrap();
    let hb = std::fs::read(b.join("history.csv")).unwrap();
    assert_eq!(ha, hb, "histories differ between identical runs");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_subcommand_passes_on_small_sweep() {
    let out = run(bin().args(["verify", "--networks", "4", "--points", "80", "--seed", "5"]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "verify failed:\n{stdout}");
    assert!(stdout.contains("all checks passed"));
    assert!(stdout.contains("lemma1"));
}

#[test]
fn eval_rejects_garbage_checkpoint() {
    let dir = tmp_dir("garbage");
    let path = dir.join("junk.bin");
    std::fs::write(&path, b"definitely not a checkpoint").unwrap();
    let out = run(bin().args(["eval", "--checkpoint", path.to_str().unwrap()]));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad magic") || err.contains("not a checkpoint"), "stderr: {err}");
    std::fs::remove_dir_all(&dir).ok();
}
