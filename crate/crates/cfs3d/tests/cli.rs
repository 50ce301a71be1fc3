//! End-to-end checks of the `cfs3d` binary: exit codes, file outputs, and
//! byte-level determinism of the full gen → train → infer → eval flow.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cfs3d(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfs3d"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("error:"),
        "stderr lacks error line"
    );
}

const TOY_CONFIG: &str = "l_p=64\nl_f=8\nl_e=4\nencoder_widths=16,16\nepochs=2\n\
                          gen_scenes=3\ngen_extent=1.2,1.2,0.8\ngen_objects=2,2\n\
                          gen_object_size=0.2,0.3\ngen_points_per_object=60,80\nseed=5\n";

fn write_toy_config(dir: &Path) {
    fs::write(dir.join("run.cfg"), TOY_CONFIG).unwrap();
}

#[test]
fn gen_writes_deterministic_scene_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_toy_config(dir);
    assert_ok(&cfs3d(dir, &["gen", "--config", "run.cfg", "a"]));
    assert_ok(&cfs3d(dir, &["gen", "--config", "run.cfg", "b"]));
    for i in 0..3 {
        let name = format!("scene_{i:03}.txt");
        let a = fs::read(dir.join("a").join(&name)).unwrap();
        let b = fs::read(dir.join("b").join(&name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between runs");
    }
    // A different seed changes the scenes.
    assert_ok(&cfs3d(dir, &["gen", "--config", "run.cfg", "--seed", "9", "c"]));
    assert_ne!(
        fs::read(dir.join("a/scene_000.txt")).unwrap(),
        fs::read(dir.join("c/scene_000.txt")).unwrap()
    );
}

#[test]
fn train_infer_eval_roundtrip_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_toy_config(dir);
    assert_ok(&cfs3d(dir, &["gen", "--config", "run.cfg", "scenes"]));

    let train = cfs3d(
        dir,
        &[
            "train",
            "--config",
            "run.cfg",
            "--out",
            "model.ckpt",
            "--log",
            "train.log",
            "scenes/scene_000.txt",
            "scenes/scene_001.txt",
        ],
    );
    assert_ok(&train);
    let log = fs::read_to_string(dir.join("train.log")).unwrap();
    assert_eq!(log.lines().count(), 2, "one log line per epoch:\n{log}");
    assert!(log.starts_with("epoch 1 semantic "), "{log}");

    // Inference picks up the configuration embedded in the checkpoint and
    // is byte-deterministic.
    for out in ["p1.txt", "p2.txt"] {
        assert_ok(&cfs3d(
            dir,
            &["infer", "--checkpoint", "model.ckpt", "--out", out, "scenes/scene_002.txt"],
        ));
    }
    let p1 = fs::read(dir.join("p1.txt")).unwrap();
    assert_eq!(p1, fs::read(dir.join("p2.txt")).unwrap());
    assert!(!p1.is_empty());

    let eval = cfs3d(dir, &["eval", "p1.txt", "scenes/scene_002.txt"]);
    assert_ok(&eval);
    let report = String::from_utf8(eval.stdout).unwrap();
    for key in ["oAcc", "mAcc", "mIoU", "mCov", "mWCov", "mPrec", "mRec"] {
        assert!(
            report.lines().any(|l| l.starts_with(&format!("{key} "))),
            "report lacks {key}:\n{report}"
        );
    }

    let stats = cfs3d(
        dir,
        &["embed-stats", "--checkpoint", "model.ckpt", "scenes/scene_002.txt"],
    );
    assert_ok(&stats);
    let table = String::from_utf8(stats.stdout).unwrap();
    assert_eq!(table.lines().count(), 4, "one row per embedding dim:\n{table}");
    for line in table.lines() {
        let cols: Vec<&str> = line.split(' ').collect();
        assert_eq!(cols.len(), 2, "mean and variance: {line}");
        assert!(cols[1].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn resume_with_a_different_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_toy_config(dir);
    assert_ok(&cfs3d(dir, &["gen", "--config", "run.cfg", "scenes"]));
    assert_ok(&cfs3d(
        dir,
        &["train", "--config", "run.cfg", "scenes/scene_000.txt"],
    ));
    fs::write(dir.join("other.cfg"), format!("{TOY_CONFIG}lr=0.01\n")).unwrap();
    let resumed = cfs3d(
        dir,
        &[
            "train",
            "--config",
            "other.cfg",
            "--resume",
            "model.ckpt",
            "scenes/scene_000.txt",
        ],
    );
    assert_exit(&resumed, 2);
    assert!(
        String::from_utf8_lossy(&resumed.stderr).contains("configuration"),
        "unexpected message: {}",
        String::from_utf8_lossy(&resumed.stderr)
    );
}

#[test]
fn invalid_inputs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.cfg"), "no_such_key=1\n").unwrap();
    assert_exit(&cfs3d(dir, &["gen", "--config", "bad.cfg", "out"]), 2);

    write_toy_config(dir);
    assert_exit(
        &cfs3d(dir, &["train", "--config", "run.cfg", "missing_scene.txt"]),
        2,
    );

    // Gradient checking demands a toy model.
    fs::write(dir.join("big.cfg"), "l_p=128\n").unwrap();
    assert_exit(&cfs3d(dir, &["gradcheck", "--config", "big.cfg"]), 2);
}

#[test]
fn gradcheck_passes_on_the_builtin_toy_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cfs3d(tmp.path(), &["gradcheck"]);
    assert_ok(&out);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("ok: max relative error"),
        "unexpected output:\n{stdout}"
    );
}
