use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quanv"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn quanv")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "quanv {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap()
}

/// 12 train and 8 val synthetic images with 1-layer caches.
fn fixture() -> tempfile::TempDir {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(
        d,
        &[
            "synth", "--n", "12", "--seed", "1", "--images", "tr.idx", "--labels", "trl.idx",
        ],
    );
    ok(
        d,
        &[
            "synth", "--n", "8", "--seed", "2", "--images", "va.idx", "--labels", "val.idx",
        ],
    );
    ok(
        d,
        &[
            "extract", "--images", "tr.idx", "--labels", "trl.idx", "--out", "tr.qnvf",
        ],
    );
    ok(
        d,
        &[
            "extract", "--images", "va.idx", "--labels", "val.idx", "--out", "va.qnvf",
        ],
    );
    t
}

fn train_qnn(d: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--mode",
        "qnn",
        "--train-cache",
        "tr.qnvf",
        "--val-cache",
        "va.qnvf",
        "--train-n",
        "0",
        "--val-n",
        "0",
        "--out-dir",
        out,
    ];
    args.extend_from_slice(extra);
    if !extra.contains(&"--epochs") {
        args.extend_from_slice(&["--epochs", "2"]);
    }
    run(d, &args)
}

#[test]
fn missing_input_exits_two() {
    let t = tempfile::tempdir().unwrap();
    let c = code(
        t.path(),
        &[
            "extract", "--images", "nope.idx", "--labels", "nope.idx", "--out", "x.qnvf",
        ],
    );
    assert_eq!(c, 2);
    assert!(!t.path().join("x.qnvf").exists());
}

#[test]
fn bad_flags_exit_two() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(
        code(t.path(), &["train", "--mode", "qnn", "--out-dir", "o"]),
        2
    );
    assert_eq!(code(t.path(), &["frobnicate"]), 2);
}

#[test]
fn unwritable_output_exits_one() {
    let f = fixture();
    fs::write(f.path().join("blocker"), b"file").unwrap();
    let c = code(
        f.path(),
        &[
            "extract",
            "--images",
            "tr.idx",
            "--labels",
            "trl.idx",
            "--out",
            "blocker/x.qnvf",
        ],
    );
    assert_eq!(c, 1);
}

#[test]
fn inspect_cache_shows_eight_gates_and_exports_pgm() {
    let f = fixture();
    let out = ok(
        f.path(),
        &[
            "inspect",
            "tr.qnvf",
            "--show-circuit",
            "--export-pgm",
            "--index",
            "3",
            "--out-dir",
            "pgm",
        ],
    );
    assert!(out.contains("14x14x4"));
    let gates = out.lines().filter(|l| l.contains(" q")).count();
    assert_eq!(gates, 8, "{out}");
    for ch in 0..4 {
        let bytes = fs::read(f.path().join(format!("pgm/feature_3_ch{ch}.pgm"))).unwrap();
        assert!(bytes.starts_with(b"P5\n14 14\n255\n"));
        assert_eq!(bytes.len(), "P5\n14 14\n255\n".len() + 196);
    }
    assert_eq!(
        code(
            f.path(),
            &[
                "inspect",
                "tr.qnvf",
                "--export-pgm",
                "--index",
                "12",
                "--out-dir",
                "pgm"
            ]
        ),
        2
    );
}

#[test]
fn inspect_rejects_unknown_files() {
    let f = fixture();
    assert_eq!(code(f.path(), &["inspect", "trl.idx"]), 2);
    let out = ok(f.path(), &["inspect", "tr.qnvf"]);
    assert!(out.contains("ansatz seed 42"));
}

#[test]
fn circuit_json_round_trips_through_inspect() {
    let t = tempfile::tempdir().unwrap();
    ok(
        t.path(),
        &["circuit", "--seed", "7", "--layers", "2", "--out", "c.json"],
    );
    let out = ok(t.path(), &["inspect", "c.json", "--show-circuit"]);
    assert!(out.contains("gates       16"), "{out}");
    assert!(t.path().join("c.json.manifest.json").is_file());
}

#[test]
fn train_writes_all_artifacts() {
    let f = fixture();
    let out = train_qnn(f.path(), "q", &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "model.qnvm",
        "history.json",
        "history.csv",
        "curves.csv",
        "curves_accuracy.svg",
        "curves_loss.svg",
        "curves_epoch_ms.svg",
        "manifest.json",
    ] {
        assert!(f.path().join("q").join(name).is_file(), "missing {name}");
    }
    let csv = fs::read_to_string(f.path().join("q/curves.csv")).unwrap();
    assert!(csv.starts_with("epoch,train_loss,train_acc,val_loss,val_acc,epoch_ms\n"));
    assert_eq!(csv.lines().count(), 3);

    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f.path().join("q/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["seeds"]["ansatz_seed"], 42);
    assert_eq!(m["train_indices"].as_array().unwrap().len(), 12);
    assert_eq!(m["ansatz"]["gates"].as_array().unwrap().len(), 8);
}

#[test]
fn stamp_mismatch_is_an_input_error() {
    let f = fixture();
    let out = train_qnn(f.path(), "q", &["--seed", "43"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ansatz"));

    ok(
        f.path(),
        &[
            "extract", "--images", "va.idx", "--labels", "val.idx", "--seed", "9", "--out",
            "va9.qnvf",
        ],
    );
    let c = code(
        f.path(),
        &[
            "train",
            "--mode",
            "qnn",
            "--train-cache",
            "tr.qnvf",
            "--val-cache",
            "va9.qnvf",
            "--out-dir",
            "q",
        ],
    );
    assert_eq!(c, 2);
}

#[test]
fn replay_reproduces_checkpoint() {
    let f = fixture();
    assert!(train_qnn(f.path(), "q", &[]).status.success());
    let first = fs::read(f.path().join("q/model.qnvm")).unwrap();
    fs::remove_file(f.path().join("q/model.qnvm")).unwrap();
    ok(f.path(), &["replay", "q/manifest.json"]);
    assert_eq!(fs::read(f.path().join("q/model.qnvm")).unwrap(), first);
}

#[test]
fn compare_against_itself_has_zero_deltas() {
    let f = fixture();
    assert!(train_qnn(f.path(), "q", &[]).status.success());
    ok(
        f.path(),
        &[
            "compare",
            "--qnn",
            "q/history.json",
            "--baseline",
            "q/history.json",
            "--out-dir",
            "cmp",
        ],
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f.path().join("cmp/comparison.json")).unwrap())
            .unwrap();
    for row in report["rows"].as_array().unwrap() {
        assert_eq!(row["delta"], 0.0);
        assert_eq!(row["leader"], "tie");
    }
    assert!(f.path().join("cmp/comparison_accuracy.svg").is_file());
}

#[test]
fn baseline_and_eval() {
    let f = fixture();
    ok(
        f.path(),
        &[
            "train",
            "--mode",
            "baseline",
            "--train-images",
            "tr.idx",
            "--train-labels",
            "trl.idx",
            "--val-images",
            "va.idx",
            "--val-labels",
            "val.idx",
            "--epochs",
            "1",
            "--hidden",
            "8",
            "--train-n",
            "0",
            "--val-n",
            "0",
            "--out-dir",
            "b",
        ],
    );
    ok(
        f.path(),
        &[
            "eval",
            "--checkpoint",
            "b/model.qnvm",
            "--images",
            "va.idx",
            "--labels",
            "val.idx",
            "--json",
            "e.json",
        ],
    );
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f.path().join("e.json")).unwrap()).unwrap();
    let total = ["tp", "fp", "tn", "fn"]
        .iter()
        .map(|k| r[k].as_u64().unwrap())
        .sum::<u64>();
    assert_eq!(total, 8);
    assert!(f.path().join("e.json.manifest.json").is_file());
}

#[test]
fn zero_epochs_still_writes_checkpoint() {
    let f = fixture();
    let out = train_qnn(f.path(), "z", &["--epochs", "0"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(f.path().join("z/history.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(f.path().join("z/model.qnvm").is_file());
}

#[test]
fn csv_convert_matches_idx_path() {
    let t = tempfile::tempdir().unwrap();
    let mut csv = String::new();
    for i in 0..4u32 {
        let label = i % 2;
        let px: Vec<String> = (0..16).map(|p| ((p * 16 + i) % 256).to_string()).collect();
        csv.push_str(&format!("{label},{}\n", px.join(",")));
    }
    fs::write(t.path().join("d.csv"), csv).unwrap();
    ok(
        t.path(),
        &[
            "convert", "--csv", "d.csv", "--height", "4", "--width", "4", "--images", "d.idx",
            "--labels", "dl.idx",
        ],
    );
    let img = fs::read(t.path().join("d.idx")).unwrap();
    assert_eq!(&img[..4], &[0, 0, 8, 3]);
    assert_eq!(img.len(), 16 + 4 * 16);
    assert_eq!(img[16 + 16 + 1], 17);

    fs::write(t.path().join("bad.csv"), "0,1,2\n3\n").unwrap();
    let out = run(
        t.path(),
        &[
            "convert", "--csv", "bad.csv", "--height", "1", "--width", "2", "--images", "b.idx",
            "--labels", "bl.idx",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
}
