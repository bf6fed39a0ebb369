use std::path::Path;
use std::process::{Command, Output};

use mgr_core::train::TrainReport;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgr"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn mgr")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "mgr {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().expect("exit code")
}

/// Synthesizes a small corpus and extracts one-second segments into `feat.bin`.
fn small_features(dir: &Path, clips: &str, seconds: &str) {
    ok(
        dir,
        &[
            "synth",
            "--out",
            "corpus",
            "--clips-per-genre",
            clips,
            "--clip-seconds",
            seconds,
            "--seed",
            "4",
        ],
    );
    ok(
        dir,
        &[
            "extract",
            "--manifest",
            "corpus/manifest.json",
            "--out",
            "feat.bin",
            "--segments",
            seconds,
        ],
    );
}

fn wav_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for genre in std::fs::read_dir(dir).unwrap() {
        let genre = genre.unwrap().path();
        if genre.is_dir() {
            for f in std::fs::read_dir(&genre).unwrap() {
                out.push(f.unwrap().path());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for out in ["a", "b"] {
        ok(
            d,
            &[
                "synth",
                "--out",
                out,
                "--clips-per-genre",
                "1",
                "--clip-seconds",
                "1",
                "--seed",
                "12",
            ],
        );
    }
    ok(
        d,
        &[
            "synth",
            "--out",
            "c",
            "--clips-per-genre",
            "1",
            "--clip-seconds",
            "1",
            "--seed",
            "13",
        ],
    );
    let (a, b, c) = (
        wav_files(&d.join("a")),
        wav_files(&d.join("b")),
        wav_files(&d.join("c")),
    );
    assert_eq!(a.len(), 8);
    let mut differs = false;
    for ((pa, pb), pc) in a.iter().zip(&b).zip(&c) {
        let bytes = std::fs::read(pa).unwrap();
        assert_eq!(bytes, std::fs::read(pb).unwrap(), "{}", pa.display());
        differs |= bytes != std::fs::read(pc).unwrap();
    }
    assert!(differs);
    assert_eq!(
        std::fs::read(d.join("a/manifest.json")).unwrap(),
        std::fs::read(d.join("b/manifest.json")).unwrap()
    );
}

#[test]
fn pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_features(d, "2", "4");
    let split = ok(
        d,
        &[
            "split",
            "--features",
            "feat.bin",
            "--out",
            "split.json",
            "--ratios",
            "6:1:1",
            "--seed",
            "2",
        ],
    );
    assert!(split.contains("train 48 valid 8 test 8"), "{split}");

    let train = ok(
        d,
        &[
            "train",
            "--features",
            "feat.bin",
            "--split",
            "split.json",
            "--model",
            "dnn",
            "--epochs",
            "3",
            "--seed",
            "2",
            "--out",
            "dnn.ckpt",
        ],
    );
    assert!(train.contains("test loss"), "{train}");
    let report = TrainReport::from_json(&std::fs::read_to_string(d.join("dnn.ckpt.report.json")).unwrap()).unwrap();
    assert_eq!(report.epochs.len(), 3);
    assert_eq!(report.split_sizes, [48, 8, 8]);

    let eval = ok(
        d,
        &[
            "eval",
            "--checkpoint",
            "dnn.ckpt",
            "--features",
            "feat.bin",
            "--split",
            "split.json",
            "--out",
            "eval.json",
        ],
    );
    let json: serde_json::Value = serde_json::from_str(eval.lines().nth(1).unwrap()).unwrap();
    assert_eq!(json["samples"], 8);
    // evaluating the test part reproduces the figure in the training report
    assert!((json["accuracy"].as_f64().unwrap() - report.test_accuracy).abs() < 1e-12);
    assert!((json["loss"].as_f64().unwrap() - report.test_loss).abs() < 1e-9);

    let wav = wav_files(&d.join("corpus"))[0].clone();
    let predict = ok(
        d,
        &[
            "predict",
            "--checkpoint",
            "dnn.ckpt",
            "--wav",
            wav.to_str().unwrap(),
            "--out",
            "p.json",
        ],
    );
    let p: serde_json::Value = serde_json::from_str(predict.lines().nth(1).unwrap()).unwrap();
    let probs: Vec<f64> = p["probabilities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(probs.len(), 8);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    let best = probs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(p["genre_index"], best);
    assert!(p["genre"].is_string());

    ok(d, &["report", "--report", "dnn.ckpt.report.json", "--out", "curves"]);
    let csv = std::fs::read_to_string(d.join("curves.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "epoch,train_loss,train_acc,valid_loss,valid_acc"
    );
    assert_eq!(csv.lines().count(), 4);
    let svg = std::fs::read_to_string(d.join("curves.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn cnn_trains_from_ratios_and_checkpoint_resumes_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_features(d, "1", "3");
    ok(
        d,
        &[
            "train",
            "--features",
            "feat.bin",
            "--model",
            "cnn",
            "--epochs",
            "1",
            "--ratios",
            "2:1:1",
            "--out",
            "cnn.ckpt",
        ],
    );
    let out = ok(
        d,
        &[
            "eval",
            "--checkpoint",
            "cnn.ckpt",
            "--features",
            "feat.bin",
            "--part",
            "all",
        ],
    );
    let json: serde_json::Value = serde_json::from_str(out.lines().nth(1).unwrap()).unwrap();
    assert_eq!(json["samples"], 24);
}

#[test]
fn untrained_model_is_near_chance() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_features(d, "4", "10");
    ok(
        d,
        &[
            "train",
            "--features",
            "feat.bin",
            "--model",
            "dnn",
            "--epochs",
            "0",
            "--seed",
            "3",
            "--out",
            "zero.ckpt",
        ],
    );
    let out = ok(
        d,
        &[
            "eval",
            "--checkpoint",
            "zero.ckpt",
            "--features",
            "feat.bin",
            "--part",
            "all",
        ],
    );
    let json: serde_json::Value = serde_json::from_str(out.lines().nth(1).unwrap()).unwrap();
    let acc = json["accuracy"].as_f64().unwrap();
    assert_eq!(json["samples"], 320);
    assert!((acc - 0.125).abs() <= 0.06, "untrained accuracy {acc}");
}

#[test]
fn gradcheck_prints_every_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["gradcheck", "--seeds", "2", "--out", "g.json"]);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 8, "{out}");
    assert!(rows.iter().all(|r| r.ends_with("PASS")), "{out}");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 8);
    assert_eq!(code(tmp.path(), &["gradcheck", "--layer", "lstm"]), 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(d, &[]), 2);
    assert_eq!(code(d, &["train", "--bogus"]), 2);
    assert_eq!(
        code(
            d,
            &["eval", "--checkpoint", "missing.ckpt", "--features", "missing.bin"]
        ),
        3
    );

    small_features(d, "1", "2");
    // experiment 1 expects (2, 13) inputs, these features are (44, 13)
    assert_eq!(
        code(
            d,
            &[
                "train",
                "--features",
                "feat.bin",
                "--experiment",
                "1",
                "--out",
                "x.ckpt"
            ]
        ),
        3
    );
    assert_eq!(
        code(
            d,
            &[
                "train",
                "--features",
                "feat.bin",
                "--experiment",
                "9",
                "--out",
                "x.ckpt"
            ]
        ),
        2
    );
    assert_eq!(
        code(
            d,
            &["train", "--features", "feat.bin", "--model", "rnn", "--out", "x.ckpt"]
        ),
        2
    );
    std::fs::write(d.join("cfg.json"), r#"{"no_such_key": 1}"#).unwrap();
    assert_eq!(
        code(
            d,
            &[
                "--config",
                "cfg.json",
                "train",
                "--features",
                "feat.bin",
                "--out",
                "x.ckpt"
            ]
        ),
        2
    );

    let out = run(
        d,
        &[
            "train",
            "--features",
            "feat.bin",
            "--model",
            "dnn",
            "--epochs",
            "3",
            "--lr",
            "1e30",
            "--ratios",
            "2:1:1",
            "--out",
            "x.ckpt",
        ],
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!d.join("x.ckpt").exists());

    let mut bytes = std::fs::read(d.join("feat.bin")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(d.join("bad.bin"), bytes).unwrap();
    assert_eq!(code(d, &["split", "--features", "bad.bin", "--out", "s.json"]), 3);
}
