use std::fs;
use std::path::Path;

use synthstab::cli::{main_with, EXIT_IO, EXIT_MISMATCH, EXIT_OK, EXIT_VALIDATION};
use synthstab::io_util::parse_key_values;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["synthstab"];
    full.extend_from_slice(args);
    main_with(full)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, videos: &str, frames: &str) {
    assert_eq!(
        run(&[
            "generate",
            "--seed",
            "5",
            "--out",
            s(dir),
            "--videos",
            videos,
            "--frames",
            frames
        ]),
        EXIT_OK
    );
}

#[test]
fn usage_and_validation_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["generate"]), EXIT_VALIDATION);
    assert_eq!(run(&["frobnicate"]), EXIT_VALIDATION);
    assert_eq!(run(&["--help"]), EXIT_OK);
    let out = tmp.path().join("g");
    assert_eq!(
        run(&["generate", "--out", s(&out), "--frames", "1"]),
        EXIT_VALIDATION
    );
    assert_eq!(
        run(&["generate", "--out", s(&out), "--texture", "plaid"]),
        EXIT_VALIDATION
    );
    assert_eq!(
        run(&[
            "generate",
            "--out",
            s(&out),
            "--amp-min",
            "3",
            "--amp-max",
            "1"
        ]),
        EXIT_VALIDATION
    );
}

#[test]
fn non_empty_output_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("data");
    generate(&out, "1", "12");
    let before = fs::read(out.join("video_000/gt_affine.txt")).unwrap();
    assert_eq!(
        run(&[
            "generate",
            "--seed",
            "5",
            "--out",
            s(&out),
            "--frames",
            "12"
        ]),
        EXIT_VALIDATION
    );
    assert_eq!(
        run(&[
            "generate",
            "--seed",
            "5",
            "--out",
            s(&out),
            "--frames",
            "12",
            "--force"
        ]),
        EXIT_OK
    );
    assert_eq!(
        fs::read(out.join("video_000/gt_affine.txt")).unwrap(),
        before
    );
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(
        &cfg,
        "# shared settings\nframes = 14\nvideos = 2\nwidth = 96\nheight = 64\n",
    )
    .unwrap();
    let out = tmp.path().join("data");
    let code = run(&[
        "generate",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--videos",
        "1",
    ]);
    assert_eq!(code, EXIT_OK);
    let manifest =
        parse_key_values(&fs::read_to_string(out.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!(manifest["config.frames"], "14");
    assert_eq!(manifest["config.width"], "96");
    assert_eq!(manifest["videos"], "video_000");

    fs::write(&cfg, "frames = many\n").unwrap();
    assert_eq!(
        run(&[
            "generate",
            "--config",
            s(&cfg),
            "--out",
            s(&tmp.path().join("x"))
        ]),
        EXIT_VALIDATION
    );
    assert_eq!(
        run(&[
            "generate",
            "--config",
            s(&tmp.path().join("missing.cfg")),
            "--out",
            s(&out)
        ]),
        EXIT_IO
    );
}

#[test]
fn stabilize_checks_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "1", "16");
    let video = data.join("video_000");
    let out = |n: &str| tmp.path().join(n);
    assert_eq!(
        run(&[
            "stabilize",
            "--input",
            s(&video),
            "--out",
            s(&out("a")),
            "--window",
            "10"
        ]),
        EXIT_VALIDATION
    );
    assert_eq!(
        run(&[
            "stabilize",
            "--input",
            s(&video),
            "--out",
            s(&out("b")),
            "--crop",
            "1.5"
        ]),
        EXIT_VALIDATION
    );
    assert_eq!(
        run(&[
            "stabilize",
            "--input",
            s(&video),
            "--out",
            s(&out("c")),
            "--backend",
            "learned"
        ]),
        EXIT_VALIDATION
    );
    assert_eq!(
        run(&[
            "stabilize",
            "--input",
            s(&video),
            "--out",
            s(&out("d")),
            "--backend",
            "magic"
        ]),
        EXIT_VALIDATION
    );
    assert_eq!(
        run(&[
            "stabilize",
            "--input",
            s(&tmp.path().join("nope")),
            "--out",
            s(&out("e"))
        ]),
        EXIT_IO
    );
    let weights = out("no_weights");
    fs::create_dir_all(&weights).unwrap();
    assert_eq!(
        run(&[
            "stabilize",
            "--input",
            s(&video),
            "--out",
            s(&out("f")),
            "--backend",
            "learned",
            "--weights",
            s(&weights),
        ]),
        EXIT_IO
    );
}

#[test]
fn full_pipeline_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let stab = tmp.path().join("stab");
    let eval = tmp.path().join("eval");
    generate(&data, "2", "40");
    assert_eq!(
        run(&[
            "stabilize",
            "--input",
            s(&data),
            "--out",
            s(&stab),
            "--backend",
            "oracle",
            "--window",
            "15"
        ]),
        EXIT_OK
    );
    for id in ["video_000", "video_001"] {
        let dir = stab.join(id);
        assert_eq!(
            fs::read_dir(&dir)
                .unwrap()
                .filter(|e| {
                    e.as_ref()
                        .unwrap()
                        .path()
                        .extension()
                        .is_some_and(|x| x == "pgm")
                })
                .count(),
            40
        );
        assert!(dir.join("applied_transforms.txt").is_file());
        assert!(dir.join("stabilize_report.txt").is_file());
    }
    assert_eq!(
        run(&[
            "evaluate",
            "--original",
            s(&data),
            "--stabilized",
            s(&stab),
            "--out",
            s(&eval)
        ]),
        EXIT_OK
    );
    let csv = fs::read_to_string(eval.join("batch_summary.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "video_id,stability,distortion,cropping,success");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("video_000,") && lines[1].ends_with(",true"));
    let report =
        parse_key_values(&fs::read_to_string(eval.join("video_001/report.txt")).unwrap()).unwrap();
    let crop: f64 = report["cropping_ratio"].parse().unwrap();
    assert!(crop > 0.0 && crop <= 0.64 + 1e-9, "{crop}");
}

#[test]
fn pass_through_evaluation_scores_the_input() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "1", "30");
    let video = data.join("video_000");
    let eval = tmp.path().join("eval");
    assert_eq!(
        run(&[
            "evaluate",
            "--original",
            s(&video),
            "--stabilized",
            s(&video),
            "--out",
            s(&eval)
        ]),
        EXIT_OK
    );
    let r = parse_key_values(&fs::read_to_string(eval.join("report.txt")).unwrap()).unwrap();
    let f = |k: &str| -> f64 { r[k].parse().unwrap() };
    assert!((f("stability_avg") - f("input_stability_avg")).abs() < 1e-12);
    assert!(f("distortion") > 0.999, "{}", r["distortion"]);
    assert!((f("cropping_ratio") - 1.0).abs() < 1e-12);
    assert_eq!(r["success"], "true");
}

#[test]
fn misaligned_inputs_exit_5() {
    let tmp = tempfile::tempdir().unwrap();
    let long = tmp.path().join("long");
    let short = tmp.path().join("short");
    generate(&long, "1", "20");
    generate(&short, "1", "12");
    let eval = tmp.path().join("eval");
    assert_eq!(
        run(&[
            "evaluate",
            "--original",
            s(&long.join("video_000")),
            "--stabilized",
            s(&short.join("video_000")),
            "--out",
            s(&eval),
        ]),
        EXIT_MISMATCH
    );
    assert!(eval.join("batch_summary.csv").is_file());
}

#[test]
fn train_writes_weights_and_log() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("model");
    let code = run(&[
        "train",
        "--seed",
        "2",
        "--out",
        s(&model),
        "--pairs",
        "40",
        "--epochs-tr",
        "1",
        "--epochs-rs",
        "1",
        "--no-flow-channel",
    ]);
    assert_eq!(code, EXIT_OK);
    for f in ["f_tr.bin", "f_rs.bin", "train_log.csv"] {
        assert!(model.join(f).is_file(), "{f} missing");
    }
    let log = fs::read_to_string(model.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(log.starts_with("epoch,loss_tr,loss_rs\n1,"));

    let data = tmp.path().join("data");
    generate(&data, "1", "16");
    let stab = tmp.path().join("stab");
    let code = run(&[
        "stabilize",
        "--input",
        s(&data),
        "--out",
        s(&stab),
        "--backend",
        "learned",
        "--weights",
        s(&model),
        "--window",
        "9",
        "--no-flow-channel",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(stab.join("video_000/applied_transforms.txt").is_file());

    assert_eq!(
        run(&["train", "--out", s(&tmp.path().join("m2")), "--pairs", "10"]),
        EXIT_VALIDATION
    );
    assert_eq!(
        run(&["train", "--out", s(&tmp.path().join("m3")), "--lr", "-1"]),
        EXIT_VALIDATION
    );
}
