use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::settings::Settings;
use super::{
    CliError, EvaluateArgs, GenerateArgs, StabilizeArgs, TrainArgs, EXIT_IO, EXIT_MISMATCH,
};
use crate::affine::AffineParams;
use crate::error::Error;
use crate::frame::Frame;
use crate::io_util::{parse_key_values, read_text, write_atomic};
use crate::metrics::{
    batch_summary_csv, evaluate as evaluate_video, success_rate, EvalMetadata, MetricsReport,
    TranslationMode,
};
use crate::motion::nn::{train as train_nets, LearnedModel, TrainConfig, TrainingPair};
use crate::motion::{estimate_sequence, Backend, BlockmatchOptions};
use crate::stabilizer::stabilize_video;
use crate::synth::camera::NoiseProfile;
use crate::synth::dataset::{
    derive_seed, generate_video, read_dataset, read_frames, read_marks, read_params, read_video,
    write_video, DatasetManifest, VideoGenConfig,
};
use crate::synth::pairs::{generate_pairs, PairSetSpec};
use crate::synth::scene::TextureStyle;
use crate::trajectory::SmoothingConfig;

/// Creates `dir`, refusing a non-empty one unless `force`.
fn prepare_output(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.is_file() {
        return Err(CliError::validation(format!("{} is a file", dir.display())));
    }
    if dir.is_dir() && !force {
        let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if entries.next().is_some() {
            return Err(CliError::validation(format!(
                "output directory {} is not empty (use --force)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

/// Video ids listed by a dataset manifest in `dir`, if it is a dataset root.
fn dataset_ids(dir: &Path) -> Option<Vec<String>> {
    let text = fs::read_to_string(dir.join("manifest.txt")).ok()?;
    let kv = parse_key_values(&text).ok()?;
    kv.contains_key("videos")
        .then(|| DatasetManifest::read(dir).ok().map(|m| m.video_ids))?
}

fn video_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".into())
}

pub fn generate(a: &GenerateArgs, s: &Settings, seed: u64, force: bool) -> Result<(), CliError> {
    let out: PathBuf = s.required("out", a.out.clone())?;
    let d = VideoGenConfig::default();
    let nd = NoiseProfile::default();
    let n_videos = s.value("videos", a.videos, 1usize)?;
    let texture: TextureStyle = s
        .value("texture", a.texture.clone(), d.texture_style.to_string())?
        .parse()
        .map_err(CliError::validation)?;
    let cfg = VideoGenConfig {
        width: s.value("width", a.width, d.width)?,
        height: s.value("height", a.height, d.height)?,
        n_frames: s.value("frames", a.frames, d.n_frames)?,
        fps: s.value("fps", a.fps, d.fps)?,
        n_layers: s.value("layers", a.layers, d.n_layers)?,
        texture_style: texture,
        noise: NoiseProfile {
            n_sinusoids: s.value("sinusoids", a.sinusoids, nd.n_sinusoids)?,
            amp_range: (
                s.value("amp_min", a.amp_min, nd.amp_range.0)?,
                s.value("amp_max", a.amp_max, nd.amp_range.1)?,
            ),
            freq_range: (
                s.value("freq_min", a.freq_min, nd.freq_range.0)?,
                s.value("freq_max", a.freq_max, nd.freq_range.1)?,
            ),
            rot_amp_range: (
                s.value("rot_amp_min", a.rot_amp_min, nd.rot_amp_range.0)?,
                s.value("rot_amp_max", a.rot_amp_max, nd.rot_amp_range.1)?,
            ),
            jitter_sigma: s.value("jitter", a.jitter, nd.jitter_sigma)?,
            rot_jitter_sigma: s.value("rot_jitter", a.rot_jitter, nd.rot_jitter_sigma)?,
            zoom_amp: s.value("zoom_amp", a.zoom_amp, nd.zoom_amp)?,
            seed: 0,
        },
        k_marks: s.value("marks", a.marks, d.k_marks)?,
        scatter_marks: s.switch("scatter_marks", a.scatter_marks, d.scatter_marks)?,
        path: None,
        seed,
    };
    if cfg.n_frames < 2 {
        return Err(CliError::validation(format!(
            "--frames must be at least 2, got {}",
            cfg.n_frames
        )));
    }
    if cfg.fps < 2 {
        return Err(CliError::validation(format!(
            "--fps must be at least 2, got {}",
            cfg.fps
        )));
    }
    cfg.noise.validate()?;
    prepare_output(&out, force)?;

    let mut ids = Vec::with_capacity(n_videos);
    for i in 0..n_videos {
        let g = generate_video(&cfg, i)?;
        let v = &g.video;
        write_video(&out.join(&v.id), v)?;
        let mean_t = v.gt.iter().map(|p| p.t_x.hypot(p.t_y)).sum::<f64>() / v.gt.len() as f64;
        let mean_r = v.gt.iter().map(|p| p.theta.abs()).sum::<f64>() / v.gt.len() as f64;
        println!(
            "{}: {} frames {}x{} seed {} marks {} mean |t| {mean_t:.3} px mean |theta| {mean_r:.5} rad",
            v.id,
            v.frames.len(),
            cfg.width,
            cfg.height,
            v.manifest.seed,
            v.marks.len()
        );
        ids.push(v.id.clone());
    }
    let n = &cfg.noise;
    let echo: BTreeMap<String, String> = [
        ("seed", seed.to_string()),
        ("videos", n_videos.to_string()),
        ("frames", cfg.n_frames.to_string()),
        ("width", cfg.width.to_string()),
        ("height", cfg.height.to_string()),
        ("fps", cfg.fps.to_string()),
        ("layers", cfg.n_layers.to_string()),
        ("texture", cfg.texture_style.to_string()),
        ("marks", cfg.k_marks.to_string()),
        ("scatter_marks", cfg.scatter_marks.to_string()),
        ("sinusoids", n.n_sinusoids.to_string()),
        ("amp_min", n.amp_range.0.to_string()),
        ("amp_max", n.amp_range.1.to_string()),
        ("freq_min", n.freq_range.0.to_string()),
        ("freq_max", n.freq_range.1.to_string()),
        ("rot_amp_min", n.rot_amp_range.0.to_string()),
        ("rot_amp_max", n.rot_amp_range.1.to_string()),
        ("jitter", n.jitter_sigma.to_string()),
        ("rot_jitter", n.rot_jitter_sigma.to_string()),
        ("zoom_amp", n.zoom_amp.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let manifest = DatasetManifest {
        video_ids: ids,
        config: echo,
    };
    write_atomic(&out.join("manifest.txt"), manifest.to_text().as_bytes())?;
    println!("wrote {n_videos} videos to {}", out.display());
    Ok(())
}

fn video_pairs(frames: &[Frame], gt: &[AffineParams]) -> Vec<TrainingPair> {
    frames
        .windows(2)
        .zip(gt)
        .map(|(w, p)| TrainingPair {
            frame_a: w[0].clone(),
            frame_b: w[1].clone(),
            flow: None,
            target: *p,
        })
        .collect()
}

pub fn train(a: &TrainArgs, s: &Settings, seed: u64, force: bool) -> Result<(), CliError> {
    let out: PathBuf = s.required("out", a.out.clone())?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: s.value("lr", a.lr, d.learning_rate)?,
        adam_beta1: s.value("beta1", a.beta1, d.adam_beta1)?,
        adam_beta2: s.value("beta2", a.beta2, d.adam_beta2)?,
        adam_eps: s.value("eps", a.eps, d.adam_eps)?,
        batch_size: s.value("batch", a.batch, d.batch_size)?,
        epochs_tr: s.value("epochs_tr", a.epochs_tr, d.epochs_tr)?,
        epochs_rs: s.value("epochs_rs", a.epochs_rs, d.epochs_rs)?,
        lr_drop_epoch: s.value("lr_drop_epoch", a.lr_drop_epoch, d.lr_drop_epoch)?,
        lr_after_drop: s.value("lr_after_drop", a.lr_after_drop, d.lr_after_drop)?,
        dropout_rate: s.value("dropout", a.dropout, d.dropout_rate)?,
        input_side: s.value("input_side", a.input_side, d.input_side)?,
        use_flow: !s.switch("no_flow_channel", a.no_flow_channel, false)?,
        augment: !s.switch("no_augment", a.no_augment, false)?,
        seed,
        ..d
    };
    cfg.validate()?;
    let data: Option<PathBuf> = s.optional("data", a.data.clone())?;
    let (pairs, source) = match &data {
        Some(dir) => {
            let videos = if dataset_ids(dir).is_some() {
                read_dataset(dir)?.1
            } else {
                vec![read_video(dir)?]
            };
            let pairs: Vec<TrainingPair> = videos
                .iter()
                .flat_map(|v| video_pairs(&v.frames, &v.gt))
                .collect();
            (pairs, format!("dataset {}", dir.display()))
        }
        None => {
            let dp = PairSetSpec::default();
            let spec = PairSetSpec {
                n_pairs: s.value("pairs", a.pairs, dp.n_pairs)?,
                side: s.value("pair_side", a.pair_side, dp.side)?,
                max_translation: s.value(
                    "max_translation",
                    a.max_translation,
                    dp.max_translation,
                )?,
                max_rotation: s.value("max_rotation", a.max_rotation, dp.max_rotation)?,
                max_scale_dev: s.value("max_scale_dev", a.max_scale_dev, dp.max_scale_dev)?,
                seed: derive_seed(seed, 0x7A1),
                ..dp
            };
            let pairs = generate_pairs(&spec)?
                .into_iter()
                .map(|p| TrainingPair {
                    frame_a: p.frame_a,
                    frame_b: p.frame_b,
                    flow: None,
                    target: p.params,
                })
                .collect();
            (
                pairs,
                format!(
                    "{} synthetic {}x{} pairs",
                    spec.n_pairs, spec.side, spec.side
                ),
            )
        }
    };
    if pairs.len() < cfg.batch_size {
        return Err(CliError::validation(format!(
            "{} training pairs is fewer than one batch of {}",
            pairs.len(),
            cfg.batch_size
        )));
    }
    prepare_output(&out, force)?;
    println!("training on {source}");
    let (tr, rs) = train_nets(&pairs, &cfg)?;
    let model = LearnedModel {
        tr,
        rs,
        flow: cfg.flow,
    };
    let meta = format!("{}source={source}\n", cfg.to_meta_text());
    model.save(&out, &meta)?;

    let mut log = String::from("epoch,loss_tr,loss_rs\n");
    let cell = |c: &[f64], i: usize| c.get(i).map(|v| format!("{v:.12e}")).unwrap_or_default();
    for i in 0..cfg.epochs_tr.max(cfg.epochs_rs) {
        let _ = writeln!(
            log,
            "{},{},{}",
            i + 1,
            cell(&model.tr.loss_curve, i),
            cell(&model.rs.loss_curve, i)
        );
    }
    write_atomic(&out.join("train_log.csv"), log.as_bytes())?;
    let last = |c: &[f64]| c.last().copied().unwrap_or(f64::NAN);
    println!(
        "f_tr: {} epochs, final loss {:.6}; f_rs: {} epochs, final loss {:.6}",
        cfg.epochs_tr,
        last(&model.tr.loss_curve),
        cfg.epochs_rs,
        last(&model.rs.loss_curve)
    );
    Ok(())
}

enum BackendChoice {
    Oracle,
    Blockmatch,
    Learned(Box<LearnedModel>),
}

pub fn stabilize(a: &StabilizeArgs, s: &Settings, force: bool) -> Result<(), CliError> {
    let input: PathBuf = s.required("input", a.input.clone())?;
    let out: PathBuf = s.required("out", a.out.clone())?;
    let d = SmoothingConfig::default();
    let smoothing = SmoothingConfig {
        window: s.value("window", a.window, d.window)?,
        polyorder: s.value("polyorder", a.polyorder, d.polyorder)?,
    };
    if smoothing.window % 2 == 0 || smoothing.window <= smoothing.polyorder {
        return Err(Error::BadWindow {
            window: smoothing.window,
            polyorder: smoothing.polyorder,
        }
        .into());
    }
    let crop = s.value("crop", a.crop, 0.8f64)?;
    crate::stabilizer::CropWindow::new(crop)?;
    let no_flow = s.switch("no_flow_channel", a.no_flow_channel, false)?;
    let name = s.value("backend", a.backend.clone(), "blockmatch".to_string())?;
    let backend = match name.as_str() {
        "oracle" => BackendChoice::Oracle,
        "blockmatch" => BackendChoice::Blockmatch,
        "learned" => {
            let dir: PathBuf = s
                .optional("weights", a.weights.clone())?
                .ok_or_else(|| CliError::validation("--backend learned needs --weights"))?;
            let model = LearnedModel::load(&dir)?;
            let channels = model.tr.cfg().in_channels;
            if no_flow && channels != 2 {
                return Err(CliError::validation(format!(
                    "--no-flow-channel given but {} holds {channels}-channel weights",
                    dir.display()
                )));
            }
            BackendChoice::Learned(Box::new(model))
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown backend {other:?} (oracle, blockmatch, learned)"
            )))
        }
    };
    if no_flow && !matches!(backend, BackendChoice::Learned(_)) {
        println!("note: --no-flow-channel only affects the learned backend");
    }
    let jobs: Vec<(PathBuf, PathBuf)> = match dataset_ids(&input) {
        Some(ids) => ids
            .iter()
            .map(|id| (input.join(id), out.join(id)))
            .collect(),
        None => vec![(input.clone(), out.clone())],
    };
    prepare_output(&out, force)?;
    for (src, dst) in &jobs {
        let frames = read_frames(src)?;
        if frames.len() < 2 {
            return Err(CliError::new(
                EXIT_IO,
                format!(
                    "{}: need at least 2 frames, found {}",
                    src.display(),
                    frames.len()
                ),
            ));
        }
        let marks;
        let est = match &backend {
            BackendChoice::Oracle => {
                marks = read_marks(&src.join("marks.txt"))?;
                estimate_sequence(&frames, &Backend::Oracle(&marks))
            }
            BackendChoice::Blockmatch => {
                estimate_sequence(&frames, &Backend::Blockmatch(BlockmatchOptions::default()))
            }
            BackendChoice::Learned(m) => estimate_sequence(&frames, &Backend::Learned(m)),
        };
        let result = stabilize_video(&frames, &est.params, &smoothing, crop)?;
        result.write(dst, &name, &est.warnings)?;
        let mean_valid =
            result.valid_fractions.iter().sum::<f64>() / result.valid_fractions.len() as f64;
        println!(
            "{}: {} frames, backend {name}, window {} polyorder {} crop {crop}, mean valid fraction {mean_valid:.4}, {} warnings",
            video_name(src),
            frames.len(),
            smoothing.window,
            smoothing.polyorder,
            est.warnings.len() + result.warnings.len()
        );
    }
    Ok(())
}

/// Applied transforms and crop ratio recorded by `stabilize`, when present.
fn stabilization_metadata(dir: &Path, mode: TranslationMode) -> Result<EvalMetadata, CliError> {
    let mut meta = EvalMetadata {
        translation_mode: mode,
        ..EvalMetadata::default()
    };
    let applied = dir.join("applied_transforms.txt");
    if applied.is_file() {
        meta.applied = Some(read_params(&applied)?);
    }
    let report = dir.join("stabilize_report.txt");
    if report.is_file() {
        let kv = parse_key_values(&read_text(&report)?).map_err(|e| Error::format(&report, e))?;
        if let Some(c) = kv.get("crop") {
            meta.crop_ratio = Some(
                c.parse()
                    .map_err(|e| Error::format(&report, format!("crop: {e}")))?,
            );
        }
    }
    Ok(meta)
}

fn check_alignment(original: &[Frame], stabilized: &[Frame]) -> Result<(), String> {
    if original.len() != stabilized.len() {
        return Err(format!(
            "{} original frames vs {} stabilized",
            original.len(),
            stabilized.len()
        ));
    }
    if let (Some(o), Some(s)) = (original.first(), stabilized.first()) {
        if s.width() > o.width() || s.height() > o.height() {
            return Err(format!(
                "stabilized {:?} larger than original {:?}",
                s.dims(),
                o.dims()
            ));
        }
        if let Some(i) = stabilized.iter().position(|f| f.dims() != s.dims()) {
            return Err(format!(
                "stabilized frame {i} is {:?}, frame 0 is {:?}",
                stabilized[i].dims(),
                s.dims()
            ));
        }
    }
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs, s: &Settings, force: bool) -> Result<(), CliError> {
    let original: PathBuf = s.required("original", a.original.clone())?;
    let stabilized: PathBuf = s.required("stabilized", a.stabilized.clone())?;
    let out: PathBuf = s.required("out", a.out.clone())?;
    let mode = if s.switch("separate_axes", a.separate_axes, false)? {
        TranslationMode::SeparateAxes
    } else {
        TranslationMode::Magnitude
    };
    let batch = dataset_ids(&original);
    let jobs: Vec<(String, PathBuf, PathBuf, PathBuf)> = match &batch {
        Some(ids) => ids
            .iter()
            .map(|id| {
                (
                    id.clone(),
                    original.join(id),
                    stabilized.join(id),
                    out.join(id),
                )
            })
            .collect(),
        None => vec![(
            video_name(&original),
            original.clone(),
            stabilized.clone(),
            out.clone(),
        )],
    };
    prepare_output(&out, force)?;
    let mut rows: Vec<(String, MetricsReport)> = Vec::new();
    let mut misaligned = Vec::new();
    for (id, orig_dir, stab_dir, report_dir) in &jobs {
        if !stab_dir.is_dir() {
            misaligned.push(format!(
                "{id}: no stabilized directory {}",
                stab_dir.display()
            ));
            continue;
        }
        let orig = read_frames(orig_dir)?;
        let stab = read_frames(stab_dir)?;
        if let Err(msg) = check_alignment(&orig, &stab) {
            misaligned.push(format!("{id}: {msg}"));
            continue;
        }
        let meta = stabilization_metadata(stab_dir, mode)?;
        let report = evaluate_video(&orig, &stab, &meta).map_err(CliError::evaluation)?;
        write_atomic(&report_dir.join("report.txt"), report.to_text().as_bytes())?;
        println!(
            "{id}: stability {:.4} (input {:.4}) distortion {} cropping {:.4} success {}",
            report.stability_avg,
            report.input_stability_avg,
            report
                .distortion
                .map(|d| format!("{d:.4}"))
                .unwrap_or_else(|| "failed".into()),
            report.cropping_ratio,
            report.success
        );
        rows.push((id.clone(), report));
    }
    write_atomic(
        &out.join("batch_summary.csv"),
        batch_summary_csv(&rows).as_bytes(),
    )?;
    let reports: Vec<MetricsReport> = rows.into_iter().map(|(_, r)| r).collect();
    println!(
        "success rate {:.4} over {} videos",
        success_rate(&reports),
        reports.len()
    );
    if !misaligned.is_empty() {
        return Err(CliError::new(
            EXIT_MISMATCH,
            format!("misaligned inputs: {}", misaligned.join("; ")),
        ));
    }
    Ok(())
}
