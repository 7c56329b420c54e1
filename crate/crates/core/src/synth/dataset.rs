//! Whole-video generation and the on-disk dataset layout.
//!
//! ```text
//! <out>/manifest.txt              videos=..., generator config echo
//! <out>/<video_id>/frame_000000.pgm ...
//! <out>/<video_id>/marks.txt      frame_id uid x y
//! <out>/<video_id>/gt_affine.txt  one AffineParams line per frame pair
//! <out>/<video_id>/manifest.txt   n_frames, fps, width, height, seed, n_layers
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::camera::{generate_camera_path, CameraPath, NoiseProfile, SmoothPathSpec, View};
use super::marks::{emit_mark_points, ground_truth_pairs, MarkConfig, MarkLayerMode, MarkRecord};
use super::render::render_frame;
use super::scene::{build_scene, SceneSpec, TextureStyle};
use crate::affine::AffineParams;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::io_util::{
    frame_file_name, list_frame_files, parse_key_values, read_text, write_atomic,
};

#[derive(Debug, Clone, PartialEq)]
pub struct VideoManifest {
    pub n_frames: usize,
    pub fps: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub n_layers: usize,
}

impl VideoManifest {
    pub fn to_text(&self) -> String {
        format!(
            "n_frames={}\nfps={}\nwidth={}\nheight={}\nseed={}\nn_layers={}\n",
            self.n_frames, self.fps, self.width, self.height, self.seed, self.n_layers
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let kv = parse_key_values(text).map_err(|e| Error::format(path, e))?;
        let get = |k: &str| -> Result<&String> {
            kv.get(k)
                .ok_or_else(|| Error::format(path, format!("missing key {k}")))
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|e| Error::format(path, format!("bad {k}: {e}")))
        };
        Ok(VideoManifest {
            n_frames: num("n_frames")? as usize,
            fps: num("fps")? as usize,
            width: num("width")? as usize,
            height: num("height")? as usize,
            seed: num("seed")?,
            n_layers: num("n_layers")? as usize,
        })
    }
}

/// Generated (or loaded) video with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub id: String,
    pub manifest: VideoManifest,
    pub frames: Vec<Frame>,
    pub marks: Vec<MarkRecord>,
    pub gt: Vec<AffineParams>,
}

/// Everything needed to synthesize one video deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoGenConfig {
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub fps: usize,
    pub n_layers: usize,
    pub texture_style: TextureStyle,
    pub noise: NoiseProfile,
    pub k_marks: usize,
    pub scatter_marks: bool,
    /// Fixed intended track with `start` taken relative to the canvas
    /// center; a random gentle track is drawn when `None`.
    pub path: Option<SmoothPathSpec>,
    pub seed: u64,
}

impl Default for VideoGenConfig {
    fn default() -> Self {
        VideoGenConfig {
            width: 128,
            height: 96,
            n_frames: 100,
            fps: 24,
            n_layers: 1,
            texture_style: TextureStyle::Mixed,
            noise: NoiseProfile::default(),
            k_marks: 16,
            scatter_marks: false,
            path: None,
            seed: 0,
        }
    }
}

/// Splitmix64 step, used to derive independent per-video seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Intermediate products of [`generate_video`], kept for analytic checks.
#[derive(Debug, Clone)]
pub struct GeneratedVideo {
    pub video: SyntheticVideo,
    pub scene_spec: SceneSpec,
    pub smooth: CameraPath,
    pub shaky: CameraPath,
    pub view: View,
}

pub fn generate_video(cfg: &VideoGenConfig, index: usize) -> Result<GeneratedVideo> {
    let seed = derive_seed(cfg.seed, index as u64);
    let scene_spec = SceneSpec {
        texture_style: cfg.texture_style,
        ..SceneSpec::layered(seed, cfg.width, cfg.height, cfg.n_layers)
    };
    let scene = build_scene(&scene_spec)?;
    let center = scene.canvas_center();
    let smooth_spec = match cfg.path {
        Some(p) => SmoothPathSpec {
            start: (center.0 + p.start.0, center.1 + p.start.1),
            ..p
        },
        None => SmoothPathSpec::random(seed, center, cfg.n_frames),
    };
    let noise = NoiseProfile {
        seed: derive_seed(seed, 1),
        ..cfg.noise
    };
    let (smooth, shaky) = generate_camera_path(&smooth_spec, &noise, cfg.n_frames)?;
    let frames: Vec<Frame> = shaky
        .poses
        .par_iter()
        .map(|pose| render_frame(&scene, pose, cfg.width, cfg.height))
        .collect();
    let mark_cfg = MarkConfig {
        k: cfg.k_marks,
        layer_mode: if cfg.scatter_marks {
            MarkLayerMode::Scatter
        } else {
            MarkLayerMode::Base
        },
        ..MarkConfig::for_fps(cfg.fps, derive_seed(seed, 2))
    };
    let marks = emit_mark_points(&scene, &shaky, cfg.width, cfg.height, &mark_cfg)?;
    let gt = ground_truth_pairs(&marks, cfg.n_frames)?;
    let view = View::new(cfg.width, cfg.height, scene.canvas_size());
    Ok(GeneratedVideo {
        video: SyntheticVideo {
            id: format!("video_{index:03}"),
            manifest: VideoManifest {
                n_frames: cfg.n_frames,
                fps: cfg.fps,
                width: cfg.width,
                height: cfg.height,
                seed,
                n_layers: cfg.n_layers,
            },
            frames,
            marks,
            gt,
        },
        scene_spec,
        smooth,
        shaky,
        view,
    })
}

pub fn marks_to_text(marks: &[MarkRecord]) -> String {
    let mut sorted = marks.to_vec();
    sorted.sort_by_key(|r| (r.frame_id, r.uid));
    let mut s = String::with_capacity(sorted.len() * 60);
    for r in &sorted {
        let _ = writeln!(s, "{r}");
    }
    s
}

pub fn params_to_text(params: &[AffineParams]) -> String {
    let mut s = String::with_capacity(params.len() * 100);
    for p in params {
        let _ = writeln!(s, "{p}");
    }
    s
}

pub fn read_marks(path: &Path) -> Result<Vec<MarkRecord>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.parse()
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn read_params(path: &Path) -> Result<Vec<AffineParams>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.parse()
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_frames(dir: &Path, frames: &[Frame]) -> Result<()> {
    frames
        .par_iter()
        .enumerate()
        .try_for_each(|(i, f)| f.write_pgm(&dir.join(frame_file_name(i))))
}

pub fn read_frames(dir: &Path) -> Result<Vec<Frame>> {
    let files = list_frame_files(dir)?;
    files.par_iter().map(|p| Frame::read_pgm(p)).collect()
}

pub fn write_video(dir: &Path, video: &SyntheticVideo) -> Result<()> {
    write_frames(dir, &video.frames)?;
    write_atomic(
        &dir.join("marks.txt"),
        marks_to_text(&video.marks).as_bytes(),
    )?;
    write_atomic(
        &dir.join("gt_affine.txt"),
        params_to_text(&video.gt).as_bytes(),
    )?;
    write_atomic(
        &dir.join("manifest.txt"),
        video.manifest.to_text().as_bytes(),
    )
}

pub fn read_video(dir: &Path) -> Result<SyntheticVideo> {
    let manifest_path = dir.join("manifest.txt");
    let manifest = VideoManifest::parse(&read_text(&manifest_path)?, &manifest_path)?;
    let frames = read_frames(dir)?;
    if frames.len() != manifest.n_frames {
        return Err(Error::format(
            &manifest_path,
            format!(
                "manifest says {} frames, found {}",
                manifest.n_frames,
                frames.len()
            ),
        ));
    }
    if let Some(f) = frames
        .iter()
        .find(|f| f.dims() != (manifest.width, manifest.height))
    {
        return Err(Error::format(
            dir,
            format!(
                "frame of size {:?} in a {}x{} video",
                f.dims(),
                manifest.width,
                manifest.height
            ),
        ));
    }
    let marks = read_marks(&dir.join("marks.txt"))?;
    let gt = read_params(&dir.join("gt_affine.txt"))?;
    if gt.len() + 1 != manifest.n_frames.max(1) {
        return Err(Error::format(
            dir.join("gt_affine.txt"),
            format!("{} pairs for {} frames", gt.len(), manifest.n_frames),
        ));
    }
    Ok(SyntheticVideo {
        id: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        manifest,
        frames,
        marks,
        gt,
    })
}

/// Dataset-level index written next to the video directories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub video_ids: Vec<String>,
    pub config: BTreeMap<String, String>,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "n_videos={}\nvideos={}\n",
            self.video_ids.len(),
            self.video_ids.join(",")
        );
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k}={v}");
        }
        s
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.txt");
        let kv = parse_key_values(&read_text(&path)?).map_err(|e| Error::format(&path, e))?;
        let video_ids: Vec<String> = kv
            .get("videos")
            .map(|v| {
                v.split(',')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .ok_or_else(|| Error::format(&path, "missing key videos"))?;
        let declared: usize = kv
            .get("n_videos")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::format(&path, "missing or bad n_videos"))?;
        if declared != video_ids.len() {
            return Err(Error::format(
                &path,
                format!("n_videos={declared} but {} ids listed", video_ids.len()),
            ));
        }
        let config = kv
            .iter()
            .filter_map(|(k, v)| {
                k.strip_prefix("config.")
                    .map(|k| (k.to_string(), v.clone()))
            })
            .collect();
        Ok(DatasetManifest { video_ids, config })
    }

    pub fn video_dirs(&self, root: &Path) -> Vec<PathBuf> {
        self.video_ids.iter().map(|id| root.join(id)).collect()
    }
}

pub fn write_dataset(
    out_dir: &Path,
    videos: &[SyntheticVideo],
    config: &BTreeMap<String, String>,
) -> Result<DatasetManifest> {
    for v in videos {
        write_video(&out_dir.join(&v.id), v)?;
    }
    let manifest = DatasetManifest {
        video_ids: videos.iter().map(|v| v.id.clone()).collect(),
        config: config.clone(),
    };
    write_atomic(&out_dir.join("manifest.txt"), manifest.to_text().as_bytes())?;
    Ok(manifest)
}

/// Loads and validates every video listed in the dataset manifest.
pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<SyntheticVideo>)> {
    let manifest = DatasetManifest::read(dir)?;
    let videos = manifest
        .video_dirs(dir)
        .iter()
        .map(|d| read_video(d))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, videos))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> VideoGenConfig {
        VideoGenConfig {
            width: 48,
            height: 32,
            n_frames: 12,
            fps: 8,
            seed: 21,
            ..VideoGenConfig::default()
        }
    }

    #[test]
    fn write_then_read_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let g = generate_video(&small_cfg(), 0).unwrap();
        let mut cfg = BTreeMap::new();
        cfg.insert("seed".to_string(), "21".to_string());
        write_dataset(dir.path(), std::slice::from_ref(&g.video), &cfg).unwrap();
        let (manifest, videos) = read_dataset(dir.path()).unwrap();
        assert_eq!(manifest.video_ids, vec!["video_000"]);
        assert_eq!(manifest.config, cfg);
        assert_eq!(videos[0], g.video);
    }

    #[test]
    fn empty_dataset_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &[], &BTreeMap::new()).unwrap();
        let (m, v) = read_dataset(dir.path()).unwrap();
        assert!(m.video_ids.is_empty() && v.is_empty());
    }

    #[test]
    fn missing_frame_detected() {
        let dir = tempfile::tempdir().unwrap();
        let g = generate_video(&small_cfg(), 1).unwrap();
        write_video(dir.path(), &g.video).unwrap();
        std::fs::remove_file(dir.path().join(frame_file_name(5))).unwrap();
        assert!(read_video(dir.path()).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let a = generate_video(&small_cfg(), 0).unwrap().video;
        let b = generate_video(&small_cfg(), 0).unwrap().video;
        let c = generate_video(&small_cfg(), 1).unwrap().video;
        assert_eq!(a, b);
        assert_ne!(a.frames, c.frames);
    }
}
