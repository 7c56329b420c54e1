//! Hypothetical mark points and the per-pair ground truth derived from them.
//!
//! Every `sampling_period` frames, `k` screen points are drawn and pinned to
//! the scene. Each such object gets a fresh UID and is recorded on every
//! following frame while it stays on screen and is younger than
//! `beta_frames`; after that it is destroyed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::{CameraPath, View};
use super::scene::Scene;
use crate::affine::{fit_similarity, AffineParams, Correspondence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkRecord {
    pub uid: u64,
    pub frame_id: usize,
    pub x: f64,
    pub y: f64,
}

impl fmt::Display for MarkRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:.17e} {:.17e}",
            self.frame_id, self.uid, self.x, self.y
        )
    }
}

impl FromStr for MarkRecord {
    type Err = String;
    fn from_str(line: &str) -> std::result::Result<Self, Self::Err> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(format!("expected 4 fields, found {}", f.len()));
        }
        let bad = |what: &str, v: &str| format!("bad {what} {v:?}");
        Ok(MarkRecord {
            frame_id: f[0].parse().map_err(|_| bad("frame_id", f[0]))?,
            uid: f[1].parse().map_err(|_| bad("uid", f[1]))?,
            x: f[2].parse().map_err(|_| bad("x", f[2]))?,
            y: f[3].parse().map_err(|_| bad("y", f[3]))?,
        })
    }
}

/// Which scene plane the hypothetical objects attach to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarkLayerMode {
    /// Base layer only; ground truth is then exact.
    #[default]
    Base,
    /// Uniformly random layer per object (introduces parallax outliers).
    Scatter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkConfig {
    pub k: usize,
    pub beta_frames: usize,
    pub sampling_period: usize,
    pub seed: u64,
    pub layer_mode: MarkLayerMode,
}

impl MarkConfig {
    /// `K = 16`, lifetime of one second and a half-lifetime sampling period.
    pub fn for_fps(fps: usize, seed: u64) -> Self {
        let beta = fps.max(2);
        MarkConfig {
            k: 16,
            beta_frames: beta,
            sampling_period: (beta / 2).max(1),
            seed,
            layer_mode: MarkLayerMode::Base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidSpec(format!(
                "K must be >= 3, got {}",
                self.k
            )));
        }
        if self.beta_frames < 2 {
            return Err(Error::InvalidSpec(format!(
                "beta must be >= 2 frames, got {}",
                self.beta_frames
            )));
        }
        if self.sampling_period == 0 {
            return Err(Error::InvalidSpec("sampling period must be >= 1".into()));
        }
        Ok(())
    }
}

struct LiveObject {
    uid: u64,
    born: usize,
    depth: f64,
    anchor: (f64, f64),
}

/// Emits mark records sorted by frame, then UID.
pub fn emit_mark_points(
    scene: &Scene,
    path: &CameraPath,
    width: usize,
    height: usize,
    cfg: &MarkConfig,
) -> Result<Vec<MarkRecord>> {
    cfg.validate()?;
    let view = View::new(width, height, scene.canvas_size());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut live: Vec<LiveObject> = Vec::new();
    let mut next_uid = 0u64;
    let mut records = Vec::new();

    for (frame_id, pose) in path.poses.iter().enumerate() {
        if frame_id % cfg.sampling_period == 0 {
            for _ in 0..cfg.k {
                let p = (
                    rng.gen_range(0.0..width as f64),
                    rng.gen_range(0.0..height as f64),
                );
                let depth = match cfg.layer_mode {
                    MarkLayerMode::Base => 1.0,
                    MarkLayerMode::Scatter => {
                        scene.layers[rng.gen_range(0..scene.layers.len())].depth
                    }
                };
                live.push(LiveObject {
                    uid: next_uid,
                    born: frame_id,
                    depth,
                    anchor: pose.screen_to_layer(p, &view, depth),
                });
                next_uid += 1;
            }
        }
        live.retain(|obj| {
            if frame_id - obj.born >= cfg.beta_frames {
                return false;
            }
            let (x, y) = pose.layer_to_screen(obj.anchor, &view, obj.depth);
            if !view.contains((x, y)) {
                return false;
            }
            records.push(MarkRecord {
                uid: obj.uid,
                frame_id,
                x,
                y,
            });
            true
        });
    }
    records.sort_by_key(|r| (r.frame_id, r.uid));
    Ok(records)
}

/// `frame_id -> (uid -> screen position)` view of a record list.
pub fn index_by_frame(records: &[MarkRecord]) -> BTreeMap<usize, BTreeMap<u64, (f64, f64)>> {
    let mut by_frame: BTreeMap<usize, BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
    for r in records {
        by_frame
            .entry(r.frame_id)
            .or_default()
            .insert(r.uid, (r.x, r.y));
    }
    by_frame
}

/// Correspondences between frames `pair` and `pair + 1` through shared UIDs.
pub fn pair_correspondences(
    by_frame: &BTreeMap<usize, BTreeMap<u64, (f64, f64)>>,
    pair: usize,
) -> Vec<Correspondence> {
    let (Some(a), Some(b)) = (by_frame.get(&pair), by_frame.get(&(pair + 1))) else {
        return Vec::new();
    };
    a.iter()
        .filter_map(|(uid, &src)| b.get(uid).map(|&dst| Correspondence::new(src, dst)))
        .collect()
}

pub fn ground_truth_pair(
    by_frame: &BTreeMap<usize, BTreeMap<u64, (f64, f64)>>,
    pair: usize,
) -> Result<AffineParams> {
    let corrs = pair_correspondences(by_frame, pair);
    if corrs.len() < 2 {
        return Err(Error::InsufficientMarks(pair));
    }
    fit_similarity(&corrs).map_err(|_| Error::InsufficientMarks(pair))
}

/// One fitted similarity per consecutive frame pair (`n_frames - 1` entries).
pub fn ground_truth_pairs(records: &[MarkRecord], n_frames: usize) -> Result<Vec<AffineParams>> {
    let by_frame = index_by_frame(records);
    (0..n_frames.saturating_sub(1))
        .map(|i| ground_truth_pair(&by_frame, i))
        .collect()
}
