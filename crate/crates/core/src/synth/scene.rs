//! Deterministic layered 2D world.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureStyle {
    Checker,
    Noise,
    Blobs,
    Mixed,
}

impl fmt::Display for TextureStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextureStyle::Checker => "checker",
            TextureStyle::Noise => "noise",
            TextureStyle::Blobs => "blobs",
            TextureStyle::Mixed => "mixed",
        })
    }
}

impl FromStr for TextureStyle {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "checker" => Ok(TextureStyle::Checker),
            "noise" => Ok(TextureStyle::Noise),
            "blobs" => Ok(TextureStyle::Blobs),
            "mixed" => Ok(TextureStyle::Mixed),
            other => Err(format!("unknown texture style {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    /// Side of the square world texture, in pixels.
    pub canvas_size: usize,
    pub n_layers: usize,
    /// Depth factor per layer, ascending; the first (base) layer has depth 1.
    pub layer_depths: Vec<f64>,
    pub texture_style: TextureStyle,
    /// Size of the frames that will be rendered from this world.
    pub frame_width: usize,
    pub frame_height: usize,
}

impl SceneSpec {
    /// Single-layer world sized for `width x height` frames.
    pub fn single_layer(seed: u64, width: usize, height: usize) -> Self {
        SceneSpec {
            seed,
            canvas_size: 4 * width.max(height),
            n_layers: 1,
            layer_depths: vec![1.0],
            texture_style: TextureStyle::Mixed,
            frame_width: width,
            frame_height: height,
        }
    }

    /// Layered world with depths `1, 2, 3, ...`.
    pub fn layered(seed: u64, width: usize, height: usize, n_layers: usize) -> Self {
        SceneSpec {
            n_layers,
            layer_depths: (0..n_layers).map(|i| 1.0 + i as f64).collect(),
            ..SceneSpec::single_layer(seed, width, height)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let side = self.frame_width.max(self.frame_height);
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err(Error::InvalidSpec("frame size must be positive".into()));
        }
        if self.canvas_size < 4 * side {
            return Err(Error::InvalidSpec(format!(
                "canvas_size {} is smaller than 4 x frame side {side}",
                self.canvas_size
            )));
        }
        if self.n_layers == 0 {
            return Err(Error::InvalidSpec("n_layers must be at least 1".into()));
        }
        if self.layer_depths.len() != self.n_layers {
            return Err(Error::InvalidSpec(format!(
                "{} depths for {} layers",
                self.layer_depths.len(),
                self.n_layers
            )));
        }
        if self.layer_depths[0] != 1.0 {
            return Err(Error::InvalidSpec("first layer depth must be 1".into()));
        }
        if self
            .layer_depths
            .windows(2)
            .any(|w| !(w[1] >= w[0]) || !w[1].is_finite())
        {
            return Err(Error::InvalidSpec(
                "layer depths must be finite and ascending".into(),
            ));
        }
        Ok(())
    }
}

/// One texture plane. Layers nearer than the deepest carry an alpha mask
/// so the layers behind them show through.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub depth: f64,
    pub texture: Vec<f32>,
    pub alpha: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    /// Ordered base (depth 1) first.
    pub layers: Vec<Layer>,
}

impl Scene {
    pub fn canvas_size(&self) -> usize {
        self.spec.canvas_size
    }

    pub fn canvas_center(&self) -> (f64, f64) {
        let c = self.spec.canvas_size as f64 / 2.0;
        (c, c)
    }
}

const LAYER_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn build_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let n = spec.canvas_size;
    let layers = spec
        .layer_depths
        .iter()
        .enumerate()
        .map(|(i, &depth)| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(spec.seed ^ LAYER_SEED_STRIDE.wrapping_mul(i as u64 + 1));
            let texture = match spec.texture_style {
                TextureStyle::Checker => checker(&mut rng, n),
                TextureStyle::Noise => value_noise(&mut rng, n),
                TextureStyle::Blobs => blobs(&mut rng, n),
                TextureStyle::Mixed => {
                    let a = value_noise(&mut rng, n);
                    let b = blobs(&mut rng, n);
                    let c = checker(&mut rng, n);
                    a.iter()
                        .zip(&b)
                        .zip(&c)
                        .map(|((a, b), c)| 0.45 * a + 0.35 * b + 0.2 * c)
                        .collect()
                }
            };
            let alpha = (i + 1 < spec.n_layers).then(|| alpha_mask(&mut rng, n));
            Layer {
                depth,
                texture: to_gray(texture),
                alpha,
            }
        })
        .collect();
    Ok(Scene {
        spec: spec.clone(),
        layers,
    })
}

/// Stretches values to the 16..=240 gray range.
fn to_gray(v: Vec<f32>) -> Vec<f32> {
    let lo = v.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = v.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let span = (hi - lo).max(1e-6);
    v.into_iter()
        .map(|x| 16.0 + 224.0 * (x - lo) / span)
        .collect()
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smoothly interpolated random lattice with spacing `cell`.
fn lattice_octave(rng: &mut ChaCha8Rng, n: usize, cell: usize, amp: f32, out: &mut [f32]) {
    let g = n / cell + 2;
    let grid: Vec<f32> = (0..g * g).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    for y in 0..n {
        let gy = y / cell;
        let ty = smoothstep((y % cell) as f64 / cell as f64) as f32;
        for x in 0..n {
            let gx = x / cell;
            let tx = smoothstep((x % cell) as f64 / cell as f64) as f32;
            let v00 = grid[gy * g + gx];
            let v10 = grid[gy * g + gx + 1];
            let v01 = grid[(gy + 1) * g + gx];
            let v11 = grid[(gy + 1) * g + gx + 1];
            let top = v00 + tx * (v10 - v00);
            let bottom = v01 + tx * (v11 - v01);
            out[y * n + x] += amp * (top + ty * (bottom - top));
        }
    }
}

fn value_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; n * n];
    for (cell, amp) in [(64, 1.0), (32, 0.7), (16, 0.5), (8, 0.35), (4, 0.25)] {
        lattice_octave(rng, n, cell, amp, &mut out);
    }
    out
}

fn blobs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; n * n];
    let count = n * n / 300;
    for _ in 0..count {
        let cx = rng.gen_range(0.0..n as f64);
        let cy = rng.gen_range(0.0..n as f64);
        let sigma = rng.gen_range(1.5..9.0f64);
        let amp = rng.gen_range(-1.0..1.0) as f32;
        let r = (3.0 * sigma).ceil() as i64;
        let inv = 1.0 / (2.0 * sigma * sigma);
        let (x0, x1) = ((cx as i64 - r).max(0), (cx as i64 + r).min(n as i64 - 1));
        let (y0, y1) = ((cy as i64 - r).max(0), (cy as i64 + r).min(n as i64 - 1));
        for y in y0..=y1 {
            let dy = y as f64 - cy;
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                out[y as usize * n + x as usize] += amp * (-(dx * dx + dy * dy) * inv).exp() as f32;
            }
        }
    }
    out
}

/// Mosaic of random-gray cells with a fine noise octave so no cell is flat.
fn checker(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    let cell = rng.gen_range(8..=24usize);
    let g = n / cell + 1;
    let grays: Vec<f32> = (0..g * g).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let mut out: Vec<f32> = (0..n * n)
        .map(|i| grays[(i / n / cell) * g + (i % n) / cell])
        .collect();
    lattice_octave(rng, n, 4, 0.3, &mut out);
    out
}

fn alpha_mask(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    let mut m = vec![0.0f32; n * n];
    lattice_octave(rng, n, 48, 1.0, &mut m);
    lattice_octave(rng, n, 24, 0.5, &mut m);
    m.into_iter()
        .map(|v| ((v - 0.05) / 0.2 + 0.5).clamp(0.0, 1.0))
        .collect()
}
