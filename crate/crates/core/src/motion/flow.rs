//! Coarse-to-fine block-matching optical flow.
//!
//! Flow is estimated per tile on a regular grid and spread over the pixels
//! nearest to each tile center, so the dense field is piecewise constant.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub levels: usize,
    pub block: usize,
    pub search: usize,
    /// Tile spacing at full resolution.
    pub step: usize,
    /// Minimum gray-level standard deviation of a block to be trackable.
    pub min_std: f64,
    pub refine_iters: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            levels: 3,
            block: 16,
            search: 4,
            step: 8,
            min_std: 2.0,
            refine_iters: 5,
        }
    }
}

impl FlowOptions {
    pub fn new(levels: usize, block: usize, search: usize) -> Self {
        FlowOptions {
            levels,
            block,
            search,
            step: (block / 2).max(1),
            ..FlowOptions::default()
        }
    }
}

/// Displacement measured at one tile center of the first frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub valid: Vec<bool>,
    /// Valid tile measurements the dense field was built from.
    pub samples: Vec<FlowSample>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
            valid: vec![true; width * height],
            samples: Vec::new(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn at(&self, x: usize, y: usize) -> Option<(f64, f64)> {
        let i = y * self.width + x;
        self.valid[i].then(|| (self.u[i], self.v[i]))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Point measurements: the tile samples when known, otherwise valid
    /// pixels on a regular grid.
    pub fn point_samples(&self, grid: usize) -> Vec<FlowSample> {
        if !self.samples.is_empty() {
            return self.samples.clone();
        }
        let grid = grid.max(1);
        let mut out = Vec::new();
        for y in (grid / 2..self.height).step_by(grid) {
            for x in (grid / 2..self.width).step_by(grid) {
                if let Some((u, v)) = self.at(x, y) {
                    out.push(FlowSample {
                        x: x as f64,
                        y: y as f64,
                        u,
                        v,
                    });
                }
            }
        }
        out
    }
}

pub fn compute_flow(
    frame_a: &Frame,
    frame_b: &Frame,
    levels: usize,
    block: usize,
    search: usize,
) -> Result<FlowField> {
    compute_flow_with(frame_a, frame_b, &FlowOptions::new(levels, block, search))
}

pub fn compute_flow_with(
    frame_a: &Frame,
    frame_b: &Frame,
    opts: &FlowOptions,
) -> Result<FlowField> {
    if frame_a.dims() != frame_b.dims() {
        return Err(Error::FrameMismatch(format!(
            "{:?} vs {:?}",
            frame_a.dims(),
            frame_b.dims()
        )));
    }
    if opts.levels == 0 || opts.block < 2 || opts.step == 0 {
        return Err(Error::InvalidConfig(format!(
            "flow needs levels >= 1, block >= 2, step >= 1 (got {}, {}, {})",
            opts.levels, opts.block, opts.step
        )));
    }
    let (w, h) = frame_a.dims();
    if w < opts.block || h < opts.block {
        let mut f = FlowField::zeros(w, h);
        f.valid.fill(false);
        return Ok(f);
    }

    let mut pyr_a = vec![frame_a.clone()];
    let mut pyr_b = vec![frame_b.clone()];
    while pyr_a.len() < opts.levels {
        let last = pyr_a.last().unwrap();
        if last.width() / 2 < 8 || last.height() / 2 < 8 {
            break;
        }
        let next_a = last.downsample();
        let next_b = pyr_b.last().unwrap().downsample();
        pyr_a.push(next_a);
        pyr_b.push(next_b);
    }

    let (xs, ys) = (
        tile_origins(w, opts.block, opts.step),
        tile_origins(h, opts.block, opts.step),
    );
    let tiles: Vec<(usize, usize)> = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .collect();
    let results: Vec<Option<(f64, f64)>> = tiles
        .par_iter()
        .map(|&(x0, y0)| track_tile(&pyr_a, &pyr_b, x0, y0, opts))
        .collect();

    let half = (opts.block as f64 - 1.0) / 2.0;
    let mut field = FlowField::zeros(w, h);
    field.samples = tiles
        .iter()
        .zip(&results)
        .filter_map(|(&(x0, y0), r)| {
            r.map(|(u, v)| FlowSample {
                x: x0 as f64 + half,
                y: y0 as f64 + half,
                u,
                v,
            })
        })
        .collect();
    let nearest = |origins: &[usize], p: usize| -> usize {
        let c0 = origins[0] as f64 + half;
        let k = ((p as f64 - c0) / opts.step as f64).round();
        k.clamp(0.0, (origins.len() - 1) as f64) as usize
    };
    for y in 0..h {
        let ty = nearest(&ys, y);
        for x in 0..w {
            let tx = nearest(&xs, x);
            let i = y * w + x;
            match results[ty * xs.len() + tx] {
                Some((u, v)) => {
                    field.u[i] = u;
                    field.v[i] = v;
                }
                None => field.valid[i] = false,
            }
        }
    }
    Ok(field)
}

/// Block origins along one axis, centered within the extent.
fn tile_origins(extent: usize, block: usize, step: usize) -> Vec<usize> {
    let n = (extent - block) / step + 1;
    let margin = (extent - block - (n - 1) * step) / 2;
    (0..n).map(|i| margin + i * step).collect()
}

fn track_tile(
    pyr_a: &[Frame],
    pyr_b: &[Frame],
    x0: usize,
    y0: usize,
    opts: &FlowOptions,
) -> Option<(f64, f64)> {
    let a0 = &pyr_a[0];
    if block_std(a0, x0, y0, opts.block) < opts.min_std {
        return None;
    }
    let center = (
        x0 as f64 + (opts.block as f64 - 1.0) / 2.0,
        y0 as f64 + (opts.block as f64 - 1.0) / 2.0,
    );
    let mut guess = (0i64, 0i64);
    for level in (0..pyr_a.len()).rev() {
        let (a, b) = (&pyr_a[level], &pyr_b[level]);
        let scale = (1usize << level) as f64;
        let blk = if level == 0 {
            opts.block
        } else {
            (opts.block >> level).max(4).min(a.width()).min(a.height())
        };
        let (bx, by) = if level == 0 {
            (x0 as i64, y0 as i64)
        } else {
            let to_level = |c: f64, extent: usize| {
                let c = (c - (scale - 1.0) / 2.0) / scale;
                let origin = (c - (blk as f64 - 1.0) / 2.0).round() as i64;
                origin.clamp(0, (extent - blk) as i64)
            };
            (
                to_level(center.0, a.width()),
                to_level(center.1, a.height()),
            )
        };
        let (best, on_rim) = search_block(a, b, bx, by, blk, guess, opts.search as i64)?;
        if level == 0 {
            if on_rim {
                return None;
            }
            return Some(refine(
                a,
                b,
                bx as usize,
                by as usize,
                blk,
                best,
                opts.refine_iters,
            ));
        }
        guess = (best.0 * 2, best.1 * 2);
    }
    unreachable!("pyramid has at least one level")
}

/// Integer SAD search around `guess`; ties prefer the smaller displacement.
/// Returns the best offset and whether it sits on the search-window rim.
fn search_block(
    a: &Frame,
    b: &Frame,
    bx: i64,
    by: i64,
    blk: usize,
    guess: (i64, i64),
    radius: i64,
) -> Option<((i64, i64), bool)> {
    let (w, h) = (a.width() as i64, a.height() as i64);
    let mut best: Option<(f64, i64, (i64, i64))> = None;
    for dy in guess.1 - radius..=guess.1 + radius {
        let ty = by + dy;
        if ty < 0 || ty + blk as i64 > h {
            continue;
        }
        for dx in guess.0 - radius..=guess.0 + radius {
            let tx = bx + dx;
            if tx < 0 || tx + blk as i64 > w {
                continue;
            }
            let cost = sad(
                a,
                b,
                bx as usize,
                by as usize,
                tx as usize,
                ty as usize,
                blk,
            );
            let mag = dx * dx + dy * dy;
            let better = match best {
                None => true,
                Some((c, m, _)) => cost < c || (cost == c && mag < m),
            };
            if better {
                best = Some((cost, mag, (dx, dy)));
            }
        }
    }
    let (_, _, d) = best?;
    let on_rim = (d.0 - guess.0).abs() == radius || (d.1 - guess.1).abs() == radius;
    Some((d, on_rim))
}

fn sad(a: &Frame, b: &Frame, ax: usize, ay: usize, bx: usize, by: usize, blk: usize) -> f64 {
    let (da, db, w) = (a.data(), b.data(), a.width());
    let mut total = 0.0f32;
    for r in 0..blk {
        let ra = &da[(ay + r) * w + ax..(ay + r) * w + ax + blk];
        let rb = &db[(by + r) * w + bx..(by + r) * w + bx + blk];
        total += ra.iter().zip(rb).map(|(p, q)| (p - q).abs()).sum::<f32>();
    }
    total as f64
}

fn block_std(f: &Frame, x0: usize, y0: usize, blk: usize) -> f64 {
    let n = (blk * blk) as f64;
    let (mut s, mut s2) = (0.0f64, 0.0f64);
    for y in y0..y0 + blk {
        for x in x0..x0 + blk {
            let v = f.get(x, y) as f64;
            s += v;
            s2 += v * v;
        }
    }
    let mean = s / n;
    (s2 / n - mean * mean).max(0.0).sqrt()
}

/// Gauss-Newton subpixel refinement of an integer match, using the first
/// frame's gradients. Exact matches are returned untouched.
fn refine(
    a: &Frame,
    b: &Frame,
    x0: usize,
    y0: usize,
    blk: usize,
    d: (i64, i64),
    iters: usize,
) -> (f64, f64) {
    let start = (d.0 as f64, d.1 as f64);
    if iters == 0
        || sad(
            a,
            b,
            x0,
            y0,
            (x0 as i64 + d.0) as usize,
            (y0 as i64 + d.1) as usize,
            blk,
        ) == 0.0
    {
        return start;
    }
    let (w, h) = a.dims();
    let grad = |x: usize, y: usize| -> (f64, f64) {
        let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        (
            (a.get(xr, y) - a.get(xl, y)) as f64 / (xr - xl) as f64,
            (a.get(x, yd) - a.get(x, yu)) as f64 / (yd - yu) as f64,
        )
    };
    let mut gxx = 0.0;
    let mut gxy = 0.0;
    let mut gyy = 0.0;
    let mut grads = Vec::with_capacity(blk * blk);
    for y in y0..y0 + blk {
        for x in x0..x0 + blk {
            let g = grad(x, y);
            gxx += g.0 * g.0;
            gxy += g.0 * g.1;
            gyy += g.1 * g.1;
            grads.push(g);
        }
    }
    let det = gxx * gyy - gxy * gxy;
    if det.abs() < 1e-9 * (gxx + gyy).powi(2).max(1e-300) {
        return start;
    }
    let mut cur = start;
    for _ in 0..iters {
        let (mut ex, mut ey) = (0.0, 0.0);
        let mut k = 0;
        for y in y0..y0 + blk {
            for x in x0..x0 + blk {
                let Some(bv) = b.sample(x as f64 + cur.0, y as f64 + cur.1) else {
                    return start;
                };
                let r = a.get(x, y) as f64 - bv as f64;
                ex += grads[k].0 * r;
                ey += grads[k].1 * r;
                k += 1;
            }
        }
        let step = ((gyy * ex - gxy * ey) / det, (gxx * ey - gxy * ex) / det);
        cur = (cur.0 + step.0, cur.1 + step.1);
        if (cur.0 - start.0).abs() > 1.0 || (cur.1 - start.1).abs() > 1.0 {
            return start;
        }
        if step.0.abs() < 1e-3 && step.1.abs() < 1e-3 {
            break;
        }
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::camera::CameraPose;
    use crate::synth::render::render_frame;
    use crate::synth::scene::{build_scene, SceneSpec};

    fn rendered_pair(dx: f64, dy: f64) -> (Frame, Frame) {
        let scene = build_scene(&SceneSpec::single_layer(21, 96, 80)).unwrap();
        let c = scene.canvas_center();
        let a = render_frame(&scene, &CameraPose::new(c.0, c.1, 0.0, 1.0), 96, 80);
        // Moving the camera by -d moves content by +d on screen.
        let b = render_frame(
            &scene,
            &CameraPose::new(c.0 - dx, c.1 - dy, 0.0, 1.0),
            96,
            80,
        );
        (a, b)
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let (a, _) = rendered_pair(0.0, 0.0);
        let f = compute_flow(&a, &a, 3, 16, 4).unwrap();
        assert!(f.samples.len() > 20);
        assert!(f.samples.iter().all(|s| s.u == 0.0 && s.v == 0.0));
        assert!(f.valid.iter().all(|&v| v));
    }

    #[test]
    fn integer_shift_recovered() {
        let (a, b) = rendered_pair(3.0, 0.0);
        let f = compute_flow(&a, &b, 3, 16, 4).unwrap();
        let mu = median(f.samples.iter().map(|s| s.u).collect());
        let mv = median(f.samples.iter().map(|s| s.v).collect());
        assert!((mu - 3.0).abs() < 0.5 && mv.abs() < 0.5, "{mu} {mv}");
    }

    #[test]
    fn subpixel_and_large_shifts() {
        for &(dx, dy) in &[(2.4, -1.3), (-9.6, 7.2), (0.5, 0.5)] {
            let (a, b) = rendered_pair(dx, dy);
            let f = compute_flow(&a, &b, 3, 16, 4).unwrap();
            let mu = median(f.samples.iter().map(|s| s.u).collect());
            let mv = median(f.samples.iter().map(|s| s.v).collect());
            assert!(
                (mu - dx).abs() < 0.15 && (mv - dy).abs() < 0.15,
                "({dx},{dy}) -> ({mu},{mv})"
            );
        }
    }

    #[test]
    fn constant_frames_have_no_valid_tiles() {
        let a = Frame::filled(64, 48, 120.0);
        let f = compute_flow(&a, &a, 2, 16, 4).unwrap();
        assert!(f.samples.is_empty());
        assert_eq!(f.valid_count(), 0);
    }

    #[test]
    fn mismatched_frames_rejected() {
        let a = Frame::new(32, 32);
        let b = Frame::new(32, 16);
        assert!(matches!(
            compute_flow(&a, &b, 1, 8, 2),
            Err(Error::FrameMismatch(_))
        ));
    }

    #[test]
    fn dense_field_matches_dimensions() {
        let (a, b) = rendered_pair(1.0, 1.0);
        let f = compute_flow(&a, &b, 2, 16, 3).unwrap();
        assert_eq!(f.dims(), (96, 80));
        assert_eq!(f.u.len(), 96 * 80);
    }
}
