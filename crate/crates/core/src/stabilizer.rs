//! Warping by the smoothing correction, virtual-window cropping and output
//! assembly.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::affine::AffineParams;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::io_util::write_atomic;
use crate::synth::dataset::write_frames;
use crate::trajectory::{
    accumulate, smooth_trajectory_full, trajectory_csv, SmoothedTrajectory, SmoothingConfig,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropWindow {
    ratio: f64,
}

impl Default for CropWindow {
    fn default() -> Self {
        CropWindow { ratio: 0.8 }
    }
}

impl CropWindow {
    pub fn new(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "crop ratio must lie in (0, 1], got {ratio}"
            )));
        }
        Ok(CropWindow { ratio })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Window size for a `width x height` frame; partial windows are
    /// floored to even sizes.
    pub fn dims(&self, width: usize, height: usize) -> (usize, usize) {
        let side = |n: usize| {
            let c = ((self.ratio * n as f64) + 1e-9).floor() as usize;
            if c >= n {
                n
            } else {
                (c - c % 2).max(1)
            }
        };
        (side(width), side(height))
    }

    /// Top-left corner of the centered window.
    pub fn origin(&self, width: usize, height: usize) -> (usize, usize) {
        let (cw, ch) = self.dims(width, height);
        ((width - cw) / 2, (height - ch) / 2)
    }
}

pub fn crop(frame: &Frame, window: &CropWindow) -> Frame {
    let (cw, ch) = window.dims(frame.width(), frame.height());
    let (x0, y0) = window.origin(frame.width(), frame.height());
    frame.sub_image(x0, y0, cw, ch)
}

/// Inverse-mapped bilinear warp: output `p` samples the input at `A^-1 p`.
/// Returns the warped frame and the fraction of pixels that landed inside
/// the input.
pub fn warp_frame(frame: &Frame, params: &AffineParams, fill: f32) -> Result<(Frame, f64)> {
    warp_region(frame, params, fill, (0, 0), frame.dims())
}

/// Warp restricted to the output rectangle at `origin` of size `dims`.
pub fn warp_region(
    frame: &Frame,
    params: &AffineParams,
    fill: f32,
    origin: (usize, usize),
    dims: (usize, usize),
) -> Result<(Frame, f64)> {
    if frame.is_empty() {
        return Err(Error::FrameMismatch("cannot warp an empty frame".into()));
    }
    let inv = params.to_matrix().inverse()?;
    let (w, h) = dims;
    let mut out = Frame::new(w, h);
    let valid: usize = out
        .data_mut()
        .par_chunks_mut(w.max(1))
        .enumerate()
        .map(|(y, row)| {
            let mut count = 0;
            for (x, v) in row.iter_mut().enumerate() {
                let q = inv.apply(((x + origin.0) as f64, (y + origin.1) as f64));
                match frame.sample(q.0, q.1) {
                    Some(s) => {
                        *v = s;
                        count += 1;
                    }
                    None => *v = fill,
                }
            }
            count
        })
        .sum();
    Ok((out, valid as f64 / (w * h).max(1) as f64))
}

/// Brute-force count of crop-window pixels whose source lies in the frame.
pub fn valid_fraction(
    params: &AffineParams,
    frame_dims: (usize, usize),
    window: &CropWindow,
) -> Result<f64> {
    let inv = params.to_matrix().inverse()?;
    let (w, h) = frame_dims;
    let (cw, ch) = window.dims(w, h);
    let (x0, y0) = window.origin(w, h);
    let mut valid = 0usize;
    for y in y0..y0 + ch {
        for x in x0..x0 + cw {
            let q = inv.apply((x as f64, y as f64));
            if q.0 >= 0.0 && q.1 >= 0.0 && q.0 <= (w - 1) as f64 && q.1 <= (h - 1) as f64 {
                valid += 1;
            }
        }
    }
    Ok(valid as f64 / (cw * ch) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationResult {
    pub frames: Vec<Frame>,
    /// Transform applied to each input frame.
    pub applied: Vec<AffineParams>,
    /// Fraction of each output frame sampled from inside its source.
    pub valid_fractions: Vec<f64>,
    pub warnings: Vec<String>,
    pub smoothed: Option<SmoothedTrajectory>,
    pub crop: CropWindow,
    pub smoothing: SmoothingConfig,
    pub source_dims: (usize, usize),
}

pub fn stabilize_video(
    frames: &[Frame],
    estimates: &[AffineParams],
    smoothing: &SmoothingConfig,
    crop_ratio: f64,
) -> Result<StabilizationResult> {
    let window = CropWindow::new(crop_ratio)?;
    if frames.is_empty() || estimates.len() + 1 != frames.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimates for {} frames",
            estimates.len(),
            frames.len()
        )));
    }
    let dims = frames[0].dims();
    if let Some(i) = frames.iter().position(|f| f.dims() != dims) {
        return Err(Error::FrameMismatch(format!(
            "frame {i} is {:?}, frame 0 is {dims:?}",
            frames[i].dims()
        )));
    }
    let mut warnings = Vec::new();
    let mut applied = vec![AffineParams::IDENTITY];
    let smoothed = if estimates.len() >= 3 {
        // Frame 0 sits at the trajectory origin and is smoothed with the
        // rest, so the first output pair carries no step.
        let sm = smooth_trajectory_full(&accumulate(estimates)?.with_origin(), smoothing)?;
        applied = (0..frames.len()).map(|i| sm.correction(i)).collect();
        Some(sm)
    } else {
        warnings.push(format!(
            "only {} frame pairs; smoothing needs 3, frames pass through uncorrected",
            estimates.len()
        ));
        applied.extend(std::iter::repeat(AffineParams::IDENTITY).take(estimates.len()));
        None
    };
    let origin = window.origin(dims.0, dims.1);
    let crop_dims = window.dims(dims.0, dims.1);
    let warped: Vec<(Frame, f64)> = frames
        .par_iter()
        .zip(&applied)
        .map(|(f, p)| warp_region(f, p, 0.0, origin, crop_dims))
        .collect::<Result<_>>()?;
    let (out, valid_fractions): (Vec<Frame>, Vec<f64>) = warped.into_iter().unzip();
    for (i, v) in valid_fractions.iter().enumerate() {
        if *v < 1.0 {
            warnings.push(format!(
                "frame {i}: {:.2}% of the window lies outside the source",
                100.0 * (1.0 - v)
            ));
        }
    }
    Ok(StabilizationResult {
        frames: out,
        applied,
        valid_fractions,
        warnings,
        smoothed,
        crop: window,
        smoothing: *smoothing,
        source_dims: dims,
    })
}

impl StabilizationResult {
    pub fn report_text(&self, backend: &str, estimator_warnings: &[String]) -> String {
        let mut s = String::new();
        let mean =
            self.valid_fractions.iter().sum::<f64>() / self.valid_fractions.len().max(1) as f64;
        let min = self
            .valid_fractions
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let _ = writeln!(s, "backend: {backend}");
        let _ = writeln!(s, "frames: {}", self.frames.len());
        let _ = writeln!(s, "window: {}", self.smoothing.window);
        let _ = writeln!(s, "polyorder: {}", self.smoothing.polyorder);
        let _ = writeln!(s, "crop: {}", self.crop.ratio());
        let (cw, ch) = self.crop.dims(self.source_dims.0, self.source_dims.1);
        let _ = writeln!(s, "output_size: {cw}x{ch}");
        let _ = writeln!(s, "valid_fraction_mean: {mean:.6}");
        let _ = writeln!(s, "valid_fraction_min: {min:.6}");
        for (i, v) in self.valid_fractions.iter().enumerate() {
            let _ = writeln!(s, "valid_fraction.{i}: {v:.6}");
        }
        for w in estimator_warnings.iter().chain(&self.warnings) {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }

    /// Writes the frames, `applied_transforms.txt`, `stabilize_report.txt`
    /// and, when smoothing ran, `trajectory.csv`.
    pub fn write(&self, dir: &Path, backend: &str, estimator_warnings: &[String]) -> Result<()> {
        write_frames(dir, &self.frames)?;
        let mut applied = String::new();
        for p in &self.applied {
            applied.push_str(&p.to_line());
            applied.push('\n');
        }
        write_atomic(&dir.join("applied_transforms.txt"), applied.as_bytes())?;
        write_atomic(
            &dir.join("stabilize_report.txt"),
            self.report_text(backend, estimator_warnings).as_bytes(),
        )?;
        if let Some(sm) = &self.smoothed {
            write_atomic(
                &dir.join("trajectory.csv"),
                trajectory_csv(&sm.raw, &sm.smooth, 0).as_bytes(),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_texture(w: usize, h: usize) -> Frame {
        Frame::from_fn(w, h, |x, y| {
            let (x, y) = (x as f32, y as f32);
            128.0 + 60.0 * (x * 0.13).sin() * (y * 0.11).cos() + 30.0 * ((x + y) * 0.05).sin()
        })
    }

    #[test]
    fn identity_warp_is_exact() {
        let f = smooth_texture(40, 30);
        let (out, valid) = warp_frame(&f, &AffineParams::IDENTITY, 0.0).unwrap();
        assert_eq!(out, f);
        assert_eq!(valid, 1.0);
    }

    #[test]
    fn shift_out_of_frame_is_all_fill() {
        let f = smooth_texture(40, 30);
        let (out, valid) = warp_frame(&f, &AffineParams::translation(40.0, 0.0), 0.0).unwrap();
        assert_eq!(valid, 0.0);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn warp_round_trip_recovers_interior() {
        let f = smooth_texture(64, 48);
        let p = AffineParams::new(2.3, -1.7, 0.03, 1.02);
        let (a, _) = warp_frame(&f, &p, 0.0).unwrap();
        let inv = crate::affine::matrix_to_params(&p.to_matrix().inverse().unwrap()).unwrap();
        let (b, _) = warp_frame(&a, &inv, 0.0).unwrap();
        for y in 8..40 {
            for x in 8..56 {
                assert!((b.get(x, y) - f.get(x, y)).abs() <= 2.0, "({x},{y})");
            }
        }
    }

    #[test]
    fn singular_transform_rejected() {
        let f = smooth_texture(8, 8);
        assert!(matches!(
            warp_frame(&f, &AffineParams::new(0.0, 0.0, 0.0, 1e-7), 0.0),
            Err(Error::SingularTransform(_))
        ));
    }

    #[test]
    fn crop_examples() {
        let f = smooth_texture(100, 100);
        assert_eq!(crop(&f, &CropWindow::new(1.0).unwrap()), f);
        let half = crop(&f, &CropWindow::new(0.5).unwrap());
        assert_eq!(half.dims(), (50, 50));
        assert_eq!(half.get(0, 0), f.get(25, 25));
        let odd = smooth_texture(33, 21);
        assert_eq!(crop(&odd, &CropWindow::new(1.0).unwrap()), odd);
        assert!(CropWindow::new(0.0).is_err() && CropWindow::new(1.5).is_err());
    }

    #[test]
    fn crop_composition() {
        let f = smooth_texture(120, 90);
        for &(r1, r2) in &[(0.8, 0.9), (0.5, 0.5), (0.9, 0.7)] {
            let twice = crop(
                &crop(&f, &CropWindow::new(r1).unwrap()),
                &CropWindow::new(r2).unwrap(),
            );
            let once = crop(&f, &CropWindow::new(r1 * r2).unwrap());
            let (a, b) = (twice.dims(), once.dims());
            assert!(
                a.0.abs_diff(b.0) <= 2 && a.1.abs_diff(b.1) <= 2,
                "{a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn zero_motion_video_is_plain_crop() {
        let frames: Vec<Frame> = (0..12).map(|_| smooth_texture(50, 40)).collect();
        let est = vec![AffineParams::IDENTITY; 11];
        let r = stabilize_video(&frames, &est, &SmoothingConfig::default(), 0.8).unwrap();
        let window = CropWindow::new(0.8).unwrap();
        for f in &r.frames {
            assert_eq!(*f, crop(&frames[0], &window));
        }
        assert!(r.valid_fractions.iter().all(|&v| v == 1.0));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn length_mismatch_and_short_videos() {
        let frames = vec![smooth_texture(20, 20); 3];
        assert!(matches!(
            stabilize_video(
                &frames,
                &[AffineParams::IDENTITY],
                &SmoothingConfig::default(),
                0.8
            ),
            Err(Error::LengthMismatch(_))
        ));
        let r = stabilize_video(
            &frames,
            &[AffineParams::IDENTITY; 2],
            &SmoothingConfig::default(),
            0.8,
        )
        .unwrap();
        assert_eq!(r.frames.len(), 3);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn valid_fraction_matches_warp() {
        let f = smooth_texture(60, 40);
        let p = AffineParams::new(9.0, -6.0, 0.02, 1.0);
        let w = CropWindow::new(0.8).unwrap();
        let (_, from_warp) = warp_region(&f, &p, 0.0, w.origin(60, 40), w.dims(60, 40)).unwrap();
        assert_eq!(valid_fraction(&p, (60, 40), &w).unwrap(), from_warp);
        assert!(from_warp < 1.0 && from_warp > 0.5);
    }
}
