//! Stability, distortion and cropping scores plus the homography fits they
//! rest on.

use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::affine::{AffineParams, Correspondence};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::motion::flow::{compute_flow_with, FlowOptions};
use crate::stabilizer::{valid_fraction, CropWindow};

/// Projective map with `h[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    pub h: [[f64; 3]; 3],
}

impl Homography {
    pub fn apply(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let h = &self.h;
        let w = h[2][0] * x + h[2][1] * y + h[2][2];
        (
            (h[0][0] * x + h[0][1] * y + h[0][2]) / w,
            (h[1][0] * x + h[1][1] * y + h[1][2]) / w,
        )
    }

    pub fn affine_block(&self) -> [[f64; 2]; 2] {
        [[self.h[0][0], self.h[0][1]], [self.h[1][0], self.h[1][1]]]
    }

    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.h[r][c])
    }
}

/// Similarity taking points to zero centroid and mean distance sqrt(2).
fn hartley(points: impl Iterator<Item = (f64, f64)> + Clone) -> Matrix3<f64> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points
        .clone()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points.map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<f64>() / n;
    let k = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(k, 0.0, -k * cx, 0.0, k, -k * cy, 0.0, 0.0, 1.0)
}

/// Normalized DLT fit of `dst ~ H src`.
pub fn estimate_homography(corrs: &[Correspondence]) -> Result<Homography> {
    if corrs.len() < 4 {
        return Err(Error::Degenerate(format!(
            "{} correspondences, need at least 4",
            corrs.len()
        )));
    }
    if corrs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Degenerate("non-finite correspondence".into()));
    }
    let t_src = hartley(corrs.iter().map(|c| c.src));
    let t_dst = hartley(corrs.iter().map(|c| c.dst));
    let norm = |t: &Matrix3<f64>, p: (f64, f64)| {
        (t[(0, 0)] * p.0 + t[(0, 2)], t[(1, 1)] * p.1 + t[(1, 2)])
    };
    let rows = (2 * corrs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in corrs.iter().enumerate() {
        let (x, y) = norm(&t_src, c.src);
        let (u, v) = norm(&t_dst, c.dst);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax.max(1e-300)).count();
    if rank < 8 {
        return Err(Error::Degenerate(format!("design matrix rank {rank} < 8")));
    }
    let (imin, _) = sv.argmin();
    let hv = v_t.row(imin);
    let hn = Matrix3::new(
        hv[0], hv[1], hv[2], hv[3], hv[4], hv[5], hv[6], hv[7], hv[8],
    );
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("normalization not invertible".into()))?;
    let h = t_dst_inv * hn * t_src;
    let h22 = h[(2, 2)];
    if h22.abs() < 1e-12 * h.abs().max() {
        return Err(Error::Degenerate("homography has h22 ~ 0".into()));
    }
    let h = h / h22;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite homography".into()));
    }
    Ok(Homography {
        h: std::array::from_fn(|r| std::array::from_fn(|c| h[(r, c)])),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingOptions {
    pub flow: FlowOptions,
    pub min_points: usize,
    pub rounds: usize,
    pub reject_factor: f64,
    /// Largest acceptable median reprojection error (px) of the final fit.
    pub max_median_error: f64,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        TrackingOptions {
            flow: FlowOptions::default(),
            min_points: 8,
            rounds: 3,
            reject_factor: 3.0,
            max_median_error: 1.0,
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

/// Homography from `frame_a` to `frame_b` through tracked tile centers,
/// refit after trimming residuals above `reject_factor * median`.
pub fn track_homography(
    frame_a: &Frame,
    frame_b: &Frame,
    opts: &TrackingOptions,
) -> Result<Homography> {
    track_homography_in(frame_a, frame_b, opts, None)
}

/// As [`track_homography`], keeping only tiles of `frame_a` that lie wholly
/// inside `region = (x0, y0, width, height)`.
fn track_homography_in(
    frame_a: &Frame,
    frame_b: &Frame,
    opts: &TrackingOptions,
    region: Option<(usize, usize, usize, usize)>,
) -> Result<Homography> {
    let flow = compute_flow_with(frame_a, frame_b, &opts.flow)?;
    let half = opts.flow.block as f64 / 2.0;
    let inside = |x: f64, y: f64| match region {
        None => true,
        Some((x0, y0, w, h)) => {
            x - half >= x0 as f64 - 0.5
                && y - half >= y0 as f64 - 0.5
                && x + half <= (x0 + w) as f64 - 0.5
                && y + half <= (y0 + h) as f64 - 0.5
        }
    };
    let mut corrs: Vec<Correspondence> = flow
        .point_samples(opts.flow.step)
        .iter()
        .filter(|s| inside(s.x, s.y))
        .map(|s| Correspondence::new((s.x, s.y), (s.x + s.u, s.y + s.v)))
        .collect();
    if corrs.len() < opts.min_points {
        return Err(Error::DegenerateFlow {
            valid: corrs.len(),
            required: opts.min_points,
        });
    }
    let residuals = |h: &Homography, cs: &[Correspondence]| -> Vec<f64> {
        cs.iter()
            .map(|c| {
                let p = h.apply(c.src);
                (p.0 - c.dst.0).hypot(p.1 - c.dst.1)
            })
            .collect()
    };
    let mut h = estimate_homography(&corrs)?;
    for _ in 0..opts.rounds {
        let res = residuals(&h, &corrs);
        let threshold = opts.reject_factor * median(&mut res.clone()) + 1e-9;
        let kept: Vec<Correspondence> = corrs
            .iter()
            .zip(&res)
            .filter(|(_, &r)| r <= threshold)
            .map(|(c, _)| *c)
            .collect();
        if kept.len() == corrs.len() {
            break;
        }
        if kept.len() < opts.min_points {
            return Err(Error::DegenerateFlow {
                valid: kept.len(),
                required: opts.min_points,
            });
        }
        corrs = kept;
        h = estimate_homography(&corrs)?;
    }
    let err = median(&mut residuals(&h, &corrs));
    if err > opts.max_median_error {
        return Err(Error::Degenerate(format!(
            "median reprojection error {err:.3} px exceeds {}",
            opts.max_median_error
        )));
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionSeries {
    /// `sqrt(h02^2 + h12^2)` per pair.
    pub translation: Vec<f64>,
    /// `atan2(h10, h00)` per pair.
    pub rotation: Vec<f64>,
    pub t_x: Vec<f64>,
    pub t_y: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn pair_motion_series(frames: &[Frame]) -> MotionSeries {
    pair_motion_series_with(frames, &TrackingOptions::default())
}

pub fn pair_motion_series_with(frames: &[Frame], opts: &TrackingOptions) -> MotionSeries {
    let fits: Vec<Result<Homography>> = (0..frames.len().saturating_sub(1))
        .into_par_iter()
        .map(|i| track_homography(&frames[i], &frames[i + 1], opts))
        .collect();
    let mut out = MotionSeries::default();
    for (i, fit) in fits.into_iter().enumerate() {
        let (tx, ty, th) = match fit {
            Ok(h) => (h.h[0][2], h.h[1][2], h.h[1][0].atan2(h.h[0][0])),
            Err(e) => {
                out.warnings
                    .push(format!("pair {i}: untrackable ({e}); counted as no motion"));
                (0.0, 0.0, 0.0)
            }
        };
        out.t_x.push(tx);
        out.t_y.push(ty);
        out.translation.push(tx.hypot(ty));
        out.rotation.push(th);
    }
    out
}

/// Share of spectral power (bins 1..=n/2) that falls in bins 2..=6.
/// A series with no non-DC power scores 1.
pub fn stability_score(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 8 {
        return Err(Error::SeriesTooShort { len: n, min: 8 });
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power = |k: usize| buf[k].norm_sqr();
    let half = n / 2;
    let total: f64 = (1..=half).map(power).sum();
    let low: f64 = (2..=6.min(half)).map(power).sum();
    if total <= f64::MIN_POSITIVE {
        return Ok(1.0);
    }
    Ok(low / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TranslationMode {
    /// One series of translation magnitudes.
    #[default]
    Magnitude,
    /// Separate `t_x` and `t_y` series, scores averaged.
    SeparateAxes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityScores {
    pub translation: f64,
    pub rotation: f64,
    pub average: f64,
}

pub fn stability_of(series: &MotionSeries, mode: TranslationMode) -> Result<StabilityScores> {
    let translation = match mode {
        TranslationMode::Magnitude => stability_score(&series.translation)?,
        TranslationMode::SeparateAxes => {
            0.5 * (stability_score(&series.t_x)? + stability_score(&series.t_y)?)
        }
    };
    let rotation = stability_score(&series.rotation)?;
    Ok(StabilityScores {
        translation,
        rotation,
        average: 0.5 * (translation + rotation),
    })
}

/// `sigma_min / sigma_max` of a 2x2 matrix.
pub fn anisotropy(m: [[f64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = m;
    let s = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
    let s1 = ((s + disc) / 2.0).sqrt();
    let s2 = det / s1.max(f64::MIN_POSITIVE);
    if s1 == 0.0 {
        0.0
    } else {
        (s2 / s1).min(1.0)
    }
}

/// Places `inner` at the center of a `w x h` black canvas; also returns
/// the covered rectangle.
fn embed_centered(inner: &Frame, w: usize, h: usize) -> (Frame, (usize, usize, usize, usize)) {
    let (iw, ih) = (inner.width().min(w), inner.height().min(h));
    let (x0, y0) = ((w - iw) / 2, (h - ih) / 2);
    if inner.dims() == (w, h) {
        return (inner.clone(), (0, 0, w, h));
    }
    let mut out = Frame::new(w, h);
    for y in 0..ih {
        for x in 0..iw {
            out.set(x0 + x, y0 + y, inner.get(x, y));
        }
    }
    (out, (x0, y0, iw, ih))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionResult {
    pub score: f64,
    pub per_frame: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

/// Worst-case anisotropy of the original -> stabilized homographies.
///
/// Stabilized frames smaller than the originals are compared in the
/// original frame's coordinates by centering them on a black canvas.
pub fn distortion_score(original: &[Frame], stabilized: &[Frame]) -> Result<DistortionResult> {
    distortion_score_with(original, stabilized, &TrackingOptions::default())
}

pub fn distortion_score_with(
    original: &[Frame],
    stabilized: &[Frame],
    opts: &TrackingOptions,
) -> Result<DistortionResult> {
    if original.len() != stabilized.len() {
        return Err(Error::LengthMismatch(format!(
            "{} original frames vs {} stabilized",
            original.len(),
            stabilized.len()
        )));
    }
    let per_frame: Vec<Result<f64>> = original
        .par_iter()
        .zip(stabilized)
        .map(|(o, s)| {
            let (w, h) = o.dims();
            if s.width() > w || s.height() > h {
                return Err(Error::FrameMismatch(format!(
                    "stabilized {:?} larger than original {:?}",
                    s.dims(),
                    o.dims()
                )));
            }
            // Track from the embedded frame, using only tiles inside the
            // stabilized content; the inverse map has the same anisotropy.
            let (embedded, region) = embed_centered(s, w, h);
            let hm = track_homography_in(&embedded, o, opts, Some(region))?;
            hm.matrix()
                .try_inverse()
                .ok_or_else(|| Error::Degenerate("singular homography".into()))?;
            Ok(anisotropy(hm.affine_block()))
        })
        .collect();
    let mut warnings = Vec::new();
    let mut per = Vec::with_capacity(per_frame.len());
    for (i, r) in per_frame.into_iter().enumerate() {
        match r {
            Ok(v) => per.push(Some(v)),
            Err(e) => {
                warnings.push(format!("frame {i}: distortion fit failed ({e}); skipped"));
                per.push(None);
            }
        }
    }
    let score = per.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !score.is_finite() {
        return Err(Error::AllFramesFailed);
    }
    Ok(DistortionResult {
        score,
        per_frame: per,
        warnings,
    })
}

/// Mean over frames of `(window area * valid fraction) / original area`,
/// with valid fractions recounted from the applied transforms.
pub fn cropping_ratio(
    original_dims: (usize, usize),
    window: &CropWindow,
    applied: &[AffineParams],
) -> Result<f64> {
    let (w, h) = original_dims;
    let (cw, ch) = window.dims(w, h);
    let area = (cw * ch) as f64 / (w * h) as f64;
    if applied.is_empty() {
        return Ok(area);
    }
    let mut total = 0.0;
    for p in applied {
        total += area * valid_fraction(p, original_dims, window)?;
    }
    Ok(total / applied.len() as f64)
}

/// Same ratio from already measured valid fractions.
pub fn cropping_ratio_from_fractions(
    original_dims: (usize, usize),
    crop_dims: (usize, usize),
    fractions: &[f64],
) -> f64 {
    let area = (crop_dims.0 * crop_dims.1) as f64 / (original_dims.0 * original_dims.1) as f64;
    if fractions.is_empty() {
        return area;
    }
    fractions.iter().map(|v| area * v).sum::<f64>() / fractions.len() as f64
}

/// What is known about how the stabilized sequence was produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalMetadata {
    pub applied: Option<Vec<AffineParams>>,
    pub crop_ratio: Option<f64>,
    pub valid_fractions: Option<Vec<f64>>,
    pub translation_mode: TranslationMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub stability_translation: f64,
    pub stability_rotation: f64,
    pub stability_avg: f64,
    pub input_stability_avg: f64,
    pub distortion: Option<f64>,
    pub cropping_ratio: f64,
    pub success: bool,
    pub frames_expected: usize,
    pub frames_produced: usize,
    pub per_frame_distortion: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "stability_translation: {:.6}",
            self.stability_translation
        );
        let _ = writeln!(s, "stability_rotation: {:.6}", self.stability_rotation);
        let _ = writeln!(s, "stability_avg: {:.6}", self.stability_avg);
        let _ = writeln!(s, "input_stability_avg: {:.6}", self.input_stability_avg);
        match self.distortion {
            Some(d) => {
                let _ = writeln!(s, "distortion: {d:.6}");
            }
            None => s.push_str("distortion: failed\n"),
        }
        let _ = writeln!(s, "cropping_ratio: {:.6}", self.cropping_ratio);
        let _ = writeln!(s, "success: {}", self.success);
        let _ = writeln!(s, "frames_expected: {}", self.frames_expected);
        let _ = writeln!(s, "frames_produced: {}", self.frames_produced);
        for (i, d) in self.per_frame_distortion.iter().enumerate() {
            match d {
                Some(v) => {
                    let _ = writeln!(s, "distortion.{i}: {v:.6}");
                }
                None => {
                    let _ = writeln!(s, "distortion.{i}: failed");
                }
            }
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

pub fn evaluate(
    original: &[Frame],
    stabilized: &[Frame],
    meta: &EvalMetadata,
) -> Result<MetricsReport> {
    if original.len() < 2 {
        return Err(Error::LengthMismatch(format!(
            "need at least 2 original frames, found {}",
            original.len()
        )));
    }
    let mut warnings = Vec::new();
    let produced = stabilized.len();
    let all_frames = produced == original.len();
    if !all_frames {
        warnings.push(format!(
            "{produced} stabilized frames for {} originals",
            original.len()
        ));
    }
    let series = pair_motion_series(stabilized);
    warnings.extend(series.warnings.iter().map(|w| format!("stabilized {w}")));
    let stab = stability_of(&series, meta.translation_mode)?;
    let input_series = pair_motion_series(original);
    let input_stab = stability_of(&input_series, meta.translation_mode)?;

    let (distortion, per_frame) = if all_frames {
        match distortion_score(original, stabilized) {
            Ok(d) => {
                warnings.extend(d.warnings);
                (Some(d.score), d.per_frame)
            }
            Err(e) => {
                warnings.push(format!("distortion: {e}"));
                (None, vec![None; produced])
            }
        }
    } else {
        (None, Vec::new())
    };

    let dims = original[0].dims();
    let crop_dims = stabilized.first().map(|f| f.dims()).unwrap_or(dims);
    let cropping = match (&meta.applied, meta.crop_ratio, &meta.valid_fractions) {
        (Some(applied), Some(ratio), _) => cropping_ratio(dims, &CropWindow::new(ratio)?, applied)?,
        (_, _, Some(fr)) => cropping_ratio_from_fractions(dims, crop_dims, fr),
        _ => cropping_ratio_from_fractions(dims, crop_dims, &[]),
    };
    let success = all_frames && distortion.is_some_and(|d| d <= 1.0);
    Ok(MetricsReport {
        stability_translation: stab.translation,
        stability_rotation: stab.rotation,
        stability_avg: stab.average,
        input_stability_avg: input_stab.average,
        distortion,
        cropping_ratio: cropping,
        success,
        frames_expected: original.len(),
        frames_produced: produced,
        per_frame_distortion: per_frame,
        warnings,
    })
}

/// `(video_id, report)` rows as `batch_summary.csv`.
pub fn batch_summary_csv(rows: &[(String, MetricsReport)]) -> String {
    let mut s = String::from("video_id,stability,distortion,cropping,success\n");
    for (id, r) in rows {
        let d = r
            .distortion
            .map(|d| format!("{d:.6}"))
            .unwrap_or_else(|| "failed".into());
        let _ = writeln!(
            s,
            "{id},{:.6},{d},{:.6},{}",
            r.stability_avg, r.cropping_ratio, r.success
        );
    }
    s
}

pub fn success_rate(reports: &[MetricsReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().filter(|r| r.success).count() as f64 / reports.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_score(series: &[f64]) -> f64 {
        let n = series.len();
        let power = |k: usize| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in series.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            re * re + im * im
        };
        let total: f64 = (1..=n / 2).map(power).sum();
        let low: f64 = (2..=6.min(n / 2)).map(power).sum();
        low / total
    }

    fn cosine(n: usize, bin: usize) -> Vec<f64> {
        (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * (bin * t) as f64 / n as f64).cos())
            .collect()
    }

    #[test]
    fn stability_examples() {
        assert!((stability_score(&cosine(64, 3)).unwrap() - 1.0).abs() < 1e-12);
        assert!(stability_score(&cosine(64, 10)).unwrap() < 1e-12);
        assert!(matches!(
            stability_score(&[1.0; 7]),
            Err(Error::SeriesTooShort { len: 7, min: 8 })
        ));
        assert_eq!(stability_score(&[2.0; 16]).unwrap(), 1.0);
    }

    #[test]
    fn stability_matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [8, 9, 17, 64, 100, 255, 512, 1000, 1024] {
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let a = stability_score(&s).unwrap();
            assert!((a - naive_score(&s)).abs() < 1e-9, "n = {n}");
            let shifted: Vec<f64> = s.iter().map(|v| v + 10.0).collect();
            assert!((stability_score(&shifted).unwrap() - a).abs() < 1e-9);
        }
    }

    fn corrs_from(f: impl Fn((f64, f64)) -> (f64, f64), pts: &[(f64, f64)]) -> Vec<Correspondence> {
        pts.iter().map(|&p| Correspondence::new(p, f(p))).collect()
    }

    fn grid() -> Vec<(f64, f64)> {
        (0..25)
            .map(|i| ((i % 5) as f64 * 20.0 + 3.0, (i / 5) as f64 * 15.0 + 7.0))
            .collect()
    }

    #[test]
    fn homography_from_similarity() {
        let p = AffineParams::new(4.0, -2.0, 0.1, 1.05);
        let m = p.to_matrix();
        let h = estimate_homography(&corrs_from(|q| m.apply(q), &grid())).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                assert!((h.h[r][c] - m.m[r][c]).abs() < 1e-6);
            }
        }
        assert!(h.h[2][0].abs() < 1e-9 && h.h[2][1].abs() < 1e-9 && h.h[2][2] == 1.0);
    }

    #[test]
    fn homography_from_four_projective_points() {
        let truth = Homography {
            h: [[1.1, 0.05, 3.0], [-0.02, 0.95, -4.0], [1e-3, -5e-4, 1.0]],
        };
        let pts = [(0.0, 0.0), (100.0, 5.0), (90.0, 80.0), (-5.0, 70.0)];
        let h = estimate_homography(&corrs_from(|q| truth.apply(q), &pts)).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((h.h[r][c] - truth.h[r][c]).abs() < 1e-6, "{:?}", h.h);
            }
        }
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (5.0, 5.0)];
        assert!(matches!(
            estimate_homography(&corrs_from(|q| (q.0 + 1.0, q.1), &pts)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn homography_is_scale_invariant() {
        let truth = Homography {
            h: [[0.98, 0.1, 2.0], [-0.1, 1.02, 1.0], [2e-4, 1e-4, 1.0]],
        };
        let pts = grid();
        let h1 = estimate_homography(&corrs_from(|q| truth.apply(q), &pts)).unwrap();
        let k = 7.5;
        let scaled: Vec<Correspondence> = corrs_from(|q| truth.apply(q), &pts)
            .iter()
            .map(|c| Correspondence::new((c.src.0 * k, c.src.1 * k), (c.dst.0 * k, c.dst.1 * k)))
            .collect();
        let h2 = estimate_homography(&scaled).unwrap();
        // H2 = S H1 S^-1 with S = diag(k, k, 1).
        let s = Matrix3::new(k, 0.0, 0.0, 0.0, k, 0.0, 0.0, 0.0, 1.0);
        let back = s.try_inverse().unwrap() * h2.matrix() * s;
        assert!((back - h1.matrix()).abs().max() < 1e-6);
    }

    #[test]
    fn anisotropy_examples() {
        assert!((anisotropy([[2.0, 0.0], [0.0, 1.0]]) - 0.5).abs() < 1e-12);
        let (s, c) = 0.3f64.sin_cos();
        assert!((anisotropy([[1.2 * c, -1.2 * s], [1.2 * s, 1.2 * c]]) - 1.0).abs() < 1e-12);
        assert!(
            (anisotropy([[1.0, 0.0], [0.0, 3.0]]) - anisotropy([[3.0, 0.0], [0.0, 1.0]])).abs()
                < 1e-15
        );
    }

    #[test]
    fn cropping_area_law() {
        let ident = vec![AffineParams::IDENTITY; 4];
        assert!(
            (cropping_ratio((80, 60), &CropWindow::new(1.0).unwrap(), &ident).unwrap() - 1.0).abs()
                < 1e-12
        );
        assert!(
            (cropping_ratio((100, 50), &CropWindow::new(0.8).unwrap(), &ident).unwrap() - 0.64)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn summary_has_header_and_rows() {
        let r = MetricsReport {
            stability_translation: 0.5,
            stability_rotation: 0.5,
            stability_avg: 0.5,
            input_stability_avg: 0.1,
            distortion: Some(1.0),
            cropping_ratio: 0.64,
            success: true,
            frames_expected: 2,
            frames_produced: 2,
            per_frame_distortion: vec![],
            warnings: vec![],
        };
        let rows: Vec<(String, MetricsReport)> =
            (0..3).map(|i| (format!("v{i}"), r.clone())).collect();
        let csv = batch_summary_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("video_id,stability,distortion,cropping,success\n"));
        assert_eq!(
            success_rate(&[
                r.clone(),
                MetricsReport {
                    success: false,
                    ..r
                }
            ]),
            0.5
        );
    }
}
