//! C ABI over the synthstab toolkit.
//!
//! Every fallible function returns an [`SsStatus`]. On failure the message is
//! kept per thread and read with [`ss_last_error_message`]. Videos, stabilized
//! results and learned models cross the boundary as opaque handles that the
//! caller releases with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use synthstab::affine::fit_similarity;
use synthstab::metrics::{evaluate, stability_score, EvalMetadata};
use synthstab::motion::{
    estimate_sequence, Backend, BlockmatchOptions, EstimatorInput, LearnedModel,
};
use synthstab::stabilizer::{stabilize_video, StabilizationResult};
use synthstab::synth::dataset::{generate_video, read_video, SyntheticVideo, VideoGenConfig};
use synthstab::trajectory::{savitzky_golay, SmoothingConfig};
use synthstab::{AffineParams, Correspondence, Error, Frame};

/// Result codes. Codes 1 to 18 follow the order of the toolkit's error kinds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NonSimilarity = 1,
    DegenerateConfiguration = 2,
    InvalidSpec = 3,
    InsufficientMarks = 4,
    Io = 5,
    Format = 6,
    FrameMismatch = 7,
    DegenerateFlow = 8,
    NonFiniteLoss = 9,
    ShapeMismatch = 10,
    SignalTooShort = 11,
    BadWindow = 12,
    SingularTransform = 13,
    LengthMismatch = 14,
    Degenerate = 15,
    SeriesTooShort = 16,
    AllFramesFailed = 17,
    InvalidConfig = 18,
    NullPointer = 100,
    InvalidArgument = 101,
    BufferTooSmall = 102,
    Panic = 103,
}

impl From<&Error> for SsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonSimilarity(_) => SsStatus::NonSimilarity,
            Error::DegenerateConfiguration(_) => SsStatus::DegenerateConfiguration,
            Error::InvalidSpec(_) => SsStatus::InvalidSpec,
            Error::InsufficientMarks(_) => SsStatus::InsufficientMarks,
            Error::Io { .. } => SsStatus::Io,
            Error::Format { .. } => SsStatus::Format,
            Error::FrameMismatch(_) => SsStatus::FrameMismatch,
            Error::DegenerateFlow { .. } => SsStatus::DegenerateFlow,
            Error::NonFiniteLoss { .. } => SsStatus::NonFiniteLoss,
            Error::ShapeMismatch(_) => SsStatus::ShapeMismatch,
            Error::SignalTooShort { .. } => SsStatus::SignalTooShort,
            Error::BadWindow { .. } => SsStatus::BadWindow,
            Error::SingularTransform(_) => SsStatus::SingularTransform,
            Error::LengthMismatch(_) => SsStatus::LengthMismatch,
            Error::Degenerate(_) => SsStatus::Degenerate,
            Error::SeriesTooShort { .. } => SsStatus::SeriesTooShort,
            Error::AllFramesFailed => SsStatus::AllFramesFailed,
            Error::InvalidConfig(_) => SsStatus::InvalidConfig,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsAffineParams {
    pub t_x: f64,
    pub t_y: f64,
    pub theta: f64,
    pub s: f64,
}

impl From<AffineParams> for SsAffineParams {
    fn from(p: AffineParams) -> Self {
        SsAffineParams {
            t_x: p.t_x,
            t_y: p.t_y,
            theta: p.theta,
            s: p.s,
        }
    }
}

/// Synthetic video settings; shake uses the default noise profile.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsVideoConfig {
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub fps: usize,
    pub n_layers: usize,
    pub seed: u64,
    /// Video index within the seeded dataset.
    pub index: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsBackend {
    Oracle = 0,
    Blockmatch = 1,
    Learned = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsMetrics {
    pub stability_translation: f64,
    pub stability_rotation: f64,
    pub stability_avg: f64,
    pub input_stability_avg: f64,
    /// NaN when no frame could be fitted.
    pub distortion: f64,
    pub cropping_ratio: f64,
    pub success: bool,
}

/// Opaque synthetic or loaded video with its ground truth.
pub struct SsVideo(SyntheticVideo);

/// Opaque stabilization output.
pub struct SsStabilized(StabilizationResult);

/// Opaque pair of trained regressors.
pub struct SsModel(LearnedModel);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Fail(SsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(SsStatus::from(&e), e.to_string())
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SsStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            SsStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(SsStatus::InvalidArgument, msg.into())
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(
    p: *mut T,
    len: usize,
    needed: usize,
    what: &str,
) -> Result<&'a mut [T], Fail> {
    if len < needed {
        return Err(Fail(
            SsStatus::BufferTooSmall,
            format!("{what} holds {len} elements, need {needed}"),
        ));
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> FfiResult {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

fn params(p: &SsAffineParams) -> AffineParams {
    AffineParams::new(p.t_x, p.t_y, p.theta, p.s)
}

fn frame_from(data: &[f32], width: usize, height: usize) -> Result<Frame, Fail> {
    Ok(Frame::from_vec(width, height, data.to_vec())?)
}

/// Copies the calling thread's last error message, NUL terminated and
/// truncated to `len`. Returns the full message length plus one.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ss_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Least-squares 4-DOF fit from `n` point pairs given as interleaved `x, y`.
///
/// # Safety
/// `src` and `dst` must point to `2 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_fit_similarity(
    src: *const f64,
    dst: *const f64,
    n: usize,
    out: *mut SsAffineParams,
) -> SsStatus {
    guard(|| {
        let s = slice(src, 2 * n, "src")?;
        let d = slice(dst, 2 * n, "dst")?;
        let corrs: Vec<Correspondence> = (0..n)
            .map(|i| Correspondence::new((s[2 * i], s[2 * i + 1]), (d[2 * i], d[2 * i + 1])))
            .collect();
        write(out, fit_similarity(&corrs)?.into(), "out")
    })
}

/// Row-major 2x3 matrix of `p`.
///
/// # Safety
/// `p` must be readable and `out` must point to 6 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ss_params_to_matrix(p: *const SsAffineParams, out: *mut f64) -> SsStatus {
    guard(|| {
        let p = params(get(p, "params")?);
        if !p.is_valid() {
            return Err(invalid(format!("invalid params {p:?}")));
        }
        let m = p.to_matrix();
        let o = out_slice(out, 6, 6, "out")?;
        o[..3].copy_from_slice(&m.m[0]);
        o[3..].copy_from_slice(&m.m[1]);
        Ok(())
    })
}

/// Savitzky-Golay smoothing of `n` samples into `out` (also `n` long).
///
/// # Safety
/// `signal` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ss_savitzky_golay(
    signal: *const f64,
    n: usize,
    window: usize,
    polyorder: usize,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        let s = slice(signal, n, "signal")?;
        let smooth = savitzky_golay(s, window, polyorder)?;
        out_slice(out, n, n, "out")?.copy_from_slice(&smooth);
        Ok(())
    })
}

/// Share of spectral power in the low-frequency band of a motion series.
///
/// # Safety
/// `series` must hold `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_stability_score(
    series: *const f64,
    n: usize,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        let s = slice(series, n, "series")?;
        write(out, stability_score(s)?, "out")
    })
}

#[no_mangle]
pub extern "C" fn ss_video_config_default() -> SsVideoConfig {
    let d = VideoGenConfig::default();
    SsVideoConfig {
        width: d.width,
        height: d.height,
        n_frames: d.n_frames,
        fps: d.fps,
        n_layers: d.n_layers,
        seed: d.seed,
        index: 0,
    }
}

unsafe fn put_handle<T>(out: *mut *mut T, v: T) -> FfiResult {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// Renders a shaky synthetic video with ground truth.
///
/// # Safety
/// `cfg` must be readable and `out` writable. Release with `ss_video_free`.
#[no_mangle]
pub unsafe extern "C" fn ss_video_generate(
    cfg: *const SsVideoConfig,
    out: *mut *mut SsVideo,
) -> SsStatus {
    guard(|| {
        let c = get(cfg, "cfg")?;
        if c.n_frames < 2 {
            return Err(invalid("n_frames must be at least 2"));
        }
        let gen = VideoGenConfig {
            width: c.width,
            height: c.height,
            n_frames: c.n_frames,
            fps: c.fps,
            n_layers: c.n_layers,
            seed: c.seed,
            ..VideoGenConfig::default()
        };
        put_handle(out, SsVideo(generate_video(&gen, c.index)?.video))
    })
}

/// Loads a video directory written by the `generate` command.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_video_read(path: *const c_char, out: *mut *mut SsVideo) -> SsStatus {
    guard(|| put_handle(out, SsVideo(read_video(&path_arg(path)?)?)))
}

/// # Safety
/// `video` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ss_video_free(video: *mut SsVideo) {
    if !video.is_null() {
        drop(Box::from_raw(video));
    }
}

fn dims_of(frames: &[Frame]) -> (usize, usize) {
    frames.first().map(Frame::dims).unwrap_or((0, 0))
}

/// # Safety
/// `video` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_video_info(
    video: *const SsVideo,
    n_frames: *mut usize,
    width: *mut usize,
    height: *mut usize,
) -> SsStatus {
    guard(|| {
        let v = &get(video, "video")?.0;
        let (w, h) = dims_of(&v.frames);
        write(n_frames, v.frames.len(), "n_frames")?;
        write(width, w, "width")?;
        write(height, h, "height")
    })
}

unsafe fn copy_frame(frames: &[Frame], index: usize, buf: *mut f32, len: usize) -> FfiResult {
    let f = frames.get(index).ok_or_else(|| {
        invalid(format!(
            "frame {index} out of range ({} frames)",
            frames.len()
        ))
    })?;
    out_slice(buf, len, f.data().len(), "buf")?.copy_from_slice(f.data());
    Ok(())
}

unsafe fn copy_params(src: &[AffineParams], out: *mut SsAffineParams, len: usize) -> FfiResult {
    let o = out_slice(out, len, src.len(), "out")?;
    for (d, s) in o.iter_mut().zip(src) {
        *d = (*s).into();
    }
    Ok(())
}

/// Copies frame `index` as row-major intensities in [0, 255].
///
/// # Safety
/// `video` must be a live handle and `buf` hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn ss_video_frame(
    video: *const SsVideo,
    index: usize,
    buf: *mut f32,
    len: usize,
) -> SsStatus {
    guard(|| copy_frame(&get(video, "video")?.0.frames, index, buf, len))
}

/// Copies the `n_frames - 1` ground-truth pair motions.
///
/// # Safety
/// `video` must be a live handle and `out` hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ss_video_ground_truth(
    video: *const SsVideo,
    out: *mut SsAffineParams,
    len: usize,
) -> SsStatus {
    guard(|| copy_params(&get(video, "video")?.0.gt, out, len))
}

/// Estimates motion with `backend`, smooths and warps. `model` is only read
/// for the learned backend.
///
/// # Safety
/// `video` must be a live handle, `model` null or a live handle, and `out`
/// writable. Release the result with `ss_stabilized_free`.
#[no_mangle]
pub unsafe extern "C" fn ss_stabilize(
    video: *const SsVideo,
    backend: SsBackend,
    model: *const SsModel,
    window: usize,
    polyorder: usize,
    crop: f64,
    out: *mut *mut SsStabilized,
) -> SsStatus {
    guard(|| {
        let v = &get(video, "video")?.0;
        let est = match backend {
            SsBackend::Oracle => estimate_sequence(&v.frames, &Backend::Oracle(&v.marks)),
            SsBackend::Blockmatch => estimate_sequence(
                &v.frames,
                &Backend::Blockmatch(BlockmatchOptions::default()),
            ),
            SsBackend::Learned => {
                estimate_sequence(&v.frames, &Backend::Learned(&get(model, "model")?.0))
            }
        };
        let r = stabilize_video(
            &v.frames,
            &est.params,
            &SmoothingConfig { window, polyorder },
            crop,
        )?;
        put_handle(out, SsStabilized(r))
    })
}

/// # Safety
/// `result` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ss_stabilized_free(result: *mut SsStabilized) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_stabilized_info(
    result: *const SsStabilized,
    n_frames: *mut usize,
    width: *mut usize,
    height: *mut usize,
) -> SsStatus {
    guard(|| {
        let r = &get(result, "result")?.0;
        let (w, h) = dims_of(&r.frames);
        write(n_frames, r.frames.len(), "n_frames")?;
        write(width, w, "width")?;
        write(height, h, "height")
    })
}

/// # Safety
/// `result` must be a live handle and `buf` hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn ss_stabilized_frame(
    result: *const SsStabilized,
    index: usize,
    buf: *mut f32,
    len: usize,
) -> SsStatus {
    guard(|| copy_frame(&get(result, "result")?.0.frames, index, buf, len))
}

/// Copies the correction applied to each of the `n_frames` input frames.
///
/// # Safety
/// `result` must be a live handle and `out` hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn ss_stabilized_applied(
    result: *const SsStabilized,
    out: *mut SsAffineParams,
    len: usize,
) -> SsStatus {
    guard(|| copy_params(&get(result, "result")?.0.applied, out, len))
}

/// Stability, distortion and cropping of `result` against `video`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_evaluate(
    video: *const SsVideo,
    result: *const SsStabilized,
    out: *mut SsMetrics,
) -> SsStatus {
    guard(|| {
        let v = &get(video, "video")?.0;
        let r = &get(result, "result")?.0;
        let meta = EvalMetadata {
            applied: Some(r.applied.clone()),
            crop_ratio: Some(r.crop.ratio()),
            valid_fractions: Some(r.valid_fractions.clone()),
            ..EvalMetadata::default()
        };
        let m = evaluate(&v.frames, &r.frames, &meta)?;
        write(
            out,
            SsMetrics {
                stability_translation: m.stability_translation,
                stability_rotation: m.stability_rotation,
                stability_avg: m.stability_avg,
                input_stability_avg: m.input_stability_avg,
                distortion: m.distortion.unwrap_or(f64::NAN),
                cropping_ratio: m.cropping_ratio,
                success: m.success,
            },
            "out",
        )
    })
}

/// Loads `f_tr.bin` and `f_rs.bin` from a directory written by `train`.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_model_load(dir: *const c_char, out: *mut *mut SsModel) -> SsStatus {
    guard(|| put_handle(out, SsModel(LearnedModel::load(&path_arg(dir)?)?)))
}

/// # Safety
/// `model` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ss_model_free(model: *mut SsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Motion from `frame_a` to `frame_b`, both `width * height` row-major.
///
/// # Safety
/// `model` must be a live handle, both frames hold `width * height` floats
/// and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_model_predict(
    model: *const SsModel,
    frame_a: *const f32,
    frame_b: *const f32,
    width: usize,
    height: usize,
    out: *mut SsAffineParams,
) -> SsStatus {
    guard(|| {
        let m = &get(model, "model")?.0;
        let n = width
            .checked_mul(height)
            .ok_or_else(|| invalid("frame size overflows"))?;
        let a = frame_from(slice(frame_a, n, "frame_a")?, width, height)?;
        let b = frame_from(slice(frame_b, n, "frame_b")?, width, height)?;
        write(out, m.predict(&EstimatorInput::new(&a, &b))?.into(), "out")
    })
}
