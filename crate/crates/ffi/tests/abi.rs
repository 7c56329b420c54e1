use std::ffi::{c_char, CString};
use std::ptr;

use synthstab_ffi::*;

fn last_error() -> String {
    let needed = unsafe { ss_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; needed];
    unsafe { ss_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf
        .iter()
        .take_while(|&&c| c != 0)
        .map(|&c| c as u8)
        .collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn fit_similarity_recovers_params() {
    let (c, s) = (0.1f64.cos() * 1.2, 0.1f64.sin() * 1.2);
    let src = [0.0, 0.0, 10.0, 0.0, 0.0, 10.0, 7.0, -3.0];
    let mut dst = [0.0; 8];
    for i in 0..4 {
        let (x, y) = (src[2 * i], src[2 * i + 1]);
        dst[2 * i] = c * x - s * y + 3.0;
        dst[2 * i + 1] = s * x + c * y - 2.0;
    }
    let mut out = SsAffineParams {
        t_x: 0.0,
        t_y: 0.0,
        theta: 0.0,
        s: 0.0,
    };
    assert_eq!(
        unsafe { ss_fit_similarity(src.as_ptr(), dst.as_ptr(), 4, &mut out) },
        SsStatus::Ok
    );
    assert!((out.t_x - 3.0).abs() < 1e-9 && (out.t_y + 2.0).abs() < 1e-9);
    assert!((out.theta - 0.1).abs() < 1e-12 && (out.s - 1.2).abs() < 1e-12);

    let mut m = [0.0; 6];
    assert_eq!(
        unsafe { ss_params_to_matrix(&out, m.as_mut_ptr()) },
        SsStatus::Ok
    );
    assert!((m[0] - c).abs() < 1e-9 && (m[2] - 3.0).abs() < 1e-9 && (m[3] - s).abs() < 1e-9);
}

#[test]
fn errors_carry_codes_and_messages() {
    let one = [1.0, 2.0];
    let mut out = SsAffineParams {
        t_x: 0.0,
        t_y: 0.0,
        theta: 0.0,
        s: 0.0,
    };
    let st = unsafe { ss_fit_similarity(one.as_ptr(), one.as_ptr(), 1, &mut out) };
    assert_eq!(st, SsStatus::DegenerateConfiguration);
    assert!(last_error().contains("degenerate"), "{}", last_error());

    assert_eq!(
        unsafe { ss_fit_similarity(ptr::null(), one.as_ptr(), 1, &mut out) },
        SsStatus::NullPointer
    );
    let sig = [1.0; 10];
    let mut sm = [0.0; 10];
    assert_eq!(
        unsafe { ss_savitzky_golay(sig.as_ptr(), 10, 4, 1, sm.as_mut_ptr()) },
        SsStatus::BadWindow
    );
    let mut score = 0.0;
    assert_eq!(
        unsafe { ss_stability_score(sig.as_ptr(), 4, &mut score) },
        SsStatus::SeriesTooShort
    );
    assert_eq!(
        unsafe { ss_savitzky_golay(sig.as_ptr(), 10, 5, 1, sm.as_mut_ptr()) },
        SsStatus::Ok
    );
    assert!(sm.iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert_eq!(last_error(), "");

    let missing = CString::new("/nonexistent/video").unwrap();
    let mut v: *mut SsVideo = ptr::null_mut();
    assert_eq!(
        unsafe { ss_video_read(missing.as_ptr(), &mut v) },
        SsStatus::Io
    );
    assert!(v.is_null());

    // Truncation keeps the terminator.
    let mut small = [1 as c_char; 4];
    let needed = unsafe { ss_last_error_message(small.as_mut_ptr(), 4) };
    assert!(needed > 4);
    assert_eq!(small[3], 0);
}

#[test]
fn stability_score_of_a_low_band_cosine() {
    let s: Vec<f64> = (0..64)
        .map(|j| (2.0 * std::f64::consts::PI * 3.0 * j as f64 / 64.0).cos())
        .collect();
    let mut score = 0.0;
    assert_eq!(
        unsafe { ss_stability_score(s.as_ptr(), s.len(), &mut score) },
        SsStatus::Ok
    );
    assert!((score - 1.0).abs() < 1e-12);
}

#[test]
fn video_handles_round_trip() {
    let cfg = SsVideoConfig {
        n_frames: 20,
        seed: 4,
        ..ss_video_config_default()
    };
    let mut v: *mut SsVideo = ptr::null_mut();
    assert_eq!(unsafe { ss_video_generate(&cfg, &mut v) }, SsStatus::Ok);
    let (mut n, mut w, mut h) = (0, 0, 0);
    assert_eq!(
        unsafe { ss_video_info(v, &mut n, &mut w, &mut h) },
        SsStatus::Ok
    );
    assert_eq!((n, w, h), (20, cfg.width, cfg.height));

    let mut pixels = vec![0f32; w * h];
    assert_eq!(
        unsafe { ss_video_frame(v, 0, pixels.as_mut_ptr(), pixels.len() - 1) },
        SsStatus::BufferTooSmall
    );
    assert_eq!(
        unsafe { ss_video_frame(v, 20, pixels.as_mut_ptr(), pixels.len()) },
        SsStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { ss_video_frame(v, 3, pixels.as_mut_ptr(), pixels.len()) },
        SsStatus::Ok
    );
    assert!(pixels.iter().all(|p| (0.0..=255.0).contains(p)));
    let zero = SsAffineParams {
        t_x: 0.0,
        t_y: 0.0,
        theta: 0.0,
        s: 0.0,
    };
    let mut gt = vec![zero; n - 1];
    assert_eq!(
        unsafe { ss_video_ground_truth(v, gt.as_mut_ptr(), gt.len()) },
        SsStatus::Ok
    );
    assert!(gt.iter().all(|p| p.s > 0.9 && p.s < 1.1));

    let mut r: *mut SsStabilized = ptr::null_mut();
    let st = unsafe { ss_stabilize(v, SsBackend::Oracle, ptr::null(), 11, 1, 0.8, &mut r) };
    assert_eq!(st, SsStatus::Ok, "{}", last_error());
    let (mut rn, mut rw, mut rh) = (0, 0, 0);
    assert_eq!(
        unsafe { ss_stabilized_info(r, &mut rn, &mut rw, &mut rh) },
        SsStatus::Ok
    );
    assert_eq!(rn, 20);
    assert!(rw < w && rh < h);
    let mut applied = vec![zero; rn];
    assert_eq!(
        unsafe { ss_stabilized_applied(r, applied.as_mut_ptr(), rn) },
        SsStatus::Ok
    );
    let mut out_px = vec![0f32; rw * rh];
    assert_eq!(
        unsafe { ss_stabilized_frame(r, 5, out_px.as_mut_ptr(), out_px.len()) },
        SsStatus::Ok
    );

    let mut m = SsMetrics {
        stability_translation: 0.0,
        stability_rotation: 0.0,
        stability_avg: 0.0,
        input_stability_avg: 0.0,
        distortion: 0.0,
        cropping_ratio: 0.0,
        success: false,
    };
    assert_eq!(
        unsafe { ss_evaluate(v, r, &mut m) },
        SsStatus::Ok,
        "{}",
        last_error()
    );
    assert!(m.success && m.distortion > 0.9 && m.cropping_ratio > 0.0 && m.cropping_ratio <= 1.0);

    let st = unsafe { ss_stabilize(v, SsBackend::Learned, ptr::null(), 11, 1, 0.8, &mut r) };
    assert_eq!(st, SsStatus::NullPointer);

    unsafe {
        ss_stabilized_free(r);
        ss_video_free(v);
        ss_video_free(ptr::null_mut());
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { std::ffi::CStr::from_ptr(ss_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
