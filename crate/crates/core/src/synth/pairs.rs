//! Independent frame pairs with a prescribed similarity between them, used
//! to train and test the learned estimator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::camera::{pose_delta, CameraPose, View};
use super::dataset::derive_seed;
use super::render::render_frame;
use super::scene::{build_scene, SceneSpec};
use crate::affine::AffineParams;
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSetSpec {
    pub n_pairs: usize,
    pub side: usize,
    pub max_translation: f64,
    pub max_rotation: f64,
    pub max_scale_dev: f64,
    pub pairs_per_scene: usize,
    pub seed: u64,
}

impl Default for PairSetSpec {
    fn default() -> Self {
        PairSetSpec {
            n_pairs: 500,
            side: 64,
            max_translation: 8.0,
            max_rotation: 0.05,
            max_scale_dev: 0.03,
            pairs_per_scene: 25,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub frame_a: Frame,
    pub frame_b: Frame,
    /// Motion from `frame_a` to `frame_b`.
    pub params: AffineParams,
}

/// Pairs whose `t_x, t_y, theta, s - 1` are uniform in the configured ranges.
pub fn generate_pairs(spec: &PairSetSpec) -> Result<Vec<SyntheticPair>> {
    if spec.side < 8 || spec.pairs_per_scene == 0 {
        return Err(Error::InvalidSpec(format!(
            "pair side must be >= 8 and pairs_per_scene >= 1: {spec:?}"
        )));
    }
    if !(spec.max_scale_dev >= 0.0 && spec.max_scale_dev < 0.5)
        || !(spec.max_translation >= 0.0)
        || !(spec.max_rotation >= 0.0)
    {
        return Err(Error::InvalidSpec(format!("bad motion ranges: {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.n_pairs);
    let mut scene = None;
    for i in 0..spec.n_pairs {
        if i % spec.pairs_per_scene == 0 {
            let idx = (i / spec.pairs_per_scene) as u64;
            scene = Some(build_scene(&SceneSpec::single_layer(
                derive_seed(spec.seed, idx),
                spec.side,
                spec.side,
            ))?);
        }
        let scene = scene.as_ref().unwrap();
        let view = View::new(spec.side, spec.side, scene.canvas_size());
        let c = scene.canvas_center();
        let reach = scene.canvas_size() as f64 / 2.0 - 1.2 * spec.side as f64;
        let p0 = CameraPose::new(
            c.0 + rng.gen_range(-reach..=reach),
            c.1 + rng.gen_range(-reach..=reach),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.gen_range(0.85..1.2),
        );
        let sym = |rng: &mut ChaCha8Rng, r: f64| if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
        let want = AffineParams::new(
            sym(&mut rng, spec.max_translation),
            sym(&mut rng, spec.max_translation),
            sym(&mut rng, spec.max_rotation),
            1.0 + sym(&mut rng, spec.max_scale_dev),
        );
        let p1 = pose_for_motion(&p0, &want, &view);
        out.push(SyntheticPair {
            frame_a: render_frame(scene, &p0, spec.side, spec.side),
            frame_b: render_frame(scene, &p1, spec.side, spec.side),
            params: pose_delta(&p0, &p1, &view),
        });
    }
    Ok(out)
}

/// The pose whose view relates to `from`'s view by `motion`.
pub fn pose_for_motion(from: &CameraPose, motion: &AffineParams, view: &View) -> CameraPose {
    let zoom = from.zoom * motion.s;
    let theta = from.theta - motion.theta;
    let (sin, cos) = motion.theta.sin_cos();
    let (cx, cy) = view.screen_center;
    // t - cs + s R(theta) cs
    let rx = motion.t_x - cx + motion.s * (cos * cx - sin * cy);
    let ry = motion.t_y - cy + motion.s * (sin * cx + cos * cy);
    let (st, ct) = theta.sin_cos();
    CameraPose::new(
        from.center_x - (ct * rx - st * ry) / zoom,
        from.center_y - (st * rx + ct * ry) / zoom,
        theta,
        zoom,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_for_motion_inverts_pose_delta() {
        let view = View::new(64, 64, 256);
        let from = CameraPose::new(130.0, 120.0, 0.7, 1.1);
        let m = AffineParams::new(3.5, -7.0, 0.04, 0.98);
        let to = pose_for_motion(&from, &m, &view);
        assert!(pose_delta(&from, &to, &view).max_abs_diff(&m) < 1e-9);
    }

    #[test]
    fn pairs_respect_ranges_and_are_deterministic() {
        let spec = PairSetSpec {
            n_pairs: 30,
            pairs_per_scene: 10,
            seed: 4,
            ..PairSetSpec::default()
        };
        let a = generate_pairs(&spec).unwrap();
        assert_eq!(a, generate_pairs(&spec).unwrap());
        for p in &a {
            assert!(p.params.t_x.abs() <= 8.0 + 1e-9 && p.params.t_y.abs() <= 8.0 + 1e-9);
            assert!(p.params.theta.abs() <= 0.05 + 1e-9);
            assert!((p.params.s - 1.0).abs() <= 0.03 + 1e-9);
            assert_eq!(p.frame_a.dims(), (64, 64));
            // Content stays inside the canvas.
            assert!(p.frame_a.data().iter().filter(|&&v| v == 0.0).count() < 64);
        }
    }
}
