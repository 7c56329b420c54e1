use rayon::prelude::*;

use super::camera::{CameraPath, CameraPose, View};
use super::scene::Scene;
use crate::frame::{bilinear, Frame};

/// Renders one grayscale frame by compositing the layer stack back to front.
///
/// Samples falling outside the canvas are black on the opaque backdrop and
/// transparent on masked layers. Values are rounded to whole gray levels,
/// matching 8-bit capture.
pub fn render_frame(scene: &Scene, pose: &CameraPose, width: usize, height: usize) -> Frame {
    let view = View::new(width, height, scene.canvas_size());
    let n = scene.canvas_size();
    let mut frame = Frame::new(width, height);
    frame
        .data_mut()
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let p = (x as f64, y as f64);
                let mut acc = 0.0f64;
                for layer in scene.layers.iter().rev() {
                    let (wx, wy) = pose.screen_to_layer(p, &view, layer.depth);
                    let value = bilinear(&layer.texture, n, n, wx, wy);
                    match &layer.alpha {
                        None => acc = value.unwrap_or(0.0) as f64,
                        Some(alpha) => {
                            if let (Some(v), Some(a)) = (value, bilinear(alpha, n, n, wx, wy)) {
                                let a = a as f64;
                                acc = a * v as f64 + (1.0 - a) * acc;
                            }
                        }
                    }
                }
                *out = acc.round().clamp(0.0, 255.0) as f32;
            }
        });
    frame
}

pub fn render_path(scene: &Scene, path: &CameraPath, width: usize, height: usize) -> Vec<Frame> {
    path.poses
        .iter()
        .map(|pose| render_frame(scene, pose, width, height))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::scene::{build_scene, SceneSpec};

    #[test]
    fn same_pose_same_frame() {
        let scene = build_scene(&SceneSpec::layered(4, 48, 32, 2)).unwrap();
        let c = scene.canvas_center();
        let pose = CameraPose::new(c.0 + 3.3, c.1 - 1.7, 0.05, 1.1);
        assert_eq!(
            render_frame(&scene, &pose, 48, 32),
            render_frame(&scene, &pose, 48, 32)
        );
    }

    #[test]
    fn integer_translation_shifts_content() {
        let scene = build_scene(&SceneSpec::single_layer(8, 48, 32)).unwrap();
        let c = scene.canvas_center();
        let k = 3usize;
        let a = render_frame(&scene, &CameraPose::new(c.0, c.1, 0.0, 1.0), 48, 32);
        let b = render_frame(
            &scene,
            &CameraPose::new(c.0 + k as f64, c.1, 0.0, 1.0),
            48,
            32,
        );
        for y in 0..32 {
            for x in 0..48 - k {
                assert!((a.get(x + k, y) - b.get(x, y)).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn far_outside_canvas_is_black() {
        let scene = build_scene(&SceneSpec::single_layer(8, 16, 16)).unwrap();
        let f = render_frame(&scene, &CameraPose::new(-500.0, -500.0, 0.0, 1.0), 16, 16);
        assert!(f.data().iter().all(|&v| v == 0.0));
    }
}
