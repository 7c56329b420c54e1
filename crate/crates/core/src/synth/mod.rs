//! Procedural 2D layered world, shaky camera paths, rendering and exact
//! mark-point ground truth.

pub mod camera;
pub mod dataset;
pub mod marks;
pub mod pairs;
pub mod render;
pub mod scene;

pub use camera::{
    generate_camera_path, pose_delta, CameraPath, CameraPose, NoiseProfile, ShakeComponents,
    SmoothPathSpec, View,
};
pub use dataset::{
    generate_video, read_dataset, read_video, write_dataset, write_video, DatasetManifest,
    SyntheticVideo, VideoGenConfig, VideoManifest,
};
pub use marks::{emit_mark_points, ground_truth_pairs, MarkConfig, MarkLayerMode, MarkRecord};
pub use render::{render_frame, render_path};
pub use scene::{build_scene, Scene, SceneSpec, TextureStyle};
