//! Per-pair motion estimation with interchangeable backends.
//!
//! Every backend returns the similarity mapping frame `i` onto frame `i + 1`.

pub mod blockmatch;
pub mod flow;
pub mod nn;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use blockmatch::{
    estimate_blockmatch, estimate_blockmatch_with, robust_similarity, BlockmatchOptions,
};
pub use flow::{compute_flow, compute_flow_with, FlowField, FlowOptions, FlowSample};
pub use nn::{LearnedModel, ModelWeights, TrainConfig, TrainingPair};

use crate::affine::AffineParams;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::synth::marks::{ground_truth_pair, index_by_frame, MarkRecord};

/// A frame pair and, optionally, precomputed flow between them.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorInput<'a> {
    pub frame_a: &'a Frame,
    pub frame_b: &'a Frame,
    pub flow: Option<&'a FlowField>,
}

impl<'a> EstimatorInput<'a> {
    pub fn new(frame_a: &'a Frame, frame_b: &'a Frame) -> Self {
        EstimatorInput {
            frame_a,
            frame_b,
            flow: None,
        }
    }

    pub fn with_flow(mut self, flow: &'a FlowField) -> Self {
        self.flow = Some(flow);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_a.dims() != self.frame_b.dims() {
            return Err(Error::FrameMismatch(format!(
                "pair frames are {:?} and {:?}",
                self.frame_a.dims(),
                self.frame_b.dims()
            )));
        }
        if self.frame_a.is_empty() {
            return Err(Error::FrameMismatch("empty frames".into()));
        }
        if let Some(f) = self.flow {
            if f.dims() != self.frame_a.dims() {
                return Err(Error::FrameMismatch(format!(
                    "flow is {:?}, frames are {:?}",
                    f.dims(),
                    self.frame_a.dims()
                )));
            }
        }
        Ok(())
    }
}

/// Ground-truth motion of pair `pair_index` from mark records.
pub fn estimate_oracle(records: &[MarkRecord], pair_index: usize) -> Result<AffineParams> {
    ground_truth_pair(&index_by_frame(records), pair_index)
}

pub enum Backend<'a> {
    Oracle(&'a [MarkRecord]),
    Blockmatch(BlockmatchOptions),
    Learned(&'a LearnedModel),
}

impl Backend<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Oracle(_) => "oracle",
            Backend::Blockmatch(_) => "blockmatch",
            Backend::Learned(_) => "learned",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEstimate {
    pub params: Vec<AffineParams>,
    pub warnings: Vec<String>,
}

/// Runs the backend on every consecutive pair. A failed pair falls back to
/// identity and leaves a warning; the sequence itself never fails.
pub fn estimate_sequence(frames: &[Frame], backend: &Backend) -> SequenceEstimate {
    let n_pairs = frames.len().saturating_sub(1);
    let by_frame: BTreeMap<usize, BTreeMap<u64, (f64, f64)>> = match backend {
        Backend::Oracle(records) => index_by_frame(records),
        _ => BTreeMap::new(),
    };
    let results: Vec<Result<AffineParams>> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let input = EstimatorInput::new(&frames[i], &frames[i + 1]);
            match backend {
                Backend::Oracle(_) => ground_truth_pair(&by_frame, i),
                Backend::Blockmatch(opts) => estimate_blockmatch_with(&input, opts),
                Backend::Learned(model) => model.predict(&input),
            }
        })
        .collect();
    let mut out = SequenceEstimate {
        params: Vec::with_capacity(n_pairs),
        warnings: Vec::new(),
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => out.params.push(p),
            Err(e) => {
                out.warnings.push(format!(
                    "pair {i}: {} backend failed ({e}); using identity",
                    backend.name()
                ));
                out.params.push(AffineParams::IDENTITY);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::camera::{NoiseProfile, SmoothPathSpec};
    use crate::synth::dataset::{generate_video, VideoGenConfig};

    #[test]
    fn two_identical_frames_give_identity_for_every_backend() {
        let v = generate_video(
            &VideoGenConfig {
                n_frames: 2,
                ..VideoGenConfig::default()
            },
            0,
        )
        .unwrap();
        let f = v.video.frames[0].clone();
        let frames = vec![f.clone(), f];
        let bm = estimate_sequence(&frames, &Backend::Blockmatch(BlockmatchOptions::default()));
        assert_eq!(bm.params, vec![AffineParams::IDENTITY]);
        assert!(bm.warnings.is_empty());
    }

    #[test]
    fn oracle_matches_ground_truth_file() {
        let v = generate_video(
            &VideoGenConfig {
                n_frames: 30,
                ..VideoGenConfig::default()
            },
            1,
        )
        .unwrap();
        let est = estimate_sequence(&v.video.frames, &Backend::Oracle(&v.video.marks));
        assert_eq!(est.params, v.video.gt);
        assert_eq!(estimate_oracle(&v.video.marks, 4).unwrap(), v.video.gt[4]);
        assert!(matches!(
            estimate_oracle(&v.video.marks, 40),
            Err(Error::InsufficientMarks(40))
        ));
    }

    #[test]
    fn blockmatch_tracks_translation_video() {
        let cfg = VideoGenConfig {
            n_frames: 30,
            noise: NoiseProfile {
                rot_amp_range: (0.0, 0.0),
                rot_jitter_sigma: 0.0,
                zoom_amp: 0.0,
                ..NoiseProfile::default()
            },
            path: Some(SmoothPathSpec::constant_velocity((0.0, 0.0), (0.7, -0.4))),
            ..VideoGenConfig::default()
        };
        let v = generate_video(&cfg, 2).unwrap();
        let est = estimate_sequence(
            &v.video.frames,
            &Backend::Blockmatch(BlockmatchOptions::default()),
        );
        assert!(est.warnings.is_empty(), "{:?}", est.warnings);
        for (e, g) in est.params.iter().zip(&v.video.gt) {
            assert!(
                (e.t_x - g.t_x).abs() < 0.5 && (e.t_y - g.t_y).abs() < 0.5,
                "{e:?} vs {g:?}"
            );
        }
    }

    #[test]
    fn failures_become_identity_with_warning() {
        let frames = vec![Frame::filled(64, 64, 10.0); 3];
        let est = estimate_sequence(&frames, &Backend::Blockmatch(BlockmatchOptions::default()));
        assert_eq!(est.params, vec![AffineParams::IDENTITY; 2]);
        assert_eq!(est.warnings.len(), 2);
    }
}
