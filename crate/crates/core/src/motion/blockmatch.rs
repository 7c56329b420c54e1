use super::flow::{compute_flow_with, FlowOptions};
use super::EstimatorInput;
use crate::affine::{fit_similarity, AffineParams, Correspondence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockmatchOptions {
    pub flow: FlowOptions,
    pub min_cells: usize,
    pub rounds: usize,
    /// Residuals above `reject_factor * median` are dropped each round.
    pub reject_factor: f64,
}

impl Default for BlockmatchOptions {
    fn default() -> Self {
        BlockmatchOptions {
            flow: FlowOptions::default(),
            min_cells: 8,
            rounds: 3,
            reject_factor: 3.0,
        }
    }
}

pub fn estimate_blockmatch(input: &EstimatorInput) -> Result<AffineParams> {
    estimate_blockmatch_with(input, &BlockmatchOptions::default())
}

pub fn estimate_blockmatch_with(
    input: &EstimatorInput,
    opts: &BlockmatchOptions,
) -> Result<AffineParams> {
    input.validate()?;
    let computed;
    let flow = match input.flow {
        Some(f) => f,
        None => {
            computed = compute_flow_with(input.frame_a, input.frame_b, &opts.flow)?;
            &computed
        }
    };
    let corrs: Vec<Correspondence> = flow
        .point_samples(opts.flow.step)
        .into_iter()
        .map(|s| Correspondence::new((s.x, s.y), (s.x + s.u, s.y + s.v)))
        .collect();
    robust_similarity(&corrs, opts)
}

/// Similarity fit that repeatedly discards correspondences whose residual
/// exceeds `reject_factor` times the median residual.
pub fn robust_similarity(
    corrs: &[Correspondence],
    opts: &BlockmatchOptions,
) -> Result<AffineParams> {
    let degenerate = |valid| Error::DegenerateFlow {
        valid,
        required: opts.min_cells,
    };
    if corrs.len() < opts.min_cells {
        return Err(degenerate(corrs.len()));
    }
    if corrs.iter().all(|c| c.src == c.dst) {
        return Ok(AffineParams::IDENTITY);
    }
    let mut kept: Vec<Correspondence> = corrs.to_vec();
    let mut params = fit_similarity(&kept).map_err(|_| degenerate(kept.len()))?;
    for _ in 0..opts.rounds {
        let m = params.to_matrix();
        let residuals: Vec<f64> = kept
            .iter()
            .map(|c| {
                let p = m.apply(c.src);
                (p.0 - c.dst.0).hypot(p.1 - c.dst.1)
            })
            .collect();
        let mut sorted = residuals.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let threshold = opts.reject_factor * sorted[sorted.len() / 2] + 1e-9;
        let next: Vec<Correspondence> = kept
            .iter()
            .zip(&residuals)
            .filter(|(_, &r)| r <= threshold)
            .map(|(c, _)| *c)
            .collect();
        if next.len() == kept.len() {
            break;
        }
        if next.len() < opts.min_cells {
            return Err(degenerate(next.len()));
        }
        kept = next;
        params = fit_similarity(&kept).map_err(|_| degenerate(kept.len()))?;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;
    use crate::synth::camera::{pose_delta, CameraPose, View};
    use crate::synth::render::render_frame;
    use crate::synth::scene::{build_scene, SceneSpec};

    fn pair(p0: CameraPose, p1: CameraPose) -> (Frame, Frame, AffineParams) {
        let scene = build_scene(&SceneSpec::single_layer(5, 128, 96)).unwrap();
        let view = View::new(128, 96, scene.canvas_size());
        let c = scene.canvas_center();
        let shift =
            |p: CameraPose| CameraPose::new(c.0 + p.center_x, c.1 + p.center_y, p.theta, p.zoom);
        let (p0, p1) = (shift(p0), shift(p1));
        (
            render_frame(&scene, &p0, 128, 96),
            render_frame(&scene, &p1, 128, 96),
            pose_delta(&p0, &p1, &view),
        )
    }

    #[test]
    fn translation_pair() {
        let (a, b, gt) = pair(
            CameraPose::new(0.0, 0.0, 0.0, 1.0),
            CameraPose::new(-4.0, 2.0, 0.0, 1.0),
        );
        assert!(gt.max_abs_diff(&AffineParams::translation(4.0, -2.0)) < 1e-9);
        let est = estimate_blockmatch(&EstimatorInput::new(&a, &b)).unwrap();
        assert!(
            (est.t_x - 4.0).abs() < 0.5 && (est.t_y + 2.0).abs() < 0.5,
            "{est:?}"
        );
        assert!(est.theta.abs() < 0.01 && (est.s - 1.0).abs() < 0.01);
    }

    #[test]
    fn rotation_and_zoom_pair() {
        let (a, b, gt) = pair(
            CameraPose::new(0.0, 0.0, 0.0, 1.0),
            CameraPose::new(1.5, -0.5, 0.02, 1.015),
        );
        let est = estimate_blockmatch(&EstimatorInput::new(&a, &b)).unwrap();
        assert!((est.theta - gt.theta).abs() < 0.003, "{est:?} vs {gt:?}");
        assert!((est.s - gt.s).abs() < 0.003);
        assert!((est.t_x - gt.t_x).abs() < 0.5 && (est.t_y - gt.t_y).abs() < 0.5);
    }

    #[test]
    fn identical_frames_are_exact_identity() {
        let (a, _, _) = pair(
            CameraPose::new(0.0, 0.0, 0.0, 1.0),
            CameraPose::new(0.0, 0.0, 0.0, 1.0),
        );
        assert_eq!(
            estimate_blockmatch(&EstimatorInput::new(&a, &a)).unwrap(),
            AffineParams::IDENTITY
        );
    }

    #[test]
    fn constant_frames_are_degenerate() {
        let a = Frame::filled(64, 64, 90.0);
        assert!(matches!(
            estimate_blockmatch(&EstimatorInput::new(&a, &a)),
            Err(Error::DegenerateFlow {
                valid: 0,
                required: 8
            })
        ));
    }

    #[test]
    fn outliers_are_rejected() {
        let truth = AffineParams::new(2.0, -1.0, 0.01, 1.0);
        let m = truth.to_matrix();
        let mut corrs: Vec<Correspondence> = (0..40)
            .map(|i| {
                let p = ((i % 8) as f64 * 10.0, (i / 8) as f64 * 12.0);
                Correspondence::new(p, m.apply(p))
            })
            .collect();
        for c in corrs.iter_mut().step_by(7) {
            c.dst.0 += 15.0;
        }
        let est = robust_similarity(&corrs, &BlockmatchOptions::default()).unwrap();
        assert!(est.max_abs_diff(&truth) < 1e-9, "{est:?}");
    }
}
