//! Learned estimator: two convolutional regressors, one for translation and
//! one for rotation and scale.

pub mod network;
pub mod train;
pub mod weights;

use std::path::Path;

pub use network::{NetConfig, Network, Tensor};
pub use train::{predict, prepare_input, train, PreparedInput, TrainConfig, TrainingPair};
pub use weights::{ModelWeights, Role};

use super::flow::FlowOptions;
use super::EstimatorInput;
use crate::affine::AffineParams;
use crate::error::Result;

pub const TR_FILE: &str = "f_tr.bin";
pub const RS_FILE: &str = "f_rs.bin";

/// Both regressors plus the flow settings used to build their inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedModel {
    pub tr: ModelWeights,
    pub rs: ModelWeights,
    pub flow: FlowOptions,
}

impl LearnedModel {
    pub fn predict(&self, input: &EstimatorInput) -> Result<AffineParams> {
        predict(&self.tr, &self.rs, input, &self.flow)
    }

    pub fn save(&self, dir: &Path, meta: &str) -> Result<()> {
        self.tr.save(&dir.join(TR_FILE), meta)?;
        self.rs.save(&dir.join(RS_FILE), meta)
    }

    /// Loads `f_tr.bin` and `f_rs.bin`; flow settings come from the sidecar
    /// when present.
    pub fn load(dir: &Path) -> Result<Self> {
        let tr_path = dir.join(TR_FILE);
        let tr = ModelWeights::load(&tr_path)?;
        let rs = ModelWeights::load(&dir.join(RS_FILE))?;
        let mut flow = FlowOptions::default();
        if let Ok(meta) = ModelWeights::load_meta(&tr_path) {
            let get = |k: &str, d: usize| meta.get(k).and_then(|v| v.parse().ok()).unwrap_or(d);
            flow.levels = get("flow_levels", flow.levels);
            flow.block = get("flow_block", flow.block);
            flow.search = get("flow_search", flow.search);
            flow.step = get("flow_step", flow.step);
        }
        Ok(LearnedModel { tr, rs, flow })
    }
}
