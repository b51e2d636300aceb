//! The three zone classifiers.

use serde::{Deserialize, Serialize};

use crate::layers::LayerSpec;
use crate::model::{BranchSpec, ModelSpec, TrainingParams};

/// Channel widths of the two convolutions in every branch.
pub const CONV_CHANNELS: [usize; 2] = [8, 16];
/// Hidden width of the fully connected head of the convolutional models.
pub const HEAD_WIDTH: usize = 128;
/// Hidden width of the TOA/RSS perceptron.
pub const MLP_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Two-branch network over the power and bin-index matrices.
    Pnn,
    /// Convolutional network over the full PDP image.
    PdpCnn,
    /// Perceptron over per-sensor TOA and RSS.
    ToaRss,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Pnn, ModelKind::PdpCnn, ModelKind::ToaRss];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Pnn => "pnn",
            ModelKind::PdpCnn => "pdp-cnn",
            ModelKind::ToaRss => "toa-rss",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown model '{s}'"))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn conv_branch(rows: usize, cols: usize) -> BranchSpec {
    BranchSpec {
        input: [1, rows, cols],
        layers: vec![
            LayerSpec::conv3x3(CONV_CHANNELS[0]),
            LayerSpec::Relu,
            LayerSpec::conv3x3(CONV_CHANNELS[1]),
            LayerSpec::Relu,
            LayerSpec::Flatten,
        ],
    }
}

fn conv_head(classes: usize) -> Vec<LayerSpec> {
    vec![LayerSpec::dense(HEAD_WIDTH), LayerSpec::Relu, LayerSpec::dense(classes)]
}

/// Branches over the `sensors x f` power and index matrices.
pub fn build_pnn(sensors: usize, f: usize, classes: usize) -> ModelSpec {
    ModelSpec {
        branches: vec![conv_branch(sensors, f), conv_branch(sensors, f)],
        head: conv_head(classes),
        classes,
        seed: 0,
        training: TrainingParams::default(),
    }
}

/// One branch over the `sensors x bins` PDP image.
pub fn build_pdp_cnn(sensors: usize, bins: usize, classes: usize) -> ModelSpec {
    ModelSpec {
        branches: vec![conv_branch(sensors, bins)],
        head: conv_head(classes),
        classes,
        seed: 0,
        training: TrainingParams::default(),
    }
}

/// Perceptron over the `2 sensors` TOA/RSS vector.
pub fn build_toa_rss_mlp(sensors: usize, classes: usize) -> ModelSpec {
    ModelSpec {
        branches: vec![BranchSpec { input: [2 * sensors, 1, 1], layers: Vec::new() }],
        head: vec![
            LayerSpec::dense(MLP_WIDTH),
            LayerSpec::Relu,
            LayerSpec::dense(MLP_WIDTH),
            LayerSpec::Relu,
            LayerSpec::dense(classes),
        ],
        classes,
        seed: 0,
        training: TrainingParams::default(),
    }
}
