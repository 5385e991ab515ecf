//! Gesture classifiers trained from scratch.
//!
//! Model #1 is a dense network on ten frame-averaged real parts of S21 at the
//! design frequency. Model #2 is a two-stage convolutional network on the
//! magnitude/phase images of the full record.

mod features;
mod io;
pub mod network;
mod train;

pub use features::{
    dataset_features_m1, features_m1, features_m1_row, features_m2, FeatureImageM2, LazyImages, DESIGN_FREQUENCY,
    MAG_FLOOR_DB,
};
pub use io::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use network::{cross_entropy, softmax, LayerSpec, Network};
pub use train::{
    evaluate, gradient_check, stratified_split, train, EvalReport, FeatureSource, InMemory, Split, TrainConfig,
    TrainReport,
};

use serde::{Deserialize, Serialize};

use crate::sensing::GestureLabel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    M1,
    M2,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(ModelKind::M1),
            "m2" => Ok(ModelKind::M2),
            other => Err(Error::invalid(format!("unknown model {other:?}, expected m1 or m2"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::M1 => "m1",
            ModelKind::M2 => "m2",
        })
    }
}

/// Per-feature z-score parameters, fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Everything about a model except its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: ModelKind,
    pub network: Network,
    pub classes: Vec<GestureLabel>,
    pub standardization: Option<Standardization>,
    pub design_frequency_hz: Option<f64>,
    pub training_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

/// Model #1 topology: `inputs → 64 → 32 → 3`, ReLU between layers.
pub fn m1_network(inputs: usize) -> Network {
    Network {
        input_shape: [inputs, 1, 1],
        layers: vec![
            LayerSpec::Dense { inputs, outputs: 64 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 64, outputs: 32 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 32, outputs: 3 },
        ],
    }
}

/// Model #2 topology for `2 × h × w` images: two conv(3×3)/ReLU/max-pool(2)
/// stages with 8 and 16 filters, then dense 64 and dense 3.
pub fn m2_network(h: usize, w: usize) -> Result<Network> {
    let mut layers = vec![
        LayerSpec::Conv2d { in_channels: 2, out_channels: 8, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { size: 2 },
        LayerSpec::Conv2d { in_channels: 8, out_channels: 16, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::MaxPool2d { size: 2 },
        LayerSpec::Flatten,
    ];
    let flat = Network::new([2, h, w], layers.clone())
        .map_err(|_| Error::dims(format!("image {h}×{w} is too small for model #2")))?
        .outputs();
    layers.extend([
        LayerSpec::Dense { inputs: flat, outputs: 64 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 64, outputs: 3 },
    ]);
    Network::new([2, h, w], layers)
}

impl Model {
    fn prepare<'a>(&self, x: &'a [f64]) -> std::borrow::Cow<'a, [f64]> {
        match &self.arch.standardization {
            Some(s) => std::borrow::Cow::Owned(s.apply(x)),
            None => std::borrow::Cow::Borrowed(x),
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = self.prepare(x);
        Ok(self.arch.network.forward(&self.params, &x)?.logits().to_vec())
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Index into `arch.classes` of the most probable class.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let l = self.logits(x)?;
        Ok((0..l.len()).fold(0, |b, n| if l[n] > l[b] { n } else { b }))
    }
}
