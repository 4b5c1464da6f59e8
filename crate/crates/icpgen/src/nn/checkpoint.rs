//! Checkpoint persistence: one JSON document per checkpoint holding the
//! network parameters, optimizer state, and enough bookkeeping to resume.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, DenseNetwork, HIDDEN_ACTIVATION_TAG, OUTPUT_ACTIVATION_TAG};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    /// Per-layer weight matrices, row-major with shape (in_dim, out_dim).
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub hidden_activation: String,
    pub output_activation: String,
    pub adam: AdamState,
    /// Master seed the run was started with.
    pub seed: u64,
    /// Number of completed training epochs.
    pub epoch: usize,
}

impl Checkpoint {
    pub fn new(net: &DenseNetwork, adam: &AdamState, seed: u64, epoch: usize) -> Self {
        Checkpoint {
            layer_dims: net.layer_dims().to_vec(),
            weights: (0..net.num_layers()).map(|l| net.weights(l).to_vec()).collect(),
            biases: (0..net.num_layers()).map(|l| net.biases(l).to_vec()).collect(),
            hidden_activation: HIDDEN_ACTIVATION_TAG.to_string(),
            output_activation: OUTPUT_ACTIVATION_TAG.to_string(),
            adam: adam.clone(),
            seed,
            epoch,
        }
    }

    /// Rebuilds the network, validating shapes and activation tags.
    pub fn into_network(self) -> Result<(DenseNetwork, AdamState)> {
        if self.hidden_activation != HIDDEN_ACTIVATION_TAG
            || self.output_activation != OUTPUT_ACTIVATION_TAG
        {
            return Err(Error::CheckpointMismatch(format!(
                "unsupported activations {:?}/{:?}; this build supports {:?}/{:?}",
                self.hidden_activation,
                self.output_activation,
                HIDDEN_ACTIVATION_TAG,
                OUTPUT_ACTIVATION_TAG
            )));
        }
        let net = DenseNetwork::from_parts(self.layer_dims, self.weights, self.biases)
            .map_err(|e| Error::CheckpointMismatch(e.to_string()))?;
        if !self.adam.congruent_with(&net) {
            return Err(Error::CheckpointMismatch(
                "adam state does not match the network shape".into(),
            ));
        }
        Ok((net, self.adam))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}
