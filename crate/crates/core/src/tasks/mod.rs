//! The two classifiers under study and their training loop.
//!
//! * [`PathAttentionModel`] — method-name prediction from a bag of AST path
//!   contexts (code summarization, "cs").
//! * [`MlpCompletionModel`] — masked-token prediction from the mean of the
//!   surrounding token embeddings (code completion, "cc").
//!
//! Both implement [`TaskModel`], which is what the training loop and the
//! uncertainty estimators are written against.

mod cc;
mod cs;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

pub use cc::{CcVocab, EncodedCbow, MlpCompletionModel};
pub use cs::{CsVocabs, EncodedMethod, PathAttentionModel};
pub use train::{epoch_log_csv, evaluate_accuracy, predict_all, train, EpochLog, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Cs,
    Cc,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Cs, Task::Cc];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Cs => "cs",
            Task::Cc => "cc",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cs" => Ok(Task::Cs),
            "cc" => Ok(Task::Cc),
            other => Err(Error::InvalidArgument(format!("unknown task `{other}` (expected cs or cc)"))),
        }
    }
}

/// Stochastic dropout applied at the model's dropout site during inference.
pub struct Noise<'a> {
    pub p: f64,
    pub rng: &'a mut dyn RngCore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward<F> {
    pub logits: Vec<F>,
    pub probs: Vec<F>,
    /// Tapped hidden layers, shallowest first.
    pub layers: Vec<Vec<F>>,
}

/// Which axis of a weight matrix indexes the layer's neurons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuronAxis {
    /// `W[out, in]`: row `o` holds neuron `o`'s incoming weights.
    Rows,
    /// Embedding tables: column `k` holds output unit `k`'s weight per token.
    Columns,
}

pub struct LayerMut<'a, F> {
    pub name: &'static str,
    pub weights: &'a mut Tensor<F>,
    pub bias: Option<&'a mut Tensor<F>>,
    pub axis: NeuronAxis,
}

impl<F: Real> LayerMut<'_, F> {
    pub fn neurons(&self) -> usize {
        match self.axis {
            NeuronAxis::Rows => self.weights.rows(),
            NeuronAxis::Columns => self.weights.cols(),
        }
    }

    /// Flat indices of neuron `k`'s incoming weights.
    pub fn incoming(&self, k: usize) -> Vec<usize> {
        let (rows, cols) = (self.weights.rows(), self.weights.cols());
        match self.axis {
            NeuronAxis::Rows => (k * cols..(k + 1) * cols).collect(),
            NeuronAxis::Columns => (0..rows).map(|r| r * cols + k).collect(),
        }
    }
}

pub trait TaskModel<F: Real = f32>: Clone + Send + Sync {
    type Input: Send + Sync;

    fn num_classes(&self) -> usize;

    fn label(input: &Self::Input) -> u32;

    /// Inference pass; `noise` switches on the dropout site.
    fn forward(&self, input: &Self::Input, noise: Option<&mut Noise<'_>>) -> Result<Forward<F>>;

    /// Training pass with the model's own dropout. Adds the gradient of the
    /// sample's cross-entropy to every parameter and returns the loss and
    /// the predicted class.
    fn accumulate_gradients(&mut self, input: &Self::Input, rng: &mut dyn RngCore) -> Result<(F, usize)>;

    fn params_mut(&mut self) -> Vec<&mut Tensor<F>>;

    /// Mutable view of every weight layer, input side first.
    fn layers_mut(&mut self) -> Vec<LayerMut<'_, F>>;
}

fn label_index(label: u32, classes: usize) -> Result<usize> {
    let l = label as usize;
    if l >= classes {
        return Err(Error::LabelOutOfRange { label: l, classes });
    }
    Ok(l)
}

/// Serialized alongside the weights in every task checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub task: Task,
    pub train: TrainConfig,
    /// Whatever the caller wants echoed (the CLI stores its effective config).
    #[serde(default)]
    pub echo: serde_json::Value,
}

impl ModelMeta {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("meta serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Checkpoint(format!("bad config echo: {e}")))
    }
}
