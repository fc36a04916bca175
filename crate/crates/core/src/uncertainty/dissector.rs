use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::Scored;
use crate::error::{Error, Result};
use crate::nn::{
    affine, affine_backward, argmax, cross_entropy, softmax, softmax_cross_entropy_backward, top_two, Checkpoint, ModelKind,
    Tensor,
};
use crate::seed::rng_for;
use crate::tasks::{train, Forward, LayerMut, NeuronAxis, Noise, TaskModel, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Growth {
    Linear,
    Log,
    Exp,
}

impl Growth {
    pub const ALL: [Growth; 3] = [Growth::Linear, Growth::Log, Growth::Exp];

    pub fn as_str(self) -> &'static str {
        match self {
            Growth::Linear => "linear",
            Growth::Log => "log",
            Growth::Exp => "exp",
        }
    }
}

impl fmt::Display for Growth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Growth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Growth::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown growth `{s}` (linear, log, exp)")))
    }
}

/// Normalized depth weights for layers `1..=n`, deepest last.
pub fn growth_weights(growth: Growth, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n)
        .map(|i| {
            let i = i as f64;
            match growth {
                Growth::Linear => i,
                Growth::Log => (i + 1.0).ln(),
                Growth::Exp => i.exp(),
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Snapshot validity of one probe's output `q` for the model's label `l`.
pub fn sv_score(q: &[f32], l: usize) -> f64 {
    let (top, best, second) = top_two(q);
    let ql = q[l] as f64;
    let other = if top == l { second as f64 } else { best as f64 };
    if ql + other == 0.0 {
        return 0.0;
    }
    ql / (ql + other)
}

/// Softmax regression from one hidden layer to the label space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub w: Tensor<f32>,
    pub b: Tensor<f32>,
}

#[derive(Debug, Clone)]
pub struct ProbeInput {
    pub x: Vec<f32>,
    pub label: u32,
}

impl TaskModel<f32> for LinearProbe {
    type Input = ProbeInput;

    fn num_classes(&self) -> usize {
        self.b.len()
    }

    fn label(input: &ProbeInput) -> u32 {
        input.label
    }

    fn forward(&self, x: &ProbeInput, _noise: Option<&mut Noise<'_>>) -> Result<Forward<f32>> {
        let logits = affine(&x.x, &self.w, self.b.values())?;
        let probs = softmax(&logits);
        Ok(Forward { logits, probs, layers: Vec::new() })
    }

    fn accumulate_gradients(&mut self, x: &ProbeInput, _rng: &mut dyn RngCore) -> Result<(f32, usize)> {
        let f = self.forward(x, None)?;
        let label = x.label as usize;
        let loss = cross_entropy(&f.probs, label)?;
        let dz = softmax_cross_entropy_backward(&f.probs, label);
        affine_backward(&x.x, &mut self.w, self.b.grad_mut(), &dz);
        Ok((loss, argmax(&f.probs)))
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<f32>> {
        vec![&mut self.w, &mut self.b]
    }

    fn layers_mut(&mut self) -> Vec<LayerMut<'_, f32>> {
        vec![LayerMut { name: "probe", weights: &mut self.w, bias: Some(&mut self.b), axis: NeuronAxis::Rows }]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { epochs: 20, learning_rate: 0.001, batch_size: 64, seed: 0 }
    }
}

/// One probe per tapped layer of the base model, shallowest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub probes: Vec<LinearProbe>,
    pub config: ProbeConfig,
}

impl ProbeSet {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut params = Vec::new();
        for (i, p) in self.probes.iter().enumerate() {
            params.push((format!("probe{i}_w"), p.w.clone()));
            params.push((format!("probe{i}_b"), p.b.clone()));
        }
        Checkpoint {
            kind: ModelKind::Probe,
            config_json: serde_json::to_string(&self.config).expect("probe config serializes"),
            vocabs: Vec::new(),
            params,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != ModelKind::Probe {
            return Err(Error::Checkpoint(format!("checkpoint holds a {} model, expected {}", ck.kind, ModelKind::Probe)));
        }
        let config = serde_json::from_str(&ck.config_json).map_err(|e| Error::Checkpoint(format!("bad probe config: {e}")))?;
        let probes = (0..ck.params.len() / 2)
            .map(|i| {
                Ok(LinearProbe {
                    w: ck.param(&format!("probe{i}_w"))?.clone(),
                    b: ck.param(&format!("probe{i}_b"))?.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(ProbeSet { probes, config })
    }
}

/// Trains a probe per tapped layer on training-split activations, with the
/// base model frozen.
pub fn train_probes<M: TaskModel<f32>>(model: &M, samples: &[M::Input], cfg: &ProbeConfig) -> Result<ProbeSet> {
    if samples.is_empty() {
        return Err(Error::Empty("probe training needs samples".into()));
    }
    let mut per_layer: Vec<Vec<ProbeInput>> = Vec::new();
    for x in samples {
        let f = model.forward(x, None)?;
        if per_layer.is_empty() {
            per_layer = vec![Vec::with_capacity(samples.len()); f.layers.len()];
        }
        for (dst, h) in per_layer.iter_mut().zip(f.layers) {
            dst.push(ProbeInput { x: h, label: M::label(x) });
        }
    }
    let classes = model.num_classes();
    let mut probes = Vec::with_capacity(per_layer.len());
    for (i, data) in per_layer.iter().enumerate() {
        let dim = data[0].x.len();
        let bound = 1.0 / (dim as f64).sqrt();
        let mut r = rng_for(cfg.seed, &format!("probe-init-{i}"));
        let mut probe = LinearProbe {
            w: Tensor::uniform(&[classes, dim], bound, &mut r),
            b: Tensor::uniform(&[classes], bound, &mut r),
        };
        let tc = TrainConfig {
            learning_rate: cfg.learning_rate,
            embedding_dim: dim,
            dropout: None,
            optimizer: "adam".into(),
            batch_size: cfg.batch_size,
            epochs: cfg.epochs,
            seed: crate::seed::derive_seed(cfg.seed, &format!("probe-{i}")),
        };
        train(&mut probe, data, &[], &tc)?;
        probes.push(probe);
    }
    Ok(ProbeSet { probes, config: cfg.clone() })
}

/// Cross-layer confidence: depth-weighted mean of the probes' SV scores for
/// the base model's own prediction.
pub fn dissector<M: TaskModel<f32>>(model: &M, probes: &ProbeSet, growth: Growth, samples: &[M::Input]) -> Result<Vec<Scored>> {
    if let Some(p) = probes.probes.iter().find(|p| p.num_classes() != model.num_classes()) {
        return Err(Error::Validation(format!(
            "probe predicts {} classes, model has {}",
            p.num_classes(),
            model.num_classes()
        )));
    }
    let weights = growth_weights(growth, probes.probes.len());
    samples
        .iter()
        .map(|x| {
            let f = model.forward(x, None)?;
            if f.layers.len() != probes.probes.len() {
                return Err(Error::Validation(format!("{} probes for {} tapped layers", probes.probes.len(), f.layers.len())));
            }
            let l = argmax(&f.probs);
            let mut pv = 0.0;
            for ((probe, h), w) in probes.probes.iter().zip(f.layers).zip(&weights) {
                let q = probe.forward(&ProbeInput { x: h, label: 0 }, None)?.probs;
                pv += w * sv_score(&q, l);
            }
            let pv = pv.clamp(0.0, 1.0);
            Ok(Scored { predicted: l, raw_score: pv, confidence: pv })
        })
        .collect()
}
