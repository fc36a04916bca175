use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Scored;
use crate::error::{Error, Result};
use crate::nn::argmax;
use crate::seed::{derive_seed, rng};
use crate::tasks::{LayerMut, TaskModel};

pub const DEFAULT_DEGREE: f64 = 0.05;
pub const DEFAULT_MUTANTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MutationOperator {
    /// Gaussian fuzzing of individual weights.
    GF,
    /// Weight shuffling within a neuron's incoming weights.
    WS,
    /// Neuron switch: swap two neurons' incoming weights.
    NS,
    /// Neuron activation inverse: negate incoming weights and bias.
    NAI,
}

impl MutationOperator {
    pub const ALL: [MutationOperator; 4] = [MutationOperator::GF, MutationOperator::WS, MutationOperator::NS, MutationOperator::NAI];

    pub fn as_str(self) -> &'static str {
        match self {
            MutationOperator::GF => "GF",
            MutationOperator::WS => "WS",
            MutationOperator::NS => "NS",
            MutationOperator::NAI => "NAI",
        }
    }
}

impl fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MutationOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MutationOperator::ALL
            .into_iter()
            .find(|op| op.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mutation operator `{s}`")))
    }
}

fn selected(degree: f64, n: usize) -> usize {
    ((degree * n as f64).round() as usize).min(n)
}

/// Mutates one layer in place. Returns a note when the layer had to be
/// skipped.
pub fn apply_operator<R: Rng + ?Sized>(mut layer: LayerMut<'_, f32>, op: MutationOperator, degree: f64, rng: &mut R) -> Option<String> {
    let neurons = layer.neurons();
    match op {
        MutationOperator::GF => {
            let n = layer.weights.len();
            let k = selected(degree, n);
            let sigma = layer.weights.std();
            if k == 0 || sigma == 0.0 {
                return None;
            }
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            let picks = index::sample(rng, n, k);
            let values = layer.weights.values_mut();
            for i in picks {
                values[i] += normal.sample(rng) as f32;
            }
        }
        MutationOperator::WS => {
            let picks = index::sample(rng, neurons, selected(degree, neurons));
            for k in picks {
                let idx = layer.incoming(k);
                let values = layer.weights.values_mut();
                let mut w: Vec<f32> = idx.iter().map(|&i| values[i]).collect();
                w.shuffle(rng);
                for (&i, v) in idx.iter().zip(w) {
                    values[i] = v;
                }
            }
        }
        MutationOperator::NS => {
            if neurons < 2 {
                return Some(format!("NS skipped layer {} ({neurons} neuron)", layer.name));
            }
            let k = selected(degree, neurons);
            if k == 0 {
                return None;
            }
            let pairs = (k / 2).max(1);
            let picks = index::sample(rng, neurons, 2 * pairs).into_vec();
            for pair in picks.chunks_exact(2) {
                let (a, b) = (pair[0], pair[1]);
                let (ia, ib) = (layer.incoming(a), layer.incoming(b));
                let values = layer.weights.values_mut();
                for (&x, &y) in ia.iter().zip(&ib) {
                    values.swap(x, y);
                }
                if let Some(bias) = layer.bias.as_deref_mut() {
                    bias.values_mut().swap(a, b);
                }
            }
        }
        MutationOperator::NAI => {
            let picks = index::sample(rng, neurons, selected(degree, neurons));
            for k in picks {
                let idx = layer.incoming(k);
                let values = layer.weights.values_mut();
                for i in idx {
                    values[i] = -values[i];
                }
                if let Some(bias) = layer.bias.as_deref_mut() {
                    let v = bias.values_mut();
                    v[k] = -v[k];
                }
            }
        }
    }
    None
}

/// A copy of `base` with `op` applied to every layer at `degree`.
pub fn mutate_model<M: TaskModel<f32>>(base: &M, op: MutationOperator, degree: f64, seed: u64) -> Result<(M, Vec<String>)> {
    if !(0.0..=1.0).contains(&degree) {
        return Err(Error::InvalidArgument(format!("mutation degree {degree} outside [0, 1]")));
    }
    let mut mutant = base.clone();
    let mut r = rng(seed);
    let notes = mutant.layers_mut().into_iter().filter_map(|layer| apply_operator(layer, op, degree, &mut r)).collect();
    Ok((mutant, notes))
}

/// Label change rate over `count` mutants: raw score LCR, confidence 1 − LCR.
/// Mutant `i` is seeded from `(seed, op, i)` alone.
pub fn mmutant<M: TaskModel<f32>>(
    base: &M,
    samples: &[M::Input],
    op: MutationOperator,
    degree: f64,
    count: usize,
    seed: u64,
) -> Result<(Vec<Scored>, Vec<String>)> {
    if count == 0 {
        return Err(Error::InvalidArgument("mMutant needs at least one mutant".into()));
    }
    let base_pred: Vec<usize> = samples.iter().map(|x| Ok(argmax(&base.forward(x, None)?.probs))).collect::<Result<_>>()?;
    let mut changed = vec![0usize; samples.len()];
    let mut notes = Vec::new();
    for i in 0..count {
        let (mutant, n) = mutate_model(base, op, degree, derive_seed(seed, &format!("mutant-{op}-{i}")))?;
        if i == 0 {
            notes = n;
        }
        for (j, x) in samples.iter().enumerate() {
            if argmax(&mutant.forward(x, None)?.probs) != base_pred[j] {
                changed[j] += 1;
            }
        }
    }
    let scored = base_pred
        .into_iter()
        .zip(changed)
        .map(|(predicted, c)| {
            let lcr = c as f64 / count as f64;
            Scored { predicted, raw_score: lcr, confidence: 1.0 - lcr }
        })
        .collect();
    Ok((scored, notes))
}
