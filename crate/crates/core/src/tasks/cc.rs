use rand::{Rng, RngCore};

use super::{label_index, Forward, LayerMut, ModelMeta, NeuronAxis, Noise, TaskModel};
use crate::error::{Error, Result};
use crate::extraction::{CbowSample, Vocabulary, VocabularyBuilder, PAD_ID};
use crate::nn::{
    affine, affine_backward, argmax, cross_entropy, dropout, softmax, softmax_cross_entropy_backward, Checkpoint,
    ModelKind, Real, Tensor,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedCbow {
    pub context: Vec<u32>,
    pub target: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcVocab {
    pub tokens: Vocabulary,
}

impl CcVocab {
    pub fn build(samples: &[CbowSample], min_count: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("no training tokens to build a vocabulary from".into()));
        }
        // Each token is counted once, as a target; contexts only repeat it.
        let mut b = VocabularyBuilder::new();
        for s in samples {
            b.add(&s.target);
        }
        Ok(CcVocab { tokens: b.build(min_count)? })
    }

    pub fn encode(&self, s: &CbowSample) -> EncodedCbow {
        EncodedCbow {
            context: s.context.iter().map(|t| self.tokens.id(t)).collect(),
            target: self.tokens.id(&s.target),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpCompletionModel<F = f32> {
    pub embedding: Tensor<F>,
    pub output_w: Tensor<F>,
    pub output_b: Tensor<F>,
}

impl<F: Real> MlpCompletionModel<F> {
    pub fn new<R: Rng + ?Sized>(vocab: usize, dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        MlpCompletionModel {
            embedding: Tensor::uniform(&[vocab, dim], bound, rng),
            output_w: Tensor::uniform(&[vocab, dim], bound, rng),
            output_b: Tensor::uniform(&[vocab], bound, rng),
        }
    }

    pub fn zeros(vocab: usize, dim: usize) -> Self {
        MlpCompletionModel {
            embedding: Tensor::zeros(&[vocab, dim]),
            output_w: Tensor::zeros(&[vocab, dim]),
            output_b: Tensor::zeros(&[vocab]),
        }
    }

    pub fn dim(&self) -> usize {
        self.embedding.cols()
    }

    /// Mean of the non-PAD context rows and the ids that contributed.
    fn context_mean(&self, x: &EncodedCbow) -> Result<(Vec<F>, Vec<u32>)> {
        let ids: Vec<u32> = x.context.iter().copied().filter(|&t| t != PAD_ID).collect();
        if ids.is_empty() {
            return Err(Error::Empty("context holds only padding".into()));
        }
        let rows = self.embedding.rows() as u32;
        let mut h = vec![F::zero(); self.dim()];
        for &t in &ids {
            if t >= rows {
                return Err(Error::Shape(format!("token id {t} outside vocabulary of {rows}")));
            }
            for (a, &v) in h.iter_mut().zip(self.embedding.row(t as usize)) {
                *a += v;
            }
        }
        let n = F::of(ids.len() as f64);
        h.iter_mut().for_each(|a| *a = *a / n);
        Ok((h, ids))
    }

    pub fn to_checkpoint(&self, vocab: &CcVocab, meta: &ModelMeta) -> Checkpoint {
        Checkpoint {
            kind: ModelKind::MlpCompletion,
            config_json: meta.to_json(),
            vocabs: vec![("tokens".into(), vocab.tokens.clone())],
            params: vec![
                ("embedding".into(), self.embedding.cast()),
                ("output_w".into(), self.output_w.cast()),
                ("output_b".into(), self.output_b.cast()),
            ],
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, CcVocab, ModelMeta)> {
        if ck.kind != ModelKind::MlpCompletion {
            return Err(Error::Checkpoint(format!("checkpoint holds a {} model, expected {}", ck.kind, ModelKind::MlpCompletion)));
        }
        let meta = ModelMeta::from_json(&ck.config_json)?;
        let vocab = CcVocab { tokens: ck.vocab("tokens")?.clone() };
        let model = MlpCompletionModel {
            embedding: ck.param("embedding")?.cast(),
            output_w: ck.param("output_w")?.cast(),
            output_b: ck.param("output_b")?.cast(),
        };
        let (v, d) = (vocab.tokens.len(), model.dim());
        if model.embedding.shape() != [v, d] || model.output_w.shape() != [v, d] || model.output_b.len() != v {
            return Err(Error::Checkpoint("parameter shapes disagree with vocabulary size".into()));
        }
        Ok((model, vocab, meta))
    }
}

impl<F: Real> TaskModel<F> for MlpCompletionModel<F> {
    type Input = EncodedCbow;

    fn num_classes(&self) -> usize {
        self.output_b.len()
    }

    fn label(input: &EncodedCbow) -> u32 {
        input.target
    }

    /// `noise` injects dropout after the mean; the trained model has none.
    fn forward(&self, x: &EncodedCbow, noise: Option<&mut Noise<'_>>) -> Result<Forward<F>> {
        let (h, _) = self.context_mean(x)?;
        let hd = match noise {
            Some(n) => dropout(&h, n.p, true, &mut *n.rng)?.0,
            None => h.clone(),
        };
        let logits = affine(&hd, &self.output_w, self.output_b.values())?;
        let probs = softmax(&logits);
        Ok(Forward { logits, probs, layers: vec![h] })
    }

    fn accumulate_gradients(&mut self, x: &EncodedCbow, _rng: &mut dyn RngCore) -> Result<(F, usize)> {
        let label = label_index(x.target, self.num_classes())?;
        let (h, ids) = self.context_mean(x)?;
        let logits = affine(&h, &self.output_w, self.output_b.values())?;
        let probs = softmax(&logits);
        let loss = cross_entropy(&probs, label)?;
        let dz = softmax_cross_entropy_backward(&probs, label);
        let dh = affine_backward(&h, &mut self.output_w, self.output_b.grad_mut(), &dz);
        let scale = F::one() / F::of(ids.len() as f64);
        let d = self.dim();
        let grad = self.embedding.grad_mut();
        for &t in &ids {
            for (g, &v) in grad[t as usize * d..(t as usize + 1) * d].iter_mut().zip(&dh) {
                *g += v * scale;
            }
        }
        Ok((loss, argmax(&probs)))
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        vec![&mut self.embedding, &mut self.output_w, &mut self.output_b]
    }

    fn layers_mut(&mut self) -> Vec<LayerMut<'_, F>> {
        vec![
            LayerMut { name: "embedding", weights: &mut self.embedding, bias: None, axis: NeuronAxis::Columns },
            LayerMut { name: "output", weights: &mut self.output_w, bias: Some(&mut self.output_b), axis: NeuronAxis::Rows },
        ]
    }
}
