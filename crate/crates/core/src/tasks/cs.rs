use rand::{Rng, RngCore};

use super::{label_index, Forward, LayerMut, ModelMeta, NeuronAxis, Noise, TaskModel};
use crate::error::{Error, Result};
use crate::extraction::{MethodSample, Vocabulary, VocabularyBuilder};
use crate::nn::{
    affine, affine_backward, argmax, attention_pool, attention_pool_backward, cross_entropy, dropout,
    dropout_backward, embedding_backward, softmax, softmax_cross_entropy_backward, tanh, tanh_backward, Checkpoint,
    ModelKind, Real, Tensor,
};

/// A method sample as vocabulary ids: `[left, path, right]` per context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedMethod {
    pub contexts: Vec<[u32; 3]>,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsVocabs {
    pub terminals: Vocabulary,
    pub paths: Vocabulary,
    pub labels: Vocabulary,
}

impl CsVocabs {
    /// Built from training samples only; frozen on return.
    pub fn build(samples: &[MethodSample], min_count: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("no training methods to build vocabularies from".into()));
        }
        let (mut terms, mut paths, mut labels) =
            (VocabularyBuilder::new(), VocabularyBuilder::new(), VocabularyBuilder::new());
        for s in samples {
            labels.add(&s.label);
            for c in &s.contexts {
                terms.add(&c.left);
                terms.add(&c.right);
                paths.add(&c.path);
            }
        }
        Ok(CsVocabs {
            terminals: terms.build(min_count)?,
            paths: paths.build(min_count)?,
            labels: labels.build(min_count)?,
        })
    }

    pub fn encode(&self, s: &MethodSample) -> EncodedMethod {
        EncodedMethod {
            contexts: s
                .contexts
                .iter()
                .map(|c| [self.terminals.id(&c.left), self.paths.id(&c.path), self.terminals.id(&c.right)])
                .collect(),
            label: self.labels.id(&s.label),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathAttentionModel<F = f32> {
    pub node_embedding: Tensor<F>,
    pub path_embedding: Tensor<F>,
    pub combiner_w: Tensor<F>,
    pub combiner_b: Tensor<F>,
    pub attention: Tensor<F>,
    pub output_w: Tensor<F>,
    pub output_b: Tensor<F>,
    pub dropout: f64,
}

const PARAM_NAMES: [&str; 7] = [
    "node_embedding",
    "path_embedding",
    "combiner_w",
    "combiner_b",
    "attention",
    "output_w",
    "output_b",
];

struct Cache<F> {
    e: Vec<F>,
    c: Vec<F>,
    cd: Vec<F>,
    mask: Option<Vec<F>>,
    alpha: Vec<F>,
    v: Vec<F>,
    probs: Vec<F>,
    logits: Vec<F>,
}

impl<F: Real> PathAttentionModel<F> {
    /// Uniform init: ±1/√fan_in for affine layers, ±1/√d for embeddings.
    pub fn new<R: Rng + ?Sized>(terminals: usize, paths: usize, labels: usize, dim: usize, dropout: f64, rng: &mut R) -> Self {
        let emb = 1.0 / (dim as f64).sqrt();
        let comb = 1.0 / (3.0 * dim as f64).sqrt();
        PathAttentionModel {
            node_embedding: Tensor::uniform(&[terminals, dim], emb, rng),
            path_embedding: Tensor::uniform(&[paths, dim], emb, rng),
            combiner_w: Tensor::uniform(&[dim, 3 * dim], comb, rng),
            combiner_b: Tensor::uniform(&[dim], comb, rng),
            attention: Tensor::uniform(&[dim], emb, rng),
            output_w: Tensor::uniform(&[labels, dim], emb, rng),
            output_b: Tensor::uniform(&[labels], emb, rng),
            dropout,
        }
    }

    pub fn zeros(terminals: usize, paths: usize, labels: usize, dim: usize) -> Self {
        PathAttentionModel {
            node_embedding: Tensor::zeros(&[terminals, dim]),
            path_embedding: Tensor::zeros(&[paths, dim]),
            combiner_w: Tensor::zeros(&[dim, 3 * dim]),
            combiner_b: Tensor::zeros(&[dim]),
            attention: Tensor::zeros(&[dim]),
            output_w: Tensor::zeros(&[labels, dim]),
            output_b: Tensor::zeros(&[labels]),
            dropout: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.attention.len()
    }

    fn params(&self) -> [&Tensor<F>; 7] {
        [
            &self.node_embedding,
            &self.path_embedding,
            &self.combiner_w,
            &self.combiner_b,
            &self.attention,
            &self.output_w,
            &self.output_b,
        ]
    }

    fn run(&self, x: &EncodedMethod, noise: Option<&mut Noise<'_>>) -> Result<Cache<F>> {
        let n = x.contexts.len();
        if n == 0 {
            return Err(Error::Empty("method has no path contexts".into()));
        }
        let d = self.dim();
        let (t_rows, p_rows) = (self.node_embedding.rows() as u32, self.path_embedding.rows() as u32);
        let mut e = Vec::with_capacity(n * 3 * d);
        for &[l, p, r] in &x.contexts {
            if l >= t_rows || r >= t_rows || p >= p_rows {
                return Err(Error::Shape(format!("context ids ({l},{p},{r}) outside vocabularies ({t_rows},{p_rows})")));
            }
            e.extend_from_slice(self.node_embedding.row(l as usize));
            e.extend_from_slice(self.path_embedding.row(p as usize));
            e.extend_from_slice(self.node_embedding.row(r as usize));
        }
        let mut c = Vec::with_capacity(n * d);
        for ej in e.chunks_exact(3 * d) {
            c.extend(tanh(&affine(ej, &self.combiner_w, self.combiner_b.values())?));
        }
        let (cd, mask) = match noise {
            Some(nz) => dropout(&c, nz.p, true, &mut *nz.rng)?,
            None => (c.clone(), None),
        };
        let (v, alpha) = attention_pool(&cd, d, self.attention.values())?;
        let logits = affine(&v, &self.output_w, self.output_b.values())?;
        let probs = softmax(&logits);
        Ok(Cache {
            e,
            c,
            cd,
            mask,
            alpha,
            v,
            probs,
            logits,
        })
    }

    /// Attention weights over the sample's contexts (inference mode).
    pub fn attention_weights(&self, x: &EncodedMethod) -> Result<Vec<F>> {
        Ok(self.run(x, None)?.alpha)
    }

    pub fn to_checkpoint(&self, vocabs: &CsVocabs, meta: &ModelMeta) -> Checkpoint
    where
        F: Real,
    {
        Checkpoint {
            kind: ModelKind::PathAttention,
            config_json: meta.to_json(),
            vocabs: vec![
                ("terminals".into(), vocabs.terminals.clone()),
                ("paths".into(), vocabs.paths.clone()),
                ("labels".into(), vocabs.labels.clone()),
            ],
            params: PARAM_NAMES.iter().zip(self.params()).map(|(n, t)| (n.to_string(), t.cast())).collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, CsVocabs, ModelMeta)> {
        if ck.kind != ModelKind::PathAttention {
            return Err(Error::Checkpoint(format!("checkpoint holds a {} model, expected {}", ck.kind, ModelKind::PathAttention)));
        }
        let meta = ModelMeta::from_json(&ck.config_json)?;
        let vocabs = CsVocabs {
            terminals: ck.vocab("terminals")?.clone(),
            paths: ck.vocab("paths")?.clone(),
            labels: ck.vocab("labels")?.clone(),
        };
        let get = |name: &str| ck.param(name).map(|t| t.cast::<F>());
        let model = PathAttentionModel {
            node_embedding: get("node_embedding")?,
            path_embedding: get("path_embedding")?,
            combiner_w: get("combiner_w")?,
            combiner_b: get("combiner_b")?,
            attention: get("attention")?,
            output_w: get("output_w")?,
            output_b: get("output_b")?,
            dropout: meta.train.dropout.unwrap_or(0.0),
        };
        let d = model.dim();
        let ok = model.node_embedding.shape() == [vocabs.terminals.len(), d]
            && model.path_embedding.shape() == [vocabs.paths.len(), d]
            && model.combiner_w.shape() == [d, 3 * d]
            && model.combiner_b.len() == d
            && model.output_w.shape() == [vocabs.labels.len(), d]
            && model.output_b.len() == vocabs.labels.len();
        if !ok {
            return Err(Error::Checkpoint("parameter shapes disagree with vocabulary sizes".into()));
        }
        Ok((model, vocabs, meta))
    }
}

impl<F: Real> TaskModel<F> for PathAttentionModel<F> {
    type Input = EncodedMethod;

    fn num_classes(&self) -> usize {
        self.output_b.len()
    }

    fn label(input: &EncodedMethod) -> u32 {
        input.label
    }

    fn forward(&self, x: &EncodedMethod, noise: Option<&mut Noise<'_>>) -> Result<Forward<F>> {
        let cache = self.run(x, noise)?;
        let d = self.dim();
        let n = F::of(x.contexts.len() as f64);
        let mut mean = vec![F::zero(); 3 * d];
        for ej in cache.e.chunks_exact(3 * d) {
            for (m, &v) in mean.iter_mut().zip(ej) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        Ok(Forward {
            logits: cache.logits,
            probs: cache.probs,
            layers: vec![mean, cache.v],
        })
    }

    fn accumulate_gradients(&mut self, x: &EncodedMethod, rng: &mut dyn RngCore) -> Result<(F, usize)> {
        let label = label_index(x.label, self.num_classes())?;
        let p = self.dropout;
        let mut noise = Noise { p, rng };
        let cache = self.run(x, if p > 0.0 { Some(&mut noise) } else { None })?;
        let loss = cross_entropy(&cache.probs, label)?;
        let predicted = argmax(&cache.probs);
        let d = self.dim();

        let dz = softmax_cross_entropy_backward(&cache.probs, label);
        let dv = affine_backward(&cache.v, &mut self.output_w, self.output_b.grad_mut(), &dz);
        let (dcd, da) = attention_pool_backward(&cache.cd, d, self.attention.values(), &cache.alpha, &dv);
        for (g, v) in self.attention.grad_mut().iter_mut().zip(da) {
            *g += v;
        }
        let dc = dropout_backward(cache.mask.as_deref(), &dcd);
        for (j, &[l, pid, r]) in x.contexts.iter().enumerate() {
            let dh = tanh_backward(&cache.c[j * d..(j + 1) * d], &dc[j * d..(j + 1) * d]);
            let ej = &cache.e[j * 3 * d..(j + 1) * 3 * d];
            let de = affine_backward(ej, &mut self.combiner_w, self.combiner_b.grad_mut(), &dh);
            embedding_backward(&mut self.node_embedding, &[l], &de[..d]);
            embedding_backward(&mut self.path_embedding, &[pid], &de[d..2 * d]);
            embedding_backward(&mut self.node_embedding, &[r], &de[2 * d..]);
        }
        Ok((loss, predicted))
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<F>> {
        vec![
            &mut self.node_embedding,
            &mut self.path_embedding,
            &mut self.combiner_w,
            &mut self.combiner_b,
            &mut self.attention,
            &mut self.output_w,
            &mut self.output_b,
        ]
    }

    fn layers_mut(&mut self) -> Vec<LayerMut<'_, F>> {
        vec![
            LayerMut { name: "node_embedding", weights: &mut self.node_embedding, bias: None, axis: NeuronAxis::Columns },
            LayerMut { name: "path_embedding", weights: &mut self.path_embedding, bias: None, axis: NeuronAxis::Columns },
            LayerMut {
                name: "combiner",
                weights: &mut self.combiner_w,
                bias: Some(&mut self.combiner_b),
                axis: NeuronAxis::Rows,
            },
            // A single attention unit scoring each context.
            LayerMut { name: "attention", weights: &mut self.attention, bias: None, axis: NeuronAxis::Rows },
            LayerMut { name: "output", weights: &mut self.output_w, bias: Some(&mut self.output_b), axis: NeuronAxis::Rows },
        ]
    }
}
