//! Python bindings: tokenizer, extraction, metrics, the method-name model
//! and the full CLI pipeline.

use std::path::Path;

use codeshift::evalpipe;
use codeshift::extraction::{self, ExtractionConfig};
use codeshift::metrics::{self, ScoredLabel};
use codeshift::seed::rng_for;
use codeshift::tasks::{self, CsVocabs, PathAttentionModel, TrainConfig};
use codeshift::uncertainty;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: codeshift::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// `(kind, text, line)` for every token of a Java source.
#[pyfunction]
fn tokenize(source: &str) -> PyResult<Vec<(String, String, u32)>> {
    let tokens = extraction::tokenize_java(source).map_err(py_err)?;
    Ok(tokens.into_iter().map(|t| (format!("{:?}", t.kind), t.text, t.line)).collect())
}

type Contexts = Vec<(String, String, String)>;

/// `(method name, [(left, path, right), ...])` for every method with a body.
#[pyfunction]
#[pyo3(signature = (source, max_contexts=200, max_path_len=9, seed=0))]
fn method_samples(source: &str, max_contexts: usize, max_path_len: usize, seed: u64) -> PyResult<Vec<(String, Contexts)>> {
    let cfg = ExtractionConfig { max_contexts, max_path_len, ..ExtractionConfig::default() };
    let samples = extraction::method_samples_from_source(source, &cfg, seed, "<python>").map_err(py_err)?;
    Ok(samples
        .into_iter()
        .map(|s| (s.label, s.contexts.into_iter().map(|c| (c.left, c.path, c.right)).collect()))
        .collect())
}

/// `(target, context)` windows of radius `window`.
#[pyfunction]
#[pyo3(signature = (source, window=4))]
fn cbow_samples(source: &str, window: usize) -> PyResult<Vec<(String, Vec<String>)>> {
    let cfg = ExtractionConfig { window, ..ExtractionConfig::default() };
    let samples = extraction::cbow_samples_from_source(source, &cfg).map_err(py_err)?;
    Ok(samples.into_iter().map(|s| (s.target, s.context)).collect())
}

fn labelled(scores: Vec<f64>, positive: Vec<bool>) -> PyResult<Vec<ScoredLabel>> {
    if scores.len() != positive.len() {
        return Err(PyValueError::new_err(format!("{} scores but {} labels", scores.len(), positive.len())));
    }
    Ok(scores.into_iter().zip(positive).map(|(s, p)| ScoredLabel::new(s, p)).collect())
}

/// ROC AUC ×100; `None` when only one class is present.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, positive: Vec<bool>) -> PyResult<Option<f64>> {
    match metrics::roc_auc(&labelled(scores, positive)?) {
        Ok(v) => Ok(Some(v)),
        Err(codeshift::Error::Undefined(_)) => Ok(None),
        Err(e) => Err(py_err(e)),
    }
}

#[pyfunction]
fn aupr(scores: Vec<f64>, positive: Vec<bool>) -> PyResult<Option<f64>> {
    match metrics::aupr(&labelled(scores, positive)?) {
        Ok(v) => Ok(Some(v)),
        Err(codeshift::Error::Undefined(_)) => Ok(None),
        Err(e) => Err(py_err(e)),
    }
}

#[pyfunction]
fn brier(scores: Vec<f64>, positive: Vec<bool>) -> PyResult<f64> {
    metrics::brier(&labelled(scores, positive)?).map_err(py_err)
}

/// Accuracy with its signed drop against validation, e.g. `29.14(-2.74%)`.
#[pyfunction]
fn format_drop(val: f64, test: f64) -> String {
    evalpipe::format_drop(val, test)
}

/// Writes the synthetic two-style corpus; returns the number of files.
#[pyfunction]
#[pyo3(signature = (out, seed=0))]
fn generate_corpus(out: &str, seed: u64) -> PyResult<usize> {
    Ok(codeshift::synth::generate_corpus(Path::new(out), seed).map_err(py_err)?.files)
}

/// Runs a `codeshift` subcommand in-process and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    codeshift_cli::run(std::iter::once("codeshift".to_string()).chain(args))
}

#[pyclass(frozen)]
struct Vocabulary {
    inner: extraction::Vocabulary,
}

#[pymethods]
impl Vocabulary {
    /// Frozen vocabulary over `tokens`, keeping those seen `min_count` times.
    #[new]
    #[pyo3(signature = (tokens, min_count=1))]
    fn new(tokens: Vec<String>, min_count: usize) -> PyResult<Self> {
        Ok(Vocabulary { inner: extraction::build_vocab(tokens, min_count).map_err(py_err)? })
    }

    fn id(&self, token: &str) -> u32 {
        self.inner.id(token)
    }

    fn token(&self, id: u32) -> Option<String> {
        self.inner.token(id).map(str::to_string)
    }

    fn tokens(&self) -> Vec<String> {
        self.inner.tokens().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.inner.contains(token)
    }
}

/// Path-attention method-name model trained on in-memory sources.
#[pyclass(frozen)]
struct MethodNameModel {
    model: PathAttentionModel<f32>,
    vocabs: CsVocabs,
    extraction: ExtractionConfig,
}

impl MethodNameModel {
    fn encode(&self, source: &str) -> PyResult<(Vec<tasks::EncodedMethod>, Vec<String>)> {
        let samples = extraction::method_samples_from_source(source, &self.extraction, 0, "<python>").map_err(py_err)?;
        let names = samples.iter().map(|s| s.label.clone()).collect();
        Ok((samples.iter().map(|s| self.vocabs.encode(s)).collect(), names))
    }

    fn emit(&self, names: Vec<String>, scored: Vec<uncertainty::Scored>) -> Vec<(String, String, f64)> {
        names
            .into_iter()
            .zip(scored)
            .map(|(n, s)| (n, self.vocabs.labels.token(s.predicted as u32).unwrap_or("?").to_string(), s.confidence))
            .collect()
    }
}

#[pymethods]
impl MethodNameModel {
    #[staticmethod]
    #[pyo3(signature = (sources, embedding_dim=100, epochs=300, learning_rate=0.001, batch_size=512, dropout=0.5, seed=0))]
    fn train(
        sources: Vec<String>,
        embedding_dim: usize,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
        dropout: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let extraction = ExtractionConfig::default();
        let mut samples = Vec::new();
        for (i, src) in sources.iter().enumerate() {
            samples.extend(extraction::method_samples_from_source(src, &extraction, seed, &format!("source{i}")).map_err(py_err)?);
        }
        let vocabs = CsVocabs::build(&samples, 1).map_err(py_err)?;
        let cfg = TrainConfig { embedding_dim, epochs, learning_rate, batch_size, dropout: Some(dropout), seed, ..TrainConfig::cs_default() };
        cfg.validate(tasks::Task::Cs).map_err(py_err)?;
        let enc: Vec<_> = samples.iter().map(|s| vocabs.encode(s)).collect();
        let mut model = PathAttentionModel::new(
            vocabs.terminals.len(),
            vocabs.paths.len(),
            vocabs.labels.len(),
            embedding_dim,
            dropout,
            &mut rng_for(seed, "init"),
        );
        tasks::train(&mut model, &enc, &[], &cfg).map_err(py_err)?;
        Ok(MethodNameModel { model, vocabs, extraction })
    }

    /// `(true name, predicted name, softmax confidence)` per method.
    fn predict(&self, source: &str) -> PyResult<Vec<(String, String, f64)>> {
        let (enc, names) = self.encode(source)?;
        Ok(self.emit(names, uncertainty::vanilla(&self.model, &enc).map_err(py_err)?))
    }

    #[pyo3(signature = (source, passes=30, p=0.5, seed=0))]
    fn mc_dropout(&self, source: &str, passes: usize, p: f64, seed: u64) -> PyResult<Vec<(String, String, f64)>> {
        let (enc, names) = self.encode(source)?;
        Ok(self.emit(names, uncertainty::mc_dropout(&self.model, &enc, passes, p, seed).map_err(py_err)?))
    }

    /// Label change rate based confidence (1 − LCR) under one mutation operator.
    #[pyo3(signature = (source, operator="GF", degree=0.05, mutants=50, seed=0))]
    fn mmutant(&self, source: &str, operator: &str, degree: f64, mutants: usize, seed: u64) -> PyResult<Vec<(String, String, f64)>> {
        let (enc, names) = self.encode(source)?;
        let op = operator.parse().map_err(py_err)?;
        let (scored, _) = uncertainty::mmutant(&self.model, &enc, op, degree, mutants, seed).map_err(py_err)?;
        Ok(self.emit(names, scored))
    }
}

#[pymodule]
#[pyo3(name = "codeshift")]
fn codeshift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(method_samples, m)?)?;
    m.add_function(wrap_pyfunction!(cbow_samples, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(aupr, m)?)?;
    m.add_function(wrap_pyfunction!(brier, m)?)?;
    m.add_function(wrap_pyfunction!(format_drop, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_class::<Vocabulary>()?;
    m.add_class::<MethodNameModel>()?;
    Ok(())
}
