//! The stages behind each subcommand, written once over [`TaskIo`] so both
//! tasks share them.

use std::path::{Path, PathBuf};

use codeshift::corpus::{self, ShiftKind, SplitAssignment, TRAIN, VALIDATION};
use codeshift::evalpipe::{input_filter, sweep_csv, threshold_sweep, ReportTable};
use codeshift::extraction::{
    cbow_samples_from_source, method_samples_from_source, read_cbow_samples, read_method_samples, write_cbow_samples,
    write_method_samples, CbowSample, ExtractionConfig, MethodSample, PathTable, Vocabulary, PAD,
};
use codeshift::nn::Checkpoint;
use codeshift::seed::{derive_seed, rng_for};
use codeshift::tasks::{
    epoch_log_csv, train, CcVocab, CsVocabs, EncodedCbow, EncodedMethod, MlpCompletionModel, ModelMeta,
    PathAttentionModel, Task, TaskModel, TrainConfig,
};
use codeshift::uncertainty::{
    self, dissector, fit_temperature, mc_dropout, mmutant, read_scores_csv, records, temp_scale, train_probes,
    write_scores_csv, ConfidenceRecord, Growth, Method, MutationOperator, ProbeSet, Scored, TemperatureFit,
};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Effective;
use crate::layout::{read_artifact, read_artifact_text, write, Layout};
use crate::CliError;

/// Everything the generic stages need to know about one task.
pub trait TaskIo {
    const TASK: Task;
    type Sample;
    type Vocabs;
    type Model: TaskModel<f32>;

    fn extract_file(source: &str, cfg: &ExtractionConfig, seed: u64, origin: &str) -> codeshift::Result<Vec<Self::Sample>>;
    fn write_contexts(layout: &Layout, shift: ShiftKind, header: &str, splits: &[(String, Vec<Self::Sample>)]) -> Result<(), CliError>;
    fn read_contexts(layout: &Layout, shift: ShiftKind, split: &str) -> Result<Vec<Self::Sample>, CliError>;
    fn truth(s: &Self::Sample) -> &str;
    fn build_vocabs(train: &[Self::Sample], min_count: usize) -> codeshift::Result<Self::Vocabs>;
    fn encode(v: &Self::Vocabs, s: &Self::Sample) -> <Self::Model as TaskModel<f32>>::Input;
    fn labels(v: &Self::Vocabs) -> &Vocabulary;
    fn new_model(v: &Self::Vocabs, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Self::Model;
    fn to_checkpoint(m: &Self::Model, v: &Self::Vocabs, meta: &ModelMeta) -> Checkpoint;
    fn from_checkpoint(ck: &Checkpoint) -> codeshift::Result<(Self::Model, Self::Vocabs, ModelMeta)>;
}

pub struct Cs;
pub struct Cc;

fn contexts_text(layout: &Layout, shift: ShiftKind, task: Task, split: &str) -> Result<String, CliError> {
    read_artifact_text(&layout.contexts(shift, task, split), "extract")
}

impl TaskIo for Cs {
    const TASK: Task = Task::Cs;
    type Sample = MethodSample;
    type Vocabs = CsVocabs;
    type Model = PathAttentionModel<f32>;

    fn extract_file(source: &str, cfg: &ExtractionConfig, seed: u64, origin: &str) -> codeshift::Result<Vec<MethodSample>> {
        method_samples_from_source(source, cfg, seed, origin)
    }

    fn write_contexts(layout: &Layout, shift: ShiftKind, header: &str, splits: &[(String, Vec<MethodSample>)]) -> Result<(), CliError> {
        let mut table = PathTable::default();
        for (split, samples) in splits {
            let text = write_method_samples(Some(header), samples, &mut table);
            write(&layout.contexts(shift, Task::Cs, split), text)?;
        }
        write(&layout.path_table(shift), format!("# {header}\n{}", table.to_text()))
    }

    fn read_contexts(layout: &Layout, shift: ShiftKind, split: &str) -> Result<Vec<MethodSample>, CliError> {
        let table_path = layout.path_table(shift);
        let table = PathTable::from_text(&read_artifact_text(&table_path, "extract")?, &table_path)?;
        let text = contexts_text(layout, shift, Task::Cs, split)?;
        Ok(read_method_samples(&text, Some(&table), Path::new(&Layout::contexts_rel(shift, Task::Cs, split)))?)
    }

    fn truth(s: &MethodSample) -> &str {
        &s.label
    }

    fn build_vocabs(train: &[MethodSample], min_count: usize) -> codeshift::Result<CsVocabs> {
        CsVocabs::build(train, min_count)
    }

    fn encode(v: &CsVocabs, s: &MethodSample) -> EncodedMethod {
        v.encode(s)
    }

    fn labels(v: &CsVocabs) -> &Vocabulary {
        &v.labels
    }

    fn new_model(v: &CsVocabs, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> PathAttentionModel<f32> {
        PathAttentionModel::new(
            v.terminals.len(),
            v.paths.len(),
            v.labels.len(),
            cfg.embedding_dim,
            cfg.dropout.unwrap_or(0.0),
            rng,
        )
    }

    fn to_checkpoint(m: &PathAttentionModel<f32>, v: &CsVocabs, meta: &ModelMeta) -> Checkpoint {
        m.to_checkpoint(v, meta)
    }

    fn from_checkpoint(ck: &Checkpoint) -> codeshift::Result<(PathAttentionModel<f32>, CsVocabs, ModelMeta)> {
        PathAttentionModel::from_checkpoint(ck)
    }
}

impl TaskIo for Cc {
    const TASK: Task = Task::Cc;
    type Sample = CbowSample;
    type Vocabs = CcVocab;
    type Model = MlpCompletionModel<f32>;

    fn extract_file(source: &str, cfg: &ExtractionConfig, _seed: u64, _origin: &str) -> codeshift::Result<Vec<CbowSample>> {
        // A one-token file has nothing but padding around its only token.
        let mut samples = cbow_samples_from_source(source, cfg)?;
        samples.retain(|s| s.context.iter().any(|t| t != PAD));
        Ok(samples)
    }

    fn write_contexts(layout: &Layout, shift: ShiftKind, header: &str, splits: &[(String, Vec<CbowSample>)]) -> Result<(), CliError> {
        for (split, samples) in splits {
            write(&layout.contexts(shift, Task::Cc, split), write_cbow_samples(Some(header), samples))?;
        }
        Ok(())
    }

    fn read_contexts(layout: &Layout, shift: ShiftKind, split: &str) -> Result<Vec<CbowSample>, CliError> {
        let text = contexts_text(layout, shift, Task::Cc, split)?;
        Ok(read_cbow_samples(&text, Path::new(&Layout::contexts_rel(shift, Task::Cc, split)))?)
    }

    fn truth(s: &CbowSample) -> &str {
        &s.target
    }

    fn build_vocabs(train: &[CbowSample], min_count: usize) -> codeshift::Result<CcVocab> {
        CcVocab::build(train, min_count)
    }

    fn encode(v: &CcVocab, s: &CbowSample) -> EncodedCbow {
        v.encode(s)
    }

    fn labels(v: &CcVocab) -> &Vocabulary {
        &v.tokens
    }

    fn new_model(v: &CcVocab, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> MlpCompletionModel<f32> {
        MlpCompletionModel::new(v.tokens.len(), cfg.embedding_dim, rng)
    }

    fn to_checkpoint(m: &MlpCompletionModel<f32>, v: &CcVocab, meta: &ModelMeta) -> Checkpoint {
        m.to_checkpoint(v, meta)
    }

    fn from_checkpoint(ck: &Checkpoint) -> codeshift::Result<(MlpCompletionModel<f32>, CcVocab, ModelMeta)> {
        MlpCompletionModel::from_checkpoint(ck)
    }
}

/// Split assignment as persisted under `splits/`.
#[derive(Debug, Serialize, Deserialize)]
struct SplitsDoc {
    config_hash: String,
    config: serde_json::Value,
    assignment: SplitAssignment,
}

pub fn make_splits(eff: &Effective, layout: &Layout, shift: ShiftKind) -> Result<(), CliError> {
    let path = eff.manifest_path(shift)?;
    let manifest = corpus::load_manifest(&path)?;
    if manifest.shift_kind != shift {
        return Err(CliError::Validation(format!(
            "{} declares shift_kind {}, but is configured as the {shift} manifest",
            path.display(),
            manifest.shift_kind
        )));
    }
    let mut assignment = corpus::assign_splits(&manifest, eff.config.val_fraction)?;
    // Persist roots relative to the config so the artifact is location-free.
    assignment.base_dir = eff.config.manifests[&shift].parent().map(Path::to_path_buf).unwrap_or_default();
    for (name, files) in &assignment.splits {
        log::info!("{shift}/{name}: {} files", files.len());
    }
    let doc = SplitsDoc { config_hash: eff.hash.clone(), config: eff.echo()["config"].clone(), assignment };
    write(&layout.splits(shift), to_json(&doc))
}

fn load_splits(eff: &Effective, layout: &Layout, shift: ShiftKind) -> Result<SplitAssignment, CliError> {
    let path = layout.splits(shift);
    let doc: SplitsDoc = serde_json::from_slice(&read_artifact(&path, "make-splits")?)
        .map_err(|e| CliError::Validation(format!("{} is malformed: {e}", path.display())))?;
    let mut a = doc.assignment;
    a.base_dir = eff.base_dir.join(&a.base_dir);
    Ok(a)
}

/// Validation first, then the test splits: the splits that get scored.
fn scored_splits(a: &SplitAssignment) -> Vec<String> {
    std::iter::once(VALIDATION.to_string()).chain(a.test_split_names().map(str::to_string)).collect()
}

pub fn extract<T: TaskIo>(eff: &Effective, layout: &Layout, shift: ShiftKind) -> Result<(), CliError> {
    let assignment = load_splits(eff, layout, shift)?;
    let cfg = &eff.config.extraction;
    let mut out = Vec::new();
    for split in assignment.split_names() {
        let (mut samples, mut skipped) = (Vec::new(), 0usize);
        for item in corpus::iterate_samples(&assignment, split, eff.config.seed)? {
            let (file, text) = item?;
            let origin = file.source.to_string_lossy().replace('\\', "/");
            match T::extract_file(&text, cfg, eff.config.seed, &origin) {
                Ok(s) => samples.extend(s),
                Err(e) => {
                    log::warn!("skipping {origin}: {e}");
                    skipped += 1;
                }
            }
        }
        if samples.is_empty() {
            return Err(CliError::Validation(format!("{shift}/{}/{split}: no samples extracted", T::TASK)));
        }
        log::info!("{shift}/{}/{split}: {} samples ({skipped} files skipped)", T::TASK, samples.len());
        out.push((split.to_string(), samples));
    }
    T::write_contexts(layout, shift, &eff.header(), &out)
}

fn meta_for(eff: &Effective, task: Task) -> ModelMeta {
    ModelMeta { task, train: eff.config.train.get(task).clone(), echo: eff.echo() }
}

pub fn train_model<T: TaskIo>(eff: &Effective, layout: &Layout, shift: ShiftKind) -> Result<(), CliError> {
    let train_raw = T::read_contexts(layout, shift, TRAIN)?;
    let val_raw = T::read_contexts(layout, shift, VALIDATION)?;
    let vocabs = T::build_vocabs(&train_raw, eff.config.extraction.min_count)?;
    let train_x: Vec<_> = train_raw.iter().map(|s| T::encode(&vocabs, s)).collect();
    let val_x: Vec<_> = val_raw.iter().map(|s| T::encode(&vocabs, s)).collect();
    let cfg = eff.config.train.get(T::TASK);
    let mut model = T::new_model(&vocabs, cfg, &mut rng_for(cfg.seed, &format!("init-{shift}-{}", T::TASK)));
    let logs = train(&mut model, &train_x, &val_x, cfg)?;
    if let Some(last) = logs.last() {
        log::info!(
            "{shift}/{}: train acc {:.2}, validation acc {:.2}",
            T::TASK,
            last.train_acc,
            last.val_acc.unwrap_or(f64::NAN)
        );
    }
    let ck = T::to_checkpoint(&model, &vocabs, &meta_for(eff, T::TASK));
    write(&layout.model(shift, T::TASK), ck.to_bytes())?;
    write(&layout.train_log(shift, T::TASK), epoch_log_csv(Some(&eff.header()), &logs))
}

struct Loaded<T: TaskIo> {
    model: T::Model,
    vocabs: T::Vocabs,
}

fn load_model<T: TaskIo>(eff: &Effective, layout: &Layout, shift: ShiftKind) -> Result<Loaded<T>, CliError> {
    let bytes = read_artifact(&layout.model(shift, T::TASK), "train")?;
    let (model, vocabs, meta) = T::from_checkpoint(&Checkpoint::from_bytes(&bytes)?)?;
    let trained_with = meta.echo.get("config_hash").and_then(|h| h.as_str()).unwrap_or("");
    if trained_with != eff.hash {
        return Err(CliError::Validation(format!(
            "checkpoint {} was trained under config {trained_with}, not {}",
            layout.model(shift, T::TASK).display(),
            eff.hash
        )));
    }
    Ok(Loaded { model, vocabs })
}

/// One split ready for scoring.
struct Prepared<I> {
    split: String,
    inputs: Vec<I>,
    ids: Vec<String>,
    truths: Vec<String>,
}

type Input<T> = <<T as TaskIo>::Model as TaskModel<f32>>::Input;

fn prepare<T: TaskIo>(layout: &Layout, shift: ShiftKind, split: &str, vocabs: &T::Vocabs) -> Result<Prepared<Input<T>>, CliError> {
    let raw = T::read_contexts(layout, shift, split)?;
    let rel = Layout::contexts_rel(shift, T::TASK, split);
    Ok(Prepared {
        split: split.to_string(),
        inputs: raw.iter().map(|s| T::encode(vocabs, s)).collect(),
        ids: (1..=raw.len()).map(|i| format!("{rel}:{i:06}")).collect(),
        truths: raw.iter().map(|s| T::truth(s).to_string()).collect(),
    })
}

/// Which estimators and variants a `score`/`sweep`/`filter` call covers.
#[derive(Debug, Clone)]
pub struct Selection {
    pub methods: Vec<Method>,
    pub variant: Option<String>,
}

impl Selection {
    pub fn parse(method: &str, variant: Option<String>) -> Result<Selection, CliError> {
        let methods = if method == "all" {
            Method::ALL.to_vec()
        } else {
            vec![method.parse::<Method>().map_err(|e| CliError::Usage(e.to_string()))?]
        };
        if let Some(v) = &variant {
            let ok = methods.iter().any(|m| m.variants().contains(&v.as_str()));
            if !ok {
                let names: Vec<_> = methods.iter().map(|m| m.as_str()).collect();
                return Err(CliError::Usage(format!("variant `{v}` does not belong to {}", names.join(", "))));
            }
        }
        Ok(Selection { methods, variant })
    }

    pub fn variants(&self, method: Method) -> Vec<&'static str> {
        method.variants().iter().copied().filter(|v| self.variant.as_deref().is_none_or(|want| want == *v)).collect()
    }
}

/// Estimator state fitted during `score`.
#[derive(Debug, Serialize, Deserialize)]
struct TemperatureDoc {
    config_hash: String,
    fit: TemperatureFit,
}

fn fit_and_save_temperature<T: TaskIo>(eff: &Effective, layout: &Layout, shift: ShiftKind, model: &T::Model, val: &[Input<T>]) -> Result<f64, CliError> {
    let fit = fit_temperature(model, val)?;
    log::info!("{shift}/{}: T = {:.4} (NLL {:.4} -> {:.4})", T::TASK, fit.temperature, fit.nll_at_one, fit.nll);
    let t = fit.temperature;
    write(&layout.temperature(shift, T::TASK), to_json(&TemperatureDoc { config_hash: eff.hash.clone(), fit }))?;
    Ok(t)
}

fn saved_temperature(eff: &Effective, layout: &Layout, shift: ShiftKind, task: Task) -> Result<f64, CliError> {
    let path = layout.temperature(shift, task);
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "missing estimator state: temperature not fitted ({} absent); run `codeshift score --method temp` first",
            path.display()
        )));
    }
    let doc: TemperatureDoc = serde_json::from_slice(&read_artifact(&path, "score --method temp")?)
        .map_err(|e| CliError::Validation(format!("{} is malformed: {e}", path.display())))?;
    check_hash(&path, &doc.config_hash, eff)?;
    Ok(doc.fit.temperature)
}

fn saved_probes(eff: &Effective, layout: &Layout, shift: ShiftKind, task: Task) -> Result<ProbeSet, CliError> {
    let path = layout.probes(shift, task);
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "missing estimator state: Dissector probes not trained ({} absent); run `codeshift score --method dissector` first",
            path.display()
        )));
    }
    let probes = ProbeSet::from_checkpoint(&Checkpoint::from_bytes(&read_artifact(&path, "score")?)?)?;
    if probes.config != eff.probe_config() {
        return Err(CliError::Validation(format!("{} was trained with different probe settings", path.display())));
    }
    Ok(probes)
}

fn check_hash(path: &Path, found: &str, eff: &Effective) -> Result<(), CliError> {
    if found != eff.hash {
        return Err(CliError::Validation(format!("{} belongs to config {found}, not {}", path.display(), eff.hash)));
    }
    Ok(())
}

/// Estimator state shared by every split of one `score` run.
struct State {
    temperature: Option<f64>,
    probes: Option<ProbeSet>,
}

fn run_estimator<M: TaskModel<f32>>(
    eff: &Effective,
    model: &M,
    state: &State,
    method: Method,
    variant: &str,
    split: &str,
    inputs: &[M::Input],
) -> Result<(Vec<Scored>, Option<String>), CliError> {
    let e = &eff.config.estimators;
    let seed = eff.config.seed;
    let missing = |what: &str| CliError::Validation(format!("missing estimator state: {what}"));
    Ok(match method {
        Method::Vanilla => (uncertainty::vanilla(model, inputs)?, None),
        Method::TempScale => {
            let t = state.temperature.ok_or_else(|| missing("temperature"))?;
            (temp_scale(model, t, inputs)?, None)
        }
        Method::McDropout => {
            let s = derive_seed(seed, &format!("mc-{split}"));
            (mc_dropout(model, inputs, e.mc_passes, e.mc_dropout, s)?, None)
        }
        Method::MMutant => {
            let op: MutationOperator = variant.parse()?;
            let (scored, notes) = mmutant(model, inputs, op, e.mutation_degree, e.mutants, seed)?;
            (scored, (!notes.is_empty()).then(|| notes.join("; ")))
        }
        Method::Dissector => {
            let probes = state.probes.as_ref().ok_or_else(|| missing("Dissector probes"))?;
            let growth: Growth = variant.parse()?;
            (dissector(model, probes, growth, inputs)?, None)
        }
    })
}

fn score_comments(eff: &Effective, shift: ShiftKind, task: Task, method: Method, variant: &str, split: &str) -> Vec<String> {
    let mut c = vec![eff.header(), format!("task={task} shift={shift} method={method} split={split}")];
    if !variant.is_empty() {
        c[1].push_str(&format!(" variant={variant}"));
    }
    c
}

pub fn score<T: TaskIo>(eff: &Effective, layout: &Layout, shift: ShiftKind, sel: &Selection) -> Result<(), CliError> {
    let assignment = load_splits(eff, layout, shift)?;
    let Loaded { model, vocabs } = load_model::<T>(eff, layout, shift)?;
    let splits: Vec<Prepared<Input<T>>> = scored_splits(&assignment)
        .iter()
        .map(|s| prepare::<T>(layout, shift, s, &vocabs))
        .collect::<Result<_, _>>()?;

    let mut state = State { temperature: None, probes: None };
    if sel.methods.contains(&Method::TempScale) {
        state.temperature = Some(fit_and_save_temperature::<T>(eff, layout, shift, &model, &splits[0].inputs)?);
    }
    if sel.methods.contains(&Method::Dissector) {
        let train = prepare::<T>(layout, shift, TRAIN, &vocabs)?;
        let probes = train_probes(&model, &train.inputs, &eff.probe_config())?;
        write(&layout.probes(shift, T::TASK), probes.to_checkpoint().to_bytes())?;
        state.probes = Some(probes);
    }

    for &method in &sel.methods {
        for variant in sel.variants(method) {
            for p in &splits {
                let (scored, note) = run_estimator(eff, &model, &state, method, variant, &p.split, &p.inputs)?;
                let recs = records(method, variant, &p.split, &p.ids, &p.truths, T::labels(&vocabs), &scored, note.as_deref())?;
                let text = write_scores_csv(&score_comments(eff, shift, T::TASK, method, variant, &p.split), &recs)?;
                write(&layout.scores(shift, T::TASK, method, variant, &p.split), text)?;
            }
        }
    }
    Ok(())
}

/// Every scores CSV for one (shift, task), in file-name order.
fn load_scores(layout: &Layout, shift: ShiftKind, task: Task) -> Result<Vec<(PathBuf, Vec<ConfidenceRecord>)>, CliError> {
    let dir = layout.scores_dir(shift, task);
    let entries = match std::fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::Validation(format!("missing artifact {}; run `codeshift score` first", dir.display())))
        }
        Err(e) => return Err(CliError::Runtime(format!("cannot list {}: {e}", dir.display()))),
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Validation(format!("no scores under {}; run `codeshift score` first", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let text = read_artifact_text(&p, "score")?;
            let recs = read_scores_csv(&text, &p)?;
            Ok((p, recs))
        })
        .collect()
}

fn table_for(layout: &Layout, shift: ShiftKind, task: Task) -> Result<ReportTable, CliError> {
    let all: Vec<ConfidenceRecord> = load_scores(layout, shift, task)?.into_iter().flat_map(|(_, r)| r).collect();
    Ok(ReportTable::build(task, shift, &all)?)
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    config_hash: &'a str,
    config: serde_json::Value,
    #[serde(flatten)]
    table: &'a ReportTable,
}

fn write_report(eff: &Effective, json: &Path, csv: &Path, table: &ReportTable) -> Result<(), CliError> {
    let doc = ReportDoc { config_hash: &eff.hash, config: eff.echo()["config"].clone(), table };
    write(json, to_json(&doc))?;
    write(csv, format!("# {}\n{}", eff.header(), table.to_csv()))
}

pub fn eval(eff: &Effective, layout: &Layout, shift: ShiftKind, task: Task) -> Result<(), CliError> {
    let table = table_for(layout, shift, task)?;
    let dir = layout.reports_dir(shift, task);
    write_report(eff, &dir.join("eval.json"), &dir.join("eval.csv"), &table)?;
    for a in &table.accuracy {
        println!("{task} {shift} {}: {}", a.split, a.display);
    }
    Ok(())
}

pub fn sweep(eff: &Effective, layout: &Layout, shift: ShiftKind, task: Task, sel: &Selection, split: Option<&str>) -> Result<(), CliError> {
    let mut written = 0;
    for (_, recs) in load_scores(layout, shift, task)? {
        let Some(first) = recs.first() else { continue };
        let (method, variant, s) = (first.method, first.variant.clone(), first.split.clone());
        if !sel.methods.contains(&method) || !sel.variants(method).contains(&variant.as_str()) || split.is_some_and(|w| w != s) {
            continue;
        }
        let points = threshold_sweep(&recs);
        let comments = score_comments(eff, shift, task, method, &variant, &s);
        write(&layout.sweep(shift, task, method, &variant, &s), sweep_csv(&comments, &points))?;
        written += 1;
    }
    if written == 0 {
        return Err(CliError::Validation(format!("no scores match the selection for {shift}/{task}; run `codeshift score` first")));
    }
    Ok(())
}

pub struct FilterArgs<'a> {
    pub method: Method,
    pub variant: Option<&'a str>,
    pub split: &'a str,
    pub threshold: f64,
}

/// Re-scores `split` with the saved model and estimator state and partitions
/// it at `threshold`.
pub fn filter<T: TaskIo>(eff: &Effective, layout: &Layout, shift: ShiftKind, args: &FilterArgs) -> Result<(), CliError> {
    let method = args.method;
    let variant = match (method.variants(), args.variant) {
        ([""], None) => "",
        ([""], Some(v)) => return Err(CliError::Usage(format!("{method} has no variants (got `{v}`)"))),
        (vs, Some(v)) if vs.contains(&v) => v,
        (vs, _) => return Err(CliError::Usage(format!("{method} needs --variant (one of {})", vs.join(", ")))),
    };
    if !args.threshold.is_finite() {
        return Err(CliError::Usage(format!("threshold {} is not a number", args.threshold)));
    }
    let Loaded { model, vocabs } = load_model::<T>(eff, layout, shift)?;
    let state = State {
        temperature: if method == Method::TempScale { Some(saved_temperature(eff, layout, shift, T::TASK)?) } else { None },
        probes: if method == Method::Dissector { Some(saved_probes(eff, layout, shift, T::TASK)?) } else { None },
    };
    let p = prepare::<T>(layout, shift, args.split, &vocabs)?;
    let (scored, note) = run_estimator(eff, &model, &state, method, variant, &p.split, &p.inputs)?;
    let recs = records(method, variant, &p.split, &p.ids, &p.truths, T::labels(&vocabs), &scored, note.as_deref())?;
    let out = input_filter(&recs, args.threshold);
    let mut comments = score_comments(eff, shift, T::TASK, method, variant, &p.split);
    comments.push(format!("threshold={}", args.threshold));
    for (side, recs) in [("accepted", &out.accepted), ("rejected", &out.rejected)] {
        write(&layout.filter(shift, T::TASK, method, variant, &p.split, side), write_scores_csv(&comments, recs)?)?;
    }
    println!("accepted {} rejected {} (threshold {})", out.accepted.len(), out.rejected.len(), args.threshold);
    Ok(())
}

/// Merges every (shift, task) with scores into the run-level report.
pub fn report(eff: &Effective, layout: &Layout, shifts: &[ShiftKind], tasks: &[Task]) -> Result<(), CliError> {
    let mut table = ReportTable::default();
    let mut found = 0;
    for &shift in shifts {
        for &task in tasks {
            if !layout.scores_dir(shift, task).exists() {
                continue;
            }
            table.merge(table_for(layout, shift, task)?);
            found += 1;
        }
    }
    if found == 0 {
        return Err(CliError::Validation(format!(
            "no scores under {}; run `codeshift score` first",
            layout.root().join("scores").display()
        )));
    }
    write_report(eff, &layout.report("json"), &layout.report("csv"), &table)?;
    write(&layout.accuracy(), format!("# {}\n{}", eff.header(), table.accuracy_csv()))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}
