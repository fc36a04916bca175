//! Where every artifact lives under `<work_dir>/<config hash>/`.

use std::path::{Path, PathBuf};

use codeshift::corpus::ShiftKind;
use codeshift::tasks::Task;
use codeshift::uncertainty::Method;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: PathBuf) -> Self {
        Layout { root }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn splits(&self, shift: ShiftKind) -> PathBuf {
        self.root.join("splits").join(format!("{shift}.json"))
    }

    /// Relative to the run root, so sample ids do not depend on where the
    /// work directory is.
    pub fn contexts_rel(shift: ShiftKind, task: Task, split: &str) -> String {
        format!("contexts/{shift}/{task}/{split}.txt")
    }

    pub fn contexts(&self, shift: ShiftKind, task: Task, split: &str) -> PathBuf {
        self.root.join(Self::contexts_rel(shift, task, split))
    }

    pub fn path_table(&self, shift: ShiftKind) -> PathBuf {
        self.root.join("contexts").join(shift.as_str()).join("cs").join("paths.tsv")
    }

    pub fn checkpoint_dir(&self, shift: ShiftKind, task: Task) -> PathBuf {
        self.root.join("checkpoints").join(shift.as_str()).join(task.as_str())
    }

    pub fn model(&self, shift: ShiftKind, task: Task) -> PathBuf {
        self.checkpoint_dir(shift, task).join("model.ckpt")
    }

    pub fn train_log(&self, shift: ShiftKind, task: Task) -> PathBuf {
        self.checkpoint_dir(shift, task).join("train_log.csv")
    }

    pub fn temperature(&self, shift: ShiftKind, task: Task) -> PathBuf {
        self.checkpoint_dir(shift, task).join("temperature.json")
    }

    pub fn probes(&self, shift: ShiftKind, task: Task) -> PathBuf {
        self.checkpoint_dir(shift, task).join("probes.ckpt")
    }

    pub fn scores_dir(&self, shift: ShiftKind, task: Task) -> PathBuf {
        self.root.join("scores").join(shift.as_str()).join(task.as_str())
    }

    pub fn scores(&self, shift: ShiftKind, task: Task, method: Method, variant: &str, split: &str) -> PathBuf {
        self.scores_dir(shift, task).join(format!("{}_{split}.csv", stem(method, variant)))
    }

    pub fn reports_dir(&self, shift: ShiftKind, task: Task) -> PathBuf {
        self.root.join("reports").join(shift.as_str()).join(task.as_str())
    }

    pub fn sweep(&self, shift: ShiftKind, task: Task, method: Method, variant: &str, split: &str) -> PathBuf {
        self.reports_dir(shift, task).join(format!("sweep_{}_{split}.csv", stem(method, variant)))
    }

    pub fn filter(&self, shift: ShiftKind, task: Task, method: Method, variant: &str, split: &str, side: &str) -> PathBuf {
        self.reports_dir(shift, task).join(format!("filter_{}_{split}_{side}.csv", stem(method, variant)))
    }

    pub fn report(&self, ext: &str) -> PathBuf {
        self.root.join("reports").join(format!("report.{ext}"))
    }

    pub fn accuracy(&self) -> PathBuf {
        self.root.join("reports").join("accuracy.csv")
    }
}

pub fn stem(method: Method, variant: &str) -> String {
    if variant.is_empty() {
        method.as_str().to_string()
    } else {
        format!("{method}_{variant}")
    }
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Reads an artifact an earlier stage should have produced; a missing file
/// names the stage to run.
pub fn read_artifact(path: &Path, stage: &str) -> Result<Vec<u8>, CliError> {
    match std::fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CliError::Validation(format!(
            "missing artifact {}; run `codeshift {stage}` first",
            path.display()
        ))),
        Err(e) => Err(CliError::Runtime(format!("cannot read {}: {e}", path.display()))),
    }
}

pub fn read_artifact_text(path: &Path, stage: &str) -> Result<String, CliError> {
    String::from_utf8(read_artifact(path, stage)?)
        .map_err(|_| CliError::Validation(format!("{} is not UTF-8", path.display())))
}
