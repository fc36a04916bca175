//! Shift manifests and split assignment.
//!
//! A manifest names snapshot directories (one project at one version) and
//! groups them into splits. Each snapshot directory carries a
//! `snapshot.json` listing its files, their authors and the release date:
//!
//! ```json
//! { "project": "alpha", "version": "v1", "release_time": "2020-01-01",
//!   "files": [ { "path": "src/A.java", "author": "kimchy" } ] }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const TRAIN: &str = "train";
pub const VALIDATION: &str = "validation";
pub const DEFAULT_VAL_FRACTION: f64 = 0.1;
const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    Timeline,
    Project,
    Author,
}

impl ShiftKind {
    pub const ALL: [ShiftKind; 3] = [ShiftKind::Timeline, ShiftKind::Project, ShiftKind::Author];

    pub fn as_str(self) -> &'static str {
        match self {
            ShiftKind::Timeline => "timeline",
            ShiftKind::Project => "project",
            ShiftKind::Author => "author",
        }
    }
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "timeline" => Ok(ShiftKind::Timeline),
            "project" => Ok(ShiftKind::Project),
            "author" => Ok(ShiftKind::Author),
            other => Err(Error::InvalidArgument(format!("unknown shift kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub path: String,
    pub author: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectSnapshot {
    pub project: String,
    pub version: String,
    pub release_time: NaiveDate,
    /// Snapshot directory relative to the manifest.
    pub root: PathBuf,
    pub files: Vec<SnapshotFile>,
}

#[derive(Debug, Deserialize)]
struct SnapshotDoc {
    project: String,
    version: String,
    release_time: String,
    files: Vec<SnapshotFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotSelector {
    pub project: String,
    pub version: String,
    pub root: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
}

/// Split list that keeps document order and reports duplicate names instead
/// of silently keeping the last one.
#[derive(Debug, Default)]
struct OrderedSplits(Vec<(String, Vec<SnapshotSelector>)>, Vec<String>);

impl<'de> Deserialize<'de> for OrderedSplits {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct SplitVisitor;

        impl<'de> Visitor<'de> for SplitVisitor {
            type Value = OrderedSplits;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of split name to snapshot selectors")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = OrderedSplits::default();
                while let Some((name, selectors)) = map.next_entry::<String, Vec<SnapshotSelector>>()? {
                    if out.0.iter().any(|(n, _)| *n == name) {
                        out.1.push(name);
                    } else {
                        out.0.push((name, selectors));
                    }
                }
                Ok(out)
            }
        }

        deserializer.deserialize_map(SplitVisitor)
    }
}

#[derive(Debug, Deserialize)]
struct ManifestDoc {
    shift_kind: ShiftKind,
    seed: u64,
    splits: OrderedSplits,
}

#[derive(Debug, Clone)]
pub struct ShiftManifest {
    pub shift_kind: ShiftKind,
    pub seed: u64,
    pub splits: Vec<(String, Vec<SnapshotSelector>)>,
    pub snapshots: BTreeMap<(String, String), ProjectSnapshot>,
    /// Directory containing the manifest; all roots resolve against it.
    pub base_dir: PathBuf,
}

impl ShiftManifest {
    pub fn split_names(&self) -> impl Iterator<Item = &str> {
        self.splits.iter().map(|(n, _)| n.as_str())
    }

    pub fn test_split_names(&self) -> impl Iterator<Item = &str> {
        self.split_names().filter(|n| n.starts_with("test"))
    }

    fn selected_files(&self, selectors: &[SnapshotSelector]) -> Vec<FileRef> {
        let mut out = Vec::new();
        for sel in selectors {
            let snap = &self.snapshots[&(sel.project.clone(), sel.version.clone())];
            for f in &snap.files {
                if sel.author.as_ref().is_some_and(|a| *a != f.author) {
                    continue;
                }
                out.push(FileRef {
                    project: snap.project.clone(),
                    version: snap.version.clone(),
                    path: f.path.clone(),
                    author: f.author.clone(),
                    source: snap.root.join(&f.path),
                });
            }
        }
        out
    }
}

pub fn load_manifest(path: &Path) -> Result<ShiftManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ManifestDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let OrderedSplits(splits, duplicates) = doc.splits;

    if let Some(dup) = duplicates.first() {
        return Err(Error::Validation(format!("duplicate split name `{dup}`")));
    }
    if splits.is_empty() {
        return Err(Error::Validation("manifest has no splits".into()));
    }
    if !splits.iter().any(|(n, _)| n == TRAIN) {
        return Err(Error::Validation("manifest has no `train` split".into()));
    }
    if !splits.iter().any(|(n, _)| n.starts_with("test")) {
        return Err(Error::Validation("manifest has no split whose name starts with `test`".into()));
    }
    if splits.iter().any(|(n, _)| n == VALIDATION) {
        return Err(Error::Validation(
            "split name `validation` is reserved for the carve-out from `train`".into(),
        ));
    }

    let mut snapshots: BTreeMap<(String, String), ProjectSnapshot> = BTreeMap::new();
    for (name, selectors) in &splits {
        if selectors.is_empty() {
            return Err(Error::Validation(format!("split `{name}` selects no snapshots")));
        }
        for sel in selectors {
            if sel.author.is_some() && doc.shift_kind != ShiftKind::Author {
                return Err(Error::Validation(format!(
                    "split `{name}` has an author filter but shift_kind is {}",
                    doc.shift_kind
                )));
            }
            let key = (sel.project.clone(), sel.version.clone());
            match snapshots.get(&key) {
                Some(existing) if existing.root != sel.root => {
                    return Err(Error::Validation(format!(
                        "{}@{} refers to two roots: {} and {}",
                        sel.project,
                        sel.version,
                        existing.root.display(),
                        sel.root.display()
                    )));
                }
                Some(_) => {}
                None => {
                    let snap = load_snapshot(&base_dir, sel)?;
                    snapshots.insert(key, snap);
                }
            }
        }
    }

    let manifest = ShiftManifest {
        shift_kind: doc.shift_kind,
        seed: doc.seed,
        splits,
        snapshots,
        base_dir,
    };

    let mut seen: BTreeMap<PathBuf, &str> = BTreeMap::new();
    for (name, selectors) in &manifest.splits {
        for file in manifest.selected_files(selectors) {
            if let Some(prev) = seen.insert(file.source.clone(), name) {
                return Err(Error::Validation(format!(
                    "file {} appears in splits `{prev}` and `{name}`",
                    file.source.display()
                )));
            }
        }
    }
    Ok(manifest)
}

fn load_snapshot(base_dir: &Path, sel: &SnapshotSelector) -> Result<ProjectSnapshot> {
    let dir = base_dir.join(&sel.root);
    if !dir.is_dir() {
        return Err(Error::Validation(format!(
            "snapshot directory {} does not exist",
            dir.display()
        )));
    }
    let meta_path = dir.join(SNAPSHOT_FILE);
    let text = std::fs::read_to_string(&meta_path)
        .map_err(|_| Error::Validation(format!("missing {}", meta_path.display())))?;
    let doc: SnapshotDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    if doc.project != sel.project || doc.version != sel.version {
        return Err(Error::Validation(format!(
            "{} describes {}@{}, manifest expects {}@{}",
            meta_path.display(),
            doc.project,
            doc.version,
            sel.project,
            sel.version
        )));
    }
    let release_time = NaiveDate::parse_from_str(&doc.release_time, "%Y-%m-%d").map_err(|e| {
        Error::Validation(format!(
            "{}: bad release_time `{}`: {e}",
            meta_path.display(),
            doc.release_time
        ))
    })?;
    let mut paths = BTreeSet::new();
    for f in &doc.files {
        if !paths.insert(f.path.as_str()) {
            return Err(Error::Validation(format!(
                "{}: duplicate file path {}",
                meta_path.display(),
                f.path
            )));
        }
        if f.author.is_empty() {
            return Err(Error::Validation(format!(
                "{}: empty author for {}",
                meta_path.display(),
                f.path
            )));
        }
        let file_path = dir.join(&f.path);
        if !file_path.is_file() {
            return Err(Error::Validation(format!(
                "dangling file reference {}",
                file_path.display()
            )));
        }
    }
    Ok(ProjectSnapshot {
        project: doc.project,
        version: doc.version,
        release_time,
        root: sel.root.clone(),
        files: doc.files,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FileRef {
    pub project: String,
    pub version: String,
    pub path: String,
    pub author: String,
    /// Path relative to the manifest directory.
    pub source: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub shift_kind: ShiftKind,
    pub seed: u64,
    pub val_fraction: f64,
    pub base_dir: PathBuf,
    /// `train`, `validation`, then the test splits in manifest order.
    pub splits: Vec<(String, Vec<FileRef>)>,
}

impl SplitAssignment {
    pub fn split(&self, name: &str) -> Result<&[FileRef]> {
        self.splits
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, files)| files.as_slice())
            .ok_or_else(|| Error::UnknownSplit(name.to_string()))
    }

    pub fn split_names(&self) -> impl Iterator<Item = &str> {
        self.splits.iter().map(|(n, _)| n.as_str())
    }

    pub fn test_split_names(&self) -> impl Iterator<Item = &str> {
        self.split_names().filter(|n| n.starts_with("test"))
    }

    pub fn resolve(&self, file: &FileRef) -> PathBuf {
        self.base_dir.join(&file.source)
    }
}

pub fn assign_splits(manifest: &ShiftManifest, val_fraction: f64) -> Result<SplitAssignment> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let mut splits = Vec::with_capacity(manifest.splits.len() + 1);
    for (name, selectors) in &manifest.splits {
        let files = manifest.selected_files(selectors);
        if name == TRAIN {
            let mut files = files;
            files.shuffle(&mut seed::rng_for(manifest.seed, "validation-carve"));
            let n_val = (files.len() as f64 * val_fraction).round() as usize;
            if n_val == 0 || n_val >= files.len() {
                return Err(Error::Empty(format!(
                    "carving {val_fraction} of {} train files leaves an empty split",
                    files.len()
                )));
            }
            let train = files.split_off(n_val);
            splits.insert(0, (VALIDATION.to_string(), files));
            splits.insert(0, (TRAIN.to_string(), train));
        } else {
            if files.is_empty() {
                return Err(Error::Empty(format!("split `{name}` is empty after filtering")));
            }
            splits.push((name.clone(), files));
        }
    }
    Ok(SplitAssignment {
        shift_kind: manifest.shift_kind,
        seed: manifest.seed,
        val_fraction,
        base_dir: manifest.base_dir.clone(),
        splits,
    })
}

/// Files of `split` in a seed-determined order.
pub fn ordered_files<'a>(assignment: &'a SplitAssignment, split: &str, seed: u64) -> Result<Vec<&'a FileRef>> {
    let mut files: Vec<&FileRef> = assignment.split(split)?.iter().collect();
    files.shuffle(&mut seed::rng(seed));
    Ok(files)
}

/// Stream of `(file, contents)` for a split, ordered by `seed`.
pub fn iterate_samples<'a>(
    assignment: &'a SplitAssignment,
    split: &str,
    seed: u64,
) -> Result<impl Iterator<Item = Result<(&'a FileRef, String)>> + 'a> {
    let files = ordered_files(assignment, split, seed)?;
    Ok(files.into_iter().map(move |f| {
        let path = assignment.resolve(f);
        std::fs::read_to_string(&path)
            .map(|text| (f, text))
            .map_err(|e| Error::io(path, e))
    }))
}
