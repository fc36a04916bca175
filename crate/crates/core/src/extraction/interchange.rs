//! Line-oriented interchange formats for pre-extracted samples.
//!
//! Method samples: `label left,pathid,right left,pathid,right ...`
//! CBOW samples: `target ctx1 ctx2 ...`
//!
//! Lines starting with `#` are header comments. Path ids index a
//! [`PathTable`]; readers without a table keep the id as an opaque path token.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{CbowSample, MethodSample, PathContext};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathTable {
    paths: Vec<String>,
    index: HashMap<String, u32>,
}

impl PathTable {
    pub fn intern(&mut self, path: &str) -> u32 {
        if let Some(&id) = self.index.get(path) {
            return id;
        }
        let id = self.paths.len() as u32;
        self.paths.push(path.to_string());
        self.index.insert(path.to_string(), id);
        id
    }

    pub fn get(&self, id: u32) -> Option<&str> {
        self.paths.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// `id<TAB>path` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.paths.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{p}");
        }
        out
    }

    pub fn from_text(text: &str, source: &Path) -> Result<Self> {
        let mut table = PathTable::default();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, path) = line.split_once('\t').ok_or_else(|| malformed(source, n, "expected `id<TAB>path`"))?;
            let id: usize = id.parse().map_err(|_| malformed(source, n, "bad path id"))?;
            if id != table.len() {
                return Err(malformed(source, n, "path ids must be dense and ordered"));
            }
            table.intern(path);
        }
        Ok(table)
    }
}

fn malformed(source: &Path, line: usize, message: &str) -> Error {
    Error::Parse {
        path: source.to_path_buf(),
        message: format!("line {}: {message}", line + 1),
    }
}

pub fn write_method_samples(header: Option<&str>, samples: &[MethodSample], paths: &mut PathTable) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        let _ = writeln!(out, "# {h}");
    }
    for s in samples {
        out.push_str(&s.label);
        for c in &s.contexts {
            let id = paths.intern(&c.path);
            let _ = write!(out, " {},{},{}", c.left, id, c.right);
        }
        out.push('\n');
    }
    out
}

pub fn read_method_samples(text: &str, paths: Option<&PathTable>, source: &Path) -> Result<Vec<MethodSample>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(' ');
        let label = fields.next().filter(|l| !l.is_empty()).ok_or_else(|| malformed(source, n, "missing label"))?;
        let mut contexts = Vec::new();
        for field in fields {
            let mut parts = field.splitn(3, ',');
            let (Some(left), Some(path), Some(right)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(malformed(source, n, "context must be `left,pathid,right`"));
            };
            let path = match paths {
                Some(table) => {
                    let id: u32 = path.parse().map_err(|_| malformed(source, n, "path id is not an integer"))?;
                    table
                        .get(id)
                        .ok_or_else(|| malformed(source, n, "path id not in table"))?
                        .to_string()
                }
                None => path.to_string(),
            };
            contexts.push(PathContext {
                left: left.to_string(),
                path,
                right: right.to_string(),
            });
        }
        out.push(MethodSample {
            label: label.to_string(),
            contexts,
            origin: format!("{}:{}", source.display(), n + 1),
        });
    }
    Ok(out)
}

pub fn write_cbow_samples(header: Option<&str>, samples: &[CbowSample]) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        let _ = writeln!(out, "# {h}");
    }
    for s in samples {
        out.push_str(&s.target);
        for c in &s.context {
            out.push(' ');
            out.push_str(c);
        }
        out.push('\n');
    }
    out
}

pub fn read_cbow_samples(text: &str, source: &Path) -> Result<Vec<CbowSample>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(' ');
        let target = fields.next().filter(|t| !t.is_empty()).ok_or_else(|| malformed(source, n, "missing target"))?;
        let context: Vec<String> = fields.map(str::to_string).collect();
        if context.is_empty() || !context.len().is_multiple_of(2) {
            return Err(malformed(source, n, "context must hold 2·w tokens"));
        }
        out.push(CbowSample {
            target: target.to_string(),
            context,
        });
    }
    Ok(out)
}
