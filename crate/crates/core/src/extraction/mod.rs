//! Feature extraction from Java sources: AST path contexts for method-name
//! prediction and token windows for code completion.

mod interchange;
mod lexer;
mod parser;
mod vocab;

use rand::seq::index;
use serde::{Deserialize, Serialize};

pub use interchange::{
    read_cbow_samples, read_method_samples, write_cbow_samples, write_method_samples, PathTable,
};
pub use lexer::{lex, tokenize_java, Token, TokenKind};
pub use parser::{parse_java_lite, AstNode};
pub use vocab::{build_vocab, Vocabulary, VocabularyBuilder, PAD, PAD_ID, UNK, UNK_ID};

use crate::error::Result;
use crate::seed;

/// Replaces the method's own name wherever it appears as a terminal.
pub const METHOD_NAME_SENTINEL: &str = "<METHOD>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub max_contexts: usize,
    /// Maximum number of AST nodes on a path, both endpoints' parents and
    /// the common ancestor included.
    pub max_path_len: usize,
    /// CBOW window radius.
    pub window: usize,
    pub min_count: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            max_contexts: 200,
            max_path_len: 9,
            window: 4,
            min_count: 1,
        }
    }
}

pub const UP: char = '↑';
pub const DOWN: char = '↓';

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathContext {
    pub left: String,
    pub path: String,
    pub right: String,
}

impl PathContext {
    /// The same context read from right to left.
    pub fn reversed(&self) -> PathContext {
        let mut out = String::with_capacity(self.path.len());
        let mut parts = Vec::new();
        let mut current = String::new();
        for c in self.path.chars() {
            if c == UP || c == DOWN {
                parts.push((std::mem::take(&mut current), Some(c)));
            } else {
                current.push(c);
            }
        }
        parts.push((current, None));
        for (i, (kind, _)) in parts.iter().enumerate().rev() {
            out.push_str(kind);
            if i > 0 {
                let arrow = parts[i - 1].1.unwrap();
                out.push(if arrow == UP { DOWN } else { UP });
            }
        }
        PathContext {
            left: self.right.clone(),
            path: out,
            right: self.left.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSample {
    pub label: String,
    pub contexts: Vec<PathContext>,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CbowSample {
    pub target: String,
    pub context: Vec<String>,
}

/// Terminal text safe for the `left,path,right` interchange format.
pub fn normalize_terminal(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_whitespace() || c == ',' { '_' } else { c })
        .collect()
}

/// Token text safe for the space-separated CBOW interchange format.
pub fn normalize_token(text: &str) -> String {
    text.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect()
}

struct FlatNode<'a> {
    kind: &'a str,
    parent: Option<usize>,
    depth: usize,
}

fn flatten<'a>(node: &'a AstNode, parent: Option<usize>, depth: usize, nodes: &mut Vec<FlatNode<'a>>, leaves: &mut Vec<(usize, &'a AstNode)>) {
    let id = nodes.len();
    nodes.push(FlatNode {
        kind: &node.kind,
        parent,
        depth,
    });
    if node.is_leaf() {
        leaves.push((id, node));
    }
    for c in &node.children {
        flatten(c, Some(id), depth + 1, nodes, leaves);
    }
}

fn leaf_text(node: &AstNode) -> &str {
    node.token.as_ref().map(|t| t.text.as_str()).unwrap_or(&node.kind)
}

/// All path contexts of a method subtree, before capping.
fn method_contexts(method: &AstNode, name: &str, max_path_len: usize) -> Vec<PathContext> {
    let mut nodes = Vec::new();
    let mut leaves = Vec::new();
    flatten(method, None, 0, &mut nodes, &mut leaves);

    let terminals: Vec<String> = leaves
        .iter()
        .map(|(_, leaf)| {
            let text = leaf_text(leaf);
            if text == name {
                METHOD_NAME_SENTINEL.to_string()
            } else {
                normalize_terminal(text)
            }
        })
        .collect();

    let mut out = Vec::new();
    for i in 0..leaves.len() {
        for j in (i + 1)..leaves.len() {
            let (Some(mut a), Some(mut b)) = (nodes[leaves[i].0].parent, nodes[leaves[j].0].parent) else {
                continue;
            };
            let mut up = vec![a];
            let mut down = vec![b];
            while nodes[a].depth > nodes[b].depth {
                a = nodes[a].parent.unwrap();
                up.push(a);
            }
            while nodes[b].depth > nodes[a].depth {
                b = nodes[b].parent.unwrap();
                down.push(b);
            }
            while a != b {
                a = nodes[a].parent.unwrap();
                b = nodes[b].parent.unwrap();
                up.push(a);
                down.push(b);
            }
            // `up` and `down` both end at the common ancestor.
            let len = up.len() + down.len() - 1;
            if len > max_path_len {
                continue;
            }
            let mut path = String::new();
            for (k, id) in up.iter().enumerate() {
                if k > 0 {
                    path.push(UP);
                }
                path.push_str(nodes[*id].kind);
            }
            for id in down.iter().rev().skip(1) {
                path.push(DOWN);
                path.push_str(nodes[*id].kind);
            }
            out.push(PathContext {
                left: terminals[i].clone(),
                path,
                right: terminals[j].clone(),
            });
        }
    }
    out
}

/// One sample per method with a body. Methods yielding no contexts are
/// dropped; methods with more than `max_contexts` are subsampled with a
/// stream keyed by `(seed, origin, method index)`.
pub fn extract_method_samples(tree: &AstNode, cfg: &ExtractionConfig, seed: u64, origin: &str) -> Vec<MethodSample> {
    let mut methods = Vec::new();
    tree.find_all("MethodDecl", &mut methods);
    let mut out = Vec::new();
    for (index, method) in methods.into_iter().enumerate() {
        let has_body = method.children.last().is_some_and(|c| c.kind == "Block");
        let Some(name_leaf) = method.children.iter().find(|c| c.kind == "Name" && c.is_leaf()) else {
            continue;
        };
        if !has_body {
            continue;
        }
        let name = leaf_text(name_leaf).to_string();
        let mut contexts = method_contexts(method, &name, cfg.max_path_len);
        if contexts.is_empty() {
            continue;
        }
        if contexts.len() > cfg.max_contexts {
            let mut rng = seed::rng_for(seed, &format!("{origin}#{index}"));
            let mut keep = index::sample(&mut rng, contexts.len(), cfg.max_contexts).into_vec();
            keep.sort_unstable();
            contexts = keep.into_iter().map(|k| contexts[k].clone()).collect();
        }
        out.push(MethodSample {
            label: normalize_terminal(&name),
            contexts,
            origin: origin.to_string(),
        });
    }
    out
}

pub fn extract_cbow_samples(tokens: &[Token], window: usize) -> Vec<CbowSample> {
    let texts: Vec<String> = tokens.iter().map(|t| normalize_token(&t.text)).collect();
    let n = texts.len() as isize;
    let w = window as isize;
    (0..n)
        .map(|i| {
            let mut context = Vec::with_capacity(2 * window);
            for j in (i - w)..=(i + w) {
                if j == i {
                    continue;
                }
                context.push(if j < 0 || j >= n { PAD.to_string() } else { texts[j as usize].clone() });
            }
            CbowSample {
                target: texts[i as usize].clone(),
                context,
            }
        })
        .collect()
}

/// Tokenizes, parses and extracts method samples from one source file.
pub fn method_samples_from_source(source: &str, cfg: &ExtractionConfig, seed: u64, origin: &str) -> Result<Vec<MethodSample>> {
    let tokens = tokenize_java(source)?;
    let tree = parse_java_lite(&tokens)?;
    Ok(extract_method_samples(&tree, cfg, seed, origin))
}

pub fn cbow_samples_from_source(source: &str, cfg: &ExtractionConfig) -> Result<Vec<CbowSample>> {
    Ok(extract_cbow_samples(&tokenize_java(source)?, cfg.window))
}
