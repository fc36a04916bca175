//! Hermetic two-style Java corpus with timeline, project and author
//! manifests over it.
//!
//! Every method implements one of a fixed set of concepts and is named
//! after it, so both styles share a label space. Style A and style B differ
//! in identifier lexicon and in statement shapes (`for` vs `while`,
//! compound vs spelled-out assignment, early return vs result variable), so
//! a model trained on A sees B as a distribution shift, not as new labels.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::ShiftKind;
use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    A,
    B,
}

struct Lexicon {
    arrays: &'static [&'static str],
    lengths: &'static [&'static str],
    indices: &'static [&'static str],
    accs: &'static [&'static str],
    params: &'static [&'static str],
    classes: &'static [&'static str],
    hooks: &'static [&'static str],
}

const LEX_A: Lexicon = Lexicon {
    arrays: &["items", "values", "elements"],
    lengths: &["count", "size", "used"],
    indices: &["index", "pos", "cursor"],
    accs: &["total", "result", "current"],
    params: &["target", "value", "wanted"],
    classes: &["ItemList", "ValueStore", "ElementBag", "Registry", "Inventory"],
    hooks: &["checkState", "logAccess", "validate"],
};

const LEX_B: Lexicon = Lexicon {
    arrays: &["arr", "buf", "data"],
    lengths: &["n", "len", "cnt"],
    indices: &["k", "p", "q"],
    accs: &["acc", "res", "tmp"],
    params: &["x", "key", "v"],
    classes: &["Vec", "Buf", "Ring", "Blk", "Seq"],
    hooks: &["dbg", "trace", "chk"],
};

pub const CONCEPTS: [&str; 14] = [
    "sum",
    "max",
    "min",
    "contains",
    "indexOf",
    "countMatches",
    "isEmpty",
    "clear",
    "reverse",
    "average",
    "fill",
    "last",
    "swap",
    "grow",
];

struct Names {
    arr: &'static str,
    len: &'static str,
    i: &'static str,
    acc: &'static str,
    param: &'static str,
}

fn pick(rng: &mut ChaCha8Rng, xs: &'static [&'static str]) -> &'static str {
    xs.choose(rng).expect("nonempty lexicon")
}

/// Loop over `0..len` in the style's shape.
fn loop_over(style: Style, n: &Names, body: &str) -> String {
    match style {
        Style::A => format!("for (int {i} = 0; {i} < {len}; {i}++) {{ {body} }}", i = n.i, len = n.len),
        Style::B => format!("int {i} = 0; while ({i} < {len}) {{ {body} {i} = {i} + 1; }}", i = n.i, len = n.len),
    }
}

fn add_to(style: Style, var: &str, expr: &str) -> String {
    match style {
        Style::A => format!("{var} += {expr};"),
        Style::B => format!("{var} = {var} + {expr};"),
    }
}

fn method_body(concept: &str, style: Style, n: &Names) -> (String, String) {
    let Names { arr, len, i, acc, param } = n;
    let el = format!("{arr}[{i}]");
    match concept {
        "sum" => ("int".into(), format!("int {acc} = 0; {} return {acc};", loop_over(style, n, &add_to(style, acc, &el)))),
        "max" | "min" => {
            let cmp = if concept == "max" { ">" } else { "<" };
            let update = match style {
                Style::A => format!("if ({el} {cmp} {acc}) {{ {acc} = {el}; }}"),
                Style::B => format!("{acc} = {el} {cmp} {acc} ? {el} : {acc};"),
            };
            ("int".into(), format!("int {acc} = {arr}[0]; {} return {acc};", loop_over(style, n, &update)))
        }
        "contains" => match style {
            Style::A => ("boolean".into(), format!("{} return false;", loop_over(style, n, &format!("if ({el} == {param}) {{ return true; }}")))),
            Style::B => (
                "boolean".into(),
                format!("boolean {acc} = false; {} return {acc};", loop_over(style, n, &format!("if ({el} == {param}) {{ {acc} = true; }}"))),
            ),
        },
        "indexOf" => match style {
            Style::A => ("int".into(), format!("{} return -1;", loop_over(style, n, &format!("if ({el} == {param}) {{ return {i}; }}")))),
            Style::B => (
                "int".into(),
                format!("int {acc} = -1; {} return {acc};", loop_over(style, n, &format!("if ({acc} < 0 && {el} == {param}) {{ {acc} = {i}; }}"))),
            ),
        },
        "countMatches" => (
            "int".into(),
            format!("int {acc} = 0; {} return {acc};", loop_over(style, n, &format!("if ({el} == {param}) {{ {} }}", add_to(style, acc, "1")))),
        ),
        "isEmpty" => match style {
            Style::A => ("boolean".into(), format!("return {len} == 0;")),
            Style::B => ("boolean".into(), format!("if ({len} > 0) {{ return false; }} return true;")),
        },
        "clear" => match style {
            Style::A => ("void".into(), format!("{len} = 0; {arr} = new int[{arr}.length];")),
            Style::B => ("void".into(), format!("{} {len} = 0;", loop_over(style, n, &format!("{el} = 0;")))),
        },
        "reverse" => {
            let swap = format!("int {acc} = {el}; {el} = {arr}[{len} - 1 - {i}]; {arr}[{len} - 1 - {i}] = {acc};");
            let half = Names { len: "half", ..*n };
            ("void".into(), format!("int half = {len} / 2; {}", loop_over(style, &half, &swap)))
        }
        "average" => {
            let guard = match style {
                Style::A => format!("if ({len} == 0) {{ return 0.0; }}"),
                Style::B => format!("if ({len} < 1) return 0.0;"),
            };
            (
                "double".into(),
                format!("{guard} double {acc} = 0.0; {} return {acc} / {len};", loop_over(style, n, &add_to(style, acc, &el))),
            )
        }
        "fill" => ("void".into(), loop_over(style, n, &format!("{el} = {param};"))),
        "last" => match style {
            Style::A => ("int".into(), format!("if ({len} == 0) {{ throw new IllegalStateException(\"empty\"); }} return {arr}[{len} - 1];")),
            Style::B => ("int".into(), format!("int {acc} = {len} - 1; return {acc} >= 0 ? {arr}[{acc}] : -1;")),
        },
        "swap" => (
            "void".into(),
            format!("int {acc} = {arr}[{param}]; {arr}[{param}] = {arr}[other]; {arr}[other] = {acc};"),
        ),
        "grow" => match style {
            Style::A => (
                "void".into(),
                format!("int[] {acc} = new int[{arr}.length * 2]; System.arraycopy({arr}, 0, {acc}, 0, {len}); {arr} = {acc};"),
            ),
            Style::B => (
                "void".into(),
                format!("int[] {acc} = new int[{arr}.length + 8]; {} {arr} = {acc};", loop_over(style, n, &format!("{acc}[{i}] = {el};"))),
            ),
        },
        other => unreachable!("unknown concept {other}"),
    }
}

fn params_for(concept: &str, param: &str) -> String {
    match concept {
        "contains" | "indexOf" | "countMatches" | "fill" => format!("int {param}"),
        "swap" => format!("int {param}, int other"),
        _ => String::new(),
    }
}

/// One method implementing `concept` in `style`.
pub fn render_method(concept: &str, style: Style, arr: &'static str, len: &'static str, rng: &mut ChaCha8Rng) -> String {
    let lex = match style {
        Style::A => &LEX_A,
        Style::B => &LEX_B,
    };
    let names = Names { arr, len, i: pick(rng, lex.indices), acc: pick(rng, lex.accs), param: pick(rng, lex.params) };
    let (ret, body) = method_body(concept, style, &names);
    let hook = if rng.random_bool(0.3) { format!("{}(); ", pick(rng, lex.hooks)) } else { String::new() };
    format!("    {ret} {concept}({}) {{ {hook}{body} }}\n", params_for(concept, names.param))
}

/// A class of 3–7 methods; each method is style B with probability `p_b`.
pub fn render_file(class_style: Style, p_b: f64, rng: &mut ChaCha8Rng) -> (String, String) {
    let lex = match class_style {
        Style::A => &LEX_A,
        Style::B => &LEX_B,
    };
    let class = format!("{}{}", pick(rng, lex.classes), rng.random_range(1..1000));
    let (arr, len) = (pick(rng, lex.arrays), pick(rng, lex.lengths));
    let mut src = format!("package synth;\n\npublic class {class} {{\n    int[] {arr};\n    int {len};\n\n");
    let k = rng.random_range(3..=7);
    let concepts: Vec<&&str> = CONCEPTS.choose_multiple(rng, k).collect();
    for c in concepts {
        let style = if rng.random_bool(p_b) { Style::B } else { Style::A };
        src.push_str(&render_method(c, style, arr, len, rng));
    }
    src.push_str("}\n");
    (class, src)
}

struct SnapshotPlan {
    project: &'static str,
    version: &'static str,
    release: &'static str,
    /// (author, files, p_b)
    authors: &'static [(&'static str, usize, f64)],
}

const PLAN: [SnapshotPlan; 6] = [
    SnapshotPlan { project: "alpha", version: "v1", release: "2019-01-15", authors: &[("alice", 50, 0.0), ("bob", 30, 0.0)] },
    SnapshotPlan { project: "alpha", version: "v2", release: "2019-09-02", authors: &[("alice", 15, 0.2), ("bob", 10, 0.2)] },
    SnapshotPlan { project: "alpha", version: "v3", release: "2020-05-20", authors: &[("alice", 15, 0.5), ("bob", 10, 0.5)] },
    SnapshotPlan { project: "alpha", version: "v4", release: "2021-02-11", authors: &[("alice", 15, 0.8), ("bob", 10, 0.8)] },
    SnapshotPlan { project: "beta", version: "v1", release: "2020-03-30", authors: &[("mallory", 60, 1.0)] },
    SnapshotPlan {
        project: "gamma",
        version: "v1",
        release: "2020-11-08",
        authors: &[("carol", 40, 0.0), ("dave", 20, 0.1), ("erin", 20, 0.6), ("frank", 20, 1.0)],
    },
];

/// Test splits mixing in at least half style-B code.
pub const CROSS_STYLE_SPLITS: [(ShiftKind, &str); 5] = [
    (ShiftKind::Timeline, "test2"),
    (ShiftKind::Timeline, "test3"),
    (ShiftKind::Project, "test"),
    (ShiftKind::Author, "test2"),
    (ShiftKind::Author, "test3"),
];

/// The split with the largest style-B share for each shift.
pub fn strongest_shift_split(kind: ShiftKind) -> &'static str {
    match kind {
        ShiftKind::Timeline | ShiftKind::Author => "test3",
        ShiftKind::Project => "test",
    }
}

#[derive(Debug, Clone)]
pub struct SynthSummary {
    pub files: usize,
    pub manifests: Vec<(ShiftKind, PathBuf)>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn selector(project: &str, version: &str, author: Option<&str>) -> String {
    let author = author.map(|a| format!(", \"author\": \"{a}\"")).unwrap_or_default();
    format!("{{\"project\": \"{project}\", \"version\": \"{version}\", \"root\": \"../projects/{project}/{version}\"{author}}}")
}

fn manifest(kind: ShiftKind, seed: u64, splits: &[(&str, String)]) -> String {
    let mut out = format!("{{\n  \"shift_kind\": \"{kind}\",\n  \"seed\": {seed},\n  \"splits\": {{\n");
    for (i, (name, sel)) in splits.iter().enumerate() {
        let comma = if i + 1 < splits.len() { "," } else { "" };
        let _ = writeln!(out, "    \"{name}\": [{sel}]{comma}");
    }
    out.push_str("  }\n}\n");
    out
}

/// Writes `projects/<project>/<version>/` snapshots and
/// `manifests/{timeline,project,author}.json` under `out`.
pub fn generate_corpus(out: &Path, seed: u64) -> Result<SynthSummary> {
    let mut files = 0;
    for plan in &PLAN {
        let root = out.join("projects").join(plan.project).join(plan.version);
        let mut listed = Vec::new();
        for &(author, count, p_b) in plan.authors {
            let mut rng = rng_for(seed, &format!("{}/{}/{author}", plan.project, plan.version));
            for k in 0..count {
                let class_style = if rng.random_bool(p_b) { Style::B } else { Style::A };
                let (class, src) = render_file(class_style, p_b, &mut rng);
                let rel = format!("src/{author}/{class}_{k}.java");
                write(&root.join(&rel), &src)?;
                listed.push(serde_json::json!({"path": rel, "author": author}));
                files += 1;
            }
        }
        let doc = serde_json::json!({
            "project": plan.project,
            "version": plan.version,
            "release_time": plan.release,
            "files": listed,
        });
        write(&root.join("snapshot.json"), &serde_json::to_string_pretty(&doc).expect("json"))?;
    }

    let mdir = out.join("manifests");
    let docs = [
        (
            ShiftKind::Timeline,
            manifest(
                ShiftKind::Timeline,
                seed,
                &[
                    ("train", selector("alpha", "v1", None)),
                    ("test1", selector("alpha", "v2", None)),
                    ("test2", selector("alpha", "v3", None)),
                    ("test3", selector("alpha", "v4", None)),
                ],
            ),
        ),
        (
            ShiftKind::Project,
            manifest(ShiftKind::Project, seed, &[("train", selector("alpha", "v1", None)), ("test", selector("beta", "v1", None))]),
        ),
        (
            ShiftKind::Author,
            manifest(
                ShiftKind::Author,
                seed,
                &[
                    ("train", selector("gamma", "v1", Some("carol"))),
                    ("test1", selector("gamma", "v1", Some("dave"))),
                    ("test2", selector("gamma", "v1", Some("erin"))),
                    ("test3", selector("gamma", "v1", Some("frank"))),
                ],
            ),
        ),
    ];
    let mut manifests = Vec::new();
    for (kind, text) in docs {
        let path = mdir.join(format!("{kind}.json"));
        write(&path, &text)?;
        manifests.push((kind, path));
    }
    Ok(SynthSummary { files, manifests })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{assign_splits, load_manifest, DEFAULT_VAL_FRACTION};
    use crate::extraction::{method_samples_from_source, tokenize_java, ExtractionConfig};

    #[test]
    fn every_concept_parses_in_both_styles() {
        let mut rng = rng_for(1, "t");
        for style in [Style::A, Style::B] {
            for c in CONCEPTS {
                let src = format!("class T {{ int[] a; int n;\n{}}}", render_method(c, style, "a", "n", &mut rng));
                let ms = method_samples_from_source(&src, &ExtractionConfig::default(), 0, "t").unwrap();
                assert_eq!(ms.len(), 1, "{c} {style:?}: {src}");
                assert_eq!(ms[0].label, c);
                assert!(ms[0].contexts.len() > 3, "{c} {style:?}");
                // Recovery would show up as ExprStmt-only trees; make sure the real grammar was used.
                let tree = crate::extraction::parse_java_lite(&tokenize_java(&src).unwrap()).unwrap().render();
                assert!(!tree.contains("(ExprStmt Name:"), "{c} {style:?} fell back to recovery: {tree}");
            }
        }
    }

    #[test]
    fn corpus_and_manifests_load() {
        let dir = tempfile::tempdir().unwrap();
        let summary = generate_corpus(dir.path(), 5).unwrap();
        assert_eq!(summary.files, 315);
        for (kind, path) in &summary.manifests {
            let m = load_manifest(path).unwrap();
            assert_eq!(m.shift_kind, *kind);
            let a = assign_splits(&m, DEFAULT_VAL_FRACTION).unwrap();
            for (_, files) in &a.splits {
                for f in files {
                    let src = fs::read_to_string(a.resolve(f)).unwrap();
                    assert!(!method_samples_from_source(&src, &ExtractionConfig::default(), 0, "x").unwrap().is_empty());
                }
            }
        }
        let again = tempfile::tempdir().unwrap();
        generate_corpus(again.path(), 5).unwrap();
        let read = |d: &Path| fs::read_to_string(d.join("projects/beta/v1/snapshot.json")).unwrap();
        assert_eq!(read(dir.path()), read(again.path()));
    }
}
