//! Host class discovery and name-similarity ranking.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::code::{parse_lenient, SyntaxUnit, UnitKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("class name `{0}` has no words")]
    EmptyName(String),
    #[error("no host classes to rank")]
    NoHosts,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassName {
    pub raw: String,
    pub words: Vec<String>,
}

impl ClassName {
    pub fn word_set(&self) -> BTreeSet<&str> {
        self.words.iter().map(String::as_str).collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Upper,
    Lower,
    Digit,
}

fn char_class(c: char) -> Option<CharClass> {
    if c.is_uppercase() {
        Some(CharClass::Upper)
    } else if c.is_lowercase() {
        Some(CharClass::Lower)
    } else if c.is_numeric() {
        Some(CharClass::Digit)
    } else if c.is_alphabetic() {
        Some(CharClass::Lower)
    } else {
        None
    }
}

/// Splits a class name into lowercase words at camel/Pascal case
/// transitions, letter/digit boundaries and any non-alphanumeric separator.
/// An uppercase run followed by a lowercase letter keeps its last capital
/// for the next word (`HTTPServer` is `http`, `server`).
pub fn split_name(raw: &str) -> ClassName {
    let mut words = Vec::new();
    for part in raw.split(|c: char| !c.is_alphanumeric()).filter(|p| !p.is_empty()) {
        let chars: Vec<char> = part.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let prev = char_class(chars[i - 1]);
            let cur = char_class(chars[i]);
            let next = chars.get(i + 1).and_then(|c| char_class(*c));
            let boundary = match (prev, cur) {
                (Some(CharClass::Lower), Some(CharClass::Upper)) => true,
                (Some(CharClass::Upper), Some(CharClass::Upper)) => next == Some(CharClass::Lower),
                (Some(a), Some(b)) => (a == CharClass::Digit) != (b == CharClass::Digit),
                _ => false,
            };
            if boundary {
                words.push(chars[start..i].iter().collect::<String>().to_lowercase());
                start = i;
            }
        }
        words.push(chars[start..].iter().collect::<String>().to_lowercase());
    }
    ClassName { raw: raw.to_string(), words }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FitnessScore {
    pub value: Ratio<u64>,
    pub n_common: u64,
    pub n_x: u64,
    pub n_y: u64,
}

impl FitnessScore {
    pub fn as_f64(&self) -> f64 {
        *self.value.numer() as f64 / *self.value.denom() as f64
    }
}

/// Shared words over the sum of both word counts, with duplicate words in a
/// name counted once.
pub fn fitness(x: &ClassName, y: &ClassName) -> Result<FitnessScore, MatchError> {
    for name in [x, y] {
        if name.words.is_empty() {
            return Err(MatchError::EmptyName(name.raw.clone()));
        }
    }
    let (wx, wy) = (x.word_set(), y.word_set());
    let n_common = wx.intersection(&wy).count() as u64;
    let (n_x, n_y) = (wx.len() as u64, wy.len() as u64);
    Ok(FitnessScore { value: Ratio::new(n_common, n_x + n_y), n_common, n_x, n_y })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRanking {
    pub donor: ClassName,
    pub candidates: Vec<(ClassName, FitnessScore)>,
}

/// Scores every host against the donor, best first, ties by raw name.
/// Hosts with the same raw name are ranked once.
pub fn rank(donor: &ClassName, hosts: &[ClassName]) -> Result<MatchRanking, MatchError> {
    if hosts.is_empty() {
        return Err(MatchError::NoHosts);
    }
    let unique: BTreeMap<&str, &ClassName> = hosts.iter().map(|h| (h.raw.as_str(), h)).collect();
    let mut candidates = Vec::with_capacity(unique.len());
    for host in unique.values() {
        candidates.push(((*host).clone(), fitness(donor, host)?));
    }
    candidates.sort_by(|(a, fa), (b, fb)| fb.value.cmp(&fa.value).then_with(|| a.raw.cmp(&b.raw)));
    Ok(MatchRanking { donor: donor.clone(), candidates })
}

/// A class found in the host tree. Files without a class definition are
/// represented by their file stem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostClass {
    pub name: ClassName,
    /// Path relative to the host root.
    pub path: PathBuf,
    /// False when the name comes from the file stem.
    pub declared: bool,
}

pub const SOURCE_EXTENSIONS: &[&str] = &[
    "java", "kt", "kts", "scala", "groovy", "js", "jsx", "ts", "tsx", "mjs", "c", "cc", "cpp", "cxx", "h", "hpp", "cs",
    "go", "rs", "swift", "php", "m", "mm", "scad", "dart", "ml", "py", "rb",
];

fn is_source(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| SOURCE_EXTENSIONS.contains(&e.to_lowercase().as_str()))
}

/// Every class in the source files under `root`, in path order; the first
/// definition wins when a name repeats.
pub fn discover_hosts(root: &Path) -> std::io::Result<Vec<HostClass>> {
    let mut out: Vec<HostClass> = Vec::new();
    let mut seen = BTreeSet::new();
    let walker = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
    for entry in walker {
        let entry = entry.map_err(std::io::Error::other)?;
        if !entry.file_type().is_file() || !is_source(entry.path()) {
            continue;
        }
        let rel = entry.path().strip_prefix(root).unwrap_or(entry.path()).to_path_buf();
        let source = std::fs::read_to_string(entry.path())?;
        let tree = parse_lenient(&source);
        let classes = tree.classes();
        if classes.is_empty() {
            let stem = entry.path().file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            if seen.insert(stem.clone()) {
                out.push(HostClass { name: split_name(&stem), path: rel, declared: false });
            }
            continue;
        }
        for class in classes {
            let Some(name) = class.name.clone() else { continue };
            if seen.insert(name.clone()) {
                out.push(HostClass { name: split_name(&name), path: rel.clone(), declared: true });
            }
        }
    }
    Ok(out)
}

/// Where a graft goes inside a host file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertionPoint {
    /// Byte offset in the host file.
    pub offset: usize,
    /// 1-based line the graft's first line will occupy.
    pub line: u32,
    pub target_function: Option<String>,
}

fn line_start(source: &str, offset: usize) -> usize {
    source[..offset].rfind('\n').map(|i| i + 1).unwrap_or(0)
}

fn line_of(source: &str, offset: usize) -> u32 {
    source[..offset].matches('\n').count() as u32 + 1
}

/// True when the graft defines a function or class rather than loose statements.
pub fn is_definition_shaped(graft: &SyntaxUnit) -> bool {
    graft.children.iter().any(|c| matches!(c.kind, UnitKind::FunctionDef | UnitKind::ClassDef))
}

/// End of the class body for definition-shaped grafts; otherwise the start of
/// the class function whose name best matches `donor_function`.
pub fn insertion_point(
    source: &str,
    class_name: &str,
    definition_shaped: bool,
    donor_function: Option<&str>,
) -> InsertionPoint {
    let tree = parse_lenient(source);
    let class = tree.walk().into_iter().find(|u| u.kind == UnitKind::ClassDef && u.name.as_deref() == Some(class_name));
    let Some(class) = class else {
        let end = line_of(source, source.len());
        let line = if source.is_empty() || source.ends_with('\n') { end } else { end + 1 };
        return InsertionPoint { offset: source.len(), line, target_function: None };
    };

    if !definition_shaped {
        let functions: Vec<&SyntaxUnit> = class.functions().filter(|f| f.body.is_some()).collect();
        let donor = donor_function.map(split_name);
        let mut best: Option<(Ratio<u64>, &SyntaxUnit)> = None;
        for f in &functions {
            let name = f.name.as_deref().unwrap_or_default();
            let score =
                donor.as_ref().and_then(|d| fitness(d, &split_name(name)).ok()).map(|s| s.value).unwrap_or_default();
            let better = match &best {
                None => true,
                Some((b, cur)) => score > *b || (score == *b && name < cur.name.as_deref().unwrap_or_default()),
            };
            if better {
                best = Some((score, f));
            }
        }
        if let Some((_, f)) = best {
            let (open, _) = f.body.expect("filtered on body");
            let offset = source[open..].find('\n').map(|i| open + i + 1).unwrap_or(source.len());
            return InsertionPoint { offset, line: line_of(source, offset), target_function: f.name.clone() };
        }
    }

    let close = class.body.map(|(_, c)| c).unwrap_or(source.len());
    let start = line_start(source, close);
    let offset = if source[start..close].trim().is_empty() { start } else { close };
    InsertionPoint { offset, line: line_of(source, offset), target_function: None }
}

/// Splices `graft` into `source` at `point`, on lines of its own.
pub fn insert_graft(source: &str, point: &InsertionPoint, graft: &str) -> String {
    let mut out = String::with_capacity(source.len() + graft.len() + 2);
    let (head, tail) = source.split_at(point.offset);
    out.push_str(head);
    if !head.is_empty() && !head.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(graft.trim_end_matches('\n'));
    out.push('\n');
    out.push_str(tail);
    out
}
