//! Labels for adding commits: practicality, content kind and transplantability.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::classify::{Classifier, KeywordCategory};
use crate::code::{
    free_identifiers, parse_lenient, FreeIdentifiers, MiniLangTokenizer, SyntaxUnit, Tokenizer, UnitKind,
};
use crate::ingest::{extract_added_blocks, has_paired_removals, AddedBlock, CommitRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnpracticalReason {
    /// Only explanations, icons or pictures.
    ExplanationOrMedia,
    /// A token or two, such as a forgotten semicolon.
    MissingSymbol,
    /// Only build or configuration manifests.
    ConfigDependency,
    /// Only README prose.
    ReadmeAnnotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "value", content = "unpractical_reason")]
pub enum Practicality {
    Practical,
    Unpractical(UnpracticalReason),
}

impl Practicality {
    pub fn is_practical(self) -> bool {
        self == Practicality::Practical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtherReason {
    LogicalFragment,
    ValueModification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "value", content = "other_reason")]
pub enum ContentKind {
    SimpleAdding,
    AddingFunction,
    AddingClass,
    Other(OtherReason),
}

/// [`ContentKind`] without the `other` detail, for tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentClass {
    SimpleAdding,
    AddingFunction,
    AddingClass,
    Other,
}

impl ContentClass {
    pub const ALL: [ContentClass; 4] =
        [ContentClass::SimpleAdding, ContentClass::AddingFunction, ContentClass::AddingClass, ContentClass::Other];

    pub fn heading(self) -> &'static str {
        match self {
            ContentClass::SimpleAdding => "simple adding",
            ContentClass::AddingFunction => "adding function",
            ContentClass::AddingClass => "adding class",
            ContentClass::Other => "other",
        }
    }
}

impl ContentKind {
    pub fn class(self) -> ContentClass {
        match self {
            ContentKind::SimpleAdding => ContentClass::SimpleAdding,
            ContentKind::AddingFunction => ContentClass::AddingFunction,
            ContentKind::AddingClass => ContentClass::AddingClass,
            ContentKind::Other(_) => ContentClass::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ease {
    Easy,
    Difficult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transplantability {
    pub value: Ease,
    /// Free variables; empty exactly when `value` is easy.
    pub unresolved: BTreeSet<String>,
    pub external_callees: BTreeSet<String>,
}

impl Transplantability {
    pub fn from_free(free: FreeIdentifiers) -> Self {
        let value = if free.variables.is_empty() { Ease::Easy } else { Ease::Difficult };
        Transplantability { value, unresolved: free.variables, external_callees: free.external_callees }
    }

    pub fn is_easy(&self) -> bool {
        self.value == Ease::Easy
    }
}

/// File-class heuristics behind the unpractical-adding conditions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PracticalityRules {
    pub media_extensions: BTreeSet<String>,
    pub doc_extensions: BTreeSet<String>,
    pub config_extensions: BTreeSet<String>,
    pub config_files: BTreeSet<String>,
    /// Additions of at most this many tokens count as a missing symbol.
    pub missing_symbol_max_tokens: usize,
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for PracticalityRules {
    fn default() -> Self {
        PracticalityRules {
            media_extensions: set(&[
                "png", "jpg", "jpeg", "gif", "svg", "ico", "bmp", "webp", "tif", "tiff", "mp3", "wav", "ogg", "mp4",
            ]),
            doc_extensions: set(&["md", "markdown", "txt", "rst", "adoc"]),
            config_extensions: set(&[
                "gradle",
                "kts",
                "properties",
                "ini",
                "cfg",
                "conf",
                "lock",
                "xml",
                "yml",
                "yaml",
                "toml",
            ]),
            config_files: set(&[
                "pom.xml",
                "build.gradle",
                "settings.gradle",
                "package.json",
                "package-lock.json",
                "bower.json",
                "composer.json",
                "tsconfig.json",
                "cargo.toml",
                "cargo.lock",
                "requirements.txt",
                "setup.cfg",
                "pyproject.toml",
                "gemfile",
                "gemfile.lock",
                "go.mod",
                "go.sum",
                "cmakelists.txt",
                "androidmanifest.xml",
                ".travis.yml",
                ".gitignore",
            ]),
            missing_symbol_max_tokens: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FileClass {
    Media,
    Readme,
    Config,
    Code,
}

impl PracticalityRules {
    fn classify_path(&self, path: &str) -> FileClass {
        let file = path.rsplit('/').next().unwrap_or(path);
        let lower = file.to_lowercase();
        let (stem, ext) = match lower.rsplit_once('.') {
            Some((s, e)) if !s.is_empty() => (s, e),
            _ => (lower.as_str(), ""),
        };
        if stem == "readme" {
            return FileClass::Readme;
        }
        if self.config_files.contains(&lower) {
            return FileClass::Config;
        }
        if self.media_extensions.contains(ext) || self.doc_extensions.contains(ext) {
            return FileClass::Media;
        }
        if self.config_extensions.contains(ext) {
            return FileClass::Config;
        }
        if ext == "json" {
            let dir = path.to_lowercase();
            let in_config_dir =
                dir.split('/').rev().skip(1).any(|c| c.contains("config") || c == ".github" || c == "build");
            if !path.contains('/') || in_config_dir {
                return FileClass::Config;
            }
        }
        FileClass::Code
    }

    /// True for files whose added lines are worth parsing as code.
    pub fn is_code_path(&self, path: &str) -> bool {
        self.classify_path(path) == FileClass::Code
    }
}

/// Practical unless the commit only adds media/doc files, only a token or
/// two, only configuration, or only README text (checked in that order).
pub fn judge_practicality(commit: &CommitRecord, blocks: &[AddedBlock], rules: &PracticalityRules) -> Practicality {
    let classes: Vec<FileClass> = commit.files.iter().map(|f| rules.classify_path(&f.path)).collect();
    let all = |c: FileClass| !classes.is_empty() && classes.iter().all(|x| *x == c);

    if all(FileClass::Media) {
        return Practicality::Unpractical(UnpracticalReason::ExplanationOrMedia);
    }
    let tokens: usize = blocks.iter().map(|b| MiniLangTokenizer.tokenize(&b.text()).len()).sum();
    if tokens <= rules.missing_symbol_max_tokens {
        return Practicality::Unpractical(UnpracticalReason::MissingSymbol);
    }
    if all(FileClass::Config) {
        return Practicality::Unpractical(UnpracticalReason::ConfigDependency);
    }
    if all(FileClass::Readme) {
        return Practicality::Unpractical(UnpracticalReason::ReadmeAnnotation);
    }
    Practicality::Practical
}

/// Class before function before value modification before logical fragment
/// before simple adding.
pub fn classify_content(blocks: &[AddedBlock], parsed: &[SyntaxUnit], paired_removals: bool) -> ContentKind {
    let _ = blocks;
    let units = || parsed.iter().flat_map(|p| p.walk());
    if units().any(|u| u.kind == UnitKind::ClassDef && u.complete) {
        return ContentKind::AddingClass;
    }
    if units().any(|u| u.kind == UnitKind::FunctionDef && u.complete) {
        return ContentKind::AddingFunction;
    }
    if paired_removals {
        return ContentKind::Other(OtherReason::ValueModification);
    }
    if units().any(|u| u.control.is_some_and(|c| c.is_branch_or_loop())) {
        return ContentKind::Other(OtherReason::LogicalFragment);
    }
    ContentKind::SimpleAdding
}

/// Concatenated text of the blocks, in order.
pub fn organ_text(blocks: &[AddedBlock]) -> String {
    blocks.iter().map(AddedBlock::text).collect::<Vec<_>>().join("\n")
}

/// Easy when the blocks, taken together, define every variable they read.
pub fn classify_transplantability(blocks: &[AddedBlock], context: Option<&SyntaxUnit>) -> Transplantability {
    let organ = parse_lenient(&organ_text(blocks));
    Transplantability::from_free(free_identifiers(&organ, context))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrganCandidate {
    pub commit_id: String,
    pub summary: String,
    pub blocks: Vec<AddedBlock>,
    pub practicality: Practicality,
    pub content: Option<ContentKind>,
    pub transplantability: Option<Transplantability>,
}

/// Manually curated labels that replace the heuristics for one commit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelOverride {
    #[serde(default)]
    pub practicality: Option<Practicality>,
    #[serde(default)]
    pub content: Option<ContentKind>,
    #[serde(default)]
    pub ease: Option<Ease>,
}

/// Labels one commit; `None` unless it is an adding commit.
pub fn analyze_commit(
    commit: &CommitRecord,
    classifier: &Classifier,
    rules: &PracticalityRules,
    label_override: Option<&LabelOverride>,
) -> Option<OrganCandidate> {
    if !classifier.classify(&commit.message).contains(&KeywordCategory::Add) {
        return None;
    }
    let blocks = extract_added_blocks(commit);
    let practicality =
        label_override.and_then(|o| o.practicality).unwrap_or_else(|| judge_practicality(commit, &blocks, rules));
    let mut candidate = OrganCandidate {
        commit_id: commit.id.clone(),
        summary: commit.message.lines().next().unwrap_or_default().to_string(),
        blocks,
        practicality,
        content: None,
        transplantability: None,
    };
    if practicality.is_practical() {
        let code: Vec<AddedBlock> = candidate.blocks.iter().filter(|b| rules.is_code_path(&b.path)).cloned().collect();
        let code = if code.is_empty() { candidate.blocks.clone() } else { code };
        let parsed: Vec<SyntaxUnit> = code.iter().map(|b| parse_lenient(&b.text())).collect();
        let content = label_override
            .and_then(|o| o.content)
            .unwrap_or_else(|| classify_content(&code, &parsed, has_paired_removals(commit)));
        let mut t = classify_transplantability(&code, None);
        if let Some(ease) = label_override.and_then(|o| o.ease) {
            t.value = ease;
            if ease == Ease::Easy {
                t.unresolved.clear();
            } else if t.unresolved.is_empty() {
                t.unresolved.insert("<manual>".to_string());
            }
        }
        candidate.content = Some(content);
        candidate.transplantability = Some(t);
    }
    Some(candidate)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTally {
    pub adding: u64,
    pub practical: u64,
    pub unpractical: u64,
    pub unpractical_by_reason: BTreeMap<UnpracticalReason, u64>,
    pub content: BTreeMap<ContentClass, u64>,
    pub other_by_reason: BTreeMap<OtherReason, u64>,
    pub easy: u64,
    pub difficult: u64,
}

fn pct(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

impl LabelTally {
    pub fn content_count(&self, class: ContentClass) -> u64 {
        self.content.get(&class).copied().unwrap_or(0)
    }

    pub fn practical_pct(&self) -> f64 {
        pct(self.practical, self.adding)
    }

    pub fn unpractical_pct(&self) -> f64 {
        pct(self.unpractical, self.adding)
    }

    pub fn content_pct(&self, class: ContentClass) -> f64 {
        pct(self.content_count(class), self.practical)
    }

    pub fn easy_pct(&self) -> f64 {
        pct(self.easy, self.practical)
    }

    pub fn difficult_pct(&self) -> f64 {
        pct(self.difficult, self.practical)
    }

    /// The three partition identities over adding commits.
    pub fn partitions_hold(&self) -> bool {
        self.practical + self.unpractical == self.adding
            && self.easy + self.difficult == self.practical
            && self.content.values().sum::<u64>() == self.practical
    }
}

pub fn tally_labels(candidates: &[OrganCandidate]) -> LabelTally {
    tally_label_sets(candidates.iter().map(|c| (c.practicality, c.content, c.transplantability.as_ref())))
}

/// Tally over bare (practicality, content, transplantability) labels.
pub fn tally_label_sets<'a>(
    labels: impl IntoIterator<Item = (Practicality, Option<ContentKind>, Option<&'a Transplantability>)>,
) -> LabelTally {
    let mut t = LabelTally::default();
    for class in ContentClass::ALL {
        t.content.insert(class, 0);
    }
    for (practicality, content, transplantability) in labels {
        t.adding += 1;
        match practicality {
            Practicality::Practical => {
                t.practical += 1;
                if let Some(kind) = content {
                    *t.content.entry(kind.class()).or_default() += 1;
                    if let ContentKind::Other(r) = kind {
                        *t.other_by_reason.entry(r).or_default() += 1;
                    }
                }
                match transplantability {
                    Some(tr) if tr.is_easy() => t.easy += 1,
                    Some(_) => t.difficult += 1,
                    None => {}
                }
            }
            Practicality::Unpractical(reason) => {
                t.unpractical += 1;
                *t.unpractical_by_reason.entry(reason).or_default() += 1;
            }
        }
    }
    t
}
