#![allow(dead_code)]

pub mod generate;
pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use git2::{IndexAddOption, Repository, Signature, Time};
use serde::Deserialize;
use tempfile::TempDir;

pub fn fixtures() -> PathBuf {
    // Also included from the cli crate, hence the detour through the parent.
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// MiniLang fixtures as (file name, source, hand-labelled free variables).
pub fn minilang_fixtures() -> Vec<(String, String, BTreeSet<String>)> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(fixtures().join("minilang")).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        let src = fs::read_to_string(&path).unwrap();
        let labels = src
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("// free:"))
            .expect("fixture starts with a `// free:` line")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        out.push((path.file_name().unwrap().to_string_lossy().into_owned(), src, labels));
    }
    out
}

/// Scratch git repository with commits at fixed, increasing timestamps.
pub struct FixtureRepo {
    pub dir: TempDir,
    repo: Repository,
    next_time: i64,
}

impl FixtureRepo {
    pub fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let repo = Repository::init(dir.path()).unwrap();
        FixtureRepo { dir, repo, next_time: 1_500_000_000 }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Writes (or with `None`, deletes) files and commits them.
    pub fn commit(&mut self, message: &str, files: &[(&str, Option<&str>)]) -> String {
        let time = self.next_time;
        self.next_time += 3600;
        self.commit_at(time, message, files)
    }

    pub fn commit_at(&mut self, time: i64, message: &str, files: &[(&str, Option<&str>)]) -> String {
        for (path, content) in files {
            let full = self.path().join(path);
            match content {
                Some(text) => {
                    fs::create_dir_all(full.parent().unwrap()).unwrap();
                    fs::write(&full, text).unwrap();
                }
                None => {
                    let _ = fs::remove_file(&full);
                }
            }
        }
        let mut index = self.repo.index().unwrap();
        index.add_all(["*"], IndexAddOption::DEFAULT, None).unwrap();
        index.update_all(["*"], None).unwrap();
        index.write().unwrap();
        let tree = self.repo.find_tree(index.write_tree().unwrap()).unwrap();
        let sig = Signature::new("Fixture", "fixture@example.com", &Time::new(time, 0)).unwrap();
        let parent = self.repo.head().ok().and_then(|h| h.peel_to_commit().ok());
        let parents: Vec<&git2::Commit> = parent.iter().collect();
        let id = self.repo.commit(Some("HEAD"), &sig, &sig, message, &tree, &parents).unwrap();
        id.to_string()
    }
}

#[derive(Debug, Deserialize)]
pub struct Corpus {
    pub commit: Vec<CorpusCommit>,
}

/// One commit of the classifier corpus with its hand labels.
#[derive(Debug, Deserialize)]
pub struct CorpusCommit {
    pub message: String,
    pub categories: Vec<String>,
    pub practicality: Option<String>,
    pub content: Option<String>,
    pub ease: Option<String>,
    #[serde(default)]
    pub files: BTreeMap<String, String>,
}

pub fn classifier_corpus() -> Corpus {
    toml::from_str(&fs::read_to_string(fixtures().join("classifier_corpus.toml")).unwrap()).unwrap()
}

/// Replays the corpus into a scratch repository; returns it with the commit ids in order.
pub fn replay(corpus: &Corpus) -> (FixtureRepo, Vec<String>) {
    let mut repo = FixtureRepo::new();
    let ids = corpus
        .commit
        .iter()
        .map(|c| {
            let files: Vec<(&str, Option<&str>)> =
                c.files.iter().map(|(p, t)| (p.as_str(), Some(t.as_str()))).collect();
            repo.commit(&c.message, &files)
        })
        .collect();
    (repo, ids)
}

#[derive(Debug, Deserialize)]
pub struct VeinCases {
    pub case: Vec<VeinCase>,
}

#[derive(Debug, Deserialize)]
pub struct VeinCase {
    pub name: String,
    pub line: u32,
    pub context: String,
    pub organ: String,
    pub vein: Option<Vec<String>>,
    pub error: Option<String>,
}

pub fn vein_cases() -> Vec<VeinCase> {
    let cases: VeinCases = toml::from_str(&fs::read_to_string(fixtures().join("veins.toml")).unwrap()).unwrap();
    cases.case
}

/// Copies a fixture directory into a fresh temporary directory.
pub fn copy_fixture(name: &str) -> TempDir {
    let src = fixtures().join(name);
    let dir = TempDir::new().unwrap();
    for entry in walkdir::WalkDir::new(&src) {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(&src).unwrap();
        let dest = dir.path().join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dest).unwrap();
        } else {
            fs::copy(entry.path(), &dest).unwrap();
        }
    }
    dir
}
