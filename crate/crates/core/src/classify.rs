//! Keyword classification of commit comments.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::CommitRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordCategory {
    Update,
    FixCorrect,
    Add,
    DeleteRemove,
    ModifyChange,
    Merge,
    Create,
    Other,
}

impl KeywordCategory {
    pub const ALL: [KeywordCategory; 8] = [
        KeywordCategory::Update,
        KeywordCategory::FixCorrect,
        KeywordCategory::Add,
        KeywordCategory::DeleteRemove,
        KeywordCategory::ModifyChange,
        KeywordCategory::Merge,
        KeywordCategory::Create,
        KeywordCategory::Other,
    ];

    /// Categories that have keywords (everything but `Other`).
    pub const KEYWORDED: [KeywordCategory; 7] = [
        KeywordCategory::Update,
        KeywordCategory::FixCorrect,
        KeywordCategory::Add,
        KeywordCategory::DeleteRemove,
        KeywordCategory::ModifyChange,
        KeywordCategory::Merge,
        KeywordCategory::Create,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KeywordCategory::Update => "update",
            KeywordCategory::FixCorrect => "fix_correct",
            KeywordCategory::Add => "add",
            KeywordCategory::DeleteRemove => "delete_remove",
            KeywordCategory::ModifyChange => "modify_change",
            KeywordCategory::Merge => "merge",
            KeywordCategory::Create => "create",
            KeywordCategory::Other => "other",
        }
    }

    /// Column heading used in the tabular exports.
    pub fn heading(self) -> &'static str {
        match self {
            KeywordCategory::Update => "update",
            KeywordCategory::FixCorrect => "fix/correct",
            KeywordCategory::Add => "add",
            KeywordCategory::DeleteRemove => "delete/remove",
            KeywordCategory::ModifyChange => "modify/change",
            KeywordCategory::Merge => "merge",
            KeywordCategory::Create => "create",
            KeywordCategory::Other => "other",
        }
    }
}

impl fmt::Display for KeywordCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KeywordCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KeywordCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s || c.heading() == s)
            .ok_or_else(|| format!("unknown keyword category `{s}`"))
    }
}

/// Which part of a commit message is classified.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageScope {
    #[default]
    FirstLine,
    WholeMessage,
}

/// Inflected keyword forms per category, matched as whole word tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordTable {
    pub words: BTreeMap<KeywordCategory, Vec<String>>,
}

fn forms(stems: &[&str]) -> Vec<String> {
    stems.iter().map(|s| s.to_string()).collect()
}

impl Default for KeywordTable {
    fn default() -> Self {
        let mut words = BTreeMap::new();
        words.insert(KeywordCategory::Update, forms(&["update", "updates", "updated", "updating"]));
        words.insert(
            KeywordCategory::FixCorrect,
            forms(&["fix", "fixes", "fixed", "fixing", "correct", "corrects", "corrected", "correcting"]),
        );
        words.insert(KeywordCategory::Add, forms(&["add", "adds", "added", "adding"]));
        words.insert(
            KeywordCategory::DeleteRemove,
            forms(&["delete", "deletes", "deleted", "deleting", "remove", "removes", "removed", "removing"]),
        );
        words.insert(
            KeywordCategory::ModifyChange,
            forms(&["modify", "modifies", "modified", "modifying", "change", "changes", "changed", "changing"]),
        );
        words.insert(KeywordCategory::Merge, forms(&["merge", "merges", "merged", "merging"]));
        words.insert(KeywordCategory::Create, forms(&["create", "creates", "created", "creating"]));
        KeywordTable { words }
    }
}

impl KeywordTable {
    /// Replaces the word list of one category.
    pub fn with_override(mut self, category: KeywordCategory, words: Vec<String>) -> Self {
        self.words.insert(category, words.into_iter().map(|w| w.to_lowercase()).collect());
        self
    }

    /// Every keyworded category has at least one word.
    pub fn is_complete(&self) -> bool {
        KeywordCategory::KEYWORDED.iter().all(|c| self.words.get(c).is_some_and(|w| !w.is_empty()))
    }
}

#[derive(Debug, Clone)]
pub struct Classifier {
    lookup: HashMap<String, Vec<KeywordCategory>>,
    scope: MessageScope,
}

impl Default for Classifier {
    fn default() -> Self {
        Classifier::new(&KeywordTable::default(), MessageScope::FirstLine)
    }
}

impl Classifier {
    pub fn new(table: &KeywordTable, scope: MessageScope) -> Self {
        let mut lookup: HashMap<String, Vec<KeywordCategory>> = HashMap::new();
        for (cat, words) in &table.words {
            if *cat == KeywordCategory::Other {
                continue;
            }
            for w in words {
                lookup.entry(w.to_lowercase()).or_default().push(*cat);
            }
        }
        Classifier { lookup, scope }
    }

    pub fn classify(&self, message: &str) -> BTreeSet<KeywordCategory> {
        let text = match self.scope {
            MessageScope::FirstLine => message.lines().find(|l| !l.trim().is_empty()).unwrap_or(""),
            MessageScope::WholeMessage => message,
        };
        let mut out = BTreeSet::new();
        for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            if let Some(cats) = self.lookup.get(&token.to_lowercase()) {
                out.extend(cats.iter().copied());
            }
        }
        if out.is_empty() {
            out.insert(KeywordCategory::Other);
        }
        out
    }
}

/// Categories of `message` under the default keyword table (first line only).
pub fn classify_comment(message: &str) -> BTreeSet<KeywordCategory> {
    Classifier::default().classify(message)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTally {
    pub total_commits: u64,
    pub counts: BTreeMap<KeywordCategory, u64>,
}

impl CategoryTally {
    pub fn count(&self, category: KeywordCategory) -> u64 {
        self.counts.get(&category).copied().unwrap_or(0)
    }

    /// Percentage of commits in `category`; 0 for an empty corpus.
    pub fn percentage(&self, category: KeywordCategory) -> f64 {
        if self.total_commits == 0 {
            0.0
        } else {
            100.0 * self.count(category) as f64 / self.total_commits as f64
        }
    }

    pub fn sum_of_counts(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn add(&mut self, categories: &BTreeSet<KeywordCategory>) {
        self.total_commits += 1;
        for c in categories {
            *self.counts.entry(*c).or_default() += 1;
        }
    }
}

pub fn tally(commits: &[CommitRecord]) -> CategoryTally {
    tally_with(commits, &Classifier::default())
}

pub fn tally_with(commits: &[CommitRecord], classifier: &Classifier) -> CategoryTally {
    let mut t = CategoryTally::default();
    for c in KeywordCategory::ALL {
        t.counts.insert(c, 0);
    }
    for commit in commits {
        t.add(&classifier.classify(&commit.message));
    }
    t
}
