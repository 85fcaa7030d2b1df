//! Run configuration, loaded from TOML and overridden by command-line flags.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{Classifier, KeywordCategory, KeywordTable, MessageScope};
use crate::organ::{LabelOverride, PracticalityRules};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {}: {source}", path.display())]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid label overrides {}: {source}", path.display())]
    Overrides { path: PathBuf, source: serde_json::Error },
    #[error("cutoff `{0}` is neither YYYY-MM-DD nor an RFC 3339 timestamp")]
    Cutoff(String),
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("keyword table has no words for {0}")]
    MissingKeywords(KeywordCategory),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `YYYY-MM-DD` (inclusive, end of day UTC) or an RFC 3339 timestamp.
    pub cutoff: Option<String>,
    pub branch: Option<String>,
    pub message_scope: MessageScope,
    /// Replacement word lists for individual categories.
    pub keywords: BTreeMap<KeywordCategory, Vec<String>>,
    pub media_extensions: Option<BTreeSet<String>>,
    pub doc_extensions: Option<BTreeSet<String>>,
    pub config_extensions: Option<BTreeSet<String>>,
    pub config_files: Option<BTreeSet<String>>,
    pub missing_symbol_max_tokens: usize,
    pub test_timeout_secs: u64,
    /// JSON map from commit id (or unique prefix) to manual labels.
    pub label_overrides: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cutoff: None,
            branch: None,
            message_scope: MessageScope::FirstLine,
            keywords: BTreeMap::new(),
            media_extensions: None,
            doc_extensions: None,
            config_extensions: None,
            config_files: None,
            missing_symbol_max_tokens: PracticalityRules::default().missing_symbol_max_tokens,
            test_timeout_secs: 300,
            label_overrides: None,
        }
    }
}

/// Parses a cutoff into seconds since the epoch. A bare date means the end
/// of that day in UTC.
pub fn parse_cutoff(text: &str) -> Result<i64, ConfigError> {
    if let Ok(date) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        let end = NaiveTime::from_hms_opt(23, 59, 59).expect("valid time");
        return Ok(date.and_time(end).and_utc().timestamp());
    }
    DateTime::parse_from_rfc3339(text).map(|t| t.timestamp()).map_err(|_| ConfigError::Cutoff(text.to_string()))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn keyword_table(&self) -> KeywordTable {
        self.keywords.iter().fold(KeywordTable::default(), |t, (cat, words)| t.with_override(*cat, words.clone()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.missing_symbol_max_tokens == 0 {
            return Err(ConfigError::NotPositive("missing_symbol_max_tokens"));
        }
        if self.test_timeout_secs == 0 {
            return Err(ConfigError::NotPositive("test_timeout_secs"));
        }
        let table = self.keyword_table();
        if let Some(c) =
            KeywordCategory::KEYWORDED.into_iter().find(|c| table.words.get(c).is_none_or(|w| w.is_empty()))
        {
            return Err(ConfigError::MissingKeywords(c));
        }
        if let Some(c) = &self.cutoff {
            parse_cutoff(c)?;
        }
        Ok(())
    }

    pub fn cutoff_timestamp(&self) -> Result<Option<i64>, ConfigError> {
        self.cutoff.as_deref().map(parse_cutoff).transpose()
    }

    pub fn classifier(&self) -> Classifier {
        Classifier::new(&self.keyword_table(), self.message_scope)
    }

    pub fn rules(&self) -> PracticalityRules {
        let mut rules = PracticalityRules::default();
        let lower = |s: &BTreeSet<String>| s.iter().map(|x| x.trim_start_matches('.').to_lowercase()).collect();
        if let Some(s) = &self.media_extensions {
            rules.media_extensions = lower(s);
        }
        if let Some(s) = &self.doc_extensions {
            rules.doc_extensions = lower(s);
        }
        if let Some(s) = &self.config_extensions {
            rules.config_extensions = lower(s);
        }
        if let Some(s) = &self.config_files {
            rules.config_files = s.iter().map(|x| x.to_lowercase()).collect();
        }
        rules.missing_symbol_max_tokens = self.missing_symbol_max_tokens;
        rules
    }

    pub fn load_overrides(&self) -> Result<LabelOverrides, ConfigError> {
        match &self.label_overrides {
            None => Ok(LabelOverrides::default()),
            Some(path) => LabelOverrides::load(path),
        }
    }
}

/// Manual labels keyed by commit id or id prefix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelOverrides {
    pub by_commit: BTreeMap<String, LabelOverride>,
}

impl LabelOverrides {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Overrides { path: path.into(), source })
    }

    pub fn get(&self, commit_id: &str) -> Option<&LabelOverride> {
        self.by_commit.get(commit_id).or_else(|| {
            let mut hits = self.by_commit.iter().filter(|(k, _)| k.len() >= 4 && commit_id.starts_with(k.as_str()));
            match (hits.next(), hits.next()) {
                (Some((_, o)), None) => Some(o),
                _ => None,
            }
        })
    }
}
