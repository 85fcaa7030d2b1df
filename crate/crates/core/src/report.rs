//! Mining pipeline and the reports it produces.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{tally_with, CategoryTally, KeywordCategory};
use crate::config::{ConfigError, RunConfig};
use crate::ingest::{enumerate_commits_with, head_commit, IngestError, IngestOptions};
use crate::organ::{
    analyze_commit, tally_label_sets, ContentClass, ContentKind, LabelTally, OrganCandidate, Practicality,
    Transplantability,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum MineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoIdentity {
    pub path: String,
    pub head: Option<String>,
    pub branch: Option<String>,
    pub cutoff: Option<String>,
}

impl RepoIdentity {
    /// Last path component, used as the project column in tables.
    pub fn project_name(&self) -> String {
        Path::new(&self.path).file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| self.path.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub total_commits: u64,
    pub counts: BTreeMap<KeywordCategory, u64>,
    pub percentages: BTreeMap<KeywordCategory, f64>,
}

impl From<&CategoryTally> for CategorySummary {
    fn from(t: &CategoryTally) -> Self {
        CategorySummary {
            total_commits: t.total_commits,
            counts: KeywordCategory::ALL.iter().map(|c| (*c, t.count(*c))).collect(),
            percentages: KeywordCategory::ALL.iter().map(|c| (*c, t.percentage(*c))).collect(),
        }
    }
}

/// One adding commit with its labels; the added lines themselves are left out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub commit_id: String,
    pub summary: String,
    pub files: Vec<String>,
    pub added_lines: usize,
    pub practicality: Practicality,
    pub content: Option<ContentKind>,
    pub transplantability: Option<Transplantability>,
}

impl From<&OrganCandidate> for CandidateSummary {
    fn from(c: &OrganCandidate) -> Self {
        let mut files: Vec<String> = c.blocks.iter().map(|b| b.path.clone()).collect();
        files.dedup();
        CandidateSummary {
            commit_id: c.commit_id.clone(),
            summary: c.summary.clone(),
            files,
            added_lines: c.blocks.iter().map(|b| b.lines.len()).sum(),
            practicality: c.practicality,
            content: c.content,
            transplantability: c.transplantability.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningReport {
    pub tool_version: String,
    pub generated_at: String,
    pub repo: RepoIdentity,
    pub categories: CategorySummary,
    pub labels: LabelTally,
    pub candidates: Vec<CandidateSummary>,
}

impl MiningReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Recomputes the label tally from the candidate list.
    pub fn recount(&self) -> LabelTally {
        tally_label_sets(self.candidates.iter().map(|c| (c.practicality, c.content, c.transplantability.as_ref())))
    }

    /// Stored label counts agree with the candidates and the category counts.
    pub fn is_consistent(&self) -> bool {
        self.recount() == self.labels
            && self.labels.adding == self.categories.counts.get(&KeywordCategory::Add).copied().unwrap_or(0)
            && self.labels.partitions_hold()
    }

    /// The report with its timestamp blanked, for comparing runs.
    pub fn canonical(&self) -> MiningReport {
        MiningReport { generated_at: String::new(), ..self.clone() }
    }
}

/// Classifies every commit of the repository and labels its adding commits.
pub fn mine(repo_path: &Path, config: &RunConfig) -> Result<MiningReport, MineError> {
    config.validate()?;
    let overrides = config.load_overrides()?;
    let options = IngestOptions { cutoff: config.cutoff_timestamp()?, branch: config.branch.clone() };
    let commits = enumerate_commits_with(repo_path, &options)?;
    let classifier = config.classifier();
    let rules = config.rules();

    let categories = tally_with(&commits, &classifier);
    let candidates: Vec<OrganCandidate> =
        commits.par_iter().filter_map(|c| analyze_commit(c, &classifier, &rules, overrides.get(&c.id))).collect();
    let labels = crate::organ::tally_labels(&candidates);

    Ok(MiningReport {
        tool_version: TOOL_VERSION.to_string(),
        generated_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        repo: RepoIdentity {
            path: repo_path.canonicalize().unwrap_or_else(|_| repo_path.to_path_buf()).display().to_string(),
            head: head_commit(repo_path)?,
            branch: config.branch.clone(),
            cutoff: config.cutoff.clone(),
        },
        categories: CategorySummary::from(&categories),
        labels,
        candidates: candidates.iter().map(CandidateSummary::from).collect(),
    })
}

fn pct(v: f64) -> String {
    format!("{v:.2}")
}

fn write_table<W: Write>(out: W, header: Vec<String>, rows: Vec<Vec<String>>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

/// Keyword categories per project, with totals and a percentage row.
pub fn category_table<W: Write>(reports: &[MiningReport], out: W) -> csv::Result<()> {
    let mut header = vec!["Project Name".to_string()];
    header.extend(KeywordCategory::ALL.iter().map(|c| c.heading().to_string()));
    header.push("Total amount of commits".into());
    let mut rows = Vec::new();
    let mut totals = vec![0u64; KeywordCategory::ALL.len()];
    let mut grand = 0;
    for r in reports {
        let mut row = vec![r.repo.project_name()];
        for (i, c) in KeywordCategory::ALL.iter().enumerate() {
            let n = r.categories.counts.get(c).copied().unwrap_or(0);
            totals[i] += n;
            row.push(n.to_string());
        }
        grand += r.categories.total_commits;
        row.push(r.categories.total_commits.to_string());
        rows.push(row);
    }
    let mut total_row = vec!["In total".to_string()];
    total_row.extend(totals.iter().map(u64::to_string));
    total_row.push(grand.to_string());
    rows.push(total_row);
    let mut pct_row = vec!["Percentage(%)".to_string()];
    pct_row.extend(totals.iter().map(|n| pct(ratio(*n, grand))));
    pct_row.push(String::new());
    rows.push(pct_row);
    write_table(out, header, rows)
}

fn split_table<W: Write>(
    reports: &[MiningReport],
    out: W,
    columns: &[&str],
    total_heading: &str,
    cells: impl Fn(&LabelTally) -> (Vec<u64>, u64),
) -> csv::Result<()> {
    let mut header = vec!["Project Name".to_string()];
    header.extend(columns.iter().map(|c| c.to_string()));
    header.push(total_heading.to_string());
    let mut rows = Vec::new();
    let mut totals = vec![0u64; columns.len()];
    let mut grand = 0;
    for r in reports {
        let (values, total) = cells(&r.labels);
        let mut row = vec![r.repo.project_name()];
        for (i, v) in values.iter().enumerate() {
            totals[i] += v;
            row.push(v.to_string());
        }
        grand += total;
        row.push(total.to_string());
        rows.push(row);
    }
    let mut total_row = vec!["In total".to_string()];
    total_row.extend(totals.iter().map(u64::to_string));
    total_row.push(grand.to_string());
    rows.push(total_row);
    let mut pct_row = vec!["Percentage(%)".to_string()];
    pct_row.extend(totals.iter().map(|n| pct(ratio(*n, grand))));
    pct_row.push(pct(if grand == 0 { 0.0 } else { 100.0 }));
    rows.push(pct_row);
    write_table(out, header, rows)
}

/// Practical and unpractical adding per project.
pub fn practicality_table<W: Write>(reports: &[MiningReport], out: W) -> csv::Result<()> {
    split_table(reports, out, &["practical adding", "unpractical adding"], "Total amount of adding commits", |t| {
        (vec![t.practical, t.unpractical], t.adding)
    })
}

/// Content kinds of practical adding per project.
pub fn content_table<W: Write>(reports: &[MiningReport], out: W) -> csv::Result<()> {
    let headings: Vec<&str> = ContentClass::ALL.iter().map(|c| c.heading()).collect();
    split_table(reports, out, &headings, "Total amount of practical adding", |t| {
        (ContentClass::ALL.iter().map(|c| t.content_count(*c)).collect(), t.practical)
    })
}

/// Easy and difficult organs per project.
pub fn transplantability_table<W: Write>(reports: &[MiningReport], out: W) -> csv::Result<()> {
    split_table(
        reports,
        out,
        &["easy-to-transplant", "difficult-to-transplant"],
        "Total amount of practical adding",
        |t| (vec![t.easy, t.difficult], t.practical),
    )
}
