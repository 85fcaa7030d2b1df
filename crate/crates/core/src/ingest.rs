//! Commit enumeration and added-code extraction from git repositories.

use std::path::{Path, PathBuf};

use git2::{DiffFindOptions, DiffOptions, Oid, Repository, Sort};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: not a git repository", path.display())]
    NotARepository { path: PathBuf, source: git2::Error },
    #[error("{}: {source}", path.display())]
    Git { path: PathBuf, source: git2::Error },
    #[error("{}: branch `{branch}` not found", path.display())]
    BranchNotFound { path: PathBuf, branch: String },
    #[error("{}: commit `{id}` not found", path.display())]
    CommitNotFound { path: PathBuf, id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Added,
    Deleted,
    Modified,
    Renamed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineMarker {
    Context,
    Added,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffHunk {
    /// 1-based first line in the post-image.
    pub new_start: u32,
    pub lines: Vec<(LineMarker, String)>,
}

impl DiffHunk {
    /// Number of post-image lines the hunk spans.
    pub fn new_len(&self) -> u32 {
        self.lines.iter().filter(|(m, _)| *m != LineMarker::Removed).count() as u32
    }

    pub fn added_count(&self) -> usize {
        self.lines.iter().filter(|(m, _)| *m == LineMarker::Added).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub kind: ChangeKind,
    /// Binary files carry no hunks.
    pub binary: bool,
    pub hunks: Vec<DiffHunk>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub id: String,
    /// Committer time, seconds since the epoch (UTC).
    pub timestamp: i64,
    pub author: String,
    pub message: String,
    pub parents: Vec<String>,
    pub files: Vec<FileChange>,
}

impl CommitRecord {
    pub fn added_line_count(&self) -> usize {
        self.files.iter().flat_map(|f| &f.hunks).map(DiffHunk::added_count).sum()
    }

    pub fn is_merge(&self) -> bool {
        self.parents.len() > 1
    }
}

/// A maximal run of consecutive added lines in one hunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddedBlock {
    pub path: String,
    /// 1-based post-image line of the first added line.
    pub start_line: u32,
    pub lines: Vec<String>,
}

impl AddedBlock {
    pub fn end_line(&self) -> u32 {
        self.start_line + self.lines.len() as u32 - 1
    }

    pub fn text(&self) -> String {
        self.lines.join("\n")
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Keep commits whose committer time is at or before this instant.
    pub cutoff: Option<i64>,
    /// Walk this branch instead of HEAD.
    pub branch: Option<String>,
}

fn open(repo_path: &Path) -> Result<Repository, IngestError> {
    Repository::open(repo_path).map_err(|source| IngestError::NotARepository { path: repo_path.to_path_buf(), source })
}

/// Commits reachable from HEAD with committer time at or before `cutoff`,
/// sorted by `(timestamp, id)`.
pub fn enumerate_commits(repo_path: &Path, cutoff: Option<i64>) -> Result<Vec<CommitRecord>, IngestError> {
    enumerate_commits_with(repo_path, &IngestOptions { cutoff, branch: None })
}

pub fn enumerate_commits_with(repo_path: &Path, options: &IngestOptions) -> Result<Vec<CommitRecord>, IngestError> {
    let repo = open(repo_path)?;
    let git_err = |source| IngestError::Git { path: repo_path.to_path_buf(), source };

    let tip = match &options.branch {
        Some(branch) => {
            let b = repo
                .find_branch(branch, git2::BranchType::Local)
                .map_err(|_| IngestError::BranchNotFound { path: repo_path.to_path_buf(), branch: branch.clone() })?;
            b.get().target()
        }
        None => match repo.head() {
            Ok(head) => head.target(),
            // unborn HEAD: no commits yet
            Err(e) if e.code() == git2::ErrorCode::UnbornBranch || e.code() == git2::ErrorCode::NotFound => None,
            Err(e) => return Err(git_err(e)),
        },
    };
    let Some(tip) = tip else {
        return Ok(Vec::new());
    };

    let mut walk = repo.revwalk().map_err(git_err)?;
    walk.set_sorting(Sort::TOPOLOGICAL).map_err(git_err)?;
    walk.push(tip).map_err(git_err)?;
    let oids: Vec<Oid> = walk.collect::<Result<_, _>>().map_err(git_err)?;
    drop(repo);

    let mut records: Vec<CommitRecord> = oids
        .par_iter()
        .map_init(
            || Repository::open(repo_path),
            |repo, oid| -> Result<Option<CommitRecord>, IngestError> {
                let repo = repo.as_ref().map_err(|e| IngestError::Git {
                    path: repo_path.to_path_buf(),
                    source: git2::Error::new(e.code(), e.class(), e.message()),
                })?;
                let commit = repo
                    .find_commit(*oid)
                    .map_err(|e| IngestError::Git { path: repo_path.to_path_buf(), source: e })?;
                if options.cutoff.is_some_and(|c| commit.time().seconds() > c) {
                    return Ok(None);
                }
                commit_record(repo, &commit)
                    .map(Some)
                    .map_err(|e| IngestError::Git { path: repo_path.to_path_buf(), source: e })
            },
        )
        .filter_map(Result::transpose)
        .collect::<Result<_, _>>()?;
    records.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));
    Ok(records)
}

/// Full id of HEAD, if the repository has one.
pub fn head_commit(repo_path: &Path) -> Result<Option<String>, IngestError> {
    let repo = open(repo_path)?;
    let head = repo.head().ok().and_then(|h| h.target());
    Ok(head.map(|o| o.to_string()))
}

/// Looks up one commit by (possibly abbreviated) id.
pub fn find_commit(repo_path: &Path, id: &str) -> Result<CommitRecord, IngestError> {
    let repo = open(repo_path)?;
    let not_found = || IngestError::CommitNotFound { path: repo_path.to_path_buf(), id: id.to_string() };
    let obj = repo.revparse_single(id).map_err(|_| not_found())?;
    let commit = obj.peel_to_commit().map_err(|_| not_found())?;
    commit_record(&repo, &commit).map_err(|source| IngestError::Git { path: repo_path.to_path_buf(), source })
}

/// Contents of `path` as of commit `id`, or `None` when absent or not UTF-8.
pub fn read_file_at(repo_path: &Path, id: &str, path: &str) -> Result<Option<String>, IngestError> {
    let repo = open(repo_path)?;
    let not_found = || IngestError::CommitNotFound { path: repo_path.to_path_buf(), id: id.to_string() };
    let commit = repo.revparse_single(id).and_then(|o| o.peel_to_commit()).map_err(|_| not_found())?;
    let tree = commit.tree().map_err(|source| IngestError::Git { path: repo_path.to_path_buf(), source })?;
    let Ok(entry) = tree.get_path(Path::new(path)) else {
        return Ok(None);
    };
    let blob = entry
        .to_object(&repo)
        .and_then(|o| o.peel_to_blob())
        .map_err(|source| IngestError::Git { path: repo_path.to_path_buf(), source })?;
    Ok(std::str::from_utf8(blob.content()).ok().map(str::to_string))
}

fn commit_record(repo: &Repository, commit: &git2::Commit) -> Result<CommitRecord, git2::Error> {
    let tree = commit.tree()?;
    // merges are diffed against their first parent
    let parent_tree = match commit.parent_count() {
        0 => None,
        _ => Some(commit.parent(0)?.tree()?),
    };
    let mut opts = DiffOptions::new();
    opts.context_lines(3);
    let mut diff = repo.diff_tree_to_tree(parent_tree.as_ref(), Some(&tree), Some(&mut opts))?;
    diff.find_similar(Some(DiffFindOptions::new().renames(true)))?;

    let mut files = Vec::new();
    for idx in 0..diff.deltas().len() {
        let delta = diff.get_delta(idx).expect("delta index in range");
        let kind = match delta.status() {
            git2::Delta::Added => ChangeKind::Added,
            git2::Delta::Deleted => ChangeKind::Deleted,
            git2::Delta::Renamed => ChangeKind::Renamed,
            _ => ChangeKind::Modified,
        };
        let file = if kind == ChangeKind::Deleted { delta.old_file() } else { delta.new_file() };
        let path = file.path().map(|p| p.to_string_lossy().replace('\\', "/")).unwrap_or_default();
        let mut change = FileChange { path, kind, binary: delta.flags().is_binary(), hunks: Vec::new() };
        if let Some(patch) = git2::Patch::from_diff(&diff, idx)? {
            if patch.delta().flags().is_binary() {
                change.binary = true;
            }
            for h in 0..patch.num_hunks() {
                let (hunk, n) = patch.hunk(h)?;
                let mut lines = Vec::with_capacity(n);
                for l in 0..n {
                    let line = patch.line_in_hunk(h, l)?;
                    let marker = match line.origin() {
                        '+' => LineMarker::Added,
                        '-' => LineMarker::Removed,
                        ' ' => LineMarker::Context,
                        _ => continue,
                    };
                    let text = String::from_utf8_lossy(line.content());
                    let text = text.strip_suffix('\n').unwrap_or(&text);
                    let text = text.strip_suffix('\r').unwrap_or(text);
                    lines.push((marker, text.to_string()));
                }
                change.hunks.push(DiffHunk { new_start: hunk.new_start(), lines });
            }
        }
        if change.binary {
            change.hunks.clear();
        }
        files.push(change);
    }

    let sig = commit.author();
    Ok(CommitRecord {
        id: commit.id().to_string(),
        timestamp: commit.time().seconds(),
        author: sig.name().unwrap_or_default().to_string(),
        message: commit.message().unwrap_or_default().to_string(),
        parents: commit.parent_ids().map(|p| p.to_string()).collect(),
        files,
    })
}

/// Every maximal run of added lines within a hunk, ordered by `(path, start_line)`.
pub fn extract_added_blocks(commit: &CommitRecord) -> Vec<AddedBlock> {
    let mut blocks = Vec::new();
    for file in &commit.files {
        for hunk in &file.hunks {
            let mut line = hunk.new_start;
            let mut current: Option<AddedBlock> = None;
            for (marker, text) in &hunk.lines {
                match marker {
                    LineMarker::Added => {
                        current
                            .get_or_insert_with(|| AddedBlock {
                                path: file.path.clone(),
                                start_line: line,
                                lines: Vec::new(),
                            })
                            .lines
                            .push(text.clone());
                        line += 1;
                    }
                    LineMarker::Context => {
                        blocks.extend(current.take());
                        line += 1;
                    }
                    LineMarker::Removed => blocks.extend(current.take()),
                }
            }
            blocks.extend(current.take());
        }
    }
    blocks.sort_by(|a, b| (&a.path, a.start_line).cmp(&(&b.path, b.start_line)));
    blocks
}

/// True when some added run sits directly next to a removed run in the same
/// hunk (a line replaced in place).
pub fn has_paired_removals(commit: &CommitRecord) -> bool {
    commit.files.iter().flat_map(|f| &f.hunks).any(|h| {
        h.lines.windows(2).any(|w| {
            matches!(
                (w[0].0, w[1].0),
                (LineMarker::Removed, LineMarker::Added) | (LineMarker::Added, LineMarker::Removed)
            )
        })
    })
}

/// Parses `git diff` / `git show` unified diff text into file changes.
pub fn parse_unified_diff(text: &str) -> Vec<FileChange> {
    let mut files: Vec<FileChange> = Vec::new();
    let mut current: Option<FileChange> = None;
    let mut in_hunk = false;

    let strip = |p: &str| -> String {
        let p = p.trim();
        let p = p.split('\t').next().unwrap_or(p);
        p.strip_prefix("a/").or_else(|| p.strip_prefix("b/")).unwrap_or(p).to_string()
    };

    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            files.extend(current.take());
            in_hunk = false;
            let path = rest.rsplit(" b/").next().map(str::to_string).unwrap_or_default();
            current = Some(FileChange { path, kind: ChangeKind::Modified, binary: false, hunks: Vec::new() });
            continue;
        }
        if let Some(hdr) = line.strip_prefix("@@ ") {
            let new_start = hdr
                .split_whitespace()
                .find_map(|t| t.strip_prefix('+'))
                .and_then(|t| t.split(',').next())
                .and_then(|n| n.parse().ok())
                .unwrap_or(1);
            let file = current.get_or_insert_with(|| FileChange {
                path: String::new(),
                kind: ChangeKind::Modified,
                binary: false,
                hunks: Vec::new(),
            });
            file.hunks.push(DiffHunk { new_start, lines: Vec::new() });
            in_hunk = true;
            continue;
        }
        let Some(file) = current.as_mut() else {
            if let Some(p) = line.strip_prefix("--- ") {
                current =
                    Some(FileChange { path: strip(p), kind: ChangeKind::Modified, binary: false, hunks: Vec::new() });
            }
            continue;
        };
        if in_hunk {
            let hunk = file.hunks.last_mut().expect("hunk open");
            match line.as_bytes().first() {
                Some(b'+') => {
                    hunk.lines.push((LineMarker::Added, line[1..].to_string()));
                    continue;
                }
                Some(b'-') if !line.starts_with("--- ") => {
                    hunk.lines.push((LineMarker::Removed, line[1..].to_string()));
                    continue;
                }
                Some(b' ') => {
                    hunk.lines.push((LineMarker::Context, line[1..].to_string()));
                    continue;
                }
                None => {
                    hunk.lines.push((LineMarker::Context, String::new()));
                    continue;
                }
                Some(b'\\') => continue,
                _ => in_hunk = false,
            }
        }
        if line.starts_with("new file mode") {
            file.kind = ChangeKind::Added;
        } else if line.starts_with("deleted file mode") {
            file.kind = ChangeKind::Deleted;
        } else if let Some(p) = line.strip_prefix("rename to ") {
            file.kind = ChangeKind::Renamed;
            file.path = p.trim().to_string();
        } else if line.starts_with("Binary files ") || line.starts_with("GIT binary patch") {
            file.binary = true;
        } else if let Some(p) = line.strip_prefix("+++ ") {
            if p.trim() != "/dev/null" {
                file.path = strip(p);
            }
        } else if let Some(p) = line.strip_prefix("--- ") {
            if p.trim() == "/dev/null" {
                file.kind = ChangeKind::Added;
            } else if file.path.is_empty() {
                file.path = strip(p);
            }
        }
    }
    files.extend(current);
    for f in &mut files {
        if f.kind == ChangeKind::Deleted {
            f.hunks.iter_mut().for_each(|h| h.lines.retain(|(m, _)| *m != LineMarker::Added));
        }
    }
    files
}
