//! Insert-and-test loop over ranked host classes, and edit accounting.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use similar::{DiffOp, TextDiff};
use thiserror::Error;
use walkdir::WalkDir;

use crate::code::parse_lenient;
use crate::host::{insert_graft, insertion_point, is_definition_shaped, ClassName, HostClass, MatchRanking};
use crate::vein::Graft;

pub const LOCK_FILE: &str = ".grafter.lock";

#[derive(Debug, Error)]
pub enum TransplantError {
    #[error("test command is empty")]
    EmptyCommand,
    #[error("test command `{0}` is not an executable file or on PATH")]
    NotExecutable(String),
    #[error("host {} is locked by another run ({})", .0.display(), LOCK_FILE)]
    Locked(PathBuf),
    #[error("restoring {} left it different from the original", .0.display())]
    RestoreMismatch(PathBuf),
    #[error("io error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TransplantError + '_ {
    move |source| TransplantError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Passed,
    Failed,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRun {
    pub status: TestStatus,
    /// Exit code, absent on timeout or signal.
    pub exit_code: Option<i32>,
}

impl TestRun {
    pub fn passed(&self) -> bool {
        self.status == TestStatus::Passed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub class: ClassName,
    pub path: PathBuf,
    pub insertion_line: u32,
    pub target_function: Option<String>,
    /// Absent for dry runs.
    pub test: Option<TestRun>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransplantStatus {
    Success,
    Failure,
    /// Dry run: insertions were planned, nothing was tested.
    Planned,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditLedger {
    pub adding: u64,
    pub deleting: u64,
    pub modifying: u64,
}

impl EditLedger {
    pub fn total(&self) -> u64 {
        self.adding + self.deleting + self.modifying
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransplantOutcome {
    pub attempts: Vec<Attempt>,
    pub status: TransplantStatus,
    /// Edits made to the host after insertion, on success.
    pub edits: Option<EditLedger>,
    /// Ranked classes that no host file defines.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TransplantOptions {
    /// Program and arguments, run in the host root.
    pub test_command: Vec<String>,
    pub timeout: Duration,
    pub dry_run: bool,
}

impl TransplantOptions {
    pub fn new(test_command: Vec<String>) -> Self {
        TransplantOptions { test_command, timeout: Duration::from_secs(300), dry_run: false }
    }
}

fn is_executable(path: &Path) -> bool {
    let Ok(meta) = fs::metadata(path) else { return false };
    if !meta.is_file() {
        return false;
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        meta.permissions().mode() & 0o111 != 0
    }
    #[cfg(not(unix))]
    {
        true
    }
}

/// Resolves the program of `command` the way a shell would, relative to `cwd`.
pub fn resolve_program(command: &[String], cwd: &Path) -> Result<PathBuf, TransplantError> {
    let program = command.first().ok_or(TransplantError::EmptyCommand)?;
    let candidate = Path::new(program);
    if candidate.components().count() > 1 || candidate.is_absolute() {
        let full = if candidate.is_absolute() { candidate.to_path_buf() } else { cwd.join(candidate) };
        return if is_executable(&full) { Ok(full) } else { Err(TransplantError::NotExecutable(program.clone())) };
    }
    let path = std::env::var_os("PATH").unwrap_or_default();
    std::env::split_paths(&path)
        .map(|dir| dir.join(program))
        .find(|p| is_executable(p))
        .ok_or_else(|| TransplantError::NotExecutable(program.clone()))
}

/// Runs the test command in `cwd`; a run longer than `timeout` is killed and
/// counts as a failure.
pub fn run_test(program: &Path, args: &[String], cwd: &Path, timeout: Duration) -> Result<TestRun, TransplantError> {
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(io_err(program))?;
    let start = Instant::now();
    loop {
        if let Some(status) = child.try_wait().map_err(io_err(program))? {
            let run = if status.success() {
                TestRun { status: TestStatus::Passed, exit_code: status.code() }
            } else {
                TestRun { status: TestStatus::Failed, exit_code: status.code() }
            };
            return Ok(run);
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(TestRun { status: TestStatus::TimedOut, exit_code: None });
        }
        thread::sleep(Duration::from_millis(5));
    }
}

/// Exclusive hold on a host tree, released on drop.
struct HostLock {
    path: PathBuf,
}

impl HostLock {
    fn acquire(root: &Path) -> Result<Self, TransplantError> {
        let path = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(HostLock { path }),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(TransplantError::Locked(root.to_path_buf())),
            Err(e) => Err(TransplantError::Io { path, source: e }),
        }
    }
}

impl Drop for HostLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn digest(bytes: &[u8]) -> Vec<u8> {
    Sha256::digest(bytes).to_vec()
}

/// Writes `original` back to `path` and checks the result by checksum.
fn restore(path: &Path, original: &[u8]) -> Result<(), TransplantError> {
    fs::write(path, original).map_err(io_err(path))?;
    let now = fs::read(path).map_err(io_err(path))?;
    if digest(&now) != digest(original) {
        return Err(TransplantError::RestoreMismatch(path.to_path_buf()));
    }
    Ok(())
}

/// Tries the graft in each ranked class until the test command passes or
/// every class has been tried. Host files are restored after each failed
/// attempt and after a dry run.
pub fn transplant_loop(
    graft: &Graft,
    ranking: &MatchRanking,
    hosts: &[HostClass],
    host_root: &Path,
    options: &TransplantOptions,
) -> Result<TransplantOutcome, TransplantError> {
    let program = resolve_program(&options.test_command, host_root)?;
    let _lock = HostLock::acquire(host_root)?;

    let by_name: BTreeMap<&str, &HostClass> = hosts.iter().map(|h| (h.name.raw.as_str(), h)).collect();
    let definition_shaped = is_definition_shaped(&parse_lenient(&graft.text));
    let donor_function = graft.provenance.donor_function.as_deref().or(graft.provenance.donor_class.as_deref());

    let mut outcome =
        TransplantOutcome { attempts: Vec::new(), status: TransplantStatus::Failure, edits: None, skipped: Vec::new() };
    for (class, _) in &ranking.candidates {
        let Some(host) = by_name.get(class.raw.as_str()) else {
            log::warn!("no host file defines class {}; skipping", class.raw);
            outcome.skipped.push(class.raw.clone());
            continue;
        };
        let file = host_root.join(&host.path);
        let original = fs::read(&file).map_err(io_err(&file))?;
        let source = String::from_utf8_lossy(&original).into_owned();
        let class_name = if host.declared { class.raw.as_str() } else { "" };
        let point = insertion_point(&source, class_name, definition_shaped, donor_function);
        let mut attempt = Attempt {
            class: class.clone(),
            path: host.path.clone(),
            insertion_line: point.line,
            target_function: point.target_function.clone(),
            test: None,
        };
        if options.dry_run {
            outcome.attempts.push(attempt);
            continue;
        }

        let grafted = insert_graft(&source, &point, &graft.text);
        fs::write(&file, &grafted).map_err(io_err(&file))?;
        let before = Snapshot::from_dir(host_root).map_err(io_err(host_root))?;
        let run = run_test(&program, &options.test_command[1..], host_root, options.timeout);
        let run = match run {
            Ok(r) => r,
            Err(e) => {
                restore(&file, &original)?;
                return Err(e);
            }
        };
        let passed = run.passed();
        attempt.test = Some(run);
        outcome.attempts.push(attempt);
        if passed {
            let after = Snapshot::from_dir(host_root).map_err(io_err(host_root))?;
            outcome.status = TransplantStatus::Success;
            outcome.edits = Some(record_edits(&before, &after));
            return Ok(outcome);
        }
        restore(&file, &original)?;
    }
    if options.dry_run {
        outcome.status = TransplantStatus::Planned;
    }
    Ok(outcome)
}

/// Text of every file under a directory, keyed by relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Snapshot {
    pub files: BTreeMap<String, String>,
}

impl Snapshot {
    pub fn from_dir(root: &Path) -> io::Result<Self> {
        let mut files = BTreeMap::new();
        let walker = WalkDir::new(root)
            .sort_by_file_name()
            .into_iter()
            .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
        for entry in walker {
            let entry = entry.map_err(io::Error::other)?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
            let bytes = fs::read(entry.path())?;
            files.insert(rel.to_string_lossy().replace('\\', "/"), String::from_utf8_lossy(&bytes).into_owned());
        }
        Ok(Snapshot { files })
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Snapshot { files: pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    /// SHA-256 per file, for byte-identity checks.
    pub fn checksums(root: &Path) -> io::Result<BTreeMap<String, Vec<u8>>> {
        let mut out = BTreeMap::new();
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(io::Error::other)?;
            if entry.file_type().is_file() {
                let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
                out.insert(rel.to_string_lossy().into_owned(), digest(&fs::read(entry.path())?));
            }
        }
        Ok(out)
    }
}

fn tally_ops(ops: &[DiffOp], ledger: &mut EditLedger) {
    let mut pending_delete = 0u64;
    let flush = |pending: &mut u64, ledger: &mut EditLedger| {
        ledger.deleting += *pending;
        *pending = 0;
    };
    for op in ops {
        match *op {
            DiffOp::Equal { .. } => flush(&mut pending_delete, ledger),
            DiffOp::Delete { old_len, .. } => pending_delete += old_len as u64,
            DiffOp::Insert { new_len, .. } => {
                let paired = pending_delete.min(new_len as u64);
                ledger.modifying += paired;
                ledger.adding += new_len as u64 - paired;
                pending_delete -= paired;
                flush(&mut pending_delete, ledger);
            }
            DiffOp::Replace { old_len, new_len, .. } => {
                let old = pending_delete + old_len as u64;
                let paired = old.min(new_len as u64);
                ledger.modifying += paired;
                ledger.adding += new_len as u64 - paired;
                ledger.deleting += old - paired;
                pending_delete = 0;
            }
        }
    }
    flush(&mut pending_delete, ledger);
}

/// Line-level edits between two snapshots: an added line is one adding, a
/// removed line one deleting, and a removed line directly replaced by an
/// added line one modifying. Files missing from one side count as empty.
pub fn record_edits(before: &Snapshot, after: &Snapshot) -> EditLedger {
    let mut ledger = EditLedger::default();
    let paths: BTreeSet<&String> = before.files.keys().chain(after.files.keys()).collect();
    for path in paths {
        let old = before.files.get(path).map(String::as_str).unwrap_or("");
        let new = after.files.get(path).map(String::as_str).unwrap_or("");
        if old == new {
            continue;
        }
        let diff = TextDiff::from_lines(old, new);
        tally_ops(diff.ops(), &mut ledger);
    }
    ledger
}
