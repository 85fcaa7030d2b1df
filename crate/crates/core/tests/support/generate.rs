//! Random commit histories for property tests.

use grafter_core::ingest::{ChangeKind, CommitRecord, DiffHunk, FileChange, LineMarker};
use proptest::prelude::*;

const PATHS: [&str; 9] = [
    "src/Player.java",
    "src/util.py",
    "README.md",
    "res/logo.png",
    "build.gradle",
    "docs/guide.md",
    "package.json",
    "config/app.yml",
    "lib/core.js",
];
const SNIPPETS: [&str; 12] = [
    "int a = 1;",
    "a = b + 1;",
    "if (a > 0) {",
    "}",
    "void f() {",
    "class K {",
    ";",
    "print(x);",
    "for (int i = 0; i < n; i++) {",
    "# Title",
    "return a;",
    "x",
];
const MESSAGES: [&str; 8] = [
    "Add feature",
    "add helper",
    "Fix bug",
    "Update docs",
    "Added icon and fixed layout",
    "Merge branch",
    "cleanup",
    "adds tests",
];

fn file_change() -> impl Strategy<Value = FileChange> {
    let line = (
        prop::sample::select(vec![LineMarker::Added, LineMarker::Added, LineMarker::Removed, LineMarker::Context]),
        prop::sample::select(SNIPPETS.to_vec()),
    )
        .prop_map(|(m, s)| (m, s.to_string()));
    (prop::sample::select(PATHS.to_vec()), prop::collection::vec(line, 0..10), 1u32..40).prop_map(
        |(path, lines, start)| {
            let binary = path.ends_with(".png");
            FileChange {
                path: path.to_string(),
                kind: ChangeKind::Modified,
                binary,
                hunks: if binary { vec![] } else { vec![DiffHunk { new_start: start, lines }] },
            }
        },
    )
}

pub fn corpus() -> impl Strategy<Value = Vec<CommitRecord>> {
    let commit = (prop::sample::select(MESSAGES.to_vec()), prop::collection::vec(file_change(), 0..4));
    prop::collection::vec(commit, 0..16).prop_map(|cs| {
        cs.into_iter()
            .enumerate()
            .map(|(i, (m, files))| CommitRecord {
                id: format!("{i:040x}"),
                timestamp: i as i64,
                author: "gen".into(),
                message: m.to_string(),
                parents: vec![],
                files,
            })
            .collect()
    })
}
