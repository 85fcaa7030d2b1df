//! End-to-end acceptance run: one PASS/FAIL line per criterion, each under
//! its own time limit.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use grafter_core::classify::{tally, Classifier, KeywordCategory};
use grafter_core::code::{free_identifiers, parse, parse_lenient};
use grafter_core::config::RunConfig;
use grafter_core::host::{discover_hosts, fitness, rank, split_name};
use grafter_core::ingest::{enumerate_commits, extract_added_blocks, read_file_at, CommitRecord};
use grafter_core::organ::{analyze_commit, tally_labels, ContentClass, LabelTally, PracticalityRules};
use grafter_core::report::mine;
use grafter_core::transplant::{
    record_edits, transplant_loop, EditLedger, Snapshot, TransplantOptions, TransplantStatus,
};
use grafter_core::vein::{build_graft, Graft, GraftFile, Organ};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use support::{classifier_corpus, copy_fixture, minilang_fixtures, oracle, replay, vein_cases};

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const DONOR_CONTEXT: &str = "int a = 10;
int b = 0;
for(; a>0; a=a-1)
{
b++;
}

a = 10;
";
const DONOR_ORGAN: &str = "if(a > 5)
{
System.out.print(\"Just an example\");
}
";
const EXPECTED_GRAFT: &str = "int a = 10;
if(a > 5)
{
System.out.print(\"Just an example\");
}";

fn normalized(text: &str) -> Vec<String> {
    text.lines().map(|l| l.split_whitespace().collect::<Vec<_>>().join(" ")).filter(|l| !l.is_empty()).collect()
}

fn golden_vein() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (organ, context) = (dir.path().join("organ.mini"), dir.path().join("context.mini"));
    std::fs::write(&organ, DONOR_ORGAN).unwrap();
    std::fs::write(&context, DONOR_CONTEXT).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_grafter"))
        .args(["vein".as_ref(), organ.as_os_str(), context.as_os_str(), "10".as_ref()])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("vein exited with {:?}", out.status.code()))?;
    let file = GraftFile::parse(&String::from_utf8_lossy(&out.stdout));
    ensure(file.vein_notes.len() == 1, || format!("expected one vein statement, got {:?}", file.vein_notes))?;
    ensure(file.vein_notes[0].starts_with("a <- line 8"), || format!("vein source: {}", file.vein_notes[0]))?;
    ensure(file.text.ends_with(DONOR_ORGAN.trim_end()), || "organ lines changed".into())?;
    ensure(normalized(&file.text) == normalized(EXPECTED_GRAFT), || format!("graft was:\n{}", file.text))
}

fn fitness_suite() -> Check {
    let f = |x: &str, y: &str| fitness(&split_name(x), &split_name(y)).map_err(|e| e.to_string());
    let same = f("NodeEditActivity", "NodeEditActivity")?;
    ensure(*same.value.numer() * 2 == *same.value.denom(), || format!("identical names scored {}", same.value))?;
    let disjoint = f("PlayerActivity", "NoteList")?;
    ensure(*disjoint.value.numer() == 0, || format!("disjoint names scored {}", disjoint.value))?;
    let player_node = f("PlayerActivity", "NodeEditActivity")?;
    ensure((*player_node.value.numer(), *player_node.value.denom()) == (1, 5), || {
        format!("expected 1/5, got {}", player_node.value)
    })?;

    let word = prop::sample::select(vec!["node", "edit", "player", "activity", "main", "list", "view", "note", "data"]);
    let name = prop::collection::vec(word, 1..5)
        .prop_map(|ws| ws.iter().map(|w| w[..1].to_uppercase() + &w[1..]).collect::<String>());
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner
        .run(&(name.clone(), name), |(x, y)| {
            let (fx, fy) = (
                fitness(&split_name(&x), &split_name(&y)).unwrap(),
                fitness(&split_name(&y), &split_name(&x)).unwrap(),
            );
            prop_assert_eq!(fx.value, fy.value);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn classifier_corpus_tally() -> Check {
    let corpus = classifier_corpus();
    ensure(corpus.commit.len() >= 50, || "corpus has fewer than 50 commits".into())?;
    let labels: Vec<BTreeSet<KeywordCategory>> =
        corpus.commit.iter().map(|c| c.categories.iter().map(|s| s.parse().unwrap()).collect()).collect();
    ensure(labels.iter().flatten().collect::<BTreeSet<_>>().len() == 8, || "not every category is covered".into())?;
    ensure(labels.iter().filter(|l| l.len() > 1).count() >= 5, || "fewer than 5 multi-keyword messages".into())?;

    let (repo, _) = replay(&corpus);
    let commits = enumerate_commits(repo.path(), None).map_err(|e| e.to_string())?;
    let t = tally(&commits);
    let mut want: BTreeMap<KeywordCategory, u64> = BTreeMap::new();
    for l in &labels {
        for c in l {
            *want.entry(*c).or_default() += 1;
        }
    }
    for c in KeywordCategory::ALL {
        let w = want.get(&c).copied().unwrap_or(0);
        ensure(t.count(c) == w, || format!("{c}: counted {}, labelled {w}", t.count(c)))?;
    }
    ensure(t.total_commits == commits.len() as u64, || "total mismatch".into())?;
    ensure(t.sum_of_counts() >= t.total_commits, || "category sum below total".into())?;
    let classifier = Classifier::default();
    for c in &commits {
        let cats = classifier.classify(&c.message);
        ensure(!cats.contains(&KeywordCategory::Other) || cats.len() == 1, || {
            format!("other is not exclusive: {:?}", c.message)
        })?;
    }
    Ok(())
}

fn partitions(t: &LabelTally) -> Check {
    let content: u64 = ContentClass::ALL.iter().map(|c| t.content_count(*c)).sum();
    ensure(t.practical + t.unpractical == t.adding, || format!("practical + unpractical != adding: {t:?}"))?;
    ensure(t.easy + t.difficult == t.practical, || format!("easy + difficult != practical: {t:?}"))?;
    ensure(content == t.practical, || format!("content kinds sum to {content}, practical is {}", t.practical))
}

fn label_commits(commits: &[CommitRecord]) -> LabelTally {
    let (classifier, rules) = (Classifier::default(), PracticalityRules::default());
    let candidates: Vec<_> = commits.iter().filter_map(|c| analyze_commit(c, &classifier, &rules, None)).collect();
    tally_labels(&candidates)
}

fn partition_identities() -> Check {
    let (repo, _) = replay(&classifier_corpus());
    let report = mine(repo.path(), &RunConfig::default()).map_err(|e| e.to_string())?;
    partitions(&report.labels)?;
    ensure(report.is_consistent(), || "fixture report is inconsistent".into())?;

    let mut runner = TestRunner::new(Config { cases: 256, failure_persistence: None, ..Config::default() });
    let corpora = std::cell::Cell::new(0);
    let result = runner.run(&support::generate::corpus(), |commits| {
        corpora.set(corpora.get() + 1);
        partitions(&label_commits(&commits)).map_err(TestCaseError::fail)
    });
    result.map_err(|e| e.to_string())?;
    ensure(corpora.get() >= 200, || format!("only {} generated corpora", corpora.get()))
}

fn oracle_equivalence() -> Check {
    let fixtures = minilang_fixtures();
    ensure(fixtures.len() >= 30, || format!("only {} fixtures", fixtures.len()))?;
    for (name, src, _) in &fixtures {
        ensure(src.lines().count() <= 50, || format!("{name} is longer than 50 lines"))?;
        let unit = parse(src).map_err(|e| format!("{name}: {e}"))?;
        let (got, want) = (free_identifiers(&unit, None).variables, oracle::free_variables(src));
        ensure(got == want, || format!("{name}: analyzer {got:?}, oracle {want:?}"))?;
    }
    Ok(())
}

fn open_variables(text: &str, imports: &BTreeSet<String>) -> BTreeSet<String> {
    let mut out = free_identifiers(&parse_lenient(text), None).variables;
    out.extend(oracle::free_variables(text));
    out.retain(|v| !imports.contains(v));
    out
}

fn check_graft(name: &str, g: &Graft) -> Check {
    let open = open_variables(&g.text, &g.required_imports);
    ensure(open.is_empty(), || format!("{name}: graft still reads {open:?}"))?;
    for skip in 0..g.vein.statements.len() {
        let mut lines: Vec<&str> =
            g.vein.statements.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, s)| s.text.as_str()).collect();
        lines.push(&g.organ_text);
        let open = open_variables(&lines.join("\n"), &g.required_imports);
        ensure(!open.is_empty(), || format!("{name}: vein statement {skip} is redundant"))?;
    }
    Ok(())
}

fn graft_soundness() -> Check {
    let mut grafts = 0;
    for case in vein_cases().iter().filter(|c| c.error.is_none()) {
        let ctx = parse(&case.context).map_err(|e| e.to_string())?;
        let organ = Organ::from_source("organ", &case.organ, &ctx, case.line);
        let g = build_graft(&organ, &ctx).map_err(|e| format!("{}: {e}", case.name))?;
        check_graft(&case.name, &g)?;
        grafts += 1;
    }
    // Organs mined from the fixture history, grafted against their own file.
    let (repo, _) = replay(&classifier_corpus());
    let rules = PracticalityRules::default();
    for commit in enumerate_commits(repo.path(), None).map_err(|e| e.to_string())? {
        let code: Vec<_> = extract_added_blocks(&commit).into_iter().filter(|b| rules.is_code_path(&b.path)).collect();
        let Some(first) = code.first() else { continue };
        let src = read_file_at(repo.path(), &commit.id, &first.path).map_err(|e| e.to_string())?.unwrap_or_default();
        let ctx = parse_lenient(&src);
        let organ = Organ::new(code.clone(), &ctx, first.start_line);
        if let Ok(g) = build_graft(&organ, &ctx) {
            check_graft(&commit.message, &g)?;
            grafts += 1;
        }
    }
    ensure(grafts > 0, || "no grafts built".into())
}

fn transplant_safety() -> Check {
    let ctx = parse(DONOR_CONTEXT).unwrap();
    let graft =
        build_graft(&Organ::from_source("organ", DONOR_ORGAN.trim_end(), &ctx, 10), &ctx).map_err(|e| e.to_string())?;
    let run = |cmd: &str| -> Result<(grafter_core::transplant::TransplantOutcome, bool), String> {
        let dir = copy_fixture("host5");
        let hosts = discover_hosts(dir.path()).map_err(|e| e.to_string())?;
        ensure(hosts.len() == 5, || format!("fixture host has {} classes", hosts.len()))?;
        let names: Vec<_> = hosts.iter().map(|h| h.name.clone()).collect();
        let ranking = rank(&split_name("PlayerActivity"), &names).map_err(|e| e.to_string())?;
        let before = Snapshot::checksums(dir.path()).map_err(|e| e.to_string())?;
        let outcome = transplant_loop(&graft, &ranking, &hosts, dir.path(), &TransplantOptions::new(vec![cmd.into()]))
            .map_err(|e| e.to_string())?;
        let unchanged = Snapshot::checksums(dir.path()).map_err(|e| e.to_string())? == before;
        Ok((outcome, unchanged))
    };
    let (failing, unchanged) = run("false")?;
    ensure(failing.attempts.len() == 5, || format!("{} attempts with a failing test", failing.attempts.len()))?;
    ensure(failing.status == TransplantStatus::Failure, || format!("status {:?}", failing.status))?;
    ensure(unchanged, || "host files differ after failed attempts".into())?;
    let (passing, _) = run("true")?;
    ensure(passing.attempts.len() == 1, || format!("{} attempts with a passing test", passing.attempts.len()))?;
    ensure(passing.status == TransplantStatus::Success, || format!("status {:?}", passing.status))
}

fn edit_ledger() -> Check {
    let before = Snapshot::from_pairs([(
        "PlayerActivity.java",
        "class PlayerActivity {\n    void onCreate() {\n        int a = 10;\n        if(a > 5)\n        {\n            System.out.print(\"Just an example\");\n        }\n    }\n}\n",
    )]);
    let after = Snapshot::from_pairs([(
        "PlayerActivity.java",
        "import java.io.PrintStream;\nclass PlayerActivity {\n    void onCreate() {\n        int a = 10;\n        if(a > 5)\n        {\n            Log.d(\"demo\", \"Just an example\");\n        }\n    }\n}\n",
    )]);
    let ledger = record_edits(&before, &after);
    let want = EditLedger { adding: 1, deleting: 0, modifying: 1 };
    ensure(ledger == want, || format!("got {ledger:?}"))
}

/// Writes past the test harness output capture.
fn emit(line: String) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

type Criterion = (&'static str, Duration, fn() -> Check);

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("golden vein", Duration::from_secs(1), golden_vein),
        ("fitness suite", Duration::from_secs(1), fitness_suite),
        ("classifier fixture corpus", Duration::from_secs(5), classifier_corpus_tally),
        ("partition identities", Duration::from_secs(10), partition_identities),
        ("free-identifier oracle equivalence", Duration::from_secs(5), oracle_equivalence),
        ("graft soundness", Duration::from_secs(5), graft_soundness),
        ("transplant loop safety and termination", Duration::from_secs(5), transplant_safety),
        ("edit ledger", Duration::from_secs(1), edit_ledger),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = result.and_then(|()| ensure(took < *limit, || format!("took {took:?}, limit {limit:?}")));
        match result {
            Ok(()) => emit(format!("criterion {} {name}: PASS ({} ms)", i + 1, took.as_millis())),
            Err(e) => {
                emit(format!("criterion {} {name}: FAIL ({} ms): {e}", i + 1, took.as_millis()));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
