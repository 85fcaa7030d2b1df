use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use grafter_core::classify::{KeywordCategory, MessageScope};
use grafter_core::code::{parse, parse_lenient};
use grafter_core::config::RunConfig;
use grafter_core::host::{discover_hosts, rank, split_name};
use grafter_core::ingest::{extract_added_blocks, find_commit, read_file_at};
use grafter_core::organ::{analyze_commit, classify_transplantability, organ_text, PracticalityRules};
use grafter_core::report::{self, MineError, MiningReport};
use grafter_core::transplant::{record_edits, transplant_loop, Snapshot, TransplantOptions, TransplantStatus};
use grafter_core::vein::{build_graft, Graft, GraftFile, Organ, Vein, VeinError};

const EXIT_INPUT: u8 = 2;
const EXIT_EMPTY: u8 = 3;
const EXIT_ANALYSIS: u8 = 4;

/// An error that carries the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn fail(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure { code, error: error.into() }
}

type Outcome = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "grafter", version, about = "Mine commit histories for code organs and graft them into hosts")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify every commit and label the adding commits.
    Mine(MineArgs),
    /// Write comma-separated tables from one or more mining reports.
    Tables(TablesArgs),
    /// Extract the organ added by one commit.
    Extract(ExtractArgs),
    /// Build a self-contained graft from an organ and its donor context.
    Vein(VeinArgs),
    /// Rank host classes for a graft and run the insert-and-test loop.
    Match(MatchArgs),
    /// Count line edits between two directory snapshots.
    Edits(EditsArgs),
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ignore commits after this date (YYYY-MM-DD, inclusive) or RFC 3339 time.
    #[arg(long)]
    cutoff: Option<String>,
    /// Walk this branch instead of HEAD.
    #[arg(long)]
    branch: Option<String>,
    /// Classify the whole commit message instead of its first line.
    #[arg(long)]
    whole_message: bool,
    /// Replace a category's keywords, e.g. `add=add,adds,introduce`.
    #[arg(long = "keywords", value_name = "CATEGORY=WORDS")]
    keywords: Vec<String>,
    /// Additions with at most this many tokens are a missing symbol.
    #[arg(long)]
    missing_symbol_tokens: Option<usize>,
    /// JSON file of manual labels keyed by commit id.
    #[arg(long)]
    labels: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut config = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(c) = &self.cutoff {
            config.cutoff = Some(c.clone());
        }
        if let Some(b) = &self.branch {
            config.branch = Some(b.clone());
        }
        if self.whole_message {
            config.message_scope = MessageScope::WholeMessage;
        }
        for spec in &self.keywords {
            let (cat, words) = spec.split_once('=').ok_or_else(|| anyhow!("expected CATEGORY=WORDS, got `{spec}`"))?;
            let cat: KeywordCategory = cat.trim().parse().map_err(|e: String| anyhow!(e))?;
            config
                .keywords
                .insert(cat, words.split(',').map(|w| w.trim().to_string()).filter(|w| !w.is_empty()).collect());
        }
        if let Some(n) = self.missing_symbol_tokens {
            config.missing_symbol_max_tokens = n;
        }
        if let Some(l) = &self.labels {
            config.label_overrides = Some(l.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct MineArgs {
    repo: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the four CSV tables into this directory.
    #[arg(long)]
    tables: Option<PathBuf>,
}

#[derive(Args)]
struct TablesArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    repo: PathBuf,
    commit: String,
    /// Directory for the organ source and its analysis.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Extract even when the commit message has no add keyword.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct VeinArgs {
    organ: PathBuf,
    context: PathBuf,
    /// Line of the context where the organ was added.
    insertion_line: u32,
    /// Write the graft here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Donor repository recorded in the graft header.
    #[arg(long)]
    donor_repo: Option<String>,
    /// Donor commit recorded in the graft header.
    #[arg(long)]
    commit: Option<String>,
}

#[derive(Args)]
struct MatchArgs {
    graft: PathBuf,
    host_root: PathBuf,
    /// Command run in the host root after each insertion; exit 0 is a pass.
    #[arg(long)]
    test_command: Option<String>,
    /// Print the ranking and stop.
    #[arg(long)]
    rank_only: bool,
    /// Plan insertions without touching the host.
    #[arg(long)]
    dry_run: bool,
    /// Seconds before a test run counts as failed.
    #[arg(long)]
    timeout: Option<u64>,
    /// Donor class name, when the graft header lacks one.
    #[arg(long)]
    donor_class: Option<String>,
    /// Write the outcome as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EditsArgs {
    before: PathBuf,
    after: PathBuf,
}

fn write_or_print(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => {
            fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(|e| fail(EXIT_INPUT, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_tables(reports: &[MiningReport], dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let open = |name: &str| fs::File::create(dir.join(name)).with_context(|| format!("creating {name}"));
    report::category_table(reports, open("categories.csv")?)?;
    report::practicality_table(reports, open("practicality.csv")?)?;
    report::content_table(reports, open("content.csv")?)?;
    report::transplantability_table(reports, open("transplantability.csv")?)?;
    Ok(())
}

fn cmd_mine(args: &MineArgs) -> Outcome {
    let config = args.config.resolve().map_err(|e| fail(EXIT_INPUT, e))?;
    let report = report::mine(&args.repo, &config).map_err(|e| match e {
        MineError::Ingest(_) | MineError::Config(_) => fail(EXIT_INPUT, e),
    })?;
    if let Some(dir) = &args.tables {
        write_tables(std::slice::from_ref(&report), dir).map_err(|e| fail(EXIT_INPUT, e))?;
    }
    write_or_print(args.out.as_deref(), &report.to_json())
}

fn cmd_tables(args: &TablesArgs) -> Outcome {
    let mut reports = Vec::new();
    for p in &args.reports {
        let text = fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(|e| fail(EXIT_INPUT, e))?;
        let r = MiningReport::from_json(&text)
            .with_context(|| format!("parsing {}", p.display()))
            .map_err(|e| fail(EXIT_INPUT, e))?;
        reports.push(r);
    }
    write_tables(&reports, &args.out_dir).map_err(|e| fail(EXIT_INPUT, e))
}

fn cmd_extract(args: &ExtractArgs) -> Outcome {
    let config = args.config.resolve().map_err(|e| fail(EXIT_INPUT, e))?;
    let commit = find_commit(&args.repo, &args.commit).map_err(|e| fail(EXIT_INPUT, e))?;
    let classifier = config.classifier();
    let rules: PracticalityRules = config.rules();
    let overrides = config.load_overrides().map_err(|e| fail(EXIT_INPUT, e))?;

    let candidate = analyze_commit(&commit, &classifier, &rules, overrides.get(&commit.id));
    if candidate.is_none() && !args.force {
        return Err(fail(EXIT_INPUT, anyhow!("commit {} is not an adding commit (use --force)", commit.id)));
    }
    let blocks = extract_added_blocks(&commit);
    if blocks.is_empty() {
        log::warn!("commit {} adds no lines; the organ is empty", commit.id);
        return Err(fail(EXIT_EMPTY, anyhow!("empty organ")));
    }

    let code: Vec<_> = blocks.iter().filter(|b| rules.is_code_path(&b.path)).cloned().collect();
    let code = if code.is_empty() { blocks.clone() } else { code };
    let first = &code[0];
    let context_src = read_file_at(&args.repo, &commit.id, &first.path).map_err(|e| fail(EXIT_INPUT, e))?;
    let context = parse_lenient(context_src.as_deref().unwrap_or(""));
    let transplantability = classify_transplantability(&code, Some(&context));
    let organ = Organ::new(code.clone(), &context, first.start_line);

    let files: std::collections::BTreeSet<&str> = blocks.iter().map(|b| b.path.as_str()).collect();
    let integrity = (blocks.len() > 1)
        .then(|| format!("organ spans {} blocks in {} file(s); all are kept together", blocks.len(), files.len()));
    if let Some(note) = &integrity {
        eprintln!("note: {note}");
    }

    fs::create_dir_all(&args.out_dir).map_err(|e| fail(EXIT_INPUT, e))?;
    let ext =
        Path::new(&first.path).extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "txt".into());
    let organ_path = args.out_dir.join(format!("organ.{ext}"));
    fs::write(&organ_path, organ_text(&code) + "\n").map_err(|e| fail(EXIT_INPUT, e))?;

    let analysis = serde_json::json!({
        "commit": commit.id,
        "summary": commit.message.lines().next().unwrap_or_default(),
        "organ_file": organ_path.display().to_string(),
        "blocks": blocks,
        "integrity_note": integrity,
        "practicality": candidate.as_ref().map(|c| c.practicality),
        "content": candidate.as_ref().and_then(|c| c.content),
        "transplantability": transplantability,
        "donor_class": organ.donor_class,
        "donor_function": organ.donor_function,
        "insertion_line": organ.insertion_line,
    });
    let text = serde_json::to_string_pretty(&analysis).expect("serializable") + "\n";
    fs::write(args.out_dir.join("organ.json"), &text).map_err(|e| fail(EXIT_INPUT, e))?;
    print!("{text}");
    Ok(())
}

fn cmd_vein(args: &VeinArgs) -> Outcome {
    let read = |p: &Path| {
        fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(|e| fail(EXIT_INPUT, e))
    };
    let organ_src = read(&args.organ)?;
    let context_src = read(&args.context)?;
    let context = parse(&context_src)
        .with_context(|| format!("parsing {}", args.context.display()))
        .map_err(|e| fail(EXIT_INPUT, e))?;
    parse(&organ_src).with_context(|| format!("parsing {}", args.organ.display())).map_err(|e| fail(EXIT_INPUT, e))?;
    if args.insertion_line == 0 {
        return Err(fail(EXIT_INPUT, anyhow!("insertion line is 1-based")));
    }
    let organ_src = organ_src.trim_end_matches('\n');
    let organ = Organ::from_source(&args.organ.display().to_string(), organ_src, &context, args.insertion_line);
    let mut graft = build_graft(&organ, &context).map_err(|e: VeinError| fail(EXIT_ANALYSIS, e))?;
    graft.provenance.donor_repo = args.donor_repo.clone();
    graft.provenance.commit = args.commit.clone();
    if graft.vein.is_empty() {
        eprintln!("note: empty vein; the organ needs nothing from its context");
    }
    for s in &graft.vein.statements {
        let flag = if s.conditional_origin { " (conditional)" } else { "" };
        eprintln!("vein: {} from line {}{}: {}", s.variable, s.source_line(), flag, s.text);
    }
    write_or_print(args.out.as_deref(), &graft.export())
}

fn cmd_match(args: &MatchArgs) -> Outcome {
    let config = match &args.config {
        Some(p) => RunConfig::load(p).map_err(|e| fail(EXIT_INPUT, e))?,
        None => RunConfig::default(),
    };
    let text = fs::read_to_string(&args.graft)
        .with_context(|| format!("reading {}", args.graft.display()))
        .map_err(|e| fail(EXIT_INPUT, e))?;
    let file = GraftFile::parse(&text);
    let donor = args
        .donor_class
        .clone()
        .or_else(|| file.provenance.donor_class.clone())
        .or_else(|| args.graft.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .ok_or_else(|| fail(EXIT_INPUT, anyhow!("donor class unknown; pass --donor-class")))?;
    let donor = split_name(&donor);

    let hosts = discover_hosts(&args.host_root)
        .with_context(|| format!("scanning {}", args.host_root.display()))
        .map_err(|e| fail(EXIT_INPUT, e))?;
    if hosts.is_empty() {
        return Err(fail(EXIT_INPUT, anyhow!("no classes found under {}", args.host_root.display())));
    }
    let names: Vec<_> = hosts.iter().map(|h| h.name.clone()).collect();
    let ranking = rank(&donor, &names).map_err(|e| fail(EXIT_INPUT, e))?;

    println!("rank\tclass\tfitness\tn_common\tn_x\tn_y\tfile");
    for (i, (class, score)) in ranking.candidates.iter().enumerate() {
        let path =
            hosts.iter().find(|h| h.name.raw == class.raw).map(|h| h.path.display().to_string()).unwrap_or_default();
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            class.raw,
            score.value,
            score.n_common,
            score.n_x,
            score.n_y,
            path
        );
    }
    if !file.required_imports.is_empty() {
        println!("before transplanting, make these available in the host:");
        for name in &file.required_imports {
            println!("  [ ] {name}");
        }
    }
    if args.rank_only {
        return Ok(());
    }

    let command = args
        .test_command
        .as_deref()
        .ok_or_else(|| fail(EXIT_INPUT, anyhow!("--test-command is required unless --rank-only")))?;
    let argv =
        shlex::split(command).ok_or_else(|| fail(EXIT_INPUT, anyhow!("cannot split test command `{command}`")))?;
    let options = TransplantOptions {
        test_command: argv,
        timeout: Duration::from_secs(args.timeout.unwrap_or(config.test_timeout_secs)),
        dry_run: args.dry_run,
    };
    let graft = Graft {
        text: file.text.clone(),
        organ_text: file.text.clone(),
        vein: Vein::default(),
        provenance: file.provenance.clone(),
        required_imports: file.required_imports.clone(),
    };
    let outcome =
        transplant_loop(&graft, &ranking, &hosts, &args.host_root, &options).map_err(|e| fail(EXIT_INPUT, e))?;
    for a in &outcome.attempts {
        let result = match &a.test {
            None => "planned".to_string(),
            Some(t) => format!("{:?} (exit {:?})", t.status, t.exit_code),
        };
        println!("attempt {} line {}: {}", a.class.raw, a.insertion_line, result);
    }
    if let Some(e) = &outcome.edits {
        println!("edits after insertion: adding {} deleting {} modifying {}", e.adding, e.deleting, e.modifying);
    }
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&outcome).expect("serializable") + "\n";
        fs::write(out, json).map_err(|e| fail(EXIT_INPUT, e))?;
    }
    match outcome.status {
        TransplantStatus::Success | TransplantStatus::Planned => Ok(()),
        TransplantStatus::Failure => Err(fail(EXIT_ANALYSIS, anyhow!("no host class passed the test command"))),
    }
}

fn cmd_edits(args: &EditsArgs) -> Outcome {
    let snap = |p: &Path| {
        Snapshot::from_dir(p).with_context(|| format!("reading {}", p.display())).map_err(|e| fail(EXIT_INPUT, e))
    };
    let ledger = record_edits(&snap(&args.before)?, &snap(&args.after)?);
    println!("{}", serde_json::to_string_pretty(&ledger).expect("serializable"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Mine(a) => cmd_mine(a),
        Command::Tables(a) => cmd_tables(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Vein(a) => cmd_vein(a),
        Command::Match(a) => cmd_match(a),
        Command::Edits(a) => cmd_edits(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
