use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use quorumprobe::config::{self, Ablations, BackendChoice, CampaignConfig, PartialConfig};
use quorumprobe::events::{check_routing, check_step_order, EventLog};
use quorumprobe::gateway::{Gateway, LiveBackend, ScriptedBackend, ScriptedTranscript, TextBackend};
use quorumprobe::knowledge::{
    fetch_issues, ingest_issues, ingest_labeled, IssueSource, PatternLibrary, ProtocolType,
};
use quorumprobe::memory::{MemoryStore, RepoKnowledge};
use quorumprobe::model::{AttackCategory, Money, PriceTable};
use quorumprobe::orchestrator::{
    self, fp_rate, persist_campaign, run_campaign, CampaignDeps, StateDirLock,
};
use quorumprobe::persist;
use quorumprobe::prompts::Language;
use quorumprobe::sandbox::SandboxPolicy;

#[derive(Parser)]
#[command(name = "quorumprobe", version, about = "Agent-driven bug hunting for consensus implementations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a bug-hunting campaign against a target repository.
    Run(RunArgs),
    /// Build the pattern library from historical issue exports.
    Ingest(IngestArgs),
    /// Review persisted reports and compute the false-positive rate.
    Triage(TriageArgs),
    /// Print the token/cost ledger of a finished campaign.
    Ledger(LedgerArgs),
    /// Re-check a recorded event log against the workflow invariants.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    repo: Option<PathBuf>,
    #[arg(long, value_parser = ["cft", "bft"])]
    protocol_type: Option<String>,
    /// "live" or "scripted:FILE".
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    budget_hours: Option<f64>,
    #[arg(long)]
    token_limit: Option<u64>,
    #[arg(long)]
    scenario_limit: Option<u64>,
    #[arg(long)]
    num_iter: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    state_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Display name of the target protocol in prompts.
    #[arg(long)]
    protocol_name: Option<String>,
    #[arg(long)]
    no_bug_exploitation: bool,
    #[arg(long)]
    no_state_analyzer: bool,
    #[arg(long)]
    no_constraints_analyzer: bool,
    #[arg(long)]
    no_scenario_generator: bool,
    #[arg(long)]
    no_reflection_loop: bool,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory of issue-export JSON files, one page per file.
    #[arg(long)]
    issues: PathBuf,
    /// Pattern library directory to populate.
    #[arg(long)]
    patterns: PathBuf,
    /// "owner/name" the exports came from.
    #[arg(long)]
    repo: String,
    #[arg(long, default_value_t = 10)]
    pages: usize,
    /// Trust labels in the export instead of running the classifier.
    #[arg(long)]
    labeled: bool,
    /// Required unless --labeled: "scripted:FILE" or "live".
    #[arg(long)]
    backend: Option<String>,
}

#[derive(Args)]
struct TriageArgs {
    /// Campaign output directory.
    #[arg(long)]
    out: PathBuf,
    /// Mark one report: SLUG=true for a real bug, SLUG=false for a false positive.
    #[arg(long)]
    mark: Option<String>,
}

#[derive(Args)]
struct LedgerArgs {
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Path to an events.jsonl file.
    events: PathBuf,
}

fn default_prices() -> PriceTable {
    PriceTable {
        prompt_per_million: Money::parse("2.0").expect("static price"),
        completion_per_million: Money::parse("6.0").expect("static price"),
    }
}

fn make_backend(choice: &BackendChoice) -> anyhow::Result<Box<dyn TextBackend>> {
    Ok(match choice {
        BackendChoice::Scripted(path) => {
            Box::new(ScriptedBackend::new(ScriptedTranscript::load(path)?))
        }
        BackendChoice::Live => Box::new(LiveBackend::from_env()?),
    })
}

fn load_repo_knowledge(repo: &Path, protocol_type: ProtocolType) -> RepoKnowledge {
    let fixture = repo.join("repo_knowledge.json");
    if fixture.is_file() {
        match persist::load::<RepoKnowledge>(&fixture) {
            Ok(knowledge) => return knowledge,
            Err(e) => log::warn!("ignoring unreadable {}: {e}", fixture.display()),
        }
    }
    let name = repo
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "target".into());
    RepoKnowledge {
        repo_name: name.clone(),
        protocol: name,
        protocol_type,
        settings: String::new(),
        language: "rust".into(),
        test_methodology: String::new(),
        helpers: vec![],
        lessons: vec![],
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let flags = PartialConfig {
        repo: args.repo,
        protocol_type: args.protocol_type,
        backend: args.backend,
        budget_hours: args.budget_hours,
        token_limit: args.token_limit,
        scenario_limit: args.scenario_limit,
        num_iter: args.num_iter,
        temperature: args.temperature,
        state_dir: args.state_dir,
        out_dir: args.out,
        ablations: Some(Ablations {
            no_bug_exploitation: args.no_bug_exploitation,
            no_state_analyzer: args.no_state_analyzer,
            no_constraints_analyzer: args.no_constraints_analyzer,
            no_scenario_generator: args.no_scenario_generator,
            no_reflection_loop: args.no_reflection_loop,
        }),
    };
    let env: BTreeMap<String, String> = std::env::vars().collect();
    let cfg: CampaignConfig = config::resolve(flags, &env, args.config.as_deref())?;

    let _lock = StateDirLock::acquire(&cfg.state_dir)?;
    let logs = cfg.out_dir.join("logs");
    fs::create_dir_all(&logs)?;

    let knowledge = load_repo_knowledge(&cfg.repo, cfg.protocol_type);
    let language = Language::parse(&knowledge.language)?;
    let protocol_name =
        args.protocol_name.unwrap_or_else(|| knowledge.protocol.clone());
    let policy = SandboxPolicy::new(language.allowed_commands());

    let mut gateway = Gateway::new(make_backend(&cfg.backend)?, default_prices())
        .with_call_log(logs.join("calls.jsonl"));
    let mut library = PatternLibrary::open(&cfg.state_dir.join("patterns"))?;
    let mut memory = MemoryStore::open(&cfg.state_dir, knowledge)?;
    let mut events = EventLog::at_path(&logs.join("events.jsonl"))?;

    let result = run_campaign(&cfg, &protocol_name, language, &policy, &mut CampaignDeps {
        gateway: &mut gateway,
        library: &mut library,
        memory: &mut memory,
        events: &mut events,
    })?;
    memory.persist()?;
    let header = format!("Campaign against `{protocol_name}` ({}).\n", cfg.protocol_type.as_str());
    persist_campaign(&cfg.out_dir, &result, &header)?;

    println!("termination: {}", result.termination_reason);
    println!("scenarios: {}", result.state.scenarios_attempted.len());
    println!("bugs: {}", result.state.bugs_confirmed.len());
    println!(
        "tokens: {} (cost ${})",
        result.ledger.campaign_total.total(),
        result.ledger.campaign_total.api_cost
    );
    for report in &result.reports {
        println!("report: {}", cfg.out_dir.join("reports").join(format!("{}.md", report.slug())).display());
    }
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> anyhow::Result<()> {
    let records = fetch_issues(&IssueSource::Fixture(args.issues), &args.repo, args.pages)?;
    let mut library = PatternLibrary::open(&args.patterns)?;
    let kept = if args.labeled {
        ingest_labeled(&records, &mut library, AttackCategory::Safety)?
    } else {
        let choice = BackendChoice::parse(
            args.backend.as_deref().ok_or_else(|| anyhow!("--backend required without --labeled"))?,
        )?;
        let mut classifier = make_backend(&choice)?;
        ingest_issues(&records, classifier.as_mut(), &mut library)?
    };
    println!("issues: {}", records.len());
    println!("patterns kept: {}", kept.len());
    println!("library size: {}", library.len());
    Ok(())
}

fn cmd_triage(args: TriageArgs) -> anyhow::Result<()> {
    if let Some(mark) = &args.mark {
        let (slug, value) = mark
            .split_once('=')
            .ok_or_else(|| anyhow!("--mark expects SLUG=true|false"))?;
        let confirmed = match value {
            "true" => true,
            "false" => false,
            other => bail!("--mark expects true or false, not {other}"),
        };
        orchestrator::triage_mark(&args.out, slug, confirmed)?;
    }
    let reports = orchestrator::load_reports(&args.out)?;
    for (_, report) in &reports {
        let status = match report.confirmed {
            Some(true) => "confirmed",
            Some(false) => "false-positive",
            None => "untriaged",
        };
        println!("{}: {status}", report.slug());
    }
    match fp_rate(&reports.iter().map(|(_, r)| r.clone()).collect::<Vec<_>>()) {
        Ok(rate) => println!("FP rate: {rate}"),
        Err(e) => println!("FP rate: unavailable ({e})"),
    }
    Ok(())
}

fn cmd_ledger(args: LedgerArgs) -> anyhow::Result<()> {
    let path = args.out.join("logs").join("ledger.json");
    let ledger: quorumprobe::gateway::Ledger =
        persist::load(&path).with_context(|| format!("reading {}", path.display()))?;
    for (agent, usage) in &ledger.per_agent {
        println!("{agent}: {} tokens (${})", usage.total(), usage.api_cost);
    }
    for (slug, usage) in &ledger.per_scenario {
        println!("scenario {slug}: {} tokens (${})", usage.total(), usage.api_cost);
    }
    println!(
        "total: {} tokens over {} calls (${})",
        ledger.campaign_total.total(),
        ledger.calls,
        ledger.campaign_total.api_cost
    );
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> anyhow::Result<()> {
    let events = EventLog::load(&args.events)?;
    check_routing(&events)?;
    check_step_order(&events)?;
    println!("events: {} (routing and ordering hold)", events.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Ingest(args) => cmd_ingest(args),
        Cmd::Triage(args) => cmd_triage(args),
        Cmd::Ledger(args) => cmd_ledger(args),
        Cmd::Replay(args) => cmd_replay(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
