//! Orchestrator agent: the campaign loop, global state, bug exploitation,
//! report synthesis, and the triage arithmetic over finished campaigns.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::CampaignConfig;
use crate::error::{BackendError, Error, Result};
use crate::events::{EventLog, StepId, WorkflowEvent};
use crate::gateway::{AgentId, ChatRequest, Gateway, Ledger, Message};
use crate::knowledge::{ConstraintProfile, FaultLexicon, PatternLibrary};
use crate::memory::MemoryStore;
use crate::model::{
    slugify, truncate_excerpt, AttackCategory, AttackScenario, BugPattern, BugReport, Hypothesis,
    Inspiration, TestRunOutcome, TokenUsage, DEFAULT_EXCERPT_LIMIT,
};
use crate::persist;
use crate::prompts::{self, Language};
use crate::sandbox::SandboxPolicy;
use crate::strategy::{generate_scenario, StrategyConfig, StrategyMode};
use crate::testgen::{reflection_loop, ReflectionConfig, ReflectionResult};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum Verdict {
    Rejected,
    Invalid,
    NoBug,
    BugFound,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Rejected => "Rejected",
            Verdict::Invalid => "Invalid",
            Verdict::NoBug => "NoBug",
            Verdict::BugFound => "BugFound",
        }
    }
}

/// Step-token fingerprint used by the fuzzy duplicate check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioDigest {
    pub name: String,
    pub target_component: String,
    pub category: AttackCategory,
    pub step_tokens: BTreeSet<String>,
}

impl ScenarioDigest {
    pub fn of(scenario: &AttackScenario) -> ScenarioDigest {
        let step_tokens = scenario
            .hypothesis
            .action_steps
            .iter()
            .flat_map(|step| step.split(|c: char| !c.is_alphanumeric()))
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
            .collect();
        ScenarioDigest {
            name: scenario.name.clone(),
            target_component: scenario.target_component.clone(),
            category: scenario.category,
            step_tokens,
        }
    }
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    intersection / union
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GlobalState {
    /// Unique scenario names with their final verdicts.
    pub scenarios_attempted: Vec<(String, Verdict)>,
    /// Report slugs of confirmed bugs.
    pub bugs_confirmed: Vec<String>,
    /// Subset of bugs_confirmed still awaiting exploitation analysis.
    pub exploitation_queue: Vec<String>,
    pub state_summary: String,
    #[serde(default)]
    pub scenario_digests: Vec<ScenarioDigest>,
}

impl GlobalState {
    pub fn record(&mut self, name: &str, verdict: Verdict) {
        debug_assert!(self.scenarios_attempted.iter().all(|(n, _)| n != name));
        self.scenarios_attempted.push((name.to_string(), verdict));
    }

    /// Exact slugified-name match, or same component + same category with
    /// near-identical step token sets.
    pub fn is_duplicate(&self, scenario: &AttackScenario) -> bool {
        let slug = scenario.slug();
        if self.scenario_digests.iter().any(|d| slugify(&d.name) == slug) {
            return true;
        }
        let digest = ScenarioDigest::of(scenario);
        self.scenario_digests.iter().any(|existing| {
            existing.target_component == digest.target_component
                && existing.category == digest.category
                && jaccard(&existing.step_tokens, &digest.step_tokens) >= 0.9
        })
    }

    pub fn check_invariants(&self) -> Result<()> {
        let names: BTreeSet<_> = self.scenarios_attempted.iter().map(|(n, _)| n).collect();
        if names.len() != self.scenarios_attempted.len() {
            return Err(Error::Invariant("duplicate scenario name recorded".into()));
        }
        for slug in &self.exploitation_queue {
            if !self.bugs_confirmed.contains(slug) {
                return Err(Error::Invariant(format!(
                    "exploitation queue entry {slug} has no confirmed bug"
                )));
            }
        }
        let bug_found =
            self.scenarios_attempted.iter().filter(|(_, v)| *v == Verdict::BugFound).count();
        if bug_found != self.bugs_confirmed.len() {
            return Err(Error::Invariant("BugFound verdicts and reports disagree".into()));
        }
        Ok(())
    }
}

/// O.1: analyze the head of the exploitation queue, dequeue it, and return
/// guidance for the Strategy agent. Empty queue → empty guidance.
pub fn exploit_bugs(
    gateway: &mut Gateway,
    state: &mut GlobalState,
    reports: &[BugReport],
    memory: &MemoryStore,
) -> Result<String> {
    let Some(slug) = state.exploitation_queue.first().cloned() else {
        return Ok(String::new());
    };
    let report = reports
        .iter()
        .find(|r| r.slug() == slug)
        .ok_or_else(|| Error::Invariant(format!("queued report {slug} not found")))?;
    let prompt = prompts::exploitation_analysis_prompt(
        &report.scenario.name,
        &report.report_body,
        memory.knowledge(),
    );
    let request = ChatRequest::new(prompts::ORCHESTRATOR_SYSTEM, vec![Message::user(prompt)]);
    let response = gateway.complete(AgentId::Orchestrator, "orchestrator-exploit", &request)?;
    state.exploitation_queue.remove(0);
    Ok(response.content)
}

/// O.2: produce and cache the global-state summary.
pub fn summarize_state(gateway: &mut Gateway, state: &mut GlobalState) -> Result<String> {
    let attempted: Vec<(String, String)> = state
        .scenarios_attempted
        .iter()
        .map(|(name, verdict)| (name.clone(), verdict.as_str().to_string()))
        .collect();
    let prompt = prompts::state_analyzer_prompt(&attempted, &state.bugs_confirmed);
    let request = ChatRequest::new(prompts::STATE_ANALYZER_SYSTEM, vec![Message::user(prompt)]);
    let response = gateway.complete(AgentId::Orchestrator, "orchestrator-summarize", &request)?;
    state.state_summary = response.content.clone();
    Ok(response.content)
}

fn labeled_line(text: &str, label: &str) -> Option<String> {
    text.lines().find_map(|line| {
        let line = line.trim();
        let prefix_len = label.len();
        if line.len() > prefix_len && line[..prefix_len].eq_ignore_ascii_case(label) {
            line[prefix_len..].trim_start().strip_prefix(':').map(|v| v.trim().to_string())
        } else {
            None
        }
    })
}

fn extract_tag<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open)? + open.len();
    let end = text[start..].find(&close)? + start;
    Some(text[start..end].trim())
}

fn parse_report_reply(content: &str, scenario_name: &str) -> Result<(String, BugPattern)> {
    let body = extract_tag(content, "bug_report")
        .ok_or_else(|| Error::Parse("bug_report".into()))?
        .to_string();
    let pattern_block =
        extract_tag(content, "bug_pattern").ok_or_else(|| Error::Parse("bug_pattern".into()))?;
    let name = labeled_line(pattern_block, "Pattern Name")
        .ok_or_else(|| Error::Parse("Pattern Name".into()))?;
    let category = labeled_line(pattern_block, "Bug Category")
        .ok_or_else(|| Error::Parse("Bug Category".into()))?;
    let digest = Sha256::digest(format!("scenario:{scenario_name}").as_bytes());
    let pattern_id =
        format!("pat-{}", digest.iter().take(6).map(|b| format!("{b:02x}")).collect::<String>());
    Ok((
        body,
        BugPattern {
            pattern_id,
            name,
            bug_category: AttackCategory::parse(&category)?,
            fault_type: labeled_line(pattern_block, "Fault Type").unwrap_or_default(),
            trigger_condition: labeled_line(pattern_block, "Trigger Condition").unwrap_or_default(),
            description: labeled_line(pattern_block, "Description").unwrap_or_default(),
            test_template: labeled_line(pattern_block, "Test Template").unwrap_or_default(),
            used: false,
        },
    ))
}

/// O.4: turn a confirmed run into a BugReport, extract the reusable
/// pattern into the library, and enqueue the report for exploitation.
/// One re-ask on malformed replies, then degrade to a raw-text report.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_report(
    gateway: &mut Gateway,
    library: &mut PatternLibrary,
    state: &mut GlobalState,
    protocol_name: &str,
    protocol_type: &str,
    scenario: &AttackScenario,
    run: &TestRunOutcome,
    test_file: &str,
    usage: TokenUsage,
) -> Result<BugReport> {
    let excerpt = truncate_excerpt(
        &format!("{}\n{}", run.stdout, run.stderr),
        DEFAULT_EXCERPT_LIMIT,
    );
    let user = prompts::orchestrator_report_prompt(
        protocol_name,
        protocol_type,
        &scenario.name,
        &scenario.target_component,
        scenario.category.as_str(),
        &scenario.vulnerability_hypothesis,
        &scenario.hypothesis.preconditions,
        &scenario.hypothesis.action_steps,
        &scenario.hypothesis.expected_bug_behavior,
        &scenario.correct_behavior,
        test_file,
        &excerpt,
        &usage,
    )?;
    let mut request = ChatRequest::new(prompts::ORCHESTRATOR_SYSTEM, vec![Message::user(user)]);
    let response = gateway.complete(AgentId::Orchestrator, "orchestrator-report", &request)?;

    let parsed = match parse_report_reply(&response.content, &scenario.name) {
        Ok(parsed) => Ok(parsed),
        Err(first_error) => {
            request.messages.push(Message::assistant(response.content.clone()));
            request.messages.push(Message::user(format!(
                "Your reply was malformed: {first_error}. Resend both the <bug_report> and \
                 <bug_pattern> blocks, complete and well-formed."
            )));
            match gateway.complete(AgentId::Orchestrator, "orchestrator-report-reask", &request) {
                Ok(retry) => parse_report_reply(&retry.content, &scenario.name)
                    .map_err(|_| retry.content.clone()),
                Err(_) => Err(response.content.clone()),
            }
        }
    };
    let (report_body, pattern) = match parsed {
        Ok((body, pattern)) => (body, Some(pattern)),
        Err(raw) => {
            log::warn!("report reply stayed malformed after re-ask; storing raw text");
            (raw, None)
        }
    };

    if let Some(pattern) = &pattern {
        if !library.contains(&pattern.pattern_id) {
            library.insert(pattern.clone())?;
        }
    }
    let report = BugReport {
        scenario: scenario.clone(),
        test_file_path: test_file.to_string(),
        test_output_excerpt: excerpt,
        report_body,
        pattern,
        usage,
        confirmed: None,
    };
    state.bugs_confirmed.push(report.slug());
    state.exploitation_queue.push(report.slug());
    Ok(report)
}

/// False-positive rate over fully triaged reports, half-up to one decimal
/// percent (e.g. 12/46 → "26.1%").
pub fn fp_rate(reports: &[BugReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::DivisionUndefined);
    }
    let untriaged = reports.iter().filter(|r| r.confirmed.is_none()).count();
    if untriaged > 0 {
        return Err(Error::UntriagedReports { count: untriaged });
    }
    let false_count = reports.iter().filter(|r| r.confirmed == Some(false)).count() as u128;
    let total = reports.len() as u128;
    let tenths = (false_count * 2000 + total) / (2 * total);
    Ok(format!("{}.{}%", tenths / 10, tenths % 10))
}

#[derive(Debug)]
pub struct CampaignResult {
    pub reports: Vec<BugReport>,
    pub state: GlobalState,
    pub ledger: Ledger,
    pub termination_reason: String,
}

pub struct CampaignDeps<'a> {
    pub gateway: &'a mut Gateway,
    pub library: &'a mut PatternLibrary,
    pub memory: &'a mut MemoryStore,
    pub events: &'a mut EventLog,
}

fn transcript_exhausted(err: &Error) -> bool {
    matches!(err, Error::Backend(BackendError::TranscriptExhausted { .. }))
}

/// Mechanical stand-in used by the scenario-generator ablation: a fixed
/// crash/restart probe, no LLM involved.
fn fallback_scenario(iteration: usize) -> AttackScenario {
    AttackScenario {
        name: format!("MechanicalCrashRestartProbe{iteration}"),
        target_component: "apply loop".into(),
        vulnerability_hypothesis: "committed entries may not survive crash and restart".into(),
        category: AttackCategory::Safety,
        inspiration: Inspiration::Original,
        relation_to_original: None,
        correct_behavior: "each committed entry applies exactly once".into(),
        hypothesis: Hypothesis {
            preconditions: vec![format!("cluster of 3 nodes, probe {iteration}")],
            action_steps: vec![
                "commit a baseline entry on every node".into(),
                format!("crash node {} after it applies", iteration % 3),
                "restart the node and re-apply committed entries".into(),
            ],
            expected_bug_behavior: "the restarted node diverges from its peers".into(),
            oracle_assertions: vec!["all nodes report identical state".into()],
        },
    }
}

/// Algorithm-1 outer loop. Runs until a budget limit binds or the scripted
/// transcript runs dry at an iteration boundary.
pub fn run_campaign(
    cfg: &CampaignConfig,
    protocol_name: &str,
    language: Language,
    policy: &SandboxPolicy,
    deps: &mut CampaignDeps<'_>,
) -> Result<CampaignResult> {
    cfg.validate()?;
    if !cfg.repo.is_dir() {
        return Err(Error::Config(format!(
            "target repo {} is not a directory",
            cfg.repo.display()
        )));
    }
    let profile = ConstraintProfile::for_protocol(cfg.protocol_type);
    let lexicon = FaultLexicon::default();
    let ab = cfg.ablations;
    let start = Instant::now();
    let mut state = GlobalState::default();
    let mut reports: Vec<BugReport> = Vec::new();
    let mut iteration = 0usize;

    let termination_reason = 'campaign: loop {
        if let Some(limit) = cfg.wall_clock_limit() {
            if start.elapsed() >= limit {
                break "wall-clock budget exhausted".to_string();
            }
        }
        if let Some(limit) = cfg.token_limit {
            if deps.gateway.ledger.campaign_total.total() >= limit {
                break "token budget exhausted".to_string();
            }
        }
        if let Some(limit) = cfg.scenario_limit {
            if state.scenarios_attempted.len() as u64 >= limit {
                break "scenario budget exhausted".to_string();
            }
        }
        iteration += 1;

        // ① exploitation analysis over the confirmed-bug queue
        let guidance = if ab.no_bug_exploitation {
            String::new()
        } else {
            let had_queue = !state.exploitation_queue.is_empty();
            let guidance = match exploit_bugs(deps.gateway, &mut state, &reports, deps.memory) {
                Ok(guidance) => guidance,
                Err(e) if transcript_exhausted(&e) => break "transcript exhausted".to_string(),
                Err(e) => return Err(e),
            };
            deps.events.record(WorkflowEvent::new(
                iteration,
                StepId::BUG_EXPLOITATION,
                AgentId::Orchestrator,
                if had_queue {
                    "analyzed confirmed bug for exploitation"
                } else {
                    "no confirmed bugs to exploit"
                },
            ))?;
            guidance
        };

        // ② global-state summarization
        if !ab.no_state_analyzer {
            match summarize_state(deps.gateway, &mut state) {
                Ok(_) => deps.events.record(WorkflowEvent::new(
                    iteration,
                    StepId::STATE_ANALYSIS,
                    AgentId::Orchestrator,
                    "summarized campaign state",
                ))?,
                Err(e) if transcript_exhausted(&e) => break "transcript exhausted".to_string(),
                Err(e) => return Err(e),
            }
        }

        // ③ context handoff to the Strategy agent
        deps.events.record(
            WorkflowEvent::new(
                iteration,
                StepId::CONTEXT_TO_STRATEGY,
                AgentId::Orchestrator,
                "sent campaign context to strategy",
            )
            .to(AgentId::Strategy),
        )?;

        // ④ constraint analysis, ⑤ context absorption
        if !ab.no_constraints_analyzer {
            deps.events.record(WorkflowEvent::new(
                iteration,
                StepId::CONSTRAINT_ANALYSIS,
                AgentId::Strategy,
                format!("reviewed {} fault-model constraints", profile.protocol_type.as_str()),
            ))?;
        }
        deps.events.record(WorkflowEvent::new(
            iteration,
            StepId::ABSORB_CONTEXT,
            AgentId::Strategy,
            "absorbed orchestrator context",
        ))?;

        // ⑥ scenario generation
        let scenario = if ab.no_scenario_generator {
            fallback_scenario(iteration)
        } else {
            let mode = if guidance.is_empty() {
                StrategyMode::Standard
            } else {
                StrategyMode::Exploitation { guidance: guidance.clone() }
            };
            let strategy_cfg = StrategyConfig {
                check_constraints: !ab.no_constraints_analyzer,
                ..StrategyConfig::default()
            };
            match generate_scenario(
                deps.gateway,
                deps.library,
                &profile,
                &lexicon,
                protocol_name,
                &deps.memory.repo_knowledge(true),
                &state.state_summary,
                &mode,
                &strategy_cfg,
            ) {
                Ok(scenario) => {
                    deps.events.record(WorkflowEvent::new(
                        iteration,
                        StepId::SCENARIO_GENERATION,
                        AgentId::Strategy,
                        format!("generated scenario {}", scenario.name),
                    ))?;
                    scenario
                }
                Err(e) if transcript_exhausted(&e) => break "transcript exhausted".to_string(),
                Err(Error::Backend(e)) => return Err(Error::Backend(e)),
                Err(e) => {
                    // unusable proposal: record and move on
                    state.record(&format!("unusable#{iteration}"), Verdict::Invalid);
                    deps.events.record(
                        WorkflowEvent::new(
                            iteration,
                            StepId::SCENARIO_TO_ORCHESTRATOR,
                            AgentId::Strategy,
                            format!("no usable scenario: {e}"),
                        )
                        .to(AgentId::Orchestrator),
                    )?;
                    continue 'campaign;
                }
            }
        };

        // ⑦ scenario handed back to the orchestrator
        deps.events.record(
            WorkflowEvent::new(
                iteration,
                StepId::SCENARIO_TO_ORCHESTRATOR,
                AgentId::Strategy,
                format!("returned scenario {}", scenario.name),
            )
            .to(AgentId::Orchestrator),
        )?;

        // ⑧ duplicate gate, state update, forward to TestGen
        if state.is_duplicate(&scenario) {
            state.record(&format!("{}#dup{iteration}", scenario.name), Verdict::Rejected);
            deps.events.record(
                WorkflowEvent::new(
                    iteration,
                    StepId::FORWARD_TO_TESTGEN,
                    AgentId::Orchestrator,
                    format!("rejected duplicate scenario {}", scenario.name),
                )
                .to(AgentId::TestGen),
            )?;
            continue;
        }
        state.scenario_digests.push(ScenarioDigest::of(&scenario));
        deps.events.record(
            WorkflowEvent::new(
                iteration,
                StepId::FORWARD_TO_TESTGEN,
                AgentId::Orchestrator,
                format!("forwarded scenario {} to testgen", scenario.name),
            )
            .to(AgentId::TestGen),
        )?;

        // ⑨–⑫ test generation, execution, reflection
        let tokens_before = deps.gateway.ledger.campaign_total;
        deps.gateway.set_active_scenario(Some(scenario.slug()));
        let reflection_cfg = ReflectionConfig {
            num_iter: if ab.no_reflection_loop { 1 } else { cfg.num_iter },
            emit_analysis: !ab.no_reflection_loop,
            ..ReflectionConfig::default()
        };
        let outcome = reflection_loop(
            deps.gateway,
            deps.memory,
            deps.events,
            iteration,
            &scenario,
            protocol_name,
            language,
            &cfg.repo,
            &reflection_cfg,
            policy,
        );
        deps.gateway.set_active_scenario(None);

        match outcome {
            Ok(ReflectionResult::Confirmed { outcome, plan, .. }) => {
                let scenario_usage = deps.gateway.ledger.campaign_total - tokens_before;
                let report = synthesize_report(
                    deps.gateway,
                    deps.library,
                    &mut state,
                    protocol_name,
                    cfg.protocol_type.as_str(),
                    &scenario,
                    &outcome,
                    &plan.file_path.display().to_string(),
                    scenario_usage,
                )?;
                reports.push(report);
                state.record(&scenario.name, Verdict::BugFound);
            }
            Ok(ReflectionResult::InvalidScenario { .. }) => {
                state.record(&scenario.name, Verdict::Invalid);
            }
            Err(e) if transcript_exhausted(&e) => return Err(e),
            Err(Error::Backend(e)) => return Err(Error::Backend(e)),
            Err(e @ (Error::PathEscape(_) | Error::CommandNotAllowed(_) | Error::Sandbox(_))) => {
                log::warn!("scenario {} aborted by the sandbox: {e}", scenario.name);
                state.record(&scenario.name, Verdict::Invalid);
            }
            Err(e) => return Err(e),
        }
        state.check_invariants()?;
    };

    state.check_invariants()?;
    Ok(CampaignResult {
        reports,
        state,
        ledger: deps.gateway.ledger.clone(),
        termination_reason,
    })
}

/// Exclusive access to a state directory for the life of the value.
pub struct StateDirLock {
    path: PathBuf,
}

impl StateDirLock {
    pub fn acquire(dir: &Path) -> Result<StateDirLock> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(StateDirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::StateDirLocked(dir.display().to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for StateDirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn render_report_markdown(report: &BugReport, header: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# Bug report: {}\n\n", report.scenario.name));
    out.push_str(header);
    out.push_str(&format!(
        "\n- Target component: {}\n- Attack category: {}\n- Test file: {}\n- Tokens: {} prompt / {} completion (${})\n\n",
        report.scenario.target_component,
        report.scenario.category.as_str(),
        report.test_file_path,
        report.usage.prompt_tokens,
        report.usage.completion_tokens,
        report.usage.api_cost,
    ));
    out.push_str("## Analysis\n\n");
    out.push_str(&report.report_body);
    out.push_str("\n\n## Attack scenario\n\n");
    out.push_str(&crate::strategy::render_attack_scenario(&report.scenario));
    out.push_str("\n\n## Test output (excerpt)\n\n```\n");
    out.push_str(&report.test_output_excerpt);
    out.push_str("\n```\n");
    if let Some(pattern) = &report.pattern {
        out.push_str(&format!(
            "\n## Extracted pattern\n\n- Id: {}\n- Name: {}\n- Category: {}\n- Fault type: {}\n",
            pattern.pattern_id,
            pattern.name,
            pattern.bug_category.as_str(),
            pattern.fault_type,
        ));
    }
    out
}

/// Writes the user-facing campaign artifacts: reports (JSON + markdown),
/// the GlobalState snapshot, and the ledger summary.
pub fn persist_campaign(out_dir: &Path, result: &CampaignResult, report_header: &str) -> Result<()> {
    let reports_dir = out_dir.join("reports");
    fs::create_dir_all(&reports_dir)?;
    for report in &result.reports {
        let slug = report.slug();
        persist::save(&reports_dir.join(format!("{slug}.json")), report)?;
        fs::write(
            reports_dir.join(format!("{slug}.md")),
            render_report_markdown(report, report_header),
        )?;
    }
    persist::save(&out_dir.join("state").join("global_state.json"), &result.state)?;
    persist::save(&out_dir.join("logs").join("ledger.json"), &result.ledger)?;
    Ok(())
}

pub fn load_reports(out_dir: &Path) -> Result<Vec<(PathBuf, BugReport)>> {
    let reports_dir = out_dir.join("reports");
    let mut reports = Vec::new();
    if !reports_dir.is_dir() {
        return Ok(reports);
    }
    let mut paths: Vec<_> = fs::read_dir(&reports_dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let report: BugReport = persist::load(&path)?;
        reports.push((path, report));
    }
    Ok(reports)
}

/// Marks one persisted report confirmed (true) or a false positive.
pub fn triage_mark(out_dir: &Path, slug: &str, confirmed: bool) -> Result<()> {
    let path = out_dir.join("reports").join(format!("{slug}.json"));
    if !path.is_file() {
        return Err(Error::Config(format!("no report named {slug}")));
    }
    let mut report: BugReport = persist::load(&path)?;
    report.confirmed = Some(confirmed);
    persist::save(&path, &report)
}
