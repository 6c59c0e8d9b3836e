//! TestGen agent: renders the test-generation prompt, parses code and
//! execution plan out of replies, runs the test in the sandbox, classifies
//! the result, and drives the bounded generate→execute→analyze loop.

use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::events::{EventLog, StepId, WorkflowEvent};
use crate::gateway::{AgentId, ChatRequest, ChatResponse, Gateway, Message, ToolCall};
use crate::memory::{HelperDoc, MemoryStore};
use crate::model::{truncate_excerpt, AttackScenario, OutcomeKind, TestRunOutcome, DEFAULT_EXCERPT_LIMIT};
use crate::prompts::{self, Language};
use crate::sandbox::{self, RunResult, SandboxPolicy};
use crate::strategy::render_attack_scenario;

/// Sentinels that mark a genuine bug detection in test output.
pub const BUG_MARKERS: &[&str] = &["SAFETY VIOLATION", "BUG CONFIRMED", "BUG DETECTED"];

const DEFAULT_BUILD_DIAGNOSTICS: &[&str] = &[
    r"error\[E\d+\]",
    r"error: could not compile",
    r"undefined:",
    r"cannot find",
    r"cannot use",
    r"syntax error",
    r"compilation failed",
    r"expected .*, found",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionPlan {
    /// Relative to the target repo root, normalized.
    pub file_path: PathBuf,
    pub test_command: String,
}

#[derive(Debug, Clone)]
pub struct ReflectionConfig {
    pub num_iter: usize,
    pub keep_on_confirm: bool,
    pub bug_markers: Vec<String>,
    pub build_diagnostic_patterns: Vec<String>,
    pub max_tool_calls: usize,
    /// Cleared by the reflection-loop ablation: no ⑪ analysis events.
    pub emit_analysis: bool,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        ReflectionConfig {
            num_iter: 50,
            keep_on_confirm: false,
            emit_analysis: true,
            bug_markers: BUG_MARKERS.iter().map(|s| s.to_string()).collect(),
            build_diagnostic_patterns: DEFAULT_BUILD_DIAGNOSTICS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            max_tool_calls: 5,
        }
    }
}

/// Extracts `<test_code language="...">` and the `<execution_plan>` File
/// Path / Test Command lines, then validates the plan against the sandbox
/// policy. No filesystem access happens here.
pub fn parse_testgen_output(
    text: &str,
    policy: &SandboxPolicy,
) -> Result<(String, String, ExecutionPlan)> {
    let code_re = Regex::new(r#"(?s)<test_code\s+language="([^"]*)"\s*>(.*?)</test_code>"#)
        .expect("static regex");
    let (language_tag, code) = code_re
        .captures(text)
        .map(|c| (c[1].to_string(), c[2].trim().to_string()))
        .ok_or_else(|| Error::Parse("test_code".into()))?;

    let plan_block = text
        .split("<execution_plan>")
        .nth(1)
        .and_then(|rest| rest.split("</execution_plan>").next())
        .ok_or_else(|| Error::Parse("execution_plan".into()))?;
    let line_value = |label: &str| -> Option<String> {
        plan_block.lines().find_map(|line| {
            let line = line.trim();
            if line.len() <= label.len() || !line[..label.len()].eq_ignore_ascii_case(label) {
                return None;
            }
            let rest = line[label.len()..].trim_start();
            rest.strip_prefix(':').map(|value| value.trim().to_string())
        })
    };
    let file_path = line_value("File Path").ok_or_else(|| Error::Parse("File Path".into()))?;
    let test_command =
        line_value("Test Command").ok_or_else(|| Error::Parse("Test Command".into()))?;

    let file_path = sandbox::validate_relative_path(&file_path)?;
    sandbox::parse_command(&test_command, policy)?;
    Ok((code, language_tag, ExecutionPlan { file_path, test_command }))
}

/// Total classification of one test run.
pub fn classify_outcome(
    exit_code: i32,
    stdout: &str,
    stderr: &str,
    timed_out: bool,
    cfg: &ReflectionConfig,
) -> OutcomeKind {
    if timed_out {
        return OutcomeKind::RuntimeError;
    }
    if exit_code == 0 {
        return OutcomeKind::PassedNoBug;
    }
    let combined = format!("{stdout}\n{stderr}");
    let build_failure = cfg
        .build_diagnostic_patterns
        .iter()
        .filter_map(|p| Regex::new(p).ok())
        .any(|re| re.is_match(&combined));
    if build_failure {
        return OutcomeKind::BuildFailure;
    }
    if cfg.bug_markers.iter().any(|marker| combined.contains(marker.as_str())) {
        return OutcomeKind::FailedBugDetected;
    }
    OutcomeKind::RuntimeError
}

fn outcome_from_run(kind: OutcomeKind, run: &RunResult) -> TestRunOutcome {
    TestRunOutcome {
        kind,
        exit_code: run.exit_code,
        stdout: run.stdout.clone(),
        stderr: run.stderr.clone(),
        duration_secs: run.duration.as_secs_f64(),
    }
}

#[derive(Debug)]
pub enum ReflectionResult {
    /// The scenario's bug was confirmed. `iterations_used` counts repair
    /// rounds after the first generation.
    Confirmed { outcome: TestRunOutcome, plan: ExecutionPlan, iterations_used: usize },
    /// The iteration budget ran out without a confirmed bug.
    InvalidScenario { iterations: usize, last_outcome: Option<TestRunOutcome> },
}

#[derive(Deserialize)]
struct LessonArgs {
    issue: String,
    solution: String,
    #[serde(default)]
    error_pattern: Option<String>,
}

#[derive(Deserialize)]
struct FindArgs {
    error_message: String,
}

#[derive(Deserialize)]
struct KnowledgeArgs {
    #[serde(default = "default_true")]
    compact: bool,
}

fn default_true() -> bool {
    true
}

fn run_memory_tool(memory: &mut MemoryStore, call: &ToolCall) -> String {
    let result = match call.tool_name.as_str() {
        "repo_knowledge" => {
            let args: KnowledgeArgs =
                serde_json::from_str(&call.arguments).unwrap_or(KnowledgeArgs { compact: true });
            Ok(memory.repo_knowledge(args.compact))
        }
        "repo_knowledge_find_lessons" => serde_json::from_str::<FindArgs>(&call.arguments)
            .map_err(|e| Error::Serde(e.to_string()))
            .map(|args| render_lessons(memory, &args.error_message)),
        "repo_knowledge_add_lesson" => serde_json::from_str::<LessonArgs>(&call.arguments)
            .map_err(|e| Error::Serde(e.to_string()))
            .and_then(|args| {
                memory.add_lesson(&args.issue, &args.solution, args.error_pattern.as_deref())?;
                Ok("lesson recorded".to_string())
            }),
        "repo_knowledge_add_helper" => serde_json::from_str::<HelperDoc>(&call.arguments)
            .map_err(|e| Error::Serde(e.to_string()))
            .and_then(|doc| {
                memory.add_helper(doc)?;
                Ok("helper recorded".to_string())
            }),
        other => Err(Error::Invariant(format!("unknown tool: {other}"))),
    };
    result.unwrap_or_else(|e| format!("tool error: {e}"))
}

fn render_lessons(memory: &MemoryStore, error_message: &str) -> String {
    let lessons = memory.find_lessons(error_message);
    if lessons.is_empty() {
        "no matching lessons".to_string()
    } else {
        lessons
            .iter()
            .map(|l| format!("- issue: {}\n  solution: {}", l.issue, l.solution))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// One generation round: completes, serving memory tool calls until the
/// reply carries content.
fn complete_generation(
    gateway: &mut Gateway,
    memory: &mut MemoryStore,
    request: &mut ChatRequest,
    cfg: &ReflectionConfig,
) -> Result<ChatResponse> {
    let mut purpose = "testgen-generate";
    for _ in 0..=cfg.max_tool_calls {
        let response = gateway.complete(AgentId::TestGen, purpose, request)?;
        for call in &response.tool_calls {
            let result = run_memory_tool(memory, call);
            if response.content.is_empty() {
                request.messages.push(Message::tool(result));
            }
        }
        if !response.content.is_empty() {
            return Ok(response);
        }
        purpose = "testgen-tool";
    }
    Err(Error::Parse("test_code".into()))
}

/// T.1–T.4 over one scenario. Emits workflow events ⑨⑩⑪ per round and ⑫
/// on completion; the campaign `iteration` stamps every event.
#[allow(clippy::too_many_arguments)]
pub fn reflection_loop(
    gateway: &mut Gateway,
    memory: &mut MemoryStore,
    events: &mut EventLog,
    iteration: usize,
    scenario: &AttackScenario,
    protocol_name: &str,
    language: Language,
    repo_root: &Path,
    cfg: &ReflectionConfig,
    policy: &SandboxPolicy,
) -> Result<ReflectionResult> {
    let system = prompts::testgen_system_prompt(language)?;
    let user = prompts::testgen_user_prompt(
        protocol_name,
        language,
        &render_attack_scenario(scenario),
        &memory.repo_knowledge(true),
    )?;
    let mut request = ChatRequest::new(system, vec![Message::user(user)]);
    request.tools = prompts::memory_tools();

    let mut written_file: Option<PathBuf> = None;
    let mut last_outcome: Option<TestRunOutcome> = None;
    let mut outcome_result: Result<ReflectionResult> = Ok(ReflectionResult::InvalidScenario {
        iterations: cfg.num_iter,
        last_outcome: None,
    });

    'rounds: for round in 0..cfg.num_iter {
        let response = match complete_generation(gateway, memory, &mut request, cfg) {
            Ok(response) => response,
            Err(e) => {
                outcome_result = Err(e);
                break 'rounds;
            }
        };
        request.messages.push(Message::assistant(response.content.clone()));

        let (code, _lang_tag, plan) = match parse_testgen_output(&response.content, policy) {
            Ok(parsed) => parsed,
            Err(e @ (Error::PathEscape(_) | Error::CommandNotAllowed(_))) => {
                // hostile or broken plan: abort before touching the repo
                outcome_result = Err(e);
                break 'rounds;
            }
            Err(e) => {
                events.record(WorkflowEvent::new(
                    iteration,
                    StepId::TEST_GENERATION,
                    AgentId::TestGen,
                    format!("round {}: unparseable reply ({e})", round + 1),
                ))?;
                request.messages.push(Message::user(format!(
                    "Your reply could not be used: {e}. Resend the full <test_code> and \
                     <execution_plan> blocks."
                )));
                continue;
            }
        };
        events.record(WorkflowEvent::new(
            iteration,
            StepId::TEST_GENERATION,
            AgentId::TestGen,
            format!("round {}: generated {}", round + 1, plan.file_path.display()),
        ))?;

        let target = repo_root.join(&plan.file_path);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&target, &code)?;
        written_file = Some(target.clone());

        let (env, argv) = sandbox::parse_command(&plan.test_command, policy)?;
        let run = sandbox::run_command(repo_root, &env, &argv, policy)?;
        events.record(WorkflowEvent::new(
            iteration,
            StepId::TEST_EXECUTION,
            AgentId::TestGen,
            format!("round {}: exit {}{}", round + 1, run.exit_code,
                if run.timed_out { " (timed out)" } else { "" }),
        ))?;

        let kind = classify_outcome(run.exit_code, &run.stdout, &run.stderr, run.timed_out, cfg);
        let outcome = outcome_from_run(kind, &run);
        if cfg.emit_analysis {
            events.record(WorkflowEvent::new(
                iteration,
                StepId::RESULT_ANALYSIS,
                AgentId::TestGen,
                format!("round {}: {:?}", round + 1, kind),
            ))?;
        }

        match kind {
            OutcomeKind::FailedBugDetected => {
                outcome_result = Ok(ReflectionResult::Confirmed {
                    outcome,
                    plan,
                    iterations_used: round,
                });
                break 'rounds;
            }
            OutcomeKind::PassedNoBug => {
                last_outcome = Some(outcome);
                request.messages.push(Message::user(
                    "The test passed without detecting the bug. Strengthen the attack or adjust \
                     the assertions, then resend the full <test_code> and <execution_plan> blocks."
                        .to_string(),
                ));
            }
            OutcomeKind::BuildFailure | OutcomeKind::RuntimeError => {
                let excerpt = truncate_excerpt(
                    &format!("{}\n{}", outcome.stdout, outcome.stderr),
                    DEFAULT_EXCERPT_LIMIT,
                );
                let lessons = render_lessons(memory, &excerpt);
                last_outcome = Some(outcome);
                request.messages.push(Message::user(format!(
                    "The test failed with a {kind:?} (exit {}):\n```\n{excerpt}\n```\n\
                     Previous lessons that may apply:\n{lessons}\n\
                     Fix the problem and resend the full <test_code> and <execution_plan> blocks. \
                     If you fixed an error, record it with repo_knowledge_add_lesson.",
                    run.exit_code,
                )));
            }
        }
    }

    if let Ok(ReflectionResult::InvalidScenario { iterations, last_outcome: slot }) =
        &mut outcome_result
    {
        *iterations = cfg.num_iter;
        *slot = last_outcome;
    }

    let confirmed = matches!(outcome_result, Ok(ReflectionResult::Confirmed { .. }));
    if let Some(path) = written_file {
        if !(confirmed && cfg.keep_on_confirm) {
            let _ = fs::remove_file(path);
        }
    }
    events.record(
        WorkflowEvent::new(
            iteration,
            StepId::REPORT_TO_ORCHESTRATOR,
            AgentId::TestGen,
            match &outcome_result {
                Ok(ReflectionResult::Confirmed { iterations_used, .. }) => {
                    format!("bug confirmed after {} repair round(s)", iterations_used)
                }
                Ok(ReflectionResult::InvalidScenario { .. }) => {
                    "iteration budget exhausted, scenario invalid".to_string()
                }
                Err(e) => format!("aborted: {e}"),
            },
        )
        .to(AgentId::Orchestrator),
    )?;
    outcome_result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, ScriptedBackend, ScriptedTranscript};
    use crate::knowledge::ProtocolType;
    use crate::memory::RepoKnowledge;
    use crate::model::{AttackCategory, Hypothesis, Inspiration, PriceTable};
    use crate::strategy::parse_attack_scenario;

    fn policy() -> SandboxPolicy {
        SandboxPolicy::new(&["bash"])
    }

    fn scenario() -> AttackScenario {
        AttackScenario {
            name: "AmnesiaProbe".into(),
            target_component: "apply loop".into(),
            vulnerability_hypothesis: "cursor not persisted".into(),
            category: AttackCategory::Safety,
            inspiration: Inspiration::Original,
            relation_to_original: None,
            correct_behavior: "exactly-once apply".into(),
            hypothesis: Hypothesis {
                preconditions: vec!["3 nodes".into()],
                action_steps: vec!["commit".into(), "crash node 0".into(), "restart".into()],
                expected_bug_behavior: "re-application".into(),
                oracle_assertions: vec!["states equal".into()],
            },
        }
    }

    fn memory() -> MemoryStore {
        MemoryStore::new(RepoKnowledge {
            repo_name: "mini/log".into(),
            protocol: "MiniLog".into(),
            protocol_type: ProtocolType::Cft,
            settings: "scripted".into(),
            language: "rust".into(),
            test_methodology: "bash scripts in tests".into(),
            helpers: vec![],
            lessons: vec![],
        })
    }

    fn reply(script: &str) -> String {
        format!(
            "<analysis>probing</analysis>\n\n<test_code language=\"rust\">\n{script}\n</test_code>\n\n<execution_plan>\nFile Path: probe.sh\nTest Command: bash probe.sh\n</execution_plan>"
        )
    }

    fn transcript_of(replies: &[serde_json::Value]) -> Gateway {
        let jsonl = replies
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect::<Vec<_>>()
            .join("\n");
        let transcript = ScriptedTranscript::from_jsonl(&jsonl).unwrap();
        Gateway::new(Box::new(ScriptedBackend::new(transcript)), PriceTable::default())
    }

    fn content(text: &str) -> serde_json::Value {
        serde_json::json!({ "response": { "content": text } })
    }

    #[test]
    fn parse_happy_path_and_missing_pieces() {
        let policy = policy();
        let (code, lang, plan) = parse_testgen_output(&reply("exit 0"), &policy).unwrap();
        assert_eq!(code, "exit 0");
        assert_eq!(lang, "rust");
        assert_eq!(plan.file_path, PathBuf::from("probe.sh"));
        assert_eq!(plan.test_command, "bash probe.sh");

        assert!(matches!(
            parse_testgen_output("<execution_plan>File Path: a\nTest Command: bash a</execution_plan>", &policy),
            Err(Error::Parse(f)) if f == "test_code"
        ));
        let noplan = "<test_code language=\"go\">x</test_code>";
        assert!(matches!(
            parse_testgen_output(noplan, &policy),
            Err(Error::Parse(f)) if f == "execution_plan"
        ));
        let missing_cmd = "<test_code language=\"go\">x</test_code><execution_plan>File Path: a.go\n</execution_plan>";
        assert!(matches!(
            parse_testgen_output(missing_cmd, &policy),
            Err(Error::Parse(f)) if f == "Test Command"
        ));
    }

    #[test]
    fn parse_rejects_escape_and_forbidden_command() {
        let policy = policy();
        let escape = reply("exit 0").replace("File Path: probe.sh", "File Path: ../../etc/passwd");
        assert!(matches!(parse_testgen_output(&escape, &policy), Err(Error::PathEscape(_))));
        let bad = reply("exit 0").replace("Test Command: bash probe.sh", "Test Command: rm -rf /");
        assert!(matches!(parse_testgen_output(&bad, &policy), Err(Error::CommandNotAllowed(_))));
    }

    #[test]
    fn classification_table() {
        let cfg = ReflectionConfig::default();
        assert_eq!(classify_outcome(1, "", "", true, &cfg), OutcomeKind::RuntimeError);
        assert_eq!(classify_outcome(0, "ok", "", false, &cfg), OutcomeKind::PassedNoBug);
        assert_eq!(
            classify_outcome(2, "", "undefined: newNetwork", false, &cfg),
            OutcomeKind::BuildFailure
        );
        assert_eq!(
            classify_outcome(1, "SAFETY VIOLATION: x=4", "", false, &cfg),
            OutcomeKind::FailedBugDetected
        );
        assert_eq!(classify_outcome(1, "flaky timeout", "", false, &cfg), OutcomeKind::RuntimeError);
        // build diagnostics win over markers on nonzero exit
        assert_eq!(
            classify_outcome(1, "SAFETY VIOLATION", "error: could not compile `x`", false, &cfg),
            OutcomeKind::BuildFailure
        );
    }

    #[test]
    fn three_round_repair_confirms_with_lesson_recorded() {
        let repo = tempfile::tempdir().unwrap();
        let mut gw = transcript_of(&[
            content(&reply("echo 'undefined: frobnicate' >&2; exit 2")),
            serde_json::json!({ "response": {
                "content": reply("echo 'flaky failure' >&2; exit 1"),
                "tool_calls": [{
                    "tool_name": "repo_knowledge_add_lesson",
                    "arguments": "{\"issue\":\"undefined: frobnicate helper\",\"solution\":\"inline the helper\",\"error_pattern\":\"undefined:.*frobnicate\"}"
                }]
            }}),
            content(&reply("echo 'SAFETY VIOLATION: state diverged'; exit 1")),
        ]);
        let mut mem = memory();
        let mut events = EventLog::in_memory();
        let result = reflection_loop(
            &mut gw,
            &mut mem,
            &mut events,
            1,
            &scenario(),
            "MiniLog",
            Language::Rust,
            repo.path(),
            &ReflectionConfig::default(),
            &policy(),
        )
        .unwrap();
        match result {
            ReflectionResult::Confirmed { outcome, plan, iterations_used } => {
                assert_eq!(iterations_used, 2);
                assert_eq!(outcome.kind, OutcomeKind::FailedBugDetected);
                assert!(outcome.stdout.contains("SAFETY VIOLATION"));
                assert_eq!(plan.file_path, PathBuf::from("probe.sh"));
            }
            other => panic!("expected Confirmed, got {other:?}"),
        }
        assert_eq!(mem.knowledge().lessons.len(), 1);
        // generated file cleaned up by default
        assert!(!repo.path().join("probe.sh").exists());
        // 3 rounds x (gen, exec, analysis) + final report event
        let steps: Vec<u8> = events.events().iter().map(|e| e.step.0).collect();
        assert_eq!(steps, vec![9, 10, 11, 9, 10, 11, 9, 10, 11, 12]);
        let generations = gw
            .call_records()
            .iter()
            .filter(|r| r.purpose == "testgen-generate")
            .count();
        assert_eq!(generations, 3);
    }

    #[test]
    fn budget_exhaustion_returns_invalid_after_exact_count() {
        let repo = tempfile::tempdir().unwrap();
        let broken = content(&reply("echo 'undefined: nope' >&2; exit 2"));
        let mut gw = transcript_of(&[broken.clone(), broken.clone(), broken]);
        let mut mem = memory();
        let mut events = EventLog::in_memory();
        let cfg = ReflectionConfig { num_iter: 3, ..ReflectionConfig::default() };
        let result = reflection_loop(
            &mut gw,
            &mut mem,
            &mut events,
            1,
            &scenario(),
            "MiniLog",
            Language::Rust,
            repo.path(),
            &cfg,
            &policy(),
        )
        .unwrap();
        match result {
            ReflectionResult::InvalidScenario { iterations, last_outcome } => {
                assert_eq!(iterations, 3);
                assert_eq!(last_outcome.unwrap().kind, OutcomeKind::BuildFailure);
            }
            other => panic!("expected InvalidScenario, got {other:?}"),
        }
        let generations = gw
            .call_records()
            .iter()
            .filter(|r| r.purpose == "testgen-generate")
            .count();
        assert_eq!(generations, 3);
        assert!(!repo.path().join("probe.sh").exists());
    }

    #[test]
    fn passing_test_consumes_an_iteration() {
        let repo = tempfile::tempdir().unwrap();
        let mut gw = transcript_of(&[content(&reply("echo all good; exit 0"))]);
        let mut mem = memory();
        let mut events = EventLog::in_memory();
        let cfg = ReflectionConfig { num_iter: 1, ..ReflectionConfig::default() };
        let result = reflection_loop(
            &mut gw,
            &mut mem,
            &mut events,
            1,
            &scenario(),
            "MiniLog",
            Language::Rust,
            repo.path(),
            &cfg,
            &policy(),
        )
        .unwrap();
        assert!(matches!(
            result,
            ReflectionResult::InvalidScenario { iterations: 1, ref last_outcome }
                if last_outcome.as_ref().unwrap().kind == OutcomeKind::PassedNoBug
        ));
    }

    #[test]
    fn hostile_plan_aborts_without_writing() {
        let repo = tempfile::tempdir().unwrap();
        let hostile =
            reply("exit 0").replace("File Path: probe.sh", "File Path: ../outside.sh");
        let mut gw = transcript_of(&[content(&hostile)]);
        let mut mem = memory();
        let mut events = EventLog::in_memory();
        let err = reflection_loop(
            &mut gw,
            &mut mem,
            &mut events,
            1,
            &scenario(),
            "MiniLog",
            Language::Rust,
            repo.path(),
            &ReflectionConfig::default(),
            &policy(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::PathEscape(_)));
        assert!(std::fs::read_dir(repo.path()).unwrap().next().is_none());
    }

    #[test]
    fn keep_on_confirm_preserves_test_file() {
        let repo = tempfile::tempdir().unwrap();
        let mut gw = transcript_of(&[content(&reply("echo 'BUG CONFIRMED: divergence'; exit 1"))]);
        let mut mem = memory();
        let mut events = EventLog::in_memory();
        let cfg = ReflectionConfig { keep_on_confirm: true, ..ReflectionConfig::default() };
        let result = reflection_loop(
            &mut gw,
            &mut mem,
            &mut events,
            1,
            &scenario(),
            "MiniLog",
            Language::Rust,
            repo.path(),
            &cfg,
            &policy(),
        )
        .unwrap();
        assert!(matches!(result, ReflectionResult::Confirmed { iterations_used: 0, .. }));
        assert!(repo.path().join("probe.sh").exists());
    }

    #[test]
    fn scenario_render_survives_prompt_embedding() {
        // the scenario text injected into the prompt must stay parseable
        let rendered = render_attack_scenario(&scenario());
        let reparsed = parse_attack_scenario(&rendered).unwrap();
        assert_eq!(reparsed.name, "AmnesiaProbe");
    }
}
