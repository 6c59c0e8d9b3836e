//! Prompt assembly. Templates ship as files with `{placeholder}` slots;
//! rendering is plain substitution with a strictness check so a renamed
//! placeholder fails tests instead of leaking braces into a live prompt.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::ToolDecl;
use crate::knowledge::ConstraintProfile;
use crate::memory::RepoKnowledge;
use crate::model::TokenUsage;

pub const ORCHESTRATOR_SYSTEM: &str = include_str!("../templates/orchestrator_system.txt");
pub const ORCHESTRATOR_REPORT_USER: &str = include_str!("../templates/orchestrator_report_user.txt");
pub const STRATEGY_SYSTEM: &str = include_str!("../templates/strategy_system.txt");
pub const STRATEGY_USER: &str = include_str!("../templates/strategy_user.txt");
pub const STRATEGY_EXPLOITATION_SYSTEM: &str =
    include_str!("../templates/strategy_exploitation_system.txt");
pub const TESTGEN_SYSTEM: &str = include_str!("../templates/testgen_system.txt");
pub const TESTGEN_USER: &str = include_str!("../templates/testgen_user.txt");

/// Substitutes `{key}` slots. Every provided key must be consumed and no
/// `{known_slot}` may survive, so template and code drift loudly.
pub fn render(template: &str, substitutions: &[(&str, &str)]) -> Result<String> {
    let mut out = template.to_string();
    for (key, value) in substitutions {
        let slot = format!("{{{key}}}");
        if !out.contains(&slot) {
            return Err(Error::Invariant(format!("template has no slot `{slot}`")));
        }
        out = out.replace(&slot, value);
    }
    for (key, _) in substitutions {
        let slot = format!("{{{key}}}");
        if out.contains(&slot) {
            return Err(Error::Invariant(format!("slot `{slot}` re-introduced by a value")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Go,
    Rust,
    Java,
}

impl Language {
    pub fn parse(text: &str) -> Result<Language> {
        match text.trim().to_ascii_lowercase().as_str() {
            "go" => Ok(Language::Go),
            "rust" => Ok(Language::Rust),
            "java" => Ok(Language::Java),
            other => Err(Error::Config(format!("unsupported language `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Language::Go => "go",
            Language::Rust => "rust",
            Language::Java => "java",
        }
    }

    pub fn template(&self) -> &'static str {
        match self {
            Language::Go => include_str!("../templates/lang_go.txt"),
            Language::Rust => include_str!("../templates/lang_rust.txt"),
            Language::Java => include_str!("../templates/lang_java.txt"),
        }
    }

    pub fn test_commands(&self) -> &'static str {
        match self {
            Language::Go => {
                "### Go Test Commands\n\
                 - Single test: `go test -v -run TestName ./path/...`\n\
                 - With timeout: `go test -v -timeout 60s -run TestName ./...`\n\
                 - With race detector: `go test -v -race -run TestName ./...`"
            }
            Language::Rust => {
                "### Rust Test Commands\n\
                 - Single test: `cargo test test_name -- --nocapture`\n\
                 - Integration test: `cargo test --test test_file -- --nocapture`\n\
                 - With logging: `RUST_LOG=debug cargo test test_name -- --nocapture`"
            }
            Language::Java => {
                "### Java Test Commands\n\
                 - Maven: `mvn test -Dtest=TestClassName`\n\
                 - Maven single method: `mvn test -Dtest=TestClassName#testMethodName`\n\
                 - Gradle: `gradle test --tests TestClassName`"
            }
        }
    }

    /// First token of each documented test command: the sandbox allowlist seed.
    pub fn allowed_commands(&self) -> &'static [&'static str] {
        match self {
            Language::Go => &["go"],
            Language::Rust => &["cargo"],
            Language::Java => &["mvn", "gradle"],
        }
    }
}

pub fn get_pattern_details_tool() -> ToolDecl {
    ToolDecl {
        name: "get_pattern_details".into(),
        description: "Query detailed information about a known bug pattern by pattern_id.".into(),
    }
}

pub fn memory_tools() -> Vec<ToolDecl> {
    vec![
        ToolDecl {
            name: "repo_knowledge".into(),
            description: "Get cached knowledge about the repository.".into(),
        },
        ToolDecl {
            name: "repo_knowledge_find_lessons".into(),
            description: "Search previous lessons that match an error message.".into(),
        },
        ToolDecl {
            name: "repo_knowledge_add_lesson".into(),
            description: "Record an issue and its solution for future reference.".into(),
        },
        ToolDecl {
            name: "repo_knowledge_add_helper".into(),
            description: "Record a helper function's signature and usage.".into(),
        },
    ]
}

fn pattern_list_section(patterns: &[(String, String)]) -> String {
    if patterns.is_empty() {
        "(no known bug patterns)".to_string()
    } else {
        patterns
            .iter()
            .map(|(id, name)| format!("- {id}: {name}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Standard-mode Strategy system prompt.
pub fn strategy_system_prompt(
    protocol_name: &str,
    profile: &ConstraintProfile,
    patterns: &[(String, String)],
    repo_context: &str,
) -> Result<String> {
    let repo_context = if repo_context.is_empty() { "(none provided)" } else { repo_context };
    render(
        STRATEGY_SYSTEM,
        &[
            ("protocol_name", protocol_name),
            ("protocol_type", &profile.protocol_type.as_str().to_uppercase()),
            ("constraint_text", &profile.constraint_text),
            ("repo_context", repo_context),
            ("pattern_list", &pattern_list_section(patterns)),
        ],
    )
}

/// Exploitation-mode Strategy system prompt.
pub fn strategy_exploitation_system_prompt(
    protocol_name: &str,
    profile: &ConstraintProfile,
) -> Result<String> {
    render(
        STRATEGY_EXPLOITATION_SYSTEM,
        &[
            ("protocol_name", protocol_name),
            ("protocol_type", &profile.protocol_type.as_str().to_uppercase()),
            ("constraint_text", &profile.constraint_text),
        ],
    )
}

pub fn strategy_user_prompt(protocol_name: &str, context: &str) -> Result<String> {
    let context = if context.is_empty() { "(first iteration, no prior state)" } else { context };
    render(STRATEGY_USER, &[("protocol_name", protocol_name), ("context", context)])
}

pub fn testgen_system_prompt(language: Language) -> Result<String> {
    render(
        TESTGEN_SYSTEM,
        &[
            (
                "helper_example",
                "-> Call repo_knowledge_add_helper(name, file, purpose, signature, usage_example, returns)",
            ),
            ("lang_order", language.as_str()),
        ],
    )
}

pub fn testgen_user_prompt(
    protocol_name: &str,
    language: Language,
    attack_scenario: &str,
    repo_knowledge: &str,
) -> Result<String> {
    render(
        TESTGEN_USER,
        &[
            ("language_template", language.template()),
            ("protocol_name", protocol_name),
            ("language", language.as_str()),
            ("attack_scenario", attack_scenario),
            ("repo_knowledge", repo_knowledge),
            ("test_commands", language.test_commands()),
        ],
    )
}

/// User prompt for the orchestrator's report synthesis step.
#[allow(clippy::too_many_arguments)]
pub fn orchestrator_report_prompt(
    protocol_name: &str,
    protocol_type: &str,
    scenario_name: &str,
    target_component: &str,
    attack_category: &str,
    vulnerability_hypothesis: &str,
    preconditions: &[String],
    steps: &[String],
    expected_bug_behavior: &str,
    correct_behavior: &str,
    test_file: &str,
    test_output_excerpt: &str,
    usage: &TokenUsage,
) -> Result<String> {
    let or_na = |s: &str| if s.is_empty() { "N/A".to_string() } else { s.to_string() };
    let numbered = |items: &[String]| {
        if items.is_empty() {
            "N/A".to_string()
        } else {
            items
                .iter()
                .enumerate()
                .map(|(i, item)| format!("{}. {item}", i + 1))
                .collect::<Vec<_>>()
                .join("\n")
        }
    };
    render(
        ORCHESTRATOR_REPORT_USER,
        &[
            ("protocol_name", protocol_name),
            ("protocol_type", &protocol_type.to_uppercase()),
            ("scenario_name", scenario_name),
            ("target_component", &or_na(target_component)),
            ("attack_category", &or_na(attack_category)),
            ("vulnerability_hypothesis", &or_na(vulnerability_hypothesis)),
            ("preconditions_text", &numbered(preconditions)),
            ("steps_text", &numbered(steps)),
            ("expected_bug_behavior", &or_na(expected_bug_behavior)),
            ("correct_behavior", &or_na(correct_behavior)),
            ("test_file", test_file),
            ("test_output", &or_na(test_output_excerpt)),
            ("prompt_tokens", &usage.prompt_tokens.to_string()),
            ("completion_tokens", &usage.completion_tokens.to_string()),
            ("total_tokens", &usage.total().to_string()),
            ("api_cost", &usage.api_cost.to_string()),
        ],
    )
}

pub const STATE_ANALYZER_SYSTEM: &str = "\
You are the state analyzer of a consensus bug hunting campaign. Summarize \
what has been attempted and found so that the next scenario avoids \
repeating prior work. Be concise: list attempted scenario names with their \
verdicts, name the components already covered, and suggest unexplored \
directions.";

/// User prompt for the global-state summarization step.
pub fn state_analyzer_prompt(
    attempted: &[(String, String)],
    confirmed_names: &[String],
) -> String {
    let mut out = String::from("## Scenarios Attempted\n\n");
    if attempted.is_empty() {
        out.push_str("(none yet)\n");
    } else {
        for (name, verdict) in attempted {
            out.push_str(&format!("- {name}: {verdict}\n"));
        }
    }
    out.push_str("\n## Confirmed Bugs\n\n");
    if confirmed_names.is_empty() {
        out.push_str("(none yet)\n");
    } else {
        for name in confirmed_names {
            out.push_str(&format!("- {name}\n"));
        }
    }
    out.push_str("\nSummarize the campaign state for the strategy agent.");
    out
}

/// User prompt for the bug-exploitation analysis step over one confirmed bug.
pub fn exploitation_analysis_prompt(
    scenario_name: &str,
    report_body: &str,
    repo: &RepoKnowledge,
) -> String {
    format!(
        "A bug named \"{scenario_name}\" was CONFIRMED in {} ({}).\n\n\
         ## Confirmed Bug Report\n\n{report_body}\n\n\
         Analyze its root cause and produce guidance for deriving related, \
         deeper attack scenarios: which assumptions were violated, which \
         neighboring components share them, and which variants look most \
         promising.",
        repo.repo_name, repo.protocol
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::ProtocolType;
    use crate::model::Money;

    #[test]
    fn render_substitutes_and_rejects_unknown_slots() {
        let out = render("a {x} b {y}", &[("x", "1"), ("y", "2")]).unwrap();
        assert_eq!(out, "a 1 b 2");
        assert!(render("a {x}", &[("z", "1")]).is_err());
    }

    #[test]
    fn strategy_system_prompt_carries_constraints_and_patterns() {
        let profile = ConstraintProfile::cft();
        let patterns = vec![("pat-abc123".to_string(), "stale read after restart".to_string())];
        let prompt =
            strategy_system_prompt("Raft", &profile, &patterns, "3-node test network").unwrap();
        assert!(prompt.contains("**Name**: Raft"));
        assert!(prompt.contains("**Type**: CFT"));
        assert!(prompt.contains("crash faults only"));
        assert!(prompt.contains("- pat-abc123: stale read after restart"));
        assert!(prompt.contains("get_pattern_details"));
        assert!(!prompt.contains('{'), "unresolved placeholder in:\n{prompt}");
    }

    #[test]
    fn exploitation_prompt_has_relation_field() {
        let profile = ConstraintProfile::bft();
        let prompt = strategy_exploitation_system_prompt("HotStuff", &profile).unwrap();
        assert!(prompt.contains("BUG EXPLOITATION MODE"));
        assert!(prompt.contains("Relation to Original Bug:"));
    }

    #[test]
    fn testgen_prompts_include_template_and_commands() {
        let system = testgen_system_prompt(Language::Rust).unwrap();
        assert!(system.contains("repo_knowledge_find_lessons"));
        assert!(system.contains("language=\"rust\""));

        let user =
            testgen_user_prompt("Raft", Language::Rust, "<scenario>", "helpers: Cluster::new")
                .unwrap();
        assert!(user.contains("## Rust Test Template"));
        assert!(user.contains("cargo test test_name -- --nocapture"));
        assert!(user.contains("helpers: Cluster::new"));
    }

    #[test]
    fn report_prompt_fills_na_and_numbers_steps() {
        let usage = TokenUsage {
            prompt_tokens: 1200,
            completion_tokens: 300,
            api_cost: Money::parse("0.0123").unwrap(),
        };
        let prompt = orchestrator_report_prompt(
            "Raft",
            "cft",
            "AmnesiaProbe",
            "",
            "safety",
            "cursor not persisted",
            &[],
            &["commit two entries".to_string(), "crash and restart".to_string()],
            "entries reapplied",
            "exactly-once apply",
            "tests/generated.rs",
            "SAFETY VIOLATION: x=4",
            &usage,
        )
        .unwrap();
        assert!(prompt.contains("**Target Component**: N/A"));
        assert!(prompt.contains("1. commit two entries\n2. crash and restart"));
        assert!(prompt.contains("**Total Tokens**: 1500"));
        assert!(prompt.contains("<bug_pattern>"));
    }

    #[test]
    fn language_tables_are_consistent() {
        for lang in [Language::Go, Language::Rust, Language::Java] {
            assert_eq!(Language::parse(lang.as_str()).unwrap(), lang);
            let first_commands = lang.allowed_commands();
            assert!(!first_commands.is_empty());
            for command in first_commands {
                assert!(lang.test_commands().contains(command));
            }
        }
        assert!(matches!(ProtocolType::parse("CFT"), Ok(ProtocolType::Cft)));
    }

    #[test]
    fn state_analyzer_prompt_lists_all_names() {
        let attempted = vec![
            ("a".to_string(), "NoBug".to_string()),
            ("b".to_string(), "Rejected".to_string()),
            ("c".to_string(), "BugFound".to_string()),
        ];
        let prompt = state_analyzer_prompt(&attempted, &["c".to_string()]);
        for name in ["- a: NoBug", "- b: Rejected", "- c: BugFound"] {
            assert!(prompt.contains(name));
        }
    }
}
