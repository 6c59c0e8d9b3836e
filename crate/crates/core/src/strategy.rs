//! Strategy agent: turns orchestrator context into one constraint-checked
//! attack scenario, optionally seeded by a known bug pattern fetched
//! through the `get_pattern_details` tool.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::gateway::{AgentId, ChatRequest, ChatResponse, Gateway, Message, ToolCall};
use crate::knowledge::{
    check_scenario_constraints, ConstraintProfile, ConstraintVerdict, FaultLexicon, PatternLibrary,
};
use crate::model::{AttackCategory, AttackScenario, Hypothesis, Inspiration};
use crate::prompts;

const LABELS: &[&str] = &[
    "Name",
    "Target Component",
    "Vulnerability Hypothesis",
    "Attack Category",
    "Inspiration Source",
    "Relation to Original Bug",
    "Preconditions",
    "Attack Steps",
    "Expected Bug Behavior",
    "Correct Behavior",
    "Assertions",
];

fn match_label(line: &str) -> Option<(&'static str, &str)> {
    let trimmed = line.trim_start();
    for label in LABELS {
        if trimmed.len() >= label.len()
            && trimmed[..label.len()].eq_ignore_ascii_case(label)
            && trimmed[label.len()..].trim_start().starts_with(':')
        {
            let rest = trimmed[label.len()..].trim_start();
            return Some((label, rest[1..].trim()));
        }
    }
    None
}

fn extract_block<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open)? + open.len();
    let end = text[start..].find(&close)? + start;
    Some(&text[start..end])
}

/// Splits a field body into its numbered clauses; unnumbered lines continue
/// the previous clause.
fn numbered_items(body: &str) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    for line in body.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let numbered = line
            .split_once(['.', ')'])
            .filter(|(n, _)| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()));
        match numbered {
            Some((_, rest)) => items.push(rest.trim().to_string()),
            None if !items.is_empty() => {
                let last = items.last_mut().unwrap();
                last.push(' ');
                last.push_str(line);
            }
            None => items.push(line.to_string()),
        }
    }
    items
}

/// Parses the `<attack_scenario>` block of a Strategy reply. Field labels
/// match case-insensitively; missing mandatory fields are reported by name,
/// first missing wins.
pub fn parse_attack_scenario(text: &str) -> Result<AttackScenario> {
    let block = extract_block(text, "attack_scenario")
        .ok_or_else(|| Error::Parse("attack_scenario".into()))?;

    let mut fields: Vec<(&'static str, String)> = Vec::new();
    for line in block.lines() {
        match match_label(line) {
            Some((label, first)) => fields.push((label, first.to_string())),
            None => {
                if let Some((_, body)) = fields.last_mut() {
                    body.push('\n');
                    body.push_str(line);
                }
            }
        }
    }
    let field = |label: &str| -> Option<&str> {
        fields.iter().find(|(l, _)| *l == label).map(|(_, body)| body.as_str())
    };
    let scalar = |label: &str| -> String {
        field(label)
            .map(|body| body.split_whitespace().collect::<Vec<_>>().join(" "))
            .unwrap_or_default()
    };
    let list = |label: &str| -> Vec<String> { field(label).map(numbered_items).unwrap_or_default() };

    let name = scalar("Name");
    if name.is_empty() {
        return Err(Error::Parse("Name".into()));
    }
    let category_text = scalar("Attack Category");
    if category_text.is_empty() {
        return Err(Error::Parse("Attack Category".into()));
    }
    let category = AttackCategory::parse(&category_text)?;
    let action_steps = list("Attack Steps");
    if action_steps.is_empty() {
        return Err(Error::Parse("Attack Steps".into()));
    }
    let expected_bug_behavior = scalar("Expected Bug Behavior");
    if expected_bug_behavior.is_empty() {
        return Err(Error::Parse("Expected Bug Behavior".into()));
    }
    let oracle_assertions = list("Assertions");
    if oracle_assertions.is_empty() {
        return Err(Error::Parse("Assertions".into()));
    }

    let inspiration = match scalar("Inspiration Source").as_str() {
        "" | "original" => Inspiration::Original,
        source => match source.strip_prefix("pattern_memory::") {
            Some(id) => Inspiration::Pattern { pattern_id: id.trim().to_string() },
            None if source.eq_ignore_ascii_case("original") => Inspiration::Original,
            None => return Err(Error::Parse("Inspiration Source".into())),
        },
    };
    let relation = scalar("Relation to Original Bug");

    Ok(AttackScenario {
        name,
        target_component: scalar("Target Component"),
        vulnerability_hypothesis: scalar("Vulnerability Hypothesis"),
        category,
        inspiration,
        relation_to_original: if relation.is_empty() { None } else { Some(relation) },
        correct_behavior: scalar("Correct Behavior"),
        hypothesis: Hypothesis {
            preconditions: list("Preconditions"),
            action_steps,
            expected_bug_behavior,
            oracle_assertions,
        },
    })
}

/// Canonical renderer; `parse_attack_scenario` is a left inverse of it.
pub fn render_attack_scenario(scenario: &AttackScenario) -> String {
    fn line(out: &mut String, label: &str, value: &str) {
        out.push_str(label);
        out.push_str(": ");
        out.push_str(value);
        out.push_str("\n\n");
    }
    fn section(out: &mut String, label: &str, items: &[String]) {
        out.push_str(label);
        out.push_str(":\n");
        for (i, item) in items.iter().enumerate() {
            out.push_str(&format!("{}. {item}\n", i + 1));
        }
        out.push('\n');
    }
    let out = &mut String::from("<attack_scenario>\n");
    line(out, "Name", &scenario.name);
    line(out, "Target Component", &scenario.target_component);
    line(out, "Vulnerability Hypothesis", &scenario.vulnerability_hypothesis);
    line(out, "Attack Category", scenario.category.as_str());
    match &scenario.inspiration {
        Inspiration::Original => line(out, "Inspiration Source", "original"),
        Inspiration::Pattern { pattern_id } => {
            line(out, "Inspiration Source", &format!("pattern_memory::{pattern_id}"))
        }
    }
    if let Some(relation) = &scenario.relation_to_original {
        line(out, "Relation to Original Bug", relation);
    }
    if !scenario.hypothesis.preconditions.is_empty() {
        section(out, "Preconditions", &scenario.hypothesis.preconditions);
    }
    section(out, "Attack Steps", &scenario.hypothesis.action_steps);
    line(out, "Expected Bug Behavior", &scenario.hypothesis.expected_bug_behavior);
    line(out, "Correct Behavior", &scenario.correct_behavior);
    section(out, "Assertions", &scenario.hypothesis.oracle_assertions);
    out.push_str("</attack_scenario>");
    std::mem::take(out)
}

#[derive(Debug, Clone)]
pub enum StrategyMode {
    Standard,
    Exploitation { guidance: String },
}

#[derive(Debug, Clone)]
pub struct StrategyConfig {
    pub max_tool_calls: usize,
    /// Cleared by the constraints-analyzer ablation.
    pub check_constraints: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig { max_tool_calls: 5, check_constraints: true }
    }
}

#[derive(Deserialize)]
struct PatternArgs {
    pattern_id: String,
}

fn run_tool_call(library: &PatternLibrary, call: &ToolCall) -> String {
    if call.tool_name != "get_pattern_details" {
        return format!("unknown tool: {}", call.tool_name);
    }
    let args: PatternArgs = match serde_json::from_str(&call.arguments) {
        Ok(args) => args,
        Err(e) => return format!("bad get_pattern_details arguments: {e}"),
    };
    match library.get_pattern_details(&args.pattern_id) {
        Ok((pattern, used)) => {
            let mut out = format!(
                "Pattern {}\nName: {}\nBug Category: {}\nFault Type: {}\nTrigger Condition: {}\nDescription: {}\nTest Template: {}",
                pattern.pattern_id,
                pattern.name,
                pattern.bug_category.as_str(),
                pattern.fault_type,
                pattern.trigger_condition,
                pattern.description,
                pattern.test_template,
            );
            if used {
                out.push_str(
                    "\nWARNING: this pattern was already used. You MUST create a substantially different attack vector.",
                );
            }
            out
        }
        Err(e) => e.to_string(),
    }
}

/// One completion round of the bounded tool loop. Tool calls execute for
/// their side channel; when the reply also carries content, that content is
/// used directly without another completion.
fn complete_with_tools(
    gateway: &mut Gateway,
    library: &PatternLibrary,
    request: &mut ChatRequest,
    config: &StrategyConfig,
    purpose: &str,
) -> Result<ChatResponse> {
    for _ in 0..config.max_tool_calls {
        let response = gateway.complete(AgentId::Strategy, purpose, request)?;
        if response.tool_calls.is_empty() || !response.content.is_empty() {
            return Ok(response);
        }
        request.messages.push(Message::assistant(format!(
            "(tool calls: {})",
            response
                .tool_calls
                .iter()
                .map(|c| c.tool_name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
        for call in &response.tool_calls {
            request.messages.push(Message::tool(run_tool_call(library, call)));
        }
    }
    Err(Error::Parse("attack_scenario".into()))
}

/// S.1–S.4: produce one validated scenario or fail with an error the
/// orchestrator records as verdict Invalid. Re-ask budget is one for parse
/// failures and one for constraint violations, independently.
pub fn generate_scenario(
    gateway: &mut Gateway,
    library: &mut PatternLibrary,
    profile: &ConstraintProfile,
    lexicon: &FaultLexicon,
    protocol_name: &str,
    repo_context: &str,
    context: &str,
    mode: &StrategyMode,
    config: &StrategyConfig,
) -> Result<AttackScenario> {
    let system = match mode {
        StrategyMode::Standard => prompts::strategy_system_prompt(
            protocol_name,
            profile,
            &library.summaries(),
            repo_context,
        )?,
        StrategyMode::Exploitation { .. } => {
            prompts::strategy_exploitation_system_prompt(protocol_name, profile)?
        }
    };
    let mut user = prompts::strategy_user_prompt(protocol_name, context)?;
    if let StrategyMode::Exploitation { guidance } = mode {
        user.push_str(&format!("\n\n## Confirmed Bug Guidance\n\n{guidance}"));
    }
    let mut request = ChatRequest::new(system, vec![Message::user(user)]);
    request.tools = vec![prompts::get_pattern_details_tool()];

    let response = complete_with_tools(gateway, library, &mut request, config, "strategy-generate")?;
    let mut scenario = match parse_attack_scenario(&response.content) {
        Ok(scenario) => scenario,
        Err(parse_err) => {
            request.messages.push(Message::assistant(response.content));
            request.messages.push(Message::user(format!(
                "Your reply could not be parsed: {parse_err}. Resend the complete \
                 <attack_scenario> block with every mandatory field \
                 (Name, Attack Category, Attack Steps, Expected Bug Behavior, Assertions)."
            )));
            let retry =
                complete_with_tools(gateway, library, &mut request, config, "strategy-reask-parse")?;
            parse_attack_scenario(&retry.content)?
        }
    };

    if let ConstraintVerdict::Reject(violations) = if config.check_constraints {
        check_scenario_constraints(&scenario, profile, lexicon)
    } else {
        ConstraintVerdict::Accept
    } {
        let listing = violations
            .iter()
            .map(|v| format!("- step {} (\"{}\"): {:?} is outside the fault model", v.step_index + 1, v.step, v.fault))
            .collect::<Vec<_>>()
            .join("\n");
        request.messages.push(Message::assistant(render_attack_scenario(&scenario)));
        request.messages.push(Message::user(format!(
            "Your scenario violates the {} fault model:\n{listing}\n\
             Propose a different scenario that stays within the allowed faults.",
            profile.protocol_type.as_str().to_uppercase()
        )));
        let retry = complete_with_tools(
            gateway,
            library,
            &mut request,
            config,
            "strategy-reask-constraint",
        )?;
        scenario = parse_attack_scenario(&retry.content)?;
        if let ConstraintVerdict::Reject(violations) =
            check_scenario_constraints(&scenario, profile, lexicon)
        {
            return Err(Error::ConstraintViolation(format!(
                "{} violation(s) after re-ask",
                violations.len()
            )));
        }
    }

    if matches!(mode, StrategyMode::Standard) {
        scenario.relation_to_original = None;
    }
    scenario.validate()?;

    if let Inspiration::Pattern { pattern_id } = &scenario.inspiration {
        match library.mark_pattern_used(pattern_id) {
            Ok(()) => {}
            Err(Error::UnknownPattern(id)) => {
                log::warn!("scenario cites unknown pattern {id}; treating as original");
                scenario.inspiration = Inspiration::Original;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(scenario)
}
