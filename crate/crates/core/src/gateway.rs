//! Uniform text-generation backend behind every agent: a live
//! chat-completion HTTP client and a deterministic scripted/replay backend,
//! with per-agent token and cost metering.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BackendError, Error, Result};
use crate::model::{Money, PriceTable, TokenUsage};

/// The default sampling temperature for every agent completion.
pub const DEFAULT_TEMPERATURE: f64 = 0.2;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[serde(rename_all = "lowercase")]
pub enum AgentId {
    Orchestrator,
    Strategy,
    TestGen,
}

impl AgentId {
    pub fn as_str(&self) -> &'static str {
        match self {
            AgentId::Orchestrator => "orchestrator",
            AgentId::Strategy => "strategy",
            AgentId::TestGen => "testgen",
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Message {
        Message { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Message {
        Message { role: Role::Assistant, content: content.into() }
    }

    pub fn tool(content: impl Into<String>) -> Message {
        Message { role: Role::Tool, content: content.into() }
    }
}

/// Declaration of a tool the model may call.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ToolDecl {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub tools: Vec<ToolDecl>,
    pub model_id: String,
}

// f64 temperature keeps ChatRequest out of Eq; the derived Eq above is fine
// because temperature values come from config literals, never arithmetic.
impl Eq for ChatRequest {}

impl ChatRequest {
    pub fn new(system_prompt: impl Into<String>, messages: Vec<Message>) -> ChatRequest {
        ChatRequest {
            system_prompt: system_prompt.into(),
            messages,
            temperature: DEFAULT_TEMPERATURE,
            tools: Vec::new(),
            model_id: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.messages.is_empty() {
            return Err(Error::Invariant("chat request has no messages".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(Error::Invariant(format!("temperature {} out of [0,1]", self.temperature)));
        }
        Ok(())
    }

    pub fn last_user_message(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }

    fn char_len(&self) -> usize {
        self.system_prompt.chars().count()
            + self.messages.iter().map(|m| m.content.chars().count()).sum::<usize>()
    }
}

/// A structured tool invocation returned by the model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ToolCall {
    pub tool_name: String,
    /// Arguments as structured text (JSON object).
    pub arguments: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ChatResponse {
    pub content: String,
    #[serde(default)]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default)]
    pub usage: TokenUsage,
}

impl ChatResponse {
    fn char_len(&self) -> usize {
        self.content.chars().count()
            + self
                .tool_calls
                .iter()
                .map(|t| t.tool_name.chars().count() + t.arguments.chars().count())
                .sum::<usize>()
    }
}

pub trait TextBackend: Send {
    fn complete(&mut self, request: &ChatRequest) -> std::result::Result<ChatResponse, BackendError>;

    /// True when the backend synthesizes usage itself (scripted mode).
    fn estimates_usage(&self) -> bool {
        false
    }
}

/// One scripted reply. `match` restricts the entry to requests whose last
/// user message contains the given substring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptEntry {
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub match_text: Option<String>,
    pub response: ScriptedResponse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptedResponse {
    #[serde(default)]
    pub content: String,
    #[serde(default)]
    pub tool_calls: Vec<ToolCall>,
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedTranscript {
    pub entries: Vec<TranscriptEntry>,
}

impl ScriptedTranscript {
    pub fn from_jsonl(text: &str) -> Result<ScriptedTranscript> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(line)
                .map_err(|e| Error::Serde(format!("transcript line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        Ok(ScriptedTranscript { entries })
    }

    pub fn load(path: &Path) -> Result<ScriptedTranscript> {
        ScriptedTranscript::from_jsonl(&fs::read_to_string(path)?)
    }
}

/// Deterministic replay backend. Entries are consumed in order; entries
/// whose `match` predicate does not hold against the current request are
/// skipped (consumed) so conditional replies stay in one linear script.
pub struct ScriptedBackend {
    transcript: ScriptedTranscript,
    cursor: usize,
    served: usize,
}

impl ScriptedBackend {
    pub fn new(transcript: ScriptedTranscript) -> ScriptedBackend {
        ScriptedBackend { transcript, cursor: 0, served: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.transcript.entries.len() - self.cursor
    }
}

/// Scripted token estimator: `ceil(characters / 4)` per side.
pub fn estimate_tokens(chars: usize) -> u64 {
    (chars as u64).div_ceil(4)
}

impl TextBackend for ScriptedBackend {
    fn complete(&mut self, request: &ChatRequest) -> std::result::Result<ChatResponse, BackendError> {
        let last_user = request.last_user_message().unwrap_or("");
        while self.cursor < self.transcript.entries.len() {
            let entry = &self.transcript.entries[self.cursor];
            self.cursor += 1;
            let fires = match &entry.match_text {
                Some(needle) => last_user.contains(needle.as_str()),
                None => true,
            };
            if fires {
                self.served += 1;
                let response = ChatResponse {
                    content: entry.response.content.clone(),
                    tool_calls: entry.response.tool_calls.clone(),
                    usage: TokenUsage::ZERO,
                };
                return Ok(response);
            }
        }
        Err(BackendError::TranscriptExhausted { calls_served: self.served })
    }

    fn estimates_usage(&self) -> bool {
        true
    }
}

/// OpenAI-style chat completion client. Endpoint, model, and key come from
/// the environment (`QP_API_URL`, `QP_MODEL`, `QP_API_KEY`).
pub struct LiveBackend {
    endpoint: String,
    api_key: String,
    model_id: String,
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn from_env() -> Result<LiveBackend> {
        let endpoint = std::env::var("QP_API_URL")
            .map_err(|_| Error::Config("QP_API_URL not set for live backend".into()))?;
        let api_key = std::env::var("QP_API_KEY").unwrap_or_default();
        let model_id = std::env::var("QP_MODEL")
            .map_err(|_| Error::Config("QP_MODEL not set for live backend".into()))?;
        Ok(LiveBackend {
            endpoint,
            api_key,
            model_id,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(300))
                .build()
                .map_err(|e| Error::Network(e.to_string()))?,
        })
    }

    fn wire_request(&self, request: &ChatRequest) -> serde_json::Value {
        let mut messages = vec![serde_json::json!({
            "role": "system",
            "content": request.system_prompt,
        })];
        for m in &request.messages {
            let role = match m.role {
                Role::User => "user",
                Role::Assistant => "assistant",
                Role::Tool => "tool",
            };
            messages.push(serde_json::json!({"role": role, "content": m.content}));
        }
        let model = if request.model_id.is_empty() { &self.model_id } else { &request.model_id };
        serde_json::json!({
            "model": model,
            "temperature": request.temperature,
            "messages": messages,
        })
    }
}

impl TextBackend for LiveBackend {
    fn complete(&mut self, request: &ChatRequest) -> std::result::Result<ChatResponse, BackendError> {
        let body = self.wire_request(request);
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() || e.is_connect() {
                    BackendError::Transient(e.to_string())
                } else {
                    BackendError::Fatal(e.to_string())
                }
            })?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("provider returned {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("provider returned {status}")));
        }
        let value: serde_json::Value =
            response.json().map_err(|e| BackendError::Fatal(e.to_string()))?;
        let content = value["choices"][0]["message"]["content"]
            .as_str()
            .unwrap_or_default()
            .to_string();
        let mut tool_calls = Vec::new();
        if let Some(calls) = value["choices"][0]["message"]["tool_calls"].as_array() {
            for call in calls {
                tool_calls.push(ToolCall {
                    tool_name: call["function"]["name"].as_str().unwrap_or_default().to_string(),
                    arguments: call["function"]["arguments"].as_str().unwrap_or("{}").to_string(),
                });
            }
        }
        let usage = TokenUsage {
            prompt_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0),
            api_cost: Money::ZERO,
        };
        if content.is_empty() && tool_calls.is_empty() {
            return Err(BackendError::Fatal("empty completion".into()));
        }
        Ok(ChatResponse { content, tool_calls, usage })
    }
}

/// Per-agent and campaign token/cost totals, with optional attribution to
/// the active scenario.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Ledger {
    pub per_agent: BTreeMap<AgentId, TokenUsage>,
    pub per_scenario: BTreeMap<String, TokenUsage>,
    pub campaign_total: TokenUsage,
    pub calls: u64,
}

impl Ledger {
    pub fn meter(&mut self, agent: AgentId, usage: TokenUsage, scenario: Option<&str>) {
        *self.per_agent.entry(agent).or_default() += usage;
        if let Some(slug) = scenario {
            *self.per_scenario.entry(slug.to_string()).or_default() += usage;
        }
        self.campaign_total += usage;
        self.calls += 1;
    }

    pub fn agent_total(&self, agent: AgentId) -> TokenUsage {
        self.per_agent.get(&agent).copied().unwrap_or_default()
    }

    /// Average tokens per confirmed bug, as a rational pair.
    pub fn tokens_per_bug(&self, bugs: u64) -> Option<f64> {
        if bugs == 0 {
            return None;
        }
        Some(self.campaign_total.total() as f64 / bugs as f64)
    }
}

/// One line of the append-only call log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallRecord {
    pub seq: u64,
    pub agent: AgentId,
    /// What the call was for, e.g. `testgen-generate` or `strategy-tool-continue`.
    pub purpose: String,
    pub request_hash: String,
    pub response_hash: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub api_cost: Money,
    pub timestamp: String,
}

fn short_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, base_backoff: Duration::from_millis(200) }
    }
}

/// Shared front door for completions: retries transients, meters usage,
/// appends to the call log.
pub struct Gateway {
    backend: Box<dyn TextBackend>,
    pub prices: PriceTable,
    pub retry: RetryPolicy,
    pub ledger: Ledger,
    call_records: Vec<CallRecord>,
    call_log_path: Option<PathBuf>,
    active_scenario: Option<String>,
}

impl Gateway {
    pub fn new(backend: Box<dyn TextBackend>, prices: PriceTable) -> Gateway {
        Gateway {
            backend,
            prices,
            retry: RetryPolicy::default(),
            ledger: Ledger::default(),
            call_records: Vec::new(),
            call_log_path: None,
            active_scenario: None,
        }
    }

    pub fn with_call_log(mut self, path: PathBuf) -> Gateway {
        self.call_log_path = Some(path);
        self
    }

    pub fn set_active_scenario(&mut self, slug: Option<String>) {
        self.active_scenario = slug;
    }

    pub fn call_records(&self) -> &[CallRecord] {
        &self.call_records
    }

    /// Issues one completion on behalf of `agent`. Failed attempts are not
    /// metered; only the attempt that returns a response is billed.
    pub fn complete(
        &mut self,
        agent: AgentId,
        purpose: &str,
        request: &ChatRequest,
    ) -> Result<ChatResponse> {
        request.validate()?;
        let mut attempt = 0u32;
        let mut response = loop {
            match self.backend.complete(request) {
                Ok(resp) => break resp,
                Err(err) if err.is_transient() && attempt < self.retry.max_retries => {
                    let backoff = self.retry.base_backoff * 2u32.saturating_pow(attempt);
                    if !backoff.is_zero() {
                        std::thread::sleep(backoff);
                    }
                    attempt += 1;
                }
                Err(err) => return Err(err.into()),
            }
        };

        if self.backend.estimates_usage() {
            response.usage = TokenUsage::new(
                estimate_tokens(request.char_len()),
                estimate_tokens(response.char_len()),
                &self.prices,
            );
        } else {
            response.usage.api_cost =
                self.prices.cost(response.usage.prompt_tokens, response.usage.completion_tokens);
        }
        if response.content.is_empty() && response.tool_calls.is_empty() {
            return Err(Error::Invariant("completion carried neither content nor tool calls".into()));
        }

        let record = CallRecord {
            seq: self.ledger.calls + 1,
            agent,
            purpose: purpose.to_string(),
            request_hash: short_hash(&serde_json::to_string(request)?),
            response_hash: short_hash(&serde_json::to_string(&response)?),
            prompt_tokens: response.usage.prompt_tokens,
            completion_tokens: response.usage.completion_tokens,
            api_cost: response.usage.api_cost,
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        self.meter(agent, response.usage);
        if let Some(path) = &self.call_log_path {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(file, "{}", serde_json::to_string(&record)?)?;
        }
        self.call_records.push(record);
        Ok(response)
    }

    /// Accumulates usage into the per-agent and campaign totals.
    pub fn meter(&mut self, agent: AgentId, usage: TokenUsage) {
        let scenario = self.active_scenario.clone();
        self.ledger.meter(agent, usage, scenario.as_deref());
    }
}
