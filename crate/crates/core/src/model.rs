//! Domain types shared by every agent: the vulnerability hypothesis, attack
//! scenarios, bug reports, reusable patterns, execution outcomes, and the
//! token/cost ledger entries.
//!
//! Free text is stored verbatim so reports stay human-auditable; only
//! identifiers destined for filenames go through [`slugify`].

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercases, keeps alphanumerics, collapses everything else to hyphens.
pub fn slugify(text: &str) -> String {
    let mut slug = String::with_capacity(text.len());
    let mut pending_hyphen = false;
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() {
            if pending_hyphen && !slug.is_empty() {
                slug.push('-');
            }
            pending_hyphen = false;
            slug.push(ch.to_ascii_lowercase());
        } else {
            pending_hyphen = true;
        }
    }
    slug
}

/// Exact money amount with 6 fractional digits, stored in integer
/// micro-units so cost ledgers sum without rounding drift.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money {
    micros: i64,
}

impl Money {
    pub const ZERO: Money = Money { micros: 0 };

    pub fn from_micros(micros: i64) -> Money {
        Money { micros }
    }

    pub fn micros(self) -> i64 {
        self.micros
    }

    /// Parses a plain decimal like `0.005` or `40`, up to 6 fractional digits.
    pub fn parse(text: &str) -> Result<Money> {
        let text = text.trim();
        let (sign, digits) = match text.strip_prefix('-') {
            Some(rest) => (-1i64, rest),
            None => (1i64, text),
        };
        let (whole, frac) = match digits.split_once('.') {
            Some((w, f)) => (w, f),
            None => (digits, ""),
        };
        if frac.len() > 6 {
            return Err(Error::Serde(format!("money has more than 6 fractional digits: {text}")));
        }
        let whole: i64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| Error::Serde(format!("bad money amount: {text}")))?
        };
        let mut frac_val: i64 = 0;
        if !frac.is_empty() {
            frac_val = frac.parse().map_err(|_| Error::Serde(format!("bad money amount: {text}")))?;
            frac_val *= 10i64.pow(6 - frac.len() as u32);
        }
        Ok(Money { micros: sign * (whole * 1_000_000 + frac_val) })
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.micros < 0 { "-" } else { "" };
        let abs = self.micros.unsigned_abs();
        write!(f, "{sign}{}.{:06}", abs / 1_000_000, abs % 1_000_000)
    }
}

impl Serialize for Money {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Money::parse(&text).map_err(serde::de::Error::custom)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money { micros: self.micros + rhs.micros }
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.micros += rhs.micros;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money { micros: self.micros - rhs.micros }
    }
}

/// Per-million-token prompt and completion prices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PriceTable {
    pub prompt_per_million: Money,
    pub completion_per_million: Money,
}

impl Default for PriceTable {
    fn default() -> Self {
        PriceTable {
            prompt_per_million: Money::ZERO,
            completion_per_million: Money::ZERO,
        }
    }
}

impl PriceTable {
    pub fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> Money {
        // price is micros per 1e6 tokens, so micros-per-token divides evenly
        // only in aggregate; keep full precision via i128.
        let p = (prompt_tokens as i128 * self.prompt_per_million.micros() as i128) / 1_000_000;
        let c = (completion_tokens as i128 * self.completion_per_million.micros() as i128)
            / 1_000_000;
        Money::from_micros((p + c) as i64)
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub api_cost: Money,
}

impl TokenUsage {
    pub const ZERO: TokenUsage = TokenUsage {
        prompt_tokens: 0,
        completion_tokens: 0,
        api_cost: Money::ZERO,
    };

    pub fn new(prompt_tokens: u64, completion_tokens: u64, prices: &PriceTable) -> TokenUsage {
        TokenUsage {
            prompt_tokens,
            completion_tokens,
            api_cost: prices.cost(prompt_tokens, completion_tokens),
        }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;
    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
            api_cost: self.api_cost + rhs.api_cost,
        }
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

impl Sub for TokenUsage {
    type Output = TokenUsage;
    fn sub(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage {
            prompt_tokens: self.prompt_tokens - rhs.prompt_tokens,
            completion_tokens: self.completion_tokens - rhs.completion_tokens,
            api_cost: self.api_cost - rhs.api_cost,
        }
    }
}

/// The vulnerability hypothesis tuple: preconditions, action steps,
/// expected buggy behavior, oracle assertions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Hypothesis {
    pub preconditions: Vec<String>,
    pub action_steps: Vec<String>,
    pub expected_bug_behavior: String,
    pub oracle_assertions: Vec<String>,
}

impl Hypothesis {
    pub fn validate(&self) -> Result<()> {
        if self.action_steps.is_empty() {
            return Err(Error::Invariant("hypothesis has no action steps".into()));
        }
        if self.oracle_assertions.is_empty() {
            return Err(Error::Invariant("hypothesis has no oracle assertions".into()));
        }
        Ok(())
    }
}

/// Safety / liveness / agreement, the three attack objectives a scenario or
/// pattern targets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "lowercase")]
pub enum AttackCategory {
    Safety,
    Liveness,
    Agreement,
}

impl AttackCategory {
    pub fn parse(text: &str) -> Result<AttackCategory> {
        match text.trim().to_ascii_lowercase().as_str() {
            "safety" => Ok(AttackCategory::Safety),
            "liveness" => Ok(AttackCategory::Liveness),
            "agreement" => Ok(AttackCategory::Agreement),
            other => Err(Error::Parse(format!("Attack Category: unknown value `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AttackCategory::Safety => "safety",
            AttackCategory::Liveness => "liveness",
            AttackCategory::Agreement => "agreement",
        }
    }
}

/// The five classes of protocol-level logic bugs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "snake_case")]
pub enum BugCategory {
    RecoveryExecutionDivergence,
    PersistenceMonotonicity,
    DependencyTopology,
    MessageBindingSignature,
    ResourceOperationalVisibility,
}

impl BugCategory {
    pub const ALL: [BugCategory; 5] = [
        BugCategory::RecoveryExecutionDivergence,
        BugCategory::PersistenceMonotonicity,
        BugCategory::DependencyTopology,
        BugCategory::MessageBindingSignature,
        BugCategory::ResourceOperationalVisibility,
    ];

    pub fn parse(text: &str) -> Result<BugCategory> {
        match slugify(text).as_str() {
            "recovery-execution-divergence" => Ok(BugCategory::RecoveryExecutionDivergence),
            "persistence-monotonicity" => Ok(BugCategory::PersistenceMonotonicity),
            "dependency-topology" => Ok(BugCategory::DependencyTopology),
            "message-binding-signature" => Ok(BugCategory::MessageBindingSignature),
            "resource-operational-visibility" => Ok(BugCategory::ResourceOperationalVisibility),
            other => Err(Error::Parse(format!("bug category: unknown value `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BugCategory::RecoveryExecutionDivergence => "recovery_execution_divergence",
            BugCategory::PersistenceMonotonicity => "persistence_monotonicity",
            BugCategory::DependencyTopology => "dependency_topology",
            BugCategory::MessageBindingSignature => "message_binding_signature",
            BugCategory::ResourceOperationalVisibility => "resource_operational_visibility",
        }
    }
}

/// Total classification of each logic-bug class into the attack objective it
/// primarily violates.
pub fn attack_category_of(category: BugCategory) -> AttackCategory {
    match category {
        BugCategory::RecoveryExecutionDivergence => AttackCategory::Safety,
        BugCategory::PersistenceMonotonicity => AttackCategory::Safety,
        BugCategory::DependencyTopology => AttackCategory::Agreement,
        BugCategory::MessageBindingSignature => AttackCategory::Safety,
        BugCategory::ResourceOperationalVisibility => AttackCategory::Liveness,
    }
}

/// Where a scenario's idea came from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Inspiration {
    Original,
    Pattern { pattern_id: String },
}

/// The Strategy agent's structured output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct AttackScenario {
    pub name: String,
    pub target_component: String,
    pub vulnerability_hypothesis: String,
    pub category: AttackCategory,
    pub inspiration: Inspiration,
    /// Present if and only if produced in exploitation mode.
    pub relation_to_original: Option<String>,
    pub correct_behavior: String,
    pub hypothesis: Hypothesis,
}

impl AttackScenario {
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Invariant("scenario name is empty".into()));
        }
        self.hypothesis.validate()
    }

    pub fn slug(&self) -> String {
        slugify(&self.name)
    }
}

/// Pure projection of a scenario onto its hypothesis tuple.
pub fn hypothesis_from_scenario(scenario: &AttackScenario) -> Hypothesis {
    scenario.hypothesis.clone()
}

/// A reusable, categorized description of a historical vulnerability.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct BugPattern {
    pub pattern_id: String,
    pub name: String,
    pub bug_category: AttackCategory,
    pub fault_type: String,
    pub trigger_condition: String,
    pub description: String,
    pub test_template: String,
    pub used: bool,
}

/// Classified result of executing a generated test.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    BuildFailure,
    RuntimeError,
    PassedNoBug,
    FailedBugDetected,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TestRunOutcome {
    pub kind: OutcomeKind,
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
    pub duration_secs: f64,
}

/// Default truncation applied to test output quoted in reports.
pub const DEFAULT_EXCERPT_LIMIT: usize = 2000;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BugReport {
    pub scenario: AttackScenario,
    pub test_file_path: String,
    pub test_output_excerpt: String,
    pub report_body: String,
    /// Absent only when report-prompt parsing degraded after its retry.
    pub pattern: Option<BugPattern>,
    pub usage: TokenUsage,
    /// Tri-state: `None` until human triage marks it true/false.
    pub confirmed: Option<bool>,
}

impl BugReport {
    pub fn slug(&self) -> String {
        self.scenario.slug()
    }
}

/// Truncates to at most `limit` characters on a char boundary.
pub fn truncate_excerpt(text: &str, limit: usize) -> String {
    text.chars().take(limit).collect()
}
