//! Knowledge library: mined bug patterns, protocol constraint profiles, the
//! fault-detection lexicon, and the offline issue-ingestion pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gateway::{ChatRequest, Message, TextBackend};
use crate::model::{AttackCategory, AttackScenario, BugPattern, slugify};
use crate::persist;

/// Every fault a scenario step may be classified as. The first eight are
/// the crash-fault set; the rest require Byzantine behavior.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Crash,
    Restart,
    Partition,
    Delay,
    MessageLoss,
    Reorder,
    Duplicate,
    BoundaryCondition,
    Equivocation,
    PayloadTampering,
    SelectiveBroadcast,
    StrategicWithholding,
    StateForgery,
    IdentityForgery,
    TimingAttack,
}

impl FaultKind {
    pub const CFT_ALLOWED: [FaultKind; 8] = [
        FaultKind::Crash,
        FaultKind::Restart,
        FaultKind::Partition,
        FaultKind::Delay,
        FaultKind::MessageLoss,
        FaultKind::Reorder,
        FaultKind::Duplicate,
        FaultKind::BoundaryCondition,
    ];

    pub const BYZANTINE_ONLY: [FaultKind; 7] = [
        FaultKind::Equivocation,
        FaultKind::PayloadTampering,
        FaultKind::SelectiveBroadcast,
        FaultKind::StrategicWithholding,
        FaultKind::StateForgery,
        FaultKind::IdentityForgery,
        FaultKind::TimingAttack,
    ];

    pub fn is_byzantine(self) -> bool {
        FaultKind::BYZANTINE_ONLY.contains(&self)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolType {
    Cft,
    Bft,
}

impl ProtocolType {
    pub fn parse(text: &str) -> Result<ProtocolType> {
        match text.trim().to_ascii_lowercase().as_str() {
            "cft" => Ok(ProtocolType::Cft),
            "bft" => Ok(ProtocolType::Bft),
            other => Err(Error::Config(format!("unknown protocol type `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolType::Cft => "cft",
            ProtocolType::Bft => "bft",
        }
    }
}

/// Keyword table mapping scenario step phrasing to fault kinds. Applied
/// case-insensitively as substring search; user-extensible via config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultLexicon {
    pub entries: Vec<(String, FaultKind)>,
}

impl Default for FaultLexicon {
    fn default() -> Self {
        let table: &[(&str, FaultKind)] = &[
            ("crash", FaultKind::Crash),
            ("kill the node", FaultKind::Crash),
            ("restart", FaultKind::Restart),
            ("reboot", FaultKind::Restart),
            ("partition", FaultKind::Partition),
            ("isolate", FaultKind::Partition),
            ("delay", FaultKind::Delay),
            ("extreme latency", FaultKind::Delay),
            ("message loss", FaultKind::MessageLoss),
            ("drop the message", FaultKind::MessageLoss),
            ("drop messages", FaultKind::MessageLoss),
            ("reorder", FaultKind::Reorder),
            ("duplicate", FaultKind::Duplicate),
            ("boundary condition", FaultKind::BoundaryCondition),
            ("overflow", FaultKind::BoundaryCondition),
            ("conflicting vote", FaultKind::Equivocation),
            ("conflicting votes", FaultKind::Equivocation),
            ("conflicting proposal", FaultKind::Equivocation),
            ("equivocat", FaultKind::Equivocation),
            ("double vot", FaultKind::Equivocation),
            ("forged", FaultKind::PayloadTampering),
            ("tamper", FaultKind::PayloadTampering),
            ("malformed payload", FaultKind::PayloadTampering),
            ("only to a subset", FaultKind::SelectiveBroadcast),
            ("selective broadcast", FaultKind::SelectiveBroadcast),
            ("selectively send", FaultKind::SelectiveBroadcast),
            ("withhold", FaultKind::StrategicWithholding),
            ("refuses to send", FaultKind::StrategicWithholding),
            ("fraudulent certificate", FaultKind::StateForgery),
            ("fake qc", FaultKind::StateForgery),
            ("forge a certificate", FaultKind::StateForgery),
            ("impersonat", FaultKind::IdentityForgery),
            ("signature forgery", FaultKind::IdentityForgery),
            ("timing attack", FaultKind::TimingAttack),
        ];
        FaultLexicon {
            entries: table.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

impl FaultLexicon {
    /// All fault kinds detected in one action step.
    pub fn detect(&self, step: &str) -> BTreeSet<FaultKind> {
        let lower = step.to_lowercase();
        self.entries
            .iter()
            .filter(|(keyword, _)| lower.contains(keyword.as_str()))
            .map(|(_, kind)| *kind)
            .collect()
    }
}

/// Fault-model rulebook for one protocol class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintProfile {
    pub protocol_type: ProtocolType,
    pub allowed_faults: BTreeSet<FaultKind>,
    pub prohibited_faults: BTreeSet<FaultKind>,
    /// Safety / liveness / consistency questions the attacker pursues.
    pub objectives: Vec<String>,
    /// Prose constraint text injected into the Strategy prompt.
    pub constraint_text: String,
}

impl ConstraintProfile {
    pub fn cft() -> ConstraintProfile {
        persist::from_document_str(include_str!("../profiles/cft.json"))
            .expect("shipped cft profile parses")
    }

    pub fn bft() -> ConstraintProfile {
        persist::from_document_str(include_str!("../profiles/bft.json"))
            .expect("shipped bft profile parses")
    }

    pub fn for_protocol(protocol_type: ProtocolType) -> ConstraintProfile {
        match protocol_type {
            ProtocolType::Cft => ConstraintProfile::cft(),
            ProtocolType::Bft => ConstraintProfile::bft(),
        }
    }

    pub fn load(path: &Path) -> Result<ConstraintProfile> {
        let profile: ConstraintProfile = persist::load(path)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.allowed_faults.is_disjoint(&self.prohibited_faults) {
            return Err(Error::Invariant("allowed and prohibited fault sets overlap".into()));
        }
        match self.protocol_type {
            ProtocolType::Cft => {
                let required = [
                    FaultKind::Equivocation,
                    FaultKind::PayloadTampering,
                    FaultKind::SelectiveBroadcast,
                    FaultKind::IdentityForgery,
                ];
                for kind in required {
                    if !self.prohibited_faults.contains(&kind) {
                        return Err(Error::Invariant(format!(
                            "cft profile must prohibit {kind:?}"
                        )));
                    }
                }
            }
            ProtocolType::Bft => {
                if !self.prohibited_faults.is_empty() {
                    return Err(Error::Invariant(
                        "bft profile prohibits none of the enumerated fault kinds".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ConstraintViolation {
    pub step_index: usize,
    pub step: String,
    pub fault: FaultKind,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub enum ConstraintVerdict {
    Accept,
    Reject(Vec<ConstraintViolation>),
}

impl ConstraintVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, ConstraintVerdict::Accept)
    }
}

/// Checks each action step against the profile's prohibited faults using the
/// lexicon. Unrecognized steps yield no fault kind and never cause rejection.
pub fn check_scenario_constraints(
    scenario: &AttackScenario,
    profile: &ConstraintProfile,
    lexicon: &FaultLexicon,
) -> ConstraintVerdict {
    let mut violations = Vec::new();
    for (i, step) in scenario.hypothesis.action_steps.iter().enumerate() {
        for fault in lexicon.detect(step) {
            if profile.prohibited_faults.contains(&fault) {
                violations.push(ConstraintViolation { step_index: i, step: step.clone(), fault });
            }
        }
    }
    if violations.is_empty() {
        ConstraintVerdict::Accept
    } else {
        ConstraintVerdict::Reject(violations)
    }
}

/// Content-addressed pattern id so re-ingestion is idempotent.
pub fn pattern_id_for_issue(repo: &str, issue_number: u64) -> String {
    let digest = Sha256::digest(format!("{repo}#{issue_number}").as_bytes());
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("pat-{hex}")
}

/// On-disk pattern library: one document per pattern in a directory.
pub struct PatternLibrary {
    dir: Option<PathBuf>,
    patterns: BTreeMap<String, BugPattern>,
}

impl PatternLibrary {
    pub fn in_memory() -> PatternLibrary {
        PatternLibrary { dir: None, patterns: BTreeMap::new() }
    }

    pub fn open(dir: &Path) -> Result<PatternLibrary> {
        fs::create_dir_all(dir)?;
        let mut patterns = BTreeMap::new();
        let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if path.extension().is_some_and(|e| e == "json") {
                let pattern: BugPattern = persist::load(&path)?;
                patterns.insert(pattern.pattern_id.clone(), pattern);
            }
        }
        Ok(PatternLibrary { dir: Some(dir.to_path_buf()), patterns })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn contains(&self, pattern_id: &str) -> bool {
        self.patterns.contains_key(pattern_id)
    }

    /// Id plus one-line name for every pattern, for prompt injection.
    pub fn summaries(&self) -> Vec<(String, String)> {
        self.patterns.values().map(|p| (p.pattern_id.clone(), p.name.clone())).collect()
    }

    pub fn insert(&mut self, pattern: BugPattern) -> Result<()> {
        self.persist_one(&pattern)?;
        self.patterns.insert(pattern.pattern_id.clone(), pattern);
        Ok(())
    }

    /// Returns the full pattern and whether it was already used at call
    /// time. Querying never marks the pattern used; marking happens when a
    /// scenario citing it is accepted.
    pub fn get_pattern_details(&self, pattern_id: &str) -> Result<(BugPattern, bool)> {
        let pattern = self
            .patterns
            .get(pattern_id)
            .ok_or_else(|| Error::UnknownPattern(pattern_id.to_string()))?;
        Ok((pattern.clone(), pattern.used))
    }

    /// Flips `used` to true. Idempotent; the flag never flips back.
    pub fn mark_pattern_used(&mut self, pattern_id: &str) -> Result<()> {
        let pattern = self
            .patterns
            .get_mut(pattern_id)
            .ok_or_else(|| Error::UnknownPattern(pattern_id.to_string()))?;
        if !pattern.used {
            pattern.used = true;
            let pattern = pattern.clone();
            self.persist_one(&pattern)?;
        }
        Ok(())
    }

    fn persist_one(&self, pattern: &BugPattern) -> Result<()> {
        if let Some(dir) = &self.dir {
            let name = format!("{}.json", slugify(&pattern.pattern_id));
            persist::save(&dir.join(name), pattern)?;
        }
        Ok(())
    }
}

/// A crawled GitHub issue, as exported to fixtures.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct IssueRecord {
    pub repo: String,
    pub issue_number: u64,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub confirmed_bug: bool,
}

impl IssueRecord {
    pub fn validate(&self) -> Result<()> {
        if self.issue_number == 0 {
            return Err(Error::MalformedRecord(format!(
                "{}: issue_number must be positive",
                self.repo
            )));
        }
        Ok(())
    }
}

const CLASSIFIER_SYSTEM: &str = "\
You triage GitHub issues from consensus protocol repositories. Keep only \
protocol-level logic bugs (violations of safety, liveness, or agreement); \
drop implementation bugs (memory errors, overflows, copy-paste flaws) and \
non-bugs.\n\
Reply exactly in this format:\n\
Verdict: keep | drop\n\
Attack Category: safety | liveness | agreement\n\
Fault Type: [short snake_case fault label]\n\
Trigger Condition: [one line]\n\
Description: [one line]\n\
Test Template: [one line]";

fn classify_prompt(record: &IssueRecord) -> ChatRequest {
    let body = format!(
        "Repository: {}\nIssue #{}\nLabels: {}\nTitle: {}\n\n{}",
        record.repo,
        record.issue_number,
        record.labels.join(", "),
        record.title,
        record.body,
    );
    ChatRequest::new(CLASSIFIER_SYSTEM, vec![Message::user(body)])
}

fn parse_labeled_line(text: &str, label: &str) -> Option<String> {
    text.lines().find_map(|line| {
        let line = line.trim();
        let lower = line.to_ascii_lowercase();
        let prefix = format!("{}:", label.to_ascii_lowercase());
        lower.starts_with(&prefix).then(|| line[prefix.len()..].trim().to_string())
    })
}

/// Converts a kept issue into a library pattern.
fn pattern_from_reply(record: &IssueRecord, reply: &str) -> Result<BugPattern> {
    let category = parse_labeled_line(reply, "Attack Category")
        .ok_or_else(|| Error::Parse("Attack Category".into()))?;
    Ok(BugPattern {
        pattern_id: pattern_id_for_issue(&record.repo, record.issue_number),
        name: record.title.clone(),
        bug_category: AttackCategory::parse(&category)?,
        fault_type: parse_labeled_line(reply, "Fault Type").unwrap_or_default(),
        trigger_condition: parse_labeled_line(reply, "Trigger Condition").unwrap_or_default(),
        description: parse_labeled_line(reply, "Description").unwrap_or_else(|| record.body.clone()),
        test_template: parse_labeled_line(reply, "Test Template").unwrap_or_default(),
        used: false,
    })
}

/// Filters records to protocol-level logic bugs via the classifier backend,
/// converts kept ones to patterns, and persists them to the library.
/// Malformed records are skipped with a warning; backend failures abort.
pub fn ingest_issues(
    records: &[IssueRecord],
    classifier: &mut dyn TextBackend,
    library: &mut PatternLibrary,
) -> Result<Vec<BugPattern>> {
    let mut kept = Vec::new();
    for record in records {
        if let Err(err) = record.validate() {
            log::warn!("skipping malformed issue record: {err}");
            continue;
        }
        let response = classifier
            .complete(&classify_prompt(record))
            .map_err(Error::Backend)?;
        let verdict = parse_labeled_line(&response.content, "Verdict").unwrap_or_default();
        if !verdict.eq_ignore_ascii_case("keep") {
            continue;
        }
        match pattern_from_reply(record, &response.content) {
            Ok(pattern) => {
                library.insert(pattern.clone())?;
                kept.push(pattern);
            }
            Err(err) => log::warn!(
                "classifier kept {}#{} but reply was malformed: {err}",
                record.repo,
                record.issue_number
            ),
        }
    }
    Ok(kept)
}

/// Ingestion path for pre-labeled exports: keeps records with
/// `confirmed_bug` set, no classifier involved.
pub fn ingest_labeled(
    records: &[IssueRecord],
    library: &mut PatternLibrary,
    default_category: AttackCategory,
) -> Result<Vec<BugPattern>> {
    let mut kept = Vec::new();
    for record in records {
        if let Err(err) = record.validate() {
            log::warn!("skipping malformed issue record: {err}");
            continue;
        }
        if !record.confirmed_bug {
            continue;
        }
        let pattern = BugPattern {
            pattern_id: pattern_id_for_issue(&record.repo, record.issue_number),
            name: record.title.clone(),
            bug_category: default_category,
            fault_type: String::new(),
            trigger_condition: String::new(),
            description: record.body.clone(),
            test_template: String::new(),
            used: false,
        };
        library.insert(pattern.clone())?;
        kept.push(pattern);
    }
    Ok(kept)
}

/// Where issues come from: local export fixtures take precedence over the
/// live API.
#[derive(Debug, Clone)]
pub enum IssueSource {
    Fixture(PathBuf),
    Live { api_base: String, token: Option<String> },
}

/// Returns issue records for a repo, up to `page_limit` pages. Fixture mode
/// reads one export file per page, sorted by filename.
pub fn fetch_issues(source: &IssueSource, repo: &str, page_limit: usize) -> Result<Vec<IssueRecord>> {
    if page_limit == 0 {
        return Ok(Vec::new());
    }
    match source {
        IssueSource::Fixture(dir) => {
            let mut files: Vec<_> = fs::read_dir(dir)?
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "json"))
                .collect();
            files.sort();
            let mut records = Vec::new();
            for path in files.into_iter().take(page_limit) {
                let page: Vec<IssueRecord> = serde_json::from_str(&fs::read_to_string(&path)?)
                    .map_err(|e| Error::MalformedRecord(format!("{}: {e}", path.display())))?;
                records.extend(page);
            }
            Ok(records)
        }
        IssueSource::Live { api_base, token } => {
            let client = reqwest::blocking::Client::builder()
                .timeout(std::time::Duration::from_secs(30))
                .user_agent("quorumprobe")
                .build()
                .map_err(|e| Error::Network(e.to_string()))?;
            let mut records = Vec::new();
            for page in 1..=page_limit {
                let url = format!("{api_base}/repos/{repo}/issues?state=all&per_page=100&page={page}");
                let mut request = client.get(&url);
                if let Some(token) = token {
                    request = request.bearer_auth(token);
                }
                let response = request.send().map_err(|e| Error::Network(e.to_string()))?;
                match response.status().as_u16() {
                    401 | 403 => return Err(Error::Auth(format!("{repo}: {}", response.status()))),
                    429 => {
                        let retry_after_secs = response
                            .headers()
                            .get("retry-after")
                            .and_then(|v| v.to_str().ok())
                            .and_then(|v| v.parse().ok())
                            .unwrap_or(60);
                        return Err(Error::RateLimited { retry_after_secs });
                    }
                    _ => {}
                }
                let page_json: Vec<serde_json::Value> =
                    response.json().map_err(|e| Error::Network(e.to_string()))?;
                if page_json.is_empty() {
                    break;
                }
                for issue in page_json {
                    records.push(IssueRecord {
                        repo: repo.to_string(),
                        issue_number: issue["number"].as_u64().unwrap_or(0),
                        title: issue["title"].as_str().unwrap_or_default().to_string(),
                        body: issue["body"].as_str().unwrap_or_default().to_string(),
                        labels: issue["labels"]
                            .as_array()
                            .map(|labels| {
                                labels
                                    .iter()
                                    .filter_map(|l| l["name"].as_str().map(String::from))
                                    .collect()
                            })
                            .unwrap_or_default(),
                        confirmed_bug: false,
                    });
                }
            }
            Ok(records)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ChatResponse, ScriptedBackend, ScriptedTranscript};
    use crate::model::{AttackScenario, Hypothesis, Inspiration};

    fn scenario_with_steps(steps: &[&str]) -> AttackScenario {
        AttackScenario {
            name: "probe".into(),
            target_component: "log replication".into(),
            vulnerability_hypothesis: "h".into(),
            category: AttackCategory::Safety,
            inspiration: Inspiration::Original,
            relation_to_original: None,
            correct_behavior: "committed entries survive".into(),
            hypothesis: Hypothesis {
                preconditions: vec!["3 nodes".into()],
                action_steps: steps.iter().map(|s| s.to_string()).collect(),
                expected_bug_behavior: "divergence".into(),
                oracle_assertions: vec!["states equal".into()],
            },
        }
    }

    #[test]
    fn shipped_profiles_validate() {
        ConstraintProfile::cft().validate().unwrap();
        ConstraintProfile::bft().validate().unwrap();
        assert_eq!(ConstraintProfile::cft().allowed_faults.len(), 8);
        assert_eq!(ConstraintProfile::bft().allowed_faults.len(), 15);
    }

    #[test]
    fn lexicon_is_case_insensitive() {
        let lexicon = FaultLexicon::default();
        let faults = lexicon.detect("PARTITION node 2, then send Conflicting Votes");
        assert!(faults.contains(&FaultKind::Partition));
        assert!(faults.contains(&FaultKind::Equivocation));
    }

    #[test]
    fn cft_rejects_byzantine_steps_with_indices() {
        let profile = ConstraintProfile::cft();
        let lexicon = FaultLexicon::default();
        let scenario = scenario_with_steps(&[
            "Crash node 0",
            "Have node 1 send conflicting votes to different peers",
        ]);
        match check_scenario_constraints(&scenario, &profile, &lexicon) {
            ConstraintVerdict::Reject(violations) => {
                assert_eq!(violations.len(), 1);
                assert_eq!(violations[0].step_index, 1);
                assert_eq!(violations[0].fault, FaultKind::Equivocation);
            }
            ConstraintVerdict::Accept => panic!("expected rejection"),
        }
    }

    #[test]
    fn bft_accepts_the_same_scenario() {
        let profile = ConstraintProfile::bft();
        let lexicon = FaultLexicon::default();
        let scenario = scenario_with_steps(&[
            "Have node 1 send conflicting votes to different peers",
        ]);
        assert!(check_scenario_constraints(&scenario, &profile, &lexicon).is_accept());
    }

    #[test]
    fn unrecognized_steps_never_reject() {
        let profile = ConstraintProfile::cft();
        let lexicon = FaultLexicon::default();
        let scenario = scenario_with_steps(&["Propose value v at node 0", "Wait for quorum"]);
        assert!(check_scenario_constraints(&scenario, &profile, &lexicon).is_accept());
    }

    #[test]
    fn pattern_ids_are_stable_and_distinct() {
        let a = pattern_id_for_issue("etcd-io/etcd", 12345);
        assert_eq!(a, pattern_id_for_issue("etcd-io/etcd", 12345));
        assert_ne!(a, pattern_id_for_issue("etcd-io/etcd", 12346));
        assert!(a.starts_with("pat-"));
    }

    #[test]
    fn mark_used_is_sticky_and_persisted() {
        let dir = tempfile::tempdir().unwrap();
        let mut library = PatternLibrary::open(dir.path()).unwrap();
        library
            .insert(BugPattern {
                pattern_id: "pat-abc".into(),
                name: "stale read after restart".into(),
                bug_category: AttackCategory::Safety,
                fault_type: "crash_restart".into(),
                trigger_condition: "restart during apply".into(),
                description: "d".into(),
                test_template: "t".into(),
                used: false,
            })
            .unwrap();
        let (_, used) = library.get_pattern_details("pat-abc").unwrap();
        assert!(!used);
        library.mark_pattern_used("pat-abc").unwrap();
        library.mark_pattern_used("pat-abc").unwrap();

        let reopened = PatternLibrary::open(dir.path()).unwrap();
        let (pattern, used) = reopened.get_pattern_details("pat-abc").unwrap();
        assert!(used);
        assert_eq!(pattern.name, "stale read after restart");
    }

    #[test]
    fn unknown_pattern_is_an_error() {
        let library = PatternLibrary::in_memory();
        assert!(matches!(
            library.get_pattern_details("pat-missing"),
            Err(Error::UnknownPattern(_))
        ));
    }

    #[test]
    fn ingest_keeps_only_classifier_approved_records() {
        let transcript = ScriptedTranscript::from_jsonl(concat!(
            r#"{"match":"1001","response":{"content":"Verdict: keep\nAttack Category: safety\nFault Type: crash_restart\nTrigger Condition: restart mid-apply\nDescription: committed entry reapplied\nTest Template: crash and restart the applier"}}"#,
            "\n",
            r#"{"match":"1002","response":{"content":"Verdict: drop"}}"#,
            "\n"
        ))
        .unwrap();
        let mut backend = ScriptedBackend::new(transcript);
        let mut library = PatternLibrary::in_memory();
        let records = vec![
            IssueRecord {
                repo: "example/raft".into(),
                issue_number: 1001,
                title: "entries reapplied after restart".into(),
                body: "…".into(),
                labels: vec!["kind/bug".into()],
                confirmed_bug: false,
            },
            IssueRecord {
                repo: "example/raft".into(),
                issue_number: 1002,
                title: "typo in readme".into(),
                body: "…".into(),
                labels: vec![],
                confirmed_bug: false,
            },
        ];
        let kept = ingest_issues(&records, &mut backend, &mut library).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].bug_category, AttackCategory::Safety);
        assert_eq!(kept[0].fault_type, "crash_restart");
        assert_eq!(library.len(), 1);
    }

    #[test]
    fn reingestion_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let mut library = PatternLibrary::open(dir.path()).unwrap();
        let records = vec![IssueRecord {
            repo: "example/raft".into(),
            issue_number: 7,
            title: "t".into(),
            body: "b".into(),
            labels: vec![],
            confirmed_bug: true,
        }];
        ingest_labeled(&records, &mut library, AttackCategory::Safety).unwrap();
        ingest_labeled(&records, &mut library, AttackCategory::Safety).unwrap();
        assert_eq!(library.len(), 1);
    }

    #[test]
    fn fixture_fetch_respects_page_limit() {
        let dir = tempfile::tempdir().unwrap();
        for (i, n) in [(1, 10u64), (2, 20), (3, 30)] {
            let page = vec![IssueRecord {
                repo: "example/raft".into(),
                issue_number: n,
                title: format!("issue {n}"),
                body: String::new(),
                labels: vec![],
                confirmed_bug: false,
            }];
            fs::write(
                dir.path().join(format!("page-{i:03}.json")),
                serde_json::to_string(&page).unwrap(),
            )
            .unwrap();
        }
        let source = IssueSource::Fixture(dir.path().to_path_buf());
        let records = fetch_issues(&source, "example/raft", 2).unwrap();
        assert_eq!(
            records.iter().map(|r| r.issue_number).collect::<Vec<_>>(),
            vec![10, 20]
        );
        assert!(fetch_issues(&source, "example/raft", 0).unwrap().is_empty());
    }

    #[test]
    fn classifier_backend_failure_aborts_ingest() {
        struct Failing;
        impl TextBackend for Failing {
            fn complete(
                &mut self,
                _request: &ChatRequest,
            ) -> std::result::Result<ChatResponse, crate::error::BackendError> {
                Err(crate::error::BackendError::Fatal("down".into()))
            }
            fn estimates_usage(&self) -> bool {
                true
            }
        }
        let mut library = PatternLibrary::in_memory();
        let records = vec![IssueRecord {
            repo: "example/raft".into(),
            issue_number: 1,
            title: "t".into(),
            body: "b".into(),
            labels: vec![],
            confirmed_bug: false,
        }];
        assert!(ingest_issues(&records, &mut Failing, &mut library).is_err());
    }
}
