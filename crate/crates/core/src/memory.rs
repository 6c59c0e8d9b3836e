//! Per-repository shared memory: cached repo knowledge plus the test
//! agent's accumulated helpers and lessons.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::ProtocolType;
use crate::model::slugify;
use crate::persist;

/// Soft cap on the serialized store; exceeding it logs a warning only.
pub const DEFAULT_SOFT_LIMIT_BYTES: usize = 512 * 1024;

/// Documented test helper discovered in the target repository.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct HelperDoc {
    pub name: String,
    pub file: String,
    pub purpose: String,
    #[serde(default)]
    pub signature: String,
    #[serde(default)]
    pub usage_example: String,
    #[serde(default)]
    pub returns: String,
}

impl HelperDoc {
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Invariant("helper name must be non-empty".into()));
        }
        Ok(())
    }
}

/// A fix the test agent wants to remember.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Lesson {
    pub issue: String,
    pub solution: String,
    pub error_pattern: Option<String>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RepoKnowledge {
    pub repo_name: String,
    pub protocol: String,
    pub protocol_type: ProtocolType,
    pub settings: String,
    pub language: String,
    pub test_methodology: String,
    #[serde(default)]
    pub helpers: Vec<HelperDoc>,
    #[serde(default)]
    pub lessons: Vec<Lesson>,
}

/// Injectable time source so stored timestamps are test-controllable.
pub trait Clock: Send {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Fixed clock that advances one second per call, for deterministic tests.
pub struct TickClock {
    next: std::cell::Cell<i64>,
}

impl TickClock {
    pub fn starting_at(epoch_secs: i64) -> TickClock {
        TickClock { next: std::cell::Cell::new(epoch_secs) }
    }
}

impl Clock for TickClock {
    fn now(&self) -> DateTime<Utc> {
        let t = self.next.get();
        self.next.set(t + 1);
        DateTime::from_timestamp(t, 0).expect("valid timestamp")
    }
}

fn significant_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.len() >= 4)
        .map(String::from)
        .collect()
}

/// One memory store per target repository, persisted as a single document
/// under the state directory.
pub struct MemoryStore {
    knowledge: RepoKnowledge,
    path: Option<PathBuf>,
    clock: Box<dyn Clock>,
    soft_limit_bytes: usize,
}

impl MemoryStore {
    pub fn new(knowledge: RepoKnowledge) -> MemoryStore {
        MemoryStore {
            knowledge,
            path: None,
            clock: Box::new(SystemClock),
            soft_limit_bytes: DEFAULT_SOFT_LIMIT_BYTES,
        }
    }

    /// Opens (or seeds) the store for `knowledge.repo_name` under `state_dir`.
    /// An existing file wins over the seed so lessons survive restarts.
    pub fn open(state_dir: &Path, knowledge: RepoKnowledge) -> Result<MemoryStore> {
        let path = state_dir.join(format!("memory-{}.json", slugify(&knowledge.repo_name)));
        let knowledge = if path.exists() { persist::load(&path)? } else { knowledge };
        let mut store = MemoryStore::new(knowledge);
        store.path = Some(path);
        store.persist()?;
        Ok(store)
    }

    pub fn with_clock(mut self, clock: Box<dyn Clock>) -> MemoryStore {
        self.clock = clock;
        self
    }

    pub fn knowledge(&self) -> &RepoKnowledge {
        &self.knowledge
    }

    /// Renders the store for prompt injection. Compact mode lists helpers
    /// as signature plus a one-line purpose and lessons as issue-only
    /// bullets; full mode includes usage examples and solutions.
    pub fn repo_knowledge(&self, compact: bool) -> String {
        let k = &self.knowledge;
        let mut out = String::new();
        let _ = writeln!(out, "# Repository knowledge: {}", k.repo_name);
        let _ = writeln!(
            out,
            "Protocol: {} ({})",
            k.protocol,
            k.protocol_type.as_str().to_uppercase()
        );
        let _ = writeln!(out, "Language: {}", k.language);
        if !compact {
            let _ = writeln!(out, "Settings: {}", k.settings);
            let _ = writeln!(out, "Test methodology: {}", k.test_methodology);
        }
        if !k.helpers.is_empty() {
            let _ = writeln!(out, "\n## Helpers");
            for helper in &k.helpers {
                let shown = if helper.signature.is_empty() { &helper.name } else { &helper.signature };
                let _ = writeln!(out, "- {} — {}", shown, helper.purpose);
                if !compact {
                    let _ = writeln!(out, "  file: {}", helper.file);
                    if !helper.usage_example.is_empty() {
                        let _ = writeln!(out, "  usage: {}", helper.usage_example);
                    }
                    if !helper.returns.is_empty() {
                        let _ = writeln!(out, "  returns: {}", helper.returns);
                    }
                }
            }
        }
        if !k.lessons.is_empty() {
            let _ = writeln!(out, "\n## Lessons");
            for lesson in &k.lessons {
                let _ = writeln!(out, "- {}", lesson.issue);
                if !compact {
                    let _ = writeln!(out, "  fix: {}", lesson.solution);
                }
            }
        }
        out
    }

    /// Lessons relevant to an error message: regex-pattern matches first
    /// preference is irrelevant — all hits are pooled, then ordered by
    /// created_at descending (insertion order breaking ties).
    pub fn find_lessons(&self, error_message: &str) -> Vec<Lesson> {
        let error_tokens = significant_tokens(error_message);
        let mut hits: Vec<(usize, &Lesson)> = self
            .knowledge
            .lessons
            .iter()
            .enumerate()
            .filter(|(_, lesson)| match &lesson.error_pattern {
                Some(pattern) => Regex::new(pattern)
                    .map(|re| re.is_match(error_message))
                    .unwrap_or(false),
                None => significant_tokens(&lesson.issue)
                    .iter()
                    .any(|t| error_tokens.contains(t)),
            })
            .collect();
        hits.sort_by(|(ia, a), (ib, b)| b.created_at.cmp(&a.created_at).then(ia.cmp(ib)));
        hits.into_iter().map(|(_, lesson)| lesson.clone()).collect()
    }

    pub fn add_lesson(
        &mut self,
        issue: &str,
        solution: &str,
        error_pattern: Option<&str>,
    ) -> Result<()> {
        if issue.trim().is_empty() || solution.trim().is_empty() {
            return Err(Error::Invariant("lesson issue and solution must be non-empty".into()));
        }
        if let Some(pattern) = error_pattern {
            Regex::new(pattern).map_err(|e| Error::InvalidPattern {
                pattern: pattern.to_string(),
                message: e.to_string(),
            })?;
        }
        if self
            .knowledge
            .lessons
            .iter()
            .any(|l| l.issue == issue && l.solution == solution)
        {
            return Ok(());
        }
        self.knowledge.lessons.push(Lesson {
            issue: issue.to_string(),
            solution: solution.to_string(),
            error_pattern: error_pattern.map(String::from),
            created_at: self.clock.now(),
        });
        self.persist()
    }

    pub fn add_helper(&mut self, doc: HelperDoc) -> Result<()> {
        doc.validate()?;
        match self
            .knowledge
            .helpers
            .iter_mut()
            .find(|h| h.name == doc.name && h.file == doc.file)
        {
            Some(existing) => *existing = doc,
            None => self.knowledge.helpers.push(doc),
        }
        self.persist()
    }

    pub fn persist(&self) -> Result<()> {
        let rendered = persist::to_document_string(&self.knowledge)?;
        if rendered.len() > self.soft_limit_bytes {
            log::warn!(
                "memory store for {} is {} bytes, above the {} byte soft limit",
                self.knowledge.repo_name,
                rendered.len(),
                self.soft_limit_bytes
            );
        }
        if let Some(path) = &self.path {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, rendered)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> RepoKnowledge {
        RepoKnowledge {
            repo_name: "etcd-io/raft".into(),
            protocol: "Raft".into(),
            protocol_type: ProtocolType::Cft,
            settings: "3-node in-memory network".into(),
            language: "Go".into(),
            test_methodology: "table-driven tests over a simulated network".into(),
            helpers: vec![
                HelperDoc {
                    name: "newNetwork".into(),
                    file: "raft_test.go".into(),
                    purpose: "builds a connected set of peers".into(),
                    signature: "newNetwork(peers ...stateMachine) *network".into(),
                    usage_example: "nt := newNetwork(nil, nil, nil)".into(),
                    returns: "*network".into(),
                },
                HelperDoc {
                    name: "nextEnts".into(),
                    file: "raft_test.go".into(),
                    purpose: "drains committed entries".into(),
                    signature: "nextEnts(r *raft, s *MemoryStorage) []pb.Entry".into(),
                    usage_example: String::new(),
                    returns: "[]pb.Entry".into(),
                },
            ],
            lessons: vec![],
        }
    }

    #[test]
    fn compact_render_lists_helpers_and_lessons() {
        let mut store = MemoryStore::new(fixture()).with_clock(Box::new(TickClock::starting_at(0)));
        store.add_lesson("undefined: newNetwork outside package", "import the test package", None)
            .unwrap();
        let compact = store.repo_knowledge(true);
        assert!(compact.contains("newNetwork"));
        assert!(compact.contains("nextEnts"));
        assert!(compact.contains("- undefined: newNetwork outside package"));
        assert!(!compact.contains("import the test package"));

        let full = store.repo_knowledge(false);
        assert!(full.contains("nt := newNetwork(nil, nil, nil)"));
        assert!(full.contains("import the test package"));
        assert!(compact.len() <= full.len());
    }

    #[test]
    fn empty_store_compact_is_header_only() {
        let store = MemoryStore::new(RepoKnowledge {
            helpers: vec![],
            lessons: vec![],
            ..fixture()
        });
        let rendered = store.repo_knowledge(true);
        assert!(!rendered.contains("## Helpers"));
        assert!(!rendered.contains("## Lessons"));
    }

    #[test]
    fn find_lessons_regex_and_keyword_fallback() {
        let mut store = MemoryStore::new(fixture()).with_clock(Box::new(TickClock::starting_at(100)));
        store
            .add_lesson(
                "missing helper import",
                "add the raft test import",
                Some("undefined:.*newNetwork"),
            )
            .unwrap();
        store
            .add_lesson("timeout waiting for quorum", "lengthen the election timeout", None)
            .unwrap();

        let hits = store.find_lessons("undefined: newNetwork in raft_test");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].issue, "missing helper import");

        // keyword fallback: "quorum" and "waiting" are significant tokens
        let hits = store.find_lessons("test failed: still waiting on quorum commit");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].issue, "timeout waiting for quorum");

        assert!(store.find_lessons("segfault").is_empty());
    }

    #[test]
    fn lessons_order_most_recent_first() {
        let mut store = MemoryStore::new(fixture()).with_clock(Box::new(TickClock::starting_at(0)));
        store.add_lesson("quorum stall one", "a", None).unwrap();
        store.add_lesson("quorum stall two", "b", None).unwrap();
        let hits = store.find_lessons("quorum problems");
        assert_eq!(hits[0].issue, "quorum stall two");
        assert_eq!(hits[1].issue, "quorum stall one");
    }

    #[test]
    fn duplicate_lessons_coalesce() {
        let mut store = MemoryStore::new(fixture());
        store.add_lesson("x problem", "y fix", None).unwrap();
        store.add_lesson("x problem", "y fix", None).unwrap();
        assert_eq!(store.knowledge().lessons.len(), 1);
    }

    #[test]
    fn bad_regex_rejected() {
        let mut store = MemoryStore::new(fixture());
        assert!(matches!(
            store.add_lesson("a", "b", Some("([")),
            Err(Error::InvalidPattern { .. })
        ));
    }

    #[test]
    fn add_helper_upserts_by_name_and_file() {
        let mut store = MemoryStore::new(fixture());
        let before = store.knowledge().helpers.len();
        store
            .add_helper(HelperDoc {
                name: "newNetwork".into(),
                file: "raft_test.go".into(),
                purpose: "builds a connected set of peers".into(),
                signature: "newNetwork(peers ...stateMachine, cfg testConfig) *network".into(),
                usage_example: String::new(),
                returns: "*network".into(),
            })
            .unwrap();
        assert_eq!(store.knowledge().helpers.len(), before);
        assert!(store.knowledge().helpers[0].signature.contains("testConfig"));

        store
            .add_helper(HelperDoc {
                name: "mustTerm".into(),
                file: "util_test.go".into(),
                purpose: "panics unless the term matches".into(),
                signature: String::new(),
                usage_example: String::new(),
                returns: String::new(),
            })
            .unwrap();
        assert_eq!(store.knowledge().helpers.len(), before + 1);

        assert!(store
            .add_helper(HelperDoc {
                name: "  ".into(),
                file: "f".into(),
                purpose: String::new(),
                signature: String::new(),
                usage_example: String::new(),
                returns: String::new(),
            })
            .is_err());
    }

    #[test]
    fn store_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut store = MemoryStore::open(dir.path(), fixture())
                .unwrap()
                .with_clock(Box::new(TickClock::starting_at(5)));
            store.add_lesson("quorum stall", "wait longer", None).unwrap();
        }
        let reopened = MemoryStore::open(dir.path(), fixture()).unwrap();
        assert_eq!(reopened.knowledge().lessons.len(), 1);
        assert_eq!(reopened.knowledge().lessons[0].issue, "quorum stall");
    }
}
