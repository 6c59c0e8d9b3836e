//! A miniature consensus cluster simulated in a single thread, used as a
//! bug-hunting target. Two protocol-level logic bugs ship behind toggles:
//!
//!   * `executed_state_amnesia` — the execution cursor is kept only in
//!     volatile memory, so a restarted node re-applies committed entries.
//!   * `recovery_noop_voiding` — instance recovery proposes a NO-OP when a
//!     quorum reports no record, even though an unreachable node may hold a
//!     commit.
//!
//! With both toggles off the cluster satisfies exactly-once application and
//! conservative recovery, and its native test suite passes. Persistence is
//! modeled by keeping "stable" fields across [`Cluster::restart`] while
//! volatile fields are wiped. No wall clock, no randomness, no I/O beyond
//! the toggle config file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

/// Build-time/config toggles for the seeded bugs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BugToggles {
    pub executed_state_amnesia: bool,
    pub recovery_noop_voiding: bool,
}

impl BugToggles {
    /// Parses the `key = on|off` config format, one toggle per line.
    /// Unknown keys are ignored so configs stay forward compatible.
    pub fn parse(text: &str) -> BugToggles {
        let mut toggles = BugToggles::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            let on = matches!(value.trim(), "on" | "true" | "1");
            match key.trim() {
                "executed_state_amnesia" => toggles.executed_state_amnesia = on,
                "recovery_noop_voiding" => toggles.recovery_noop_voiding = on,
                _ => {}
            }
        }
        toggles
    }

    /// Reads `harness_bugs.conf` from the crate root. A missing file means
    /// all bugs are off.
    pub fn from_repo_config() -> BugToggles {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("harness_bugs.conf");
        match fs::read_to_string(path) {
            Ok(text) => BugToggles::parse(&text),
            Err(_) => BugToggles::default(),
        }
    }
}

/// A committed log entry: increment `key` by `delta`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub delta: i64,
}

impl Entry {
    pub fn inc(key: &str, delta: i64) -> Entry {
        Entry { key: key.to_string(), delta }
    }
}

/// A command bound to a consensus instance: set `key` to `value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub key: String,
    pub value: i64,
}

impl Command {
    pub fn set(key: &str, value: i64) -> Command {
        Command { key: key.to_string(), value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceStatus {
    PreAccepted,
    Committed,
    Executed,
    NoOp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceRecord {
    pub status: InstanceStatus,
    pub command: Command,
}

/// Outcome of recovering a consensus instance from quorum replies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    /// A reply carried a commit record; the command must survive.
    Commit(Command),
    /// Only pre-accept evidence was found; re-run the protocol for it.
    Retry(Command),
    /// No reply carried any record and the seeded bug is on: void the
    /// instance. This is the buggy branch.
    NoOp,
    /// No reply carried any record; without positive evidence the fixed
    /// rule refuses to void the instance.
    Defer,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Commit(c) => write!(f, "commit({}={})", c.key, c.value),
            Decision::Retry(c) => write!(f, "retry({}={})", c.key, c.value),
            Decision::NoOp => write!(f, "no-op"),
            Decision::Defer => write!(f, "defer"),
        }
    }
}

/// Pure recovery rule over one quorum of replies.
///
/// Commit evidence dominates regardless of toggles. With the bug off, an
/// all-empty quorum yields [`Decision::Defer`]; with the bug on it yields
/// [`Decision::NoOp`], which can void a command committed on a node outside
/// the quorum.
pub fn recover_decision(replies: &[Option<InstanceRecord>], noop_voiding_bug: bool) -> Decision {
    for reply in replies.iter().flatten() {
        if matches!(reply.status, InstanceStatus::Committed | InstanceStatus::Executed) {
            return Decision::Commit(reply.command.clone());
        }
    }
    for reply in replies.iter().flatten() {
        if reply.status == InstanceStatus::PreAccepted {
            return Decision::Retry(reply.command.clone());
        }
    }
    if noop_voiding_bug {
        Decision::NoOp
    } else {
        Decision::Defer
    }
}

#[derive(Debug, Clone, Default)]
struct Node {
    // Stable storage: survives crash/restart.
    log: Vec<Entry>,
    stable_cursor: usize,
    state: BTreeMap<String, i64>,
    // Volatile: wiped on restart.
    volatile_cursor: usize,
    instances: BTreeMap<u64, InstanceRecord>,
    crashed: bool,
    partitioned: bool,
}

impl Node {
    fn reachable(&self) -> bool {
        !self.crashed && !self.partitioned
    }
}

/// An `n`-node cluster. All nodes share one event order; there is no real
/// networking and no concurrency.
pub struct Cluster {
    nodes: Vec<Node>,
    toggles: BugToggles,
}

impl Cluster {
    /// A cluster with every seeded bug off.
    pub fn new(n: usize) -> Cluster {
        Cluster::with_toggles(n, BugToggles::default())
    }

    /// A cluster with toggles taken from `harness_bugs.conf` in the crate
    /// root. Generated tests use this constructor so the campaign controls
    /// the toggles without touching test code.
    pub fn from_repo_config(n: usize) -> Cluster {
        Cluster::with_toggles(n, BugToggles::from_repo_config())
    }

    pub fn with_toggles(n: usize, toggles: BugToggles) -> Cluster {
        assert!(n >= 1, "cluster needs at least one node");
        Cluster {
            nodes: vec![Node::default(); n],
            toggles,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn quorum_size(&self) -> usize {
        self.nodes.len() / 2 + 1
    }

    /// Commits an entry on every reachable node (replicated commit). The
    /// entry lands in stable logs; application is driven separately by
    /// [`Cluster::apply_committed`].
    pub fn commit(&mut self, entry: Entry) {
        for node in self.nodes.iter_mut().filter(|n| n.reachable()) {
            node.log.push(entry.clone());
        }
    }

    /// Applies all committed-but-unapplied entries on one node, advancing
    /// its execution cursor. With `executed_state_amnesia` on, only the
    /// volatile cursor is trusted, so a restarted node re-applies from the
    /// start of its log.
    pub fn apply_committed(&mut self, node_id: usize) {
        let amnesia = self.toggles.executed_state_amnesia;
        let node = &mut self.nodes[node_id];
        assert!(!node.crashed, "node {node_id} is crashed");
        let mut cursor = if amnesia { node.volatile_cursor } else { node.stable_cursor };
        while cursor < node.log.len() {
            let entry = node.log[cursor].clone();
            *node.state.entry(entry.key).or_insert(0) += entry.delta;
            cursor += 1;
        }
        node.volatile_cursor = cursor;
        node.stable_cursor = cursor;
    }

    pub fn crash(&mut self, node_id: usize) {
        self.nodes[node_id].crashed = true;
    }

    /// Restart after a crash: volatile state is wiped, stable storage kept.
    pub fn restart(&mut self, node_id: usize) {
        let node = &mut self.nodes[node_id];
        assert!(node.crashed, "restart requires a crashed node");
        node.crashed = false;
        node.instances.clear();
        node.volatile_cursor = 0;
        if !self.toggles.executed_state_amnesia {
            // Fixed behavior: the cursor was persisted.
            node.volatile_cursor = node.stable_cursor;
        }
    }

    pub fn partition(&mut self, node_id: usize) {
        self.nodes[node_id].partitioned = true;
    }

    pub fn heal(&mut self, node_id: usize) {
        self.nodes[node_id].partitioned = false;
    }

    /// Current state-machine value for `key` on a node (0 if never written).
    pub fn value_of(&self, node_id: usize, key: &str) -> i64 {
        self.nodes[node_id].state.get(key).copied().unwrap_or(0)
    }

    /// Total committed log length on a node.
    pub fn log_len(&self, node_id: usize) -> usize {
        self.nodes[node_id].log.len()
    }

    /// Records a pre-accept for `instance` at each listed node. Instance
    /// records are volatile (no write-ahead log in this model).
    pub fn preaccept(&mut self, instance: u64, command: Command, node_ids: &[usize]) {
        for &id in node_ids {
            self.nodes[id].instances.insert(
                instance,
                InstanceRecord { status: InstanceStatus::PreAccepted, command: command.clone() },
            );
        }
    }

    /// Upgrades an instance to committed at a single node.
    pub fn commit_instance_at(&mut self, node_id: usize, instance: u64) {
        let record = self.nodes[node_id]
            .instances
            .get_mut(&instance)
            .expect("commit of unknown instance");
        record.status = InstanceStatus::Committed;
    }

    /// Executes a committed instance at a single node, applying its command
    /// to the state machine.
    pub fn execute_instance_at(&mut self, node_id: usize, instance: u64) {
        let node = &mut self.nodes[node_id];
        let record = node.instances.get_mut(&instance).expect("execute of unknown instance");
        assert!(
            matches!(record.status, InstanceStatus::Committed | InstanceStatus::Executed),
            "execute requires a committed instance"
        );
        record.status = InstanceStatus::Executed;
        node.state.insert(record.command.key.clone(), record.command.value);
    }

    pub fn instance_record(&self, node_id: usize, instance: u64) -> Option<&InstanceRecord> {
        self.nodes[node_id].instances.get(&instance)
    }

    /// Runs instance recovery from `leader`: queries the first quorum of
    /// reachable nodes (leader included), decides via [`recover_decision`],
    /// and applies the decision on the quorum. Returns the decision.
    pub fn recover(&mut self, leader: usize, instance: u64) -> Decision {
        assert!(self.nodes[leader].reachable(), "recovery leader must be reachable");
        let mut quorum = vec![leader];
        for id in 0..self.nodes.len() {
            if quorum.len() == self.quorum_size() {
                break;
            }
            if id != leader && self.nodes[id].reachable() {
                quorum.push(id);
            }
        }
        assert!(quorum.len() == self.quorum_size(), "no reachable quorum");

        let replies: Vec<Option<InstanceRecord>> = quorum
            .iter()
            .map(|&id| self.nodes[id].instances.get(&instance).cloned())
            .collect();
        let decision = recover_decision(&replies, self.toggles.recovery_noop_voiding);

        match &decision {
            Decision::Commit(cmd) => {
                for &id in &quorum {
                    self.nodes[id].instances.insert(
                        instance,
                        InstanceRecord { status: InstanceStatus::Committed, command: cmd.clone() },
                    );
                    self.execute_instance_at(id, instance);
                }
            }
            Decision::NoOp => {
                for &id in &quorum {
                    self.nodes[id].instances.insert(
                        instance,
                        InstanceRecord {
                            status: InstanceStatus::NoOp,
                            command: Command::set("", 0),
                        },
                    );
                }
            }
            Decision::Retry(_) | Decision::Defer => {}
        }
        decision
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_once_across_restart() {
        let mut c = Cluster::new(3);
        c.commit(Entry::inc("x", 1));
        c.commit(Entry::inc("x", 1));
        for n in 0..3 {
            c.apply_committed(n);
        }
        c.crash(0);
        c.restart(0);
        c.apply_committed(0);
        assert_eq!(c.value_of(0, "x"), 2);
        assert_eq!(c.value_of(1, "x"), 2);
    }

    #[test]
    fn empty_log_restart_leaves_state_unchanged() {
        let mut c = Cluster::new(3);
        c.crash(1);
        c.restart(1);
        c.apply_committed(1);
        assert_eq!(c.value_of(1, "x"), 0);
        assert_eq!(c.log_len(1), 0);
    }

    #[test]
    fn commit_reply_dominates_recovery_under_both_toggles() {
        for voiding in [false, true] {
            let replies = vec![
                None,
                Some(InstanceRecord {
                    status: InstanceStatus::Committed,
                    command: Command::set("k", 999),
                }),
                None,
            ];
            assert_eq!(
                recover_decision(&replies, voiding),
                Decision::Commit(Command::set("k", 999))
            );
        }
    }

    #[test]
    fn all_empty_quorum_defers_when_fixed() {
        let replies = vec![None, None, None];
        assert_eq!(recover_decision(&replies, false), Decision::Defer);
    }

    #[test]
    fn preaccept_evidence_forces_retry() {
        let replies = vec![
            Some(InstanceRecord {
                status: InstanceStatus::PreAccepted,
                command: Command::set("k", 7),
            }),
            None,
        ];
        assert_eq!(recover_decision(&replies, true), Decision::Retry(Command::set("k", 7)));
    }

    #[test]
    fn partitioned_nodes_miss_replicated_commits() {
        let mut c = Cluster::new(3);
        c.partition(2);
        c.commit(Entry::inc("x", 5));
        c.apply_committed(0);
        c.apply_committed(2);
        assert_eq!(c.value_of(0, "x"), 5);
        assert_eq!(c.value_of(2, "x"), 0);
    }

    #[test]
    fn toggle_parse_round_trip() {
        let t = BugToggles::parse("# comment\nexecuted_state_amnesia = on\nrecovery_noop_voiding=off\n");
        assert!(t.executed_state_amnesia);
        assert!(!t.recovery_noop_voiding);
        assert_eq!(BugToggles::parse(""), BugToggles::default());
    }
}
