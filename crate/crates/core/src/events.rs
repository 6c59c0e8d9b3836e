//! Campaign event log: one structured record per workflow step, appended
//! as JSON lines. Records carry no timestamps or host-dependent data so
//! two scripted runs of the same campaign produce byte-identical logs.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::AgentId;
use crate::model::TokenUsage;

/// The twelve numbered workflow steps of one campaign iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(transparent)]
pub struct StepId(pub u8);

impl StepId {
    pub const BUG_EXPLOITATION: StepId = StepId(1);
    pub const STATE_ANALYSIS: StepId = StepId(2);
    pub const CONTEXT_TO_STRATEGY: StepId = StepId(3);
    pub const CONSTRAINT_ANALYSIS: StepId = StepId(4);
    pub const ABSORB_CONTEXT: StepId = StepId(5);
    pub const SCENARIO_GENERATION: StepId = StepId(6);
    pub const SCENARIO_TO_ORCHESTRATOR: StepId = StepId(7);
    pub const FORWARD_TO_TESTGEN: StepId = StepId(8);
    pub const TEST_GENERATION: StepId = StepId(9);
    pub const TEST_EXECUTION: StepId = StepId(10);
    pub const RESULT_ANALYSIS: StepId = StepId(11);
    pub const REPORT_TO_ORCHESTRATOR: StepId = StepId(12);

    pub fn get(&self) -> u8 {
        self.0
    }

    pub fn new(step: u8) -> Result<StepId> {
        if (1..=12).contains(&step) {
            Ok(StepId(step))
        } else {
            Err(Error::Invariant(format!("step id {step} outside 1..=12")))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WorkflowEvent {
    pub iteration: usize,
    pub step: StepId,
    pub agent: AgentId,
    /// Destination agent for message-passing steps (③, ⑦, ⑧, ⑫).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<AgentId>,
    pub summary: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

impl WorkflowEvent {
    pub fn new(iteration: usize, step: StepId, agent: AgentId, summary: impl Into<String>) -> Self {
        WorkflowEvent { iteration, step, agent, to: None, summary: summary.into(), usage: None }
    }

    pub fn to(mut self, dest: AgentId) -> Self {
        self.to = Some(dest);
        self
    }

    pub fn usage(mut self, usage: TokenUsage) -> Self {
        self.usage = Some(usage);
        self
    }
}

/// Append-only event log, optionally mirrored to a JSONL file.
pub struct EventLog {
    events: Vec<WorkflowEvent>,
    path: Option<PathBuf>,
}

impl EventLog {
    pub fn in_memory() -> EventLog {
        EventLog { events: Vec::new(), path: None }
    }

    /// Truncates any existing file: the log describes exactly one run.
    pub fn at_path(path: &Path) -> Result<EventLog> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        File::create(path)?;
        Ok(EventLog { events: Vec::new(), path: Some(path.to_path_buf()) })
    }

    pub fn record(&mut self, event: WorkflowEvent) -> Result<()> {
        if let Some(path) = &self.path {
            let mut file = OpenOptions::new().append(true).open(path)?;
            let line = serde_json::to_string(&event)?;
            writeln!(file, "{line}")?;
        }
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[WorkflowEvent] {
        &self.events
    }

    pub fn load(path: &Path) -> Result<Vec<WorkflowEvent>> {
        let text = fs::read_to_string(path)?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }
}

/// Step ranges owned by each agent, used by the routing check.
fn owner_of(step: StepId) -> AgentId {
    match step.0 {
        1..=3 | 8 => AgentId::Orchestrator,
        4..=7 => AgentId::Strategy,
        _ => AgentId::TestGen,
    }
}

/// Every message edge must touch the orchestrator: no event may carry a
/// direct strategy-to-testgen flow in either direction.
pub fn check_routing(events: &[WorkflowEvent]) -> Result<()> {
    for event in events {
        let from = event.agent;
        if let Some(to) = event.to {
            let direct = (from == AgentId::Strategy && to == AgentId::TestGen)
                || (from == AgentId::TestGen && to == AgentId::Strategy);
            if direct {
                return Err(Error::Invariant(format!(
                    "iteration {} step {}: direct {}→{} edge",
                    event.iteration, event.step.0, from, to
                )));
            }
        }
        if owner_of(event.step) != from {
            return Err(Error::Invariant(format!(
                "iteration {} step {} emitted by {}",
                event.iteration, event.step.0, from
            )));
        }
    }
    Ok(())
}

/// Within each iteration, step ids must be non-decreasing, so ①..⑫ appear
/// in workflow order. Gaps are allowed (ablated or short-circuited steps),
/// and the ⑨⑩⑪ reflection rounds may cycle back to ⑨.
pub fn check_step_order(events: &[WorkflowEvent]) -> Result<()> {
    const REFLECTION: std::ops::RangeInclusive<u8> = 9..=11;
    let mut last: Option<(usize, StepId)> = None;
    for event in events {
        if let Some((iteration, step)) = last {
            if event.iteration < iteration {
                return Err(Error::Invariant(format!(
                    "iteration went backwards: {} after {}",
                    event.iteration, iteration
                )));
            }
            let reflection_cycle =
                REFLECTION.contains(&step.0) && REFLECTION.contains(&event.step.0);
            if event.iteration == iteration && event.step < step && !reflection_cycle {
                return Err(Error::Invariant(format!(
                    "iteration {}: step {} after step {}",
                    iteration, event.step.0, step.0
                )));
            }
        }
        last = Some((event.iteration, event.step));
    }
    Ok(())
}
