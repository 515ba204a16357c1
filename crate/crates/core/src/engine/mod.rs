//! Navigation sessions over a treatment graph.
//!
//! A [`Session`] keeps a cursor and a full replay log of how it got there.
//! Arriving at a decision opens a [`PendingInteraction`]: a plain prompt, or
//! an approval request when the decision can be resolved from patient facts.
//! Auto-resolved branches are never taken without an explicit answer.

mod facts;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::graph::{validate, DecisionSpec, GraphError, NodeId, NodeKind, TreatmentGraph, TreatmentNode, Violation};
use crate::warning::{WarningEvent, WarningOrigin, TIMER_OVERDUE_CODE};

pub use facts::{FactError, FactValue, PatientFacts, Sex};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("session is at an end node")]
    AtEnd,
    #[error("session is at the start node")]
    AtStart,
    #[error("no decision is awaiting an answer")]
    NoPending,
    #[error("'{0}' is not one of the offered options")]
    UnknownBranchLabel(String),
    #[error("pending interaction is not an approval")]
    NotApproval,
    #[error("graph is invalid: {0:?}")]
    InvalidGraph(Vec<Violation>),
    #[error(transparent)]
    Fact(#[from] FactError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub node: NodeId,
    /// Branch label taken to arrive here; `None` for non-decision steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PendingKind {
    Prompt,
    Approval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingInteraction {
    pub kind: PendingKind,
    pub node: NodeId,
    pub question: String,
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_choice: Option<String>,
    /// Which facts were used, and how, for an approval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
}

/// Previous / current / next step texts plus the path title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentView {
    pub path_title: String,
    pub previous: Option<String>,
    pub current: String,
    pub next: Option<String>,
    pub pending: Option<PendingInteraction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Advance {
    Moved(NodeId),
    Pending(PendingInteraction),
}

/// Line-delimited run-log record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    /// Logical milliseconds since the run started.
    pub t: u64,
    pub op: String,
    pub cursor: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Auto-resolution of a decision from facts: the chosen label and the
/// evidence string shown on the approval screen.
pub fn resolve_decision(spec: &DecisionSpec, facts: &PatientFacts) -> Option<(String, String)> {
    let key = spec.auto_fact.as_deref()?;
    let cmp = spec.comparator?;
    let threshold = spec.threshold?;
    let value = facts.number(key)?;
    let [first, second] = spec.branch_labels.as_slice() else {
        return None;
    };
    let holds = cmp.holds(value, threshold);
    let choice = if holds { first } else { second };
    let mut evidence = format!(
        "{key}={value} {} {threshold}: {} -> {choice}",
        cmp.symbol(),
        if holds { "ja" } else { "nein" }
    );
    if value == threshold {
        evidence.push_str(&format!(" (Grenzfall: {key} = {threshold})"));
    }
    Some((choice.clone(), evidence))
}

#[derive(Debug, Clone)]
pub struct Session {
    graph: Arc<TreatmentGraph>,
    cursor: NodeId,
    history: Vec<HistoryEntry>,
    pending: Option<PendingInteraction>,
    facts: PatientFacts,
    timer_deadline: Option<Duration>,
    redo: Option<HistoryEntry>,
    /// Set once the operator declines an approval; cleared on leaving the step.
    declined: bool,
    now: Duration,
    log: Vec<SessionRecord>,
}

/// Opens a session at the graph's start node.
pub fn start_session(graph: Arc<TreatmentGraph>, facts: PatientFacts, now: Duration) -> Result<Session, EngineError> {
    let violations = validate(&graph);
    if !violations.is_empty() {
        return Err(EngineError::InvalidGraph(violations));
    }
    let start = graph
        .start()
        .map(|n| n.id.clone())
        .ok_or(EngineError::InvalidGraph(vec![Violation::MissingStart]))?;
    let mut s = Session {
        graph,
        cursor: start.clone(),
        history: vec![HistoryEntry {
            node: start,
            label: None,
        }],
        pending: None,
        facts,
        timer_deadline: None,
        redo: None,
        declined: false,
        now,
        log: Vec::new(),
    };
    s.arrive();
    s.record("start", None);
    Ok(s)
}

impl Session {
    pub fn graph(&self) -> &Arc<TreatmentGraph> {
        &self.graph
    }

    pub fn cursor(&self) -> &NodeId {
        &self.cursor
    }

    pub fn current(&self) -> &TreatmentNode {
        self.node(&self.cursor)
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn pending(&self) -> Option<&PendingInteraction> {
        self.pending.as_ref()
    }

    pub fn facts(&self) -> &PatientFacts {
        &self.facts
    }

    pub fn timer_deadline(&self) -> Option<Duration> {
        self.timer_deadline
    }

    pub fn now(&self) -> Duration {
        self.now
    }

    pub fn log(&self) -> &[SessionRecord] {
        &self.log
    }

    /// Moves the session's notion of time forward; log records use it.
    pub fn set_now(&mut self, now: Duration) {
        self.now = self.now.max(now);
    }

    /// Updates a fact. An open prompt or approval is re-evaluated so that
    /// it reflects the new value.
    pub fn set_fact(&mut self, key: &str, value: impl Into<FactValue>) -> Result<(), EngineError> {
        self.facts.insert(key, value)?;
        if self.pending.is_some() && !self.declined {
            self.pending = self.open_pending();
        }
        Ok(())
    }

    fn node(&self, id: &NodeId) -> &TreatmentNode {
        self.graph
            .node(id.as_str())
            .expect("session only visits nodes of its graph")
    }

    fn record(&mut self, op: &str, label: Option<&str>) {
        self.log.push(SessionRecord {
            t: self.now.as_millis() as u64,
            op: op.to_string(),
            cursor: self.cursor.clone(),
            label: label.map(str::to_string),
        });
    }

    fn open_pending(&self) -> Option<PendingInteraction> {
        let node = self.current();
        if node.kind != NodeKind::Decision {
            return None;
        }
        let spec = node.decision.as_ref()?;
        let (kind, auto_choice, evidence) = match resolve_decision(spec, &self.facts) {
            Some((choice, evidence)) => (PendingKind::Approval, Some(choice), Some(evidence)),
            None => (PendingKind::Prompt, None, None),
        };
        Some(PendingInteraction {
            kind,
            node: node.id.clone(),
            question: spec.question.clone(),
            options: spec.branch_labels.clone(),
            auto_choice,
            evidence,
        })
    }

    /// Bookkeeping on entering the cursor node: timer and pending prompt.
    fn arrive(&mut self) {
        self.declined = false;
        self.timer_deadline = self
            .current()
            .timer_seconds
            .map(|s| self.now + Duration::from_secs(u64::from(s)));
        self.pending = self.open_pending();
    }

    fn move_to(&mut self, entry: HistoryEntry) {
        self.redo = None;
        self.cursor = entry.node.clone();
        self.history.push(entry);
        self.arrive();
    }

    /// Steps forward from a non-decision node, or returns the interaction
    /// a decision is waiting for.
    pub fn advance(&mut self) -> Result<Advance, EngineError> {
        let node = self.current();
        match node.kind {
            NodeKind::End => Err(EngineError::AtEnd),
            NodeKind::Decision => {
                if self.pending.is_none() {
                    self.pending = self.open_pending();
                }
                let pending = self.pending.clone().ok_or(EngineError::NoPending)?;
                let op = match pending.kind {
                    PendingKind::Prompt => "prompt",
                    PendingKind::Approval => "approval",
                };
                let choice = pending.auto_choice.clone();
                self.record(op, choice.as_deref());
                Ok(Advance::Pending(pending))
            }
            _ => {
                let next = self
                    .graph
                    .successors(node.id.as_str(), None)?
                    .first()
                    .map(|n| n.id.clone())
                    .ok_or(EngineError::AtEnd)?;
                self.move_to(HistoryEntry {
                    node: next.clone(),
                    label: None,
                });
                self.record("advance", None);
                Ok(Advance::Moved(next))
            }
        }
    }

    /// Answers the open prompt or approval with one of its options.
    pub fn answer(&mut self, label: &str) -> Result<NodeId, EngineError> {
        let pending = self.pending.as_ref().ok_or(EngineError::NoPending)?;
        if !pending.options.iter().any(|o| o == label) {
            return Err(EngineError::UnknownBranchLabel(label.to_string()));
        }
        let target = self
            .graph
            .successors(self.cursor.as_str(), Some(label))?
            .first()
            .map(|n| n.id.clone())
            .ok_or_else(|| EngineError::UnknownBranchLabel(label.to_string()))?;
        self.pending = None;
        self.move_to(HistoryEntry {
            node: target.clone(),
            label: Some(label.to_string()),
        });
        self.record("answer", Some(label));
        Ok(target)
    }

    /// Turns an approval into a plain prompt so the operator picks the
    /// branch by hand.
    pub fn decline_approval(&mut self) -> Result<(), EngineError> {
        let pending = self.pending.as_mut().ok_or(EngineError::NoPending)?;
        if pending.kind != PendingKind::Approval {
            return Err(EngineError::NotApproval);
        }
        pending.kind = PendingKind::Prompt;
        pending.auto_choice = None;
        pending.evidence = None;
        self.declined = true;
        self.record("decline", None);
        Ok(())
    }

    /// Returns to the previous history entry. The step left behind stays
    /// visible as the `next` preview until the session moves elsewhere.
    pub fn step_back(&mut self) -> Result<(), EngineError> {
        if self.history.len() <= 1 {
            return Err(EngineError::AtStart);
        }
        let popped = self.history.pop().expect("len > 1");
        self.cursor = self.history.last().expect("len >= 1").node.clone();
        self.redo = Some(popped);
        self.arrive();
        self.record("back", None);
        Ok(())
    }

    fn redo_target(&self) -> Option<&TreatmentNode> {
        let redo = self.redo.as_ref()?;
        let next = self
            .graph
            .successors(self.cursor.as_str(), redo.label.as_deref())
            .ok()?;
        next.into_iter().find(|n| n.id == redo.node)
    }

    pub fn view(&self) -> TreatmentView {
        let current = self.current();
        let previous = self
            .history
            .len()
            .checked_sub(2)
            .map(|i| self.node(&self.history[i].node).text.clone());
        let next = match current.kind {
            NodeKind::End => None,
            NodeKind::Decision => match &self.pending {
                Some(PendingInteraction {
                    kind: PendingKind::Approval,
                    auto_choice: Some(choice),
                    ..
                }) => self
                    .graph
                    .successors(self.cursor.as_str(), Some(choice))
                    .ok()
                    .and_then(|n| n.first().map(|n| n.text.clone())),
                _ => self.redo_target().map(|n| n.text.clone()),
            },
            _ => self
                .graph
                .successors(self.cursor.as_str(), None)
                .ok()
                .and_then(|n| n.first().map(|n| n.text.clone())),
        };
        TreatmentView {
            path_title: self.graph.title.clone(),
            previous,
            current: current.text.clone(),
            next,
            pending: self.pending.clone(),
        }
    }

    /// Fires once when the current step's timer has run out.
    pub fn poll_timer(&mut self, now: Duration) -> Option<WarningEvent> {
        self.set_now(now);
        let deadline = self.timer_deadline?;
        if now < deadline {
            return None;
        }
        self.timer_deadline = None;
        let node = self.current();
        let message = node
            .warning_text
            .clone()
            .unwrap_or_else(|| format!("Zeit überschritten: {}", node.text));
        let event = WarningEvent {
            code: TIMER_OVERDUE_CODE,
            message,
            origin: WarningOrigin::Timer {
                node: node.id.clone(),
                overdue_ms: (now - deadline).as_millis() as u64,
            },
        };
        self.record("timer", None);
        Some(event)
    }

    /// Re-walks the history labels from start; true iff it ends at the
    /// cursor.
    pub fn replays_to_cursor(&self) -> bool {
        let Some(first) = self.history.first() else {
            return false;
        };
        if self.graph.start().map(|n| &n.id) != Some(&first.node) {
            return false;
        }
        let mut at = first.node.clone();
        for entry in &self.history[1..] {
            match self.graph.successors(at.as_str(), entry.label.as_deref()) {
                Ok(next) if next.len() == 1 && next[0].id == entry.node => at = entry.node.clone(),
                _ => return false,
            }
        }
        at == self.cursor
    }
}
