//! Treatment-path knowledge graphs.
//!
//! A [`TreatmentGraph`] is a typed property graph: nodes are treatment steps
//! (actions, yes/no or multi-option decisions, jumps, info pages, start/end)
//! and edges are labeled relations between them. Graphs are immutable once
//! loaded and are shared behind an `Arc` by sessions and the display layer.

mod interchange;
mod validate;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use interchange::{load_graph, to_json};
pub use validate::{validate, Violation};

/// Maximum number of branches on a decision: one per side button.
pub const MAX_BRANCHES: usize = 4;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("graph failed validation with {} violation(s): {}", .0.len(), join_violations(.0))]
    Validation(Vec<Violation>),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("decision '{0}' needs an answer")]
    MissingAnswer(NodeId),
    #[error("node '{node}' has no branch labeled '{label}'")]
    UnknownBranchLabel { node: NodeId, label: String },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Node identifier, restricted to `[a-z0-9_-]{1,64}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Result<Self, GraphError> {
        let id = id.into();
        let ok = !id.is_empty()
            && id.len() <= 64
            && id
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-');
        if ok {
            Ok(NodeId(id))
        } else {
            Err(GraphError::Parse(format!(
                "invalid node id '{id}': expected [a-z0-9_-]{{1,64}}"
            )))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for NodeId {
    type Error = GraphError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        NodeId::new(value)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> Self {
        id.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Start,
    Action,
    Decision,
    Jump,
    Info,
    End,
}

/// Comparison applied between a patient fact and a decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    GT,
    GE,
    LT,
    LE,
    EQ,
}

impl Comparator {
    pub const ALL: [Comparator; 5] = [
        Comparator::GT,
        Comparator::GE,
        Comparator::LT,
        Comparator::LE,
        Comparator::EQ,
    ];

    /// `value <op> threshold`.
    pub fn holds<T: PartialOrd>(self, value: T, threshold: T) -> bool {
        match self {
            Comparator::GT => value > threshold,
            Comparator::GE => value >= threshold,
            Comparator::LT => value < threshold,
            Comparator::LE => value <= threshold,
            Comparator::EQ => value == threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::GT => ">",
            Comparator::GE => ">=",
            Comparator::LT => "<",
            Comparator::LE => "<=",
            Comparator::EQ => "==",
        }
    }

    pub fn parse(s: &str) -> Option<Comparator> {
        match s {
            "GT" => Some(Comparator::GT),
            "GE" => Some(Comparator::GE),
            "LT" => Some(Comparator::LT),
            "LE" => Some(Comparator::LE),
            "EQ" => Some(Comparator::EQ),
            _ => None,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Comparator::GT => "GT",
            Comparator::GE => "GE",
            Comparator::LT => "LT",
            Comparator::LE => "LE",
            Comparator::EQ => "EQ",
        };
        f.write_str(s)
    }
}

/// Question attached to a decision node, optionally auto-resolvable from a
/// patient fact. When the comparison holds the first label is chosen,
/// otherwise the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpec {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_fact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator: Option<Comparator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub branch_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timer_seconds: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<DecisionSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Next,
    Yes,
    No,
    Option(String),
    Info,
    Jump,
}

impl Relation {
    /// NEXT/YES/NO/OPTION: the edges that carry the treatment flow forward
    /// and that must not form a cycle outside a decision.
    pub fn is_flow(&self) -> bool {
        matches!(
            self,
            Relation::Next | Relation::Yes | Relation::No | Relation::Option(_)
        )
    }

    pub fn is_branch(&self) -> bool {
        matches!(self, Relation::Yes | Relation::No | Relation::Option(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Relation::Next => "NEXT",
            Relation::Yes => "YES",
            Relation::No => "NO",
            Relation::Option(_) => "OPTION",
            Relation::Info => "INFO",
            Relation::Jump => "JUMP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub relation: Relation,
}

impl Edge {
    pub fn new(from: &NodeId, to: &NodeId, relation: Relation) -> Self {
        Edge {
            from: from.clone(),
            to: to.clone(),
            relation,
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.relation {
            Relation::Option(label) => write!(f, "{} -OPTION({label})-> {}", self.from, self.to),
            r => write!(f, "{} -{}-> {}", self.from, r.name(), self.to),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TreatmentGraph {
    pub path_id: String,
    pub title: String,
    nodes: Vec<TreatmentNode>,
    edges: Vec<Edge>,
    index: HashMap<NodeId, usize>,
}

impl PartialEq for TreatmentGraph {
    fn eq(&self, other: &Self) -> bool {
        self.path_id == other.path_id && self.title == other.title && self.is_isomorphic(other)
    }
}

impl TreatmentGraph {
    /// Builds a graph without validating it. [`load_graph`] is the checked
    /// entry point; this exists for constructing fixtures and for the
    /// validator's own tests.
    pub fn from_parts(
        path_id: impl Into<String>,
        title: impl Into<String>,
        nodes: Vec<TreatmentNode>,
        edges: Vec<Edge>,
    ) -> Self {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            index.entry(n.id.clone()).or_insert(i);
        }
        TreatmentGraph {
            path_id: path_id.into(),
            title: title.into(),
            nodes,
            edges,
            index,
        }
    }

    pub fn nodes(&self) -> &[TreatmentNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&TreatmentNode> {
        NodeId::new(id)
            .ok()
            .and_then(|id| self.index.get(&id))
            .map(|&i| &self.nodes[i])
    }

    fn require(&self, id: &str) -> Result<&TreatmentNode, GraphError> {
        self.node(id).ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    pub fn start(&self) -> Option<&TreatmentNode> {
        self.nodes.iter().find(|n| n.kind == NodeKind::Start)
    }

    pub fn outgoing<'a>(&'a self, id: &'a NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| &e.from == id)
    }

    /// The branch label an edge stands for, given its source decision.
    /// YES and NO map to the first and second declared labels.
    pub fn branch_label<'a>(&'a self, edge: &'a Edge) -> Option<&'a str> {
        let spec = self.node(edge.from.as_str())?.decision.as_ref();
        match &edge.relation {
            Relation::Option(label) => Some(label.as_str()),
            Relation::Yes => spec.and_then(|s| s.branch_labels.first()).map(String::as_str),
            Relation::No => spec.and_then(|s| s.branch_labels.get(1)).map(String::as_str),
            _ => None,
        }
    }

    /// Next step(s) reachable from `node`. Decisions need the chosen branch
    /// label; every other kind ignores it and must not be given one.
    pub fn successors(&self, node: &str, answer: Option<&str>) -> Result<Vec<&TreatmentNode>, GraphError> {
        let n = self.require(node)?;
        match n.kind {
            NodeKind::End => match answer {
                None => Ok(Vec::new()),
                Some(label) => Err(GraphError::UnknownBranchLabel {
                    node: n.id.clone(),
                    label: label.to_string(),
                }),
            },
            NodeKind::Decision => {
                let label = answer.ok_or_else(|| GraphError::MissingAnswer(n.id.clone()))?;
                let edge = self
                    .outgoing(&n.id)
                    .find(|e| e.relation.is_branch() && self.branch_label(e) == Some(label))
                    .ok_or_else(|| GraphError::UnknownBranchLabel {
                        node: n.id.clone(),
                        label: label.to_string(),
                    })?;
                Ok(vec![self.require(edge.to.as_str())?])
            }
            _ => {
                if let Some(label) = answer {
                    return Err(GraphError::UnknownBranchLabel {
                        node: n.id.clone(),
                        label: label.to_string(),
                    });
                }
                match self
                    .outgoing(&n.id)
                    .find(|e| matches!(e.relation, Relation::Next | Relation::Jump))
                {
                    Some(e) => Ok(vec![self.require(e.to.as_str())?]),
                    None => Ok(Vec::new()),
                }
            }
        }
    }

    /// Long-form supporting text for a step: its own `info_text`, or the
    /// text of the node it points to with an INFO edge.
    pub fn attached_info(&self, node: &str) -> Result<Option<&str>, GraphError> {
        let n = self.require(node)?;
        if let Some(text) = &n.info_text {
            return Ok(Some(text));
        }
        let linked = self
            .outgoing(&n.id)
            .find(|e| e.relation == Relation::Info)
            .and_then(|e| self.node(e.to.as_str()));
        Ok(linked.map(|info| info.text.as_str()))
    }

    /// Nodes reached from Start by following `successors` over every branch
    /// label, plus INFO attachments.
    pub fn walk_reachable(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let Some(start) = self.start() else {
            return seen;
        };
        let mut queue = VecDeque::from([start.id.clone()]);
        seen.insert(start.id.clone());
        while let Some(id) = queue.pop_front() {
            let node = &self.nodes[self.index[&id]];
            let answers: Vec<Option<&str>> = match &node.decision {
                Some(spec) if node.kind == NodeKind::Decision => {
                    spec.branch_labels.iter().map(|l| Some(l.as_str())).collect()
                }
                _ => vec![None],
            };
            let mut next: Vec<NodeId> = answers
                .into_iter()
                .filter_map(|a| self.successors(id.as_str(), a).ok())
                .flatten()
                .map(|n| n.id.clone())
                .collect();
            next.extend(
                self.outgoing(&id)
                    .filter(|e| e.relation == Relation::Info)
                    .map(|e| e.to.clone()),
            );
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Node and edge sets are equal, ignoring document order.
    pub fn is_isomorphic(&self, other: &TreatmentGraph) -> bool {
        let key = |g: &TreatmentGraph| {
            let mut nodes: Vec<String> = g
                .nodes
                .iter()
                .map(|n| serde_json::to_string(n).unwrap_or_default())
                .collect();
            nodes.sort();
            let mut edges = g.edges.clone();
            edges.sort();
            (nodes, edges)
        };
        key(self) == key(other)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn node(id: &str, kind: NodeKind, text: &str) -> TreatmentNode {
        TreatmentNode {
            id: NodeId::new(id).unwrap(),
            kind,
            text: text.to_string(),
            info_text: None,
            timer_seconds: None,
            warning_text: None,
            decision: None,
        }
    }

    pub fn decision(id: &str, question: &str, labels: &[&str]) -> TreatmentNode {
        TreatmentNode {
            decision: Some(DecisionSpec {
                question: question.to_string(),
                auto_fact: None,
                comparator: None,
                threshold: None,
                branch_labels: labels.iter().map(|s| s.to_string()).collect(),
            }),
            ..node(id, NodeKind::Decision, question)
        }
    }

    pub fn edge(from: &str, to: &str, relation: Relation) -> Edge {
        Edge {
            from: NodeId::new(from).unwrap(),
            to: NodeId::new(to).unwrap(),
            relation,
        }
    }

    /// Start -> a1 -> d1 {Ja -> a2, Nein -> a3} -> a4 -> end
    pub fn demo() -> TreatmentGraph {
        let mut a1 = node("a1", NodeKind::Action, "Patient ansprechen");
        a1.info_text = Some("Lagerung prüfen".to_string());
        TreatmentGraph::from_parts(
            "bpr-demo",
            "Demo-Pfad",
            vec![
                node("start", NodeKind::Start, "Beginn"),
                a1,
                decision("d1", "Atmung vorhanden?", &["Ja", "Nein"]),
                node("a2", NodeKind::Action, "Stabile Seitenlage"),
                node("a3", NodeKind::Action, "Beatmen"),
                node("a4", NodeKind::Action, "Übergabe"),
                node("end", NodeKind::End, "Ende"),
            ],
            vec![
                edge("start", "a1", Relation::Next),
                edge("a1", "d1", Relation::Next),
                edge("d1", "a2", Relation::Yes),
                edge("d1", "a3", Relation::No),
                edge("a2", "a4", Relation::Next),
                edge("a3", "a4", Relation::Next),
                edge("a4", "end", Relation::Next),
            ],
        )
    }
}
