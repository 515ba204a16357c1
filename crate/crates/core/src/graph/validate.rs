use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use super::{NodeId, NodeKind, Relation, TreatmentGraph, MAX_BRANCHES};

/// One broken graph rule. `rule_id` is stable and meant for tooling;
/// `Display` gives the human-readable form with node/edge locators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyPathId,
    DuplicateNode(NodeId),
    MissingStart,
    MultipleStarts(Vec<NodeId>),
    DanglingEdge {
        from: NodeId,
        to: NodeId,
        missing: NodeId,
    },
    EndNotTerminal(NodeId),
    MissingDecisionSpec(NodeId),
    UnexpectedDecisionSpec(NodeId),
    BadBranchCount {
        node: NodeId,
        count: usize,
    },
    DuplicateBranchLabel {
        node: NodeId,
        label: String,
    },
    IncompleteAutoFact(NodeId),
    AutoFactNeedsTwoBranches(NodeId),
    MissingBranch {
        node: NodeId,
        label: String,
        relation: &'static str,
    },
    UnexpectedBranch {
        node: NodeId,
        label: String,
    },
    FlowEdgeOnDecision(NodeId),
    BranchOnNonDecision(NodeId),
    SuccessorCount {
        node: NodeId,
        found: usize,
    },
    MultipleInfoEdges(NodeId),
    NonPositiveTimer(NodeId),
    Unreachable(NodeId),
    CycleWithoutDecision(Vec<NodeId>),
}

impl Violation {
    pub fn rule_id(&self) -> &'static str {
        match self {
            Violation::EmptyPathId => "empty-path-id",
            Violation::DuplicateNode(_) => "duplicate-node",
            Violation::MissingStart => "missing-start",
            Violation::MultipleStarts(_) => "multiple-starts",
            Violation::DanglingEdge { .. } => "dangling-edge",
            Violation::EndNotTerminal(_) => "end-not-terminal",
            Violation::MissingDecisionSpec(_) => "missing-decision-spec",
            Violation::UnexpectedDecisionSpec(_) => "unexpected-decision-spec",
            Violation::BadBranchCount { .. } => "bad-branch-count",
            Violation::DuplicateBranchLabel { .. } => "duplicate-branch-label",
            Violation::IncompleteAutoFact(_) => "incomplete-auto-fact",
            Violation::AutoFactNeedsTwoBranches(_) => "auto-fact-needs-two-branches",
            Violation::MissingBranch { .. } => "missing-branch",
            Violation::UnexpectedBranch { .. } => "unexpected-branch",
            Violation::FlowEdgeOnDecision(_) => "flow-edge-on-decision",
            Violation::BranchOnNonDecision(_) => "branch-on-non-decision",
            Violation::SuccessorCount { .. } => "successor-count",
            Violation::MultipleInfoEdges(_) => "multiple-info-edges",
            Violation::NonPositiveTimer(_) => "non-positive-timer",
            Violation::Unreachable(_) => "unreachable",
            Violation::CycleWithoutDecision(_) => "cycle-without-decision",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] ", self.rule_id())?;
        match self {
            Violation::EmptyPathId => write!(f, "path_id is empty"),
            Violation::DuplicateNode(id) => write!(f, "node '{id}' is defined more than once"),
            Violation::MissingStart => write!(f, "graph has no start node"),
            Violation::MultipleStarts(ids) => {
                let ids: Vec<&str> = ids.iter().map(NodeId::as_str).collect();
                write!(f, "graph has {} start nodes: {}", ids.len(), ids.join(", "))
            }
            Violation::DanglingEdge { from, to, missing } => {
                write!(f, "edge {from} -> {to} references unknown node '{missing}'")
            }
            Violation::EndNotTerminal(id) => write!(f, "end node '{id}' has outgoing edges"),
            Violation::MissingDecisionSpec(id) => write!(f, "decision '{id}' has no decision spec"),
            Violation::UnexpectedDecisionSpec(id) => {
                write!(f, "node '{id}' carries a decision spec but is not a decision")
            }
            Violation::BadBranchCount { node, count } => write!(
                f,
                "decision '{node}' declares {count} branch labels (allowed 1..={MAX_BRANCHES})"
            ),
            Violation::DuplicateBranchLabel { node, label } => {
                write!(f, "decision '{node}' has more than one branch for '{label}'")
            }
            Violation::IncompleteAutoFact(id) => write!(
                f,
                "decision '{id}' names an auto_fact without both comparator and threshold"
            ),
            Violation::AutoFactNeedsTwoBranches(id) => {
                write!(f, "auto-resolved decision '{id}' must have exactly two branches")
            }
            Violation::MissingBranch { node, label, relation } => {
                write!(f, "decision '{node}' has no {relation} edge for branch '{label}'")
            }
            Violation::UnexpectedBranch { node, label } => write!(
                f,
                "decision '{node}' has an edge for '{label}' which is not a declared branch"
            ),
            Violation::FlowEdgeOnDecision(id) => {
                write!(f, "decision '{id}' has a NEXT or JUMP edge")
            }
            Violation::BranchOnNonDecision(id) => {
                write!(f, "node '{id}' has YES/NO/OPTION edges but is not a decision")
            }
            Violation::SuccessorCount { node, found } => write!(
                f,
                "node '{node}' needs exactly one outgoing NEXT or JUMP edge, found {found}"
            ),
            Violation::MultipleInfoEdges(id) => write!(f, "node '{id}' has several INFO edges"),
            Violation::NonPositiveTimer(id) => write!(f, "node '{id}' has timer_seconds = 0"),
            Violation::Unreachable(id) => write!(f, "node '{id}' is unreachable from start"),
            Violation::CycleWithoutDecision(ids) => {
                let ids: Vec<&str> = ids.iter().map(NodeId::as_str).collect();
                write!(f, "flow cycle without a decision: {}", ids.join(" -> "))
            }
        }
    }
}

/// Checks every graph invariant. Total: an empty list means the graph is
/// valid.
pub fn validate(graph: &TreatmentGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    if graph.path_id.is_empty() {
        out.push(Violation::EmptyPathId);
    }

    let mut ids = HashSet::new();
    for n in graph.nodes() {
        if !ids.insert(&n.id) {
            out.push(Violation::DuplicateNode(n.id.clone()));
        }
    }

    let starts: Vec<NodeId> = graph
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::Start)
        .map(|n| n.id.clone())
        .collect();
    match starts.len() {
        0 => out.push(Violation::MissingStart),
        1 => {}
        _ => out.push(Violation::MultipleStarts(starts)),
    }

    for e in graph.edges() {
        for end in [&e.from, &e.to] {
            if !ids.contains(end) {
                out.push(Violation::DanglingEdge {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    missing: end.clone(),
                });
            }
        }
    }

    // Info nodes hanging off an INFO edge, and not part of the flow, may be
    // leaves.
    let mut info_incoming: HashSet<&NodeId> = HashSet::new();
    let mut flow_incoming: HashSet<&NodeId> = HashSet::new();
    for e in graph.edges() {
        match e.relation {
            Relation::Info => {
                info_incoming.insert(&e.to);
            }
            _ => {
                flow_incoming.insert(&e.to);
            }
        }
    }

    for n in graph.nodes() {
        if n.timer_seconds == Some(0) {
            out.push(Violation::NonPositiveTimer(n.id.clone()));
        }
        let outgoing: Vec<_> = graph.outgoing(&n.id).collect();
        let info_edges = outgoing.iter().filter(|e| e.relation == Relation::Info).count();
        if info_edges > 1 {
            out.push(Violation::MultipleInfoEdges(n.id.clone()));
        }
        let step_edges = outgoing
            .iter()
            .filter(|e| matches!(e.relation, Relation::Next | Relation::Jump))
            .count();
        let branch_edges: Vec<_> = outgoing.iter().filter(|e| e.relation.is_branch()).collect();

        if n.kind != NodeKind::Decision && n.decision.is_some() {
            out.push(Violation::UnexpectedDecisionSpec(n.id.clone()));
        }

        match n.kind {
            NodeKind::End => {
                if outgoing
                    .iter()
                    .any(|e| e.relation.is_flow() || e.relation == Relation::Jump)
                {
                    out.push(Violation::EndNotTerminal(n.id.clone()));
                }
            }
            NodeKind::Decision => {
                if step_edges > 0 {
                    out.push(Violation::FlowEdgeOnDecision(n.id.clone()));
                }
                let Some(spec) = &n.decision else {
                    out.push(Violation::MissingDecisionSpec(n.id.clone()));
                    continue;
                };
                let count = spec.branch_labels.len();
                if count == 0 || count > MAX_BRANCHES {
                    out.push(Violation::BadBranchCount {
                        node: n.id.clone(),
                        count,
                    });
                }
                let mut declared = HashSet::new();
                for l in &spec.branch_labels {
                    if !declared.insert(l.as_str()) {
                        out.push(Violation::DuplicateBranchLabel {
                            node: n.id.clone(),
                            label: l.clone(),
                        });
                    }
                }
                if spec.auto_fact.is_some() {
                    if spec.comparator.is_none() || spec.threshold.is_none() {
                        out.push(Violation::IncompleteAutoFact(n.id.clone()));
                    }
                    if count != 2 {
                        out.push(Violation::AutoFactNeedsTwoBranches(n.id.clone()));
                    }
                }

                let mut covered: HashMap<&str, usize> = HashMap::new();
                for e in &branch_edges {
                    match graph.branch_label(e) {
                        Some(label) if declared.contains(label) => {
                            *covered.entry(label).or_default() += 1;
                        }
                        Some(label) => out.push(Violation::UnexpectedBranch {
                            node: n.id.clone(),
                            label: label.to_string(),
                        }),
                        None => out.push(Violation::UnexpectedBranch {
                            node: n.id.clone(),
                            label: e.relation.name().to_string(),
                        }),
                    }
                }
                let uses_yes_no = branch_edges
                    .iter()
                    .any(|e| matches!(e.relation, Relation::Yes | Relation::No))
                    || (count == 2 && !branch_edges.iter().any(|e| matches!(e.relation, Relation::Option(_))));
                for (i, label) in spec.branch_labels.iter().enumerate() {
                    match covered.get(label.as_str()) {
                        None => out.push(Violation::MissingBranch {
                            node: n.id.clone(),
                            label: label.clone(),
                            relation: match (uses_yes_no, i) {
                                (true, 0) => "YES",
                                (true, 1) => "NO",
                                _ => "OPTION",
                            },
                        }),
                        Some(&c) if c > 1 => out.push(Violation::DuplicateBranchLabel {
                            node: n.id.clone(),
                            label: label.clone(),
                        }),
                        Some(_) => {}
                    }
                }
            }
            _ => {
                if !branch_edges.is_empty() {
                    out.push(Violation::BranchOnNonDecision(n.id.clone()));
                }
                let detached_info =
                    n.kind == NodeKind::Info && info_incoming.contains(&n.id) && !flow_incoming.contains(&n.id);
                let ok = step_edges == 1 || (detached_info && step_edges == 0);
                if !ok {
                    out.push(Violation::SuccessorCount {
                        node: n.id.clone(),
                        found: step_edges,
                    });
                }
            }
        }
    }

    if let Some(start) = graph.start() {
        let reachable = bfs_all_edges(graph, &start.id);
        for n in graph.nodes() {
            if !reachable.contains(&n.id) {
                out.push(Violation::Unreachable(n.id.clone()));
            }
        }
    }

    out.extend(flow_cycles(graph).into_iter().map(Violation::CycleWithoutDecision));
    out
}

fn bfs_all_edges(graph: &TreatmentGraph, from: &NodeId) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::from([from.clone()]);
    let mut queue = VecDeque::from([from.clone()]);
    while let Some(id) = queue.pop_front() {
        for e in graph.outgoing(&id) {
            if seen.insert(e.to.clone()) {
                queue.push_back(e.to.clone());
            }
        }
    }
    seen
}

/// Cycles over NEXT/YES/NO/OPTION edges once every decision node is
/// removed. JUMP edges are allowed to close loops.
fn flow_cycles(graph: &TreatmentGraph) -> Vec<Vec<NodeId>> {
    let decisions: HashSet<&NodeId> = graph
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::Decision)
        .map(|n| &n.id)
        .collect();
    let mut adj: HashMap<&NodeId, Vec<&NodeId>> = HashMap::new();
    for e in graph.edges() {
        if e.relation.is_flow() && !decisions.contains(&e.from) && !decisions.contains(&e.to) {
            adj.entry(&e.from).or_default().push(&e.to);
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: HashMap<&NodeId, Mark> = HashMap::new();
    let mut cycles = Vec::new();
    for n in graph.nodes() {
        if marks.contains_key(&n.id) {
            continue;
        }
        // iterative DFS; `path` mirrors the open stack
        let mut stack: Vec<(&NodeId, usize)> = vec![(&n.id, 0)];
        let mut path: Vec<&NodeId> = vec![&n.id];
        marks.insert(&n.id, Mark::Open);
        while let Some((id, next_child)) = stack.last_mut() {
            let children = adj.get(id).map(Vec::as_slice).unwrap_or(&[]);
            if let Some(&child) = children.get(*next_child) {
                *next_child += 1;
                match marks.get(child) {
                    None => {
                        marks.insert(child, Mark::Open);
                        stack.push((child, 0));
                        path.push(child);
                    }
                    Some(Mark::Open) => {
                        let pos = path.iter().position(|p| *p == child).unwrap_or(0);
                        let mut cycle: Vec<NodeId> = path[pos..].iter().map(|id| (*id).clone()).collect();
                        cycle.push(child.clone());
                        cycles.push(cycle);
                    }
                    Some(Mark::Done) => {}
                }
            } else {
                marks.insert(*id, Mark::Done);
                stack.pop();
                path.pop();
            }
        }
    }
    cycles
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{Comparator, DecisionSpec};
    use super::*;

    fn with(
        g: &TreatmentGraph,
        f: impl FnOnce(&mut Vec<super::super::TreatmentNode>, &mut Vec<super::super::Edge>),
    ) -> TreatmentGraph {
        let mut nodes = g.nodes().to_vec();
        let mut edges = g.edges().to_vec();
        f(&mut nodes, &mut edges);
        TreatmentGraph::from_parts(g.path_id.clone(), g.title.clone(), nodes, edges)
    }

    #[test]
    fn demo_is_valid() {
        assert_eq!(validate(&demo()), vec![]);
    }

    #[test]
    fn two_starts_named() {
        let g = with(&demo(), |nodes, edges| {
            nodes.push(node("start2", NodeKind::Start, "Zweiter Start"));
            edges.push(edge("start2", "a1", Relation::Next));
        });
        let v = validate(&g);
        let ids = v
            .iter()
            .find_map(|v| match v {
                Violation::MultipleStarts(ids) => Some(ids.clone()),
                _ => None,
            })
            .expect("multiple starts reported");
        let ids: Vec<&str> = ids.iter().map(NodeId::as_str).collect();
        assert_eq!(ids, ["start", "start2"]);
    }

    #[test]
    fn missing_no_edge() {
        let g = with(&demo(), |_, edges| {
            edges.retain(|e| e.relation != Relation::No);
        });
        let v = validate(&g);
        assert!(v.contains(&Violation::MissingBranch {
            node: NodeId::new("d1").unwrap(),
            label: "Nein".into(),
            relation: "NO",
        }));
        assert!(v
            .iter()
            .find(|v| v.rule_id() == "missing-branch")
            .unwrap()
            .to_string()
            .contains("no NO edge"));
    }

    #[test]
    fn unreachable_node() {
        let g = with(&demo(), |nodes, edges| {
            nodes.push(node("x", NodeKind::Action, "Verwaist"));
            edges.push(edge("x", "end", Relation::Next));
        });
        assert_eq!(validate(&g), vec![Violation::Unreachable(NodeId::new("x").unwrap())]);
    }

    #[test]
    fn end_with_next() {
        let g = with(&demo(), |_, edges| {
            edges.push(edge("end", "a1", Relation::Next));
        });
        assert_eq!(
            validate(&g),
            vec![Violation::EndNotTerminal(NodeId::new("end").unwrap())]
        );
    }

    #[test]
    fn next_cycle_needs_decision() {
        // a4 -> a2 closes a2 -> a4 -> a2 without any decision in between
        let g = with(&demo(), |_, edges| {
            edges.retain(|e| !(e.from.as_str() == "a4"));
            edges.push(edge("a4", "a2", Relation::Next));
        });
        let v = validate(&g);
        assert!(v.iter().any(|v| v.rule_id() == "cycle-without-decision"), "{v:?}");
    }

    #[test]
    fn jump_may_close_loop() {
        let g = with(&demo(), |nodes, edges| {
            nodes.push(node("j1", NodeKind::Jump, "Zurück zu Beginn"));
            edges.retain(|e| !(e.from.as_str() == "a3"));
            edges.push(edge("a3", "j1", Relation::Next));
            edges.push(edge("j1", "a1", Relation::Jump));
        });
        assert_eq!(validate(&g), vec![]);
    }

    #[test]
    fn loop_through_decision_is_fine() {
        let g = with(&demo(), |_, edges| {
            edges.retain(|e| !(e.from.as_str() == "a3"));
            edges.push(edge("a3", "a1", Relation::Next));
        });
        assert_eq!(validate(&g), vec![]);
    }

    #[test]
    fn decision_rules() {
        let g = with(&demo(), |nodes, edges| {
            let d = nodes.iter_mut().find(|n| n.id.as_str() == "d1").unwrap();
            d.decision = Some(DecisionSpec {
                question: "?".into(),
                auto_fact: Some("age_years".into()),
                comparator: Some(Comparator::GT),
                threshold: None,
                branch_labels: vec!["Ja".into(), "Nein".into()],
            });
            edges.push(edge("d1", "a4", Relation::Next));
            edges.push(edge("d1", "a4", Relation::Option("Egal".into())));
        });
        let rules: BTreeSet<&str> = validate(&g).iter().map(Violation::rule_id).collect();
        assert!(rules.contains("incomplete-auto-fact"));
        assert!(rules.contains("flow-edge-on-decision"));
        assert!(rules.contains("unexpected-branch"));
    }

    #[test]
    fn too_many_branches() {
        let g = with(&demo(), |nodes, _| {
            let d = nodes.iter_mut().find(|n| n.id.as_str() == "d1").unwrap();
            d.decision.as_mut().unwrap().branch_labels =
                ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect();
        });
        assert!(validate(&g)
            .iter()
            .any(|v| matches!(v, Violation::BadBranchCount { count: 5, .. })));
    }

    #[test]
    fn action_needs_one_successor() {
        let g = with(&demo(), |_, edges| {
            edges.push(edge("a2", "end", Relation::Next));
        });
        assert_eq!(
            validate(&g),
            vec![Violation::SuccessorCount {
                node: NodeId::new("a2").unwrap(),
                found: 2
            }]
        );
    }

    #[test]
    fn detached_info_leaf_allowed() {
        let g = with(&demo(), |nodes, edges| {
            nodes.push(node("i1", NodeKind::Info, "Hinweis"));
            edges.push(edge("a1", "i1", Relation::Info));
        });
        assert_eq!(validate(&g), vec![]);
    }

    #[test]
    fn dangling_and_timer() {
        let g = with(&demo(), |nodes, edges| {
            nodes[1].timer_seconds = Some(0);
            edges.push(edge("a1", "ghost", Relation::Info));
        });
        let rules: BTreeSet<&str> = validate(&g).iter().map(Violation::rule_id).collect();
        assert!(rules.contains("non-positive-timer"));
        assert!(rules.contains("dangling-edge"));
    }
}
