//! JSON interchange format for treatment graphs. The schema lives in
//! `data/schema/graph.schema.json`.

use serde::{Deserialize, Serialize};

use super::{validate, Edge, GraphError, NodeId, Relation, TreatmentGraph, TreatmentNode};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    path_id: String,
    title: String,
    nodes: Vec<TreatmentNode>,
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    from: NodeId,
    to: NodeId,
    relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl TryFrom<EdgeDoc> for Edge {
    type Error = GraphError;

    fn try_from(doc: EdgeDoc) -> Result<Self, Self::Error> {
        let relation = match (doc.relation.as_str(), doc.label) {
            ("OPTION", Some(label)) if !label.is_empty() => Relation::Option(label),
            ("OPTION", _) => {
                return Err(GraphError::Parse(format!(
                    "OPTION edge {} -> {} needs a non-empty label",
                    doc.from, doc.to
                )))
            }
            (r, Some(_)) => {
                return Err(GraphError::Parse(format!(
                    "edge {} -> {}: label is only allowed on OPTION edges, not {r}",
                    doc.from, doc.to
                )))
            }
            ("NEXT", None) => Relation::Next,
            ("YES", None) => Relation::Yes,
            ("NO", None) => Relation::No,
            ("INFO", None) => Relation::Info,
            ("JUMP", None) => Relation::Jump,
            (other, None) => {
                return Err(GraphError::Parse(format!(
                    "edge {} -> {}: unknown relation '{other}'",
                    doc.from, doc.to
                )))
            }
        };
        Ok(Edge {
            from: doc.from,
            to: doc.to,
            relation,
        })
    }
}

impl From<&Edge> for EdgeDoc {
    fn from(e: &Edge) -> Self {
        let label = match &e.relation {
            Relation::Option(l) => Some(l.clone()),
            _ => None,
        };
        EdgeDoc {
            from: e.from.clone(),
            to: e.to.clone(),
            relation: e.relation.name().to_string(),
            label,
        }
    }
}

/// Parses and validates a graph document. Invalid graphs are rejected with
/// every violation found.
pub fn load_graph(document: &str) -> Result<TreatmentGraph, GraphError> {
    let doc: GraphDoc = serde_json::from_str(document).map_err(|e| GraphError::Parse(e.to_string()))?;
    let edges = doc
        .edges
        .into_iter()
        .map(Edge::try_from)
        .collect::<Result<Vec<_>, _>>()?;
    let graph = TreatmentGraph::from_parts(doc.path_id, doc.title, doc.nodes, edges);
    let violations = validate(&graph);
    if violations.is_empty() {
        Ok(graph)
    } else {
        Err(GraphError::Validation(violations))
    }
}

pub fn to_json(graph: &TreatmentGraph) -> String {
    let doc = GraphDoc {
        path_id: graph.path_id.clone(),
        title: graph.title.clone(),
        nodes: graph.nodes().to_vec(),
        edges: graph.edges().iter().map(EdgeDoc::from).collect(),
    };
    // GraphDoc contains only strings, numbers and vectors
    serde_json::to_string_pretty(&doc).expect("graph document serializes")
}
