//! Place graphs: nodes carrying one or more natural-language place references,
//! connected by directed qualitative spatial relationships (locatum -> relatum).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;

const DEFAULT_RELATION_TABLE: &str = include_str!("../data/relations.tsv");

/// The four relationship families a [`RelationKind`] can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationFamily {
    Cardinal,
    Distance,
    Relative,
    Topological,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    NorthOf,
    SouthOf,
    EastOf,
    WestOf,
    NorthEastOf,
    NorthWestOf,
    SouthEastOf,
    SouthWestOf,
    Near,
    InFrontOf,
    Behind,
    LeftOf,
    RightOf,
    Inside,
    CoveredBy,
    Overlap,
    Meet,
    Disjoint,
    Cover,
    Contain,
    Equal,
}

impl RelationKind {
    pub const ALL: [RelationKind; 21] = [
        RelationKind::NorthOf,
        RelationKind::SouthOf,
        RelationKind::EastOf,
        RelationKind::WestOf,
        RelationKind::NorthEastOf,
        RelationKind::NorthWestOf,
        RelationKind::SouthEastOf,
        RelationKind::SouthWestOf,
        RelationKind::Near,
        RelationKind::InFrontOf,
        RelationKind::Behind,
        RelationKind::LeftOf,
        RelationKind::RightOf,
        RelationKind::Inside,
        RelationKind::CoveredBy,
        RelationKind::Overlap,
        RelationKind::Meet,
        RelationKind::Disjoint,
        RelationKind::Cover,
        RelationKind::Contain,
        RelationKind::Equal,
    ];

    pub fn family(self) -> RelationFamily {
        use RelationKind::*;
        match self {
            NorthOf | SouthOf | EastOf | WestOf | NorthEastOf | NorthWestOf | SouthEastOf | SouthWestOf => {
                RelationFamily::Cardinal
            }
            Near => RelationFamily::Distance,
            InFrontOf | Behind | LeftOf | RightOf => RelationFamily::Relative,
            Inside | CoveredBy | Overlap | Meet | Disjoint | Cover | Contain | Equal => RelationFamily::Topological,
        }
    }

    /// Canonical snake_case label, e.g. `north_east_of`.
    pub fn label(self) -> &'static str {
        use RelationKind::*;
        match self {
            NorthOf => "north_of",
            SouthOf => "south_of",
            EastOf => "east_of",
            WestOf => "west_of",
            NorthEastOf => "north_east_of",
            NorthWestOf => "north_west_of",
            SouthEastOf => "south_east_of",
            SouthWestOf => "south_west_of",
            Near => "near",
            InFrontOf => "in_front_of",
            Behind => "behind",
            LeftOf => "left_of",
            RightOf => "right_of",
            Inside => "inside",
            CoveredBy => "covered_by",
            Overlap => "overlap",
            Meet => "meet",
            Disjoint => "disjoint",
            Cover => "cover",
            Contain => "contain",
            Equal => "equal",
        }
    }

    /// The relation that holds with locatum and relatum swapped, for the
    /// topological family. `None` for the other families.
    pub fn topological_converse(self) -> Option<RelationKind> {
        use RelationKind::*;
        Some(match self {
            Inside => Contain,
            Contain => Inside,
            CoveredBy => Cover,
            Cover => CoveredBy,
            Overlap => Overlap,
            Meet => Meet,
            Disjoint => Disjoint,
            Equal => Equal,
            _ => return None,
        })
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RelationKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationKind::ALL
            .iter()
            .copied()
            .find(|k| k.label() == s)
            .ok_or_else(|| GraphError::UnknownRelation(s.to_string()))
    }
}

fn relation_key(surface: &str) -> String {
    surface
        .trim()
        .to_lowercase()
        .replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Maps surface relation phrases ("to the north of", "Northern") to canonical kinds.
#[derive(Debug, Clone)]
pub struct RelationTable {
    phrases: HashMap<String, RelationKind>,
}

impl RelationTable {
    /// Parses a table of `phrase<TAB>canonical` lines. `#` starts a comment line.
    /// Canonical labels always map to themselves.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut phrases: HashMap<String, RelationKind> = RelationKind::ALL
            .iter()
            .map(|k| (relation_key(k.label()), *k))
            .collect();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(phrase), Some(canonical), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(GraphError::Malformed(format!(
                    "relation table line {}: expected `phrase<TAB>canonical`",
                    lineno + 1
                )));
            };
            let kind: RelationKind = canonical.trim().parse()?;
            phrases.insert(relation_key(phrase), kind);
        }
        Ok(RelationTable { phrases })
    }

    pub fn normalize(&self, surface: &str) -> Result<RelationKind, GraphError> {
        let key = relation_key(surface);
        if key.is_empty() {
            return Err(GraphError::UnknownRelation(surface.to_string()));
        }
        self.phrases
            .get(&key)
            .copied()
            .ok_or_else(|| GraphError::UnknownRelation(surface.to_string()))
    }
}

impl Default for RelationTable {
    fn default() -> Self {
        RelationTable::parse(DEFAULT_RELATION_TABLE).expect("shipped relation table is valid")
    }
}

/// Normalizes a relation phrase against the shipped synonym table.
pub fn normalize_relation(surface: &str) -> Result<RelationKind, GraphError> {
    thread_local! {
        static TABLE: RelationTable = RelationTable::default();
    }
    TABLE.with(|t| t.normalize(surface))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaceLabel {
    Anchor,
    Gazetteered,
    NonGazetteered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: PlaceLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_entry: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceNode {
    pub id: String,
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpatialEdge {
    pub locatum: String,
    pub relatum: String,
    pub kind: RelationKind,
    /// The relation phrase as it appeared in the input.
    pub source_label: String,
}

/// How the loader treats relation phrases missing from the synonym table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    /// Drop the edge and record a warning.
    Lenient,
}

#[derive(Debug, Deserialize)]
struct RawGraph {
    #[serde(default)]
    nodes: Vec<PlaceNode>,
    #[serde(default)]
    edges: Vec<RawEdge>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawEdge {
    locatum: String,
    relation: String,
    relatum: String,
}

#[derive(Debug, Serialize)]
struct RawGraphOut<'a> {
    nodes: Vec<&'a PlaceNode>,
    edges: Vec<RawEdge>,
}

/// Immutable after loading.
#[derive(Debug, Clone, Default)]
pub struct PlaceGraph {
    nodes: IndexMap<String, PlaceNode>,
    edges: Vec<SpatialEdge>,
    warnings: Vec<String>,
}

impl PlaceGraph {
    pub fn from_json(document: &str, mode: ParseMode) -> Result<Self, GraphError> {
        Self::from_json_with_table(document, mode, &RelationTable::default())
    }

    pub fn from_json_with_table(document: &str, mode: ParseMode, table: &RelationTable) -> Result<Self, GraphError> {
        let raw: RawGraph = serde_json::from_str(document).map_err(|e| GraphError::Malformed(e.to_string()))?;
        let mut graph = PlaceGraph::default();
        for node in raw.nodes {
            graph.add_node(node)?;
        }
        for edge in raw.edges {
            match table.normalize(&edge.relation) {
                Ok(kind) => graph.add_edge(SpatialEdge {
                    locatum: edge.locatum,
                    relatum: edge.relatum,
                    kind,
                    source_label: edge.relation,
                })?,
                Err(err) if mode == ParseMode::Lenient => {
                    log::warn!("dropping edge {} -> {}: {err}", edge.locatum, edge.relatum);
                    graph.warnings.push(format!(
                        "dropped edge {} -[{}]-> {}: unknown relation",
                        edge.locatum, edge.relation, edge.relatum
                    ));
                }
                Err(err) => return Err(err),
            }
        }
        Ok(graph)
    }

    pub fn add_node(&mut self, node: PlaceNode) -> Result<(), GraphError> {
        if node.references.is_empty() {
            return Err(GraphError::NoReferences(node.id));
        }
        if node.references.iter().any(|r| r.trim().is_empty()) {
            return Err(GraphError::EmptyReference(node.id));
        }
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateNode(node.id));
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: SpatialEdge) -> Result<(), GraphError> {
        for end in [&edge.locatum, &edge.relatum] {
            if !self.nodes.contains_key(end) {
                return Err(GraphError::DanglingEndpoint(end.clone()));
            }
        }
        if edge.locatum == edge.relatum {
            return Err(GraphError::SelfLoop(edge.locatum));
        }
        self.edges.push(edge);
        Ok(())
    }

    /// Serializes back to the input document schema (canonical relation labels).
    pub fn to_json(&self) -> String {
        let out = RawGraphOut {
            nodes: self.nodes.values().collect(),
            edges: self
                .edges
                .iter()
                .map(|e| RawEdge {
                    locatum: e.locatum.clone(),
                    relation: e.kind.label().to_string(),
                    relatum: e.relatum.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&out).expect("graph serialization cannot fail")
    }

    pub fn nodes(&self) -> impl Iterator<Item = &PlaceNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&PlaceNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn edges(&self) -> &[SpatialEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Warnings recorded during lenient loading.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn references_of(&self, place_id: &str) -> Result<&[String], GraphError> {
        self.nodes
            .get(place_id)
            .map(|n| n.references.as_slice())
            .ok_or_else(|| GraphError::UnknownPlace(place_id.to_string()))
    }

    /// Outgoing edges of `place_id` whose relatum is in `targets`, in insertion order.
    pub fn relationships_to<S>(&self, place_id: &str, targets: &S) -> Result<Vec<&SpatialEdge>, GraphError>
    where
        S: TargetSet + ?Sized,
    {
        if !self.contains(place_id) {
            return Err(GraphError::UnknownPlace(place_id.to_string()));
        }
        Ok(self
            .edges
            .iter()
            .filter(|e| e.locatum == place_id && targets.has(&e.relatum))
            .collect())
    }

    pub fn out_degree(&self, place_id: &str) -> usize {
        self.edges.iter().filter(|e| e.locatum == place_id).count()
    }
}

/// Membership test used by [`PlaceGraph::relationships_to`].
pub trait TargetSet {
    fn has(&self, id: &str) -> bool;
}

impl TargetSet for HashSet<String> {
    fn has(&self, id: &str) -> bool {
        self.contains(id)
    }
}

impl TargetSet for BTreeSet<String> {
    fn has(&self, id: &str) -> bool {
        self.contains(id)
    }
}

impl<V> TargetSet for HashMap<String, V> {
    fn has(&self, id: &str) -> bool {
        self.contains_key(id)
    }
}

impl<V> TargetSet for IndexMap<String, V> {
    fn has(&self, id: &str) -> bool {
        self.contains_key(id)
    }
}

impl TargetSet for [&str] {
    fn has(&self, id: &str) -> bool {
        self.contains(&id)
    }
}
