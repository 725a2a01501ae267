//! Geo-referencing of place graphs extracted from natural-language place
//! descriptions.
//!
//! Places that match a gazetteer entry by name become anchors. Anchors are
//! disambiguated by spatial clustering, then every other place is located by
//! intersecting the search spaces implied by its spatial relations and
//! matching gazetteer entries inside the result.

pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod gazetteer;
pub mod graph;
pub mod matching;
pub mod output;
pub mod pipeline;
pub mod spatial;

pub use error::{ClusterError, EvalError, GazetteerError, GraphError, MatchError, SpatialError};
pub use gazetteer::{Footprint, Gazetteer, GazetteerEntry};
pub use graph::{PlaceGraph, PlaceNode, RelationFamily, RelationKind, SpatialEdge};
