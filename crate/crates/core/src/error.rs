use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed place graph: {0}")]
    Malformed(String),
    #[error("edge endpoint `{0}` is not a declared node")]
    DanglingEndpoint(String),
    #[error("unknown relation phrase `{0}`")]
    UnknownRelation(String),
    #[error("node `{0}` has no place references")]
    NoReferences(String),
    #[error("node `{0}` has an empty place reference")]
    EmptyReference(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge from `{0}` to itself")]
    SelfLoop(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
}

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("malformed gazetteer: {0}")]
    Malformed(String),
    #[error("feature {index}: {reason}")]
    InvalidFeature { index: usize, reason: String },
    #[error("entry `{id}`: invalid geometry: {reason}")]
    InvalidGeometry { id: String, reason: String },
    #[error("duplicate entry id `{0}`")]
    DuplicateEntry(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("no search space for `{relation}` with a non-polygon relatum")]
    NoSearchSpace { relation: crate::graph::RelationKind },
    #[error("cannot derive an approximate location region from zero search spaces")]
    NoSearchSpaces,
    #[error("invalid near-buffer configuration: {0}")]
    InvalidBufferConfig(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("distance interval must be positive, got {0}")]
    InvalidInterval(f64),
    #[error("no distance interval satisfies the density threshold")]
    NoClusterSignal,
    #[error("no anchor candidates to disambiguate")]
    NoCandidates,
}

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("dictionary line {line}: {reason}")]
    Dictionary { line: usize, reason: String },
    #[error("gazetteer entry `{0}` has an empty name")]
    EmptyEntryName(String),
    #[error("place `{0}` has no relationships to geo-referenced places")]
    Unconstrained(String),
    #[error("no gazetteer candidates inside the approximate location region of `{0}`")]
    NoCandidates(String),
    #[error("invalid match weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("place ids do not match between results and annotations: {0:?}")]
    MismatchedIds(Vec<String>),
    #[error("place `{0}` is missing its ground-truth geometry")]
    MissingTruthGeometry(String),
    #[error("annotation for `{place}` is invalid: {reason}")]
    InvalidAnnotation { place: String, reason: String },
}
