//! Three-stage geo-referencing of a place graph.
//!
//! 1. Places with a reference that names a gazetteer entry are anchors; their
//!    candidate entries are disambiguated by clustering.
//! 2. Places related to geo-referenced places are best-matched inside their
//!    approximate location region, level by level. Matches scoring at least the
//!    threshold become relata for the next level.
//! 3. Places left without a confident match keep their ALR as footprint;
//!    places never reached are unresolved.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{disambiguate_anchors, AnchorOutcome, Disambiguation, DEFAULT_DELTA_D};
use crate::error::{ClusterError, MatchError};
use crate::gazetteer::{Footprint, Gazetteer, GazetteerEntry};
use crate::graph::{PlaceGraph, PlaceNode};
use crate::matching::{approximate_location, rank_candidates, Constraint, MatchWeights, ScoreRow, SemanticDictionary};
use crate::spatial::{NearBufferConfig, Region, SpatialContext};

pub const DEFAULT_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub delta_d: f64,
    pub near: NearBufferConfig,
    pub weights: MatchWeights,
    pub threshold: f64,
    /// Confident best-matches constrain places processed after them.
    pub promotion: bool,
    pub strict: bool,
    pub dictionary: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            delta_d: DEFAULT_DELTA_D,
            near: NearBufferConfig::default(),
            weights: MatchWeights::default(),
            threshold: DEFAULT_THRESHOLD,
            promotion: true,
            strict: true,
            dictionary: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("threshold must be in [0, 1], got {0}")]
    Threshold(f64),
    #[error("delta_d must be positive, got {0}")]
    DeltaD(f64),
    #[error(transparent)]
    Near(#[from] crate::error::SpatialError),
    #[error(transparent)]
    Weights(#[from] MatchError),
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Threshold(self.threshold));
        }
        if !(self.delta_d > 0.0 && self.delta_d.is_finite()) {
            return Err(ConfigError::DeltaD(self.delta_d));
        }
        self.near.validate()?;
        self.weights.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Anchor,
    BestMatch,
    AlrOnly,
    Unresolved,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Anchor => "anchor",
            Method::BestMatch => "best_match",
            Method::AlrOnly => "alr_only",
            Method::Unresolved => "unresolved",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "anchor" => Ok(Method::Anchor),
            "best_match" => Ok(Method::BestMatch),
            "alr_only" => Ok(Method::AlrOnly),
            "unresolved" => Ok(Method::Unresolved),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoreferenceResult {
    pub place_id: String,
    pub references: Vec<String>,
    pub method: Method,
    /// Assigned entry for anchors; best candidate for best-matched places,
    /// including ones that fell below the threshold.
    pub entry_id: Option<String>,
    /// Footprint of `entry_id`.
    pub footprint: Option<Footprint>,
    pub alr: Option<Region>,
    /// Raw best-match score, kept even when below the threshold.
    pub score: Option<f64>,
    pub threshold: f64,
    /// Stage-2 level in which the place was scored (0-based).
    pub round: Option<usize>,
    /// Geo-referenced places used as relata.
    pub relata: Vec<String>,
    pub provenance: Vec<String>,
    pub score_table: Vec<ScoreRow>,
}

impl GeoreferenceResult {
    fn new(node: &PlaceNode, method: Method, threshold: f64) -> Self {
        GeoreferenceResult {
            place_id: node.id.clone(),
            references: node.references.clone(),
            method,
            entry_id: None,
            footprint: None,
            alr: None,
            score: None,
            threshold,
            round: None,
            relata: Vec::new(),
            provenance: Vec::new(),
            score_table: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeoreferenceRun {
    /// One result per place, in graph order.
    pub results: Vec<GeoreferenceResult>,
    pub disambiguation: Option<Disambiguation>,
}

impl GeoreferenceRun {
    pub fn anchor_count(&self) -> usize {
        self.results.iter().filter(|r| r.method == Method::Anchor).count()
    }

    pub fn result(&self, place_id: &str) -> Option<&GeoreferenceResult> {
        self.results.iter().find(|r| r.place_id == place_id)
    }
}

/// Candidate entries of every place with at least one reference naming a
/// gazetteer entry, in graph order. Entries are unique and ordered by id.
pub fn identify_anchors<'g>(
    graph: &PlaceGraph,
    gazetteer: &'g Gazetteer,
) -> indexmap::IndexMap<String, Vec<&'g GazetteerEntry>> {
    graph
        .nodes()
        .filter_map(|node| {
            let hits: BTreeMap<&str, &GazetteerEntry> = node
                .references
                .iter()
                .flat_map(|r| gazetteer.lookup_exact(r))
                .map(|e| (e.entry_id.as_str(), e))
                .collect();
            (!hits.is_empty()).then(|| (node.id.clone(), hits.into_values().collect()))
        })
        .collect()
}

/// A place whose footprint is fixed and can serve as a relatum.
#[derive(Debug, Clone)]
struct Fixed {
    footprint: Footprint,
    context: SpatialContext,
}

fn fmt_score(x: f64) -> String {
    format!("{x:.4}")
}

/// Outcome of scoring one frontier place.
struct Scored {
    result: GeoreferenceResult,
    context: SpatialContext,
}

fn score_place(
    node: &PlaceNode,
    graph: &PlaceGraph,
    fixed: &HashMap<String, Fixed>,
    gazetteer: &Gazetteer,
    dict: &SemanticDictionary,
    cfg: &PipelineConfig,
    round: usize,
) -> Scored {
    let mut res = GeoreferenceResult::new(node, Method::AlrOnly, cfg.threshold);
    res.round = Some(round);
    let edges = graph
        .relationships_to(&node.id, fixed)
        .expect("node comes from the graph");
    let constraints: Vec<Constraint<'_>> = edges
        .iter()
        .map(|e| Constraint {
            relatum_id: &e.relatum,
            kind: e.kind,
            relatum: &fixed[&e.relatum].footprint,
            frame: None,
        })
        .collect();
    let mut context = fixed[&edges[0].relatum].context;
    for e in &edges[1..] {
        context = context.merge(&fixed[&e.relatum].context);
    }
    for e in &edges {
        if !res.relata.contains(&e.relatum) {
            res.relata.push(e.relatum.clone());
        }
    }
    res.provenance.push(format!(
        "round {round}: {} relation(s) to geo-referenced places: {}",
        edges.len(),
        edges
            .iter()
            .map(|e| format!("{} {}", e.kind, e.relatum))
            .collect::<Vec<_>>()
            .join(", ")
    ));

    let (alr, spaces) = match approximate_location(&node.id, &constraints, &context, &cfg.near) {
        Ok(v) => v,
        Err(e) => {
            res.method = Method::Unresolved;
            res.provenance.push(format!("no location region: {e}"));
            return Scored { result: res, context };
        }
    };
    if !alr.relaxed.is_empty() {
        let dropped: Vec<String> = alr
            .relaxed
            .iter()
            .map(|i| format!("{} {}", spaces[*i].relation, spaces[*i].relatum_id))
            .collect();
        res.provenance
            .push(format!("relaxed constraint(s): {}", dropped.join(", ")));
    }
    res.provenance.push(format!(
        "ALR area {:.1} m2 from {} search space(s){}",
        alr.region.area(),
        spaces.len(),
        if alr.low_confidence { ", low confidence" } else { "" }
    ));
    if alr.region.is_empty() {
        res.method = Method::Unresolved;
        res.provenance.push("empty location region".into());
        return Scored { result: res, context };
    }

    let candidates = gazetteer.query_region(&alr.region);
    res.provenance.push(format!("candidates in ALR: {}", candidates.len()));
    res.alr = Some(alr.region);
    match rank_candidates(node, &candidates, &constraints, &context, &cfg.near, &cfg.weights, dict) {
        Ok(m) => {
            res.provenance.push(format!(
                "best candidate {} score {} (reference {}, spatial {})",
                m.entry_id,
                fmt_score(m.score),
                fmt_score(m.ref_sim),
                fmt_score(m.spat_sim)
            ));
            res.footprint = gazetteer.entry(&m.entry_id).map(|e| e.footprint.clone());
            res.entry_id = Some(m.entry_id);
            res.score = Some(m.score);
            res.score_table = m.table;
            apply_threshold(&mut res, cfg.threshold);
        }
        Err(MatchError::NoCandidates(_)) => {
            res.provenance.push("no candidates: non-gazetteered".into());
        }
        Err(e) => {
            res.provenance.push(format!("matching failed: {e}"));
        }
    }
    Scored { result: res, context }
}

fn apply_threshold(res: &mut GeoreferenceResult, threshold: f64) {
    res.threshold = threshold;
    if !matches!(res.method, Method::BestMatch | Method::AlrOnly) {
        return;
    }
    match res.score {
        Some(s) if s >= threshold && res.entry_id.is_some() => res.method = Method::BestMatch,
        _ => res.method = Method::AlrOnly,
    }
}

/// Re-applies the similarity threshold to best-matched places.
pub fn classify(results: &mut [GeoreferenceResult], threshold: f64) {
    for r in results {
        apply_threshold(r, threshold);
    }
}

/// Runs all three stages. A graph without anchors yields only unresolved results.
pub fn georeference(
    graph: &PlaceGraph,
    gazetteer: &Gazetteer,
    dict: &SemanticDictionary,
    cfg: &PipelineConfig,
) -> Result<GeoreferenceRun, ClusterError> {
    let mut results: HashMap<String, GeoreferenceResult> = HashMap::new();
    let mut fixed: HashMap<String, Fixed> = HashMap::new();

    let candidates = identify_anchors(graph, gazetteer);
    let disambiguation = if candidates.is_empty() {
        log::warn!("no place reference matches a gazetteer name; nothing can be anchored");
        None
    } else {
        Some(disambiguate_anchors(&candidates, cfg.delta_d)?)
    };

    let mut deferred: HashMap<String, Vec<String>> = HashMap::new();
    if let Some(d) = &disambiguation {
        for (place, outcome) in &d.outcomes {
            let node = graph.node(place).expect("anchor ids come from the graph");
            let hits: Vec<&str> = candidates[place].iter().map(|e| e.entry_id.as_str()).collect();
            let lookup = format!("anchor lookup: {} hit(s) [{}]", hits.len(), hits.join(", "));
            match outcome {
                AnchorOutcome::Assigned { entry_id, cluster_rank } => {
                    let entry = gazetteer.entry(entry_id).expect("candidate comes from gazetteer");
                    let mut res = GeoreferenceResult::new(node, Method::Anchor, cfg.threshold);
                    res.provenance.push(lookup);
                    let context = match cluster_rank {
                        Some(rank) => {
                            let cluster = &d.clusters[*rank];
                            res.provenance.push(format!(
                                "assigned {entry_id} from cluster rank {rank} ({} members)",
                                cluster.members.len()
                            ));
                            cluster.context()
                        }
                        None => {
                            res.provenance.push(format!("assigned {entry_id} (single candidate)"));
                            SpatialContext::new(entry.footprint.bounding_rect())
                        }
                    };
                    if d.fallback {
                        res.provenance
                            .push("no density peak: all candidates in one cluster".into());
                    }
                    res.entry_id = Some(entry_id.clone());
                    res.footprint = Some(entry.footprint.clone());
                    fixed.insert(
                        place.clone(),
                        Fixed {
                            footprint: entry.footprint.clone(),
                            context,
                        },
                    );
                    results.insert(place.clone(), res);
                }
                AnchorOutcome::Ambiguous {
                    entry_ids,
                    cluster_rank,
                } => {
                    deferred.entry(place.clone()).or_default().extend([
                        lookup,
                        format!(
                            "ambiguous anchor: {} entries in cluster rank {cluster_rank} [{}]; deferred to best-matching",
                            entry_ids.len(),
                            entry_ids.join(", ")
                        ),
                    ]);
                }
                AnchorOutcome::Unclustered => {
                    deferred.entry(place.clone()).or_default().extend([
                        lookup,
                        "no candidate entry in any cluster; deferred to best-matching".to_string(),
                    ]);
                }
            }
        }
    }

    let mut remaining: Vec<&PlaceNode> = graph.nodes().filter(|n| !results.contains_key(&n.id)).collect();
    let mut round = 0;
    loop {
        let mut frontier: Vec<(usize, &PlaceNode)> = remaining
            .iter()
            .map(|n| {
                let k = graph
                    .relationships_to(&n.id, &fixed)
                    .expect("node comes from the graph")
                    .len();
                (k, *n)
            })
            .filter(|(k, _)| *k > 0)
            .collect();
        if frontier.is_empty() {
            break;
        }
        // Stable: ties keep graph order.
        frontier.sort_by_key(|f| std::cmp::Reverse(f.0));
        let scored: Vec<Scored> = frontier
            .par_iter()
            .map(|(_, n)| score_place(n, graph, &fixed, gazetteer, dict, cfg, round))
            .collect();

        for Scored { mut result, context } in scored {
            if let Some(prior) = deferred.remove(&result.place_id) {
                result.provenance.splice(0..0, prior);
            }
            if cfg.promotion && result.method == Method::BestMatch {
                if let Some(fp) = &result.footprint {
                    result.provenance.push("promoted: constrains later places".into());
                    fixed.insert(
                        result.place_id.clone(),
                        Fixed {
                            footprint: fp.clone(),
                            context,
                        },
                    );
                }
            }
            results.insert(result.place_id.clone(), result);
        }
        remaining.retain(|n| !results.contains_key(&n.id));
        round += 1;
        if !cfg.promotion {
            break;
        }
    }

    for n in remaining {
        let mut res = GeoreferenceResult::new(n, Method::Unresolved, cfg.threshold);
        if let Some(prior) = deferred.remove(&n.id) {
            res.provenance.extend(prior);
        }
        res.provenance.push("no relation to any geo-referenced place".into());
        results.insert(n.id.clone(), res);
    }

    let results = graph
        .nodes()
        .map(|n| results.remove(&n.id).expect("every place has a result"))
        .collect();
    Ok(GeoreferenceRun {
        results,
        disambiguation,
    })
}
