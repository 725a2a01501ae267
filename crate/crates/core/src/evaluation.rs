//! Evaluation metrics against manual annotations: anchor precision, ALR
//! precision, precision by similarity and the gazetteered/non-gazetteered
//! recall trade-off across thresholds.

use std::collections::BTreeSet;

use geo::Point;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::gazetteer::{Footprint, Gazetteer};
use crate::graph::PlaceLabel;
use crate::pipeline::{GeoreferenceResult, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedPlace {
    pub label: PlaceLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_entry: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_point: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    places: IndexMap<String, AnnotatedPlace>,
}

#[derive(Deserialize)]
struct RawAnnotation {
    #[serde(alias = "place_id")]
    id: String,
    #[serde(flatten)]
    place: AnnotatedPlace,
}

#[derive(Deserialize)]
struct RawAnnotations {
    places: Vec<RawAnnotation>,
}

impl AnnotationSet {
    /// Parses `{"places": [{"id", "label", "truth_entry"?, "truth_point"?: [x, y]}]}`.
    pub fn from_json(document: &str) -> Result<Self, EvalError> {
        let raw: RawAnnotations =
            serde_json::from_str(document).map_err(|e| EvalError::Malformed(format!("annotations: {e}")))?;
        let mut set = AnnotationSet::default();
        for r in raw.places {
            set.insert(r.id, r.place)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, id: String, place: AnnotatedPlace) -> Result<(), EvalError> {
        let invalid = |reason: &str| EvalError::InvalidAnnotation {
            place: id.clone(),
            reason: reason.to_string(),
        };
        match place.label {
            PlaceLabel::Anchor | PlaceLabel::Gazetteered if place.truth_entry.is_none() => {
                return Err(invalid("anchor and gazetteered places need truth_entry"));
            }
            PlaceLabel::NonGazetteered if place.truth_point.is_none() => {
                return Err(invalid("non-gazetteered places need truth_point"));
            }
            _ => {}
        }
        if self.places.contains_key(&id) {
            return Err(invalid("duplicate annotation"));
        }
        self.places.insert(id, place);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&AnnotatedPlace> {
        self.places.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &AnnotatedPlace)> {
        self.places.iter()
    }

    pub fn len(&self) -> usize {
        self.places.len()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }
}

/// Place ids present on only one side, sorted.
pub fn mismatched_ids(results: &[GeoreferenceResult], annotations: &AnnotationSet) -> Vec<String> {
    let r: BTreeSet<&str> = results.iter().map(|r| r.place_id.as_str()).collect();
    let a: BTreeSet<&str> = annotations.places.keys().map(String::as_str).collect();
    r.symmetric_difference(&a).map(|s| s.to_string()).collect()
}

pub fn check_ids(results: &[GeoreferenceResult], annotations: &AnnotationSet) -> Result<(), EvalError> {
    let bad = mismatched_ids(results, annotations);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(EvalError::MismatchedIds(bad))
    }
}

/// `correct / total`; `value` is `None` for an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ratio {
    pub correct: usize,
    pub total: usize,
    pub value: Option<f64>,
}

impl Ratio {
    pub fn new(correct: usize, total: usize) -> Self {
        Ratio {
            correct,
            total,
            value: (total > 0).then(|| correct as f64 / total as f64),
        }
    }
}

fn labelled<'a>(
    results: &'a [GeoreferenceResult],
    annotations: &'a AnnotationSet,
) -> impl Iterator<Item = (&'a GeoreferenceResult, &'a AnnotatedPlace)> {
    results
        .iter()
        .filter_map(move |r| annotations.get(&r.place_id).map(|a| (r, a)))
}

fn assigned_correctly(r: &GeoreferenceResult, a: &AnnotatedPlace) -> bool {
    r.entry_id.is_some() && r.entry_id == a.truth_entry
}

/// Annotated anchors geo-referenced as anchors with the right entry, over all annotated anchors.
pub fn precision_anchors(results: &[GeoreferenceResult], annotations: &AnnotationSet) -> Ratio {
    let total = annotations
        .iter()
        .filter(|(_, a)| a.label == PlaceLabel::Anchor)
        .count();
    let correct = labelled(results, annotations)
        .filter(|(r, a)| a.label == PlaceLabel::Anchor && r.method == Method::Anchor && assigned_correctly(r, a))
        .count();
    Ratio::new(correct, total)
}

/// Best-matched places whose entry equals the annotated truth.
pub fn best_match_precision(results: &[GeoreferenceResult], annotations: &AnnotationSet) -> Ratio {
    let matched: Vec<_> = labelled(results, annotations)
        .filter(|(r, _)| r.method == Method::BestMatch)
        .collect();
    let correct = matched.iter().filter(|(r, a)| assigned_correctly(r, a)).count();
    Ratio::new(correct, matched.len())
}

fn in_subset(r: &GeoreferenceResult, a: &AnnotatedPlace, subset: PlaceLabel) -> bool {
    match subset {
        // Anchors that were not anchored (ambiguous or unclustered) went
        // through best-matching and are judged with the gazetteered places.
        PlaceLabel::Gazetteered => {
            a.label == PlaceLabel::Gazetteered || (a.label == PlaceLabel::Anchor && r.method != Method::Anchor)
        }
        label => a.label == label,
    }
}

fn truth_geometry(place: &str, a: &AnnotatedPlace, gazetteer: Option<&Gazetteer>) -> Result<Footprint, EvalError> {
    if let Some([x, y]) = a.truth_point {
        return Ok(Footprint::Point(Point::new(x, y)));
    }
    a.truth_entry
        .as_deref()
        .and_then(|id| gazetteer?.entry(id))
        .map(|e| e.footprint.clone())
        .ok_or_else(|| EvalError::MissingTruthGeometry(place.to_string()))
}

/// Fraction of the subset whose ALR covers the truth geometry (boundary counts
/// as covered). Truth is the annotated point if present, otherwise the truth
/// entry's footprint looked up in `gazetteer`. Places without an ALR count as
/// not covered.
pub fn alr_precision(
    results: &[GeoreferenceResult],
    annotations: &AnnotationSet,
    subset: PlaceLabel,
    gazetteer: Option<&Gazetteer>,
) -> Result<Ratio, EvalError> {
    let (mut correct, mut total) = (0, 0);
    for (r, a) in labelled(results, annotations) {
        if !in_subset(r, a, subset) {
            continue;
        }
        total += 1;
        if let Some(alr) = &r.alr {
            if alr.covers(&truth_geometry(&r.place_id, a, gazetteer)?) {
                correct += 1;
            }
        }
    }
    Ok(Ratio::new(correct, total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub similarity: f64,
    pub precision: f64,
    pub count: usize,
}

pub fn similarity_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Precision of best-match decisions with raw score `>= s` for `s` in
/// 0.0, 0.1, ..., 1.0, regardless of the threshold applied. Empty buckets are omitted.
pub fn precision_by_similarity(results: &[GeoreferenceResult], annotations: &AnnotationSet) -> Vec<CurvePoint> {
    let matches: Vec<(f64, bool)> = labelled(results, annotations)
        .filter(|(r, _)| r.method != Method::Anchor && r.entry_id.is_some())
        .filter_map(|(r, a)| r.score.map(|s| (s, assigned_correctly(r, a))))
        .collect();
    similarity_grid()
        .into_iter()
        .filter_map(|s| {
            let bucket: Vec<bool> = matches
                .iter()
                .filter(|(score, _)| *score >= s)
                .map(|(_, ok)| *ok)
                .collect();
            (!bucket.is_empty()).then(|| CurvePoint {
                similarity: s,
                precision: bucket.iter().filter(|ok| **ok).count() as f64 / bucket.len() as f64,
                count: bucket.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub threshold: f64,
    pub recall_gazetteered: Ratio,
    pub recall_non_gazetteered: Ratio,
}

fn predicted_gazetteered(r: &GeoreferenceResult, threshold: f64) -> bool {
    r.method == Method::Anchor || (r.entry_id.is_some() && r.score.is_some_and(|s| s >= threshold))
}

/// Per threshold, the share of annotated gazetteered places classified as
/// gazetteered (raw score at or above the threshold) and of non-gazetteered
/// places classified as non-gazetteered. Places never scored count as
/// non-gazetteered.
pub fn recall_tradeoff(
    results: &[GeoreferenceResult],
    annotations: &AnnotationSet,
    thresholds: &[f64],
) -> Vec<TradeoffRow> {
    let pairs: Vec<_> = labelled(results, annotations).collect();
    let n_gaz = pairs.iter().filter(|(_, a)| a.label == PlaceLabel::Gazetteered).count();
    let n_non = pairs
        .iter()
        .filter(|(_, a)| a.label == PlaceLabel::NonGazetteered)
        .count();
    thresholds
        .iter()
        .map(|&t| {
            let gaz_ok = pairs
                .iter()
                .filter(|(r, a)| a.label == PlaceLabel::Gazetteered && predicted_gazetteered(r, t))
                .count();
            let non_ok = pairs
                .iter()
                .filter(|(r, a)| a.label == PlaceLabel::NonGazetteered && !predicted_gazetteered(r, t))
                .count();
            TradeoffRow {
                threshold: t,
                recall_gazetteered: Ratio::new(gaz_ok, n_gaz),
                recall_non_gazetteered: Ratio::new(non_ok, n_non),
            }
        })
        .collect()
}

/// `start, start + step, ...` up to `end` inclusive (with rounding slack).
pub fn threshold_range(start: f64, end: f64, step: f64) -> Option<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && end.is_finite() && end >= start) {
        return None;
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Some((0..=n).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub anchor_precision: Ratio,
    pub best_match_precision: Ratio,
    pub alr_precision_gazetteered: Ratio,
    pub alr_precision_non_gazetteered: Ratio,
    pub precision_by_similarity: Vec<CurvePoint>,
    pub recall_tradeoff: Vec<TradeoffRow>,
}

impl MetricsReport {
    pub fn similarity_csv(&self) -> String {
        let mut s = String::from("similarity,precision,count\n");
        for p in &self.precision_by_similarity {
            s.push_str(&format!("{:.1},{},{}\n", p.similarity, p.precision, p.count));
        }
        s
    }

    pub fn tradeoff_csv(&self) -> String {
        let fmt = |r: &Ratio| r.value.map_or("NA".to_string(), |v| v.to_string());
        let mut s = String::from("threshold,recall_gazetteered,recall_non_gazetteered\n");
        for row in &self.recall_tradeoff {
            s.push_str(&format!(
                "{},{},{}\n",
                (row.threshold * 1e9).round() / 1e9,
                fmt(&row.recall_gazetteered),
                fmt(&row.recall_non_gazetteered)
            ));
        }
        s
    }
}

/// All metrics. Result and annotation ids must match exactly.
pub fn evaluate(
    results: &[GeoreferenceResult],
    annotations: &AnnotationSet,
    gazetteer: Option<&Gazetteer>,
    thresholds: &[f64],
) -> Result<MetricsReport, EvalError> {
    check_ids(results, annotations)?;
    Ok(MetricsReport {
        anchor_precision: precision_anchors(results, annotations),
        best_match_precision: best_match_precision(results, annotations),
        alr_precision_gazetteered: alr_precision(results, annotations, PlaceLabel::Gazetteered, gazetteer)?,
        alr_precision_non_gazetteered: alr_precision(results, annotations, PlaceLabel::NonGazetteered, gazetteer)?,
        precision_by_similarity: precision_by_similarity(results, annotations),
        recall_tradeoff: recall_tradeoff(results, annotations, thresholds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::Region;
    use geo::{Coord, Rect};

    fn res(id: &str, method: Method, entry: Option<&str>, score: Option<f64>) -> GeoreferenceResult {
        GeoreferenceResult {
            place_id: id.into(),
            references: vec![],
            method,
            entry_id: entry.map(str::to_string),
            footprint: None,
            alr: None,
            score,
            threshold: 0.7,
            round: None,
            relata: vec![],
            provenance: vec![],
            score_table: vec![],
        }
    }

    fn ann(label: PlaceLabel, entry: Option<&str>, point: Option<[f64; 2]>) -> AnnotatedPlace {
        AnnotatedPlace {
            label,
            truth_entry: entry.map(str::to_string),
            truth_point: point,
        }
    }

    #[test]
    fn anchor_precision_counts() {
        let mut set = AnnotationSet::default();
        let mut results = Vec::new();
        for i in 0..15 {
            let id = format!("p{i}");
            set.insert(id.clone(), ann(PlaceLabel::Anchor, Some("t"), None))
                .unwrap();
            let entry = if i == 0 { "wrong" } else { "t" };
            results.push(res(&id, Method::Anchor, Some(entry), None));
        }
        let r = precision_anchors(&results, &set);
        assert_eq!((r.correct, r.total), (14, 15));
        assert!((r.value.unwrap() - 0.9333).abs() < 1e-4);
        assert_eq!(Ratio::new(0, 0).value, None);
    }

    #[test]
    fn annotation_parsing_and_validation() {
        let doc = r#"{"places":[
            {"id":"a","label":"anchor","truth_entry":"e1"},
            {"place_id":"f","label":"non-gazetteered","truth_point":[1.0,2.0]}]}"#;
        let set = AnnotationSet::from_json(doc).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.get("f").unwrap().truth_point, Some([1.0, 2.0]));
        let missing = r#"{"places":[{"id":"a","label":"gazetteered"}]}"#;
        assert!(matches!(
            AnnotationSet::from_json(missing),
            Err(EvalError::InvalidAnnotation { .. })
        ));
        let missing_pt = r#"{"places":[{"id":"a","label":"non-gazetteered"}]}"#;
        assert!(AnnotationSet::from_json(missing_pt).is_err());
    }

    #[test]
    fn mismatched_ids_are_listed() {
        let mut set = AnnotationSet::default();
        set.insert("a".into(), ann(PlaceLabel::Anchor, Some("e"), None))
            .unwrap();
        set.insert("b".into(), ann(PlaceLabel::Anchor, Some("e"), None))
            .unwrap();
        let results = vec![
            res("a", Method::Anchor, Some("e"), None),
            res("z", Method::Unresolved, None, None),
        ];
        assert!(matches!(check_ids(&results, &set), Err(EvalError::MismatchedIds(ref v)) if v == &["b", "z"]));
    }

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
        Region::from_rect(Rect::new(Coord { x: x0, y: y0 }, Coord { x: x1, y: y1 }))
    }

    #[test]
    fn alr_precision_twenty_places() {
        let mut set = AnnotationSet::default();
        let mut results = Vec::new();
        for i in 0..20 {
            let id = format!("n{i:02}");
            set.insert(id.clone(), ann(PlaceLabel::NonGazetteered, None, Some([5.0, 5.0])))
                .unwrap();
            let mut r = res(&id, Method::AlrOnly, None, None);
            // four ALRs miss the truth point; one touches it only at its boundary
            r.alr = Some(match i {
                0..=3 => square(20.0, 20.0, 30.0, 30.0),
                4 => square(5.0, 0.0, 10.0, 10.0),
                _ => square(0.0, 0.0, 10.0, 10.0),
            });
            results.push(r);
        }
        let r = alr_precision(&results, &set, PlaceLabel::NonGazetteered, None).unwrap();
        assert_eq!((r.correct, r.total), (16, 20));
        assert_eq!(r.value, Some(0.8));
    }

    #[test]
    fn alr_precision_needs_truth() {
        let mut set = AnnotationSet::default();
        set.insert("g".into(), ann(PlaceLabel::Gazetteered, Some("e9"), None))
            .unwrap();
        let mut r = res("g", Method::BestMatch, Some("e9"), Some(0.9));
        r.alr = Some(square(0.0, 0.0, 1.0, 1.0));
        assert!(matches!(
            alr_precision(&[r.clone()], &set, PlaceLabel::Gazetteered, None),
            Err(EvalError::MissingTruthGeometry(_))
        ));
        let gaz = Gazetteer::from_entries(vec![crate::gazetteer::GazetteerEntry::new(
            "e9",
            "Thing",
            Footprint::point(0.5, 0.5),
        )])
        .unwrap();
        let ok = alr_precision(&[r], &set, PlaceLabel::Gazetteered, Some(&gaz)).unwrap();
        assert_eq!(ok.value, Some(1.0));
    }

    #[test]
    fn similarity_curve_matches_recount() {
        let mut set = AnnotationSet::default();
        let mut results = Vec::new();
        let scores = [0.15, 0.35, 0.55, 0.72, 0.81, 0.9, 0.95, 0.62, 0.44, 0.99];
        for (i, s) in scores.iter().enumerate() {
            let id = format!("g{i}");
            set.insert(id.clone(), ann(PlaceLabel::Gazetteered, Some("t"), None))
                .unwrap();
            let entry = if i % 3 == 0 { "x" } else { "t" };
            results.push(res(&id, Method::BestMatch, Some(entry), Some(*s)));
        }
        let curve = precision_by_similarity(&results, &set);
        for p in &curve {
            let bucket: Vec<usize> = (0..scores.len()).filter(|i| scores[*i] >= p.similarity).collect();
            let ok = bucket.iter().filter(|i| *i % 3 != 0).count();
            assert_eq!(p.count, bucket.len());
            assert_eq!(p.precision, ok as f64 / bucket.len() as f64);
        }
        assert_eq!(curve.len(), 10, "the s = 1.0 bucket is empty and omitted");
    }

    #[test]
    fn tradeoff_extremes() {
        let mut set = AnnotationSet::default();
        set.insert("g".into(), ann(PlaceLabel::Gazetteered, Some("t"), None))
            .unwrap();
        set.insert("n".into(), ann(PlaceLabel::NonGazetteered, None, Some([0.0, 0.0])))
            .unwrap();
        set.insert("u".into(), ann(PlaceLabel::NonGazetteered, None, Some([0.0, 0.0])))
            .unwrap();
        let results = vec![
            res("g", Method::BestMatch, Some("t"), Some(0.8)),
            res("n", Method::AlrOnly, Some("x"), Some(0.5)),
            res("u", Method::Unresolved, None, None),
        ];
        let rows = recall_tradeoff(&results, &set, &[0.0, 1.0 + 1e-9]);
        assert_eq!(rows[0].recall_gazetteered.value, Some(1.0));
        assert_eq!(rows[1].recall_non_gazetteered.value, Some(1.0));
        assert_eq!(rows[0].recall_non_gazetteered.value, Some(0.5));
    }

    #[test]
    fn threshold_ranges() {
        assert_eq!(threshold_range(0.0, 1.0, 0.1).unwrap().len(), 11);
        assert_eq!(threshold_range(0.5, 0.5, 0.1).unwrap(), [0.5]);
        assert!(threshold_range(0.0, 1.0, 0.0).is_none());
        assert!(threshold_range(1.0, 0.0, 0.1).is_none());
    }
}
