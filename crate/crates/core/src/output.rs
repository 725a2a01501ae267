//! GeoJSON serialization of geo-referencing results and debug dumps.
//!
//! Results are written in the gazetteer's input coordinates: planar results are
//! mapped back to longitude/latitude when the gazetteer was geographic.

use geo::{Coord, Geometry, MapCoords};
use geojson::{Feature, FeatureCollection, GeometryValue, JsonObject};
use serde_json::{json, Value};

use crate::clustering::Cluster;
use crate::error::EvalError;
use crate::gazetteer::{Footprint, Projection};
use crate::pipeline::{GeoreferenceResult, Method};
use crate::spatial::Region;

fn unproject(c: Coord<f64>, projection: Option<&Projection>) -> Coord<f64> {
    projection.map_or(c, |p| p.inverse(c))
}

fn footprint_geometry(fp: &Footprint, projection: Option<&Projection>) -> geojson::Geometry {
    let fp = fp.map_coords(|c| unproject(c, projection));
    geojson::Geometry::new(GeometryValue::from(&fp.to_geometry()))
}

fn region_geometry(region: &Region, projection: Option<&Projection>) -> geojson::Geometry {
    let mp = region.polygons().map_coords(|c| unproject(c, projection));
    geojson::Geometry::new(GeometryValue::from(&mp))
}

fn feature(geometry: Option<geojson::Geometry>, properties: JsonObject) -> Feature {
    Feature {
        geometry,
        properties: Some(properties),
        ..Default::default()
    }
}

fn object(v: Value) -> JsonObject {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("json! object literal"),
    }
}

/// One feature per result. Geometry is the entry footprint for anchors and
/// best-matches, the ALR for ALR-only places and null for unresolved places.
pub fn results_to_geojson(results: &[GeoreferenceResult], projection: Option<&Projection>) -> FeatureCollection {
    let features = results
        .iter()
        .map(|r| {
            let geometry = match r.method {
                Method::Anchor | Method::BestMatch => r.footprint.as_ref().map(|f| footprint_geometry(f, projection)),
                Method::AlrOnly => r.alr.as_ref().map(|a| region_geometry(a, projection)),
                Method::Unresolved => None,
            };
            let mut props = object(json!({
                "place_id": r.place_id,
                "method": r.method.as_str(),
                "references": r.references,
                "threshold": r.threshold,
                "provenance": r.provenance,
            }));
            if let Some(s) = r.score {
                props.insert("score".into(), json!(s));
            }
            if let Some(e) = &r.entry_id {
                props.insert("matched_entry".into(), json!(e));
                if matches!(r.method, Method::Anchor | Method::BestMatch) {
                    props.insert("entry_id".into(), json!(e));
                }
            }
            if r.method == Method::BestMatch {
                if let Some(a) = &r.alr {
                    let g = serde_json::to_value(region_geometry(a, projection)).expect("geometry serializes");
                    props.insert("alr".into(), g);
                }
            }
            feature(geometry, props)
        })
        .collect::<Vec<_>>();
    FeatureCollection::new(features)
}

pub fn write_results(results: &[GeoreferenceResult], projection: Option<&Projection>) -> String {
    let mut s =
        serde_json::to_string_pretty(&results_to_geojson(results, projection)).expect("feature collection serializes");
    s.push('\n');
    s
}

fn malformed(msg: impl Into<String>) -> EvalError {
    EvalError::Malformed(msg.into())
}

fn to_geo(g: &geojson::Geometry) -> Result<Geometry<f64>, EvalError> {
    Geometry::<f64>::try_from(&g.value).map_err(|e| malformed(format!("geometry: {e}")))
}

fn to_footprint(g: &geojson::Geometry) -> Result<Footprint, EvalError> {
    match to_geo(g)? {
        Geometry::Point(p) => Ok(Footprint::Point(p)),
        Geometry::LineString(l) => Ok(Footprint::Polyline(l)),
        Geometry::Polygon(p) => Ok(Footprint::Polygon(p)),
        _ => Err(malformed("footprint must be a Point, LineString or Polygon")),
    }
}

fn to_region(g: &geojson::Geometry) -> Result<Region, EvalError> {
    match to_geo(g)? {
        Geometry::Polygon(p) => Ok(Region::from_polygon(p)),
        Geometry::MultiPolygon(mp) => Ok(Region::from_multi(mp)),
        _ => Err(malformed("region must be a Polygon or MultiPolygon")),
    }
}

/// Reads results written by [`write_results`]. Coordinates are kept as written.
pub fn read_results(document: &str) -> Result<Vec<GeoreferenceResult>, EvalError> {
    let fc: FeatureCollection = document
        .parse()
        .map_err(|e: geojson::Error| malformed(format!("results: {e}")))?;
    fc.features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let props = f
                .properties
                .as_ref()
                .ok_or_else(|| malformed(format!("feature {i}: missing properties")))?;
            let str_prop = |k: &str| props.get(k).and_then(Value::as_str).map(str::to_string);
            let place_id = str_prop("place_id").ok_or_else(|| malformed(format!("feature {i}: missing place_id")))?;
            let method: Method = str_prop("method")
                .ok_or_else(|| malformed(format!("{place_id}: missing method")))?
                .parse()
                .map_err(|e: String| malformed(format!("{place_id}: {e}")))?;
            let strings = |k: &str| -> Vec<String> {
                props
                    .get(k)
                    .and_then(Value::as_array)
                    .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
                    .unwrap_or_default()
            };
            let (mut footprint, mut alr) = (None, None);
            if let Some(g) = &f.geometry {
                match method {
                    Method::Anchor | Method::BestMatch => footprint = Some(to_footprint(g)?),
                    Method::AlrOnly => alr = Some(to_region(g)?),
                    Method::Unresolved => {}
                }
            }
            if let Some(v) = props.get("alr") {
                let g: geojson::Geometry =
                    serde_json::from_value(v.clone()).map_err(|e| malformed(format!("{place_id}: alr: {e}")))?;
                alr = Some(to_region(&g)?);
            }
            Ok(GeoreferenceResult {
                references: strings("references"),
                method,
                entry_id: str_prop("matched_entry").or_else(|| str_prop("entry_id")),
                footprint,
                alr,
                score: props.get("score").and_then(Value::as_f64),
                threshold: props.get("threshold").and_then(Value::as_f64).unwrap_or(f64::NAN),
                round: None,
                relata: Vec::new(),
                provenance: strings("provenance"),
                score_table: Vec::new(),
                place_id,
            })
        })
        .collect()
}

/// One feature per cluster: the members' bounding box with rank and member ids.
pub fn clusters_to_geojson(clusters: &[Cluster], projection: Option<&Projection>) -> FeatureCollection {
    let features = clusters
        .iter()
        .map(|c| {
            let bbox = Region::from_rect(c.bbox);
            let geometry = if c.bbox.width() > 0.0 && c.bbox.height() > 0.0 {
                region_geometry(&bbox, projection)
            } else {
                let pts: Vec<geo::Point<f64>> = c.members.iter().map(|m| m.point).collect();
                let mp = geo::MultiPoint(pts).map_coords(|cd| unproject(cd, projection));
                geojson::Geometry::new(GeometryValue::from(&mp))
            };
            let props = object(json!({
                "rank": c.rank,
                "size": c.members.len(),
                "members": c.members.iter().map(|m| json!({"entry_id": m.id, "owners": m.owners})).collect::<Vec<_>>(),
            }));
            feature(Some(geometry), props)
        })
        .collect::<Vec<_>>();
    FeatureCollection::new(features)
}

/// A single-feature collection holding one place's ALR.
pub fn alr_to_geojson(result: &GeoreferenceResult, projection: Option<&Projection>) -> Option<String> {
    let alr = result.alr.as_ref()?;
    let props = object(json!({"place_id": result.place_id, "area_m2": alr.area()}));
    let fc = FeatureCollection::new([feature(Some(region_geometry(alr, projection)), props)]);
    Some(serde_json::to_string_pretty(&fc).expect("feature collection serializes"))
}
