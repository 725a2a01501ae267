//! File-backed gazetteer: entries with footprints, normalized exact-name lookup
//! and region queries through an R-tree over footprint envelopes.

use std::collections::{BTreeMap, HashMap};

use geo::line_measures::{Euclidean, InterpolatableLine};
use geo::{
    Area, BoundingRect, Centroid, Coord, Geometry, Intersects, LineString, MapCoords, Point, Polygon, Rect, Validation,
};
use rstar::primitives::{GeomWithData, Rectangle};
use rstar::{RTree, AABB};
use serde_json::Value;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::GazetteerError;
use crate::spatial::Region;

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Geometry of a gazetteer entry in planar meters.
#[derive(Debug, Clone, PartialEq)]
pub enum Footprint {
    Point(Point<f64>),
    Polyline(LineString<f64>),
    Polygon(Polygon<f64>),
}

impl Footprint {
    pub fn point(x: f64, y: f64) -> Self {
        Footprint::Point(Point::new(x, y))
    }

    /// Axis-aligned rectangle polygon, handy for fixtures.
    pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Footprint::Polygon(Rect::new(Coord { x: min_x, y: min_y }, Coord { x: max_x, y: max_y }).to_polygon())
    }

    /// Point itself, area-weighted centroid of a polygon, arc-length midpoint of a polyline.
    pub fn centroid(&self) -> Point<f64> {
        match self {
            Footprint::Point(p) => *p,
            Footprint::Polygon(poly) => poly.centroid().unwrap_or_else(|| Point::from(poly.exterior().0[0])),
            Footprint::Polyline(line) => line
                .point_at_ratio_from_start(&Euclidean, 0.5)
                .unwrap_or_else(|| Point::from(line.0[0])),
        }
    }

    /// Zero for points and polylines.
    pub fn area(&self) -> f64 {
        match self {
            Footprint::Polygon(poly) => poly.unsigned_area(),
            _ => 0.0,
        }
    }

    pub fn bounding_rect(&self) -> Rect<f64> {
        match self {
            Footprint::Point(p) => Rect::new(p.0, p.0),
            Footprint::Polyline(l) => l.bounding_rect().expect("validated polyline"),
            Footprint::Polygon(p) => p.bounding_rect().expect("validated polygon"),
        }
    }

    pub fn as_polygon(&self) -> Option<&Polygon<f64>> {
        match self {
            Footprint::Polygon(p) => Some(p),
            _ => None,
        }
    }

    pub fn to_geometry(&self) -> Geometry<f64> {
        match self {
            Footprint::Point(p) => Geometry::Point(*p),
            Footprint::Polyline(l) => Geometry::LineString(l.clone()),
            Footprint::Polygon(p) => Geometry::Polygon(p.clone()),
        }
    }

    pub fn intersects_region(&self, region: &Region) -> bool {
        let mp = region.polygons();
        match self {
            Footprint::Point(p) => mp.intersects(p),
            Footprint::Polyline(l) => mp.intersects(l),
            Footprint::Polygon(poly) => mp.intersects(poly),
        }
    }

    pub fn map_coords(&self, f: impl Fn(Coord<f64>) -> Coord<f64> + Copy) -> Footprint {
        match self {
            Footprint::Point(p) => Footprint::Point(p.map_coords(f)),
            Footprint::Polyline(l) => Footprint::Polyline(l.map_coords(f)),
            Footprint::Polygon(p) => Footprint::Polygon(p.map_coords(f)),
        }
    }
}

/// Local equirectangular projection about a fixed origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub lon0: f64,
    pub lat0: f64,
}

impl Projection {
    pub fn forward(&self, c: Coord<f64>) -> Coord<f64> {
        let k = self.lat0.to_radians().cos();
        Coord {
            x: EARTH_RADIUS_M * (c.x - self.lon0).to_radians() * k,
            y: EARTH_RADIUS_M * (c.y - self.lat0).to_radians(),
        }
    }

    pub fn inverse(&self, c: Coord<f64>) -> Coord<f64> {
        let k = self.lat0.to_radians().cos();
        Coord {
            x: self.lon0 + (c.x / (EARTH_RADIUS_M * k)).to_degrees(),
            y: self.lat0 + (c.y / EARTH_RADIUS_M).to_degrees(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazetteerEntry {
    pub entry_id: String,
    pub name: String,
    pub feature_type: String,
    pub footprint: Footprint,
    pub tags: BTreeMap<String, String>,
}

impl GazetteerEntry {
    pub fn new(id: impl Into<String>, name: impl Into<String>, footprint: Footprint) -> Self {
        GazetteerEntry {
            entry_id: id.into(),
            name: name.into(),
            feature_type: String::new(),
            footprint,
            tags: BTreeMap::new(),
        }
    }

    pub fn with_tag(mut self, key: &str, value: &str) -> Self {
        self.tags.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_type(mut self, feature_type: &str) -> Self {
        self.feature_type = feature_type.to_string();
        self
    }
}

/// Case-folded, diacritic-free, whitespace-collapsed form used for exact matching.
pub fn normalize_name(s: &str) -> String {
    let stripped: String = s.nfkd().filter(|c| !is_combining_mark(*c)).collect();
    stripped.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GazetteerOptions {
    /// Coordinates are already planar meters; skip projection.
    pub projected: bool,
}

type IndexedEnvelope = GeomWithData<Rectangle<[f64; 2]>, usize>;

#[derive(Debug, Clone)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    by_id: HashMap<String, usize>,
    by_name: HashMap<String, Vec<usize>>,
    index: RTree<IndexedEnvelope>,
    projection: Option<Projection>,
}

impl Gazetteer {
    /// Builds a gazetteer from entries already in planar meters.
    pub fn from_entries(entries: Vec<GazetteerEntry>) -> Result<Self, GazetteerError> {
        Self::build(entries, None)
    }

    fn build(entries: Vec<GazetteerEntry>, projection: Option<Projection>) -> Result<Self, GazetteerError> {
        let mut by_id = HashMap::with_capacity(entries.len());
        let mut by_name: HashMap<String, Vec<usize>> = HashMap::new();
        let mut envelopes = Vec::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            if entry.name.trim().is_empty() {
                return Err(GazetteerError::InvalidGeometry {
                    id: entry.entry_id.clone(),
                    reason: "empty name".into(),
                });
            }
            validate_footprint(&entry.entry_id, &entry.footprint)?;
            if by_id.insert(entry.entry_id.clone(), i).is_some() {
                return Err(GazetteerError::DuplicateEntry(entry.entry_id.clone()));
            }
            by_name.entry(normalize_name(&entry.name)).or_default().push(i);
            let r = entry.footprint.bounding_rect();
            envelopes.push(GeomWithData::new(
                Rectangle::from_corners([r.min().x, r.min().y], [r.max().x, r.max().y]),
                i,
            ));
        }
        for ids in by_name.values_mut() {
            ids.sort_by(|a, b| entries[*a].entry_id.cmp(&entries[*b].entry_id));
        }
        Ok(Gazetteer {
            entries,
            by_id,
            by_name,
            index: RTree::bulk_load(envelopes),
            projection,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn entry(&self, id: &str) -> Option<&GazetteerEntry> {
        self.by_id.get(id).map(|i| &self.entries[*i])
    }

    /// The projection applied at load time, if the input was geographic.
    pub fn projection(&self) -> Option<Projection> {
        self.projection
    }

    /// Entries whose normalized name equals the normalized reference, ordered by id.
    /// An empty result marks a non-gazetteered reference.
    pub fn lookup_exact(&self, reference: &str) -> Vec<&GazetteerEntry> {
        self.by_name
            .get(&normalize_name(reference))
            .map(|ids| ids.iter().map(|i| &self.entries[*i]).collect())
            .unwrap_or_default()
    }

    /// Entries whose footprint intersects `region` (closed semantics), ordered by id.
    pub fn query_region(&self, region: &Region) -> Vec<&GazetteerEntry> {
        let Some(bbox) = region.bounding_rect().filter(|_| !region.is_empty()) else {
            log::warn!("region query with an empty region");
            return Vec::new();
        };
        let envelope = AABB::from_corners([bbox.min().x, bbox.min().y], [bbox.max().x, bbox.max().y]);
        let mut hits: Vec<&GazetteerEntry> = self
            .index
            .locate_in_envelope_intersecting(envelope)
            .map(|item| &self.entries[item.data])
            .filter(|e| e.footprint.intersects_region(region))
            .collect();
        hits.sort_by(|a, b| a.entry_id.cmp(&b.entry_id));
        hits
    }
}

fn validate_footprint(id: &str, footprint: &Footprint) -> Result<(), GazetteerError> {
    let invalid = |reason: String| GazetteerError::InvalidGeometry {
        id: id.to_string(),
        reason,
    };
    match footprint {
        Footprint::Point(p) => {
            if !(p.x().is_finite() && p.y().is_finite()) {
                return Err(invalid("non-finite coordinate".into()));
            }
        }
        Footprint::Polyline(l) => {
            if l.0.len() < 2 {
                return Err(invalid("polyline needs at least two vertices".into()));
            }
            if let Err(e) = l.check_validation() {
                return Err(invalid(e.to_string()));
            }
        }
        Footprint::Polygon(poly) => {
            for ring in std::iter::once(poly.exterior()).chain(poly.interiors()) {
                let mut distinct: Vec<Coord<f64>> = Vec::new();
                for c in &ring.0 {
                    if !distinct.contains(c) {
                        distinct.push(*c);
                    }
                }
                if distinct.len() < 3 {
                    return Err(invalid("ring needs at least three distinct vertices".into()));
                }
            }
            if let Err(e) = poly.check_validation() {
                return Err(invalid(e.to_string()));
            }
            if poly.unsigned_area() <= 0.0 {
                return Err(invalid("polygon has zero area".into()));
            }
        }
    }
    Ok(())
}

/// Loads a GeoJSON FeatureCollection. Geographic input is projected to local
/// planar meters about the centre of the dataset's extent.
pub fn load_gazetteer(document: &str, opts: GazetteerOptions) -> Result<Gazetteer, GazetteerError> {
    let geojson: geojson::GeoJson = document
        .parse()
        .map_err(|e: geojson::Error| GazetteerError::Malformed(e.to_string()))?;
    let geojson::GeoJson::FeatureCollection(fc) = geojson else {
        return Err(GazetteerError::Malformed("expected a FeatureCollection".into()));
    };

    let mut raw = Vec::with_capacity(fc.features.len());
    for (index, feature) in fc.features.into_iter().enumerate() {
        raw.push(parse_feature(index, feature)?);
    }

    let projection = if opts.projected || raw.is_empty() {
        None
    } else {
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for e in &raw {
            let r = e.footprint.bounding_rect();
            min_x = min_x.min(r.min().x);
            min_y = min_y.min(r.min().y);
            max_x = max_x.max(r.max().x);
            max_y = max_y.max(r.max().y);
        }
        Some(Projection {
            lon0: (min_x + max_x) / 2.0,
            lat0: (min_y + max_y) / 2.0,
        })
    };
    if let Some(proj) = projection {
        for e in &mut raw {
            e.footprint = e.footprint.map_coords(|c| proj.forward(c));
        }
    }
    Gazetteer::build(raw, projection)
}

fn parse_feature(index: usize, feature: geojson::Feature) -> Result<GazetteerEntry, GazetteerError> {
    let bad = |reason: &str| GazetteerError::InvalidFeature {
        index,
        reason: reason.to_string(),
    };
    let props = feature.properties.unwrap_or_default();
    let entry_id = match props.get("id") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        _ => return Err(bad("properties.id must be a non-empty string")),
    };
    let name = match props.get("name") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        _ => return Err(bad("properties.name must be a non-empty string")),
    };
    let feature_type = match props.get("feature_type") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(bad("properties.feature_type must be a string")),
    };
    let mut tags = BTreeMap::new();
    match props.get("tags") {
        None | Some(Value::Null) => {}
        Some(Value::Object(map)) => {
            for (k, v) in map {
                let v = match v {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    Value::Bool(b) => b.to_string(),
                    _ => return Err(bad("properties.tags must be a flat string map")),
                };
                tags.insert(k.clone(), v);
            }
        }
        Some(_) => return Err(bad("properties.tags must be an object")),
    }
    let geometry = feature.geometry.ok_or_else(|| bad("missing geometry"))?;
    let footprint = match geometry.value {
        geojson::GeometryValue::Point { coordinates: ref c } => Footprint::Point(Point::new(c[0], c[1])),
        geojson::GeometryValue::LineString { coordinates: ref cs } => {
            Footprint::Polyline(LineString::from(cs.iter().map(|c| (c[0], c[1])).collect::<Vec<_>>()))
        }
        geojson::GeometryValue::Polygon { coordinates: ref rings } => {
            let mut rings = rings.iter().map(|ring| {
                if ring.len() < 4 || ring.first() != ring.last() {
                    return Err(GazetteerError::InvalidGeometry {
                        id: entry_id.clone(),
                        reason: "polygon ring is not closed".into(),
                    });
                }
                Ok(LineString::from(ring.iter().map(|c| (c[0], c[1])).collect::<Vec<_>>()))
            });
            let exterior = rings.next().ok_or_else(|| bad("polygon without rings"))??;
            let interiors = rings.collect::<Result<Vec<_>, _>>()?;
            Footprint::Polygon(Polygon::new(exterior, interiors))
        }
        _ => return Err(bad("geometry must be Point, LineString or Polygon")),
    };
    Ok(GazetteerEntry {
        entry_id,
        name,
        feature_type,
        footprint,
        tags,
    })
}
