//! Planar geometry for qualitative spatial constraints: regions, spatial
//! contexts, search spaces, approximate location regions and spatial similarity.

mod search;
mod similarity;

pub use search::{
    buffer_distance, buffer_footprint, derive_alr, disc, search_space, Alr, SearchSpace, CIRCLE_SEGMENTS,
};
pub use similarity::{
    classify_topology, nearness_similarity, orientation_similarity, spatial_similarity, topological_similarity,
    RelationInput, SpatialScore,
};

use geo::{Area, BooleanOps, BoundingRect, Coord, Intersects, MultiPolygon, Point, Polygon, Rect};
use serde::{Deserialize, Serialize};

use crate::error::SpatialError;
use crate::gazetteer::Footprint;

/// Regions with less area than this (m²) are treated as empty.
pub const EMPTY_AREA: f64 = 1e-6;

/// A finite planar region made of zero or more polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    polygons: MultiPolygon<f64>,
    /// Derived from a half-plane or complement and clipped to a window.
    unbounded: bool,
}

impl Region {
    pub fn empty() -> Self {
        Region::from_multi(MultiPolygon(Vec::new()))
    }

    pub fn from_polygon(p: Polygon<f64>) -> Self {
        Region {
            polygons: MultiPolygon(vec![p]),
            unbounded: false,
        }
    }

    pub fn from_multi(mp: MultiPolygon<f64>) -> Self {
        Region {
            polygons: mp,
            unbounded: false,
        }
    }

    pub fn from_rect(r: Rect<f64>) -> Self {
        Region::from_polygon(r.to_polygon())
    }

    pub(crate) fn clipped_unbounded(mut self) -> Self {
        self.unbounded = true;
        self
    }

    pub fn polygons(&self) -> &MultiPolygon<f64> {
        &self.polygons
    }

    pub fn is_unbounded(&self) -> bool {
        self.unbounded
    }

    pub fn area(&self) -> f64 {
        self.polygons.unsigned_area()
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.0.is_empty() || self.area() <= EMPTY_AREA
    }

    pub fn intersection(&self, other: &Region) -> Region {
        if self.is_empty() || other.is_empty() {
            return Region::empty();
        }
        Region {
            polygons: self.polygons.intersection(&other.polygons),
            unbounded: self.unbounded && other.unbounded,
        }
    }

    pub fn union(&self, other: &Region) -> Region {
        Region {
            polygons: self.polygons.union(&other.polygons),
            unbounded: self.unbounded || other.unbounded,
        }
    }

    /// Closed containment: boundary points count as inside.
    pub fn contains_point(&self, p: Point<f64>) -> bool {
        self.polygons.intersects(&p)
    }

    /// True if every point of the footprint lies in the (closed) region.
    pub fn covers(&self, footprint: &Footprint) -> bool {
        use geo::Covers;
        match footprint {
            Footprint::Point(p) => self.contains_point(*p),
            Footprint::Polyline(l) => self.polygons.covers(l),
            Footprint::Polygon(poly) => self.polygons.covers(poly),
        }
    }

    pub fn bounding_rect(&self) -> Option<Rect<f64>> {
        self.polygons.bounding_rect()
    }
}

pub(crate) fn expand_rect(r: Rect<f64>, dx: f64, dy: f64) -> Rect<f64> {
    Rect::new(
        Coord {
            x: r.min().x - dx,
            y: r.min().y - dy,
        },
        Coord {
            x: r.max().x + dx,
            y: r.max().y + dy,
        },
    )
}

pub(crate) fn rect_union(a: Rect<f64>, b: Rect<f64>) -> Rect<f64> {
    Rect::new(
        Coord {
            x: a.min().x.min(b.min().x),
            y: a.min().y.min(b.min().y),
        },
        Coord {
            x: a.max().x.max(b.max().x),
            y: a.max().y.max(b.max().y),
        },
    )
}

/// Minimal bounding box of a cluster's points, plus the finite window every
/// unbounded search space is clipped to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialContext {
    bbox: Rect<f64>,
    window: Rect<f64>,
}

impl SpatialContext {
    /// The window extends the box by half its larger side on every side (at
    /// least one metre), so degenerate boxes still get a usable window.
    pub fn new(bbox: Rect<f64>) -> Self {
        let pad = (0.5 * bbox.width().max(bbox.height())).max(1.0);
        SpatialContext {
            bbox,
            window: expand_rect(bbox, pad, pad),
        }
    }

    pub fn from_points(points: &[Point<f64>]) -> Option<Self> {
        let first = points.first()?;
        let mut r = Rect::new(first.0, first.0);
        for p in &points[1..] {
            r = rect_union(r, Rect::new(p.0, p.0));
        }
        Some(SpatialContext::new(r))
    }

    /// Smallest context whose box covers both inputs; windows are merged too.
    pub fn merge(&self, other: &SpatialContext) -> SpatialContext {
        let merged = SpatialContext::new(rect_union(self.bbox, other.bbox));
        SpatialContext {
            bbox: merged.bbox,
            window: rect_union(merged.window, rect_union(self.window, other.window)),
        }
    }

    /// Grows the clipping window (never the context box) to include `r`.
    pub fn extend_window(&mut self, r: Rect<f64>) {
        self.window = rect_union(self.window, r);
    }

    pub fn bbox(&self) -> Rect<f64> {
        self.bbox
    }

    pub fn window(&self) -> Rect<f64> {
        self.window
    }

    pub fn area(&self) -> f64 {
        self.bbox.width() * self.bbox.height()
    }
}

/// Coefficients of the near-buffer distance `alpha + beta*area(relatum) + gamma*area(context)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearBufferConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for NearBufferConfig {
    fn default() -> Self {
        NearBufferConfig {
            alpha: 100.0,
            beta: 1e-3,
            gamma: 5e-5,
        }
    }
}

impl NearBufferConfig {
    pub fn validate(&self) -> Result<(), SpatialError> {
        let ok = self.alpha > 0.0
            && self.alpha.is_finite()
            && self.beta >= 0.0
            && self.beta.is_finite()
            && self.gamma >= 0.0
            && self.gamma.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SpatialError::InvalidBufferConfig(format!(
                "alpha={} beta={} gamma={}",
                self.alpha, self.beta, self.gamma
            )))
        }
    }
}

/// Orientation of "front" for relative-direction relations, as a compass
/// bearing in degrees clockwise from north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFrame {
    pub front_bearing_deg: f64,
}

impl ReferenceFrame {
    pub fn front(&self) -> (f64, f64) {
        let b = self.front_bearing_deg.to_radians();
        (b.sin(), b.cos())
    }
}
