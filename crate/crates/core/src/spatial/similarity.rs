use geo::coordinate_position::CoordPos;
use geo::dimensions::Dimensions;
use geo::{Point, Polygon, Relate};

use super::search::{buffer_distance, ideal_direction};
use super::{NearBufferConfig, ReferenceFrame, SpatialContext};
use crate::gazetteer::Footprint;
use crate::graph::{RelationFamily, RelationKind};

/// Orientation score of `locatum` relative to `relatum` for a cardinal relation
/// (or a relative one when `frame` is known): `1 - angle / angle_max`, floored at 0,
/// with angle_max = 90° for principal directions and 45° for composite ones.
///
/// Returns `None` when the relation has no direction (or a relative relation has no frame).
pub fn orientation_similarity(
    relation: RelationKind,
    frame: Option<&ReferenceFrame>,
    locatum: Point<f64>,
    relatum: Point<f64>,
) -> Option<f64> {
    let ((ux, uy), max_deg) = ideal_direction(relation, frame)?;
    let (dx, dy) = (locatum.x() - relatum.x(), locatum.y() - relatum.y());
    let len = dx.hypot(dy);
    if len == 0.0 {
        log::warn!("coincident locatum and relatum for `{relation}`; orientation taken as satisfied");
        return Some(1.0);
    }
    let angle = (dx * uy - dy * ux).abs().atan2(dx * ux + dy * uy).to_degrees();
    Some((1.0 - angle / max_deg).max(0.0))
}

/// `1 - dist(locatum, centroid(relatum)) / d`, clamped to [0, 1].
pub fn nearness_similarity(locatum: Point<f64>, relatum: &Footprint, d: f64) -> f64 {
    let c = relatum.centroid();
    let dist = (locatum.x() - c.x()).hypot(locatum.y() - c.y());
    (1.0 - dist / d).clamp(0.0, 1.0)
}

/// Which of the eight topological relations holds between two polygons
/// (`a` as locatum, `b` as relatum). The eight are jointly exhaustive and
/// pairwise disjoint for regular polygons.
pub fn classify_topology(a: &Polygon<f64>, b: &Polygon<f64>) -> RelationKind {
    use CoordPos::{Inside, OnBoundary, Outside};
    let m = a.relate(b);
    if !m.is_intersects() {
        return RelationKind::Disjoint;
    }
    if m.get(Inside, Inside) == Dimensions::Empty {
        return RelationKind::Meet;
    }
    if m.is_equal_topo() {
        return RelationKind::Equal;
    }
    let boundaries_touch = m.get(OnBoundary, OnBoundary) != Dimensions::Empty;
    let a_in_b = m.get(Inside, Outside) == Dimensions::Empty && m.get(OnBoundary, Outside) == Dimensions::Empty;
    if a_in_b {
        return if boundaries_touch {
            RelationKind::CoveredBy
        } else {
            RelationKind::Inside
        };
    }
    let b_in_a = m.get(Outside, Inside) == Dimensions::Empty && m.get(Outside, OnBoundary) == Dimensions::Empty;
    if b_in_a {
        return if boundaries_touch {
            RelationKind::Cover
        } else {
            RelationKind::Contain
        };
    }
    RelationKind::Overlap
}

/// 1.0 if the relation holds, 0.0 if not; `None` (skip) unless both footprints are polygons.
pub fn topological_similarity(relation: RelationKind, locatum: &Footprint, relatum: &Footprint) -> Option<f64> {
    debug_assert_eq!(relation.family(), RelationFamily::Topological);
    let (a, b) = (locatum.as_polygon()?, relatum.as_polygon()?);
    Some(if classify_topology(a, b) == relation { 1.0 } else { 0.0 })
}

/// One relationship of the place being scored to an already geo-referenced relatum.
#[derive(Debug, Clone, Copy)]
pub struct RelationInput<'a> {
    pub kind: RelationKind,
    pub relatum: &'a Footprint,
    pub frame: Option<ReferenceFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialScore {
    pub score: f64,
    /// Per-relation scores in input order; `None` for skipped relations.
    pub components: Vec<Option<f64>>,
    /// A topological relation was violated and forced the score to zero.
    pub filtered: bool,
    /// Every relation was skipped and the neutral score was used.
    pub neutral: bool,
}

pub const NEUTRAL_SPATIAL_SCORE: f64 = 0.5;

/// Mean of per-relation scores for a candidate footprint. A violated
/// topological relation zeroes the whole score.
pub fn spatial_similarity(
    candidate: &Footprint,
    relations: &[RelationInput<'_>],
    context: &SpatialContext,
    cfg: &NearBufferConfig,
) -> SpatialScore {
    let loc = candidate.centroid();
    let mut components = Vec::with_capacity(relations.len());
    for rel in relations {
        let relatum_pt = rel.relatum.centroid();
        let score = match rel.kind.family() {
            RelationFamily::Cardinal => orientation_similarity(rel.kind, None, loc, relatum_pt),
            RelationFamily::Topological => {
                let s = topological_similarity(rel.kind, candidate, rel.relatum);
                if s == Some(0.0) {
                    components.push(s);
                    return SpatialScore {
                        score: 0.0,
                        components,
                        filtered: true,
                        neutral: false,
                    };
                }
                s
            }
            RelationFamily::Distance => {
                let d = buffer_distance(rel.relatum, context, cfg);
                Some(nearness_similarity(loc, rel.relatum, d))
            }
            RelationFamily::Relative => {
                let d = buffer_distance(rel.relatum, context, cfg);
                let near = nearness_similarity(loc, rel.relatum, d);
                match orientation_similarity(rel.kind, rel.frame.as_ref(), loc, relatum_pt) {
                    Some(orient) => Some((near + orient) / 2.0),
                    None => Some(near),
                }
            }
        };
        components.push(score);
    }
    let scored: Vec<f64> = components.iter().flatten().copied().collect();
    if scored.is_empty() {
        return SpatialScore {
            score: NEUTRAL_SPATIAL_SCORE,
            components,
            filtered: false,
            neutral: true,
        };
    }
    SpatialScore {
        score: scored.iter().sum::<f64>() / scored.len() as f64,
        components,
        filtered: false,
        neutral: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use geo::{Coord, Rect};

    fn square(x0: f64, y0: f64, side: f64) -> Footprint {
        Footprint::rect(x0, y0, x0 + side, y0 + side)
    }

    #[test]
    fn orientation_endpoints() {
        let o = Point::new(0.0, 0.0);
        let north = |p| orientation_similarity(RelationKind::NorthOf, None, p, o).unwrap();
        assert_relative_eq!(north(Point::new(0.0, 10.0)), 1.0);
        assert_relative_eq!(north(Point::new(10.0, 0.0)), 0.0, epsilon = 1e-12);
        assert_relative_eq!(north(Point::new(10.0, 10.0)), 0.5, epsilon = 1e-12);
        assert_relative_eq!(north(Point::new(0.0, -10.0)), 0.0);
        let ne = |p| orientation_similarity(RelationKind::NorthEastOf, None, p, o).unwrap();
        assert_relative_eq!(ne(Point::new(5.0, 5.0)), 1.0, epsilon = 1e-12);
        assert_relative_eq!(ne(Point::new(0.0, 5.0)), 0.0, epsilon = 1e-12);
        // coincident points are treated as satisfied
        assert_eq!(north(o), 1.0);
        assert!(orientation_similarity(RelationKind::Near, None, o, o).is_none());
        assert!(orientation_similarity(RelationKind::LeftOf, None, o, o).is_none());
    }

    #[test]
    fn relative_orientation_with_frame() {
        let frame = ReferenceFrame { front_bearing_deg: 0.0 };
        let o = Point::new(0.0, 0.0);
        let s = |k, p| orientation_similarity(k, Some(&frame), p, o).unwrap();
        assert_relative_eq!(s(RelationKind::InFrontOf, Point::new(0.0, 3.0)), 1.0);
        assert_relative_eq!(s(RelationKind::Behind, Point::new(0.0, -3.0)), 1.0);
        assert_relative_eq!(s(RelationKind::LeftOf, Point::new(-3.0, 0.0)), 1.0);
        assert_relative_eq!(s(RelationKind::RightOf, Point::new(3.0, 0.0)), 1.0);
    }

    #[test]
    fn nearness_examples() {
        let r = Footprint::point(0.0, 0.0);
        assert_eq!(nearness_similarity(Point::new(0.0, 0.0), &r, 100.0), 1.0);
        assert_eq!(nearness_similarity(Point::new(100.0, 0.0), &r, 100.0), 0.0);
        assert_relative_eq!(nearness_similarity(Point::new(0.0, 50.0), &r, 100.0), 0.5);
        assert_eq!(nearness_similarity(Point::new(0.0, 500.0), &r, 100.0), 0.0);
    }

    #[test]
    fn topology_examples() {
        let big = square(0.0, 0.0, 10.0);
        let small = square(2.0, 2.0, 3.0);
        assert_eq!(topological_similarity(RelationKind::Equal, &big, &big), Some(1.0));
        assert_eq!(topological_similarity(RelationKind::Inside, &small, &big), Some(1.0));
        assert_eq!(topological_similarity(RelationKind::Inside, &big, &small), Some(0.0));
        assert_eq!(topological_similarity(RelationKind::Contain, &big, &small), Some(1.0));

        let left = square(0.0, 0.0, 2.0);
        let right = square(2.0, 0.0, 2.0);
        let apart = square(3.0, 0.0, 2.0);
        assert_eq!(topological_similarity(RelationKind::Meet, &left, &right), Some(1.0));
        assert_eq!(topological_similarity(RelationKind::Meet, &left, &apart), Some(0.0));
        assert_eq!(topological_similarity(RelationKind::Disjoint, &left, &apart), Some(1.0));

        let corner = square(0.0, 0.0, 5.0);
        assert_eq!(
            classify_topology(corner.as_polygon().unwrap(), big.as_polygon().unwrap()),
            RelationKind::CoveredBy
        );
        assert_eq!(
            classify_topology(big.as_polygon().unwrap(), corner.as_polygon().unwrap()),
            RelationKind::Cover
        );
        let shifted = square(5.0, 5.0, 10.0);
        assert_eq!(
            classify_topology(big.as_polygon().unwrap(), shifted.as_polygon().unwrap()),
            RelationKind::Overlap
        );

        let pt = Footprint::point(1.0, 1.0);
        assert_eq!(topological_similarity(RelationKind::Inside, &pt, &big), None);
    }

    fn ctx() -> SpatialContext {
        SpatialContext::new(Rect::new(Coord { x: 0.0, y: 0.0 }, Coord { x: 0.0, y: 0.0 }))
    }

    #[test]
    fn spatial_similarity_examples() {
        let cfg = NearBufferConfig {
            alpha: 100.0,
            beta: 0.0,
            gamma: 0.0,
        };
        let anchor = Footprint::point(0.0, 0.0);
        let near = RelationInput {
            kind: RelationKind::Near,
            relatum: &anchor,
            frame: None,
        };
        let at_anchor = spatial_similarity(&Footprint::point(0.0, 0.0), &[near], &ctx(), &cfg);
        assert_eq!(at_anchor.score, 1.0);

        // near = 0.6 at distance 40; north = 0.8 at 18 degrees off north
        let t = 18f64.to_radians();
        let cand = Footprint::point(40.0 * t.sin(), 40.0 * t.cos());
        let north = RelationInput {
            kind: RelationKind::NorthOf,
            relatum: &anchor,
            frame: None,
        };
        let s = spatial_similarity(&cand, &[near, north], &ctx(), &cfg);
        assert_relative_eq!(s.components[0].unwrap(), 0.6, epsilon = 1e-12);
        assert_relative_eq!(s.components[1].unwrap(), 0.8, epsilon = 1e-12);
        assert_relative_eq!(s.score, 0.7, epsilon = 1e-12);

        // unsatisfied inside beats any nearness
        let region = square(-50.0, -50.0, 20.0);
        let outside = square(5.0, 5.0, 2.0);
        let inside = RelationInput {
            kind: RelationKind::Inside,
            relatum: &region,
            frame: None,
        };
        let near_region = RelationInput {
            kind: RelationKind::Near,
            relatum: &region,
            frame: None,
        };
        let s = spatial_similarity(&outside, &[near_region, inside], &ctx(), &cfg);
        assert!(s.components[0].unwrap() > 0.0);
        assert_eq!(s.score, 0.0);
        assert!(s.filtered);

        // all skipped: neutral
        let s = spatial_similarity(&Footprint::point(1.0, 1.0), &[inside], &ctx(), &cfg);
        assert!(s.neutral);
        assert_eq!(s.score, NEUTRAL_SPATIAL_SCORE);
    }
}
