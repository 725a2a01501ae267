use std::f64::consts::PI;

use geo::orient::{Direction, Orient};
use geo::{unary_union, Coord, LineString, MultiPolygon, Polygon, Rect};

use super::{expand_rect, rect_union, NearBufferConfig, ReferenceFrame, Region, SpatialContext};
use crate::error::SpatialError;
use crate::gazetteer::Footprint;
use crate::graph::{RelationFamily, RelationKind};

/// Number of vertices used to approximate a circle.
pub const CIRCLE_SEGMENTS: usize = 64;

/// Near-buffer distance in metres for a relatum inside a spatial context.
pub fn buffer_distance(relatum: &Footprint, context: &SpatialContext, cfg: &NearBufferConfig) -> f64 {
    cfg.alpha + cfg.beta * relatum.area() + cfg.gamma * context.area()
}

/// Regular 64-gon inscribed in the circle of `radius` about `center`, counter-clockwise.
pub fn disc(center: Coord<f64>, radius: f64) -> Polygon<f64> {
    let ring: Vec<Coord<f64>> = (0..CIRCLE_SEGMENTS)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / CIRCLE_SEGMENTS as f64;
            Coord {
                x: center.x + radius * t.cos(),
                y: center.y + radius * t.sin(),
            }
        })
        .collect();
    Polygon::new(LineString::from(ring), vec![])
}

fn segment_quad(a: Coord<f64>, b: Coord<f64>, d: f64) -> Option<Polygon<f64>> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return None;
    }
    let n = Coord {
        x: -dy / len * d,
        y: dx / len * d,
    };
    let quad = Polygon::new(LineString::from(vec![a - n, b - n, b + n, a + n]), vec![]);
    Some(quad.orient(Direction::Default))
}

/// All points within `d` of the footprint (polygon interiors included), as the
/// union of the footprint, one rectangle per edge and one disc per vertex.
pub fn buffer_footprint(footprint: &Footprint, d: f64) -> MultiPolygon<f64> {
    let mut parts: Vec<Polygon<f64>> = Vec::new();
    let add_line = |line: &LineString<f64>, parts: &mut Vec<Polygon<f64>>| {
        for c in &line.0 {
            parts.push(disc(*c, d));
        }
        for seg in line.lines() {
            parts.extend(segment_quad(seg.start, seg.end, d));
        }
    };
    match footprint {
        Footprint::Point(p) => return MultiPolygon(vec![disc(p.0, d)]),
        Footprint::Polyline(l) => add_line(l, &mut parts),
        Footprint::Polygon(poly) => {
            parts.push(poly.orient(Direction::Default));
            add_line(poly.exterior(), &mut parts);
            for hole in poly.interiors() {
                add_line(hole, &mut parts);
            }
        }
    }
    unary_union(parts.iter())
}

/// Keeps the part of a convex ring where `normal · (p - origin) >= 0`.
fn clip_half_plane(ring: &[Coord<f64>], origin: Coord<f64>, normal: (f64, f64)) -> Vec<Coord<f64>> {
    let side = |p: &Coord<f64>| normal.0 * (p.x - origin.x) + normal.1 * (p.y - origin.y);
    let mut out = Vec::with_capacity(ring.len() + 1);
    for i in 0..ring.len() {
        let cur = ring[i];
        let next = ring[(i + 1) % ring.len()];
        let (sc, sn) = (side(&cur), side(&next));
        if sc >= 0.0 {
            out.push(cur);
        }
        if (sc >= 0.0) != (sn >= 0.0) {
            let t = sc / (sc - sn);
            out.push(Coord {
                x: cur.x + t * (next.x - cur.x),
                y: cur.y + t * (next.y - cur.y),
            });
        }
    }
    out
}

fn half_plane_region(window: Rect<f64>, origin: Coord<f64>, normals: &[(f64, f64)]) -> Region {
    let mut ring: Vec<Coord<f64>> = window.to_polygon().exterior().0.clone();
    ring.pop();
    for n in normals {
        ring = clip_half_plane(&ring, origin, *n);
        if ring.len() < 3 {
            return Region::empty().clipped_unbounded();
        }
    }
    Region::from_polygon(Polygon::new(LineString::from(ring), vec![])).clipped_unbounded()
}

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Unit half-plane normals for a cardinal relation; composite directions use two.
pub(crate) fn cardinal_normals(kind: RelationKind) -> Option<&'static [(f64, f64)]> {
    use RelationKind::*;
    Some(match kind {
        NorthOf => &[(0.0, 1.0)],
        SouthOf => &[(0.0, -1.0)],
        EastOf => &[(1.0, 0.0)],
        WestOf => &[(-1.0, 0.0)],
        NorthEastOf => &[(0.0, 1.0), (1.0, 0.0)],
        NorthWestOf => &[(0.0, 1.0), (-1.0, 0.0)],
        SouthEastOf => &[(0.0, -1.0), (1.0, 0.0)],
        SouthWestOf => &[(0.0, -1.0), (-1.0, 0.0)],
        _ => return None,
    })
}

/// Ideal direction vector and the angle (degrees) at which orientation scores zero.
pub(crate) fn ideal_direction(kind: RelationKind, frame: Option<&ReferenceFrame>) -> Option<((f64, f64), f64)> {
    use RelationKind::*;
    match kind {
        NorthOf => Some(((0.0, 1.0), 90.0)),
        SouthOf => Some(((0.0, -1.0), 90.0)),
        EastOf => Some(((1.0, 0.0), 90.0)),
        WestOf => Some(((-1.0, 0.0), 90.0)),
        NorthEastOf => Some(((SQRT_HALF, SQRT_HALF), 45.0)),
        NorthWestOf => Some(((-SQRT_HALF, SQRT_HALF), 45.0)),
        SouthEastOf => Some(((SQRT_HALF, -SQRT_HALF), 45.0)),
        SouthWestOf => Some(((-SQRT_HALF, -SQRT_HALF), 45.0)),
        InFrontOf | Behind | LeftOf | RightOf => {
            let (fx, fy) = frame?.front();
            let v = match kind {
                InFrontOf => (fx, fy),
                Behind => (-fx, -fy),
                LeftOf => (-fy, fx),
                _ => (fy, -fx),
            };
            Some((v, 90.0))
        }
        _ => None,
    }
}

/// Admissible locatum positions implied by one relation to a geo-referenced relatum.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub relation: RelationKind,
    pub relatum_id: String,
    pub region: Region,
    /// False when the relation cannot bound the locatum (e.g. disjoint); such a
    /// space covers the whole window and only the later topological filter applies.
    pub constraining: bool,
}

pub fn search_space(
    relation: RelationKind,
    relatum_id: &str,
    relatum: &Footprint,
    context: &SpatialContext,
    cfg: &NearBufferConfig,
    frame: Option<&ReferenceFrame>,
) -> Result<SearchSpace, SpatialError> {
    let d = buffer_distance(relatum, context, cfg);
    let window = rect_union(context.window(), expand_rect(relatum.bounding_rect(), 2.0 * d, 2.0 * d));
    let centroid = relatum.centroid().0;
    let near = || Region::from_multi(buffer_footprint(relatum, d));

    let (region, constraining) = match relation.family() {
        RelationFamily::Cardinal => {
            let normals = cardinal_normals(relation).expect("cardinal relation");
            (half_plane_region(window, centroid, normals), true)
        }
        RelationFamily::Distance => (near(), true),
        RelationFamily::Relative => match ideal_direction(relation, frame) {
            Some((front, _)) => {
                let half = half_plane_region(window, centroid, &[front]);
                (near().intersection(&half), true)
            }
            None => (near(), true),
        },
        RelationFamily::Topological => {
            let Some(poly) = relatum.as_polygon() else {
                return Err(SpatialError::NoSearchSpace { relation });
            };
            match relation {
                RelationKind::Inside | RelationKind::CoveredBy | RelationKind::Equal => {
                    (Region::from_polygon(poly.clone()), true)
                }
                _ => (Region::from_rect(window).clipped_unbounded(), false),
            }
        }
    };
    Ok(SearchSpace {
        relation,
        relatum_id: relatum_id.to_string(),
        region,
        constraining,
    })
}

/// Approximate location region: intersection of the constraining search spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Alr {
    pub region: Region,
    /// No constraining space was available; the region is the context window.
    pub low_confidence: bool,
    /// Indices (into the input slice) of spaces dropped to resolve an empty intersection, in drop order.
    pub relaxed: Vec<usize>,
}

fn relaxation_rank(kind: RelationKind) -> u8 {
    match kind.family() {
        RelationFamily::Relative => 0,
        RelationFamily::Cardinal => 1,
        RelationFamily::Distance => 2,
        RelationFamily::Topological => 3,
    }
}

fn intersect_all(spaces: &[SearchSpace], active: &[usize]) -> Region {
    let mut iter = active.iter();
    let Some(first) = iter.next() else {
        return Region::empty();
    };
    let mut acc = spaces[*first].region.clone();
    for i in iter {
        if acc.is_empty() {
            break;
        }
        acc = acc.intersection(&spaces[*i].region);
    }
    acc
}

/// Intersects all constraining spaces. On an empty intersection, constraints are
/// dropped one at a time (relative direction first, then cardinal, near and
/// topological; later edges before earlier ones within a family) until the
/// remainder is non-empty.
pub fn derive_alr(spaces: &[SearchSpace], context: &SpatialContext) -> Result<Alr, SpatialError> {
    if spaces.is_empty() {
        return Err(SpatialError::NoSearchSpaces);
    }
    let mut active: Vec<usize> = (0..spaces.len()).filter(|i| spaces[*i].constraining).collect();
    if active.is_empty() {
        let mut window = context.window();
        for s in spaces {
            if let Some(r) = s.region.bounding_rect() {
                window = rect_union(window, r);
            }
        }
        return Ok(Alr {
            region: Region::from_rect(window).clipped_unbounded(),
            low_confidence: true,
            relaxed: Vec::new(),
        });
    }

    let region = intersect_all(spaces, &active);
    if !region.is_empty() {
        return Ok(Alr {
            region,
            low_confidence: false,
            relaxed: Vec::new(),
        });
    }

    let mut drop_order = active.clone();
    drop_order.sort_by_key(|i| (relaxation_rank(spaces[*i].relation), std::cmp::Reverse(*i)));
    let mut relaxed = Vec::new();
    for victim in drop_order.iter().take(drop_order.len() - 1) {
        active.retain(|i| i != victim);
        relaxed.push(*victim);
        let region = intersect_all(spaces, &active);
        if !region.is_empty() {
            log::debug!("relaxed {} constraint(s) to obtain a non-empty region", relaxed.len());
            return Ok(Alr {
                region,
                low_confidence: false,
                relaxed,
            });
        }
    }
    // Only one constraint left and it is empty on its own: fall back to the
    // highest-priority space that is non-empty.
    let last = active[0];
    relaxed.push(last);
    for i in drop_order.iter().rev() {
        if !spaces[*i].region.is_empty() {
            relaxed.retain(|r| r != i);
            return Ok(Alr {
                region: spaces[*i].region.clone(),
                low_confidence: false,
                relaxed,
            });
        }
    }
    Ok(Alr {
        region: Region::empty(),
        low_confidence: false,
        relaxed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use geo::{Area, Point};

    fn ctx(x0: f64, y0: f64, x1: f64, y1: f64) -> SpatialContext {
        SpatialContext::new(Rect::new(Coord { x: x0, y: y0 }, Coord { x: x1, y: y1 }))
    }

    #[test]
    fn buffer_distance_examples() {
        let point_ctx = SpatialContext::from_points(&[Point::new(0.0, 0.0)]).unwrap();
        let cfg = NearBufferConfig::default();
        assert_relative_eq!(buffer_distance(&Footprint::point(0.0, 0.0), &point_ctx, &cfg), 100.0);

        let relatum = Footprint::rect(0.0, 0.0, 100.0, 100.0);
        let big = ctx(0.0, 0.0, 1000.0, 1000.0);
        assert_relative_eq!(buffer_distance(&relatum, &big, &cfg), 160.0, epsilon = 1e-9);

        let flat = NearBufferConfig {
            alpha: 42.0,
            beta: 0.0,
            gamma: 0.0,
        };
        assert_relative_eq!(buffer_distance(&relatum, &big, &flat), 42.0);
    }

    #[test]
    fn disc_area_close_to_circle() {
        let d = disc(Coord { x: 0.0, y: 0.0 }, 160.0);
        let exact = PI * 160.0 * 160.0;
        assert!((d.unsigned_area() - exact).abs() / exact < 0.01);
        assert_eq!(d.exterior().0.len(), CIRCLE_SEGMENTS + 1);
    }

    #[test]
    fn polygon_buffer_contains_polygon_and_grows() {
        let sq = Footprint::rect(0.0, 0.0, 100.0, 100.0);
        let buf = Region::from_multi(buffer_footprint(&sq, 10.0));
        // square + 4 strips + near-circle corners
        let expected = 100.0 * 100.0 + 4.0 * 100.0 * 10.0 + PI * 100.0;
        assert!((buf.area() - expected).abs() / expected < 0.001, "{}", buf.area());
        assert!(buf.covers(&sq));
        assert!(buf.contains_point(Point::new(-9.9, 50.0)));
        assert!(!buf.contains_point(Point::new(-10.1, 50.0)));
    }

    #[test]
    fn north_of_point_is_upper_half_of_window() {
        let c = ctx(-500.0, -500.0, 500.0, 500.0);
        let s = search_space(
            RelationKind::NorthOf,
            "r",
            &Footprint::point(0.0, 0.0),
            &c,
            &NearBufferConfig::default(),
            None,
        )
        .unwrap();
        assert!(s.constraining);
        assert!(s.region.is_unbounded());
        let bb = s.region.bounding_rect().unwrap();
        assert_relative_eq!(bb.min().y, 0.0);
        assert!(bb.max().y >= 500.0);
        assert!(s.region.contains_point(Point::new(10.0, 1.0)));
        assert!(!s.region.contains_point(Point::new(10.0, -1.0)));
    }

    #[test]
    fn composite_direction_is_quadrant() {
        let c = ctx(-500.0, -500.0, 500.0, 500.0);
        let s = search_space(
            RelationKind::SouthWestOf,
            "r",
            &Footprint::point(0.0, 0.0),
            &c,
            &NearBufferConfig::default(),
            None,
        )
        .unwrap();
        let bb = s.region.bounding_rect().unwrap();
        assert_relative_eq!(bb.max().x, 0.0);
        assert_relative_eq!(bb.max().y, 0.0);
    }

    #[test]
    fn inside_polygon_is_the_polygon() {
        let c = ctx(0.0, 0.0, 10.0, 10.0);
        let p = Footprint::rect(0.0, 0.0, 50.0, 20.0);
        let s = search_space(RelationKind::Inside, "r", &p, &c, &NearBufferConfig::default(), None).unwrap();
        assert!(s.constraining);
        assert_eq!(s.region, Region::from_polygon(p.as_polygon().unwrap().clone()));
    }

    #[test]
    fn topological_needs_polygon_relatum() {
        let c = ctx(0.0, 0.0, 10.0, 10.0);
        let err = search_space(
            RelationKind::Inside,
            "r",
            &Footprint::point(0.0, 0.0),
            &c,
            &NearBufferConfig::default(),
            None,
        )
        .unwrap_err();
        assert_eq!(
            err,
            SpatialError::NoSearchSpace {
                relation: RelationKind::Inside
            }
        );
    }

    #[test]
    fn disjoint_is_non_constraining() {
        let c = ctx(0.0, 0.0, 10.0, 10.0);
        let s = search_space(
            RelationKind::Disjoint,
            "r",
            &Footprint::rect(0.0, 0.0, 5.0, 5.0),
            &c,
            &NearBufferConfig::default(),
            None,
        )
        .unwrap();
        assert!(!s.constraining);
    }

    #[test]
    fn near_point_disc_area() {
        // context area 1e6 and alpha 100 give d = 150 with gamma 5e-5
        let c = ctx(0.0, 0.0, 1000.0, 1000.0);
        let s = search_space(
            RelationKind::Near,
            "r",
            &Footprint::point(500.0, 500.0),
            &c,
            &NearBufferConfig::default(),
            None,
        )
        .unwrap();
        let exact = PI * 150.0 * 150.0;
        assert!((s.region.area() - exact).abs() / exact < 0.01);
    }

    #[test]
    fn relative_direction_without_frame_is_near() {
        let c = ctx(0.0, 0.0, 1000.0, 1000.0);
        let cfg = NearBufferConfig::default();
        let rel = Footprint::point(500.0, 500.0);
        let near = search_space(RelationKind::Near, "r", &rel, &c, &cfg, None).unwrap();
        let front = search_space(RelationKind::InFrontOf, "r", &rel, &c, &cfg, None).unwrap();
        assert_eq!(near.region, front.region);
        let framed = search_space(
            RelationKind::InFrontOf,
            "r",
            &rel,
            &c,
            &cfg,
            Some(&ReferenceFrame {
                front_bearing_deg: 90.0,
            }),
        )
        .unwrap();
        assert_relative_eq!(framed.region.area(), near.region.area() / 2.0, epsilon = 1.0);
        assert!(framed.region.contains_point(Point::new(600.0, 500.0)));
        assert!(!framed.region.contains_point(Point::new(400.0, 500.0)));
    }

    fn near_space(x: f64, y: f64, r: f64) -> SearchSpace {
        SearchSpace {
            relation: RelationKind::Near,
            relatum_id: format!("{x},{y}"),
            region: Region::from_polygon(disc(Coord { x, y }, r)),
            constraining: true,
        }
    }

    #[test]
    fn alr_single_space_identity() {
        let c = ctx(0.0, 0.0, 10.0, 10.0);
        let s = near_space(0.0, 0.0, 100.0);
        let alr = derive_alr(std::slice::from_ref(&s), &c).unwrap();
        assert_relative_eq!(alr.region.area(), s.region.area(), epsilon = 1e-6);
        assert!(alr.relaxed.is_empty());
        assert!(derive_alr(&[], &c).is_err());
    }

    #[test]
    fn alr_relaxation_on_disjoint_discs() {
        let c = ctx(0.0, 0.0, 10.0, 10.0);
        let spaces = [near_space(0.0, 0.0, 100.0), near_space(1000.0, 0.0, 100.0)];
        let alr = derive_alr(&spaces, &c).unwrap();
        assert!(alr.region.area() > 0.0);
        assert_eq!(alr.relaxed, [1]);
        let diff = alr.region.polygons().unsigned_area() - spaces[0].region.area();
        assert!(diff.abs() < 1e-6);
    }

    #[test]
    fn alr_relaxes_relative_before_near() {
        let c = ctx(0.0, 0.0, 10.0, 10.0);
        let mut rel = near_space(1000.0, 0.0, 100.0);
        rel.relation = RelationKind::LeftOf;
        let spaces = [rel, near_space(0.0, 0.0, 100.0)];
        let alr = derive_alr(&spaces, &c).unwrap();
        assert_eq!(alr.relaxed, [0]);
        assert!(alr.region.contains_point(Point::new(0.0, 0.0)));
    }

    #[test]
    fn alr_without_constraints_is_window() {
        let c = ctx(0.0, 0.0, 10.0, 10.0);
        let mut s = near_space(0.0, 0.0, 1.0);
        s.constraining = false;
        let alr = derive_alr(&[s], &c).unwrap();
        assert!(alr.low_confidence);
        assert!(alr.region.contains_point(Point::new(10.0, 10.0)));
    }
}
