#![allow(dead_code)]

use std::path::PathBuf;

use georef_core::evaluation::AnnotationSet;
use georef_core::gazetteer::{load_gazetteer, GazetteerOptions};
use georef_core::graph::ParseMode;
use georef_core::{Footprint, Gazetteer, PlaceGraph};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// The six-place sample graph with its planar gazetteer and annotations.
pub fn sample() -> (PlaceGraph, Gazetteer, AnnotationSet) {
    let graph = PlaceGraph::from_json(&read_fixture("sample_graph.json"), ParseMode::Strict).unwrap();
    let gaz = load_gazetteer(
        &read_fixture("sample_gazetteer.geojson"),
        GazetteerOptions { projected: true },
    )
    .unwrap();
    let ann = AnnotationSet::from_json(&read_fixture("sample_annotations.json")).unwrap();
    (graph, gaz, ann)
}

/// Euclidean distance from a point to a segment.
pub fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Even-odd point-in-ring test; boundary handling is left to the caller.
pub fn point_in_ring(p: (f64, f64), ring: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > p.1) != (yj > p.1) && p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn ring_coords(fp: &Footprint) -> Vec<(f64, f64)> {
    match fp {
        Footprint::Point(p) => vec![(p.x(), p.y())],
        Footprint::Polyline(l) => l.0.iter().map(|c| (c.x, c.y)).collect(),
        Footprint::Polygon(poly) => poly.exterior().0.iter().map(|c| (c.x, c.y)).collect(),
    }
}

/// Distance from `p` to a footprint (zero inside a polygon).
pub fn distance_to_footprint(p: (f64, f64), fp: &Footprint) -> f64 {
    let pts = ring_coords(fp);
    if pts.len() == 1 {
        return ((p.0 - pts[0].0).powi(2) + (p.1 - pts[0].1).powi(2)).sqrt();
    }
    if matches!(fp, Footprint::Polygon(_)) && point_in_ring(p, &pts) {
        return 0.0;
    }
    pts.windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Distance from `p` to the boundary of a polygon footprint.
pub fn distance_to_boundary(p: (f64, f64), fp: &Footprint) -> f64 {
    ring_coords(fp)
        .windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}
