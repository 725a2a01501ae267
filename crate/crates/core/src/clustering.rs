//! Density-based disambiguation of anchor places.
//!
//! Candidate gazetteer entries of all anchor places form a point cloud. A
//! distance-interval K function measures neighbour density in annuli
//! `(d - Δd, d]`; the cluster distance is the smallest `d` at or beyond the
//! density peak whose density reaches `mean + 3σ`. Points linked within that
//! distance form clusters, ranked by size, and each anchor takes its entry from
//! the best-ranked cluster that holds one.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::f64::consts::PI;

use geo::{Point, Rect};
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::ClusterError;
use crate::gazetteer::GazetteerEntry;
use crate::spatial::SpatialContext;

pub const DEFAULT_DELTA_D: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KBin {
    /// Upper end of the interval `(d - Δd, d]`.
    pub d: f64,
    /// Neighbour count summed over all points (each unordered pair counts twice).
    pub neighbor_count: u64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KFunctionProfile {
    pub delta_d: f64,
    pub n: usize,
    pub max_distance: f64,
    pub bins: Vec<KBin>,
}

impl KFunctionProfile {
    pub fn values(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.bins.iter().map(|b| (b.d, b.k))
    }

    /// `d,k` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,k\n");
        for b in &self.bins {
            out.push_str(&format!("{},{:e}\n", b.d, b.k));
        }
        out
    }
}

/// Upper end of bin `k` (zero-based) is `(k + 1) * Δd`.
fn bin_upper(k: usize, delta_d: f64) -> f64 {
    (k + 1) as f64 * delta_d
}

/// Index of the bin `(k Δd, (k+1) Δd]` containing `r`; `None` for `r <= 0`.
fn bin_index(r: f64, delta_d: f64) -> Option<usize> {
    if r <= 0.0 {
        return None;
    }
    let mut k = ((r / delta_d).ceil() as usize).saturating_sub(1);
    while k > 0 && r <= k as f64 * delta_d {
        k -= 1;
    }
    while r > bin_upper(k, delta_d) {
        k += 1;
    }
    Some(k)
}

fn dist(a: Point<f64>, b: Point<f64>) -> f64 {
    (a.x() - b.x()).hypot(a.y() - b.y())
}

/// Distance-interval K function over intervals `Δd, 2Δd, …, ceil(max/Δd)·Δd`.
pub fn k_function(points: &[Point<f64>], delta_d: f64) -> Result<KFunctionProfile, ClusterError> {
    if points.len() < 2 {
        return Err(ClusterError::TooFewPoints(points.len()));
    }
    if !(delta_d > 0.0 && delta_d.is_finite()) {
        return Err(ClusterError::InvalidInterval(delta_d));
    }
    let n = points.len();
    let max_distance = (0..n)
        .into_par_iter()
        .map(|i| points[i + 1..].iter().map(|q| dist(points[i], *q)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    let n_bins = bin_index(max_distance, delta_d).map_or(1, |k| k + 1);

    let counts = (0..n)
        .into_par_iter()
        .fold(
            || vec![0u64; n_bins],
            |mut acc, i| {
                for q in &points[i + 1..] {
                    if let Some(k) = bin_index(dist(points[i], *q), delta_d) {
                        acc[k] += 2;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n_bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(k, neighbor_count)| {
            let outer = bin_upper(k, delta_d);
            let inner = k as f64 * delta_d;
            let annulus = PI * outer * outer - PI * inner * inner;
            KBin {
                d: outer,
                neighbor_count,
                k: neighbor_count as f64 / (n as f64 * annulus),
            }
        })
        .collect();
    Ok(KFunctionProfile {
        delta_d,
        n,
        max_distance,
        bins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterDistance {
    pub distance: f64,
    pub threshold: f64,
    pub argmax_distance: f64,
    /// All densities are equal (zero variance); the result is not meaningful.
    pub degenerate: bool,
}

/// Minimum `d` with `K(d) >= mean + 3σ` and `d >= argmax K` (population σ).
pub fn cluster_distance(profile: &KFunctionProfile) -> Result<ClusterDistance, ClusterError> {
    let ks: Vec<f64> = profile.bins.iter().map(|b| b.k).collect();
    if ks.is_empty() {
        return Err(ClusterError::NoClusterSignal);
    }
    let (mut argmax, mut kmax) = (0usize, ks[0]);
    for (i, k) in ks.iter().enumerate() {
        if *k > kmax {
            argmax = i;
            kmax = *k;
        }
    }
    let argmax_distance = profile.bins[argmax].d;
    let kmin = ks.iter().copied().fold(f64::INFINITY, f64::min);
    if kmin == kmax {
        return Ok(ClusterDistance {
            distance: profile.bins[0].d,
            threshold: kmax,
            argmax_distance,
            degenerate: true,
        });
    }
    let n = ks.len() as f64;
    let mean = ks.iter().sum::<f64>() / n;
    let var = ks.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / n;
    let threshold = mean + 3.0 * var.sqrt();
    profile
        .bins
        .iter()
        .find(|b| b.k >= threshold && b.d >= argmax_distance)
        .map(|b| ClusterDistance {
            distance: b.d,
            threshold,
            argmax_distance,
            degenerate: false,
        })
        .ok_or(ClusterError::NoClusterSignal)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterPoint {
    /// Gazetteer entry id.
    pub id: String,
    /// Anchor places that retrieved this entry.
    pub owners: Vec<String>,
    #[serde(skip)]
    pub point: Point<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Zero-based position after ranking.
    pub rank: usize,
    /// Sorted by id.
    pub members: Vec<ClusterPoint>,
    pub bbox: Rect<f64>,
}

impl Cluster {
    pub fn contains(&self, entry_id: &str) -> bool {
        self.members.binary_search_by(|m| m.id.as_str().cmp(entry_id)).is_ok()
    }

    pub fn context(&self) -> SpatialContext {
        SpatialContext::new(self.bbox)
    }

    fn bbox_area(&self) -> f64 {
        self.bbox.width() * self.bbox.height()
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage components under `dist <= cluster_distance`; singletons are
/// dropped. Ranked by size (descending), then bounding-box area, then smallest id.
pub fn compute_clusters(points: &[ClusterPoint], cluster_distance: f64) -> Vec<Cluster> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if dist(points[i].point, points[j].point) <= cluster_distance {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: IndexMap<usize, Vec<usize>> = IndexMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_values()
        .filter(|g| g.len() >= 2)
        .map(|g| {
            let mut members: Vec<ClusterPoint> = g.iter().map(|i| points[*i].clone()).collect();
            members.sort_by(|a, b| a.id.cmp(&b.id));
            let pts: Vec<Point<f64>> = members.iter().map(|m| m.point).collect();
            let bbox = SpatialContext::from_points(&pts).expect("non-empty").bbox();
            Cluster { rank: 0, members, bbox }
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then_with(|| a.bbox_area().partial_cmp(&b.bbox_area()).unwrap_or(Ordering::Equal))
            .then_with(|| a.members[0].id.cmp(&b.members[0].id))
    });
    for (rank, c) in clusters.iter_mut().enumerate() {
        c.rank = rank;
    }
    clusters
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum AnchorOutcome {
    /// `cluster_rank` is `None` when there was nothing to cluster.
    Assigned {
        entry_id: String,
        cluster_rank: Option<usize>,
    },
    /// Several of the anchor's entries fall in the same cluster.
    Ambiguous {
        entry_ids: Vec<String>,
        cluster_rank: usize,
    },
    /// None of the anchor's entries belong to any cluster.
    Unclustered,
}

#[derive(Debug, Clone)]
pub struct Disambiguation {
    pub outcomes: IndexMap<String, AnchorOutcome>,
    pub clusters: Vec<Cluster>,
    pub profile: Option<KFunctionProfile>,
    pub cluster_distance: Option<ClusterDistance>,
    /// The density rule gave no usable distance, so all points formed one cluster.
    pub fallback: bool,
}

/// Chooses one gazetteer entry per anchor place by iterating clusters in rank order.
pub fn disambiguate_anchors(
    candidates: &IndexMap<String, Vec<&GazetteerEntry>>,
    delta_d: f64,
) -> Result<Disambiguation, ClusterError> {
    if candidates.values().all(|v| v.is_empty()) {
        return Err(ClusterError::NoCandidates);
    }

    let mut points: IndexMap<String, ClusterPoint> = IndexMap::new();
    for (place, entries) in candidates {
        for e in entries {
            let p = points.entry(e.entry_id.clone()).or_insert_with(|| ClusterPoint {
                id: e.entry_id.clone(),
                owners: Vec::new(),
                point: e.footprint.centroid(),
            });
            if !p.owners.contains(place) {
                p.owners.push(place.clone());
            }
        }
    }
    let points: Vec<ClusterPoint> = points.into_values().collect();

    if points.len() < 2 {
        let outcomes = candidates
            .iter()
            .map(|(place, entries)| {
                let outcome = match entries.first() {
                    Some(e) => AnchorOutcome::Assigned {
                        entry_id: e.entry_id.clone(),
                        cluster_rank: None,
                    },
                    None => AnchorOutcome::Unclustered,
                };
                (place.clone(), outcome)
            })
            .collect();
        return Ok(Disambiguation {
            outcomes,
            clusters: Vec::new(),
            profile: None,
            cluster_distance: None,
            fallback: false,
        });
    }

    let coords: Vec<Point<f64>> = points.iter().map(|p| p.point).collect();
    let profile = k_function(&coords, delta_d)?;
    let (cd, fallback) = match cluster_distance(&profile) {
        Ok(cd) if !cd.degenerate => (Some(cd), false),
        Ok(cd) => (Some(cd), true),
        Err(ClusterError::NoClusterSignal) => (None, true),
        Err(e) => return Err(e),
    };
    let linkage = if fallback {
        log::info!("no density peak in candidate cloud; treating all candidates as one cluster");
        profile.max_distance
    } else {
        cd.expect("set when not falling back").distance
    };
    let clusters = compute_clusters(&points, linkage);

    let mut outcomes: IndexMap<String, AnchorOutcome> = IndexMap::new();
    for cluster in &clusters {
        for (place, entries) in candidates {
            if outcomes.contains_key(place) {
                continue;
            }
            let inside: BTreeSet<&str> = entries
                .iter()
                .map(|e| e.entry_id.as_str())
                .filter(|id| cluster.contains(id))
                .collect();
            match inside.len() {
                0 => {}
                1 => {
                    outcomes.insert(
                        place.clone(),
                        AnchorOutcome::Assigned {
                            entry_id: inside.into_iter().next().unwrap().to_string(),
                            cluster_rank: Some(cluster.rank),
                        },
                    );
                }
                _ => {
                    outcomes.insert(
                        place.clone(),
                        AnchorOutcome::Ambiguous {
                            entry_ids: inside.into_iter().map(str::to_string).collect(),
                            cluster_rank: cluster.rank,
                        },
                    );
                }
            }
        }
    }
    let outcomes = candidates
        .keys()
        .map(|place| {
            let o = outcomes.swap_remove(place).unwrap_or(AnchorOutcome::Unclustered);
            (place.clone(), o)
        })
        .collect();

    Ok(Disambiguation {
        outcomes,
        clusters,
        profile: Some(profile),
        cluster_distance: cd,
        fallback,
    })
}
