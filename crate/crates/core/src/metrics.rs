//! The ten readability metrics, computed from node coordinates.
//!
//! | field | meaning |
//! |---|---|
//! | `n_n`, `e_n`, `n_c` | node, edge and community counts |
//! | `n_sp` | node spread: per community, mean distance to the community centroid, summed over communities |
//! | `n_oc` | node occlusions: node pairs whose discs overlap |
//! | `e_c` | edge crossings |
//! | `e_c_outside` | crossings between two inter-community edges |
//! | `m_a` | minimum angle score in `[0, 1]` |
//! | `m_l` | edge length variation in `[0, 1]` |
//! | `g_o` | group overlap: community pairs whose convex hulls meet |

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{convex_hull, hulls_intersect, segments_cross, Point};
use crate::graph::Graph;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("metric needs community labels")]
    MissingCommunities,
    #[error("metric needs at least one edge")]
    NoEdges,
    #[error("{positions} positions for {nodes} nodes")]
    PositionCount { positions: usize, nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeStyle {
    pub radius: f64,
    pub link_width: f64,
}

impl Default for NodeStyle {
    fn default() -> Self {
        NodeStyle { radius: 8.0, link_width: 0.5 }
    }
}

/// How the per-node angle deviation is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AngleNormalization {
    /// `|φ_min − φ| / φ_min`, always in `[0, 1]`.
    #[default]
    IdealAngle,
    /// `(φ − φ_min) / φ` exactly as commonly printed; unbounded, and
    /// infinite when two incident edges coincide.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub n_n: u64,
    pub e_n: u64,
    pub n_c: u64,
    pub n_sp: f64,
    pub n_oc: u64,
    pub e_c: u64,
    pub e_c_outside: u64,
    pub m_a: f64,
    pub m_l: f64,
    pub g_o: u64,
}

impl MetricVector {
    pub const NAMES: [&'static str; 10] =
        ["n_n", "e_n", "n_c", "n_sp", "n_oc", "e_c", "e_c_outside", "m_a", "m_l", "g_o"];

    /// Values in [`MetricVector::NAMES`] order.
    pub fn values(&self) -> [f64; 10] {
        [
            self.n_n as f64,
            self.e_n as f64,
            self.n_c as f64,
            self.n_sp,
            self.n_oc as f64,
            self.e_c as f64,
            self.e_c_outside as f64,
            self.m_a,
            self.m_l,
            self.g_o as f64,
        ]
    }
}

fn check_positions(graph: &Graph, positions: &[Point]) -> Result<(), MetricsError> {
    if positions.len() != graph.node_count() {
        return Err(MetricsError::PositionCount { positions: positions.len(), nodes: graph.node_count() });
    }
    Ok(())
}

/// `(N_n, E_n, N_c)`; `N_c` is 0 for an unlabeled graph.
pub fn counts(graph: &Graph) -> (u64, u64, u64) {
    (graph.node_count() as u64, graph.edge_count() as u64, graph.community_count() as u64)
}

fn groups(labels: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (v, &c) in labels.iter().enumerate() {
        out.entry(c).or_default().push(v);
    }
    out
}

pub fn node_spread(graph: &Graph, positions: &[Point]) -> Result<f64, MetricsError> {
    check_positions(graph, positions)?;
    let labels = graph.communities().ok_or(MetricsError::MissingCommunities)?;
    let mut total = 0.0;
    for members in groups(labels).values() {
        let size = members.len() as f64;
        let cx = members.iter().map(|&v| positions[v].x).sum::<f64>() / size;
        let cy = members.iter().map(|&v| positions[v].y).sum::<f64>() / size;
        let centroid = Point::new(cx, cy);
        total += members.iter().map(|&v| positions[v].dist(centroid)).sum::<f64>() / size;
    }
    Ok(total)
}

/// Node pairs whose centers are closer than one diameter. Uses a uniform
/// grid of diameter-sized cells, so only neighboring cells are compared.
pub fn node_occlusions(positions: &[Point], style: &NodeStyle) -> u64 {
    let diameter = 2.0 * style.radius;
    let limit = diameter * diameter;
    let cell_of = |p: Point| ((p.x / diameter).floor() as i64, (p.y / diameter).floor() as i64);
    let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in positions.iter().enumerate() {
        cells.entry(cell_of(p)).or_default().push(i);
    }
    let mut count = 0u64;
    for (i, &p) in positions.iter().enumerate() {
        let (cx, cy) = cell_of(p);
        for gx in cx - 1..=cx + 1 {
            for gy in cy - 1..=cy + 1 {
                if let Some(members) = cells.get(&(gx, gy)) {
                    count += members
                        .iter()
                        .filter(|&&j| j > i && p.dist2(positions[j]) < limit)
                        .count() as u64;
                }
            }
        }
    }
    count
}

/// `(E_c, E_c_outside)`. The second value is `None` without community labels.
///
/// Edges are swept in order of their left x-extent; only pairs whose x
/// extents overlap reach the segment test. Edges sharing an endpoint never
/// count.
pub fn edge_crossings(
    graph: &Graph,
    positions: &[Point],
) -> Result<(u64, Option<u64>), MetricsError> {
    check_positions(graph, positions)?;
    let labels = graph.communities();
    let edges = graph.edges();
    struct Seg {
        u: usize,
        v: usize,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        inter: bool,
    }
    let mut segs: Vec<Seg> = edges
        .iter()
        .map(|&(u, v)| {
            let (a, b) = (positions[u], positions[v]);
            Seg {
                u,
                v,
                x0: a.x.min(b.x),
                x1: a.x.max(b.x),
                y0: a.y.min(b.y),
                y1: a.y.max(b.y),
                inter: labels.is_some_and(|l| l[u] != l[v]),
            }
        })
        .collect();
    segs.sort_by(|a, b| a.x0.total_cmp(&b.x0));

    let (mut all, mut outside) = (0u64, 0u64);
    for (i, s) in segs.iter().enumerate() {
        for t in &segs[i + 1..] {
            if t.x0 > s.x1 {
                break;
            }
            if t.y0 > s.y1 || s.y0 > t.y1 {
                continue;
            }
            if s.u == t.u || s.u == t.v || s.v == t.u || s.v == t.v {
                continue;
            }
            if segments_cross(positions[s.u], positions[s.v], positions[t.u], positions[t.v]) {
                all += 1;
                if s.inter && t.inter {
                    outside += 1;
                }
            }
        }
    }
    Ok((all, labels.map(|_| outside)))
}

pub fn minimum_angle(graph: &Graph, positions: &[Point]) -> Result<f64, MetricsError> {
    minimum_angle_with(graph, positions, AngleNormalization::IdealAngle)
}

/// `1 −` the mean angle deviation over nodes of degree ≥ 2. Each such node's
/// smallest gap `φ` between angularly consecutive incident edges is compared
/// with the ideal `φ_min = 360° / deg`. A graph without such nodes scores 1.
pub fn minimum_angle_with(
    graph: &Graph,
    positions: &[Point],
    normalization: AngleNormalization,
) -> Result<f64, MetricsError> {
    check_positions(graph, positions)?;
    let mut total = 0.0;
    let mut contributing = 0usize;
    let mut angles = Vec::new();
    for v in 0..graph.node_count() {
        let nbrs = graph.neighbors(v);
        if nbrs.len() < 2 {
            continue;
        }
        let origin = positions[v];
        angles.clear();
        angles.extend(nbrs.iter().map(|&u| {
            let p = positions[u];
            (p.y - origin.y).atan2(p.x - origin.x).to_degrees().rem_euclid(360.0)
        }));
        angles.sort_by(f64::total_cmp);
        let wrap = 360.0 - angles[angles.len() - 1] + angles[0];
        let smallest = angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::min);
        let ideal = 360.0 / nbrs.len() as f64;
        total += match normalization {
            AngleNormalization::IdealAngle => (ideal - smallest).abs() / ideal,
            AngleNormalization::Printed => (smallest - ideal) / smallest,
        };
        contributing += 1;
    }
    if contributing == 0 {
        return Ok(1.0);
    }
    Ok(1.0 - total / contributing as f64)
}

/// Coefficient of variation of edge lengths, normalized by `sqrt(|E| − 1)`.
/// A single edge, or edges all of zero length, give 0.
pub fn edge_length_variation(graph: &Graph, positions: &[Point]) -> Result<f64, MetricsError> {
    check_positions(graph, positions)?;
    let m = graph.edge_count();
    if m == 0 {
        return Err(MetricsError::NoEdges);
    }
    if m == 1 {
        return Ok(0.0);
    }
    let lengths: Vec<f64> =
        graph.edges().iter().map(|&(u, v)| positions[u].dist(positions[v])).collect();
    let mean = lengths.iter().sum::<f64>() / m as f64;
    if mean == 0.0 {
        return Ok(0.0);
    }
    let spread = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>();
    let la = (spread / (m as f64 * mean * mean)).sqrt();
    Ok(la / ((m - 1) as f64).sqrt())
}

/// Community pairs whose convex hulls of node centers intersect, touch, or
/// nest. One-node communities are points and collinear ones are segments.
pub fn group_overlap(graph: &Graph, positions: &[Point]) -> Result<u64, MetricsError> {
    check_positions(graph, positions)?;
    let labels = graph.communities().ok_or(MetricsError::MissingCommunities)?;
    struct Group {
        hull: Vec<Point>,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    }
    let hulls: Vec<Group> = groups(labels)
        .values()
        .map(|members| {
            let pts: Vec<Point> = members.iter().map(|&v| positions[v]).collect();
            let hull = convex_hull(&pts);
            let bound = |f: fn(&Point) -> f64, pick: fn(f64, f64) -> f64, start: f64| {
                hull.iter().map(f).fold(start, pick)
            };
            Group {
                x0: bound(|p| p.x, f64::min, f64::INFINITY),
                x1: bound(|p| p.x, f64::max, f64::NEG_INFINITY),
                y0: bound(|p| p.y, f64::min, f64::INFINITY),
                y1: bound(|p| p.y, f64::max, f64::NEG_INFINITY),
                hull,
            }
        })
        .collect();
    let mut count = 0u64;
    for (i, a) in hulls.iter().enumerate() {
        for b in &hulls[i + 1..] {
            if a.x1 < b.x0 || b.x1 < a.x0 || a.y1 < b.y0 || b.y1 < a.y0 {
                continue;
            }
            if hulls_intersect(&a.hull, &b.hull) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// All ten metrics. Needs community labels. A graph without edges gets
/// `m_l = 0` rather than an error.
pub fn compute_all(
    graph: &Graph,
    positions: &[Point],
    style: &NodeStyle,
) -> Result<MetricVector, MetricsError> {
    check_positions(graph, positions)?;
    if graph.communities().is_none() {
        return Err(MetricsError::MissingCommunities);
    }
    let (n_n, e_n, n_c) = counts(graph);
    let (e_c, e_c_outside) = edge_crossings(graph, positions)?;
    let m_l = match edge_length_variation(graph, positions) {
        Err(MetricsError::NoEdges) => 0.0,
        other => other?,
    };
    Ok(MetricVector {
        n_n,
        e_n,
        n_c,
        n_sp: node_spread(graph, positions)?,
        n_oc: node_occlusions(positions, style),
        e_c,
        e_c_outside: e_c_outside.unwrap_or(0),
        m_a: minimum_angle(graph, positions)?,
        m_l,
        g_o: group_overlap(graph, positions)?,
    })
}
