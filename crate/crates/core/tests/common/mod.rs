//! Brute-force and direct-formula reference implementations, written
//! independently of the library kernels, plus random instance builders.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use readability_core::geometry::Point;
use readability_core::graph::Graph;
use readability_core::seed;

pub struct Instance {
    pub graph: Graph,
    pub positions: Vec<Point>,
}

/// Random labeled graph with at most `max_nodes` nodes and uniform random
/// positions in a box whose size also varies, so occlusions happen.
pub fn random_instance(seed_value: u64, max_nodes: usize) -> Instance {
    let mut rng = seed::rng(seed_value);
    let n = rng.random_range(2..=max_nodes);
    let p = rng.random_range(0.03..0.3);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    let k = rng.random_range(1..=8u32.min(n as u32));
    let labels: Vec<u32> = (0..n).map(|v| if (v as u32) < k { v as u32 } else { rng.random_range(0..k) }).collect();
    let side = rng.random_range(60.0..1620.0);
    let positions = (0..n).map(|_| Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side * 0.83))).collect();
    Instance { graph: Graph::new(n, edges).unwrap().with_communities(labels).unwrap(), positions }
}

/// Random labeled graph on a coarse integer grid: many collinear triples,
/// shared points, touching segments and tangent discs.
pub fn grid_instance(seed_value: u64, max_nodes: usize) -> Instance {
    let mut rng = seed::rng(seed_value);
    let n = rng.random_range(2..=max_nodes);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(0.2) {
                edges.push((u, v));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    let k = rng.random_range(1..=5u32.min(n as u32));
    let labels: Vec<u32> = (0..n).map(|v| if (v as u32) < k { v as u32 } else { rng.random_range(0..k) }).collect();
    let positions = (0..n)
        .map(|_| Point::new(16.0 * rng.random_range(0..5) as f64, 16.0 * rng.random_range(0..5) as f64))
        .collect();
    Instance { graph: Graph::new(n, edges).unwrap().with_communities(labels).unwrap(), positions }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

pub fn oracle_occlusions(positions: &[Point], radius: f64) -> u64 {
    let mut count = 0;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let d = ((positions[i].x - positions[j].x).powi(2) + (positions[i].y - positions[j].y).powi(2)).sqrt();
            if d < 2.0 * radius {
                count += 1;
            }
        }
    }
    count
}

fn sign(v: f64) -> i32 {
    if v > 1e-9 {
        1
    } else if v < -1e-9 {
        -1
    } else {
        0
    }
}

fn orient(a: Point, b: Point, c: Point) -> i32 {
    sign((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

/// Whether `c` lies on the closed segment `ab`, given collinearity.
fn within(a: Point, b: Point, c: Point) -> bool {
    c.x >= a.x.min(b.x) - 1e-12 && c.x <= a.x.max(b.x) + 1e-12 && c.y >= a.y.min(b.y) - 1e-12 && c.y <= a.y.max(b.y) + 1e-12
}

/// Open-segment crossing: proper intersection, or collinear overlap of
/// positive length (measured by projecting onto the longer segment).
fn open_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    if o1 == 0 && o2 == 0 {
        let (p, q, r, s) = if a.dist2(b) >= c.dist2(d) { (a, b, c, d) } else { (c, d, a, b) };
        let len = p.dist(q);
        if len == 0.0 {
            return false;
        }
        let (ux, uy) = ((q.x - p.x) / len, (q.y - p.y) / len);
        let t = |z: Point| (z.x - p.x) * ux + (z.y - p.y) * uy;
        let (r0, r1) = (t(r).min(t(s)), t(r).max(t(s)));
        return r1.min(len) - r0.max(0.0) > 1e-4;
    }
    false
}

/// All pairs of edges without a shared endpoint.
pub fn oracle_crossings(graph: &Graph, positions: &[Point]) -> (u64, u64) {
    let labels = graph.communities().unwrap();
    let edges = graph.edges();
    let (mut all, mut outside) = (0, 0);
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            let (a, b) = edges[i];
            let (c, d) = edges[j];
            if a == c || a == d || b == c || b == d {
                continue;
            }
            if open_cross(positions[a], positions[b], positions[c], positions[d]) {
                all += 1;
                if labels[a] != labels[b] && labels[c] != labels[d] {
                    outside += 1;
                }
            }
        }
    }
    (all, outside)
}

/// Gift-wrapping hull keeping only strict turns; one or two points for
/// degenerate sets.
fn jarvis_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::new();
    for &p in points {
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    if pts.len() <= 1 {
        return pts;
    }
    let start = *pts.iter().min_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))).unwrap();
    let mut hull = vec![start];
    let mut current = start;
    loop {
        let mut next = if pts[0] == current { pts[1] } else { pts[0] };
        for &cand in &pts {
            if cand == current {
                continue;
            }
            let o = orient(current, next, cand);
            // Prefer the most clockwise candidate; on ties the farthest one.
            if o < 0 || (o == 0 && current.dist2(cand) > current.dist2(next)) {
                next = cand;
            }
        }
        if next == start || hull.len() > pts.len() {
            break;
        }
        hull.push(next);
        current = next;
    }
    hull
}

fn closed_segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && within(a, b, c)) || (o2 == 0 && within(a, b, d)) || (o3 == 0 && within(c, d, a)) || (o4 == 0 && within(c, d, b))
}

/// Point inside or on a convex polygon given in either orientation.
fn in_polygon(poly: &[Point], p: Point) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let signs: Vec<i32> = (0..poly.len()).map(|i| orient(poly[i], poly[(i + 1) % poly.len()], p)).collect();
    signs.iter().all(|&s| s >= 0) || signs.iter().all(|&s| s <= 0)
}

fn polygons_meet(p: &[Point], q: &[Point]) -> bool {
    let edges = |h: &[Point]| -> Vec<(Point, Point)> {
        match h.len() {
            1 => vec![(h[0], h[0])],
            2 => vec![(h[0], h[1])],
            n => (0..n).map(|i| (h[i], h[(i + 1) % n])).collect(),
        }
    };
    for (a, b) in edges(p) {
        for (c, d) in edges(q) {
            if closed_segments_touch(a, b, c, d) {
                return true;
            }
        }
    }
    in_polygon(p, q[0]) || in_polygon(q, p[0])
}

pub fn oracle_group_overlap(graph: &Graph, positions: &[Point]) -> u64 {
    let labels = graph.communities().unwrap();
    let mut groups: HashMap<u32, Vec<Point>> = HashMap::new();
    for (v, &c) in labels.iter().enumerate() {
        groups.entry(c).or_default().push(positions[v]);
    }
    let hulls: Vec<Vec<Point>> = groups.values().map(|pts| jarvis_hull(pts)).collect();
    let mut count = 0;
    for i in 0..hulls.len() {
        for j in i + 1..hulls.len() {
            if polygons_meet(&hulls[i], &hulls[j]) {
                count += 1;
            }
        }
    }
    count
}

pub fn oracle_spread(graph: &Graph, positions: &[Point]) -> f64 {
    let labels = graph.communities().unwrap();
    let mut groups: HashMap<u32, Vec<Point>> = HashMap::new();
    for (v, &c) in labels.iter().enumerate() {
        groups.entry(c).or_default().push(positions[v]);
    }
    groups
        .values()
        .map(|pts| {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.x).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.y).sum::<f64>() / n;
            pts.iter().map(|p| ((p.x - mx).powi(2) + (p.y - my).powi(2)).sqrt()).sum::<f64>() / n
        })
        .sum()
}

/// Smallest pairwise angular separation instead of sorting; averages over
/// nodes of degree at least two.
pub fn oracle_min_angle(graph: &Graph, positions: &[Point]) -> f64 {
    let mut deviations = Vec::new();
    for v in 0..graph.node_count() {
        let nbrs = graph.neighbors(v);
        if nbrs.len() < 2 {
            continue;
        }
        let angles: Vec<f64> = nbrs
            .iter()
            .map(|&u| (positions[u].y - positions[v].y).atan2(positions[u].x - positions[v].x).to_degrees())
            .collect();
        let mut smallest = f64::INFINITY;
        for i in 0..angles.len() {
            for j in i + 1..angles.len() {
                let d = (angles[i] - angles[j]).abs();
                smallest = smallest.min(d.min(360.0 - d));
            }
        }
        let ideal = 360.0 / nbrs.len() as f64;
        deviations.push((ideal - smallest).abs() / ideal);
    }
    if deviations.is_empty() {
        return 1.0;
    }
    1.0 - deviations.iter().sum::<f64>() / deviations.len() as f64
}

pub fn oracle_length_variation(graph: &Graph, positions: &[Point]) -> f64 {
    let lengths: Vec<f64> = graph.edges().iter().map(|&(u, v)| positions[u].dist(positions[v])).collect();
    let m = lengths.len() as f64;
    if lengths.len() < 2 {
        return 0.0;
    }
    let mean = lengths.iter().sum::<f64>() / m;
    if mean == 0.0 {
        return 0.0;
    }
    let la = (lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (m * mean * mean)).sqrt();
    la / (m - 1.0).sqrt()
}

/// Textbook interval: mean ± 1.96·σ/√N of |x − y|, σ the population
/// deviation computed from Σz² − N·μ².
pub fn oracle_interval(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - b).abs()).collect();
    let mu = z.iter().sum::<f64>() / n;
    let var = (z.iter().map(|v| v * v).sum::<f64>() / n - mu * mu).max(0.0);
    let half = 1.96 * var.sqrt() / n.sqrt();
    (mu, mu - half, mu + half)
}

pub fn oracle_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss_tot: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - ss_res / ss_tot
}
