//! Planar primitives shared by the layout engine and the metric kernels.

use serde::{Deserialize, Serialize};

/// Tolerance on twice the signed triangle area, in px².
pub const ORIENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist2(self, other: Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
    Collinear,
}

/// Twice the signed area of `abc`.
#[inline]
pub fn cross(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> Orientation {
    let det = cross(a, b, c);
    if det > ORIENT_EPS {
        Orientation::CounterClockwise
    } else if det < -ORIENT_EPS {
        Orientation::Clockwise
    } else {
        Orientation::Collinear
    }
}

/// Length of the overlap of two collinear segments, measured along the
/// dominant axis of their combined extent.
fn collinear_overlap(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let span_x = a.x.max(b.x).max(c.x).max(d.x) - a.x.min(b.x).min(c.x).min(d.x);
    let span_y = a.y.max(b.y).max(c.y).max(d.y) - a.y.min(b.y).min(c.y).min(d.y);
    let key = |p: Point| if span_x >= span_y { p.x } else { p.y };
    let (a0, a1) = (key(a).min(key(b)), key(a).max(key(b)));
    let (c0, c1) = (key(c).min(key(d)), key(c).max(key(d)));
    a1.min(c1) - a0.max(c0)
}

/// Whether the open segments `ab` and `cd` cross: a proper interior crossing,
/// or a collinear overlap of positive length. Touching at an endpoint does
/// not count.
pub fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    use Orientation::Collinear;
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 != Collinear && o2 != Collinear && o3 != Collinear && o4 != Collinear {
        return o1 != o2 && o3 != o4;
    }
    if o1 == Collinear && o2 == Collinear && o3 == Collinear && o4 == Collinear {
        return collinear_overlap(a, b, c, d) > ORIENT_EPS.sqrt();
    }
    false
}

/// Convex hull of a point set, counter-clockwise without collinear vertices.
/// Degenerate inputs give one vertex (all points equal) or two (all collinear).
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= ORIENT_EPS
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        // Collinear input: keep the two extremes.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

/// Whether two convex hulls (as returned by [`convex_hull`]) share at least
/// one point, including touching boundaries and containment.
///
/// Separating-axis test over the edge normals of both hulls; degenerate hulls
/// (points, segments) contribute their direction and the offset between them
/// as extra candidate axes.
pub fn hulls_intersect(p: &[Point], q: &[Point]) -> bool {
    if p.is_empty() || q.is_empty() {
        return false;
    }
    let mut axes: Vec<(f64, f64)> = Vec::new();
    for hull in [p, q] {
        if hull.len() >= 2 {
            for i in 0..hull.len() {
                let a = hull[i];
                let b = hull[(i + 1) % hull.len()];
                axes.push((a.y - b.y, b.x - a.x));
                if hull.len() == 2 {
                    axes.push((b.x - a.x, b.y - a.y));
                }
            }
        }
    }
    if p.len() == 1 || q.len() == 1 {
        axes.push((q[0].x - p[0].x, q[0].y - p[0].y));
    }
    for (ax, ay) in axes {
        let norm = ax.hypot(ay);
        if norm == 0.0 {
            continue;
        }
        let (ax, ay) = (ax / norm, ay / norm);
        let project = |hull: &[Point]| {
            hull.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let t = v.x * ax + v.y * ay;
                (lo.min(t), hi.max(t))
            })
        };
        let (p0, p1) = project(p);
        let (q0, q1) = project(q);
        if p1 < q0 - ORIENT_EPS || q1 < p0 - ORIENT_EPS {
            return false;
        }
    }
    true
}
