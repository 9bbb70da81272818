//! Force-directed layout in the style of the classic web force simulation:
//! Gauss-Seidel link relaxation, gravity toward the canvas center,
//! Barnes-Hut many-body charge, and position-Verlet integration with
//! friction, all scaled by a geometrically cooling `alpha`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::graph::Graph;
use crate::seed;

pub const CANVAS_WIDTH: f64 = 1620.0;
pub const CANVAS_HEIGHT: f64 = 1350.0;
pub const GRAVITY_GRID: [f64; 3] = [0.3, 0.4, 0.5];
pub const CHARGE_GRID: [f64; 3] = [-300.0, -400.0, -500.0];

pub const ALPHA_START: f64 = 0.1;
pub const ALPHA_DECAY: f64 = 0.99;
pub const ALPHA_MIN: f64 = 0.005;
/// Velocity retained per tick by the Verlet step.
pub const FRICTION: f64 = 0.9;
/// Largest per-axis jitter applied to exactly coincident nodes; keeps the
/// jitter vector shorter than 0.5 px.
const JITTER: f64 = 0.35;
/// Squared distance floor for charge interactions, px².
const MIN_DIST2: f64 = 1e-2;
const MAX_TREE_DEPTH: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("invalid force configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid positions file: {0}")]
    InvalidPositions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas { width: CANVAS_WIDTH, height: CANVAS_HEIGHT }
    }
}

impl Canvas {
    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceConfig {
    pub gravity: f64,
    /// Per-node charge; negative values repel.
    pub charge: f64,
    pub link_distance: f64,
    pub link_strength: f64,
    pub iterations: usize,
    /// Barnes-Hut opening criterion.
    pub theta: f64,
    pub canvas: Canvas,
    pub seed: u64,
}

impl Default for ForceConfig {
    fn default() -> Self {
        ForceConfig {
            gravity: 0.4,
            charge: -400.0,
            link_distance: 20.0,
            link_strength: 1.0,
            iterations: 300,
            theta: 0.8,
            canvas: Canvas::default(),
            seed: 0,
        }
    }
}

impl ForceConfig {
    pub fn new(gravity: f64, charge: f64, seed: u64) -> Self {
        ForceConfig { gravity, charge, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let bad = |m: String| Err(LayoutError::InvalidConfig(m));
        let finite = [self.gravity, self.charge, self.link_distance, self.link_strength, self.theta];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if self.charge > 0.0 {
            return bad(format!("charge {} must not be attractive", self.charge));
        }
        if self.gravity < 0.0 {
            return bad(format!("gravity {} must be non-negative", self.gravity));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.link_strength) {
            return bad(format!("link_strength {} outside [0, 1]", self.link_strength));
        }
        if self.link_distance < 0.0 || self.theta < 0.0 {
            return bad("link_distance and theta must be non-negative".into());
        }
        if !(self.canvas.width > 0.0 && self.canvas.height > 0.0) {
            return bad("canvas dimensions must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    pub positions: Vec<Point>,
    pub config: ForceConfig,
    /// Whether cooling reached the stop threshold before the iteration cap.
    pub converged: bool,
}

/// Per-tick total node displacement, in px.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayoutTrace {
    pub displacement: Vec<f64>,
}

pub fn run_layout(graph: &Graph, config: &ForceConfig) -> Result<LayoutResult, LayoutError> {
    run_layout_traced(graph, config).map(|(result, _)| result)
}

/// Runs the simulation, also returning how far the nodes moved on each tick.
pub fn run_layout_traced(
    graph: &Graph,
    config: &ForceConfig,
) -> Result<(LayoutResult, LayoutTrace), LayoutError> {
    config.validate()?;
    let mut sim = Simulation::new(graph, config);
    let mut trace = LayoutTrace::default();
    let mut converged = false;
    let mut alpha = ALPHA_START;
    for _ in 0..config.iterations {
        alpha *= ALPHA_DECAY;
        if alpha < ALPHA_MIN {
            converged = true;
            break;
        }
        trace.displacement.push(sim.tick(graph, alpha));
    }
    let canvas = config.canvas;
    let positions = sim
        .pos
        .iter()
        .map(|p| Point::new(p.x.clamp(0.0, canvas.width), p.y.clamp(0.0, canvas.height)))
        .collect();
    Ok((LayoutResult { positions, config: *config, converged }, trace))
}

/// The nine gravity × charge configurations, gravity-major, with seeds
/// `seed + index`.
pub fn grid_configs(seed: u64) -> Vec<ForceConfig> {
    GRAVITY_GRID
        .iter()
        .flat_map(|&g| CHARGE_GRID.iter().map(move |&c| (g, c)))
        .enumerate()
        .map(|(i, (g, c))| ForceConfig::new(g, c, seed.wrapping_add(i as u64)))
        .collect()
}

pub fn layout_grid(graph: &Graph, seed: u64) -> Vec<LayoutResult> {
    grid_configs(seed)
        .iter()
        .map(|cfg| run_layout(graph, cfg).expect("grid configurations are valid"))
        .collect()
}

/// One node of a positions file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

/// Serializes positions as a JSON array of `{id, x, y}` records.
pub fn positions_to_json(positions: &[Point]) -> String {
    let records: Vec<PositionRecord> = positions
        .iter()
        .enumerate()
        .map(|(id, p)| PositionRecord { id, x: p.x, y: p.y })
        .collect();
    serde_json::to_string(&records).expect("position records always serialize")
}

/// Parses a positions file. Records may come in any order but their ids must
/// be exactly `0..len` and coordinates finite.
pub fn positions_from_json(text: &str) -> Result<Vec<Point>, LayoutError> {
    let records: Vec<PositionRecord> =
        serde_json::from_str(text).map_err(|e| LayoutError::InvalidPositions(e.to_string()))?;
    let mut out = vec![None; records.len()];
    for r in &records {
        if !(r.x.is_finite() && r.y.is_finite()) {
            return Err(LayoutError::InvalidPositions(format!("node {} has a non-finite coordinate", r.id)));
        }
        match out.get_mut(r.id) {
            Some(slot @ None) => *slot = Some(Point::new(r.x, r.y)),
            Some(Some(_)) => return Err(LayoutError::InvalidPositions(format!("duplicate id {}", r.id))),
            None => return Err(LayoutError::InvalidPositions(format!("id {} out of range", r.id))),
        }
    }
    Ok(out.into_iter().map(|p| p.expect("every id seen once")).collect())
}

struct Simulation {
    pos: Vec<Point>,
    prev: Vec<Point>,
    weight: Vec<f64>,
    config: ForceConfig,
    rng: seed::Rng,
    tree: QuadTree,
}

impl Simulation {
    fn new(graph: &Graph, config: &ForceConfig) -> Self {
        let mut rng = seed::rng(config.seed);
        let Canvas { width, height } = config.canvas;
        let pos: Vec<Point> = (0..graph.node_count())
            .map(|_| {
                let x = width * (0.25 + 0.5 * rng.random::<f64>());
                let y = height * (0.25 + 0.5 * rng.random::<f64>());
                Point::new(x, y)
            })
            .collect();
        Simulation {
            prev: pos.clone(),
            pos,
            weight: (0..graph.node_count()).map(|v| graph.neighbors(v).len() as f64).collect(),
            config: *config,
            rng,
            tree: QuadTree::default(),
        }
    }

    /// Advances one tick; returns the summed distance the nodes moved.
    fn tick(&mut self, graph: &Graph, alpha: f64) -> f64 {
        let cfg = self.config;
        let start = self.pos.clone();

        for &(s, t) in graph.edges() {
            let dx = self.pos[t].x - self.pos[s].x;
            let dy = self.pos[t].y - self.pos[s].y;
            let l2 = dx * dx + dy * dy;
            if l2 > 0.0 {
                let l = l2.sqrt();
                let f = alpha * cfg.link_strength * (l - cfg.link_distance) / l;
                let (fx, fy) = (dx * f, dy * f);
                let k = self.weight[s] / (self.weight[s] + self.weight[t]);
                self.pos[t].x -= fx * k;
                self.pos[t].y -= fy * k;
                self.pos[s].x += fx * (1.0 - k);
                self.pos[s].y += fy * (1.0 - k);
            }
        }

        let k = alpha * cfg.gravity;
        if k != 0.0 {
            let c = cfg.canvas.center();
            for p in &mut self.pos {
                p.x += (c.x - p.x) * k;
                p.y += (c.y - p.y) * k;
            }
        }

        if cfg.charge != 0.0 && self.pos.len() > 1 {
            self.separate_coincident();
            self.tree.build(&self.pos);
            self.tree.accumulate(&self.pos, alpha * cfg.charge);
            let theta2 = cfg.theta * cfg.theta;
            for i in 0..self.pos.len() {
                let (dpx, dpy) = self.tree.repulse(i, &self.pos, theta2, alpha * cfg.charge);
                self.prev[i].x -= dpx;
                self.prev[i].y -= dpy;
            }
        }

        for (p, prev) in self.pos.iter_mut().zip(self.prev.iter_mut()) {
            let current = *p;
            p.x -= (prev.x - current.x) * FRICTION;
            p.y -= (prev.y - current.y) * FRICTION;
            *prev = current;
        }
        self.pos.iter().zip(&start).map(|(p, q)| p.dist(*q)).sum()
    }

    /// Jitters every node that sits exactly on another node.
    fn separate_coincident(&mut self) {
        loop {
            let mut order: Vec<usize> = (0..self.pos.len()).collect();
            order.sort_by(|&a, &b| {
                let (p, q) = (self.pos[a], self.pos[b]);
                p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)).then(a.cmp(&b))
            });
            let mut clean = true;
            for w in order.windows(2) {
                if self.pos[w[0]] == self.pos[w[1]] {
                    clean = false;
                    let j = w[1];
                    self.pos[j].x += self.rng.random_range(-JITTER..=JITTER);
                    self.pos[j].y += self.rng.random_range(-JITTER..=JITTER);
                }
            }
            if clean {
                return;
            }
        }
    }
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Quad {
    x0: f64,
    y0: f64,
    size: f64,
    children: [u32; 4],
    /// First point of a leaf's list; `NONE` for internal quads and empty leaves.
    head: u32,
    leaf: bool,
    charge: f64,
    cx: f64,
    cy: f64,
}

impl Quad {
    fn new(x0: f64, y0: f64, size: f64) -> Self {
        Quad { x0, y0, size, children: [NONE; 4], head: NONE, leaf: true, charge: 0.0, cx: 0.0, cy: 0.0 }
    }

    fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x0 + self.size && p.y >= self.y0 && p.y <= self.y0 + self.size
    }
}

/// Region quadtree over node positions. Leaves hold one point, except at the
/// depth limit where they keep a list.
#[derive(Debug, Default)]
struct QuadTree {
    quads: Vec<Quad>,
    next: Vec<u32>,
}

impl QuadTree {
    fn build(&mut self, pos: &[Point]) {
        self.quads.clear();
        self.next.clear();
        self.next.resize(pos.len(), NONE);
        let (mut x0, mut y0, mut x1, mut y1) =
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pos {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let size = (x1 - x0).max(y1 - y0).max(1e-9) * (1.0 + 1e-9);
        self.quads.push(Quad::new(x0, y0, size));
        for i in 0..pos.len() {
            self.insert(i, pos);
        }
    }

    fn child_slot(q: &Quad, p: Point) -> usize {
        let half = q.size / 2.0;
        let right = (p.x >= q.x0 + half) as usize;
        let below = (p.y >= q.y0 + half) as usize;
        right | (below << 1)
    }

    fn make_child(&mut self, parent: usize, slot: usize) -> usize {
        let q = self.quads[parent];
        let half = q.size / 2.0;
        let x0 = q.x0 + if slot & 1 == 1 { half } else { 0.0 };
        let y0 = q.y0 + if slot & 2 == 2 { half } else { 0.0 };
        let id = self.quads.len();
        self.quads.push(Quad::new(x0, y0, half));
        self.quads[parent].children[slot] = id as u32;
        id
    }

    fn insert(&mut self, i: usize, pos: &[Point]) {
        let mut q = 0usize;
        let mut depth = 0usize;
        loop {
            if !self.quads[q].leaf {
                let slot = Self::child_slot(&self.quads[q], pos[i]);
                let child = self.quads[q].children[slot];
                q = if child == NONE { self.make_child(q, slot) } else { child as usize };
                depth += 1;
                continue;
            }
            let head = self.quads[q].head;
            if head == NONE {
                self.quads[q].head = i as u32;
                return;
            }
            if depth >= MAX_TREE_DEPTH {
                self.next[i] = head;
                self.quads[q].head = i as u32;
                return;
            }
            // Split: push the resident point one level down and retry.
            let resident = head as usize;
            self.quads[q].head = NONE;
            self.quads[q].leaf = false;
            let slot = Self::child_slot(&self.quads[q], pos[resident]);
            let child = self.make_child(q, slot);
            self.quads[child].head = resident as u32;
        }
    }

    /// Total charge and charge-weighted centroid of every quad.
    fn accumulate(&mut self, pos: &[Point], point_charge: f64) {
        for id in (0..self.quads.len()).rev() {
            let (mut charge, mut sx, mut sy) = (0.0, 0.0, 0.0);
            let quad = self.quads[id];
            if quad.leaf {
                let mut j = quad.head;
                while j != NONE {
                    let p = pos[j as usize];
                    charge += point_charge;
                    sx += point_charge * p.x;
                    sy += point_charge * p.y;
                    j = self.next[j as usize];
                }
            } else {
                for &c in quad.children.iter().filter(|&&c| c != NONE) {
                    let child = &self.quads[c as usize];
                    charge += child.charge;
                    sx += child.charge * child.cx;
                    sy += child.charge * child.cy;
                }
            }
            let q = &mut self.quads[id];
            q.charge = charge;
            if charge != 0.0 {
                q.cx = sx / charge;
                q.cy = sy / charge;
            }
        }
    }

    /// Displacement to subtract from node `i`'s previous position.
    fn repulse(&self, i: usize, pos: &[Point], theta2: f64, point_charge: f64) -> (f64, f64) {
        let p = pos[i];
        let (mut ax, mut ay) = (0.0, 0.0);
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let q = &self.quads[id as usize];
            if q.charge == 0.0 {
                continue;
            }
            if q.leaf {
                let mut j = q.head;
                while j != NONE {
                    if j as usize != i {
                        let o = pos[j as usize];
                        let (dx, dy) = (o.x - p.x, o.y - p.y);
                        let k = point_charge / (dx * dx + dy * dy).max(MIN_DIST2);
                        ax += dx * k;
                        ay += dy * k;
                    }
                    j = self.next[j as usize];
                }
                continue;
            }
            let (dx, dy) = (q.cx - p.x, q.cy - p.y);
            let dn = dx * dx + dy * dy;
            if q.size * q.size / theta2 < dn && !q.contains(p) {
                let k = q.charge / dn.max(MIN_DIST2);
                ax += dx * k;
                ay += dy * k;
            } else {
                stack.extend(q.children.iter().copied().filter(|&c| c != NONE));
            }
        }
        (ax, ay)
    }
}
