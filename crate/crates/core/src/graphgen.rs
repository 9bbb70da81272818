//! Training-corpus graphs: LFR-style benchmark graphs with planted
//! communities, and random-walk samples of larger real graphs.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CommunityId, Graph};
use crate::seed;

pub const NODE_RANGE: RangeInclusive<usize> = 50..=600;
pub const COMMUNITY_RANGE: RangeInclusive<usize> = 2..=128;
pub const MIXING_RANGE: RangeInclusive<f64> = 0.1..=0.5;
pub const MIN_AVG_DEGREE: f64 = 3.0;
/// Largest accepted gap between requested and realized mixing.
pub const MIXING_TOLERANCE: f64 = 0.05;

/// Degree power-law exponent.
const DEGREE_EXPONENT: f64 = 2.0;
/// Community-size power-law exponent.
const SIZE_EXPONENT: f64 = 1.0;
/// Maximum degree as a multiple of the minimum degree.
const DEGREE_SPREAD: usize = 3;
const REWIRE_PASSES: usize = 100;
/// Independent realizations tried before reporting infeasible parameters.
const REALIZATION_ATTEMPTS: u64 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("random walk cannot reach at least two nodes")]
    UnreachableBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub node_count: usize,
    pub community_count: usize,
    pub min_avg_degree: f64,
    /// Fraction of edge endpoints that leave their community.
    pub mixing: f64,
    pub seed: u64,
}

impl GenParams {
    fn min_community_size(&self) -> usize {
        2.max(self.min_avg_degree.ceil() as usize)
    }

    fn check(&self) -> Result<(), GenError> {
        let bad = |msg: String| Err(GenError::InfeasibleParams(msg));
        if !NODE_RANGE.contains(&self.node_count) {
            return bad(format!("node_count {} outside {NODE_RANGE:?}", self.node_count));
        }
        if !COMMUNITY_RANGE.contains(&self.community_count) {
            return bad(format!(
                "community_count {} outside {COMMUNITY_RANGE:?}",
                self.community_count
            ));
        }
        if !(self.min_avg_degree >= MIN_AVG_DEGREE) {
            return bad(format!("min_avg_degree {} below {MIN_AVG_DEGREE}", self.min_avg_degree));
        }
        if !MIXING_RANGE.contains(&self.mixing) {
            return bad(format!("mixing {} outside {MIXING_RANGE:?}", self.mixing));
        }
        let floor = self.community_count * self.min_community_size();
        if self.node_count < floor {
            return bad(format!(
                "{} communities of at least {} nodes need {floor} nodes, have {}",
                self.community_count,
                self.min_community_size(),
                self.node_count
            ));
        }
        if self.min_avg_degree.ceil() as usize >= self.node_count {
            return bad(format!("min_avg_degree {} needs more nodes", self.min_avg_degree));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub walk_length: usize,
    pub max_nodes: usize,
    /// `None` starts from a uniformly chosen non-isolated node.
    pub start_node: Option<usize>,
    pub seed: u64,
}

/// Fraction of edges joining two different communities, which equals the
/// fraction of inter-community edge endpoints. `None` without labels or edges.
pub fn measured_mixing(graph: &Graph) -> Option<f64> {
    let labels = graph.communities()?;
    if graph.edge_count() == 0 {
        return None;
    }
    let inter = graph.edges().iter().filter(|&&(u, v)| labels[u] != labels[v]).count();
    Some(inter as f64 / graph.edge_count() as f64)
}

pub fn average_degree(graph: &Graph) -> f64 {
    if graph.node_count() == 0 {
        0.0
    } else {
        2.0 * graph.edge_count() as f64 / graph.node_count() as f64
    }
}

/// Generates a benchmark graph with planted community labels `0..community_count`.
///
/// Community sizes follow a power law with exponent 1 and node degrees a
/// power law with exponent 2; each degree is split into intra- and
/// inter-community stubs by `mixing`, and the stubs are wired by a
/// configuration model with random rewiring of self-loops and multi-edges.
/// A realization is only returned if its average degree reaches
/// `min_avg_degree` and its mixing lies within [`MIXING_TOLERANCE`] of the
/// target.
pub fn generate_lfr(params: &GenParams) -> Result<Graph, GenError> {
    params.check()?;
    let mut last = String::new();
    for attempt in 0..REALIZATION_ATTEMPTS {
        let mut rng = seed::rng(seed::derive(params.seed, attempt));
        let graph = realize(params, &mut rng);
        let avg = average_degree(&graph);
        let mixing = measured_mixing(&graph).unwrap_or(0.0);
        if avg >= params.min_avg_degree && (mixing - params.mixing).abs() <= MIXING_TOLERANCE {
            return Ok(graph);
        }
        last = format!("realized average degree {avg:.3}, mixing {mixing:.3}");
    }
    Err(GenError::InfeasibleParams(format!(
        "{REALIZATION_ATTEMPTS} realizations missed the targets (last: {last})"
    )))
}

/// Inverse-CDF draw from a continuous power law `x^-exponent` on `[lo, hi]`.
fn power_law(rng: &mut seed::Rng, lo: f64, hi: f64, exponent: f64) -> f64 {
    let u: f64 = rng.random();
    if hi <= lo {
        return lo;
    }
    if (exponent - 1.0).abs() < 1e-12 {
        lo * (hi / lo).powf(u)
    } else {
        let e = 1.0 - exponent;
        (lo.powf(e) + u * (hi.powf(e) - lo.powf(e))).powf(1.0 / e)
    }
}

/// Splits `total` into integer parts proportional to `weights` (largest remainder).
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    let shares: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| total as f64 * w / sum).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut parts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (shares[a] - shares[a].floor(), shares[b] - shares[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        parts[i] += 1;
    }
    parts
}

fn community_sizes(params: &GenParams, rng: &mut seed::Rng) -> Vec<usize> {
    let c = params.community_count;
    let smin = params.min_community_size();
    let smax = params.node_count - (c - 1) * smin;
    let raw: Vec<f64> = (0..c)
        .map(|_| power_law(rng, smin as f64, smax as f64, SIZE_EXPONENT) - smin as f64)
        .collect();
    apportion(params.node_count - c * smin, &raw).into_iter().map(|extra| smin + extra).collect()
}

fn realize(params: &GenParams, rng: &mut seed::Rng) -> Graph {
    let n = params.node_count;
    let mixing = params.mixing;
    let sizes = community_sizes(params, rng);

    let kmin = params.min_avg_degree.ceil() as usize;
    let kmax = (DEGREE_SPREAD * kmin).min(n - 1).max(kmin);
    let mut degree: Vec<usize> = (0..n)
        .map(|_| {
            let k = power_law(rng, kmin as f64, (kmax + 1) as f64, DEGREE_EXPONENT).floor();
            (k as usize).clamp(kmin, kmax)
        })
        .collect();

    let total: usize = degree.iter().sum();
    let inter_target = (mixing * total as f64).round() as usize;
    let inter_weights: Vec<f64> = degree.iter().map(|&k| mixing * k as f64).collect();
    let mut inter = apportion(inter_target, &inter_weights);
    for v in 0..n {
        inter[v] = inter[v].min(degree[v]);
    }
    let mut intra: Vec<usize> = (0..n).map(|v| degree[v] - inter[v]).collect();

    // Place nodes, largest internal degree first, into communities that can host it.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| intra[b].cmp(&intra[a]));
    let mut free = sizes.clone();
    let mut community = vec![0usize; n];
    for &v in &order {
        let fits: Vec<usize> =
            (0..sizes.len()).filter(|&c| free[c] > 0 && sizes[c] > intra[v]).collect();
        let chosen = if fits.is_empty() {
            (0..sizes.len())
                .filter(|&c| free[c] > 0)
                .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
                .expect("community slots sum to node count")
        } else {
            let slots: usize = fits.iter().map(|&c| free[c]).sum();
            let mut pick = rng.random_range(0..slots);
            *fits
                .iter()
                .find(|&&c| {
                    if pick < free[c] {
                        true
                    } else {
                        pick -= free[c];
                        false
                    }
                })
                .expect("pick below slot total")
        };
        free[chosen] -= 1;
        community[v] = chosen;
    }

    // Cap internal degrees at community size - 1, then win the lost
    // internal stubs back on nodes that still have headroom.
    let headroom = |v: usize, intra: &[usize]| sizes[community[v]] - 1 - intra[v];
    let intra_target: usize = intra.iter().sum();
    for v in 0..n {
        let cap = sizes[community[v]] - 1;
        if intra[v] > cap {
            inter[v] += intra[v] - cap;
            intra[v] = cap;
        }
    }
    let mut deficit = intra_target - intra.iter().sum::<usize>();
    let mut shuffled: Vec<usize> = (0..n).collect();
    shuffled.shuffle(rng);
    for &v in &shuffled {
        if deficit == 0 {
            break;
        }
        let shift = headroom(v, &intra).min(inter[v]).min(deficit);
        intra[v] += shift;
        inter[v] -= shift;
        deficit -= shift;
    }

    // Parity: every community needs an even internal stub count, and the
    // inter-community stubs must pair up too.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    for v in 0..n {
        members[community[v]].push(v);
    }
    for group in &members {
        if group.iter().map(|&v| intra[v]).sum::<usize>() % 2 == 0 {
            continue;
        }
        if let Some(&v) = group.iter().find(|&&v| inter[v] > 0 && headroom(v, &intra) > 0) {
            intra[v] += 1;
            inter[v] -= 1;
        } else if let Some(&v) = group.iter().find(|&&v| intra[v] > 0) {
            intra[v] -= 1;
            inter[v] += 1;
        }
    }
    if inter.iter().sum::<usize>() % 2 == 1 {
        let v = (0..n).min_by_key(|&v| (degree[v], v)).expect("non-empty");
        inter[v] += 1;
        degree[v] += 1;
    }

    let mut edges = BTreeSet::new();
    for group in &members {
        let stubs: Vec<usize> =
            group.iter().flat_map(|&v| std::iter::repeat_n(v, intra[v])).collect();
        wire(stubs, &mut edges, |_, _| true, rng);
    }
    let stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, inter[v])).collect();
    wire(stubs, &mut edges, |a, b| community[a] != community[b], rng);

    let labels: Vec<CommunityId> = community.iter().map(|&c| c as CommunityId).collect();
    Graph::from_canonical(n, edges.into_iter().collect())
        .with_communities(labels)
        .expect("one label per node")
}

/// Configuration-model wiring of `stubs` into `edges`. Pairs that would be
/// self-loops, duplicates or violate `allowed` are repaired by swapping
/// endpoints with random good edges of the same class; whatever is still bad
/// after the pass limit is dropped.
fn wire<F>(mut stubs: Vec<usize>, edges: &mut BTreeSet<(usize, usize)>, allowed: F, rng: &mut seed::Rng)
where
    F: Fn(usize, usize) -> bool,
{
    stubs.shuffle(rng);
    let canon = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut good: Vec<(usize, usize)> = Vec::new();
    let mut bad: Vec<(usize, usize)> = Vec::new();
    for pair in stubs.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        if a != b && allowed(a, b) && edges.insert(canon(a, b)) {
            good.push((a, b));
        } else {
            bad.push((a, b));
        }
    }
    for _ in 0..REWIRE_PASSES {
        if bad.is_empty() || good.is_empty() {
            break;
        }
        let mut still_bad = Vec::new();
        for (a, b) in bad {
            let idx = rng.random_range(0..good.len());
            let (c, d) = good[idx];
            let options = if rng.random::<bool>() { [(c, d), (d, c)] } else { [(d, c), (c, d)] };
            let ok = |x: usize, y: usize| {
                x != y && allowed(x, y) && !edges.contains(&canon(x, y))
            };
            let mut done = false;
            for (p, q) in options {
                // (a, b) + (c, d) -> (a, p) + (b, q)
                if ok(a, p) && ok(b, q) && canon(a, p) != canon(b, q) {
                    edges.remove(&canon(c, d));
                    edges.insert(canon(a, p));
                    edges.insert(canon(b, q));
                    good[idx] = (a, p);
                    good.push((b, q));
                    done = true;
                    break;
                }
            }
            if !done {
                still_bad.push((a, b));
            }
        }
        bad = still_bad;
    }
    if !bad.is_empty() {
        log::debug!("dropped {} unrepairable stub pairs", bad.len());
    }
}

/// Bounds for drawing generator parameters. Defaults are the corpus ranges;
/// narrower ranges must stay inside them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamRanges {
    pub nodes: (usize, usize),
    pub communities: (usize, usize),
    pub min_avg_degree: f64,
    pub mixing: (f64, f64),
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            nodes: (*NODE_RANGE.start(), *NODE_RANGE.end()),
            communities: (*COMMUNITY_RANGE.start(), *COMMUNITY_RANGE.end()),
            min_avg_degree: MIN_AVG_DEGREE,
            mixing: (*MIXING_RANGE.start(), *MIXING_RANGE.end()),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |msg: String| Err(GenError::InfeasibleParams(msg));
        let (n0, n1) = self.nodes;
        let (c0, c1) = self.communities;
        let (m0, m1) = self.mixing;
        if n0 > n1 || !NODE_RANGE.contains(&n0) || !NODE_RANGE.contains(&n1) {
            return bad(format!("node range {n0}..={n1} not inside {NODE_RANGE:?}"));
        }
        if c0 > c1 || !COMMUNITY_RANGE.contains(&c0) || !COMMUNITY_RANGE.contains(&c1) {
            return bad(format!("community range {c0}..={c1} not inside {COMMUNITY_RANGE:?}"));
        }
        if !(m0 <= m1 && MIXING_RANGE.contains(&m0) && MIXING_RANGE.contains(&m1)) {
            return bad(format!("mixing range {m0}..={m1} not inside {MIXING_RANGE:?}"));
        }
        if !(self.min_avg_degree >= MIN_AVG_DEGREE) || !self.min_avg_degree.is_finite() {
            return bad(format!("min_avg_degree {} below {MIN_AVG_DEGREE}", self.min_avg_degree));
        }
        let min_size = 2.max(self.min_avg_degree.ceil() as usize);
        if n1 < c0 * min_size {
            return bad(format!("{c0} communities do not fit in {n1} nodes"));
        }
        Ok(())
    }
}

/// Truncated normal draw for the mixing parameter: mean 0.3, sd 0.1,
/// restricted to `[lo, hi]`.
pub fn sample_mixing(rng: &mut seed::Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        return lo;
    }
    let normal = Normal::new(0.3, 0.1).expect("valid normal");
    loop {
        let x: f64 = normal.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
}

/// Draws generator parameters within `ranges`. The community count is
/// bounded above by how many minimum-size communities the node count can hold.
pub fn sample_gen_params(rng: &mut seed::Rng, ranges: &ParamRanges) -> GenParams {
    let min_size = 2.max(ranges.min_avg_degree.ceil() as usize);
    let lowest = ranges.nodes.0.max(ranges.communities.0 * min_size).min(ranges.nodes.1);
    let node_count = rng.random_range(lowest..=ranges.nodes.1);
    let mixing = sample_mixing(rng, ranges.mixing);
    let most = ranges.communities.1.min(node_count / min_size).max(ranges.communities.0);
    GenParams {
        node_count,
        community_count: rng.random_range(ranges.communities.0..=most),
        min_avg_degree: ranges.min_avg_degree,
        mixing,
        seed: rng.random(),
    }
}

/// Samples parameters from `seed` and generates a graph, redrawing the
/// parameters when a draw turns out infeasible.
pub fn generate_sampled(
    seed_value: u64,
    ranges: &ParamRanges,
) -> Result<(GenParams, Graph), GenError> {
    const REDRAWS: u64 = 64;
    ranges.validate()?;
    let mut last = GenError::InfeasibleParams("no draw attempted".into());
    for redraw in 0..REDRAWS {
        let mut rng = seed::rng(seed::derive(seed_value, redraw));
        let params = sample_gen_params(&mut rng, ranges);
        match generate_lfr(&params) {
            Ok(graph) => return Ok((params, graph)),
            Err(err) => last = err,
        }
    }
    Err(last)
}

/// Distinct nodes visited by a uniform random walk, in first-visit order.
///
/// The walk stops after `walk_length` steps or once `max_nodes` distinct
/// nodes are visited.
pub fn random_walk_nodes(graph: &Graph, params: &SampleParams) -> Result<Vec<usize>, GenError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(GenError::EmptyGraph);
    }
    if params.max_nodes < 2 {
        return Err(GenError::UnreachableBudget);
    }
    let mut rng = seed::rng(params.seed);
    let start = match params.start_node {
        Some(s) if s < n => s,
        Some(_) => return Err(GenError::UnreachableBudget),
        None => {
            let candidates: Vec<usize> = (0..n).filter(|&v| !graph.neighbors(v).is_empty()).collect();
            *candidates.get(rng.random_range(0..candidates.len().max(1))).ok_or(GenError::UnreachableBudget)?
        }
    };
    let mut seen = vec![false; n];
    let mut visited = vec![start];
    seen[start] = true;
    let mut current = start;
    for _ in 0..params.walk_length {
        if visited.len() >= params.max_nodes {
            break;
        }
        let nbrs = graph.neighbors(current);
        if nbrs.is_empty() {
            current = start;
            if graph.neighbors(start).is_empty() {
                break;
            }
            continue;
        }
        current = nbrs[rng.random_range(0..nbrs.len())];
        if !seen[current] {
            seen[current] = true;
            visited.push(current);
        }
    }
    if visited.len() < 2 {
        return Err(GenError::UnreachableBudget);
    }
    Ok(visited)
}

/// Induced subgraph on the nodes of [`random_walk_nodes`], renumbered in
/// visit order and without community labels.
pub fn sample_random_walk(graph: &Graph, params: &SampleParams) -> Result<Graph, GenError> {
    let visited = random_walk_nodes(graph, params)?;
    Ok(graph.induced_subgraph(&visited).without_communities())
}

/// Draws walk parameters within the synthetic node range.
pub fn sample_walk_params(rng: &mut seed::Rng) -> SampleParams {
    let max_nodes = rng.random_range(NODE_RANGE);
    SampleParams {
        walk_length: rng.random_range(max_nodes..=10 * max_nodes),
        max_nodes,
        start_node: None,
        seed: rng.random(),
    }
}
