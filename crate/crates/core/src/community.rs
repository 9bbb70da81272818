//! Greedy agglomerative modularity maximization (Clauset-Newman-Moore).
//!
//! Merge gains are kept as exact integers: for communities `a`, `b` with
//! `m_ab` edges between them and total degrees `d_a`, `d_b` in a graph with
//! `m` edges, `ΔQ = (2m·m_ab − d_a·d_b) / (2m²)`. Only the integer numerator
//! is compared, so equal gains tie exactly and the smallest id pair wins.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::graph::{CommunityId, Graph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommunityError {
    #[error("graph has no edges; modularity is undefined")]
    EmptyGraph,
    #[error("partition labels {labels} nodes, graph has {nodes}")]
    SizeMismatch { labels: usize, nodes: usize },
}

/// One community id per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<CommunityId>,
}

impl Partition {
    pub fn new(labels: Vec<CommunityId>) -> Self {
        Partition { labels }
    }

    pub fn singletons(n: usize) -> Self {
        Partition { labels: (0..n as CommunityId).collect() }
    }

    pub fn whole(n: usize) -> Self {
        Partition { labels: vec![0; n] }
    }

    pub fn labels(&self) -> &[CommunityId] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<CommunityId> {
        self.labels
    }

    pub fn community_count(&self) -> usize {
        let mut ids = self.labels.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Renumbers communities `0..k` in order of their smallest node.
    pub fn canonical(&self) -> Self {
        let mut map = BTreeMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&c| {
                let next = map.len() as CommunityId;
                *map.entry(c).or_insert(next)
            })
            .collect();
        Partition { labels }
    }
}

/// Newman modularity `Q = Σ_c (e_c/|E| − (d_c / 2|E|)²)`.
pub fn modularity(graph: &Graph, partition: &Partition) -> Result<f64, CommunityError> {
    let m = graph.edge_count() as i128;
    if m == 0 {
        return Err(CommunityError::EmptyGraph);
    }
    let labels = partition.labels();
    if labels.len() != graph.node_count() {
        return Err(CommunityError::SizeMismatch { labels: labels.len(), nodes: graph.node_count() });
    }
    // (intra edges, total degree) per community, all integers.
    let mut tally: BTreeMap<CommunityId, (i128, i128)> = BTreeMap::new();
    for &(u, v) in graph.edges() {
        if labels[u] == labels[v] {
            tally.entry(labels[u]).or_default().0 += 1;
        }
        tally.entry(labels[u]).or_default().1 += 1;
        tally.entry(labels[v]).or_default().1 += 1;
    }
    // Q = (4m Σ e_c − Σ d_c²) / 4m²
    let numerator: i128 = tally.values().map(|&(e, d)| 4 * m * e - d * d).sum();
    Ok(numerator as f64 / (4 * m * m) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Surviving community, named by its smallest original node.
    pub kept: usize,
    pub absorbed: usize,
    pub gain: f64,
}

/// Full greedy run: the merge sequence up to the modularity peak.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub partition: Partition,
    pub modularity: f64,
}

/// Community labels at the modularity peak of the greedy merge sequence.
pub fn fast_greedy(graph: &Graph) -> Result<Partition, CommunityError> {
    fast_greedy_dendrogram(graph).map(|d| d.partition)
}

pub fn fast_greedy_dendrogram(graph: &Graph) -> Result<Dendrogram, CommunityError> {
    let n = graph.node_count();
    let m = graph.edge_count() as i64;
    if m == 0 {
        return Err(CommunityError::EmptyGraph);
    }
    let two_m = 2 * m;
    let mut degree: Vec<i64> = (0..n).map(|v| graph.neighbors(v).len() as i64).collect();
    let mut links: Vec<BTreeMap<usize, i64>> = vec![BTreeMap::new(); n];
    for &(u, v) in graph.edges() {
        *links[u].entry(v).or_default() += 1;
        *links[v].entry(u).or_default() += 1;
    }
    let mut owner: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();

    let gain = |links: &[BTreeMap<usize, i64>], degree: &[i64], a: usize, b: usize| {
        two_m * links[a][&b] - degree[a] * degree[b]
    };
    let mut heap: BinaryHeap<(i64, Reverse<(usize, usize)>)> = BinaryHeap::new();
    for &(u, v) in graph.edges() {
        heap.push((gain(&links, &degree, u, v), Reverse((u, v))));
    }

    let mut merges = Vec::new();
    while let Some((key, Reverse((a, b)))) = heap.pop() {
        // Lazy deletion: skip entries whose pair vanished or whose gain changed.
        if members[a].is_empty() || members[b].is_empty() || !links[a].contains_key(&b) {
            continue;
        }
        if gain(&links, &degree, a, b) != key {
            continue;
        }
        if key <= 0 {
            break;
        }
        let absorbed = std::mem::take(&mut links[b]);
        for (&c, &w) in &absorbed {
            links[c].remove(&b);
            if c != a {
                *links[a].entry(c).or_default() += w;
                *links[c].entry(a).or_default() += w;
            }
        }
        links[a].remove(&b);
        degree[a] += degree[b];
        let moved = std::mem::take(&mut members[b]);
        for &v in &moved {
            owner[v] = a;
        }
        members[a].extend(moved);
        for &c in links[a].keys() {
            let pair = (a.min(c), a.max(c));
            heap.push((gain(&links, &degree, pair.0, pair.1), Reverse(pair)));
        }
        merges.push(Merge { kept: a, absorbed: b, gain: key as f64 / (2 * m * m) as f64 });
    }

    let partition =
        Partition::new(owner.iter().map(|&c| c as CommunityId).collect()).canonical();
    let modularity = modularity(graph, &partition)?;
    Ok(Dendrogram { merges, partition, modularity })
}
