//! Undirected simple graphs with optional per-node community labels, plus the
//! plain-text edge-list and community file formats.
//!
//! Edge-list files hold one `u v` pair per line; community files hold one
//! `node community` pair per line. Blank lines and lines starting with `#` are
//! ignored. A `# nodes N` comment is honoured as the node count so that
//! trailing isolated nodes survive a save/load round trip.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type CommunityId = u32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("self-loop on node {node}{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    SelfLoop { node: usize, line: Option<usize> },
    #[error("node index {index} out of range for a graph with {node_count} nodes")]
    Index { index: usize, node_count: usize },
    #[error("community labels missing for {missing} of {node_count} nodes")]
    IncompleteCommunities { missing: usize, node_count: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// An invariant violation reported by [`GraphDraft::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SelfLoop { node: usize },
    DuplicateEdge { u: usize, v: usize },
    NodeOutOfRange { index: usize },
    IncompleteCommunityLabels { missing: Vec<usize> },
    UnknownCommunityNode { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { node } => write!(f, "self-loop on node {node}"),
            Violation::DuplicateEdge { u, v } => write!(f, "duplicate edge ({u}, {v})"),
            Violation::NodeOutOfRange { index } => write!(f, "node index {index} out of range"),
            Violation::IncompleteCommunityLabels { missing } => {
                write!(f, "incomplete community labels: {} node(s) unlabeled", missing.len())
            }
            Violation::UnknownCommunityNode { index } => {
                write!(f, "community label for unknown node {index}")
            }
        }
    }
}

/// Unchecked graph parts, as they might arrive from a caller or a file.
#[derive(Debug, Clone, Default)]
pub struct GraphDraft {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub community: Option<BTreeMap<usize, CommunityId>>,
}

impl GraphDraft {
    /// Reports every invariant violation; an empty list means the draft is a valid graph.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut seen = BTreeSet::new();
        for &(u, v) in &self.edges {
            let mut bad = false;
            for index in [u, v] {
                if index >= self.node_count {
                    violations.push(Violation::NodeOutOfRange { index });
                    bad = true;
                }
            }
            if u == v {
                violations.push(Violation::SelfLoop { node: u });
                bad = true;
            }
            if !bad && !seen.insert((u.min(v), u.max(v))) {
                violations.push(Violation::DuplicateEdge { u: u.min(v), v: u.max(v) });
            }
        }
        if let Some(labels) = &self.community {
            for &index in labels.keys() {
                if index >= self.node_count {
                    violations.push(Violation::UnknownCommunityNode { index });
                }
            }
            let missing: Vec<usize> =
                (0..self.node_count).filter(|v| !labels.contains_key(v)).collect();
            if !missing.is_empty() {
                violations.push(Violation::IncompleteCommunityLabels { missing });
            }
        }
        violations
    }
}

/// An undirected simple graph. Immutable once built.
///
/// Edges are stored canonically as sorted `(min, max)` pairs, so two graphs
/// built from the same edge set in any order compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    community: Option<Vec<CommunityId>>,
}

impl Graph {
    /// Builds a graph, canonicalizing and deduplicating edges. Self-loops and
    /// out-of-range endpoints are rejected.
    pub fn new<I>(node_count: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut canon = BTreeSet::new();
        for (u, v) in edges {
            for index in [u, v] {
                if index >= node_count {
                    return Err(GraphError::Index { index, node_count });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { node: u, line: None });
            }
            canon.insert((u.min(v), u.max(v)));
        }
        Ok(Self::from_canonical(node_count, canon.into_iter().collect()))
    }

    /// `edges` must already be sorted, deduplicated `(min, max)` pairs in range.
    pub(crate) fn from_canonical(node_count: usize, edges: Vec<(usize, usize)>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        let mut adjacency = vec![Vec::new(); node_count];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Graph { node_count, edges, adjacency, community: None }
    }

    /// Attaches one community label per node.
    pub fn with_communities(mut self, labels: Vec<CommunityId>) -> Result<Self, GraphError> {
        if labels.len() != self.node_count {
            return Err(GraphError::IncompleteCommunities {
                missing: self.node_count.saturating_sub(labels.len()),
                node_count: self.node_count,
            });
        }
        self.community = Some(labels);
        Ok(self)
    }

    pub fn without_communities(mut self) -> Self {
        self.community = None;
        self
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list of `v`. Panics if `v` is out of range.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> Result<usize, GraphError> {
        self.adjacency
            .get(v)
            .map(Vec::len)
            .ok_or(GraphError::Index { index: v, node_count: self.node_count })
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn communities(&self) -> Option<&[CommunityId]> {
        self.community.as_deref()
    }

    /// Number of distinct community ids, 0 when unlabeled.
    pub fn community_count(&self) -> usize {
        self.community
            .as_ref()
            .map(|labels| labels.iter().collect::<BTreeSet<_>>().len())
            .unwrap_or(0)
    }

    pub fn to_draft(&self) -> GraphDraft {
        GraphDraft {
            node_count: self.node_count,
            edges: self.edges.clone(),
            community: self
                .community
                .as_ref()
                .map(|labels| labels.iter().copied().enumerate().collect()),
        }
    }

    /// Re-checks the graph invariants.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let violations = self.to_draft().validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Subgraph induced on `nodes`, reindexed to `0..nodes.len()` in the given
    /// order. Community labels are carried over when present.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Self {
        let mut index = vec![usize::MAX; self.node_count];
        for (new, &old) in nodes.iter().enumerate() {
            index[old] = new;
        }
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter_map(|&(u, v)| {
                let (a, b) = (index[u], index[v]);
                (a != usize::MAX && b != usize::MAX).then(|| (a.min(b), a.max(b)))
            })
            .collect();
        edges.sort_unstable();
        let mut sub = Self::from_canonical(nodes.len(), edges);
        if let Some(labels) = &self.community {
            sub.community = Some(nodes.iter().map(|&v| labels[v]).collect());
        }
        sub
    }
}

fn parse_pair(line: &str, lineno: usize) -> Result<Option<(usize, usize)>, GraphError> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut fields = trimmed.split_whitespace();
    let mut next = |what: &str| -> Result<usize, GraphError> {
        let field = fields.next().ok_or_else(|| GraphError::Parse {
            line: lineno,
            message: format!("missing {what}"),
        })?;
        field.parse().map_err(|_| GraphError::Parse {
            line: lineno,
            message: format!("invalid {what} {field:?}"),
        })
    };
    let a = next("first field")?;
    let b = next("second field")?;
    if let Some(extra) = fields.next() {
        return Err(GraphError::Parse { line: lineno, message: format!("unexpected field {extra:?}") });
    }
    Ok(Some((a, b)))
}

fn node_count_directive(line: &str) -> Option<usize> {
    line.trim().strip_prefix('#')?.trim().strip_prefix("nodes")?.trim().parse().ok()
}

/// Parses edge-list text. The node count is the `# nodes N` directive when
/// present, otherwise one more than the largest index mentioned.
pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut declared = None;
    let mut edges = Vec::new();
    let mut max_index = None::<usize>;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if let Some(n) = node_count_directive(line) {
            declared = Some(n);
            continue;
        }
        if let Some((u, v)) = parse_pair(line, lineno)? {
            if u == v {
                return Err(GraphError::SelfLoop { node: u, line: Some(lineno) });
            }
            max_index = Some(max_index.map_or(u.max(v), |m| m.max(u).max(v)));
            edges.push((u, v));
        }
    }
    let inferred = max_index.map_or(0, |m| m + 1);
    let node_count = match declared {
        Some(n) if n < inferred => {
            return Err(GraphError::Index { index: inferred - 1, node_count: n });
        }
        Some(n) => n,
        None => inferred,
    };
    Graph::new(node_count, edges)
}

/// Parses a community file against a graph of `node_count` nodes.
pub fn parse_communities(text: &str, node_count: usize) -> Result<Vec<CommunityId>, GraphError> {
    let mut labels: Vec<Option<CommunityId>> = vec![None; node_count];
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let Some((node, community)) = parse_pair(line, lineno)? else {
            continue;
        };
        if node >= node_count {
            return Err(GraphError::Index { index: node, node_count });
        }
        let community = CommunityId::try_from(community).map_err(|_| GraphError::Parse {
            line: lineno,
            message: format!("community id {community} too large"),
        })?;
        match labels[node] {
            Some(existing) if existing != community => {
                return Err(GraphError::Parse {
                    line: lineno,
                    message: format!("node {node} labeled twice ({existing} and {community})"),
                });
            }
            _ => labels[node] = Some(community),
        }
    }
    let missing = labels.iter().filter(|l| l.is_none()).count();
    if missing > 0 {
        return Err(GraphError::IncompleteCommunities { missing, node_count });
    }
    Ok(labels.into_iter().flatten().collect())
}

fn read(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|source| GraphError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, text: &str) -> Result<(), GraphError> {
    fs::write(path, text).map_err(|source| GraphError::Io { path: path.to_owned(), source })
}

pub fn load_edge_list(path: &Path, community_path: Option<&Path>) -> Result<Graph, GraphError> {
    let graph = parse_edge_list(&read(path)?)?;
    match community_path {
        Some(cpath) => {
            let labels = parse_communities(&read(cpath)?, graph.node_count())?;
            graph.with_communities(labels)
        }
        None => Ok(graph),
    }
}

pub fn format_edge_list(graph: &Graph) -> String {
    let mut out = format!("# nodes {}\n", graph.node_count());
    for &(u, v) in graph.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

pub fn format_communities(graph: &Graph) -> Option<String> {
    graph.communities().map(|labels| {
        labels.iter().enumerate().map(|(v, c)| format!("{v} {c}\n")).collect()
    })
}

/// Writes the edge list and, when both a path and labels are present, the community file.
pub fn save_edge_list(
    graph: &Graph,
    path: &Path,
    community_path: Option<&Path>,
) -> Result<(), GraphError> {
    write(path, &format_edge_list(graph))?;
    if let (Some(cpath), Some(text)) = (community_path, format_communities(graph)) {
        write(cpath, &text)?;
    }
    Ok(())
}
