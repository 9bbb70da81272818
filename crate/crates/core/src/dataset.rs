//! Labeled image dataset factory: graphs → nine layouts each → PNG images
//! plus metric labels in a JSON-lines manifest.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.jsonl        one DatasetRecord per line
//! manifest.csv          the same records as CSV
//! run_config.json       the DatasetConfig used
//! graphs.jsonl          one GraphEntry per processed graph
//! images/gNNNNN_lK.png  rendered layouts
//! graphs/gNNNNN.edges   edge list, with gNNNNN.communities beside it
//! positions/gNNNNN_lK.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community;
use crate::graph::{self, Graph};
use crate::graphgen::{self, GenParams, ParamRanges, SampleParams};
use crate::layout::{self, LayoutResult};
use crate::metrics::{self, MetricVector, NodeStyle};
use crate::render::{self, NodeColoring, RenderStyle};
use crate::seed;

pub const DEFAULT_HAIRBALL_THRESHOLD: u64 = 5000;
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CSV_FILE: &str = "manifest.csv";
pub const RUN_CONFIG_FILE: &str = "run_config.json";
pub const GRAPHS_FILE: &str = "graphs.jsonl";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid dataset config: {0}")]
    InvalidConfig(String),
    #[error("cannot load real graph: {0}")]
    Graph(#[from] graph::GraphError),
    #[error("malformed manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("cannot split {groups} graphs ({records} records) into {k} folds")]
    TooSmall { records: usize, groups: usize, k: usize },
    #[error("CSV export failed: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_owned(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub synthetic_count: usize,
    pub real_graph_paths: Vec<PathBuf>,
    pub samples_per_real: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Sampled graphs with any layout above this many crossings are dropped.
    pub hairball_crossing_threshold: u64,
    pub param_ranges: ParamRanges,
    pub node_coloring: NodeColoring,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            synthetic_count: 0,
            real_graph_paths: Vec::new(),
            samples_per_real: 0,
            master_seed: 0,
            output_dir: PathBuf::from("dataset"),
            hairball_crossing_threshold: DEFAULT_HAIRBALL_THRESHOLD,
            param_ranges: ParamRanges::default(),
            node_coloring: NodeColoring::ByCommunity,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.hairball_crossing_threshold == 0 {
            return Err(DatasetError::InvalidConfig("hairball_crossing_threshold must be positive".into()));
        }
        if self.samples_per_real > 0 && self.real_graph_paths.is_empty() {
            log::warn!("samples_per_real set without any real graph paths");
        }
        self.param_ranges.validate().map_err(|e| DatasetError::InvalidConfig(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(text).map_err(|e| DatasetError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    Sampled,
}

/// One manifest line: image, labels and layout provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    /// Relative to the dataset directory.
    pub image_path: String,
    #[serde(flatten)]
    pub metrics: MetricVector,
    pub source: Source,
    pub gravity: f64,
    pub charge: f64,
    /// Layout seed.
    pub seed: u64,
    pub graph_id: u64,
}

/// Per-graph provenance, written to `graphs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEntry {
    pub graph_id: u64,
    pub source: Source,
    pub seed: u64,
    pub edges_path: String,
    pub communities_path: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gen_params: Option<GenParams>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sample_params: Option<SampleParams>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub real_graph: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<DatasetRecord>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records always serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, DatasetError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(line)
                .map_err(|e| DatasetError::Manifest { line: i + 1, message: e.to_string() })?;
            records.push(record);
        }
        Ok(Manifest { records })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let file = fs::File::open(path).map_err(io_err(path))?;
        let mut text = String::new();
        for line in BufReader::new(file).lines() {
            text.push_str(&line.map_err(io_err(path))?);
            text.push('\n');
        }
        Self::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_jsonl()).map_err(io_err(path))
    }

    /// CSV with the manifest columns in manifest order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["image_path"];
        header.extend(MetricVector::NAMES);
        header.extend(["source", "gravity", "charge", "seed", "graph_id"]);
        w.write_record(&header)?;
        for r in &self.records {
            let m = &r.metrics;
            let source = match r.source {
                Source::Synthetic => "synthetic",
                Source::Sampled => "sampled",
            };
            w.write_record([
                r.image_path.clone(),
                m.n_n.to_string(),
                m.e_n.to_string(),
                m.n_c.to_string(),
                m.n_sp.to_string(),
                m.n_oc.to_string(),
                m.e_c.to_string(),
                m.e_c_outside.to_string(),
                m.m_a.to_string(),
                m.m_l.to_string(),
                m.g_o.to_string(),
                source.to_string(),
                r.gravity.to_string(),
                r.charge.to_string(),
                r.seed.to_string(),
                r.graph_id.to_string(),
            ])?;
        }
        w.flush().map_err(|e| DatasetError::Csv(e.into()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphFailure {
    pub graph_id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    pub manifest: Manifest,
    pub graphs: Vec<GraphEntry>,
    pub failures: Vec<GraphFailure>,
    /// Sampled graphs dropped as hairballs.
    pub hairballs: usize,
}

pub fn image_rel_path(graph_id: u64, layout_index: usize) -> String {
    format!("images/g{graph_id:05}_l{layout_index}.png")
}

pub fn positions_rel_path(graph_id: u64, layout_index: usize) -> String {
    format!("positions/g{graph_id:05}_l{layout_index}.json")
}

pub fn edges_rel_path(graph_id: u64) -> String {
    format!("graphs/g{graph_id:05}.edges")
}

pub fn communities_rel_path(graph_id: u64) -> String {
    format!("graphs/g{graph_id:05}.communities")
}

/// Positions file stored beside an image, found from the image path.
pub fn positions_for_image(image_path: &str) -> Option<String> {
    let stem = Path::new(image_path).file_stem()?.to_str()?;
    Some(format!("positions/{stem}.json"))
}

enum Job {
    Synthetic,
    Sampled { path_index: usize },
}

struct GraphOutput {
    entry: GraphEntry,
    graph: Graph,
    layouts: Vec<LayoutResult>,
    labels: Vec<MetricVector>,
}

enum Outcome {
    Done(GraphOutput),
    Hairball,
    Failed(String),
}

fn prepare_graph(
    job: &Job,
    graph_id: u64,
    graph_seed: u64,
    config: &DatasetConfig,
    real_graphs: &[Graph],
) -> Result<(Graph, GraphEntry), String> {
    let mut entry = GraphEntry {
        graph_id,
        source: Source::Synthetic,
        seed: graph_seed,
        edges_path: edges_rel_path(graph_id),
        communities_path: communities_rel_path(graph_id),
        gen_params: None,
        sample_params: None,
        real_graph: None,
    };
    let graph = match job {
        Job::Synthetic => {
            let (params, graph) =
                graphgen::generate_sampled(graph_seed, &config.param_ranges).map_err(|e| e.to_string())?;
            entry.gen_params = Some(params);
            graph
        }
        Job::Sampled { path_index } => {
            let mut rng = seed::rng(graph_seed);
            let params = graphgen::sample_walk_params(&mut rng);
            let sample = graphgen::sample_random_walk(&real_graphs[*path_index], &params)
                .map_err(|e| e.to_string())?;
            let partition = community::fast_greedy(&sample).map_err(|e| e.to_string())?;
            entry.source = Source::Sampled;
            entry.sample_params = Some(params);
            entry.real_graph = Some(config.real_graph_paths[*path_index].clone());
            sample.with_communities(partition.into_labels()).map_err(|e| e.to_string())?
        }
    };
    Ok((graph, entry))
}

fn process_graph(
    job: &Job,
    graph_id: u64,
    config: &DatasetConfig,
    real_graphs: &[Graph],
    style: &RenderStyle,
) -> Result<Outcome, DatasetError> {
    let graph_seed = seed::derive(config.master_seed, graph_id);
    let (graph, entry) = match prepare_graph(job, graph_id, graph_seed, config, real_graphs) {
        Ok(ok) => ok,
        Err(reason) => return Ok(Outcome::Failed(reason)),
    };
    let layouts = layout::layout_grid(&graph, seed::derive(graph_seed, u64::MAX));
    let node_style = NodeStyle { radius: style.node_radius, link_width: style.link_width };
    let mut labels = Vec::with_capacity(layouts.len());
    for result in &layouts {
        match metrics::compute_all(&graph, &result.positions, &node_style) {
            Ok(m) if m.values().iter().all(|v| v.is_finite()) => labels.push(m),
            Ok(_) => return Ok(Outcome::Failed("non-finite label".into())),
            Err(e) => return Ok(Outcome::Failed(e.to_string())),
        }
    }
    if entry.source == Source::Sampled
        && labels.iter().any(|m| m.e_c > config.hairball_crossing_threshold)
    {
        return Ok(Outcome::Hairball);
    }
    let out = &config.output_dir;
    for (k, result) in layouts.iter().enumerate() {
        let img = match render::render_layout(&graph, &result.positions, style) {
            Ok(img) => img,
            Err(e) => return Ok(Outcome::Failed(e.to_string())),
        };
        let bytes = match render::encode_png(&img) {
            Ok(b) => b,
            Err(e) => return Ok(Outcome::Failed(e.to_string())),
        };
        let path = out.join(image_rel_path(graph_id, k));
        fs::write(&path, bytes).map_err(io_err(&path))?;
        let path = out.join(positions_rel_path(graph_id, k));
        fs::write(&path, layout::positions_to_json(&result.positions)).map_err(io_err(&path))?;
    }
    let path = out.join(&entry.edges_path);
    fs::write(&path, graph::format_edge_list(&graph)).map_err(io_err(&path))?;
    let path = out.join(&entry.communities_path);
    let text = graph::format_communities(&graph).expect("dataset graphs are labeled");
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(Outcome::Done(GraphOutput { entry, graph, layouts, labels }))
}

/// Builds the dataset under `config.output_dir`. Graphs are processed in
/// parallel on the current rayon pool; output is identical to a serial run.
/// A graph that fails is logged and skipped.
pub fn build_dataset(config: &DatasetConfig) -> Result<BuildReport, DatasetError> {
    config.validate()?;
    let real_graphs: Vec<Graph> = config
        .real_graph_paths
        .iter()
        .map(|p| graph::load_edge_list(p, None))
        .collect::<Result<_, _>>()?;
    let out = &config.output_dir;
    for sub in ["images", "graphs", "positions"] {
        let dir = out.join(sub);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }

    let mut jobs: Vec<Job> = (0..config.synthetic_count).map(|_| Job::Synthetic).collect();
    for path_index in 0..real_graphs.len() {
        jobs.extend((0..config.samples_per_real).map(|_| Job::Sampled { path_index }));
    }
    let style = RenderStyle { node_coloring: config.node_coloring, ..RenderStyle::default() };

    let outcomes: Vec<Result<Outcome, DatasetError>> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, job)| process_graph(job, i as u64, config, &real_graphs, &style))
        .collect();

    let mut report = BuildReport::default();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let graph_id = i as u64;
        match outcome? {
            Outcome::Done(g) => {
                for (k, (result, label)) in g.layouts.iter().zip(&g.labels).enumerate() {
                    report.manifest.records.push(DatasetRecord {
                        image_path: image_rel_path(graph_id, k),
                        metrics: *label,
                        source: g.entry.source,
                        gravity: result.config.gravity,
                        charge: result.config.charge,
                        seed: result.config.seed,
                        graph_id,
                    });
                }
                debug_assert_eq!(g.graph.node_count() as u64, g.labels[0].n_n);
                report.graphs.push(g.entry);
            }
            Outcome::Hairball => {
                log::info!("graph {graph_id} dropped as a hairball");
                report.hairballs += 1;
            }
            Outcome::Failed(reason) => {
                log::warn!("graph {graph_id} skipped: {reason}");
                report.failures.push(GraphFailure { graph_id, reason });
            }
        }
    }

    report.manifest.save(&out.join(MANIFEST_FILE))?;
    let csv_path = out.join(CSV_FILE);
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    report.manifest.write_csv(file)?;
    let path = out.join(RUN_CONFIG_FILE);
    let text = serde_json::to_string_pretty(config).expect("config always serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    let graphs: String = report
        .graphs
        .iter()
        .map(|g| serde_json::to_string(g).expect("entries always serialize") + "\n")
        .collect();
    let path = out.join(GRAPHS_FILE);
    fs::write(&path, graphs).map_err(io_err(&path))?;
    Ok(report)
}

/// Drops records with more than `threshold` crossings; returns the kept
/// manifest and the number removed.
pub fn filter_hairballs(manifest: &Manifest, threshold: u64) -> (Manifest, usize) {
    let records: Vec<DatasetRecord> =
        manifest.records.iter().filter(|r| r.metrics.e_c <= threshold).cloned().collect();
    let removed = manifest.len() - records.len();
    (Manifest { records }, removed)
}

/// Random partition into `k` folds that never splits a graph's layouts.
/// Graphs are shuffled, then each goes to the fold with the fewest records,
/// so when every graph has the same number of layouts the fold graph counts
/// differ by at most one.
pub fn kfold_split(manifest: &Manifest, k: usize, seed_value: u64) -> Result<Vec<Manifest>, DatasetError> {
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        groups.entry(r.graph_id).or_default().push(i);
    }
    if k < 2 || groups.len() < k {
        return Err(DatasetError::TooSmall { records: manifest.len(), groups: groups.len(), k });
    }
    let mut order: Vec<Vec<usize>> = groups.into_values().collect();
    order.shuffle(&mut seed::rng(seed_value));
    order.sort_by_key(|g| std::cmp::Reverse(g.len()));
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for group in order {
        let target = (0..k).min_by_key(|&f| (folds[f].len(), f)).expect("k >= 2");
        folds[target].extend(group);
    }
    Ok(folds
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            Manifest { records: idx.into_iter().map(|i| manifest.records[i].clone()).collect() }
        })
        .collect())
}

/// Loads the stored graph and the positions of one manifest record.
pub fn load_record_inputs(
    dataset_dir: &Path,
    record: &DatasetRecord,
) -> Result<(Graph, Vec<crate::geometry::Point>), DatasetError> {
    let edges = dataset_dir.join(edges_rel_path(record.graph_id));
    let comms = dataset_dir.join(communities_rel_path(record.graph_id));
    let graph = graph::load_edge_list(&edges, Some(&comms))?;
    let rel = positions_for_image(&record.image_path).ok_or_else(|| DatasetError::Manifest {
        line: 0,
        message: format!("cannot derive positions path from {}", record.image_path),
    })?;
    let path = dataset_dir.join(rel);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let positions = layout::positions_from_json(&text)
        .map_err(|e| DatasetError::Manifest { line: 0, message: e.to_string() })?;
    Ok((graph, positions))
}
