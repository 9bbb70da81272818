use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use readability_core::community;
use readability_core::dataset::{self, DatasetConfig, Manifest};
use readability_core::evalkit::{self, BenchItem, BenchOptions, MetricGroup, ModelRunner};
use readability_core::graph::{self, Graph};
use readability_core::graphgen::{self, GenParams, SampleParams};
use readability_core::layout::{self, ForceConfig};
use readability_core::metrics::{self, NodeStyle};
use readability_core::render::{self, NodeColoring, RenderStyle};

/// Graph generation, force layout, readability metrics and image datasets.
#[derive(Parser, Debug)]
#[command(name = "readability", version, about)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for `dataset build`.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a benchmark graph with planted communities.
    Generate(GenerateArgs),
    /// Sample a subgraph by random walk.
    Sample(SampleArgs),
    /// Detect communities by greedy modularity maximization.
    Communities(CommunitiesArgs),
    /// Run the force-directed layout.
    Layout(LayoutArgs),
    /// Compute the ten readability metrics of a layout.
    Metrics(MetricsArgs),
    /// Render a layout to a 325x260 PNG.
    Render(RenderArgs),
    /// Labeled dataset operations.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Time coordinate-based metrics against an image model runner.
    Bench(BenchArgs),
    /// Score predictions against manifest labels.
    Eval(EvalArgs),
}

#[derive(Subcommand, Debug)]
enum DatasetCommand {
    /// Build a dataset from a JSON config.
    Build {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    communities: usize,
    #[arg(long, default_value_t = 3.0)]
    avg_degree: f64,
    #[arg(long)]
    mixing: f64,
    /// Edge list; community labels go beside it with a `.communities` extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    max_nodes: usize,
    #[arg(long)]
    walk_length: usize,
    #[arg(long)]
    start_node: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CommunitiesArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LayoutArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    gravity: f64,
    #[arg(long, default_value_t = -400.0, allow_negative_numbers = true)]
    charge: f64,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GraphInput {
    #[arg(long)]
    graph: PathBuf,
    /// Community file; defaults to the `.communities` file beside the graph,
    /// and to detected communities when that is missing too.
    #[arg(long)]
    communities: Option<PathBuf>,
    #[arg(long)]
    positions: PathBuf,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long, default_value_t = 8.0)]
    radius: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    uniform_color: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Command reading image paths on stdin and writing prediction rows.
    #[arg(long)]
    model_endpoint: Option<String>,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    /// Use at most this many records per node-count bucket.
    #[arg(long)]
    per_bucket: Option<usize>,
    /// CSV report path; defaults to bench.csv beside the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// CSV with an image_path column and one column per predicted metric.
    #[arg(long, conflicts_with = "model_endpoint")]
    predictions: Option<PathBuf>,
    #[arg(long, requires = "group")]
    model_endpoint: Option<String>,
    /// node, edge or global: the runner's output columns.
    #[arg(long)]
    group: Option<String>,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn communities_beside(path: &Path) -> PathBuf {
    path.with_extension("communities")
}

/// Loads a graph with labels from an explicit file, the sibling file, or
/// greedy modularity detection, in that order.
fn load_labeled(graph_path: &Path, communities: Option<&Path>) -> Result<Graph> {
    let sibling = communities_beside(graph_path);
    let labels_path = communities.map(Path::to_path_buf).or_else(|| sibling.exists().then_some(sibling));
    let graph = graph::load_edge_list(graph_path, labels_path.as_deref())?;
    if graph.communities().is_some() {
        return Ok(graph);
    }
    log::info!("no community file for {}; detecting communities", graph_path.display());
    let partition = community::fast_greedy(&graph)?;
    Ok(graph.with_communities(partition.into_labels())?)
}

fn load_positions(path: &Path, graph: &Graph) -> Result<Vec<readability_core::geometry::Point>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let positions = layout::positions_from_json(&text)?;
    if positions.len() != graph.node_count() {
        bail!("{} positions for a graph of {} nodes", positions.len(), graph.node_count());
    }
    Ok(positions)
}

fn generate(args: &GenerateArgs, seed: u64) -> Result<Value> {
    let params = GenParams {
        node_count: args.nodes,
        community_count: args.communities,
        min_avg_degree: args.avg_degree,
        mixing: args.mixing,
        seed,
    };
    let g = graphgen::generate_lfr(&params)?;
    let cpath = communities_beside(&args.out);
    graph::save_edge_list(&g, &args.out, Some(&cpath))?;
    Ok(json!({
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "communities": g.community_count(),
        "average_degree": graphgen::average_degree(&g),
        "mixing": graphgen::measured_mixing(&g),
        "out": args.out,
        "communities_out": cpath,
    }))
}

fn sample(args: &SampleArgs, seed: u64) -> Result<Value> {
    let source = graph::load_edge_list(&args.input, None)?;
    let params = SampleParams {
        walk_length: args.walk_length,
        max_nodes: args.max_nodes,
        start_node: args.start_node,
        seed,
    };
    let g = graphgen::sample_random_walk(&source, &params)?;
    graph::save_edge_list(&g, &args.out, None)?;
    Ok(json!({ "nodes": g.node_count(), "edges": g.edge_count(), "out": args.out }))
}

fn communities(args: &CommunitiesArgs) -> Result<Value> {
    let g = graph::load_edge_list(&args.input, None)?;
    let d = community::fast_greedy_dendrogram(&g)?;
    let count = d.partition.community_count();
    let labeled = g.with_communities(d.partition.into_labels())?;
    write_file(&args.out, graph::format_communities(&labeled).expect("labels were just set"))?;
    Ok(json!({ "communities": count, "modularity": d.modularity, "merges": d.merges.len(), "out": args.out }))
}

fn run_layout(args: &LayoutArgs, seed: u64) -> Result<Value> {
    let g = graph::load_edge_list(&args.input, None)?;
    let mut config = ForceConfig::new(args.gravity, args.charge, seed);
    if let Some(it) = args.iterations {
        config.iterations = it;
    }
    let result = layout::run_layout(&g, &config)?;
    write_file(&args.out, layout::positions_to_json(&result.positions))?;
    Ok(json!({ "nodes": g.node_count(), "converged": result.converged, "config": config, "out": args.out }))
}

fn run_metrics(args: &MetricsArgs) -> Result<Value> {
    let g = load_labeled(&args.input.graph, args.input.communities.as_deref())?;
    let positions = load_positions(&args.input.positions, &g)?;
    let style = NodeStyle { radius: args.radius, ..NodeStyle::default() };
    let m = metrics::compute_all(&g, &positions, &style)?;
    let value = serde_json::to_value(m)?;
    if let Some(out) = &args.out {
        write_file(out, serde_json::to_string_pretty(&value)? + "\n")?;
    }
    Ok(value)
}

fn run_render(args: &RenderArgs) -> Result<Value> {
    let g = load_labeled(&args.input.graph, args.input.communities.as_deref())?;
    let positions = load_positions(&args.input.positions, &g)?;
    let coloring = if args.uniform_color { NodeColoring::Uniform } else { NodeColoring::ByCommunity };
    let style = RenderStyle { node_coloring: coloring, ..RenderStyle::default() };
    let img = render::render_layout(&g, &positions, &style)?;
    write_file(&args.out, render::encode_png(&img)?)?;
    Ok(json!({ "width": img.width(), "height": img.height(), "out": args.out }))
}

fn dataset_build(config_path: &Path, seed: Option<u64>, threads: Option<usize>) -> Result<Value> {
    let text = fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let mut config = DatasetConfig::from_json(&text)?;
    if let Some(s) = seed {
        config.master_seed = s;
    }
    let base = config_path.parent().unwrap_or(Path::new(""));
    if config.output_dir.is_relative() {
        config.output_dir = base.join(&config.output_dir);
    }
    for p in &mut config.real_graph_paths {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let report = pool.install(|| dataset::build_dataset(&config))?;
    Ok(json!({
        "records": report.manifest.len(),
        "graphs": report.graphs.len(),
        "failed": report.failures.len(),
        "hairballs": report.hairballs,
        "output_dir": config.output_dir,
    }))
}

fn manifest_dir(manifest: &Path) -> &Path {
    manifest.parent().unwrap_or(Path::new(""))
}

fn bench(args: &BenchArgs) -> Result<Value> {
    let manifest = Manifest::load(&args.manifest)?;
    let dir = manifest_dir(&args.manifest);
    let mut taken = std::collections::BTreeMap::<usize, usize>::new();
    let mut items = Vec::new();
    for record in &manifest.records {
        let bucket = evalkit::node_bucket(record.metrics.n_n as usize);
        let count = taken.entry(bucket).or_default();
        if args.per_bucket.is_some_and(|cap| *count >= cap) {
            continue;
        }
        *count += 1;
        let (graph, positions) = dataset::load_record_inputs(dir, record)?;
        items.push(BenchItem { graph, positions, image_path: Some(dir.join(&record.image_path)) });
    }
    let mut runner = args.model_endpoint.as_deref().map(ModelRunner::spawn).transpose()?;
    let options = BenchOptions { repetitions: args.repetitions.max(5), ..BenchOptions::default() };
    let rows = evalkit::bench_traditional_vs_model(&items, runner.as_mut(), &options)?;
    let out = args.out.clone().unwrap_or_else(|| dir.join("bench.csv"));
    write_file(&out, evalkit::timing_table_csv(&rows))?;
    Ok(json!({ "rows": rows, "out": out }))
}

/// Predictions keyed by image path, with the metric names they cover.
fn read_predictions(path: &Path) -> Result<(Vec<String>, std::collections::HashMap<String, Vec<f64>>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .context("predictions file is empty")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("image_path") {
        bail!("predictions header must start with image_path");
    }
    let names = header[1..].to_vec();
    for name in &names {
        if !metrics::MetricVector::NAMES.contains(&name.as_str()) {
            bail!("unknown metric column {name:?}");
        }
    }
    let mut rows = std::collections::HashMap::new();
    for line in lines {
        let (image, rest) = line.split_once(',').context("prediction row without values")?;
        let values = evalkit::parse_prediction_row(rest)?;
        if values.len() != names.len() {
            bail!("row for {image} has {} values, header has {}", values.len(), names.len());
        }
        rows.insert(image.trim().to_string(), values);
    }
    Ok((names, rows))
}

fn eval(args: &EvalArgs) -> Result<Value> {
    let manifest = Manifest::load(&args.manifest)?;
    let dir = manifest_dir(&args.manifest);
    let (names, predicted): (Vec<String>, Vec<Vec<f64>>) = match (&args.predictions, &args.model_endpoint) {
        (Some(path), _) => {
            let (names, rows) = read_predictions(path)?;
            let mut ordered = Vec::with_capacity(manifest.len());
            for r in &manifest.records {
                let row = rows.get(&r.image_path).with_context(|| format!("no prediction for {}", r.image_path))?;
                ordered.push(row.clone());
            }
            (names, ordered)
        }
        (None, Some(cmd)) => {
            let group_name = args.group.as_deref().expect("clap enforces --group");
            let group = MetricGroup::parse(group_name).with_context(|| format!("unknown group {group_name:?}"))?;
            let names: Vec<String> = group.metrics().iter().map(|s| s.to_string()).collect();
            let mut runner = ModelRunner::spawn(cmd)?;
            let mut rows = Vec::with_capacity(manifest.len());
            for r in &manifest.records {
                let row = runner.predict(&dir.join(&r.image_path))?;
                if row.len() != names.len() {
                    bail!("runner returned {} values for group {group}, expected {}", row.len(), names.len());
                }
                rows.push(row);
            }
            (names, rows)
        }
        (None, None) => bail!("eval needs --predictions or --model-endpoint"),
    };
    let mut report = serde_json::Map::new();
    for (j, name) in names.iter().enumerate() {
        let truth: Vec<f64> = manifest
            .records
            .iter()
            .map(|r| evalkit::metric_value(&r.metrics, name).expect("names were validated"))
            .collect();
        let pred: Vec<f64> = predicted.iter().map(|row| row[j]).collect();
        report.insert(name.clone(), serde_json::to_value(evalkit::evaluate_metric(&truth, &pred)?)?);
    }
    Ok(Value::Object(report))
}

fn dispatch(cli: Cli) -> Result<Value> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Generate(a) => generate(a, seed),
        Command::Sample(a) => sample(a, seed),
        Command::Communities(a) => communities(a),
        Command::Layout(a) => run_layout(a, seed),
        Command::Metrics(a) => run_metrics(a),
        Command::Render(a) => run_render(a),
        Command::Dataset { command: DatasetCommand::Build { config } } => {
            dataset_build(config, cli.seed, cli.threads)
        }
        Command::Bench(a) => bench(a),
        Command::Eval(a) => eval(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).target(env_logger::Target::Stderr).init();
    match dispatch(cli) {
        Ok(value) => {
            println!("{value}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
