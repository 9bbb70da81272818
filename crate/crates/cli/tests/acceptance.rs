#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use readability_core::community::{fast_greedy_dendrogram, modularity, Partition};
use readability_core::dataset::Manifest;
use readability_core::evalkit::{
    bench_traditional_vs_model, confidence_interval, percentage_error, BenchItem, BenchOptions, MetricGroup,
};
use readability_core::geometry::Point;
use readability_core::graph::{load_edge_list, Graph};
use readability_core::graphgen::{average_degree, generate_sampled, measured_mixing, GenParams, ParamRanges};
use readability_core::layout::{run_layout, ForceConfig};
use readability_core::metrics::{self, NodeStyle};
use readability_core::render::decode_png;
use readability_core::{graphgen, seed};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let style = NodeStyle::default();
    let mut nontrivial = [0u64; 4];
    for i in 0..200 {
        let inst = random_instance(70_000 + i, 60);
        let (g, pos) = (&inst.graph, &inst.positions);
        let n_oc = metrics::node_occlusions(pos, &style);
        let (e_c, outside) = metrics::edge_crossings(g, pos).map_err(|e| e.to_string())?;
        let g_o = metrics::group_overlap(g, pos).map_err(|e| e.to_string())?;
        let want = oracle_crossings(g, pos);
        ensure(n_oc == oracle_occlusions(pos, 8.0), || format!("N_oc differs on graph {i}"))?;
        ensure((e_c, outside.unwrap_or(0)) == want, || format!("E_c differs on graph {i}"))?;
        ensure(g_o == oracle_group_overlap(g, pos), || format!("G_o differs on graph {i}"))?;
        let n_sp = metrics::node_spread(g, pos).map_err(|e| e.to_string())?;
        let m_a = metrics::minimum_angle(g, pos).map_err(|e| e.to_string())?;
        let m_l = metrics::edge_length_variation(g, pos).map_err(|e| e.to_string())?;
        ensure(rel_close(n_sp, oracle_spread(g, pos), 1e-9), || format!("N_sp differs on graph {i}"))?;
        ensure(rel_close(m_a, oracle_min_angle(g, pos), 1e-9), || format!("M_a differs on graph {i}"))?;
        ensure(rel_close(m_l, oracle_length_variation(g, pos), 1e-9), || format!("M_l differs on graph {i}"))?;
        for (t, v) in nontrivial.iter_mut().zip([n_oc, e_c, want.1, g_o]) {
            *t += v;
        }
    }
    let elapsed = start.elapsed();
    ensure(nontrivial.iter().all(|&c| c > 0), || format!("degenerate instances {nontrivial:?}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("200 graphs, totals N_oc/E_c/E_co/G_o {nontrivial:?}, {:.1}s", elapsed.as_secs_f64()))
}

fn formula_anchors() -> Outcome {
    let cycle = Graph::new(6, (0..6).map(|i| (i, (i + 1) % 6))).unwrap();
    let hexagon: Vec<Point> = (0..6)
        .map(|i| {
            let a = i as f64 * std::f64::consts::PI / 3.0;
            Point::new(300.0 + 50.0 * a.cos(), 300.0 + 50.0 * a.sin())
        })
        .collect();
    let m_l = metrics::edge_length_variation(&cycle, &hexagon).unwrap();
    ensure(m_l.abs() < 1e-9, || format!("M_l = {m_l}"))?;

    let star = Graph::new(5, (1..5).map(|l| (0, l))).unwrap();
    let cross = [
        Point::new(0.0, 0.0),
        Point::new(10.0, 0.0),
        Point::new(0.0, 10.0),
        Point::new(-10.0, 0.0),
        Point::new(0.0, -10.0),
    ];
    let m_a_star = metrics::minimum_angle(&star, &cross).unwrap();
    let path = Graph::new(5, (0..4).map(|i| (i, i + 1))).unwrap();
    let line: Vec<Point> = (0..5).map(|i| Point::new(30.0 * i as f64, 40.0)).collect();
    let m_a_line = metrics::minimum_angle(&path, &line).unwrap();
    ensure((m_a_star - 1.0).abs() < 1e-9, || format!("star M_a = {m_a_star}"))?;
    ensure((m_a_line - 1.0).abs() < 1e-9, || format!("straight path M_a = {m_a_line}"))?;

    let pair = Graph::new(2, [(0, 1)]).unwrap().with_communities(vec![0, 0]).unwrap();
    let n_sp = metrics::node_spread(&pair, &[Point::new(5.0, 5.0), Point::new(7.0, 5.0)]).unwrap();
    ensure((n_sp - 1.0).abs() < 1e-9, || format!("N_sp = {n_sp}"))?;
    Ok(format!("M_l = {m_l:.1e}, M_a = {m_a_star}, N_sp = {n_sp}"))
}

fn generator_fidelity() -> Outcome {
    let start = Instant::now();
    let ranges = ParamRanges::default();
    let mut worst = 0.0f64;
    let (mut smallest, mut largest) = (usize::MAX, 0);
    for i in 0..50 {
        let (p, g) = generate_sampled(seed::derive(2024, i), &ranges).map_err(|e| format!("graph {i}: {e}"))?;
        ensure(average_degree(&g) >= 3.0, || format!("graph {i}: degree {}", average_degree(&g)))?;
        ensure(g.community_count() == p.community_count, || {
            format!("graph {i}: {} of {} communities", g.community_count(), p.community_count)
        })?;
        let mu = measured_mixing(&g).ok_or("graph without labels")?;
        ensure((mu - p.mixing).abs() <= 0.05, || format!("graph {i}: mixing {mu} for {}", p.mixing))?;
        worst = worst.max((mu - p.mixing).abs());
        smallest = smallest.min(p.node_count);
        largest = largest.max(p.node_count);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "50 graphs of {smallest}..{largest} nodes, worst mixing error {worst:.3}, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn q_oracle(g: &Graph, labels: &[u32]) -> f64 {
    let two_m = 2.0 * g.edge_count() as f64;
    let mut q = 0.0;
    for i in 0..g.node_count() {
        for j in 0..g.node_count() {
            if labels[i] == labels[j] {
                let a = if g.has_edge(i, j) { 1.0 } else { 0.0 };
                q += a - (g.neighbors(i).len() * g.neighbors(j).len()) as f64 / two_m;
            }
        }
    }
    q / two_m
}

fn community_detection() -> Outcome {
    let karate = load_edge_list(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/karate.txt"), None)
        .map_err(|e| e.to_string())?;
    let d = fast_greedy_dendrogram(&karate).map_err(|e| e.to_string())?;
    let recomputed = q_oracle(&karate, d.partition.labels());
    ensure((recomputed - d.modularity).abs() <= 1e-12, || format!("Q {} vs {recomputed}", d.modularity))?;
    let n = karate.node_count();
    let single = modularity(&karate, &Partition::singletons(n)).unwrap();
    let whole = modularity(&karate, &Partition::whole(n)).unwrap();
    ensure(d.modularity >= single && d.modularity >= whole, || format!("Q {} below a baseline", d.modularity))?;

    let triangles = Graph::new(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
    let t = fast_greedy_dendrogram(&triangles).map_err(|e| e.to_string())?;
    let labels = t.partition.canonical();
    ensure(labels.labels() == [0, 0, 0, 1, 1, 1], || format!("triangles split as {:?}", labels.labels()))?;
    ensure((t.modularity - 0.5).abs() < 1e-12, || format!("triangles Q = {}", t.modularity))?;
    Ok(format!("karate Q = {:.4} in {} communities, triangles Q = 0.5", d.modularity, d.partition.community_count()))
}

fn build(dir: &Path) -> Result<(), String> {
    let config = dir.join("config.json");
    fs::write(&config, r#"{"synthetic_count": 10, "output_dir": "out"}"#).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_readability"))
        .args(["--seed", "77", "dataset", "build", "--config"])
        .arg(&config)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())
}

fn pipeline_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    build(a.path())?;
    build(b.path())?;
    let (ma, mb) = (a.path().join("out/manifest.jsonl"), b.path().join("out/manifest.jsonl"));
    ensure(fs::read(&ma).unwrap() == fs::read(&mb).unwrap(), || "manifests differ".into())?;
    let manifest = Manifest::load(&ma).map_err(|e| e.to_string())?;
    ensure(manifest.len() == 90, || format!("{} records", manifest.len()))?;
    for r in &manifest.records {
        let bytes = fs::read(a.path().join("out").join(&r.image_path)).map_err(|e| e.to_string())?;
        let other = fs::read(b.path().join("out").join(&r.image_path)).map_err(|e| e.to_string())?;
        ensure(bytes == other, || format!("{} differs", r.image_path))?;
        let img = decode_png(&bytes).map_err(|e| e.to_string())?;
        ensure(img.dimensions() == (325, 260) && img.as_raw().len() == 325 * 260 * 3, || {
            format!("{} is {:?}", r.image_path, img.dimensions())
        })?;
    }
    let pngs = fs::read_dir(a.path().join("out/images")).unwrap().count();
    ensure(pngs == 90, || format!("{pngs} images on disk"))?;
    Ok("90 identical 325x260x3 images and manifests".into())
}

fn bench_items() -> Vec<BenchItem> {
    let mut items = Vec::new();
    for (bucket_nodes, communities) in [(80, 4), (150, 8), (350, 18), (560, 28)] {
        for k in 0..3 {
            let p = GenParams {
                node_count: bucket_nodes + 5 * k,
                community_count: communities,
                min_avg_degree: 3.0,
                mixing: 0.3,
                seed: 500 + k as u64,
            };
            let graph = graphgen::generate_lfr(&p).unwrap();
            let positions = run_layout(&graph, &ForceConfig::new(0.3, -300.0, 5)).unwrap().positions;
            items.push(BenchItem { graph, positions, image_path: None });
        }
    }
    items
}

fn timing_trend() -> Outcome {
    let rows = bench_traditional_vs_model(&bench_items(), None, &BenchOptions::default()).map_err(|e| e.to_string())?;
    let times = |g: MetricGroup| -> Vec<(usize, f64)> {
        rows.iter().filter(|r| r.group == g).map(|r| (r.bucket, r.traditional_seconds)).collect()
    };
    let edge = times(MetricGroup::Edge);
    let small = edge.iter().find(|(b, _)| *b == 0).ok_or("no small bucket")?.1;
    let large = edge.iter().find(|(b, _)| *b == 5).ok_or("no large bucket")?.1;
    let ratio = large / small;
    let node = times(MetricGroup::Node);
    let monotone = node.windows(2).all(|w| w[1].1 > w[0].1);
    let summary = format!(
        "edge {:.1}us -> {:.1}us ({ratio:.1}x); node {:?} us",
        small * 1e6,
        large * 1e6,
        node.iter().map(|(_, t)| (t * 1e7).round() / 10.0).collect::<Vec<_>>()
    );
    ensure(ratio >= 5.0, || format!("edge ratio below 5: {summary}"))?;
    ensure(node.len() >= 3 && monotone, || format!("node times not increasing: {summary}"))?;
    Ok(summary)
}

fn interval_fidelity() -> Outcome {
    // Four absolute errors 0.88 ± s with 1.96·s/√4 = 0.01, so the interval is [0.87, 0.89].
    let s = 0.02 / 1.96;
    let truth = [44.0, 45.5, 44.14, 46.0];
    let mean_truth = truth.iter().sum::<f64>() / 4.0;
    let errors = [0.88 + s, 0.88 - s, 0.88 + s, 0.88 - s];
    let predicted: Vec<f64> = truth.iter().zip(errors).map(|(t, e)| t - e).collect();
    let ci = confidence_interval(&truth, &predicted).map_err(|e| e.to_string())?;
    ensure((ci.ci_low - 0.87).abs() < 1e-9 && (ci.ci_high - 0.89).abs() < 1e-9, || format!("{ci:?}"))?;
    ensure((mean_truth - 44.91).abs() < 1e-9, || format!("mean truth {mean_truth}"))?;
    let p = percentage_error(ci.ci_high, &truth).map_err(|e| e.to_string())?;
    ensure((p - 0.0198).abs() < 5e-5, || format!("P = {p}"))?;

    let mut rng = seed::rng(31);
    for i in 0..100 {
        let n = rng.random_range(1..200);
        let scale = 10f64.powi(rng.random_range(-2..4));
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..scale)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..scale)).collect();
        let ci = confidence_interval(&x, &y).map_err(|e| e.to_string())?;
        let (mu, lo, hi) = oracle_interval(&x, &y);
        let tol = 1e-12 * scale;
        ensure((ci.mean - mu).abs() <= tol && (ci.ci_low - lo).abs() <= tol && (ci.ci_high - hi).abs() <= tol, || {
            format!("array {i}: {ci:?} vs ({mu}, {lo}, {hi})")
        })?;
        let p = percentage_error(ci.ci_high, &x).map_err(|e| e.to_string())?;
        let want = hi / (x.iter().sum::<f64>() / n as f64);
        ensure(rel_close(p, want, 1e-12), || format!("array {i}: P {p} vs {want}"))?;
    }
    Ok(format!("interval [{:.2}, {:.2}], P = {p:.4}; 100 arrays agree", ci.ci_low, ci.ci_high))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("metric oracle equivalence", metric_oracles),
        ("formula anchors", formula_anchors),
        ("generator fidelity", generator_fidelity),
        ("community detection", community_detection),
        ("pipeline determinism", pipeline_determinism),
        ("timing trend", timing_trend),
        ("interval and percentage error", interval_fidelity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
