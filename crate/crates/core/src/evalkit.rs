//! Evaluation statistics for predicted metric vectors and the timing
//! harness comparing coordinate-based scoring with an image model runner.

use std::fmt;
use std::hint::black_box;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::graph::Graph;
use crate::metrics::{self, MetricVector, NodeStyle};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("truth has {truth} values, prediction has {predicted}")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("no values to evaluate")]
    Empty,
    #[error("mean of the truth values is zero")]
    ZeroMean,
    #[error("truth values have no variance (or fewer than two values)")]
    DegenerateTruth,
    #[error("benchmark needs at least 2 buckets of at least 3 graphs: {0}")]
    InsufficientSamples(String),
    #[error("model runner failed: {0}")]
    Runner(String),
    #[error("metric computation failed: {0}")]
    Metrics(#[from] metrics::MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

fn check_lengths(truth: &[f64], predicted: &[f64]) -> Result<(), EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    Ok(())
}

/// 95% interval for the mean absolute error, using the population standard
/// deviation of the absolute differences.
pub fn confidence_interval(truth: &[f64], predicted: &[f64]) -> Result<IntervalStats, EvalError> {
    check_lengths(truth, predicted)?;
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = truth.len();
    let z: Vec<f64> = truth.iter().zip(predicted).map(|(x, y)| (x - y).abs()).collect();
    let mean = z.iter().sum::<f64>() / n as f64;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    let half = Z_95 * std / (n as f64).sqrt();
    Ok(IntervalStats { mean, std, ci_low: mean - half, ci_high: mean + half, n })
}

/// Upper interval bound as a fraction of the mean truth value.
pub fn percentage_error(ci_high: f64, truth: &[f64]) -> Result<f64, EvalError> {
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    if mean == 0.0 {
        return Err(EvalError::ZeroMean);
    }
    Ok(ci_high / mean)
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2_score(truth: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_lengths(truth, predicted)?;
    if truth.len() < 2 {
        return Err(EvalError::DegenerateTruth);
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|x| (x - mean) * (x - mean)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::DegenerateTruth);
    }
    let ss_res: f64 = truth.iter().zip(predicted).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Interval, percentage error and R² for one metric; the latter two are
/// `None` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(flatten)]
    pub interval: IntervalStats,
    pub percentage_error: Option<f64>,
    pub r2: Option<f64>,
}

pub fn evaluate_metric(truth: &[f64], predicted: &[f64]) -> Result<MetricReport, EvalError> {
    let interval = confidence_interval(truth, predicted)?;
    let percentage_error = match percentage_error(interval.ci_high, truth) {
        Ok(p) => Some(p),
        Err(EvalError::ZeroMean) => None,
        Err(e) => return Err(e),
    };
    let r2 = match r2_score(truth, predicted) {
        Ok(r) => Some(r),
        Err(EvalError::DegenerateTruth) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricReport { interval, percentage_error, r2 })
}

/// The three metric groups, one image model each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricGroup {
    Node,
    Edge,
    Global,
}

impl MetricGroup {
    pub const ALL: [MetricGroup; 3] = [MetricGroup::Node, MetricGroup::Edge, MetricGroup::Global];

    /// Metric names predicted by the group's model, in output order.
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            MetricGroup::Node => &["n_n", "n_oc", "n_c", "n_sp"],
            MetricGroup::Edge => &["e_n", "e_c", "e_c_outside"],
            MetricGroup::Global => &["m_a", "m_l", "g_o"],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricGroup::Node => "Node Metrics",
            MetricGroup::Edge => "Edge Metrics",
            MetricGroup::Global => "Others Metrics",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "node" => Some(MetricGroup::Node),
            "edge" => Some(MetricGroup::Edge),
            "global" | "other" | "others" => Some(MetricGroup::Global),
            _ => None,
        }
    }
}

impl fmt::Display for MetricGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricGroup::Node => "node",
            MetricGroup::Edge => "edge",
            MetricGroup::Global => "global",
        })
    }
}

/// Value of a metric by name.
pub fn metric_value(m: &MetricVector, name: &str) -> Option<f64> {
    MetricVector::NAMES.iter().position(|&n| n == name).map(|i| m.values()[i])
}

/// Computes only the group's metrics from coordinates. Returns a checksum so
/// the work cannot be optimized away.
pub fn compute_group(
    group: MetricGroup,
    graph: &Graph,
    positions: &[Point],
    style: &NodeStyle,
) -> Result<f64, EvalError> {
    Ok(match group {
        MetricGroup::Node => {
            let (n_n, _, n_c) = metrics::counts(graph);
            let n_oc = metrics::node_occlusions(positions, style);
            let n_sp = metrics::node_spread(graph, positions)?;
            n_n as f64 + n_c as f64 + n_oc as f64 + n_sp
        }
        MetricGroup::Edge => {
            let (_, e_n, _) = metrics::counts(graph);
            let (e_c, outside) = metrics::edge_crossings(graph, positions)?;
            e_n as f64 + e_c as f64 + outside.unwrap_or(0) as f64
        }
        MetricGroup::Global => {
            let m_a = metrics::minimum_angle(graph, positions)?;
            let m_l = match metrics::edge_length_variation(graph, positions) {
                Err(metrics::MetricsError::NoEdges) => 0.0,
                other => other?,
            };
            m_a + m_l + metrics::group_overlap(graph, positions)? as f64
        }
    })
}

/// Node-count bucket of the timing table: `[0,100)`, `[100,200)`, …,
/// with everything from 500 up in the last bucket.
pub fn node_bucket(node_count: usize) -> usize {
    (node_count / 100).min(5)
}

pub fn bucket_label(bucket: usize) -> String {
    match bucket {
        0 => "N_n < 100".to_string(),
        b => format!("{} <= N_n < {}", b * 100, b * 100 + 100),
    }
}

#[derive(Debug, Clone)]
pub struct BenchItem {
    pub graph: Graph,
    pub positions: Vec<Point>,
    pub image_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    /// Timed repetitions per item; the median is kept.
    pub repetitions: usize,
    /// Each repetition loops the computation until at least this long.
    pub min_duration: Duration,
    pub style: NodeStyle,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { repetitions: 5, min_duration: Duration::from_millis(2), style: NodeStyle::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub group: MetricGroup,
    pub bucket: usize,
    pub bucket_label: String,
    pub samples: usize,
    /// Median over items of the per-item median time, in seconds.
    pub traditional_seconds: f64,
    pub model_seconds: Option<f64>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median seconds per call of `f` over `options.repetitions` repetitions,
/// after one warm-up call.
pub fn time_call<F, E>(options: &BenchOptions, mut f: F) -> Result<f64, E>
where
    F: FnMut() -> Result<f64, E>,
{
    black_box(f()?);
    let mut samples = Vec::with_capacity(options.repetitions);
    for _ in 0..options.repetitions.max(1) {
        let start = Instant::now();
        let mut calls = 0u32;
        loop {
            black_box(f()?);
            calls += 1;
            if start.elapsed() >= options.min_duration {
                break;
            }
        }
        samples.push(start.elapsed().as_secs_f64() / calls as f64);
    }
    Ok(median(&mut samples))
}

/// A prediction process: reads one image path per stdin line and answers
/// with one comma-separated row of numbers per stdout line.
pub struct ModelRunner {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    stdout: BufReader<ChildStdout>,
}

impl ModelRunner {
    /// Starts `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self, EvalError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::Runner(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().map(BufWriter::new);
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(ModelRunner { child, stdin, stdout })
    }

    pub fn predict(&mut self, image: &Path) -> Result<Vec<f64>, EvalError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| EvalError::Runner("stdin closed".into()))?;
        writeln!(stdin, "{}", image.display())
            .and_then(|_| stdin.flush())
            .map_err(|e| EvalError::Runner(format!("write failed: {e}")))?;
        let mut line = String::new();
        let read = self.stdout.read_line(&mut line).map_err(|e| EvalError::Runner(format!("read failed: {e}")))?;
        if read == 0 {
            return Err(EvalError::Runner("runner closed its output".into()));
        }
        parse_prediction_row(&line)
    }
}

impl Drop for ModelRunner {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.wait();
    }
}

pub fn parse_prediction_row(line: &str) -> Result<Vec<f64>, EvalError> {
    line.trim()
        .split(',')
        .map(|field| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| EvalError::Runner(format!("bad prediction value {field:?} in {:?}", line.trim())))
        })
        .collect()
}

/// Times coordinate-based metric computation per group and bucket, and the
/// model runner per bucket when one is given. Each bucket needs at least
/// three items and at least two buckets must be populated.
///
/// A single runner serves all groups, so its per-image time fills the model
/// column of every group row.
pub fn bench_traditional_vs_model(
    items: &[BenchItem],
    mut runner: Option<&mut ModelRunner>,
    options: &BenchOptions,
) -> Result<Vec<TimingRow>, EvalError> {
    let mut buckets: std::collections::BTreeMap<usize, Vec<&BenchItem>> = Default::default();
    for item in items {
        buckets.entry(node_bucket(item.graph.node_count())).or_default().push(item);
    }
    let populated: Vec<usize> = buckets.iter().filter(|(_, v)| v.len() >= 3).map(|(&b, _)| b).collect();
    if populated.len() < 2 {
        let sizes: Vec<String> =
            buckets.iter().map(|(&b, v)| format!("{}: {}", bucket_label(b), v.len())).collect();
        return Err(EvalError::InsufficientSamples(sizes.join(", ")));
    }
    let mut rows = Vec::new();
    for &b in &populated {
        let members = &buckets[&b];
        let model_seconds = match runner.as_deref_mut() {
            Some(r) => {
                let mut times = Vec::with_capacity(members.len());
                for item in members {
                    let path = item.image_path.as_deref().ok_or_else(|| {
                        EvalError::Runner("bench item has no image for the model runner".into())
                    })?;
                    let once = BenchOptions { min_duration: Duration::ZERO, ..*options };
                    times.push(time_call(&once, || r.predict(path).map(|row| row.iter().sum::<f64>()))?);
                }
                Some(median(&mut times))
            }
            None => None,
        };
        for group in MetricGroup::ALL {
            let mut times = Vec::with_capacity(members.len());
            for item in members {
                times.push(time_call(options, || {
                    compute_group(group, &item.graph, &item.positions, &options.style)
                })?);
            }
            rows.push(TimingRow {
                group,
                bucket: b,
                bucket_label: bucket_label(b),
                samples: members.len(),
                traditional_seconds: median(&mut times),
                model_seconds,
            });
        }
    }
    rows.sort_by_key(|r| (r.group, r.bucket));
    Ok(rows)
}

/// Timing table as CSV: one line per metric group, a `T` and `C` column per
/// bucket. Missing model timings are left empty.
pub fn timing_table_csv(rows: &[TimingRow]) -> String {
    let mut buckets: Vec<usize> = rows.iter().map(|r| r.bucket).collect();
    buckets.sort_unstable();
    buckets.dedup();
    let mut out = String::from("group");
    for &b in &buckets {
        let label = bucket_label(b);
        out.push_str(&format!(",{label} T,{label} C"));
    }
    out.push('\n');
    for group in MetricGroup::ALL {
        out.push_str(group.label());
        for &b in &buckets {
            match rows.iter().find(|r| r.group == group && r.bucket == b) {
                Some(r) => {
                    out.push_str(&format!(",{:.6}", r.traditional_seconds));
                    match r.model_seconds {
                        Some(c) => out.push_str(&format!(",{c:.6}")),
                        None => out.push(','),
                    }
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_arrays_give_zero_interval() {
        let x = [1.0, 5.0, -2.0];
        let s = confidence_interval(&x, &x).unwrap();
        assert_eq!((s.ci_low, s.ci_high, s.mean, s.std), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_difference() {
        let s = confidence_interval(&[1.0, 2.0, 3.0], &[2.0, 1.0, 4.0]).unwrap();
        assert_eq!((s.ci_low, s.ci_high), (1.0, 1.0));
        assert_eq!(s.n, 3);
    }

    #[test]
    fn interval_errors() {
        assert!(matches!(confidence_interval(&[], &[]), Err(EvalError::Empty)));
        assert!(matches!(confidence_interval(&[1.0], &[]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn percentage_error_cases() {
        // Table value pair for the node-count metric.
        let truth = [44.91; 4];
        let p = percentage_error(0.89, &truth).unwrap();
        assert!((p - 0.89 / 44.91).abs() < 1e-15);
        assert!((p - 0.0198).abs() < 5e-5);
        assert_eq!(percentage_error(0.0, &truth).unwrap(), 0.0);
        assert!(matches!(percentage_error(1.0, &[1.0, -1.0]), Err(EvalError::ZeroMean)));
    }

    #[test]
    fn r2_cases() {
        let t = [1.0, 2.0, 4.0, 7.0];
        assert_eq!(r2_score(&t, &t).unwrap(), 1.0);
        assert!(r2_score(&t, &[3.5; 4]).unwrap().abs() < 1e-15);
        assert!(matches!(r2_score(&[2.0, 2.0], &[1.0, 3.0]), Err(EvalError::DegenerateTruth)));
        assert!(matches!(r2_score(&[2.0], &[2.0]), Err(EvalError::DegenerateTruth)));
    }

    #[test]
    fn groups_cover_all_metrics_once() {
        let mut names: Vec<&str> = MetricGroup::ALL.iter().flat_map(|g| g.metrics().iter().copied()).collect();
        assert_eq!(names.len(), 10);
        names.sort_unstable();
        let mut all = MetricVector::NAMES.to_vec();
        all.sort_unstable();
        assert_eq!(names, all);
        assert_eq!(MetricGroup::ALL.map(|g| g.metrics().len()), [4, 3, 3]);
    }

    #[test]
    fn buckets() {
        assert_eq!(node_bucket(99), 0);
        assert_eq!(node_bucket(100), 1);
        assert_eq!(node_bucket(599), 5);
        assert_eq!(node_bucket(600), 5);
        assert_eq!(bucket_label(5), "500 <= N_n < 600");
    }

    #[test]
    fn prediction_rows() {
        assert_eq!(parse_prediction_row("1, 2.5,-3e1\n").unwrap(), vec![1.0, 2.5, -30.0]);
        assert!(parse_prediction_row("1,x").is_err());
    }

    #[test]
    fn bench_needs_two_buckets() {
        let g = Graph::new(3, [(0, 1)]).unwrap().with_communities(vec![0, 0, 1]).unwrap();
        let item = BenchItem { graph: g, positions: vec![Point::default(); 3], image_path: None };
        let items = vec![item; 5];
        assert!(matches!(
            bench_traditional_vs_model(&items, None, &BenchOptions::default()),
            Err(EvalError::InsufficientSamples(_))
        ));
    }
}
