//! Ingestion of node benchmark results and historical task traces.
//!
//! Node features are rank-normalized: for every benchmarked feature the
//! nodes are dense-ranked (rank 1 = best, ties share a rank) instead of
//! keeping absolute measurement values. Task-side metrics stay raw.

mod files;

pub use files::{load_profiles, load_traces, save_profiles, save_traces, ProfileSet};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Cluster, NodeProfile};
use crate::recommender::TrainingTarget;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProfilingError {
    #[error("node `{node_id}` has {actual} benchmark scores, expected {expected}")]
    DimensionMismatch {
        node_id: String,
        expected: usize,
        actual: usize,
    },
    #[error("{path}:{row}: column `{column}`: {reason}")]
    Parse {
        path: String,
        row: usize,
        column: String,
        reason: String,
    },
    #[error("dataset contains no records")]
    EmptyDataset,
    #[error("trace references unknown machine type `{0}`")]
    UnknownMachineType(String),
    #[error("trace references unknown task `{0}`")]
    UnknownTask(String),
    #[error("trace metric names do not match: expected {expected:?}, got {actual:?}")]
    MetricNamesMismatch {
        expected: Vec<String>,
        actual: Vec<String>,
    },
    #[error("io error on `{path}`: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
}

/// Whether a larger measurement is better (throughput) or worse (latency).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Higher,
    Lower,
}

/// Name and orientation of one benchmarked node feature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub name: String,
    pub orientation: Orientation,
}

impl BenchmarkSpec {
    pub fn higher(name: &str) -> Self {
        Self {
            name: name.to_string(),
            orientation: Orientation::Higher,
        }
    }

    pub fn lower(name: &str) -> Self {
        Self {
            name: name.to_string(),
            orientation: Orientation::Lower,
        }
    }
}

/// One historical task execution: where it ran, how long it took, and the
/// task metrics monitored during the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskTraceRecord {
    pub task_id: String,
    pub machine_type: String,
    pub runtime_s: f64,
    pub metrics: Vec<f64>,
}

/// A set of trace records sharing one metric-name schema.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSet {
    pub metric_names: Vec<String>,
    pub records: Vec<TaskTraceRecord>,
}

/// A cluster whose nodes all carry benchmark ranks assigned by a profiling
/// pass, plus the schema describing what was benchmarked. Ranks are dense
/// over the universe that was profiled together (see
/// [`profile_with_reference`] for clusters assembled from profiled types).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfiledCluster {
    benchmarks: Vec<BenchmarkSpec>,
    cluster: Cluster,
}

impl ProfiledCluster {
    pub fn benchmarks(&self) -> &[BenchmarkSpec] {
        &self.benchmarks
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    pub fn nodes(&self) -> &[NodeProfile] {
        self.cluster.nodes()
    }

    pub fn node(&self, id: &str) -> Option<&NodeProfile> {
        self.cluster.node(id)
    }

    pub fn feature_count(&self) -> usize {
        self.benchmarks.len()
    }

    /// Benchmark ranks of the first node (lowest id) of a machine type.
    /// Nodes of one type share scores in practice, so this is well defined.
    pub fn ranks_for_machine_type(&self, machine_type: &str) -> Option<&[u32]> {
        self.nodes()
            .iter()
            .filter(|n| n.machine_type == machine_type)
            .min_by(|a, b| a.id.cmp(&b.id))
            .map(|n| n.benchmark_ranks.as_slice())
    }
}

/// Dense-ranks every benchmark feature across the cluster's nodes.
///
/// Rank 1 is the best-performing node for that feature under the given
/// orientation; ties share a rank and the next distinct value gets the next
/// integer. Raw scores are retained alongside the ranks.
pub fn rank_features(
    cluster: &Cluster,
    benchmarks: &[BenchmarkSpec],
) -> Result<ProfiledCluster, ProfilingError> {
    let w = benchmarks.len();
    for node in cluster.nodes() {
        if node.benchmark_scores.len() != w {
            return Err(ProfilingError::DimensionMismatch {
                node_id: node.id.clone(),
                expected: w,
                actual: node.benchmark_scores.len(),
            });
        }
    }

    let mut nodes: Vec<NodeProfile> = cluster.nodes().to_vec();
    for (feature, bench) in benchmarks.iter().enumerate() {
        let mut values: Vec<f64> = nodes.iter().map(|n| n.benchmark_scores[feature]).collect();
        values.sort_by(|a, b| match bench.orientation {
            Orientation::Higher => b.partial_cmp(a).unwrap(),
            Orientation::Lower => a.partial_cmp(b).unwrap(),
        });
        values.dedup();
        for node in &mut nodes {
            let score = node.benchmark_scores[feature];
            let rank = values.iter().position(|&v| v == score).unwrap() as u32 + 1;
            node.benchmark_ranks.push(rank);
        }
    }
    Ok(ProfiledCluster {
        benchmarks: benchmarks.to_vec(),
        cluster: Cluster::new(nodes).expect("re-validating an already valid cluster"),
    })
}

/// Profiles a cluster whose nodes were benchmarked as part of a larger,
/// already profiled universe: every node inherits the reference ranks of
/// its machine type. Benchmarking runs once per node, so clusters assembled
/// from profiled machine types reuse the stored ranks instead of being
/// re-ranked in isolation.
pub fn profile_with_reference(
    cluster: &Cluster,
    reference: &ProfiledCluster,
) -> Result<ProfiledCluster, ProfilingError> {
    let mut nodes = Vec::with_capacity(cluster.nodes().len());
    for node in cluster.nodes() {
        let ranks = reference
            .ranks_for_machine_type(&node.machine_type)
            .ok_or_else(|| ProfilingError::UnknownMachineType(node.machine_type.clone()))?;
        let mut profiled_node = node.clone();
        profiled_node.benchmark_ranks = ranks.to_vec();
        nodes.push(profiled_node);
    }
    Ok(ProfiledCluster {
        benchmarks: reference.benchmarks.clone(),
        cluster: Cluster::new(nodes)?,
    })
}

/// The design matrix: one row per trace record, `v` raw task metrics
/// followed by `w` node benchmark ranks, plus the training target.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// (task id, machine type) provenance per row, aligned with `rows`.
    pub provenance: Vec<(String, String)>,
}

impl TrainingSet {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

/// Assembles the training matrix from traces and a profiled cluster.
///
/// Row order is deterministic: sorted by task id, then machine type, then
/// original trace index. Targets follow the requested training-target mode.
pub fn build_training_set(
    traces: &TraceSet,
    profiled: &ProfiledCluster,
    task_catalog: &BTreeSet<String>,
    target: TrainingTarget,
) -> Result<TrainingSet, ProfilingError> {
    if traces.records.is_empty() {
        return Err(ProfilingError::EmptyDataset);
    }
    let v = traces.metric_names.len();
    for record in &traces.records {
        if !task_catalog.contains(&record.task_id) {
            return Err(ProfilingError::UnknownTask(record.task_id.clone()));
        }
        if profiled.ranks_for_machine_type(&record.machine_type).is_none() {
            return Err(ProfilingError::UnknownMachineType(record.machine_type.clone()));
        }
        debug_assert_eq!(record.metrics.len(), v);
    }

    let mut order: Vec<usize> = (0..traces.records.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = &traces.records[a];
        let rb = &traces.records[b];
        (&ra.task_id, &ra.machine_type, a).cmp(&(&rb.task_id, &rb.machine_type, b))
    });

    // per-task minimum runtime across the whole training set
    let mut min_runtime: BTreeMap<&str, f64> = BTreeMap::new();
    for record in &traces.records {
        let slot = min_runtime.entry(&record.task_id).or_insert(f64::INFINITY);
        *slot = slot.min(record.runtime_s);
    }

    let mut feature_names = traces.metric_names.clone();
    feature_names.extend(profiled.benchmarks().iter().map(|b| format!("rank:{}", b.name)));

    let mut rows = Vec::with_capacity(order.len());
    let mut targets = Vec::with_capacity(order.len());
    let mut provenance = Vec::with_capacity(order.len());
    for idx in order {
        let record = &traces.records[idx];
        let ranks = profiled
            .ranks_for_machine_type(&record.machine_type)
            .expect("machine type validated above");
        let mut row = Vec::with_capacity(v + ranks.len());
        row.extend_from_slice(&record.metrics);
        row.extend(ranks.iter().map(|&r| r as f64));
        rows.push(row);
        targets.push(match target {
            TrainingTarget::Normalized => record.runtime_s / min_runtime[record.task_id.as_str()],
            TrainingTarget::Raw => record.runtime_s,
        });
        provenance.push((record.task_id.clone(), record.machine_type.clone()));
    }

    Ok(TrainingSet {
        feature_names,
        rows,
        targets,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Resources;
    use crate::rng::SimRng;

    fn node(id: &str, machine_type: &str, scores: Vec<f64>) -> NodeProfile {
        NodeProfile::new(id, machine_type, Resources::new(4, 8 << 30), scores)
    }

    #[test]
    fn dense_ranking_higher_better() {
        let cluster = Cluster::new(vec![
            node("n1", "a", vec![200.0]),
            node("n2", "b", vec![150.0]),
            node("n3", "c", vec![150.0]),
            node("n4", "d", vec![100.0]),
        ])
        .unwrap();
        let profiled = rank_features(&cluster, &[BenchmarkSpec::higher("hashes")]).unwrap();
        let ranks: Vec<u32> = profiled.nodes().iter().map(|n| n.benchmark_ranks[0]).collect();
        assert_eq!(ranks, vec![1, 2, 2, 3]);
    }

    #[test]
    fn lower_is_better_orientation() {
        let cluster =
            Cluster::new(vec![node("n1", "a", vec![30.0]), node("n2", "b", vec![45.0])]).unwrap();
        let profiled = rank_features(&cluster, &[BenchmarkSpec::lower("build_s")]).unwrap();
        let ranks: Vec<u32> = profiled.nodes().iter().map(|n| n.benchmark_ranks[0]).collect();
        assert_eq!(ranks, vec![1, 2]);
    }

    #[test]
    fn single_node_gets_rank_one() {
        let cluster = Cluster::new(vec![node("n1", "a", vec![5.0])]).unwrap();
        let profiled = rank_features(&cluster, &[BenchmarkSpec::higher("x")]).unwrap();
        assert_eq!(profiled.nodes()[0].benchmark_ranks, vec![1]);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let cluster =
            Cluster::new(vec![node("n1", "a", vec![1.0, 2.0]), node("n2", "b", vec![1.0])])
                .unwrap();
        let err = rank_features(&cluster, &[BenchmarkSpec::higher("x"), BenchmarkSpec::higher("y")])
            .unwrap_err();
        assert_eq!(
            err,
            ProfilingError::DimensionMismatch {
                node_id: "n2".to_string(),
                expected: 2,
                actual: 1
            }
        );
    }

    #[test]
    fn ranks_invariant_under_positive_affine_rescaling() {
        let mut rng = SimRng::new(42);
        for _ in 0..50 {
            let n = 2 + rng.index(8);
            let scores: Vec<f64> = (0..n).map(|_| (rng.index(20) as f64) * 0.5).collect();
            let a = rng.uniform(0.1, 10.0);
            let b = rng.uniform(-5.0, 5.0);

            let build = |scores: &[f64]| {
                Cluster::new(
                    scores
                        .iter()
                        .enumerate()
                        .map(|(i, &s)| node(&format!("n{i}"), &format!("m{i}"), vec![s]))
                        .collect(),
                )
                .unwrap()
            };
            let base = rank_features(&build(&scores), &[BenchmarkSpec::higher("f")]).unwrap();
            let mapped: Vec<f64> = scores.iter().map(|&s| a * s + b).collect();
            let transformed = rank_features(&build(&mapped), &[BenchmarkSpec::higher("f")]).unwrap();

            let ranks = |p: &ProfiledCluster| -> Vec<u32> {
                p.nodes().iter().map(|n| n.benchmark_ranks[0]).collect()
            };
            assert_eq!(ranks(&base), ranks(&transformed));

            // dense: as many distinct ranks as distinct scores
            let distinct_scores: BTreeSet<u64> = scores.iter().map(|s| s.to_bits()).collect();
            let distinct_ranks: BTreeSet<u32> = ranks(&base).into_iter().collect();
            assert_eq!(distinct_scores.len(), distinct_ranks.len());
        }
    }

    fn trace(task: &str, machine: &str, runtime: f64, metrics: Vec<f64>) -> TaskTraceRecord {
        TaskTraceRecord {
            task_id: task.to_string(),
            machine_type: machine.to_string(),
            runtime_s: runtime,
            metrics,
        }
    }

    #[test]
    fn training_set_shape_and_order() {
        // v = 4 task metrics, w = 6 node features -> rows of length 10
        let benchmarks: Vec<BenchmarkSpec> =
            (0..6).map(|i| BenchmarkSpec::higher(&format!("b{i}"))).collect();
        let cluster = Cluster::new(vec![
            node("n1", "mt1", vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            node("n2", "mt2", vec![6.0, 5.0, 4.0, 3.0, 2.0, 1.0]),
            node("n3", "mt3", vec![2.0, 2.0, 2.0, 2.0, 2.0, 2.0]),
        ])
        .unwrap();
        let profiled = rank_features(&cluster, &benchmarks).unwrap();
        let metric_names: Vec<String> = (0..4).map(|i| format!("m{i}")).collect();
        let traces = TraceSet {
            metric_names,
            records: vec![
                trace("t2", "mt1", 10.0, vec![1.0; 4]),
                trace("t1", "mt3", 20.0, vec![2.0; 4]),
                trace("t1", "mt1", 5.0, vec![2.0; 4]),
                trace("t2", "mt2", 40.0, vec![1.0; 4]),
                trace("t1", "mt2", 10.0, vec![2.0; 4]),
                trace("t2", "mt3", 20.0, vec![1.0; 4]),
            ],
        };
        let catalog: BTreeSet<String> = ["t1", "t2"].iter().map(|s| s.to_string()).collect();
        let ts = build_training_set(&traces, &profiled, &catalog, TrainingTarget::Normalized)
            .unwrap();

        assert_eq!(ts.n_rows(), 6);
        assert_eq!(ts.n_features(), 10);
        assert!(ts.rows.iter().all(|r| r.len() == 10));
        assert!(ts.rows.iter().flatten().all(|v| v.is_finite()));
        // sorted by (task, machine type)
        let expected: Vec<(String, String)> = [
            ("t1", "mt1"),
            ("t1", "mt2"),
            ("t1", "mt3"),
            ("t2", "mt1"),
            ("t2", "mt2"),
            ("t2", "mt3"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        assert_eq!(ts.provenance, expected);
        // normalized targets: per-task minimum maps to 1.0
        assert_eq!(ts.targets, vec![1.0, 2.0, 4.0, 1.0, 4.0, 2.0]);
    }

    #[test]
    fn reference_profiling_inherits_type_ranks() {
        let universe = Cluster::new(vec![
            node("u1", "fast", vec![300.0]),
            node("u2", "mid", vec![200.0]),
            node("u3", "slow", vec![100.0]),
        ])
        .unwrap();
        let reference = rank_features(&universe, &[BenchmarkSpec::higher("b")]).unwrap();

        // a cluster drawn from a subset of the profiled types keeps the
        // universe ranks, holes included
        let drawn = Cluster::new(vec![
            node("c0-n0", "slow", vec![100.0]),
            node("c0-n1", "fast", vec![300.0]),
            node("c0-n2", "slow", vec![100.0]),
        ])
        .unwrap();
        let profiled = profile_with_reference(&drawn, &reference).unwrap();
        let ranks: Vec<u32> = profiled.nodes().iter().map(|n| n.benchmark_ranks[0]).collect();
        assert_eq!(ranks, vec![3, 1, 3]);

        let unknown = Cluster::new(vec![node("x", "exotic", vec![1.0])]).unwrap();
        assert_eq!(
            profile_with_reference(&unknown, &reference).unwrap_err(),
            ProfilingError::UnknownMachineType("exotic".to_string())
        );
    }

    #[test]
    fn training_set_raw_target_mode() {
        let profiled = rank_features(
            &Cluster::new(vec![node("n1", "mt1", vec![1.0])]).unwrap(),
            &[BenchmarkSpec::higher("b")],
        )
        .unwrap();
        let traces = TraceSet {
            metric_names: vec!["m".to_string()],
            records: vec![trace("t", "mt1", 12.5, vec![0.0])],
        };
        let catalog = BTreeSet::from(["t".to_string()]);
        let ts = build_training_set(&traces, &profiled, &catalog, TrainingTarget::Raw).unwrap();
        assert_eq!(ts.targets, vec![12.5]);
    }

    #[test]
    fn training_set_errors() {
        let profiled = rank_features(
            &Cluster::new(vec![node("n1", "mt1", vec![1.0])]).unwrap(),
            &[BenchmarkSpec::higher("b")],
        )
        .unwrap();
        let empty = TraceSet {
            metric_names: vec![],
            records: vec![],
        };
        let catalog = BTreeSet::from(["t".to_string()]);
        assert_eq!(
            build_training_set(&empty, &profiled, &catalog, TrainingTarget::Normalized)
                .unwrap_err(),
            ProfilingError::EmptyDataset
        );

        let unknown_machine = TraceSet {
            metric_names: vec![],
            records: vec![trace("t", "nope", 1.0, vec![])],
        };
        assert_eq!(
            build_training_set(&unknown_machine, &profiled, &catalog, TrainingTarget::Raw)
                .unwrap_err(),
            ProfilingError::UnknownMachineType("nope".to_string())
        );

        let unknown_task = TraceSet {
            metric_names: vec![],
            records: vec![trace("ghost", "mt1", 1.0, vec![])],
        };
        assert_eq!(
            build_training_set(&unknown_task, &profiled, &catalog, TrainingTarget::Raw)
                .unwrap_err(),
            ProfilingError::UnknownTask("ghost".to_string())
        );
    }
}
