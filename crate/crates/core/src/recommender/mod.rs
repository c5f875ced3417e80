//! Node recommender: trains a regression tree on task/node features and
//! emits per-task node priority lists.

mod model_file;
mod tree;

pub use model_file::{load_model, save_model};
pub use tree::{Hyperparameters, RegressionTree, TreeNode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Cluster, TaskDescriptor};
use crate::profiling::{BenchmarkSpec, ProfiledCluster, TrainingSet};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RecommenderError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("feature vector has length {actual}, model expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("no allocatable node for task `{task_id}` (short on `{resource_kind}`)")]
    NoAllocatableNode { task_id: String, resource_kind: String },
    #[error("model schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{path}: {reason}")]
    ModelFile { path: String, reason: String },
}

/// What the tree is trained to predict for a (task, node) combination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingTarget {
    /// Runtime divided by the task's minimum runtime across the training
    /// set, so 1.0 marks the best machine observed for that task. Keeps
    /// targets comparable across tasks with very different absolute
    /// runtimes while preserving the within-task ordering.
    #[default]
    Normalized,
    /// Raw runtime in seconds, kept for ablation.
    Raw,
}

impl TrainingTarget {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "normalized" => Some(Self::Normalized),
            "raw" => Some(Self::Raw),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Normalized => "normalized",
            Self::Raw => "raw",
        }
    }
}

/// A trained tree plus the feature schema it was trained against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommenderModel {
    pub tree: RegressionTree,
    pub target: TrainingTarget,
    pub seed: u64,
    /// Task-side metric names, in input order.
    pub task_metric_names: Vec<String>,
    /// Node-side benchmark names and orientations, in input order.
    pub benchmarks: Vec<BenchmarkSpec>,
}

impl RecommenderModel {
    /// Trains on an assembled training set.
    pub fn train(
        training: &TrainingSet,
        task_metric_names: &[String],
        benchmarks: &[BenchmarkSpec],
        target: TrainingTarget,
        hyperparameters: Hyperparameters,
        seed: u64,
    ) -> Result<Self, RecommenderError> {
        let tree = RegressionTree::train(&training.rows, &training.targets, hyperparameters, seed)?;
        Ok(Self {
            tree,
            target,
            seed,
            task_metric_names: task_metric_names.to_vec(),
            benchmarks: benchmarks.to_vec(),
        })
    }

    pub fn feature_count(&self) -> usize {
        self.task_metric_names.len() + self.benchmarks.len()
    }

    /// Rejects clusters or workflows whose feature schema differs from the
    /// one the model was trained on.
    pub fn check_schema(
        &self,
        task_metric_names: &[String],
        benchmarks: &[BenchmarkSpec],
    ) -> Result<(), RecommenderError> {
        if self.task_metric_names != task_metric_names {
            return Err(RecommenderError::SchemaMismatch(format!(
                "task metrics: model has {:?}, input has {:?}",
                self.task_metric_names, task_metric_names
            )));
        }
        if self.benchmarks != benchmarks {
            let model: Vec<&String> = self.benchmarks.iter().map(|b| &b.name).collect();
            let input: Vec<&String> = benchmarks.iter().map(|b| &b.name).collect();
            return Err(RecommenderError::SchemaMismatch(format!(
                "benchmarks: model has {model:?}, input has {input:?}"
            )));
        }
        Ok(())
    }

    /// Predicted score for one task on one node (lower = faster).
    pub fn score(&self, task: &TaskDescriptor, ranks: &[u32]) -> Result<f64, RecommenderError> {
        let mut features = Vec::with_capacity(self.feature_count());
        features.extend_from_slice(&task.trace_features);
        features.extend(ranks.iter().map(|&r| r as f64));
        self.tree.predict(&features)
    }
}

/// One entry of a priority list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedNode {
    pub node_id: String,
    pub score: f64,
}

/// Allocatable nodes for one task, best (lowest score) first; ties broken
/// by ascending node id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityList {
    pub task_id: String,
    pub entries: Vec<RankedNode>,
}

impl PriorityList {
    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.node_id.as_str())
    }

    pub fn best(&self) -> &RankedNode {
        &self.entries[0]
    }
}

/// The nodes whose total capacity satisfies every resource request of the
/// task. Current occupancy is the simulator's concern, not this filter's.
pub fn filter_allocatable<'a>(cluster: &'a Cluster, task: &TaskDescriptor) -> Vec<&'a str> {
    cluster
        .nodes()
        .iter()
        .filter(|n| task.resource_requests.fits_within(&n.capacities))
        .map(|n| n.id.as_str())
        .collect()
}

/// Scores every allocatable node for the task and returns them best-first.
pub fn rank_nodes(
    model: &RecommenderModel,
    task: &TaskDescriptor,
    profiled: &ProfiledCluster,
) -> Result<PriorityList, RecommenderError> {
    let allocatable = filter_allocatable(profiled.cluster(), task);
    if allocatable.is_empty() {
        return Err(no_allocatable_node(profiled, task));
    }
    let mut entries = Vec::with_capacity(allocatable.len());
    for node_id in allocatable {
        let node = profiled.node(node_id).expect("filter returns cluster nodes");
        let score = model.score(task, &node.benchmark_ranks)?;
        entries.push(RankedNode { node_id: node_id.to_string(), score });
    }
    entries.sort_by(|a, b| {
        a.score
            .partial_cmp(&b.score)
            .unwrap()
            .then_with(|| a.node_id.cmp(&b.node_id))
    });
    Ok(PriorityList {
        task_id: task.id.clone(),
        entries,
    })
}

/// Names the resource kind that blocks the most nodes, for the error report.
fn no_allocatable_node(profiled: &ProfiledCluster, task: &TaskDescriptor) -> RecommenderError {
    let mut worst: Option<(usize, String)> = None;
    for (kind, _) in task.resource_requests.kinds() {
        let failing = profiled
            .nodes()
            .iter()
            .filter(|n| n.capacities.get(kind) < task.resource_requests.get(kind))
            .count();
        if failing > 0 && worst.as_ref().is_none_or(|(count, _)| failing > *count) {
            worst = Some((failing, kind.to_string()));
        }
    }
    RecommenderError::NoAllocatableNode {
        task_id: task.id.clone(),
        resource_kind: worst.map(|(_, k)| k).unwrap_or_else(|| "cpus".to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{NodeProfile, Resources};
    use crate::profiling::{build_training_set, rank_features, TaskTraceRecord, TraceSet};
    use std::collections::BTreeSet;

    fn task(id: &str, cpus: u64, mem: u64, features: Vec<f64>) -> TaskDescriptor {
        TaskDescriptor {
            id: id.to_string(),
            resource_requests: Resources::new(cpus, mem),
            avg_historical_runtime_s: 1.0,
            trace_features: features,
        }
    }

    #[test]
    fn filter_allocatable_examples() {
        let cluster = Cluster::new(vec![
            NodeProfile::new("node1", "a", Resources::new(8, 16 << 30), vec![]),
            NodeProfile::new("node2", "b", Resources::new(2, 16 << 30), vec![]),
            NodeProfile::new("node3", "c", Resources::new(8, 4 << 30), vec![]),
        ])
        .unwrap();
        assert_eq!(filter_allocatable(&cluster, &task("t", 4, 8 << 30, vec![])), vec!["node1"]);
        assert_eq!(
            filter_allocatable(&cluster, &task("t", 0, 0, vec![])),
            vec!["node1", "node2", "node3"]
        );
        assert!(filter_allocatable(&cluster, &task("t", 64, 1 << 40, vec![])).is_empty());
    }

    /// Model whose score is an exact function of the first benchmark rank:
    /// train on a dataset where runtime = 10 * rank.
    fn rank_driven_setup(n_nodes: usize) -> (RecommenderModel, ProfiledCluster) {
        let nodes: Vec<NodeProfile> = (0..n_nodes)
            .map(|i| {
                NodeProfile::new(
                    &format!("n{i}"),
                    &format!("mt{i}"),
                    Resources::new(8, 32 << 30),
                    vec![1000.0 - 100.0 * i as f64],
                )
            })
            .collect();
        let cluster = Cluster::new(nodes).unwrap();
        let benchmarks = vec![BenchmarkSpec::higher("cpu")];
        let profiled = rank_features(&cluster, &benchmarks).unwrap();

        let mut records = Vec::new();
        for task_no in 0..3 {
            for i in 0..n_nodes {
                for _ in 0..2 {
                    records.push(TaskTraceRecord {
                        task_id: format!("t{task_no}"),
                        machine_type: format!("mt{i}"),
                        runtime_s: 10.0 * (i + 1) as f64,
                        metrics: vec![task_no as f64],
                    });
                }
            }
        }
        let traces = TraceSet {
            metric_names: vec!["kind".to_string()],
            records,
        };
        let catalog: BTreeSet<String> = (0..3).map(|i| format!("t{i}")).collect();
        let training =
            build_training_set(&traces, &profiled, &catalog, TrainingTarget::Normalized).unwrap();
        let hp = Hyperparameters { max_depth: 16, min_samples_leaf: 1, min_variance_reduction: 0.0 };
        let model = RecommenderModel::train(
            &training,
            &traces.metric_names,
            &benchmarks,
            TrainingTarget::Normalized,
            hp,
            0,
        )
        .unwrap();
        (model, profiled)
    }

    #[test]
    fn rank_nodes_orders_by_learned_feature() {
        let (model, profiled) = rank_driven_setup(3);
        let t = task("t0", 1, 1 << 30, vec![0.0]);
        let list = rank_nodes(&model, &t, &profiled).unwrap();
        let ids: Vec<&str> = list.node_ids().collect();
        assert_eq!(ids, vec!["n0", "n1", "n2"]);
        // permutation of the allocatable set
        let mut from_filter = filter_allocatable(profiled.cluster(), &t);
        let mut from_list = ids.clone();
        from_filter.sort();
        from_list.sort();
        assert_eq!(from_filter, from_list);
    }

    #[test]
    fn rank_nodes_tie_breaks_by_node_id() {
        // single-leaf tree scores every node identically
        let tree = RegressionTree::train(&[vec![0.0]], &[7.0], Hyperparameters::default(), 0).unwrap();
        let model = RecommenderModel {
            tree,
            target: TrainingTarget::Normalized,
            seed: 0,
            task_metric_names: vec![],
            benchmarks: vec![BenchmarkSpec::higher("b")],
        };
        let cluster = Cluster::new(vec![
            NodeProfile::new("n3", "a", Resources::new(4, 8 << 30), vec![1.0]),
            NodeProfile::new("n1", "b", Resources::new(4, 8 << 30), vec![2.0]),
            NodeProfile::new("n2", "c", Resources::new(4, 8 << 30), vec![3.0]),
        ])
        .unwrap();
        let profiled = rank_features(&cluster, &model.benchmarks).unwrap();
        let list = rank_nodes(&model, &task("t", 1, 1, vec![]), &profiled).unwrap();
        let ids: Vec<&str> = list.node_ids().collect();
        assert_eq!(ids, vec!["n1", "n2", "n3"]);
    }

    #[test]
    fn rank_nodes_single_allocatable_node() {
        let (model, profiled) = rank_driven_setup(1);
        let list = rank_nodes(&model, &task("t0", 1, 1 << 30, vec![0.0]), &profiled).unwrap();
        assert_eq!(list.entries.len(), 1);
        assert_eq!(list.best().node_id, "n0");
    }

    #[test]
    fn rank_nodes_reports_offending_resource() {
        let (model, profiled) = rank_driven_setup(2);
        let err = rank_nodes(&model, &task("t0", 512, 1 << 30, vec![0.0]), &profiled).unwrap_err();
        assert_eq!(
            err,
            RecommenderError::NoAllocatableNode {
                task_id: "t0".to_string(),
                resource_kind: "cpus".to_string()
            }
        );
    }

    #[test]
    fn rank_nodes_deterministic() {
        let (model, profiled) = rank_driven_setup(5);
        let t = task("t1", 1, 1 << 30, vec![1.0]);
        let a = rank_nodes(&model, &t, &profiled).unwrap();
        let b = rank_nodes(&model, &t, &profiled).unwrap();
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
    }

    #[test]
    fn monotone_feature_ordering_on_constructed_datasets() {
        let mut rng = crate::rng::SimRng::new(31);
        for round in 0..10 {
            let n_nodes = 3 + rng.index(5);
            let (model, profiled) = rank_driven_setup(n_nodes);
            let t = task(&format!("t{}", round % 3), 1, 1 << 30, vec![(round % 3) as f64]);
            let list = rank_nodes(&model, &t, &profiled).unwrap();
            // targets increase strictly with the cpu rank, so the list must
            // follow the rank order exactly
            let ranks: Vec<u32> = list
                .node_ids()
                .map(|id| profiled.node(id).unwrap().benchmark_ranks[0])
                .collect();
            let mut sorted = ranks.clone();
            sorted.sort();
            assert_eq!(ranks, sorted, "better-ranked nodes must come first");
        }
    }

    #[test]
    fn schema_check_rejects_mismatch() {
        let (model, _) = rank_driven_setup(2);
        assert!(model
            .check_schema(&["kind".to_string()], &[BenchmarkSpec::higher("cpu")])
            .is_ok());
        assert!(model
            .check_schema(&["other".to_string()], &[BenchmarkSpec::higher("cpu")])
            .is_err());
        assert!(model
            .check_schema(&["kind".to_string()], &[BenchmarkSpec::lower("cpu")])
            .is_err());
    }
}
