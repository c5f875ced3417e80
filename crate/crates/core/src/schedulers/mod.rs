//! Dispatch strategies: Round-Robin, MinMin, HEFT, and the two rank-driven
//! queue policies (children-count and mean-runtime ordered).
//!
//! HEFT plans the whole workflow up front; the other four decide at
//! task-ready and task-completion events. Strategies other than HEFT and
//! MinMin never read predicted runtimes.

mod heft;
mod min_min;
mod rank_driven;
mod round_robin;

pub use heft::{plan_heft, HeftPlan, PlannedTask};
pub use min_min::MinMinPolicy;
pub use rank_driven::{QueueOrder, RankDrivenPolicy};
pub use round_robin::RoundRobinPolicy;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{NodeProfile, Resources, WorkflowDag};
use crate::profiling::ProfiledCluster;
use crate::recommender::{RecommenderError, RecommenderModel};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SchedulerError {
    #[error("task `{task_id}` fits no node in the cluster")]
    NoFit { task_id: String },
    #[error("no predicted runtime for task `{task_id}` on node `{node_id}`")]
    MissingPrediction { task_id: String, node_id: String },
    #[error("strategy `{strategy}` requires {expected}, got {got}")]
    WrongInputs {
        strategy: String,
        expected: &'static str,
        got: &'static str,
    },
    #[error("unknown strategy `{0}` (expected rr, minmin, heft, reshi-c, or reshi-m)")]
    UnknownStrategy(String),
    #[error(transparent)]
    Recommender(#[from] RecommenderError),
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
}

/// The five dispatch strategies, in report row order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Heft,
    ReshiC,
    ReshiM,
    MinMin,
    RoundRobin,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Heft,
        Strategy::ReshiC,
        Strategy::ReshiM,
        Strategy::MinMin,
        Strategy::RoundRobin,
    ];

    pub fn parse(name: &str) -> Result<Self, SchedulerError> {
        match name {
            "heft" => Ok(Self::Heft),
            "reshi-c" => Ok(Self::ReshiC),
            "reshi-m" => Ok(Self::ReshiM),
            "minmin" => Ok(Self::MinMin),
            "rr" => Ok(Self::RoundRobin),
            other => Err(SchedulerError::UnknownStrategy(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Heft => "heft",
            Self::ReshiC => "reshi-c",
            Self::ReshiM => "reshi-m",
            Self::MinMin => "minmin",
            Self::RoundRobin => "rr",
        }
    }

    /// True for strategies that consume predicted runtimes.
    pub fn needs_oracle(&self) -> bool {
        matches!(self, Self::Heft | Self::MinMin)
    }

    pub fn needs_model(&self) -> bool {
        matches!(self, Self::ReshiC | Self::ReshiM)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Id tie-break direction for scheduler-side decisions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    AscendingId,
    DescendingId,
}

impl TieBreak {
    pub fn cmp_ids(&self, a: &str, b: &str) -> Ordering {
        match self {
            TieBreak::AscendingId => a.cmp(b),
            TieBreak::DescendingId => b.cmp(a),
        }
    }
}

/// Communication model and tie-break policy shared by all strategies.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SchedulingConfig {
    /// Uniform link bandwidth in bytes/s; `None` means communication is
    /// free (zero cost), the default since edge volumes are rarely known.
    pub bandwidth_bytes_per_s: Option<f64>,
    pub tie_break: TieBreak,
}

impl SchedulingConfig {
    /// Seconds to move `volume` bytes between two distinct nodes.
    pub fn comm_seconds(&self, volume_bytes: u64) -> f64 {
        match self.bandwidth_bytes_per_s {
            Some(bw) if volume_bytes > 0 => volume_bytes as f64 / bw,
            _ => 0.0,
        }
    }
}

/// Predicted runtimes served to prediction-dependent strategies.
pub trait RuntimeOracle {
    fn predicted_runtime_s(&self, task_id: &str, node_id: &str) -> Result<f64, SchedulerError>;
}

/// A single task-to-node placement decision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decision {
    pub task_id: String,
    pub node_id: String,
}

/// Live occupancy view over a cluster: total capacity minus the requests of
/// tasks currently assigned to each node.
#[derive(Clone, Debug)]
pub struct ClusterState {
    node_ids: Vec<String>,
    capacities: Vec<Resources>,
    used: Vec<Resources>,
}

impl ClusterState {
    /// Nodes are tracked in ascending id order.
    pub fn new(nodes: &[NodeProfile]) -> Self {
        let mut sorted: Vec<&NodeProfile> = nodes.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        Self {
            node_ids: sorted.iter().map(|n| n.id.clone()).collect(),
            capacities: sorted.iter().map(|n| n.capacities.clone()).collect(),
            used: vec![Resources::default(); sorted.len()],
        }
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    fn index_of(&self, node_id: &str) -> usize {
        self.node_ids
            .binary_search_by(|id| id.as_str().cmp(node_id))
            .unwrap_or_else(|_| panic!("unknown node `{node_id}`"))
    }

    /// True when the node's free capacity covers the request right now.
    pub fn fits(&self, node_id: &str, request: &Resources) -> bool {
        let idx = self.index_of(node_id);
        request
            .kinds()
            .all(|(kind, qty)| self.capacities[idx].get(kind) >= self.used[idx].get(kind) + qty)
    }

    /// True when the request fits the node's total capacity, ignoring
    /// current occupancy.
    pub fn fits_total(&self, node_id: &str, request: &Resources) -> bool {
        request.fits_within(&self.capacities[self.index_of(node_id)])
    }

    /// True when at least one node could ever host the request.
    pub fn fits_any_total(&self, request: &Resources) -> bool {
        self.node_ids.iter().any(|id| self.fits_total(id, request))
    }

    pub fn occupy(&mut self, node_id: &str, request: &Resources) {
        debug_assert!(self.fits(node_id, request), "occupying beyond capacity");
        let idx = self.index_of(node_id);
        self.used[idx].add_assign(request);
    }

    pub fn release(&mut self, node_id: &str, request: &Resources) {
        let idx = self.index_of(node_id);
        self.used[idx].sub_assign(request);
    }
}

/// Per-round dispatch interface. `ready` is the set of runnable, not yet
/// dispatched tasks in ascending id order. Implementations occupy `state`
/// for every decision they emit.
pub trait DispatchPolicy {
    fn dispatch(
        &mut self,
        ready: &[String],
        state: &mut ClusterState,
    ) -> Result<Vec<Decision>, SchedulerError>;
}

/// Strategy-specific inputs; exactly one shape is accepted per strategy.
pub enum PolicyInputs<'a> {
    None,
    Oracle(&'a dyn RuntimeOracle),
    Model(&'a RecommenderModel),
}

impl PolicyInputs<'_> {
    fn describe(&self) -> &'static str {
        match self {
            PolicyInputs::None => "neither",
            PolicyInputs::Oracle(_) => "a runtime oracle",
            PolicyInputs::Model(_) => "a recommender model",
        }
    }
}

/// Builds the dispatch policy for a strategy, enforcing that Round-Robin
/// takes no extra input, MinMin/HEFT take a runtime oracle, and the
/// rank-driven policies take a trained model.
pub fn build_policy<'a>(
    strategy: Strategy,
    dag: &'a WorkflowDag,
    profiled: &'a ProfiledCluster,
    inputs: PolicyInputs<'a>,
    config: SchedulingConfig,
) -> Result<Box<dyn DispatchPolicy + 'a>, SchedulerError> {
    let wrong = |expected: &'static str, got: &'static str| SchedulerError::WrongInputs {
        strategy: strategy.name().to_string(),
        expected,
        got,
    };
    match strategy {
        Strategy::RoundRobin => match inputs {
            PolicyInputs::None => Ok(Box::new(RoundRobinPolicy::new(dag, profiled))),
            other => Err(wrong("no extra input", other.describe())),
        },
        Strategy::MinMin => match inputs {
            PolicyInputs::Oracle(oracle) => {
                Ok(Box::new(MinMinPolicy::new(dag, oracle, config)))
            }
            other => Err(wrong("a runtime oracle", other.describe())),
        },
        Strategy::Heft => match inputs {
            PolicyInputs::Oracle(oracle) => {
                let plan = plan_heft(dag, profiled, oracle, config)?;
                Ok(Box::new(heft::HeftExecutorPolicy::new(dag, plan)))
            }
            other => Err(wrong("a runtime oracle", other.describe())),
        },
        Strategy::ReshiC => match inputs {
            PolicyInputs::Model(model) => Ok(Box::new(RankDrivenPolicy::new(
                QueueOrder::ChildrenCount,
                dag,
                profiled,
                model,
                config,
            )?)),
            other => Err(wrong("a recommender model", other.describe())),
        },
        Strategy::ReshiM => match inputs {
            PolicyInputs::Model(model) => Ok(Box::new(RankDrivenPolicy::new(
                QueueOrder::AvgRuntime,
                dag,
                profiled,
                model,
                config,
            )?)),
            other => Err(wrong("a recommender model", other.describe())),
        },
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use std::collections::BTreeMap;

    use super::*;
    use crate::domain::{Cluster, Edge, TaskDescriptor};
    use crate::profiling::{rank_features, BenchmarkSpec};

    pub fn task(id: &str, cpus: u64, avg_runtime: f64) -> TaskDescriptor {
        TaskDescriptor {
            id: id.to_string(),
            resource_requests: Resources::new(cpus, 1 << 30),
            avg_historical_runtime_s: avg_runtime,
            trace_features: vec![],
        }
    }

    pub fn dag(tasks: Vec<TaskDescriptor>, edges: &[(&str, &str)]) -> WorkflowDag {
        WorkflowDag::new(
            "test",
            vec![],
            tasks,
            edges.iter().map(|(f, t)| Edge::new(f, t)).collect(),
        )
        .unwrap()
    }

    pub fn profiled(nodes: Vec<NodeProfile>) -> ProfiledCluster {
        rank_features(&Cluster::new(nodes).unwrap(), &[BenchmarkSpec::higher("score")]).unwrap()
    }

    pub fn node(id: &str, machine_type: &str, cpus: u64, score: f64) -> NodeProfile {
        NodeProfile::new(id, machine_type, Resources::new(cpus, 64 << 30), vec![score])
    }

    /// Fixed prediction table keyed by (task id, node id).
    pub struct TableOracle {
        pub values: BTreeMap<(String, String), f64>,
    }

    impl TableOracle {
        pub fn new(entries: &[(&str, &str, f64)]) -> Self {
            Self {
                values: entries
                    .iter()
                    .map(|(t, n, v)| ((t.to_string(), n.to_string()), *v))
                    .collect(),
            }
        }
    }

    impl RuntimeOracle for TableOracle {
        fn predicted_runtime_s(&self, task_id: &str, node_id: &str) -> Result<f64, SchedulerError> {
            self.values
                .get(&(task_id.to_string(), node_id.to_string()))
                .copied()
                .ok_or_else(|| SchedulerError::MissingPrediction {
                    task_id: task_id.to_string(),
                    node_id: node_id.to_string(),
                })
        }
    }
}
