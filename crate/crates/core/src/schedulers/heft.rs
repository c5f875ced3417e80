//! Heterogeneous Earliest Finish Time: a static list scheduler.
//!
//! Tasks are prioritized by upward rank (mean predicted runtime plus the
//! costliest child path) and greedily assigned to the node minimizing the
//! earliest finish time, with insertion-based gap filling. The planner works
//! on predicted runtimes; execution replays the plan with true runtimes,
//! holding a task back only while its planned node cannot fit it.

use std::collections::BTreeMap;

use crate::domain::{Resources, WorkflowDag};
use crate::profiling::ProfiledCluster;

use super::{
    ClusterState, Decision, DispatchPolicy, RuntimeOracle, SchedulerError, SchedulingConfig,
};

#[derive(Clone, Debug, PartialEq)]
pub struct PlannedTask {
    pub task_id: String,
    pub node_id: String,
    pub planned_start_s: f64,
    pub planned_finish_s: f64,
}

/// The full static plan, in processing (priority) order.
#[derive(Clone, Debug, PartialEq)]
pub struct HeftPlan {
    pub entries: Vec<PlannedTask>,
    pub ranks: BTreeMap<String, f64>,
}

impl HeftPlan {
    pub fn planned_makespan_s(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.planned_finish_s)
            .fold(0.0, f64::max)
    }

    pub fn node_for(&self, task_id: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.task_id == task_id)
            .map(|e| e.node_id.as_str())
    }
}

/// Upward rank per task: mean predicted runtime across nodes plus the
/// maximum over children of (mean communication cost + child upward rank).
pub fn upward_ranks(
    dag: &WorkflowDag,
    profiled: &ProfiledCluster,
    oracle: &dyn RuntimeOracle,
    config: SchedulingConfig,
) -> Result<BTreeMap<String, f64>, SchedulerError> {
    let nodes = profiled.nodes();
    let mut ranks: BTreeMap<String, f64> = BTreeMap::new();
    let volume: BTreeMap<(&str, &str), u64> = dag
        .edges()
        .iter()
        .map(|e| ((e.from.as_str(), e.to.as_str()), e.data_volume_bytes))
        .collect();

    for task_id in dag.topological_order().iter().rev() {
        let mut sum = 0.0;
        for node in nodes {
            sum += oracle.predicted_runtime_s(task_id, &node.id)?;
        }
        let mean_exec = sum / nodes.len() as f64;
        let mut tail: f64 = 0.0;
        for child in dag.children(task_id)? {
            let comm = config.comm_seconds(volume[&(task_id.as_str(), child.as_str())]);
            tail = tail.max(comm + ranks[child]);
        }
        ranks.insert(task_id.clone(), mean_exec + tail);
    }
    Ok(ranks)
}

struct NodeTimeline {
    capacity: Resources,
    /// (start, finish, request), kept sorted by start.
    booked: Vec<(f64, f64, Resources)>,
}

impl NodeTimeline {
    /// Earliest start >= `ready` at which `request` fits alongside the
    /// existing bookings for the whole duration. Candidate starts are the
    /// ready time and every booking finish after it; free capacity only
    /// grows at those instants.
    fn earliest_feasible(&self, ready: f64, duration: f64, request: &Resources) -> f64 {
        let mut candidates: Vec<f64> = vec![ready];
        candidates.extend(self.booked.iter().map(|(_, f, _)| *f).filter(|&f| f > ready));
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &start in &candidates {
            if self.fits_throughout(start, start + duration, request) {
                return start;
            }
        }
        unreachable!("a start after all bookings is always feasible")
    }

    fn fits_throughout(&self, start: f64, finish: f64, request: &Resources) -> bool {
        // usage rises only at booking starts, so checking `start` and every
        // booking start inside the window is exhaustive
        let mut points: Vec<f64> = vec![start];
        points.extend(
            self.booked
                .iter()
                .map(|(s, _, _)| *s)
                .filter(|&s| s > start && s < finish),
        );
        points.iter().all(|&at| {
            let mut used = Resources::default();
            for (s, f, req) in &self.booked {
                if *s <= at && at < *f {
                    used.add_assign(req);
                }
            }
            request
                .kinds()
                .all(|(kind, qty)| self.capacity.get(kind) >= used.get(kind) + qty)
        })
    }

    fn book(&mut self, start: f64, finish: f64, request: Resources) {
        let pos = self
            .booked
            .partition_point(|(s, _, _)| *s <= start);
        self.booked.insert(pos, (start, finish, request));
    }
}

/// Builds the full static plan.
pub fn plan_heft(
    dag: &WorkflowDag,
    profiled: &ProfiledCluster,
    oracle: &dyn RuntimeOracle,
    config: SchedulingConfig,
) -> Result<HeftPlan, SchedulerError> {
    let ranks = upward_ranks(dag, profiled, oracle, config)?;
    let mut order: Vec<&str> = dag.task_ids().collect();
    order.sort_by(|a, b| {
        ranks[*b]
            .partial_cmp(&ranks[*a])
            .unwrap()
            .then_with(|| config.tie_break.cmp_ids(a, b))
    });

    let volume: BTreeMap<(&str, &str), u64> = dag
        .edges()
        .iter()
        .map(|e| ((e.from.as_str(), e.to.as_str()), e.data_volume_bytes))
        .collect();

    let mut timelines: BTreeMap<&str, NodeTimeline> = profiled
        .nodes()
        .iter()
        .map(|n| {
            (
                n.id.as_str(),
                NodeTimeline { capacity: n.capacities.clone(), booked: Vec::new() },
            )
        })
        .collect();
    let mut placed: BTreeMap<&str, (String, f64)> = BTreeMap::new(); // task -> (node, finish)
    let mut entries = Vec::with_capacity(dag.task_count());

    for task_id in order {
        let task = dag.task(task_id)?;
        let request = &task.resource_requests;
        let mut best: Option<(f64, f64, String)> = None; // (eft, start, node)
        for node in profiled.nodes() {
            if !request.fits_within(&node.capacities) {
                continue;
            }
            let exec = oracle.predicted_runtime_s(task_id, &node.id)?;
            let mut ready = 0.0f64;
            for parent in dag.parents(task_id)? {
                let (parent_node, parent_finish) = &placed[parent.as_str()];
                let comm = if parent_node == &node.id {
                    0.0
                } else {
                    config.comm_seconds(volume[&(parent.as_str(), task_id)])
                };
                ready = ready.max(parent_finish + comm);
            }
            let start = timelines[node.id.as_str()].earliest_feasible(ready, exec, request);
            let eft = start + exec;
            let better = match &best {
                None => true,
                Some((b_eft, _, b_node)) => {
                    eft < *b_eft
                        || (eft == *b_eft
                            && config.tie_break.cmp_ids(&node.id, b_node) == std::cmp::Ordering::Less)
                }
            };
            if better {
                best = Some((eft, start, node.id.clone()));
            }
        }
        let (eft, start, node_id) =
            best.ok_or_else(|| SchedulerError::NoFit { task_id: task_id.to_string() })?;
        timelines
            .get_mut(node_id.as_str())
            .unwrap()
            .book(start, eft, request.clone());
        placed.insert(task_id, (node_id.clone(), eft));
        entries.push(PlannedTask {
            task_id: task_id.to_string(),
            node_id,
            planned_start_s: start,
            planned_finish_s: eft,
        });
    }

    Ok(HeftPlan { entries, ranks })
}

/// Replays a HEFT plan during simulation: tasks start on their planned node
/// in plan order as soon as their predecessors are done and the node has
/// room; a blocked task is retried at the next event without reordering or
/// replanning.
pub struct HeftExecutorPolicy<'a> {
    dag: &'a WorkflowDag,
    plan: HeftPlan,
    started: Vec<bool>,
}

impl<'a> HeftExecutorPolicy<'a> {
    pub fn new(dag: &'a WorkflowDag, plan: HeftPlan) -> Self {
        let started = vec![false; plan.entries.len()];
        Self { dag, plan, started }
    }
}

impl DispatchPolicy for HeftExecutorPolicy<'_> {
    fn dispatch(
        &mut self,
        ready: &[String],
        state: &mut ClusterState,
    ) -> Result<Vec<Decision>, SchedulerError> {
        let mut decisions = Vec::new();
        for (idx, entry) in self.plan.entries.iter().enumerate() {
            if self.started[idx] || !ready.contains(&entry.task_id) {
                continue;
            }
            let request = &self.dag.task(&entry.task_id)?.resource_requests;
            if state.fits(&entry.node_id, request) {
                state.occupy(&entry.node_id, request);
                self.started[idx] = true;
                decisions.push(Decision {
                    task_id: entry.task_id.clone(),
                    node_id: entry.node_id.clone(),
                });
            }
        }
        Ok(decisions)
    }
}
