//! Discrete-event execution engine.
//!
//! Bills true runtimes from the runtime matrix while serving schedulers
//! error-injected predictions. Dispatch happens at t = 0 and after each
//! completion; time advances on completion events only. The clock runs on
//! integer microseconds to avoid accumulation drift.

mod error_model;

pub use error_model::{
    apply_error, inject_error, ErrorDistribution, PredictionCache, PredictionErrorModel,
};

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, RuntimeMatrix, WorkflowDag};
use crate::profiling::ProfiledCluster;
use crate::recommender::{RecommenderError, RecommenderModel};
use crate::schedulers::{
    build_policy, ClusterState, PolicyInputs, SchedulerError, SchedulingConfig, Strategy,
};

#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("deadlock: task `{task_id}` can never be placed")]
    Deadlock { task_id: String },
    #[error("true runtime must be positive, got {value}")]
    NonPositiveRuntime { value: f64 },
    #[error("invalid error model: {0}")]
    InvalidErrorModel(String),
    #[error("strategy `{strategy}` requires a recommender model")]
    ModelRequired { strategy: String },
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Recommender(#[from] RecommenderError),
}

/// Microsecond clock helpers.
pub(crate) fn secs_to_micros(secs: f64) -> i64 {
    let micros = (secs * 1e6).round() as i64;
    if secs > 0.0 {
        micros.max(1)
    } else {
        micros.max(0)
    }
}

pub(crate) fn micros_to_secs(micros: i64) -> f64 {
    micros as f64 / 1e6
}

/// Everything that parameterizes one simulation besides the inputs.
#[derive(Clone, Copy, Debug)]
pub struct SimulationConfig {
    pub strategy: Strategy,
    pub error_model: PredictionErrorModel,
    pub seed: u64,
    pub scheduling: SchedulingConfig,
}

impl SimulationConfig {
    pub fn new(strategy: Strategy, error_model: PredictionErrorModel, seed: u64) -> Self {
        Self {
            strategy,
            error_model,
            seed,
            scheduling: SchedulingConfig::default(),
        }
    }
}

/// Where and when one task ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub node_id: String,
    pub start_s: f64,
    pub finish_s: f64,
    pub true_runtime_s: f64,
    /// The (possibly error-injected) value the scheduler would have seen.
    pub predicted_runtime_s: f64,
}

/// One dispatch decision, in the order decisions were made.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub time_s: f64,
    pub task_id: String,
    pub node_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub workflow: String,
    pub strategy: String,
    pub distribution: String,
    pub err: f64,
    pub seed: u64,
    pub makespan_s: f64,
    pub tasks: Vec<TaskRecord>,
    pub decisions: Vec<DecisionRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    // completions sort before the dispatch round at the same instant
    Completion(String),
    DispatchRound,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: i64,
    kind: EventKind,
}

/// Runs one workflow on one cluster under one strategy.
///
/// Deterministic: identical inputs and seed give a bit-identical result.
pub fn simulate(
    dag: &WorkflowDag,
    profiled: &ProfiledCluster,
    matrix: &RuntimeMatrix,
    model: Option<&RecommenderModel>,
    config: &SimulationConfig,
) -> Result<SimulationResult, SimError> {
    matrix.validate_complete(dag, profiled.cluster())?;
    let predictions = PredictionCache::build(
        dag,
        profiled.cluster(),
        matrix,
        &config.error_model,
        config.seed,
    )?;

    let inputs = if config.strategy.needs_model() {
        let model = model.ok_or_else(|| SimError::ModelRequired {
            strategy: config.strategy.name().to_string(),
        })?;
        PolicyInputs::Model(model)
    } else if config.strategy.needs_oracle() {
        PolicyInputs::Oracle(&predictions)
    } else {
        PolicyInputs::None
    };
    let mut policy = build_policy(config.strategy, dag, profiled, inputs, config.scheduling)?;

    let machine_type: BTreeMap<&str, &str> = profiled
        .nodes()
        .iter()
        .map(|n| (n.id.as_str(), n.machine_type.as_str()))
        .collect();
    let volumes: BTreeMap<(&str, &str), u64> = dag
        .edges()
        .iter()
        .map(|e| ((e.from.as_str(), e.to.as_str()), e.data_volume_bytes))
        .collect();

    let mut state = ClusterState::new(profiled.nodes());
    let mut queue: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
    let mut pending_rounds: BTreeSet<i64> = BTreeSet::new();
    queue.push(Reverse(Event { time: 0, kind: EventKind::DispatchRound }));
    pending_rounds.insert(0);

    let total = dag.task_count();
    let mut finished: BTreeSet<String> = BTreeSet::new();
    let mut started: BTreeSet<String> = BTreeSet::new();
    // task -> (node, start. finish micros), kept for release and records
    let mut placements: BTreeMap<String, (String, i64, i64)> = BTreeMap::new();
    let mut records: Vec<TaskRecord> = Vec::with_capacity(total);
    let mut decisions_log: Vec<DecisionRecord> = Vec::new();

    while let Some(Reverse(event)) = queue.pop() {
        let now = event.time;
        match event.kind {
            EventKind::Completion(task_id) => {
                let (node_id, _, _) = placements[&task_id].clone();
                state.release(&node_id, &dag.task(&task_id)?.resource_requests);
                finished.insert(task_id);
            }
            EventKind::DispatchRound => {
                pending_rounds.remove(&now);
                let ready: Vec<String> = dag
                    .ready_tasks(&finished)
                    .into_iter()
                    .filter(|t| !started.contains(t))
                    .collect();
                let decided = policy.dispatch(&ready, &mut state)?;
                for decision in &decided {
                    let mt = machine_type[decision.node_id.as_str()];
                    let true_runtime_s = matrix.lookup(&decision.task_id, mt)?;
                    let runtime = secs_to_micros(true_runtime_s);

                    // data from predecessors on other nodes may still be in
                    // flight; the task holds the node while it waits
                    let mut exec_start = now;
                    for parent in dag.parents(&decision.task_id)? {
                        let (parent_node, _, parent_finish) = &placements[parent.as_str()];
                        let arrival = if parent_node == &decision.node_id {
                            *parent_finish
                        } else {
                            let comm_s = config
                                .scheduling
                                .comm_seconds(volumes[&(parent.as_str(), decision.task_id.as_str())]);
                            *parent_finish + secs_to_micros(comm_s)
                        };
                        exec_start = exec_start.max(arrival);
                    }
                    let finish = exec_start + runtime;

                    started.insert(decision.task_id.clone());
                    placements
                        .insert(decision.task_id.clone(), (decision.node_id.clone(), now, finish));
                    records.push(TaskRecord {
                        task_id: decision.task_id.clone(),
                        node_id: decision.node_id.clone(),
                        start_s: micros_to_secs(now),
                        finish_s: micros_to_secs(finish),
                        true_runtime_s,
                        predicted_runtime_s: predictions
                            .get(&decision.task_id, &decision.node_id)
                            .expect("cache covers every pair"),
                    });
                    decisions_log.push(DecisionRecord {
                        time_s: micros_to_secs(now),
                        task_id: decision.task_id.clone(),
                        node_id: decision.node_id.clone(),
                    });
                    queue.push(Reverse(Event {
                        time: finish,
                        kind: EventKind::Completion(decision.task_id.clone()),
                    }));
                    if pending_rounds.insert(finish) {
                        queue.push(Reverse(Event { time: finish, kind: EventKind::DispatchRound }));
                    }
                }

                let running = started.len() - finished.len();
                if decided.is_empty() && running == 0 && finished.len() < total {
                    return Err(deadlock_error(dag, &finished, &state));
                }
            }
        }
    }

    debug_assert_eq!(finished.len(), total);
    let makespan = records
        .iter()
        .map(|r| secs_to_micros(r.finish_s))
        .max()
        .unwrap_or(0)
        - records.iter().map(|r| secs_to_micros(r.start_s)).min().unwrap_or(0);
    records.sort_by(|a, b| a.task_id.cmp(&b.task_id));

    Ok(SimulationResult {
        workflow: dag.name.clone(),
        strategy: config.strategy.name().to_string(),
        distribution: config.error_model.distribution.name().to_string(),
        err: config.error_model.err,
        seed: config.seed,
        makespan_s: micros_to_secs(makespan),
        tasks: records,
        decisions: decisions_log,
    })
}

fn deadlock_error(dag: &WorkflowDag, finished: &BTreeSet<String>, state: &ClusterState) -> SimError {
    let ready = dag.ready_tasks(finished);
    let unfittable = ready
        .iter()
        .find(|t| {
            dag.task(t)
                .map(|task| !state.fits_any_total(&task.resource_requests))
                .unwrap_or(false)
        })
        .or_else(|| ready.iter().next());
    SimError::Deadlock {
        task_id: unfittable.cloned().unwrap_or_default(),
    }
}

/// Post-hoc audit over a simulation result: precedence (including modeled
/// communication), billed durations, and per-node capacity at every event
/// instant.
pub fn audit_feasibility(
    result: &SimulationResult,
    dag: &WorkflowDag,
    profiled: &ProfiledCluster,
    scheduling: &SchedulingConfig,
) -> Result<(), String> {
    let by_id: BTreeMap<&str, &TaskRecord> =
        result.tasks.iter().map(|r| (r.task_id.as_str(), r)).collect();
    if result.tasks.len() != dag.task_count() {
        return Err(format!(
            "expected {} task records, got {}",
            dag.task_count(),
            result.tasks.len()
        ));
    }

    for record in &result.tasks {
        let start = secs_to_micros(record.start_s);
        let finish = secs_to_micros(record.finish_s);
        let mut exec_start = start;
        for parent in dag.parents(&record.task_id).map_err(|e| e.to_string())? {
            let parent_rec = by_id[parent.as_str()];
            let parent_finish = secs_to_micros(parent_rec.finish_s);
            if start < parent_finish {
                return Err(format!(
                    "task `{}` starts at {} before parent `{parent}` finishes at {}",
                    record.task_id, record.start_s, parent_rec.finish_s
                ));
            }
            let volume = dag
                .edges()
                .iter()
                .find(|e| e.from == *parent && e.to == record.task_id)
                .map(|e| e.data_volume_bytes)
                .unwrap_or(0);
            let arrival = if parent_rec.node_id == record.node_id {
                parent_finish
            } else {
                parent_finish + secs_to_micros(scheduling.comm_seconds(volume))
            };
            exec_start = exec_start.max(arrival);
        }
        let expected_finish = exec_start + secs_to_micros(record.true_runtime_s);
        if finish != expected_finish {
            return Err(format!(
                "task `{}` billed {} micros, expected {} (true runtime + communication wait)",
                record.task_id,
                finish - start,
                expected_finish - start
            ));
        }
    }

    // capacity sweep: usage can only rise at task starts
    let instants: BTreeSet<i64> = result
        .tasks
        .iter()
        .map(|r| secs_to_micros(r.start_s))
        .collect();
    for node in profiled.nodes() {
        for &at in &instants {
            let mut used = crate::domain::Resources::default();
            for record in result.tasks.iter().filter(|r| r.node_id == node.id) {
                let start = secs_to_micros(record.start_s);
                let finish = secs_to_micros(record.finish_s);
                if start <= at && at < finish {
                    used.add_assign(&dag.task(&record.task_id).unwrap().resource_requests);
                }
            }
            for (kind, qty) in used.kinds() {
                if qty > node.capacities.get(kind) {
                    return Err(format!(
                        "node `{}` over capacity on `{kind}` at {at} micros: {qty} > {}",
                        node.id,
                        node.capacities.get(kind)
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Longest root-to-sink path summing each task's minimum runtime over the
/// cluster's machine types; a lower bound on any zero-communication makespan.
pub fn critical_path_lower_bound(
    dag: &WorkflowDag,
    matrix: &RuntimeMatrix,
    machine_types: &[String],
) -> Result<f64, DomainError> {
    let mut longest: BTreeMap<String, f64> = BTreeMap::new();
    for task_id in dag.topological_order() {
        let own = matrix.min_runtime_over(&task_id, machine_types)?;
        let from_parents = dag
            .parents(&task_id)?
            .iter()
            .map(|p| longest[p])
            .fold(0.0, f64::max);
        longest.insert(task_id, own + from_parents);
    }
    Ok(longest.values().copied().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Cluster, Edge, NodeProfile, Resources, TaskDescriptor};
    use crate::profiling::{rank_features, BenchmarkSpec};

    fn task(id: &str, cpus: u64) -> TaskDescriptor {
        TaskDescriptor {
            id: id.to_string(),
            resource_requests: Resources::new(cpus, 1 << 30),
            avg_historical_runtime_s: 10.0,
            trace_features: vec![],
        }
    }

    fn node(id: &str, machine_type: &str, cpus: u64) -> NodeProfile {
        NodeProfile::new(id, machine_type, Resources::new(cpus, 64 << 30), vec![1.0])
    }

    fn profiled(nodes: Vec<NodeProfile>) -> ProfiledCluster {
        rank_features(&Cluster::new(nodes).unwrap(), &[BenchmarkSpec::higher("b")]).unwrap()
    }

    fn rr_config(seed: u64) -> SimulationConfig {
        SimulationConfig::new(Strategy::RoundRobin, PredictionErrorModel::none(), seed)
    }

    #[test]
    fn single_task_makespan_is_its_runtime() {
        let dag = WorkflowDag::new("wf", vec![], vec![task("only", 1)], vec![]).unwrap();
        let p = profiled(vec![node("n1", "mt1", 4)]);
        let mut matrix = RuntimeMatrix::new();
        matrix.insert("only", "mt1", 42.0).unwrap();
        let result = simulate(&dag, &p, &matrix, None, &rr_config(1)).unwrap();
        assert_eq!(result.makespan_s, 42.0);
        assert_eq!(result.tasks[0].finish_s - result.tasks[0].start_s, 42.0);
    }

    #[test]
    fn heft_chain_example_executes_to_25s() {
        let dag = WorkflowDag::new(
            "chain",
            vec![],
            vec![task("A", 1), task("B", 1)],
            vec![Edge::new("A", "B")],
        )
        .unwrap();
        let p = profiled(vec![node("n1", "mt1", 4), node("n2", "mt2", 4)]);
        let mut matrix = RuntimeMatrix::new();
        matrix.insert("A", "mt1", 10.0).unwrap();
        matrix.insert("A", "mt2", 20.0).unwrap();
        matrix.insert("B", "mt1", 30.0).unwrap();
        matrix.insert("B", "mt2", 15.0).unwrap();
        let config = SimulationConfig::new(Strategy::Heft, PredictionErrorModel::none(), 3);
        let result = simulate(&dag, &p, &matrix, None, &config).unwrap();
        assert_eq!(result.makespan_s, 25.0);
        let a = result.tasks.iter().find(|t| t.task_id == "A").unwrap();
        let b = result.tasks.iter().find(|t| t.task_id == "B").unwrap();
        assert_eq!(a.node_id, "n1");
        assert_eq!(b.node_id, "n2");
        assert_eq!(b.start_s, 10.0);
    }

    #[test]
    fn forced_serialization_on_one_small_node() {
        let dag =
            WorkflowDag::new("two", vec![], vec![task("a", 4), task("b", 4)], vec![]).unwrap();
        let p = profiled(vec![node("n1", "mt1", 4)]);
        let mut matrix = RuntimeMatrix::new();
        matrix.insert("a", "mt1", 10.0).unwrap();
        matrix.insert("b", "mt1", 7.5).unwrap();
        let result = simulate(&dag, &p, &matrix, None, &rr_config(1)).unwrap();
        assert_eq!(result.makespan_s, 17.5);
    }

    #[test]
    fn deadlock_reports_unfittable_task() {
        let dag = WorkflowDag::new("wf", vec![], vec![task("big", 64)], vec![]).unwrap();
        let p = profiled(vec![node("n1", "mt1", 4)]);
        let mut matrix = RuntimeMatrix::new();
        matrix.insert("big", "mt1", 1.0).unwrap();
        // MinMin skips unfittable tasks each round, so the engine detects it
        let config = SimulationConfig::new(Strategy::MinMin, PredictionErrorModel::none(), 1);
        let err = simulate(&dag, &p, &matrix, None, &config).unwrap_err();
        match err {
            SimError::Deadlock { task_id } => assert_eq!(task_id, "big"),
            other => panic!("expected deadlock, got {other:?}"),
        }
    }

    #[test]
    fn empty_workflow_finishes_instantly() {
        let dag = WorkflowDag::new("empty", vec![], vec![], vec![]).unwrap();
        let p = profiled(vec![node("n1", "mt1", 4)]);
        let result = simulate(&dag, &p, &RuntimeMatrix::new(), None, &rr_config(1)).unwrap();
        assert_eq!(result.makespan_s, 0.0);
        assert!(result.tasks.is_empty());
    }

    #[test]
    fn true_runtimes_unchanged_by_error_injection() {
        let dag = WorkflowDag::new(
            "wf",
            vec![],
            vec![task("a", 1), task("b", 1), task("c", 1)],
            vec![Edge::new("a", "b"), Edge::new("a", "c")],
        )
        .unwrap();
        let p = profiled(vec![node("n1", "mt1", 4), node("n2", "mt2", 4)]);
        let mut matrix = RuntimeMatrix::new();
        for t in ["a", "b", "c"] {
            matrix.insert(t, "mt1", 10.0).unwrap();
            matrix.insert(t, "mt2", 12.0).unwrap();
        }
        for err in [0.0, 0.15, 0.5] {
            let config = SimulationConfig::new(
                Strategy::MinMin,
                PredictionErrorModel::new(ErrorDistribution::Exponential, err).unwrap(),
                9,
            );
            let result = simulate(&dag, &p, &matrix, None, &config).unwrap();
            for record in &result.tasks {
                assert_eq!(
                    record.finish_s - record.start_s,
                    record.true_runtime_s,
                    "billed duration must equal the matrix value"
                );
            }
        }
    }

    #[test]
    fn deterministic_bit_for_bit() {
        let dag = WorkflowDag::new(
            "wf",
            vec![],
            vec![task("a", 1), task("b", 2), task("c", 1), task("d", 2)],
            vec![Edge::new("a", "c"), Edge::new("b", "d")],
        )
        .unwrap();
        let p = profiled(vec![node("n1", "mt1", 2), node("n2", "mt2", 2)]);
        let mut matrix = RuntimeMatrix::new();
        for (i, t) in ["a", "b", "c", "d"].iter().enumerate() {
            matrix.insert(t, "mt1", 5.0 + i as f64).unwrap();
            matrix.insert(t, "mt2", 7.0 + i as f64 * 0.5).unwrap();
        }
        let config = SimulationConfig::new(
            Strategy::MinMin,
            PredictionErrorModel::new(ErrorDistribution::Normal, 0.3).unwrap(),
            77,
        );
        let a = simulate(&dag, &p, &matrix, None, &config).unwrap();
        let b = simulate(&dag, &p, &matrix, None, &config).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn err_zero_matches_distribution_none_decisions() {
        let dag = WorkflowDag::new(
            "wf",
            vec![],
            vec![task("a", 1), task("b", 1), task("c", 1)],
            vec![Edge::new("a", "b")],
        )
        .unwrap();
        let p = profiled(vec![node("n1", "mt1", 2), node("n2", "mt2", 2)]);
        let mut matrix = RuntimeMatrix::new();
        for t in ["a", "b", "c"] {
            matrix.insert(t, "mt1", 4.0).unwrap();
            matrix.insert(t, "mt2", 9.0).unwrap();
        }
        for strategy in [Strategy::MinMin, Strategy::Heft] {
            let zero_err = SimulationConfig::new(
                strategy,
                PredictionErrorModel::new(ErrorDistribution::Normal, 0.0).unwrap(),
                5,
            );
            let none = SimulationConfig::new(strategy, PredictionErrorModel::none(), 5);
            let a = simulate(&dag, &p, &matrix, None, &zero_err).unwrap();
            let b = simulate(&dag, &p, &matrix, None, &none).unwrap();
            assert_eq!(a.decisions, b.decisions);
            assert_eq!(a.makespan_s, b.makespan_s);
        }
    }

    #[test]
    fn audit_and_lower_bound_hold_for_all_strategies() {
        let mut rng = crate::rng::SimRng::new(404);
        let dag = {
            let tasks: Vec<TaskDescriptor> = (0..10).map(|i| task(&format!("t{i}"), 1 + (i % 3) as u64)).collect();
            let mut edges = Vec::new();
            for i in 0..10usize {
                for j in (i + 1)..10 {
                    if rng.index(4) == 0 {
                        edges.push(Edge::new(&format!("t{i}"), &format!("t{j}")));
                    }
                }
            }
            WorkflowDag::new("audit", vec![], tasks, edges).unwrap()
        };
        let p = profiled(vec![node("n1", "mt1", 4), node("n2", "mt2", 2), node("n3", "mt1", 4)]);
        let mut matrix = RuntimeMatrix::new();
        for t in dag.task_ids() {
            matrix.insert(t, "mt1", 3.0 + rng.index(10) as f64).unwrap();
            matrix.insert(t, "mt2", 3.0 + rng.index(10) as f64).unwrap();
        }
        let bound =
            critical_path_lower_bound(&dag, &matrix, &p.cluster().machine_types()).unwrap();
        for strategy in [Strategy::RoundRobin, Strategy::MinMin, Strategy::Heft] {
            let config = SimulationConfig::new(
                strategy,
                PredictionErrorModel::new(ErrorDistribution::Normal, 0.15).unwrap(),
                11,
            );
            let result = simulate(&dag, &p, &matrix, None, &config).unwrap();
            audit_feasibility(&result, &dag, &p, &config.scheduling)
                .unwrap_or_else(|e| panic!("{strategy}: {e}"));
            assert!(
                result.makespan_s >= bound - 1e-9,
                "{strategy}: makespan {} below lower bound {bound}",
                result.makespan_s
            );
        }
    }

    #[test]
    fn reshi_requires_model() {
        let dag = WorkflowDag::new("wf", vec![], vec![task("a", 1)], vec![]).unwrap();
        let p = profiled(vec![node("n1", "mt1", 4)]);
        let mut matrix = RuntimeMatrix::new();
        matrix.insert("a", "mt1", 1.0).unwrap();
        let config = SimulationConfig::new(Strategy::ReshiC, PredictionErrorModel::none(), 1);
        assert!(matches!(
            simulate(&dag, &p, &matrix, None, &config),
            Err(SimError::ModelRequired { .. })
        ));
    }
}
