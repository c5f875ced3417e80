//! Synthetic-but-plausible fixture data: a machine-type catalog, three
//! workflow shapes, per-(task, type) true runtimes, and historical traces.
//!
//! Runtimes are constructed so that a task's speed on a machine follows the
//! machine's benchmark profile weighted by the task's resource affinity
//! (cpu-, memory-, or io-heavy), with bounded multiplicative noise. That
//! keeps node feature ranks informative without making them oracular.

use std::collections::BTreeSet;

use crate::domain::{Resources, RuntimeMatrix, TaskDescriptor, WorkflowDag};
use crate::experiment::{CatalogEntry, MachineCatalog};
use crate::profiling::{BenchmarkSpec, TaskTraceRecord, TraceSet};
use crate::recommender::{Hyperparameters, RecommenderModel, TrainingTarget};
use crate::rng::{derive_seed, SimRng};

pub const TASK_METRIC_NAMES: [&str; 5] = [
    "cpu_usage_pct",
    "read_bytes",
    "written_bytes",
    "peak_mem_bytes",
    "avg_mem_bytes",
];

pub fn benchmark_schema() -> Vec<BenchmarkSpec> {
    vec![
        BenchmarkSpec::higher("jtr_hashes_per_s"),
        BenchmarkSpec::lower("blk_build_s"),
        BenchmarkSpec::higher("mem_copy_mb_s"),
        BenchmarkSpec::higher("mem_scale_mb_s"),
        BenchmarkSpec::higher("mem_add_mb_s"),
        BenchmarkSpec::higher("mem_triad_mb_s"),
        BenchmarkSpec::higher("fio_seq_read_mb_s"),
        BenchmarkSpec::higher("fio_seq_write_mb_s"),
        BenchmarkSpec::higher("fio_rand_read_iops"),
        BenchmarkSpec::higher("fio_rand_write_iops"),
    ]
}

#[derive(Clone, Copy, Debug)]
pub struct FixtureConfig {
    pub seed: u64,
    /// Parallel branch count of the deep pipeline workflow.
    pub pipeline_branches: usize,
    /// Width of the shallow (depth two) workflow.
    pub shallow_width: usize,
    /// Branch count of the mixed diamond workflow.
    pub diamond_branches: usize,
    /// Historical runs per (task, machine type).
    pub trace_runs: usize,
    /// Multiplicative half-width of the runtime-matrix noise.
    pub matrix_noise: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            seed: 20_220_901,
            pipeline_branches: 8,
            shallow_width: 24,
            diamond_branches: 6,
            trace_runs: 5,
            matrix_noise: 0.10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixtureSet {
    pub catalog: MachineCatalog,
    pub workflows: Vec<WorkflowDag>,
    pub matrix: RuntimeMatrix,
    pub traces: TraceSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TaskKind {
    Cpu,
    Memory,
    Io,
    Balanced,
}

impl TaskKind {
    /// (cpu, memory, io) affinity exponents, summing to 1.
    fn affinity(&self) -> (f64, f64, f64) {
        match self {
            TaskKind::Cpu => (0.8, 0.1, 0.1),
            TaskKind::Memory => (0.15, 0.7, 0.15),
            TaskKind::Io => (0.1, 0.1, 0.8),
            TaskKind::Balanced => (0.4, 0.3, 0.3),
        }
    }
}

/// (family name, cpu speed, memory speed, io speed)
const FAMILIES: [(&str, f64, f64, f64); 9] = [
    ("gen-a", 1.00, 1.00, 1.00),
    ("gen-b", 1.30, 1.10, 0.90),
    ("cpu-a", 2.00, 1.00, 0.80),
    ("cpu-b", 2.80, 1.20, 0.70),
    ("mem-a", 1.10, 2.20, 0.90),
    ("mem-b", 0.90, 2.90, 1.00),
    ("sto-a", 0.90, 1.00, 2.40),
    ("sto-b", 1.00, 1.20, 3.20),
    ("old-a", 0.45, 0.50, 0.45),
];

const SIZES: [(&str, u64, u64); 3] = [
    ("large", 2, 8 << 30),
    ("xlarge", 4, 16 << 30),
    ("2xlarge", 8, 32 << 30),
];

struct MachineSpec {
    machine_type: String,
    cpu: f64,
    mem: f64,
    io: f64,
}

fn machine_specs(rng: &mut SimRng) -> Vec<MachineSpec> {
    let mut specs = Vec::new();
    for (family, cpu, mem, io) in FAMILIES {
        for (i, (size, _, _)) in SIZES.iter().enumerate() {
            // larger sizes come with slightly quicker memory and storage
            let bump = 1.0 + 0.05 * i as f64;
            specs.push(MachineSpec {
                machine_type: format!("{family}.{size}"),
                cpu: cpu * rng.uniform(0.98, 1.02),
                mem: mem * bump * rng.uniform(0.98, 1.02),
                io: io * bump * rng.uniform(0.98, 1.02),
            });
        }
    }
    specs
}

pub fn catalog(config: &FixtureConfig) -> MachineCatalog {
    let mut rng = SimRng::new(derive_seed(config.seed, &[b"catalog"]));
    let specs = machine_specs(&mut rng);
    let entries = specs
        .iter()
        .enumerate()
        .map(|(idx, spec)| {
            let (_, cpus, memory) = SIZES[idx % SIZES.len()];
            let mut j = |lo: f64, hi: f64| rng.uniform(lo, hi);
            CatalogEntry {
                machine_type: spec.machine_type.clone(),
                capacities: Resources::new(cpus, memory),
                benchmark_scores: vec![
                    4200.0 * spec.cpu * j(0.97, 1.03),
                    3600.0 / spec.cpu * j(0.97, 1.03),
                    12000.0 * spec.mem * j(0.97, 1.03),
                    11600.0 * spec.mem * j(0.97, 1.03),
                    12800.0 * spec.mem * j(0.97, 1.03),
                    12500.0 * spec.mem * j(0.97, 1.03),
                    520.0 * spec.io * j(0.97, 1.03),
                    470.0 * spec.io * j(0.97, 1.03),
                    21000.0 * spec.io * j(0.97, 1.03),
                    18500.0 * spec.io * j(0.97, 1.03),
                ],
            }
        })
        .collect();
    MachineCatalog::new(benchmark_schema(), entries).expect("fixture catalog is valid")
}

struct TaskBlueprint {
    id: String,
    kind: TaskKind,
    base_runtime_s: f64,
    metrics: Vec<f64>,
    requests: Resources,
}

fn blueprint(id: &str, kind: TaskKind, rng: &mut SimRng) -> TaskBlueprint {
    let gib = 1u64 << 30;
    let (cpu_pct, read, written, peak_mem) = match kind {
        TaskKind::Cpu => (
            rng.uniform(85.0, 99.0),
            rng.uniform(1e8, 1e9),
            rng.uniform(5e7, 5e8),
            rng.uniform(0.5, 3.0) * gib as f64,
        ),
        TaskKind::Memory => (
            rng.uniform(40.0, 70.0),
            rng.uniform(5e8, 5e9),
            rng.uniform(2e8, 2e9),
            rng.uniform(6.0, 12.0) * gib as f64,
        ),
        TaskKind::Io => (
            rng.uniform(15.0, 40.0),
            rng.uniform(5e9, 5e10),
            rng.uniform(2e9, 2e10),
            rng.uniform(0.5, 3.0) * gib as f64,
        ),
        TaskKind::Balanced => (
            rng.uniform(50.0, 80.0),
            rng.uniform(1e9, 1e10),
            rng.uniform(5e8, 5e9),
            rng.uniform(2.0, 6.0) * gib as f64,
        ),
    };
    let avg_mem = peak_mem * rng.uniform(0.5, 0.8);
    let cpus = match kind {
        TaskKind::Cpu => [2, 4][rng.index(2)],
        TaskKind::Memory => [2, 4][rng.index(2)],
        TaskKind::Io => [1, 2][rng.index(2)],
        TaskKind::Balanced => [1, 2, 4][rng.index(3)],
    };
    let memory_request = ((peak_mem * 1.25 / gib as f64).ceil() as u64).max(1) * gib;
    TaskBlueprint {
        id: id.to_string(),
        kind,
        base_runtime_s: rng.uniform(60.0, 600.0),
        metrics: vec![cpu_pct, read, written, peak_mem, avg_mem],
        requests: Resources::new(cpus, memory_request),
    }
}

struct WorkflowBlueprint {
    name: String,
    tasks: Vec<TaskBlueprint>,
    edges: Vec<(String, String)>,
}

/// Deep pipeline: one indexing root fanning out to `branches` four-stage
/// chains that re-converge into a consensus step and a report.
fn pipeline_workflow(branches: usize, rng: &mut SimRng) -> WorkflowBlueprint {
    let mut tasks = vec![blueprint("make_index", TaskKind::Cpu, rng)];
    let mut edges = Vec::new();
    for b in 0..branches {
        let stages = [
            (format!("fastqc_{b:02}"), TaskKind::Io),
            (format!("align_{b:02}"), TaskKind::Cpu),
            (format!("filter_{b:02}"), TaskKind::Memory),
            (format!("peaks_{b:02}"), TaskKind::Balanced),
        ];
        edges.push(("make_index".to_string(), stages[0].0.clone()));
        for window in stages.windows(2) {
            edges.push((window[0].0.clone(), window[1].0.clone()));
        }
        edges.push((stages[3].0.clone(), "consensus".to_string()));
        for (id, kind) in stages {
            tasks.push(blueprint(&id, kind, rng));
        }
    }
    tasks.push(blueprint("consensus", TaskKind::Memory, rng));
    tasks.push(blueprint("report", TaskKind::Io, rng));
    edges.push(("consensus".to_string(), "report".to_string()));
    WorkflowBlueprint {
        name: "pipeline-mini".to_string(),
        tasks,
        edges,
    }
}

/// Shallow workflow of depth two: `width` independent screens feeding one
/// aggregation sink.
fn shallow_workflow(width: usize, rng: &mut SimRng) -> WorkflowBlueprint {
    let kinds = [TaskKind::Cpu, TaskKind::Io, TaskKind::Memory, TaskKind::Balanced];
    let mut tasks = Vec::new();
    let mut edges = Vec::new();
    for i in 0..width {
        let id = format!("screen_{i:02}");
        tasks.push(blueprint(&id, kinds[i % kinds.len()], rng));
        edges.push((id, "aggregate".to_string()));
    }
    tasks.push(blueprint("aggregate", TaskKind::Memory, rng));
    WorkflowBlueprint {
        name: "shallow-mini".to_string(),
        tasks,
        edges,
    }
}

/// Mixed diamond: prepare fans out to map/call chains plus per-branch QC
/// sinks, then merges into an annotate/summary tail.
fn diamond_workflow(branches: usize, rng: &mut SimRng) -> WorkflowBlueprint {
    let mut tasks = vec![blueprint("prepare", TaskKind::Io, rng)];
    let mut edges = Vec::new();
    for b in 0..branches {
        let map = format!("map_{b:02}");
        let call = format!("call_{b:02}");
        let qc = format!("qc_{b:02}");
        edges.push(("prepare".to_string(), map.clone()));
        edges.push((map.clone(), call.clone()));
        edges.push(("prepare".to_string(), qc.clone()));
        edges.push((call.clone(), "merge".to_string()));
        tasks.push(blueprint(&map, TaskKind::Cpu, rng));
        tasks.push(blueprint(&call, TaskKind::Memory, rng));
        tasks.push(blueprint(&qc, TaskKind::Io, rng));
    }
    tasks.push(blueprint("merge", TaskKind::Balanced, rng));
    tasks.push(blueprint("annotate", TaskKind::Cpu, rng));
    tasks.push(blueprint("summary", TaskKind::Io, rng));
    edges.push(("merge".to_string(), "annotate".to_string()));
    edges.push(("annotate".to_string(), "summary".to_string()));
    WorkflowBlueprint {
        name: "diamond-mini".to_string(),
        tasks,
        edges,
    }
}

/// Builds the whole fixture family from one seed.
pub fn generate(config: &FixtureConfig) -> FixtureSet {
    let catalog = catalog(config);
    let mut rng = SimRng::new(derive_seed(config.seed, &[b"workflows"]));
    let blueprints = vec![
        pipeline_workflow(config.pipeline_branches, &mut rng),
        shallow_workflow(config.shallow_width, &mut rng),
        diamond_workflow(config.diamond_branches, &mut rng),
    ];

    // true runtime: base / affinity-weighted machine speed, plus noise
    let spec_rng = &mut SimRng::new(derive_seed(config.seed, &[b"catalog"]));
    let specs = machine_specs(spec_rng);
    let mut matrix = RuntimeMatrix::new();
    let mut matrix_rng = SimRng::new(derive_seed(config.seed, &[b"matrix"]));
    for wf in &blueprints {
        for task in &wf.tasks {
            let (a_cpu, a_mem, a_io) = task.kind.affinity();
            for spec in &specs {
                let speed = spec.cpu.powf(a_cpu) * spec.mem.powf(a_mem) * spec.io.powf(a_io);
                let noise = 1.0 + matrix_rng.uniform(-config.matrix_noise, config.matrix_noise);
                let runtime = (task.base_runtime_s / speed * noise).max(1.0);
                matrix
                    .insert(&task.id, &spec.machine_type, runtime)
                    .expect("fixture runtimes are positive");
            }
        }
    }

    // historical traces jitter around the matrix values
    let mut trace_rng = SimRng::new(derive_seed(config.seed, &[b"traces"]));
    let mut records = Vec::new();
    for wf in &blueprints {
        for task in &wf.tasks {
            for spec in &specs {
                let true_runtime = matrix.lookup(&task.id, &spec.machine_type).unwrap();
                for _ in 0..config.trace_runs {
                    let runtime = true_runtime * trace_rng.uniform(0.97, 1.03);
                    let metrics = task
                        .metrics
                        .iter()
                        .map(|m| m * trace_rng.uniform(0.95, 1.05))
                        .collect();
                    records.push(TaskTraceRecord {
                        task_id: task.id.clone(),
                        machine_type: spec.machine_type.clone(),
                        runtime_s: runtime,
                        metrics,
                    });
                }
            }
        }
    }
    let traces = TraceSet {
        metric_names: TASK_METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
        records,
    };

    let machine_types: Vec<String> = specs.iter().map(|s| s.machine_type.clone()).collect();
    let workflows = blueprints
        .into_iter()
        .map(|wf| {
            let tasks = wf
                .tasks
                .into_iter()
                .map(|t| {
                    let avg = machine_types
                        .iter()
                        .map(|mt| matrix.lookup(&t.id, mt).unwrap())
                        .sum::<f64>()
                        / machine_types.len() as f64;
                    TaskDescriptor {
                        id: t.id,
                        resource_requests: t.requests,
                        avg_historical_runtime_s: avg,
                        trace_features: t.metrics,
                    }
                })
                .collect();
            let edges = wf
                .edges
                .iter()
                .map(|(f, t)| crate::domain::Edge::new(f, t))
                .collect();
            WorkflowDag::new(
                &wf.name,
                TASK_METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
                tasks,
                edges,
            )
            .expect("fixture workflows are valid dags")
        })
        .collect();

    FixtureSet {
        catalog,
        workflows,
        matrix,
        traces,
    }
}

/// Trains the default model on the fixture traces over the catalog.
pub fn train_model(
    set: &FixtureSet,
    hyperparameters: Hyperparameters,
    seed: u64,
) -> RecommenderModel {
    let profiled = set.catalog.as_training_cluster().expect("catalog profiles");
    let task_catalog: BTreeSet<String> = set
        .workflows
        .iter()
        .flat_map(|wf| wf.task_ids().map(String::from))
        .collect();
    let training = crate::profiling::build_training_set(
        &set.traces,
        &profiled,
        &task_catalog,
        TrainingTarget::Normalized,
    )
    .expect("fixture training set");
    RecommenderModel::train(
        &training,
        &set.traces.metric_names,
        &set.catalog.benchmarks,
        TrainingTarget::Normalized,
        hyperparameters,
        seed,
    )
    .expect("fixture model trains")
}

/// Writes the fixture family plus a ready-to-run plan document into `dir`.
pub fn write_to_dir(
    set: &FixtureSet,
    dir: &std::path::Path,
) -> Result<(), crate::experiment::ExperimentError> {
    use crate::experiment::{save_plan_doc, PlanDoc};

    let io_err = |path: &std::path::Path, e: std::io::Error| crate::experiment::ExperimentError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    std::fs::create_dir_all(dir.join("workflows")).map_err(|e| io_err(dir, e))?;

    let profile_set = crate::profiling::ProfileSet {
        benchmarks: set.catalog.benchmarks.clone(),
        cluster: set.catalog.as_training_cluster()?.cluster().clone(),
    };
    crate::profiling::save_profiles(&profile_set, &dir.join("catalog.csv"))?;
    crate::domain::save_runtime_matrix(&set.matrix, &dir.join("runtimes.csv"))?;
    crate::profiling::save_traces(&set.traces, &dir.join("traces.csv"))?;
    let mut workflow_paths = Vec::new();
    for wf in &set.workflows {
        let rel = format!("workflows/{}.json", wf.name);
        crate::domain::save_workflow(wf, &dir.join(&rel))?;
        workflow_paths.push(rel);
    }

    let mut plan = PlanDoc::new_v1();
    plan.workflows = workflow_paths;
    plan.catalog = "catalog.csv".to_string();
    plan.runtimes = "runtimes.csv".to_string();
    plan.model = Some("model.json".to_string());
    plan.cluster_count = 50;
    plan.nodes_per_cluster = 40;
    plan.error_levels = vec![0.0, 0.15, 0.3];
    save_plan_doc(&plan, &dir.join("plan.json"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let config = FixtureConfig::default();
        let a = generate(&config);
        let b = generate(&config);
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.workflows, b.workflows);
        assert_eq!(a.traces.records.len(), b.traces.records.len());
    }

    #[test]
    fn catalog_has_27_types_with_full_schema() {
        let set = generate(&FixtureConfig::default());
        assert_eq!(set.catalog.entries.len(), 27);
        for entry in &set.catalog.entries {
            assert_eq!(entry.benchmark_scores.len(), 10);
        }
    }

    #[test]
    fn matrix_covers_all_workflow_tasks() {
        let set = generate(&FixtureConfig::default());
        for wf in &set.workflows {
            for task in wf.task_ids() {
                for mt in set.catalog.machine_types() {
                    assert!(set.matrix.lookup(task, &mt).unwrap() > 0.0);
                }
            }
        }
    }

    #[test]
    fn shallow_workflow_has_depth_two() {
        let set = generate(&FixtureConfig::default());
        let shallow = set.workflows.iter().find(|w| w.name == "shallow-mini").unwrap();
        for task in shallow.task_ids() {
            let children = shallow.children(task).unwrap();
            if !children.is_empty() {
                for child in children {
                    assert!(shallow.children(child).unwrap().is_empty());
                }
            }
        }
    }

    #[test]
    fn every_task_fits_some_catalog_type() {
        let set = generate(&FixtureConfig::default());
        for wf in &set.workflows {
            for task in wf.tasks() {
                assert!(
                    set.catalog
                        .entries
                        .iter()
                        .any(|e| task.resource_requests.fits_within(&e.capacities)),
                    "task {} must fit at least one machine type",
                    task.id
                );
            }
        }
    }

    #[test]
    fn trained_model_separates_fast_from_slow_types() {
        let set = generate(&FixtureConfig::default());
        let model = train_model(&set, Hyperparameters::default(), 7);
        let profiled = set.catalog.as_training_cluster().unwrap();
        let task = set.workflows[0].tasks().next().unwrap();
        let list = crate::recommender::rank_nodes(&model, task, &profiled).unwrap();
        // the recommended order must correlate with the true runtimes
        let first = list.entries.first().unwrap();
        let last = list.entries.last().unwrap();
        let rt_first = set.matrix.lookup(&task.id, &first.node_id).unwrap();
        let rt_last = set.matrix.lookup(&task.id, &last.node_id).unwrap();
        assert!(
            rt_first < rt_last,
            "top pick {} ({rt_first}s) should beat bottom pick {} ({rt_last}s)",
            first.node_id,
            last.node_id
        );
    }
}
