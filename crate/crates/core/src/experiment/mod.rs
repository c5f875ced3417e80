//! Experiment harness: random heterogeneous clusters, scheduler sweeps
//! across error levels and distributions, and report aggregation.

mod plan_file;
mod report;

pub use plan_file::{load_plan, save_plan_doc, PlanDoc, WorkflowRef};
pub use report::{
    parse_report_csv, render_markdown, render_report_csv, render_series_csv, AggregateReport,
    AggregateRow,
};

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::mpsc;

use thiserror::Error;

use crate::domain::{Cluster, DomainError, NodeProfile, Resources, RuntimeMatrix, WorkflowDag};
use crate::profiling::{
    profile_with_reference, rank_features, BenchmarkSpec, ProfiledCluster, ProfilingError,
};
use crate::recommender::{RecommenderError, RecommenderModel};
use crate::rng::{derive_seed, SimRng};
use crate::schedulers::{SchedulerError, SchedulingConfig, Strategy};
use crate::simulator::{
    simulate, ErrorDistribution, PredictionErrorModel, SimError, SimulationConfig,
};

#[derive(Debug, Clone, Error)]
pub enum ExperimentError {
    #[error("machine catalog is empty")]
    EmptyCatalog,
    #[error("invalid plan: {0}")]
    Validation(String),
    #[error("no successful results for {workflow}/{strategy}/{distribution}/err={err}")]
    EmptyCell {
        workflow: String,
        strategy: String,
        distribution: String,
        err: f64,
    },
    #[error("report contains no rows")]
    EmptyReport,
    #[error("{path}:{line}: {reason}")]
    Format {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("io error on `{path}`: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Profiling(#[from] ProfilingError),
    #[error(transparent)]
    Recommender(#[from] RecommenderError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One machine type available for cluster generation.
#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub machine_type: String,
    pub capacities: Resources,
    pub benchmark_scores: Vec<f64>,
}

/// The machine types clusters are drawn from, with their benchmark schema.
#[derive(Clone, Debug, PartialEq)]
pub struct MachineCatalog {
    pub benchmarks: Vec<BenchmarkSpec>,
    pub entries: Vec<CatalogEntry>,
}

impl MachineCatalog {
    pub fn new(benchmarks: Vec<BenchmarkSpec>, entries: Vec<CatalogEntry>) -> Result<Self, ExperimentError> {
        if entries.is_empty() {
            return Err(ExperimentError::EmptyCatalog);
        }
        let mut seen = std::collections::BTreeSet::new();
        for entry in &entries {
            if !seen.insert(&entry.machine_type) {
                return Err(ExperimentError::Validation(format!(
                    "duplicate machine type `{}` in catalog",
                    entry.machine_type
                )));
            }
            if entry.benchmark_scores.len() != benchmarks.len() {
                return Err(ExperimentError::Validation(format!(
                    "machine type `{}` has {} scores, expected {}",
                    entry.machine_type,
                    entry.benchmark_scores.len(),
                    benchmarks.len()
                )));
            }
        }
        Ok(Self { benchmarks, entries })
    }

    /// Reads a catalog from a node-profile set with one row per type.
    pub fn from_profiles(set: &crate::profiling::ProfileSet) -> Result<Self, ExperimentError> {
        let entries = set
            .cluster
            .nodes()
            .iter()
            .map(|n| CatalogEntry {
                machine_type: n.machine_type.clone(),
                capacities: n.capacities.clone(),
                benchmark_scores: n.benchmark_scores.clone(),
            })
            .collect();
        Self::new(set.benchmarks.clone(), entries)
    }

    pub fn machine_types(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.machine_type.clone()).collect()
    }

    /// The catalog viewed as a cluster with one node per machine type, the
    /// shape used for model training.
    pub fn as_training_cluster(&self) -> Result<ProfiledCluster, ExperimentError> {
        let nodes: Vec<NodeProfile> = self
            .entries
            .iter()
            .map(|e| {
                NodeProfile::new(
                    &e.machine_type,
                    &e.machine_type,
                    e.capacities.clone(),
                    e.benchmark_scores.clone(),
                )
            })
            .collect();
        Ok(rank_features(&Cluster::new(nodes)?, &self.benchmarks)?)
    }
}

/// Draws clusters of `nodes_per_cluster` nodes uniformly with replacement
/// from the catalog. Node ids are `c{k}-n{j}`; identical seeds give
/// identical sequences.
pub fn generate_clusters(
    catalog: &MachineCatalog,
    cluster_count: usize,
    nodes_per_cluster: usize,
    seed: u64,
) -> Result<Vec<Cluster>, ExperimentError> {
    if catalog.entries.is_empty() {
        return Err(ExperimentError::EmptyCatalog);
    }
    let mut rng = SimRng::new(derive_seed(seed, &[b"clusters"]));
    let mut clusters = Vec::with_capacity(cluster_count);
    for k in 0..cluster_count {
        let mut nodes = Vec::with_capacity(nodes_per_cluster);
        for j in 0..nodes_per_cluster {
            let entry = &catalog.entries[rng.index(catalog.entries.len())];
            nodes.push(NodeProfile::new(
                &format!("c{k}-n{j}"),
                &entry.machine_type,
                entry.capacities.clone(),
                entry.benchmark_scores.clone(),
            ));
        }
        clusters.push(Cluster::new(nodes)?);
    }
    Ok(clusters)
}

/// A full sweep description: everything `run_sweep` needs, already loaded.
#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub workflows: Vec<WorkflowDag>,
    pub catalog: MachineCatalog,
    pub matrix: RuntimeMatrix,
    pub model: Option<RecommenderModel>,
    pub cluster_count: usize,
    pub nodes_per_cluster: usize,
    pub strategies: Vec<Strategy>,
    pub distributions: Vec<ErrorDistribution>,
    pub error_levels: Vec<f64>,
    pub master_seed: u64,
    pub bandwidth_bytes_per_s: Option<f64>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |msg: String| Err(ExperimentError::Validation(msg));
        if self.workflows.is_empty() {
            return fail("at least one workflow is required".into());
        }
        if self.strategies.is_empty() {
            return fail("at least one strategy is required".into());
        }
        if self.distributions.is_empty() {
            return fail("at least one error distribution is required".into());
        }
        if self.error_levels.is_empty() {
            return fail("at least one error level is required".into());
        }
        if self.cluster_count < 1 || self.nodes_per_cluster < 1 {
            return fail("cluster_count and nodes_per_cluster must be >= 1".into());
        }
        for &err in &self.error_levels {
            if !err.is_finite() || err < 0.0 {
                return fail(format!("error level must be finite and >= 0, got {err}"));
            }
        }
        if self.catalog.entries.is_empty() {
            return Err(ExperimentError::EmptyCatalog);
        }
        // the matrix must cover every (workflow task, catalog type) pair
        for workflow in &self.workflows {
            for task_id in workflow.task_ids() {
                for machine_type in self.catalog.machine_types() {
                    self.matrix.lookup(task_id, &machine_type)?;
                }
            }
        }
        let needs_model = self.strategies.iter().any(Strategy::needs_model);
        match (&self.model, needs_model) {
            (None, true) => fail("rank-driven strategies require a model".into()),
            (Some(model), _) => {
                for workflow in &self.workflows {
                    model.check_schema(&workflow.task_metric_names, &self.catalog.benchmarks)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// One simulation outcome inside a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub workflow: String,
    pub cluster_index: usize,
    pub strategy: Strategy,
    pub distribution: ErrorDistribution,
    pub err: f64,
    pub makespan_s: Option<f64>,
    pub failure: Option<String>,
}

/// Runs every (workflow, cluster, strategy, distribution, err) combination.
///
/// Per-run seeds derive from (master seed, cluster index, strategy, err),
/// so prediction-free strategies see identical environments at every error
/// level. A failing run is recorded and the sweep continues.
pub fn run_sweep(plan: &ExperimentPlan, jobs: usize) -> Result<Vec<RunRecord>, ExperimentError> {
    plan.validate()?;
    let clusters = generate_clusters(
        &plan.catalog,
        plan.cluster_count,
        plan.nodes_per_cluster,
        plan.master_seed,
    )?;
    // machine types are benchmarked once; generated clusters inherit the
    // catalog profiling instead of being re-ranked in isolation
    let reference = plan.catalog.as_training_cluster()?;
    let profiled: Vec<ProfiledCluster> = clusters
        .iter()
        .map(|c| profile_with_reference(c, &reference))
        .collect::<Result<_, _>>()?;

    struct RunSpec<'p> {
        workflow: &'p WorkflowDag,
        cluster_index: usize,
        strategy: Strategy,
        distribution: ErrorDistribution,
        err: f64,
    }
    let mut specs = Vec::new();
    for workflow in &plan.workflows {
        for cluster_index in 0..plan.cluster_count {
            for &strategy in &plan.strategies {
                for &distribution in &plan.distributions {
                    for &err in &plan.error_levels {
                        specs.push(RunSpec { workflow, cluster_index, strategy, distribution, err });
                    }
                }
            }
        }
    }

    let scheduling = SchedulingConfig {
        bandwidth_bytes_per_s: plan.bandwidth_bytes_per_s,
        ..Default::default()
    };
    let run_one = |spec: &RunSpec| -> RunRecord {
        let seed = derive_seed(
            plan.master_seed,
            &[
                b"run",
                &(spec.cluster_index as u64).to_le_bytes(),
                spec.strategy.name().as_bytes(),
                &spec.err.to_bits().to_le_bytes(),
            ],
        );
        let outcome = PredictionErrorModel::new(spec.distribution, spec.err)
            .map_err(ExperimentError::from)
            .and_then(|error_model| {
                let config = SimulationConfig {
                    strategy: spec.strategy,
                    error_model,
                    seed,
                    scheduling,
                };
                simulate(
                    spec.workflow,
                    &profiled[spec.cluster_index],
                    &plan.matrix,
                    plan.model.as_ref(),
                    &config,
                )
                .map_err(ExperimentError::from)
            });
        let (makespan_s, failure) = match outcome {
            Ok(result) => (Some(result.makespan_s), None),
            Err(e) => (None, Some(e.to_string())),
        };
        RunRecord {
            workflow: spec.workflow.name.clone(),
            cluster_index: spec.cluster_index,
            strategy: spec.strategy,
            distribution: spec.distribution,
            err: spec.err,
            makespan_s,
            failure,
        }
    };

    let jobs = jobs.max(1).min(specs.len().max(1));
    let mut records: Vec<Option<RunRecord>> = vec![None; specs.len()];
    if jobs <= 1 {
        for (i, spec) in specs.iter().enumerate() {
            records[i] = Some(run_one(spec));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<(usize, RunRecord)>();
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                let tx = tx.clone();
                let next = &next;
                let specs = &specs;
                let run_one = &run_one;
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= specs.len() {
                        break;
                    }
                    tx.send((i, run_one(&specs[i]))).expect("collector alive");
                });
            }
            drop(tx);
            for (i, record) in rx {
                records[i] = Some(record);
            }
        });
    }
    Ok(records.into_iter().map(|r| r.expect("every run executed")).collect())
}

/// Nearest-rank percentile: value at index ceil(p * n) of the ascending
/// sorted sample.
pub fn nearest_rank_percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Collapses raw results into per-(workflow, strategy, distribution, err)
/// statistics with relative-percentage columns. The relative base for a
/// (workflow, distribution, err) cell is the smallest strategy mean, which
/// maps to 0.00%. All four statistics come from the same sample, so
/// p90 <= p95 <= max holds in every row by construction.
pub fn aggregate(records: &[RunRecord]) -> Result<AggregateReport, ExperimentError> {
    let mut cells: BTreeMap<(String, ErrorDistribution, u64, Strategy), Vec<f64>> = BTreeMap::new();
    for record in records {
        let key = (
            record.workflow.clone(),
            record.distribution,
            record.err.to_bits(),
            record.strategy,
        );
        let entry = cells.entry(key).or_default();
        if let Some(makespan) = record.makespan_s {
            entry.push(makespan);
        }
    }
    if cells.is_empty() {
        return Err(ExperimentError::EmptyCell {
            workflow: "-".into(),
            strategy: "-".into(),
            distribution: "-".into(),
            err: 0.0,
        });
    }

    struct Stats {
        mean: f64,
        p90: f64,
        p95: f64,
        max: f64,
    }
    let mut stats: BTreeMap<(String, ErrorDistribution, u64), BTreeMap<Strategy, Stats>> =
        BTreeMap::new();
    for ((workflow, distribution, err_bits, strategy), mut makespans) in cells {
        if makespans.is_empty() {
            return Err(ExperimentError::EmptyCell {
                workflow,
                strategy: strategy.name().to_string(),
                distribution: distribution.name().to_string(),
                err: f64::from_bits(err_bits),
            });
        }
        makespans.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = makespans.iter().sum::<f64>() / makespans.len() as f64;
        stats.entry((workflow, distribution, err_bits)).or_default().insert(
            strategy,
            Stats {
                mean,
                p90: nearest_rank_percentile(&makespans, 0.90),
                p95: nearest_rank_percentile(&makespans, 0.95),
                max: *makespans.last().unwrap(),
            },
        );
    }

    let mut rows = Vec::new();
    for ((workflow, distribution, err_bits), by_strategy) in stats {
        let best_mean = by_strategy
            .values()
            .map(|s| s.mean)
            .fold(f64::INFINITY, f64::min);
        let pct = |v: f64| (v / best_mean - 1.0) * 100.0;
        for (strategy, s) in by_strategy {
            rows.push(AggregateRow {
                workflow: workflow.clone(),
                distribution: distribution.name().to_string(),
                err: f64::from_bits(err_bits),
                strategy: strategy.name().to_string(),
                mean_s: s.mean,
                p90_s: s.p90,
                p95_s: s.p95,
                max_s: s.max,
                mean_pct: pct(s.mean),
                p90_pct: pct(s.p90),
                p95_pct: pct(s.p95),
                max_pct: pct(s.max),
            });
        }
    }
    rows.sort_by(|a, b| {
        (&a.workflow, &a.distribution, a.err.to_bits(), Strategy::parse(&a.strategy).unwrap()).cmp(&(
            &b.workflow,
            &b.distribution,
            b.err.to_bits(),
            Strategy::parse(&b.strategy).unwrap(),
        ))
    });
    Ok(AggregateReport { rows })
}

/// Output paths of one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub raw_results: std::path::PathBuf,
    pub report: std::path::PathBuf,
    pub series: std::path::PathBuf,
    pub failure_count: usize,
}

/// Runs the sweep, aggregates, and writes raw results plus report files
/// into `out_dir`. Output bytes depend only on the plan and master seed.
pub fn run_experiment(
    plan: &ExperimentPlan,
    out_dir: &Path,
    jobs: usize,
) -> Result<ExperimentOutput, ExperimentError> {
    std::fs::create_dir_all(out_dir).map_err(|e| ExperimentError::Io {
        path: out_dir.display().to_string(),
        reason: e.to_string(),
    })?;
    let records = run_sweep(plan, jobs)?;
    let failure_count = records.iter().filter(|r| r.failure.is_some()).count();

    let raw_path = out_dir.join("raw_results.csv");
    write_file(&raw_path, &report::render_raw_csv(&records))?;

    let report = aggregate(&records)?;
    let report_path = out_dir.join("report.csv");
    write_file(&report_path, &render_report_csv(&report)?)?;
    let series_path = out_dir.join("series.csv");
    write_file(&series_path, &render_series_csv(&report)?)?;

    Ok(ExperimentOutput {
        raw_results: raw_path,
        report: report_path,
        series: series_path,
        failure_count,
    })
}

pub(crate) fn write_file(path: &Path, content: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, content).map_err(|e| ExperimentError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub use report::{load_raw_results, render_raw_csv};
