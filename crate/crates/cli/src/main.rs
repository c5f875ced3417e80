//! `reshi`: train a node recommender, rank nodes for a task, simulate one
//! workflow run, or sweep a full experiment plan and report the results.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use reshi_core::domain::{load_runtime_matrix, load_workflow};
use reshi_core::experiment::{
    aggregate, load_plan, load_raw_results, render_markdown, render_report_csv, render_series_csv,
    run_experiment,
};
use reshi_core::fixtures;
use reshi_core::profiling::{build_training_set, load_profiles, load_traces, rank_features};
use reshi_core::recommender::{
    load_model, rank_nodes, save_model, Hyperparameters, RecommenderModel, TrainingTarget,
};
use reshi_core::schedulers::{SchedulingConfig, Strategy, TieBreak};
use reshi_core::simulator::{
    simulate, ErrorDistribution, PredictionErrorModel, SimulationConfig,
};

#[derive(Parser)]
#[command(name = "reshi", version, about = "Workflow scheduling simulator and node recommender")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    Normalized,
    Raw,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistArg {
    Normal,
    Exponential,
    None,
}

impl From<DistArg> for ErrorDistribution {
    fn from(value: DistArg) -> Self {
        match value {
            DistArg::Normal => ErrorDistribution::Normal,
            DistArg::Exponential => ErrorDistribution::Exponential,
            DistArg::None => ErrorDistribution::None,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TieBreakArg {
    Asc,
    Desc,
}

#[derive(Subcommand)]
enum Command {
    /// Train the regression-tree model from traces and node profiles.
    Train {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "normalized")]
        target: TargetArg,
        #[arg(long, default_value_t = 8)]
        max_depth: usize,
        #[arg(long, default_value_t = 3)]
        min_samples_leaf: usize,
        #[arg(long, default_value_t = 1e-7)]
        min_variance_reduction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rank the cluster's nodes for one task of a workflow.
    Rank {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        task_id: String,
        #[arg(long)]
        profiles: PathBuf,
        /// Workflow document supplying the task's metrics and requests.
        #[arg(long)]
        dag: PathBuf,
    },
    /// Simulate one workflow on one cluster under one strategy.
    Simulate {
        #[arg(long)]
        dag: PathBuf,
        /// Node-profile file describing the cluster.
        #[arg(long)]
        cluster: PathBuf,
        #[arg(long)]
        runtimes: PathBuf,
        #[arg(long)]
        strategy: String,
        #[arg(long, default_value_t = 0.0)]
        err: f64,
        #[arg(long, value_enum, default_value = "none")]
        dist: DistArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trained model, required for the rank-driven strategies.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Uniform link bandwidth in bytes/s; omitted means free transfers.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, value_enum, default_value = "asc")]
        tie_break: TieBreakArg,
        /// Write the full result document here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a whole experiment plan and write raw results plus reports.
    Experiment {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-aggregate raw experiment results into a report.
    Report {
        /// Directory holding raw_results.csv from an experiment run.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Write the synthetic fixture dataset (catalog, workflows, traces,
    /// runtimes, plan) into a directory.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20220901)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        // machine-readable error summary on stderr
        let summary = serde_json::json!({
            "error": error.to_string(),
            "chain": error.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
        });
        eprintln!("{summary}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            traces,
            profiles,
            out,
            target,
            max_depth,
            min_samples_leaf,
            min_variance_reduction,
            seed,
        } => train(
            &traces,
            &profiles,
            &out,
            target,
            Hyperparameters { max_depth, min_samples_leaf, min_variance_reduction },
            seed,
        ),
        Command::Rank { model, task_id, profiles, dag } => rank(&model, &task_id, &profiles, &dag),
        Command::Simulate {
            dag,
            cluster,
            runtimes,
            strategy,
            err,
            dist,
            seed,
            model,
            bandwidth,
            tie_break,
            out,
        } => run_simulation(
            &dag, &cluster, &runtimes, &strategy, err, dist, seed, model.as_deref(), bandwidth,
            tie_break, out.as_deref(),
        ),
        Command::Experiment { plan, out, jobs } => {
            let plan = load_plan(&plan).context("loading experiment plan")?;
            let jobs = jobs.unwrap_or_else(|| {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            });
            let output = run_experiment(&plan, &out, jobs)?;
            println!("raw results: {}", output.raw_results.display());
            println!("report:      {}", output.report.display());
            println!("series:      {}", output.series.display());
            if output.failure_count > 0 {
                println!("failed runs: {} (see the failure column)", output.failure_count);
            }
            Ok(())
        }
        Command::Report { input, format } => report(&input, format),
        Command::Fixtures { out, seed } => {
            let config = fixtures::FixtureConfig { seed, ..Default::default() };
            let set = fixtures::generate(&config);
            fixtures::write_to_dir(&set, &out)?;
            println!("fixtures written to {}", out.display());
            println!("next: reshi train --traces {0}/traces.csv --profiles {0}/catalog.csv --out {0}/model.json", out.display());
            Ok(())
        }
    }
}

fn train(
    traces_path: &Path,
    profiles_path: &Path,
    out: &Path,
    target: TargetArg,
    hyperparameters: Hyperparameters,
    seed: u64,
) -> Result<()> {
    let traces = load_traces(traces_path).context("loading traces")?;
    let profiles = load_profiles(profiles_path).context("loading profiles")?;
    let profiled = rank_features(&profiles.cluster, &profiles.benchmarks)?;
    let target = match target {
        TargetArg::Normalized => TrainingTarget::Normalized,
        TargetArg::Raw => TrainingTarget::Raw,
    };
    // training needs no workflow context: the task catalog is the set of
    // task ids observed in the traces
    let task_catalog: BTreeSet<String> =
        traces.records.iter().map(|r| r.task_id.clone()).collect();
    let training = build_training_set(&traces, &profiled, &task_catalog, target)?;
    let model = RecommenderModel::train(
        &training,
        &traces.metric_names,
        &profiles.benchmarks,
        target,
        hyperparameters,
        seed,
    )?;
    save_model(&model, out)?;
    println!(
        "trained on {} rows x {} features; tree depth {}, {} nodes -> {}",
        training.n_rows(),
        training.n_features(),
        model.tree.depth(),
        model.tree.node_count(),
        out.display()
    );
    Ok(())
}

fn rank(model_path: &Path, task_id: &str, profiles_path: &Path, dag_path: &Path) -> Result<()> {
    let model = load_model(model_path)?;
    let profiles = load_profiles(profiles_path)?;
    let dag = load_workflow(dag_path)?;
    let profiled = rank_features(&profiles.cluster, &profiles.benchmarks)?;
    model.check_schema(&dag.task_metric_names, profiled.benchmarks())?;
    let task = dag.task(task_id)?;
    let list = rank_nodes(&model, task, &profiled)?;
    println!("rank,node_id,machine_type,score");
    for (position, entry) in list.entries.iter().enumerate() {
        let machine_type = &profiled.node(&entry.node_id).unwrap().machine_type;
        println!("{},{},{},{:.6}", position + 1, entry.node_id, machine_type, entry.score);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_simulation(
    dag_path: &Path,
    cluster_path: &Path,
    runtimes_path: &Path,
    strategy: &str,
    err: f64,
    dist: DistArg,
    seed: u64,
    model_path: Option<&Path>,
    bandwidth: Option<f64>,
    tie_break: TieBreakArg,
    out: Option<&Path>,
) -> Result<()> {
    let dag = load_workflow(dag_path)?;
    let profiles = load_profiles(cluster_path)?;
    let matrix = load_runtime_matrix(runtimes_path)?;
    let strategy = Strategy::parse(strategy)?;
    let profiled = rank_features(&profiles.cluster, &profiles.benchmarks)?;
    let model = model_path.map(load_model).transpose()?;
    if strategy.needs_model() && model.is_none() {
        bail!("strategy `{strategy}` requires --model");
    }
    let config = SimulationConfig {
        strategy,
        error_model: PredictionErrorModel::new(dist.into(), err)?,
        seed,
        scheduling: SchedulingConfig {
            bandwidth_bytes_per_s: bandwidth,
            tie_break: match tie_break {
                TieBreakArg::Asc => TieBreak::AscendingId,
                TieBreakArg::Desc => TieBreak::DescendingId,
            },
        },
    };
    let result = simulate(&dag, &profiled, &matrix, model.as_ref(), &config)?;
    let doc = serde_json::to_string_pretty(&result)?;
    match out {
        Some(path) => {
            std::fs::write(path, doc).with_context(|| format!("writing {}", path.display()))?;
            println!("makespan_s: {}", result.makespan_s);
            println!("result: {}", path.display());
        }
        None => println!("{doc}"),
    }
    Ok(())
}

fn report(input: &Path, format: FormatArg) -> Result<()> {
    let raw = input.join("raw_results.csv");
    let records = load_raw_results(&raw)
        .with_context(|| format!("reading {}", raw.display()))?;
    let report = aggregate(&records)?;
    let (path, text) = match format {
        FormatArg::Csv => (input.join("report.csv"), render_report_csv(&report)?),
        FormatArg::Md => (input.join("report.md"), render_markdown(&report)?),
    };
    std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    let series = input.join("series.csv");
    std::fs::write(&series, render_series_csv(&report)?)
        .with_context(|| format!("writing {}", series.display()))?;
    println!("report:  {}", path.display());
    println!("series:  {}", series.display());
    Ok(())
}
