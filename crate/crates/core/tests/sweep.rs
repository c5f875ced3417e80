//! Sweep-level behavior on the fixture family: run counting, invariance of
//! prediction-free strategies across error levels, and plan validation.

use std::sync::OnceLock;

use reshi_core::experiment::{aggregate, run_sweep, ExperimentPlan};
use reshi_core::fixtures::{self, FixtureConfig};
use reshi_core::recommender::{Hyperparameters, RecommenderModel};
use reshi_core::schedulers::Strategy;
use reshi_core::simulator::ErrorDistribution;

struct Ctx {
    set: fixtures::FixtureSet,
    model: RecommenderModel,
}

fn ctx() -> &'static Ctx {
    static CTX: OnceLock<Ctx> = OnceLock::new();
    CTX.get_or_init(|| {
        let set = fixtures::generate(&FixtureConfig {
            pipeline_branches: 3,
            shallow_width: 8,
            diamond_branches: 3,
            trace_runs: 2,
            ..Default::default()
        });
        let model = fixtures::train_model(&set, Hyperparameters::default(), 1);
        Ctx { set, model }
    })
}

fn small_plan(strategies: Vec<Strategy>, error_levels: Vec<f64>) -> ExperimentPlan {
    let c = ctx();
    ExperimentPlan {
        workflows: vec![c.set.workflows[1].clone()],
        catalog: c.set.catalog.clone(),
        matrix: c.set.matrix.clone(),
        model: Some(c.model.clone()),
        cluster_count: 2,
        nodes_per_cluster: 10,
        strategies,
        distributions: vec![ErrorDistribution::Normal],
        error_levels,
        master_seed: 31,
        bandwidth_bytes_per_s: None,
    }
}

#[test]
fn run_count_is_the_full_product() {
    // 1 workflow x 2 clusters x 5 strategies x 1 distribution x 3 levels
    let plan = small_plan(Strategy::ALL.to_vec(), vec![0.0, 0.15, 0.3]);
    let records = run_sweep(&plan, 2).unwrap();
    assert_eq!(records.len(), 30);
    assert!(records.iter().all(|r| r.failure.is_none()));
}

#[test]
fn prediction_free_strategies_identical_across_error_levels() {
    let plan = small_plan(
        vec![Strategy::ReshiC, Strategy::ReshiM, Strategy::RoundRobin],
        vec![0.0, 0.15, 0.3],
    );
    let records = run_sweep(&plan, 1).unwrap();
    for strategy in [Strategy::ReshiC, Strategy::ReshiM, Strategy::RoundRobin] {
        for cluster in 0..2 {
            let makespans: Vec<u64> = records
                .iter()
                .filter(|r| r.strategy == strategy && r.cluster_index == cluster)
                .map(|r| r.makespan_s.unwrap().to_bits())
                .collect();
            assert_eq!(makespans.len(), 3);
            assert!(
                makespans.windows(2).all(|w| w[0] == w[1]),
                "{strategy} must ignore the error level"
            );
        }
    }

    // and the aggregate rows agree across levels, stat for stat
    let report = aggregate(&records).unwrap();
    for strategy in ["reshi-c", "reshi-m", "rr"] {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.strategy == strategy).collect();
        assert_eq!(rows.len(), 3);
        for pair in rows.windows(2) {
            assert_eq!(pair[0].mean_s, pair[1].mean_s);
            assert_eq!(pair[0].p90_s, pair[1].p90_s);
            assert_eq!(pair[0].p95_s, pair[1].p95_s);
            assert_eq!(pair[0].max_s, pair[1].max_s);
        }
    }
}

#[test]
fn empty_strategy_list_is_a_validation_error() {
    let plan = small_plan(vec![], vec![0.15]);
    assert!(run_sweep(&plan, 1).is_err());
}

#[test]
fn model_missing_for_rank_driven_strategy_is_rejected() {
    let mut plan = small_plan(vec![Strategy::ReshiC], vec![0.0]);
    plan.model = None;
    assert!(plan.validate().is_err());
}
