//! Workflow-scheduling simulator and node recommender for heterogeneous
//! clusters.
//!
//! The pipeline: profile cluster nodes and rank-normalize their benchmark
//! results, train a regression tree on historical task traces, rank nodes
//! per task, and compare rank-driven dispatching against HEFT, MinMin, and
//! Round-Robin in a discrete-event simulator that injects task-runtime
//! prediction error.

pub mod domain;
pub mod experiment;
pub mod fixtures;
pub mod profiling;
pub mod recommender;
pub mod rng;
pub mod schedulers;
pub mod simulator;
