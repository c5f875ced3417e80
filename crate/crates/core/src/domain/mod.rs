//! Core data types for workflows, tasks, nodes, and clusters.

mod dag;
mod runtime_matrix;
mod types;
mod workflow_file;

pub use dag::{Edge, WorkflowDag};
pub use runtime_matrix::{load_runtime_matrix, save_runtime_matrix, RuntimeMatrix};
pub use types::{Cluster, NodeProfile, Resources, TaskDescriptor};
pub use workflow_file::{load_workflow, save_workflow};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DomainError {
    #[error("cycle detected: edge {from} -> {to} lies on a cycle")]
    CycleDetected { from: String, to: String },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task id must be nonempty")]
    EmptyTaskId,
    #[error("duplicate task id `{0}`")]
    DuplicateTaskId(String),
    #[error("edge endpoint `{0}` does not name a task")]
    UnknownEdgeEndpoint(String),
    #[error("self edge on task `{0}`")]
    SelfEdge(String),
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: String, to: String },
    #[error("task `{id}` is invalid: {reason}")]
    InvalidTask { id: String, reason: String },
    #[error("node `{id}` is invalid: {reason}")]
    InvalidNode { id: String, reason: String },
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(String),
    #[error("cluster must contain at least one node")]
    EmptyCluster,
    #[error("no runtime recorded for task `{task_id}` on machine type `{machine_type}`")]
    MissingRuntime { task_id: String, machine_type: String },
    #[error("runtime for task `{task_id}` on `{machine_type}` must be positive, got {value}")]
    NonPositiveRuntime {
        task_id: String,
        machine_type: String,
        value: f64,
    },
    #[error("{path}:{line}: {reason}")]
    FileFormat {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("io error on `{path}`: {reason}")]
    Io { path: String, reason: String },
}

impl DomainError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        DomainError::Io {
            path: path.display().to_string(),
            reason: source.to_string(),
        }
    }
}
