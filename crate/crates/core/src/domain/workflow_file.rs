//! Workflow document format.
//!
//! A single JSON document with a version marker:
//!
//! ```json
//! {
//!   "format": "reshi-workflow",
//!   "version": 1,
//!   "name": "example",
//!   "task_metrics": ["cpu_usage_pct", "read_bytes"],
//!   "tasks": [
//!     {"id": "a", "cpus": 2, "memory_bytes": 1073741824, "avg_runtime_s": 12.5,
//!      "metrics": {"cpu_usage_pct": 91.0, "read_bytes": 2048.0}}
//!   ],
//!   "edges": [{"from": "a", "to": "b", "data_volume_bytes": 0}]
//! }
//! ```
//!
//! Unknown task ids in `edges`, cycles, and duplicate edges are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DomainError, Edge, Resources, TaskDescriptor, WorkflowDag};

pub(crate) const WORKFLOW_FORMAT: &str = "reshi-workflow";
pub(crate) const WORKFLOW_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct WorkflowDoc {
    format: String,
    version: u32,
    name: String,
    task_metrics: Vec<String>,
    tasks: Vec<TaskDoc>,
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct TaskDoc {
    id: String,
    cpus: u64,
    memory_bytes: u64,
    avg_runtime_s: f64,
    metrics: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    from: String,
    to: String,
    #[serde(default)]
    data_volume_bytes: u64,
}

pub fn load_workflow(path: &Path) -> Result<WorkflowDag, DomainError> {
    let text = std::fs::read_to_string(path).map_err(|e| DomainError::io(path, e))?;
    let doc: WorkflowDoc = serde_json::from_str(&text).map_err(|e| DomainError::FileFormat {
        path: path.display().to_string(),
        line: e.line(),
        reason: e.to_string(),
    })?;
    workflow_from_doc(doc).map_err(|e| match e {
        DomainError::FileFormat { line, reason, .. } => DomainError::FileFormat {
            path: path.display().to_string(),
            line,
            reason,
        },
        other => other,
    })
}

fn workflow_from_doc(doc: WorkflowDoc) -> Result<WorkflowDag, DomainError> {
    if doc.format != WORKFLOW_FORMAT || doc.version != WORKFLOW_VERSION {
        return Err(DomainError::FileFormat {
            path: String::new(),
            line: 1,
            reason: format!(
                "expected format `{WORKFLOW_FORMAT}` version {WORKFLOW_VERSION}, got `{}` version {}",
                doc.format, doc.version
            ),
        });
    }
    let mut tasks = Vec::with_capacity(doc.tasks.len());
    for t in doc.tasks {
        let mut features = Vec::with_capacity(doc.task_metrics.len());
        for name in &doc.task_metrics {
            match t.metrics.get(name) {
                Some(&v) => features.push(v),
                None => {
                    return Err(DomainError::InvalidTask {
                        id: t.id.clone(),
                        reason: format!("missing metric `{name}`"),
                    })
                }
            }
        }
        if t.metrics.len() != doc.task_metrics.len() {
            let extra: Vec<&String> = t
                .metrics
                .keys()
                .filter(|k| !doc.task_metrics.contains(k))
                .collect();
            return Err(DomainError::InvalidTask {
                id: t.id.clone(),
                reason: format!("undeclared metrics {extra:?}"),
            });
        }
        tasks.push(TaskDescriptor {
            id: t.id,
            resource_requests: Resources::new(t.cpus, t.memory_bytes),
            avg_historical_runtime_s: t.avg_runtime_s,
            trace_features: features,
        });
    }
    let edges = doc
        .edges
        .into_iter()
        .map(|e| Edge::new(&e.from, &e.to).with_volume(e.data_volume_bytes))
        .collect();
    WorkflowDag::new(&doc.name, doc.task_metrics, tasks, edges)
}

pub fn save_workflow(dag: &WorkflowDag, path: &Path) -> Result<(), DomainError> {
    let doc = WorkflowDoc {
        format: WORKFLOW_FORMAT.to_string(),
        version: WORKFLOW_VERSION,
        name: dag.name.clone(),
        task_metrics: dag.task_metric_names.clone(),
        tasks: dag
            .tasks()
            .map(|t| TaskDoc {
                id: t.id.clone(),
                cpus: t.resource_requests.cpus(),
                memory_bytes: t.resource_requests.memory_bytes(),
                avg_runtime_s: t.avg_historical_runtime_s,
                metrics: dag
                    .task_metric_names
                    .iter()
                    .cloned()
                    .zip(t.trace_features.iter().copied())
                    .collect(),
            })
            .collect(),
        edges: dag
            .edges()
            .iter()
            .map(|e| EdgeDoc {
                from: e.from.clone(),
                to: e.to.clone(),
                data_volume_bytes: e.data_volume_bytes,
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("workflow doc serializes");
    std::fs::write(path, text).map_err(|e| DomainError::io(path, e))
}
