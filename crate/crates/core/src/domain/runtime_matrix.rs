//! Measured true runtimes per (task, machine type) pair.
//!
//! File format: columnar text with a version header.
//!
//! ```text
//! #reshi-runtimes v1
//! task_id,machine_type,runtime_s
//! align,m5.large,130.25
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::{Cluster, DomainError, WorkflowDag};

const RUNTIMES_HEADER: &str = "#reshi-runtimes v1";

/// Ground truth for the simulator: true runtime in seconds for every
/// (task id, machine type) pair an experiment touches.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RuntimeMatrix {
    entries: BTreeMap<(String, String), f64>,
}

impl RuntimeMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        task_id: &str,
        machine_type: &str,
        runtime_s: f64,
    ) -> Result<(), DomainError> {
        if !runtime_s.is_finite() || runtime_s <= 0.0 {
            return Err(DomainError::NonPositiveRuntime {
                task_id: task_id.to_string(),
                machine_type: machine_type.to_string(),
                value: runtime_s,
            });
        }
        self.entries
            .insert((task_id.to_string(), machine_type.to_string()), runtime_s);
        Ok(())
    }

    /// Exact stored value; never interpolates.
    pub fn lookup(&self, task_id: &str, machine_type: &str) -> Result<f64, DomainError> {
        self.entries
            .get(&(task_id.to_string(), machine_type.to_string()))
            .copied()
            .ok_or_else(|| DomainError::MissingRuntime {
                task_id: task_id.to_string(),
                machine_type: machine_type.to_string(),
            })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.entries
            .iter()
            .map(|((t, m), &r)| (t.as_str(), m.as_str(), r))
    }

    /// Fails fast if any (task, machine type) pair of the given workflow and
    /// cluster is absent.
    pub fn validate_complete(
        &self,
        dag: &WorkflowDag,
        cluster: &Cluster,
    ) -> Result<(), DomainError> {
        for task_id in dag.task_ids() {
            for machine_type in cluster.machine_types() {
                self.lookup(task_id, &machine_type)?;
            }
        }
        Ok(())
    }

    /// Uniformly scaled copy, the stand-in for extrapolating short traces to
    /// long-running workflows.
    pub fn scaled(&self, factor: f64) -> Result<Self, DomainError> {
        let mut out = Self::new();
        for (task, machine, runtime) in self.iter() {
            out.insert(task, machine, runtime * factor)?;
        }
        Ok(out)
    }

    /// Smallest runtime of a task over a set of machine types.
    pub fn min_runtime_over(
        &self,
        task_id: &str,
        machine_types: &[String],
    ) -> Result<f64, DomainError> {
        let mut best = f64::INFINITY;
        for mt in machine_types {
            best = best.min(self.lookup(task_id, mt)?);
        }
        Ok(best)
    }
}

pub fn load_runtime_matrix(path: &Path) -> Result<RuntimeMatrix, DomainError> {
    let text = std::fs::read_to_string(path).map_err(|e| DomainError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let err = |line: usize, reason: String| DomainError::FileFormat {
        path: path.display().to_string(),
        line,
        reason,
    };

    match lines.next() {
        Some((_, header)) if header.trim() == RUNTIMES_HEADER => {}
        Some((_, header)) => {
            return Err(err(1, format!("expected `{RUNTIMES_HEADER}`, got `{}`", header.trim())))
        }
        None => return Err(err(1, "empty file".to_string())),
    }
    match lines.next() {
        Some((_, cols)) if cols.trim() == "task_id,machine_type,runtime_s" => {}
        Some((_, cols)) => return Err(err(2, format!("unexpected column header `{}`", cols.trim()))),
        None => return Err(err(2, "missing column header".to_string())),
    }

    let mut matrix = RuntimeMatrix::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(err(line_no, format!("expected 3 fields, got {}", fields.len())));
        }
        let runtime: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| err(line_no, format!("invalid runtime_s `{}`", fields[2])))?;
        matrix
            .insert(fields[0].trim(), fields[1].trim(), runtime)
            .map_err(|e| err(line_no, e.to_string()))?;
    }
    Ok(matrix)
}

pub fn save_runtime_matrix(matrix: &RuntimeMatrix, path: &Path) -> Result<(), DomainError> {
    let mut out = String::from(RUNTIMES_HEADER);
    out.push('\n');
    out.push_str("task_id,machine_type,runtime_s\n");
    for (task, machine, runtime) in matrix.iter() {
        out.push_str(&format!("{task},{machine},{runtime:.6}\n"));
    }
    std::fs::write(path, out).map_err(|e| DomainError::io(path, e))
}
