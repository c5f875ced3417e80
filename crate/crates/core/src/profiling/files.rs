//! Columnar text formats for node profiles and task traces.
//!
//! Node profile file: one record per node; the column header names each
//! benchmark and declares its orientation with a `:higher` / `:lower`
//! suffix:
//!
//! ```text
//! #reshi-profiles v1
//! id,machine_type,cpus,memory_bytes,jtr_hashes_per_s:higher,blk_build_s:lower
//! n1,m5.large,2,8589934592,4400.0,913.0
//! ```
//!
//! Trace file: one row per task execution:
//!
//! ```text
//! #reshi-traces v1
//! task_id,machine_type,runtime_s,cpu_usage_pct,read_bytes
//! align,m5.large,130.25,85.0,12000000.0
//! ```

use std::path::Path;

use crate::domain::{Cluster, NodeProfile, Resources};

use super::{BenchmarkSpec, Orientation, ProfilingError, TaskTraceRecord, TraceSet};

const PROFILES_HEADER: &str = "#reshi-profiles v1";
const TRACES_HEADER: &str = "#reshi-traces v1";

/// A loaded node-profile file: the raw cluster plus its benchmark schema.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSet {
    pub benchmarks: Vec<BenchmarkSpec>,
    pub cluster: Cluster,
}

fn parse_err(path: &Path, row: usize, column: &str, reason: String) -> ProfilingError {
    ProfilingError::Parse {
        path: path.display().to_string(),
        row,
        column: column.to_string(),
        reason,
    }
}

fn read(path: &Path) -> Result<String, ProfilingError> {
    std::fs::read_to_string(path).map_err(|e| ProfilingError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn check_version(path: &Path, line: Option<&str>, expected: &str) -> Result<(), ProfilingError> {
    match line {
        Some(l) if l.trim() == expected => Ok(()),
        Some(l) => Err(parse_err(
            path,
            1,
            "header",
            format!("expected `{expected}`, got `{}`", l.trim()),
        )),
        None => Err(parse_err(path, 1, "header", "empty file".to_string())),
    }
}

pub fn load_profiles(path: &Path) -> Result<ProfileSet, ProfilingError> {
    let text = read(path)?;
    let mut lines = text.lines();
    check_version(path, lines.next(), PROFILES_HEADER)?;

    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 2, "header", "missing column header".to_string()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 4 || columns[..4] != ["id", "machine_type", "cpus", "memory_bytes"] {
        return Err(parse_err(
            path,
            2,
            "header",
            "columns must start with id,machine_type,cpus,memory_bytes".to_string(),
        ));
    }
    let mut benchmarks = Vec::new();
    for col in &columns[4..] {
        let (name, orientation) = match col.rsplit_once(':') {
            Some((name, "higher")) => (name, Orientation::Higher),
            Some((name, "lower")) => (name, Orientation::Lower),
            _ => {
                return Err(parse_err(
                    path,
                    2,
                    col,
                    "benchmark column must end in `:higher` or `:lower`".to_string(),
                ))
            }
        };
        benchmarks.push(BenchmarkSpec {
            name: name.to_string(),
            orientation,
        });
    }

    let mut nodes = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 3;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(parse_err(
                path,
                row,
                "record",
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        let cpus: u64 = fields[2]
            .parse()
            .map_err(|_| parse_err(path, row, "cpus", format!("invalid count `{}`", fields[2])))?;
        let memory: u64 = fields[3].parse().map_err(|_| {
            parse_err(path, row, "memory_bytes", format!("invalid bytes `{}`", fields[3]))
        })?;
        let mut scores = Vec::with_capacity(benchmarks.len());
        for (bench, field) in benchmarks.iter().zip(&fields[4..]) {
            let value: f64 = field.parse().map_err(|_| {
                parse_err(path, row, &bench.name, format!("invalid score `{field}`"))
            })?;
            if !value.is_finite() {
                return Err(parse_err(path, row, &bench.name, "score must be finite".to_string()));
            }
            scores.push(value);
        }
        nodes.push(NodeProfile::new(
            fields[0],
            fields[1],
            Resources::new(cpus, memory),
            scores,
        ));
    }
    if nodes.is_empty() {
        return Err(ProfilingError::EmptyDataset);
    }
    let cluster = Cluster::new(nodes)?;
    Ok(ProfileSet { benchmarks, cluster })
}

pub fn save_profiles(set: &ProfileSet, path: &Path) -> Result<(), ProfilingError> {
    let mut out = String::from(PROFILES_HEADER);
    out.push('\n');
    out.push_str("id,machine_type,cpus,memory_bytes");
    for bench in &set.benchmarks {
        let suffix = match bench.orientation {
            Orientation::Higher => "higher",
            Orientation::Lower => "lower",
        };
        out.push_str(&format!(",{}:{}", bench.name, suffix));
    }
    out.push('\n');
    for node in set.cluster.nodes() {
        out.push_str(&format!(
            "{},{},{},{}",
            node.id,
            node.machine_type,
            node.capacities.cpus(),
            node.capacities.memory_bytes()
        ));
        for score in &node.benchmark_scores {
            out.push_str(&format!(",{score:.6}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| ProfilingError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn load_traces(path: &Path) -> Result<TraceSet, ProfilingError> {
    let text = read(path)?;
    let mut lines = text.lines();
    check_version(path, lines.next(), TRACES_HEADER)?;

    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 2, "header", "missing column header".to_string()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 3 || columns[..3] != ["task_id", "machine_type", "runtime_s"] {
        return Err(parse_err(
            path,
            2,
            "header",
            "columns must start with task_id,machine_type,runtime_s".to_string(),
        ));
    }
    let metric_names: Vec<String> = columns[3..].iter().map(|s| s.to_string()).collect();

    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 3;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(parse_err(
                path,
                row,
                "record",
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        if fields[0].is_empty() {
            return Err(parse_err(path, row, "task_id", "task id must be nonempty".to_string()));
        }
        let runtime: f64 = fields[2].parse().map_err(|_| {
            parse_err(path, row, "runtime_s", format!("invalid runtime `{}`", fields[2]))
        })?;
        if !runtime.is_finite() || runtime <= 0.0 {
            return Err(parse_err(
                path,
                row,
                "runtime_s",
                format!("runtime must be positive, got {runtime}"),
            ));
        }
        let mut metrics = Vec::with_capacity(metric_names.len());
        for (name, field) in metric_names.iter().zip(&fields[3..]) {
            let value: f64 = field
                .parse()
                .map_err(|_| parse_err(path, row, name, format!("invalid metric `{field}`")))?;
            if !value.is_finite() {
                return Err(parse_err(path, row, name, "metric must be finite".to_string()));
            }
            metrics.push(value);
        }
        records.push(TaskTraceRecord {
            task_id: fields[0].to_string(),
            machine_type: fields[1].to_string(),
            runtime_s: runtime,
            metrics,
        });
    }
    if records.is_empty() {
        return Err(ProfilingError::EmptyDataset);
    }
    Ok(TraceSet { metric_names, records })
}

pub fn save_traces(traces: &TraceSet, path: &Path) -> Result<(), ProfilingError> {
    let mut out = String::from(TRACES_HEADER);
    out.push('\n');
    out.push_str("task_id,machine_type,runtime_s");
    for name in &traces.metric_names {
        out.push_str(&format!(",{name}"));
    }
    out.push('\n');
    for record in &traces.records {
        out.push_str(&format!(
            "{},{},{:.6}",
            record.task_id, record.machine_type, record.runtime_s
        ));
        for metric in &record.metrics {
            out.push_str(&format!(",{metric:.6}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| ProfilingError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}
