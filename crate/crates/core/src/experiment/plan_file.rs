//! Experiment plan document: a single declarative JSON file naming the
//! inputs and sweep dimensions. Paths are resolved relative to the plan
//! file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::load_workflow;
use crate::profiling::load_profiles;
use crate::recommender::load_model;
use crate::schedulers::Strategy;
use crate::simulator::ErrorDistribution;

use super::{ExperimentError, ExperimentPlan, MachineCatalog};

const PLAN_FORMAT: &str = "reshi-plan";
const PLAN_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorkflowRef {
    Path(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanDoc {
    pub format: String,
    pub version: u32,
    /// Workflow document paths.
    pub workflows: Vec<String>,
    /// Node-profile file with one row per machine type.
    pub catalog: String,
    /// Runtime matrix path.
    pub runtimes: String,
    /// Trained model path; required when any rank-driven strategy runs.
    #[serde(default)]
    pub model: Option<String>,
    pub cluster_count: usize,
    pub nodes_per_cluster: usize,
    pub strategies: Vec<String>,
    pub distributions: Vec<String>,
    pub error_levels: Vec<f64>,
    pub master_seed: u64,
    #[serde(default)]
    pub bandwidth_bytes_per_s: Option<f64>,
}

impl PlanDoc {
    pub fn new_v1() -> Self {
        Self {
            format: PLAN_FORMAT.to_string(),
            version: PLAN_VERSION,
            workflows: Vec::new(),
            catalog: String::new(),
            runtimes: String::new(),
            model: None,
            cluster_count: 200,
            nodes_per_cluster: 40,
            strategies: Strategy::ALL.iter().map(|s| s.name().to_string()).collect(),
            distributions: vec!["normal".to_string(), "exponential".to_string()],
            error_levels: vec![0.0, 0.15],
            master_seed: 1,
            bandwidth_bytes_per_s: None,
        }
    }
}

/// Loads and fully resolves a plan: parses the document and reads every
/// referenced input.
pub fn load_plan(path: &Path) -> Result<ExperimentPlan, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let doc: PlanDoc = serde_json::from_str(&text).map_err(|e| ExperimentError::Format {
        path: path.display().to_string(),
        line: e.line(),
        reason: e.to_string(),
    })?;
    if doc.format != PLAN_FORMAT || doc.version != PLAN_VERSION {
        return Err(ExperimentError::Format {
            path: path.display().to_string(),
            line: 1,
            reason: format!(
                "expected format `{PLAN_FORMAT}` version {PLAN_VERSION}, got `{}` version {}",
                doc.format, doc.version
            ),
        });
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve_plan(&doc, base)
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub(crate) fn resolve_plan(doc: &PlanDoc, base: &Path) -> Result<ExperimentPlan, ExperimentError> {
    let workflows = doc
        .workflows
        .iter()
        .map(|rel| load_workflow(&resolve(base, rel)))
        .collect::<Result<Vec<_>, _>>()?;
    let catalog = MachineCatalog::from_profiles(&load_profiles(&resolve(base, &doc.catalog))?)?;
    let matrix = crate::domain::load_runtime_matrix(&resolve(base, &doc.runtimes))?;
    let model = doc
        .model
        .as_ref()
        .map(|rel| load_model(&resolve(base, rel)))
        .transpose()?;
    let strategies = doc
        .strategies
        .iter()
        .map(|s| Strategy::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    let distributions = doc
        .distributions
        .iter()
        .map(|d| {
            ErrorDistribution::parse(d)
                .ok_or_else(|| ExperimentError::Validation(format!("unknown distribution `{d}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let plan = ExperimentPlan {
        workflows,
        catalog,
        matrix,
        model,
        cluster_count: doc.cluster_count,
        nodes_per_cluster: doc.nodes_per_cluster,
        strategies,
        distributions,
        error_levels: doc.error_levels.clone(),
        master_seed: doc.master_seed,
        bandwidth_bytes_per_s: doc.bandwidth_bytes_per_s,
    };
    plan.validate()?;
    Ok(plan)
}

pub fn save_plan_doc(doc: &PlanDoc, path: &Path) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(doc).expect("plan doc serializes");
    super::write_file(path, &text)
}
