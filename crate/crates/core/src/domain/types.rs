use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DomainError;

pub const CPUS: &str = "cpus";
pub const MEMORY_BYTES: &str = "memory_bytes";

/// A bag of resource quantities keyed by kind. The default kinds are `cpus`
/// (a count) and `memory_bytes`; further kinds may be added freely.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resources {
    map: BTreeMap<String, u64>,
}

impl Resources {
    pub fn new(cpus: u64, memory_bytes: u64) -> Self {
        let mut map = BTreeMap::new();
        map.insert(CPUS.to_string(), cpus);
        map.insert(MEMORY_BYTES.to_string(), memory_bytes);
        Self { map }
    }

    pub fn with(mut self, kind: &str, quantity: u64) -> Self {
        self.map.insert(kind.to_string(), quantity);
        self
    }

    /// Quantity for a kind; absent kinds count as zero.
    pub fn get(&self, kind: &str) -> u64 {
        self.map.get(kind).copied().unwrap_or(0)
    }

    pub fn cpus(&self) -> u64 {
        self.get(CPUS)
    }

    pub fn memory_bytes(&self) -> u64 {
        self.get(MEMORY_BYTES)
    }

    pub fn kinds(&self) -> impl Iterator<Item = (&str, u64)> {
        self.map.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// True when `capacity` satisfies every kind requested here.
    pub fn fits_within(&self, capacity: &Resources) -> bool {
        self.map.iter().all(|(kind, &qty)| capacity.get(kind) >= qty)
    }

    /// Kinds requested here that `capacity` cannot satisfy.
    pub fn unsatisfied_kinds<'a>(&'a self, capacity: &'a Resources) -> Vec<&'a str> {
        self.map
            .iter()
            .filter(|(kind, &qty)| capacity.get(kind) < qty)
            .map(|(kind, _)| kind.as_str())
            .collect()
    }

    pub fn add_assign(&mut self, other: &Resources) {
        for (kind, &qty) in &other.map {
            *self.map.entry(kind.clone()).or_insert(0) += qty;
        }
    }

    pub fn sub_assign(&mut self, other: &Resources) {
        for (kind, &qty) in &other.map {
            let slot = self.map.entry(kind.clone()).or_insert(0);
            debug_assert!(*slot >= qty, "occupancy underflow on `{kind}`");
            *slot = slot.saturating_sub(qty);
        }
    }
}

/// A workflow task: its resource requests, historical average runtime, and
/// the per-task trace metrics used as model inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub id: String,
    pub resource_requests: Resources,
    /// Mean runtime over historical executions, in seconds.
    pub avg_historical_runtime_s: f64,
    /// Task-side metric values, ordered by the dataset's metric name list.
    pub trace_features: Vec<f64>,
}

impl TaskDescriptor {
    pub(crate) fn validate(&self) -> Result<(), DomainError> {
        if self.id.is_empty() {
            return Err(DomainError::EmptyTaskId);
        }
        if !self.avg_historical_runtime_s.is_finite() || self.avg_historical_runtime_s <= 0.0 {
            return Err(DomainError::InvalidTask {
                id: self.id.clone(),
                reason: format!(
                    "avg_historical_runtime_s must be positive, got {}",
                    self.avg_historical_runtime_s
                ),
            });
        }
        if self.trace_features.iter().any(|v| !v.is_finite()) {
            return Err(DomainError::InvalidTask {
                id: self.id.clone(),
                reason: "trace feature values must be finite".to_string(),
            });
        }
        Ok(())
    }
}

/// A cluster node: static capacities plus raw benchmark results. Benchmark
/// ranks start empty and are filled in by profiling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub id: String,
    pub machine_type: String,
    pub capacities: Resources,
    /// Raw benchmark results, one per benchmarked feature.
    pub benchmark_scores: Vec<f64>,
    /// Dense per-feature ranks (1 = best). Empty until profiling runs.
    #[serde(default)]
    pub benchmark_ranks: Vec<u32>,
}

impl NodeProfile {
    pub fn new(id: &str, machine_type: &str, capacities: Resources, scores: Vec<f64>) -> Self {
        Self {
            id: id.to_string(),
            machine_type: machine_type.to_string(),
            capacities,
            benchmark_scores: scores,
            benchmark_ranks: Vec::new(),
        }
    }

    fn validate(&self) -> Result<(), DomainError> {
        if self.id.is_empty() {
            return Err(DomainError::InvalidNode {
                id: self.id.clone(),
                reason: "node id must be nonempty".to_string(),
            });
        }
        if self.capacities.cpus() == 0 || self.capacities.memory_bytes() == 0 {
            return Err(DomainError::InvalidNode {
                id: self.id.clone(),
                reason: "cpus and memory_bytes capacities must be positive".to_string(),
            });
        }
        if self.benchmark_scores.iter().any(|v| !v.is_finite()) {
            return Err(DomainError::InvalidNode {
                id: self.id.clone(),
                reason: "benchmark scores must be finite".to_string(),
            });
        }
        Ok(())
    }
}

/// A nonempty set of nodes with unique ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    nodes: Vec<NodeProfile>,
}

impl Cluster {
    pub fn new(nodes: Vec<NodeProfile>) -> Result<Self, DomainError> {
        if nodes.is_empty() {
            return Err(DomainError::EmptyCluster);
        }
        let mut seen = std::collections::BTreeSet::new();
        for node in &nodes {
            node.validate()?;
            if !seen.insert(node.id.clone()) {
                return Err(DomainError::DuplicateNodeId(node.id.clone()));
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[NodeProfile] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&NodeProfile> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn machine_types(&self) -> Vec<String> {
        self.nodes
            .iter()
            .map(|n| n.machine_type.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_within_compares_every_requested_kind() {
        let cap = Resources::new(8, 16 << 30);
        assert!(Resources::new(4, 8 << 30).fits_within(&cap));
        assert!(!Resources::new(9, 8 << 30).fits_within(&cap));
        // a kind the capacity does not declare counts as zero
        assert!(!Resources::new(1, 1).with("gpus", 1).fits_within(&cap));
        // zero request for an extra kind is always satisfied
        assert!(Resources::new(1, 1).with("gpus", 0).fits_within(&cap));
    }

    #[test]
    fn occupancy_add_sub_round_trip() {
        let mut used = Resources::default();
        let req = Resources::new(2, 4 << 30);
        used.add_assign(&req);
        used.add_assign(&req);
        assert_eq!(used.cpus(), 4);
        used.sub_assign(&req);
        assert_eq!(used.cpus(), 2);
        assert_eq!(used.memory_bytes(), 4 << 30);
    }

    #[test]
    fn cluster_rejects_duplicates_and_empty() {
        let node = |id: &str| NodeProfile::new(id, "mt", Resources::new(4, 8 << 30), vec![1.0]);
        assert_eq!(Cluster::new(vec![]).unwrap_err(), DomainError::EmptyCluster);
        let err = Cluster::new(vec![node("a"), node("a")]).unwrap_err();
        assert_eq!(err, DomainError::DuplicateNodeId("a".to_string()));
        assert!(Cluster::new(vec![node("a"), node("b")]).is_ok());
    }

    #[test]
    fn node_requires_positive_cpu_and_memory() {
        let bad = NodeProfile::new("n", "mt", Resources::new(0, 8), vec![]);
        assert!(Cluster::new(vec![bad]).is_err());
    }
}
