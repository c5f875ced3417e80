use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{DomainError, TaskDescriptor};

/// A directed data dependency between two tasks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    /// Bytes moved from producer to consumer; 0 when unknown.
    #[serde(default)]
    pub data_volume_bytes: u64,
}

impl Edge {
    pub fn new(from: &str, to: &str) -> Self {
        Self {
            from: from.to_string(),
            to: to.to_string(),
            data_volume_bytes: 0,
        }
    }

    pub fn with_volume(mut self, bytes: u64) -> Self {
        self.data_volume_bytes = bytes;
        self
    }
}

/// A validated workflow: tasks plus acyclic precedence edges.
///
/// Construction enforces unique task ids, existing edge endpoints, no self
/// or duplicate edges, acyclicity, and a uniform trace-feature length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkflowDag {
    pub name: String,
    /// Names of the task-side metrics, defining trace_features order.
    pub task_metric_names: Vec<String>,
    tasks: BTreeMap<String, TaskDescriptor>,
    edges: Vec<Edge>,
    children: BTreeMap<String, Vec<String>>,
    parents: BTreeMap<String, Vec<String>>,
}

impl WorkflowDag {
    pub fn new(
        name: &str,
        task_metric_names: Vec<String>,
        tasks: Vec<TaskDescriptor>,
        edges: Vec<Edge>,
    ) -> Result<Self, DomainError> {
        let mut task_map = BTreeMap::new();
        for task in tasks {
            task.validate()?;
            if task.trace_features.len() != task_metric_names.len() {
                return Err(DomainError::InvalidTask {
                    id: task.id.clone(),
                    reason: format!(
                        "expected {} trace features, got {}",
                        task_metric_names.len(),
                        task.trace_features.len()
                    ),
                });
            }
            if task_map.insert(task.id.clone(), task.clone()).is_some() {
                return Err(DomainError::DuplicateTaskId(task.id));
            }
        }

        let mut children: BTreeMap<String, Vec<String>> =
            task_map.keys().map(|id| (id.clone(), Vec::new())).collect();
        let mut parents: BTreeMap<String, Vec<String>> = children.clone();
        let mut seen_edges = BTreeSet::new();
        for edge in &edges {
            for endpoint in [&edge.from, &edge.to] {
                if !task_map.contains_key(endpoint) {
                    return Err(DomainError::UnknownEdgeEndpoint(endpoint.clone()));
                }
            }
            if edge.from == edge.to {
                return Err(DomainError::SelfEdge(edge.from.clone()));
            }
            if !seen_edges.insert((edge.from.clone(), edge.to.clone())) {
                return Err(DomainError::DuplicateEdge {
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                });
            }
            children.get_mut(&edge.from).unwrap().push(edge.to.clone());
            parents.get_mut(&edge.to).unwrap().push(edge.from.clone());
        }
        for list in children.values_mut().chain(parents.values_mut()) {
            list.sort();
        }

        let dag = Self {
            name: name.to_string(),
            task_metric_names,
            tasks: task_map,
            edges,
            children,
            parents,
        };
        dag.toposort()?; // rejects cycles
        Ok(dag)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskDescriptor> {
        self.tasks.values()
    }

    pub fn task_ids(&self) -> impl Iterator<Item = &str> {
        self.tasks.keys().map(|s| s.as_str())
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn task(&self, id: &str) -> Result<&TaskDescriptor, DomainError> {
        self.tasks
            .get(id)
            .ok_or_else(|| DomainError::UnknownTask(id.to_string()))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn children(&self, id: &str) -> Result<&[String], DomainError> {
        self.children
            .get(id)
            .map(|v| v.as_slice())
            .ok_or_else(|| DomainError::UnknownTask(id.to_string()))
    }

    pub fn parents(&self, id: &str) -> Result<&[String], DomainError> {
        self.parents
            .get(id)
            .map(|v| v.as_slice())
            .ok_or_else(|| DomainError::UnknownTask(id.to_string()))
    }

    /// Out-degree of a task.
    pub fn children_count(&self, id: &str) -> Result<usize, DomainError> {
        self.children(id).map(|c| c.len())
    }

    /// Producer-before-consumer order, ties broken by ascending task id.
    /// Infallible here because construction already rejected cycles.
    pub fn topological_order(&self) -> Vec<String> {
        self.toposort().expect("validated dag cannot contain a cycle")
    }

    fn toposort(&self) -> Result<Vec<String>, DomainError> {
        let mut indegree: BTreeMap<&str, usize> = self
            .parents
            .iter()
            .map(|(id, ps)| (id.as_str(), ps.len()))
            .collect();
        let mut ready: BTreeSet<&str> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut order = Vec::with_capacity(self.tasks.len());
        while let Some(&id) = ready.iter().next() {
            ready.remove(id);
            order.push(id.to_string());
            for child in &self.children[id] {
                let d = indegree.get_mut(child.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(child);
                }
            }
        }
        if order.len() != self.tasks.len() {
            let remaining: BTreeSet<&str> = indegree
                .iter()
                .filter(|(_, &d)| d > 0)
                .map(|(&id, _)| id)
                .collect();
            let offending = self
                .edges
                .iter()
                .find(|e| remaining.contains(e.from.as_str()) && remaining.contains(e.to.as_str()))
                .expect("a cycle must contain an edge between unordered tasks");
            return Err(DomainError::CycleDetected {
                from: offending.from.clone(),
                to: offending.to.clone(),
            });
        }
        Ok(order)
    }

    /// The unfinished tasks whose predecessors are all finished.
    pub fn ready_tasks(&self, finished: &BTreeSet<String>) -> BTreeSet<String> {
        self.tasks
            .keys()
            .filter(|id| !finished.contains(*id))
            .filter(|id| self.parents[*id].iter().all(|p| finished.contains(p)))
            .cloned()
            .collect()
    }
}
