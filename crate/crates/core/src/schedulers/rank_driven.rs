//! Rank-driven dispatch: ready tasks are ordered by a queue policy and each
//! is placed on the best currently fitting node of its priority list.
//!
//! Two queue orders are offered: most children first (favors unlocking wide
//! subgraphs) and longest historical mean runtime first. Neither policy ever
//! reads predicted runtimes, so decisions are unaffected by prediction
//! error. Tasks without a historical mean runtime are rejected when the
//! workflow file is loaded, before any dispatching happens.

use std::collections::BTreeMap;

use crate::domain::WorkflowDag;
use crate::profiling::ProfiledCluster;
use crate::recommender::{rank_nodes, PriorityList, RecommenderModel};

use super::{ClusterState, Decision, DispatchPolicy, SchedulerError, SchedulingConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueueOrder {
    /// Descending number of children, ties by ascending task id.
    ChildrenCount,
    /// Descending mean historical runtime, ties by ascending task id.
    AvgRuntime,
}

pub struct RankDrivenPolicy<'a> {
    order: QueueOrder,
    dag: &'a WorkflowDag,
    profiled: &'a ProfiledCluster,
    model: &'a RecommenderModel,
    config: SchedulingConfig,
    lists: BTreeMap<String, PriorityList>,
}

impl<'a> RankDrivenPolicy<'a> {
    pub fn new(
        order: QueueOrder,
        dag: &'a WorkflowDag,
        profiled: &'a ProfiledCluster,
        model: &'a RecommenderModel,
        config: SchedulingConfig,
    ) -> Result<Self, SchedulerError> {
        model.check_schema(&dag.task_metric_names, profiled.benchmarks())?;
        Ok(Self {
            order,
            dag,
            profiled,
            model,
            config,
            lists: BTreeMap::new(),
        })
    }

    fn priority_list(&mut self, task_id: &str) -> Result<&PriorityList, SchedulerError> {
        if !self.lists.contains_key(task_id) {
            let task = self.dag.task(task_id)?;
            let list = rank_nodes(self.model, task, self.profiled)?;
            self.lists.insert(task_id.to_string(), list);
        }
        Ok(&self.lists[task_id])
    }

    fn queue_key(&self, task_id: &str) -> Result<f64, SchedulerError> {
        Ok(match self.order {
            QueueOrder::ChildrenCount => self.dag.children_count(task_id)? as f64,
            QueueOrder::AvgRuntime => self.dag.task(task_id)?.avg_historical_runtime_s,
        })
    }
}

impl DispatchPolicy for RankDrivenPolicy<'_> {
    fn dispatch(
        &mut self,
        ready: &[String],
        state: &mut ClusterState,
    ) -> Result<Vec<Decision>, SchedulerError> {
        let mut queue: Vec<(f64, String)> = ready
            .iter()
            .map(|t| Ok((self.queue_key(t)?, t.clone())))
            .collect::<Result<_, SchedulerError>>()?;
        queue.sort_by(|(ka, ta), (kb, tb)| {
            kb.partial_cmp(ka)
                .unwrap()
                .then_with(|| self.config.tie_break.cmp_ids(ta, tb))
        });

        let mut decisions = Vec::new();
        for (_, task_id) in queue {
            let request = self.dag.task(&task_id)?.resource_requests.clone();
            let list = self.priority_list(&task_id)?;
            let target = list
                .node_ids()
                .find(|node_id| state.fits(node_id, &request))
                .map(str::to_string);
            // no fitting node: move on and let the task wait for the next
            // completion event
            if let Some(node_id) = target {
                state.occupy(&node_id, &request);
                decisions.push(Decision { task_id, node_id });
            }
        }
        Ok(decisions)
    }
}
