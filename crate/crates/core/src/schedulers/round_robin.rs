//! Round-Robin dispatch: tasks leave the queue FIFO, nodes are cycled in
//! fixed id order, skipping nodes that cannot currently fit the request.

use std::collections::{BTreeSet, VecDeque};

use crate::domain::WorkflowDag;
use crate::profiling::ProfiledCluster;

use super::{ClusterState, Decision, DispatchPolicy, SchedulerError};

pub struct RoundRobinPolicy<'a> {
    dag: &'a WorkflowDag,
    queue: VecDeque<String>,
    enqueued: BTreeSet<String>,
    cursor: usize,
}

impl<'a> RoundRobinPolicy<'a> {
    pub fn new(dag: &'a WorkflowDag, _profiled: &'a ProfiledCluster) -> Self {
        Self {
            dag,
            queue: VecDeque::new(),
            enqueued: BTreeSet::new(),
            cursor: 0,
        }
    }
}

impl DispatchPolicy for RoundRobinPolicy<'_> {
    fn dispatch(
        &mut self,
        ready: &[String],
        state: &mut ClusterState,
    ) -> Result<Vec<Decision>, SchedulerError> {
        // newly ready tasks join the tail in ascending id order
        for task_id in ready {
            if self.enqueued.insert(task_id.clone()) {
                self.queue.push_back(task_id.clone());
            }
        }

        let n = state.node_count();
        let mut decisions = Vec::new();
        while let Some(task_id) = self.queue.front().cloned() {
            let request = self.dag.task(&task_id)?.resource_requests.clone();
            let mut placed = None;
            for step in 0..n {
                let idx = (self.cursor + step) % n;
                let node_id = state.node_ids()[idx].clone();
                if state.fits(&node_id, &request) {
                    placed = Some((idx, node_id));
                    break;
                }
            }
            match placed {
                Some((idx, node_id)) => {
                    state.occupy(&node_id, &request);
                    self.cursor = (idx + 1) % n;
                    self.queue.pop_front();
                    decisions.push(Decision { task_id, node_id });
                }
                None if !state.fits_any_total(&request) => {
                    return Err(SchedulerError::NoFit { task_id });
                }
                // head stays queued until capacity frees up; FIFO order is
                // preserved, later tasks do not overtake it
                None => break,
            }
        }
        Ok(decisions)
    }
}
