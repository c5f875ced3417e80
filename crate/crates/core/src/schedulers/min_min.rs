//! MinMin dispatch: among the ready tasks, repeatedly pick the one whose
//! minimum predicted runtime over the currently fitting nodes is smallest
//! and place it on that fastest node.

use crate::domain::WorkflowDag;

use super::{
    ClusterState, Decision, DispatchPolicy, RuntimeOracle, SchedulerError, SchedulingConfig,
};

pub struct MinMinPolicy<'a> {
    dag: &'a WorkflowDag,
    oracle: &'a dyn RuntimeOracle,
    config: SchedulingConfig,
}

impl<'a> MinMinPolicy<'a> {
    pub fn new(dag: &'a WorkflowDag, oracle: &'a dyn RuntimeOracle, config: SchedulingConfig) -> Self {
        Self { dag, oracle, config }
    }
}

impl DispatchPolicy for MinMinPolicy<'_> {
    fn dispatch(
        &mut self,
        ready: &[String],
        state: &mut ClusterState,
    ) -> Result<Vec<Decision>, SchedulerError> {
        let mut pending: Vec<String> = ready.to_vec();
        let mut decisions = Vec::new();
        loop {
            // (runtime, task, node) minimum over all currently fitting pairs;
            // ties resolved by task id then node id
            let mut best: Option<(f64, String, String)> = None;
            for task_id in &pending {
                let request = &self.dag.task(task_id)?.resource_requests;
                for node_id in state.node_ids().to_vec() {
                    if !state.fits(&node_id, request) {
                        continue;
                    }
                    let predicted = self.oracle.predicted_runtime_s(task_id, &node_id)?;
                    let candidate = (predicted, task_id.clone(), node_id);
                    let better = match &best {
                        None => true,
                        Some((bp, bt, bn)) => candidate
                            .0
                            .partial_cmp(bp)
                            .unwrap()
                            .then_with(|| self.config.tie_break.cmp_ids(&candidate.1, bt))
                            .then_with(|| self.config.tie_break.cmp_ids(&candidate.2, bn))
                            .is_lt(),
                    };
                    if better {
                        best = Some(candidate);
                    }
                }
            }
            match best {
                Some((_, task_id, node_id)) => {
                    let request = self.dag.task(&task_id)?.resource_requests.clone();
                    state.occupy(&node_id, &request);
                    pending.retain(|t| t != &task_id);
                    decisions.push(Decision { task_id, node_id });
                }
                None => break,
            }
        }
        Ok(decisions)
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    #[test]
    fn picks_task_with_smallest_min_runtime_first() {
        let d = dag(vec![task("t1", 1, 1.0), task("t2", 1, 1.0)], &[]);
        let p = profiled(vec![node("n1", "a", 8, 1.0), node("n2", "b", 8, 1.0)]);
        let oracle = TableOracle::new(&[
            ("t1", "n1", 5.0),
            ("t1", "n2", 9.0),
            ("t2", "n1", 12.0),
            ("t2", "n2", 8.0),
        ]);
        let mut policy = MinMinPolicy::new(&d, &oracle, SchedulingConfig::default());
        let mut state = ClusterState::new(p.nodes());
        let ready = vec!["t1".to_string(), "t2".to_string()];
        let decisions = policy.dispatch(&ready, &mut state).unwrap();
        assert_eq!(decisions[0], Decision { task_id: "t1".to_string(), node_id: "n1".to_string() });
        assert_eq!(decisions[1], Decision { task_id: "t2".to_string(), node_id: "n2".to_string() });
    }

    #[test]
    fn equal_minimums_resolve_by_task_id() {
        let d = dag(vec![task("a", 1, 1.0), task("b", 1, 1.0)], &[]);
        let p = profiled(vec![node("n1", "m", 8, 1.0)]);
        let oracle = TableOracle::new(&[("a", "n1", 5.0), ("b", "n1", 5.0)]);
        let mut policy = MinMinPolicy::new(&d, &oracle, SchedulingConfig::default());
        let mut state = ClusterState::new(p.nodes());
        let decisions = policy
            .dispatch(&["a".to_string(), "b".to_string()], &mut state)
            .unwrap();
        assert_eq!(decisions[0].task_id, "a");
    }

    /// Hand-simulated dispatch rule: the fastest node is already full, so
    /// the task must go to the fastest *currently fitting* node.
    #[test]
    fn busy_fastest_node_falls_back_to_fitting_one() {
        let d = dag(vec![task("t1", 8, 1.0), task("t2", 2, 1.0)], &[]);
        let p = profiled(vec![node("n1", "fast", 8, 2.0), node("n2", "slow", 8, 1.0)]);
        let oracle = TableOracle::new(&[
            ("t1", "n1", 5.0),
            ("t1", "n2", 8.0),
            ("t2", "n1", 6.0),
            ("t2", "n2", 20.0),
        ]);
        let mut policy = MinMinPolicy::new(&d, &oracle, SchedulingConfig::default());
        let mut state = ClusterState::new(p.nodes());
        // round 1: t1 -> n1 (min 5.0), filling it; t2's fastest fitting node
        // is then n2 even though n1 would be quicker
        let decisions = policy
            .dispatch(&["t1".to_string(), "t2".to_string()], &mut state)
            .unwrap();
        assert_eq!(
            decisions,
            vec![
                Decision { task_id: "t1".to_string(), node_id: "n1".to_string() },
                Decision { task_id: "t2".to_string(), node_id: "n2".to_string() },
            ]
        );
    }

    #[test]
    fn missing_prediction_propagates() {
        let d = dag(vec![task("t1", 1, 1.0)], &[]);
        let p = profiled(vec![node("n1", "m", 8, 1.0)]);
        let oracle = TableOracle::new(&[]);
        let mut policy = MinMinPolicy::new(&d, &oracle, SchedulingConfig::default());
        let mut state = ClusterState::new(p.nodes());
        let err = policy.dispatch(&["t1".to_string()], &mut state).unwrap_err();
        assert!(matches!(err, SchedulerError::MissingPrediction { .. }));
    }
}
