//! Runtime prediction-error injection.
//!
//! The predicted runtime served to a scheduler is
//! `r_p = r * (1 + s * x * err)` where `r` is the true runtime, `s` is a
//! fair ±1 draw, and `x` is sampled from N(1, 0.5) or Exp(1) depending on
//! the configured distribution. True runtimes are never altered; only the
//! predictions degrade. One sample is drawn per (task, node) pair per
//! simulation so every strategy sees a consistent value.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::domain::{Cluster, RuntimeMatrix, WorkflowDag};
use crate::rng::{derive_seed, SimRng};
use crate::schedulers::{RuntimeOracle, SchedulerError};

use super::SimError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorDistribution {
    #[default]
    None,
    Normal,
    Exponential,
}

impl ErrorDistribution {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "none" => Some(Self::None),
            "normal" => Some(Self::Normal),
            "exponential" => Some(Self::Exponential),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Normal => "normal",
            Self::Exponential => "exponential",
        }
    }
}

/// Mean relative prediction error and its distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrorModel {
    pub distribution: ErrorDistribution,
    /// Mean relative error, e.g. 0.15 for 15%.
    pub err: f64,
}

impl PredictionErrorModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(distribution: ErrorDistribution, err: f64) -> Result<Self, SimError> {
        if !err.is_finite() || err < 0.0 {
            return Err(SimError::InvalidErrorModel(format!(
                "err must be finite and >= 0, got {err}"
            )));
        }
        Ok(Self { distribution, err })
    }

    /// True when predictions pass through unchanged.
    pub fn is_identity(&self) -> bool {
        self.err == 0.0 || self.distribution == ErrorDistribution::None
    }
}

/// The noise formula on fixed samples; the clamp keeps predictions positive.
pub fn apply_error(r: f64, x: f64, sign: f64, err: f64) -> f64 {
    let predicted = r * (1.0 + sign * x * err);
    predicted.max(0.001 * r)
}

/// Draws one error sample and perturbs a true runtime.
pub fn inject_error(
    r: f64,
    model: &PredictionErrorModel,
    rng: &mut SimRng,
) -> Result<f64, SimError> {
    if !r.is_finite() || r <= 0.0 {
        return Err(SimError::NonPositiveRuntime { value: r });
    }
    if model.is_identity() {
        return Ok(r);
    }
    let x = match model.distribution {
        ErrorDistribution::None => unreachable!("identity handled above"),
        // mean 1, standard deviation 0.5; negative draws are kept, the
        // clamp in apply_error handles pathological composites
        ErrorDistribution::Normal => 1.0 + 0.5 * rng.standard_normal(),
        ErrorDistribution::Exponential => rng.exponential(),
    };
    let sign = if rng.coin() { 1.0 } else { -1.0 };
    Ok(apply_error(r, x, sign, model.err))
}

/// Error-injected predictions for every (task, node) pair of a simulation,
/// sampled once up front. Each pair draws from its own seed-derived stream,
/// so values are independent of scheduler query order.
#[derive(Clone, Debug)]
pub struct PredictionCache {
    values: BTreeMap<(String, String), f64>,
}

impl PredictionCache {
    pub fn build(
        dag: &WorkflowDag,
        cluster: &Cluster,
        matrix: &RuntimeMatrix,
        model: &PredictionErrorModel,
        seed: u64,
    ) -> Result<Self, SimError> {
        let mut values = BTreeMap::new();
        for task_id in dag.task_ids() {
            for node in cluster.nodes() {
                let r = matrix.lookup(task_id, &node.machine_type)?;
                let mut rng = SimRng::new(derive_seed(
                    seed,
                    &[b"pred", task_id.as_bytes(), node.id.as_bytes()],
                ));
                let predicted = inject_error(r, model, &mut rng)?;
                values.insert((task_id.to_string(), node.id.clone()), predicted);
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, task_id: &str, node_id: &str) -> Option<f64> {
        self.values
            .get(&(task_id.to_string(), node_id.to_string()))
            .copied()
    }
}

impl RuntimeOracle for PredictionCache {
    fn predicted_runtime_s(&self, task_id: &str, node_id: &str) -> Result<f64, SchedulerError> {
        self.get(task_id, node_id)
            .ok_or_else(|| SchedulerError::MissingPrediction {
                task_id: task_id.to_string(),
                node_id: node_id.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_on_fixed_samples() {
        // r = 100, err = 0.15, x = 1.0, s = +1 -> 115
        assert!((apply_error(100.0, 1.0, 1.0, 0.15) - 115.0).abs() < 1e-9);
        assert!((apply_error(100.0, 1.0, -1.0, 0.15) - 85.0).abs() < 1e-9);
        // clamp floor keeps predictions positive
        assert!((apply_error(100.0, 10.0, -1.0, 0.5) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_error_is_identity() {
        let model = PredictionErrorModel::new(ErrorDistribution::Exponential, 0.0).unwrap();
        let mut rng = SimRng::new(1);
        assert_eq!(inject_error(42.5, &model, &mut rng).unwrap(), 42.5);
        let none = PredictionErrorModel::none();
        assert_eq!(inject_error(42.5, &none, &mut rng).unwrap(), 42.5);
    }

    #[test]
    fn non_positive_runtime_rejected() {
        let model = PredictionErrorModel::none();
        let mut rng = SimRng::new(1);
        assert!(matches!(
            inject_error(0.0, &model, &mut rng),
            Err(SimError::NonPositiveRuntime { .. })
        ));
    }

    #[test]
    fn negative_err_rejected() {
        assert!(PredictionErrorModel::new(ErrorDistribution::Normal, -0.1).is_err());
    }

    /// Numeric-integration oracle for E|X| with X ~ N(1, 0.5): Simpson's
    /// rule over |1 + 0.5 z| * phi(z).
    fn expected_abs_normal() -> f64 {
        let f = |z: f64| {
            let phi = (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            (1.0 + 0.5 * z).abs() * phi
        };
        let (lo, hi, steps) = (-40.0, 40.0, 400_000usize);
        let h = (hi - lo) / steps as f64;
        let mut sum = f(lo) + f(hi);
        for i in 1..steps {
            let z = lo + i as f64 * h;
            sum += if i % 2 == 0 { 2.0 * f(z) } else { 4.0 * f(z) };
        }
        sum * h / 3.0
    }

    #[test]
    fn expected_abs_normal_matches_closed_form() {
        // sigma*sqrt(2/pi)*exp(-mu^2/(2 sigma^2)) + mu*(1 - 2*Phi(-mu/sigma))
        let integral = expected_abs_normal();
        assert!((integral - 1.0084906).abs() < 1e-5, "E|N(1,0.5)| = {integral}");
    }

    #[test]
    fn mean_relative_deviation_matches_distribution_mean() {
        let n = 1_000_000;
        let r = 100.0;

        // Exp(1): E[x] = 1, so mean |r_p - r| / r = err (clamp is
        // irrelevant at err = 0.15 since 1 - x*0.15 > 0.001 for x < 6.66)
        let model = PredictionErrorModel::new(ErrorDistribution::Exponential, 0.15).unwrap();
        let mut rng = SimRng::new(2024);
        let mut sum = 0.0;
        for _ in 0..n {
            let rp = inject_error(r, &model, &mut rng).unwrap();
            sum += (rp - r).abs() / r;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.15).abs() < 0.002, "exponential mean {mean}");

        let model = PredictionErrorModel::new(ErrorDistribution::Normal, 0.15).unwrap();
        let mut rng = SimRng::new(7);
        let mut sum = 0.0;
        for _ in 0..n {
            let rp = inject_error(r, &model, &mut rng).unwrap();
            sum += (rp - r).abs() / r;
        }
        let mean = sum / n as f64;
        let expected = 0.15 * expected_abs_normal();
        assert!(
            (mean - expected).abs() / expected < 0.015,
            "normal mean {mean}, expected {expected}"
        );
    }
}
