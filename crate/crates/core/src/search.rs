//! Regularization-strength search toward a target structure size.
//!
//! For each hyperparameter draw, train at the current strength, prune, and
//! count the surviving transitions. Double the strength when the structure
//! is too large, halve it when too small, and stop once the count is within
//! the tolerance of the goal. A draw is abandoned when the strength leaves
//! its bounds, when the doubling/halving starts to cycle, or when training
//! fails; the next draw then starts over from the initial strength.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::prune::{count_transitions, PrunedStructure};
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct LambdaSearchConfig {
    pub goal_transitions: usize,
    pub tolerance: usize,
    pub lambda_lower_bound: f64,
    pub lambda_upper_bound: f64,
    /// Hyperparameter draws to try before giving up.
    pub max_restarts: usize,
    /// Trainings allowed per draw.
    pub max_steps_per_draw: usize,
}

impl Default for LambdaSearchConfig {
    fn default() -> Self {
        LambdaSearchConfig {
            goal_transitions: 20,
            tolerance: 10,
            lambda_lower_bound: 1e-9,
            lambda_upper_bound: 1e2,
            max_restarts: 20,
            max_steps_per_draw: 64,
        }
    }
}

impl LambdaSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_lower_bound > 0.0 && self.lambda_lower_bound < self.lambda_upper_bound) {
            return Err(Error::InvalidConfig(format!(
                "lambda bounds [{}, {}] must be positive and ordered",
                self.lambda_lower_bound, self.lambda_upper_bound
            )));
        }
        if self.goal_transitions == 0 || self.tolerance >= self.goal_transitions {
            return Err(Error::InvalidConfig(format!(
                "tolerance {} must be below the goal of {} transitions",
                self.tolerance, self.goal_transitions
            )));
        }
        if self.max_restarts == 0 || self.max_steps_per_draw == 0 {
            return Err(Error::InvalidConfig("search needs at least one draw and one step".into()));
        }
        Ok(())
    }

    fn accepts(&self, transitions: usize) -> bool {
        transitions.abs_diff(self.goal_transitions) <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchStep {
    pub draw: usize,
    pub lambda: f64,
    pub transitions: usize,
}

/// Why one draw was abandoned.
#[derive(Debug, Clone, PartialEq)]
pub enum DrawFailure {
    /// The strength left `[lower, upper]`.
    OutOfBounds { lambda: f64 },
    /// Doubling and halving revisited a strength already tried.
    Oscillating { lambda: f64 },
    StepLimit,
    Training(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<M> {
    pub lambda: f64,
    pub structure: PrunedStructure,
    pub model: M,
    /// Index of the draw that succeeded.
    pub draw: usize,
    pub steps: Vec<SearchStep>,
    pub failures: Vec<(usize, DrawFailure)>,
}

impl<M> SearchOutcome<M> {
    /// Number of doublings or halvings taken within the successful draw.
    pub fn adjustments(&self) -> usize {
        self.steps.iter().filter(|s| s.draw == self.draw).count() - 1
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("no hyperparameter draw reached {goal} +/- {tolerance} transitions ({} draws failed)", failures.len())]
pub struct SearchError {
    pub goal: usize,
    pub tolerance: usize,
    pub steps: Vec<SearchStep>,
    pub failures: Vec<(usize, DrawFailure)>,
}

/// Runs the doubling/halving search.
///
/// `fit` trains under one draw at one strength and returns the pruned
/// structure together with whatever model the caller wants back. Draws are
/// tried in the given order, at most `config.max_restarts` of them.
pub fn lambda_search<M, F>(
    config: &LambdaSearchConfig,
    draws: &[TrainConfig],
    initial_lambda: f64,
    mut fit: F,
) -> Result<core::result::Result<SearchOutcome<M>, SearchError>>
where
    F: FnMut(&TrainConfig, f64) -> Result<(PrunedStructure, M)>,
{
    config.validate()?;
    if draws.is_empty() {
        return Err(Error::InvalidConfig("lambda search needs at least one draw".into()));
    }
    let mut steps = Vec::new();
    let mut failures = Vec::new();
    for (draw, train_config) in draws.iter().enumerate().take(config.max_restarts) {
        let mut exponent: i32 = 0;
        let mut visited: Vec<i32> = Vec::new();
        let failure = loop {
            let lambda = libm::ldexp(initial_lambda, exponent);
            if !(lambda >= config.lambda_lower_bound && lambda <= config.lambda_upper_bound) {
                break DrawFailure::OutOfBounds { lambda };
            }
            if visited.contains(&exponent) {
                break DrawFailure::Oscillating { lambda };
            }
            if visited.len() >= config.max_steps_per_draw {
                break DrawFailure::StepLimit;
            }
            visited.push(exponent);
            let (structure, model) = match fit(train_config, lambda) {
                Ok(fitted) => fitted,
                Err(e) => break DrawFailure::Training(e),
            };
            let transitions = count_transitions(&structure);
            log::info!("search draw={draw} lambda={lambda:e} transitions={transitions}");
            steps.push(SearchStep {
                draw,
                lambda,
                transitions,
            });
            if config.accepts(transitions) {
                return Ok(Ok(SearchOutcome {
                    lambda,
                    structure,
                    model,
                    draw,
                    steps,
                    failures,
                }));
            }
            exponent += if transitions > config.goal_transitions { 1 } else { -1 };
        };
        log::warn!("search draw={draw} abandoned: {failure:?}");
        failures.push((draw, failure));
    }
    Ok(Err(SearchError {
        goal: config.goal_transitions,
        tolerance: config.tolerance,
        steps,
        failures,
    }))
}

/// `count` configurations sampled uniformly from the hyperparameter ranges,
/// sorted by increasing learning rate. Each draw gets its own seed.
pub fn sample_draws<R: Rng + ?Sized>(base: &TrainConfig, count: usize, rng: &mut R) -> Vec<TrainConfig> {
    let mut draws: Vec<TrainConfig> = (0..count)
        .map(|i| TrainConfig {
            learning_rate: rng.random_range(7e-3..=0.5),
            embedding_dropout: rng.random_range(0.0..=0.5),
            recurrent_dropout: rng.random_range(0.0..=0.5),
            vertical_dropout: rng.random_range(0.0..=0.5),
            l2_classifier: rng.random_range(0.0..=0.5),
            weight_decay: rng.random_range(1e-7..=1e-5),
            seed: base.seed.wrapping_add(i as u64 + 1),
            ..base.clone()
        })
        .collect();
    draws.sort_by(|a, b| a.learning_rate.total_cmp(&b.learning_rate));
    draws
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Monotone size oracle: one transition lost per doubling, centred so
    /// that `lambda = 10^-3.5` gives 20 transitions.
    fn simulated_size(lambda: f64) -> usize {
        let centre = libm::pow(10.0, -3.5);
        let size = 20.0 - libm::log2(lambda / centre);
        libm::round(size).clamp(0.0, 96.0) as usize
    }

    fn oracle(_: &TrainConfig, lambda: f64) -> Result<(PrunedStructure, f64)> {
        Ok((
            PrunedStructure {
                surviving_states: vec![simulated_size(lambda)],
            },
            lambda,
        ))
    }

    #[test]
    fn converges_from_any_start_within_ten_steps() {
        let config = LambdaSearchConfig::default();
        let draws = [TrainConfig::default()];
        for e in -90..=20 {
            let start = libm::pow(10.0, e as f64 / 10.0);
            let outcome = lambda_search(&config, &draws, start, oracle).unwrap().unwrap();
            assert!(outcome.adjustments() <= 10, "start {start:e}: {}", outcome.adjustments());
            assert!(count_transitions(&outcome.structure).abs_diff(20) <= 10);
            assert!(outcome.lambda >= 1e-9 && outcome.lambda <= 1e2);
        }
    }

    #[test]
    fn goal_already_met_returns_initial_lambda() {
        let config = LambdaSearchConfig::default();
        let outcome = lambda_search(&config, &[TrainConfig::default()], 3e-4, oracle)
            .unwrap()
            .unwrap();
        assert_eq!(outcome.lambda, 3e-4);
        assert_eq!(outcome.steps.len(), 1);
    }

    #[test]
    fn unreachable_goal_reports_bound_exit() {
        let config = LambdaSearchConfig::default();
        let stuck = |_: &TrainConfig, lambda: f64| -> Result<(PrunedStructure, f64)> {
            Ok((PrunedStructure { surviving_states: vec![50] }, lambda))
        };
        let err = lambda_search(&config, &vec![TrainConfig::default(); 3], 1e-3, stuck)
            .unwrap()
            .unwrap_err();
        assert_eq!(err.failures.len(), 3);
        for (_, f) in &err.failures {
            match f {
                DrawFailure::OutOfBounds { lambda } => assert!(*lambda > 1e2),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn too_small_structure_halves_past_lower_bound() {
        let config = LambdaSearchConfig::default();
        let empty = |_: &TrainConfig, lambda: f64| -> Result<(PrunedStructure, f64)> {
            Ok((PrunedStructure { surviving_states: vec![0] }, lambda))
        };
        let err = lambda_search(&config, &[TrainConfig::default()], 1e-3, empty)
            .unwrap()
            .unwrap_err();
        assert!(matches!(err.failures[0].1, DrawFailure::OutOfBounds { lambda } if lambda < 1e-9));
    }

    #[test]
    fn start_outside_bounds_fails_immediately() {
        let config = LambdaSearchConfig::default();
        let err = lambda_search(&config, &[TrainConfig::default()], 1e3, oracle)
            .unwrap()
            .unwrap_err();
        assert!(err.steps.is_empty());
    }

    #[test]
    fn oscillation_detected() {
        // jumps straight over the window [15, 25]
        let config = LambdaSearchConfig {
            goal_transitions: 20,
            tolerance: 5,
            ..LambdaSearchConfig::default()
        };
        let jumpy = |_: &TrainConfig, lambda: f64| -> Result<(PrunedStructure, f64)> {
            let size = if lambda < 1e-3 { 40 } else { 2 };
            Ok((PrunedStructure { surviving_states: vec![size] }, lambda))
        };
        let err = lambda_search(&config, &[TrainConfig::default()], 1e-4, jumpy)
            .unwrap()
            .unwrap_err();
        assert!(matches!(err.failures[0].1, DrawFailure::Oscillating { .. }));
    }

    #[test]
    fn failed_draw_moves_to_next() {
        let config = LambdaSearchConfig::default();
        let draws = [
            TrainConfig { seed: 1, ..TrainConfig::default() },
            TrainConfig { seed: 2, ..TrainConfig::default() },
        ];
        let fit = |c: &TrainConfig, lambda: f64| -> Result<(PrunedStructure, f64)> {
            if c.seed == 1 {
                Err(Error::Overflow { timestep: 1 })
            } else {
                oracle(c, lambda)
            }
        };
        let outcome = lambda_search(&config, &draws, 1e-2, fit).unwrap().unwrap();
        assert_eq!(outcome.draw, 1);
        assert!(matches!(outcome.failures[0].1, DrawFailure::Training(_)));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = LambdaSearchConfig {
            goal_transitions: 5,
            tolerance: 10,
            ..LambdaSearchConfig::default()
        };
        assert!(lambda_search(&bad, &[TrainConfig::default()], 1e-3, oracle).is_err());
        assert!(lambda_search(&LambdaSearchConfig::default(), &[], 1e-3, oracle).is_err());
    }

    #[test]
    fn draws_are_sorted_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draws = sample_draws(&TrainConfig::default(), 20, &mut rng);
        assert_eq!(draws.len(), 20);
        for pair in draws.windows(2) {
            assert!(pair[0].learning_rate <= pair[1].learning_rate);
        }
        for d in &draws {
            d.validate().unwrap();
        }
    }
}
