//! Episodic training environment over a training sequence, and a
//! cross-entropy-method trainer for parameterized policies.

mod cem;
mod env;

use std::sync::Arc;

use thiserror::Error;

use crate::engines::{ConfigurationError, EnginePipeline, PipelineError, PipelineSpec};
use crate::seed;
use crate::sequencer::{
    goals_satisfied, Outcome, RewardConfig, Sequencer, SequencerError, TaskRegistry, TaskSequence,
};

pub use cem::{cem_train, IterationStats, TrainConfig, TrainReport};
pub use env::TrainingEnv;

/// Infeasible starts tolerated before a reset gives up.
pub const MAX_RESET_ATTEMPTS: u32 = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("no feasible start after {0} attempts")]
    ResetExhausted(u32),
    #[error("step called on a finished episode")]
    EpisodeDone,
    #[error("step called before reset")]
    NotReset,
    #[error(transparent)]
    Sequencer(#[from] SequencerError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Configuration(#[from] ConfigurationError),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Policy(String),
}

/// Seed of attempt `attempt` of an episode whose earlier attempts were infeasible.
pub fn resample_seed(episode_seed: u64, attempt: u32) -> u64 {
    if attempt == 0 {
        episode_seed
    } else {
        seed::derive(episode_seed, &[seed::label("resample"), u64::from(attempt)])
    }
}

/// Scalar objective maximized by [`cem_train`]: the return of one seeded
/// episode for a parameter vector.
pub trait EpisodeObjective {
    fn episode_return(&mut self, params: &[f64], episode_seed: u64) -> Result<f64, TrainError>;
}

/// Training-episode returns of the task under training in a sequence.
pub struct SequenceObjective {
    pub registry: Arc<TaskRegistry>,
    pub pipeline: EnginePipeline,
    pub sequence: TaskSequence,
    pub reward: RewardConfig,
}

impl SequenceObjective {
    pub fn new(
        registry: Arc<TaskRegistry>,
        spec: &PipelineSpec,
        sequence: TaskSequence,
        reward: RewardConfig,
    ) -> Result<Self, TrainError> {
        Ok(Self {
            registry,
            pipeline: EnginePipeline::from_spec(spec)?,
            sequence,
            reward,
        })
    }
}

impl EpisodeObjective for SequenceObjective {
    fn episode_return(&mut self, params: &[f64], episode_seed: u64) -> Result<f64, TrainError> {
        let mut seq = Sequencer::new(&self.registry, &mut self.pipeline).with_reward(self.reward);
        for attempt in 0..MAX_RESET_ATTEMPTS {
            let result = seq.run_training_episode(&self.sequence, params, resample_seed(episode_seed, attempt))?;
            if let Some(ret) = result.ret {
                return Ok(ret);
            }
            if let Outcome::Infeasible { task, reason } = &result.outcome {
                log::debug!("attempt {attempt}: infeasible start at {task}: {reason}");
            }
        }
        Err(TrainError::ResetExhausted(MAX_RESET_ATTEMPTS))
    }
}

/// Seed of evaluation episode `i`.
pub fn evaluation_seed(seed: u64, i: u64) -> u64 {
    seed::derive(seed, &[seed::label("evaluate"), i])
}

/// Fraction of `n_episodes` execute-mode episodes that succeed with every
/// full-state goal met. Learned tasks use the parameters frozen in the
/// registry. Zero episodes score 0.
pub fn evaluate(
    registry: &TaskRegistry,
    pipeline: &mut EnginePipeline,
    seq: &TaskSequence,
    n_episodes: u64,
    seed: u64,
) -> Result<f64, TrainError> {
    if n_episodes == 0 {
        log::warn!("evaluate called with zero episodes; success rate defined as 0");
        return Ok(0.0);
    }
    let mut sequencer = Sequencer::new(registry, pipeline);
    let mut successes = 0u64;
    for i in 0..n_episodes {
        let result = sequencer.run_sequence(seq, None, evaluation_seed(seed, i))?;
        if result.outcome.is_success() && goals_satisfied(registry, &result) {
            successes += 1;
        }
    }
    Ok(successes as f64 / n_episodes as f64)
}

/// [`evaluate`] with `params` installed for task `task_id`.
pub fn evaluate_params(
    registry: &TaskRegistry,
    task_id: &str,
    params: &[f64],
    seq: &TaskSequence,
    n_episodes: u64,
    seed: u64,
) -> Result<f64, TrainError> {
    let mut registry = registry.clone();
    if !registry.set_params(task_id, params.to_vec()) {
        return Err(SequencerError::UnknownTask(task_id.to_string()).into());
    }
    evaluate(&registry, &mut EnginePipeline::local(), seq, n_episodes, seed)
}
