use std::sync::Arc;

use crate::concept::Action;
use crate::engines::{noise_seed, Command, EnginePipeline};
use crate::sequencer::{
    Mode, RewardConfig, Sequencer, SequencerError, TaskRegistry, TaskSequence,
};
use crate::world::{observable_projection, Observation, ObservableState, WorldState};

use super::{resample_seed, TrainError, MAX_RESET_ATTEMPTS};

struct Episode {
    seed: u64,
    start: WorldState,
    start_observable: ObservableState,
    world: WorldState,
    steps: usize,
    done: bool,
}

/// The task under training in a sequence, exposed as a reset/step
/// environment. Reset runs the pre-sequent tasks with their frozen policies;
/// each step advances the pipeline once under the caller's command.
pub struct TrainingEnv {
    registry: Arc<TaskRegistry>,
    pipeline: EnginePipeline,
    sequence: TaskSequence,
    reward: RewardConfig,
    episode: Option<Episode>,
}

impl TrainingEnv {
    pub fn new(
        registry: Arc<TaskRegistry>,
        pipeline: EnginePipeline,
        sequence: TaskSequence,
        reward: RewardConfig,
    ) -> Result<Self, TrainError> {
        let Mode::Train(k) = sequence.mode else {
            return Err(SequencerError::WrongMode("train").into());
        };
        for id in &sequence.tasks {
            if registry.get(id).is_none() {
                return Err(SequencerError::UnknownTask(id.clone()).into());
            }
        }
        if k >= sequence.tasks.len() {
            return Err(SequencerError::TrainIndex {
                index: k,
                len: sequence.tasks.len(),
            }
            .into());
        }
        Ok(Self {
            registry,
            pipeline,
            sequence,
            reward,
            episode: None,
        })
    }

    fn task_id(&self) -> &str {
        let Mode::Train(k) = self.sequence.mode else {
            unreachable!("checked in new")
        };
        &self.sequence.tasks[k]
    }

    /// Starts an episode and returns the first observation of the task under
    /// training. Infeasible starts are resampled with derived seeds.
    pub fn reset(&mut self, episode_seed: u64) -> Result<Observation, TrainError> {
        self.episode = None;
        for attempt in 0..MAX_RESET_ATTEMPTS {
            let seed = resample_seed(episode_seed, attempt);
            let prepared = Sequencer::new(&self.registry, &mut self.pipeline)
                .with_reward(self.reward)
                .prepare_training(&self.sequence, seed)?;
            let start = match prepared {
                Ok((start, _)) => start,
                Err(outcome) => {
                    log::debug!("reset attempt {attempt} infeasible: {outcome:?}");
                    continue;
                }
            };
            let observation = self.pipeline.observe(&start, seed)?;
            self.episode = Some(Episode {
                seed,
                start_observable: observable_projection(&start, noise_seed(seed, start.time_step)),
                world: start.clone(),
                start,
                steps: 0,
                done: false,
            });
            return Ok(observation);
        }
        Err(TrainError::ResetExhausted(MAX_RESET_ATTEMPTS))
    }

    /// Advances one step. Returns the observation, the step reward (with the
    /// terminal bonus or penalty folded in on the last step) and whether the
    /// episode ended.
    pub fn step(&mut self, action: &Action) -> Result<(Observation, f64, bool), TrainError> {
        let registry = Arc::clone(&self.registry);
        let task_id = self.task_id().to_string();
        let model = &registry.get(&task_id).expect("checked in new").model;
        let ep = self.episode.as_mut().ok_or(TrainError::NotReset)?;
        if ep.done {
            return Err(TrainError::EpisodeDone);
        }
        let command = if action.terminate {
            Command::zero()
        } else {
            action.command.clamped()
        };
        let (world, observation) = self.pipeline.step(&ep.world, &command, ep.seed)?;
        ep.world = world;
        ep.steps += 1;
        let observable = observable_projection(&ep.world, noise_seed(ep.seed, ep.world.time_step));
        let cost = model.necessary_cost(&ep.start_observable, &observable);

        let reward = if action.terminate {
            let (start, end, seed) = (ep.start.clone(), ep.world.clone(), ep.seed);
            ep.done = true;
            let ok = Sequencer::new(&registry, &mut self.pipeline)
                .with_reward(self.reward)
                .evaluate_sufficient(&self.sequence, &start, &end, seed)?;
            self.reward.step_reward(cost, true, Some(ok))
        } else if ep.steps >= model.max_steps {
            ep.done = true;
            self.reward.timeout_reward(cost)
        } else {
            self.reward.step_reward(cost, false, None)
        };
        let done = self.episode.as_ref().is_some_and(|e| e.done);
        Ok((observation, reward, done))
    }

    /// Current world of the running episode.
    pub fn world(&self) -> Option<&WorldState> {
        self.episode.as_ref().map(|e| &e.world)
    }

    /// Observable state of the running episode, as a policy without
    /// privileged access would see it.
    pub fn observable(&self) -> Option<ObservableState> {
        self.episode
            .as_ref()
            .map(|e| observable_projection(&e.world, noise_seed(e.seed, e.world.time_step)))
    }
}
