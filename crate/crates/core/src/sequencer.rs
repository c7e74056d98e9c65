//! Chooses and switches between task blocks. Execute mode runs a sequence
//! front to back, switching on each policy's terminate signal; training mode
//! runs the pre-sequent tasks, steps the task under training with candidate
//! parameters, and scores its terminate signal by running the subsequent
//! tasks on a copy of the world.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concept::{
    ConceptModel, InitialSource, Policy, PolicyView, SubsequentRunner, SufficientGoal,
};
use crate::engines::{noise_seed, Command, EnginePipeline, PipelineError};
use crate::seed;
use crate::tasks::{build_model, TaskError, MODEL_KEYS};
use crate::wire::hexfloat::{serde_f64, serde_option_f64};
use crate::world::{observable_projection, Observation, ObservableState, WorldState};

/// Weight of the necessary cost in the per-step reward.
pub const ALPHA: f64 = 1.0;
pub const STEP_COST: f64 = 0.01;
/// Terminal bonus when the sufficient goal holds after terminate.
pub const SUCCESS_BONUS: f64 = 10.0;
/// Terminal penalty for an unsatisfied terminate or a timeout.
pub const FAILURE_PENALTY: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub alpha: f64,
    pub step_cost: f64,
    pub success_bonus: f64,
    pub failure_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: ALPHA,
            step_cost: STEP_COST,
            success_bonus: SUCCESS_BONUS,
            failure_penalty: FAILURE_PENALTY,
        }
    }
}

impl RewardConfig {
    /// `−α·cost − c_step`, plus `B` or `−P` on the terminating step.
    /// `sufficient` must be present exactly when `terminated` is.
    pub fn step_reward(&self, cost_nec: f64, terminated: bool, sufficient: Option<bool>) -> f64 {
        debug_assert_eq!(terminated, sufficient.is_some());
        let shaping = -self.alpha * cost_nec - self.step_cost;
        match (terminated, sufficient) {
            (true, Some(true)) => shaping + self.success_bonus,
            (true, _) => shaping - self.failure_penalty,
            (false, _) => shaping,
        }
    }

    /// Reward of the last step of a task that ran out of steps.
    pub fn timeout_reward(&self, cost_nec: f64) -> f64 {
        self.step_reward(cost_nec, false, None) - self.failure_penalty
    }
}

pub fn step_reward(cost_nec: f64, terminated: bool, sufficient: Option<bool>) -> f64 {
    RewardConfig::default().step_reward(cost_nec, terminated, sufficient)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Execute,
    /// Index into the sequence of the task under training.
    Train(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSequence {
    pub tasks: Vec<String>,
    pub mode: Mode,
}

impl TaskSequence {
    pub fn execute<S: Into<String>>(tasks: impl IntoIterator<Item = S>) -> Self {
        Self {
            tasks: tasks.into_iter().map(Into::into).collect(),
            mode: Mode::Execute,
        }
    }

    pub fn train<S: Into<String>>(tasks: impl IntoIterator<Item = S>, index: usize) -> Self {
        Self {
            tasks: tasks.into_iter().map(Into::into).collect(),
            mode: Mode::Train(index),
        }
    }
}

/// A task definition: its concept model and, for learned models, frozen parameters.
#[derive(Debug, Clone)]
pub struct TaskSlot {
    pub model: ConceptModel,
    pub params: Option<Vec<f64>>,
}

/// Task ids of a scenario mapped to their definitions.
#[derive(Debug, Clone, Default)]
pub struct TaskRegistry {
    slots: BTreeMap<String, TaskSlot>,
}

impl TaskRegistry {
    /// Every built-in model under its own key, with default parameters.
    pub fn standard() -> Self {
        let mut r = Self::default();
        for key in MODEL_KEYS {
            r.insert(key, build_model(key, &BTreeMap::new()).expect("built-in model"), None);
        }
        r
    }

    pub fn insert(&mut self, id: &str, model: ConceptModel, params: Option<Vec<f64>>) {
        self.slots.insert(id.to_string(), TaskSlot { model, params });
    }

    pub fn with_model(mut self, id: &str, key: &str, overrides: &[(&str, f64)]) -> Result<Self, TaskError> {
        let o = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self.insert(id, build_model(key, &o)?, None);
        Ok(self)
    }

    pub fn set_params(&mut self, id: &str, params: Vec<f64>) -> bool {
        match self.slots.get_mut(id) {
            Some(slot) => {
                slot.params = Some(params);
                true
            }
            None => false,
        }
    }

    pub fn get(&self, id: &str) -> Option<&TaskSlot> {
        self.slots.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }
}

/// One pipeline step of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepLog {
    pub time_step: u64,
    pub task_id: String,
    pub world: WorldState,
    pub observation: Observation,
    pub command: Command,
    pub terminate: bool,
    #[serde(with = "serde_f64")]
    pub necessary_cost: f64,
    #[serde(with = "serde_f64")]
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    TaskTimeout { task: String },
    Infeasible { task: String, reason: String },
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Self::Success)
    }
}

/// Start and end world of one task in an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpan {
    pub task_id: String,
    pub start: WorldState,
    pub end: WorldState,
    pub steps: usize,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub trajectory: Vec<StepLog>,
    pub spans: Vec<TaskSpan>,
    /// Sum of the trained task's step rewards (training episodes only).
    pub ret: Option<f64>,
    /// Result of the sufficient-goal evaluation (training episodes only).
    pub sufficient: Option<bool>,
    pub sufficient_evaluations: u32,
}

/// Trailing line of a trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: u64,
    pub goals_satisfied: bool,
    #[serde(rename = "return", with = "serde_option_f64")]
    pub ret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SequencerError {
    #[error("task {0:?} is not defined")]
    UnknownTask(String),
    #[error("training index {index} out of range for a sequence of {len} tasks")]
    TrainIndex { index: usize, len: usize },
    #[error("sequence is not in {0} mode")]
    WrongMode(&'static str),
    #[error("task {0:?} has no full-state goal to run as a task model")]
    NotATaskModel(String),
}

enum Termination {
    Policy,
    /// Direct task-model execution: stop as soon as the full-state goal holds.
    Goal,
}

enum TaskEnd {
    Terminated(WorldState),
    TimedOut(WorldState),
}

#[derive(Debug)]
enum Stop {
    Infeasible(String),
    Pipeline(PipelineError),
}

impl Stop {
    fn reason(&self) -> String {
        match self {
            Self::Infeasible(r) => r.clone(),
            Self::Pipeline(e) => e.to_string(),
        }
    }
}

impl From<PipelineError> for Stop {
    fn from(e: PipelineError) -> Self {
        Self::Pipeline(e)
    }
}

/// Seed of the actor-configuration sample for an episode.
pub fn actor_seed(episode_seed: u64) -> u64 {
    seed::derive(episode_seed, &[seed::label("actors")])
}

/// Runs sequences through one engine pipeline. One episode at a time.
pub struct Sequencer<'a> {
    registry: &'a TaskRegistry,
    pipeline: &'a mut EnginePipeline,
    pub reward: RewardConfig,
}

impl<'a> Sequencer<'a> {
    pub fn new(registry: &'a TaskRegistry, pipeline: &'a mut EnginePipeline) -> Self {
        Self {
            registry,
            pipeline,
            reward: RewardConfig::default(),
        }
    }

    pub fn with_reward(mut self, reward: RewardConfig) -> Self {
        self.reward = reward;
        self
    }

    fn slot(&self, id: &str) -> Result<&'a TaskSlot, SequencerError> {
        self.registry
            .get(id)
            .ok_or_else(|| SequencerError::UnknownTask(id.to_string()))
    }

    fn check(&self, seq: &TaskSequence) -> Result<(), SequencerError> {
        for id in &seq.tasks {
            self.slot(id)?;
        }
        if let Mode::Train(index) = seq.mode {
            if index >= seq.tasks.len() {
                return Err(SequencerError::TrainIndex {
                    index,
                    len: seq.tasks.len(),
                });
            }
        }
        Ok(())
    }

    fn observable(world: &WorldState, episode_seed: u64) -> ObservableState {
        observable_projection(world, noise_seed(episode_seed, world.time_step))
    }

    /// Steps one task from `start` until it terminates or runs out of steps.
    /// Every step is appended to `logs` with its shaping reward.
    #[allow(clippy::too_many_arguments)]
    fn run_task(
        &mut self,
        task_id: &str,
        model: &ConceptModel,
        start: &WorldState,
        episode_seed: u64,
        params: Option<&[f64]>,
        termination: Termination,
        logs: &mut Vec<StepLog>,
    ) -> Result<TaskEnd, Stop> {
        let start_observable = Self::observable(start, episode_seed);
        let mut policy: Box<dyn Policy> = model
            .make_policy(start, &start_observable, params)
            .map_err(|e| Stop::Infeasible(e.to_string()))?;
        let full = model.policy.reads_full_state();
        let goal = match (&termination, &model.sufficient_goal) {
            (Termination::Goal, SufficientGoal::Predicate(g)) => Some(g),
            _ => None,
        };

        let mut world = start.clone();
        let mut observation = self.pipeline.observe(&world, episode_seed)?;
        let mut observable = start_observable.clone();
        for _ in 0..model.max_steps {
            let action = {
                let view = if full {
                    PolicyView::Full {
                        world: &world,
                        observation: &observation,
                    }
                } else {
                    PolicyView::Observed {
                        observable: &observable,
                        observation: &observation,
                    }
                };
                policy.act(&view)
            };
            let terminate = match goal {
                Some(g) => g.satisfied(start, &world),
                None => action.terminate,
            };
            let command = if terminate {
                Command::zero()
            } else {
                action.command.clamped()
            };
            let (next, obs) = self.pipeline.step(&world, &command, episode_seed)?;
            world = next;
            observation = obs;
            observable = Self::observable(&world, episode_seed);
            let cost = model.necessary_cost(&start_observable, &observable);
            logs.push(StepLog {
                time_step: world.time_step,
                task_id: task_id.to_string(),
                world: world.clone(),
                observation,
                command,
                terminate,
                necessary_cost: cost,
                reward: self.reward.step_reward(cost, false, None),
            });
            if terminate {
                return Ok(TaskEnd::Terminated(world));
            }
        }
        Ok(TaskEnd::TimedOut(world))
    }

    fn learned_params(slot: &'a TaskSlot) -> Option<&'a [f64]> {
        slot.params.as_deref()
    }

    /// Runs `ids` from `initial` with frozen policies. Stops at the first
    /// task that fails to instantiate or times out.
    fn run_tasks(
        &mut self,
        ids: &[String],
        initial: Option<&WorldState>,
        episode_seed: u64,
        logs: &mut Vec<StepLog>,
        spans: &mut Vec<TaskSpan>,
    ) -> Result<Outcome, SequencerError> {
        let mut current: Option<WorldState> = initial.cloned();
        for id in ids {
            let slot = self.slot(id)?;
            let model = &slot.model;
            let start = match &current {
                Some(w) => model.instantiate(InitialSource::Previous(w)),
                None => {
                    let actors = model.sample_actor_configuration(actor_seed(episode_seed));
                    model.instantiate(InitialSource::Config(&actors))
                }
            };
            let start = match start {
                Ok(w) => w,
                Err(e) => {
                    return Ok(Outcome::Infeasible {
                        task: id.clone(),
                        reason: e.to_string(),
                    })
                }
            };
            let before = logs.len();
            let end = self.run_task(
                id,
                model,
                &start,
                episode_seed,
                Self::learned_params(slot),
                Termination::Policy,
                logs,
            );
            let (end, terminated) = match end {
                Ok(TaskEnd::Terminated(w)) => (w, true),
                Ok(TaskEnd::TimedOut(w)) => (w, false),
                Err(stop) => {
                    return Ok(Outcome::Infeasible {
                        task: id.clone(),
                        reason: stop.reason(),
                    })
                }
            };
            spans.push(TaskSpan {
                task_id: id.clone(),
                start,
                end: end.clone(),
                steps: logs.len() - before,
                terminated,
            });
            if !terminated {
                return Ok(Outcome::TaskTimeout { task: id.clone() });
            }
            current = Some(end);
        }
        Ok(Outcome::Success)
    }

    /// Executes the sequence. Task 0 starts from `initial` or, if absent,
    /// from a fresh scene sampled from its actor configuration.
    pub fn run_sequence(
        &mut self,
        seq: &TaskSequence,
        initial: Option<&WorldState>,
        episode_seed: u64,
    ) -> Result<EpisodeResult, SequencerError> {
        if seq.mode != Mode::Execute {
            return Err(SequencerError::WrongMode("execute"));
        }
        self.check(seq)?;
        let mut trajectory = Vec::new();
        let mut spans = Vec::new();
        let outcome = self.run_tasks(&seq.tasks, initial, episode_seed, &mut trajectory, &mut spans)?;
        Ok(EpisodeResult {
            outcome,
            trajectory,
            spans,
            ret: None,
            sufficient: None,
            sufficient_evaluations: 0,
        })
    }

    /// One training episode for the task at the sequence's training index,
    /// with `params` installed as its policy. A pre-sequent failure yields an
    /// `Infeasible` outcome with no return; the caller should resample.
    pub fn run_training_episode(
        &mut self,
        seq: &TaskSequence,
        params: &[f64],
        episode_seed: u64,
    ) -> Result<EpisodeResult, SequencerError> {
        let Mode::Train(k) = seq.mode else {
            return Err(SequencerError::WrongMode("train"));
        };
        self.check(seq)?;
        let mut trajectory = Vec::new();
        let mut spans = Vec::new();
        let pre = self.run_tasks(&seq.tasks[..k], None, episode_seed, &mut trajectory, &mut spans)?;
        let infeasible = |outcome: Outcome, trajectory, spans| EpisodeResult {
            outcome,
            trajectory,
            spans,
            ret: None,
            sufficient: None,
            sufficient_evaluations: 0,
        };
        if !pre.is_success() {
            let task = seq.tasks[k - 1].clone();
            let reason = match pre {
                Outcome::Infeasible { reason, .. } => reason,
                _ => "pre-sequent task timed out".into(),
            };
            return Ok(infeasible(Outcome::Infeasible { task, reason }, trajectory, spans));
        }

        let id = &seq.tasks[k];
        let slot = self.slot(id)?;
        let model = &slot.model;
        let start = match spans.last() {
            Some(s) => model.instantiate(InitialSource::Previous(&s.end)),
            None => {
                let actors = model.sample_actor_configuration(actor_seed(episode_seed));
                model.instantiate(InitialSource::Config(&actors))
            }
        };
        let start = match start {
            Ok(w) => w,
            Err(e) => {
                let outcome = Outcome::Infeasible {
                    task: id.clone(),
                    reason: e.to_string(),
                };
                return Ok(infeasible(outcome, trajectory, spans));
            }
        };

        let first = trajectory.len();
        let end = self.run_task(id, model, &start, episode_seed, Some(params), Termination::Policy, &mut trajectory);
        let (end, terminated) = match end {
            Ok(TaskEnd::Terminated(w)) => (w, true),
            Ok(TaskEnd::TimedOut(w)) => (w, false),
            Err(stop) => {
                let outcome = Outcome::Infeasible {
                    task: id.clone(),
                    reason: stop.reason(),
                };
                return Ok(infeasible(outcome, trajectory, spans));
            }
        };

        let mut sufficient = None;
        let mut evaluations = 0;
        if let Some(last) = trajectory[first..].last().map(|l| l.necessary_cost) {
            let reward = if terminated {
                let tail: Vec<String> = seq.tasks[k + 1..].to_vec();
                let mut runner = SubsequentEval {
                    seq: self,
                    episode_seed,
                    tail,
                };
                let ok = model.sufficient_satisfied(&start, &end, &mut runner);
                evaluations = 1;
                sufficient = Some(ok);
                self.reward.step_reward(last, true, Some(ok))
            } else {
                self.reward.timeout_reward(last)
            };
            trajectory.last_mut().expect("task logged a step").reward = reward;
        }
        let ret = trajectory[first..].iter().map(|l| l.reward).sum();
        spans.push(TaskSpan {
            task_id: id.clone(),
            start,
            end,
            steps: trajectory.len() - first,
            terminated,
        });
        let outcome = if terminated {
            Outcome::Success
        } else {
            Outcome::TaskTimeout { task: id.clone() }
        };
        Ok(EpisodeResult {
            outcome,
            trajectory,
            spans,
            ret: Some(ret),
            sufficient,
            sufficient_evaluations: evaluations,
        })
    }

    /// Runs the pre-sequent tasks of a training sequence and instantiates the
    /// task under training. `Ok(Err(outcome))` reports an infeasible start.
    pub fn prepare_training(
        &mut self,
        seq: &TaskSequence,
        episode_seed: u64,
    ) -> Result<Result<(WorldState, Vec<StepLog>), Outcome>, SequencerError> {
        let Mode::Train(k) = seq.mode else {
            return Err(SequencerError::WrongMode("train"));
        };
        self.check(seq)?;
        let mut logs = Vec::new();
        let mut spans = Vec::new();
        let pre = self.run_tasks(&seq.tasks[..k], None, episode_seed, &mut logs, &mut spans)?;
        if !pre.is_success() {
            return Ok(Err(pre));
        }
        let id = &seq.tasks[k];
        let model = &self.slot(id)?.model;
        let start = match spans.last() {
            Some(s) => model.instantiate(InitialSource::Previous(&s.end)),
            None => {
                let actors = model.sample_actor_configuration(actor_seed(episode_seed));
                model.instantiate(InitialSource::Config(&actors))
            }
        };
        Ok(start.map(|w| (w, logs)).map_err(|e| Outcome::Infeasible {
            task: id.clone(),
            reason: e.to_string(),
        }))
    }

    /// Sufficient-goal evaluation of the task under training after its
    /// terminate signal; subsequent tasks run on a copy of `end`.
    pub fn evaluate_sufficient(
        &mut self,
        seq: &TaskSequence,
        start: &WorldState,
        end: &WorldState,
        episode_seed: u64,
    ) -> Result<bool, SequencerError> {
        let Mode::Train(k) = seq.mode else {
            return Err(SequencerError::WrongMode("train"));
        };
        self.check(seq)?;
        let model = &self.slot(&seq.tasks[k])?.model;
        let mut runner = SubsequentEval {
            seq: self,
            episode_seed,
            tail: seq.tasks[k + 1..].to_vec(),
        };
        Ok(model.sufficient_satisfied(start, end, &mut runner))
    }

    pub fn pipeline(&mut self) -> &mut EnginePipeline {
        self.pipeline
    }

    /// Runs a programmed task as a plain task model: the policy supplies the
    /// motion and the task ends as soon as its full-state goal holds.
    pub fn run_task_model(
        &mut self,
        task_id: &str,
        start: &WorldState,
        episode_seed: u64,
    ) -> Result<(Vec<StepLog>, bool), SequencerError> {
        let slot = self.slot(task_id)?;
        if !matches!(slot.model.sufficient_goal, SufficientGoal::Predicate(_)) {
            return Err(SequencerError::NotATaskModel(task_id.to_string()));
        }
        let mut logs = Vec::new();
        let end = self.run_task(
            task_id,
            &slot.model,
            start,
            episode_seed,
            Self::learned_params(slot),
            Termination::Goal,
            &mut logs,
        );
        Ok((logs, matches!(end, Ok(TaskEnd::Terminated(_)))))
    }

    /// Runs one task with frozen policies, discarding its logs.
    pub fn run_single(
        &mut self,
        task_id: &str,
        start: &WorldState,
        episode_seed: u64,
    ) -> Result<(Vec<StepLog>, bool), SequencerError> {
        let slot = self.slot(task_id)?;
        let mut logs = Vec::new();
        let end = self.run_task(
            task_id,
            &slot.model,
            start,
            episode_seed,
            Self::learned_params(slot),
            Termination::Policy,
            &mut logs,
        );
        Ok((logs, matches!(end, Ok(TaskEnd::Terminated(_)))))
    }
}

/// Whether every task with a full-state goal met it at the end of its span.
pub fn goals_satisfied(registry: &TaskRegistry, result: &EpisodeResult) -> bool {
    result.spans.iter().all(|span| {
        match registry.get(&span.task_id).map(|s| &s.model.sufficient_goal) {
            Some(SufficientGoal::Predicate(goal)) => goal.satisfied(&span.start, &span.end),
            Some(SufficientGoal::SubsequentTask(_)) => true,
            None => false,
        }
    })
}

/// Runs the subsequent tasks of a training episode on a copy of its world.
struct SubsequentEval<'s, 'a> {
    seq: &'s mut Sequencer<'a>,
    episode_seed: u64,
    tail: Vec<String>,
}

impl SubsequentRunner for SubsequentEval<'_, '_> {
    fn run_subsequent(&mut self, task_ids: &[String], world: &WorldState) -> Result<bool, String> {
        // The training sequence's own tail takes precedence over the model's default list.
        let ids = if self.tail.is_empty() {
            task_ids.to_vec()
        } else {
            self.tail.clone()
        };
        let mut logs = Vec::new();
        let mut spans = Vec::new();
        let outcome = self
            .seq
            .run_tasks(&ids, Some(world), self.episode_seed, &mut logs, &mut spans)
            .map_err(|e| e.to_string())?;
        if let Outcome::Infeasible { reason, .. } = &outcome {
            if spans.is_empty() && logs.is_empty() {
                log::trace!("subsequent task could not start: {reason}");
            }
        }
        let result = EpisodeResult {
            outcome,
            trajectory: logs,
            spans,
            ret: None,
            sufficient: None,
            sufficient_evaluations: 0,
        };
        Ok(result.outcome.is_success() && goals_satisfied(self.seq.registry, &result))
    }
}
