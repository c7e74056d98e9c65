//! Concept models: task descriptions made of actor configurations, an
//! initial-state rule, a necessary goal over observable state, a sufficient
//! goal over full state (or the success of subsequent tasks), partially known
//! dynamics parameters and a policy source.
//!
//! A task model is the special case with every parameter known and a
//! programmed policy.

mod actors;
mod goal;
mod policy;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{ObservableState, WorldState};

pub use actors::{
    sample_actor_configuration, ActorConfiguration, ActorRole, ParameterSpec, PropertyRef,
    PropertyValue, ResolvedActors, RANGED_PROPERTIES,
};
pub use goal::{GoalPredicate, SufficientGoal, NECESSARY_EPSILON};
pub use policy::{Action, Policy, PolicyFamily, PolicyKind, PolicySource, PolicyView};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConceptError {
    #[error("incompatible state: {0}")]
    IncompatibleState(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("policy parameters: {0}")]
    Parameters(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Translation,
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactTransition {
    Make,
    Break,
    Maintain,
}

/// Classification of a task by its motion type, degrees of freedom and the
/// contact transition it performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrewClass {
    pub motion: Motion,
    pub dof: u8,
    pub contact: ContactTransition,
}

/// Coarse attachment state of the target object, used to check that a task
/// can start where its predecessor ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttachmentPattern {
    /// Target is not held by the end-effector.
    Free,
    /// Target is held by the end-effector and not hinged.
    Held,
    /// Target is held by the end-effector and hinged to the environment.
    HeldHinged,
}

impl AttachmentPattern {
    pub fn holds(self, world: &WorldState) -> bool {
        let Some((id, _)) = world.target_object() else {
            return false;
        };
        let held = world.is_held(id);
        let hinged = world.hinge_of(id).is_some();
        match self {
            Self::Free => !held,
            Self::Held => held && !hinged,
            Self::HeldHinged => held && hinged,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Self::Free => "a free target object",
            Self::Held | Self::HeldHinged => "end-effector attachment",
        }
    }
}

/// What a task needs at its start, what it leaves behind, and whether it can
/// build its own initial state from an actor configuration at the head of a
/// sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InitialRule {
    pub requires: AttachmentPattern,
    pub produces: AttachmentPattern,
    pub bootstrap: bool,
}

/// Builds a fresh world from resolved actor properties.
pub type SceneBuilder = Arc<dyn Fn(&ResolvedActors) -> WorldState + Send + Sync>;

/// Source of a task's initial state.
#[derive(Debug, Clone, Copy)]
pub enum InitialSource<'a> {
    Config(&'a ResolvedActors),
    Previous(&'a WorldState),
}

/// Runs a list of tasks from a given world and reports whether all of them
/// completed with their goals met. Supplied by the sequencer.
pub trait SubsequentRunner {
    fn run_subsequent(&mut self, task_ids: &[String], world: &WorldState) -> Result<bool, String>;
}

#[derive(Clone)]
pub struct ConceptModel {
    /// Registry key of the model ("grasp", "pick", ...).
    pub id: String,
    pub screw_class: ScrewClass,
    pub actor_configs: ActorConfiguration,
    pub initial: InitialRule,
    pub necessary_goal: GoalPredicate<ObservableState>,
    pub sufficient_goal: SufficientGoal,
    pub parameters: Vec<ParameterSpec>,
    pub max_steps: usize,
    pub policy: PolicySource,
    pub scene: SceneBuilder,
}

impl fmt::Debug for ConceptModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConceptModel")
            .field("id", &self.id)
            .field("screw_class", &self.screw_class)
            .field("actor_configs", &self.actor_configs)
            .field("initial", &self.initial)
            .field("sufficient_goal", &self.sufficient_goal)
            .field("parameters", &self.parameters)
            .field("max_steps", &self.max_steps)
            .field("policy", &self.policy.kind_name())
            .finish()
    }
}

impl ConceptModel {
    pub fn validate(&self) -> Result<(), ConceptError> {
        self.actor_configs.validate()?;
        for p in &self.parameters {
            p.validate()?;
            if let Some(binding) = &p.binding {
                if self.actor_configs.get(binding.role, &binding.name).is_none() {
                    return Err(ConceptError::InvalidConfiguration(format!(
                        "parameter {} is bound to missing property {}",
                        p.name, binding
                    )));
                }
            }
        }
        if self.max_steps == 0 {
            return Err(ConceptError::InvalidConfiguration(format!("{}: max_steps must be positive", self.id)));
        }
        Ok(())
    }

    /// Value of a known parameter.
    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters
            .iter()
            .find(|p| p.name == name && p.known)
            .and_then(|p| p.value)
    }

    /// Replaces actor properties and keeps bound parameter ranges in sync.
    pub fn override_actor(&mut self, role: ActorRole, name: &str, value: PropertyValue) -> Result<(), ConceptError> {
        self.actor_configs.set(role, name, value)?;
        for p in &mut self.parameters {
            if p.binding.as_ref().is_some_and(|b| b.role == role && b.name == name) {
                p.randomization_range = Some(value.range());
            }
        }
        Ok(())
    }

    pub fn sample_actor_configuration(&self, seed: u64) -> ResolvedActors {
        sample_actor_configuration(self, seed)
    }

    /// Initial world of the task: a fresh scene from a resolved configuration,
    /// or the previous task's end state passed through unchanged.
    pub fn instantiate(&self, source: InitialSource<'_>) -> Result<WorldState, ConceptError> {
        let world = match source {
            InitialSource::Config(actors) => (self.scene)(actors),
            InitialSource::Previous(world) => world.clone(),
        };
        if !self.initial.requires.holds(&world) {
            return Err(ConceptError::IncompatibleState(format!(
                "{} requires {}",
                self.id,
                self.initial.requires.describe()
            )));
        }
        Ok(world)
    }

    pub fn necessary_cost(&self, start: &ObservableState, now: &ObservableState) -> f64 {
        self.necessary_goal.cost(start, now)
    }

    /// Evaluates the sufficient goal once, after the task's terminate signal.
    /// Runner failures count as an unsatisfied goal.
    pub fn sufficient_satisfied(
        &self,
        start: &WorldState,
        world: &WorldState,
        runner: &mut dyn SubsequentRunner,
    ) -> bool {
        match &self.sufficient_goal {
            SufficientGoal::Predicate(goal) => goal.satisfied(start, world),
            SufficientGoal::SubsequentTask(ids) => match runner.run_subsequent(ids, world) {
                Ok(ok) => ok,
                Err(e) => {
                    log::debug!("{}: subsequent-task evaluation failed: {e}", self.id);
                    false
                }
            },
        }
    }

    /// Builds the per-episode policy. Learned policies need a parameter
    /// vector of the family's dimension; other kinds ignore `params`.
    pub fn make_policy(
        &self,
        start: &WorldState,
        start_observable: &ObservableState,
        params: Option<&[f64]>,
    ) -> Result<Box<dyn Policy>, ConceptError> {
        match &self.policy {
            PolicySource::Programmed(build) => Ok(build(start)),
            PolicySource::Estimating(build) => Ok(build(start_observable)),
            PolicySource::Learned { family, build } => {
                let params = params.ok_or_else(|| {
                    ConceptError::Parameters(format!("{} needs {} parameters", self.id, family.dim))
                })?;
                family.check(params)?;
                Ok(build(params))
            }
        }
    }
}
