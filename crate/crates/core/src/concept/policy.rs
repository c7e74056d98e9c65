use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ConceptError;
use crate::engines::Command;
use crate::world::{Observation, ObservableState, WorldState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub command: Command,
    pub terminate: bool,
}

impl Action {
    pub fn go(command: Command) -> Self {
        Self {
            command,
            terminate: false,
        }
    }

    pub fn done() -> Self {
        Self {
            command: Command::zero(),
            terminate: true,
        }
    }
}

/// What a policy may look at. Programmed policies get the full world;
/// learned and estimating policies only what a real robot could sense.
#[derive(Debug, Clone, Copy)]
pub enum PolicyView<'a> {
    Full {
        world: &'a WorldState,
        observation: &'a Observation,
    },
    Observed {
        observable: &'a ObservableState,
        observation: &'a Observation,
    },
}

impl PolicyView<'_> {
    pub fn observation(&self) -> &Observation {
        match self {
            Self::Full { observation, .. } | Self::Observed { observation, .. } => observation,
        }
    }
}

/// Per-episode action source. Returns the next command and whether the task is done.
pub trait Policy: Send {
    fn act(&mut self, view: &PolicyView<'_>) -> Action;
}

/// Name and dimension of a parameterized policy family. Parameter files are
/// only interchangeable between tasks declaring the same family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyFamily {
    pub name: String,
    pub dim: usize,
}

impl PolicyFamily {
    pub fn check(&self, params: &[f64]) -> Result<(), ConceptError> {
        if params.len() != self.dim {
            return Err(ConceptError::Parameters(format!(
                "{} expects {} parameters, got {}",
                self.name,
                self.dim,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(ConceptError::Parameters(format!("{} parameters must be finite", self.name)));
        }
        Ok(())
    }
}

type ProgrammedBuilder = dyn Fn(&WorldState) -> Box<dyn Policy> + Send + Sync;
type EstimatingBuilder = dyn Fn(&ObservableState) -> Box<dyn Policy> + Send + Sync;
type LearnedBuilder = dyn Fn(&[f64]) -> Box<dyn Policy> + Send + Sync;

#[derive(Clone)]
pub enum PolicySource {
    /// Hand-written policy with full-state access, built from the task's start world.
    Programmed(Arc<ProgrammedBuilder>),
    /// Observable-only policy that estimates unknown parameters online.
    Estimating(Arc<EstimatingBuilder>),
    /// Parameterized policy reading only the observation vector.
    Learned {
        family: PolicyFamily,
        build: Arc<LearnedBuilder>,
    },
}

impl PolicySource {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Programmed(_) => "programmed",
            Self::Estimating(_) => "estimating",
            Self::Learned { .. } => "learned",
        }
    }

    pub fn family(&self) -> Option<&PolicyFamily> {
        match self {
            Self::Learned { family, .. } => Some(family),
            _ => None,
        }
    }

    pub fn reads_full_state(&self) -> bool {
        matches!(self, Self::Programmed(_))
    }
}

impl fmt::Debug for PolicySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind_name())
    }
}

/// How a task in a sequence obtains its actions.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    Programmed,
    Learned(Vec<f64>),
    UnderTraining,
}
