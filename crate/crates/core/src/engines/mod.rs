//! Environment engine pipeline.
//!
//! Four role-typed engines run in a fixed order every time step:
//! kinematics resolves the commanded end-effector pose to joints, physics
//! enforces contacts and attachments, the feature engine extracts geometric
//! features of the target, and the post-process engine fuses them with force
//! readings into the policy observation. Any engine may be hosted in another
//! process through the `wire` protocol without changing results.

mod command;
mod feature;
mod kinematics;
mod physics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use command::{
    Command, MAX_APERTURE_DELTA, MAX_LIFT_DELTA, MAX_ROTATION, MAX_TRANSLATION,
};
pub use feature::{feature_extract, postprocess, VisualFeatures};
pub use kinematics::{
    forward_kinematics, inverse_kinematics, IkError, IkOptions, PlanarArm, LINK_LENGTHS,
};
pub use physics::{
    grip_force, physics_step, project_to_circle, slip_threshold, CONSTRAINT_STIFFNESS,
    CRUSH_FORCE, FRICTION, GRASP_RANGE, GRASP_VERTICAL_RANGE, GRAVITY, GRIP_STIFFNESS,
    LIFT_ACCELERATION, SUPPORT_BREAK_HEIGHT,
};

use crate::seed;
use crate::wire::{RemoteEngine, RemoteError};
use crate::world::{observable_projection, Observation, WorldState};
use crate::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineRole {
    Kinematics,
    Physics,
    Feature,
    #[serde(rename = "postprocess")]
    PostProcess,
}

impl EngineRole {
    pub const ALL: [EngineRole; 4] = [
        EngineRole::Kinematics,
        EngineRole::Physics,
        EngineRole::Feature,
        EngineRole::PostProcess,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kinematics => "kinematics",
            Self::Physics => "physics",
            Self::Feature => "feature",
            Self::PostProcess => "postprocess",
        }
    }
}

impl fmt::Display for EngineRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown engine role {s:?}"))
    }
}

/// Everything that flows through the pipeline during one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFrame {
    pub world: WorldState,
    pub command: Command,
    /// Seed of the distance-estimate noise for the frame's time step.
    pub noise_seed: u64,
    pub features: Option<VisualFeatures>,
    pub observation: Option<Observation>,
}

impl StepFrame {
    pub fn new(world: WorldState, command: Command, noise_seed: u64) -> Self {
        Self {
            world,
            command,
            noise_seed,
            features: None,
            observation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("world has no target object")]
    MissingTarget,
    #[error("frame is missing {0}")]
    MissingInput(&'static str),
    #[error(transparent)]
    Remote(#[from] RemoteError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{role} engine: {source}")]
pub struct PipelineError {
    pub role: EngineRole,
    pub source: EngineError,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigurationError {
    #[error("pipeline has no {0} engine")]
    MissingRole(EngineRole),
    #[error("engines out of order: {later} listed after {earlier}")]
    OutOfOrder { earlier: EngineRole, later: EngineRole },
    #[error("cannot connect {role} engine at {endpoint}: {source}")]
    Connect {
        role: EngineRole,
        endpoint: String,
        source: RemoteError,
    },
}

/// One pipeline stage. Engines keep no state between steps: the output is a
/// pure function of the incoming frame.
pub trait Engine: Send {
    fn role(&self) -> EngineRole;
    fn step(&mut self, frame: StepFrame) -> Result<StepFrame, EngineError>;
}

#[derive(Debug, Clone, Default)]
pub struct KinematicsEngine {
    pub arm: PlanarArm<f64>,
    pub options: IkOptions<f64>,
}

impl Engine for KinematicsEngine {
    fn role(&self) -> EngineRole {
        EngineRole::Kinematics
    }

    fn step(&mut self, mut frame: StepFrame) -> Result<StepFrame, EngineError> {
        if frame.command.has_planar_motion() {
            let ee = frame.world.ee;
            let [dx, dy, dt] = frame.command.ee_delta;
            let target = Pose::new(ee.x + dx, ee.y + dy, ee.theta + dt);
            match self.arm.inverse(&target, &frame.world.joints, &self.options) {
                Ok(q) => frame.world.joints = q,
                // Hold the pose at the workspace limit.
                Err(_) => frame.command.ee_delta = [0.0; 3],
            }
        }
        Ok(frame)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PhysicsEngine;

impl Engine for PhysicsEngine {
    fn role(&self) -> EngineRole {
        EngineRole::Physics
    }

    fn step(&mut self, mut frame: StepFrame) -> Result<StepFrame, EngineError> {
        frame.world = physics_step(&frame.world, &frame.command);
        Ok(frame)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureEngine;

impl Engine for FeatureEngine {
    fn role(&self) -> EngineRole {
        EngineRole::Feature
    }

    fn step(&mut self, mut frame: StepFrame) -> Result<StepFrame, EngineError> {
        frame.features = Some(feature_extract(&frame.world)?);
        Ok(frame)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PostProcessEngine;

impl Engine for PostProcessEngine {
    fn role(&self) -> EngineRole {
        EngineRole::PostProcess
    }

    fn step(&mut self, mut frame: StepFrame) -> Result<StepFrame, EngineError> {
        let features = frame.features.ok_or(EngineError::MissingInput("features"))?;
        let observable = observable_projection(&frame.world, frame.noise_seed);
        frame.observation = Some(postprocess(&features, &observable));
        Ok(frame)
    }
}

pub fn local_engine(role: EngineRole) -> Box<dyn Engine> {
    match role {
        EngineRole::Kinematics => Box::new(KinematicsEngine::default()),
        EngineRole::Physics => Box::new(PhysicsEngine),
        EngineRole::Feature => Box::new(FeatureEngine),
        EngineRole::PostProcess => Box::new(PostProcessEngine),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Backend {
    Local,
    /// `host:port` of a process running `serve-engine` for this role.
    Remote(String),
}

/// Declarative pipeline layout: one backend per role, in role order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineSpec {
    pub engines: Vec<(EngineRole, Backend)>,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        Self {
            engines: EngineRole::ALL.iter().map(|r| (*r, Backend::Local)).collect(),
        }
    }
}

impl PipelineSpec {
    pub fn with_backend(mut self, role: EngineRole, backend: Backend) -> Self {
        for slot in &mut self.engines {
            if slot.0 == role {
                slot.1 = backend.clone();
            }
        }
        self
    }
}

/// Noise seed for the distance estimate at `time_step` of an episode.
pub fn noise_seed(episode_seed: u64, time_step: u64) -> u64 {
    seed::derive(episode_seed, &[seed::label("distance-noise"), time_step])
}

fn check_order(roles: &[EngineRole]) -> Result<(), ConfigurationError> {
    for pair in roles.windows(2) {
        if pair[1] <= pair[0] {
            return Err(ConfigurationError::OutOfOrder {
                earlier: pair[0],
                later: pair[1],
            });
        }
    }
    match EngineRole::ALL.into_iter().find(|r| !roles.contains(r)) {
        Some(missing) => Err(ConfigurationError::MissingRole(missing)),
        None => Ok(()),
    }
}

pub struct EnginePipeline {
    engines: Vec<Box<dyn Engine>>,
}

impl fmt::Debug for EnginePipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.engines.iter().map(|e| e.role()))
            .finish()
    }
}

impl EnginePipeline {
    pub fn new(engines: Vec<Box<dyn Engine>>) -> Result<Self, ConfigurationError> {
        let roles: Vec<_> = engines.iter().map(|e| e.role()).collect();
        check_order(&roles)?;
        Ok(Self { engines })
    }

    pub fn local() -> Self {
        Self::new(EngineRole::ALL.into_iter().map(local_engine).collect())
            .expect("canonical role order")
    }

    /// Builds the pipeline, connecting to every remote backend.
    pub fn from_spec(spec: &PipelineSpec) -> Result<Self, ConfigurationError> {
        let roles: Vec<_> = spec.engines.iter().map(|(r, _)| *r).collect();
        check_order(&roles)?;
        let mut engines = Vec::with_capacity(spec.engines.len());
        for (role, backend) in &spec.engines {
            let engine: Box<dyn Engine> = match backend {
                Backend::Local => local_engine(*role),
                Backend::Remote(endpoint) => Box::new(
                    RemoteEngine::connect(*role, endpoint).map_err(|source| {
                        ConfigurationError::Connect {
                            role: *role,
                            endpoint: endpoint.clone(),
                            source,
                        }
                    })?,
                ),
            };
            engines.push(engine);
        }
        Self::new(engines)
    }

    pub fn roles(&self) -> Vec<EngineRole> {
        self.engines.iter().map(|e| e.role()).collect()
    }

    fn run(&mut self, mut frame: StepFrame, from: EngineRole, episode_seed: u64) -> Result<StepFrame, PipelineError> {
        for engine in self.engines.iter_mut().filter(|e| e.role() >= from) {
            let role = engine.role();
            if role == EngineRole::Feature && from < EngineRole::Feature {
                frame.world.time_step += 1;
                frame.noise_seed = noise_seed(episode_seed, frame.world.time_step);
            }
            frame = engine
                .step(frame)
                .map_err(|source| PipelineError { role, source })?;
        }
        Ok(frame)
    }

    /// Advances the world by one time step under `command` (clamped to the
    /// command limits) and returns the new world with its observation.
    pub fn step(
        &mut self,
        world: &WorldState,
        command: &Command,
        episode_seed: u64,
    ) -> Result<(WorldState, Observation), PipelineError> {
        let frame = StepFrame::new(
            world.clone(),
            command.clamped(),
            noise_seed(episode_seed, world.time_step),
        );
        let out = self.run(frame, EngineRole::Kinematics, episode_seed)?;
        let observation = out.observation.ok_or(PipelineError {
            role: EngineRole::PostProcess,
            source: EngineError::MissingInput("observation"),
        })?;
        Ok((out.world, observation))
    }

    /// Observation of `world` without advancing time (feature and post-process stages only).
    pub fn observe(&mut self, world: &WorldState, episode_seed: u64) -> Result<Observation, PipelineError> {
        let frame = StepFrame::new(
            world.clone(),
            Command::zero(),
            noise_seed(episode_seed, world.time_step),
        );
        let out = self.run(frame, EngineRole::Feature, episode_seed)?;
        out.observation.ok_or(PipelineError {
            role: EngineRole::PostProcess,
            source: EngineError::MissingInput("observation"),
        })
    }
}

pub fn pipeline_step(
    pipeline: &mut EnginePipeline,
    world: &WorldState,
    command: &Command,
    episode_seed: u64,
) -> Result<(WorldState, Observation), PipelineError> {
    pipeline.step(world, command, episode_seed)
}
