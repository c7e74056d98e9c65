//! Task-sequencing manipulation simulator.
//!
//! Training and execution scenarios are both built from the same task
//! blocks (concept models). A block trained inside one sequence is reused
//! unchanged as an execution block in any other sequence.
//!
//! Layers, bottom-up:
//! - [`world`]: the shared planar world state and its observable projection.
//! - [`engines`]: the kinematics → physics → feature → post-process pipeline.
//! - [`wire`]: hex-float state codec and the TCP protocol for remote engines.
//! - [`concept`]: concept models, goals, actor configurations and policies.
//! - [`tasks`]: grasp, pick, bring, place, release and door-open blocks.
//! - [`sequencer`]: runs execute sequences and training episodes.
//! - [`learning`]: episodic environment wrapper and cross-entropy training.
//! - [`scenario`]: scenario files, validation, and the run/train drivers.

pub mod concept;
pub mod engines;
pub mod learning;
mod linalg;
pub mod scalar;
pub mod scenario;
pub mod seed;
pub mod sequencer;
pub mod tasks;
pub mod wire;
pub mod world;

pub use scalar::Real;

/// Planar pose in double precision, the simulator's native representation.
pub type Pose = world::Pose2<f64>;
/// Single-precision pose for callers running the kernels in `f32`.
pub type Pose32 = world::Pose2<f32>;
pub type Joints = world::JointVector<f64>;
pub type Arm = engines::PlanarArm<f64>;
pub type Arm32 = engines::PlanarArm<f32>;
