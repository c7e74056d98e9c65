//! Shared state model read and written by every engine, task and policy.
//!
//! The world is planar: poses live in SE(2) and every object carries a scalar
//! elevation used by pick/place logic. Gravity only enters through grip-force
//! slip thresholds in the physics engine.

mod geometry;
mod observe;
mod state;

pub use geometry::{angle_diff, compose_pose, pose_residual, Pose2};
pub use observe::{
    observable_projection, target_offset, ObservableState, Observation, OBSERVATION_DIM,
};
pub use state::{
    Attachment, AttachmentParent, JointVector, ObjectId, ObjectState, Surface, WorldError,
    WorldState, JOINT_LIMIT,
};
