//! Concrete task blocks: a learned grasp, programmed pick/bring/place/release
//! motions, and a parameter-estimating door opener.

mod circle;
mod door;
mod grasp;
mod motion;
pub mod scene;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::concept::ConceptModel;

pub use circle::{circle_fit, CircleFitError};
pub use door::{
    door_act, door_model, DoorEstimatorState, DoorSettings, DOOR_ANGLE_TOLERANCE, DOOR_ARC_STEP,
    DOOR_FORCE_LIMIT, DOOR_MAX_STEPS, DOOR_PROBE_STEPS, DOOR_TARGET_ANGLE,
};
pub use grasp::{
    grasp_act, grasp_cost, grasp_model, GraspPolicyParams, GRASP_FAMILY, GRASP_MAX_STEPS,
    GRASP_OUTPUTS, GRASP_PARAM_DIM, OBSERVATION_SCALE,
};
pub use motion::{
    default_spec, motion_model, pick_act, programmed_motion_act, MotionKind, MotionOrigin,
    ProgrammedMotionSpec, MOTION_MAX_STEPS,
};

/// Registry keys accepted in scenario files.
pub const MODEL_KEYS: [&str; 6] = ["grasp", "pick", "bring", "place", "release", "door_open"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("model {model} has no parameter {name:?}")]
    UnknownParameter { model: String, name: String },
    #[error("model {model}: parameter {name} = {value} is out of range")]
    BadParameter { model: String, name: String, value: f64 },
}

fn take(
    model: &str,
    overrides: &BTreeMap<String, f64>,
    name: &str,
    default: f64,
    valid: impl Fn(f64) -> bool,
) -> Result<f64, TaskError> {
    let v = overrides.get(name).copied().unwrap_or(default);
    if v.is_finite() && valid(v) {
        Ok(v)
    } else {
        Err(TaskError::BadParameter {
            model: model.into(),
            name: name.into(),
            value: v,
        })
    }
}

fn allowed(model: &str, overrides: &BTreeMap<String, f64>, names: &[&str]) -> Result<(), TaskError> {
    match overrides.keys().find(|k| !names.contains(&k.as_str())) {
        Some(name) => Err(TaskError::UnknownParameter {
            model: model.into(),
            name: name.clone(),
        }),
        None => Ok(()),
    }
}

/// Builds the model registered under `key` with known-parameter overrides.
/// Unknown parameters cannot be overridden; they are randomized through the
/// actor configuration instead.
pub fn build_model(key: &str, overrides: &BTreeMap<String, f64>) -> Result<ConceptModel, TaskError> {
    let positive = |v: f64| v > 0.0;
    let any = |_: f64| true;
    let kind = match key {
        "grasp" => {
            allowed(key, overrides, &[])?;
            return Ok(grasp_model());
        }
        "door_open" => {
            allowed(key, overrides, &["arc_step", "force_limit", "target_angle_deg"])?;
            let settings = DoorSettings {
                target_angle: take(key, overrides, "target_angle_deg", DOOR_TARGET_ANGLE.to_degrees(), |v| {
                    v > 0.0 && v < 180.0
                })?
                .to_radians(),
                arc_step: take(key, overrides, "arc_step", DOOR_ARC_STEP, |v| v > 0.0 && v <= 0.05)?,
                probe_steps: DOOR_PROBE_STEPS,
            };
            let force_limit = take(key, overrides, "force_limit", DOOR_FORCE_LIMIT, positive)?;
            return Ok(door_model(settings, force_limit));
        }
        "pick" => MotionKind::Pick,
        "bring" => MotionKind::Bring,
        "place" => MotionKind::Place,
        "release" => MotionKind::Release,
        other => return Err(TaskError::UnknownModel(other.into())),
    };
    let d = default_spec(kind);
    let spec = match kind {
        MotionKind::Pick => {
            allowed(key, overrides, &["lift"])?;
            ProgrammedMotionSpec::pick(take(key, overrides, "lift", d.height, positive)?)
        }
        MotionKind::Bring => {
            allowed(key, overrides, &["dx", "dy", "dtheta", "tolerance"])?;
            ProgrammedMotionSpec::bring(
                take(key, overrides, "dx", 0.0, |v| v.abs() <= 2.5)?,
                take(key, overrides, "dy", 0.0, |v| v.abs() <= 2.5)?,
                take(key, overrides, "dtheta", 0.0, any)?,
                take(key, overrides, "tolerance", d.tolerance, positive)?,
            )
        }
        MotionKind::Place => {
            allowed(key, overrides, &["lower"])?;
            ProgrammedMotionSpec::place(take(key, overrides, "lower", d.height, positive)?)
        }
        MotionKind::Release => {
            allowed(key, overrides, &["retreat"])?;
            ProgrammedMotionSpec::release(take(key, overrides, "retreat", d.height, |v| v >= 0.0)?)
        }
    };
    Ok(motion_model(spec, MOTION_MAX_STEPS))
}
