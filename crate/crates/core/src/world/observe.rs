use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::state::{JointVector, WorldState};
use crate::seed;
use crate::wire::hexfloat::serde_array;
use crate::Pose;

/// Number of entries in a policy observation.
pub const OBSERVATION_DIM: usize = 6;

/// State available on a real robot: proprioception, force/torque sensing and a
/// noisy target-distance estimate. Object geometry and mass are deliberately absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableState {
    pub joints: JointVector<f64>,
    pub ee: Pose,
    pub ee_height: f64,
    pub aperture: f64,
    pub wrist_force: f64,
    pub jaw_contacts: [bool; 2],
    pub jaw_torques: [f64; 2],
    pub estimated_target_distance: f64,
}

impl ObservableState {
    pub fn bilateral_contact(&self) -> bool {
        self.jaw_contacts[0] && self.jaw_contacts[1]
    }
}

/// Fixed-size policy input:
/// `[estimated distance, lateral offset, aperture, jaw torque L, jaw torque R, wrist force]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(#[serde(with = "serde_array")] pub [f64; OBSERVATION_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Distance from the end-effector to the target, signed by the side of the
/// approach axis (the ee heading) the target lies on, and the lateral offset
/// of the target from that axis (positive to the left).
pub fn target_offset(world: &WorldState) -> Option<(f64, f64)> {
    let (_, obj) = world.target_object()?;
    let dx = obj.pose.x - world.ee.x;
    let dy = obj.pose.y - world.ee.y;
    let [hx, hy] = world.ee.heading();
    let along = hx * dx + hy * dy;
    let lateral = hx * dy - hy * dx;
    let dist = dx.hypot(dy);
    Some((if along < 0.0 { -dist } else { dist }, lateral))
}

/// Projects the full state onto its observable part. The distance estimate is
/// the true distance plus zero-mean Gaussian noise drawn from a stream keyed by
/// `noise_seed`; a world without a target reports zero distance.
pub fn observable_projection(world: &WorldState, noise_seed: u64) -> ObservableState {
    let truth = target_offset(world).map_or(0.0, |(d, _)| d);
    let noise = if world.distance_sigma > 0.0 {
        let z: f64 = StandardNormal.sample(&mut seed::rng(noise_seed));
        world.distance_sigma * z
    } else {
        0.0
    };
    ObservableState {
        joints: world.joints,
        ee: world.ee,
        ee_height: world.ee_height,
        aperture: world.aperture,
        wrist_force: world.wrist_force,
        jaw_contacts: world.jaw_contacts,
        jaw_torques: world.jaw_torques,
        estimated_target_distance: truth + noise,
    }
}
