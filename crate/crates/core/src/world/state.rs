use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::Pose2;
use crate::scalar::Real;
use crate::wire::hexfloat::{serde_array, serde_f64};
use crate::Pose;

pub type ObjectId = String;

/// Joint limit applied to every revolute joint, radians.
pub const JOINT_LIMIT: f64 = std::f64::consts::PI;

/// Three revolute joint angles of the planar arm, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointVector<T>(pub [T; 3]);

impl<T: Real> JointVector<T> {
    pub fn zero() -> Self {
        Self([T::zero(); 3])
    }

    pub fn within_limits(&self) -> bool {
        let lim = T::lit(JOINT_LIMIT);
        self.0.iter().all(|q| q.is_finite() && q.abs() <= lim)
    }
}

mod pose_hex {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Repr {
        #[serde(with = "serde_f64")]
        x: f64,
        #[serde(with = "serde_f64")]
        y: f64,
        #[serde(with = "serde_f64")]
        theta: f64,
    }

    pub fn serialize<S: serde::Serializer>(p: &Pose, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            x: p.x,
            y: p.y,
            theta: p.theta,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Pose, D::Error> {
        let r = Repr::deserialize(d)?;
        // Bits are taken verbatim; renormalizing here would break round-trips.
        Ok(Pose2 {
            x: r.x,
            y: r.y,
            theta: r.theta,
        })
    }
}

mod joints_hex {
    use super::*;

    pub fn serialize<S: serde::Serializer>(q: &JointVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        serde_array::serialize(&q.0, s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<JointVector<f64>, D::Error> {
        serde_array::deserialize(d).map(JointVector)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectState {
    #[serde(with = "pose_hex")]
    pub pose: Pose,
    /// Elevation of the object's base above the world datum, meters.
    #[serde(with = "serde_f64")]
    pub height: f64,
    #[serde(with = "serde_f64")]
    pub width: f64,
    #[serde(with = "serde_f64")]
    pub mass: f64,
    /// Latched once the grip force exceeded the crush limit.
    pub crushed: bool,
}

/// Axis-aligned support region at a fixed elevation (table top, bin floor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surface {
    #[serde(with = "serde_array")]
    pub center: [f64; 2],
    #[serde(with = "serde_array")]
    pub half_extents: [f64; 2],
    #[serde(with = "serde_f64")]
    pub elevation: f64,
}

impl Surface {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.center[0]).abs() <= self.half_extents[0]
            && (y - self.center[1]).abs() <= self.half_extents[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttachmentParent {
    /// Rotational joint to the environment (door hinge). `hinge.theta` is the closed-door angle.
    EnvironmentRigid {
        #[serde(with = "pose_hex")]
        hinge: Pose,
        #[serde(with = "serde_f64")]
        radius: f64,
    },
    EnvironmentResting { surface: String },
    /// Held by the gripper; object pose = ee ∘ offset, elevation = ee height − lift_offset.
    EndEffector {
        #[serde(with = "pose_hex")]
        offset: Pose,
        #[serde(with = "serde_f64")]
        lift_offset: f64,
    },
}

impl AttachmentParent {
    fn rank(&self) -> u8 {
        match self {
            Self::EnvironmentRigid { .. } => 0,
            Self::EnvironmentResting { .. } => 1,
            Self::EndEffector { .. } => 2,
        }
    }

    pub fn is_environment(&self) -> bool {
        !matches!(self, Self::EndEffector { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attachment {
    pub child: ObjectId,
    pub parent: AttachmentParent,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("non-finite value in field {0}")]
    NonFinite(&'static str),
    #[error("aperture {aperture} outside [0, {max}]")]
    Aperture { aperture: f64, max: f64 },
    #[error("negative force or torque in field {0}")]
    NegativeForce(&'static str),
    #[error("joint angles outside limits")]
    JointLimits,
    #[error("attachment references unknown object or surface {0:?}")]
    Dangling(String),
    #[error("object {0:?} has conflicting attachments")]
    ConflictingAttachments(String),
    #[error("target {0:?} is not a known object")]
    UnknownTarget(String),
}

/// Full simulation state shared by every engine, task and policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldState {
    #[serde(with = "joints_hex")]
    pub joints: JointVector<f64>,
    #[serde(with = "pose_hex")]
    pub ee: Pose,
    /// Height of the gripper's grasp point above the world datum.
    #[serde(with = "serde_f64")]
    pub ee_height: f64,
    #[serde(with = "serde_f64")]
    pub aperture: f64,
    #[serde(with = "serde_f64")]
    pub aperture_max: f64,
    pub objects: BTreeMap<ObjectId, ObjectState>,
    pub surfaces: BTreeMap<String, Surface>,
    pub attachments: Vec<Attachment>,
    pub target: Option<ObjectId>,
    #[serde(with = "serde_f64")]
    pub wrist_force: f64,
    pub jaw_contacts: [bool; 2],
    #[serde(with = "serde_array")]
    pub jaw_torques: [f64; 2],
    /// Standard deviation of the target-distance estimate, meters.
    #[serde(with = "serde_f64")]
    pub distance_sigma: f64,
    pub time_step: u64,
}

impl WorldState {
    /// Robot at the given pose with an open gripper and an empty scene.
    pub fn empty(joints: JointVector<f64>, ee: Pose, aperture_max: f64) -> Self {
        Self {
            joints,
            ee,
            ee_height: 0.0,
            aperture: aperture_max,
            aperture_max,
            objects: BTreeMap::new(),
            surfaces: BTreeMap::new(),
            attachments: Vec::new(),
            target: None,
            wrist_force: 0.0,
            jaw_contacts: [false; 2],
            jaw_torques: [0.0; 2],
            distance_sigma: 0.0,
            time_step: 0,
        }
    }

    pub fn target_object(&self) -> Option<(&str, &ObjectState)> {
        let id = self.target.as_deref()?;
        self.objects.get(id).map(|o| (id, o))
    }

    /// The object currently held by the end-effector, with its grasp offset.
    pub fn held(&self) -> Option<(&str, Pose, f64)> {
        self.attachments.iter().find_map(|a| match a.parent {
            AttachmentParent::EndEffector {
                offset,
                lift_offset,
            } => Some((a.child.as_str(), offset, lift_offset)),
            _ => None,
        })
    }

    pub fn is_held(&self, child: &str) -> bool {
        self.held().is_some_and(|(id, _, _)| id == child)
    }

    pub fn resting_surface(&self, child: &str) -> Option<&str> {
        self.attachments.iter().find_map(|a| match &a.parent {
            AttachmentParent::EnvironmentResting { surface } if a.child == child => {
                Some(surface.as_str())
            }
            _ => None,
        })
    }

    pub fn hinge_of(&self, child: &str) -> Option<(Pose, f64)> {
        self.attachments.iter().find_map(|a| match a.parent {
            AttachmentParent::EnvironmentRigid { hinge, radius } if a.child == child => {
                Some((hinge, radius))
            }
            _ => None,
        })
    }

    /// Opening angle of a hinged object relative to its closed angle.
    pub fn door_angle(&self, child: &str) -> Option<f64> {
        let (hinge, _) = self.hinge_of(child)?;
        let p = self.objects.get(child)?.pose;
        let phi = (p.y - hinge.y).atan2(p.x - hinge.x);
        Some(super::geometry::angle_diff(phi, hinge.theta))
    }

    /// Inserts an attachment, keeping the list in canonical order.
    pub fn attach(&mut self, attachment: Attachment) {
        self.attachments.push(attachment);
        self.attachments
            .sort_by(|a, b| (&a.child, a.parent.rank()).cmp(&(&b.child, b.parent.rank())));
    }

    pub fn detach_from_ee(&mut self, child: &str) {
        self.attachments
            .retain(|a| !(a.child == child && matches!(a.parent, AttachmentParent::EndEffector { .. })));
    }

    pub fn detach_resting(&mut self, child: &str) {
        self.attachments.retain(|a| {
            !(a.child == child && matches!(a.parent, AttachmentParent::EnvironmentResting { .. }))
        });
    }

    /// Highest support surface under `(x, y)` whose elevation does not exceed `elevation`.
    pub fn surface_below(&self, x: f64, y: f64, elevation: f64) -> Option<(&str, f64)> {
        self.surfaces
            .iter()
            .filter(|(_, s)| s.contains(x, y) && s.elevation <= elevation + 1e-12)
            .max_by(|a, b| a.1.elevation.total_cmp(&b.1.elevation))
            .map(|(id, s)| (id.as_str(), s.elevation))
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let scalars = [
            ("ee", self.ee.x),
            ("ee", self.ee.y),
            ("ee", self.ee.theta),
            ("ee_height", self.ee_height),
            ("aperture", self.aperture),
            ("aperture_max", self.aperture_max),
            ("wrist_force", self.wrist_force),
            ("jaw_torques", self.jaw_torques[0]),
            ("jaw_torques", self.jaw_torques[1]),
            ("distance_sigma", self.distance_sigma),
        ];
        if let Some((name, _)) = scalars.iter().find(|(_, v)| !v.is_finite()) {
            return Err(WorldError::NonFinite(name));
        }
        if !self.joints.within_limits() {
            return Err(WorldError::JointLimits);
        }
        if !(0.0..=self.aperture_max).contains(&self.aperture) {
            return Err(WorldError::Aperture {
                aperture: self.aperture,
                max: self.aperture_max,
            });
        }
        if self.wrist_force < 0.0 {
            return Err(WorldError::NegativeForce("wrist_force"));
        }
        if self.jaw_torques.iter().any(|t| *t < 0.0) {
            return Err(WorldError::NegativeForce("jaw_torques"));
        }
        for o in self.objects.values() {
            let v = [o.pose.x, o.pose.y, o.pose.theta, o.height, o.width, o.mass];
            if v.iter().any(|x| !x.is_finite()) {
                return Err(WorldError::NonFinite("objects"));
            }
        }
        if let Some(t) = &self.target {
            if !self.objects.contains_key(t) {
                return Err(WorldError::UnknownTarget(t.clone()));
            }
        }
        let mut held = 0;
        for a in &self.attachments {
            if !self.objects.contains_key(&a.child) {
                return Err(WorldError::Dangling(a.child.clone()));
            }
            if let AttachmentParent::EnvironmentResting { surface } = &a.parent {
                if !self.surfaces.contains_key(surface) {
                    return Err(WorldError::Dangling(surface.clone()));
                }
            }
            let same_kind = self
                .attachments
                .iter()
                .filter(|b| b.child == a.child && b.parent.is_environment() == a.parent.is_environment())
                .count();
            if same_kind > 1 {
                return Err(WorldError::ConflictingAttachments(a.child.clone()));
            }
            held += usize::from(!a.parent.is_environment());
        }
        if held > 1 {
            return Err(WorldError::ConflictingAttachments("end-effector".into()));
        }
        Ok(())
    }
}
