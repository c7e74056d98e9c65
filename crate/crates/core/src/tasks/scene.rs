//! Fixed scene layouts. Actor configurations only vary the properties a
//! scenario may randomize or tune; positions stay put so every start pose is
//! reachable.

use std::f64::consts::FRAC_PI_2;

use crate::concept::{ActorConfiguration, ActorRole, PropertyValue, ResolvedActors};
use crate::engines::{inverse_kinematics, physics_step, Command};
use crate::world::{Attachment, AttachmentParent, JointVector, ObjectState, Surface, WorldState};
use crate::Pose;

pub const TARGET: &str = "object";
pub const DOOR: &str = "door";
pub const TABLE: &str = "table";
pub const BIN: &str = "bin";
pub const FLOOR: &str = "floor";

/// Gripper start pose for tabletop tasks, 0.3 m behind the object.
pub const TABLETOP_EE: [f64; 3] = [1.5, 0.0, 0.0];
pub const OBJECT_POSITION: [f64; 2] = [1.8, 0.0];
pub const BIN_CENTER: [f64; 2] = [1.8, 0.7];
pub const BIN_ELEVATION: f64 = -0.3;
pub const FLOOR_ELEVATION: f64 = -1.0;
/// Hinge position and closed-door angle.
pub const HINGE: [f64; 3] = [1.2, -0.6, FRAC_PI_2];
/// Default lift of a held object above its support when a scene starts lifted.
pub const CARRY_HEIGHT: f64 = 0.05;
/// Squeeze applied when a scene starts with the object already gripped (10 N).
const PRESET_SQUEEZE: f64 = 0.02;

fn fixed(v: f64) -> PropertyValue {
    PropertyValue::Fixed(v)
}

pub fn tabletop_actors() -> ActorConfiguration {
    ActorConfiguration::default()
        .with(ActorRole::TargetObject, "width", PropertyValue::Range([0.04, 0.12]))
        .with(ActorRole::TargetObject, "mass", fixed(0.2))
        .with(ActorRole::EndEffector, "aperture_max", fixed(0.15))
        .with(ActorRole::Environment, "distance_sigma", fixed(0.01))
}

pub fn door_actors() -> ActorConfiguration {
    ActorConfiguration::default()
        .with(ActorRole::TargetObject, "width", fixed(0.04))
        .with(ActorRole::TargetObject, "mass", fixed(5.0))
        .with(ActorRole::EndEffector, "aperture_max", fixed(0.15))
        .with(ActorRole::EndEffector, "grip_aperture", fixed(0.03))
        .with(ActorRole::Environment, "hinge_radius", PropertyValue::Range([0.4, 1.0]))
        .with(ActorRole::Environment, "distance_sigma", fixed(0.0))
}

/// Joint angles placing the end-effector at `ee`, tried from a few elbow seeds.
pub fn joints_for(ee: &Pose) -> Option<JointVector<f64>> {
    let seeds = [[0.5, -1.0, 0.5], [-0.5, 1.0, -0.5], [1.5, -1.5, -1.5], [0.0, 0.5, 0.0]];
    seeds
        .iter()
        .find_map(|s| inverse_kinematics(ee, &JointVector(*s)).ok())
}

fn with_robot(ee: Pose, aperture_max: f64) -> WorldState {
    let joints = joints_for(&ee).unwrap_or_else(|| {
        log::warn!("start pose {ee:?} is unreachable; joints left at zero");
        JointVector::zero()
    });
    WorldState::empty(joints, ee, aperture_max)
}

/// How the target starts out in a tabletop scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TabletopStart {
    /// Resting on the table, gripper open and 0.3 m away.
    Free,
    /// Gripped at rest on the table.
    HeldOnTable,
    /// Gripped and lifted to the carry height.
    HeldLifted,
}

pub fn tabletop_scene(actors: &ResolvedActors, start: TabletopStart) -> WorldState {
    let width = actors.require(ActorRole::TargetObject, "width");
    let mass = actors.require(ActorRole::TargetObject, "mass");
    let aperture_max = actors.require(ActorRole::EndEffector, "aperture_max");
    let sigma = actors.require(ActorRole::Environment, "distance_sigma");

    let [ox, oy] = OBJECT_POSITION;
    let ee = match start {
        TabletopStart::Free => Pose::new(TABLETOP_EE[0], TABLETOP_EE[1], TABLETOP_EE[2]),
        _ => Pose::new(ox, oy, 0.0),
    };
    let mut w = with_robot(ee, aperture_max);
    w.distance_sigma = sigma;
    w.surfaces.insert(
        TABLE.into(),
        Surface {
            center: [ox, oy],
            half_extents: [0.6, 0.45],
            elevation: 0.0,
        },
    );
    w.surfaces.insert(
        BIN.into(),
        Surface {
            center: BIN_CENTER,
            half_extents: [0.2, 0.2],
            elevation: BIN_ELEVATION,
        },
    );
    w.surfaces.insert(
        FLOOR.into(),
        Surface {
            center: [0.0, 0.0],
            half_extents: [10.0, 10.0],
            elevation: FLOOR_ELEVATION,
        },
    );
    w.objects.insert(
        TARGET.into(),
        ObjectState {
            pose: Pose::new(ox, oy, 0.0),
            height: 0.0,
            width,
            mass,
            crushed: false,
        },
    );
    w.target = Some(TARGET.into());
    w.attach(Attachment {
        child: TARGET.into(),
        parent: AttachmentParent::EnvironmentResting {
            surface: TABLE.into(),
        },
    });
    if start != TabletopStart::Free {
        w.aperture = (width - PRESET_SQUEEZE).max(0.0);
    }
    let mut w = physics_step(&w, &Command::zero());
    if start == TabletopStart::HeldLifted {
        w = physics_step(
            &w,
            &Command {
                lift_delta: CARRY_HEIGHT,
                ..Command::zero()
            },
        );
    }
    w
}

/// Door handle gripped at the closed position, approach axis pointing at the hinge.
pub fn door_scene(actors: &ResolvedActors) -> WorldState {
    let radius = actors.require(ActorRole::Environment, "hinge_radius");
    let width = actors.require(ActorRole::TargetObject, "width");
    let mass = actors.require(ActorRole::TargetObject, "mass");
    let aperture_max = actors.require(ActorRole::EndEffector, "aperture_max");
    let grip = actors.require(ActorRole::EndEffector, "grip_aperture");
    let sigma = actors.require(ActorRole::Environment, "distance_sigma");

    let [hx, hy, closed] = HINGE;
    let handle = Pose::new(hx + radius * closed.cos(), hy + radius * closed.sin(), closed + std::f64::consts::PI);
    let mut w = with_robot(handle, aperture_max);
    w.distance_sigma = sigma;
    w.aperture = grip.min(aperture_max);
    w.objects.insert(
        DOOR.into(),
        ObjectState {
            pose: handle,
            height: 0.0,
            width,
            mass,
            crushed: false,
        },
    );
    w.target = Some(DOOR.into());
    w.attach(Attachment {
        child: DOOR.into(),
        parent: AttachmentParent::EnvironmentRigid {
            hinge: Pose::new(hx, hy, closed),
            radius,
        },
    });
    w.attach(Attachment {
        child: DOOR.into(),
        parent: AttachmentParent::EndEffector {
            offset: Pose::identity(),
            lift_offset: 0.0,
        },
    });
    physics_step(&w, &Command::zero())
}
