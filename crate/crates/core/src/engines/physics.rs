//! Quasi-static attachment physics.
//!
//! There is no time integration: each step applies the command to the
//! end-effector, then enforces attachments. Held objects follow the gripper
//! rigidly, hinged objects are projected back onto their circle (the rejected
//! displacement shows up as wrist force), and gravity enters only through the
//! grip-force slip threshold when an object is lifted off its support.

use crate::engines::Command;
use crate::scalar::Real;
use crate::world::{Attachment, AttachmentParent, Pose2, WorldState};
use crate::Pose;

/// Jaw stiffness k_g, N/m.
pub const GRIP_STIFFNESS: f64 = 500.0;
/// Hinge constraint stiffness k_c, N/m.
pub const CONSTRAINT_STIFFNESS: f64 = 1000.0;
pub const GRAVITY: f64 = 9.81;
/// Lift acceleration assumed when breaking an object off its support, m/s².
pub const LIFT_ACCELERATION: f64 = 2.0;
pub const FRICTION: f64 = 0.5;
/// Grip force above which the object is marked crushed, N.
pub const CRUSH_FORCE: f64 = 20.0;
/// Planar distance within which the jaws can close on an object, m.
pub const GRASP_RANGE: f64 = 0.02;
/// Vertical tolerance between grasp point and object base for a grasp, m.
pub const GRASP_VERTICAL_RANGE: f64 = 0.01;
/// Elevation above the support at which a resting contact is broken, m.
pub const SUPPORT_BREAK_HEIGHT: f64 = 0.01;
/// Slack when deciding that a lowered object has reached a surface, m.
const LANDING_TOLERANCE: f64 = 1e-9;

/// Jaw squeeze force: k_g·(width − aperture) when the jaws press the object, else 0.
pub fn grip_force<T: Real>(object_width: T, aperture: T) -> T {
    if aperture < object_width {
        T::lit(GRIP_STIFFNESS) * (object_width - aperture)
    } else {
        T::zero()
    }
}

/// Minimum grip force that lifts `mass` without slipping: m·(g + a_lift)/μ.
pub fn slip_threshold<T: Real>(mass: T) -> T {
    mass * (T::lit(GRAVITY) + T::lit(LIFT_ACCELERATION)) / T::lit(FRICTION)
}

/// Closest point on the circle of `radius` about `center` to `p`.
/// A point at the center projects to `fallback`.
pub fn project_to_circle(p: [f64; 2], center: [f64; 2], radius: f64, fallback: [f64; 2]) -> [f64; 2] {
    let vx = p[0] - center[0];
    let vy = p[1] - center[1];
    let n = vx.hypot(vy);
    if n == 0.0 {
        return fallback;
    }
    [center[0] + radius * vx / n, center[1] + radius * vy / n]
}

/// Drops an unsupported, unheld object onto the highest surface beneath it.
fn settle(w: &mut WorldState, id: &str) {
    if w.is_held(id) || w.resting_surface(id).is_some() || w.hinge_of(id).is_some() {
        return;
    }
    let Some(obj) = w.objects.get(id) else { return };
    let (x, y, h) = (obj.pose.x, obj.pose.y, obj.height);
    if let Some((sid, elevation)) = w.surface_below(x, y, h) {
        let sid = sid.to_string();
        if let Some(o) = w.objects.get_mut(id) {
            o.height = elevation;
        }
        w.attach(Attachment {
            child: id.to_string(),
            parent: AttachmentParent::EnvironmentResting { surface: sid },
        });
    }
}

fn move_hinged(w: &mut WorldState, id: &str, offset: Pose, hinge: Pose, radius: f64, previous_height: f64) {
    let commanded = w.ee.compose(&offset);
    let old = w.objects[id].pose;
    let [px, py] = project_to_circle(
        commanded.position(),
        hinge.position(),
        radius,
        old.position(),
    );
    w.wrist_force = CONSTRAINT_STIFFNESS * (commanded.x - px).hypot(commanded.y - py);
    let handle = Pose2 {
        x: px,
        y: py,
        theta: commanded.theta,
    };
    w.ee = handle.compose(&offset.inverse());
    w.ee_height = previous_height;
    if let Some(o) = w.objects.get_mut(id) {
        o.pose = handle;
    }
}

fn move_carried(w: &mut WorldState, id: &str, offset: Pose, lift_offset: f64, lift: f64) {
    let carried = w.ee.compose(&offset);
    let mut elevation = w.ee_height - lift_offset;
    let obj = &w.objects[id];
    let grip = grip_force(obj.width, w.aperture);
    let holds = grip >= slip_threshold(obj.mass);
    let old_height = obj.height;

    if let Some(surface) = w.resting_surface(id).map(str::to_string) {
        let support = w.surfaces[&surface].elevation;
        if elevation < support {
            elevation = support;
            w.ee_height = support + lift_offset;
        }
        if elevation - support > SUPPORT_BREAK_HEIGHT {
            if holds {
                w.detach_resting(id);
            } else {
                // Slips out of the jaws and stays on its support.
                w.detach_from_ee(id);
                return;
            }
        }
    } else if lift > 0.0 && !holds {
        w.detach_from_ee(id);
        settle(w, id);
        return;
    }

    let o = w.objects.get_mut(id).expect("held object exists");
    o.pose = carried;
    o.height = elevation;

    if w.resting_surface(id).is_none() {
        if let Some((sid, support)) = w.surface_below(carried.x, carried.y, old_height) {
            if elevation <= support + LANDING_TOLERANCE {
                let sid = sid.to_string();
                w.objects.get_mut(id).expect("held object exists").height = support;
                w.ee_height = support + lift_offset;
                w.attach(Attachment {
                    child: id.to_string(),
                    parent: AttachmentParent::EnvironmentResting { surface: sid },
                });
            }
        }
    }
}

/// Nearest free object the jaws are closing on, if any.
fn grasp_candidate(w: &WorldState) -> Option<String> {
    w.objects
        .iter()
        .filter(|(id, o)| {
            w.hinge_of(id).is_none()
                && w.aperture <= o.width
                && w.ee.distance_to(&o.pose) <= GRASP_RANGE
                && (w.ee_height - o.height).abs() <= GRASP_VERTICAL_RANGE
        })
        .min_by(|a, b| {
            w.ee.distance_to(&a.1.pose)
                .total_cmp(&w.ee.distance_to(&b.1.pose))
                .then_with(|| a.0.cmp(b.0))
        })
        .map(|(id, _)| id.clone())
}

/// Applies one command to the world and enforces every attachment.
pub fn physics_step(world: &WorldState, command: &Command) -> WorldState {
    let mut w = world.clone();
    w.wrist_force = 0.0;
    w.aperture = (w.aperture + command.aperture_delta).clamp(0.0, w.aperture_max);

    // Opening past the held object's width releases it.
    if let Some((id, _, _)) = w.held() {
        let id = id.to_string();
        if w.aperture > w.objects[&id].width {
            w.detach_from_ee(&id);
            settle(&mut w, &id);
        }
    }

    let [dx, dy, dtheta] = command.ee_delta;
    let previous_height = w.ee_height;
    w.ee = Pose::new(w.ee.x + dx, w.ee.y + dy, w.ee.theta + dtheta);
    w.ee_height += command.lift_delta;

    if let Some((id, offset, lift_offset)) = w.held() {
        let id = id.to_string();
        match w.hinge_of(&id) {
            Some((hinge, radius)) => move_hinged(&mut w, &id, offset, hinge, radius, previous_height),
            None => move_carried(&mut w, &id, offset, lift_offset, command.lift_delta),
        }
    }

    if w.held().is_none() {
        if let Some(id) = grasp_candidate(&w) {
            let obj = &w.objects[&id];
            let attachment = Attachment {
                child: id.clone(),
                parent: AttachmentParent::EndEffector {
                    offset: w.ee.inverse().compose(&obj.pose),
                    lift_offset: w.ee_height - obj.height,
                },
            };
            w.attach(attachment);
        }
    }

    match w.held() {
        Some((id, _, _)) => {
            let id = id.to_string();
            let obj = w.objects.get_mut(&id).expect("held object exists");
            let force = grip_force(obj.width, w.aperture);
            if force > CRUSH_FORCE {
                obj.crushed = true;
            }
            w.jaw_contacts = [true, true];
            w.jaw_torques = [force / 2.0; 2];
        }
        None => {
            w.jaw_contacts = [false, false];
            w.jaw_torques = [0.0; 2];
        }
    }
    w
}
