use std::sync::Arc;

use crate::concept::{
    Action, ActorRole, AttachmentPattern, ConceptModel, ContactTransition, GoalPredicate,
    InitialRule, Motion, ParameterSpec, Policy, PolicySource, PolicyView, ScrewClass,
    SufficientGoal, NECESSARY_EPSILON,
};
use crate::engines::Command;
use crate::world::{angle_diff, Observation, ObservableState, WorldState};
use crate::Pose;

use super::circle::circle_fit;
use super::scene::{door_actors, door_scene};

pub const DOOR_TARGET_ANGLE: f64 = std::f64::consts::FRAC_PI_3;
pub const DOOR_ARC_STEP: f64 = 0.02;
pub const DOOR_PROBE_STEPS: usize = 2;
/// Wrist force above which the necessary goal is violated, N.
pub const DOOR_FORCE_LIMIT: f64 = 15.0;
/// Final angle tolerance of the sufficient goal.
pub const DOOR_ANGLE_TOLERANCE: f64 = 2.0 * std::f64::consts::PI / 180.0;
pub const DOOR_MAX_STEPS: usize = 150;
/// Aim this far past the target so the last step lands on or beyond it.
const ANGLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoorSettings {
    pub target_angle: f64,
    pub arc_step: f64,
    pub probe_steps: usize,
}

impl Default for DoorSettings {
    fn default() -> Self {
        Self {
            target_angle: DOOR_TARGET_ANGLE,
            arc_step: DOOR_ARC_STEP,
            probe_steps: DOOR_PROBE_STEPS,
        }
    }
}

/// Online estimate of the door's hinge circle from end-effector positions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DoorEstimatorState {
    pub samples: Vec<[f64; 2]>,
    pub center_est: Option<[f64; 2]>,
    pub radius_est: Option<f64>,
    pub angle_progress: f64,
    /// +1 for counter-clockwise opening, −1 for clockwise, from the probe direction.
    pub direction: f64,
}

/// One estimating step: record the end-effector position, refit the circle,
/// and either probe, follow the estimated arc, or stop at the target angle.
///
/// Probing moves sideways to the right of the approach axis, which is the
/// opening direction of the door.
pub fn door_act(
    est: &DoorEstimatorState,
    _obs: &Observation,
    ee: &Pose,
    settings: &DoorSettings,
) -> (Action, DoorEstimatorState) {
    let mut est = est.clone();
    let p = ee.position();
    est.samples.push(p);

    if est.samples.len() >= 3 {
        if let Ok((c, r)) = circle_fit(&est.samples) {
            est.center_est = Some(c);
            est.radius_est = Some(r);
        }
    }

    let probing = est.samples.len() <= settings.probe_steps || est.center_est.is_none();
    if probing {
        let [hx, hy] = ee.heading();
        let d = settings.arc_step;
        return (Action::go(Command::translate(d * hy, -d * hx)), est);
    }

    let c = est.center_est.expect("fitted");
    let r = est.radius_est.expect("fitted");
    let first = est.samples[0];
    let a0 = (first[1] - c[1]).atan2(first[0] - c[0]);
    if est.direction == 0.0 {
        let second = est.samples[1];
        let cross = (first[0] - c[0]) * (second[1] - first[1]) - (first[1] - c[1]) * (second[0] - first[0]);
        est.direction = if cross >= 0.0 { 1.0 } else { -1.0 };
    }
    let phi = (p[1] - c[1]).atan2(p[0] - c[0]);
    est.angle_progress = est.direction * angle_diff(phi, a0);
    if est.angle_progress >= settings.target_angle {
        return (Action::done(), est);
    }
    let remaining = settings.target_angle + ANGLE_SLACK - est.angle_progress;
    let delta = (settings.arc_step / r).min(remaining);
    let next = phi + est.direction * delta;
    let goal = [c[0] + r * next.cos(), c[1] + r * next.sin()];
    (Action::go(Command::translate(goal[0] - p[0], goal[1] - p[1])), est)
}

struct DoorPolicy {
    est: DoorEstimatorState,
    settings: DoorSettings,
}

impl Policy for DoorPolicy {
    fn act(&mut self, view: &PolicyView<'_>) -> Action {
        let ee = match view {
            PolicyView::Full { world, .. } => world.ee,
            PolicyView::Observed { observable, .. } => observable.ee,
        };
        let (action, est) = door_act(&self.est, view.observation(), &ee, &self.settings);
        self.est = est;
        action
    }
}

pub fn door_model(settings: DoorSettings, force_limit: f64) -> ConceptModel {
    let actors = door_actors();
    let parameters = vec![
        ParameterSpec::known("arc_step", settings.arc_step),
        ParameterSpec::known("force_limit", force_limit),
        ParameterSpec::bound("hinge_radius", &actors, ActorRole::Environment, "hinge_radius"),
        ParameterSpec::known("target_angle_deg", settings.target_angle.to_degrees()),
    ];
    let target = settings.target_angle;
    ConceptModel {
        id: "door_open".into(),
        screw_class: ScrewClass {
            motion: Motion::Rotation,
            dof: 1,
            contact: ContactTransition::Maintain,
        },
        actor_configs: actors,
        initial: InitialRule {
            requires: AttachmentPattern::HeldHinged,
            produces: AttachmentPattern::HeldHinged,
            bootstrap: true,
        },
        necessary_goal: GoalPredicate::new(NECESSARY_EPSILON, move |_, now: &ObservableState| {
            (now.wrist_force - force_limit).max(0.0)
        }),
        sufficient_goal: SufficientGoal::Predicate(GoalPredicate::new(
            DOOR_ANGLE_TOLERANCE,
            move |_, now: &WorldState| {
                now.target_object()
                    .and_then(|(id, _)| now.door_angle(id))
                    .map_or(f64::INFINITY, |a| (a - target).abs())
            },
        )),
        parameters,
        max_steps: DOOR_MAX_STEPS,
        policy: PolicySource::Estimating(Arc::new(move |_| {
            Box::new(DoorPolicy {
                est: DoorEstimatorState::default(),
                settings,
            }) as Box<dyn Policy>
        })),
        scene: Arc::new(door_scene),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::physics_step;
    use crate::tasks::scene::DOOR;

    fn door_world(r: f64) -> WorldState {
        let mut actors = crate::concept::ResolvedActors::default();
        for (role, name, v) in [
            (ActorRole::Environment, "hinge_radius", r),
            (ActorRole::Environment, "distance_sigma", 0.0),
            (ActorRole::TargetObject, "width", 0.04),
            (ActorRole::TargetObject, "mass", 5.0),
            (ActorRole::EndEffector, "aperture_max", 0.15),
            (ActorRole::EndEffector, "grip_aperture", 0.03),
        ] {
            actors.properties.entry(role).or_default().insert(name.into(), v);
        }
        door_scene(&actors)
    }

    /// Runs the estimator directly against physics; returns the final world,
    /// the wrist force after every step and the final estimator state.
    fn rollout(r: f64) -> (WorldState, Vec<f64>, DoorEstimatorState) {
        let settings = DoorSettings::default();
        let mut w = door_world(r);
        let mut est = DoorEstimatorState::default();
        let mut forces = Vec::new();
        for _ in 0..DOOR_MAX_STEPS {
            let (a, next) = door_act(&est, &Observation::default(), &w.ee, &settings);
            assert!(a.terminate || next.angle_progress < settings.target_angle);
            est = next;
            if a.terminate {
                assert!(est.angle_progress >= settings.target_angle);
                return (w, forces, est);
            }
            w = physics_step(&w, &a.command.clamped());
            forces.push(w.wrist_force);
        }
        panic!("door did not finish");
    }

    #[test]
    fn opens_to_target_on_noiseless_run() {
        for r in [0.4, 0.7, 1.0] {
            let (w, forces, est) = rollout(r);
            let angle = w.door_angle(DOOR).unwrap();
            assert!((angle - DOOR_TARGET_ANGLE).abs() < DOOR_ANGLE_TOLERANCE, "r={r}: {angle}");
            assert!(forces.iter().skip(3).all(|f| *f <= DOOR_FORCE_LIMIT), "{forces:?}");
            assert!(forces.iter().skip(2).all(|f| *f < 1e-9), "r={r}: {forces:?}");
            let rr = est.radius_est.unwrap();
            assert!((rr - r).abs() / r < 0.01);
        }
    }

    #[test]
    fn radius_converges_in_ten_steps() {
        let settings = DoorSettings::default();
        let mut w = door_world(0.7);
        let mut est = DoorEstimatorState::default();
        for _ in 0..10 {
            let (a, next) = door_act(&est, &Observation::default(), &w.ee, &settings);
            est = next;
            w = physics_step(&w, &a.command.clamped());
        }
        assert!((est.radius_est.unwrap() - 0.7).abs() / 0.7 < 0.01);
    }

    #[test]
    fn wrist_force_measures_radius_error() {
        // A command along a wrong circle is pulled back onto the true one.
        let w = door_world(0.7);
        let off = physics_step(&w, &Command::translate(-0.02, -0.01));
        assert!(off.wrist_force > 1.0);
        let h = off.objects[DOOR].pose;
        assert!(((h.x - 1.2).hypot(h.y + 0.6) - 0.7).abs() < 1e-12);
    }
}
