use std::sync::Arc;

use crate::concept::{
    Action, AttachmentPattern, ConceptModel, ContactTransition, GoalPredicate, InitialRule, Motion,
    ParameterSpec, Policy, PolicySource, PolicyView, ScrewClass, SufficientGoal, NECESSARY_EPSILON,
};
use crate::engines::{Command, MAX_APERTURE_DELTA, MAX_LIFT_DELTA, MAX_ROTATION, MAX_TRANSLATION};
use crate::world::{angle_diff, ObservableState, WorldState};
use crate::Pose;

use super::scene::{tabletop_actors, tabletop_scene, TabletopStart, CARRY_HEIGHT};

/// Slack on height and distance comparisons of accumulated steps.
const REACHED: f64 = 1e-9;
pub const MOTION_MAX_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    Pick,
    Bring,
    Place,
    Release,
}

impl MotionKind {
    pub fn key(self) -> &'static str {
        match self {
            Self::Pick => "pick",
            Self::Bring => "bring",
            Self::Place => "place",
            Self::Release => "release",
        }
    }
}

/// Parameters of a programmed motion.
///
/// - pick: `height` is the lift.
/// - bring: `displacement` of the end-effector in the world frame, reached within `tolerance`.
/// - place: `height` is the nominal lowering used by the necessary cost.
/// - release: `height` is the retreat distance after letting go.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgrammedMotionSpec {
    pub kind: MotionKind,
    pub displacement: [f64; 3],
    pub height: f64,
    pub tolerance: f64,
}

impl ProgrammedMotionSpec {
    pub fn pick(lift: f64) -> Self {
        Self {
            kind: MotionKind::Pick,
            displacement: [0.0; 3],
            height: lift,
            tolerance: REACHED,
        }
    }

    pub fn bring(dx: f64, dy: f64, dtheta: f64, tolerance: f64) -> Self {
        Self {
            kind: MotionKind::Bring,
            displacement: [dx, dy, dtheta],
            height: 0.0,
            tolerance,
        }
    }

    pub fn place(lower: f64) -> Self {
        Self {
            kind: MotionKind::Place,
            displacement: [0.0; 3],
            height: lower,
            tolerance: REACHED,
        }
    }

    pub fn release(retreat: f64) -> Self {
        Self {
            kind: MotionKind::Release,
            displacement: [0.0; 3],
            height: retreat,
            tolerance: REACHED,
        }
    }

    /// Bring target for a motion starting at `origin`.
    pub fn target(&self, origin: &Pose) -> Pose {
        let [dx, dy, dt] = self.displacement;
        Pose::new(origin.x + dx, origin.y + dy, origin.theta + dt)
    }
}

/// End-effector pose and height when the motion started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionOrigin {
    pub ee: Pose,
    pub ee_height: f64,
}

impl MotionOrigin {
    pub fn of(world: &WorldState) -> Self {
        Self {
            ee: world.ee,
            ee_height: world.ee_height,
        }
    }
}

fn held_target(state: &WorldState) -> Option<&str> {
    let (id, _) = state.target_object()?;
    state.is_held(id).then_some(id)
}

fn lift(dz: f64) -> Action {
    Action::go(Command {
        lift_delta: dz,
        ..Command::zero()
    })
}

/// Lifts the held target until it is `spec.height` above the start. Without
/// a held target it gives up at once.
pub fn pick_act(state: &WorldState, spec: &ProgrammedMotionSpec, origin: &MotionOrigin) -> Action {
    if held_target(state).is_none() {
        return Action::done();
    }
    let remaining = spec.height - (state.ee_height - origin.ee_height);
    if remaining <= REACHED {
        Action::done()
    } else {
        lift(remaining.min(MAX_LIFT_DELTA))
    }
}

/// Step toward `target`, scaled uniformly so every component stays within the command limits.
fn straight_line(from: &Pose, target: &Pose) -> [f64; 3] {
    let d = [target.x - from.x, target.y - from.y, angle_diff(target.theta, from.theta)];
    let planar = d[0].hypot(d[1]);
    let mut s: f64 = 1.0;
    if planar > MAX_TRANSLATION {
        s = s.min(MAX_TRANSLATION / planar);
    }
    if d[2].abs() > MAX_ROTATION {
        s = s.min(MAX_ROTATION / d[2].abs());
    }
    d.map(|v| v * s)
}

fn bring_residual(ee: &Pose, target: &Pose) -> f64 {
    (target.x - ee.x)
        .hypot(target.y - ee.y)
        .max(angle_diff(target.theta, ee.theta).abs())
}

pub fn programmed_motion_act(state: &WorldState, spec: &ProgrammedMotionSpec, origin: &MotionOrigin) -> Action {
    match spec.kind {
        MotionKind::Pick => pick_act(state, spec, origin),
        MotionKind::Bring => {
            let target = spec.target(&origin.ee);
            if bring_residual(&state.ee, &target) <= spec.tolerance {
                return Action::done();
            }
            Action::go(Command {
                ee_delta: straight_line(&state.ee, &target),
                ..Command::zero()
            })
        }
        MotionKind::Place => {
            let Some(id) = held_target(state) else {
                return Action::done();
            };
            if state.resting_surface(id).is_some() {
                return Action::done();
            }
            let obj = &state.objects[id];
            match state.surface_below(obj.pose.x, obj.pose.y, obj.height) {
                Some((_, support)) => lift(-(obj.height - support).clamp(0.0, MAX_LIFT_DELTA)),
                None => Action::done(),
            }
        }
        MotionKind::Release => {
            if held_target(state).is_some() {
                return Action::go(Command {
                    aperture_delta: MAX_APERTURE_DELTA,
                    ..Command::zero()
                });
            }
            let [hx, hy] = origin.ee.heading();
            let back = -((state.ee.x - origin.ee.x) * hx + (state.ee.y - origin.ee.y) * hy);
            let remaining = spec.height - back;
            if remaining <= REACHED {
                return Action::done();
            }
            let step = remaining.min(MAX_TRANSLATION);
            Action::go(Command::translate(-step * hx, -step * hy))
        }
    }
}

struct MotionPolicy {
    spec: ProgrammedMotionSpec,
    origin: MotionOrigin,
}

impl Policy for MotionPolicy {
    fn act(&mut self, view: &PolicyView<'_>) -> Action {
        match view {
            PolicyView::Full { world, .. } => programmed_motion_act(world, &self.spec, &self.origin),
            // Programmed policies are always handed the full state.
            PolicyView::Observed { .. } => Action::done(),
        }
    }
}

fn contact_penalty(now: &ObservableState) -> f64 {
    if now.bilateral_contact() {
        0.0
    } else {
        1.0
    }
}

fn necessary(spec: ProgrammedMotionSpec) -> GoalPredicate<ObservableState> {
    GoalPredicate::new(NECESSARY_EPSILON, move |start: &ObservableState, now: &ObservableState| {
        match spec.kind {
            MotionKind::Pick => {
                contact_penalty(now) + (spec.height - (now.ee_height - start.ee_height)).max(0.0)
            }
            MotionKind::Bring => {
                let target = spec.target(&start.ee);
                (bring_residual(&now.ee, &target) - spec.tolerance).max(0.0)
            }
            MotionKind::Place => {
                contact_penalty(now) + (now.ee_height - (start.ee_height - spec.height)).max(0.0)
            }
            MotionKind::Release => {
                let contact = if now.jaw_contacts.iter().any(|c| *c) { 1.0 } else { 0.0 };
                let [hx, hy] = start.ee.heading();
                let back = -((now.ee.x - start.ee.x) * hx + (now.ee.y - start.ee.y) * hy);
                contact + (spec.height - back).max(0.0)
            }
        }
    })
}

fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

/// Full-state goal of each programmed motion, relative to the start world.
fn sufficient(spec: ProgrammedMotionSpec) -> GoalPredicate<WorldState> {
    GoalPredicate::new(NECESSARY_EPSILON, move |start: &WorldState, now: &WorldState| {
        let Some((id, obj)) = now.target_object() else {
            return f64::INFINITY;
        };
        let held = now.is_held(id);
        let resting = now.resting_surface(id).is_some();
        match spec.kind {
            MotionKind::Pick => {
                let raised = start
                    .objects
                    .get(id)
                    .map_or(0.0, |o0| obj.height - o0.height);
                flag(held && !resting && !obj.crushed) + (spec.height - raised - REACHED).max(0.0)
            }
            MotionKind::Bring => {
                let target = spec.target(&start.ee);
                flag(held) + (bring_residual(&now.ee, &target) - spec.tolerance).max(0.0)
            }
            MotionKind::Place => flag(held) + flag(resting),
            MotionKind::Release => flag(!held) + flag(resting),
        }
    })
}

pub fn motion_model(spec: ProgrammedMotionSpec, max_steps: usize) -> ConceptModel {
    let (screw_class, start) = match spec.kind {
        MotionKind::Pick => (
            ScrewClass {
                motion: Motion::Translation,
                dof: 1,
                contact: ContactTransition::Break,
            },
            TabletopStart::HeldOnTable,
        ),
        MotionKind::Bring => (
            ScrewClass {
                motion: Motion::Translation,
                dof: 3,
                contact: ContactTransition::Maintain,
            },
            TabletopStart::HeldOnTable,
        ),
        MotionKind::Place => (
            ScrewClass {
                motion: Motion::Translation,
                dof: 1,
                contact: ContactTransition::Make,
            },
            TabletopStart::HeldLifted,
        ),
        MotionKind::Release => (
            ScrewClass {
                motion: Motion::Translation,
                dof: 1,
                contact: ContactTransition::Break,
            },
            TabletopStart::HeldOnTable,
        ),
    };
    let produces = match spec.kind {
        MotionKind::Release => AttachmentPattern::Free,
        _ => AttachmentPattern::Held,
    };
    let mut parameters = match spec.kind {
        MotionKind::Pick => vec![ParameterSpec::known("lift", spec.height)],
        MotionKind::Bring => vec![
            ParameterSpec::known("dx", spec.displacement[0]),
            ParameterSpec::known("dy", spec.displacement[1]),
            ParameterSpec::known("dtheta", spec.displacement[2]),
            ParameterSpec::known("tolerance", spec.tolerance),
        ],
        MotionKind::Place => vec![ParameterSpec::known("lower", spec.height)],
        MotionKind::Release => vec![ParameterSpec::known("retreat", spec.height)],
    };
    parameters.sort_by(|a, b| a.name.cmp(&b.name));
    ConceptModel {
        id: spec.kind.key().into(),
        screw_class,
        actor_configs: tabletop_actors(),
        initial: InitialRule {
            requires: AttachmentPattern::Held,
            produces,
            bootstrap: false,
        },
        necessary_goal: necessary(spec),
        sufficient_goal: SufficientGoal::Predicate(sufficient(spec)),
        parameters,
        max_steps,
        policy: PolicySource::Programmed(Arc::new(move |start: &WorldState| {
            Box::new(MotionPolicy {
                spec,
                origin: MotionOrigin::of(start),
            }) as Box<dyn Policy>
        })),
        scene: Arc::new(move |actors| tabletop_scene(actors, start)),
    }
}

pub fn default_spec(kind: MotionKind) -> ProgrammedMotionSpec {
    match kind {
        MotionKind::Pick => ProgrammedMotionSpec::pick(CARRY_HEIGHT),
        MotionKind::Bring => ProgrammedMotionSpec::bring(0.0, 0.0, 0.0, 1e-3),
        MotionKind::Place => ProgrammedMotionSpec::place(CARRY_HEIGHT),
        MotionKind::Release => ProgrammedMotionSpec::release(0.05),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::ActorRole;
    use crate::engines::{physics_step, slip_threshold};
    use crate::tasks::scene::{BIN, TABLE, TARGET};

    fn scene(width: f64, mass: f64, start: TabletopStart) -> WorldState {
        let mut actors = crate::concept::ResolvedActors::default();
        let mut set = |role, name: &str, v| {
            actors.properties.entry(role).or_default().insert(name.to_string(), v);
        };
        set(ActorRole::TargetObject, "width", width);
        set(ActorRole::TargetObject, "mass", mass);
        set(ActorRole::EndEffector, "aperture_max", 0.15);
        set(ActorRole::Environment, "distance_sigma", 0.0);
        tabletop_scene(&actors, start)
    }

    /// Applies the programmed policy directly through physics until it terminates.
    fn rollout(world: WorldState, spec: ProgrammedMotionSpec) -> (WorldState, usize) {
        let origin = MotionOrigin::of(&world);
        let mut w = world;
        for step in 0..200 {
            let a = programmed_motion_act(&w, &spec, &origin);
            if a.terminate {
                return (w, step);
            }
            w = physics_step(&w, &a.command.clamped());
        }
        panic!("motion did not terminate");
    }

    fn with_grip(mut w: WorldState, force: f64) -> WorldState {
        let width = w.objects[TARGET].width;
        w.aperture = width - force / crate::engines::GRIP_STIFFNESS;
        physics_step(&w, &Command::zero())
    }

    #[test]
    fn pick_with_firm_grip_lifts() {
        let start = with_grip(scene(0.08, 0.2, TabletopStart::HeldOnTable), 10.0);
        assert!(10.0 >= slip_threshold(0.2));
        let (end, _) = rollout(start.clone(), ProgrammedMotionSpec::pick(0.05));
        assert!(sufficient(ProgrammedMotionSpec::pick(0.05)).satisfied(&start, &end));
        assert!((end.objects[TARGET].height - 0.05).abs() < 1e-9);
    }

    #[test]
    fn pick_with_weak_grip_drops() {
        let start = with_grip(scene(0.08, 0.2, TabletopStart::HeldOnTable), 2.0);
        assert!(start.is_held(TARGET));
        let (end, _) = rollout(start.clone(), ProgrammedMotionSpec::pick(0.05));
        assert!(!end.is_held(TARGET));
        assert!(!sufficient(ProgrammedMotionSpec::pick(0.05)).satisfied(&start, &end));
    }

    #[test]
    fn pick_without_attachment_gives_up() {
        let start = scene(0.08, 0.2, TabletopStart::Free);
        let (end, steps) = rollout(start.clone(), ProgrammedMotionSpec::pick(0.05));
        assert_eq!(steps, 0);
        assert!(!sufficient(ProgrammedMotionSpec::pick(0.05)).satisfied(&start, &end));
    }

    #[test]
    fn bring_reaches_displacement() {
        let start = scene(0.08, 0.2, TabletopStart::HeldLifted);
        let spec = ProgrammedMotionSpec::bring(0.3, 0.0, 0.0, 1e-3);
        let (end, steps) = rollout(start.clone(), spec);
        assert_eq!(steps, 6);
        assert!((end.ee.x - start.ee.x - 0.3).abs() <= 1e-3);
        let moved = end.objects[TARGET].pose.x - start.objects[TARGET].pose.x;
        assert!((moved - 0.3).abs() < 1e-6);
        assert!(sufficient(spec).satisfied(&start, &end));

        let (_, steps) = rollout(start, ProgrammedMotionSpec::bring(0.0, 0.0, 0.0, 1e-3));
        assert_eq!(steps, 0);
    }

    #[test]
    fn place_then_release_on_table() {
        let start = scene(0.08, 0.2, TabletopStart::HeldLifted);
        let place = ProgrammedMotionSpec::place(0.05);
        let (placed, _) = rollout(start.clone(), place);
        assert_eq!(placed.resting_surface(TARGET), Some(TABLE));
        assert!(placed.is_held(TARGET));
        assert!(sufficient(place).satisfied(&start, &placed));

        let release = ProgrammedMotionSpec::release(0.05);
        let (released, _) = rollout(placed.clone(), release);
        assert!(!released.is_held(TARGET));
        assert_eq!(released.wrist_force, 0.0);
        assert_eq!(released.jaw_torques, [0.0; 2]);
        assert_eq!(released.resting_surface(TARGET), Some(TABLE));
        assert!((released.ee.distance_to(&placed.ee) - 0.05).abs() < 1e-9);
        assert!(sufficient(release).satisfied(&placed, &released));
    }

    #[test]
    fn release_over_bin_drops_into_it() {
        let start = scene(0.08, 0.2, TabletopStart::HeldLifted);
        let (over, _) = rollout(start, ProgrammedMotionSpec::bring(0.0, 0.7, 0.0, 1e-3));
        let (end, _) = rollout(over, ProgrammedMotionSpec::release(0.05));
        assert_eq!(end.resting_surface(TARGET), Some(BIN));
    }
}
