use std::sync::Arc;

use crate::concept::{
    Action, ActorRole, AttachmentPattern, ConceptModel, ContactTransition, GoalPredicate,
    InitialRule, Motion, ParameterSpec, Policy, PolicyFamily, PolicySource, PolicyView, ScrewClass,
    SufficientGoal, NECESSARY_EPSILON,
};
use crate::engines::{Command, MAX_APERTURE_DELTA, MAX_TRANSLATION};
use crate::world::{Observation, ObservableState, OBSERVATION_DIM};
use crate::Pose;

use super::scene::{tabletop_actors, tabletop_scene, TabletopStart};

pub const GRASP_FAMILY: &str = "grasp-linear-6x4";
pub const GRASP_OUTPUTS: usize = 4;
pub const GRASP_PARAM_DIM: usize = OBSERVATION_DIM * GRASP_OUTPUTS;
/// Per-entry observation scales: distance, lateral and aperture in 0.1 m,
/// jaw torques in 5 N·m, wrist force in 10 N.
pub const OBSERVATION_SCALE: [f64; OBSERVATION_DIM] = [0.1, 0.1, 0.1, 5.0, 5.0, 10.0];
pub const GRASP_MAX_STEPS: usize = 100;

/// Linear map from the scaled observation to
/// `[advance, lateral, close, terminate-logit]`, stored row-major: entry
/// `i * 4 + j` weights observation `i` into output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspPolicyParams {
    pub weights: [f64; GRASP_PARAM_DIM],
}

impl GraspPolicyParams {
    pub fn zero() -> Self {
        Self {
            weights: [0.0; GRASP_PARAM_DIM],
        }
    }

    pub fn from_slice(params: &[f64]) -> Option<Self> {
        let weights = params.try_into().ok()?;
        Some(Self { weights })
    }

    pub fn set(&mut self, input: usize, output: usize, w: f64) {
        self.weights[input * GRASP_OUTPUTS + output] = w;
    }

    /// Hand-tuned reference policy: advance proportional to the distance
    /// estimate, close once the target is near, and stop when the jaw torque
    /// is high relative to the remaining aperture.
    pub fn hand_built() -> Self {
        let mut p = Self::zero();
        // advance ← distance
        p.set(0, 0, 1.0);
        // lateral ← lateral offset
        p.set(1, 1, 1.0);
        // close ← aperture, held back by distance and by jaw torque
        p.set(0, 2, -2.0);
        p.set(2, 2, 0.5);
        p.set(3, 2, -0.05);
        p.set(4, 2, -0.05);
        // terminate ← torques − 3.2·aperture
        p.set(3, 3, 1.0);
        p.set(4, 3, 1.0);
        p.set(2, 3, -3.2);
        p
    }

    fn outputs(&self, obs: &Observation) -> [f64; GRASP_OUTPUTS] {
        let mut y = [0.0; GRASP_OUTPUTS];
        for (i, (o, s)) in obs.0.iter().zip(OBSERVATION_SCALE).enumerate() {
            let x = o / s;
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += self.weights[i * GRASP_OUTPUTS + j] * x;
            }
        }
        y
    }
}

/// Grasp policy step. Advance and lateral motion are expressed along and
/// across the approach axis given by the end-effector heading, so the
/// observable end-effector pose is needed to map them into the world frame.
pub fn grasp_act(params: &GraspPolicyParams, obs: &Observation, ee: &Pose) -> Action {
    let y = params.outputs(obs);
    let unit = |v: f64| if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
    let advance = unit(y[0]) * MAX_TRANSLATION;
    let lateral = unit(y[1]) * MAX_TRANSLATION;
    let close = unit(y[2]) * MAX_APERTURE_DELTA;
    let [hx, hy] = ee.heading();
    let command = Command {
        ee_delta: [advance * hx - lateral * hy, advance * hy + lateral * hx, 0.0],
        aperture_delta: -close,
        lift_delta: 0.0,
    };
    Action {
        command: command.clamped(),
        terminate: y[3] > 0.0,
    }
}

struct LinearGraspPolicy(GraspPolicyParams);

impl Policy for LinearGraspPolicy {
    fn act(&mut self, view: &PolicyView<'_>) -> Action {
        let ee = match view {
            PolicyView::Full { world, .. } => world.ee,
            PolicyView::Observed { observable, .. } => observable.ee,
        };
        grasp_act(&self.0, view.observation(), &ee)
    }
}

/// Distance to the target plus a unit penalty without bilateral jaw contact.
pub fn grasp_cost(now: &ObservableState) -> f64 {
    let contact = if now.bilateral_contact() { 0.0 } else { 1.0 };
    now.estimated_target_distance.abs() + contact
}

pub fn grasp_model() -> ConceptModel {
    let actors = tabletop_actors();
    let parameters = vec![
        ParameterSpec::bound("object_width", &actors, ActorRole::TargetObject, "width"),
        ParameterSpec::bound("object_mass", &actors, ActorRole::TargetObject, "mass"),
    ];
    ConceptModel {
        id: "grasp".into(),
        screw_class: ScrewClass {
            motion: Motion::Translation,
            dof: 1,
            contact: ContactTransition::Make,
        },
        actor_configs: actors,
        initial: InitialRule {
            requires: AttachmentPattern::Free,
            produces: AttachmentPattern::Held,
            bootstrap: true,
        },
        necessary_goal: GoalPredicate::new(NECESSARY_EPSILON, |_, now| grasp_cost(now)),
        sufficient_goal: SufficientGoal::SubsequentTask(vec!["pick".into()]),
        parameters,
        max_steps: GRASP_MAX_STEPS,
        policy: PolicySource::Learned {
            family: PolicyFamily {
                name: GRASP_FAMILY.into(),
                dim: GRASP_PARAM_DIM,
            },
            build: Arc::new(|params| {
                let p = GraspPolicyParams::from_slice(params).expect("dimension checked by the family");
                Box::new(LinearGraspPolicy(p)) as Box<dyn Policy>
            }),
        },
        scene: Arc::new(|actors| tabletop_scene(actors, TabletopStart::Free)),
    }
}
