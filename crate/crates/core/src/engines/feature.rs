use serde::{Deserialize, Serialize};

use crate::wire::hexfloat::serde_f64;
use crate::world::{target_offset, Observation, ObservableState, WorldState};

use super::EngineError;

/// Geometric stand-in for rendered-image features.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisualFeatures {
    /// End-effector to target distance, negative when the target is behind the approach axis.
    #[serde(with = "serde_f64")]
    pub distance: f64,
    /// Target offset from the approach axis, positive to the left.
    #[serde(with = "serde_f64")]
    pub lateral: f64,
}

pub fn feature_extract(world: &WorldState) -> Result<VisualFeatures, EngineError> {
    let (distance, lateral) = target_offset(world).ok_or(EngineError::MissingTarget)?;
    Ok(VisualFeatures { distance, lateral })
}

/// Fuses visual features with force/proprioceptive readings into the policy observation.
pub fn postprocess(features: &VisualFeatures, observable: &ObservableState) -> Observation {
    Observation([
        observable.estimated_target_distance,
        features.lateral,
        observable.aperture,
        observable.jaw_torques[0],
        observable.jaw_torques[1],
        observable.wrist_force,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{observable_projection, JointVector, ObjectState, OBSERVATION_DIM};
    use crate::Pose;

    fn with_target(ee: Pose, target: Pose) -> WorldState {
        let mut w = WorldState::empty(JointVector::zero(), ee, 0.15);
        w.objects.insert(
            "cup".into(),
            ObjectState {
                pose: target,
                height: 0.0,
                width: 0.08,
                mass: 0.2,
                crushed: false,
            },
        );
        w.target = Some("cup".into());
        w
    }

    #[test]
    fn coincident_is_zero() {
        let p = Pose::new(1.8, 0.2, 0.4);
        let f = feature_extract(&with_target(p, p)).unwrap();
        assert_eq!((f.distance, f.lateral), (0.0, 0.0));
    }

    #[test]
    fn offset_target() {
        let f = feature_extract(&with_target(Pose::identity(), Pose::new(0.3, 0.04, 0.0))).unwrap();
        assert!((f.distance - (0.3f64 * 0.3 + 0.04 * 0.04).sqrt()).abs() < 1e-12);
        assert!((f.distance - 0.3027).abs() < 1e-4);
        assert!((f.lateral - 0.04).abs() < 1e-12);
    }

    #[test]
    fn missing_target() {
        let w = WorldState::empty(JointVector::zero(), Pose::identity(), 0.15);
        assert!(matches!(feature_extract(&w), Err(EngineError::MissingTarget)));
    }

    #[test]
    fn postprocess_zero_and_fieldwise() {
        let zero = ObservableState {
            joints: JointVector::zero(),
            ee: Pose::identity(),
            ee_height: 0.0,
            aperture: 0.0,
            wrist_force: 0.0,
            jaw_contacts: [false; 2],
            jaw_torques: [0.0; 2],
            estimated_target_distance: 0.0,
        };
        let o = postprocess(&VisualFeatures::default(), &zero);
        assert_eq!(o.0, [0.0; OBSERVATION_DIM]);

        let mut w = with_target(Pose::new(1.5, 0.1, 0.3), Pose::new(1.8, -0.05, 0.0));
        w.aperture = 0.07;
        w.wrist_force = 3.5;
        w.jaw_torques = [1.25, 1.5];
        w.distance_sigma = 0.01;
        let obs = observable_projection(&w, 42);
        let f = feature_extract(&w).unwrap();
        let o = postprocess(&f, &obs);
        assert_eq!(o.0.len(), OBSERVATION_DIM);
        assert_eq!(o.0[0], obs.estimated_target_distance);
        assert_eq!(o.0[1], f.lateral);
        assert_eq!(o.0[2], 0.07);
        assert_eq!(o.0[3], 1.25);
        assert_eq!(o.0[4], 1.5);
        assert_eq!(o.0[5], 3.5);
    }
}
