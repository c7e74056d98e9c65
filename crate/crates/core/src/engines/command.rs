use serde::{Deserialize, Serialize};

use crate::wire::hexfloat::{serde_array, serde_f64};

/// Per-step command limits: planar translation, rotation, aperture change, lift.
pub const MAX_TRANSLATION: f64 = 0.05;
pub const MAX_ROTATION: f64 = 0.2;
pub const MAX_APERTURE_DELTA: f64 = 0.02;
pub const MAX_LIFT_DELTA: f64 = 0.02;

/// End-effector command for one time step. `ee_delta` is a world-frame
/// displacement `(dx, dy, dtheta)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Command {
    #[serde(with = "serde_array")]
    pub ee_delta: [f64; 3],
    #[serde(with = "serde_f64")]
    pub aperture_delta: f64,
    #[serde(with = "serde_f64")]
    pub lift_delta: f64,
}

impl Command {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn translate(dx: f64, dy: f64) -> Self {
        Self {
            ee_delta: [dx, dy, 0.0],
            ..Self::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ee_delta.iter().all(|v| *v == 0.0) && self.aperture_delta == 0.0 && self.lift_delta == 0.0
    }

    pub fn has_planar_motion(&self) -> bool {
        self.ee_delta.iter().any(|v| *v != 0.0)
    }

    fn limits() -> [f64; 5] {
        [
            MAX_TRANSLATION,
            MAX_TRANSLATION,
            MAX_ROTATION,
            MAX_APERTURE_DELTA,
            MAX_LIFT_DELTA,
        ]
    }

    fn components(&self) -> [f64; 5] {
        let [dx, dy, dt] = self.ee_delta;
        [dx, dy, dt, self.aperture_delta, self.lift_delta]
    }

    pub fn within_limits(&self) -> bool {
        self.components()
            .iter()
            .zip(Self::limits())
            .all(|(v, l)| v.is_finite() && v.abs() <= l)
    }

    /// Componentwise clamp into the command limits; non-finite components become zero.
    pub fn clamped(&self) -> Self {
        let c = self.components();
        let l = Self::limits();
        let f = |i: usize| {
            if c[i].is_finite() {
                c[i].clamp(-l[i], l[i])
            } else {
                0.0
            }
        };
        Self {
            ee_delta: [f(0), f(1), f(2)],
            aperture_delta: f(3),
            lift_delta: f(4),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_respects_limits() {
        let c = Command {
            ee_delta: [1.0, -1.0, 3.0],
            aperture_delta: -0.5,
            lift_delta: f64::NAN,
        }
        .clamped();
        assert!(c.within_limits());
        assert_eq!(c.ee_delta, [0.05, -0.05, 0.2]);
        assert_eq!(c.aperture_delta, -0.02);
        assert_eq!(c.lift_delta, 0.0);
    }
}
