use serde::{Deserialize, Serialize};

use crate::scalar::{normalize_angle, Real};

/// Planar rigid pose: position in meters, heading in radians, heading kept in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> Pose2<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self {
            x: T::zero(),
            y: T::zero(),
            theta: T::zero(),
        }
    }

    /// `self ∘ other`: `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Self) -> Self {
        compose_pose(self, other)
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    pub fn position(&self) -> [T; 2] {
        [self.x, self.y]
    }

    /// Unit vector along the heading.
    pub fn heading(&self) -> [T; 2] {
        let (s, c) = self.theta.sin_cos();
        [c, s]
    }

    pub fn distance_to(&self, other: &Self) -> T {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

/// Planar rigid-motion composition `a ∘ b`.
pub fn compose_pose<T: Real>(a: &Pose2<T>, b: &Pose2<T>) -> Pose2<T> {
    let (s, c) = a.theta.sin_cos();
    Pose2::new(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )
}

/// Smallest signed difference `a − b` between two angles, in (−π, π].
pub fn angle_diff<T: Real>(a: T, b: T) -> T {
    normalize_angle(a - b)
}

/// Sum of Euclidean position error and absolute heading error.
pub fn pose_residual<T: Real>(a: &Pose2<T>, b: &Pose2<T>) -> T {
    a.distance_to(b) + angle_diff(a.theta, b.theta).abs()
}
