//! Planar three-link arm: forward kinematics and damped-least-squares IK.

#![allow(clippy::needless_range_loop)]

use thiserror::Error;

use crate::linalg::solve3;
use crate::scalar::{normalize_angle, Real};
use crate::world::{angle_diff, pose_residual, JointVector, Pose2};

/// Link lengths of the simulated arm, meters.
pub const LINK_LENGTHS: [f64; 3] = [1.0, 1.0, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum IkError {
    #[error("target outside the arm workspace")]
    Unreachable,
    #[error("IK did not converge within the iteration cap")]
    NoConvergence,
}

#[derive(Debug, Clone, Copy)]
pub struct IkOptions<T> {
    pub damping: T,
    pub step_cap: T,
    pub max_iterations: usize,
    pub tolerance: T,
}

impl<T: Real> Default for IkOptions<T> {
    fn default() -> Self {
        Self {
            damping: T::lit(0.1),
            step_cap: T::lit(0.2),
            max_iterations: 200,
            tolerance: T::lit(1e-6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarArm<T> {
    pub links: [T; 3],
}

impl<T: Real> Default for PlanarArm<T> {
    fn default() -> Self {
        Self {
            links: LINK_LENGTHS.map(T::lit),
        }
    }
}

impl<T: Real> PlanarArm<T> {
    pub fn reach(&self) -> T {
        self.links[0] + self.links[1] + self.links[2]
    }

    pub fn forward(&self, q: &JointVector<T>) -> Pose2<T> {
        let mut phi = T::zero();
        let (mut x, mut y) = (T::zero(), T::zero());
        for (l, qi) in self.links.iter().zip(q.0) {
            phi = phi + qi;
            let (s, c) = phi.sin_cos();
            x = x + *l * c;
            y = y + *l * s;
        }
        Pose2::new(x, y, phi)
    }

    /// Rows: ∂x, ∂y, ∂θ with respect to each joint.
    pub fn jacobian(&self, q: &JointVector<T>) -> [[T; 3]; 3] {
        let mut phi = T::zero();
        let mut sx = [T::zero(); 3];
        let mut cy = [T::zero(); 3];
        for i in 0..3 {
            phi = phi + q.0[i];
            let (s, c) = phi.sin_cos();
            sx[i] = self.links[i] * s;
            cy[i] = self.links[i] * c;
        }
        let mut j = [[T::zero(); 3]; 3];
        for col in 0..3 {
            for i in col..3 {
                j[0][col] = j[0][col] - sx[i];
                j[1][col] = j[1][col] + cy[i];
            }
            j[2][col] = T::one();
        }
        j
    }

    /// Whether `target` lies in the workspace, including its heading: the
    /// wrist point must be reachable by the first two links.
    pub fn reachable(&self, target: &Pose2<T>) -> bool {
        if target.x.hypot(target.y) > self.reach() {
            return false;
        }
        let (s, c) = target.theta.sin_cos();
        let wx = target.x - self.links[2] * c;
        let wy = target.y - self.links[2] * s;
        let r = wx.hypot(wy);
        let eps = T::lit(1e-12);
        r <= self.links[0] + self.links[1] + eps && r + eps >= (self.links[0] - self.links[1]).abs()
    }

    pub fn inverse(
        &self,
        target: &Pose2<T>,
        seed: &JointVector<T>,
        opts: &IkOptions<T>,
    ) -> Result<JointVector<T>, IkError> {
        if !self.reachable(target) {
            return Err(IkError::Unreachable);
        }
        let mut q = *seed;
        for _ in 0..=opts.max_iterations {
            let cur = self.forward(&q);
            let err = pose_residual(&cur, target);
            if err <= opts.tolerance {
                return Ok(q);
            }
            // Damping fades with the error so the last steps converge like
            // Gauss-Newton instead of crawling near singular poses.
            let lambda = opts.damping * err.min(T::one());
            let lambda2 = lambda * lambda;
            let e = [
                target.x - cur.x,
                target.y - cur.y,
                angle_diff(target.theta, cur.theta),
            ];
            let j = self.jacobian(&q);
            // (J Jᵀ + λ² I) y = e, Δq = Jᵀ y
            let mut jjt = [[T::zero(); 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    let mut acc = T::zero();
                    for k in 0..3 {
                        acc = acc + j[r][k] * j[c][k];
                    }
                    jjt[r][c] = acc + if r == c { lambda2 } else { T::zero() };
                }
            }
            let yv = solve3(&jjt, &e).ok_or(IkError::NoConvergence)?;
            let mut dq = [T::zero(); 3];
            for (k, d) in dq.iter_mut().enumerate() {
                *d = j[0][k] * yv[0] + j[1][k] * yv[1] + j[2][k] * yv[2];
            }
            let peak = dq.iter().fold(T::zero(), |m, d| m.max(d.abs()));
            let scale = if peak > opts.step_cap { opts.step_cap / peak } else { T::one() };
            for k in 0..3 {
                q.0[k] = normalize_angle(q.0[k] + dq[k] * scale);
            }
        }
        Err(IkError::NoConvergence)
    }
}

pub fn forward_kinematics(joints: &JointVector<f64>) -> Pose2<f64> {
    PlanarArm::default().forward(joints)
}

pub fn inverse_kinematics(
    target: &Pose2<f64>,
    seed_config: &JointVector<f64>,
) -> Result<JointVector<f64>, IkError> {
    PlanarArm::default().inverse(target, seed_config, &IkOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn jv(a: f64, b: f64, c: f64) -> JointVector<f64> {
        JointVector([a, b, c])
    }

    fn near(p: Pose2<f64>, x: f64, y: f64, t: f64) {
        assert!(pose_residual(&p, &Pose2::new(x, y, t)) < 1e-12, "{p:?}");
    }

    #[test]
    fn fk_examples() {
        near(forward_kinematics(&jv(0.0, 0.0, 0.0)), 2.5, 0.0, 0.0);
        near(forward_kinematics(&jv(FRAC_PI_2, 0.0, 0.0)), 0.0, 2.5, FRAC_PI_2);
        near(forward_kinematics(&jv(FRAC_PI_2, -FRAC_PI_2, 0.0)), 1.5, 1.0, 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let arm = PlanarArm::<f64>::default();
        let q = jv(0.3, -0.7, 1.1);
        let j = arm.jacobian(&q);
        let h = 1e-7;
        for k in 0..3 {
            let mut qp = q;
            let mut qm = q;
            qp.0[k] += h;
            qm.0[k] -= h;
            let (a, b) = (arm.forward(&qp), arm.forward(&qm));
            let fd = [(a.x - b.x) / (2.0 * h), (a.y - b.y) / (2.0 * h), angle_diff(a.theta, b.theta) / (2.0 * h)];
            for r in 0..3 {
                assert!((fd[r] - j[r][k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ik_full_extension() {
        let t = Pose2::new(2.5, 0.0, 0.0);
        let q = inverse_kinematics(&t, &jv(0.0, 0.0, 0.0)).unwrap();
        assert!(pose_residual(&forward_kinematics(&q), &t) <= 1e-6);
    }

    #[test]
    fn ik_unreachable() {
        let t = Pose2::new(3.5, 0.0, 0.0);
        assert_eq!(inverse_kinematics(&t, &jv(0.0, 0.0, 0.0)), Err(IkError::Unreachable));
        // Reachable position but the heading puts the wrist beyond the first two links.
        let t = Pose2::new(2.4, 0.0, PI);
        assert_eq!(inverse_kinematics(&t, &jv(0.0, 0.0, 0.0)), Err(IkError::Unreachable));
    }

    #[test]
    fn ik_two_segment_target() {
        let t = Pose2::new(1.5, 1.0, 0.0);
        let q = inverse_kinematics(&t, &jv(0.1, 0.1, 0.1)).unwrap();
        assert!(q.within_limits());
        assert!(pose_residual(&forward_kinematics(&q), &t) <= 1e-6);
    }

    #[test]
    fn zero_iteration_when_seed_solves() {
        let q = jv(0.2, 0.4, -0.3);
        let t = forward_kinematics(&q);
        assert_eq!(inverse_kinematics(&t, &q).unwrap(), q);
    }

    #[test]
    fn f32_arm() {
        let arm = PlanarArm::<f32>::default();
        let p = arm.forward(&JointVector([0.0, 0.0, 0.0]));
        assert!((p.x - 2.5).abs() < 1e-6);
    }
}
