//! Kinematics of the 3-DoF manipulator: two links articulating in the body
//! x-z plane plus a wrist rotation.
//!
//! The arm base frame is a pure translation of the body frame by
//! `base_offset`. Shoulder and elbow rotate about the body y axis, with
//! positive angles swinging the end effector downward; at all-zero joints
//! the arm points straight out along body x. The wrist spins the tool about
//! the forearm axis and does not move the end-effector point.

use crate::model::{Mat2, RobotParams, RobotState, Vec2, Vec3};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ArmError {
    #[error(
        "target ({x:.3}, {z:.3}) m is unreachable: {distance:.4} m outside the annular workspace"
    )]
    Unreachable { x: f64, z: f64, distance: f64 },
    #[error("joint {joint} angle {angle:.4} rad violates its limit [{min:.4}, {max:.4}] rad")]
    JointLimit {
        /// 1 shoulder, 2 elbow, 3 wrist.
        joint: usize,
        angle: f64,
        min: f64,
        max: f64,
    },
}

/// Geometry, joint limits, and drive characteristics of the arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmGeometry {
    /// Arm base position in the body frame, m.
    pub base_offset: Vec3,
    /// Upper-arm length, m.
    pub l1: f64,
    /// Forearm length, m.
    pub l2: f64,
    /// Lower joint limits [shoulder, elbow, wrist], rad.
    pub q_min: Vec3,
    /// Upper joint limits, rad.
    pub q_max: Vec3,
    /// Link masses [upper, fore], kg, lumped at the link midpoints for the
    /// reaction-torque estimate.
    pub link_mass: [f64; 2],
    /// Joint drive first-order time constant, s.
    pub drive_tau: f64,
    /// Joint drive rate limit, rad/s.
    pub rate_limit: f64,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        Self {
            base_offset: Vec3::new(0.08, 0.0, -0.05),
            l1: 0.15,
            l2: 0.15,
            q_min: Vec3::new(-1.9, -2.7, -std::f64::consts::PI),
            q_max: Vec3::new(1.9, 2.7, std::f64::consts::PI),
            link_mass: [0.05, 0.05],
            drive_tau: 0.08,
            rate_limit: 3.5,
        }
    }
}

impl ArmGeometry {
    // Negated comparisons are deliberate: NaN fails every check this way.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validated(self) -> Result<Self, ArmError> {
        // Reuse the limit error for degenerate geometry reporting; joint 0
        // flags the geometry itself.
        for (i, (lo, hi)) in self.q_min.iter().zip(self.q_max.iter()).enumerate() {
            if !(lo < hi) {
                return Err(ArmError::JointLimit {
                    joint: i + 1,
                    angle: f64::NAN,
                    min: *lo,
                    max: *hi,
                });
            }
        }
        Ok(self)
    }

    /// Outer workspace radius, m.
    pub fn reach(&self) -> f64 {
        self.l1 + self.l2
    }

    /// Inner workspace radius, m (zero for equal links).
    pub fn inner_radius(&self) -> f64 {
        (self.l1 - self.l2).abs()
    }

    /// Effective inertia each joint reflects into the body pitch axis,
    /// kg m^2, with links lumped at midpoints and the elbow taken at the
    /// straight-arm worst case. Small and configuration-independent by
    /// construction; used for the arm reaction torque.
    pub fn joint_inertia(&self) -> Vec3 {
        let [m1, m2] = self.link_mass;
        let i1 = m1 * (0.5 * self.l1).powi(2) + m2 * (self.l1 + 0.5 * self.l2).powi(2);
        let i2 = m2 * (0.5 * self.l2).powi(2);
        // The wrist spins the tool about the forearm axis; its pitch
        // coupling is negligible but kept nonzero for form.
        Vec3::new(i1, i2, 1e-6)
    }

    fn check_limits(&self, q: &Vec3) -> Result<(), ArmError> {
        for i in 0..3 {
            if q[i] < self.q_min[i] || q[i] > self.q_max[i] {
                return Err(ArmError::JointLimit {
                    joint: i + 1,
                    angle: q[i],
                    min: self.q_min[i],
                    max: self.q_max[i],
                });
            }
        }
        Ok(())
    }
}

/// End-effector position in the arm base frame, ignoring limits. The plane
/// coordinates are (x forward, z up); positive joint angles reach down.
pub(crate) fn fk_unchecked(q: &Vec3, geom: &ArmGeometry) -> Vec2 {
    let (s1, c1) = q.x.sin_cos();
    let (s12, c12) = (q.x + q.y).sin_cos();
    Vec2::new(
        geom.l1 * c1 + geom.l2 * c12,
        -(geom.l1 * s1 + geom.l2 * s12),
    )
}

/// Forward kinematics: end-effector (x, z) in the arm base frame.
/// Out-of-limit joint angles are rejected.
pub fn fk(q: &Vec3, geom: &ArmGeometry) -> Result<Vec2, ArmError> {
    geom.check_limits(q)?;
    Ok(fk_unchecked(q, geom))
}

/// Inverse kinematics for a planar target and wrist angle.
///
/// Of the two elbow branches the lower elbow ("elbow down") is preferred,
/// keeping the elbow clear of the airframe; the other branch is used only
/// when the preferred one violates a joint limit. The branch choice is a
/// pure function of the target, so repeated calls can never flip between
/// solutions. Targets outside the annular workspace report how far out they
/// are; if both branches hit joint limits the error names the limit binding
/// the preferred branch.
pub fn ik(target: &Vec2, wrist: f64, geom: &ArmGeometry) -> Result<Vec3, ArmError> {
    let (x, z) = (target.x, target.y);
    let r = (x * x + z * z).sqrt();
    if r > geom.reach() {
        return Err(ArmError::Unreachable {
            x,
            z,
            distance: r - geom.reach(),
        });
    }
    if r < geom.inner_radius() {
        return Err(ArmError::Unreachable {
            x,
            z,
            distance: geom.inner_radius() - r,
        });
    }

    let cos_q2 = ((r * r - geom.l1 * geom.l1 - geom.l2 * geom.l2)
        / (2.0 * geom.l1 * geom.l2))
        .clamp(-1.0, 1.0);
    let q2_mag = cos_q2.acos();
    // Work in (x, u) with u measured downward so both axes follow the
    // usual planar two-link equations.
    let u = -z;
    let base = f64::atan2(u, x);
    let candidate = |q2: f64| {
        let q1 = base - f64::atan2(geom.l2 * q2.sin(), geom.l1 + geom.l2 * q2.cos());
        Vec3::new(q1, q2, wrist)
    };
    let a = candidate(q2_mag);
    let b = candidate(-q2_mag);
    // Elbow height decides the preferred branch.
    let elbow_z = |q: &Vec3| -geom.l1 * q.x.sin();
    let (first, second) = if elbow_z(&a) <= elbow_z(&b) {
        (a, b)
    } else {
        (b, a)
    };
    match geom.check_limits(&first) {
        Ok(()) => Ok(first),
        Err(first_err) => {
            if first != second && geom.check_limits(&second).is_ok() {
                Ok(second)
            } else {
                Err(first_err)
            }
        }
    }
}

/// Analytic Jacobian of the planar position w.r.t. the shoulder and elbow:
/// rows are d(x, z), columns d(q1, q2).
pub fn jacobian(q: &Vec3, geom: &ArmGeometry) -> Mat2 {
    let (s1, c1) = q.x.sin_cos();
    let (s12, c12) = (q.x + q.y).sin_cos();
    Mat2::new(
        -geom.l1 * s1 - geom.l2 * s12,
        -geom.l2 * s12,
        -(geom.l1 * c1 + geom.l2 * c12),
        -geom.l2 * c12,
    )
}

/// End-effector position in the world frame for the current robot state.
pub fn end_effector_world(state: &RobotState, geom: &ArmGeometry, _params: &RobotParams) -> Vec3 {
    let planar = fk_unchecked(&state.q_arm, geom);
    let in_body = geom.base_offset + Vec3::new(planar.x, 0.0, planar.y);
    state.p + state.r * in_body
}
