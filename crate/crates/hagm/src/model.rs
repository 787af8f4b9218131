//! Shared state, parameter, and rotation types.
//!
//! Conventions used throughout the crate: the world frame is Z-up, the body
//! frame has x forward (wheel rolling direction), y left, z up, and rotation
//! matrices map body coordinates to world coordinates. Euler angles are
//! intrinsic Z-Y-X: yaw about world z, then pitch about the intermediate y,
//! then roll about the body x.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3, Vector4};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Vec4 = Vector4<f64>;
pub type Mat2 = Matrix2<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter `{field}` invalid: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("matrix is not skew-symmetric (asymmetry {asymmetry:.3e})")]
    NotSkewSymmetric { asymmetry: f64 },
}

fn bad(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParam {
        field,
        reason: reason.into(),
    }
}

/// Physical and actuator constants for the vehicle.
///
/// The defaults describe a 2.655 kg quadrotor with a 0.45 m motor diagonal
/// riding on a single 4 cm wheel, with the thrust coefficient sized so that
/// hover sits at exactly half the total thrust ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotParams {
    /// Vehicle mass, kg.
    pub m: f64,
    /// Body inertia about the center of mass, kg m^2.
    pub j: Mat3,
    /// Rotor arm length from body origin to each motor, m.
    pub l: f64,
    /// Thrust coefficient: one rotor at speed v produces c_t * v^2 N.
    pub c_t: f64,
    /// Rotor drag (yaw) coefficient, N m per (rad/s)^2.
    pub c_d: f64,
    /// Minimum sustained rotor speed, rad/s. Rotors cannot stop or reverse.
    pub v_min: f64,
    /// Maximum rotor speed, rad/s.
    pub v_max: f64,
    /// Wheel assembly spin inertia about its axle, kg m^2.
    pub j_w: f64,
    /// Wheel radius, m.
    pub r: f64,
    /// Distance from body origin to the wheel contact point, m. The contact
    /// point sits at `p + R * [0, 0, -l_z]`.
    pub l_z: f64,
    /// Center-of-mass offset from the body origin, body frame, m.
    pub d_cg: Vec3,
    /// Constant feedforward torque bias (e.g. cable pull), body frame, N m.
    pub tau_c: Vec3,
    /// Ground-mode thrust margin above the floor, as a fraction of the
    /// total thrust ceiling.
    pub t_ground_frac: f64,
    /// Wheel-ground Coulomb friction coefficient.
    pub mu: f64,
    /// Electrical power coefficient: P = c_p * sum(v_i^3) W.
    pub c_p: f64,
    /// Gravitational acceleration, m/s^2.
    pub g: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        let m = 2.655;
        let g = 9.81;
        let v_max = 1000.0;
        // Hover at half the thrust ceiling: 4 c_t v_max^2 = 2 m g.
        let c_t = m * g / (2.0 * v_max * v_max);
        Self {
            m,
            j: Mat3::from_diagonal(&Vec3::new(0.03, 0.03, 0.05)),
            l: 0.225,
            c_t,
            c_d: c_t / 10.0,
            v_min: 100.0,
            v_max,
            j_w: 2.44e-4,
            r: 0.04,
            l_z: 0.20,
            d_cg: Vec3::zeros(),
            tau_c: Vec3::zeros(),
            t_ground_frac: 0.075,
            mu: 0.8,
            c_p: 1.77e-7,
            g,
        }
    }
}

impl RobotParams {
    /// Validates every physical invariant, returning the parameters unchanged
    /// on success. Construction sites that accept external input must call
    /// this before using the values.
    // Negated comparisons are deliberate: NaN fails every check this way.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validated(self) -> Result<Self, ModelError> {
        if !(self.m > 0.0) {
            return Err(bad("m", "mass must be positive"));
        }
        let sym_err = (self.j - self.j.transpose()).norm();
        if sym_err > 1e-12 * self.j.norm().max(1.0) {
            return Err(bad("j", "inertia matrix must be symmetric"));
        }
        if self.j.cholesky().is_none() {
            return Err(bad("j", "inertia matrix must be positive definite"));
        }
        if !(self.l > 0.0) {
            return Err(bad("l", "rotor arm length must be positive"));
        }
        if !(self.c_t > 0.0) {
            return Err(bad("c_t", "thrust coefficient must be positive"));
        }
        if !(self.c_d > 0.0) {
            return Err(bad("c_d", "drag coefficient must be positive"));
        }
        if !(self.v_min >= 0.0) {
            return Err(bad("v_min", "minimum rotor speed cannot be negative"));
        }
        if !(self.v_max > self.v_min) {
            return Err(bad("v_max", "must exceed v_min"));
        }
        if !(self.j_w > 0.0) {
            return Err(bad("j_w", "wheel inertia must be positive"));
        }
        if !(self.r > 0.0) {
            return Err(bad("r", "wheel radius must be positive"));
        }
        if !(self.l_z > 0.0) {
            return Err(bad("l_z", "contact lever must be positive"));
        }
        if !(0.0..1.0).contains(&self.t_ground_frac) {
            return Err(bad("t_ground_frac", "must lie in [0, 1)"));
        }
        if !(self.mu >= 0.0) {
            return Err(bad("mu", "friction coefficient cannot be negative"));
        }
        if !(self.c_p >= 0.0) {
            return Err(bad("c_p", "power coefficient cannot be negative"));
        }
        if !(self.g > 0.0) {
            return Err(bad("g", "gravity must be positive"));
        }
        if !(self.d_cg.iter().all(|x| x.is_finite()) && self.tau_c.iter().all(|x| x.is_finite())) {
            return Err(bad("d_cg", "offsets and biases must be finite"));
        }
        Ok(self)
    }

    /// Total thrust with all four rotors at `v_max`, N.
    pub fn t_max(&self) -> f64 {
        4.0 * self.c_t * self.v_max * self.v_max
    }

    /// Total thrust with all four rotors at `v_min`, N. Thrust can never be
    /// commanded below this floor while the rotors spin.
    pub fn t_min(&self) -> f64 {
        4.0 * self.c_t * self.v_min * self.v_min
    }

    /// Weight force, N.
    pub fn hover_thrust(&self) -> f64 {
        self.m * self.g
    }
}

/// Flight/drive mode. Ground mode keeps the wheel contact constraint active;
/// aerial mode is free rigid-body flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Ground,
    Aerial,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Ground => "ground",
            Mode::Aerial => "aerial",
        }
    }
}

/// Full simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    /// Body origin position, world frame, m.
    pub p: Vec3,
    /// Body origin velocity, world frame, m/s.
    pub v: Vec3,
    /// Body-to-world rotation.
    pub r: Mat3,
    /// Angular velocity, body frame, rad/s.
    pub omega: Vec3,
    /// Wheel spin rate about its axle, rad/s. Positive rolls forward (+x).
    pub omega_w: f64,
    /// Arm joint angles [shoulder, elbow, wrist], rad.
    pub q_arm: Vec3,
    pub mode: Mode,
}

impl RobotState {
    /// At rest on level ground at the world origin, facing `yaw`.
    pub fn grounded(yaw: f64, params: &RobotParams) -> Self {
        Self {
            p: Vec3::new(0.0, 0.0, params.l_z),
            v: Vec3::zeros(),
            r: rotation_z(yaw),
            omega: Vec3::zeros(),
            omega_w: 0.0,
            q_arm: Vec3::zeros(),
            mode: Mode::Ground,
        }
    }

    /// Hovering at `p`, level, facing `yaw`.
    pub fn hovering(p: Vec3, yaw: f64) -> Self {
        Self {
            p,
            v: Vec3::zeros(),
            r: rotation_z(yaw),
            omega: Vec3::zeros(),
            omega_w: 0.0,
            q_arm: Vec3::zeros(),
            mode: Mode::Aerial,
        }
    }

    /// World position of the wheel contact point, `p + R [0, 0, -l_z]`.
    pub fn contact_point(&self, params: &RobotParams) -> Vec3 {
        self.p - params.l_z * self.r.column(2)
    }

    /// World velocity of the wheel contact point.
    pub fn contact_velocity(&self, params: &RobotParams) -> Vec3 {
        self.v - params.l_z * self.r * self.omega.cross(&Vec3::z())
    }

    /// Height of the contact point above the ground plane, m.
    pub fn contact_height(&self, params: &RobotParams) -> f64 {
        self.contact_point(params).z
    }

    /// Unit heading: the wheel rolling direction projected onto the ground
    /// plane. Falls back to world x when body x points straight up or down.
    pub fn heading(&self) -> Vec3 {
        ground_heading(&self.r)
    }
}

/// Unit ground-plane projection of the body x axis.
pub fn ground_heading(r: &Mat3) -> Vec3 {
    let bx = r.column(0);
    let h = Vec3::new(bx[0], bx[1], 0.0);
    let n = h.norm();
    if n < 1e-9 {
        Vec3::x()
    } else {
        h / n
    }
}

/// Collective thrust along body z plus body torque, the interface between
/// the controllers and the allocator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    /// Collective thrust along body +z, N.
    pub thrust: f64,
    /// Body torque [roll, pitch, yaw], N m.
    pub tau: Vec3,
}

impl ControlInput {
    pub fn new(thrust: f64, tau: Vec3) -> Self {
        Self { thrust, tau }
    }
}

/// Rotor speeds [v1, v2, v3, v4], rad/s. Motor order: 1 front-right,
/// 2 back-left, 3 front-left, 4 back-right, with 1 and 2 spinning opposite
/// to 3 and 4. Allocator outputs always lie within [v_min, v_max].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorSpeeds {
    pub v: Vec4,
}

impl MotorSpeeds {
    pub fn new(v: Vec4) -> Self {
        Self { v }
    }

    pub fn uniform(v: f64) -> Self {
        Self { v: Vec4::repeat(v) }
    }

    /// Electrical power draw, W: `c_p * sum(v_i^3)`.
    pub fn power(&self, params: &RobotParams) -> f64 {
        params.c_p * self.v.iter().map(|v| v.powi(3)).sum::<f64>()
    }
}

/// Controller gains for the attitude cascade, wheel drive, and aerial
/// position loop. All per-axis vectors are [x, y, z] diagonal gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    /// Attitude-error to body-rate proportional gain, 1/s.
    pub k_p_att: Vec3,
    /// Body-rate PID proportional gain, N m s/rad.
    pub k_p_rate: Vec3,
    /// Body-rate PID integral gain, N m/rad.
    pub k_i_rate: Vec3,
    /// Body-rate PID derivative gain, N m s^2/rad.
    pub k_d_rate: Vec3,
    /// Cap on the integral term's torque contribution per axis, N m.
    pub integral_limit: Vec3,
    /// Wheel drive gain: torque per commanded wheel rate, N m s/rad.
    pub k_wheel: f64,
    /// Drive the wheel from rate error instead of open-loop from the rate
    /// command. The open-loop law matches the flight firmware; closing the
    /// loop is needed for precise ground positioning.
    pub wheel_closed_loop: bool,
    /// Aerial position proportional gain, 1/s^2.
    pub k_p_pos: Vec3,
    /// Aerial velocity gain, 1/s.
    pub k_d_pos: Vec3,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k_p_att: Vec3::new(10.0, 10.0, 6.0),
            k_p_rate: Vec3::new(3.0, 3.0, 1.0),
            k_i_rate: Vec3::new(4.0, 4.0, 0.5),
            k_d_rate: Vec3::new(0.03, 0.03, 0.0),
            // Roughly 30% of the per-axis torque authority of the default
            // vehicle; see `allocation::FeasibleSets` for where these spans
            // come from.
            integral_limit: Vec3::new(1.2, 1.2, 0.75),
            k_wheel: 0.02,
            wheel_closed_loop: false,
            k_p_pos: Vec3::new(4.0, 4.0, 6.0),
            k_d_pos: Vec3::new(3.5, 3.5, 4.5),
        }
    }
}

impl ControllerGains {
    pub fn validated(self) -> Result<Self, ModelError> {
        let all = [
            ("k_p_att", &self.k_p_att),
            ("k_p_rate", &self.k_p_rate),
            ("k_i_rate", &self.k_i_rate),
            ("k_d_rate", &self.k_d_rate),
            ("integral_limit", &self.integral_limit),
            ("k_p_pos", &self.k_p_pos),
            ("k_d_pos", &self.k_d_pos),
        ];
        for (name, v) in all {
            if !v.iter().all(|x| x.is_finite() && *x >= 0.0) {
                return Err(bad(name, "gains must be finite and non-negative"));
            }
        }
        if !(self.k_wheel.is_finite() && self.k_wheel >= 0.0) {
            return Err(bad("k_wheel", "gain must be finite and non-negative"));
        }
        Ok(self)
    }
}

/// Band-limited stochastic disturbance: each force/torque axis is a sum of
/// `components` sinusoids with random frequencies inside `band_hz` and random
/// phases, scaled so the time-averaged variance per axis is sigma^2. A model
/// is a pure function of time once seeded, so integrators may evaluate it at
/// arbitrary substage times and reruns are bit-for-bit repeatable.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpec {
    /// Per-axis force standard deviation, body frame, N.
    pub sigma_force: f64,
    /// Per-axis torque standard deviation, body frame, N m.
    pub sigma_torque: f64,
    /// Frequency band [low, high], Hz.
    pub band_hz: (f64, f64),
    /// Sinusoids per axis.
    pub components: usize,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self {
            sigma_force: 0.0,
            sigma_torque: 0.0,
            band_hz: (0.2, 8.0),
            components: 16,
        }
    }
}

impl DisturbanceSpec {
    pub fn with_sigmas(sigma_force: f64, sigma_torque: f64) -> Self {
        Self {
            sigma_force,
            sigma_torque,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
struct SinusoidBank {
    /// (angular frequency rad/s, phase rad) pairs.
    terms: Vec<(f64, f64)>,
    amplitude: f64,
}

impl SinusoidBank {
    fn sample(rng: &mut ChaCha8Rng, spec: &DisturbanceSpec, sigma: f64) -> Self {
        let (lo, hi) = spec.band_hz;
        let terms = (0..spec.components)
            .map(|_| {
                let f = rng.random_range(lo..=hi);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (std::f64::consts::TAU * f, phase)
            })
            .collect();
        // Each sinusoid contributes amplitude^2 / 2 to the variance.
        let amplitude = sigma * (2.0 / spec.components as f64).sqrt();
        Self { terms, amplitude }
    }

    fn at(&self, t: f64) -> f64 {
        self.amplitude
            * self
                .terms
                .iter()
                .map(|(w, phi)| (w * t + phi).sin())
                .sum::<f64>()
    }
}

/// Seeded realization of a [`DisturbanceSpec`]: three force channels and
/// three torque channels, all in the body frame, plus optional constant
/// offsets (a steady wind component or cable pull).
#[derive(Debug, Clone)]
pub struct DisturbanceModel {
    force: [SinusoidBank; 3],
    torque: [SinusoidBank; 3],
    force_bias: Vec3,
    torque_bias: Vec3,
}

impl DisturbanceModel {
    pub fn new(spec: &DisturbanceSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let force = std::array::from_fn(|_| SinusoidBank::sample(&mut rng, spec, spec.sigma_force));
        let torque =
            std::array::from_fn(|_| SinusoidBank::sample(&mut rng, spec, spec.sigma_torque));
        Self {
            force,
            torque,
            force_bias: Vec3::zeros(),
            torque_bias: Vec3::zeros(),
        }
    }

    /// No disturbance at all.
    pub fn zero() -> Self {
        Self::new(&DisturbanceSpec::default(), 0)
    }

    /// Adds constant force/torque offsets on top of the stochastic part.
    pub fn with_bias(mut self, force: Vec3, torque: Vec3) -> Self {
        self.force_bias = force;
        self.torque_bias = torque;
        self
    }

    /// Disturbance force at time `t`, body frame, N.
    pub fn force_at(&self, t: f64) -> Vec3 {
        self.force_bias
            + Vec3::new(self.force[0].at(t), self.force[1].at(t), self.force[2].at(t))
    }

    /// Disturbance torque at time `t`, body frame, N m.
    pub fn torque_at(&self, t: f64) -> Vec3 {
        self.torque_bias
            + Vec3::new(
                self.torque[0].at(t),
                self.torque[1].at(t),
                self.torque[2].at(t),
            )
    }
}

/// Rotation by `yaw` about world z.
pub fn rotation_z(yaw: f64) -> Mat3 {
    let (s, c) = yaw.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Body-to-world rotation from intrinsic Z-Y-X Euler angles.
pub fn rotation_zyx(roll: f64, pitch: f64, yaw: f64) -> Mat3 {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    Mat3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    )
}

/// (roll, pitch, yaw) intrinsic Z-Y-X angles of a rotation matrix.
///
/// At the pitch singularity (body x pointing straight up or down, where roll
/// and yaw are not separable) pitch is reported exactly and roll is defined
/// to be zero, with yaw absorbing the remaining rotation.
pub fn euler_zyx(r: &Mat3) -> (f64, f64, f64) {
    let sp = -r[(2, 0)];
    if sp.abs() >= 1.0 - 1e-12 {
        let pitch = if sp > 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            -std::f64::consts::FRAC_PI_2
        };
        let yaw = f64::atan2(-r[(0, 1)], r[(1, 1)]);
        (0.0, pitch, yaw)
    } else {
        let pitch = sp.asin();
        let roll = f64::atan2(r[(2, 1)], r[(2, 2)]);
        let yaw = f64::atan2(r[(1, 0)], r[(0, 0)]);
        (roll, pitch, yaw)
    }
}

/// Skew-symmetric (cross-product) matrix of `v`: `hat(v) * w == v cross w`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds 1e-9.
pub fn vee(m: &Mat3) -> Result<Vec3, ModelError> {
    let asymmetry = (m + m.transpose()).norm();
    if asymmetry > 1e-9 {
        return Err(ModelError::NotSkewSymmetric { asymmetry });
    }
    Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// Vee of the antisymmetric part of `m`, i.e. `vee((m - m^T) / 2)`, without
/// the skewness check. This is the attitude-error extraction used by the
/// controller, where `m` is a product of rotations and the antisymmetric
/// part is exact by construction.
pub fn antisymmetric_vee(m: &Mat3) -> Vec3 {
    0.5 * Vec3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    )
}

/// Re-orthonormalizes a drifting rotation matrix via Gram-Schmidt on its
/// columns. Integrators call this every step, so the input is always within
/// rounding distance of orthonormal and the projection is essentially exact.
pub fn orthonormalize(r: &Mat3) -> Mat3 {
    let c0 = r.column(0).normalize();
    let mut c1 = r.column(1).into_owned();
    c1 -= c0 * c0.dot(&c1);
    let c1 = c1.normalize();
    let c2 = c0.cross(&c1);
    Mat3::from_columns(&[c0, c1, c2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_params_validate() {
        let p = RobotParams::default().validated().expect("defaults valid");
        // Thrust coefficient is sized so hover is half the ceiling.
        assert_relative_eq!(p.hover_thrust(), 0.5 * p.t_max(), epsilon = 1e-12);
        assert_relative_eq!(p.t_max(), 52.0911, epsilon = 1e-4);
    }

    #[test]
    fn invalid_params_rejected_by_name() {
        let cases: Vec<(&'static str, RobotParams)> = vec![
            (
                "m",
                RobotParams {
                    m: -1.0,
                    ..Default::default()
                },
            ),
            (
                "v_max",
                RobotParams {
                    v_max: 50.0,
                    ..Default::default()
                },
            ),
            (
                "j",
                RobotParams {
                    j: Mat3::from_diagonal(&Vec3::new(0.03, -0.03, 0.05)),
                    ..Default::default()
                },
            ),
            (
                "t_ground_frac",
                RobotParams {
                    t_ground_frac: 1.0,
                    ..Default::default()
                },
            ),
        ];
        for (field, params) in cases {
            match params.validated() {
                Err(ModelError::InvalidParam { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected InvalidParam for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn rotation_z_yaw_extraction() {
        let (roll, pitch, yaw) = euler_zyx(&rotation_z(0.3));
        assert_relative_eq!(roll, 0.0, epsilon = 1e-15);
        assert_relative_eq!(pitch, 0.0, epsilon = 1e-15);
        assert_relative_eq!(yaw, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn euler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let roll = rng.random_range(-1.4..1.4);
            let pitch = rng.random_range(-1.4..1.4);
            let yaw = rng.random_range(-3.1..3.1);
            let r = rotation_zyx(roll, pitch, yaw);
            // Proper rotation: orthonormal with determinant +1.
            assert_relative_eq!((r.transpose() * r - Mat3::identity()).norm(), 0.0, epsilon = 1e-12);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
            let (ro, pi, ya) = euler_zyx(&r);
            assert_relative_eq!(ro, roll, epsilon = 1e-9);
            assert_relative_eq!(pi, pitch, epsilon = 1e-9);
            assert_relative_eq!(ya, yaw, epsilon = 1e-9);
        }
    }

    #[test]
    fn euler_pitch_singularity_reports_zero_roll() {
        let r = rotation_zyx(0.4, std::f64::consts::FRAC_PI_2, 0.9);
        let (roll, pitch, _) = euler_zyx(&r);
        assert_eq!(roll, 0.0);
        assert_relative_eq!(pitch, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        // The reported angles must still reproduce the rotation.
        let (ro, pi, ya) = euler_zyx(&r);
        assert_relative_eq!((rotation_zyx(ro, pi, ya) - r).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn hat_vee_round_trip() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        let m = hat(&v);
        assert_relative_eq!((m + m.transpose()).norm(), 0.0, epsilon = 1e-15);
        let w = vee(&m).expect("hat output is skew");
        assert_relative_eq!((w - v).norm(), 0.0, epsilon = 1e-15);
        // hat(v) * w == v cross w
        let u = Vec3::new(-0.3, 0.7, 0.2);
        assert_relative_eq!((m * u - v.cross(&u)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn vee_rejects_non_skew() {
        let m = Mat3::identity();
        assert!(matches!(vee(&m), Err(ModelError::NotSkewSymmetric { .. })));
    }

    #[test]
    fn orthonormalize_projects_drift() {
        let r = rotation_zyx(0.2, -0.3, 1.1);
        let drifted = r + Mat3::repeat(1e-6);
        let fixed = orthonormalize(&drifted);
        assert_relative_eq!(
            (fixed.transpose() * fixed - Mat3::identity()).norm(),
            0.0,
            epsilon = 1e-14
        );
        assert!((fixed - r).norm() < 1e-5);
    }

    #[test]
    fn disturbance_is_deterministic_in_seed_and_time() {
        let spec = DisturbanceSpec::with_sigmas(0.2, 0.05);
        let a = DisturbanceModel::new(&spec, 42);
        let b = DisturbanceModel::new(&spec, 42);
        let c = DisturbanceModel::new(&spec, 43);
        assert_eq!(a.force_at(1.234), b.force_at(1.234));
        assert_eq!(a.torque_at(7.0), b.torque_at(7.0));
        assert_ne!(a.force_at(1.234), c.force_at(1.234));
    }

    #[test]
    fn disturbance_variance_matches_sigma() {
        let spec = DisturbanceSpec::with_sigmas(0.5, 0.02);
        let model = DisturbanceModel::new(&spec, 7);
        let n = 40_000;
        let dt = 0.005;
        let mut sum_sq = Vec3::zeros();
        let mut mean = Vec3::zeros();
        for i in 0..n {
            let f = model.force_at(i as f64 * dt);
            mean += f;
            sum_sq += f.component_mul(&f);
        }
        mean /= n as f64;
        for axis in 0..3 {
            let var = sum_sq[axis] / n as f64 - mean[axis] * mean[axis];
            // Finite-window estimate; the construction fixes the ensemble
            // variance exactly, so a generous band suffices.
            assert!(
                (var.sqrt() - 0.5).abs() < 0.15,
                "axis {axis}: std {} far from 0.5",
                var.sqrt()
            );
        }
    }

    #[test]
    fn zero_sigma_disturbance_is_zero() {
        let model = DisturbanceModel::zero();
        assert_eq!(model.force_at(3.3), Vec3::zeros());
        assert_eq!(model.torque_at(3.3), Vec3::zeros());
    }

    #[test]
    fn contact_point_tracks_tilt() {
        let params = RobotParams::default();
        let state = RobotState::grounded(0.0, &params);
        assert_relative_eq!(state.contact_height(&params), 0.0, epsilon = 1e-15);
        // Pitch the body about the contact point: contact stays put only if
        // p moves; here p is fixed so the contact point must rise.
        let mut tilted = state.clone();
        tilted.r = rotation_zyx(0.0, 0.2, 0.0);
        assert!(tilted.contact_height(&params) > 0.0);
    }
}
