//! Cascade flight control: attitude error on the rotation group feeding a
//! body-rate PID, plus the wheel drive law and an aerial position loop.
//!
//! The same cascade runs in both modes. On the ground the setpoint is simply
//! a level attitude at the commanded yaw; in the air an outer position loop
//! generates the attitude setpoint and a thrust magnitude. The cascade output
//! is a [`ControlInput`] handed to the allocator, never raw motor speeds.

use crate::model::{
    ControllerGains, Mat3, RobotParams, Vec3, antisymmetric_vee, ground_heading, rotation_z,
};

/// Desired body rate from an attitude error, the outer loop of the cascade.
///
/// The error is the vee of the antisymmetric part of `r^T r_d`, which for
/// small angles reduces to the axis-angle vector from the current to the
/// desired attitude expressed in the body frame; the gain maps it to a
/// corrective rate. A pure roll offset of `eps` with a level setpoint yields
/// `omega_d ~ [-k_p_att.x * eps, 0, 0]`, turning the body back toward level.
pub fn attitude_rate_setpoint(r_d: &Mat3, r: &Mat3, gains: &ControllerGains) -> Vec3 {
    let e = antisymmetric_vee(&(r.transpose() * r_d));
    gains.k_p_att.component_mul(&e)
}

/// Integral and derivative memory for [`rate_pid`]. One instance per
/// control loop; reset on mode changes only if the application wants a
/// clean slate, the controller itself tolerates carrying state across.
#[derive(Debug, Clone, Default)]
pub struct RatePidState {
    integral: Vec3,
    prev_error: Option<Vec3>,
}

impl RatePidState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Body-rate PID producing the torque command.
///
/// The integral term's torque contribution is clamped per axis to
/// `gains.integral_limit`, which bounds windup during allocator saturation.
/// The derivative is a backward difference of the rate error (zero on the
/// first call). `tau_c` is a constant feedforward for known biases such as
/// a tether pull.
pub fn rate_pid(
    omega_d: &Vec3,
    omega: &Vec3,
    state: &mut RatePidState,
    gains: &ControllerGains,
    tau_c: &Vec3,
    dt: f64,
) -> Vec3 {
    let e = omega_d - omega;
    state.integral += e * dt;
    for axis in 0..3 {
        let k_i = gains.k_i_rate[axis];
        if k_i > 0.0 {
            let cap = gains.integral_limit[axis] / k_i;
            state.integral[axis] = state.integral[axis].clamp(-cap, cap);
        }
    }
    let deriv = match state.prev_error {
        Some(prev) => (e - prev) / dt,
        None => Vec3::zeros(),
    };
    state.prev_error = Some(e);
    gains.k_p_rate.component_mul(&e)
        + gains.k_i_rate.component_mul(&state.integral)
        + gains.k_d_rate.component_mul(&deriv)
        + tau_c
}

/// Open-loop wheel drive: torque proportional to the commanded wheel rate.
/// This matches drive electronics that meter torque per rate command and
/// lean on rolling resistance to shed speed; the simulated wheel is
/// lossless, so scripts that must stop command a reverse rate.
pub fn wheel_torque(omega_wd: f64, gains: &ControllerGains) -> f64 {
    gains.k_wheel * omega_wd
}

/// Wheel drive with the rate loop closed, for scripted ground positioning.
pub fn wheel_torque_closed_loop(omega_wd: f64, omega_w: f64, gains: &ControllerGains) -> f64 {
    gains.k_wheel * (omega_wd - omega_w)
}

/// Dispatches between the open- and closed-loop wheel laws per the gain
/// configuration.
pub fn wheel_drive(omega_wd: f64, omega_w: f64, gains: &ControllerGains) -> f64 {
    if gains.wheel_closed_loop {
        wheel_torque_closed_loop(omega_wd, omega_w, gains)
    } else {
        wheel_torque(omega_wd, gains)
    }
}

/// Ground-mode attitude setpoint: level, facing `yaw_d`.
pub fn ground_setpoint(yaw_d: f64) -> Mat3 {
    rotation_z(yaw_d)
}

/// Memory for [`aerial_position_controller`]: the last well-defined thrust
/// direction, held through near-freefall commands where the acceleration
/// vector is too short to define one.
#[derive(Debug, Clone)]
pub struct PositionCtrlState {
    last_thrust_dir: Vec3,
}

impl Default for PositionCtrlState {
    fn default() -> Self {
        Self {
            last_thrust_dir: Vec3::z(),
        }
    }
}

impl PositionCtrlState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Maximum commanded tilt of the thrust axis from vertical, rad.
const MAX_CMD_TILT: f64 = 0.6;

/// Outer aerial loop: PD on position/velocity plus gravity compensation,
/// mapped to a collective thrust and an attitude setpoint.
///
/// `p_hat`/`v_hat` are the estimates the controller believes (the plant may
/// know better). Thrust is the commanded acceleration projected on the
/// current body z; the attitude setpoint points body z along the commanded
/// acceleration with yaw `yaw_d`, with the tilt capped at [`MAX_CMD_TILT`].
/// In steady hover at the setpoint this returns exactly weight and
/// `rotation_z(yaw_d)`.
#[allow(clippy::too_many_arguments)]
pub fn aerial_position_controller(
    p_d: &Vec3,
    v_d: &Vec3,
    yaw_d: f64,
    p_hat: &Vec3,
    v_hat: &Vec3,
    r: &Mat3,
    state: &mut PositionCtrlState,
    gains: &ControllerGains,
    params: &RobotParams,
) -> (f64, Mat3) {
    let mut a = Vec3::new(0.0, 0.0, params.g)
        + gains.k_p_pos.component_mul(&(p_d - p_hat))
        + gains.k_d_pos.component_mul(&(v_d - v_hat));

    // Tilt cap: keep the commanded thrust direction well away from the
    // horizon so aggressive position errors cannot flip the vehicle.
    a.z = a.z.max(0.2 * params.g);
    let max_xy = a.z * MAX_CMD_TILT.tan();
    let xy = a.xy().norm();
    if xy > max_xy {
        let s = max_xy / xy;
        a.x *= s;
        a.y *= s;
    }

    let t_d = (params.m * a.dot(&(r * Vec3::z()))).max(0.0);

    let z_d = if a.norm() > 0.1 * params.g {
        let dir = a.normalize();
        state.last_thrust_dir = dir;
        dir
    } else {
        state.last_thrust_dir
    };
    let x_c = Vec3::new(yaw_d.cos(), yaw_d.sin(), 0.0);
    let y_raw = z_d.cross(&x_c);
    let y_d = if y_raw.norm() > 1e-9 {
        // Unreachable under the tilt cap, but cheap to guard: fall back to
        // the heading construction if z_d ever aligns with the yaw axis.
        y_raw.normalize()
    } else {
        z_d.cross(&ground_heading(r)).normalize()
    };
    let x_d = y_d.cross(&z_d);
    (t_d, Mat3::from_columns(&[x_d, y_d, z_d]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RobotParams, rotation_zyx};
    use approx::assert_relative_eq;

    #[test]
    fn attitude_error_turns_roll_offset_back_toward_level() {
        let gains = ControllerGains::default();
        let eps = 0.01;
        let r = rotation_zyx(eps, 0.0, 0.0);
        let w = attitude_rate_setpoint(&Mat3::identity(), &r, &gains);
        // Exact error for a pure roll offset is -sin(eps), i.e. -eps to
        // first order; the sign is what makes the loop stable.
        assert_relative_eq!(w.x, -gains.k_p_att.x * eps.sin(), epsilon = 1e-12);
        assert_relative_eq!(w.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(w.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn attitude_error_is_zero_at_the_setpoint_and_left_invariant() {
        let gains = ControllerGains::default();
        let r = rotation_zyx(0.3, -0.2, 1.0);
        assert_eq!(attitude_rate_setpoint(&r, &r, &gains), Vec3::zeros());

        let r_d = rotation_zyx(0.1, 0.0, 1.2);
        let q = rotation_zyx(-0.4, 0.2, 0.3);
        let a = attitude_rate_setpoint(&r_d, &r, &gains);
        let b = attitude_rate_setpoint(&(q * r_d), &(q * r), &gains);
        assert_relative_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn large_pitch_error_commands_corrective_pitch_rate() {
        let gains = ControllerGains::default();
        // Pitched up 10 degrees, want level: need a negative pitch rate.
        let r = rotation_zyx(0.0, 10f64.to_radians(), 0.0);
        let w = attitude_rate_setpoint(&Mat3::identity(), &r, &gains);
        assert!(w.y < 0.0);
        assert_relative_eq!(w.x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rate_pid_accumulates_exactly_under_constant_error() {
        let gains = ControllerGains {
            k_d_rate: Vec3::zeros(),
            ..ControllerGains::default()
        };
        let mut state = RatePidState::new();
        let e = Vec3::new(0.2, -0.1, 0.05);
        let tau_c = Vec3::new(0.01, 0.0, -0.02);
        let dt = 0.0025;
        let n = 40;
        let mut tau = Vec3::zeros();
        for _ in 0..n {
            tau = rate_pid(&e, &Vec3::zeros(), &mut state, &gains, &tau_c, dt);
        }
        let expected = gains.k_p_rate.component_mul(&e)
            + gains.k_i_rate.component_mul(&(e * (n as f64 * dt)))
            + tau_c;
        assert_relative_eq!((tau - expected).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rate_pid_integral_contribution_saturates_at_the_cap() {
        let gains = ControllerGains::default();
        let mut state = RatePidState::new();
        let e = Vec3::new(10.0, 0.0, 0.0);
        for _ in 0..100_000 {
            rate_pid(&e, &Vec3::zeros(), &mut state, &gains, &Vec3::zeros(), 0.01);
        }
        let tau = rate_pid(&e, &Vec3::zeros(), &mut state, &gains, &Vec3::zeros(), 0.01);
        let integral_part = tau.x - gains.k_p_rate.x * e.x;
        assert_relative_eq!(integral_part, gains.integral_limit.x, epsilon = 1e-9);
    }

    #[test]
    fn rate_pid_derivative_kicks_in_on_the_second_call() {
        let gains = ControllerGains {
            k_p_rate: Vec3::zeros(),
            k_i_rate: Vec3::zeros(),
            k_d_rate: Vec3::new(0.03, 0.03, 0.0),
            ..ControllerGains::default()
        };
        let mut state = RatePidState::new();
        let dt = 0.0025;
        let first = rate_pid(
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::zeros(),
            &mut state,
            &gains,
            &Vec3::zeros(),
            dt,
        );
        assert_eq!(first, Vec3::zeros());
        let second = rate_pid(
            &Vec3::new(1.5, 0.0, 0.0),
            &Vec3::zeros(),
            &mut state,
            &gains,
            &Vec3::zeros(),
            dt,
        );
        assert_relative_eq!(second.x, 0.03 * 0.5 / dt, epsilon = 1e-12);
    }

    #[test]
    fn wheel_laws() {
        let gains = ControllerGains::default();
        assert_relative_eq!(wheel_torque(5.0, &gains), 0.02 * 5.0, epsilon = 1e-15);
        // Closed loop opposes an overspeed.
        assert!(wheel_torque_closed_loop(5.0, 8.0, &gains) < 0.0);
        let mut closed = gains.clone();
        closed.wheel_closed_loop = true;
        assert_eq!(wheel_drive(5.0, 8.0, &gains), wheel_torque(5.0, &gains));
        assert_eq!(
            wheel_drive(5.0, 8.0, &closed),
            wheel_torque_closed_loop(5.0, 8.0, &closed)
        );
    }

    #[test]
    fn position_controller_hover_equilibrium_is_exact() {
        let params = RobotParams::default();
        let gains = ControllerGains::default();
        let mut state = PositionCtrlState::new();
        let p = Vec3::new(1.0, -2.0, 3.0);
        let (t_d, r_d) = aerial_position_controller(
            &p,
            &Vec3::zeros(),
            0.7,
            &p,
            &Vec3::zeros(),
            &rotation_z(0.7),
            &mut state,
            &gains,
            &params,
        );
        assert_relative_eq!(t_d, params.hover_thrust(), epsilon = 1e-12);
        assert_relative_eq!((r_d - rotation_z(0.7)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn position_controller_tilts_toward_the_target() {
        let params = RobotParams::default();
        let gains = ControllerGains::default();
        let mut state = PositionCtrlState::new();
        let (_, r_d) = aerial_position_controller(
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::zeros(),
            0.0,
            &Vec3::zeros(),
            &Vec3::zeros(),
            &Mat3::identity(),
            &mut state,
            &gains,
            &params,
        );
        // Thrust axis leans toward +x to accelerate that way.
        let z_d = r_d * Vec3::z();
        assert!(z_d.x > 0.0);
        assert!(z_d.z > MAX_CMD_TILT.cos() - 1e-9);
    }

    #[test]
    fn position_controller_survives_freefall_commands() {
        let params = RobotParams::default();
        let gains = ControllerGains {
            k_p_pos: Vec3::repeat(100.0),
            ..ControllerGains::default()
        };
        let mut state = PositionCtrlState::new();
        // Target far below: raw command points down, the floor on a.z and
        // the held direction keep the output finite and upright.
        let (t_d, r_d) = aerial_position_controller(
            &Vec3::new(0.0, 0.0, -100.0),
            &Vec3::zeros(),
            0.0,
            &Vec3::zeros(),
            &Vec3::zeros(),
            &Mat3::identity(),
            &mut state,
            &gains,
            &params,
        );
        assert!(t_d.is_finite() && t_d >= 0.0);
        assert!(r_d.iter().all(|x| x.is_finite()));
        assert!((r_d * Vec3::z()).z > 0.0);
    }
}
