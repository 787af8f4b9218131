//! Rigid-body simulation of the vehicle in both modes: free flight, and
//! ground motion on a single driven wheel.
//!
//! Ground mode treats the wheel contact as a bilateral vertical constraint
//! (the wheel neither sinks nor hops while the mode is active) with
//! Coulomb-limited tangential forces. While the friction demand stays inside
//! the cone the contact rolls without slip and the longitudinal dynamics
//! reduce to one degree of freedom shared by wheel and body; when the demand
//! exceeds the cone the contact switches to a kinetic regime with the
//! tangential force pinned to the cone surface opposing slip. The regime is
//! chosen once per integration step, so the vector field each Runge-Kutta
//! stage sees is branch-consistent.
//!
//! Translation of the ground-borne vehicle is resolved at the contact point
//! (quasi-static in the lever between contact and body origin); attitude
//! dynamics are full 3D, driven by rotor torque, the wheel drive reaction,
//! gravity acting at the center-of-mass offset, disturbances, arm reaction,
//! and the contact force acting on its lever arm. The last term is what
//! makes a tilted, weight-bearing contact try to topple the vehicle, which
//! is the destabilizing spring the attitude loop has to dominate.

use crate::allocation::Mixer;
use crate::arm::ArmGeometry;
use crate::model::{
    ControlInput, DisturbanceModel, Mat3, Mode, MotorSpeeds, ModelError, RobotParams, RobotState,
    Vec2, Vec3, Vec4, ground_heading, hat, orthonormalize,
};
use nalgebra::SVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite state at t = {t:.4} s ({what})")]
    NonFinite { t: f64, what: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Classic fourth-order Runge-Kutta, the default.
    Rk4,
    /// Semi-implicit Euler: velocities first, then positions with the new
    /// velocities. First order but cheap and momentum-friendly.
    SemiImplicitEuler,
}

/// Integration and actuator-model settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Physics step, s.
    pub dt: f64,
    pub integrator: Integrator,
    /// Seed for disturbance realizations and estimate noise.
    pub seed: u64,
    /// Rotor speed first-order lag time constant, s. Zero disables the lag.
    pub motor_lag_tau: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            integrator: Integrator::Rk4,
            seed: 0,
            motor_lag_tau: 0.02,
        }
    }
}

impl SimConfig {
    pub fn validated(self) -> Result<Self, ModelError> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(ModelError::InvalidParam {
                field: "dt",
                reason: "physics step must lie in (0, 0.1] s".into(),
            });
        }
        if !(self.motor_lag_tau >= 0.0 && self.motor_lag_tau.is_finite()) {
            return Err(ModelError::InvalidParam {
                field: "motor_lag_tau",
                reason: "lag time constant must be finite and non-negative".into(),
            });
        }
        Ok(self)
    }
}

/// First-order rotor speed lag: commanded speeds are reached exponentially,
/// which is what costs the rate loop its phase margin at high gain.
#[derive(Debug, Clone)]
pub struct MotorLag {
    v: Vec4,
}

impl MotorLag {
    pub fn new(initial: &MotorSpeeds) -> Self {
        Self { v: initial.v }
    }

    pub fn current(&self) -> MotorSpeeds {
        MotorSpeeds::new(self.v)
    }

    /// Advances the realized speeds toward `cmd` over `dt` and returns them.
    pub fn advance(&mut self, cmd: &MotorSpeeds, dt: f64, tau: f64) -> MotorSpeeds {
        if tau <= 0.0 {
            self.v = cmd.v;
        } else {
            let a = 1.0 - (-dt / tau).exp();
            self.v += (cmd.v - self.v) * a;
        }
        self.current()
    }
}

/// Contact regime and force resolution for one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactState {
    /// Ground mode with the vertical constraint active.
    pub in_contact: bool,
    /// Kinetic (slipping) regime rather than rolling.
    pub sliding: bool,
    /// Normal force, N (never negative).
    pub n_c: f64,
    /// Tangential contact force along the heading, N.
    pub f_long: f64,
    /// Tangential contact force lateral to the heading, N.
    pub f_lat: f64,
    /// Total contact force on the body, body frame, N.
    pub f_w_body: Vec3,
    /// Contact lever arm from the body origin, body frame, m.
    pub d_g: Vec3,
}

impl ContactState {
    pub fn airborne() -> Self {
        Self {
            in_contact: false,
            sliding: false,
            n_c: 0.0,
            f_long: 0.0,
            f_lat: 0.0,
            f_w_body: Vec3::zeros(),
            d_g: Vec3::zeros(),
        }
    }
}

/// Normal force of the quasi-static vertical balance: weight minus the
/// vertical component of thrust, floored at zero.
fn normal_force(r: &Mat3, thrust: f64, params: &RobotParams) -> f64 {
    (params.m * params.g - thrust * r[(2, 2)]).max(0.0)
}

/// Slip velocity of the wheel material at the contact, world xy: contact
/// point velocity minus the rolling surface speed.
fn slip_velocity(v_contact_xy: Vec2, omega_w: f64, heading: &Vec3, params: &RobotParams) -> Vec2 {
    v_contact_xy - omega_w * params.r * heading.xy()
}

/// Below this slip speed the contact is a candidate for sticking, m/s.
const STICK_SLIP_EPS: f64 = 1e-3;

/// Karnopp-style capture window: the slip speed kinetic friction can remove
/// within one step of length `dt`. Deciding the regime only at step starts
/// would otherwise chatter around zero slip forever, because each step
/// overshoots the crossing by up to this amount.
fn stick_window(dt: f64, n_c: f64, params: &RobotParams) -> f64 {
    let decel = params.mu * n_c * (1.0 / params.m + params.r * params.r / params.j_w);
    STICK_SLIP_EPS.max(dt * decel)
}

struct GroundForces {
    n_c: f64,
    f_long: f64,
    f_lat: f64,
    /// Shared longitudinal acceleration of the rolling wheel-body pair.
    u_dot: f64,
    saturated: bool,
}

/// Rolling-contact force balance: the wheel and body share the longitudinal
/// degree of freedom, the lateral force enforces zero side slip (plus the
/// centripetal demand of a yawing roll), and both components saturate at
/// the friction cone.
fn rolling_forces(
    r: &Mat3,
    omega: &Vec3,
    omega_w: f64,
    thrust: f64,
    tau_w: f64,
    f_d: &Vec3,
    params: &RobotParams,
) -> GroundForces {
    let n_c = normal_force(r, thrust, params);
    let cap = params.mu * n_c;
    let h = ground_heading(r);
    let lat = Vec3::z().cross(&h);

    // Non-contact forces on the body, world frame, horizontal part only
    // (gravity is vertical).
    let f_air = r * (Vec3::new(0.0, 0.0, thrust) + f_d);
    let f_long_ext = f_air.x * h.x + f_air.y * h.y;
    let f_lat_ext = f_air.x * lat.x + f_air.y * lat.y;

    let u = omega_w * params.r;
    let m_eff = params.m + params.j_w / (params.r * params.r);
    let u_dot = (tau_w / params.r + f_long_ext) / m_eff;
    let f_long_raw = (tau_w - params.j_w * u_dot / params.r) / params.r;

    // Heading turn rate: how fast the projected rolling direction rotates,
    // which sets the centripetal part of the lateral constraint force.
    let bx_xy = Vec2::new(r[(0, 0)], r[(1, 0)]).norm();
    let h_rate = if bx_xy > 1e-9 {
        lat.dot(&(r * omega.cross(&Vec3::x()))) / bx_xy
    } else {
        0.0
    };
    let f_lat_raw = params.m * u * h_rate - f_lat_ext;

    let f_long = f_long_raw.clamp(-cap, cap);
    let f_lat = f_lat_raw.clamp(-cap, cap);
    GroundForces {
        n_c,
        f_long,
        f_lat,
        u_dot,
        saturated: f_long != f_long_raw || f_lat != f_lat_raw,
    }
}

/// Contact forces for the given state and applied inputs. `f_d` is the
/// disturbance force, body frame. Aerial states report no contact.
pub fn contact_forces(
    state: &RobotState,
    params: &RobotParams,
    thrust: f64,
    tau_w: f64,
    f_d: &Vec3,
) -> ContactState {
    if state.mode != Mode::Ground {
        return ContactState::airborne();
    }
    let d_g = Vec3::new(0.0, 0.0, -params.l_z);
    let h = state.heading();
    let lat = Vec3::z().cross(&h);
    let v_c = state.contact_velocity(params).xy();
    let slip = slip_velocity(v_c, state.omega_w, &h, params);

    let rolling = rolling_forces(
        &state.r,
        &state.omega,
        state.omega_w,
        thrust,
        tau_w,
        f_d,
        params,
    );
    let stick = slip.norm() < STICK_SLIP_EPS && !rolling.saturated;
    if stick {
        let f_world = rolling.n_c * Vec3::z() + rolling.f_long * h + rolling.f_lat * lat;
        ContactState {
            in_contact: true,
            sliding: false,
            n_c: rolling.n_c,
            f_long: rolling.f_long,
            f_lat: rolling.f_lat,
            f_w_body: state.r.transpose() * f_world,
            d_g,
        }
    } else {
        let n_c = rolling.n_c;
        let f_k = kinetic_friction(&slip, n_c, params);
        let f_k3 = Vec3::new(f_k.x, f_k.y, 0.0);
        let f_world = n_c * Vec3::z() + f_k3;
        ContactState {
            in_contact: true,
            sliding: true,
            n_c,
            f_long: f_k3.dot(&h),
            f_lat: f_k3.dot(&lat),
            f_w_body: state.r.transpose() * f_world,
            d_g,
        }
    }
}

/// Kinetic friction pinned to the cone surface, opposing slip. World xy.
fn kinetic_friction(slip: &Vec2, n_c: f64, params: &RobotParams) -> Vec2 {
    let s = slip.norm();
    if s < 1e-12 {
        Vec2::zeros()
    } else {
        -(params.mu * n_c / s) * slip
    }
}

/// Horizontal acceleration predicted by the reduced planar model: the
/// body-frame contact and disturbance forces rotated into the world by yaw
/// alone. The full simulation should agree while the vehicle stays nearly
/// level; the comparison quantifies what the planar controller design
/// ignores.
pub fn planar_prediction(f_w_xy: &Vec2, f_d_xy: &Vec2, yaw: f64, params: &RobotParams) -> Vec2 {
    let (s, c) = yaw.sin_cos();
    let f = f_w_xy + f_d_xy;
    Vec2::new(c * f.x - s * f.y, s * f.x + c * f.y) / params.m
}

// Flat state vector layout shared by all branches:
// [0..3]   position-like (aerial: p; ground: contact point xy, unused z)
// [3..6]   velocity-like (aerial: v; sliding: contact velocity xy; rolling: unused)
// [6..15]  rotation matrix, row-major
// [15..18] body angular velocity
// [18]     wheel spin rate
// [19..22] arm joint angles
type StateVec = SVector<f64, 22>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Aerial,
    Rolling,
    Sliding,
}

fn pack(state: &RobotState, branch: Branch, params: &RobotParams) -> StateVec {
    let mut y = StateVec::zeros();
    let mut omega_w = state.omega_w;
    match branch {
        Branch::Aerial => {
            y.fixed_rows_mut::<3>(0).copy_from(&state.p);
            y.fixed_rows_mut::<3>(3).copy_from(&state.v);
        }
        Branch::Rolling => {
            let c = state.contact_point(params);
            y[0] = c.x;
            y[1] = c.y;
            // Entering the rolling branch from residual slip: merge wheel
            // and body into the constraint conserving their combined
            // momentum along the track. A no-op for consistent states.
            let h = state.heading();
            let u_b = state.contact_velocity(params).xy().dot(&h.xy());
            omega_w = (params.j_w * omega_w + params.m * params.r * u_b)
                / (params.j_w + params.m * params.r * params.r);
        }
        Branch::Sliding => {
            let c = state.contact_point(params);
            let v_c = state.contact_velocity(params);
            y[0] = c.x;
            y[1] = c.y;
            y[3] = v_c.x;
            y[4] = v_c.y;
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            y[6 + 3 * i + j] = state.r[(i, j)];
        }
    }
    y.fixed_rows_mut::<3>(15).copy_from(&state.omega);
    y[18] = omega_w;
    y.fixed_rows_mut::<3>(19).copy_from(&state.q_arm);
    y
}

fn unpack_r(y: &StateVec) -> Mat3 {
    Mat3::from_fn(|i, j| y[6 + 3 * i + j])
}

fn unpack(y: &StateVec, branch: Branch, mode: Mode, params: &RobotParams) -> RobotState {
    let r = orthonormalize(&unpack_r(y));
    let omega = Vec3::new(y[15], y[16], y[17]);
    let omega_w = y[18];
    let q_arm = Vec3::new(y[19], y[20], y[21]);
    let pivot = params.l_z * r * omega.cross(&Vec3::z());
    let (p, v) = match branch {
        Branch::Aerial => (Vec3::new(y[0], y[1], y[2]), Vec3::new(y[3], y[4], y[5])),
        Branch::Rolling => {
            let c = Vec3::new(y[0], y[1], 0.0);
            let h = ground_heading(&r);
            let u = omega_w * params.r;
            (c + params.l_z * r.column(2), u * h + pivot)
        }
        Branch::Sliding => {
            let c = Vec3::new(y[0], y[1], 0.0);
            (
                c + params.l_z * r.column(2),
                Vec3::new(y[3], y[4], 0.0) + pivot,
            )
        }
    };
    RobotState {
        p,
        v,
        r,
        omega,
        omega_w,
        q_arm,
        mode,
    }
}

/// Joint drive law: rate-limited first-order pursuit of the (limit-clamped)
/// command. Returns (q_dot, q_ddot); the acceleration is the analytic
/// derivative of the drive law, zero while the rate limit is active.
fn arm_drive(q: &Vec3, cmd: &Vec3, geom: &ArmGeometry) -> (Vec3, Vec3) {
    let mut q_dot = Vec3::zeros();
    let mut q_ddot = Vec3::zeros();
    for i in 0..3 {
        let target = cmd[i].clamp(geom.q_min[i], geom.q_max[i]);
        let raw = (target - q[i]) / geom.drive_tau;
        q_dot[i] = raw.clamp(-geom.rate_limit, geom.rate_limit);
        q_ddot[i] = if raw.abs() < geom.rate_limit {
            -q_dot[i] / geom.drive_tau
        } else {
            0.0
        };
    }
    (q_dot, q_ddot)
}

struct StepCtx<'a> {
    u: ControlInput,
    tau_w: f64,
    arm_cmd: Vec3,
    dist: &'a DisturbanceModel,
    params: &'a RobotParams,
    geom: &'a ArmGeometry,
    j_inv: Mat3,
}

fn derivative(ctx: &StepCtx, branch: Branch, t: f64, y: &StateVec) -> StateVec {
    let p = ctx.params;
    let r = unpack_r(y);
    let omega = Vec3::new(y[15], y[16], y[17]);
    let omega_w = y[18];
    let q = Vec3::new(y[19], y[20], y[21]);

    let f_d = ctx.dist.force_at(t);
    let tau_d = ctx.dist.torque_at(t);
    let (q_dot, q_ddot) = arm_drive(&q, &ctx.arm_cmd, ctx.geom);
    let joint_inertia = ctx.geom.joint_inertia();
    let tau_arm = Vec3::new(0.0, -joint_inertia.dot(&q_ddot), 0.0);

    // Torques common to every branch, body frame: rotor torque, wheel drive
    // reaction, disturbances, arm reaction, constant bias, and gravity on
    // the center-of-mass offset.
    let gravity_body = r.transpose() * Vec3::new(0.0, 0.0, -p.m * p.g);
    let mut tau = ctx.u.tau + tau_d + tau_arm + p.tau_c
        + Vec3::new(0.0, -ctx.tau_w, 0.0)
        + p.d_cg.cross(&gravity_body);

    let mut dy = StateVec::zeros();
    for i in 0..3 {
        for j in 0..3 {
            // R_dot = R hat(omega), written out to fill the flat slots.
            dy[6 + 3 * i + j] = (r * hat(&omega))[(i, j)];
        }
    }
    dy.fixed_rows_mut::<3>(19).copy_from(&q_dot);

    match branch {
        Branch::Aerial => {
            let v = Vec3::new(y[3], y[4], y[5]);
            let acc = Vec3::new(0.0, 0.0, -p.g)
                + r * (Vec3::new(0.0, 0.0, ctx.u.thrust) + f_d) / p.m;
            dy.fixed_rows_mut::<3>(0).copy_from(&v);
            dy.fixed_rows_mut::<3>(3).copy_from(&acc);
            dy[18] = ctx.tau_w / p.j_w;
        }
        Branch::Rolling => {
            let forces = rolling_forces(&r, &omega, omega_w, ctx.u.thrust, ctx.tau_w, &f_d, p);
            let h = ground_heading(&r);
            let lat = Vec3::z().cross(&h);
            let u = omega_w * p.r;
            dy[0] = u * h.x;
            dy[1] = u * h.y;
            dy[18] = forces.u_dot / p.r;
            let f_world = forces.n_c * Vec3::z() + forces.f_long * h + forces.f_lat * lat;
            let f_w_body = r.transpose() * f_world;
            tau += Vec3::new(0.0, 0.0, -p.l_z).cross(&f_w_body);
        }
        Branch::Sliding => {
            let v_c = Vec2::new(y[3], y[4]);
            let n_c = normal_force(&r, ctx.u.thrust, p);
            let h = ground_heading(&r);
            let slip = slip_velocity(v_c, omega_w, &h, p);
            let f_k = kinetic_friction(&slip, n_c, p);
            let f_air = r * (Vec3::new(0.0, 0.0, ctx.u.thrust) + f_d);
            dy[0] = v_c.x;
            dy[1] = v_c.y;
            dy[3] = (f_air.x + f_k.x) / p.m;
            dy[4] = (f_air.y + f_k.y) / p.m;
            let f_k_long = f_k.x * h.x + f_k.y * h.y;
            dy[18] = (ctx.tau_w - p.r * f_k_long) / p.j_w;
            let f_world = n_c * Vec3::z() + Vec3::new(f_k.x, f_k.y, 0.0);
            let f_w_body = r.transpose() * f_world;
            tau += Vec3::new(0.0, 0.0, -p.l_z).cross(&f_w_body);
        }
    }

    let omega_dot = ctx.j_inv * (tau - omega.cross(&(p.j * omega)));
    dy.fixed_rows_mut::<3>(15).copy_from(&omega_dot);
    dy
}

fn rk4(ctx: &StepCtx, branch: Branch, t: f64, y: &StateVec, dt: f64) -> StateVec {
    let k1 = derivative(ctx, branch, t, y);
    let k2 = derivative(ctx, branch, t + 0.5 * dt, &(y + 0.5 * dt * k1));
    let k3 = derivative(ctx, branch, t + 0.5 * dt, &(y + 0.5 * dt * k2));
    let k4 = derivative(ctx, branch, t + dt, &(y + dt * k3));
    y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Velocity-like slots advanced in the first pass of the semi-implicit
/// scheme; position-like slots follow with the updated velocities.
const VEL_SLOTS: std::ops::Range<usize> = 3..6;
const POS_SLOTS: [std::ops::Range<usize>; 2] = [0..3, 6..15];

fn semi_implicit(ctx: &StepCtx, branch: Branch, t: f64, y: &StateVec, dt: f64) -> StateVec {
    let d1 = derivative(ctx, branch, t, y);
    let mut y_mid = *y;
    for i in VEL_SLOTS {
        y_mid[i] += dt * d1[i];
    }
    for i in 15..22 {
        y_mid[i] += dt * d1[i];
    }
    let d2 = derivative(ctx, branch, t, &y_mid);
    let mut out = y_mid;
    for range in POS_SLOTS {
        for i in range {
            out[i] = y[i] + dt * d2[i];
        }
    }
    out
}

fn choose_branch(
    state: &RobotState,
    u: &ControlInput,
    tau_w: f64,
    f_d: &Vec3,
    dt: f64,
    params: &RobotParams,
) -> Branch {
    if state.mode == Mode::Aerial {
        return Branch::Aerial;
    }
    let h = state.heading();
    let v_c = state.contact_velocity(params).xy();
    let slip = slip_velocity(v_c, state.omega_w, &h, params);
    let n_c = normal_force(&state.r, u.thrust, params);
    if slip.norm() >= stick_window(dt, n_c, params) {
        return Branch::Sliding;
    }
    let forces = rolling_forces(
        &state.r,
        &state.omega,
        state.omega_w,
        u.thrust,
        tau_w,
        f_d,
        params,
    );
    if forces.saturated {
        Branch::Sliding
    } else {
        Branch::Rolling
    }
}

/// Advances the state by one physics step of `cfg.dt` starting at time `t`.
///
/// `motor` carries the realized (post-lag) rotor speeds, held constant over
/// the step; `arm_cmd` is the joint target the drives pursue. The contact
/// regime is fixed at the start of the step; regime changes take effect on
/// the next step. Returns the new state and the contact resolution at the
/// end of the step. A non-finite result aborts with [`SimError::NonFinite`]
/// instead of propagating garbage.
#[allow(clippy::too_many_arguments)]
pub fn step(
    state: &RobotState,
    motor: &MotorSpeeds,
    tau_w: f64,
    arm_cmd: &Vec3,
    dist: &DisturbanceModel,
    params: &RobotParams,
    geom: &ArmGeometry,
    cfg: &SimConfig,
    t: f64,
) -> Result<(RobotState, ContactState), SimError> {
    let mixer = Mixer::new(params);
    let u = mixer.forward(motor);
    let ctx = StepCtx {
        u,
        tau_w,
        arm_cmd: *arm_cmd,
        dist,
        params,
        geom,
        j_inv: params.j.try_inverse().expect("validated inertia is invertible"),
    };

    let branch = choose_branch(state, &u, tau_w, &dist.force_at(t), cfg.dt, params);
    let y = pack(state, branch, params);
    let y_next = match cfg.integrator {
        Integrator::Rk4 => rk4(&ctx, branch, t, &y, cfg.dt),
        Integrator::SemiImplicitEuler => semi_implicit(&ctx, branch, t, &y, cfg.dt),
    };
    let next = unpack(&y_next, branch, state.mode, params);

    let finite = next.p.iter().all(|x| x.is_finite())
        && next.v.iter().all(|x| x.is_finite())
        && next.r.iter().all(|x| x.is_finite())
        && next.omega.iter().all(|x| x.is_finite())
        && next.omega_w.is_finite()
        && next.q_arm.iter().all(|x| x.is_finite());
    if !finite {
        return Err(SimError::NonFinite {
            t: t + cfg.dt,
            what: "integration diverged",
        });
    }

    let contact = contact_forces(&next, params, u.thrust, tau_w, &dist.force_at(t + cfg.dt));
    Ok((next, contact))
}

/// Outcome of one mode-supervision decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDecision {
    pub mode: Mode,
    /// Liftoff confirmed this step.
    pub lifted_off: bool,
    /// Touchdown detected this step.
    pub touched_down: bool,
    /// Touchdown arrived faster than the 0.5 m/s budget.
    pub hard_landing: bool,
}

/// Debounced mode switching. Ground to aerial requires an explicit command
/// plus the contact force vanishing for three consecutive steps; aerial to
/// ground triggers on the wheel reaching the ground plane while descending,
/// flagged as hard above 0.5 m/s but never refused.
#[derive(Debug, Clone, Default)]
pub struct ModeSupervisor {
    nc_zero_streak: u32,
}

/// Consecutive zero-normal-force steps required before liftoff.
pub const LIFTOFF_STREAK: u32 = 3;

/// Descent speed at the touchdown instant above which the landing is
/// flagged hard, m/s.
pub const HARD_LANDING_SPEED: f64 = 0.5;

impl ModeSupervisor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn transition(
        &mut self,
        state: &RobotState,
        contact: &ContactState,
        commanded: Mode,
        params: &RobotParams,
    ) -> ModeDecision {
        match state.mode {
            Mode::Ground => {
                if contact.in_contact && contact.n_c <= 0.0 {
                    self.nc_zero_streak += 1;
                } else {
                    self.nc_zero_streak = 0;
                }
                let lift = commanded == Mode::Aerial && self.nc_zero_streak >= LIFTOFF_STREAK;
                if lift {
                    self.nc_zero_streak = 0;
                }
                ModeDecision {
                    mode: if lift { Mode::Aerial } else { Mode::Ground },
                    lifted_off: lift,
                    touched_down: false,
                    hard_landing: false,
                }
            }
            Mode::Aerial => {
                self.nc_zero_streak = 0;
                let height = state.contact_height(params);
                let descent = state.contact_velocity(params).z;
                let touch = height <= 0.0 && descent < 0.0;
                ModeDecision {
                    mode: if touch { Mode::Ground } else { Mode::Aerial },
                    lifted_off: false,
                    touched_down: touch,
                    hard_landing: touch && -descent >= HARD_LANDING_SPEED,
                }
            }
        }
    }
}

/// Integrates the arm joints alone over `dt` with the base frozen, for
/// bench-mounted (locked base) scenarios. Same drive law the full step
/// uses, so arm behavior is identical across mounting conditions.
pub fn arm_only_step(q: &Vec3, cmd: &Vec3, geom: &ArmGeometry, dt: f64) -> Vec3 {
    let f = |q: &Vec3| arm_drive(q, cmd, geom).0;
    let k1 = f(q);
    let k2 = f(&(q + 0.5 * dt * k1));
    let k3 = f(&(q + 0.5 * dt * k2));
    let k4 = f(&(q + dt * k3));
    q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Projects an aerial state onto the ground constraint at touchdown: the
/// contact point snaps to the plane, the wheel captures the longitudinal
/// speed, and lateral/vertical contact velocity is absorbed (inelastic).
pub fn project_touchdown(state: &mut RobotState, params: &RobotParams) {
    let c = state.contact_point(params);
    state.p.z -= c.z;
    let h = state.heading();
    let v_c = state.contact_velocity(params);
    state.omega_w = (v_c.x * h.x + v_c.y * h.y) / params.r;
    state.mode = Mode::Ground;
    // Velocity consistent with the constraint: rolling plus pivot motion.
    state.v =
        state.omega_w * params.r * h + params.l_z * state.r * state.omega.cross(&Vec3::z());
}
