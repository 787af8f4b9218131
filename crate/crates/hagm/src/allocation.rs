//! Prioritized motor control allocation.
//!
//! A quadrotor mixes collective thrust T and body torque tau into four rotor
//! speeds, each confined to a hard band [v_min, v_max]. In flight the rotors
//! run near hover speed and every axis has headroom. Resting on the wheel the
//! vehicle wants almost no thrust, which parks the rotors near the bottom of
//! the band where a naive mixer has no margin left to produce roll/pitch
//! torque: exactly the regime where a ground vehicle that balances on one
//! wheel needs attitude authority the most.
//!
//! The allocator here resolves that conflict with a strict priority order:
//!
//! 1. roll/pitch torque, scaled by `alpha` only against its own feasible
//!    set (never against yaw or thrust demands),
//! 2. yaw torque, scaled by `beta` to fit beside the tilt torque,
//! 3. thrust, which takes whatever interval remains.
//!
//! The feasible sets are exact: eliminating the common thrust term from the
//! eight per-motor speed bounds (Fourier-Motzkin) leaves six pairwise
//! constraints on torque alone. Two involve only roll and pitch and form a
//! square box (the tilt set), the other four couple each tilt axis to yaw
//! (the tilt-yaw set). Scaling decisions therefore use closed forms, and the
//! resulting speeds are guaranteed to respect the motor band without
//! clipping distortion.

use crate::model::{ControlInput, Mat4, MotorSpeeds, RobotParams, Vec3, Vec4};

/// Per-motor torque sign patterns for the X configuration. Motor order:
/// 1 front-right, 2 back-left, 3 front-left, 4 back-right.
const SX: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];
const SY: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];
const SZ: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];

/// Linear map between squared rotor speeds and wrench, with its exact
/// analytic inverse.
///
/// Forward: `[T, tau_x, tau_y, tau_z] = m * [v1^2, v2^2, v3^2, v4^2]`,
/// where each rotor contributes `c_t v^2` thrust at lever `l` on the X
/// diagonals (moment arm `l / sqrt(2)` per axis) and `c_d v^2` reaction
/// torque about z.
#[derive(Debug, Clone)]
pub struct Mixer {
    pub m: Mat4,
    pub m_inv: Mat4,
}

impl Mixer {
    pub fn new(params: &RobotParams) -> Self {
        // Roll/pitch torque per unit squared speed difference: c_t l / sqrt(2).
        let k = std::f64::consts::FRAC_1_SQRT_2 * params.c_t * params.l;
        let c_t = params.c_t;
        let c_d = params.c_d;
        let mut m = Mat4::zeros();
        let mut m_inv = Mat4::zeros();
        for i in 0..4 {
            m[(0, i)] = c_t;
            m[(1, i)] = k * SX[i];
            m[(2, i)] = k * SY[i];
            m[(3, i)] = c_d * SZ[i];
            // Sign orthogonality of the rows makes the inverse a rescaled
            // transpose of the sign pattern.
            m_inv[(i, 0)] = 1.0 / (4.0 * c_t);
            m_inv[(i, 1)] = SX[i] / (4.0 * k);
            m_inv[(i, 2)] = SY[i] / (4.0 * k);
            m_inv[(i, 3)] = SZ[i] / (4.0 * c_d);
        }
        Self { m, m_inv }
    }

    /// Wrench produced by the given rotor speeds.
    pub fn forward(&self, speeds: &MotorSpeeds) -> ControlInput {
        let w = speeds.v.map(|v| v * v);
        let u = self.m * w;
        ControlInput::new(u[0], Vec3::new(u[1], u[2], u[3]))
    }

    /// Squared rotor speeds realizing a wrench exactly. The result ignores
    /// speed limits; feasibility is the allocators' job.
    pub fn inverse(&self, u: &ControlInput) -> Vec4 {
        self.m_inv * Vec4::new(u.thrust, u.tau.x, u.tau.y, u.tau.z)
    }
}

/// Torque feasibility sets implied by the motor speed band, independent of
/// thrust (thrust eliminated by Fourier-Motzkin projection).
#[derive(Debug, Clone, Copy)]
pub struct FeasibleSets {
    /// Tilt box half-width: feasible roll/pitch satisfies
    /// `|tau_x + tau_y| <= tilt_bound` and `|tau_x - tau_y| <= tilt_bound`,
    /// equal to `sqrt(2) c_t l (v_max^2 - v_min^2)`.
    pub tilt_bound: f64,
    /// Squared-speed headroom `v_max^2 - v_min^2`, the right-hand side of
    /// the pairwise motor constraints.
    pub speed_span: f64,
    k: f64,
    c_d: f64,
}

impl FeasibleSets {
    pub fn new(params: &RobotParams) -> Self {
        let k = std::f64::consts::FRAC_1_SQRT_2 * params.c_t * params.l;
        let speed_span = params.v_max * params.v_max - params.v_min * params.v_min;
        Self {
            tilt_bound: 2.0 * k * speed_span,
            speed_span,
            k,
            c_d: params.c_d,
        }
    }

    /// Per-motor squared-speed offsets produced by a torque command. A
    /// thrust exists realizing the torque iff these offsets span at most
    /// `speed_span`.
    fn offsets(&self, tau: &Vec3) -> Vec4 {
        Vec4::from_fn(|i, _| {
            (SX[i] * tau.x + SY[i] * tau.y) / (4.0 * self.k) + SZ[i] * tau.z / (4.0 * self.c_d)
        })
    }

    /// Roll/pitch membership in the tilt box (yaw ignored).
    pub fn tilt_feasible(&self, tau_x: f64, tau_y: f64) -> bool {
        (tau_x + tau_y).abs() <= self.tilt_bound && (tau_x - tau_y).abs() <= self.tilt_bound
    }

    /// Full torque membership: some thrust in the motor band realizes
    /// `tau` exactly.
    pub fn torque_feasible(&self, tau: &Vec3) -> bool {
        let d = self.offsets(tau);
        d.max() - d.min() <= self.speed_span
    }
}

/// Largest `alpha` in (0, 1] keeping `alpha * [tau_x, tau_y]` inside the
/// tilt box. Scaling preserves the commanded tilt direction; a saturated
/// command lands exactly on the box boundary.
pub fn clamp_tilt(tau_x: f64, tau_y: f64, sets: &FeasibleSets) -> f64 {
    let m = (tau_x + tau_y).abs().max((tau_x - tau_y).abs());
    if m <= sets.tilt_bound { 1.0 } else { sets.tilt_bound / m }
}

/// Largest `beta` in [0, 1] keeping `[tau_x, tau_y, beta * tau_z]` jointly
/// feasible, for roll/pitch already inside the tilt box.
///
/// `beta` hits zero only when the tilt command sits exactly on a corner of
/// its box and any yaw at all would push a motor out of band.
pub fn clamp_yaw(tau_x: f64, tau_y: f64, tau_z: f64, sets: &FeasibleSets) -> f64 {
    if tau_z == 0.0 {
        return 1.0;
    }
    // Pairwise constraints coupling each tilt axis to yaw:
    // |tau_x| / (2k) + beta |tau_z| / (2 c_d) <= speed_span, same for y.
    let a = tau_x.abs().max(tau_y.abs()) / (2.0 * sets.k);
    let b = tau_z.abs() / (2.0 * sets.c_d);
    let avail = (sets.speed_span - a).max(0.0);
    (avail / b).min(1.0)
}

/// Thrust interval `[t_lo, t_hi]` over which `tau` is realizable with all
/// four motors in band. Meaningful (lo <= hi) whenever `tau` passes
/// [`FeasibleSets::torque_feasible`]; infeasible torque yields a crossed
/// interval.
pub fn thrust_bounds(tau: &Vec3, params: &RobotParams) -> (f64, f64) {
    let sets = FeasibleSets::new(params);
    let d = sets.offsets(tau);
    let t_lo = 4.0 * params.c_t * (params.v_min * params.v_min - d.min());
    let t_hi = 4.0 * params.c_t * (params.v_max * params.v_max - d.max());
    (t_lo, t_hi)
}

/// One allocation outcome: realized speeds, the wrench they actually
/// produce, the priority scale factors, and which stages had to intervene.
#[derive(Debug, Clone, Copy)]
pub struct AllocationResult {
    pub speeds: MotorSpeeds,
    /// Exact wrench of `speeds` (forward mix), for telemetry and dynamics.
    pub u_applied: ControlInput,
    /// Roll/pitch scale, in (0, 1].
    pub alpha: f64,
    /// Yaw scale, in [0, 1].
    pub beta: f64,
    /// alpha < 1: the tilt command exceeded the tilt box.
    pub saturated_tilt: bool,
    /// beta < 1: yaw had to shrink to fit beside the tilt torque.
    pub saturated_yaw: bool,
    /// Thrust was raised to its feasible floor (or the ground thrust rule
    /// set it, which always floors).
    pub thrust_floored: bool,
    /// Thrust was cut to its feasible ceiling.
    pub thrust_ceiling: bool,
}

fn speeds_from_squares(w: Vec4, params: &RobotParams) -> MotorSpeeds {
    // Stage arithmetic keeps w in band up to rounding; clamp the dust so the
    // speed-limit invariant holds exactly.
    let lo = params.v_min * params.v_min;
    let hi = params.v_max * params.v_max;
    MotorSpeeds::new(w.map(|x| x.clamp(lo, hi).sqrt()))
}

fn build_result(
    w: Vec4,
    alpha: f64,
    beta: f64,
    floored: bool,
    ceiling: bool,
    params: &RobotParams,
    mixer: &Mixer,
) -> AllocationResult {
    let speeds = speeds_from_squares(w, params);
    AllocationResult {
        speeds,
        u_applied: mixer.forward(&speeds),
        alpha,
        beta,
        saturated_tilt: alpha < 1.0,
        saturated_yaw: beta < 1.0,
        thrust_floored: floored,
        thrust_ceiling: ceiling,
    }
}

/// Ground-mode allocation: tilt torque first, yaw second, thrust last.
///
/// The commanded thrust is ignored. Ground contact carries the weight, so
/// thrust is set to the feasible floor for the (scaled) torque plus a fixed
/// margin `t_ground_frac * t_max` that keeps the rotors away from the hard
/// floor; `thrust_floored` is therefore always set. If even the margin does
/// not fit (tilt saturated to the box boundary leaves a single feasible
/// thrust), thrust is cut back to the ceiling and `thrust_ceiling` reports
/// it.
pub fn allocate_prioritized(
    u: &ControlInput,
    params: &RobotParams,
    mixer: &Mixer,
    sets: &FeasibleSets,
) -> AllocationResult {
    let alpha = clamp_tilt(u.tau.x, u.tau.y, sets);
    let tau_x = alpha * u.tau.x;
    let tau_y = alpha * u.tau.y;
    let beta = clamp_yaw(tau_x, tau_y, u.tau.z, sets);
    let tau = Vec3::new(tau_x, tau_y, beta * u.tau.z);

    let (t_lo, t_hi) = thrust_bounds(&tau, params);
    let t_target = t_lo + params.t_ground_frac * params.t_max();
    let ceiling = t_target > t_hi;
    let t = if ceiling { t_hi } else { t_target };

    let h = t / (4.0 * params.c_t);
    let w = sets.offsets(&tau).add_scalar(h);
    build_result(w, alpha, beta, true, ceiling, params, mixer)
}

/// Aerial allocation: thrust is preserved exactly (clamped only to the
/// all-motor band), then tilt and yaw take what headroom remains at that
/// thrust, in that order.
pub fn allocate_thrust_tracking(
    u: &ControlInput,
    params: &RobotParams,
    mixer: &Mixer,
    sets: &FeasibleSets,
) -> AllocationResult {
    let floored = u.thrust < params.t_min();
    let ceiling = u.thrust > params.t_max();
    let t = u.thrust.clamp(params.t_min(), params.t_max());
    let h = t / (4.0 * params.c_t);

    let tilt = sets.offsets(&Vec3::new(u.tau.x, u.tau.y, 0.0));
    let alpha = headroom_scale(&tilt, h, &Vec4::zeros(), params);
    let yaw = sets.offsets(&Vec3::new(0.0, 0.0, u.tau.z));
    let beta = headroom_scale(&yaw, h, &(tilt * alpha), params);

    let w = Vec4::from_fn(|i, _| h + alpha * tilt[i] + beta * yaw[i]);
    build_result(w, alpha, beta, floored, ceiling, params, mixer)
}

/// Largest scale in [0, 1] on `delta` keeping `base_h + committed + s * delta`
/// inside the squared-speed band for every motor.
fn headroom_scale(delta: &Vec4, base_h: f64, committed: &Vec4, params: &RobotParams) -> f64 {
    let lo = params.v_min * params.v_min;
    let hi = params.v_max * params.v_max;
    let mut s: f64 = 1.0;
    for i in 0..4 {
        let have = base_h + committed[i];
        if delta[i] > 0.0 {
            s = s.min((hi - have) / delta[i]);
        } else if delta[i] < 0.0 {
            s = s.min((have - lo) / -delta[i]);
        }
    }
    s.clamp(0.0, 1.0)
}

/// Conventional thrust-first allocation used as the comparison baseline:
/// thrust is pinned to `hover_frac * t_max` and all three torque axes are
/// scaled by one common factor to fit the leftover headroom. Reported as
/// both `alpha` and `beta` since the axes are not separated.
pub fn allocate_baseline_thrust_priority(
    u: &ControlInput,
    hover_frac: f64,
    params: &RobotParams,
    mixer: &Mixer,
) -> AllocationResult {
    let sets = FeasibleSets::new(params);
    let t_target = hover_frac * params.t_max();
    let floored = t_target < params.t_min();
    let ceiling = t_target > params.t_max();
    let t = t_target.clamp(params.t_min(), params.t_max());
    let h = t / (4.0 * params.c_t);

    let delta = sets.offsets(&u.tau);
    let sigma = headroom_scale(&delta, h, &Vec4::zeros(), params);
    let w = delta.map(|d| h + sigma * d);
    build_result(w, sigma, sigma, floored, ceiling, params, mixer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (RobotParams, Mixer, FeasibleSets) {
        let params = RobotParams::default();
        let mixer = Mixer::new(&params);
        let sets = FeasibleSets::new(&params);
        (params, mixer, sets)
    }

    #[test]
    fn mixer_is_exactly_invertible() {
        let (_, mixer, _) = setup();
        let err = (mixer.m * mixer.m_inv - Mat4::identity()).norm();
        assert!(err < 1e-12, "analytic inverse off by {err}");
    }

    #[test]
    fn forward_mix_matches_hand_expansion() {
        let (params, mixer, _) = setup();
        let speeds = MotorSpeeds::new(Vec4::new(300.0, 400.0, 500.0, 600.0));
        let u = mixer.forward(&speeds);
        let w = [90_000.0, 160_000.0, 250_000.0, 360_000.0];
        let k = std::f64::consts::FRAC_1_SQRT_2 * params.c_t * params.l;
        assert_relative_eq!(u.thrust, params.c_t * w.iter().sum::<f64>(), epsilon = 1e-12);
        assert_relative_eq!(u.tau.x, k * (-w[0] - w[1] + w[2] + w[3]), epsilon = 1e-12);
        assert_relative_eq!(u.tau.y, k * (-w[0] + w[1] - w[2] + w[3]), epsilon = 1e-12);
        assert_relative_eq!(
            u.tau.z,
            params.c_d * (-w[0] + w[1] + w[2] - w[3]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn tilt_box_half_width_matches_motor_band() {
        let (params, _, sets) = setup();
        let expected = std::f64::consts::SQRT_2
            * params.c_t
            * params.l
            * (params.v_max.powi(2) - params.v_min.powi(2));
        assert_relative_eq!(sets.tilt_bound, expected, epsilon = 1e-12);
        assert_relative_eq!(sets.tilt_bound, 4.10237, epsilon = 1e-4);
    }

    #[test]
    fn round_trip_on_random_feasible_wrenches() {
        let (params, mixer, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let v = Vec4::from_fn(|_, _| rng.random_range(params.v_min..params.v_max));
            let u = mixer.forward(&MotorSpeeds::new(v));
            let w = mixer.inverse(&u);
            for i in 0..4 {
                assert_relative_eq!(w[i].sqrt(), v[i], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn clamp_tilt_scales_to_box_boundary() {
        let (_, _, sets) = setup();
        // Inside the box: untouched.
        assert_eq!(clamp_tilt(1.0, -2.0, &sets), 1.0);
        assert_eq!(clamp_tilt(0.0, 0.0, &sets), 1.0);
        // A pure-roll overdemand scales back to the box edge.
        let alpha = clamp_tilt(8.0, 0.0, &sets);
        assert_relative_eq!(alpha, sets.tilt_bound / 8.0, epsilon = 1e-15);
        assert_relative_eq!(alpha, 0.5128, epsilon = 1e-4);
        assert!(sets.tilt_feasible(alpha * 8.0, 0.0));
        // The scaled command lands exactly on the boundary.
        assert_relative_eq!(alpha * 8.0, sets.tilt_bound, epsilon = 1e-12);
    }

    #[test]
    fn clamp_yaw_vanishes_at_tilt_box_corner() {
        let (_, _, sets) = setup();
        assert_eq!(clamp_yaw(0.1, -0.2, 0.0, &sets), 1.0);
        // Tilt saturated to a box corner leaves no yaw headroom at all.
        let beta = clamp_yaw(sets.tilt_bound, 0.0, 0.3, &sets);
        assert_relative_eq!(beta, 0.0, epsilon = 1e-12);
        // Modest tilt leaves most of the yaw intact.
        let beta = clamp_yaw(0.5, 0.5, 1.0, &sets);
        assert!(beta > 0.0 && beta <= 1.0);
    }

    #[test]
    fn thrust_bounds_zero_torque_spans_motor_band() {
        let (params, _, _) = setup();
        let (lo, hi) = thrust_bounds(&Vec3::zeros(), &params);
        assert_relative_eq!(lo, params.t_min(), epsilon = 1e-12);
        assert_relative_eq!(hi, params.t_max(), epsilon = 1e-12);
        assert_relative_eq!(lo, 0.52091, epsilon = 1e-4);
    }

    #[test]
    fn prioritized_never_scales_tilt_for_yaw_or_thrust() {
        let (params, mixer, sets) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let tau = Vec3::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-3.0..3.0),
            );
            let u = ControlInput::new(rng.random_range(0.0..60.0), tau);
            let res = allocate_prioritized(&u, &params, &mixer, &sets);
            // alpha depends on the tilt command alone.
            assert_eq!(res.alpha, clamp_tilt(tau.x, tau.y, &sets));
            // Realized tilt torque equals the alpha-scaled command.
            assert_relative_eq!(res.u_applied.tau.x, res.alpha * tau.x, epsilon = 1e-9);
            assert_relative_eq!(res.u_applied.tau.y, res.alpha * tau.y, epsilon = 1e-9);
            // Speed band holds exactly.
            for i in 0..4 {
                assert!(res.speeds.v[i] >= params.v_min - 1e-9);
                assert!(res.speeds.v[i] <= params.v_max + 1e-9);
            }
        }
    }

    #[test]
    fn prioritized_ground_thrust_rule() {
        let (params, mixer, sets) = setup();
        // Unsaturated command: thrust floor plus the ground margin, with the
        // commanded thrust ignored.
        let u = ControlInput::new(40.0, Vec3::new(0.5, -0.3, 0.1));
        let res = allocate_prioritized(&u, &params, &mixer, &sets);
        let (lo, _) = thrust_bounds(&res.u_applied.tau, &params);
        let expected = lo + params.t_ground_frac * params.t_max();
        assert_relative_eq!(res.u_applied.thrust, expected, epsilon = 1e-9);
        assert!(res.thrust_floored);
        assert!(!res.thrust_ceiling);

        // Tilt saturated to the box boundary: the feasible interval collapses
        // to a point and the margin no longer fits.
        let u = ControlInput::new(0.0, Vec3::new(9.0, 0.0, 0.0));
        let res = allocate_prioritized(&u, &params, &mixer, &sets);
        assert!(res.saturated_tilt);
        assert!(res.thrust_ceiling);
        // Two motors pinned at each band edge.
        let mut v: Vec<f64> = res.speeds.v.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(v[0], params.v_min, epsilon = 1e-6);
        assert_relative_eq!(v[1], params.v_min, epsilon = 1e-6);
        assert_relative_eq!(v[2], params.v_max, epsilon = 1e-6);
        assert_relative_eq!(v[3], params.v_max, epsilon = 1e-6);
    }

    #[test]
    fn thrust_tracking_preserves_thrust_and_priority() {
        let (params, mixer, sets) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..1000 {
            let u = ControlInput::new(
                rng.random_range(-5.0..70.0),
                Vec3::new(
                    rng.random_range(-8.0..8.0),
                    rng.random_range(-8.0..8.0),
                    rng.random_range(-2.0..2.0),
                ),
            );
            let res = allocate_thrust_tracking(&u, &params, &mixer, &sets);
            let t_expect = u.thrust.clamp(params.t_min(), params.t_max());
            assert_relative_eq!(res.u_applied.thrust, t_expect, epsilon = 1e-9);
            for i in 0..4 {
                assert!(res.speeds.v[i] >= params.v_min - 1e-9);
                assert!(res.speeds.v[i] <= params.v_max + 1e-9);
            }
            // Tilt direction preserved under scaling.
            assert_relative_eq!(res.u_applied.tau.x, res.alpha * u.tau.x, epsilon = 1e-9);
            assert_relative_eq!(res.u_applied.tau.y, res.alpha * u.tau.y, epsilon = 1e-9);
        }
    }

    #[test]
    fn baseline_scales_all_axes_together() {
        let (params, mixer, _) = setup();
        // At a low hover fraction a big roll torque must shrink, and yaw
        // shrinks with it even though yaw alone would fit.
        let u = ControlInput::new(0.0, Vec3::new(3.0, 0.0, 0.05));
        let res = allocate_baseline_thrust_priority(&u, 0.075, &params, &mixer);
        assert!(res.alpha < 1.0);
        assert_eq!(res.alpha, res.beta);
        assert_relative_eq!(res.u_applied.tau.x, res.alpha * u.tau.x, epsilon = 1e-9);
        assert_relative_eq!(res.u_applied.tau.z, res.alpha * u.tau.z, epsilon = 1e-9);
        // Thrust pinned to the hover setting regardless of torque demand.
        assert_relative_eq!(
            res.u_applied.thrust,
            0.075 * params.t_max(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn baseline_has_no_tilt_authority_at_the_floor() {
        let (params, mixer, _) = setup();
        // Hover fraction at the motor floor: zero headroom below, so any
        // tilt request collapses almost entirely.
        let floor_frac = params.t_min() / params.t_max();
        let u = ControlInput::new(0.0, Vec3::new(1.0, 0.0, 0.0));
        let res = allocate_baseline_thrust_priority(&u, floor_frac, &params, &mixer);
        assert_relative_eq!(res.alpha, 0.0, epsilon = 1e-12);
        // The prioritized allocator delivers the same torque in full.
        let sets = FeasibleSets::new(&params);
        let mixer2 = Mixer::new(&params);
        let res2 = allocate_prioritized(&u, &params, &mixer2, &sets);
        assert_relative_eq!(res2.u_applied.tau.x, 1.0, epsilon = 1e-9);
    }
}
