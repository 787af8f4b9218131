//! Scripted experiments: the full control stack (setpoints, attitude and
//! position loops, allocation, wheel drive) wired to the dynamics in a
//! deterministic fixed-rate loop, plus canned scenarios, allocator
//! comparisons, and throttle sweeps.
//!
//! One scenario is one single-threaded loop. Controllers run at the control
//! rate; the physics substeps at a snapped multiple of it; inverse
//! kinematics refreshes the joint targets at its own slower rate; telemetry
//! decimates to the log rate. Identical scenario plus seed yields a
//! byte-identical telemetry stream.

use crate::allocation::{
    AllocationResult, FeasibleSets, Mixer, allocate_baseline_thrust_priority,
    allocate_prioritized, allocate_thrust_tracking,
};
use crate::arm::{ArmGeometry, end_effector_world, fk_unchecked, ik};
use crate::control::{
    PositionCtrlState, RatePidState, aerial_position_controller, attitude_rate_setpoint, rate_pid,
    wheel_drive, wheel_torque_closed_loop,
};
use crate::dynamics::{ContactState, MotorLag, SimConfig, arm_only_step, contact_forces,
    project_touchdown, step, ModeSupervisor};
use crate::metrics::{SeriesStats, energy, rmse};
use crate::model::{
    ControlInput, ControllerGains, DisturbanceModel, DisturbanceSpec, Mode, ModelError,
    MotorSpeeds, RobotParams, RobotState, Vec2, Vec3, euler_zyx, rotation_zyx,
};
use crate::telemetry::TelemetryRecord;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Control loop rate, Hz.
pub const DEFAULT_CTRL_RATE_HZ: f64 = 400.0;
/// Telemetry logging rate, Hz.
pub const DEFAULT_LOG_RATE_HZ: f64 = 100.0;
/// Inverse kinematics refresh rate for end-effector targets, Hz.
pub const DEFAULT_IK_RATE_HZ: f64 = 5.0;
/// Random-walk intensity of the aerial position estimate, m/sqrt(s). Models
/// the slow drift of an onboard odometry solution; the plant always sees
/// the true state.
pub const ESTIMATE_DRIFT_SIGMA: f64 = 0.005;
/// Track-position hold gain: longitudinal error to speed command, 1/s.
const DRIVE_GAIN: f64 = 1.0;
/// Ground drive speed cap, m/s.
const DRIVE_SPEED_MAX: f64 = 0.4;
/// End-effector error scoring resumes this long after an arm retarget, so
/// the commanded slew between setpoints does not drown the hold-phase
/// tracking quality the metric is meant to compare.
const EE_SCORE_HOLDOFF_S: f64 = 2.0;

/// Which allocator closes the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AllocatorChoice {
    /// Torque-priority allocation (tilt, then yaw, then thrust).
    Prioritized,
    /// Thrust pinned at `hover_frac * t_max`, torques scaled uniformly.
    Baseline { hover_frac: f64 },
}

/// Arm command active at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmCommand {
    /// Direct joint targets, rad.
    Joints(Vec3),
    /// Planar end-effector target in the arm base frame (x forward, z up),
    /// with a wrist angle; resolved by IK at the IK rate.
    Planar(Vec2, f64),
    /// World-frame end-effector target with a wrist angle; transformed into
    /// the arm frame against the live base pose at each IK tick.
    World(Vec3, f64),
}

/// One timeline event: every named channel is retargeted, the rest persist.
#[derive(Debug, Clone, PartialEq)]
pub struct SetpointEvent {
    pub t: f64,
    pub roll: Option<f64>,
    pub pitch: Option<f64>,
    pub yaw: Option<f64>,
    /// Aerial position target, world frame.
    pub position: Option<Vec3>,
    /// Open-loop wheel rate target, rad/s.
    pub wheel_rate: Option<f64>,
    /// Closed-loop track position target, m along the initial heading.
    /// Overrides `wheel_rate` while set; `f64::NAN` clears it.
    pub drive_to: Option<f64>,
    pub arm: Option<ArmCommand>,
    /// Commanded locomotion mode (the supervisor still gates the switch).
    pub mode: Option<Mode>,
}

impl SetpointEvent {
    /// An event at `t` that changes nothing until channels are filled in.
    pub fn at(t: f64) -> Self {
        Self {
            t,
            roll: None,
            pitch: None,
            yaw: None,
            position: None,
            wheel_rate: None,
            drive_to: None,
            arm: None,
            mode: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadAction {
    Attach,
    Detach,
}

/// Payload mass change at a fixed time; attach grips at the current
/// end-effector position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadEvent {
    pub t: f64,
    /// Payload mass, kg (used by attach; detach drops whatever is held).
    pub mass: f64,
    pub action: PayloadAction,
}

/// Starting pose of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub mode: Mode,
    pub yaw: f64,
    pub roll: f64,
    pub pitch: f64,
    /// Aerial start position; ground starts derive theirs from the contact.
    pub position: Option<Vec3>,
    pub wheel_rate: f64,
    pub arm: Vec3,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            mode: Mode::Ground,
            yaw: 0.0,
            roll: 0.0,
            pitch: 0.0,
            position: None,
            wheel_rate: 0.0,
            arm: Vec3::zeros(),
        }
    }
}

impl InitialState {
    pub fn build(&self, params: &RobotParams) -> RobotState {
        let r = rotation_zyx(self.roll, self.pitch, self.yaw);
        match self.mode {
            Mode::Ground => {
                // Contact point at the world origin regardless of tilt.
                let p = params.l_z * r * Vec3::z();
                let mut s = RobotState::grounded(self.yaw, params);
                s.p = p;
                s.r = r;
                s.omega_w = self.wheel_rate;
                s.v = self.wheel_rate * params.r * s.heading();
                s.q_arm = self.arm;
                s
            }
            Mode::Aerial => {
                let mut s =
                    RobotState::hovering(self.position.unwrap_or(Vec3::new(0.0, 0.0, 1.0)), self.yaw);
                s.r = r;
                s.q_arm = self.arm;
                s
            }
        }
    }
}

/// A complete scripted experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub initial: InitialState,
    /// Timeline, strictly increasing in `t`.
    pub setpoints: Vec<SetpointEvent>,
    pub payload_events: Vec<PayloadEvent>,
    /// Run length, s.
    pub duration: f64,
    pub allocator: AllocatorChoice,
    pub disturbance: DisturbanceSpec,
    pub sim: SimConfig,
    pub ctrl_rate_hz: f64,
    pub log_rate_hz: f64,
    pub ik_rate_hz: f64,
    /// Feed the aerial position controller a drifting estimate.
    pub estimate_noise: bool,
    /// Bench mount: freeze the base, integrate only the arm.
    pub base_locked: bool,
}

impl Scenario {
    /// A quiet ground-mode scenario to build on.
    pub fn new(name: &str, duration: f64) -> Self {
        Self {
            name: name.to_string(),
            initial: InitialState::default(),
            setpoints: Vec::new(),
            payload_events: Vec::new(),
            duration,
            allocator: AllocatorChoice::Prioritized,
            disturbance: DisturbanceSpec::default(),
            sim: SimConfig::default(),
            ctrl_rate_hz: DEFAULT_CTRL_RATE_HZ,
            log_rate_hz: DEFAULT_LOG_RATE_HZ,
            ik_rate_hz: DEFAULT_IK_RATE_HZ,
            estimate_noise: false,
            base_locked: false,
        }
    }

    pub fn validated(&self) -> Result<(), ModelError> {
        let bad = |field: &'static str, reason: &str| {
            Err(ModelError::InvalidParam {
                field,
                reason: reason.into(),
            })
        };
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration", "must be positive and finite");
        }
        if !(self.ctrl_rate_hz > 0.0 && self.log_rate_hz > 0.0 && self.ik_rate_hz > 0.0) {
            return bad("rates", "control, log, and ik rates must be positive");
        }
        for pair in self.setpoints.windows(2) {
            if pair[1].t <= pair[0].t {
                return bad("setpoints", "timeline timestamps must be strictly increasing");
            }
        }
        for pair in self.payload_events.windows(2) {
            if pair[1].t <= pair[0].t {
                return bad("payload_events", "timestamps must be strictly increasing");
            }
        }
        if let AllocatorChoice::Baseline { hover_frac } = self.allocator
            && !(hover_frac > 0.0 && hover_frac < 1.0)
        {
            return bad("hover_frac", "baseline hover fraction must lie in (0, 1)");
        }
        if self.disturbance.components == 0 {
            return bad("disturbance", "needs at least one sinusoid per axis");
        }
        self.sim.clone().validated()?;
        Ok(())
    }
}

/// Timestamped note emitted by the loop (mode switches, grips, failures).
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub t: f64,
    pub what: String,
}

/// Post-run summary statistics.
#[derive(Debug, Clone)]
pub struct RunStats {
    /// Pitch against level, evaluated in a ±3 degree band.
    pub pitch: Option<SeriesStats>,
    /// End-effector error RMS against the commanded target, m; present when
    /// the scenario commanded the arm.
    pub ee_rmse: Option<f64>,
    pub mean_power_w: f64,
    pub energy_j: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<TelemetryRecord>,
    pub events: Vec<SimEvent>,
    pub stats: RunStats,
    /// Set when the simulation aborted (diverged) before the full duration.
    pub failure: Option<String>,
}

impl RunOutcome {
    pub fn csv(&self) -> String {
        crate::telemetry::csv_string(&self.records)
    }
}

/// Channels the controllers act on each tick, after folding the timeline.
#[derive(Debug, Clone)]
pub(crate) struct ActiveTargets {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub position: Vec3,
    pub wheel_rate: f64,
    pub drive_to: Option<f64>,
    pub arm: ArmCommand,
    pub commanded_mode: Mode,
}

impl ActiveTargets {
    pub(crate) fn from_initial(initial: &InitialState, state: &RobotState) -> Self {
        Self {
            roll: 0.0,
            pitch: 0.0,
            yaw: initial.yaw,
            position: state.p,
            wheel_rate: 0.0,
            drive_to: None,
            arm: ArmCommand::Joints(initial.arm),
            commanded_mode: initial.mode,
        }
    }

    fn apply(&mut self, ev: &SetpointEvent) {
        if let Some(v) = ev.roll {
            self.roll = v;
        }
        if let Some(v) = ev.pitch {
            self.pitch = v;
        }
        if let Some(v) = ev.yaw {
            self.yaw = v;
        }
        if let Some(v) = ev.position {
            self.position = v;
        }
        if let Some(v) = ev.wheel_rate {
            self.wheel_rate = v;
        }
        if let Some(v) = ev.drive_to {
            self.drive_to = if v.is_nan() { None } else { Some(v) };
        }
        if let Some(v) = ev.arm {
            self.arm = v;
        }
        if let Some(v) = ev.mode {
            self.commanded_mode = v;
        }
    }
}

/// The deterministic closed-loop driver shared by scenarios and the
/// mission runner. One `tick` = one control period.
pub(crate) struct SimLoop {
    pub params_base: RobotParams,
    pub gains: ControllerGains,
    pub geom: ArmGeometry,
    pub cfg: SimConfig,
    pub ctrl_period: f64,
    pub substeps: usize,
    ik_div: u64,
    pub state: RobotState,
    pub contact: ContactState,
    lag: MotorLag,
    rate_pid: RatePidState,
    pos_ctrl: PositionCtrlState,
    supervisor: ModeSupervisor,
    dist: DisturbanceModel,
    drift: Vec3,
    drift_rng: ChaCha8Rng,
    /// Held payload: mass, kg. CG offset follows the live grip pose.
    attached: Option<f64>,
    pub q_cmd: Vec3,
    pub tick_idx: u64,
    pub events: Vec<SimEvent>,
    /// Track origin and heading fixing the drive-to coordinate.
    track_origin: Vec2,
    track_heading: Vec2,
    base_locked: bool,
    estimate_noise: bool,
    allocator: AllocatorChoice,
}

/// What one tick produced, for logging.
pub(crate) struct TickSample {
    pub result: AllocationResult,
    pub realized: MotorSpeeds,
    pub tau_w: f64,
}

impl SimLoop {
    pub fn new(
        scenario: &Scenario,
        params: &RobotParams,
        gains: &ControllerGains,
        geom: &ArmGeometry,
    ) -> Self {
        let state = scenario.initial.build(params);
        let ctrl_period = 1.0 / scenario.ctrl_rate_hz;
        // Snap the physics step to an integer number of substeps per tick.
        let substeps = (ctrl_period / scenario.sim.dt).round().max(1.0) as usize;
        let cfg = SimConfig {
            dt: ctrl_period / substeps as f64,
            ..scenario.sim.clone()
        };
        // Rotors start at the band floor on the ground, near hover in the air.
        let v0 = match state.mode {
            Mode::Ground => params.v_min,
            Mode::Aerial => (params.hover_thrust() / (4.0 * params.c_t)).sqrt(),
        };
        let h = state.heading();
        let contact = contact_forces(
            &state,
            params,
            4.0 * params.c_t * v0 * v0,
            0.0,
            &Vec3::zeros(),
        );
        Self {
            params_base: params.clone(),
            gains: gains.clone(),
            geom: geom.clone(),
            cfg,
            ctrl_period,
            substeps,
            ik_div: (scenario.ctrl_rate_hz / scenario.ik_rate_hz).round().max(1.0) as u64,
            track_origin: state.contact_point(params).xy(),
            track_heading: h.xy(),
            state,
            contact,
            lag: MotorLag::new(&MotorSpeeds::uniform(v0)),
            rate_pid: RatePidState::new(),
            pos_ctrl: PositionCtrlState::new(),
            supervisor: ModeSupervisor::new(),
            dist: DisturbanceModel::new(&scenario.disturbance, scenario.sim.seed),
            drift: Vec3::zeros(),
            drift_rng: ChaCha8Rng::seed_from_u64(scenario.sim.seed ^ 0x6565_7374_696d_6174),
            attached: None,
            q_cmd: scenario.initial.arm,
            tick_idx: 0,
            events: Vec::new(),
            base_locked: scenario.base_locked,
            estimate_noise: scenario.estimate_noise,
            allocator: scenario.allocator,
        }
    }

    pub fn t(&self) -> f64 {
        self.tick_idx as f64 * self.ctrl_period
    }

    fn push_event(&mut self, what: impl Into<String>) {
        self.events.push(SimEvent {
            t: self.t(),
            what: what.into(),
        });
    }

    /// End-effector position in the body frame.
    pub fn ee_body(&self) -> Vec3 {
        let planar = fk_unchecked(&self.state.q_arm, &self.geom);
        self.geom.base_offset + Vec3::new(planar.x, 0.0, planar.y)
    }

    /// Grip a payload at the current end-effector pose.
    pub fn attach_payload(&mut self, mass: f64) {
        if self.attached.is_some() {
            self.push_event("payload_attach_ignored_already_held");
            return;
        }
        self.attached = Some(mass);
        self.push_event(format!("payload_attached mass={mass}"));
    }

    pub fn detach_payload(&mut self) {
        if self.attached.take().is_some() {
            self.push_event("payload_released");
        } else {
            self.push_event("payload_release_ignored_empty");
        }
    }

    /// Parameters the plant and controllers currently obey: base vehicle
    /// plus any held payload (mass and the CG shift toward the grip point,
    /// tracking the live arm pose).
    pub fn effective_params(&self) -> RobotParams {
        let mut p = self.params_base.clone();
        if let Some(m_p) = self.attached {
            let grip = self.ee_body();
            p.d_cg = (p.m * p.d_cg + m_p * grip) / (p.m + m_p);
            p.m += m_p;
        }
        p
    }

    /// Distance traveled along the track line, m.
    pub fn track_position(&self) -> f64 {
        let c = self.state.contact_point(&self.params_base).xy();
        (c - self.track_origin).dot(&self.track_heading)
    }

    /// Runs controllers once and advances the plant one control period.
    pub fn tick(&mut self, targets: &ActiveTargets) -> Result<TickSample, String> {
        let t = self.t();
        let params = self.effective_params();
        let mixer = Mixer::new(&params);
        let sets = FeasibleSets::new(&params);

        // Arm IK at its own rate; joint commands apply immediately.
        match targets.arm {
            ArmCommand::Joints(q) => self.q_cmd = q,
            ArmCommand::Planar(xz, wrist) => {
                if self.tick_idx.is_multiple_of(self.ik_div) {
                    match ik(&xz, wrist, &self.geom) {
                        Ok(q) => self.q_cmd = q,
                        Err(e) => self.push_event(format!("ik_failed: {e}")),
                    }
                }
            }
            ArmCommand::World(target, wrist) => {
                if self.tick_idx.is_multiple_of(self.ik_div) {
                    let local = self.state.r.transpose() * (target - self.state.p)
                        - self.geom.base_offset;
                    match ik(&Vec2::new(local.x, local.z), wrist, &self.geom) {
                        Ok(q) => self.q_cmd = q,
                        Err(e) => self.push_event(format!("ik_failed: {e}")),
                    }
                }
            }
        }

        if self.base_locked {
            // Bench mount: no vehicle dynamics, the arm alone integrates.
            for _ in 0..self.substeps {
                self.state.q_arm =
                    arm_only_step(&self.state.q_arm, &self.q_cmd, &self.geom, self.cfg.dt);
            }
            self.contact = contact_forces(&self.state, &params, 0.0, 0.0, &Vec3::zeros());
            self.tick_idx += 1;
            return Ok(TickSample {
                result: AllocationResult::idle(),
                realized: MotorSpeeds::uniform(0.0),
                tau_w: 0.0,
            });
        }

        // The controller flies aerial as soon as liftoff is commanded (to
        // build thrust) and until touchdown actually happens.
        let ctrl_aerial =
            targets.commanded_mode == Mode::Aerial || self.state.mode == Mode::Aerial;

        let (thrust_cmd, r_d) = if ctrl_aerial {
            if self.estimate_noise {
                // Random-walk drift of the believed position, per axis.
                let scale = ESTIMATE_DRIFT_SIGMA * self.ctrl_period.sqrt();
                for i in 0..3 {
                    let n: f64 = StandardNormal.sample(&mut self.drift_rng);
                    self.drift[i] += scale * n;
                }
            }
            let p_hat = self.state.p + self.drift;
            aerial_position_controller(
                &targets.position,
                &Vec3::zeros(),
                targets.yaw,
                &p_hat,
                &self.state.v,
                &self.state.r,
                &mut self.pos_ctrl,
                &self.gains,
                &params,
            )
        } else {
            (0.0, rotation_zyx(targets.roll, targets.pitch, targets.yaw))
        };

        let omega_d = attitude_rate_setpoint(&r_d, &self.state.r, &self.gains);
        let tau = rate_pid(
            &omega_d,
            &self.state.omega,
            &mut self.rate_pid,
            &self.gains,
            // Known constant bias acting on the plant, fed forward with the
            // opposite sign so the loop starts from a canceled torque.
            &(-params.tau_c),
            self.ctrl_period,
        );
        let u_cmd = ControlInput::new(thrust_cmd, tau);

        let result = match (self.allocator, ctrl_aerial) {
            (AllocatorChoice::Prioritized, false) => {
                allocate_prioritized(&u_cmd, &params, &mixer, &sets)
            }
            (AllocatorChoice::Prioritized, true) => {
                allocate_thrust_tracking(&u_cmd, &params, &mixer, &sets)
            }
            (AllocatorChoice::Baseline { hover_frac }, _) => {
                allocate_baseline_thrust_priority(&u_cmd, hover_frac, &params, &mixer)
            }
        };

        let tau_w = if self.state.mode == Mode::Ground {
            match targets.drive_to {
                Some(s_ref) => {
                    let v_d = (DRIVE_GAIN * (s_ref - self.track_position()))
                        .clamp(-DRIVE_SPEED_MAX, DRIVE_SPEED_MAX);
                    wheel_torque_closed_loop(v_d / params.r, self.state.omega_w, &self.gains)
                }
                None => wheel_drive(targets.wheel_rate, self.state.omega_w, &self.gains),
            }
        } else {
            0.0
        };

        let realized = self
            .lag
            .advance(&result.speeds, self.ctrl_period, self.cfg.motor_lag_tau);

        for k in 0..self.substeps {
            let t_sub = t + k as f64 * self.cfg.dt;
            let (mut next, contact) = step(
                &self.state,
                &realized,
                tau_w,
                &self.q_cmd,
                &self.dist,
                &params,
                &self.geom,
                &self.cfg,
                t_sub,
            )
            .map_err(|e| e.to_string())?;
            let decision =
                self.supervisor
                    .transition(&next, &contact, targets.commanded_mode, &params);
            if decision.lifted_off {
                next.mode = Mode::Aerial;
                self.push_event("liftoff");
            }
            if decision.touched_down {
                project_touchdown(&mut next, &params);
                self.push_event(if decision.hard_landing {
                    "touchdown hard_landing"
                } else {
                    "touchdown"
                });
            }
            self.state = next;
            self.contact = contact;
        }
        self.tick_idx += 1;
        Ok(TickSample {
            result,
            realized,
            tau_w,
        })
    }

    /// Builds the telemetry row for the state at the START of the tick that
    /// produced `sample`.
    pub fn record(&self, t: f64, state_before: &RobotState, sample: &TickSample) -> TelemetryRecord {
        let params = self.effective_params();
        let (roll, pitch, yaw) = euler_zyx(&state_before.r);
        TelemetryRecord {
            t,
            p: state_before.p,
            v: state_before.v,
            rpy: Vec3::new(roll, pitch, yaw),
            omega: state_before.omega,
            omega_w: state_before.omega_w,
            q_arm: state_before.q_arm,
            ee: end_effector_world(state_before, &self.geom, &params),
            t_applied: sample.result.u_applied.thrust,
            tau: sample.result.u_applied.tau,
            tau_w: sample.tau_w,
            motor: sample.realized.v,
            alpha: sample.result.alpha,
            beta: sample.result.beta,
            n_c: self.contact.n_c,
            mode: state_before.mode,
            power_w: sample.realized.power(&params),
        }
    }
}

impl AllocationResult {
    /// Placeholder result for ticks where no allocation ran (locked base).
    fn idle() -> Self {
        AllocationResult {
            speeds: MotorSpeeds::uniform(0.0),
            u_applied: ControlInput::new(0.0, Vec3::zeros()),
            alpha: 1.0,
            beta: 1.0,
            saturated_tilt: false,
            saturated_yaw: false,
            thrust_floored: false,
            thrust_ceiling: false,
        }
    }
}

/// Runs a scenario to completion (or divergence) and summarizes it.
pub fn run_scenario(
    scenario: &Scenario,
    params: &RobotParams,
    gains: &ControllerGains,
    geom: &ArmGeometry,
) -> Result<RunOutcome, ModelError> {
    scenario.validated()?;
    let mut sim = SimLoop::new(scenario, params, gains, geom);
    let mut targets = ActiveTargets::from_initial(&scenario.initial, &sim.state);
    let n_ticks = (scenario.duration * scenario.ctrl_rate_hz).round() as u64;
    let log_div = (scenario.ctrl_rate_hz / scenario.log_rate_hz).round().max(1.0) as u64;

    let mut sp_cursor = 0;
    let mut pl_cursor = 0;
    let mut records = Vec::new();
    let mut ee_errors = Vec::new();
    let mut failure = None;
    let mut arm_changed_at = 0.0;

    // Reference base pose for end-effector scoring: where the base is
    // supposed to be, so base wobble and drift count as tracking error.
    let nominal_ground = (sim.state.p, scenario.initial.yaw);

    for tick in 0..n_ticks {
        let t = tick as f64 * sim.ctrl_period;
        while sp_cursor < scenario.setpoints.len() && scenario.setpoints[sp_cursor].t <= t {
            let prev_arm = targets.arm;
            targets.apply(&scenario.setpoints[sp_cursor]);
            if targets.arm != prev_arm {
                arm_changed_at = t;
            }
            sp_cursor += 1;
        }
        while pl_cursor < scenario.payload_events.len()
            && scenario.payload_events[pl_cursor].t <= t
        {
            let ev = scenario.payload_events[pl_cursor];
            match ev.action {
                PayloadAction::Attach => sim.attach_payload(ev.mass),
                PayloadAction::Detach => sim.detach_payload(),
            }
            pl_cursor += 1;
        }

        let state_before = sim.state.clone();
        let sample = match sim.tick(&targets) {
            Ok(s) => s,
            Err(e) => {
                failure = Some(format!("aborted at t = {t:.3}: {e}"));
                sim.events.push(SimEvent {
                    t,
                    what: failure.clone().unwrap(),
                });
                break;
            }
        };

        if tick % log_div == 0 {
            let rec = sim.record(t, &state_before, &sample);
            if let ArmCommand::Planar(xz, _) = targets.arm
                && t - arm_changed_at >= EE_SCORE_HOLDOFF_S
            {
                // Score against the target expressed at the nominal base
                // pose (commanded hover point in the air, the starting
                // pose on the ground).
                let (p_nom, yaw_nom) = if state_before.mode == Mode::Aerial {
                    (targets.position, targets.yaw)
                } else {
                    nominal_ground
                };
                let r_nom = rotation_zyx(0.0, 0.0, yaw_nom);
                let target_world =
                    p_nom + r_nom * (geom.base_offset + Vec3::new(xz.x, 0.0, xz.y));
                ee_errors.push((rec.ee - target_world).norm());
            }
            records.push(rec);
        }
    }

    let stats = summarize(&records, &ee_errors);
    Ok(RunOutcome {
        records,
        events: sim.events,
        stats,
        failure,
    })
}

fn summarize(records: &[TelemetryRecord], ee_errors: &[f64]) -> RunStats {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let pitch: Vec<f64> = records.iter().map(|r| r.rpy.y).collect();
    let power: Vec<f64> = records.iter().map(|r| r.power_w).collect();
    let band = 3.0_f64.to_radians();
    RunStats {
        pitch: SeriesStats::compute(&t, &pitch, 0.0, band, &power),
        ee_rmse: rmse(ee_errors),
        mean_power_w: if power.is_empty() {
            0.0
        } else {
            power.iter().sum::<f64>() / power.len() as f64
        },
        energy_j: energy(&t, &power),
    }
}

// ---------------------------------------------------------------------------
// Canned experiments.

/// Recovery from a large initial pitch on the ground, no disturbance:
/// the attitude loop must pull the vehicle level and hold it.
pub fn attitude_recovery() -> Scenario {
    let mut s = Scenario::new("attitude_recovery", 8.0);
    s.initial.pitch = 10.0_f64.to_radians();
    s
}

/// Level hold on the ground under band-limited torque disturbance; the
/// workhorse for throttle sweeps and allocator comparisons.
pub fn attitude_hold(seed: u64) -> Scenario {
    let mut s = Scenario::new("attitude_hold", 20.0);
    s.disturbance = DisturbanceSpec::with_sigmas(0.0, 0.08);
    s.sim.seed = seed;
    s
}

/// Two planar end-effector setpoints held 7 s each. `reach` places the
/// same trajectory on a bench (locked base), on the wheel, or hovering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackingBase {
    Static,
    Ground,
    Aerial,
}

pub fn tracking(base: TrackingBase, seed: u64) -> Scenario {
    let name = match base {
        TrackingBase::Static => "tracking_static",
        TrackingBase::Ground => "tracking_ground",
        TrackingBase::Aerial => "tracking_aerial",
    };
    let mut s = Scenario::new(name, 15.0);
    s.sim.seed = seed;
    s.disturbance = DisturbanceSpec::with_sigmas(0.2, 0.05);
    match base {
        TrackingBase::Static => s.base_locked = true,
        TrackingBase::Ground => {
            // Hold the track position against the force disturbance.
            let mut ev = SetpointEvent::at(0.0);
            ev.drive_to = Some(0.0);
            s.setpoints.push(ev);
        }
        TrackingBase::Aerial => {
            s.initial.mode = Mode::Aerial;
            s.initial.position = Some(Vec3::new(0.0, 0.0, 0.8));
            s.estimate_noise = true;
        }
    }
    let mut first = s.setpoints.pop().unwrap_or(SetpointEvent::at(0.0));
    first.arm = Some(ArmCommand::Planar(Vec2::new(0.16, -0.06), 0.0));
    s.setpoints.push(first);
    let mut second = SetpointEvent::at(8.0);
    second.arm = Some(ArmCommand::Planar(Vec2::new(0.24, -0.12), 0.0));
    s.setpoints.push(second);
    s
}

/// One row of an allocator comparison report.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub label: String,
    pub hover_frac: Option<f64>,
    pub pitch_rmse: f64,
    pub settling_time_s: Option<f64>,
    pub mean_power_w: f64,
}

/// Runs `scenario` once with the prioritized allocator and once per baseline
/// hover fraction, reporting pitch RMSE, settling into ±3°, and mean power.
pub fn compare_allocators(
    scenario: &Scenario,
    hover_fracs: &[f64],
    params: &RobotParams,
    gains: &ControllerGains,
    geom: &ArmGeometry,
) -> Result<Vec<CompareRow>, ModelError> {
    let mut rows = Vec::with_capacity(1 + hover_fracs.len());
    let mut run = |label: String, hover: Option<f64>, alloc| -> Result<(), ModelError> {
        let mut sc = scenario.clone();
        sc.allocator = alloc;
        let outcome = run_scenario(&sc, params, gains, geom)?;
        let pitch = outcome.stats.pitch.as_ref();
        rows.push(CompareRow {
            label,
            hover_frac: hover,
            pitch_rmse: pitch.map_or(f64::NAN, |s| s.rmse),
            settling_time_s: pitch.and_then(|s| s.settling_time_s),
            mean_power_w: outcome.stats.mean_power_w,
        });
        Ok(())
    };
    run(
        "prioritized".to_string(),
        None,
        AllocatorChoice::Prioritized,
    )?;
    for &hover_frac in hover_fracs {
        run(
            format!("baseline_{hover_frac}"),
            Some(hover_frac),
            AllocatorChoice::Baseline { hover_frac },
        )?;
    }
    Ok(rows)
}

/// One row of a ground-thrust sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub t_ground_frac: f64,
    pub pitch_rmse: f64,
    pub mean_power_w: f64,
    pub energy_j: f64,
}

/// Reruns `scenario` across ground-thrust margins (same seed throughout).
pub fn throttle_sweep(
    scenario: &Scenario,
    fracs: &[f64],
    params: &RobotParams,
    gains: &ControllerGains,
    geom: &ArmGeometry,
) -> Result<Vec<SweepRow>, ModelError> {
    let mut rows = Vec::with_capacity(fracs.len());
    for &frac in fracs {
        let mut p = params.clone();
        p.t_ground_frac = frac;
        let p = p.validated()?;
        let outcome = run_scenario(scenario, &p, gains, geom)?;
        rows.push(SweepRow {
            t_ground_frac: frac,
            pitch_rmse: outcome.stats.pitch.as_ref().map_or(f64::NAN, |s| s.rmse),
            mean_power_w: outcome.stats.mean_power_w,
            energy_j: outcome.stats.energy_j,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack() -> (RobotParams, ControllerGains, ArmGeometry) {
        (
            RobotParams::default(),
            ControllerGains::default(),
            ArmGeometry::default(),
        )
    }

    #[test]
    fn recovery_settles_into_three_degrees_and_stays() {
        let (params, gains, geom) = stack();
        let outcome = run_scenario(&attitude_recovery(), &params, &gains, &geom).unwrap();
        assert!(outcome.failure.is_none(), "{:?}", outcome.failure);
        let pitch = outcome.stats.pitch.expect("pitch stats");
        let settle = pitch.settling_time_s.expect("must settle");
        assert!(settle < 3.0, "settled at {settle}");
        // Within a degree by t = 6 s.
        let late: Vec<f64> = outcome
            .records
            .iter()
            .filter(|r| r.t >= 6.0)
            .map(|r| r.rpy.y.abs())
            .collect();
        assert!(!late.is_empty());
        assert!(
            late.iter().all(|e| *e < 1.0_f64.to_radians()),
            "late error up to {:.3} deg",
            late.iter().cloned().fold(0.0, f64::max).to_degrees()
        );
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let (params, gains, geom) = stack();
        let sc = attitude_hold(42);
        let a = run_scenario(&sc, &params, &gains, &geom).unwrap();
        let b = run_scenario(&sc, &params, &gains, &geom).unwrap();
        assert_eq!(a.csv(), b.csv());
        // And a different seed actually changes the stream.
        let sc2 = attitude_hold(43);
        let c = run_scenario(&sc2, &params, &gains, &geom).unwrap();
        assert_ne!(a.csv(), c.csv());
    }

    #[test]
    fn timeline_validation_rejects_disorder() {
        let mut sc = Scenario::new("bad", 1.0);
        sc.setpoints.push(SetpointEvent::at(0.5));
        sc.setpoints.push(SetpointEvent::at(0.5));
        assert!(sc.validated().is_err());
        sc.setpoints[1].t = 0.6;
        assert!(sc.validated().is_ok());
        sc.duration = 0.0;
        assert!(sc.validated().is_err());
    }

    #[test]
    fn ground_hold_keeps_station_under_force_disturbance() {
        let (params, gains, geom) = stack();
        let sc = tracking(TrackingBase::Ground, 5);
        let outcome = run_scenario(&sc, &params, &gains, &geom).unwrap();
        assert!(outcome.failure.is_none(), "{:?}", outcome.failure);
        let last = outcome.records.last().unwrap();
        // The wheel hold keeps the base near its mark despite 0.2 N of
        // stochastic pushing.
        assert!(last.p.xy().norm() < 0.05, "wandered {:.3} m", last.p.xy().norm());
        assert!(outcome.stats.ee_rmse.expect("arm commanded") < 0.05);
    }

    #[test]
    fn locked_base_moves_only_the_arm() {
        let (params, gains, geom) = stack();
        let sc = tracking(TrackingBase::Static, 5);
        let outcome = run_scenario(&sc, &params, &gains, &geom).unwrap();
        let first = &outcome.records[0];
        let last = outcome.records.last().unwrap();
        assert_eq!(first.p, last.p);
        assert_eq!(first.rpy, last.rpy);
        assert_ne!(first.q_arm, last.q_arm);
        assert_eq!(last.power_w, 0.0);
    }

    #[test]
    fn aerial_tracking_hovers_and_tracks_worse_than_ground() {
        let (params, gains, geom) = stack();
        let air = run_scenario(&tracking(TrackingBase::Aerial, 5), &params, &gains, &geom)
            .unwrap();
        assert!(air.failure.is_none(), "{:?}", air.failure);
        let ground =
            run_scenario(&tracking(TrackingBase::Ground, 5), &params, &gains, &geom).unwrap();
        let e_air = air.stats.ee_rmse.unwrap();
        let e_ground = ground.stats.ee_rmse.unwrap();
        assert!(
            e_ground < e_air,
            "ground {e_ground:.4} not better than aerial {e_air:.4}"
        );
    }

    #[test]
    fn torque_neutral_grip_raises_normal_force_by_the_payload_weight() {
        let (params, gains, geom) = stack();
        let mut sc = Scenario::new("origin_grip", 4.0);
        // Park the gripper straight below the body origin so the held mass
        // shifts no torque trim: the only effect is its weight on the wheel.
        let mut ev = SetpointEvent::at(0.0);
        ev.arm = Some(ArmCommand::Planar(Vec2::new(-0.08, -0.10), 0.0));
        sc.setpoints.push(ev);
        sc.payload_events.push(PayloadEvent {
            t: 3.0,
            mass: 0.09,
            action: PayloadAction::Attach,
        });
        let outcome = run_scenario(&sc, &params, &gains, &geom).unwrap();
        let n_c_at = |t: f64| {
            outcome
                .records
                .iter()
                .find(|r| (r.t - t).abs() < 1e-9)
                .unwrap()
                .n_c
        };
        let jump = n_c_at(3.0) - n_c_at(2.99);
        let expect = 0.09 * params.g;
        assert!(
            (jump - expect).abs() < 0.005,
            "n_c jumped {jump:.4} N, expected {expect:.4} N"
        );
    }

    #[test]
    fn payload_attach_enters_the_force_balance() {
        let (params, gains, geom) = stack();
        let mut sc = Scenario::new("grip", 3.0);
        sc.payload_events.push(PayloadEvent {
            t: 1.0,
            mass: 0.09,
            action: PayloadAction::Attach,
        });
        let outcome = run_scenario(&sc, &params, &gains, &geom).unwrap();
        assert!(outcome.events.iter().any(|e| e.what.contains("payload_attached")));
        // At steady state the quasi-static balance n_c = m g - T r33 must
        // hold with the held mass included. Holding the offset CG also costs
        // thrust-floor headroom, so thrust (and n_c) genuinely move.
        let balance = |rec: &TelemetryRecord, m: f64| {
            let r33 = rec.rpy.x.cos() * rec.rpy.y.cos();
            m * params.g - rec.t_applied * r33 - rec.n_c
        };
        let before = outcome.records.iter().find(|r| r.t >= 0.9).unwrap();
        let after = outcome.records.last().unwrap();
        assert!(balance(before, params.m).abs() < 0.02, "pre-grip imbalance");
        assert!(
            balance(after, params.m + 0.09).abs() < 0.02,
            "post-grip imbalance {:.4}",
            balance(after, params.m + 0.09)
        );
        // Wrong-mass hypotheses must NOT balance.
        assert!(balance(after, params.m).abs() > 0.5);
        // And the attitude loop re-levels against the shifted CG.
        assert!(after.rpy.y.abs() < 1.0_f64.to_radians());
    }
}
