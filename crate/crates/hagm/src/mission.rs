//! Scripted pick-and-place mission: drive to the pick site, grasp a payload,
//! stow, fly to the drop site, land, and place; a phase machine over the
//! same deterministic control loop the scenarios use.
//!
//! Each phase has an exit condition and a timeout; a timeout fails the
//! mission and names the phase. Phase exits that depend on convergence
//! require the condition to hold for a sustain window so a transient graze
//! cannot advance the mission.

use crate::arm::{ArmGeometry, end_effector_world};
use crate::dynamics::SimConfig;
use crate::model::{
    ControllerGains, DisturbanceSpec, Mode, ModelError, RobotParams, Vec2, Vec3, rotation_zyx,
};
use crate::scenario::{
    ActiveTargets, ArmCommand, InitialState, Scenario, SimEvent, SimLoop,
};
use crate::telemetry::TelemetryRecord;

/// Per-phase time budgets, s.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTimeouts {
    pub approach: f64,
    pub reach: f64,
    pub grasp: f64,
    pub stow: f64,
    pub takeoff: f64,
    pub cruise: f64,
    pub descend: f64,
    pub place: f64,
    pub release: f64,
    pub retract: f64,
}

impl Default for PhaseTimeouts {
    fn default() -> Self {
        Self {
            approach: 20.0,
            reach: 10.0,
            grasp: 2.0,
            stow: 4.0,
            takeoff: 10.0,
            cruise: 20.0,
            descend: 15.0,
            place: 10.0,
            release: 2.0,
            retract: 4.0,
        }
    }
}

/// Mission script parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    /// How far to drive along the initial heading before picking, m.
    pub drive_distance: f64,
    /// Pick grasp point in the arm plane (x forward, z up), m, anchored to
    /// the nominal stopped base pose.
    pub pick: Vec2,
    pub pick_wrist: f64,
    /// Place point in the arm plane, anchored to the nominal landed pose.
    pub place: Vec2,
    pub place_wrist: f64,
    /// Folded transport pose, joint angles, rad.
    pub stow: Vec3,
    /// Cruise waypoint, world frame, m; its z is also the takeoff altitude
    /// and its x-y is the landing site.
    pub cruise: Vec3,
    /// Mass picked up at the grasp, kg.
    pub payload_mass: f64,
    /// Landing descent rate, m/s.
    pub descent_rate: f64,
    pub disturbance: DisturbanceSpec,
    pub timeouts: PhaseTimeouts,
    pub sim: SimConfig,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            drive_distance: 0.5,
            pick: Vec2::new(0.22, -0.12),
            pick_wrist: 0.0,
            place: Vec2::new(0.22, -0.12),
            place_wrist: 0.0,
            stow: Vec3::new(-1.5, 2.6, 0.0),
            cruise: Vec3::new(1.3, 0.0, 0.8),
            payload_mass: 0.09,
            descent_rate: 0.25,
            disturbance: DisturbanceSpec::with_sigmas(0.05, 0.02),
            timeouts: PhaseTimeouts::default(),
            sim: SimConfig::default(),
        }
    }
}

impl MissionConfig {
    // Negated comparisons are deliberate: NaN fails every check this way.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validated(&self, geom: &ArmGeometry) -> Result<(), ModelError> {
        let bad = |field: &'static str, reason: &str| {
            Err(ModelError::InvalidParam {
                field,
                reason: reason.into(),
            })
        };
        if !(self.payload_mass >= 0.0 && self.payload_mass.is_finite()) {
            return bad("payload_mass", "must be nonnegative and finite");
        }
        if !(self.descent_rate > 0.0) {
            return bad("descent_rate", "must be positive");
        }
        if self.cruise.z <= 0.0 {
            return bad("cruise", "cruise altitude must be positive");
        }
        for (name, target) in [("pick", self.pick), ("place", self.place)] {
            let r = target.norm();
            if r > geom.reach() || r < geom.inner_radius() {
                return Err(ModelError::InvalidParam {
                    field: "pick",
                    reason: format!("{name} target outside the arm workspace"),
                });
            }
        }
        self.sim.clone().validated()?;
        Ok(())
    }
}

/// Mission phases, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissionPhase {
    GroundApproach,
    ReachPick,
    Grasp,
    Stow,
    Takeoff,
    Cruise,
    Descend,
    ReachPlace,
    Release,
    Retract,
    Done,
}

impl MissionPhase {
    pub fn name(&self) -> &'static str {
        match self {
            MissionPhase::GroundApproach => "ground_approach",
            MissionPhase::ReachPick => "reach_pick",
            MissionPhase::Grasp => "grasp",
            MissionPhase::Stow => "stow",
            MissionPhase::Takeoff => "takeoff",
            MissionPhase::Cruise => "cruise",
            MissionPhase::Descend => "descend",
            MissionPhase::ReachPlace => "reach_place",
            MissionPhase::Release => "release",
            MissionPhase::Retract => "retract",
            MissionPhase::Done => "done",
        }
    }

    fn timeout(&self, t: &PhaseTimeouts) -> f64 {
        match self {
            MissionPhase::GroundApproach => t.approach,
            MissionPhase::ReachPick => t.reach,
            MissionPhase::Grasp => t.grasp,
            MissionPhase::Stow => t.stow,
            MissionPhase::Takeoff => t.takeoff,
            MissionPhase::Cruise => t.cruise,
            MissionPhase::Descend => t.descend,
            MissionPhase::ReachPlace => t.place,
            MissionPhase::Release => t.release,
            MissionPhase::Retract => t.retract,
            MissionPhase::Done => f64::INFINITY,
        }
    }
}

/// Mission result: outcome flags plus the full telemetry and event trail.
#[derive(Debug, Clone)]
pub struct MissionOutcome {
    pub success: bool,
    pub failure: Option<String>,
    /// End-effector distance from the place point at release, m.
    pub placement_error_m: Option<f64>,
    /// (phase name, completion time) for every phase that finished.
    pub phase_log: Vec<(String, f64)>,
    pub records: Vec<TelemetryRecord>,
    pub events: Vec<SimEvent>,
}

/// Condition-held-long-enough latch for phase exits.
struct Sustain {
    since: Option<f64>,
}

impl Sustain {
    fn new() -> Self {
        Self { since: None }
    }

    fn check(&mut self, ok: bool, t: f64, need: f64) -> bool {
        if !ok {
            self.since = None;
            return false;
        }
        let since = *self.since.get_or_insert(t);
        t - since >= need
    }
}

const STOP_SPEED: f64 = 0.02;
const STOP_TOL_M: f64 = 0.01;
const REACH_TOL_M: f64 = 0.01;
const JOINT_TOL_RAD: f64 = 0.05;
const ALT_TOL_M: f64 = 0.05;
const WAYPOINT_TOL_M: f64 = 0.05;
const GRASP_DWELL_S: f64 = 1.0;
const RELEASE_DWELL_S: f64 = 0.5;

/// Runs the pick-and-place mission to success, failure, or timeout.
pub fn mission_pick_place(
    config: &MissionConfig,
    params: &RobotParams,
    gains: &ControllerGains,
    geom: &ArmGeometry,
) -> Result<MissionOutcome, ModelError> {
    config.validated(geom)?;

    // The scenario shell only seeds the loop; the phase machine drives it.
    let mut shell = Scenario::new("mission_pick_place", 1.0);
    shell.initial = InitialState::default();
    shell.disturbance = config.disturbance.clone();
    shell.sim = config.sim.clone();
    let mut sim = SimLoop::new(&shell, params, gains, geom);
    let mut targets = ActiveTargets::from_initial(&shell.initial, &sim.state);

    // World anchors, defined at nominal poses so base placement errors show
    // up in the end-effector scores rather than being absorbed into them.
    let yaw_rot = rotation_zyx(0.0, 0.0, shell.initial.yaw);
    let arm_world = |base: Vec3, planar: Vec2| {
        base + yaw_rot * (geom.base_offset + Vec3::new(planar.x, 0.0, planar.y))
    };
    let pick_base = Vec3::new(config.drive_distance, 0.0, params.l_z);
    let pick_world = arm_world(pick_base, config.pick);
    let land_base = Vec3::new(config.cruise.x, config.cruise.y, params.l_z);
    let place_world = arm_world(land_base, config.place);

    let log_div = (shell.ctrl_rate_hz / shell.log_rate_hz).round() as u64;
    let mut phase = MissionPhase::GroundApproach;
    let mut phase_started = 0.0;
    let mut sustain = Sustain::new();
    let mut descend_z0 = 0.0;
    let mut placement_error = None;
    let mut phase_log = Vec::new();
    let mut records = Vec::new();
    let mut failure: Option<String> = None;

    targets.drive_to = Some(config.drive_distance);

    let hard_budget: f64 = [
        config.timeouts.approach,
        config.timeouts.reach,
        config.timeouts.grasp,
        config.timeouts.stow,
        config.timeouts.takeoff,
        config.timeouts.cruise,
        config.timeouts.descend,
        config.timeouts.place,
        config.timeouts.release,
        config.timeouts.retract,
    ]
    .iter()
    .sum();
    let max_ticks = (hard_budget * shell.ctrl_rate_hz).ceil() as u64;

    for tick in 0..max_ticks {
        if phase == MissionPhase::Done {
            break;
        }
        let t = tick as f64 * sim.ctrl_period;

        // Phase-specific live commands.
        if phase == MissionPhase::Descend {
            let z_ref = (descend_z0 - config.descent_rate * (t - phase_started))
                // Aim below the surface so contact is reached decisively.
                .max(params.l_z - 0.05);
            targets.position = Vec3::new(config.cruise.x, config.cruise.y, z_ref);
        }

        let mode_before = sim.state.mode;
        let state_before = sim.state.clone();
        let sample = match sim.tick(&targets) {
            Ok(s) => s,
            Err(e) => {
                failure = Some(format!("aborted in {} at t = {t:.3}: {e}", phase.name()));
                break;
            }
        };
        if tick % log_div == 0 {
            records.push(sim.record(t, &state_before, &sample));
        }
        let t_now = sim.t();

        // Phase exit evaluation.
        let done = match phase {
            MissionPhase::GroundApproach => {
                let stopped = (sim.track_position() - config.drive_distance).abs() < STOP_TOL_M
                    && sim.state.v.norm() < STOP_SPEED;
                sustain.check(stopped, t_now, 0.2)
            }
            MissionPhase::ReachPick => {
                let ee = end_effector_world(&sim.state, geom, &sim.params_base);
                sustain.check((ee - pick_world).norm() < REACH_TOL_M, t_now, 0.5)
            }
            MissionPhase::Grasp => t_now - phase_started >= GRASP_DWELL_S,
            MissionPhase::Stow => {
                let err = (sim.state.q_arm - config.stow).abs().max();
                sustain.check(err < JOINT_TOL_RAD, t_now, 0.2)
            }
            MissionPhase::Takeoff => {
                sim.state.mode == Mode::Aerial
                    && (sim.state.p.z - config.cruise.z).abs() < ALT_TOL_M
            }
            MissionPhase::Cruise => {
                let near = (sim.state.p - config.cruise).norm() < WAYPOINT_TOL_M;
                sustain.check(near, t_now, 0.3)
            }
            MissionPhase::Descend => {
                let landed = mode_before == Mode::Aerial && sim.state.mode == Mode::Ground;
                if landed && sim.events.iter().any(|e| e.what.contains("hard_landing")) {
                    failure = Some("hard landing during descent".to_string());
                    break;
                }
                landed
            }
            MissionPhase::ReachPlace => {
                let ee = end_effector_world(&sim.state, geom, &sim.params_base);
                sustain.check((ee - place_world).norm() < REACH_TOL_M, t_now, 0.5)
            }
            MissionPhase::Release => t_now - phase_started >= RELEASE_DWELL_S,
            MissionPhase::Retract => {
                let err = (sim.state.q_arm - config.stow).abs().max();
                sustain.check(err < JOINT_TOL_RAD, t_now, 0.2)
            }
            MissionPhase::Done => true,
        };

        if done {
            phase_log.push((phase.name().to_string(), t_now));
            sim.events.push(SimEvent {
                t: t_now,
                what: format!("phase_complete {}", phase.name()),
            });
            sustain = Sustain::new();
            phase_started = t_now;
            phase = match phase {
                MissionPhase::GroundApproach => {
                    targets.arm = ArmCommand::World(pick_world, config.pick_wrist);
                    MissionPhase::ReachPick
                }
                MissionPhase::ReachPick => {
                    sim.attach_payload(config.payload_mass);
                    MissionPhase::Grasp
                }
                MissionPhase::Grasp => {
                    targets.arm = ArmCommand::Joints(config.stow);
                    MissionPhase::Stow
                }
                MissionPhase::Stow => {
                    targets.commanded_mode = Mode::Aerial;
                    targets.drive_to = None;
                    targets.position =
                        Vec3::new(config.drive_distance, 0.0, config.cruise.z);
                    MissionPhase::Takeoff
                }
                MissionPhase::Takeoff => {
                    targets.position = config.cruise;
                    MissionPhase::Cruise
                }
                MissionPhase::Cruise => {
                    descend_z0 = sim.state.p.z;
                    MissionPhase::Descend
                }
                MissionPhase::Descend => {
                    targets.commanded_mode = Mode::Ground;
                    targets.drive_to = Some(sim.track_position());
                    targets.arm = ArmCommand::World(place_world, config.place_wrist);
                    MissionPhase::ReachPlace
                }
                MissionPhase::ReachPlace => {
                    let ee = end_effector_world(&sim.state, geom, &sim.params_base);
                    placement_error = Some((ee - place_world).norm());
                    sim.detach_payload();
                    MissionPhase::Release
                }
                MissionPhase::Release => {
                    targets.arm = ArmCommand::Joints(config.stow);
                    MissionPhase::Retract
                }
                MissionPhase::Retract => MissionPhase::Done,
                MissionPhase::Done => MissionPhase::Done,
            };
        } else if t_now - phase_started > phase.timeout(&config.timeouts) {
            failure = Some(format!(
                "timeout in phase {} after {:.1} s",
                phase.name(),
                phase.timeout(&config.timeouts)
            ));
            break;
        }
    }

    if phase != MissionPhase::Done && failure.is_none() {
        failure = Some(format!("mission budget exhausted in phase {}", phase.name()));
    }
    let success = failure.is_none();
    let mut events = std::mem::take(&mut sim.events);
    events.push(SimEvent {
        t: sim.t(),
        what: if success {
            "mission_success".to_string()
        } else {
            format!("mission_failure: {}", failure.as_deref().unwrap_or(""))
        },
    });

    Ok(MissionOutcome {
        success,
        failure,
        placement_error_m: placement_error,
        phase_log,
        records,
        events,
    })
}
