//! TOML configuration files for parameters, gains, scenarios, and missions.
//!
//! Every file is a set of named sections whose keys mirror the domain-type
//! fields one to one. All keys are optional and default to the built-in
//! values, so a file states only what it changes; unknown keys are errors,
//! naming the offending key. Vectors are written as arrays (`d_cg =
//! [0.0, 0.0, 0.0]`), the inertia matrix as its diagonal.
//!
//! Two derived defaults tie the thrust model together: when `c_t` is not
//! given it is recomputed from the hover identity `c_t = m g / (2 v_max^2)`
//! (hover at half the thrust ceiling) AFTER all other overrides, and an
//! absent `c_d` defaults to a tenth of the final `c_t`.

use crate::arm::ArmGeometry;
use crate::dynamics::{Integrator, SimConfig};
use crate::mission::{MissionConfig, PhaseTimeouts};
use crate::model::{
    ControllerGains, DisturbanceSpec, Mode, ModelError, RobotParams, Vec2, Vec3,
};
use crate::scenario::{
    AllocatorChoice, ArmCommand, InitialState, PayloadAction, PayloadEvent, Scenario,
    SetpointEvent,
};
use crate::model::Mat3;
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Invalid(#[from] ModelError),
    #[error("arm geometry: {0}")]
    Arm(#[from] crate::arm::ArmError),
    #[error("config: {0}")]
    Semantic(String),
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

// ---------------------------------------------------------------------------
// Parameters and arm geometry.

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    #[serde(default)]
    params: ParamsSection,
    #[serde(default)]
    arm: ArmSection,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ParamsSection {
    m: Option<f64>,
    /// Inertia diagonal [jxx, jyy, jzz], kg m^2.
    j: Option<[f64; 3]>,
    l: Option<f64>,
    c_t: Option<f64>,
    c_d: Option<f64>,
    v_min: Option<f64>,
    v_max: Option<f64>,
    j_w: Option<f64>,
    r: Option<f64>,
    l_z: Option<f64>,
    d_cg: Option<[f64; 3]>,
    tau_c: Option<[f64; 3]>,
    t_ground_frac: Option<f64>,
    mu: Option<f64>,
    c_p: Option<f64>,
    g: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ArmSection {
    base_offset: Option<[f64; 3]>,
    l1: Option<f64>,
    l2: Option<f64>,
    q_min: Option<[f64; 3]>,
    q_max: Option<[f64; 3]>,
    link_mass: Option<[f64; 2]>,
    drive_tau: Option<f64>,
    rate_limit: Option<f64>,
}

impl ParamsSection {
    fn build(&self) -> Result<RobotParams, ConfigError> {
        let mut p = RobotParams::default();
        if let Some(v) = self.m {
            p.m = v;
        }
        if let Some(d) = self.j {
            p.j = Mat3::from_diagonal(&vec3(d));
        }
        if let Some(v) = self.l {
            p.l = v;
        }
        if let Some(v) = self.v_min {
            p.v_min = v;
        }
        if let Some(v) = self.v_max {
            p.v_max = v;
        }
        if let Some(v) = self.j_w {
            p.j_w = v;
        }
        if let Some(v) = self.r {
            p.r = v;
        }
        if let Some(v) = self.l_z {
            p.l_z = v;
        }
        if let Some(d) = self.d_cg {
            p.d_cg = vec3(d);
        }
        if let Some(d) = self.tau_c {
            p.tau_c = vec3(d);
        }
        if let Some(v) = self.t_ground_frac {
            p.t_ground_frac = v;
        }
        if let Some(v) = self.mu {
            p.mu = v;
        }
        if let Some(v) = self.c_p {
            p.c_p = v;
        }
        if let Some(v) = self.g {
            p.g = v;
        }
        // Thrust coefficients last: the hover identity depends on the final
        // m, g, and v_max.
        p.c_t = match self.c_t {
            Some(v) => v,
            None => p.m * p.g / (2.0 * p.v_max * p.v_max),
        };
        p.c_d = match self.c_d {
            Some(v) => v,
            None => p.c_t / 10.0,
        };
        Ok(p.validated()?)
    }
}

impl ArmSection {
    fn build(&self) -> Result<ArmGeometry, ConfigError> {
        let mut a = ArmGeometry::default();
        if let Some(d) = self.base_offset {
            a.base_offset = vec3(d);
        }
        if let Some(v) = self.l1 {
            a.l1 = v;
        }
        if let Some(v) = self.l2 {
            a.l2 = v;
        }
        if let Some(d) = self.q_min {
            a.q_min = vec3(d);
        }
        if let Some(d) = self.q_max {
            a.q_max = vec3(d);
        }
        if let Some(d) = self.link_mass {
            a.link_mass = d;
        }
        if let Some(v) = self.drive_tau {
            a.drive_tau = v;
        }
        if let Some(v) = self.rate_limit {
            a.rate_limit = v;
        }
        Ok(a.validated()?)
    }
}

/// Parses a `[params]`/`[arm]` file. Omitted keys keep built-in defaults.
pub fn parse_params(text: &str) -> Result<(RobotParams, ArmGeometry), ConfigError> {
    let file: ParamsFile = parse_toml(text)?;
    Ok((file.params.build()?, file.arm.build()?))
}

/// Reads and parses a parameter file from disk.
pub fn load_params(path: impl AsRef<Path>) -> Result<(RobotParams, ArmGeometry), ConfigError> {
    parse_params(&read(path.as_ref())?)
}

// ---------------------------------------------------------------------------
// Controller gains.

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GainsFile {
    #[serde(default)]
    gains: GainsSection,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GainsSection {
    k_p_att: Option<[f64; 3]>,
    k_p_rate: Option<[f64; 3]>,
    k_i_rate: Option<[f64; 3]>,
    k_d_rate: Option<[f64; 3]>,
    integral_limit: Option<[f64; 3]>,
    k_wheel: Option<f64>,
    wheel_closed_loop: Option<bool>,
    k_p_pos: Option<[f64; 3]>,
    k_d_pos: Option<[f64; 3]>,
}

/// Parses a `[gains]` file. Omitted keys keep built-in defaults.
pub fn parse_gains(text: &str) -> Result<ControllerGains, ConfigError> {
    let file: GainsFile = parse_toml(text)?;
    let s = file.gains;
    let mut g = ControllerGains::default();
    if let Some(d) = s.k_p_att {
        g.k_p_att = vec3(d);
    }
    if let Some(d) = s.k_p_rate {
        g.k_p_rate = vec3(d);
    }
    if let Some(d) = s.k_i_rate {
        g.k_i_rate = vec3(d);
    }
    if let Some(d) = s.k_d_rate {
        g.k_d_rate = vec3(d);
    }
    if let Some(d) = s.integral_limit {
        g.integral_limit = vec3(d);
    }
    if let Some(v) = s.k_wheel {
        g.k_wheel = v;
    }
    if let Some(v) = s.wheel_closed_loop {
        g.wheel_closed_loop = v;
    }
    if let Some(d) = s.k_p_pos {
        g.k_p_pos = vec3(d);
    }
    if let Some(d) = s.k_d_pos {
        g.k_d_pos = vec3(d);
    }
    for (name, v) in [
        ("k_p_att", &g.k_p_att),
        ("k_p_rate", &g.k_p_rate),
        ("k_i_rate", &g.k_i_rate),
        ("k_d_rate", &g.k_d_rate),
        ("integral_limit", &g.integral_limit),
        ("k_p_pos", &g.k_p_pos),
        ("k_d_pos", &g.k_d_pos),
    ] {
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(ConfigError::Semantic(format!(
                "{name} must be finite and nonnegative"
            )));
        }
    }
    Ok(g)
}

/// Reads and parses a gains file from disk.
pub fn load_gains(path: impl AsRef<Path>) -> Result<ControllerGains, ConfigError> {
    parse_gains(&read(path.as_ref())?)
}

// ---------------------------------------------------------------------------
// Shared sub-sections.

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SimSection {
    dt: Option<f64>,
    /// "rk4" or "semi_implicit_euler".
    integrator: Option<String>,
    seed: Option<u64>,
    motor_lag_tau: Option<f64>,
}

impl SimSection {
    fn build(&self) -> Result<SimConfig, ConfigError> {
        let mut c = SimConfig::default();
        if let Some(v) = self.dt {
            c.dt = v;
        }
        if let Some(ref s) = self.integrator {
            c.integrator = match s.as_str() {
                "rk4" => Integrator::Rk4,
                "semi_implicit_euler" => Integrator::SemiImplicitEuler,
                other => {
                    return Err(ConfigError::Semantic(format!(
                        "unknown integrator {other:?}: expected \"rk4\" or \"semi_implicit_euler\""
                    )));
                }
            };
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.motor_lag_tau {
            c.motor_lag_tau = v;
        }
        Ok(c.validated()?)
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DisturbanceSection {
    sigma_force: Option<f64>,
    sigma_torque: Option<f64>,
    band_hz: Option<[f64; 2]>,
    components: Option<usize>,
}

impl DisturbanceSection {
    fn build(&self) -> Result<DisturbanceSpec, ConfigError> {
        let mut d = DisturbanceSpec::default();
        if let Some(v) = self.sigma_force {
            d.sigma_force = v;
        }
        if let Some(v) = self.sigma_torque {
            d.sigma_torque = v;
        }
        if let Some(b) = self.band_hz {
            d.band_hz = (b[0], b[1]);
        }
        if let Some(v) = self.components {
            d.components = v;
        }
        if d.sigma_force < 0.0 || d.sigma_torque < 0.0 {
            return Err(ConfigError::Semantic(
                "disturbance sigmas must be nonnegative".to_string(),
            ));
        }
        if !(d.band_hz.0 > 0.0 && d.band_hz.1 > d.band_hz.0) {
            return Err(ConfigError::Semantic(
                "disturbance band_hz must satisfy 0 < low < high".to_string(),
            ));
        }
        Ok(d)
    }
}

fn parse_mode(s: &str) -> Result<Mode, ConfigError> {
    match s {
        "ground" => Ok(Mode::Ground),
        "aerial" => Ok(Mode::Aerial),
        other => Err(ConfigError::Semantic(format!(
            "unknown mode {other:?}: expected \"ground\" or \"aerial\""
        ))),
    }
}

// ---------------------------------------------------------------------------
// Scenario files.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: ScenarioSection,
    #[serde(default)]
    initial: InitialSection,
    #[serde(default)]
    sim: SimSection,
    #[serde(default)]
    disturbance: DisturbanceSection,
    #[serde(default)]
    setpoints: Vec<SetpointSection>,
    #[serde(default)]
    payload_events: Vec<PayloadSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    name: String,
    duration: f64,
    /// "prioritized" (default) or "baseline".
    allocator: Option<String>,
    /// Required when allocator = "baseline".
    hover_frac: Option<f64>,
    ctrl_rate_hz: Option<f64>,
    log_rate_hz: Option<f64>,
    ik_rate_hz: Option<f64>,
    estimate_noise: Option<bool>,
    base_locked: Option<bool>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    mode: Option<String>,
    yaw: Option<f64>,
    roll: Option<f64>,
    pitch: Option<f64>,
    position: Option<[f64; 3]>,
    wheel_rate: Option<f64>,
    arm: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetpointSection {
    t: f64,
    roll: Option<f64>,
    pitch: Option<f64>,
    yaw: Option<f64>,
    position: Option<[f64; 3]>,
    wheel_rate: Option<f64>,
    /// Track-position hold target, m. Write `nan` to release the hold.
    drive_to: Option<f64>,
    /// Direct joint targets, rad. Exclusive with the other arm keys.
    arm_joints: Option<[f64; 3]>,
    /// Planar end-effector target in the arm frame, m.
    arm_planar: Option<[f64; 2]>,
    /// World-frame end-effector target, m.
    arm_world: Option<[f64; 3]>,
    /// Wrist angle for planar/world targets, rad (default 0).
    arm_wrist: Option<f64>,
    mode: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayloadSection {
    t: f64,
    mass: Option<f64>,
    /// "attach" or "detach".
    action: String,
}

impl SetpointSection {
    fn build(&self) -> Result<SetpointEvent, ConfigError> {
        let mut ev = SetpointEvent::at(self.t);
        ev.roll = self.roll;
        ev.pitch = self.pitch;
        ev.yaw = self.yaw;
        ev.position = self.position.map(vec3);
        ev.wheel_rate = self.wheel_rate;
        ev.drive_to = self.drive_to;
        let wrist = self.arm_wrist.unwrap_or(0.0);
        let arm_keys =
            [self.arm_joints.is_some(), self.arm_planar.is_some(), self.arm_world.is_some()];
        if arm_keys.iter().filter(|k| **k).count() > 1 {
            return Err(ConfigError::Semantic(format!(
                "setpoint at t = {}: arm_joints, arm_planar, and arm_world are mutually exclusive",
                self.t
            )));
        }
        if let Some(q) = self.arm_joints {
            ev.arm = Some(ArmCommand::Joints(vec3(q)));
        } else if let Some(xz) = self.arm_planar {
            ev.arm = Some(ArmCommand::Planar(Vec2::new(xz[0], xz[1]), wrist));
        } else if let Some(w) = self.arm_world {
            ev.arm = Some(ArmCommand::World(vec3(w), wrist));
        }
        ev.mode = self.mode.as_deref().map(parse_mode).transpose()?;
        Ok(ev)
    }
}

/// Parses a scenario file and validates the result.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let file: ScenarioFile = parse_toml(text)?;
    let s = file.scenario;

    let allocator = match s.allocator.as_deref().unwrap_or("prioritized") {
        "prioritized" => {
            if s.hover_frac.is_some() {
                return Err(ConfigError::Semantic(
                    "hover_frac only applies to the baseline allocator".to_string(),
                ));
            }
            AllocatorChoice::Prioritized
        }
        "baseline" => AllocatorChoice::Baseline {
            hover_frac: s.hover_frac.ok_or_else(|| {
                ConfigError::Semantic(
                    "allocator = \"baseline\" requires hover_frac".to_string(),
                )
            })?,
        },
        other => {
            return Err(ConfigError::Semantic(format!(
                "unknown allocator {other:?}: expected \"prioritized\" or \"baseline\""
            )));
        }
    };

    let mut initial = InitialState::default();
    if let Some(ref m) = file.initial.mode {
        initial.mode = parse_mode(m)?;
    }
    if let Some(v) = file.initial.yaw {
        initial.yaw = v;
    }
    if let Some(v) = file.initial.roll {
        initial.roll = v;
    }
    if let Some(v) = file.initial.pitch {
        initial.pitch = v;
    }
    initial.position = file.initial.position.map(vec3);
    if let Some(v) = file.initial.wheel_rate {
        initial.wheel_rate = v;
    }
    if let Some(q) = file.initial.arm {
        initial.arm = vec3(q);
    }

    let mut scenario = Scenario::new(&s.name, s.duration);
    scenario.initial = initial;
    scenario.allocator = allocator;
    scenario.sim = file.sim.build()?;
    scenario.disturbance = file.disturbance.build()?;
    if let Some(v) = s.ctrl_rate_hz {
        scenario.ctrl_rate_hz = v;
    }
    if let Some(v) = s.log_rate_hz {
        scenario.log_rate_hz = v;
    }
    if let Some(v) = s.ik_rate_hz {
        scenario.ik_rate_hz = v;
    }
    if let Some(v) = s.estimate_noise {
        scenario.estimate_noise = v;
    }
    if let Some(v) = s.base_locked {
        scenario.base_locked = v;
    }
    scenario.setpoints = file
        .setpoints
        .iter()
        .map(SetpointSection::build)
        .collect::<Result<_, _>>()?;
    scenario.payload_events = file
        .payload_events
        .iter()
        .map(|p| {
            let action = match p.action.as_str() {
                "attach" => PayloadAction::Attach,
                "detach" => PayloadAction::Detach,
                other => {
                    return Err(ConfigError::Semantic(format!(
                        "unknown payload action {other:?}: expected \"attach\" or \"detach\""
                    )));
                }
            };
            if action == PayloadAction::Attach && p.mass.is_none() {
                return Err(ConfigError::Semantic(format!(
                    "payload attach at t = {} requires a mass",
                    p.t
                )));
            }
            Ok(PayloadEvent {
                t: p.t,
                mass: p.mass.unwrap_or(0.0),
                action,
            })
        })
        .collect::<Result<_, _>>()?;
    scenario.validated()?;
    Ok(scenario)
}

/// Reads and parses a scenario file from disk.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
    parse_scenario(&read(path.as_ref())?)
}

// ---------------------------------------------------------------------------
// Mission files.

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MissionFile {
    #[serde(default)]
    mission: MissionSection,
    #[serde(default)]
    timeouts: TimeoutsSection,
    #[serde(default)]
    sim: SimSection,
    #[serde(default)]
    disturbance: Option<DisturbanceSection>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MissionSection {
    drive_distance: Option<f64>,
    pick: Option<[f64; 2]>,
    pick_wrist: Option<f64>,
    place: Option<[f64; 2]>,
    place_wrist: Option<f64>,
    stow: Option<[f64; 3]>,
    cruise: Option<[f64; 3]>,
    payload_mass: Option<f64>,
    descent_rate: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TimeoutsSection {
    approach: Option<f64>,
    reach: Option<f64>,
    grasp: Option<f64>,
    stow: Option<f64>,
    takeoff: Option<f64>,
    cruise: Option<f64>,
    descend: Option<f64>,
    place: Option<f64>,
    release: Option<f64>,
    retract: Option<f64>,
}

/// Parses a mission file. Omitted keys keep the default mission script.
pub fn parse_mission(text: &str) -> Result<MissionConfig, ConfigError> {
    let file: MissionFile = parse_toml(text)?;
    let mut c = MissionConfig::default();
    let m = file.mission;
    if let Some(v) = m.drive_distance {
        c.drive_distance = v;
    }
    if let Some(p) = m.pick {
        c.pick = Vec2::new(p[0], p[1]);
    }
    if let Some(v) = m.pick_wrist {
        c.pick_wrist = v;
    }
    if let Some(p) = m.place {
        c.place = Vec2::new(p[0], p[1]);
    }
    if let Some(v) = m.place_wrist {
        c.place_wrist = v;
    }
    if let Some(q) = m.stow {
        c.stow = vec3(q);
    }
    if let Some(w) = m.cruise {
        c.cruise = vec3(w);
    }
    if let Some(v) = m.payload_mass {
        c.payload_mass = v;
    }
    if let Some(v) = m.descent_rate {
        c.descent_rate = v;
    }
    let t = file.timeouts;
    let mut outs = PhaseTimeouts::default();
    if let Some(v) = t.approach {
        outs.approach = v;
    }
    if let Some(v) = t.reach {
        outs.reach = v;
    }
    if let Some(v) = t.grasp {
        outs.grasp = v;
    }
    if let Some(v) = t.stow {
        outs.stow = v;
    }
    if let Some(v) = t.takeoff {
        outs.takeoff = v;
    }
    if let Some(v) = t.cruise {
        outs.cruise = v;
    }
    if let Some(v) = t.descend {
        outs.descend = v;
    }
    if let Some(v) = t.place {
        outs.place = v;
    }
    if let Some(v) = t.release {
        outs.release = v;
    }
    if let Some(v) = t.retract {
        outs.retract = v;
    }
    c.timeouts = outs;
    c.sim = file.sim.build()?;
    if let Some(ref d) = file.disturbance {
        c.disturbance = d.build()?;
    }
    Ok(c)
}

/// Reads and parses a mission file from disk.
pub fn load_mission(path: impl AsRef<Path>) -> Result<MissionConfig, ConfigError> {
    parse_mission(&read(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_params_file_yields_defaults() {
        let (p, a) = parse_params("").unwrap();
        assert_eq!(p, RobotParams::default());
        assert_eq!(a, ArmGeometry::default());
    }

    #[test]
    fn hover_identity_recomputes_thrust_coefficient() {
        let (p, _) = parse_params("[params]\nm = 3.0\nv_max = 800.0\n").unwrap();
        assert_eq!(p.m, 3.0);
        assert_eq!(p.v_max, 800.0);
        let expect = 3.0 * 9.81 / (2.0 * 800.0 * 800.0);
        assert!((p.c_t - expect).abs() < 1e-18);
        assert!((p.c_d - expect / 10.0).abs() < 1e-18);
        // An explicit c_t wins and feeds the c_d default.
        let (p, _) = parse_params("[params]\nc_t = 2.0e-5\n").unwrap();
        assert_eq!(p.c_t, 2.0e-5);
        assert!((p.c_d - 2.0e-6).abs() < 1e-20);
    }

    #[test]
    fn unknown_keys_are_named_errors() {
        let err = parse_params("[params]\nmass = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("mass"), "{err}");
        let err = parse_gains("[gains]\nk_p = [1,1,1]\n").unwrap_err();
        assert!(err.to_string().contains("k_p"), "{err}");
        let err = parse_params("[motor]\nk = 1\n").unwrap_err();
        assert!(err.to_string().contains("motor"), "{err}");
    }

    #[test]
    fn invalid_values_surface_the_field() {
        let err = parse_params("[params]\nm = -2.0\n").unwrap_err();
        assert!(err.to_string().contains('m'), "{err}");
        let err = parse_params("[params]\nj = [0.03, 0.03]\n").unwrap_err();
        assert!(err.to_string().contains('j'), "{err}");
    }

    #[test]
    fn gains_overrides_apply() {
        let g = parse_gains("[gains]\nk_wheel = 0.5\nwheel_closed_loop = true\n").unwrap();
        assert_eq!(g.k_wheel, 0.5);
        assert!(g.wheel_closed_loop);
        assert_eq!(g.k_p_att, ControllerGains::default().k_p_att);
        assert!(parse_gains("[gains]\nk_p_att = [-1, 1, 1]\n").is_err());
    }

    #[test]
    fn scenario_file_round_trips_the_fields() {
        let text = r#"
[scenario]
name = "recovery"
duration = 8.0
allocator = "baseline"
hover_frac = 0.15

[initial]
mode = "ground"
pitch = 0.1745

[sim]
dt = 0.0005
seed = 42
integrator = "semi_implicit_euler"

[disturbance]
sigma_torque = 0.08

[[setpoints]]
t = 1.0
pitch = 0.0
arm_planar = [0.16, -0.06]

[[setpoints]]
t = 8.0
arm_joints = [0.1, 0.2, 0.3]
mode = "aerial"
position = [0.0, 0.0, 0.8]

[[payload_events]]
t = 2.0
mass = 0.09
action = "attach"
"#;
        let sc = parse_scenario(text).unwrap();
        assert_eq!(sc.name, "recovery");
        assert_eq!(
            sc.allocator,
            AllocatorChoice::Baseline { hover_frac: 0.15 }
        );
        assert_eq!(sc.initial.pitch, 0.1745);
        assert_eq!(sc.sim.dt, 0.0005);
        assert_eq!(sc.sim.seed, 42);
        assert_eq!(sc.sim.integrator, Integrator::SemiImplicitEuler);
        assert_eq!(sc.disturbance.sigma_torque, 0.08);
        assert_eq!(sc.setpoints.len(), 2);
        assert_eq!(
            sc.setpoints[0].arm,
            Some(ArmCommand::Planar(Vec2::new(0.16, -0.06), 0.0))
        );
        assert_eq!(sc.setpoints[1].mode, Some(Mode::Aerial));
        assert_eq!(sc.payload_events.len(), 1);
    }

    #[test]
    fn scenario_semantic_errors() {
        let base = "[scenario]\nname = \"x\"\nduration = 1.0\n";
        // Baseline without hover_frac.
        let err =
            parse_scenario(&format!("{base}allocator = \"baseline\"\n")).unwrap_err();
        assert!(err.to_string().contains("hover_frac"), "{err}");
        // hover_frac without baseline.
        let err = parse_scenario(&format!("{base}hover_frac = 0.2\n")).unwrap_err();
        assert!(err.to_string().contains("baseline"), "{err}");
        // Conflicting arm keys.
        let err = parse_scenario(&format!(
            "{base}[[setpoints]]\nt = 0.0\narm_joints = [0,0,0]\narm_planar = [0.1, 0.0]\n"
        ))
        .unwrap_err();
        assert!(err.to_string().contains("mutually exclusive"), "{err}");
        // Attach without mass.
        let err = parse_scenario(&format!(
            "{base}[[payload_events]]\nt = 0.5\naction = \"attach\"\n"
        ))
        .unwrap_err();
        assert!(err.to_string().contains("mass"), "{err}");
        // Disordered timeline caught by scenario validation.
        let err = parse_scenario(&format!(
            "{base}[[setpoints]]\nt = 2.0\n[[setpoints]]\nt = 1.0\n"
        ))
        .unwrap_err();
        assert!(err.to_string().contains("increasing"), "{err}");
    }

    #[test]
    fn mission_file_overrides_and_defaults() {
        let c = parse_mission("").unwrap();
        assert_eq!(c, MissionConfig::default());
        let c = parse_mission(
            "[mission]\npayload_mass = 0.0\ncruise = [1.0, 0.5, 0.6]\n[timeouts]\ncruise = 30.0\n[sim]\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(c.payload_mass, 0.0);
        assert_eq!(c.cruise, Vec3::new(1.0, 0.5, 0.6));
        assert_eq!(c.timeouts.cruise, 30.0);
        assert_eq!(c.timeouts.approach, PhaseTimeouts::default().approach);
        assert_eq!(c.sim.seed, 9);
    }
}
