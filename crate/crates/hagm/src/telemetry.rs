//! Telemetry records and their CSV encoding.
//!
//! The column set and order are a stable contract; downstream tooling keys
//! on the header below. Floats are written with Rust's shortest-roundtrip
//! `Display` formatting, so equal runs produce byte-identical files.

use crate::model::{Mode, Vec3, Vec4};
use std::io::{self, Write};

/// CSV header, exact column order.
pub const CSV_HEADER: &str = "t,px,py,pz,vx,vy,vz,roll,pitch,yaw,wx,wy,wz,omega_w,\
q1,q2,q3,ee_x,ee_y,ee_z,T_applied,taux,tauy,tauz,tau_w,v1,v2,v3,v4,alpha,beta,Nc,mode,power_W";

/// One timestamped row of simulator output.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    /// Simulation time, s.
    pub t: f64,
    /// Body origin position, world frame, m.
    pub p: Vec3,
    /// Body origin velocity, world frame, m/s.
    pub v: Vec3,
    /// Roll, pitch, yaw (z-y-x convention), rad.
    pub rpy: Vec3,
    /// Body angular velocity, rad/s.
    pub omega: Vec3,
    /// Wheel spin rate, rad/s.
    pub omega_w: f64,
    /// Arm joint angles, rad.
    pub q_arm: Vec3,
    /// End-effector position, world frame, m.
    pub ee: Vec3,
    /// Thrust realized by the allocator, N.
    pub t_applied: f64,
    /// Body torques realized by the allocator (post-scaling), N m.
    pub tau: Vec3,
    /// Wheel drive torque, N m.
    pub tau_w: f64,
    /// Commanded rotor speeds, rad/s.
    pub motor: Vec4,
    /// Tilt priority scale applied this tick.
    pub alpha: f64,
    /// Yaw priority scale applied this tick.
    pub beta: f64,
    /// Contact normal force, N (zero airborne).
    pub n_c: f64,
    pub mode: Mode,
    /// Electrical power drawn by the rotors, W.
    pub power_w: f64,
}

impl TelemetryRecord {
    /// The record as one CSV row (no trailing newline).
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.p.x,
            self.p.y,
            self.p.z,
            self.v.x,
            self.v.y,
            self.v.z,
            self.rpy.x,
            self.rpy.y,
            self.rpy.z,
            self.omega.x,
            self.omega.y,
            self.omega.z,
            self.omega_w,
            self.q_arm.x,
            self.q_arm.y,
            self.q_arm.z,
            self.ee.x,
            self.ee.y,
            self.ee.z,
            self.t_applied,
            self.tau.x,
            self.tau.y,
            self.tau.z,
            self.tau_w,
            self.motor[0],
            self.motor[1],
            self.motor[2],
            self.motor[3],
            self.alpha,
            self.beta,
            self.n_c,
            self.mode.as_str(),
            self.power_w,
        )
    }
}

/// Writes header plus one row per record.
pub fn write_csv<W: Write>(records: &[TelemetryRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for rec in records {
        writeln!(w, "{}", rec.csv_row())?;
    }
    Ok(())
}

/// The full CSV as a string.
pub fn csv_string(records: &[TelemetryRecord]) -> String {
    let mut out = Vec::new();
    write_csv(records, &mut out).expect("in-memory write cannot fail");
    String::from_utf8(out).expect("csv rows are ASCII")
}

#[derive(Debug, thiserror::Error)]
pub enum TelemetryParseError {
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: {source}")]
    BadFloat {
        line: usize,
        column: &'static str,
        source: std::num::ParseFloatError,
    },
    #[error("line {line}: unknown mode {found:?}")]
    BadMode { line: usize, found: String },
    #[error("missing or wrong header")]
    Header,
}

/// Parses CSV produced by [`write_csv`]. Strict: the header must match the
/// contract exactly.
pub fn parse_csv(text: &str) -> Result<Vec<TelemetryRecord>, TelemetryParseError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(TelemetryParseError::Header);
    }
    let names: Vec<&'static str> = CSV_HEADER.split(',').collect();
    let mut out = Vec::new();
    for (i, raw) in lines.enumerate() {
        let line = i + 2;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != names.len() {
            return Err(TelemetryParseError::ColumnCount {
                line,
                expected: names.len(),
                found: fields.len(),
            });
        }
        let mut vals = [0.0_f64; 33];
        for (j, field) in fields.iter().enumerate() {
            if names[j] == "mode" {
                continue;
            }
            // Numeric columns before and after the mode column.
            let slot = if j < 32 { j } else { j - 1 };
            vals[slot] = field
                .parse()
                .map_err(|source| TelemetryParseError::BadFloat {
                    line,
                    column: names[j],
                    source,
                })?;
        }
        let mode = match fields[32] {
            "ground" => Mode::Ground,
            "aerial" => Mode::Aerial,
            other => {
                return Err(TelemetryParseError::BadMode {
                    line,
                    found: other.to_string(),
                })
            }
        };
        out.push(TelemetryRecord {
            t: vals[0],
            p: Vec3::new(vals[1], vals[2], vals[3]),
            v: Vec3::new(vals[4], vals[5], vals[6]),
            rpy: Vec3::new(vals[7], vals[8], vals[9]),
            omega: Vec3::new(vals[10], vals[11], vals[12]),
            omega_w: vals[13],
            q_arm: Vec3::new(vals[14], vals[15], vals[16]),
            ee: Vec3::new(vals[17], vals[18], vals[19]),
            t_applied: vals[20],
            tau: Vec3::new(vals[21], vals[22], vals[23]),
            tau_w: vals[24],
            motor: Vec4::new(vals[25], vals[26], vals[27], vals[28]),
            alpha: vals[29],
            beta: vals[30],
            n_c: vals[31],
            mode,
            power_w: vals[32],
        })
    }
    Ok(out)
}
