//! Control and simulation stack for a hybrid aerial-ground robot: a quadrotor
//! body that rests on a single driven wheel for ground locomotion and carries
//! a 3-DoF manipulator arm.
//!
//! The heart of the crate is [`allocation`], which turns a thrust/torque
//! command into four motor speeds under hard speed limits. On the ground the
//! robot needs almost no thrust but must never give up attitude authority, so
//! the allocator scales commands in strict priority order: roll/pitch torque
//! first, then yaw, then thrust. Everything else exists to exercise that idea
//! end to end:
//!
//! - [`model`]: shared state, parameter, and rotation types.
//! - [`control`]: rotation-matrix attitude cascade, body-rate PID, wheel
//!   drive, and an aerial position loop.
//! - [`dynamics`]: rigid-body simulation with a no-slip wheel contact,
//!   friction saturation, and ground/aerial mode switching.
//! - [`arm`]: planar two-link plus wrist kinematics and joint-space motion
//!   filtering.
//! - [`metrics`]: error, settling-time, and power/energy summaries.
//! - [`scenario`]: scripted closed-loop runs, allocator comparisons, and
//!   throttle sweeps.
//! - [`mission`]: a phased pick-and-place mission over the same loop.
//! - [`telemetry`]: the CSV log format and its parser.
//! - [`config`]: TOML parameter, gain, scenario, and mission files.

pub mod allocation;
pub mod arm;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod metrics;
pub mod mission;
pub mod model;
pub mod scenario;
pub mod telemetry;

pub use model::{Mat3, Vec2, Vec3, Vec4};

/// Book chapters double as compile-checked examples: every Rust snippet in
/// the guide is run by `cargo test` through these doctest shims.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Model, "../../../book/src/model.md");
    chapter!(Allocation, "../../../book/src/allocation.md");
    chapter!(Attitude, "../../../book/src/attitude.md");
    chapter!(Dynamics, "../../../book/src/dynamics.md");
    chapter!(Arm, "../../../book/src/arm.md");
    chapter!(Scenarios, "../../../book/src/scenarios.md");
}
