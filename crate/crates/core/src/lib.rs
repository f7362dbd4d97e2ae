//! Deterministic simulation of an IoT smart shower.
//!
//! Virtual sensors feed the occupancy/water-mode controller and the safety
//! engine; the device agent posts one telemetry update per tick; scenario
//! scripts drive the whole loop on a fixed clock.
//!
//! The sensor and controller math is generic over [`Scalar`] (`f32` or `f64`).
//! The aliases below fix it to `f64`, the precision the simulation loop runs at.

pub mod agent;
pub mod config;
pub mod controller;
pub mod safety;
pub mod scalar;
pub mod scenario;
pub mod sensors;

pub use scalar::Scalar;

pub type EnvironmentState = sensors::EnvironmentState<f64>;
pub type SensorReading = sensors::SensorReading<f64>;
pub type UltrasonicConfig = sensors::UltrasonicConfig<f64>;
pub type ControllerConfig = controller::ControllerConfig<f64>;
pub type ControllerState = controller::ControllerState<f64>;
pub type UserProfile = controller::UserProfile<f64>;

pub type ControllerConfigF32 = controller::ControllerConfig<f32>;
pub type ControllerStateF32 = controller::ControllerState<f32>;
pub type EnvironmentStateF32 = sensors::EnvironmentState<f32>;

pub use agent::{AgentConfig, AgentState, PostPayload, PostReceipt, Uplink, UplinkError};
pub use config::SystemConfig;
pub use controller::{Command, Leds, Occupancy, WaterMode};
pub use safety::{Alert, AlertKind, SafetyConfig};
pub use sensors::GestureCode;
