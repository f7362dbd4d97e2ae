//! Shower control state machine.
//!
//! Occupancy comes from the upper ultrasonic sensor, water mode from the
//! outdoor temperature (cold outside gives hot water and vice versa), and every
//! requested discharge temperature passes through the scald clamp. LED outputs
//! follow the fixed actuator table: blue for occupancy, then yellow/green/red
//! for cold/hot/normal water.

use std::fmt;
use std::str::FromStr;

use bitflags::bitflags;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::sensors::{SensorId, SensorReading};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error("missing reading from {0}")]
    MissingReading(SensorId),
    #[error("pin must be exactly four decimal digits")]
    InvalidPin,
    #[error("unknown {what} `{value}`")]
    UnknownValue { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig<T> {
    /// Distances strictly below this mark the shower occupied.
    pub activation_cm: T,
    /// Distances at or above this mark it empty. Larger than `activation_cm`
    /// opens a hold band between the two.
    pub deactivation_cm: T,
    /// Below this outdoor temperature the shower runs hot.
    pub t_hot_c: T,
    /// At or above this outdoor temperature the shower runs cold.
    pub t_cold_c: T,
    /// Humidity flag threshold; logged only.
    pub humidity_threshold_pct: T,
    /// Scald ceiling for any discharge temperature.
    pub max_discharge_c: T,
    pub hot_discharge_c: T,
    pub normal_discharge_c: T,
    pub cold_discharge_c: T,
}

impl<T: Scalar> Default for ControllerConfig<T> {
    fn default() -> Self {
        ControllerConfig {
            activation_cm: T::lit(60.0),
            deactivation_cm: T::lit(60.0),
            t_hot_c: T::lit(22.0),
            t_cold_c: T::lit(23.0),
            humidity_threshold_pct: T::lit(10.0),
            max_discharge_c: T::lit(50.0),
            hot_discharge_c: T::lit(42.0),
            normal_discharge_c: T::lit(37.0),
            cold_discharge_c: T::lit(25.0),
        }
    }
}

impl<T: Scalar> ControllerConfig<T> {
    /// Separate activation (1.5 ft) and deactivation (2.5 ft) distances.
    pub fn with_hysteresis() -> Self {
        ControllerConfig {
            activation_cm: T::lit(45.72),
            deactivation_cm: T::lit(76.2),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let all = [
            self.activation_cm,
            self.deactivation_cm,
            self.t_hot_c,
            self.t_cold_c,
            self.humidity_threshold_pct,
            self.max_discharge_c,
            self.hot_discharge_c,
            self.normal_discharge_c,
            self.cold_discharge_c,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ControllerError::InvalidConfig(
                "all values must be finite".into(),
            ));
        }
        if self.activation_cm > self.deactivation_cm {
            return Err(ControllerError::InvalidConfig(
                "activation_cm must not exceed deactivation_cm".into(),
            ));
        }
        if self.t_hot_c > self.t_cold_c {
            return Err(ControllerError::InvalidConfig(
                "t_hot_c must not exceed t_cold_c".into(),
            ));
        }
        if self.max_discharge_c <= T::zero() {
            return Err(ControllerError::InvalidConfig(
                "max_discharge_c must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Occupancy {
    Occupied,
    Empty,
}

impl Occupancy {
    pub fn is_occupied(self) -> bool {
        self == Occupancy::Occupied
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Occupancy::Occupied => "occupied",
            Occupancy::Empty => "empty",
        }
    }
}

impl fmt::Display for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaterMode {
    Off,
    Hot,
    Cold,
    Normal,
}

impl WaterMode {
    pub const ALL: [WaterMode; 4] = [
        WaterMode::Off,
        WaterMode::Hot,
        WaterMode::Cold,
        WaterMode::Normal,
    ];

    /// Telemetry code: 0 off, 1 hot, 2 cold, 3 normal.
    pub fn code(self) -> u8 {
        match self {
            WaterMode::Off => 0,
            WaterMode::Hot => 1,
            WaterMode::Cold => 2,
            WaterMode::Normal => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WaterMode::Off => "off",
            WaterMode::Hot => "hot",
            WaterMode::Cold => "cold",
            WaterMode::Normal => "normal",
        }
    }
}

impl fmt::Display for WaterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WaterMode {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WaterMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ControllerError::UnknownValue {
                what: "water mode",
                value: s.into(),
            })
    }
}

bitflags! {
    /// Indicator LEDs standing in for the occupancy lamp and the three nozzles.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct Leds: u8 {
        const BLUE = 0b0001;
        const YELLOW = 0b0010;
        const GREEN = 0b0100;
        const RED = 0b1000;
    }
}

impl Leds {
    pub fn name(self) -> &'static str {
        match self {
            Leds::BLUE => "blue",
            Leds::YELLOW => "yellow",
            Leds::GREEN => "green",
            Leds::RED => "red",
            _ => "mixed",
        }
    }
}

/// An actuator instruction produced on a state change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    Led { led: Leds, on: bool },
    SetMode { mode: WaterMode, discharge_c: f64 },
    WaterOff,
    HelpSignal { active: bool },
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Command::Led { led, on } => {
                write!(f, "led {} {}", led.name(), if on { "on" } else { "off" })
            }
            Command::SetMode { mode, discharge_c } => write!(f, "mode {mode} at {discharge_c} C"),
            Command::WaterOff => f.write_str("water off"),
            Command::HelpSignal { active } => {
                write!(
                    f,
                    "help signal {}",
                    if active { "raised" } else { "cleared" }
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState<T> {
    pub occupancy: Occupancy,
    pub mode: WaterMode,
    /// Present only while water flows.
    pub discharge_temp: Option<T>,
    pub occupied_since: Option<f64>,
    pub leds: Leds,
    /// Set by a safety shut-off; holds water off until the shower empties.
    pub water_lockout: bool,
    /// Last humidity reading exceeded the configured threshold.
    pub humidity_flag: bool,
}

impl<T> Default for ControllerState<T> {
    fn default() -> Self {
        ControllerState {
            occupancy: Occupancy::Empty,
            mode: WaterMode::Off,
            discharge_temp: None,
            occupied_since: None,
            leds: Leds::empty(),
            water_lockout: false,
            humidity_flag: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceMode {
    #[default]
    Auto,
    Fixed,
}

impl FromStr for PreferenceMode {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(PreferenceMode::Auto),
            "fixed" => Ok(PreferenceMode::Fixed),
            other => Err(ControllerError::UnknownValue {
                what: "preference mode",
                value: other.into(),
            }),
        }
    }
}

/// Four-digit user code entered on the keypad.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Pin(String);

impl FromStr for Pin {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Pin(s.to_string()))
        } else {
            Err(ControllerError::InvalidPin)
        }
    }
}

impl Pin {
    pub fn matches(&self, entered: &str) -> bool {
        self.0 == entered
    }
}

impl fmt::Debug for Pin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Pin(****)")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile<T> {
    pub user_id: String,
    pub pin: Pin,
    pub preferred_temp: Option<T>,
    pub preference_mode: PreferenceMode,
}

/// Occupancy with an optional hold band between the two thresholds.
pub fn classify_occupancy<T: Scalar>(
    distance: T,
    prev: Occupancy,
    cfg: &ControllerConfig<T>,
) -> Occupancy {
    if distance < cfg.activation_cm {
        Occupancy::Occupied
    } else if distance >= cfg.deactivation_cm {
        Occupancy::Empty
    } else {
        prev
    }
}

pub fn select_water_mode<T: Scalar>(
    temp: T,
    cfg: &ControllerConfig<T>,
    profile: Option<&UserProfile<T>>,
) -> WaterMode {
    if profile.is_some_and(|p| p.preference_mode == PreferenceMode::Fixed) {
        return WaterMode::Normal;
    }
    if temp < cfg.t_hot_c {
        WaterMode::Hot
    } else if temp >= cfg.t_cold_c {
        WaterMode::Cold
    } else {
        WaterMode::Normal
    }
}

/// Scald clamp. The ceiling itself is attainable.
pub fn clamp_discharge_temperature<T: Scalar>(requested: T, cfg: &ControllerConfig<T>) -> T {
    requested.min(cfg.max_discharge_c)
}

/// Requested discharge temperature for a mode, before clamping.
pub fn discharge_target<T: Scalar>(
    mode: WaterMode,
    cfg: &ControllerConfig<T>,
    profile: Option<&UserProfile<T>>,
) -> T {
    if let Some(p) = profile.filter(|p| p.preference_mode == PreferenceMode::Fixed) {
        return p.preferred_temp.unwrap_or(cfg.normal_discharge_c);
    }
    match mode {
        WaterMode::Hot => cfg.hot_discharge_c,
        WaterMode::Cold => cfg.cold_discharge_c,
        WaterMode::Normal | WaterMode::Off => cfg.normal_discharge_c,
    }
}

pub fn actuator_outputs<T>(state: &ControllerState<T>) -> Leds {
    let mut leds = Leds::empty();
    if state.occupancy.is_occupied() {
        leds |= Leds::BLUE;
    }
    leds |= match state.mode {
        WaterMode::Off => Leds::empty(),
        WaterMode::Cold => Leds::YELLOW,
        WaterMode::Hot => Leds::GREEN,
        WaterMode::Normal => Leds::RED,
    };
    leds
}

fn diff_commands<T: Scalar>(prev: &ControllerState<T>, next: &ControllerState<T>) -> Vec<Command> {
    let mut commands = Vec::new();
    if prev.mode != next.mode || prev.discharge_temp != next.discharge_temp {
        match (next.mode, next.discharge_temp) {
            (WaterMode::Off, _) | (_, None) => {
                if prev.mode != WaterMode::Off {
                    commands.push(Command::WaterOff);
                }
            }
            (mode, Some(t)) => commands.push(Command::SetMode {
                mode,
                discharge_c: t.to_f64_lossy(),
            }),
        }
    }
    for led in [Leds::BLUE, Leds::YELLOW, Leds::GREEN, Leds::RED] {
        let was = prev.leds.contains(led);
        let is = next.leds.contains(led);
        if was != is {
            commands.push(Command::Led { led, on: is });
        }
    }
    commands
}

/// One control cycle over the latest readings.
///
/// Needs the upper ultrasonic reading and a temperature/humidity reading; other
/// readings are ignored. Commands are emitted only for outputs that changed.
pub fn step<T: Scalar>(
    state: &ControllerState<T>,
    readings: &[SensorReading<T>],
    cfg: &ControllerConfig<T>,
    profile: Option<&UserProfile<T>>,
    now: f64,
) -> Result<(ControllerState<T>, Vec<Command>), ControllerError> {
    let distance = readings
        .iter()
        .filter(|r| r.sensor_id == SensorId::ULTRASONIC_1)
        .find_map(SensorReading::distance)
        .ok_or(ControllerError::MissingReading(SensorId::ULTRASONIC_1))?;
    let (temp_c, humidity_pct) = readings
        .iter()
        .find_map(SensorReading::temp_humidity)
        .ok_or(ControllerError::MissingReading(SensorId::TEMP_HUMIDITY))?;

    let mut next = state.clone();
    next.occupancy = classify_occupancy(distance, state.occupancy, cfg);
    match (state.occupancy, next.occupancy) {
        (Occupancy::Empty, Occupancy::Occupied) => next.occupied_since = Some(now),
        (Occupancy::Occupied, Occupancy::Empty) => {
            next.occupied_since = None;
            next.water_lockout = false;
        }
        _ => {}
    }

    let humidity = T::lit(f64::from(humidity_pct));
    next.humidity_flag = humidity > cfg.humidity_threshold_pct;
    if next.humidity_flag != state.humidity_flag {
        log::debug!(
            "t={now}: humidity {humidity_pct}% flag={}",
            next.humidity_flag
        );
    }

    if next.occupancy.is_occupied() && !next.water_lockout {
        let mode = select_water_mode(T::lit(f64::from(temp_c)), cfg, profile);
        next.mode = mode;
        next.discharge_temp = Some(clamp_discharge_temperature(
            discharge_target(mode, cfg, profile),
            cfg,
        ));
    } else {
        next.mode = WaterMode::Off;
        next.discharge_temp = None;
    }
    next.leds = actuator_outputs(&next);

    let commands = diff_commands(state, &next);
    Ok((next, commands))
}

/// Forces water off until the shower next empties.
pub fn apply_water_lockout<T: Scalar>(
    state: &ControllerState<T>,
) -> (ControllerState<T>, Vec<Command>) {
    let mut next = state.clone();
    next.water_lockout = true;
    next.mode = WaterMode::Off;
    next.discharge_temp = None;
    next.leds = actuator_outputs(&next);
    let mut commands = diff_commands(state, &next);
    if !commands.contains(&Command::WaterOff) {
        commands.insert(0, Command::WaterOff);
    }
    (next, commands)
}
