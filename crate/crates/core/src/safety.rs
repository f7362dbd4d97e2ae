//! Danger detection: slip-and-fall from pole geometry plus a sound spike,
//! help gestures, prolonged hot discharge and overlong occupancy.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{Command, ControllerState, Occupancy, WaterMode};
use crate::sensors::GestureCode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SafetyError {
    #[error("sound window has {got} samples, expected {expected}")]
    WindowLength { expected: usize, got: usize },
    #[error("invalid safety config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyConfig {
    pub occupancy_alert_s: f64,
    pub prolonged_hot_s: f64,
    pub thud_window_samples: usize,
    pub thud_min_ones: usize,
    pub geometry_confirm_ticks: usize,
    /// When false, confirmed fall geometry alone raises a fall alert.
    pub require_thud: bool,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            occupancy_alert_s: 1800.0,
            prolonged_hot_s: 1200.0,
            thud_window_samples: 10,
            thud_min_ones: 3,
            geometry_confirm_ticks: 2,
            require_thud: true,
        }
    }
}

impl SafetyConfig {
    pub fn validate(&self) -> Result<(), SafetyError> {
        let durations_ok = [self.occupancy_alert_s, self.prolonged_hot_s]
            .iter()
            .all(|d| d.is_finite() && *d > 0.0);
        if !durations_ok {
            return Err(SafetyError::InvalidConfig(
                "durations must be positive".into(),
            ));
        }
        if self.thud_window_samples == 0
            || self.thud_min_ones == 0
            || self.geometry_confirm_ticks == 0
        {
            return Err(SafetyError::InvalidConfig(
                "sample and tick counts must be positive".into(),
            ));
        }
        if self.thud_min_ones >= self.thud_window_samples {
            return Err(SafetyError::InvalidConfig(
                "thud_min_ones must leave room for a preceding quiet sample".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    Fall,
    HelpGesture,
    ProlongedHot,
    OccupancyTimeout,
}

impl AlertKind {
    /// Telemetry code: 1 fall, 2 help, 3 prolonged hot, 4 occupancy timeout.
    pub fn code(self) -> u8 {
        match self {
            AlertKind::Fall => 1,
            AlertKind::HelpGesture => 2,
            AlertKind::ProlongedHot => 3,
            AlertKind::OccupancyTimeout => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlertKind::Fall => "fall",
            AlertKind::HelpGesture => "help_gesture",
            AlertKind::ProlongedHot => "prolonged_hot",
            AlertKind::OccupancyTimeout => "occupancy_timeout",
        }
    }
}

impl fmt::Display for AlertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub kind: AlertKind,
    pub timestamp: f64,
    pub evidence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GestureMeaning {
    Help,
    Okay,
    None,
}

/// Upper and middle sensors see nobody while the floor sensor sees an obstacle.
pub fn detect_fall_geometry(us1: Occupancy, us2: Occupancy, us3: Occupancy) -> bool {
    us1 == Occupancy::Empty && us2 == Occupancy::Empty && us3 == Occupancy::Occupied
}

/// A spike: at least `thud_min_ones` loud samples after the first quiet one.
/// A window that is loud throughout is sustained noise, not a spike.
pub fn detect_thud(samples: &[u8], cfg: &SafetyConfig) -> Result<bool, SafetyError> {
    if samples.len() != cfg.thud_window_samples {
        return Err(SafetyError::WindowLength {
            expected: cfg.thud_window_samples,
            got: samples.len(),
        });
    }
    let Some(first_quiet) = samples.iter().position(|&s| s == 0) else {
        return Ok(false);
    };
    let loud = samples[first_quiet..].iter().filter(|&&s| s != 0).count();
    Ok(loud >= cfg.thud_min_ones)
}

pub fn interpret_gesture(gesture: GestureCode) -> GestureMeaning {
    match gesture {
        GestureCode::Right | GestureCode::Wave => GestureMeaning::Help,
        GestureCode::Left => GestureMeaning::Okay,
        _ => GestureMeaning::None,
    }
}

/// Alerts when the trailing run of hot entries in `mode_history` has lasted
/// `prolonged_hot_s` by `now`. Any other mode in between restarts the clock.
pub fn check_prolonged_hot(
    mode_history: &[(f64, WaterMode)],
    now: f64,
    cfg: &SafetyConfig,
) -> Option<Alert> {
    let (_, last_mode) = mode_history.last()?;
    if *last_mode != WaterMode::Hot {
        return None;
    }
    let hot_since = mode_history
        .iter()
        .rev()
        .take_while(|(_, mode)| *mode == WaterMode::Hot)
        .last()
        .map(|(t, _)| *t)?;
    let duration = now - hot_since;
    (duration >= cfg.prolonged_hot_s).then(|| Alert {
        kind: AlertKind::ProlongedHot,
        timestamp: now,
        evidence: format!("hot water since t={hot_since}s for {duration}s"),
    })
}

pub fn check_occupancy_timeout(
    occupied_since: Option<f64>,
    now: f64,
    cfg: &SafetyConfig,
) -> Option<Alert> {
    let since = occupied_since?;
    let duration = now - since;
    (duration >= cfg.occupancy_alert_s).then(|| Alert {
        kind: AlertKind::OccupancyTimeout,
        timestamp: now,
        evidence: format!("occupied since t={since}s for {duration}s"),
    })
}

/// Everything the safety engine looks at in one tick.
#[derive(Debug, Clone, Copy)]
pub struct TickInputs<'a> {
    pub now: f64,
    /// Occupancy per pole sensor, top to bottom.
    pub pole: [Occupancy; 3],
    pub sound_window: &'a [u8],
    pub gesture: Option<GestureCode>,
    pub controller: &'a ControllerState<f64>,
}

/// Per-episode memory of the safety engine.
///
/// An episode spans a run of ticks in which at least one pole sensor sees
/// someone. A fallen patron is invisible to the upper sensor, so this is
/// wider than the controller's occupancy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SafetyState {
    present: bool,
    fired: BTreeSet<AlertKind>,
    geometry_streak: usize,
    recent_thuds: VecDeque<bool>,
    help_active: bool,
    mode_history: Vec<(f64, WaterMode)>,
}

impl SafetyState {
    pub fn help_active(&self) -> bool {
        self.help_active
    }

    pub fn geometry_streak(&self) -> usize {
        self.geometry_streak
    }

    fn start_episode(&mut self, present: bool) {
        self.present = present;
        self.fired.clear();
        self.help_active = false;
        self.mode_history.clear();
    }

    fn raise(&mut self, alert: Alert, alerts: &mut Vec<Alert>) -> bool {
        if self.fired.insert(alert.kind) {
            log::info!(
                "alert {} at t={}: {}",
                alert.kind,
                alert.timestamp,
                alert.evidence
            );
            alerts.push(alert);
            true
        } else {
            false
        }
    }
}

/// Runs all detectors for one tick. Each alert kind fires at most once per
/// episode; a prolonged-hot alert always carries a water-off command.
pub fn fuse_tick(
    inputs: &TickInputs<'_>,
    state: &mut SafetyState,
    cfg: &SafetyConfig,
) -> Result<(Vec<Alert>, Vec<Command>), SafetyError> {
    let mut alerts = Vec::new();
    let mut commands = Vec::new();
    let now = inputs.now;
    let [us1, us2, us3] = inputs.pole;

    let present = inputs.pole.iter().any(|o| o.is_occupied());
    if present != state.present {
        state.start_episode(present);
    }

    let thud = detect_thud(inputs.sound_window, cfg)?;
    state.recent_thuds.push_back(thud);
    while state.recent_thuds.len() > cfg.geometry_confirm_ticks {
        state.recent_thuds.pop_front();
    }

    if detect_fall_geometry(us1, us2, us3) {
        state.geometry_streak += 1;
    } else {
        state.geometry_streak = 0;
    }
    let confirmed = state.geometry_streak >= cfg.geometry_confirm_ticks;
    let heard = state.recent_thuds.iter().any(|&t| t);
    if confirmed && (heard || !cfg.require_thud) {
        let evidence = format!(
            "us1={us1} us2={us2} us3={us3} for {} ticks; thud={heard}",
            state.geometry_streak
        );
        state.raise(
            Alert {
                kind: AlertKind::Fall,
                timestamp: now,
                evidence,
            },
            &mut alerts,
        );
    }

    if let Some(gesture) = inputs.gesture {
        match interpret_gesture(gesture) {
            GestureMeaning::Help => {
                if !state.help_active {
                    state.help_active = true;
                    commands.push(Command::HelpSignal { active: true });
                }
                let evidence = format!("gesture {gesture}");
                state.raise(
                    Alert {
                        kind: AlertKind::HelpGesture,
                        timestamp: now,
                        evidence,
                    },
                    &mut alerts,
                );
            }
            GestureMeaning::Okay => {
                if state.help_active {
                    state.help_active = false;
                    commands.push(Command::HelpSignal { active: false });
                }
            }
            GestureMeaning::None => {}
        }
    }

    let mode = inputs.controller.mode;
    if state.mode_history.last().is_none_or(|(_, m)| *m != mode) {
        state.mode_history.push((now, mode));
    }
    if let Some(alert) = check_prolonged_hot(&state.mode_history, now, cfg) {
        if state.raise(alert, &mut alerts) {
            commands.push(Command::WaterOff);
        }
    }

    if let Some(alert) = check_occupancy_timeout(inputs.controller.occupied_since, now, cfg) {
        state.raise(alert, &mut alerts);
    }

    Ok((alerts, commands))
}
