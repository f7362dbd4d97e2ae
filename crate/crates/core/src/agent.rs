//! The device-side loop: sample every sensor, run the controller and the
//! safety engine, post one telemetry update, and print the status block on
//! display boundaries.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::SystemConfig;
use crate::controller::{self, Command, ControllerError, ControllerState, Occupancy, WaterMode};
use crate::safety::{self, Alert, SafetyError, SafetyState, TickInputs};
use crate::sensors::{self, EnvironmentState, SensorReading};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Safety(#[from] SafetyError),
}

/// Which channel field carries which quantity (positions 1..=8).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldMap {
    pub distance_cm: u8,
    pub temperature_c: u8,
    pub humidity_pct: u8,
    pub mode: u8,
    pub alert: u8,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            distance_cm: 1,
            temperature_c: 2,
            humidity_pct: 3,
            mode: 4,
            alert: 5,
        }
    }
}

impl FieldMap {
    pub fn positions(&self) -> [u8; 5] {
        [
            self.distance_cm,
            self.temperature_c,
            self.humidity_pct,
            self.mode,
            self.alert,
        ]
    }

    /// Channel field names in position order, for creating a matching channel.
    pub fn channel_fields(&self) -> Vec<(u8, &'static str)> {
        let mut fields = vec![
            (self.distance_cm, "distance_cm"),
            (self.temperature_c, "temperature_c"),
            (self.humidity_pct, "humidity_pct"),
            (self.mode, "mode"),
            (self.alert, "alert"),
        ];
        fields.sort_unstable();
        fields
    }

    fn validate(&self) -> Result<(), String> {
        let positions = self.positions();
        if positions.iter().any(|p| !(1..=8).contains(p)) {
            return Err("field positions must lie in 1..=8".into());
        }
        for (i, p) in positions.iter().enumerate() {
            if positions[i + 1..].contains(p) {
                return Err(format!("field position {p} assigned twice"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub tick_s: f64,
    pub display_every_s: f64,
    pub write_key: Option<String>,
    /// Base URL of a telemetry server, e.g. `http://127.0.0.1:3000`.
    pub server: Option<String>,
    pub fields: FieldMap,
    /// Undelivered payloads kept while the server is unreachable.
    pub queue_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            tick_s: 1.0,
            display_every_s: 30.0,
            write_key: None,
            server: None,
            fields: FieldMap::default(),
            queue_capacity: 64,
        }
    }
}

impl AgentConfig {
    pub(crate) fn validate(&self) -> Result<(), String> {
        if !(self.tick_s.is_finite() && self.tick_s > 0.0) {
            return Err("tick_s must be positive".into());
        }
        if self.display_ticks().is_none() {
            return Err("display_every_s must be a positive multiple of tick_s".into());
        }
        if self.queue_capacity == 0 {
            return Err("queue_capacity must be positive".into());
        }
        self.fields.validate()
    }

    /// `display_every_s` in ticks, if it is a whole positive multiple.
    pub fn display_ticks(&self) -> Option<u64> {
        let ratio = self.display_every_s / self.tick_s;
        let rounded = ratio.round();
        ((ratio - rounded).abs() < 1e-9 && rounded >= 1.0).then_some(rounded as u64)
    }
}

/// One telemetry update: `(field position, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PostPayload {
    pub created_at: f64,
    pub fields: Vec<(u8, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostReceipt {
    /// Zero when the server accepted the request but stored nothing (too soon).
    pub entry_id: u64,
    /// Transport status line, e.g. `200 OK`.
    pub status: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UplinkError {
    /// Nothing reached the server; the payload stays queued.
    #[error("server unreachable: {0}")]
    Unreachable(String),
    /// The server refused the payload; retrying will not help.
    #[error("update rejected: {0}")]
    Rejected(String),
}

/// Transport to a telemetry channel.
pub trait Uplink {
    fn post(&mut self, payload: &PostPayload) -> Result<PostReceipt, UplinkError>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct PostCounters {
    pub attempted: u64,
    pub accepted: u64,
    pub rate_limited: u64,
    pub rejected: u64,
    pub unreachable: u64,
    pub dropped: u64,
}

/// Everything the agent carries from one tick to the next.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub controller: ControllerState<f64>,
    pub safety: SafetyState,
    pub pole: [Occupancy; 3],
    pub sound_window: VecDeque<u8>,
    pub queue: VecDeque<PostPayload>,
    pub counters: PostCounters,
    rng: ChaCha8Rng,
}

impl AgentState {
    pub fn new(cfg: &SystemConfig, seed: u64) -> Self {
        AgentState {
            controller: ControllerState::default(),
            safety: SafetyState::default(),
            pole: [Occupancy::Empty; 3],
            sound_window: std::iter::repeat_n(0, cfg.safety.thud_window_samples).collect(),
            queue: VecDeque::new(),
            counters: PostCounters::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutcome {
    pub now: f64,
    pub distance_cm: f64,
    pub temp_c: i32,
    pub humidity_pct: i32,
    pub alerts: Vec<Alert>,
    pub commands: Vec<Command>,
    pub payload: PostPayload,
    /// Entry id the server gave this tick's payload; 0 if rate-limited or not delivered.
    pub entry_id: u64,
    pub transport_status: String,
    pub console: Option<String>,
}

/// What the status block reports about the shower.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusOutcome {
    Empty,
    /// Occupied but held off by a safety shut-off.
    WaterOff,
    Running(WaterMode),
}

impl StatusOutcome {
    pub fn of(state: &ControllerState<f64>) -> Self {
        match (state.occupancy, state.mode) {
            (Occupancy::Empty, _) => StatusOutcome::Empty,
            (Occupancy::Occupied, WaterMode::Off) => StatusOutcome::WaterOff,
            (Occupancy::Occupied, mode) => StatusOutcome::Running(mode),
        }
    }
}

/// Console status block, one item per line, newline-terminated.
pub fn render_status(
    distance: f64,
    temp: i32,
    humidity: f64,
    transport_status: &str,
    outcome: StatusOutcome,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Distance: {distance}");
    let _ = writeln!(out, "Temperature: {temp}");
    let _ = writeln!(out, "Humidity: {humidity:.1}");
    let _ = writeln!(out, "{transport_status}");
    match outcome {
        StatusOutcome::Empty => out.push_str("Shower room empty\n"),
        StatusOutcome::WaterOff => out.push_str("Shower water off\n"),
        StatusOutcome::Running(mode) => {
            out.push_str("Shower Turned on\n");
            let _ = writeln!(out, "Temperature ={temp}");
            let _ = writeln!(out, "Humidity ={humidity}%");
            let phrase = match mode {
                WaterMode::Hot => "hot",
                WaterMode::Cold => "cold",
                WaterMode::Normal | WaterMode::Off => "normal temperature",
            };
            let _ = writeln!(out, "Turn on {phrase} shower");
        }
    }
    out
}

fn deliver(
    state: &mut AgentState,
    uplink: &mut dyn Uplink,
    capacity: usize,
    payload: PostPayload,
) -> (u64, String) {
    if state.queue.len() >= capacity {
        state.queue.pop_front();
        state.counters.dropped += 1;
    }
    let created_at = payload.created_at;
    state.queue.push_back(payload);

    let mut this_tick = (0, "offline".to_string());
    while let Some(front) = state.queue.front() {
        state.counters.attempted += 1;
        match uplink.post(front) {
            Ok(receipt) => {
                if receipt.entry_id == 0 {
                    state.counters.rate_limited += 1;
                } else {
                    state.counters.accepted += 1;
                }
                if front.created_at == created_at {
                    this_tick = (receipt.entry_id, receipt.status);
                }
                state.queue.pop_front();
            }
            Err(UplinkError::Rejected(reason)) => {
                log::warn!("update at t={} rejected: {reason}", front.created_at);
                state.counters.rejected += 1;
                if front.created_at == created_at {
                    this_tick = (0, format!("rejected: {reason}"));
                }
                state.queue.pop_front();
            }
            Err(UplinkError::Unreachable(reason)) => {
                log::debug!("server unreachable, {} queued: {reason}", state.queue.len());
                state.counters.unreachable += 1;
                break;
            }
        }
    }
    this_tick
}

/// Runs one device tick at `tick * tick_s` seconds.
pub fn agent_tick(
    env: &mut EnvironmentState<f64>,
    state: &mut AgentState,
    cfg: &SystemConfig,
    uplink: &mut dyn Uplink,
    tick: u64,
) -> Result<TickOutcome, AgentError> {
    let now = tick as f64 * cfg.agent.tick_s;
    env.sim_time = now;

    let pole_readings: Vec<SensorReading<f64>> = cfg
        .pole
        .iter()
        .map(|us| sensors::ultrasonic_measure(env, us, &mut state.rng))
        .collect();
    let dht = sensors::dht_measure(env);
    let sound = sensors::sound_sample(env, cfg.sound_threshold);
    let gesture = sensors::gesture_poll(env);

    let mut readings = pole_readings.clone();
    readings.push(dht);
    let (mut ctrl, mut commands) = controller::step(
        &state.controller,
        &readings,
        &cfg.controller,
        cfg.profile.as_ref(),
        now,
    )?;

    for (occ, reading) in state.pole.iter_mut().zip(&pole_readings) {
        let d = reading.distance().unwrap_or(f64::INFINITY);
        *occ = controller::classify_occupancy(d, *occ, &cfg.controller);
    }

    state.sound_window.push_back(sound);
    while state.sound_window.len() > cfg.safety.thud_window_samples {
        state.sound_window.pop_front();
    }
    let window: Vec<u8> = state.sound_window.iter().copied().collect();
    let inputs = TickInputs {
        now,
        pole: state.pole,
        sound_window: &window,
        gesture,
        controller: &ctrl,
    };
    let (alerts, safety_commands) = safety::fuse_tick(&inputs, &mut state.safety, &cfg.safety)?;

    let shut_off = safety_commands.contains(&Command::WaterOff);
    commands.extend(
        safety_commands
            .into_iter()
            .filter(|c| *c != Command::WaterOff),
    );
    if shut_off {
        let (locked, lock_commands) = controller::apply_water_lockout(&ctrl);
        ctrl = locked;
        commands.extend(lock_commands);
    }
    state.controller = ctrl;

    let distance_cm = pole_readings[0].distance().unwrap_or(f64::NAN);
    let (temp_c, humidity_pct) = dht.temp_humidity().unwrap_or_default();
    let alert_code = alerts.iter().map(|a| a.kind.code()).min().unwrap_or(0);
    let f = &cfg.agent.fields;
    let payload = PostPayload {
        created_at: now,
        fields: vec![
            (f.distance_cm, distance_cm),
            (f.temperature_c, f64::from(temp_c)),
            (f.humidity_pct, f64::from(humidity_pct)),
            (f.mode, f64::from(state.controller.mode.code())),
            (f.alert, f64::from(alert_code)),
        ],
    };

    let (entry_id, transport_status) =
        deliver(state, uplink, cfg.agent.queue_capacity, payload.clone());

    let display_ticks = cfg.agent.display_ticks().unwrap_or(1);
    let console = tick.is_multiple_of(display_ticks).then(|| {
        render_status(
            distance_cm,
            temp_c,
            f64::from(humidity_pct),
            &transport_status,
            StatusOutcome::of(&state.controller),
        )
    });

    Ok(TickOutcome {
        now,
        distance_cm,
        temp_c,
        humidity_pct,
        alerts,
        commands,
        payload,
        entry_id,
        transport_status,
        console,
    })
}
