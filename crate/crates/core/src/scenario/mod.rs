//! Scripted bathroom episodes replayed against the device agent on a
//! deterministic clock.

pub mod analyze;
pub mod report;
pub mod script;

use thiserror::Error;

use crate::agent::{agent_tick, AgentError, AgentState, Uplink};
use crate::config::{ConfigError, SystemConfig};
use crate::sensors::{EnvironmentState, Presence, FALLEN_PROFILE_CM};

pub use analyze::{analyze_occupancy, read_distance_series, OccupancyInterval};
pub use report::{emit_report, Report, ReportFormat, ReportRow, Transition};
pub use script::{
    parse_scenario, print_scenario, EventKind, PersonAction, ScenarioError, ScenarioEvent,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("scenario has no `end` event")]
    MissingEnd,
}

/// Slack for comparing event times against tick times.
const TIME_EPSILON: f64 = 1e-9;

/// Room state before the first event: 20 °C, 50 % humidity, nobody inside, quiet.
pub fn initial_environment() -> EnvironmentState<f64> {
    EnvironmentState::default()
}

pub fn apply_event(env: &mut EnvironmentState<f64>, kind: &EventKind) {
    match *kind {
        EventKind::Env { temp, humidity } => {
            if let Some(t) = temp {
                env.ambient_temp = t;
            }
            if let Some(h) = humidity {
                env.ambient_humidity = h;
            }
        }
        EventKind::Person(action) => {
            env.person = match (action, env.person) {
                (PersonAction::Enter { distance }, _) => Presence::Standing(distance),
                (PersonAction::Move { distance }, Presence::Fallen(_)) => {
                    Presence::Fallen(distance)
                }
                (PersonAction::Move { distance }, _) => Presence::Standing(distance),
                (PersonAction::Fall { distance }, current) => {
                    let d = distance.or(current.distance()).unwrap_or(FALLEN_PROFILE_CM);
                    Presence::Fallen(d)
                }
                (PersonAction::Leave, _) => Presence::Absent,
            }
        }
        EventKind::Gesture(code) => env.pending_gesture = Some(code),
        EventKind::Sound { intensity } => env.sound_intensity = intensity,
        EventKind::End => {}
    }
}

/// Number of ticks in a run ending at `end_s`, including the one at t=0.
pub fn tick_count(end_s: f64, tick_s: f64) -> u64 {
    (end_s / tick_s + TIME_EPSILON).floor() as u64 + 1
}

/// Steps the clock from 0 to the `end` event in `tick_s` increments. Events
/// due at or before a tick are applied before that tick runs, so an event
/// between ticks takes effect on the next one.
pub fn run_scenario(
    events: &[ScenarioEvent],
    cfg: &SystemConfig,
    seed: u64,
    uplink: &mut dyn Uplink,
) -> Result<Report, RunError> {
    cfg.validate()?;
    let end_s = events
        .iter()
        .find(|e| e.kind == EventKind::End)
        .map(|e| e.at)
        .ok_or(RunError::MissingEnd)?;
    let tick_s = cfg.agent.tick_s;

    let mut env = initial_environment();
    let mut state = AgentState::new(cfg, seed);
    let mut report = Report::default();
    let mut pending = events.iter().peekable();

    for tick in 0..tick_count(end_s, tick_s) {
        let now = tick as f64 * tick_s;
        while let Some(event) = pending.next_if(|e| e.at <= now + TIME_EPSILON) {
            apply_event(&mut env, &event.kind);
        }

        let before = state.controller.clone();
        let out = agent_tick(&mut env, &mut state, cfg, uplink, tick)?;
        let after = &state.controller;

        if before.occupancy != after.occupancy || before.mode != after.mode {
            report.transitions.push(Transition {
                time_s: now,
                from_occupancy: before.occupancy,
                to_occupancy: after.occupancy,
                from_mode: before.mode,
                to_mode: after.mode,
            });
        }
        report.rows.push(ReportRow {
            time_s: now,
            distance_cm: out.distance_cm,
            temp_c: out.temp_c,
            humidity_pct: out.humidity_pct,
            occupancy: after.occupancy,
            mode: after.mode,
            entry_id: out.entry_id,
        });
        report
            .commands
            .extend(out.commands.into_iter().map(|c| (now, c)));
        report.alerts.extend(out.alerts);
        if let Some(block) = out.console {
            report.console.push((now, block));
        }
    }

    report.intervals = occupancy_intervals(&report.rows);
    report.counters = state.counters;
    Ok(report)
}

/// Maximal runs of constant controller occupancy in the report rows.
fn occupancy_intervals(rows: &[ReportRow]) -> Vec<OccupancyInterval> {
    let mut intervals: Vec<OccupancyInterval> = Vec::new();
    for row in rows {
        match intervals.last_mut() {
            Some(open) if open.occupancy == row.occupancy => {}
            last => {
                if let Some(open) = last {
                    open.end_s = Some(row.time_s);
                }
                intervals.push(OccupancyInterval {
                    start_s: row.time_s,
                    end_s: None,
                    occupancy: row.occupancy,
                    entry_distance_cm: row.distance_cm,
                });
            }
        }
    }
    intervals
}
