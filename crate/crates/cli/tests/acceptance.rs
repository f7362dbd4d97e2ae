//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! process exits non-zero if any check fails.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shower_core::agent::{render_status, StatusOutcome};
use shower_core::controller::{clamp_discharge_temperature, select_water_mode, ControllerConfig};
use shower_core::safety::{detect_fall_geometry, detect_thud, interpret_gesture, GestureMeaning};
use shower_core::scenario::{
    analyze_occupancy, emit_report, parse_scenario, read_distance_series, run_scenario, EventKind,
    PersonAction, Report, ReportFormat, ScenarioEvent,
};
use shower_core::{AlertKind, GestureCode, Occupancy, SafetyConfig, SystemConfig, WaterMode};
use shower_sim::StoreUplink;
use shower_telemetry::{
    ClientError, Clock, FieldValue, ServerHandle, Store, StoreOptions, TelemetryClient, Visibility,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn scenario(name: &str) -> Vec<ScenarioEvent> {
    let path = scenarios_dir().join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_scenario(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn config(name: Option<&str>) -> SystemConfig {
    match name {
        Some(n) => SystemConfig::load(&scenarios_dir().join(n)).unwrap(),
        None => SystemConfig::default(),
    }
}

fn simulate(events: &[ScenarioEvent], cfg: &SystemConfig, seed: u64) -> Report {
    let mut up = StoreUplink::new(&cfg.agent.fields, seed).unwrap();
    run_scenario(events, cfg, seed, &mut up).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn loopback() -> SocketAddr {
    ([127, 0, 0, 1], 0).into()
}

// 1. Occupancy labels from a 30 s distance trace.
fn occupancy_trace() -> Check {
    let started = Instant::now();
    let events = scenario("occupancy-30s.scn");
    let cfg = config(Some("occupancy-30s.toml"));
    let report = simulate(&events, &cfg, 0);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("trace.csv");
    emit_report(&report, &csv, ReportFormat::Csv).map_err(|e| e.to_string())?;
    let series = read_distance_series(std::fs::File::open(&csv).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let intervals = analyze_occupancy(&series, &cfg.controller);
    let elapsed = started.elapsed();

    let got: Vec<(&str, f64, f64, Option<f64>)> = intervals
        .iter()
        .map(|i| (i.label(), i.entry_distance_cm, i.start_s, i.end_s))
        .collect();
    let want = vec![
        ("Shower space occupied", 8.0, 0.0, Some(60.0)),
        ("Shower space empty", 74.0, 60.0, None),
    ];
    ensure(got == want, || format!("intervals {got:?}"))?;
    let first: Vec<String> = intervals.iter().map(ToString::to_string).collect();
    ensure(
        first
            == [
                "[0, 60) Shower space occupied Distance= 8",
                "[60, ...) Shower space empty Distance= 74",
            ],
        || format!("lines {first:?}"),
    )?;
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} | {} in {:.1} ms",
        first[0],
        first[1],
        elapsed.as_secs_f64() * 1e3
    ))
}

// 2. Status blocks against the frozen golden files.
fn status_blocks() -> Check {
    let empty_golden = include_str!("golden/status-empty.txt");
    let cold_golden = include_str!("golden/status-cold.txt");
    let empty = render_status(144.0, 25, 15.0, "200 OK", StatusOutcome::Empty);
    let cold = render_status(
        16.0,
        23,
        15.0,
        "200 OK",
        StatusOutcome::Running(WaterMode::Cold),
    );
    ensure(empty.as_bytes() == empty_golden.as_bytes(), || {
        format!("empty block differs:\n{empty}")
    })?;
    ensure(cold.as_bytes() == cold_golden.as_bytes(), || {
        format!("cold block differs:\n{cold}")
    })?;
    ensure(empty.ends_with("Shower room empty\n"), || {
        "empty block ending".into()
    })?;
    ensure(cold.ends_with("Turn on cold shower\n"), || {
        "cold block ending".into()
    })?;

    // the same block falls out of a full device tick with those inputs
    let events =
        parse_scenario("at 0 env temp=23 humidity=15\nat 0 person enter distance=16\nat 0 end\n")
            .unwrap();
    let report = simulate(&events, &config(Some("bench.toml")), 0);
    let from_tick = &report.console[0].1;
    ensure(from_tick == cold_golden, || {
        format!("device tick block differs:\n{from_tick}")
    })?;
    Ok(format!("{} + {} bytes match", empty.len(), cold.len()))
}

// 3. Hair dryer warming the temperature sensor while the patron steps in.
fn hairdryer() -> Check {
    let events = scenario("hairdryer.scn");
    let cfg = config(Some("bench.toml"));
    let report = simulate(&events, &cfg, 0);
    let event_t = events
        .iter()
        .find(|e| matches!(e.kind, EventKind::Env { temp: Some(t), .. } if t >= 25.0))
        .map(|e| e.at)
        .ok_or("no warming event")?;
    let to_cold = report
        .transitions
        .iter()
        .find(|t| t.to_mode == WaterMode::Cold)
        .ok_or_else(|| format!("no transition to cold in {:?}", report.transitions))?;
    let lag = to_cold.time_s - event_t;
    ensure((0.0..=cfg.agent.tick_s).contains(&lag), || {
        format!("cold at t={} vs event t={event_t}", to_cold.time_s)
    })?;
    let (lo, hi) = report
        .rows
        .iter()
        .fold((i32::MAX, i32::MIN), |(lo, hi), r| {
            (lo.min(r.temp_c), hi.max(r.temp_c))
        });
    ensure(lo >= 23 && hi <= 25, || {
        format!("temperature column spans [{lo}, {hi}]")
    })?;
    ensure(lo == 23 && hi == 25, || {
        format!("temperature column spans [{lo}, {hi}], expected the full 23..25 swing")
    })?;
    Ok(format!(
        "{} -> cold at t={}s (event t={event_t}s); temperature in [{lo}, {hi}]",
        to_cold.from_mode, to_cold.time_s
    ))
}

// Independent mode oracle on half-degree steps: 2t < 44 hot, 2t >= 46 cold, else normal.
fn mode_oracle_half_steps(twice_t: i32) -> WaterMode {
    match twice_t {
        k if k < 44 => WaterMode::Hot,
        k if k >= 46 => WaterMode::Cold,
        _ => WaterMode::Normal,
    }
}

// 4. Mode decision table.
fn mode_table() -> Check {
    let cfg = ControllerConfig::<f64>::default();
    for (t, want) in [
        (21.0, WaterMode::Hot),
        (23.0, WaterMode::Cold),
        (22.5, WaterMode::Normal),
    ] {
        let got = select_water_mode(t, &cfg, None);
        ensure(got == want, || format!("{t} -> {got}, expected {want}"))?;
    }
    let mut swept = 0;
    for twice_t in -20..=90 {
        let t = f64::from(twice_t) / 2.0;
        let got = select_water_mode(t, &cfg, None);
        let want = mode_oracle_half_steps(twice_t);
        ensure(got == want, || {
            format!("sweep {t} -> {got}, expected {want}")
        })?;
        swept += 1;
    }
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 4096,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    runner
        .run(&(-10.0f64..=45.0), |t| {
            let want = if t < 22.0 {
                WaterMode::Hot
            } else if t < 23.0 {
                WaterMode::Normal
            } else {
                WaterMode::Cold
            };
            prop_assert_eq!(select_water_mode(t, &cfg, None), want);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "21 hot, 23 cold, 22.5 normal; {swept}-point sweep and 4096 random temperatures agree"
    ))
}

// 5. Scald clamp.
fn scald_clamp() -> Check {
    let cfg = ControllerConfig::<f64>::default();
    let cases = 10_000;
    let mut runner = TestRunner::new(ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    runner
        .run(&(0.0f64..=100.0), |requested| {
            let out = clamp_discharge_temperature(requested, &cfg);
            prop_assert!(out <= 50.0);
            prop_assert_eq!(clamp_discharge_temperature(out, &cfg), out);
            if requested <= 50.0 {
                prop_assert_eq!(out, requested);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    for (req, want) in [
        (60.0, 50.0),
        (37.0, 37.0),
        (50.0, 50.0),
        (100.0, 50.0),
        (0.0, 0.0),
    ] {
        let got = clamp_discharge_temperature(req, &cfg);
        ensure(got == want, || format!("clamp({req}) = {got}"))?;
    }
    Ok(format!(
        "{cases} random requests in [0, 100] stay <= 50.0 and clamp is idempotent"
    ))
}

fn random_scenario(rng: &mut ChaCha8Rng) -> Vec<ScenarioEvent> {
    let mut events = Vec::new();
    let mut t = 0.0;
    let n = rng.random_range(3..40);
    for _ in 0..n {
        let kind = match rng.random_range(0..10) {
            0 | 1 => EventKind::Env {
                temp: Some(f64::from(rng.random_range(-20..=90)) / 2.0),
                humidity: rng
                    .random_bool(0.5)
                    .then(|| f64::from(rng.random_range(0..=100))),
            },
            2 | 3 => EventKind::Person(PersonAction::Enter {
                distance: f64::from(rng.random_range(0..=600)),
            }),
            4 => EventKind::Person(PersonAction::Move {
                distance: f64::from(rng.random_range(0..=200)),
            }),
            5 => EventKind::Person(PersonAction::Fall {
                distance: rng
                    .random_bool(0.5)
                    .then(|| f64::from(rng.random_range(0..=200))),
            }),
            6 => EventKind::Person(PersonAction::Leave),
            7 => EventKind::Gesture(GestureCode::ALL[rng.random_range(0..9)]),
            _ => EventKind::Sound {
                intensity: f64::from(rng.random_range(0..=10)) / 10.0,
            },
        };
        events.push(ScenarioEvent { at: t, kind });
        t += f64::from(rng.random_range(0..=40)) / 2.0;
    }
    events.push(ScenarioEvent {
        at: t + 5.0,
        kind: EventKind::End,
    });
    events
}

fn random_config(rng: &mut ChaCha8Rng) -> SystemConfig {
    let mut cfg = SystemConfig::default();
    if rng.random_bool(0.5) {
        cfg.controller = ControllerConfig::with_hysteresis();
    }
    cfg.safety.prolonged_hot_s = [1200.0, 30.0, 5.0][rng.random_range(0..3)];
    cfg.safety.occupancy_alert_s = [1800.0, 60.0][rng.random_range(0..2)];
    for us in &mut cfg.pole {
        us.noise_sigma = [0.0, 0.0, 5.0][rng.random_range(0..3)];
    }
    cfg
}

fn water_only_when_occupied(report: &Report) -> Result<usize, String> {
    for row in &report.rows {
        ensure(
            row.mode == WaterMode::Off || row.occupancy == Occupancy::Occupied,
            || {
                format!(
                    "t={} mode {} while {}",
                    row.time_s,
                    row.mode,
                    row.occupancy.as_str()
                )
            },
        )?;
    }
    Ok(report.rows.len())
}

// 6. Water never runs in an empty shower.
fn safety_invariant() -> Check {
    let mut ticks = 0;
    let mut goldens = 0;
    let mut names: Vec<PathBuf> = std::fs::read_dir(scenarios_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    names.sort();
    for path in &names {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        for cfg_name in [None, Some("bench.toml"), Some("occupancy-30s.toml")] {
            let report = simulate(&scenario(&name), &config(cfg_name), 1);
            ticks += water_only_when_occupied(&report)
                .map_err(|e| format!("{name} with {cfg_name:?}: {e}"))?;
        }
        goldens += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5A0E_u64);
    let mut hot_lockouts = 0;
    for i in 0..100 {
        let events = random_scenario(&mut rng);
        let cfg = random_config(&mut rng);
        let report = simulate(&events, &cfg, i);
        ticks +=
            water_only_when_occupied(&report).map_err(|e| format!("random scenario {i}: {e}"))?;
        hot_lockouts += report
            .alerts
            .iter()
            .filter(|a| a.kind == AlertKind::ProlongedHot)
            .count();
    }
    Ok(format!("{goldens} golden + 100 random scenarios, {ticks} ticks, {hot_lockouts} hot lock-outs exercised"))
}

// Independent thud oracle: a 1 that comes after some 0 in the window counts;
// a thud needs at least `min_ones` such samples.
fn thud_oracle(bits: u16, len: usize, min_ones: usize) -> bool {
    let mut seen_zero = false;
    let mut ones_after_zero = 0;
    for i in 0..len {
        let bit = (bits >> i) & 1;
        if bit == 0 {
            seen_zero = true;
        } else if seen_zero {
            ones_after_zero += 1;
        }
    }
    ones_after_zero >= min_ones
}

// 7. Fall detection.
fn fall_detection() -> Check {
    let cfg = SystemConfig::default();
    let events = scenario("fall.scn");
    let report = simulate(&events, &cfg, 0);
    let falls: Vec<f64> = report
        .alerts
        .iter()
        .filter(|a| a.kind == AlertKind::Fall)
        .map(|a| a.timestamp)
        .collect();
    let fell_at = events
        .iter()
        .find(|e| matches!(e.kind, EventKind::Person(PersonAction::Fall { .. })))
        .map(|e| e.at)
        .ok_or("fall scenario has no fall")?;
    let first_tick = (fell_at / cfg.agent.tick_s).ceil() * cfg.agent.tick_s;
    let expected = first_tick + (cfg.safety.geometry_confirm_ticks as f64 - 1.0) * cfg.agent.tick_s;
    ensure(falls == [expected], || {
        format!("fall alerts at {falls:?}, expected [{expected}]")
    })?;

    for name in ["standing.scn", "vacant.scn"] {
        let r = simulate(&scenario(name), &cfg, 0);
        let n = r
            .alerts
            .iter()
            .filter(|a| a.kind == AlertKind::Fall)
            .count();
        ensure(n == 0, || format!("{name}: {n} fall alerts"))?;
    }

    use Occupancy::{Empty, Occupied};
    let mut triples = 0;
    for us1 in [Empty, Occupied] {
        for us2 in [Empty, Occupied] {
            for us3 in [Empty, Occupied] {
                let want = us1 == Empty && us2 == Empty && us3 == Occupied;
                ensure(detect_fall_geometry(us1, us2, us3) == want, || {
                    format!("geometry {us1:?} {us2:?} {us3:?}")
                })?;
                triples += 1;
            }
        }
    }

    let safety = SafetyConfig::default();
    let len = safety.thud_window_samples;
    let mut windows = 0;
    let mut thuds = 0;
    for bits in 0u16..(1 << len) {
        let samples: Vec<u8> = (0..len).map(|i| ((bits >> i) & 1) as u8).collect();
        let got = detect_thud(&samples, &safety).map_err(|e| e.to_string())?;
        let want = thud_oracle(bits, len, safety.thud_min_ones);
        ensure(got == want, || {
            format!("thud window {samples:?}: got {got}, expected {want}")
        })?;
        windows += 1;
        thuds += usize::from(want);
    }
    Ok(format!(
        "one fall alert at t={expected}s; standing/vacant none; {triples} triples; {windows} windows ({thuds} thuds)"
    ))
}

// 8. Gesture meanings.
fn gestures() -> Check {
    let mut table = String::new();
    for code in GestureCode::ALL {
        let want = match code.as_str() {
            "right" | "wave" => GestureMeaning::Help,
            "left" => GestureMeaning::Okay,
            _ => GestureMeaning::None,
        };
        let got = interpret_gesture(code);
        ensure(got == want, || {
            format!("{code} -> {got:?}, expected {want:?}")
        })?;
        let round_trip: GestureCode = code.as_str().parse().map_err(|e| format!("{e:?}"))?;
        ensure(round_trip == code, || format!("{code} does not round-trip"))?;
        if want != GestureMeaning::None {
            let _ = write!(table, "{code}={want:?} ");
        }
    }
    ensure(GestureCode::ALL.len() == 9, || {
        "expected nine gesture codes".into()
    })?;
    Ok(format!("{}; six others none", table.trim_end()))
}

// 9. Telemetry protocol over HTTP.
fn telemetry_protocol() -> Check {
    let sim = ServerHandle::spawn(
        Arc::new(Store::in_memory(StoreOptions {
            clock: Clock::Simulated,
            ..Default::default()
        })),
        loopback(),
    )
    .map_err(|e| e.to_string())?;
    let client = TelemetryClient::new(&sim.base_url()).map_err(|e| e.to_string())?;
    let ch = client
        .create_channel(
            "shower",
            &["distance", "temperature", "humidity"],
            Visibility::Private,
            None,
        )
        .map_err(|e| e.to_string())?;

    let values = vec![
        (1, FieldValue::Number(144.0)),
        (2, FieldValue::Number(25.0)),
        (3, FieldValue::Number(15.5)),
    ];
    let first = client
        .write_update(&ch.write_key, &values, Some(10.0))
        .map_err(|e| e.to_string())?;
    ensure(first.entry_id == 1, || {
        format!("first entry id {}", first.entry_id)
    })?;
    let feed = client
        .read_feed(ch.channel_id, &ch.read_key, 10)
        .map_err(|e| e.to_string())?;
    let stored: Vec<(u8, FieldValue)> = feed[0].values.clone().into_iter().collect();
    ensure(
        feed.len() == 1 && stored == values && feed[0].created_at == 10.0,
        || format!("round trip {feed:?}"),
    )?;

    // a write 0.5 s after an accepted one: body `0`, nothing stored
    let http = reqwest::blocking::Client::new();
    let response = http
        .get(format!(
            "{}/update?api_key={}&field1=1&created_at=10.5",
            sim.base_url(),
            ch.write_key
        ))
        .send()
        .map_err(|e| e.to_string())?;
    let status = response.status().as_u16();
    let body = response.text().map_err(|e| e.to_string())?;
    ensure(status == 200 && body == "0", || {
        format!("too-soon write answered {status} `{body}`")
    })?;
    let after = client
        .read_feed(ch.channel_id, &ch.read_key, 10)
        .map_err(|e| e.to_string())?;
    ensure(after == feed, || "too-soon write changed the feed".into())?;

    let nine: Vec<String> = (1..=9).map(|i| format!("f{i}")).collect();
    let nine: Vec<&str> = nine.iter().map(String::as_str).collect();
    match client.create_channel("x", &nine, Visibility::Private, None) {
        Err(ClientError::Status { status, .. }) if status.as_u16() == 400 => {}
        other => return Err(format!("9-field channel: {other:?}")),
    }
    let wrong = http
        .get(format!(
            "{}/channels/{}/feeds.json?api_key={}",
            sim.base_url(),
            ch.channel_id,
            ch.write_key
        ))
        .send()
        .map_err(|e| e.to_string())?;
    ensure(wrong.status().as_u16() == 401, || {
        format!("wrong read key answered {}", wrong.status())
    })?;
    sim.shutdown();

    // four concurrent writers on a wall-clock server, no pacing
    let wall = ServerHandle::spawn(
        Arc::new(Store::in_memory(StoreOptions::default())),
        loopback(),
    )
    .map_err(|e| e.to_string())?;
    let base = wall.base_url();
    let client = TelemetryClient::new(&base).map_err(|e| e.to_string())?;
    let ch = client
        .create_channel("load", &["writer", "seq"], Visibility::Private, Some(0.0))
        .map_err(|e| e.to_string())?;
    let n = 1000;
    let started = Instant::now();
    let per_writer: Vec<Result<Vec<u64>, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4u32)
            .map(|w| {
                let base = base.clone();
                let key = ch.write_key.clone();
                s.spawn(move || {
                    let client = TelemetryClient::new(&base).map_err(|e| e.to_string())?;
                    (0..(n / 4) as u32)
                        .map(|i| {
                            let v = [
                                (1, FieldValue::Number(f64::from(w))),
                                (2, FieldValue::Number(f64::from(i))),
                            ];
                            client
                                .write_update(&key, &v, None)
                                .map(|r| r.entry_id)
                                .map_err(|e| e.to_string())
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let elapsed = started.elapsed();
    let mut ids = Vec::new();
    for (w, got) in per_writer.into_iter().enumerate() {
        let got = got?;
        ensure(got.windows(2).all(|p| p[0] < p[1]), || {
            format!("writer {w} saw ids go backwards")
        })?;
        ids.extend(got);
    }
    ids.sort_unstable();
    ensure(ids == (1..=n as u64).collect::<Vec<_>>(), || {
        "entry ids are not exactly 1..=1000".into()
    })?;
    let feed = client
        .read_feed(ch.channel_id, &ch.read_key, n)
        .map_err(|e| e.to_string())?;
    let feed_ids: Vec<u64> = feed.iter().map(|e| e.entry_id).collect();
    ensure(feed_ids == (1..=n as u64).collect::<Vec<_>>(), || {
        "feed is not 1..=1000 in order".into()
    })?;
    let mut per_writer_seq: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for e in &feed {
        let w = e.values[&1].as_f64().unwrap_or(-1.0) as u64;
        per_writer_seq
            .entry(w)
            .or_default()
            .push(e.values[&2].as_f64().unwrap_or(-1.0) as u64);
    }
    ensure(
        per_writer_seq
            .values()
            .all(|s| s.iter().copied().eq(0..(n as u64 / 4))),
        || "a writer's updates were stored out of order".into(),
    )?;
    ensure(elapsed < Duration::from_secs(10), || {
        format!("1000 concurrent writes took {elapsed:?}")
    })?;
    wall.shutdown();
    Ok(format!(
        "round trip ok; 4x250 concurrent writes gapless 1..1000 in {:.2} s; too-soon -> `0`; 9 fields -> 400; wrong key -> 401",
        elapsed.as_secs_f64()
    ))
}

// 10. Durability across kill and restart, and a torn final record.
fn durability() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let options = StoreOptions {
        clock: Clock::Simulated,
        ..Default::default()
    };
    let open = || -> Result<ServerHandle, String> {
        let store = Store::recover(dir.path(), options.clone()).map_err(|e| e.to_string())?;
        ServerHandle::spawn(Arc::new(store), loopback()).map_err(|e| e.to_string())
    };

    let server = open()?;
    let client = TelemetryClient::new(&server.base_url()).map_err(|e| e.to_string())?;
    let ch = client
        .create_channel("durable", &["distance", "note"], Visibility::Private, None)
        .map_err(|e| e.to_string())?;
    for i in 0..100 {
        let v = [
            (1, FieldValue::Number(f64::from(i) * 1.5)),
            (2, FieldValue::Text(format!("entry {i}"))),
        ];
        let id = client
            .write_update(&ch.write_key, &v, Some(f64::from(i)))
            .map_err(|e| e.to_string())?
            .entry_id;
        ensure(id == u64::try_from(i).unwrap() + 1, || {
            format!("write {i} got id {id}")
        })?;
    }
    let before = client
        .read_feed(ch.channel_id, &ch.read_key, 100)
        .map_err(|e| e.to_string())?;
    ensure(before.len() == 100, || {
        format!("{} entries before restart", before.len())
    })?;
    // The store never buffers: each write is on disk before its response.
    // Dropping the server and store without any close step stands in for a kill.
    drop(server);

    let server = open()?;
    let client = TelemetryClient::new(&server.base_url()).map_err(|e| e.to_string())?;
    let after = client
        .read_feed(ch.channel_id, &ch.read_key, 100)
        .map_err(|e| e.to_string())?;
    ensure(after == before, || "feed after restart differs".into())?;
    drop(server);

    let log = shower_telemetry::persist::channel_log_path(dir.path(), ch.channel_id);
    let bytes = std::fs::read(&log).map_err(|e| e.to_string())?;
    std::fs::write(&log, &bytes[..bytes.len() - 7]).map_err(|e| e.to_string())?;
    let server = open()?;
    let client = TelemetryClient::new(&server.base_url()).map_err(|e| e.to_string())?;
    let torn = client
        .read_feed(ch.channel_id, &ch.read_key, 100)
        .map_err(|e| e.to_string())?;
    ensure(torn[..] == before[..99], || {
        format!("torn log recovered {} entries", torn.len())
    })?;
    let next = client
        .write_update(&ch.write_key, &[(1, FieldValue::Number(0.0))], Some(200.0))
        .map_err(|e| e.to_string())?;
    ensure(next.entry_id == 100, || {
        format!("next id after torn recovery {}", next.entry_id)
    })?;
    Ok("100 entries identical after restart; torn tail recovers first 99, next id 100".into())
}

// 11. Byte-identical reports from repeated CLI runs.
fn determinism() -> Check {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = work.path().join("noisy.toml");
    std::fs::write(&cfg, "noise_sigma_cm = 4\nprolonged_hot_s = 15\n")
        .map_err(|e| e.to_string())?;
    let mut compared = 0;
    for name in ["fall.scn", "hairdryer.scn", "help.scn"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = work.path().join(format!("{name}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_shower-sim"))
                .arg("run")
                .arg(scenarios_dir().join(name))
                .arg("--config")
                .arg(&cfg)
                .args(["--seed", "42", "--out"])
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), || {
                format!(
                    "{name}: exit {:?}: {}",
                    status.status.code(),
                    String::from_utf8_lossy(&status.stderr)
                )
            })?;
            let stem = name.trim_end_matches(".scn");
            let mut files = Vec::new();
            for ext in ["csv", "alerts", "jsonl"] {
                files.push(
                    std::fs::read(out.join(format!("{stem}.{ext}"))).map_err(|e| e.to_string())?,
                );
            }
            outputs.push(files);
        }
        for (i, ext) in ["csv", "alerts", "jsonl"].iter().enumerate() {
            ensure(outputs[0][i] == outputs[1][i], || {
                format!("{name}: .{ext} differs between runs")
            })?;
            ensure(!outputs[0][i].is_empty() || *ext == "alerts", || {
                format!("{name}: empty .{ext}")
            })?;
            compared += 1;
        }
    }
    Ok(format!(
        "{compared} file pairs byte-identical (seed 42, ultrasonic noise on)"
    ))
}

fn main() {
    let checks: [Criterion; 11] = [
        ("occupancy trace labels", occupancy_trace),
        ("status block goldens", status_blocks),
        ("hair dryer switches to cold", hairdryer),
        ("mode decision table", mode_table),
        ("scald clamp", scald_clamp),
        ("no water in an empty shower", safety_invariant),
        ("fall detection", fall_detection),
        ("gesture mapping", gestures),
        ("telemetry protocol", telemetry_protocol),
        ("durability", durability),
        ("replay determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        checks.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
