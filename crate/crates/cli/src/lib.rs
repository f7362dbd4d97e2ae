//! Command implementations behind the `shower-sim` binary.

pub mod uplink;

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use shower_core::scenario::{
    self, emit_report, parse_scenario, read_distance_series, Report, ReportFormat,
};
use shower_core::{SystemConfig, Uplink};
use shower_telemetry::{Clock, ServerHandle, Store, StoreOptions};

pub use uplink::{HttpUplink, StoreUplink};

/// A failed command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad scenario, config or input data (exit 1).
    Invalid(anyhow::Error),
    /// Failure while running (exit 2).
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(e) | CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Invalid(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

/// Where the agent's updates go.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Transport {
    /// In-process channel store, no sockets.
    #[default]
    Local,
    /// A telemetry server started on a loopback port for the run.
    Embedded,
    /// An already running telemetry server.
    Remote(String),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub scenario: PathBuf,
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub transport: Transport,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    pub csv: PathBuf,
    pub jsonl: PathBuf,
    pub alerts: PathBuf,
}

pub fn load_config(path: Option<&Path>) -> Result<SystemConfig, CliError> {
    match path {
        Some(p) => SystemConfig::load(p)
            .with_context(|| format!("config {}", p.display()))
            .map_err(invalid),
        None => Ok(SystemConfig::default()),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(runtime)
}

fn load_scenario(path: &Path) -> Result<Vec<scenario::ScenarioEvent>, CliError> {
    parse_scenario(&read_text(path)?)
        .with_context(|| format!("scenario {}", path.display()))
        .map_err(invalid)
}

/// Parses and checks a scenario; returns its event count.
pub fn validate(path: &Path) -> Result<usize, CliError> {
    load_scenario(path).map(|events| events.len())
}

fn simulate(
    events: &[scenario::ScenarioEvent],
    cfg: &SystemConfig,
    seed: u64,
    uplink: &mut dyn Uplink,
) -> Result<Report, CliError> {
    scenario::run_scenario(events, cfg, seed, uplink).map_err(|e| match e {
        scenario::RunError::Config(_) | scenario::RunError::MissingEnd => invalid(e),
        scenario::RunError::Agent(_) => runtime(e),
    })
}

/// Runs a scenario and writes `<stem>.csv`, `<stem>.jsonl` and `<stem>.alerts`
/// into the output directory.
pub fn run(opts: &RunOptions) -> Result<RunOutput, CliError> {
    let cfg = load_config(opts.config.as_deref())?;
    let events = load_scenario(&opts.scenario)?;
    let fields = &cfg.agent.fields;

    let report = match &opts.transport {
        Transport::Local => {
            let mut up = StoreUplink::new(fields, opts.seed).map_err(runtime)?;
            simulate(&events, &cfg, opts.seed, &mut up)?
        }
        Transport::Embedded => {
            let store = Store::in_memory(StoreOptions {
                clock: Clock::Simulated,
                key_seed: Some(opts.seed),
                ..Default::default()
            });
            let loopback: SocketAddr = ([127, 0, 0, 1], 0).into();
            let server = ServerHandle::spawn(Arc::new(store), loopback)
                .context("starting embedded telemetry server")
                .map_err(runtime)?;
            log::info!("embedded telemetry server on {}", server.base_url());
            let mut up = HttpUplink::connect(&server.base_url(), None, fields).map_err(runtime)?;
            let report = simulate(&events, &cfg, opts.seed, &mut up);
            server.shutdown();
            report?
        }
        Transport::Remote(url) => {
            let key = cfg.agent.write_key.as_deref();
            let mut up = HttpUplink::connect(url, key, fields)
                .with_context(|| format!("connecting to {url}"))
                .map_err(runtime)?;
            simulate(&events, &cfg, opts.seed, &mut up)?
        }
    };

    std::fs::create_dir_all(&opts.out_dir)
        .with_context(|| format!("creating {}", opts.out_dir.display()))
        .map_err(runtime)?;
    let stem = opts
        .scenario
        .file_stem()
        .ok_or_else(|| invalid(anyhow!("scenario path has no file name")))?;
    let base = opts.out_dir.join(stem);
    let csv = base.with_extension("csv");
    let jsonl = base.with_extension("jsonl");
    let [_, alerts] = emit_report(&report, &csv, ReportFormat::Csv).map_err(runtime)?;
    emit_report(&report, &jsonl, ReportFormat::Jsonl).map_err(runtime)?;
    Ok(RunOutput {
        report,
        csv,
        jsonl,
        alerts,
    })
}

/// Console blocks followed by a short run summary.
pub fn run_summary(out: &RunOutput) -> String {
    let r = &out.report;
    let mut s = String::new();
    for (t, block) in &r.console {
        let _ = writeln!(s, "-- t={t}s");
        s.push_str(block);
    }
    let c = &r.counters;
    let _ = writeln!(s, "-- summary");
    let _ = writeln!(
        s,
        "ticks {} | posts accepted {} rate-limited {} rejected {} dropped {}",
        r.rows.len(),
        c.accepted,
        c.rate_limited,
        c.rejected,
        c.dropped
    );
    for t in &r.transitions {
        let _ = writeln!(
            s,
            "t={}s {} -> {}, {} -> {}",
            t.time_s,
            t.from_occupancy.as_str(),
            t.to_occupancy.as_str(),
            t.from_mode,
            t.to_mode
        );
    }
    for a in &r.alerts {
        let _ = writeln!(
            s,
            "ALERT t={}s {} ({})",
            a.timestamp,
            a.kind.as_str(),
            a.evidence
        );
    }
    for interval in &r.intervals {
        let _ = writeln!(s, "{interval}");
    }
    for path in [&out.csv, &out.jsonl, &out.alerts] {
        let _ = writeln!(s, "wrote {}", path.display());
    }
    s
}

/// Occupancy intervals of a distance series, one labelled line each.
pub fn analyze(feed: &Path, config: Option<&Path>) -> Result<Vec<String>, CliError> {
    let cfg = load_config(config)?;
    let file = std::fs::File::open(feed)
        .with_context(|| format!("opening {}", feed.display()))
        .map_err(runtime)?;
    let series = read_distance_series(file)
        .with_context(|| format!("reading {}", feed.display()))
        .map_err(invalid)?;
    Ok(scenario::analyze_occupancy(&series, &cfg.controller)
        .iter()
        .map(ToString::to_string)
        .collect())
}
