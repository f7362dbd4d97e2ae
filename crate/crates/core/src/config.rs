//! Whole-system configuration and its flat `key = value` file form.
//!
//! Every key is optional; unset keys keep their defaults. String values are
//! quoted (`pin = "0420"`), numbers are bare (`activation_cm = 60`).

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::agent::{AgentConfig, FieldMap};
use crate::controller::{ControllerConfig, ControllerError, PreferenceMode, UserProfile};
use crate::safety::{SafetyConfig, SafetyError};
use crate::sensors::{SensorError, UltrasonicConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Safety(#[from] SafetyError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error("invalid agent config: {0}")]
    Agent(String),
    #[error("incomplete user profile: {0}")]
    Profile(String),
}

/// Configuration of every module the simulation drives.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub controller: ControllerConfig<f64>,
    pub safety: SafetyConfig,
    /// Upper, middle and floor ultrasonic sensors.
    pub pole: [UltrasonicConfig<f64>; 3],
    pub sound_threshold: f64,
    pub agent: AgentConfig,
    pub profile: Option<UserProfile<f64>>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            controller: ControllerConfig::default(),
            safety: SafetyConfig::default(),
            pole: UltrasonicConfig::pole(),
            sound_threshold: 0.5,
            agent: AgentConfig::default(),
            profile: None,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.controller.validate()?;
        self.safety.validate()?;
        for sensor in &self.pole {
            sensor.validate()?;
        }
        if !(0.0..=1.0).contains(&self.sound_threshold) {
            return Err(ConfigError::Agent(
                "sound_threshold must lie in [0, 1]".into(),
            ));
        }
        self.agent.validate().map_err(ConfigError::Agent)?;
        if let Some(p) = &self.profile {
            if let Some(t) = p.preferred_temp {
                if !t.is_finite() {
                    return Err(ConfigError::Profile("preferred_temp must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        let cfg = file.apply(SystemConfig::default())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    activation_cm: Option<f64>,
    deactivation_cm: Option<f64>,
    t_hot_c: Option<f64>,
    t_cold_c: Option<f64>,
    humidity_threshold_pct: Option<f64>,
    max_discharge_c: Option<f64>,
    hot_discharge_c: Option<f64>,
    normal_discharge_c: Option<f64>,
    cold_discharge_c: Option<f64>,

    occupancy_alert_s: Option<f64>,
    prolonged_hot_s: Option<f64>,
    thud_window_samples: Option<usize>,
    thud_min_ones: Option<usize>,
    geometry_confirm_ticks: Option<usize>,
    require_thud: Option<bool>,

    us1_height_cm: Option<f64>,
    us2_height_cm: Option<f64>,
    us3_height_cm: Option<f64>,
    min_range_cm: Option<f64>,
    max_range_cm: Option<f64>,
    noise_sigma_cm: Option<f64>,
    sound_threshold: Option<f64>,

    tick_s: Option<f64>,
    display_every_s: Option<f64>,
    write_key: Option<String>,
    server: Option<String>,
    queue_capacity: Option<usize>,
    field_distance: Option<u8>,
    field_temperature: Option<u8>,
    field_humidity: Option<u8>,
    field_mode: Option<u8>,
    field_alert: Option<u8>,

    user_id: Option<String>,
    pin: Option<String>,
    preferred_temp: Option<f64>,
    preference_mode: Option<String>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ConfigFile {
    fn apply(self, mut cfg: SystemConfig) -> Result<SystemConfig, ConfigError> {
        let c = &mut cfg.controller;
        set(&mut c.activation_cm, self.activation_cm);
        set(&mut c.deactivation_cm, self.deactivation_cm);
        set(&mut c.t_hot_c, self.t_hot_c);
        set(&mut c.t_cold_c, self.t_cold_c);
        set(&mut c.humidity_threshold_pct, self.humidity_threshold_pct);
        set(&mut c.max_discharge_c, self.max_discharge_c);
        set(&mut c.hot_discharge_c, self.hot_discharge_c);
        set(&mut c.normal_discharge_c, self.normal_discharge_c);
        set(&mut c.cold_discharge_c, self.cold_discharge_c);

        let s = &mut cfg.safety;
        set(&mut s.occupancy_alert_s, self.occupancy_alert_s);
        set(&mut s.prolonged_hot_s, self.prolonged_hot_s);
        set(&mut s.thud_window_samples, self.thud_window_samples);
        set(&mut s.thud_min_ones, self.thud_min_ones);
        set(&mut s.geometry_confirm_ticks, self.geometry_confirm_ticks);
        set(&mut s.require_thud, self.require_thud);

        let [us1, us2, us3] = &mut cfg.pole;
        set(&mut us1.mount_height, self.us1_height_cm);
        set(&mut us2.mount_height, self.us2_height_cm);
        set(&mut us3.mount_height, self.us3_height_cm);
        for us in cfg.pole.iter_mut() {
            set(&mut us.min_range, self.min_range_cm);
            set(&mut us.max_range, self.max_range_cm);
            set(&mut us.noise_sigma, self.noise_sigma_cm);
        }
        set(&mut cfg.sound_threshold, self.sound_threshold);

        let a = &mut cfg.agent;
        set(&mut a.tick_s, self.tick_s);
        set(&mut a.display_every_s, self.display_every_s);
        if self.write_key.is_some() {
            a.write_key = self.write_key;
        }
        if self.server.is_some() {
            a.server = self.server;
        }
        set(&mut a.queue_capacity, self.queue_capacity);
        let f: &mut FieldMap = &mut a.fields;
        set(&mut f.distance_cm, self.field_distance);
        set(&mut f.temperature_c, self.field_temperature);
        set(&mut f.humidity_pct, self.field_humidity);
        set(&mut f.mode, self.field_mode);
        set(&mut f.alert, self.field_alert);

        let any_profile_key = self.user_id.is_some()
            || self.pin.is_some()
            || self.preferred_temp.is_some()
            || self.preference_mode.is_some();
        if any_profile_key {
            let user_id = self
                .user_id
                .ok_or_else(|| ConfigError::Profile("user_id missing".into()))?;
            let pin = self
                .pin
                .ok_or_else(|| ConfigError::Profile("pin missing".into()))?
                .parse()?;
            let preference_mode = match self.preference_mode {
                Some(m) => m.parse()?,
                None => PreferenceMode::Auto,
            };
            cfg.profile = Some(UserProfile {
                user_id,
                pin,
                preferred_temp: self.preferred_temp,
                preference_mode,
            });
        }
        Ok(cfg)
    }
}
