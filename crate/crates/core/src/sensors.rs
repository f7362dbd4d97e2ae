//! Virtual models of the ultrasonic, temperature/humidity, sound and gesture
//! sensors. Each model turns the ground-truth [`EnvironmentState`] into the
//! reading the physical part would report.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Speed of sound at 20 °C, in centimetres per microsecond.
pub const SPEED_OF_SOUND_CM_PER_US: f64 = 0.0343;

/// Height of the body profile presented to the ultrasonic beams by a standing person.
pub const STANDING_PROFILE_CM: f64 = 170.0;
/// Height of the body profile presented by a person lying on the floor.
pub const FALLEN_PROFILE_CM: f64 = 40.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("{field} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid ultrasonic config for {sensor}: {reason}")]
    InvalidConfig { sensor: SensorId, reason: String },
    #[error("unknown gesture code `{0}`")]
    UnknownGesture(String),
}

/// Identifier of one physical sensor on the shower pole or in the room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SensorId(pub u8);

impl SensorId {
    /// Upper ultrasonic sensor; drives shower occupancy.
    pub const ULTRASONIC_1: SensorId = SensorId(1);
    pub const ULTRASONIC_2: SensorId = SensorId(2);
    /// Floor-level ultrasonic sensor.
    pub const ULTRASONIC_3: SensorId = SensorId(3);
    pub const TEMP_HUMIDITY: SensorId = SensorId(10);
    pub const SOUND: SensorId = SensorId(20);
    pub const GESTURE: SensorId = SensorId(30);
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SensorId::ULTRASONIC_1 => f.write_str("ultrasonic-1"),
            SensorId::ULTRASONIC_2 => f.write_str("ultrasonic-2"),
            SensorId::ULTRASONIC_3 => f.write_str("ultrasonic-3"),
            SensorId::TEMP_HUMIDITY => f.write_str("temp-humidity"),
            SensorId::SOUND => f.write_str("sound"),
            SensorId::GESTURE => f.write_str("gesture"),
            SensorId(other) => write!(f, "sensor-{other}"),
        }
    }
}

/// The nine gestures the gesture sensor recognises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GestureCode {
    Up,
    Down,
    Right,
    Left,
    Forward,
    Backward,
    Clockwise,
    Anticlockwise,
    Wave,
}

impl GestureCode {
    pub const ALL: [GestureCode; 9] = [
        GestureCode::Up,
        GestureCode::Down,
        GestureCode::Right,
        GestureCode::Left,
        GestureCode::Forward,
        GestureCode::Backward,
        GestureCode::Clockwise,
        GestureCode::Anticlockwise,
        GestureCode::Wave,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GestureCode::Up => "up",
            GestureCode::Down => "down",
            GestureCode::Right => "right",
            GestureCode::Left => "left",
            GestureCode::Forward => "forward",
            GestureCode::Backward => "backward",
            GestureCode::Clockwise => "clockwise",
            GestureCode::Anticlockwise => "anticlockwise",
            GestureCode::Wave => "wave",
        }
    }
}

impl fmt::Display for GestureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GestureCode {
    type Err = SensorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GestureCode::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| SensorError::UnknownGesture(s.to_string()))
    }
}

/// Where the patron is, if anywhere. Distances are centimetres from the sensor pole.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Presence<T> {
    #[default]
    Absent,
    Standing(T),
    Fallen(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pose {
    Absent,
    Standing,
    Fallen,
}

impl<T: Scalar> Presence<T> {
    pub fn pose(&self) -> Pose {
        match self {
            Presence::Absent => Pose::Absent,
            Presence::Standing(_) => Pose::Standing,
            Presence::Fallen(_) => Pose::Fallen,
        }
    }

    pub fn distance(&self) -> Option<T> {
        match *self {
            Presence::Absent => None,
            Presence::Standing(d) | Presence::Fallen(d) => Some(d),
        }
    }

    /// Height of the body profile a horizontal beam can hit.
    fn profile_height(&self) -> Option<T> {
        match self {
            Presence::Absent => None,
            Presence::Standing(_) => Some(T::lit(STANDING_PROFILE_CM)),
            Presence::Fallen(_) => Some(T::lit(FALLEN_PROFILE_CM)),
        }
    }
}

/// Ground truth of the bathroom at one simulation instant.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentState<T> {
    pub sim_time: f64,
    pub ambient_temp: T,
    pub ambient_humidity: T,
    pub person: Presence<T>,
    /// Unitless loudness in `[0, 1]`.
    pub sound_intensity: T,
    pub pending_gesture: Option<GestureCode>,
}

impl<T: Scalar> Default for EnvironmentState<T> {
    fn default() -> Self {
        EnvironmentState {
            sim_time: 0.0,
            ambient_temp: T::lit(20.0),
            ambient_humidity: T::lit(50.0),
            person: Presence::Absent,
            sound_intensity: T::zero(),
            pending_gesture: None,
        }
    }
}

fn check_range<T: Scalar>(
    field: &'static str,
    value: T,
    min: f64,
    max: f64,
) -> Result<(), SensorError> {
    let v = value.to_f64_lossy();
    // NaN fails both comparisons and is rejected.
    if v >= min && v <= max {
        Ok(())
    } else {
        Err(SensorError::OutOfRange {
            field,
            value: v,
            min,
            max,
        })
    }
}

impl<T: Scalar> EnvironmentState<T> {
    pub fn validate(&self) -> Result<(), SensorError> {
        check_range("ambient_humidity", self.ambient_humidity, 0.0, 100.0)?;
        check_range("sound_intensity", self.sound_intensity, 0.0, 1.0)?;
        if !self.ambient_temp.is_finite() {
            return Err(SensorError::OutOfRange {
                field: "ambient_temp",
                value: self.ambient_temp.to_f64_lossy(),
                min: f64::MIN,
                max: f64::MAX,
            });
        }
        if let Some(d) = self.person.distance() {
            check_range("person_distance", d, 0.0, 600.0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Ultrasonic,
    TempHumidity,
    Sound,
    Gesture,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReadingValue<T> {
    Distance(T),
    /// Quantised to whole degrees and whole percent.
    TempHumidity {
        temp_c: i32,
        humidity_pct: i32,
    },
    Sound(u8),
    Gesture(Option<GestureCode>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading<T> {
    pub sensor_id: SensorId,
    pub timestamp: f64,
    pub value: ReadingValue<T>,
}

impl<T: Scalar> SensorReading<T> {
    pub fn kind(&self) -> SensorKind {
        match self.value {
            ReadingValue::Distance(_) => SensorKind::Ultrasonic,
            ReadingValue::TempHumidity { .. } => SensorKind::TempHumidity,
            ReadingValue::Sound(_) => SensorKind::Sound,
            ReadingValue::Gesture(_) => SensorKind::Gesture,
        }
    }

    pub fn distance(&self) -> Option<T> {
        match self.value {
            ReadingValue::Distance(d) => Some(d),
            _ => None,
        }
    }

    pub fn temp_humidity(&self) -> Option<(i32, i32)> {
        match self.value {
            ReadingValue::TempHumidity {
                temp_c,
                humidity_pct,
            } => Some((temp_c, humidity_pct)),
            _ => None,
        }
    }
}

/// Mounting and range of one ultrasonic ranger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltrasonicConfig<T> {
    pub sensor_id: SensorId,
    /// Centimetres above the floor.
    pub mount_height: T,
    pub min_range: T,
    pub max_range: T,
    /// Standard deviation of additive Gaussian noise, cm. Zero disables noise.
    pub noise_sigma: T,
}

impl<T: Scalar> UltrasonicConfig<T> {
    pub fn new(sensor_id: SensorId, mount_height: T) -> Self {
        UltrasonicConfig {
            sensor_id,
            mount_height,
            min_range: T::lit(20.0),
            max_range: T::lit(600.0),
            noise_sigma: T::zero(),
        }
    }

    /// The three pole sensors at head, torso and floor height.
    pub fn pole() -> [Self; 3] {
        [
            Self::new(SensorId::ULTRASONIC_1, T::lit(150.0)),
            Self::new(SensorId::ULTRASONIC_2, T::lit(90.0)),
            Self::new(SensorId::ULTRASONIC_3, T::lit(30.0)),
        ]
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let invalid = |reason: &str| SensorError::InvalidConfig {
            sensor: self.sensor_id,
            reason: reason.to_string(),
        };
        if self.min_range.partial_cmp(&self.max_range) != Some(std::cmp::Ordering::Less) {
            return Err(invalid("min_range must be below max_range"));
        }
        if !matches!(
            self.noise_sigma.partial_cmp(&T::zero()),
            Some(std::cmp::Ordering::Greater | std::cmp::Ordering::Equal)
        ) {
            return Err(invalid("noise_sigma must be non-negative"));
        }
        if !self.mount_height.is_finite() {
            return Err(invalid("mount_height must be finite"));
        }
        Ok(())
    }

    /// True when a horizontal beam at this sensor's height hits the patron.
    pub fn intersects(&self, person: &Presence<T>) -> bool {
        person
            .profile_height()
            .is_some_and(|height| self.mount_height <= height)
    }
}

/// Converts a round-trip echo time to a one-way distance.
pub fn time_of_flight_to_distance<T: Scalar>(echo_time_us: T) -> T {
    echo_time_us * T::lit(SPEED_OF_SOUND_CM_PER_US) / T::lit(2.0)
}

/// One ultrasonic ranging. A beam that hits nothing reports `max_range`.
pub fn ultrasonic_measure<T: Scalar, R: Rng + ?Sized>(
    env: &EnvironmentState<T>,
    cfg: &UltrasonicConfig<T>,
    rng: &mut R,
) -> SensorReading<T> {
    let distance = match env.person.distance() {
        Some(true_distance) if cfg.intersects(&env.person) => {
            let noisy = if cfg.noise_sigma > T::zero() {
                let sigma = cfg.noise_sigma.to_f64_lossy();
                let normal = Normal::new(0.0, sigma).expect("sigma validated non-negative");
                true_distance + T::lit(normal.sample(rng))
            } else {
                true_distance
            };
            noisy.max(cfg.min_range).min(cfg.max_range)
        }
        _ => cfg.max_range,
    };
    SensorReading {
        sensor_id: cfg.sensor_id,
        timestamp: env.sim_time,
        value: ReadingValue::Distance(distance),
    }
}

/// DHT-class reading: integer degrees and integer percent, ties rounded up.
pub fn dht_measure<T: Scalar>(env: &EnvironmentState<T>) -> SensorReading<T> {
    let quantise = |v: T| v.round_half_up().to_i32().unwrap_or(0);
    SensorReading {
        sensor_id: SensorId::TEMP_HUMIDITY,
        timestamp: env.sim_time,
        value: ReadingValue::TempHumidity {
            temp_c: quantise(env.ambient_temp),
            humidity_pct: quantise(env.ambient_humidity),
        },
    }
}

/// Binary sound output: `1` iff the intensity is strictly above `threshold`.
pub fn sound_sample<T: Scalar>(env: &EnvironmentState<T>, threshold: T) -> u8 {
    u8::from(env.sound_intensity > threshold)
}

/// Takes the pending gesture, if any. Each gesture is delivered once.
pub fn gesture_poll<T>(env: &mut EnvironmentState<T>) -> Option<GestureCode> {
    env.pending_gesture.take()
}
