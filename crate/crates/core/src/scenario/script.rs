//! Line-oriented scenario scripts.
//!
//! ```text
//! # hair dryer next to the outdoor sensor
//! at 0 env temp=23 humidity=15
//! at 0 person enter distance=30
//! at 60 env temp=25
//! at 120 end
//! ```
//!
//! Each line is `at <seconds> <kind> [<word>] [<key>=<value>]...`. Kinds are
//! `env`, `person` (`enter`, `move`, `fall`, `leave`), `gesture`, `sound` and
//! `end`. `#` starts a comment.

use std::fmt;

use thiserror::Error;

use crate::sensors::GestureCode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("scenario has no `end` event")]
    MissingEnd,
}

impl ScenarioError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ScenarioError::Parse { line, .. } | ScenarioError::Validation { line, .. } => {
                Some(*line)
            }
            ScenarioError::MissingEnd => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PersonAction {
    Enter {
        distance: f64,
    },
    Move {
        distance: f64,
    },
    /// Drops to the floor, optionally at a new distance from the pole.
    Fall {
        distance: Option<f64>,
    },
    Leave,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Env {
        temp: Option<f64>,
        humidity: Option<f64>,
    },
    Person(PersonAction),
    Gesture(GestureCode),
    Sound {
        intensity: f64,
    },
    End,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioEvent {
    pub at: f64,
    pub kind: EventKind,
}

impl fmt::Display for ScenarioEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {} ", self.at)?;
        match self.kind {
            EventKind::Env { temp, humidity } => {
                f.write_str("env")?;
                if let Some(t) = temp {
                    write!(f, " temp={t}")?;
                }
                if let Some(h) = humidity {
                    write!(f, " humidity={h}")?;
                }
                Ok(())
            }
            EventKind::Person(PersonAction::Enter { distance }) => {
                write!(f, "person enter distance={distance}")
            }
            EventKind::Person(PersonAction::Move { distance }) => {
                write!(f, "person move distance={distance}")
            }
            EventKind::Person(PersonAction::Fall { distance: None }) => f.write_str("person fall"),
            EventKind::Person(PersonAction::Fall { distance: Some(d) }) => {
                write!(f, "person fall distance={d}")
            }
            EventKind::Person(PersonAction::Leave) => f.write_str("person leave"),
            EventKind::Gesture(code) => write!(f, "gesture code={code}"),
            EventKind::Sound { intensity } => write!(f, "sound intensity={intensity}"),
            EventKind::End => f.write_str("end"),
        }
    }
}

/// Prints events back to script form, one per line.
pub fn print_scenario(events: &[ScenarioEvent]) -> String {
    events.iter().map(|e| format!("{e}\n")).collect()
}

struct LineParser<'a> {
    line: usize,
    args: Vec<(&'a str, &'a str)>,
}

impl<'a> LineParser<'a> {
    fn err(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn invalid(&self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Validation {
            line: self.line,
            message: message.into(),
        }
    }

    fn new(line: usize, words: &[&'a str]) -> Result<Self, ScenarioError> {
        let args = words
            .iter()
            .map(|w| {
                w.split_once('=')
                    .filter(|(k, v)| !k.is_empty() && !v.is_empty())
                    .ok_or_else(|| ScenarioError::Parse {
                        line,
                        message: format!("expected key=value, got `{w}`"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LineParser { line, args })
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        let pos = self.args.iter().position(|(k, _)| *k == key)?;
        Some(self.args.remove(pos).1)
    }

    fn number(&mut self, key: &str, min: f64, max: f64) -> Result<Option<f64>, ScenarioError> {
        let Some(raw) = self.take(key) else {
            return Ok(None);
        };
        let value: f64 = raw
            .parse()
            .map_err(|_| self.err(format!("{key}: `{raw}` is not a number")))?;
        if !(value >= min && value <= max) {
            return Err(self.invalid(format!("{key}={value} outside [{min}, {max}]")));
        }
        Ok(Some(value))
    }

    fn required(&mut self, key: &str, min: f64, max: f64) -> Result<f64, ScenarioError> {
        self.number(key, min, max)?
            .ok_or_else(|| self.err(format!("missing {key}=")))
    }

    fn finish(self) -> Result<(), ScenarioError> {
        match self.args.first() {
            Some((k, _)) => Err(self.err(format!("unexpected key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn parse_line(line_no: usize, text: &str) -> Result<ScenarioEvent, ScenarioError> {
    let perr = |message: String| ScenarioError::Parse {
        line: line_no,
        message,
    };
    let words: Vec<&str> = text.split_whitespace().collect();
    let (at_raw, kind, rest) = match words.as_slice() {
        ["at", at, kind, rest @ ..] => (*at, *kind, rest),
        _ => return Err(perr("expected `at <seconds> <kind> ...`".into())),
    };
    let at: f64 = at_raw
        .parse()
        .map_err(|_| perr(format!("`{at_raw}` is not a time in seconds")))?;
    if !(at.is_finite() && at >= 0.0) {
        return Err(ScenarioError::Validation {
            line: line_no,
            message: format!("time {at} must be non-negative"),
        });
    }

    let kind = match kind {
        "env" => {
            let mut p = LineParser::new(line_no, rest)?;
            let temp = p.number("temp", -60.0, 80.0)?;
            let humidity = p.number("humidity", 0.0, 100.0)?;
            if temp.is_none() && humidity.is_none() {
                return Err(p.err("env needs temp= and/or humidity="));
            }
            p.finish()?;
            EventKind::Env { temp, humidity }
        }
        "person" => {
            let (action, rest) = rest
                .split_first()
                .ok_or_else(|| perr("person needs enter, move, fall or leave".into()))?;
            let mut p = LineParser::new(line_no, rest)?;
            let action = match *action {
                "enter" => PersonAction::Enter {
                    distance: p.required("distance", 0.0, 600.0)?,
                },
                "move" => PersonAction::Move {
                    distance: p.required("distance", 0.0, 600.0)?,
                },
                "fall" => PersonAction::Fall {
                    distance: p.number("distance", 0.0, 600.0)?,
                },
                "leave" => PersonAction::Leave,
                other => return Err(p.err(format!("unknown person action `{other}`"))),
            };
            p.finish()?;
            EventKind::Person(action)
        }
        "gesture" => {
            let mut p = LineParser::new(line_no, rest)?;
            let raw = p.take("code").ok_or_else(|| p.err("missing code="))?;
            let code = raw.parse().map_err(|e| p.err(format!("{e}")))?;
            p.finish()?;
            EventKind::Gesture(code)
        }
        "sound" => {
            let mut p = LineParser::new(line_no, rest)?;
            let intensity = p.required("intensity", 0.0, 1.0)?;
            p.finish()?;
            EventKind::Sound { intensity }
        }
        "end" => {
            LineParser::new(line_no, rest)?.finish()?;
            EventKind::End
        }
        other => return Err(perr(format!("unknown event kind `{other}`"))),
    };
    Ok(ScenarioEvent { at, kind })
}

/// Parses and validates a scenario. Times must not decrease and exactly one
/// `end` must close the script.
pub fn parse_scenario(text: &str) -> Result<Vec<ScenarioEvent>, ScenarioError> {
    let mut events: Vec<ScenarioEvent> = Vec::new();
    let mut end_line = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
        if content.is_empty() {
            continue;
        }
        let event = parse_line(line_no, content)?;
        if let Some(end) = end_line {
            return Err(ScenarioError::Validation {
                line: line_no,
                message: format!("event after `end` on line {end}"),
            });
        }
        if let Some(prev) = events.last() {
            if event.at < prev.at {
                return Err(ScenarioError::Validation {
                    line: line_no,
                    message: format!("time goes backward ({} after {})", event.at, prev.at),
                });
            }
        }
        if event.kind == EventKind::End {
            end_line = Some(line_no);
        }
        events.push(event);
    }
    if end_line.is_none() {
        return Err(ScenarioError::MissingEnd);
    }
    Ok(events)
}
