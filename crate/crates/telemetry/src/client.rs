//! Blocking HTTP client for the telemetry protocol.

use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::header::CONTENT_TYPE;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;
use url::Url;

use crate::model::{Entry, FieldValue, Visibility};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid key")]
    Unauthorized,
    #[error("not found")]
    NotFound,
    #[error("server answered {status}: {body}")]
    Status { status: StatusCode, body: String },
    #[error("bad server URL: {0}")]
    Url(#[from] url::ParseError),
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl ClientError {
    /// True when the server could not be reached at all, as opposed to
    /// answering with an error.
    pub fn is_unreachable(&self) -> bool {
        matches!(self, ClientError::Transport(e) if e.is_connect() || e.is_timeout())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct CreatedChannel {
    pub channel_id: u64,
    pub write_key: String,
    pub read_key: String,
}

/// Result of a write: the entry id (0 when paced out) and the status line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteResponse {
    pub entry_id: u64,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct TelemetryClient {
    base: Url,
    http: Client,
}

fn status_line(status: StatusCode) -> String {
    format!(
        "{} {}",
        status.as_u16(),
        status.canonical_reason().unwrap_or("")
    )
    .trim_end()
    .to_string()
}

fn form_body<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut ser = url::form_urlencoded::Serializer::new(String::new());
    for (k, v) in pairs {
        ser.append_pair(k, &v);
    }
    ser.finish()
}

fn check(response: Response) -> Result<Response, ClientError> {
    match response.status() {
        s if s.is_success() => Ok(response),
        StatusCode::UNAUTHORIZED => Err(ClientError::Unauthorized),
        StatusCode::NOT_FOUND => Err(ClientError::NotFound),
        status => Err(ClientError::Status {
            status,
            body: response.text().unwrap_or_default(),
        }),
    }
}

impl TelemetryClient {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        let http = Client::builder().timeout(Duration::from_secs(10)).build()?;
        Ok(TelemetryClient {
            base: Url::parse(base_url)?,
            http,
        })
    }

    fn url(&self, path: &str) -> Result<Url, ClientError> {
        Ok(self.base.join(path)?)
    }

    fn post_form(&self, path: &str, body: String) -> Result<Response, ClientError> {
        Ok(self
            .http
            .post(self.url(path)?)
            .header(CONTENT_TYPE, "application/x-www-form-urlencoded")
            .body(body)
            .send()?)
    }

    pub fn create_channel(
        &self,
        name: &str,
        field_names: &[&str],
        visibility: Visibility,
        min_post_interval_s: Option<f64>,
    ) -> Result<CreatedChannel, ClientError> {
        let vis = match visibility {
            Visibility::Private => "private",
            Visibility::Shared => "shared",
        };
        let mut pairs = vec![("name", name.to_string()), ("visibility", vis.to_string())];
        pairs.extend(field_names.iter().map(|f| ("field", f.to_string())));
        if let Some(s) = min_post_interval_s {
            pairs.push(("min_post_interval_s", s.to_string()));
        }
        let body = check(self.post_form("channels", form_body(pairs))?)?.text()?;
        serde_json::from_str(&body).map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub fn write_update(
        &self,
        write_key: &str,
        values: &[(u8, FieldValue)],
        created_at: Option<f64>,
    ) -> Result<WriteResponse, ClientError> {
        let mut pairs = vec![("api_key", write_key.to_string())];
        let names: Vec<String> = values
            .iter()
            .map(|(pos, _)| format!("field{pos}"))
            .collect();
        pairs.extend(
            names
                .iter()
                .zip(values)
                .map(|(n, (_, v))| (n.as_str(), v.to_string())),
        );
        if let Some(t) = created_at {
            pairs.push(("created_at", t.to_string()));
        }
        let response = check(self.post_form("update", form_body(pairs))?)?;
        let status = status_line(response.status());
        let body = response.text()?;
        let entry_id = body
            .trim()
            .parse()
            .map_err(|_| ClientError::Decode(format!("entry id `{body}`")))?;
        Ok(WriteResponse { entry_id, status })
    }

    /// The newest `results` entries, oldest first.
    pub fn read_feed(
        &self,
        channel_id: u64,
        read_key: &str,
        results: usize,
    ) -> Result<Vec<Entry>, ClientError> {
        let mut url = self.url(&format!("channels/{channel_id}/feeds.json"))?;
        url.query_pairs_mut()
            .append_pair("api_key", read_key)
            .append_pair("results", &results.to_string());
        let body = check(self.http.get(url).send()?)?.text()?;
        let doc: Value =
            serde_json::from_str(&body).map_err(|e| ClientError::Decode(e.to_string()))?;
        let feeds = doc["feeds"]
            .as_array()
            .ok_or_else(|| ClientError::Decode("missing `feeds` array".into()))?;
        feeds.iter().map(entry_from_json).collect()
    }

    /// Newest value of one field, `None` when no entry carries it.
    pub fn read_last_field(
        &self,
        channel_id: u64,
        read_key: &str,
        field: u8,
    ) -> Result<Option<String>, ClientError> {
        let mut url = self.url(&format!("channels/{channel_id}/fields/{field}/last.txt"))?;
        url.query_pairs_mut().append_pair("api_key", read_key);
        match check(self.http.get(url).send()?) {
            Ok(r) => Ok(Some(r.text()?)),
            Err(ClientError::NotFound) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn entry_from_json(v: &Value) -> Result<Entry, ClientError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ClientError::Decode("feed item is not an object".into()))?;
    let entry_id = obj
        .get("entry_id")
        .and_then(Value::as_u64)
        .ok_or_else(|| ClientError::Decode("feed item without entry_id".into()))?;
    let created_at = obj
        .get("created_at")
        .and_then(Value::as_f64)
        .ok_or_else(|| ClientError::Decode("feed item without created_at".into()))?;
    let mut values = std::collections::BTreeMap::new();
    for (key, value) in obj {
        let Some(pos) = key.strip_prefix("field").and_then(|p| p.parse::<u8>().ok()) else {
            continue;
        };
        let value = match value {
            Value::Number(n) => FieldValue::Number(n.as_f64().unwrap_or(f64::NAN)),
            Value::String(s) => FieldValue::Text(s.clone()),
            other => {
                return Err(ClientError::Decode(format!(
                    "field{pos} has unexpected value {other}"
                )))
            }
        };
        values.insert(pos, value);
    }
    Ok(Entry {
        entry_id,
        created_at,
        values,
    })
}
