//! HTTP front end over [`Store`].
//!
//! Parameters are accepted in the query string or, for `POST`, as an
//! `application/x-www-form-urlencoded` body; body values win on conflict.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Map, Value};
use tokio::sync::oneshot;

use crate::model::{Entry, FieldValue, Visibility, MAX_FIELDS};
use crate::store::{NewChannel, ReadAccess, Store, StoreError};

/// Feed length when `results` is not given.
pub const DEFAULT_RESULTS: usize = 100;

type Params = HashMap<String, Vec<String>>;

fn parse_params(query: Option<&str>, body: &[u8]) -> Params {
    let mut params: Params = HashMap::new();
    let query = url::form_urlencoded::parse(query.unwrap_or_default().as_bytes());
    for (k, v) in query.chain(url::form_urlencoded::parse(body)) {
        params
            .entry(k.into_owned())
            .or_default()
            .push(v.into_owned());
    }
    params
}

fn last<'a>(params: &'a Params, key: &str) -> Option<&'a str> {
    params.get(key).and_then(|v| v.last()).map(String::as_str)
}

struct ApiError(StoreError);

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError(e)
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(StoreError::Validation(message.into()))
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            StoreError::Validation(_) => StatusCode::BAD_REQUEST,
            StoreError::Unauthorized => StatusCode::UNAUTHORIZED,
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Io { .. } | StoreError::Corrupt { .. } => {
                log::error!("{}", self.0);
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (status, self.0.to_string()).into_response()
    }
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/update", get(update).post(update))
        .route("/channels", post(create_channel))
        .route("/channels/{id}/feeds.json", get(feeds))
        .route("/channels/{id}/fields/{k}/last.txt", get(last_field))
        .with_state(store)
}

async fn update(
    State(store): State<Arc<Store>>,
    RawQuery(query): RawQuery,
    body: Bytes,
) -> Result<String, ApiError> {
    let params = parse_params(query.as_deref(), &body);
    let key = last(&params, "api_key").ok_or(ApiError(StoreError::Unauthorized))?;
    let mut values = BTreeMap::new();
    for pos in 1..=MAX_FIELDS as u8 {
        if let Some(raw) = last(&params, &format!("field{pos}")) {
            values.insert(pos, FieldValue::parse(raw));
        }
    }
    let created_at = match last(&params, "created_at") {
        Some(raw) => Some(
            raw.trim()
                .parse::<f64>()
                .map_err(|_| bad_request(format!("created_at `{raw}` is not a number")))?,
        ),
        None => None,
    };
    let id = store.write_update(key, values, created_at)?;
    Ok(id.to_string())
}

async fn create_channel(
    State(store): State<Arc<Store>>,
    RawQuery(query): RawQuery,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let params = parse_params(query.as_deref(), &body);
    let name = last(&params, "name").unwrap_or("channel").to_string();
    let field_names = params.get("field").cloned().unwrap_or_default();
    let visibility = match last(&params, "visibility") {
        Some(v) => v.parse::<Visibility>().map_err(bad_request)?,
        None => Visibility::Private,
    };
    let min_post_interval_s = match last(&params, "min_post_interval_s") {
        Some(raw) => raw
            .parse::<f64>()
            .map_err(|_| bad_request(format!("min_post_interval_s `{raw}` is not a number")))?,
        None => 1.0,
    };
    let request = NewChannel {
        name,
        field_names,
        visibility,
        shared_with: params.get("shared_with").cloned().unwrap_or_default(),
        min_post_interval_s,
    };
    let channel = store.create_channel(request)?;
    log::info!("created channel {} ({})", channel.id, channel.name);
    Ok(Json(json!({
        "channel_id": channel.id,
        "write_key": channel.write_key,
        "read_key": channel.read_key,
    })))
}

fn field_json(value: &FieldValue) -> Value {
    match value {
        FieldValue::Number(v) => json!(v),
        FieldValue::Text(s) => json!(s),
    }
}

fn entry_json(entry: &Entry) -> Value {
    let mut obj = Map::new();
    obj.insert("created_at".into(), json!(entry.created_at));
    obj.insert("entry_id".into(), json!(entry.entry_id));
    for (pos, value) in &entry.values {
        obj.insert(format!("field{pos}"), field_json(value));
    }
    Value::Object(obj)
}

fn access(params: &Params) -> ReadAccess<'_> {
    ReadAccess {
        api_key: last(params, "api_key"),
        user: last(params, "user"),
    }
}

async fn feeds(
    State(store): State<Arc<Store>>,
    Path(id): Path<u64>,
    RawQuery(query): RawQuery,
) -> Result<Json<Value>, ApiError> {
    let params = parse_params(query.as_deref(), &[]);
    let results = match last(&params, "results") {
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| bad_request(format!("results `{raw}` is not a positive integer")))?,
        None => DEFAULT_RESULTS,
    };
    let entries = store.read_feed(id, access(&params), results)?;
    let channel = store.channel(id)?;
    let mut meta = Map::new();
    meta.insert("id".into(), json!(channel.id));
    meta.insert("name".into(), json!(channel.name));
    for (i, name) in channel.field_names.iter().enumerate() {
        meta.insert(format!("field{}", i + 1), json!(name));
    }
    meta.insert("last_entry_id".into(), json!(store.entry_count(id)?));
    Ok(Json(json!({
        "channel": meta,
        "feeds": entries.iter().map(entry_json).collect::<Vec<_>>(),
    })))
}

async fn last_field(
    State(store): State<Arc<Store>>,
    Path((id, k)): Path<(u64, u8)>,
    RawQuery(query): RawQuery,
) -> Result<Response, ApiError> {
    let params = parse_params(query.as_deref(), &[]);
    Ok(match store.read_last_field(id, access(&params), k)? {
        Some(value) => value.to_string().into_response(),
        None => (StatusCode::NOT_FOUND, String::new()).into_response(),
    })
}

/// A server running on its own thread and runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn spawn(store: Arc<Store>, addr: SocketAddr) -> std::io::Result<ServerHandle> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name(format!("telemetry-{addr}"))
            .spawn(move || {
                let result = runtime.block_on(async move {
                    axum::serve(listener, router(store))
                        .with_graceful_shutdown(async {
                            let _ = rx.await;
                        })
                        .await
                });
                if let Err(e) = result {
                    log::error!("telemetry server on {addr} stopped: {e}");
                }
                runtime.shutdown_background();
            })?;
        Ok(ServerHandle {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for the server thread.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}
