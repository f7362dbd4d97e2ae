//! Channel-based telemetry service.
//!
//! A channel carries up to eight fields and two API keys. Each accepted
//! update becomes an entry with the next per-channel sequence number; an
//! update that arrives sooner than the channel's minimum post interval is
//! answered with entry id 0 and not stored. Channels and entries live in
//! append-only logs under a data directory and are replayed on start.

pub mod client;
pub mod http;
pub mod model;
pub mod persist;
pub mod store;

pub use client::{ClientError, CreatedChannel, TelemetryClient, WriteResponse};
pub use http::{router, ServerHandle};
pub use model::{Channel, Entry, FieldValue, Visibility};
pub use persist::SyncMode;
pub use store::{Clock, NewChannel, ReadAccess, Store, StoreError, StoreOptions};
