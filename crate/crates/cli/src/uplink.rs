//! Transports from the device agent to a telemetry channel.

use std::collections::BTreeMap;
use std::sync::Arc;

use shower_core::agent::FieldMap;
use shower_core::{PostPayload, PostReceipt, Uplink, UplinkError};
use shower_telemetry::{
    ClientError, Clock, FieldValue, NewChannel, Store, StoreError, StoreOptions, TelemetryClient,
    Visibility,
};

const CHANNEL_NAME: &str = "shower";

fn channel_request(fields: &FieldMap) -> NewChannel {
    let mut names =
        vec![String::new(); usize::from(*fields.positions().iter().max().unwrap_or(&1))];
    for (pos, name) in fields.channel_fields() {
        names[usize::from(pos) - 1] = name.to_string();
    }
    for (i, name) in names.iter_mut().enumerate() {
        if name.is_empty() {
            *name = format!("unused{}", i + 1);
        }
    }
    NewChannel {
        name: CHANNEL_NAME.into(),
        field_names: names,
        visibility: Visibility::Private,
        shared_with: Vec::new(),
        min_post_interval_s: 1.0,
    }
}

/// Posts straight into an in-process store running on simulation time.
pub struct StoreUplink {
    store: Arc<Store>,
    write_key: String,
    pub channel_id: u64,
    pub read_key: String,
}

impl StoreUplink {
    pub fn new(fields: &FieldMap, key_seed: u64) -> Result<Self, StoreError> {
        let store = Store::in_memory(StoreOptions {
            clock: Clock::Simulated,
            key_seed: Some(key_seed),
            ..Default::default()
        });
        Self::with_store(Arc::new(store), fields)
    }

    pub fn with_store(store: Arc<Store>, fields: &FieldMap) -> Result<Self, StoreError> {
        let ch = store.create_channel(channel_request(fields))?;
        Ok(StoreUplink {
            store,
            write_key: ch.write_key,
            channel_id: ch.id,
            read_key: ch.read_key,
        })
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }
}

impl Uplink for StoreUplink {
    fn post(&mut self, payload: &PostPayload) -> Result<PostReceipt, UplinkError> {
        let values: BTreeMap<u8, FieldValue> = payload
            .fields
            .iter()
            .map(|&(pos, v)| (pos, FieldValue::Number(v)))
            .collect();
        match self
            .store
            .write_update(&self.write_key, values, Some(payload.created_at))
        {
            Ok(entry_id) => Ok(PostReceipt {
                entry_id,
                status: "200 OK".into(),
            }),
            Err(StoreError::Io { .. }) | Err(StoreError::Corrupt { .. }) => {
                Err(UplinkError::Unreachable("store unavailable".into()))
            }
            Err(e) => Err(UplinkError::Rejected(e.to_string())),
        }
    }
}

/// Posts over HTTP to a telemetry server.
pub struct HttpUplink {
    client: TelemetryClient,
    write_key: String,
}

impl HttpUplink {
    /// Uses `write_key` if given, otherwise creates a fresh channel on the server.
    pub fn connect(
        base_url: &str,
        write_key: Option<&str>,
        fields: &FieldMap,
    ) -> Result<Self, ClientError> {
        let client = TelemetryClient::new(base_url)?;
        let write_key = match write_key {
            Some(k) => k.to_string(),
            None => {
                let request = channel_request(fields);
                let names: Vec<&str> = request.field_names.iter().map(String::as_str).collect();
                let ch = client.create_channel(
                    &request.name,
                    &names,
                    request.visibility,
                    Some(request.min_post_interval_s),
                )?;
                log::info!("created channel {} on {base_url}", ch.channel_id);
                ch.write_key
            }
        };
        Ok(HttpUplink { client, write_key })
    }
}

impl Uplink for HttpUplink {
    fn post(&mut self, payload: &PostPayload) -> Result<PostReceipt, UplinkError> {
        let values: Vec<(u8, FieldValue)> = payload
            .fields
            .iter()
            .map(|&(pos, v)| (pos, FieldValue::Number(v)))
            .collect();
        match self
            .client
            .write_update(&self.write_key, &values, Some(payload.created_at))
        {
            Ok(w) => Ok(PostReceipt {
                entry_id: w.entry_id,
                status: w.status,
            }),
            Err(e) if e.is_unreachable() => Err(UplinkError::Unreachable(e.to_string())),
            Err(e) => Err(UplinkError::Rejected(e.to_string())),
        }
    }
}
