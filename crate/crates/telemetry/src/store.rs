//! Channel store: keyed channels, sequenced entries, post pacing and
//! durable append-only storage.
//!
//! Writes to one channel are serialised by that channel's lock, so entry ids
//! are gapless in arrival order. Reads take the same lock shared and copy out
//! a prefix of the entry list. Channel creation holds the index lock, which
//! also guards key uniqueness.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::model::{Channel, Entry, FieldValue, Visibility, KEY_LEN, MAX_FIELDS, MAX_TEXT_LEN};
use crate::persist::{self, AppendLog, SyncMode};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0}")]
    Validation(String),
    #[error("invalid key")]
    Unauthorized,
    #[error("channel {0} not found")]
    NotFound(u64),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

/// Where `created_at` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    /// Server wall clock, seconds since the Unix epoch. Client values are ignored.
    #[default]
    Wall,
    /// Client-supplied simulation time; required on every write.
    Simulated,
}

#[derive(Debug, Clone, Default)]
pub struct StoreOptions {
    pub clock: Clock,
    pub sync: SyncMode,
    /// Seed for API key generation; random when unset.
    pub key_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct NewChannel {
    pub name: String,
    pub field_names: Vec<String>,
    pub visibility: Visibility,
    pub shared_with: Vec<String>,
    pub min_post_interval_s: f64,
}

impl NewChannel {
    pub fn new(name: &str, field_names: &[&str], visibility: Visibility) -> Self {
        NewChannel {
            name: name.to_string(),
            field_names: field_names.iter().map(|s| s.to_string()).collect(),
            visibility,
            shared_with: Vec::new(),
            min_post_interval_s: 1.0,
        }
    }

    pub fn min_post_interval(mut self, seconds: f64) -> Self {
        self.min_post_interval_s = seconds;
        self
    }

    pub fn shared_with(mut self, users: &[&str]) -> Self {
        self.shared_with = users.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// Credentials presented on a read.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReadAccess<'a> {
    pub api_key: Option<&'a str>,
    /// Identifier from a shared channel's `shared_with` list.
    pub user: Option<&'a str>,
}

impl<'a> ReadAccess<'a> {
    pub fn key(api_key: &'a str) -> Self {
        ReadAccess {
            api_key: Some(api_key),
            user: None,
        }
    }
}

#[derive(Debug)]
struct ChannelData {
    entries: Vec<Entry>,
    log: Option<AppendLog>,
}

#[derive(Debug)]
struct Slot {
    meta: Channel,
    data: RwLock<ChannelData>,
}

#[derive(Debug, Default)]
struct Index {
    channels: BTreeMap<u64, Arc<Slot>>,
    by_write_key: HashMap<String, u64>,
    keys_in_use: std::collections::HashSet<String>,
    meta_log: Option<AppendLog>,
}

#[derive(Debug)]
pub struct Store {
    index: RwLock<Index>,
    data_dir: Option<PathBuf>,
    options: StoreOptions,
    rng: Mutex<StdRng>,
}

fn wall_clock() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Slack for the pacing comparison.
const PACING_EPSILON: f64 = 1e-9;

impl Store {
    /// A store with no backing directory.
    pub fn in_memory(options: StoreOptions) -> Self {
        Store::build(None, options)
    }

    fn build(data_dir: Option<PathBuf>, options: StoreOptions) -> Self {
        let rng = match options.key_seed {
            Some(seed) => StdRng::seed_from_u64(seed),
            None => StdRng::from_os_rng(),
        };
        Store {
            index: RwLock::new(Index::default()),
            data_dir,
            options,
            rng: Mutex::new(rng),
        }
    }

    /// Opens `data_dir`, replaying its logs. A missing or empty directory
    /// yields a store with no channels.
    pub fn recover(data_dir: &Path, options: StoreOptions) -> Result<Self, StoreError> {
        std::fs::create_dir_all(data_dir).map_err(|source| StoreError::Io {
            path: data_dir.to_path_buf(),
            source,
        })?;
        let store = Store::build(Some(data_dir.to_path_buf()), options);
        let sync = store.options.sync;
        let meta_path = persist::metadata_path(data_dir);
        let channels: Vec<Channel> = persist::replay(&meta_path)?;
        {
            let mut index = store.index.write();
            for meta in channels {
                let path = persist::channel_log_path(data_dir, meta.id);
                let entries: Vec<Entry> = persist::replay(&path)?;
                for (i, e) in entries.iter().enumerate() {
                    if e.entry_id != i as u64 + 1 {
                        return Err(StoreError::Corrupt {
                            path,
                            line: i + 1,
                            reason: format!("entry_id {} out of sequence", e.entry_id),
                        });
                    }
                }
                log::info!(
                    "recovered channel {} ({}) with {} entries",
                    meta.id,
                    meta.name,
                    entries.len()
                );
                index.insert(meta, entries, Some(AppendLog::open(&path, sync)?));
            }
            index.meta_log = Some(AppendLog::open(&meta_path, sync)?);
        }
        Ok(store)
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn clock(&self) -> Clock {
        self.options.clock
    }

    fn generate_key(&self, index: &Index) -> String {
        const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
        let mut rng = self.rng.lock();
        loop {
            let key: String = (0..KEY_LEN)
                .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
                .collect();
            if !index.keys_in_use.contains(&key) {
                return key;
            }
        }
    }

    /// Creates a channel with fresh keys. The channel is on disk before this returns.
    pub fn create_channel(&self, request: NewChannel) -> Result<Channel, StoreError> {
        let n = request.field_names.len();
        if !(1..=MAX_FIELDS).contains(&n) {
            return Err(StoreError::Validation(format!(
                "a channel needs 1 to {MAX_FIELDS} fields, got {n}"
            )));
        }
        if request.field_names.iter().any(|f| f.trim().is_empty()) {
            return Err(StoreError::Validation(
                "field names must not be empty".into(),
            ));
        }
        if !(request.min_post_interval_s.is_finite() && request.min_post_interval_s >= 0.0) {
            return Err(StoreError::Validation(
                "min_post_interval_s must be non-negative".into(),
            ));
        }

        let mut index = self.index.write();
        let write_key = self.generate_key(&index);
        index.keys_in_use.insert(write_key.clone());
        let read_key = self.generate_key(&index);
        index.keys_in_use.remove(&write_key);
        let id = index.channels.keys().next_back().map_or(1, |last| last + 1);
        let channel = Channel {
            id,
            name: request.name,
            write_key,
            read_key,
            field_names: request.field_names,
            visibility: request.visibility,
            shared_with: request.shared_with,
            min_post_interval_s: request.min_post_interval_s,
        };

        let log = match &self.data_dir {
            Some(dir) => {
                let log = AppendLog::open(&persist::channel_log_path(dir, id), self.options.sync)?;
                if index.meta_log.is_none() {
                    index.meta_log = Some(AppendLog::open(
                        &persist::metadata_path(dir),
                        self.options.sync,
                    )?);
                }
                if let Some(meta_log) = index.meta_log.as_mut() {
                    meta_log.append(&channel)?;
                }
                Some(log)
            }
            None => None,
        };
        index.insert(channel.clone(), Vec::new(), log);
        Ok(channel)
    }

    fn slot(&self, id: u64) -> Result<Arc<Slot>, StoreError> {
        self.index
            .read()
            .channels
            .get(&id)
            .cloned()
            .ok_or(StoreError::NotFound(id))
    }

    pub fn channel(&self, id: u64) -> Result<Channel, StoreError> {
        Ok(self.slot(id)?.meta.clone())
    }

    pub fn channels(&self) -> Vec<Channel> {
        self.index
            .read()
            .channels
            .values()
            .map(|s| s.meta.clone())
            .collect()
    }

    /// Appends an entry and returns its id, or `Ok(0)` when the write came
    /// sooner than the channel's minimum post interval (nothing is stored).
    pub fn write_update(
        &self,
        write_key: &str,
        values: BTreeMap<u8, FieldValue>,
        created_at: Option<f64>,
    ) -> Result<u64, StoreError> {
        let slot = {
            let index = self.index.read();
            let id = index
                .by_write_key
                .get(write_key)
                .ok_or(StoreError::Unauthorized)?;
            index.channels[id].clone()
        };
        let meta = &slot.meta;
        if values.is_empty() {
            return Err(StoreError::Validation(
                "an update needs at least one field".into(),
            ));
        }
        for (pos, value) in &values {
            if *pos == 0 || usize::from(*pos) > meta.field_names.len() {
                return Err(StoreError::Validation(format!(
                    "field{pos} is not defined on channel {}",
                    meta.id
                )));
            }
            if let FieldValue::Text(t) = value {
                if t.len() > MAX_TEXT_LEN {
                    return Err(StoreError::Validation(format!(
                        "field{pos} longer than {MAX_TEXT_LEN} bytes"
                    )));
                }
            }
        }
        if let (Clock::Simulated, Some(t)) = (self.options.clock, created_at) {
            if !t.is_finite() {
                return Err(StoreError::Validation("created_at must be finite".into()));
            }
        }

        let mut data = slot.data.write();
        let last = data.entries.last().map(|e| e.created_at);
        let created_at = match self.options.clock {
            Clock::Simulated => created_at.ok_or_else(|| {
                StoreError::Validation("created_at is required in simulated time".into())
            })?,
            Clock::Wall => last.map_or_else(wall_clock, |l| wall_clock().max(l)),
        };
        if let Some(last) = last {
            if created_at + PACING_EPSILON < last + meta.min_post_interval_s {
                log::debug!(
                    "channel {}: update at {created_at} too soon after {last}",
                    meta.id
                );
                return Ok(0);
            }
        }

        let entry = Entry {
            entry_id: data.entries.len() as u64 + 1,
            created_at,
            values,
        };
        if let Some(log) = data.log.as_mut() {
            log.append(&entry)?;
        }
        let id = entry.entry_id;
        data.entries.push(entry);
        Ok(id)
    }

    fn authorize(meta: &Channel, access: ReadAccess<'_>) -> Result<(), StoreError> {
        if access.api_key == Some(meta.read_key.as_str()) {
            return Ok(());
        }
        let shared_user = meta.visibility == Visibility::Shared
            && access
                .user
                .is_some_and(|u| meta.shared_with.iter().any(|s| s == u));
        if shared_user {
            Ok(())
        } else {
            Err(StoreError::Unauthorized)
        }
    }

    /// The newest `results` entries, oldest first.
    pub fn read_feed(
        &self,
        channel_id: u64,
        access: ReadAccess<'_>,
        results: usize,
    ) -> Result<Vec<Entry>, StoreError> {
        if results == 0 {
            return Err(StoreError::Validation("results must be at least 1".into()));
        }
        let slot = self.slot(channel_id)?;
        Self::authorize(&slot.meta, access)?;
        let data = slot.data.read();
        let start = data.entries.len().saturating_sub(results);
        Ok(data.entries[start..].to_vec())
    }

    /// Value of `field_position` in the newest entry that carries it.
    pub fn read_last_field(
        &self,
        channel_id: u64,
        access: ReadAccess<'_>,
        field_position: u8,
    ) -> Result<Option<FieldValue>, StoreError> {
        let slot = self.slot(channel_id)?;
        Self::authorize(&slot.meta, access)?;
        if field_position == 0 || usize::from(field_position) > slot.meta.field_names.len() {
            return Err(StoreError::Validation(format!(
                "field{field_position} is not defined on channel {channel_id}"
            )));
        }
        let data = slot.data.read();
        Ok(data
            .entries
            .iter()
            .rev()
            .find_map(|e| e.values.get(&field_position).cloned()))
    }

    pub fn entry_count(&self, channel_id: u64) -> Result<usize, StoreError> {
        Ok(self.slot(channel_id)?.data.read().entries.len())
    }
}

impl Index {
    fn insert(&mut self, meta: Channel, entries: Vec<Entry>, log: Option<AppendLog>) {
        self.by_write_key.insert(meta.write_key.clone(), meta.id);
        self.keys_in_use.insert(meta.write_key.clone());
        self.keys_in_use.insert(meta.read_key.clone());
        let id = meta.id;
        let slot = Slot {
            meta,
            data: RwLock::new(ChannelData { entries, log }),
        };
        self.channels.insert(id, Arc::new(slot));
    }
}
