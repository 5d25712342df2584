//! Path-addressed JSON document store with merge-on-PATCH documents, push-id
//! history collections and an append-only operation log replayed on open.

mod log;
mod path;
mod push_id;
mod server;
mod state;

pub use log::{decode_payload, encode_record, replay_log, LogOp, Replay, ReplayStop};
pub use path::StorePath;
pub use push_id::{format_id, parse_id, PushIdGen};
pub use server::{serve, ServerHandle};
pub use state::{merge, HistoryEntry, StoreState};

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, PoisonError, RwLock};

use serde_json::Value;
use thiserror::Error;

use crate::clock::Clock;
use state::Change;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("malformed path {0:?}")]
    BadPath(String),
    #[error("body must be a JSON object")]
    NotAnObject,
    #[error("{0} not found")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("log i/o: {0}")]
    Io(String),
    #[error("log is unusable after a failed write")]
    LogFailed,
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

struct LogWriter {
    file: File,
    len: u64,
    failed: bool,
}

impl LogWriter {
    /// Appends and fsyncs one record. A failed write is rolled back so the log
    /// never holds garbage in front of later records.
    fn write(&mut self, record: &[u8]) -> Result<(), StoreError> {
        if self.failed {
            return Err(StoreError::LogFailed);
        }
        let result = self
            .file
            .write_all(record)
            .and_then(|_| self.file.sync_data());
        match result {
            Ok(()) => {
                self.len += record.len() as u64;
                Ok(())
            }
            Err(e) => {
                let rollback = self
                    .file
                    .set_len(self.len)
                    .and_then(|_| self.file.seek(SeekFrom::Start(self.len)).map(|_| ()));
                if rollback.is_err() {
                    self.failed = true;
                }
                Err(e.into())
            }
        }
    }
}

/// What happened while opening a log.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenReport {
    pub records: usize,
    pub stop: Option<ReplayStop>,
    /// Bytes cut from the end of the log.
    pub discarded_bytes: u64,
    /// Copy of the original file, kept when an interior record was corrupt.
    pub backup: Option<PathBuf>,
}

pub struct Store {
    state: RwLock<StoreState>,
    writer: Mutex<Option<LogWriter>>,
    clock: Arc<dyn Clock>,
}

impl Store {
    /// Store without a log; nothing survives the process.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self {
            state: RwLock::new(StoreState::default()),
            writer: Mutex::new(None),
            clock,
        }
    }

    /// Opens (creating if needed) the log at `path` and replays it. A torn
    /// tail is cut off; a corrupt interior record stops replay there, the
    /// original file is backed up, and the log is cut to the valid prefix.
    pub fn open(
        path: impl AsRef<Path>,
        clock: Arc<dyn Clock>,
    ) -> Result<(Self, OpenReport), StoreError> {
        let path = path.as_ref();
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let replay = replay_log(&bytes);

        let mut backup = None;
        match replay.stop {
            Some(ReplayStop::Corrupt) => {
                let target = backup_path(path);
                fs::copy(path, &target)?;
                tracing::warn!(
                    log = %path.display(),
                    backup = %target.display(),
                    records = replay.records,
                    "corrupt log record; state restored up to it"
                );
                backup = Some(target);
            }
            Some(ReplayStop::TruncatedTail) => {
                tracing::warn!(
                    log = %path.display(),
                    bytes = bytes.len() - replay.valid_len,
                    "discarding partial record at end of log"
                );
            }
            None => {}
        }
        let valid = replay.valid_len as u64;
        if valid < bytes.len() as u64 {
            file.set_len(valid)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::Start(valid))?;

        let report = OpenReport {
            records: replay.records,
            stop: replay.stop,
            discarded_bytes: bytes.len() as u64 - valid,
            backup,
        };
        let store = Self {
            state: RwLock::new(replay.state),
            writer: Mutex::new(Some(LogWriter {
                file,
                len: valid,
                failed: false,
            })),
            clock,
        };
        Ok((store, report))
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, StoreState> {
        self.state.read().unwrap_or_else(PoisonError::into_inner)
    }

    /// Validates, logs and installs one mutation while holding the writer
    /// lock, so log order equals apply order. Readers only wait for the final
    /// install.
    fn commit<F>(&self, prepare: F) -> Result<Value, StoreError>
    where
        F: FnOnce(&StoreState) -> Result<(Change, LogOp), StoreError>,
    {
        let mut writer = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        let (change, op) = prepare(&self.read())?;
        if let Some(w) = writer.as_mut() {
            w.write(&encode_record(&op))?;
        }
        let mut state = self.state.write().unwrap_or_else(PoisonError::into_inner);
        Ok(state.apply(change))
    }

    /// Merges `doc` into the document (or history entry) at `path` and returns
    /// the merged result.
    pub fn patch(&self, path: &StorePath, doc: &Value) -> Result<Value, StoreError> {
        self.commit(|state| {
            let change = state.prepare_patch(path, doc)?;
            let op = LogOp::Patch {
                path: path.clone(),
                doc: doc.clone(),
            };
            Ok((change, op))
        })
    }

    /// Appends `doc` to the history collection at `path`; returns the push id.
    pub fn append(&self, path: &StorePath, doc: &Value) -> Result<String, StoreError> {
        let id = self.commit(|state| {
            let recv_ms = self.clock.now_ms();
            let id = state.ids.clone().next(recv_ms);
            let change = state.prepare_append(path, doc, id.clone(), recv_ms)?;
            let op = LogOp::Append {
                path: path.clone(),
                id,
                recv_ms,
                doc: doc.clone(),
            };
            Ok((change, op))
        })?;
        Ok(id.as_str().expect("append yields the push id").to_string())
    }

    pub fn get(&self, path: &StorePath) -> Option<Value> {
        self.read().get(path)
    }

    pub fn history(
        &self,
        path: &StorePath,
        since: Option<&str>,
        limit: Option<usize>,
    ) -> Vec<HistoryEntry> {
        self.read().history(path, since, limit)
    }

    pub fn is_collection(&self, path: &StorePath) -> bool {
        self.read().is_collection(path)
    }

    /// Copy of the current state.
    pub fn snapshot(&self) -> StoreState {
        self.read().clone()
    }
}

fn backup_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    (0..)
        .map(|i| path.with_file_name(format!("{name}.corrupt.{i}")))
        .find(|p| !p.exists())
        .expect("some backup name is free")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use serde_json::json;

    fn p(s: &str) -> StorePath {
        StorePath::parse(s).unwrap()
    }

    fn clock() -> Arc<dyn Clock> {
        Arc::new(ManualClock::new(1_000))
    }

    #[test]
    fn acknowledged_writes_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("store.log");
        {
            let (store, report) = Store::open(&log, clock()).unwrap();
            assert_eq!(report.records, 0);
            store
                .patch(&p("bags/B/latest"), &json!({"seq": 1}))
                .unwrap();
            store
                .append(&p("bags/B/history"), &json!({"seq": 1}))
                .unwrap();
            assert!(store.patch(&p("bags/B/latest"), &json!(3)).is_err());
        }
        let (store, report) = Store::open(&log, clock()).unwrap();
        assert_eq!((report.records, report.stop), (2, None));
        assert_eq!(store.get(&p("bags/B/latest")), Some(json!({"seq": 1})));
        assert_eq!(store.history(&p("bags/B/history"), None, None).len(), 1);
    }

    #[test]
    fn push_ids_keep_increasing_across_restart() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("store.log");
        let first = {
            let (store, _) = Store::open(&log, Arc::new(ManualClock::new(5_000))).unwrap();
            store.append(&p("h"), &json!({})).unwrap()
        };
        // Clock went backwards between runs.
        let (store, _) = Store::open(&log, Arc::new(ManualClock::new(10))).unwrap();
        let second = store.append(&p("h"), &json!({})).unwrap();
        assert!(second > first, "{second} <= {first}");
    }

    #[test]
    fn torn_tail_is_cut_and_log_stays_appendable() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("store.log");
        {
            let (store, _) = Store::open(&log, clock()).unwrap();
            store.patch(&p("d"), &json!({"a": 1})).unwrap();
            store.patch(&p("d"), &json!({"b": 2})).unwrap();
        }
        let len = fs::metadata(&log).unwrap().len();
        OpenOptions::new()
            .write(true)
            .open(&log)
            .unwrap()
            .set_len(len - 3)
            .unwrap();
        {
            let (store, report) = Store::open(&log, clock()).unwrap();
            assert_eq!(report.stop, Some(ReplayStop::TruncatedTail));
            assert!(report.backup.is_none());
            assert_eq!(store.get(&p("d")), Some(json!({"a": 1})));
            store.patch(&p("d"), &json!({"c": 3})).unwrap();
        }
        let (store, report) = Store::open(&log, clock()).unwrap();
        assert_eq!((report.records, report.stop), (2, None));
        assert_eq!(store.get(&p("d")), Some(json!({"a": 1, "c": 3})));
    }

    #[test]
    fn interior_corruption_is_backed_up() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("store.log");
        {
            let (store, _) = Store::open(&log, clock()).unwrap();
            for i in 0..3 {
                store
                    .patch(&p("d"), &json!({ format!("k{i}"): i }))
                    .unwrap();
            }
        }
        let mut bytes = fs::read(&log).unwrap();
        let first = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize + 8;
        bytes[first + 5] ^= 1;
        fs::write(&log, &bytes).unwrap();
        let (store, report) = Store::open(&log, clock()).unwrap();
        assert_eq!(
            (report.records, report.stop),
            (1, Some(ReplayStop::Corrupt))
        );
        assert_eq!(store.get(&p("d")), Some(json!({"k0": 0})));
        let backup = report.backup.unwrap();
        assert_eq!(fs::read(backup).unwrap(), bytes);
        assert_eq!(fs::metadata(&log).unwrap().len() as usize, first);
    }

    #[test]
    fn concurrent_appends_get_unique_ordered_ids() {
        let store = Arc::new(Store::in_memory(clock()));
        let handles: Vec<_> = (0..8)
            .map(|t| {
                let store = store.clone();
                std::thread::spawn(move || {
                    (0..200)
                        .map(|i| store.append(&p("h"), &json!({"t": t, "i": i})).unwrap())
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<String> = handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect();
        let stored: Vec<String> = store
            .history(&p("h"), None, None)
            .into_iter()
            .map(|e| e.id)
            .collect();
        assert_eq!(stored.len(), 1600);
        assert!(stored.windows(2).all(|w| w[0] < w[1]));
        all.sort();
        all.dedup();
        assert_eq!(all, stored);
    }
}
