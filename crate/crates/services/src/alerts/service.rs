use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use serde_json::{json, Value};
use smartbag_core::nn::{NnError, TrainedModel};
use thiserror::Error;

use super::alarm::{alarm_status, AlarmError, AlarmState};
use super::rules::{eval_rules, AlertEvent, AlertKind, AlertRuleSet, DedupState, Severity};
use super::sink::{deliver_all, AlertSink};
use crate::client::{ClientError, StoreClient};
use crate::clock::{sleep_or_stop, Clock};
use crate::paths;
use crate::record::TelemetryRecord;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("record does not match the telemetry schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] NnError),
}

/// Classifies a stored telemetry document with the model's own normalizer.
/// Returns the class name and the class probabilities.
pub fn classify_record(
    model: &TrainedModel,
    record: &Value,
) -> Result<(String, Vec<f64>), ClassifyError> {
    let record =
        TelemetryRecord::from_json(record).map_err(|e| ClassifyError::Schema(e.to_string()))?;
    let (name, prediction) = model.classify(&record.features())?;
    Ok((name.to_string(), prediction.probabilities))
}

#[derive(Debug, Error)]
pub enum AlertError {
    #[error(transparent)]
    Store(#[from] ClientError),
    #[error("persisting cursor {path}: {source}")]
    Cursor {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Per-device history cursors, persisted as a small JSON object.
#[derive(Debug, Clone, Default)]
pub struct Cursors {
    ids: BTreeMap<String, String>,
    file: Option<PathBuf>,
}

impl Cursors {
    /// Loads cursors from `file` if it exists. An unreadable file starts
    /// from the beginning, which can repeat alerts but never loses them.
    pub fn load(file: Option<PathBuf>) -> Self {
        let ids = file
            .as_deref()
            .and_then(|p| fs::read(p).ok())
            .and_then(|bytes| match serde_json::from_slice(&bytes) {
                Ok(ids) => Some(ids),
                Err(e) => {
                    tracing::warn!(error = %e, "ignoring unreadable cursor file");
                    None
                }
            })
            .unwrap_or_default();
        Self { ids, file }
    }

    pub fn get(&self, device: &str) -> Option<&str> {
        self.ids.get(device).map(String::as_str)
    }

    /// Records the cursor and writes the file atomically (temp file, fsync,
    /// rename).
    pub fn advance(&mut self, device: &str, id: &str) -> Result<(), AlertError> {
        self.ids.insert(device.to_string(), id.to_string());
        let Some(path) = &self.file else {
            return Ok(());
        };
        write_atomic(
            path,
            &serde_json::to_vec(&self.ids).expect("cursor map serializes"),
        )
        .map_err(|source| AlertError::Cursor {
            path: path.clone(),
            source,
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlertStats {
    pub processed: u64,
    pub malformed: u64,
    pub events: u64,
    pub delivery_failures: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PollReport {
    pub processed: usize,
    pub malformed: usize,
    pub events: Vec<AlertEvent>,
}

pub struct AlertSettings {
    pub devices: Vec<String>,
    pub rules: AlertRuleSet,
    pub batch_limit: usize,
    pub alarm_ttl_ms: u64,
}

pub struct AlertService<C: StoreClient> {
    client: C,
    model: TrainedModel,
    settings: AlertSettings,
    sinks: Vec<Arc<dyn AlertSink>>,
    dedup: DedupState,
    cursors: Cursors,
    warned_alarms: HashSet<(String, u64)>,
    stats: AlertStats,
}

impl<C: StoreClient> AlertService<C> {
    pub fn new(
        client: C,
        model: TrainedModel,
        settings: AlertSettings,
        sinks: Vec<Arc<dyn AlertSink>>,
        cursors: Cursors,
    ) -> Self {
        Self {
            client,
            model,
            settings,
            sinks,
            dedup: DedupState::default(),
            cursors,
            warned_alarms: HashSet::new(),
            stats: AlertStats::default(),
        }
    }

    pub fn stats(&self) -> AlertStats {
        self.stats
    }

    pub fn cursor(&self, device: &str) -> Option<&str> {
        self.cursors.get(device)
    }

    fn emit(&mut self, event: AlertEvent, report: &mut PollReport) {
        tracing::info!(device = %event.device, kind = %event.kind, severity = %event.severity, "{}", event.message);
        self.stats.delivery_failures += deliver_all(&self.sinks, &event) as u64;
        self.stats.events += 1;
        report.events.push(event);
    }

    /// Processes everything new in each device's history, then checks alarm
    /// commands for an expired TTL. Each entry is classified, labelled in the
    /// store and evaluated before the cursor moves past it.
    pub fn poll_once(&mut self, now_ms: u64) -> Result<PollReport, AlertError> {
        let mut report = PollReport::default();
        for device in self.settings.devices.clone() {
            let path = paths::history(&device);
            let entries = self.client.history(
                &path,
                self.cursors.get(&device),
                Some(self.settings.batch_limit),
            )?;
            for entry in entries {
                match classify_record(&self.model, &entry.data) {
                    Ok((activity, _)) => {
                        let record = TelemetryRecord::from_json(&entry.data)
                            .expect("classified records parse");
                        self.client.patch(
                            &paths::history_entry(&device, &entry.id),
                            &json!({ "activity": activity }),
                        )?;
                        for event in eval_rules(
                            &record,
                            Some(&activity),
                            &self.settings.rules,
                            &mut self.dedup,
                        ) {
                            self.emit(event, &mut report);
                        }
                        report.processed += 1;
                        self.stats.processed += 1;
                    }
                    Err(e) => {
                        tracing::warn!(%device, id = %entry.id, error = %e, "skipping malformed record");
                        report.malformed += 1;
                        self.stats.malformed += 1;
                    }
                }
                self.cursors.advance(&device, &entry.id)?;
            }
            self.check_alarm(&device, now_ms, &mut report)?;
        }
        Ok(report)
    }

    fn check_alarm(
        &mut self,
        device: &str,
        now_ms: u64,
        report: &mut PollReport,
    ) -> Result<(), AlertError> {
        let cmd = match alarm_status(&self.client, device) {
            Ok(Some(cmd)) => cmd,
            Ok(None) => return Ok(()),
            Err(AlarmError::Store(e)) => return Err(e.into()),
            Err(AlarmError::InvalidDevice(_)) => return Ok(()),
        };
        let overdue = now_ms.saturating_sub(cmd.issued_ts) > self.settings.alarm_ttl_ms;
        if cmd.state == AlarmState::Requested
            && overdue
            && self
                .warned_alarms
                .insert((device.to_string(), cmd.issued_ts))
        {
            let event = AlertEvent {
                ts: cmd.issued_ts,
                device: device.to_string(),
                kind: AlertKind::AlarmTriggered,
                severity: Severity::Warn,
                activity: None,
                message: format!(
                    "alarm command not acknowledged within {} ms",
                    self.settings.alarm_ttl_ms
                ),
            };
            self.emit(event, report);
        }
        Ok(())
    }
}

/// Polls until `stop` is set. Store errors back off exponentially up to 30 s
/// and are never fatal.
pub fn run_alertsvc<C: StoreClient>(
    service: &mut AlertService<C>,
    clock: &dyn Clock,
    poll_interval_ms: u64,
    stop: &AtomicBool,
) {
    const MAX_BACKOFF_MS: u64 = 30_000;
    let mut delay = poll_interval_ms;
    loop {
        match service.poll_once(clock.now_ms()) {
            Ok(report) => {
                if report.processed + report.malformed > 0 {
                    tracing::debug!(
                        processed = report.processed,
                        malformed = report.malformed,
                        "poll"
                    );
                }
                delay = poll_interval_ms;
            }
            Err(e) => {
                delay = (delay * 2).min(MAX_BACKOFF_MS).max(poll_interval_ms);
                tracing::warn!(error = %e, retry_ms = delay, "poll failed");
            }
        }
        if !sleep_or_stop(clock, delay, stop) {
            break;
        }
    }
}
