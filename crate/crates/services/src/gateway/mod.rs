//! Telemetry gateway: takes frames from a source, turns them into telemetry
//! records and pushes them to the store on a fixed period, buffering while
//! the store is unreachable.

mod sim;
mod source;

pub use sim::{SimConfig, Simulator};
pub use source::{pump, stream_lines, FrameSource, SimSource, TcpSource, TraceSource};

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, PoisonError};

use serde_json::{json, Value};
use smartbag_core::frame::{parse_frame, SensorFrame};

use crate::alerts::{deliver_all, AlertEvent, AlertKind, AlertSink, Severity};
use crate::client::{ClientError, StoreClient};
use crate::clock::{sleep_or_stop, Clock};
use crate::paths;
use crate::record::{to_record, TelemetryRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayConfig {
    pub device_id: String,
    pub period_ms: u64,
    pub capacity: usize,
    /// Poll `bags/<id>/commands` every tick and acknowledge alarms.
    pub poll_commands: bool,
}

impl GatewayConfig {
    pub const DEFAULT_PERIOD_MS: u64 = 2000;
    pub const DEFAULT_CAPACITY: usize = 1024;

    pub fn new(device_id: impl Into<String>) -> Self {
        Self {
            device_id: device_id.into(),
            period_ms: Self::DEFAULT_PERIOD_MS,
            capacity: Self::DEFAULT_CAPACITY,
            poll_commands: true,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !paths::valid_device_id(&self.device_id) {
            return Err(format!("invalid device id {:?}", self.device_id));
        }
        if self.period_ms == 0 {
            return Err("period must be > 0".into());
        }
        if self.capacity == 0 {
            return Err("buffer capacity must be >= 1".into());
        }
        Ok(())
    }
}

/// Intake counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntakeStats {
    pub accepted: u64,
    pub malformed: u64,
    /// Valid frames from a device other than the configured one.
    pub foreign: u64,
    /// Records evicted from the full buffer before reaching history.
    pub dropped: u64,
}

struct Buffer {
    /// Records not yet in history, oldest first, tagged with an intake number.
    queue: VecDeque<(u64, TelemetryRecord)>,
    next_no: u64,
    latest: Option<(u64, TelemetryRecord)>,
    latest_pushed: Option<u64>,
    dropped: u64,
}

/// Bounded drop-oldest hand-off between the frame source and the push loop.
/// This is the only state the two share.
pub struct Intake {
    device_id: String,
    capacity: usize,
    buffer: Mutex<Buffer>,
    accepted: AtomicU64,
    malformed: AtomicU64,
    foreign: AtomicU64,
}

impl Intake {
    pub fn new(device_id: impl Into<String>, capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be at least 1");
        Self {
            device_id: device_id.into(),
            capacity,
            buffer: Mutex::new(Buffer {
                queue: VecDeque::new(),
                next_no: 0,
                latest: None,
                latest_pushed: None,
                dropped: 0,
            }),
            accepted: AtomicU64::new(0),
            malformed: AtomicU64::new(0),
            foreign: AtomicU64::new(0),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Buffer> {
        self.buffer.lock().unwrap_or_else(PoisonError::into_inner)
    }

    /// Parses one wire line. Malformed lines are counted and skipped.
    pub fn push_line(&self, line: &[u8], recv_ts: u64) -> bool {
        match parse_frame(line) {
            Ok(frame) => self.push_frame(&frame, recv_ts),
            Err(e) => {
                self.malformed.fetch_add(1, Ordering::Relaxed);
                tracing::debug!(code = e.code(), error = %e, "malformed frame skipped");
                false
            }
        }
    }

    pub fn push_frame(&self, frame: &SensorFrame, recv_ts: u64) -> bool {
        if frame.device_id != self.device_id {
            self.foreign.fetch_add(1, Ordering::Relaxed);
            tracing::debug!(device = %frame.device_id, "frame from another device skipped");
            return false;
        }
        let record = to_record(frame, recv_ts);
        let mut b = self.lock();
        let no = b.next_no;
        b.next_no += 1;
        if b.queue.len() == self.capacity {
            b.queue.pop_front();
            b.dropped += 1;
        }
        b.queue.push_back((no, record.clone()));
        b.latest = Some((no, record));
        self.accepted.fetch_add(1, Ordering::Relaxed);
        true
    }

    pub fn pending(&self) -> usize {
        self.lock().queue.len()
    }

    pub fn stats(&self) -> IntakeStats {
        IntakeStats {
            accepted: self.accepted.load(Ordering::Relaxed),
            malformed: self.malformed.load(Ordering::Relaxed),
            foreign: self.foreign.load(Ordering::Relaxed),
            dropped: self.lock().dropped,
        }
    }

    fn unpushed_latest(&self) -> Option<(u64, TelemetryRecord)> {
        let b = self.lock();
        match &b.latest {
            Some((no, _)) if b.latest_pushed == Some(*no) => None,
            other => other.clone(),
        }
    }

    fn mark_latest_pushed(&self, no: u64) {
        let mut b = self.lock();
        if b.latest_pushed.is_none_or(|p| p < no) {
            b.latest_pushed = Some(no);
        }
    }

    fn front(&self) -> Option<(u64, TelemetryRecord)> {
        self.lock().queue.front().cloned()
    }

    /// Removes the front record if it is still `no` (it may have been evicted
    /// while the push was in flight).
    fn pop_if(&self, no: u64) {
        let mut b = self.lock();
        if b.queue.front().is_some_and(|(n, _)| *n == no) {
            b.queue.pop_front();
        }
    }
}

/// Outcome of one push period.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickReport {
    pub latest_patched: bool,
    pub posted: usize,
    /// Records still waiting for history after this tick.
    pub pending: usize,
    pub alarm: Option<AlertEvent>,
    pub error: Option<ClientError>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PushStats {
    pub latest_patches: u64,
    pub history_posts: u64,
    pub rejected: u64,
    pub failed_ticks: u64,
}

pub struct Gateway<C: StoreClient> {
    config: GatewayConfig,
    intake: Arc<Intake>,
    client: C,
    events: Vec<Arc<dyn AlertSink>>,
    alarm_seen: Option<u64>,
    stats: PushStats,
}

impl<C: StoreClient> Gateway<C> {
    pub fn new(config: GatewayConfig, client: C) -> Result<Self, String> {
        config.validate()?;
        let intake = Arc::new(Intake::new(config.device_id.clone(), config.capacity));
        Ok(Self {
            config,
            intake,
            client,
            events: Vec::new(),
            alarm_seen: None,
            stats: PushStats::default(),
        })
    }

    /// Where ALARM_TRIGGERED events go besides the log.
    pub fn with_event_sinks(mut self, sinks: Vec<Arc<dyn AlertSink>>) -> Self {
        self.events = sinks;
        self
    }

    pub fn intake(&self) -> Arc<Intake> {
        self.intake.clone()
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn stats(&self) -> PushStats {
        self.stats
    }

    fn rejected(&mut self, what: &str, e: &ClientError) {
        self.stats.rejected += 1;
        tracing::warn!(error = %e, "store rejected {what}; dropping it");
    }

    /// One push period: PATCH the newest record to `latest` if it changed,
    /// POST every buffered record to `history` in order, then check for an
    /// alarm command. Stops at the first transient store failure and leaves
    /// the rest buffered.
    pub fn tick(&mut self, now_ms: u64) -> TickReport {
        let mut report = TickReport::default();
        let result = self.push(&mut report).and_then(|()| {
            if self.config.poll_commands {
                report.alarm = self.poll_commands(now_ms)?;
            }
            Ok(())
        });
        if let Err(e) = result {
            self.stats.failed_ticks += 1;
            tracing::warn!(error = %e, pending = self.intake.pending(), "store push failed; buffering");
            report.error = Some(e);
        }
        report.pending = self.intake.pending();
        report
    }

    fn push(&mut self, report: &mut TickReport) -> Result<(), ClientError> {
        let device = self.config.device_id.clone();
        if let Some((no, record)) = self.intake.unpushed_latest() {
            let mut doc = record.to_json();
            // Clear the label left by the alert service on the previous record.
            doc["activity"] = Value::Null;
            match self.client.patch(&paths::latest(&device), &doc) {
                Ok(_) => {
                    report.latest_patched = true;
                    self.stats.latest_patches += 1;
                }
                Err(e) if e.is_transient() => return Err(e),
                Err(e) => self.rejected("latest record", &e),
            }
            self.intake.mark_latest_pushed(no);
        }
        while let Some((no, record)) = self.intake.front() {
            match self
                .client
                .post(&paths::history(&device), &record.to_json())
            {
                Ok(_) => {
                    report.posted += 1;
                    self.stats.history_posts += 1;
                }
                Err(e) if e.is_transient() => return Err(e),
                Err(e) => self.rejected("history record", &e),
            }
            self.intake.pop_if(no);
        }
        Ok(())
    }

    /// Emits one ALARM_TRIGGERED event per issued command and acknowledges it
    /// by resetting `alarm` to 0.
    fn poll_commands(&mut self, now_ms: u64) -> Result<Option<AlertEvent>, ClientError> {
        let path = paths::commands(&self.config.device_id);
        let Some(doc) = self.client.get(&path)? else {
            return Ok(None);
        };
        if doc.get("alarm").and_then(Value::as_u64) != Some(1) {
            return Ok(None);
        }
        let issued = doc.get("issuedTs").and_then(Value::as_u64).unwrap_or(0);
        let mut event = None;
        if self.alarm_seen != Some(issued) {
            let e = AlertEvent {
                ts: issued,
                device: self.config.device_id.clone(),
                kind: AlertKind::AlarmTriggered,
                severity: Severity::Info,
                activity: None,
                message: "find-my-bag alarm sounded".into(),
            };
            tracing::info!(device = %e.device, issued_ts = issued, "ALARM_TRIGGERED");
            deliver_all(&self.events, &e);
            self.alarm_seen = Some(issued);
            event = Some(e);
        }
        self.client
            .patch(&path, &json!({ "alarm": 0, "ackTs": now_ms }))?;
        Ok(event)
    }
}

/// Ticks every `period_ms` until `stop` is set, then makes one final
/// best-effort flush. Missed periods are skipped, not replayed.
pub fn run_gateway<C: StoreClient>(gateway: &mut Gateway<C>, clock: &dyn Clock, stop: &AtomicBool) {
    let period = gateway.config.period_ms;
    let mut next = clock.now_ms() + period;
    loop {
        let now = clock.now_ms();
        if !sleep_or_stop(clock, next.saturating_sub(now), stop) {
            break;
        }
        let now = clock.now_ms();
        gateway.tick(now);
        next += period;
        if next <= now {
            next = now + period;
        }
    }
    let report = gateway.tick(clock.now_ms());
    let stats = gateway.intake.stats();
    tracing::info!(
        pending = report.pending,
        accepted = stats.accepted,
        malformed = stats.malformed,
        dropped = stats.dropped,
        "gateway stopped"
    );
}
