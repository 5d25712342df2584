use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, PoisonError};
use std::time::Duration;

use thiserror::Error;

use super::rules::AlertEvent;

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("notification log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("webhook {url} failed after {attempts} attempts: {last}")]
    Webhook {
        url: String,
        attempts: u32,
        last: String,
    },
}

/// Destination for alert events. Implementations must accept concurrent
/// deliveries.
pub trait AlertSink: Send + Sync {
    fn name(&self) -> &str;
    fn deliver(&self, event: &AlertEvent) -> Result<(), SinkError>;
}

/// Append-only JSON-lines notification log.
pub struct FileSink {
    path: PathBuf,
    file: Mutex<File>,
}

impl FileSink {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, SinkError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| SinkError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl AlertSink for FileSink {
    fn name(&self) -> &str {
        "log"
    }

    fn deliver(&self, event: &AlertEvent) -> Result<(), SinkError> {
        let mut line = event.to_line();
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(PoisonError::into_inner);
        // One write per line so concurrent processes appending to the same
        // file do not interleave within a line.
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|source| SinkError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// POSTs each event as JSON. A failed delivery is attempted at most
/// `max_attempts` times in total.
pub struct WebhookSink {
    url: String,
    agent: ureq::Agent,
    max_attempts: u32,
    retry_delay: Duration,
}

impl WebhookSink {
    pub const DEFAULT_ATTEMPTS: u32 = 3;

    pub fn new(url: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(5)))
            .http_status_as_error(false)
            .build();
        Self {
            url: url.into(),
            agent: ureq::Agent::new_with_config(config),
            max_attempts: Self::DEFAULT_ATTEMPTS,
            retry_delay: Duration::from_millis(200),
        }
    }

    pub fn with_retry_delay(mut self, delay: Duration) -> Self {
        self.retry_delay = delay;
        self
    }

    fn attempt(&self, event: &AlertEvent) -> Result<(), String> {
        let resp = self
            .agent
            .post(&self.url)
            .send_json(event)
            .map_err(|e| e.to_string())?;
        if resp.status().is_success() {
            Ok(())
        } else {
            Err(format!("status {}", resp.status().as_u16()))
        }
    }
}

impl AlertSink for WebhookSink {
    fn name(&self) -> &str {
        "webhook"
    }

    fn deliver(&self, event: &AlertEvent) -> Result<(), SinkError> {
        let mut last = String::new();
        for attempt in 1..=self.max_attempts {
            match self.attempt(event) {
                Ok(()) => return Ok(()),
                Err(e) => {
                    tracing::debug!(url = %self.url, attempt, error = %e, "webhook attempt failed");
                    last = e;
                }
            }
            if attempt < self.max_attempts {
                std::thread::sleep(self.retry_delay * attempt);
            }
        }
        Err(SinkError::Webhook {
            url: self.url.clone(),
            attempts: self.max_attempts,
            last,
        })
    }
}

/// Keeps events in memory; for tests and embedding.
#[derive(Default)]
pub struct MemorySink {
    events: Mutex<Vec<AlertEvent>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> Vec<AlertEvent> {
        self.events
            .lock()
            .unwrap_or_else(PoisonError::into_inner)
            .clone()
    }
}

impl AlertSink for MemorySink {
    fn name(&self) -> &str {
        "memory"
    }

    fn deliver(&self, event: &AlertEvent) -> Result<(), SinkError> {
        self.events
            .lock()
            .unwrap_or_else(PoisonError::into_inner)
            .push(event.clone());
        Ok(())
    }
}

/// Delivers to every sink; one failing sink does not stop the others.
/// Returns how many sinks failed.
pub fn deliver_all(sinks: &[Arc<dyn AlertSink>], event: &AlertEvent) -> usize {
    let mut failures = 0;
    for sink in sinks {
        if let Err(e) = sink.deliver(event) {
            tracing::warn!(sink = sink.name(), error = %e, "alert delivery failed");
            failures += 1;
        }
    }
    failures
}
