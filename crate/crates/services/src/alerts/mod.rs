//! Alert engine: classifies stored telemetry, evaluates alert rules and
//! delivers notifications; also issues find-my-bag alarm commands.

mod alarm;
mod config;
mod rules;
mod service;
mod sink;

pub use alarm::{alarm_status, trigger_alarm, AlarmCommand, AlarmError, AlarmState};
pub use config::{AlertConfig, ConfigError};
pub use rules::{eval_rules, AlertEvent, AlertKind, AlertRuleSet, DedupState, RuleError, Severity};
pub use service::{
    classify_record, run_alertsvc, AlertError, AlertService, AlertSettings, AlertStats,
    ClassifyError, Cursors, PollReport,
};
pub use sink::{deliver_all, AlertSink, FileSink, MemorySink, SinkError, WebhookSink};
