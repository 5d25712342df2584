use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::TelemetryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlertKind {
    Sos,
    Gas,
    Water,
    Activity,
    AlarmTriggered,
}

impl AlertKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AlertKind::Sos => "SOS",
            AlertKind::Gas => "GAS",
            AlertKind::Water => "WATER",
            AlertKind::Activity => "ACTIVITY",
            AlertKind::AlarmTriggered => "ALARM_TRIGGERED",
        }
    }
}

impl fmt::Display for AlertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Info,
    Warn,
    Emergency,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "INFO",
            Severity::Warn => "WARN",
            Severity::Emergency => "EMERGENCY",
        })
    }
}

/// One notification. Serializes to the notification-log line format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    /// Timestamp of the record (or command) that raised the event.
    pub ts: u64,
    pub device: String,
    pub kind: AlertKind,
    pub severity: Severity,
    pub activity: Option<String>,
    pub message: String,
}

impl AlertEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid alert rules: {0}")]
pub struct RuleError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlertRuleSet {
    pub mq2_max: f64,
    pub mq135_max: f64,
    pub water_alert: bool,
    pub sos_alert: bool,
    pub alert_classes: BTreeSet<String>,
    pub dedup_window_ms: u64,
}

impl Default for AlertRuleSet {
    fn default() -> Self {
        Self {
            mq2_max: 300.0,
            mq135_max: 200.0,
            water_alert: true,
            sos_alert: true,
            alert_classes: BTreeSet::from(["Falling".to_string()]),
            dedup_window_ms: 30_000,
        }
    }
}

impl AlertRuleSet {
    pub fn validate(&self) -> Result<(), RuleError> {
        for (name, v) in [("mq2_max", self.mq2_max), ("mq135_max", self.mq135_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(RuleError(format!(
                    "{name} must be a positive number, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Last emitted event time per `(device, kind)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DedupState {
    last: HashMap<(String, AlertKind), u64>,
}

impl DedupState {
    /// True (and remembered) unless an event for the same key was emitted
    /// less than `window_ms` away from `ts`.
    pub fn admit(&mut self, device: &str, kind: AlertKind, ts: u64, window_ms: u64) -> bool {
        let key = (device.to_string(), kind);
        if let Some(&prev) = self.last.get(&key) {
            if prev.abs_diff(ts) < window_ms {
                return false;
            }
        }
        self.last.insert(key, ts);
        true
    }
}

fn event(
    record: &TelemetryRecord,
    kind: AlertKind,
    severity: Severity,
    activity: Option<&str>,
    message: String,
) -> AlertEvent {
    AlertEvent {
        ts: record.ts,
        device: record.device_id.clone(),
        kind,
        severity,
        activity: activity.map(str::to_string),
        message,
    }
}

/// Rule evaluation for one record. Candidate events come in the fixed order
/// SOS, GAS, WATER, ACTIVITY; each passes through the dedup window.
pub fn eval_rules(
    record: &TelemetryRecord,
    activity: Option<&str>,
    rules: &AlertRuleSet,
    dedup: &mut DedupState,
) -> Vec<AlertEvent> {
    let mut candidates = Vec::new();
    if rules.sos_alert && record.sos {
        candidates.push(event(
            record,
            AlertKind::Sos,
            Severity::Emergency,
            activity,
            "SOS button pressed".into(),
        ));
    }
    let mq2_high = record.gas.mq2 > rules.mq2_max;
    let mq135_high = record.gas.mq135 > rules.mq135_max;
    if mq2_high || mq135_high {
        let mut parts = Vec::new();
        if mq2_high {
            parts.push(format!("mq2 {} > {}", record.gas.mq2, rules.mq2_max));
        }
        if mq135_high {
            parts.push(format!("mq135 {} > {}", record.gas.mq135, rules.mq135_max));
        }
        candidates.push(event(
            record,
            AlertKind::Gas,
            Severity::Warn,
            activity,
            format!("gas level high: {}", parts.join(", ")),
        ));
    }
    if rules.water_alert && record.water {
        candidates.push(event(
            record,
            AlertKind::Water,
            Severity::Warn,
            activity,
            "water detected in bag".into(),
        ));
    }
    if let Some(a) = activity.filter(|a| rules.alert_classes.contains(*a)) {
        candidates.push(event(
            record,
            AlertKind::Activity,
            Severity::Emergency,
            activity,
            format!("activity {a} detected"),
        ));
    }
    candidates
        .into_iter()
        .filter(|e| dedup.admit(&e.device, e.kind, e.ts, rules.dedup_window_ms))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::to_record;
    use serde_json::json;
    use smartbag_core::frame::SensorFrame;

    fn record(ts: u64, f: impl FnOnce(&mut SensorFrame)) -> TelemetryRecord {
        let mut frame = SensorFrame {
            device_id: "BAG1".into(),
            ts,
            mq2: 120.0,
            mq135: 80.0,
            ..Default::default()
        };
        f(&mut frame);
        to_record(&frame, ts)
    }

    fn kinds(events: &[AlertEvent]) -> Vec<(AlertKind, Severity)> {
        events.iter().map(|e| (e.kind, e.severity)).collect()
    }

    #[test]
    fn quiet_record_raises_nothing() {
        let mut d = DedupState::default();
        assert!(eval_rules(
            &record(0, |_| {}),
            Some("Walking"),
            &AlertRuleSet::default(),
            &mut d
        )
        .is_empty());
    }

    #[test]
    fn sos_is_one_emergency() {
        let mut d = DedupState::default();
        let ev = eval_rules(
            &record(5, |f| f.sos = true),
            Some("Idle"),
            &AlertRuleSet::default(),
            &mut d,
        );
        assert_eq!(kinds(&ev), vec![(AlertKind::Sos, Severity::Emergency)]);
        assert_eq!(ev[0].ts, 5);
        assert_eq!(ev[0].activity.as_deref(), Some("Idle"));
    }

    #[test]
    fn gas_threshold_is_strict() {
        let rules = AlertRuleSet::default();
        let mut d = DedupState::default();
        assert!(eval_rules(&record(0, |f| f.mq2 = 300.0), None, &rules, &mut d).is_empty());
        assert!(eval_rules(&record(0, |f| f.mq135 = 200.0), None, &rules, &mut d).is_empty());
        let ev = eval_rules(&record(0, |f| f.mq135 = 200.5), None, &rules, &mut d);
        assert_eq!(kinds(&ev), vec![(AlertKind::Gas, Severity::Warn)]);
    }

    #[test]
    fn fixed_kind_order() {
        let mut d = DedupState::default();
        let r = record(0, |f| {
            f.sos = true;
            f.water = true;
            f.mq2 = 1000.0;
        });
        let ev = eval_rules(&r, Some("Falling"), &AlertRuleSet::default(), &mut d);
        assert_eq!(
            kinds(&ev),
            vec![
                (AlertKind::Sos, Severity::Emergency),
                (AlertKind::Gas, Severity::Warn),
                (AlertKind::Water, Severity::Warn),
                (AlertKind::Activity, Severity::Emergency),
            ]
        );
    }

    #[test]
    fn dedup_window() {
        let rules = AlertRuleSet::default();
        let mut d = DedupState::default();
        assert_eq!(
            eval_rules(&record(0, |f| f.water = true), None, &rules, &mut d).len(),
            1
        );
        assert!(eval_rules(&record(10_000, |f| f.water = true), None, &rules, &mut d).is_empty());
        // A different kind is not suppressed.
        assert_eq!(
            eval_rules(&record(10_000, |f| f.sos = true), None, &rules, &mut d).len(),
            1
        );
        assert_eq!(
            eval_rules(&record(30_000, |f| f.water = true), None, &rules, &mut d).len(),
            1
        );

        let no_window = AlertRuleSet {
            dedup_window_ms: 0,
            ..rules
        };
        let mut d = DedupState::default();
        for _ in 0..3 {
            assert_eq!(
                eval_rules(&record(0, |f| f.water = true), None, &no_window, &mut d).len(),
                1
            );
        }
    }

    #[test]
    fn disabled_rules_and_classes() {
        let rules = AlertRuleSet {
            sos_alert: false,
            water_alert: false,
            alert_classes: BTreeSet::new(),
            ..Default::default()
        };
        let mut d = DedupState::default();
        let r = record(0, |f| {
            f.sos = true;
            f.water = true;
        });
        assert!(eval_rules(&r, Some("Falling"), &rules, &mut d).is_empty());
    }

    #[test]
    fn event_line_format() {
        let e = AlertEvent {
            ts: 12,
            device: "BAG1".into(),
            kind: AlertKind::AlarmTriggered,
            severity: Severity::Info,
            activity: None,
            message: "m".into(),
        };
        let v: serde_json::Value = serde_json::from_str(&e.to_line()).unwrap();
        assert_eq!(
            v,
            json!({"ts": 12, "device": "BAG1", "kind": "ALARM_TRIGGERED", "severity": "INFO", "activity": null, "message": "m"})
        );
    }

    #[test]
    fn rule_validation() {
        assert!(AlertRuleSet::default().validate().is_ok());
        assert!(AlertRuleSet {
            mq2_max: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AlertRuleSet {
            mq135_max: f64::NAN,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
