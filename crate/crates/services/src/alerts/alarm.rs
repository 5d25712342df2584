//! Find-my-bag alarm: the alert side raises `alarm = 1` on the bag's command
//! document, the gateway acknowledges by resetting it to 0.

use serde_json::{json, Value};
use thiserror::Error;

use crate::client::{ClientError, StoreClient};
use crate::paths;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlarmState {
    Requested,
    Delivered,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlarmCommand {
    pub device: String,
    pub issued_ts: u64,
    pub state: AlarmState,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlarmError {
    #[error("invalid device id {0:?}")]
    InvalidDevice(String),
    #[error(transparent)]
    Store(#[from] ClientError),
}

fn field_u64(doc: &Value, key: &str) -> Option<u64> {
    doc.get(key).and_then(Value::as_u64)
}

/// Reads the command document. `None` if no alarm was ever issued.
pub fn alarm_status(
    client: &dyn StoreClient,
    device: &str,
) -> Result<Option<AlarmCommand>, AlarmError> {
    if !paths::valid_device_id(device) {
        return Err(AlarmError::InvalidDevice(device.to_string()));
    }
    let Some(doc) = client.get(&paths::commands(device))? else {
        return Ok(None);
    };
    let Some(issued_ts) = field_u64(&doc, "issuedTs") else {
        return Ok(None);
    };
    let state = if field_u64(&doc, "alarm") == Some(1) {
        AlarmState::Requested
    } else {
        AlarmState::Delivered
    };
    Ok(Some(AlarmCommand {
        device: device.to_string(),
        issued_ts,
        state,
    }))
}

/// Requests the bag alarm. If a command is still outstanding it is returned
/// unchanged, so a device never has more than one.
pub fn trigger_alarm(
    client: &dyn StoreClient,
    device: &str,
    now_ms: u64,
) -> Result<AlarmCommand, AlarmError> {
    if let Some(cmd) = alarm_status(client, device)? {
        if cmd.state == AlarmState::Requested {
            return Ok(cmd);
        }
    }
    client.patch(
        &paths::commands(device),
        &json!({ "alarm": 1, "issuedTs": now_ms, "ackTs": null }),
    )?;
    Ok(AlarmCommand {
        device: device.to_string(),
        issued_ts: now_ms,
        state: AlarmState::Requested,
    })
}
