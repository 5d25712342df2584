//! Append-only operation log.
//!
//! Record: `u32 LE payload length | payload | u32 LE CRC32(payload)`.
//! Payload: `u8 op | u16 LE path length | path | op fields | JSON body`, where
//! appends carry `u16 LE id length | push id | u64 LE receive millis`.

use serde_json::Value;

use super::path::StorePath;
use super::state::StoreState;

const OP_PATCH: u8 = 1;
const OP_APPEND: u8 = 2;
const FRAMING: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum LogOp {
    Patch {
        path: StorePath,
        doc: Value,
    },
    Append {
        path: StorePath,
        id: String,
        recv_ms: u64,
        doc: Value,
    },
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    let len = u16::try_from(s.len()).expect("paths and ids are short");
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_record(op: &LogOp) -> Vec<u8> {
    let mut payload = Vec::new();
    match op {
        LogOp::Patch { path, doc } => {
            payload.push(OP_PATCH);
            put_str(&mut payload, path.as_str());
            payload.extend(serde_json::to_vec(doc).expect("json values serialize"));
        }
        LogOp::Append {
            path,
            id,
            recv_ms,
            doc,
        } => {
            payload.push(OP_APPEND);
            put_str(&mut payload, path.as_str());
            put_str(&mut payload, id);
            payload.extend_from_slice(&recv_ms.to_le_bytes());
            payload.extend(serde_json::to_vec(doc).expect("json values serialize"));
        }
    }
    let mut record = Vec::with_capacity(payload.len() + FRAMING);
    record.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    record.extend_from_slice(&payload);
    record.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    record
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.buf.len() < n {
            return None;
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Some(head)
    }

    fn str(&mut self) -> Option<&'a str> {
        let len = u16::from_le_bytes(self.take(2)?.try_into().ok()?) as usize;
        std::str::from_utf8(self.take(len)?).ok()
    }
}

pub fn decode_payload(payload: &[u8]) -> Option<LogOp> {
    let mut r = Reader { buf: payload };
    let op = r.take(1)?[0];
    let path = StorePath::parse(r.str()?).ok()?;
    match op {
        OP_PATCH => Some(LogOp::Patch {
            path,
            doc: serde_json::from_slice(r.buf).ok()?,
        }),
        OP_APPEND => {
            let id = r.str()?.to_string();
            let recv_ms = u64::from_le_bytes(r.take(8)?.try_into().ok()?);
            Some(LogOp::Append {
                path,
                id,
                recv_ms,
                doc: serde_json::from_slice(r.buf).ok()?,
            })
        }
        _ => None,
    }
}

/// Applies one logged operation to `state`. Returns false if the op does not
/// apply, which only happens for a damaged log.
pub fn apply_op(state: &mut StoreState, op: &LogOp) -> bool {
    let change = match op {
        LogOp::Patch { path, doc } => state.prepare_patch(path, doc),
        LogOp::Append {
            path,
            id,
            recv_ms,
            doc,
        } => state.prepare_append(path, doc, id.clone(), *recv_ms),
    };
    match change {
        Ok(c) => {
            state.apply(c);
            true
        }
        Err(_) => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayStop {
    /// The log ends inside a record; normal after a crash mid-write.
    TruncatedTail,
    /// A complete record failed its checksum or could not be applied.
    Corrupt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub state: StoreState,
    pub records: usize,
    /// Length of the prefix made of whole, valid records.
    pub valid_len: usize,
    pub stop: Option<ReplayStop>,
}

/// Rebuilds state from log bytes, stopping at the first incomplete or
/// damaged record. Never fails.
pub fn replay_log(bytes: &[u8]) -> Replay {
    let mut state = StoreState::default();
    let mut pos = 0;
    let mut records = 0;
    let stop = loop {
        let rest = &bytes[pos..];
        if rest.is_empty() {
            break None;
        }
        if rest.len() < 4 {
            break Some(ReplayStop::TruncatedTail);
        }
        let len = u32::from_le_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
        let Some(total) = len.checked_add(FRAMING).filter(|&t| t <= rest.len()) else {
            break Some(ReplayStop::TruncatedTail);
        };
        let payload = &rest[4..4 + len];
        let stored = u32::from_le_bytes(rest[4 + len..total].try_into().expect("4 bytes"));
        if stored != crc32fast::hash(payload) {
            break Some(ReplayStop::Corrupt);
        }
        match decode_payload(payload) {
            Some(op) if apply_op(&mut state, &op) => {}
            _ => break Some(ReplayStop::Corrupt),
        }
        pos += total;
        records += 1;
    };
    Replay {
        state,
        records,
        valid_len: pos,
        stop,
    }
}
