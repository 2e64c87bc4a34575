//! The hash-chained, append-only event log.
//!
//! One event per line, serialized as compact JSON with keys in a fixed order
//! and payload keys sorted. Each event's `hash` is
//! `SHA-256(prev_hash ++ canonical({seq, ts, kind, payload}))`; the first
//! event chains from 64 zeros.
//!
//! Reading is strict about bytes: a line must be exactly the canonical
//! rendering of the event it decodes to, so equivalent-but-different spellings
//! (whitespace, escapes, timestamp case) are rejected like any other damage.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::time::Timestamp;

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    NodeUpserted,
    NodeRemoved,
    LinkAdded,
    LinkRemoved,
    SuspectMarked,
    SuspectCleared,
    CrCreated,
    CrTransitioned,
    CrItemResolved,
    CrRecomputed,
    BaselineCreated,
    Ingested,
}

impl EventKind {
    /// Whether events of this kind advance `graph_revision`.
    pub fn mutates_graph(self) -> bool {
        matches!(
            self,
            EventKind::NodeUpserted
                | EventKind::NodeRemoved
                | EventKind::LinkAdded
                | EventKind::LinkRemoved
                | EventKind::SuspectCleared
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub seq: u64,
    pub ts: Timestamp,
    pub kind: EventKind,
    pub payload: Value,
    pub prev_hash: String,
    pub hash: String,
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // serde_json's map is ordered by key unless `preserve_order` is enabled
    let v = serde_json::to_value(value).expect("serializable");
    serde_json::to_string(&v).expect("serializable")
}

pub fn event_hash(prev_hash: &str, seq: u64, ts: Timestamp, kind: EventKind, payload: &Value) -> String {
    let envelope = json!({ "seq": seq, "ts": ts, "kind": kind, "payload": payload });
    let mut h = Sha256::new();
    h.update(prev_hash.as_bytes());
    h.update(canonical_json(&envelope).as_bytes());
    hex::encode(h.finalize())
}

impl Event {
    pub fn new(seq: u64, ts: Timestamp, kind: EventKind, payload: Value, prev_hash: &str) -> Self {
        let payload = serde_json::from_str(&canonical_json(&payload)).expect("round trip");
        let hash = event_hash(prev_hash, seq, ts, kind, &payload);
        Event {
            seq,
            ts,
            kind,
            payload,
            prev_hash: prev_hash.to_string(),
            hash,
        }
    }

    pub fn recompute_hash(&self) -> String {
        event_hash(&self.prev_hash, self.seq, self.ts, self.kind, &self.payload)
    }

    /// The log line for this event, without the newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogError {
    #[error("event chain broken at seq {0}")]
    ChainBroken(u64),
    #[error("final line (seq {0}) is incomplete")]
    TornTail(u64),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogRead {
    pub events: Vec<Event>,
    /// Byte length of the valid prefix when a torn final line was dropped.
    pub truncate_to: Option<usize>,
    pub warnings: Vec<String>,
}

/// Decodes and verifies a log. With `recover`, an unterminated final line is
/// dropped with a warning; otherwise it is an error.
///
/// A chain break is reported at the first seq whose link to its predecessor
/// fails: tampering with event `n` shows up at `n + 1`, or at `n` when it is
/// the last event.
pub fn read_log(bytes: &[u8], recover: bool) -> Result<LogRead, LogError> {
    let mut out = LogRead::default();
    let mut body = bytes;
    if !bytes.is_empty() && !bytes.ends_with(b"\n") {
        let cut = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        let seq = bytes[..cut].iter().filter(|b| **b == b'\n').count() as u64 + 1;
        if !recover {
            return Err(LogError::TornTail(seq));
        }
        out.warnings
            .push(format!("dropped incomplete final line (seq {seq}, {} bytes)", bytes.len() - cut));
        out.truncate_to = Some(cut);
        body = &bytes[..cut];
    }
    if body.is_empty() {
        return Ok(out);
    }
    let mut prev: Option<(String, String)> = None; // (stored hash, recomputed hash)
    for (i, line) in body[..body.len() - 1].split(|b| *b == b'\n').enumerate() {
        let seq = i as u64 + 1;
        let broken = LogError::ChainBroken(seq);
        let text = std::str::from_utf8(line).map_err(|_| broken.clone())?;
        let ev: Event = serde_json::from_str(text).map_err(|_| broken.clone())?;
        if ev.seq != seq || ev.to_line() != text {
            return Err(broken);
        }
        match &prev {
            None if ev.prev_hash != GENESIS_HASH => return Err(broken),
            Some((stored, recomputed)) if &ev.prev_hash != stored || &ev.prev_hash != recomputed => {
                return Err(broken)
            }
            _ => {}
        }
        prev = Some((ev.hash.clone(), ev.recompute_hash()));
        out.events.push(ev);
    }
    if let Some((stored, recomputed)) = prev {
        if stored != recomputed {
            return Err(LogError::ChainBroken(out.events.len() as u64));
        }
    }
    Ok(out)
}
